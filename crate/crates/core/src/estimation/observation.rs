use serde::{Deserialize, Serialize};

use super::gmm::GmmParams;
use crate::{Error, Result};

/// Entries per mixture component: mean x, mean y, then the 2x2 covariance row by row.
pub const OBS_PER_COMPONENT: usize = 6;

/// Flattened learner state: the controlled block followed by the adversarial block.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Observation {
    pub values: Vec<f64>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Observation length for `n_cluster` components per swarm.
    pub fn dim(n_cluster: usize) -> usize {
        2 * OBS_PER_COMPONENT * n_cluster
    }
}

fn push_block(out: &mut Vec<f64>, g: &GmmParams, scale: f64) {
    let s2 = scale * scale;
    for (m, c) in g.means.iter().zip(&g.covariances) {
        out.extend_from_slice(&[
            m[0] / scale,
            m[1] / scale,
            c[0][0] / s2,
            c[0][1] / s2,
            c[1][0] / s2,
            c[1][1] / s2,
        ]);
    }
}

/// Lays out both (canonicalised) mixtures, positions divided by `map_scale`
/// and covariances by its square.
pub fn build_observation(
    controlled: &GmmParams,
    adversarial: &GmmParams,
    map_scale: f64,
) -> Result<Observation> {
    if controlled.k() != adversarial.k() {
        return Err(Error::contract(format!(
            "build_observation: {} controlled vs {} adversarial components",
            controlled.k(),
            adversarial.k()
        )));
    }
    if !(map_scale > 0.0) {
        return Err(Error::contract("build_observation: map scale must be positive"));
    }
    let mut values = Vec::with_capacity(Observation::dim(controlled.k()));
    push_block(&mut values, controlled, map_scale);
    push_block(&mut values, adversarial, map_scale);
    Ok(Observation { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::canonicalize;
    use proptest::prelude::*;

    #[test]
    fn direct_layout() {
        let c = GmmParams::isotropic([1.0, 2.0], 1.0);
        let a = GmmParams::isotropic([3.0, 4.0], 1.0);
        let obs = build_observation(&c, &a, 1.0).unwrap();
        assert_eq!(
            obs.values,
            vec![1.0, 2.0, 1.0, 0.0, 0.0, 1.0, 3.0, 4.0, 1.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn three_clusters_give_36() {
        let g = GmmParams {
            weights: vec![0.2, 0.3, 0.5],
            means: vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]],
            covariances: vec![[[1.0, 0.2], [0.2, 1.0]]; 3],
        };
        assert_eq!(build_observation(&g, &g, 10_000.0).unwrap().len(), 36);
        assert_eq!(Observation::dim(3), 36);
    }

    #[test]
    fn scale_rule() {
        let g = GmmParams::isotropic([400.0, -200.0], 900.0);
        let one = build_observation(&g, &g, 100.0).unwrap();
        let two = build_observation(&g, &g, 200.0).unwrap();
        for (i, (a, b)) in one.values.iter().zip(&two.values).enumerate() {
            let factor = if i % 6 < 2 { 2.0 } else { 4.0 };
            assert!((a - b * factor).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_components_rejected() {
        let one = GmmParams::isotropic([0.0, 0.0], 1.0);
        let two = GmmParams {
            weights: vec![0.5, 0.5],
            means: vec![[0.0, 0.0]; 2],
            covariances: vec![[[1.0, 0.0], [0.0, 1.0]]; 2],
        };
        assert!(matches!(build_observation(&one, &two, 1.0), Err(Error::Contract(_))));
    }

    proptest! {
        #[test]
        fn permutation_invariant(xs in proptest::collection::vec((-1e3..1e3f64, -1e3..1e3f64, 0.1..50.0f64), 3), rot in 0usize..3) {
            let g = GmmParams {
                weights: vec![1.0 / 3.0; 3],
                means: xs.iter().map(|&(x, y, _)| [x, y]).collect(),
                covariances: xs.iter().map(|&(_, _, v)| [[v, 0.1], [0.1, v]]).collect(),
            };
            let mut p = g.clone();
            p.means.rotate_left(rot);
            p.covariances.rotate_left(rot);
            let a = build_observation(&canonicalize(&g), &canonicalize(&g), 10.0).unwrap();
            let b = build_observation(&canonicalize(&p), &canonicalize(&p), 10.0).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
