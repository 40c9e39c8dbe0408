use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::control::{assign_groups, KMeansOptions};
use crate::{Error, Result};

pub type Cov2 = [[f64; 2]; 2];

/// Mixture of 2-D Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<[f64; 2]>,
    pub covariances: Vec<Cov2>,
}

impl GmmParams {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Single isotropic component.
    pub fn isotropic(mean: [f64; 2], var: f64) -> Self {
        Self {
            weights: vec![1.0],
            means: vec![mean],
            covariances: vec![[[var, 0.0], [0.0, var]]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmOptions {
    /// Stop once the mean log-likelihood improves by less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Added to every covariance diagonal in each M-step (m^2).
    pub reg: f64,
    /// k-means restarts used for the initial partition.
    pub init_restarts: usize,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            tol: 0.01,
            max_iter: 100,
            reg: 1e-6,
            init_restarts: 3,
        }
    }
}

/// Fitted mixture with its convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub params: GmmParams,
    /// Mean log-likelihood at the initial partition and after every M-step.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

struct Component {
    log_weight: f64,
    mean: [f64; 2],
    inv: [f64; 3],
    log_norm: f64,
}

fn components(g: &GmmParams) -> Vec<Component> {
    g.weights
        .iter()
        .zip(&g.means)
        .zip(&g.covariances)
        .map(|((&w, &mean), c)| {
            let (a, b, d) = (c[0][0], 0.5 * (c[0][1] + c[1][0]), c[1][1]);
            let det = a * d - b * b;
            Component {
                log_weight: if w > 0.0 { w.ln() } else { f64::NEG_INFINITY },
                mean,
                inv: [d / det, -b / det, a / det],
                log_norm: -TAU.ln() - 0.5 * det.ln(),
            }
        })
        .collect()
}

impl Component {
    fn log_joint(&self, p: [f64; 2]) -> f64 {
        if self.log_weight == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let (dx, dy) = (p[0] - self.mean[0], p[1] - self.mean[1]);
        let q = self.inv[0] * dx * dx + 2.0 * self.inv[1] * dx * dy + self.inv[2] * dy * dy;
        self.log_weight + self.log_norm - 0.5 * q
    }
}

/// E-step: fills `resp` (row per point) and returns the mean log-likelihood.
fn e_step(comps: &[Component], points: &[[f64; 2]], resp: &mut [f64]) -> f64 {
    let k = comps.len();
    let mut total = 0.0;
    for (p, row) in points.iter().zip(resp.chunks_mut(k)) {
        let mut max = f64::NEG_INFINITY;
        for (r, c) in row.iter_mut().zip(comps) {
            *r = c.log_joint(*p);
            max = max.max(*r);
        }
        let mut sum = 0.0;
        for r in row.iter_mut() {
            *r = if *r == f64::NEG_INFINITY { 0.0 } else { (*r - max).exp() };
            sum += *r;
        }
        for r in row.iter_mut() {
            *r /= sum;
        }
        total += max + sum.ln();
    }
    total / points.len() as f64
}

fn m_step(points: &[[f64; 2]], resp: &[f64], prev: &GmmParams, reg: f64) -> GmmParams {
    let k = prev.k();
    let n = points.len() as f64;
    let mut out = prev.clone();
    for j in 0..k {
        let nk: f64 = resp.chunks(k).map(|r| r[j]).sum();
        if nk <= f64::MIN_POSITIVE {
            out.weights[j] = 0.0;
            out.covariances[j] = [[reg, 0.0], [0.0, reg]];
            continue;
        }
        let mut mean = [0.0; 2];
        for (p, r) in points.iter().zip(resp.chunks(k)) {
            mean[0] += r[j] * p[0];
            mean[1] += r[j] * p[1];
        }
        mean = [mean[0] / nk, mean[1] / nk];
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for (p, r) in points.iter().zip(resp.chunks(k)) {
            let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
            sxx += r[j] * dx * dx;
            sxy += r[j] * dx * dy;
            syy += r[j] * dy * dy;
        }
        let xy = sxy / nk;
        out.weights[j] = nk / n;
        out.means[j] = mean;
        out.covariances[j] = [[sxx / nk + reg, xy], [xy, syy / nk + reg]];
    }
    let wsum: f64 = out.weights.iter().sum();
    for w in &mut out.weights {
        *w /= wsum;
    }
    out
}

fn initial_params<R: Rng + ?Sized>(
    points: &[[f64; 2]],
    k: usize,
    opts: &GmmOptions,
    rng: &mut R,
) -> Result<GmmParams> {
    let km = KMeansOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        restarts: opts.init_restarts,
    };
    let groups = assign_groups(points, k, &km, rng)?;
    // a hard-assignment M-step turns the partition into mixture parameters
    let mut resp = vec![0.0; points.len() * k];
    for (i, &l) in groups.labels.iter().enumerate() {
        resp[i * k + l] = 1.0;
    }
    let seed = GmmParams {
        weights: vec![1.0 / k as f64; k],
        means: groups.centers.clone(),
        covariances: vec![[[opts.reg, 0.0], [0.0, opts.reg]]; k],
    };
    Ok(m_step(points, &resp, &seed, opts.reg))
}

/// EM fit with convergence history; see [`fit_gmm`].
pub fn fit_gmm_traced<R: Rng + ?Sized>(
    points: &[[f64; 2]],
    k: usize,
    opts: &GmmOptions,
    rng: &mut R,
) -> Result<GmmFit> {
    if points.is_empty() {
        return Err(Error::EmptySwarm);
    }
    if k == 0 {
        return Err(Error::contract("fit_gmm: k must be at least 1"));
    }
    let fitted = k.min(points.len());
    let mut params = initial_params(points, fitted, opts, rng)?;
    let mut resp = vec![0.0; points.len() * fitted];
    let mut ll = e_step(&components(&params), points, &mut resp);
    let mut trace = vec![ll];
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = m_step(points, &resp, &params, opts.reg);
        let next_ll = e_step(&components(&next), points, &mut resp);
        trace.push(next_ll);
        params = next;
        let gain = next_ll - ll;
        ll = next_ll;
        if gain < opts.tol {
            break;
        }
    }

    if fitted < k {
        let n = points.len() as f64;
        let centroid = points
            .iter()
            .fold([0.0, 0.0], |a, p| [a[0] + p[0] / n, a[1] + p[1] / n]);
        for _ in fitted..k {
            params.weights.push(0.0);
            params.means.push(centroid);
            params.covariances.push([[opts.reg, 0.0], [0.0, opts.reg]]);
        }
    }
    Ok(GmmFit {
        params,
        trace,
        iterations,
    })
}

/// Fits a `k`-component mixture by EM, initialised from a k-means partition.
///
/// When there are fewer points than components, the surplus components sit
/// on the data centroid with zero weight and the floor covariance.
pub fn fit_gmm<R: Rng + ?Sized>(
    points: &[[f64; 2]],
    k: usize,
    opts: &GmmOptions,
    rng: &mut R,
) -> Result<GmmParams> {
    fit_gmm_traced(points, k, opts, rng).map(|f| f.params)
}

/// Mean per-point log density under the mixture.
pub fn gmm_log_likelihood(g: &GmmParams, points: &[[f64; 2]]) -> f64 {
    let mut resp = vec![0.0; points.len() * g.k()];
    e_step(&components(g), points, &mut resp)
}

/// Posterior component probabilities, one row of length `k` per point.
pub fn responsibilities(g: &GmmParams, points: &[[f64; 2]]) -> Vec<Vec<f64>> {
    let mut resp = vec![0.0; points.len() * g.k()];
    e_step(&components(g), points, &mut resp);
    resp.chunks(g.k()).map(<[f64]>::to_vec).collect()
}

/// Orders components by mean x, then mean y.
pub fn canonicalize(g: &GmmParams) -> GmmParams {
    let mut order: Vec<usize> = (0..g.k()).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (g.means[a], g.means[b]);
        ma[0].total_cmp(&mb[0]).then(ma[1].total_cmp(&mb[1]))
    });
    GmmParams {
        weights: order.iter().map(|&i| g.weights[i]).collect(),
        means: order.iter().map(|&i| g.means[i]).collect(),
        covariances: order.iter().map(|&i| g.covariances[i]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn clump(rng: &mut crate::SimRng, c: [f64; 2], sd: f64, n: usize) -> Vec<[f64; 2]> {
        let nd = Normal::new(0.0, sd).unwrap();
        (0..n)
            .map(|_| [c[0] + nd.sample(rng), c[1] + nd.sample(rng)])
            .collect()
    }

    fn mean_of(pts: &[[f64; 2]]) -> [f64; 2] {
        let n = pts.len() as f64;
        pts.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0] / n, a[1] + p[1] / n])
    }

    fn min_eigen(c: &Cov2) -> f64 {
        let (a, b, d) = (c[0][0], c[0][1], c[1][1]);
        let tr = a + d;
        let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
        0.5 * (tr - disc)
    }

    #[test]
    fn identical_points_hit_the_floor() {
        let pts = vec![[3.0, 4.0]; 50];
        let g = fit_gmm(&pts, 1, &GmmOptions::default(), &mut seeded_rng(0)).unwrap();
        assert_eq!(g.means[0], [3.0, 4.0]);
        assert_eq!(g.covariances[0], [[1e-6, 0.0], [0.0, 1e-6]]);
        assert_eq!(g.weights, vec![1.0]);
    }

    #[test]
    fn recovers_two_tight_clusters() {
        let mut rng = seeded_rng(42);
        let a = clump(&mut rng, [0.0, 0.0], 0.5, 200);
        let b = clump(&mut rng, [100.0, 0.0], 0.5, 200);
        let pts: Vec<_> = a.iter().chain(&b).copied().collect();
        let g = canonicalize(&fit_gmm(&pts, 2, &GmmOptions::default(), &mut rng).unwrap());
        for (m, want) in g.means.iter().zip([mean_of(&a), mean_of(&b)]) {
            assert!((m[0] - want[0]).hypot(m[1] - want[1]) < 0.2);
        }
    }

    #[test]
    fn three_components_weights_sum_to_one() {
        let mut rng = seeded_rng(1);
        let mut pts = clump(&mut rng, [0.0, 0.0], 1.0, 60);
        pts.extend(clump(&mut rng, [40.0, 5.0], 1.0, 60));
        pts.extend(clump(&mut rng, [10.0, 50.0], 1.0, 60));
        let g = fit_gmm(&pts, 3, &GmmOptions::default(), &mut rng).unwrap();
        assert_eq!(g.k(), 3);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn surplus_components_collapse_to_centroid() {
        let pts = [[0.0, 0.0], [10.0, 0.0]];
        let g = fit_gmm(&pts, 3, &GmmOptions::default(), &mut seeded_rng(0)).unwrap();
        assert_eq!(g.k(), 3);
        assert_eq!(g.weights[2], 0.0);
        assert_eq!(g.means[2], [5.0, 0.0]);
        assert_eq!(g.covariances[2], [[1e-6, 0.0], [0.0, 1e-6]]);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            fit_gmm(&[], 3, &GmmOptions::default(), &mut seeded_rng(0)),
            Err(Error::EmptySwarm)
        ));
    }

    #[test]
    fn log_likelihood_at_standard_mode() {
        let g = GmmParams::isotropic([1.0, -2.0], 1.0);
        let ll = gmm_log_likelihood(&g, &[[1.0, -2.0]]);
        assert!((ll - (1.0 / TAU).ln()).abs() < 1e-12);
        assert!((ll + 1.8379).abs() < 1e-4);
    }

    #[test]
    fn duplicated_data_same_mean_log_likelihood() {
        let mut rng = seeded_rng(3);
        let pts = clump(&mut rng, [2.0, 2.0], 3.0, 40);
        let g = fit_gmm(&pts, 2, &GmmOptions::default(), &mut rng).unwrap();
        let doubled: Vec<_> = pts.iter().chain(&pts).copied().collect();
        let (a, b) = (gmm_log_likelihood(&g, &pts), gmm_log_likelihood(&g, &doubled));
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn canonical_order() {
        let g = GmmParams {
            weights: vec![0.3, 0.7],
            means: vec![[5.0, 0.0], [1.0, 0.0]],
            covariances: vec![[[1.0, 0.0], [0.0, 1.0]], [[2.0, 0.0], [0.0, 2.0]]],
        };
        let c = canonicalize(&g);
        assert_eq!(c.means, vec![[1.0, 0.0], [5.0, 0.0]]);
        assert_eq!(c.weights, vec![0.7, 0.3]);
        assert_eq!(canonicalize(&c), c);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn em_is_monotone_and_well_conditioned(seed in 0u64..10_000, k in 1usize..5) {
            let mut rng = seeded_rng(seed);
            let mut pts = Vec::new();
            for _ in 0..3 {
                let c = [rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0];
                let sd = 1.0 + rng.random::<f64>() * 10.0;
                pts.extend(clump(&mut rng, c, sd, 30));
            }
            let opts = GmmOptions { tol: 1e-10, max_iter: 200, ..Default::default() };
            let fit = fit_gmm_traced(&pts, k, &opts, &mut rng).unwrap();
            for w in fit.trace.windows(2) {
                prop_assert!(w[1] - w[0] >= -1e-8, "trace {:?}", fit.trace);
            }
            for c in &fit.params.covariances {
                prop_assert_eq!(c[0][1], c[1][0]);
                // rank-one components leave only the floor, and the eigenvalue
                // formula cancels at the scale of the trace
                let slack = 1e-13 * (c[0][0] + c[1][1]);
                prop_assert!(min_eigen(c) >= 1e-6 - slack, "{:?}", c);
            }
            for row in responsibilities(&fit.params, &pts) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
