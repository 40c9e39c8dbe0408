use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::mlp::{Activation, Mlp, MlpSpec};
use crate::{seeded_rng, Result};

/// Outcome of comparing backprop against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinates compared (parameters and inputs).
    pub checked: usize,
    /// Coordinates whose perturbation crossed a ReLU kink.
    pub skipped: usize,
}

/// Parameters per layer (weights and biases each) compared when the network
/// is too large to check exhaustively.
const SAMPLES_PER_LAYER: usize = 48;
const EXHAUSTIVE_LIMIT: usize = 2_000;
/// Both gradients below this are treated as agreeing zeros.
const ZERO_FLOOR: f64 = 1e-12;

fn relu_masks(net: &Mlp, x: &[f64]) -> Result<Vec<bool>> {
    let (_, cache) = net.forward(x, 1)?;
    let mut mask = Vec::new();
    for (l, act) in net.spec().activations.iter().enumerate() {
        if *act == Activation::Relu {
            mask.extend(cache.layer_output(l).iter().map(|&y| y > 0.0));
        }
    }
    Ok(mask)
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

fn split(a: f64) -> (f64, f64) {
    let c = 134_217_729.0 * a; // 2^27 + 1
    let hi = c - (c - a);
    (hi, a - hi)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let ((ah, al), (bh, bl)) = (split(a), split(b));
    (p, al * bl - (((p - ah * bh) - al * bh) - ah * bl))
}

/// Dot product carried in roughly twice working precision (Ogita, Rump and Oishi).
fn dot2(init: f64, a: &[f64], b: &[f64]) -> f64 {
    let (mut s, mut c) = (init, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (p, pe) = two_prod(x, y);
        let (t, se) = two_sum(s, p);
        s = t;
        c += pe + se;
    }
    s + c
}

/// `r . net(x)` with compensated sums, so the central difference is not
/// swamped by rounding in the wide layers.
fn projected(net: &Mlp, x: &[f64], r: &[f64]) -> Result<f64> {
    let spec = net.spec();
    let mut h = x.to_vec();
    for l in 0..spec.layers() {
        let (w, b) = net.layer(l);
        let act = spec.activations[l];
        h = w
            .chunks_exact(spec.layer_sizes[l])
            .zip(b)
            .map(|(row, &bias)| act.apply(dot2(bias, row, &h)))
            .collect();
    }
    Ok(dot2(0.0, &h, r))
}

fn rel_error(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < ZERO_FLOOR {
        0.0
    } else {
        (a - n).abs() / scale
    }
}

/// Checks [`Mlp::backward`] on a random network, input and output projection.
///
/// Biases are randomised so their gradients are exercised, inputs are kept at
/// least 0.1 away from zero, and coordinates whose +/-h perturbation flips any
/// ReLU are skipped.
pub fn gradient_check_report(spec: &MlpSpec, seed: u64, h: f64) -> Result<GradCheckReport> {
    let mut rng = seeded_rng(seed);
    let mut net = Mlp::init(spec, &mut rng)?;
    for l in 0..spec.layers() {
        for b in net.layer_mut(l).1 {
            *b = rng.random_range(-0.1..0.1);
        }
    }
    let x: Vec<f64> = (0..spec.input_dim())
        .map(|_| {
            let mag = rng.random_range(0.1..1.0);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let r: Vec<f64> = (0..spec.output_dim())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();

    let (_, cache) = net.forward(&x, 1)?;
    let grads = net.backward(&cache, &r)?;
    let base_mask = relu_masks(&net, &x)?;

    let mut coords = Vec::new();
    if spec.param_count() <= EXHAUSTIVE_LIMIT {
        coords.extend(0..spec.param_count());
    } else {
        for l in 0..spec.layers() {
            let start = net.layer_offset(l);
            let n_w = spec.layer_sizes[l] * spec.layer_sizes[l + 1];
            let n_b = spec.layer_sizes[l + 1];
            for _ in 0..SAMPLES_PER_LAYER.min(n_w) {
                coords.push(start + rng.random_range(0..n_w));
            }
            for _ in 0..SAMPLES_PER_LAYER.min(n_b) {
                coords.push(start + n_w + rng.random_range(0..n_b));
            }
        }
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    let mut probe = net.clone();
    for &i in &coords {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let (fp, mp) = (projected(&probe, &x, &r)?, relu_masks(&probe, &x)?);
        probe.params_mut()[i] = orig - h;
        let (fm, mm) = (projected(&probe, &x, &r)?, relu_masks(&probe, &x)?);
        probe.params_mut()[i] = orig;
        if mp != base_mask || mm != base_mask {
            report.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        report.max_rel_error = report.max_rel_error.max(rel_error(grads.params[i], numeric));
        report.checked += 1;
    }

    let mut xp = x.clone();
    for i in 0..x.len().min(SAMPLES_PER_LAYER) {
        xp[i] = x[i] + h;
        let (fp, mp) = (projected(&net, &xp, &r)?, relu_masks(&net, &xp)?);
        xp[i] = x[i] - h;
        let (fm, mm) = (projected(&net, &xp, &r)?, relu_masks(&net, &xp)?);
        xp[i] = x[i];
        if mp != base_mask || mm != base_mask {
            report.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        report.max_rel_error = report.max_rel_error.max(rel_error(grads.input[i], numeric));
        report.checked += 1;
    }
    Ok(report)
}

/// Largest relative disagreement between backprop and central differences.
pub fn gradient_check(spec: &MlpSpec, seed: u64, h: f64) -> Result<f64> {
    gradient_check_report(spec, seed, h).map(|r| r.max_rel_error)
}
