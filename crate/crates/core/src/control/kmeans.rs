use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansOptions {
    /// Stop once no center moves more than this (m).
    pub tol: f64,
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest-cost run wins.
    pub restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            tol: 0.01,
            max_iter: 100,
            restarts: 10,
        }
    }
}

/// Result of grouping the controlled swarm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub n_group: usize,
    /// Group count asked for before clamping to the point count.
    pub requested: usize,
    /// Group index per input point, each `< n_group`.
    pub labels: Vec<usize>,
    /// Sorted by ascending x, then y.
    pub centers: Vec<[f64; 2]>,
    /// Within-cluster sum of squared distances to `centers`.
    pub cost: f64,
    /// Cost after every assignment pass of the winning run.
    pub cost_trace: Vec<f64>,
}

impl GroupAssignment {
    pub fn was_clamped(&self) -> bool {
        self.requested != self.n_group
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn nearest(p: [f64; 2], centers: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = dist2(p, *c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng + ?Sized>(points: &[[f64; 2]], k: usize, rng: &mut R) -> Vec<[f64; 2]> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(*p, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                chosen = Some(i);
                if acc > target {
                    break;
                }
            }
            chosen.unwrap_or(0)
        } else {
            // every point already coincides with a center
            0
        };
        let c = points[pick];
        centers.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(*p, c));
        }
    }
    centers
}

struct Run {
    centers: Vec<[f64; 2]>,
    cost: f64,
    trace: Vec<f64>,
}

fn lloyd(points: &[[f64; 2]], mut centers: Vec<[f64; 2]>, opts: &KMeansOptions) -> Run {
    let k = centers.len();
    let mut labels = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    for _ in 0..opts.max_iter.max(1) {
        let mut changed = false;
        let mut cost = 0.0;
        for (l, p) in labels.iter_mut().zip(points) {
            let (j, d) = nearest(*p, &centers);
            changed |= *l != j;
            *l = j;
            cost += d;
        }
        trace.push(cost);
        if !changed {
            break;
        }
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (&l, p) in labels.iter().zip(points) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            counts[l] += 1;
        }
        let mut shift = 0.0f64;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let c = [sums[j][0] / counts[j] as f64, sums[j][1] / counts[j] as f64];
            shift = shift.max(dist2(c, centers[j]).sqrt());
            centers[j] = c;
        }
        if shift < opts.tol {
            break;
        }
    }
    hartigan(points, &mut centers, &mut trace);
    let cost = points.iter().map(|p| nearest(*p, &centers).1).sum();
    Run {
        centers,
        cost,
        trace,
    }
}

/// Single-point moves that strictly lower the within-cluster cost. Lloyd
/// stalls in partitions where moving one point would still help once both
/// centroids shift; this escapes those.
fn hartigan(points: &[[f64; 2]], centers: &mut [[f64; 2]], trace: &mut Vec<f64>) {
    let k = centers.len();
    if k < 2 {
        return;
    }
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(*p, centers).0).collect();
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];
    for (&l, p) in labels.iter().zip(points) {
        sums[l][0] += p[0];
        sums[l][1] += p[1];
        counts[l] += 1;
    }
    let mean = |s: [f64; 2], n: usize| [s[0] / n as f64, s[1] / n as f64];
    let mut moved = false;
    for _ in 0..points.len() * k {
        let mut any = false;
        for (i, p) in points.iter().enumerate() {
            let a = labels[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let leave = na / (na - 1.0) * dist2(*p, mean(sums[a], counts[a]));
            let mut best = (a, leave);
            for b in (0..k).filter(|&b| b != a) {
                let join = if counts[b] == 0 {
                    0.0
                } else {
                    let nb = counts[b] as f64;
                    nb / (nb + 1.0) * dist2(*p, mean(sums[b], counts[b]))
                };
                // relative margin keeps rounding noise from cycling
                if join < best.1 * (1.0 - 1e-12) {
                    best = (b, join);
                }
            }
            let b = best.0;
            if b != a {
                sums[a][0] -= p[0];
                sums[a][1] -= p[1];
                counts[a] -= 1;
                sums[b][0] += p[0];
                sums[b][1] += p[1];
                counts[b] += 1;
                labels[i] = b;
                any = true;
            }
        }
        if !any {
            break;
        }
        moved = true;
    }
    if moved {
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = mean(sums[j], counts[j]);
            }
        }
        trace.push(points.iter().map(|p| nearest(*p, centers).1).sum());
    }
}

/// Splits points into `n_group` clusters with Lloyd's algorithm seeded by k-means++.
///
/// A group count above the number of points is clamped and reported through
/// [`GroupAssignment::requested`].
pub fn assign_groups<R: Rng + ?Sized>(
    positions: &[[f64; 2]],
    n_group: usize,
    opts: &KMeansOptions,
    rng: &mut R,
) -> Result<GroupAssignment> {
    if positions.is_empty() {
        return Err(Error::EmptySwarm);
    }
    if n_group == 0 {
        return Err(Error::contract("assign_groups: n_group must be at least 1"));
    }
    let k = n_group.min(positions.len());

    let mut best: Option<Run> = None;
    for _ in 0..opts.restarts.max(1) {
        let init = plus_plus_init(positions, k, rng);
        let run = lloyd(positions, init, opts);
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    let Run {
        mut centers,
        trace,
        ..
    } = best.expect("at least one restart");

    centers.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut cost = 0.0;
    let labels = positions
        .iter()
        .map(|p| {
            let (j, d) = nearest(*p, &centers);
            cost += d;
            j
        })
        .collect();

    Ok(GroupAssignment {
        n_group: k,
        requested: n_group,
        labels,
        centers,
        cost,
        cost_trace: trace,
    })
}

/// Sum of squared distances of each point to the centroid of its label.
pub fn kmeans_cost(points: &[[f64; 2]], labels: &[usize]) -> f64 {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];
    for (&l, p) in labels.iter().zip(points) {
        sums[l][0] += p[0];
        sums[l][1] += p[1];
        counts[l] += 1;
    }
    labels
        .iter()
        .zip(points)
        .map(|(&l, p)| {
            let c = [sums[l][0] / counts[l] as f64, sums[l][1] / counts[l] as f64];
            dist2(*p, c)
        })
        .sum()
}
