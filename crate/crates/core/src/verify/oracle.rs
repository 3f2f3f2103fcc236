//! Reference values: exhaustive grid search and sampling baselines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mip::{interval_bounds, NetCopy};
use crate::net::{class_confidence, Network};
use crate::perturb::Perturbation;

/// Largest grid the oracle agrees to enumerate.
pub const MAX_GRID_POINTS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Largest grid confidence with a violating perturbation, 0 if none.
    pub value: f64,
    /// Lipschitz allowance for points between grid nodes.
    pub slack: f64,
    pub points: u64,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let n = ((hi - lo) / step - 1e-9).ceil().max(1.0) as usize;
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(axes.len())];
    for a in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                a.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Worst-case number of forward evaluations.
pub fn grid_points(net: &Network, perturbations: &[Perturbation], step: f64) -> u64 {
    let per_axis = axis(0.0, 1.0, step).len() as f64;
    let xs = per_axis.powi(net.input_len() as i32);
    let eps: f64 = perturbations
        .iter()
        .map(|p| {
            p.param_bounds(net.input_shape())
                .iter()
                .map(|&(lo, hi)| axis(lo, hi, step).len() as f64)
                .product::<f64>()
        })
        .sum();
    (xs * (1.0 + eps)).min(u64::MAX as f64) as u64
}

/// `2·step·∏‖W_m‖∞`: bound on the confidence change between a point and
/// its nearest grid node.
pub fn lipschitz_slack(net: &Network, step: f64) -> f64 {
    let lip: f64 = net
        .layers()
        .iter()
        .map(|l| {
            l.rows()
                .iter()
                .map(|r| r.terms.iter().map(|(_, w)| w.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .product();
    2.0 * step * lip
}

/// Exhaustive search over an `x` grid of spacing `step` and, per
/// perturbation, a parameter grid of the same spacing. Perturbations are
/// applied without clipping.
pub fn grid_oracle(
    net: &Network,
    perturbations: &[Perturbation],
    c_prime: usize,
    targets: &[usize],
    step: f64,
) -> Result<OracleResult> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Argument(format!("grid step must lie in (0, 1], got {step}")));
    }
    let points = grid_points(net, perturbations, step);
    if points > MAX_GRID_POINTS {
        return Err(Error::IntractableGrid { points: points as f64 });
    }
    let shape = net.input_shape();
    let xs = product(&vec![axis(0.0, 1.0, step); net.input_len()]);
    let mut scored: Vec<(f64, Vec<f64>)> = xs
        .into_par_iter()
        .map(|x| net.confidence(&x, c_prime).map(|c| (c, x)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(c, _)| *c > 0.0)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let eps_grids: Vec<Vec<Vec<f64>>> = perturbations
        .iter()
        .map(|p| {
            let axes: Vec<Vec<f64>> = p.param_bounds(shape).iter().map(|&(lo, hi)| axis(lo, hi, step)).collect();
            product(&axes)
        })
        .collect();
    for (c, x) in scored {
        for (p, grid) in perturbations.iter().zip(&eps_grids) {
            for eps in grid {
                let xp = p.apply_unclipped(shape, &x, eps)?;
                let scores = net.scores(&xp)?;
                for &t in targets {
                    if class_confidence(&scores, t)? > 0.0 {
                        return Ok(OracleResult {
                            value: c,
                            slack: lipschitz_slack(net, step),
                            points,
                            witness: Some((x, eps.clone())),
                        });
                    }
                }
            }
        }
    }
    Ok(OracleResult {
        value: 0.0,
        slack: lipschitz_slack(net, step),
        points,
        witness: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    /// Largest local non-robust bound over the dataset.
    pub dataset: f64,
    /// Mean local non-robust bound over Gaussian samples.
    pub random_mean: f64,
    /// Hoeffding half-width at 95% confidence.
    pub random_h: f64,
    pub samples: usize,
}

/// Parameter vectors tried per perturbation: box corners, the centre, and
/// a few uniform draws.
fn probe_params(p: &Perturbation, net: &Network, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let shape = net.input_shape();
    let bounds = p.param_bounds(shape);
    if bounds.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = vec![
        bounds.iter().map(|b| b.0).collect(),
        bounds.iter().map(|b| b.1).collect(),
        bounds.iter().map(|b| 0.5 * (b.0 + b.1)).collect(),
    ];
    for _ in 0..16 {
        out.push(p.sample_params(shape, rng));
    }
    out
}

/// `𝒞(x, c')` when `x` is classified `c'` and some probed perturbation of it
/// is classified as a target, else 0.
fn local_bound(
    net: &Network,
    perturbations: &[Perturbation],
    probes: &[Vec<Vec<f64>>],
    c_prime: usize,
    targets: &[usize],
    x: &[f64],
) -> Result<f64> {
    let c = net.confidence(x, c_prime)?;
    if c <= 0.0 {
        return Ok(0.0);
    }
    for (p, eps_list) in perturbations.iter().zip(probes) {
        for eps in eps_list {
            let scores = net.scores(&p.apply(net.input_shape(), x, eps)?)?;
            for &t in targets {
                if class_confidence(&scores, t)? > 0.0 {
                    return Ok(c);
                }
            }
        }
    }
    Ok(0.0)
}

/// Dataset and random sampling estimates. Perturbed images are clipped to
/// the image domain, as a user perturbing real images would.
#[allow(clippy::too_many_arguments)]
pub fn sampling_baselines(
    net: &Network,
    perturbations: &[Perturbation],
    c_prime: usize,
    targets: &[usize],
    dataset: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<Baselines> {
    if n_samples == 0 {
        return Err(Error::Argument("sampling needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<Vec<Vec<f64>>> = perturbations.iter().map(|p| probe_params(p, net, &mut rng)).collect();
    let mut ds = 0.0_f64;
    for x in dataset {
        ds = ds.max(local_bound(net, perturbations, &probes, c_prime, targets, x)?);
    }
    let normal = Normal::new(0.5_f64, 0.25).expect("valid normal");
    let n = net.input_len();
    let mut sum = 0.0;
    for _ in 0..n_samples {
        let x: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng).clamp(0.0, 1.0)).collect();
        sum += local_bound(net, perturbations, &probes, c_prime, targets, &x)?;
    }
    // Each sample bound lies in [0, R] with R the interval bound of 𝒞.
    let t = interval_bounds(net, vec![(0.0, 1.0); n], NetCopy::Input)?;
    let depth = net.depth();
    let (_, u) = t.post(depth, c_prime);
    let range = (0..net.num_classes())
        .filter(|&c| c != c_prime)
        .map(|c| u - t.post(depth, c).0)
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let h = range * ((2.0_f64 / 0.05).ln() / (2.0 * n_samples as f64)).sqrt();
    Ok(Baselines {
        dataset: ds,
        random_mean: sum / n_samples as f64,
        random_h: h,
        samples: n_samples,
    })
}
