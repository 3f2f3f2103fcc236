//! Hyper-adversarial attack: projected gradient ascent over a batch of
//! inputs and their perturbation parameters, looking for high-confidence
//! inputs of `c'` whose perturbed image is classified `c_t`.
//!
//! The per-input objective is
//! `𝒞(x, c') + λ·min(𝒞(f_P(x, ε), c_t), τ)` with
//! `λ = λ₀·‖∇ₓ𝒞(x, c')‖ / (‖∇ₓ min(𝒞(f_P(x, ε), c_t), τ)‖ + κ)` recomputed
//! every step and held constant when differentiating.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mip::{Witness, STRICT_MARGIN};
use crate::net::{class_confidence, runner_up, Network, Trace};
use crate::perturb::Perturbation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Hyper-input size.
    pub m: usize,
    pub iters: usize,
    pub eta: f64,
    pub lambda0: f64,
    pub tau: f64,
    pub kappa: f64,
    /// Activation-ratio threshold for hints.
    pub r: f64,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            m: 64,
            iters: 300,
            eta: 0.05,
            lambda0: 1.01,
            tau: 0.01,
            kappa: 1e-6,
            r: 0.95,
            seed: 0,
        }
    }
}

/// Per-neuron phase hints, `entries[m][k]` for `m = 0..=L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintMatrix {
    pub entries: Vec<Vec<Option<bool>>>,
}

impl HintMatrix {
    pub fn undecided(net: &Network) -> Self {
        HintMatrix {
            entries: (0..=net.depth()).map(|m| vec![None; net.layer_width(m)]).collect(),
        }
    }

    pub fn get(&self, m: usize, k: usize) -> Option<bool> {
        self.entries.get(m).and_then(|row| row.get(k)).copied().flatten()
    }

    pub fn decided(&self) -> usize {
        self.entries.iter().flatten().filter(|e| e.is_some()).count()
    }

    /// Hints from the phases of the given traces: a neuron is hinted when
    /// more than a fraction `r` of the traces agree on its phase.
    pub fn from_traces(net: &Network, traces: &[Trace], r: f64) -> Self {
        let mut h = Self::undecided(net);
        if traces.is_empty() {
            return h;
        }
        let n = traces.len() as f64;
        for m in 1..net.depth() {
            if !net.layer(m).relu {
                continue;
            }
            for k in 0..net.layer_width(m) {
                let active = traces.iter().filter(|t| t.pre[m][k] > 0.0).count() as f64 / n;
                h.entries[m][k] = if active > r {
                    Some(true)
                } else if 1.0 - active > r {
                    Some(false)
                } else {
                    None
                };
            }
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Dataset,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperInput {
    pub inputs: Vec<Vec<f64>>,
    pub origins: Vec<Origin>,
}

/// Selects `m` starting points spread over the confidence range of `c'`.
///
/// The dataset is extended with as many uniform random inputs and sorted by
/// decreasing confidence. If more than `m` points are classified `c'`, they
/// are taken in uniform steps; otherwise the `m` most confident points are.
pub fn build_hyper_input(
    dataset: &[Vec<f64>],
    net: &Network,
    c_prime: usize,
    m: usize,
    seed: u64,
) -> Result<HyperInput> {
    if m == 0 {
        return Err(Error::Argument("hyper-input size must be positive".into()));
    }
    if m > 2 * dataset.len() {
        return Err(Error::InsufficientInputs {
            needed: m,
            available: 2 * dataset.len(),
        });
    }
    let n = net.input_len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<(f64, Vec<f64>, Origin)> = Vec::with_capacity(2 * dataset.len());
    for x in dataset {
        pool.push((net.confidence(x, c_prime)?, x.clone(), Origin::Dataset));
    }
    for _ in 0..dataset.len() {
        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        pool.push((net.confidence(&x, c_prime)?, x, Origin::Random));
    }
    pool.sort_by(|a, b| b.0.total_cmp(&a.0));
    let cands: Vec<&(f64, Vec<f64>, Origin)> = pool.iter().filter(|p| p.0 > 0.0).collect();
    let chosen: Vec<&(f64, Vec<f64>, Origin)> = if cands.len() > m {
        let step = cands.len() / m;
        (0..m).map(|i| cands[i * step]).collect()
    } else {
        pool.iter().take(m).collect()
    };
    Ok(HyperInput {
        inputs: chosen.iter().map(|p| p.1.clone()).collect(),
        origins: chosen.iter().map(|p| p.2).collect(),
    })
}

/// Gradient of `𝒞(x, class)` with respect to the input, taking the
/// derivative 0 at ReLU kinks.
pub fn confidence_grad(net: &Network, trace: &Trace, class: usize) -> Vec<f64> {
    let scores = trace.scores();
    let mut g = vec![0.0; scores.len()];
    g[class] = 1.0;
    g[runner_up(scores, class)] = -1.0;
    backward(net, trace, g)
}

/// Vector-Jacobian product of the network at `trace` with output cotangent `g`.
fn backward(net: &Network, trace: &Trace, mut g: Vec<f64>) -> Vec<f64> {
    for m in (1..=net.depth()).rev() {
        let layer = net.layer(m);
        if layer.relu {
            for (gk, &z) in g.iter_mut().zip(&trace.pre[m]) {
                if z <= 0.0 {
                    *gk = 0.0;
                }
            }
        }
        let mut prev = vec![0.0; net.layer_width(m - 1)];
        for (row, &gk) in layer.rows().iter().zip(&g) {
            if gk != 0.0 {
                for &(j, w) in &row.terms {
                    prev[j] += w * gk;
                }
            }
        }
        g = prev;
    }
    g
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub lambda: f64,
    pub grad_x: Vec<f64>,
    pub grad_eps: Vec<f64>,
    pub confidence: f64,
    pub target_confidence: f64,
}

/// Per-input attack loss with a given balancing factor.
#[allow(clippy::too_many_arguments)]
pub fn loss_value(
    net: &Network,
    perturbation: &Perturbation,
    c_prime: usize,
    c_target: usize,
    x: &[f64],
    eps: &[f64],
    lambda: f64,
    tau: f64,
) -> Result<f64> {
    let xp = perturbation.apply_unclipped(net.input_shape(), x, eps)?;
    let c = net.confidence(x, c_prime)?;
    let ct = net.confidence(&xp, c_target)?;
    Ok(c + lambda * ct.min(tau))
}

/// Loss and gradients for one input; `λ` is computed here and treated as a
/// constant.
pub fn backprop_loss_grad(
    net: &Network,
    perturbation: &Perturbation,
    c_prime: usize,
    c_target: usize,
    x: &[f64],
    eps: &[f64],
    config: &AttackConfig,
) -> Result<LossGrad> {
    let shape = net.input_shape();
    let trace = net.forward(x)?;
    let confidence = class_confidence(trace.scores(), c_prime)?;
    let gx1 = confidence_grad(net, &trace, c_prime);
    let xp = perturbation.apply_unclipped(shape, x, eps)?;
    let trace_p = net.forward(&xp)?;
    let target_confidence = class_confidence(trace_p.scores(), c_target)?;
    let (gx2, geps2) = if target_confidence < config.tau {
        let gp = confidence_grad(net, &trace_p, c_target);
        perturbation.vjp(shape, x, eps, &gp)
    } else {
        (vec![0.0; x.len()], vec![0.0; eps.len()])
    };
    let lambda = config.lambda0 * norm(&gx1) / (norm(&gx2) + config.kappa);
    Ok(LossGrad {
        loss: confidence + lambda * target_confidence.min(config.tau),
        lambda,
        grad_x: gx1.iter().zip(&gx2).map(|(a, b)| a + lambda * b).collect(),
        grad_eps: geps2.iter().map(|b| lambda * b).collect(),
        confidence,
        target_confidence,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    /// Largest confidence among the solutions, 0 when there are none.
    pub delta_ha: f64,
    pub hints: HintMatrix,
    pub hints_pert: HintMatrix,
    pub solutions: Vec<Witness>,
    pub iterations: usize,
}

impl AttackResult {
    pub fn trivial(net: &Network) -> Self {
        AttackResult {
            delta_ha: 0.0,
            hints: HintMatrix::undecided(net),
            hints_pert: HintMatrix::undecided(net),
            solutions: Vec::new(),
            iterations: 0,
        }
    }
}

/// Witness for `(x, eps)` if it satisfies the problem's constraints.
fn solution(
    net: &Network,
    perturbation: &Perturbation,
    c_prime: usize,
    c_target: usize,
    x: &[f64],
    eps: &[f64],
) -> Result<Option<Witness>> {
    let perturbed = perturbation.apply_unclipped(net.input_shape(), x, eps)?;
    let confidence = net.confidence(x, c_prime)?;
    let target_confidence = net.confidence(&perturbed, c_target)?;
    Ok((confidence > 0.0 && target_confidence >= STRICT_MARGIN).then(|| Witness {
        input: x.to_vec(),
        eps: eps.to_vec(),
        perturbed,
        confidence,
        target_confidence,
    }))
}

/// Runs the attack for one target class and one enumerated perturbation.
pub fn run_attack(
    net: &Network,
    perturbation: &Perturbation,
    c_prime: usize,
    c_target: usize,
    dataset: &[Vec<f64>],
    config: &AttackConfig,
) -> Result<AttackResult> {
    let classes = net.num_classes();
    for c in [c_prime, c_target] {
        if c >= classes {
            return Err(Error::ClassIndex { index: c, classes });
        }
    }
    let shape = net.input_shape();
    let hyper = build_hyper_input(dataset, net, c_prime, config.m, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let bounds = perturbation.param_bounds(shape);
    let mut xs = hyper.inputs;
    let mut eps: Vec<Vec<f64>> = xs.iter().map(|_| perturbation.sample_params(shape, &mut rng)).collect();
    let mut best: Vec<Option<Witness>> = vec![None; xs.len()];
    let keep = |i: usize, w: Option<Witness>, best: &mut Vec<Option<Witness>>| {
        if let Some(w) = w {
            if best[i].as_ref().is_none_or(|b| w.confidence > b.confidence) {
                best[i] = Some(w);
            }
        }
    };
    for i in 0..xs.len() {
        keep(i, solution(net, perturbation, c_prime, c_target, &xs[i], &eps[i])?, &mut best);
    }
    for _ in 0..config.iters {
        for i in 0..xs.len() {
            let g = backprop_loss_grad(net, perturbation, c_prime, c_target, &xs[i], &eps[i], config)?;
            for (v, d) in xs[i].iter_mut().zip(&g.grad_x) {
                if *d != 0.0 {
                    *v = (*v + config.eta * d.signum()).clamp(0.0, 1.0);
                }
            }
            for ((e, d), &(lo, hi)) in eps[i].iter_mut().zip(&g.grad_eps).zip(&bounds) {
                if *d != 0.0 {
                    *e = (*e + config.eta * (hi - lo) * d.signum()).clamp(lo, hi);
                }
            }
            keep(i, solution(net, perturbation, c_prime, c_target, &xs[i], &eps[i])?, &mut best);
        }
    }
    let solutions: Vec<Witness> = best.into_iter().flatten().collect();
    if solutions.is_empty() {
        return Ok(AttackResult {
            iterations: config.iters,
            ..AttackResult::trivial(net)
        });
    }
    let mut traces = Vec::with_capacity(solutions.len());
    let mut traces_p = Vec::with_capacity(solutions.len());
    for w in &solutions {
        traces.push(net.forward(&w.input)?);
        traces_p.push(net.forward(&w.perturbed)?);
    }
    Ok(AttackResult {
        delta_ha: solutions.iter().map(|w| w.confidence).fold(0.0, f64::max),
        hints: HintMatrix::from_traces(net, &traces, config.r),
        hints_pert: HintMatrix::from_traces(net, &traces_p, config.r),
        solutions,
        iterations: config.iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::net::{Layer, Shape};
    use crate::perturb::Interval;

    fn linear_net() -> Network {
        Network::new(
            Shape::new(1, 1, 2),
            vec![Layer::fully_connected(vec![vec![2.0, -1.0], vec![0.0, 0.0]], vec![0.0, 0.0], false)],
        )
        .unwrap()
    }

    #[test]
    fn linear_gradient_is_coefficient_vector() {
        let net = linear_net();
        let t = net.forward(&[0.7, 0.2]).unwrap();
        assert_eq!(confidence_grad(&net, &t, 0), vec![2.0, -1.0]);
    }

    #[test]
    fn saturated_target_term_has_no_gradient() {
        let net = linear_net();
        let p = Perturbation::Brightness(Interval::new(0.0, 0.5));
        let cfg = AttackConfig::default();
        // Same class on both sides: the perturbed confidence is far above τ.
        let g = backprop_loss_grad(&net, &p, 0, 0, &[0.9, 0.0], &[0.3], &cfg).unwrap();
        assert!(g.target_confidence > cfg.tau);
        assert_eq!(g.grad_eps, vec![0.0]);
        assert_eq!(g.grad_x, vec![2.0, -1.0]);
    }

    #[test]
    fn hyper_input_needs_enough_points() {
        let net = linear_net();
        assert!(matches!(
            build_hyper_input(&[], &net, 0, 1, 0),
            Err(Error::InsufficientInputs { .. })
        ));
        assert!(build_hyper_input(&[vec![0.5, 0.5]], &net, 0, 2, 0).is_ok());
    }

    #[test]
    fn unanimous_traces_decide_every_hint() {
        let net = fixtures::conv_fc_4x4();
        let x = vec![0.8; 16];
        let traces = vec![net.forward(&x).unwrap(); 3];
        let h = HintMatrix::from_traces(&net, &traces, 0.95);
        for m in 1..net.depth() {
            for k in 0..net.layer_width(m) {
                assert!(h.get(m, k).is_some());
            }
        }
        assert_eq!(h.get(net.depth(), 0), None);
        assert_eq!(h.get(99, 0), None);
    }

    #[test]
    fn identity_perturbation_finds_nothing() {
        let net = fixtures::conv_fc_4x4();
        let p = Perturbation::Brightness(Interval::new(0.0, 0.0));
        let data: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 8.0; 16]).collect();
        let cfg = AttackConfig {
            m: 8,
            iters: 20,
            ..AttackConfig::default()
        };
        let r = run_attack(&net, &p, 0, 1, &data, &cfg).unwrap();
        assert_eq!(r.delta_ha, 0.0);
        assert!(r.solutions.is_empty());
        assert_eq!(r.hints.decided(), 0);
    }
}
