//! End-to-end verification: bounds, dependencies, attacks and one MIP per
//! target class and enumerated perturbation, aggregated into an interval for
//! the maximal globally non-robust bound.

mod oracle;
mod report;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use oracle::{grid_oracle, grid_points, lipschitz_slack, sampling_baselines, Baselines, OracleResult};
pub use report::{emit_report, heatmap_csv, progress_csv, read_report, ReportFiles};

use crate::attack::{run_attack, AttackConfig, AttackResult};
use crate::bnb::{solve_mip, BnbOptions, MipSolution, MipStatus, ProgressRecord};
use crate::depprop::{compute_dependencies, DepOptions, DependencyMatrix};
use crate::error::{Error, Result};
use crate::mip::{
    build_delta_m_problem, build_problem, compute_concrete_bounds, BoundOptions, BoundsTable, NetCopy, ProblemSpec,
    Witness,
};
use crate::net::Network;
use crate::perturb::{enumerate_discrete, Perturbation, PerturbationSpec};

/// Default precision level `Δ`.
pub const DEFAULT_PRECISION: f64 = 1e-4;

/// Which pipeline stages run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub use_deps: bool,
    pub use_attack: bool,
    /// Pass attack hints to the MIP; needs `use_attack`.
    pub use_hints: bool,
}

impl Mode {
    pub const FULL: Mode = Mode {
        use_deps: true,
        use_attack: true,
        use_hints: true,
    };
    pub const DEPS_ONLY: Mode = Mode {
        use_deps: true,
        use_attack: false,
        use_hints: false,
    };
    pub const MIP_ONLY: Mode = Mode {
        use_deps: false,
        use_attack: false,
        use_hints: false,
    };
}

impl Default for Mode {
    fn default() -> Self {
        Mode::FULL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRequest {
    pub net: Network,
    pub c_prime: usize,
    pub targets: Vec<usize>,
    pub spec: PerturbationSpec,
    /// Per-MIP time limit.
    pub timeout: Duration,
    /// Precision level `Δ`.
    pub precision: f64,
    pub seed: u64,
    pub mode: Mode,
    pub attack: AttackConfig,
    /// Attack seed inputs; random inputs are used when empty.
    pub dataset: Vec<Vec<f64>>,
    pub bounds: BoundOptions,
    pub deps: DepOptions,
    /// Template for the main MIPs; timeout and lower bound are set per run.
    pub mip: BnbOptions,
}

impl VerificationRequest {
    pub fn new(net: Network, c_prime: usize, targets: Vec<usize>, spec: PerturbationSpec) -> Self {
        VerificationRequest {
            net,
            c_prime,
            targets,
            spec,
            timeout: Duration::from_secs(60),
            precision: DEFAULT_PRECISION,
            seed: 0,
            mode: Mode::FULL,
            attack: AttackConfig::default(),
            dataset: Vec::new(),
            bounds: BoundOptions::default(),
            deps: DepOptions::default(),
            mip: BnbOptions::default(),
        }
    }

    /// Every class other than `c_prime`.
    pub fn all_targets(net: &Network, c_prime: usize) -> Vec<usize> {
        (0..net.num_classes()).filter(|&c| c != c_prime).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let classes = self.net.num_classes();
        if self.c_prime >= classes {
            return Err(Error::ClassIndex {
                index: self.c_prime,
                classes,
            });
        }
        if self.targets.is_empty() {
            return Err(Error::Argument("target set is empty".into()));
        }
        let mut seen = vec![false; classes];
        for &t in &self.targets {
            if t >= classes {
                return Err(Error::ClassIndex { index: t, classes });
            }
            if t == self.c_prime {
                return Err(Error::Argument(format!("target set contains the source class {t}")));
            }
            if std::mem::replace(&mut seen[t], true) {
                return Err(Error::Argument(format!("target {t} listed twice")));
            }
        }
        if !(self.precision > 0.0 && self.precision.is_finite()) {
            return Err(Error::Argument(format!("precision must be positive, got {}", self.precision)));
        }
        if self.timeout.is_zero() {
            return Err(Error::Argument("timeout must be positive".into()));
        }
        let n = self.net.input_len();
        if let Some(x) = self.dataset.iter().find(|x| x.len() != n) {
            return Err(Error::InputShape {
                expected: n,
                got: x.len(),
            });
        }
        self.spec.check()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

/// Result of one MIP, for one target class and one enumerated perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub target: usize,
    pub perturbation: String,
    pub status: MipStatus,
    pub lower: f64,
    pub upper: f64,
    pub delta_ha: f64,
    pub attack_solutions: usize,
    pub dependencies: usize,
    pub hints: usize,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub mip_ms: f64,
    pub attack_ms: f64,
    pub deps_ms: f64,
    /// Milliseconds from MIP start until the gap closed, if it did.
    pub closed_ms: Option<f64>,
    pub progress: Vec<ProgressRecord>,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub c_prime: usize,
    pub targets: Vec<usize>,
    pub num_classes: usize,
    pub perturbation: String,
    pub precision: f64,
    pub mode: Mode,
    pub runs: Vec<RunReport>,
    /// Interval for the maximal globally non-robust bound.
    pub nonrobust: Bound,
    /// Interval for the minimal globally robust bound.
    pub robust: Bound,
    /// Every run finished with a proven optimum.
    pub complete: bool,
    pub wall_ms: f64,
}

impl VerificationReport {
    /// Componentwise max over runs.
    pub fn aggregate(runs: &[RunReport]) -> Bound {
        Bound {
            lower: runs.iter().map(|r| r.lower).fold(0.0, f64::max),
            upper: runs.iter().map(|r| r.upper).fold(0.0, f64::max),
        }
    }

    /// Runs of one target class.
    pub fn target_bound(&self, target: usize) -> Option<Bound> {
        let runs: Vec<RunReport> = self.runs.iter().filter(|r| r.target == target).cloned().collect();
        (!runs.is_empty()).then(|| Self::aggregate(&runs))
    }
}

fn shift(b: Bound, precision: f64) -> Bound {
    Bound {
        lower: b.lower + precision,
        upper: b.upper + precision,
    }
}

fn job_seed(seed: u64, target: usize, sub: usize) -> u64 {
    seed ^ ((target as u64) << 32 | sub as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct SubSpecWork {
    bounds: BoundsTable,
    deps: Option<DependencyMatrix>,
    deps_ms: f64,
    attacks: Vec<(AttackResult, f64)>,
}

fn prepare_sub(
    req: &VerificationRequest,
    dataset: &[Vec<f64>],
    p: &Perturbation,
    sub: usize,
    bounds_input: &BoundsTable,
) -> Result<SubSpecWork> {
    let net = &req.net;
    let (pre, attacks) = rayon::join(
        || -> Result<(BoundsTable, Option<DependencyMatrix>, f64)> {
            let t0 = Instant::now();
            let bp = compute_concrete_bounds(net, Some(p), NetCopy::Perturbed, &req.bounds)?;
            let deps = if req.mode.use_deps {
                Some(compute_dependencies(net, p, bounds_input, &bp, &req.deps)?)
            } else {
                None
            };
            Ok((bp, deps, t0.elapsed().as_secs_f64() * 1e3))
        },
        || -> Result<Vec<(AttackResult, f64)>> {
            if !req.mode.use_attack {
                return Ok(req.targets.iter().map(|_| (AttackResult::trivial(net), 0.0)).collect());
            }
            req.targets
                .par_iter()
                .map(|&t| {
                    let t0 = Instant::now();
                    let cfg = AttackConfig {
                        m: req.attack.m.min(2 * dataset.len()),
                        seed: job_seed(req.seed, t, sub),
                        ..req.attack.clone()
                    };
                    let r = run_attack(net, p, req.c_prime, t, dataset, &cfg)?;
                    Ok((r, t0.elapsed().as_secs_f64() * 1e3))
                })
                .collect()
        },
    );
    let (bounds, deps, deps_ms) = pre?;
    Ok(SubSpecWork {
        bounds,
        deps,
        deps_ms,
        attacks: attacks?,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_mip(
    req: &VerificationRequest,
    p: &Perturbation,
    target: usize,
    bounds_input: &BoundsTable,
    work: &SubSpecWork,
    attack: &AttackResult,
    attack_ms: f64,
) -> Result<RunReport> {
    let use_hints = req.mode.use_hints && req.mode.use_attack;
    let cutoff = attack.delta_ha.max(0.0);
    let spec = ProblemSpec {
        net: &req.net,
        c_prime: req.c_prime,
        c_target: target,
        perturbation: p,
        bounds_input,
        bounds_pert: &work.bounds,
        deps: work.deps.as_ref(),
        cutoff,
        hints: use_hints.then_some((&attack.hints, &attack.hints_pert)),
    };
    let problem = build_problem(&spec)?;
    let opts = BnbOptions {
        timeout: req.timeout,
        initial_lower: cutoff,
        use_hints,
        sign_threshold: None,
        ..req.mip.clone()
    };
    let t0 = Instant::now();
    let sol = solve_mip(&problem.model, &problem.check, &opts)?;
    let mip_ms = t0.elapsed().as_secs_f64() * 1e3;
    let witness = sol
        .incumbent
        .as_deref()
        .and_then(|v| problem.check.replay(v))
        .or_else(|| {
            attack
                .solutions
                .iter()
                .max_by(|a, b| a.confidence.total_cmp(&b.confidence))
                .cloned()
        });
    log::debug!(
        "target {target} {p}: [{}, {}] {:?} after {} nodes",
        sol.lower,
        sol.upper,
        sol.status,
        sol.stats.nodes
    );
    let closed_ms = sol
        .progress
        .iter()
        .find(|r| r.upper - r.lower <= opts.gap)
        .map(|r| r.ms);
    Ok(RunReport {
        target,
        perturbation: p.to_string(),
        status: sol.status,
        lower: sol.lower,
        upper: sol.upper.max(sol.lower),
        delta_ha: attack.delta_ha,
        attack_solutions: attack.solutions.len(),
        dependencies: work.deps.as_ref().map_or(0, DependencyMatrix::count),
        hints: if use_hints {
            attack.hints.decided() + attack.hints_pert.decided()
        } else {
            0
        },
        nodes: sol.stats.nodes,
        lp_iterations: sol.stats.lp_iterations,
        mip_ms,
        attack_ms,
        deps_ms: work.deps_ms,
        closed_ms,
        progress: sol.progress,
        witness,
    })
}

fn attack_dataset(req: &VerificationRequest) -> Vec<Vec<f64>> {
    if !req.dataset.is_empty() {
        return req.dataset.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let n = req.net.input_len();
    (0..req.attack.m.max(1)).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect()
}

/// Runs the full pipeline.
pub fn verify(req: &VerificationRequest) -> Result<VerificationReport> {
    req.validate()?;
    let start = Instant::now();
    let net = &req.net;
    let subs = enumerate_discrete(&req.spec, net.input_shape())?;
    let dataset = attack_dataset(req);
    let bounds_input = compute_concrete_bounds(net, None, NetCopy::Input, &req.bounds)?;
    let works: Vec<SubSpecWork> = subs
        .par_iter()
        .enumerate()
        .map(|(i, p)| prepare_sub(req, &dataset, p, i, &bounds_input))
        .collect::<Result<_>>()?;
    log::info!(
        "{} perturbation(s) x {} target(s); prepared in {:.1} ms",
        subs.len(),
        req.targets.len(),
        start.elapsed().as_secs_f64() * 1e3
    );
    let jobs: Vec<(usize, usize)> = (0..subs.len())
        .flat_map(|s| (0..req.targets.len()).map(move |t| (s, t)))
        .collect();
    let runs: Vec<RunReport> = jobs
        .par_iter()
        .map(|&(s, ti)| {
            let (attack, attack_ms) = &works[s].attacks[ti];
            run_mip(req, &subs[s], req.targets[ti], &bounds_input, &works[s], attack, *attack_ms)
        })
        .collect::<Result<_>>()?;
    let nonrobust = VerificationReport::aggregate(&runs);
    let complete = runs
        .iter()
        .all(|r| matches!(r.status, MipStatus::Optimal | MipStatus::Infeasible));
    Ok(VerificationReport {
        c_prime: req.c_prime,
        targets: req.targets.clone(),
        num_classes: net.num_classes(),
        perturbation: req.spec.to_string(),
        precision: req.precision,
        mode: req.mode,
        runs,
        nonrobust,
        robust: shift(nonrobust, req.precision),
        complete,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// `max 𝒞(x, c')` over the input box.
pub fn compute_delta_m(net: &Network, c_prime: usize, bounds: &BoundOptions, mip: &BnbOptions) -> Result<MipSolution> {
    let table = compute_concrete_bounds(net, None, NetCopy::Input, bounds)?;
    let prob = build_delta_m_problem(net, c_prime, &table)?;
    let opts = BnbOptions {
        initial_lower: f64::NEG_INFINITY,
        sign_threshold: None,
        ..mip.clone()
    };
    solve_mip(&prob.model, &prob.check, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::perturb::Interval;

    fn request(spec: &str) -> VerificationRequest {
        let net = fixtures::conv_fc_4x4();
        let mut req = VerificationRequest::new(net, 0, vec![1], spec.parse().unwrap());
        req.attack.m = 16;
        req.attack.iters = 30;
        req.timeout = Duration::from_secs(30);
        req
    }

    #[test]
    fn invalid_targets_rejected() {
        let mut req = request("occlusion(1,1,1)");
        req.targets = vec![];
        assert!(matches!(verify(&req), Err(Error::Argument(_))));
        req.targets = vec![0];
        assert!(matches!(verify(&req), Err(Error::Argument(_))));
        req.targets = vec![5];
        assert!(matches!(verify(&req), Err(Error::ClassIndex { .. })));
    }

    #[test]
    fn identity_brightness_gives_zero() {
        let mut req = request("brightness(0)");
        req.spec = PerturbationSpec::Brightness(Interval::new(0.0, 0.0));
        let rep = verify(&req).unwrap();
        assert_eq!(rep.nonrobust, Bound { lower: 0.0, upper: 0.0 });
        assert_eq!(rep.robust.lower, req.precision);
        assert!(rep.complete);
    }

    #[test]
    fn occlusion_interval_is_ordered_and_witnessed() {
        let rep = verify(&request("occlusion(1,1,1)")).unwrap();
        let r = &rep.runs[0];
        assert!(r.lower <= r.upper);
        assert!(rep.complete, "{:?}", r.status);
        if r.lower > 0.0 {
            let w = r.witness.as_ref().expect("positive bound has a witness");
            assert!(w.confidence > 0.0 && w.target_confidence > 0.0);
        }
    }

    #[test]
    fn delta_m_of_linear_net_is_interval_max() {
        use crate::net::{Layer, Shape};
        // scores (x₀ − x₁, 0.2): max 𝒞(x, 0) = 1 − 0.2 at x = (1, 0).
        let net = Network::new(
            Shape::new(1, 1, 2),
            vec![Layer::fully_connected(vec![vec![1.0, -1.0], vec![0.0, 0.0]], vec![0.0, 0.2], false)],
        )
        .unwrap();
        let s = compute_delta_m(&net, 0, &BoundOptions::default(), &BnbOptions::default()).unwrap();
        assert_eq!(s.status, MipStatus::Optimal);
        assert!((s.lower - 0.8).abs() < 1e-9);
    }
}
