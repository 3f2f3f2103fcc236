//! Best-first branch and bound with an anytime interval.
//!
//! At any moment `lower` is the value of a validated incumbent (or the
//! caller's witnessed bound) and `upper` bounds every unexplored part of the
//! tree, so the optimum always lies in `[lower, upper]`. Booleans are
//! branched on most-fractional; bilinear terms are relaxed by McCormick
//! envelopes over the node box and split at the parameter midpoint.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpOptions, LpProblem, LpStatus, PivotRule};
use crate::mip::{mccormick_rows, IntVar, MipModel};

const BILINEAR_TOL: f64 = 1e-7;
const MIN_SPLIT_WIDTH: f64 = 1e-7;
/// Margin for deciding a sign question against `sign_threshold`.
pub const SIGN_TOL: f64 = 1e-9;

/// Decides whether an integral node is a genuine solution, returning its
/// validated objective.
pub trait IncumbentCheck {
    fn check(&self, values: &[f64], lp_objective: f64) -> Option<f64>;
}

/// Trusts the relaxation value of integral nodes.
#[derive(Debug, Clone, Copy, Default)]
pub struct AcceptRelaxation;

impl IncumbentCheck for AcceptRelaxation {
    fn check(&self, _values: &[f64], lp_objective: f64) -> Option<f64> {
        Some(lp_objective)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbOptions {
    pub timeout: Duration,
    /// Absolute gap at which the search stops as optimal.
    pub gap: f64,
    pub int_tol: f64,
    pub lp: LpOptions,
    pub node_limit: Option<usize>,
    /// A lower bound the caller has already witnessed.
    pub initial_lower: f64,
    /// Stop as soon as the optimum is known to be `≤` or `>` this value.
    pub sign_threshold: Option<f64>,
    /// Run the hinted dive and order children by hints.
    pub use_hints: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions {
            timeout: Duration::from_secs(60),
            gap: 1e-6,
            int_tol: 1e-6,
            lp: LpOptions {
                iter_cap: 20_000,
                pivot: PivotRule::Dantzig,
            },
            node_limit: None,
            initial_lower: f64::NEG_INFINITY,
            sign_threshold: None,
            use_hints: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Timeout,
    NodeLimit,
    /// Stopped early because the sign question was settled.
    SignResolved,
    /// Tree exhausted with unvalidated integral nodes left open.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub ms: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BnbStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub incumbents: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution {
    pub status: MipStatus,
    pub lower: f64,
    pub upper: f64,
    pub incumbent: Option<Vec<f64>>,
    pub progress: Vec<ProgressRecord>,
    pub stats: BnbStats,
}

/// Most-fractional boolean, ties broken by `(layer, neuron, copy)`.
/// Returns an index into `integers`.
pub fn branch_select(integers: &[IntVar], values: &[f64], int_tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, iv) in integers.iter().enumerate() {
        let v = values[iv.col];
        let frac = v - v.floor();
        if frac <= int_tol || frac >= 1.0 - int_tol {
            continue;
        }
        let dist = (v - v.floor() - 0.5).abs();
        let better = match best {
            None => true,
            Some((b, bd)) => dist < bd || (dist == bd && iv.key < integers[b].key),
        };
        if better {
            best = Some((i, dist));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone)]
struct Node {
    bound: f64,
    id: u64,
    fixes: Vec<(usize, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then_with(|| other.id.cmp(&self.id))
    }
}

enum Relaxation {
    Infeasible,
    Solved { objective: f64, values: Vec<f64> },
    Unknown,
}

struct Search<'a> {
    model: &'a MipModel,
    check: &'a dyn IncumbentCheck,
    options: &'a BnbOptions,
    start: Instant,
    lower: f64,
    upper: f64,
    incumbent: Option<Vec<f64>>,
    /// Bounds of nodes closed without a validated solution.
    unresolved: f64,
    /// Relaxation values of nodes closed with a validated solution or by bound.
    closed: f64,
    heap: BinaryHeap<Node>,
    next_id: u64,
    progress: Vec<ProgressRecord>,
    stats: BnbStats,
}

impl<'a> Search<'a> {
    fn elapsed_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }

    fn timed_out(&self) -> bool {
        self.start.elapsed() >= self.options.timeout
    }

    fn record(&mut self) {
        let rec = ProgressRecord {
            ms: self.elapsed_ms(),
            lower: self.lower,
            upper: self.upper,
        };
        match self.progress.last() {
            Some(last) if last.lower == rec.lower && last.upper == rec.upper => {}
            _ => self.progress.push(rec),
        }
    }

    fn node_lp(&self, fixes: &[(usize, f64, f64)]) -> Option<LpProblem> {
        let mut lp = self.model.lp.clone();
        for &(c, lo, hi) in fixes {
            lp.lower[c] = lp.lower[c].max(lo);
            lp.upper[c] = lp.upper[c].min(hi);
            if lp.lower[c] > lp.upper[c] {
                return None;
            }
        }
        for b in &self.model.products {
            let e = (lp.lower[b.eps], lp.upper[b.eps]);
            let x = (lp.lower[b.factor], lp.upper[b.factor]);
            lp.rows.extend(mccormick_rows(b, e, x));
        }
        Some(lp)
    }

    fn relax(&mut self, fixes: &[(usize, f64, f64)]) -> Result<Relaxation> {
        self.stats.nodes += 1;
        let Some(lp) = self.node_lp(fixes) else {
            return Ok(Relaxation::Infeasible);
        };
        let r = solve_lp(&lp, &self.options.lp)?;
        self.stats.lp_iterations += r.iterations;
        Ok(match r.status {
            LpStatus::Infeasible => Relaxation::Infeasible,
            LpStatus::Optimal if r.feasible => Relaxation::Solved {
                objective: r.objective,
                values: r.values,
            },
            _ => Relaxation::Unknown,
        })
    }

    /// Most violated bilinear term whose parameter can still be split.
    fn bilinear_split(&self, values: &[f64], fixes: &[(usize, f64, f64)]) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for b in &self.model.products {
            let viol = (values[b.product] - values[b.eps] * values[b.factor]).abs();
            if viol <= BILINEAR_TOL {
                continue;
            }
            let (mut lo, mut hi) = (self.model.lp.lower[b.eps], self.model.lp.upper[b.eps]);
            for &(c, l, h) in fixes {
                if c == b.eps {
                    lo = lo.max(l);
                    hi = hi.min(h);
                }
            }
            if hi - lo <= MIN_SPLIT_WIDTH {
                continue;
            }
            if best.is_none_or(|(_, _, _, v)| viol > v) {
                best = Some((b.eps, lo, hi, viol));
            }
        }
        best.map(|(c, lo, hi, _)| (c, lo, hi))
    }

    fn push(&mut self, bound: f64, fixes: Vec<(usize, f64, f64)>) {
        self.heap.push(Node {
            bound,
            id: self.next_id,
            fixes,
        });
        self.next_id += 1;
    }

    fn hint_for(&self, col: usize) -> Option<f64> {
        if !self.options.use_hints {
            return None;
        }
        self.model.hints.iter().find(|&&(c, _)| c == col).map(|&(_, v)| v)
    }

    fn try_incumbent(&mut self, objective: f64, values: Vec<f64>) -> bool {
        match self.check.check(&values, objective) {
            Some(v) => {
                // A replayed value may beat the LP bound by rounding; the
                // clamped value is still attained by the witness or exceeded.
                let v = v.min(self.upper);
                self.closed = self.closed.max(objective);
                if v > self.lower {
                    self.lower = v;
                    self.incumbent = Some(values);
                    self.stats.incumbents += 1;
                }
                true
            }
            None => false,
        }
    }

    /// Fixes hinted booleans, then rounds the most fractional boolean until
    /// the relaxation is integral or infeasible. Never prunes the tree.
    fn hinted_dive(&mut self) -> Result<()> {
        let mut fixes: Vec<(usize, f64, f64)> = self.model.hints.iter().map(|&(c, v)| (c, v, v)).collect();
        let limit = self.model.integers.len() + self.model.products.len() + 1;
        for _ in 0..limit {
            if self.timed_out() {
                break;
            }
            let (objective, values) = match self.relax(&fixes)? {
                Relaxation::Solved { objective, values } => (objective, values),
                _ => break,
            };
            if objective <= self.lower + self.options.gap {
                break;
            }
            if let Some(i) = branch_select(&self.model.integers, &values, self.options.int_tol) {
                let col = self.model.integers[i].col;
                let v = values[col].round();
                fixes.push((col, v, v));
            } else if let Some((c, _, _)) = self.bilinear_split(&values, &fixes) {
                fixes.push((c, values[c], values[c]));
            } else {
                self.try_incumbent(objective, values);
                break;
            }
        }
        Ok(())
    }

    fn current_upper(&self) -> f64 {
        let open = self.heap.peek().map_or(f64::NEG_INFINITY, |n| n.bound);
        open.max(self.unresolved).max(self.closed).max(self.lower)
    }

    fn sign_settled(&self) -> bool {
        match self.options.sign_threshold {
            Some(t) => self.upper <= t + SIGN_TOL || self.lower > t + SIGN_TOL,
            None => false,
        }
    }

    fn run(mut self) -> Result<MipSolution> {
        let root_bound = column_bound(&self.model.lp);
        let root = match self.relax(&[])? {
            Relaxation::Infeasible => {
                let v = self.lower;
                self.upper = v;
                self.record();
                return Ok(self.finish(MipStatus::Infeasible));
            }
            Relaxation::Solved { objective, .. } => objective.min(root_bound),
            Relaxation::Unknown => root_bound,
        };
        self.push(root, Vec::new());
        self.upper = self.current_upper();
        self.record();
        if self.options.use_hints && !self.model.hints.is_empty() {
            self.hinted_dive()?;
        }
        let status = loop {
            self.upper = self.upper.min(self.current_upper());
            self.record();
            if self.upper - self.lower <= self.options.gap {
                break MipStatus::Optimal;
            }
            if self.sign_settled() {
                break MipStatus::SignResolved;
            }
            if self.heap.is_empty() {
                break MipStatus::Stalled;
            }
            if self.timed_out() {
                break MipStatus::Timeout;
            }
            if self.options.node_limit.is_some_and(|n| self.stats.nodes >= n) {
                break MipStatus::NodeLimit;
            }
            let node = self.heap.pop().expect("heap is non-empty");
            if node.bound <= self.lower + self.options.gap {
                self.closed = self.closed.max(node.bound);
                continue;
            }
            let (objective, values) = match self.relax(&node.fixes)? {
                Relaxation::Infeasible => continue,
                Relaxation::Solved { objective, values } => (objective.min(node.bound), values),
                Relaxation::Unknown => {
                    // No relaxation: split on the first free boolean, keeping the parent bound.
                    let free = self.model.integers.iter().find(|iv| !node.fixes.iter().any(|f| f.0 == iv.col));
                    match free {
                        Some(iv) => {
                            let col = iv.col;
                            for v in [0.0, 1.0] {
                                let mut f = node.fixes.clone();
                                f.push((col, v, v));
                                self.push(node.bound, f);
                            }
                        }
                        None => self.unresolved = self.unresolved.max(node.bound),
                    }
                    continue;
                }
            };
            if objective <= self.lower + self.options.gap {
                self.closed = self.closed.max(objective);
                continue;
            }
            if let Some(i) = branch_select(&self.model.integers, &values, self.options.int_tol) {
                let col = self.model.integers[i].col;
                let first = self.hint_for(col).unwrap_or_else(|| values[col].round());
                for v in [first, 1.0 - first] {
                    let mut f = node.fixes.clone();
                    f.push((col, v, v));
                    self.push(objective, f);
                }
            } else if let Some((c, lo, hi)) = self.bilinear_split(&values, &node.fixes) {
                let mid = 0.5 * (lo + hi);
                for (l, h) in [(lo, mid), (mid, hi)] {
                    let mut f = node.fixes.clone();
                    f.push((c, l, h));
                    self.push(objective, f);
                }
            } else if !self.try_incumbent(objective, values) {
                self.unresolved = self.unresolved.max(objective);
            }
        };
        Ok(self.finish(status))
    }

    fn finish(mut self, status: MipStatus) -> MipSolution {
        self.stats.elapsed_ms = self.elapsed_ms();
        self.record();
        MipSolution {
            status,
            lower: self.lower,
            upper: self.upper,
            incumbent: self.incumbent,
            progress: self.progress,
            stats: self.stats,
        }
    }
}

/// Objective bound from column bounds alone.
fn column_bound(lp: &LpProblem) -> f64 {
    lp.objective
        .iter()
        .map(|&(j, c)| if c >= 0.0 { c * lp.upper[j] } else { c * lp.lower[j] })
        .sum()
}

/// Maximises the model's objective.
pub fn solve_mip(model: &MipModel, check: &dyn IncumbentCheck, options: &BnbOptions) -> Result<MipSolution> {
    if options.timeout.is_zero() {
        return Err(Error::Argument("timeout must be positive".into()));
    }
    let search = Search {
        model,
        check,
        options,
        start: Instant::now(),
        lower: options.initial_lower,
        upper: f64::INFINITY,
        incumbent: None,
        unresolved: f64::NEG_INFINITY,
        closed: f64::NEG_INFINITY,
        heap: BinaryHeap::new(),
        next_id: 0,
        progress: Vec::new(),
        stats: BnbStats::default(),
    };
    search.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::RowRelation;
    use crate::mip::{NetCopy, VarId};

    fn iv(col: usize, layer: usize, neuron: usize, copy: NetCopy) -> IntVar {
        IntVar {
            col,
            key: (layer, neuron, copy),
        }
    }

    #[test]
    fn most_fractional_wins() {
        let ints = [iv(0, 1, 0, NetCopy::Input), iv(1, 1, 1, NetCopy::Input)];
        assert_eq!(branch_select(&ints, &[0.5, 0.9], 1e-6), Some(0));
        assert_eq!(branch_select(&ints, &[0.9, 0.5], 1e-6), Some(1));
    }

    #[test]
    fn ties_use_layer_neuron_copy_order() {
        let ints = [iv(0, 2, 0, NetCopy::Input), iv(1, 1, 3, NetCopy::Perturbed), iv(2, 1, 3, NetCopy::Input)];
        assert_eq!(branch_select(&ints, &[0.5, 0.5, 0.5], 1e-6), Some(2));
    }

    #[test]
    fn integral_values_select_nothing() {
        let ints = [iv(0, 1, 0, NetCopy::Input)];
        assert_eq!(branch_select(&ints, &[1.0 - 1e-9], 1e-6), None);
    }

    #[test]
    fn zero_timeout_rejected() {
        let m = MipModel::new();
        let opts = BnbOptions {
            timeout: Duration::ZERO,
            ..BnbOptions::default()
        };
        assert!(matches!(solve_mip(&m, &AcceptRelaxation, &opts), Err(Error::Argument(_))));
    }

    #[test]
    fn pure_lp_solves_at_root() {
        let mut m = MipModel::new();
        let x = m.add_var(VarId::post(NetCopy::Input, 0, 0), 0.0, 2.0).unwrap();
        m.add_row(vec![(x, 1.0)], RowRelation::Le, 1.5);
        m.lp.objective = vec![(x, 1.0)];
        let s = solve_mip(&m, &AcceptRelaxation, &BnbOptions::default()).unwrap();
        assert_eq!(s.status, MipStatus::Optimal);
        assert!((s.lower - 1.5).abs() < 1e-9);
        assert_eq!(s.stats.nodes, 2);
    }

    #[test]
    fn knapsack_needs_branching() {
        // max 5a + 4b + 3c  s.t. 2a + 3b + c ≤ 4, 4a + b + 2c ≤ 5; booleans.
        let mut m = MipModel::new();
        let cols: Vec<usize> = (0..3).map(|k| m.add_bool(VarId::boolean(NetCopy::Input, 1, k)).unwrap()).collect();
        m.add_row(vec![(cols[0], 2.0), (cols[1], 3.0), (cols[2], 1.0)], RowRelation::Le, 4.0);
        m.add_row(vec![(cols[0], 4.0), (cols[1], 1.0), (cols[2], 2.0)], RowRelation::Le, 5.0);
        m.lp.objective = vec![(cols[0], 5.0), (cols[1], 4.0), (cols[2], 3.0)];
        let s = solve_mip(&m, &AcceptRelaxation, &BnbOptions::default()).unwrap();
        assert_eq!(s.status, MipStatus::Optimal);
        // {a,b} violates row 1 and {a,c} row 2; {b,c} = 7 is best.
        assert!((s.lower - 7.0).abs() < 1e-9, "{s:?}");
        assert_eq!(s.incumbent.unwrap(), vec![0.0, 1.0, 1.0]);
    }
}
