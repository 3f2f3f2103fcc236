//! Dense bounded-variable primal simplex.
//!
//! Every column carries finite bounds `l ≤ x ≤ u`; columns sit at either
//! bound while nonbasic, so box constraints never enter the tableau. A
//! two-phase method finds a first feasible basis. The tableau is stored
//! densely, which is adequate for the few hundred columns the verifier
//! produces per relaxation.

use crate::error::{Error, Result};

/// Primal feasibility tolerance on constraint rows.
pub const FEAS_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const OPT_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowRelation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub terms: Vec<(usize, f64)>,
    pub relation: RowRelation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<(usize, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn new(sense: Sense) -> Self {
        LpProblem {
            sense,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_var(&mut self, lower: f64, upper: f64) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.lower.len() - 1
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, relation: RowRelation, rhs: f64) {
        self.rows.push(LpRow { terms, relation, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Largest violation of any row or column bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match row.relation {
                RowRelation::Le => lhs - row.rhs,
                RowRelation::Ge => row.rhs - lhs,
                RowRelation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Smallest-index entering and leaving choice; never cycles.
    #[default]
    Bland,
    /// Largest reduced cost, falling back to Bland on degenerate streaks.
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub iter_cap: usize,
    pub pivot: PivotRule,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            iter_cap: 50_000,
            pivot: PivotRule::Bland,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    /// Stopped because the objective crossed a requested cutoff.
    Cutoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    /// `values` satisfy every row within tolerance.
    pub feasible: bool,
    pub iterations: usize,
}

/// Answer to "does the optimum stay on the safe side of `cutoff`?".
///
/// For minimisation the safe side is `≥ cutoff`; for maximisation `≤ cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffVerdict {
    /// A feasible point strictly beyond the cutoff exists.
    Crossed,
    /// The optimum equals the cutoff.
    Attained,
    /// The optimum is strictly on the safe side.
    Respected,
    /// Infeasible or iteration limit: nothing proven.
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffResult {
    pub verdict: CutoffVerdict,
    pub result: LpResult,
}

pub fn solve_lp(problem: &LpProblem, options: &LpOptions) -> Result<LpResult> {
    Simplex::build(problem, options)?.run(problem, None)
}

/// Like [`solve_lp`], but returns as soon as the sign question relative to
/// `cutoff` is settled.
pub fn solve_lp_with_cutoff(problem: &LpProblem, cutoff: f64, options: &LpOptions) -> Result<CutoffResult> {
    let result = Simplex::build(problem, options)?.run(problem, Some(cutoff))?;
    let signed = |v: f64| match problem.sense {
        Sense::Minimize => v - cutoff,
        Sense::Maximize => cutoff - v,
    };
    let verdict = match result.status {
        LpStatus::Cutoff => CutoffVerdict::Crossed,
        LpStatus::Optimal => {
            let margin = signed(result.objective);
            if margin < -OPT_TOL {
                CutoffVerdict::Crossed
            } else if margin <= OPT_TOL {
                CutoffVerdict::Attained
            } else {
                CutoffVerdict::Respected
            }
        }
        LpStatus::IterLimit if result.feasible && signed(result.objective) < -OPT_TOL => CutoffVerdict::Crossed,
        _ => CutoffVerdict::Unknown,
    };
    Ok(CutoffResult { verdict, result })
}

struct Simplex {
    m: usize,
    /// Total columns: structural, slack, artificial.
    ncols: usize,
    n_struct: usize,
    first_artificial: usize,
    /// Row-major `m × ncols`, holding `B⁻¹A`.
    tab: Vec<f64>,
    /// Original constraint matrix after shifting and sign normalisation.
    orig: Vec<f64>,
    rhs: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    range: Vec<f64>,
    at_upper: Vec<bool>,
    reduced: Vec<f64>,
    live: Vec<usize>,
    shift: Vec<f64>,
    options: LpOptions,
    iterations: usize,
}

enum Phase {
    One,
    Two,
}

enum StepOutcome {
    Optimal,
    Unbounded,
    Moved,
}

impl Simplex {
    fn build(p: &LpProblem, options: &LpOptions) -> Result<Self> {
        let n = p.num_vars();
        if p.upper.len() != n {
            return Err(Error::Argument("lower/upper bound vectors differ in length".into()));
        }
        for j in 0..n {
            if !p.lower[j].is_finite() || !p.upper[j].is_finite() {
                return Err(Error::Argument(format!("variable {j} is not bounded")));
            }
        }
        let m = p.rows.len();
        let n_slack = p.rows.iter().filter(|r| r.relation != RowRelation::Eq).count();
        // Artificial count is only known after sign normalisation; allocate worst case.
        let mut dense = vec![0.0; m * (n + n_slack)];
        let mut rhs = vec![0.0; m];
        let mut slack_of_row = vec![None; m];
        let mut next_slack = n;
        for (i, row) in p.rows.iter().enumerate() {
            let mut b = row.rhs;
            for &(j, a) in &row.terms {
                if j >= n {
                    return Err(Error::Argument(format!("row {i} references unknown variable {j}")));
                }
                dense[i * (n + n_slack) + j] += a;
                b -= a * p.lower[j];
            }
            match row.relation {
                RowRelation::Le => {
                    dense[i * (n + n_slack) + next_slack] = 1.0;
                    slack_of_row[i] = Some(next_slack);
                    next_slack += 1;
                }
                RowRelation::Ge => {
                    dense[i * (n + n_slack) + next_slack] = -1.0;
                    slack_of_row[i] = Some(next_slack);
                    next_slack += 1;
                }
                RowRelation::Eq => {}
            }
            if b < 0.0 {
                for v in &mut dense[i * (n + n_slack)..(i + 1) * (n + n_slack)] {
                    *v = -*v;
                }
                b = -b;
            }
            rhs[i] = b;
        }
        let width0 = n + n_slack;
        let mut basis = vec![usize::MAX; m];
        let mut n_art = 0;
        for i in 0..m {
            match slack_of_row[i] {
                Some(s) if dense[i * width0 + s] > 0.0 => basis[i] = s,
                _ => n_art += 1,
            }
        }
        let ncols = width0 + n_art;
        let mut tab = vec![0.0; m * ncols];
        let mut next_art = width0;
        for i in 0..m {
            tab[i * ncols..i * ncols + width0].copy_from_slice(&dense[i * width0..(i + 1) * width0]);
            if basis[i] == usize::MAX {
                tab[i * ncols + next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
        }
        let mut range = vec![f64::INFINITY; ncols];
        let mut shift = vec![0.0; n];
        for j in 0..n {
            shift[j] = p.lower[j];
            let r = p.upper[j] - p.lower[j];
            if r < -FEAS_TOL {
                return Err(Error::Argument(format!(
                    "variable {j} has empty bounds [{}, {}]",
                    p.lower[j], p.upper[j]
                )));
            }
            range[j] = r.max(0.0);
        }
        let mut basic_row = vec![None; ncols];
        for (i, &b) in basis.iter().enumerate() {
            basic_row[b] = Some(i);
        }
        let live = (0..ncols).filter(|&j| range[j] > 0.0 || basic_row[j].is_some()).collect();
        Ok(Simplex {
            m,
            ncols,
            n_struct: n,
            first_artificial: width0,
            orig: tab.clone(),
            tab,
            beta: rhs.clone(),
            rhs,
            basis,
            basic_row,
            range,
            at_upper: vec![false; ncols],
            reduced: vec![0.0; ncols],
            live,
            shift,
            options: *options,
            iterations: 0,
        })
    }

    fn price(&mut self, cost: &[f64]) {
        self.reduced[..self.ncols].copy_from_slice(&cost[..self.ncols]);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * self.ncols..(i + 1) * self.ncols];
                for &j in &self.live {
                    self.reduced[j] -= cb * row[j];
                }
            }
        }
        for &b in &self.basis {
            self.reduced[b] = 0.0;
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for &j in &self.live {
            if self.basic_row[j].is_some() || self.range[j] <= 0.0 {
                continue;
            }
            let d = self.reduced[j];
            let (dir, score) = if !self.at_upper[j] && d < -OPT_TOL {
                (1.0, -d)
            } else if self.at_upper[j] && d > OPT_TOL {
                (-1.0, d)
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn step(&mut self, bland: bool) -> (StepOutcome, bool) {
        let Some((j, dir)) = self.choose_entering(bland) else {
            return (StepOutcome::Optimal, false);
        };
        let nc = self.ncols;
        let mut theta = self.range[j];
        let mut leave: Option<(usize, bool)> = None;
        let mut leave_alpha = 0.0f64;
        for i in 0..self.m {
            let alpha = dir * self.tab[i * nc + j];
            if alpha.abs() < PIVOT_TOL {
                continue;
            }
            let (limit, to_upper) = if alpha > 0.0 {
                (self.beta[i].max(0.0) / alpha, false)
            } else {
                let ub = self.range[self.basis[i]];
                if !ub.is_finite() {
                    continue;
                }
                ((ub - self.beta[i]).max(0.0) / -alpha, true)
            };
            let better = match leave {
                _ if limit < theta - 1e-12 => true,
                Some((r, _)) if limit <= theta + 1e-12 => {
                    if bland {
                        self.basis[i] < self.basis[r]
                    } else {
                        alpha.abs() > leave_alpha.abs()
                    }
                }
                _ => false,
            };
            if better {
                theta = limit;
                leave = Some((i, to_upper));
                leave_alpha = alpha;
            }
        }
        if !theta.is_finite() {
            return (StepOutcome::Unbounded, false);
        }
        self.iterations += 1;
        for i in 0..self.m {
            let a = self.tab[i * nc + j];
            if a != 0.0 {
                self.beta[i] -= theta * dir * a;
            }
        }
        let degenerate = theta < 1e-12;
        match leave {
            None => {
                self.at_upper[j] = !self.at_upper[j];
            }
            Some((r, to_upper)) => {
                let q = self.basis[r];
                self.at_upper[q] = to_upper;
                self.basic_row[q] = None;
                self.beta[r] = if dir > 0.0 { theta } else { self.range[j] - theta };
                self.at_upper[j] = false;
                self.pivot(r, j);
            }
        }
        (StepOutcome::Moved, degenerate)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let piv = self.tab[r * nc + j];
        {
            let row = &mut self.tab[r * nc..(r + 1) * nc];
            for &c in &self.live {
                row[c] /= piv;
            }
            row[j] = 1.0;
        }
        let pivot_row: Vec<(usize, f64)> = self
            .live
            .iter()
            .map(|&c| (c, self.tab[r * nc + c]))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * nc + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * nc..(i + 1) * nc];
            for &(c, v) in &pivot_row {
                row[c] -= f * v;
            }
            row[j] = 0.0;
        }
        let f = self.reduced[j];
        if f != 0.0 {
            for &(c, v) in &pivot_row {
                self.reduced[c] -= f * v;
            }
            self.reduced[j] = 0.0;
        }
        self.basis[r] = j;
        self.basic_row[j] = Some(r);
    }

    /// Rebuilds `B⁻¹A` and the basic values from the original rows.
    fn refactor(&mut self) -> bool {
        let (m, nc) = (self.m, self.ncols);
        // Gauss-Jordan on [B | orig | rhs'] where rhs' accounts for columns at their upper bound.
        let mut work = self.orig.clone();
        let mut b: Vec<f64> = self.rhs.clone();
        for j in 0..nc {
            if self.basic_row[j].is_none() && self.at_upper[j] {
                let u = self.range[j];
                for i in 0..m {
                    b[i] -= self.orig[i * nc + j] * u;
                }
            }
        }
        let mut row_of = vec![usize::MAX; m];
        let mut used = vec![false; m];
        for (slot, &col) in self.basis.iter().enumerate() {
            let mut best = usize::MAX;
            let mut best_abs = 1e-11;
            for i in 0..m {
                if !used[i] && work[i * nc + col].abs() > best_abs {
                    best_abs = work[i * nc + col].abs();
                    best = i;
                }
            }
            if best == usize::MAX {
                return false;
            }
            used[best] = true;
            row_of[slot] = best;
            let piv = work[best * nc + col];
            for c in 0..nc {
                work[best * nc + c] /= piv;
            }
            b[best] /= piv;
            for i in 0..m {
                if i != best {
                    let f = work[i * nc + col];
                    if f != 0.0 {
                        for c in 0..nc {
                            work[i * nc + c] -= f * work[best * nc + c];
                        }
                        b[i] -= f * b[best];
                    }
                }
            }
        }
        let mut tab = vec![0.0; m * nc];
        let mut beta = vec![0.0; m];
        for slot in 0..m {
            let src = row_of[slot];
            tab[slot * nc..(slot + 1) * nc].copy_from_slice(&work[src * nc..(src + 1) * nc]);
            beta[slot] = b[src];
        }
        self.tab = tab;
        self.beta = beta;
        true
    }

    fn shifted_values(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for j in 0..self.ncols {
            y[j] = match self.basic_row[j] {
                Some(r) => self.beta[r].clamp(0.0, self.range[j]),
                None if self.at_upper[j] => self.range[j],
                None => 0.0,
            };
        }
        y
    }

    fn structural_values(&self) -> Vec<f64> {
        let y = self.shifted_values();
        (0..self.n_struct).map(|j| self.shift[j] + y[j]).collect()
    }

    fn iterate(&mut self, phase: Phase, cost: &[f64], problem: &LpProblem, cutoff: Option<f64>) -> Result<Option<LpStatus>> {
        let mut streak = 0usize;
        loop {
            if self.iterations >= self.options.iter_cap {
                return Ok(Some(LpStatus::IterLimit));
            }
            let bland = matches!(self.options.pivot, PivotRule::Bland) || streak >= DEGENERATE_STREAK;
            let (outcome, degenerate) = self.step(bland);
            match outcome {
                StepOutcome::Optimal => return Ok(None),
                StepOutcome::Unbounded => {
                    return match phase {
                        Phase::One => Err(Error::Internal("phase-one problem reported unbounded".into())),
                        Phase::Two => Ok(Some(LpStatus::Unbounded)),
                    }
                }
                StepOutcome::Moved => {}
            }
            streak = if degenerate { streak + 1 } else { 0 };
            if self.iterations % 250 == 0 {
                self.refactor();
                self.price(cost);
            }
            if let (Phase::Two, Some(cut), false) = (&phase, cutoff, degenerate) {
                let value = problem.objective_value(&self.structural_values());
                let crossed = match problem.sense {
                    Sense::Minimize => value < cut - OPT_TOL,
                    Sense::Maximize => value > cut + OPT_TOL,
                };
                if crossed {
                    return Ok(Some(LpStatus::Cutoff));
                }
            }
        }
    }

    fn run(mut self, problem: &LpProblem, cutoff: Option<f64>) -> Result<LpResult> {
        let n = self.n_struct;
        if self.first_artificial < self.ncols {
            let mut cost = vec![0.0; self.ncols];
            cost[self.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
            self.price(&cost);
            if let Some(status) = self.iterate(Phase::One, &cost, problem, None)? {
                return Ok(self.finish(problem, status));
            }
            let infeasibility: f64 = (self.first_artificial..self.ncols)
                .filter_map(|j| self.basic_row[j].map(|r| self.beta[r].max(0.0)))
                .sum();
            let scale = 1.0 + self.rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            if infeasibility > FEAS_TOL * scale {
                return Ok(self.finish(problem, LpStatus::Infeasible));
            }
            for j in self.first_artificial..self.ncols {
                self.range[j] = 0.0;
            }
            let keep: Vec<usize> = self
                .live
                .iter()
                .copied()
                .filter(|&j| j < self.first_artificial || self.basic_row[j].is_some())
                .collect();
            self.live = keep;
        }
        let mut cost = vec![0.0; self.ncols];
        let sign = match problem.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        for &(j, c) in &problem.objective {
            if j >= n {
                return Err(Error::Argument(format!("objective references unknown variable {j}")));
            }
            cost[j] += sign * c;
        }
        for attempt in 0..3 {
            self.price(&cost);
            if let Some(status) = self.iterate(Phase::Two, &cost, problem, cutoff)? {
                if status == LpStatus::Unbounded {
                    return Err(Error::Internal("bounded LP reported unbounded".into()));
                }
                return Ok(self.finish(problem, status));
            }
            let x = self.structural_values();
            if problem.max_violation(&x) <= 1e-6 || attempt == 2 {
                break;
            }
            if !self.refactor() {
                break;
            }
        }
        Ok(self.finish(problem, LpStatus::Optimal))
    }

    fn finish(&self, problem: &LpProblem, status: LpStatus) -> LpResult {
        let values = self.structural_values();
        let feasible = !matches!(status, LpStatus::Infeasible) && problem.max_violation(&values) <= 1e-6;
        LpResult {
            status,
            objective: problem.objective_value(&values),
            values,
            feasible,
            iterations: self.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> LpOptions {
        LpOptions::default()
    }

    #[test]
    fn single_variable_upper_row() {
        let mut p = LpProblem::new(Sense::Maximize);
        let x = p.add_var(0.0, 10.0);
        p.objective = vec![(x, 1.0)];
        p.add_row(vec![(x, 1.0)], RowRelation::Le, 3.0);
        let r = solve_lp(&p, &opts()).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn two_variable_sum() {
        let mut p = LpProblem::new(Sense::Maximize);
        let x = p.add_var(0.0, 1.0);
        let y = p.add_var(0.0, 1.0);
        p.objective = vec![(x, 1.0), (y, 1.0)];
        p.add_row(vec![(x, 1.0), (y, 1.0)], RowRelation::Le, 1.0);
        let r = solve_lp(&p, &opts()).unwrap();
        assert!((r.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_rows() {
        let mut p = LpProblem::new(Sense::Minimize);
        let x = p.add_var(0.0, 1.0);
        p.add_row(vec![(x, 1.0)], RowRelation::Ge, 2.0);
        assert_eq!(solve_lp(&p, &opts()).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_and_negative_bounds() {
        let mut p = LpProblem::new(Sense::Minimize);
        let x = p.add_var(-3.0, 3.0);
        let y = p.add_var(-3.0, 3.0);
        p.objective = vec![(x, 1.0), (y, 2.0)];
        p.add_row(vec![(x, 1.0), (y, -1.0)], RowRelation::Eq, 1.0);
        let r = solve_lp(&p, &opts()).unwrap();
        // y = x - 1, minimise 3x - 2 with x ≥ -2 (y ≥ -3).
        assert!((r.objective - -8.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn unbounded_variable_rejected() {
        let mut p = LpProblem::new(Sense::Minimize);
        p.add_var(0.0, f64::INFINITY);
        assert!(matches!(solve_lp(&p, &opts()), Err(Error::Argument(_))));
    }

    #[test]
    fn cutoff_disjoint_boxes() {
        let mut p = LpProblem::new(Sense::Minimize);
        let x = p.add_var(2.0, 3.0);
        let y = p.add_var(0.0, 1.0);
        p.objective = vec![(x, 1.0), (y, -1.0)];
        let r = solve_lp_with_cutoff(&p, 0.0, &opts()).unwrap();
        assert_eq!(r.verdict, CutoffVerdict::Respected);
        assert!((r.result.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cutoff_equal_variables() {
        let mut p = LpProblem::new(Sense::Minimize);
        let x = p.add_var(0.0, 1.0);
        let y = p.add_var(0.0, 1.0);
        p.objective = vec![(x, 1.0), (y, -1.0)];
        p.add_row(vec![(x, 1.0), (y, -1.0)], RowRelation::Eq, 0.0);
        let r = solve_lp_with_cutoff(&p, 0.0, &opts()).unwrap();
        assert_eq!(r.verdict, CutoffVerdict::Attained);
        assert!(r.result.objective.abs() < 1e-9);
    }

    #[test]
    fn cutoff_crossing_stops_early() {
        let mut p = LpProblem::new(Sense::Minimize);
        let x = p.add_var(0.0, 1.0);
        let y = p.add_var(0.0, 1.0);
        p.objective = vec![(x, 1.0), (y, -1.0)];
        let r = solve_lp_with_cutoff(&p, 0.0, &opts()).unwrap();
        assert_eq!(r.verdict, CutoffVerdict::Crossed);
        assert!(r.result.objective < 0.0);
    }

    #[test]
    fn fixed_columns_stay_put() {
        let mut p = LpProblem::new(Sense::Maximize);
        let x = p.add_var(0.5, 0.5);
        let y = p.add_var(0.0, 2.0);
        p.objective = vec![(x, 1.0), (y, 1.0)];
        p.add_row(vec![(x, 1.0), (y, 1.0)], RowRelation::Le, 1.25);
        let r = solve_lp(&p, &opts()).unwrap();
        assert!((r.values[0] - 0.5).abs() < 1e-12);
        assert!((r.objective - 1.25).abs() < 1e-9);
    }
}
