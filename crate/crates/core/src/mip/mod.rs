//! Mixed-integer model of the two-copy network problem.
//!
//! Columns are named by [`VarId`]; rows are plain linear constraints over
//! column indices. Booleans are the ReLU phase indicators of unstable
//! neurons. Bilinear terms (from contrast) are kept aside and relaxed by the
//! branch-and-bound with McCormick envelopes over the current node box.

mod bounds;
mod encode;

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

pub use bounds::{compute_concrete_bounds, interval_bounds, BoundOptions, BoundsTable};
pub use encode::{
    build_delta_m_problem, build_problem, encode_dependencies, encode_pair, encode_relu, ConfidenceCheck,
    CopyColumns, DeltaMProblem, InputColumns, PairEncoding, Problem, ProblemSpec, ReplayCheck, Witness,
};

use crate::error::{Error, Result};
use crate::lp::{LpProblem, LpRow, RowRelation, Sense};

/// Margin realising strict inequalities as non-strict ones.
pub const STRICT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NetCopy {
    Input,
    Perturbed,
}

impl fmt::Display for NetCopy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetCopy::Input => "x",
            NetCopy::Perturbed => "p",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarKind {
    /// Affine value `ẑ`.
    Pre,
    /// Activation `z`; at layer 0 the input pixel.
    Post,
    /// ReLU phase `a`.
    Bool,
    /// Continuous perturbation parameter.
    Epsilon,
    /// The objective variable `δ`.
    Delta,
}

/// Column name. `neuron` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId {
    pub copy: NetCopy,
    pub layer: usize,
    pub neuron: usize,
    pub kind: VarKind,
}

impl VarId {
    pub const fn new(copy: NetCopy, layer: usize, neuron: usize, kind: VarKind) -> Self {
        VarId {
            copy,
            layer,
            neuron,
            kind,
        }
    }

    pub const fn pre(copy: NetCopy, layer: usize, neuron: usize) -> Self {
        Self::new(copy, layer, neuron, VarKind::Pre)
    }

    pub const fn post(copy: NetCopy, layer: usize, neuron: usize) -> Self {
        Self::new(copy, layer, neuron, VarKind::Post)
    }

    pub const fn boolean(copy: NetCopy, layer: usize, neuron: usize) -> Self {
        Self::new(copy, layer, neuron, VarKind::Bool)
    }

    pub const fn epsilon(index: usize) -> Self {
        Self::new(NetCopy::Perturbed, 0, index, VarKind::Epsilon)
    }

    pub const fn delta() -> Self {
        Self::new(NetCopy::Input, 0, 0, VarKind::Delta)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (c, m, k) = (self.copy, self.layer, self.neuron);
        match self.kind {
            VarKind::Pre => write!(f, "zh{c}_{m}_{k}"),
            VarKind::Post => write!(f, "z{c}_{m}_{k}"),
            VarKind::Bool => write!(f, "a{c}_{m}_{k}"),
            VarKind::Epsilon => write!(f, "eps_{k}"),
            VarKind::Delta => write!(f, "delta"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
    Lt,
    Gt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinConstraint {
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

/// A boolean column with its branching tie-break key `(layer, neuron, copy)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntVar {
    pub col: usize,
    pub key: (usize, usize, NetCopy),
}

/// `product = eps · factor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bilinear {
    pub product: usize,
    pub eps: usize,
    pub factor: usize,
}

/// McCormick envelope of `w = e·x` over `e ∈ [el,eu]`, `x ∈ [xl,xu]`.
pub fn mccormick_rows(b: &Bilinear, (el, eu): (f64, f64), (xl, xu): (f64, f64)) -> [LpRow; 4] {
    let row = |ec: f64, xc: f64, relation, rhs| LpRow {
        terms: vec![(b.product, 1.0), (b.factor, -ec), (b.eps, -xc)],
        relation,
        rhs,
    };
    [
        row(el, xl, RowRelation::Ge, -el * xl),
        row(eu, xu, RowRelation::Ge, -eu * xu),
        row(eu, xl, RowRelation::Le, -eu * xl),
        row(el, xu, RowRelation::Le, -el * xu),
    ]
}

/// A maximisation MIP over bounded columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MipModel {
    pub lp: LpProblem,
    pub vars: Vec<VarId>,
    index: HashMap<VarId, usize>,
    pub integers: Vec<IntVar>,
    pub products: Vec<Bilinear>,
    /// Lower bound imposed on the objective column, if any.
    pub cutoff: f64,
    /// Preferred values for boolean columns.
    pub hints: Vec<(usize, f64)>,
}

impl Default for MipModel {
    fn default() -> Self {
        Self::new()
    }
}

impl MipModel {
    pub fn new() -> Self {
        MipModel {
            lp: LpProblem::new(Sense::Maximize),
            vars: Vec::new(),
            index: HashMap::new(),
            integers: Vec::new(),
            products: Vec::new(),
            cutoff: f64::NEG_INFINITY,
            hints: Vec::new(),
        }
    }

    pub fn add_var(&mut self, id: VarId, lower: f64, upper: f64) -> Result<usize> {
        if self.index.contains_key(&id) {
            return Err(Error::Encoding(format!("variable {id} declared twice")));
        }
        if !(lower <= upper) {
            return Err(Error::Encoding(format!("variable {id} has empty bounds [{lower}, {upper}]")));
        }
        let col = self.lp.add_var(lower, upper);
        self.vars.push(id);
        self.index.insert(id, col);
        Ok(col)
    }

    pub fn add_bool(&mut self, id: VarId) -> Result<usize> {
        let col = self.add_var(id, 0.0, 1.0)?;
        self.integers.push(IntVar {
            col,
            key: (id.layer, id.neuron, id.copy),
        });
        Ok(col)
    }

    pub fn col(&self, id: VarId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, relation: RowRelation, rhs: f64) {
        self.lp.add_row(terms, relation, rhs);
    }

    /// Adds a named constraint; strict comparisons get [`STRICT_MARGIN`].
    pub fn add_constraint(&mut self, c: &LinConstraint) -> Result<()> {
        let mut terms = Vec::with_capacity(c.terms.len());
        for &(id, w) in &c.terms {
            let col = self
                .col(id)
                .ok_or_else(|| Error::Encoding(format!("constraint references undeclared {id}")))?;
            terms.push((col, w));
        }
        let (relation, rhs) = match c.cmp {
            Cmp::Le => (RowRelation::Le, c.rhs),
            Cmp::Eq => (RowRelation::Eq, c.rhs),
            Cmp::Ge => (RowRelation::Ge, c.rhs),
            Cmp::Lt => (RowRelation::Le, c.rhs - STRICT_MARGIN),
            Cmp::Gt => (RowRelation::Ge, c.rhs + STRICT_MARGIN),
        };
        self.add_row(terms, relation, rhs);
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.lp.rows.len()
    }

    pub fn num_booleans(&self) -> usize {
        self.integers.len()
    }

    /// LP-format text: objective, constraints, bounds, integrality markers.
    pub fn to_lp_text(&self) -> String {
        let name = |c: usize| self.vars[c].to_string();
        let expr = |terms: &[(usize, f64)]| {
            let mut s = String::new();
            for (i, &(c, w)) in terms.iter().enumerate() {
                let sign = if w < 0.0 { "-" } else if i > 0 { "+" } else { "" };
                let _ = write!(s, "{}{} {} {}", if i > 0 { " " } else { "" }, sign, w.abs(), name(c));
            }
            if s.is_empty() {
                s.push('0');
            }
            s
        };
        let mut out = String::new();
        let sense = match self.lp.sense {
            Sense::Maximize => "Maximize",
            Sense::Minimize => "Minimize",
        };
        let _ = writeln!(out, "{sense}\n obj: {}", expr(&self.lp.objective));
        out.push_str("Subject To\n");
        for (i, row) in self.lp.rows.iter().enumerate() {
            let op = match row.relation {
                RowRelation::Le => "<=",
                RowRelation::Eq => "=",
                RowRelation::Ge => ">=",
            };
            let _ = writeln!(out, " c{i}: {} {op} {}", expr(&row.terms), row.rhs);
        }
        for b in &self.products {
            let _ = writeln!(out, " \\ {} = {} * {}", name(b.product), name(b.eps), name(b.factor));
        }
        out.push_str("Bounds\n");
        for c in 0..self.num_vars() {
            let _ = writeln!(out, " {} <= {} <= {}", self.lp.lower[c], name(c), self.lp.upper[c]);
        }
        if !self.integers.is_empty() {
            out.push_str("Binary\n");
            for iv in &self.integers {
                let _ = writeln!(out, " {}", name(iv.col));
            }
        }
        out.push_str("End\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_constraints_get_margin() {
        let mut m = MipModel::new();
        let x = VarId::post(NetCopy::Input, 0, 0);
        m.add_var(x, 0.0, 1.0).unwrap();
        m.add_constraint(&LinConstraint {
            terms: vec![(x, 1.0)],
            cmp: Cmp::Gt,
            rhs: 0.5,
        })
        .unwrap();
        assert_eq!(m.lp.rows[0].relation, RowRelation::Ge);
        assert_eq!(m.lp.rows[0].rhs, 0.5 + STRICT_MARGIN);
    }

    #[test]
    fn duplicate_and_undeclared_rejected() {
        let mut m = MipModel::new();
        let x = VarId::post(NetCopy::Input, 0, 0);
        m.add_var(x, 0.0, 1.0).unwrap();
        assert!(m.add_var(x, 0.0, 1.0).is_err());
        let y = VarId::post(NetCopy::Perturbed, 0, 0);
        let c = LinConstraint {
            terms: vec![(y, 1.0)],
            cmp: Cmp::Le,
            rhs: 0.0,
        };
        assert!(matches!(m.add_constraint(&c), Err(Error::Encoding(_))));
    }

    #[test]
    fn mccormick_is_exact_at_corners() {
        let b = Bilinear {
            product: 0,
            eps: 1,
            factor: 2,
        };
        let rows = mccormick_rows(&b, (0.5, 2.0), (0.0, 1.0));
        for e in [0.5, 2.0] {
            for x in [0.0, 1.0] {
                let vals = [e * x, e, x];
                for r in &rows {
                    let lhs: f64 = r.terms.iter().map(|&(c, w)| w * vals[c]).sum();
                    match r.relation {
                        RowRelation::Ge => assert!(lhs >= r.rhs - 1e-12),
                        RowRelation::Le => assert!(lhs <= r.rhs + 1e-12),
                        RowRelation::Eq => unreachable!(),
                    }
                }
            }
        }
    }
}
