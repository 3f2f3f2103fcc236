//! Perturbation functions, their MIP input constraints and seed dependencies.
//!
//! A [`PerturbationSpec`] is what the user writes: integer parameters may be
//! ranges and real ranges may straddle a case boundary. [`enumerate_discrete`]
//! turns it into a list of [`Perturbation`]s, each with fixed integer
//! parameters and a sign-definite real range. Only the continuous parameters
//! of a [`Perturbation`] (its `ε` vector) are left to the solver or attack.
//!
//! Pixel coordinates in specs are 1-based, flat indices are 0-based.

mod parse;
mod rotation;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use parse::parse_perturbation;

use crate::error::{Error, Result};
use crate::lp::RowRelation;
use crate::net::{Network, Shape};
use crate::relation::Relation;

const RANGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo - RANGE_TOL && v <= self.hi + RANGE_TOL
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: i64,
    pub hi: i64,
}

impl IntRange {
    pub const fn new(lo: i64, hi: i64) -> Self {
        IntRange { lo, hi }
    }

    pub fn values(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

impl fmt::Display for IntRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "[{},{}]", self.lo, self.hi)
        }
    }
}

/// A perturbation kind together with its range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PerturbationSpec {
    Brightness(Interval),
    Contrast(Interval),
    Occlusion { i: IntRange, j: IntRange, w: IntRange },
    Patch { eps: Interval, i: IntRange, j: IntRange, w: IntRange },
    Translation { tx: IntRange, ty: IntRange },
    Rotation(Interval),
    Linf(Interval),
}

impl PerturbationSpec {
    /// Shape-independent range checks.
    pub fn check(&self) -> Result<()> {
        let arg = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::Argument(msg)) };
        let ordered = |r: &IntRange, what: &str| arg(r.lo <= r.hi, format!("{what} range {r} is empty"));
        match self {
            PerturbationSpec::Brightness(r) => arg(
                -1.0 <= r.lo && r.lo <= r.hi && r.hi <= 1.0,
                format!("brightness range {r} must satisfy -1 <= l <= u <= 1"),
            ),
            PerturbationSpec::Contrast(r) => arg(
                0.0 < r.lo && r.lo <= r.hi,
                format!("contrast range {r} must satisfy 0 < l <= u"),
            ),
            PerturbationSpec::Occlusion { i, j, w } => {
                ordered(i, "row")?;
                ordered(j, "column")?;
                ordered(w, "width")?;
                arg(w.lo >= 1, "occlusion width must be at least 1".into())
            }
            PerturbationSpec::Patch { eps, i, j, w } => {
                arg(
                    eps.lo == 0.0 && (0.0..=1.0).contains(&eps.hi),
                    format!("patch range {eps} must be [0,eps] with 0 <= eps <= 1"),
                )?;
                ordered(i, "row")?;
                ordered(j, "column")?;
                ordered(w, "width")?;
                arg(w.lo >= 1, "patch width must be at least 1".into())
            }
            PerturbationSpec::Translation { tx, ty } => {
                ordered(tx, "row offset")?;
                ordered(ty, "column offset")
            }
            PerturbationSpec::Rotation(r) => {
                if r.lo != r.hi {
                    return Err(Error::UnsupportedRange(format!(
                        "rotation supports a single angle, got {r}"
                    )));
                }
                arg(
                    (0.0..=360.0).contains(&r.lo),
                    format!("rotation angle {} outside [0,360]", r.lo),
                )
            }
            PerturbationSpec::Linf(r) => arg(
                r.lo == 0.0 && (0.0..=1.0).contains(&r.hi),
                format!("linf range {r} must be [0,eps] with 0 <= eps <= 1"),
            ),
        }
    }
}

impl fmt::Display for PerturbationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbationSpec::Brightness(r) => write!(f, "brightness({r})"),
            PerturbationSpec::Contrast(r) => write!(f, "contrast({r})"),
            PerturbationSpec::Occlusion { i, j, w } => write!(f, "occlusion({i},{j},{w})"),
            PerturbationSpec::Patch { eps, i, j, w } => write!(f, "patch({eps},{i},{j},{w})"),
            PerturbationSpec::Translation { tx, ty } => write!(f, "translation({tx},{ty})"),
            PerturbationSpec::Rotation(r) => write!(f, "rotation({})", r.lo),
            PerturbationSpec::Linf(r) => write!(f, "linf({r})"),
        }
    }
}

/// A perturbation with fixed integer parameters and one case of its real range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Perturbation {
    Brightness(Interval),
    Contrast(Interval),
    /// Top-left pixel `(i, j)` (1-based) and side `w` of the zeroed square.
    Occlusion { i: usize, j: usize, w: usize },
    /// Pixels of the square move independently within `[-eps, eps]`.
    Patch { eps: f64, i: usize, j: usize, w: usize },
    Translation { tx: i64, ty: i64 },
    Rotation { theta: f64 },
    Linf { eps: f64 },
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Perturbation::Brightness(r) => write!(f, "brightness({r})"),
            Perturbation::Contrast(r) => write!(f, "contrast({r})"),
            Perturbation::Occlusion { i, j, w } => write!(f, "occlusion({i},{j},{w})"),
            Perturbation::Patch { eps, i, j, w } => write!(f, "patch([0,{eps}],{i},{j},{w})"),
            Perturbation::Translation { tx, ty } => write!(f, "translation({tx},{ty})"),
            Perturbation::Rotation { theta } => write!(f, "rotation({theta})"),
            Perturbation::Linf { eps } => write!(f, "linf([0,{eps}])"),
        }
    }
}

/// Expands integer ranges and splits real ranges at their case boundary.
///
/// Brightness splits at `0`, contrast at `1`. A patch keeps only its
/// widest square per position, since narrower squares are contained in it.
pub fn enumerate_discrete(spec: &PerturbationSpec, shape: Shape) -> Result<Vec<Perturbation>> {
    spec.check()?;
    let (d1, d2) = (shape.height as i64, shape.width as i64);
    let square_fits = |i: &IntRange, j: &IntRange, w: i64, what: &str| -> Result<()> {
        if i.lo < 1 || j.lo < 1 || i.hi + w - 1 > d1 || j.hi + w - 1 > d2 {
            Err(Error::Argument(format!(
                "{what} square at rows {i}, columns {j} with side {w} does not fit a {d1}x{d2} image"
            )))
        } else {
            Ok(())
        }
    };
    let split = |r: Interval, at: f64| -> Vec<Interval> {
        if r.lo < at && at < r.hi {
            vec![Interval::new(r.lo, at), Interval::new(at, r.hi)]
        } else {
            vec![r]
        }
    };
    let out: Vec<Perturbation> = match *spec {
        PerturbationSpec::Brightness(r) => split(r, 0.0).into_iter().map(Perturbation::Brightness).collect(),
        PerturbationSpec::Contrast(r) => split(r, 1.0).into_iter().map(Perturbation::Contrast).collect(),
        PerturbationSpec::Occlusion { i, j, w } => {
            square_fits(&i, &j, w.hi, "occlusion")?;
            let mut v = Vec::new();
            for ii in i.values() {
                for jj in j.values() {
                    for ww in w.values() {
                        v.push(Perturbation::Occlusion {
                            i: ii as usize,
                            j: jj as usize,
                            w: ww as usize,
                        });
                    }
                }
            }
            v
        }
        PerturbationSpec::Patch { eps, i, j, w } => {
            square_fits(&i, &j, w.hi, "patch")?;
            let mut v = Vec::new();
            for ii in i.values() {
                for jj in j.values() {
                    v.push(Perturbation::Patch {
                        eps: eps.hi,
                        i: ii as usize,
                        j: jj as usize,
                        w: w.hi as usize,
                    });
                }
            }
            v
        }
        PerturbationSpec::Translation { tx, ty } => {
            if tx.lo < -d1 || tx.hi > d1 || ty.lo < -d2 || ty.hi > d2 {
                return Err(Error::Argument(format!(
                    "translation ({tx},{ty}) exceeds the {d1}x{d2} image"
                )));
            }
            let mut v = Vec::new();
            for a in tx.values() {
                for b in ty.values() {
                    v.push(Perturbation::Translation { tx: a, ty: b });
                }
            }
            v
        }
        PerturbationSpec::Rotation(r) => vec![Perturbation::Rotation { theta: r.lo }],
        PerturbationSpec::Linf(r) => vec![Perturbation::Linf { eps: r.hi }],
    };
    if out.is_empty() {
        return Err(Error::Argument(format!("{spec} enumerates to nothing")));
    }
    Ok(out)
}

/// A variable appearing in an input constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputVar {
    /// Pixel of the original input.
    Orig(usize),
    /// Pixel of the perturbed input.
    Pert(usize),
    /// Continuous perturbation parameter.
    Eps(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputRow {
    pub terms: Vec<(InputVar, f64)>,
    pub relation: RowRelation,
    pub rhs: f64,
}

/// `Pert(pert) = Eps(eps) · Orig(orig)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductLink {
    pub pert: usize,
    pub orig: usize,
    pub eps: usize,
}

/// Input constraints linking the two copies at layer 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiIn {
    pub eps_bounds: Vec<(f64, f64)>,
    pub rows: Vec<InputRow>,
    pub products: Vec<ProductLink>,
}

/// One seed relation `z_{layer,partner} ⋈ zᵖ_{layer,neuron}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedEntry {
    pub layer: usize,
    pub neuron: usize,
    pub partner: usize,
    pub relation: Relation,
}

impl Perturbation {
    fn in_square(shape: Shape, k: usize, i: usize, j: usize, w: usize) -> bool {
        let (_, r, c) = shape.coords(k);
        let (r, c) = (r + 1, c + 1);
        (i..i + w).contains(&r) && (j..j + w).contains(&c)
    }

    /// Flat indices of the patch pixels, in increasing order.
    fn square(shape: Shape, i: usize, j: usize, w: usize) -> Vec<usize> {
        (0..shape.len()).filter(|&k| Self::in_square(shape, k, i, j, w)).collect()
    }

    /// Box for each continuous parameter.
    pub fn param_bounds(&self, shape: Shape) -> Vec<(f64, f64)> {
        match *self {
            Perturbation::Brightness(r) | Perturbation::Contrast(r) => vec![(r.lo, r.hi)],
            Perturbation::Patch { eps, i, j, w } => vec![(-eps, eps); Self::square(shape, i, j, w).len()],
            Perturbation::Linf { eps } => vec![(-eps, eps); shape.len()],
            Perturbation::Occlusion { .. } | Perturbation::Translation { .. } | Perturbation::Rotation { .. } => {
                Vec::new()
            }
        }
    }

    pub fn num_params(&self, shape: Shape) -> usize {
        self.param_bounds(shape).len()
    }

    /// Linear map for the parameter-free perturbations.
    pub fn linear_map(&self, shape: Shape) -> Option<Vec<Vec<(usize, f64)>>> {
        match *self {
            Perturbation::Occlusion { i, j, w } => Some(
                (0..shape.len())
                    .map(|k| {
                        if Self::in_square(shape, k, i, j, w) {
                            Vec::new()
                        } else {
                            vec![(k, 1.0)]
                        }
                    })
                    .collect(),
            ),
            Perturbation::Translation { tx, ty } => Some(
                (0..shape.len())
                    .map(|k| {
                        let (ch, r, c) = shape.coords(k);
                        let sr = r as i64 - tx;
                        let sc = c as i64 - ty;
                        if (0..shape.height as i64).contains(&sr) && (0..shape.width as i64).contains(&sc) {
                            vec![(shape.index(ch, sr as usize, sc as usize), 1.0)]
                        } else {
                            Vec::new()
                        }
                    })
                    .collect(),
            ),
            Perturbation::Rotation { theta } => Some(rotation::matrix(shape, theta)),
            _ => None,
        }
    }

    fn check_params(&self, shape: Shape, x: &[f64], eps: &[f64]) -> Result<()> {
        if x.len() != shape.len() {
            return Err(Error::InputShape {
                expected: shape.len(),
                got: x.len(),
            });
        }
        let bounds = self.param_bounds(shape);
        if eps.len() != bounds.len() {
            return Err(Error::Argument(format!(
                "{self} takes {} parameters, got {}",
                bounds.len(),
                eps.len()
            )));
        }
        for (k, (&e, &(lo, hi))) in eps.iter().zip(&bounds).enumerate() {
            if !Interval::new(lo, hi).contains(e) {
                return Err(Error::Argument(format!("parameter {k} = {e} outside [{lo},{hi}]")));
            }
        }
        Ok(())
    }

    /// `f(x, ε)` without clipping; this is the function the MIP encodes.
    pub fn apply_unclipped(&self, shape: Shape, x: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
        self.check_params(shape, x, eps)?;
        Ok(match *self {
            Perturbation::Brightness(_) => x.iter().map(|v| v + eps[0]).collect(),
            Perturbation::Contrast(_) => x.iter().map(|v| eps[0] * v).collect(),
            Perturbation::Linf { .. } => x.iter().zip(eps).map(|(v, e)| v + e).collect(),
            Perturbation::Patch { i, j, w, .. } => {
                let mut out = x.to_vec();
                for (p, k) in Self::square(shape, i, j, w).into_iter().enumerate() {
                    out[k] += eps[p];
                }
                out
            }
            Perturbation::Rotation { theta } => rotation::rotate(shape, theta, x),
            Perturbation::Occlusion { .. } | Perturbation::Translation { .. } => {
                let map = self.linear_map(shape).expect("parameter-free perturbation");
                map.iter()
                    .map(|row| row.iter().map(|&(k, w)| w * x[k]).sum())
                    .collect()
            }
        })
    }

    /// `f(x, ε)` clipped entrywise to `[0, 1]`.
    pub fn apply(&self, shape: Shape, x: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.apply_unclipped(shape, x, eps)?;
        for v in &mut out {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(out)
    }

    /// Vector-Jacobian product of the unclipped map: given `g = ∂L/∂x'`,
    /// returns `(∂L/∂x, ∂L/∂ε)`.
    pub fn vjp(&self, shape: Shape, x: &[f64], eps: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match *self {
            Perturbation::Brightness(_) => (g.to_vec(), vec![g.iter().sum()]),
            Perturbation::Contrast(_) => (
                g.iter().map(|v| v * eps[0]).collect(),
                vec![g.iter().zip(x).map(|(a, b)| a * b).sum()],
            ),
            Perturbation::Linf { .. } => (g.to_vec(), g.to_vec()),
            Perturbation::Patch { i, j, w, .. } => {
                let ge = Self::square(shape, i, j, w).into_iter().map(|k| g[k]).collect();
                (g.to_vec(), ge)
            }
            _ => {
                let map = self.linear_map(shape).expect("parameter-free perturbation");
                let mut gx = vec![0.0; x.len()];
                for (row, gk) in map.iter().zip(g) {
                    for &(k, w) in row {
                        gx[k] += w * gk;
                    }
                }
                (gx, Vec::new())
            }
        }
    }

    /// Box containing every unclipped perturbed pixel for inputs in `[0,1]`.
    pub fn perturbed_input_bounds(&self, shape: Shape) -> Vec<(f64, f64)> {
        match *self {
            Perturbation::Brightness(r) => vec![(r.lo.min(0.0), 1.0 + r.hi.max(0.0)); shape.len()],
            Perturbation::Contrast(r) => vec![(0.0, r.hi); shape.len()],
            Perturbation::Linf { eps } => vec![(-eps, 1.0 + eps); shape.len()],
            Perturbation::Patch { eps, i, j, w } => (0..shape.len())
                .map(|k| {
                    if Self::in_square(shape, k, i, j, w) {
                        (-eps, 1.0 + eps)
                    } else {
                        (0.0, 1.0)
                    }
                })
                .collect(),
            _ => self
                .linear_map(shape)
                .expect("parameter-free perturbation")
                .iter()
                .map(|row| {
                    let lo = row.iter().map(|&(_, w)| w.min(0.0)).sum();
                    let hi = row.iter().map(|&(_, w)| w.max(0.0)).sum();
                    (lo, hi)
                })
                .collect(),
        }
    }

    /// Input constraints φ_in. Every perturbed pixel is defined by exactly
    /// one equality row or one product link.
    pub fn phi_in(&self, shape: Shape) -> PhiIn {
        use InputVar::*;
        let n = shape.len();
        let eq = |terms: Vec<(InputVar, f64)>| InputRow {
            terms,
            relation: RowRelation::Eq,
            rhs: 0.0,
        };
        let mut rows = Vec::with_capacity(n);
        let mut products = Vec::new();
        match *self {
            Perturbation::Brightness(_) => {
                for k in 0..n {
                    rows.push(eq(vec![(Pert(k), 1.0), (Orig(k), -1.0), (Eps(0), -1.0)]));
                }
            }
            Perturbation::Contrast(_) => {
                products = (0..n).map(|k| ProductLink { pert: k, orig: k, eps: 0 }).collect();
            }
            Perturbation::Linf { .. } => {
                for k in 0..n {
                    rows.push(eq(vec![(Pert(k), 1.0), (Orig(k), -1.0), (Eps(k), -1.0)]));
                }
            }
            Perturbation::Patch { i, j, w, .. } => {
                let square = Self::square(shape, i, j, w);
                for k in 0..n {
                    match square.binary_search(&k) {
                        Ok(p) => rows.push(eq(vec![(Pert(k), 1.0), (Orig(k), -1.0), (Eps(p), -1.0)])),
                        Err(_) => rows.push(eq(vec![(Pert(k), 1.0), (Orig(k), -1.0)])),
                    }
                }
            }
            _ => {
                for (k, row) in self.linear_map(shape).expect("parameter-free perturbation").into_iter().enumerate() {
                    let mut terms = vec![(Pert(k), 1.0)];
                    terms.extend(row.into_iter().map(|(src, w)| (Orig(src), -w)));
                    rows.push(eq(terms));
                }
            }
        }
        PhiIn {
            eps_bounds: self.param_bounds(shape),
            rows,
            products,
        }
    }

    /// Seed dependencies at layer 0 and, for brightness, at layer 1.
    pub fn seed_dependencies(&self, net: &Network) -> Vec<SeedEntry> {
        let shape = net.input_shape();
        let n = shape.len();
        let at0 = |k: usize, partner: usize, relation: Relation| SeedEntry {
            layer: 0,
            neuron: k,
            partner,
            relation,
        };
        // Relation for a value that moves by a quantity of known sign: a
        // positive shift of the perturbed copy means z ≤ zᵖ.
        let by_sign = |nonneg: bool, nonpos: bool| match (nonneg, nonpos) {
            (true, true) => Relation::Eq,
            (true, false) => Relation::Le,
            (false, true) => Relation::Ge,
            (false, false) => Relation::None,
        };
        let mut out = Vec::new();
        match *self {
            Perturbation::Brightness(r) => {
                let rel0 = by_sign(r.lo >= 0.0, r.hi <= 0.0);
                out.extend((0..n).map(|k| at0(k, k, rel0)));
                for (k, row) in net.layer(1).rows().iter().enumerate() {
                    let s = row.weight_sum();
                    // ẑᵖ − ẑ = ε·Σw, so the shift's sign is sign(ε)·sign(Σw).
                    let rel = if s == 0.0 || (r.lo == 0.0 && r.hi == 0.0) {
                        Relation::Eq
                    } else if s > 0.0 {
                        by_sign(r.lo >= 0.0, r.hi <= 0.0)
                    } else {
                        by_sign(r.hi <= 0.0, r.lo >= 0.0)
                    };
                    out.push(SeedEntry {
                        layer: 1,
                        neuron: k,
                        partner: k,
                        relation: rel,
                    });
                }
            }
            Perturbation::Contrast(r) => {
                // z ≥ 0, so ε ≥ 1 gives z ≤ ε·z.
                let rel = by_sign(r.lo >= 1.0, r.hi <= 1.0);
                out.extend((0..n).map(|k| at0(k, k, rel)));
            }
            Perturbation::Patch { i, j, w, .. } => {
                out.extend((0..n).filter(|&k| !Self::in_square(shape, k, i, j, w)).map(|k| at0(k, k, Relation::Eq)));
            }
            Perturbation::Linf { .. } => {}
            Perturbation::Occlusion { .. } | Perturbation::Translation { .. } | Perturbation::Rotation { .. } => {
                let map = self.linear_map(shape).expect("parameter-free perturbation");
                for (k, row) in map.iter().enumerate() {
                    match row.as_slice() {
                        [] => out.push(at0(k, k, Relation::Ge)),
                        [(src, w)] if *w == 1.0 => out.push(at0(k, *src, Relation::Eq)),
                        _ => {}
                    }
                }
            }
        }
        out
    }

    /// Uniform draw from the parameter box.
    pub fn sample_params<R: Rng + ?Sized>(&self, shape: Shape, rng: &mut R) -> Vec<f64> {
        self.param_bounds(shape)
            .into_iter()
            .map(|(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
            .collect()
    }

    /// The parameter vector leaving the image unchanged, when one exists.
    pub fn neutral_params(&self, shape: Shape) -> Option<Vec<f64>> {
        let bounds = self.param_bounds(shape);
        let target = match self {
            Perturbation::Contrast(_) => 1.0,
            Perturbation::Occlusion { .. } | Perturbation::Translation { .. } | Perturbation::Rotation { .. } => {
                return None
            }
            _ => 0.0,
        };
        bounds
            .iter()
            .all(|&(lo, hi)| Interval::new(lo, hi).contains(target))
            .then(|| vec![target; bounds.len()])
    }

    /// Projects `eps` onto the parameter box in place.
    pub fn project_params(&self, shape: Shape, eps: &mut [f64]) {
        for (e, (lo, hi)) in eps.iter_mut().zip(self.param_bounds(shape)) {
            *e = e.clamp(lo, hi);
        }
    }
}
