//! Concrete per-neuron bounds: interval propagation, then LP tightening.

use rayon::prelude::*;

use super::encode::{encode_inputs, encode_layers, static_mccormick};
use super::{MipModel, NetCopy};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpOptions, LpStatus, PivotRule, Sense};
use crate::net::Network;
use crate::perturb::Perturbation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    /// Tighten interval bounds with one LP per neuron and direction.
    pub use_lp: bool,
    /// Budget per LP; on exhaustion the interval bound is kept.
    pub lp: LpOptions,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            use_lp: true,
            lp: LpOptions {
                iter_cap: 5_000,
                pivot: PivotRule::Dantzig,
            },
        }
    }
}

/// Bounds on the affine value `ẑ` of every neuron of one copy.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTable {
    pub copy: NetCopy,
    /// Bounds of the layer-0 values of this copy.
    pub input: Vec<(f64, f64)>,
    /// `pre[m][k]` for `m ≥ 1`; `pre[0]` is empty.
    pub pre: Vec<Vec<(f64, f64)>>,
    relu: Vec<bool>,
}

impl BoundsTable {
    pub fn depth(&self) -> usize {
        self.pre.len() - 1
    }

    pub fn pre(&self, m: usize, k: usize) -> (f64, f64) {
        self.pre[m][k]
    }

    pub fn is_relu(&self, m: usize) -> bool {
        m > 0 && self.relu[m]
    }

    /// Bounds on `z`: inputs at `m = 0`, ReLU image of `pre` otherwise.
    pub fn post(&self, m: usize, k: usize) -> (f64, f64) {
        if m == 0 {
            return self.input[k];
        }
        let (l, u) = self.pre[m][k];
        if self.relu[m] {
            (l.max(0.0), u.max(0.0))
        } else {
            (l, u)
        }
    }

    pub fn layer_post(&self, m: usize) -> Vec<(f64, f64)> {
        let width = if m == 0 { self.input.len() } else { self.pre[m].len() };
        (0..width).map(|k| self.post(m, k)).collect()
    }

    /// ReLU neurons whose phase is not fixed by the bounds.
    pub fn unstable(&self) -> usize {
        (1..self.pre.len())
            .filter(|&m| self.relu[m])
            .map(|m| self.pre[m].iter().filter(|&&(l, u)| l < 0.0 && u > 0.0).count())
            .sum()
    }

    fn propagate_from(&mut self, net: &Network, first: usize) {
        for m in first..=self.depth() {
            let prev = self.layer_post(m - 1);
            self.pre[m] = net.layer(m).rows().iter().map(|row| affine_interval(row, &prev)).collect();
        }
    }
}

fn affine_interval(row: &crate::net::AffineRow, prev: &[(f64, f64)]) -> (f64, f64) {
    let (mut lo, mut hi) = (row.bias, row.bias);
    for &(j, w) in &row.terms {
        let (a, b) = prev[j];
        if w >= 0.0 {
            lo += w * a;
            hi += w * b;
        } else {
            lo += w * b;
            hi += w * a;
        }
    }
    (lo, hi)
}

/// Interval propagation from the given layer-0 box.
pub fn interval_bounds(net: &Network, input: Vec<(f64, f64)>, copy: NetCopy) -> Result<BoundsTable> {
    if input.len() != net.input_len() {
        return Err(Error::InputShape {
            expected: net.input_len(),
            got: input.len(),
        });
    }
    if input.iter().any(|&(l, u)| !(l <= u)) {
        return Err(Error::InfeasibleInput);
    }
    let mut relu = vec![false];
    relu.extend(net.layers().iter().map(|l| l.relu));
    let mut table = BoundsTable {
        copy,
        input,
        pre: vec![Vec::new(); net.depth() + 1],
        relu,
    };
    table.propagate_from(net, 1);
    Ok(table)
}

/// Concrete bounds for one copy.
///
/// The input copy ranges over `[0,1]ⁿ`. The perturbed copy is bounded
/// through the input constraints of `perturbation`, so its bounds account
/// for the coupling with the original pixels but not with the input copy's
/// hidden layers.
pub fn compute_concrete_bounds(
    net: &Network,
    perturbation: Option<&Perturbation>,
    copy: NetCopy,
    options: &BoundOptions,
) -> Result<BoundsTable> {
    let shape = net.input_shape();
    let input = match (copy, perturbation) {
        (NetCopy::Input, _) => vec![(0.0, 1.0); shape.len()],
        (NetCopy::Perturbed, Some(p)) => p.perturbed_input_bounds(shape),
        (NetCopy::Perturbed, None) => {
            return Err(Error::Argument("perturbed-copy bounds need a perturbation".into()))
        }
    };
    let mut table = interval_bounds(net, input, copy)?;
    if !options.use_lp {
        return Ok(table);
    }
    // Over a box, the first layer's interval bounds are already exact.
    let first = match copy {
        NetCopy::Input => 2,
        NetCopy::Perturbed => 1,
    };
    for m in first..=net.depth() {
        let mut model = MipModel::new();
        let inputs = encode_inputs(&mut model, net, &table, perturbation.filter(|_| copy == NetCopy::Perturbed))?;
        let layer0 = match copy {
            NetCopy::Input => inputs.orig.clone(),
            NetCopy::Perturbed => inputs.pert.clone(),
        };
        let cols = encode_layers(&mut model, net, copy, &table, layer0, m - 1)?;
        static_mccormick(&mut model);
        let prev = &cols.post[m - 1];
        let rows = net.layer(m).rows();
        let tightened: Vec<Result<(f64, f64)>> = rows
            .par_iter()
            .enumerate()
            .map(|(k, row)| {
                let (ibp_l, ibp_u) = table.pre[m][k];
                let mut lp = model.lp.clone();
                lp.objective = row.terms.iter().map(|&(j, w)| (prev[j], w)).collect();
                let mut out = (ibp_l, ibp_u);
                for sense in [Sense::Minimize, Sense::Maximize] {
                    lp.sense = sense;
                    let r = solve_lp(&lp, &options.lp)?;
                    match r.status {
                        LpStatus::Optimal => {
                            let v = row.bias + r.objective;
                            let slack = 1e-6 * (1.0 + v.abs());
                            match sense {
                                Sense::Minimize => out.0 = out.0.max(v - slack),
                                Sense::Maximize => out.1 = out.1.min(v + slack),
                            }
                        }
                        LpStatus::Infeasible => return Err(Error::InfeasibleInput),
                        _ => {}
                    }
                }
                if out.0 > out.1 {
                    // Tolerance crossing on a (near-)constant neuron.
                    let mid = 0.5 * (out.0 + out.1);
                    out = (mid.min(ibp_u).max(ibp_l), mid.min(ibp_u).max(ibp_l));
                }
                Ok(out)
            })
            .collect();
        for (k, b) in tightened.into_iter().enumerate() {
            table.pre[m][k] = b?;
        }
        if m < net.depth() {
            let keep = table.pre[..=m].to_vec();
            table.propagate_from(net, m + 1);
            table.pre[..=m].clone_from_slice(&keep);
        }
    }
    Ok(table)
}
