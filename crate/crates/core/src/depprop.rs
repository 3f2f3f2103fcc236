//! Dependencies between corresponding neurons of the two network copies.
//!
//! An entry at layer `m ≥ 1` relates the affine values `ẑ_{m,partner}` of the
//! input copy and `ẑᵖ_{m,k}` of the perturbed copy. Since ReLU is monotone a
//! relation on `ẑ` carries over (non-strictly) to `z` and to the phase
//! booleans. Layer 0 relates input pixels.
//!
//! Entries are filled in this order: perturbation seeds, concrete bounds,
//! propagation through the layer weights, and finally pairwise sub-MIPs for
//! neurons whose bound intervals overlap in the right pattern.

use std::fmt::Write as _;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bnb::{solve_mip, AcceptRelaxation, BnbOptions, MipStatus, SIGN_TOL};
use crate::error::Result;
use crate::mip::{encode_dependencies, encode_pair, BoundsTable, MipModel};
use crate::net::Network;
use crate::perturb::Perturbation;
use crate::relation::Relation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepEntry {
    /// `ẑ_{m,partner} ⋈ ẑᵖ_{m,k}`; at layer 0 the pixel values.
    pub value: Relation,
    /// `a_{m,partner} ⋈ aᵖ_{m,k}`.
    pub boolean: Relation,
    pub partner: usize,
}

impl DepEntry {
    pub fn none(partner: usize) -> Self {
        DepEntry {
            value: Relation::None,
            boolean: Relation::None,
            partner,
        }
    }

    fn from_value(value: Relation, partner: usize) -> Self {
        DepEntry {
            value,
            boolean: boolean_of(value),
            partner,
        }
    }
}

/// Phase relation implied by a value relation.
fn boolean_of(value: Relation) -> Relation {
    match (value.implies_ge(), value.implies_le()) {
        (true, true) => Relation::Eq,
        (true, false) => Relation::Ge,
        (false, true) => Relation::Le,
        (false, false) => Relation::None,
    }
}

/// Relation on the activations implied by a relation on `ẑ`.
fn through_relu(value: Relation) -> Relation {
    match value {
        Relation::Gt => Relation::Ge,
        Relation::Lt => Relation::Le,
        r => r,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyMatrix {
    /// `layers[m][k]` for `m = 0..=L`.
    pub layers: Vec<Vec<DepEntry>>,
}

impl DependencyMatrix {
    /// All-`None` matrix with identity partners.
    pub fn empty(net: &Network) -> Self {
        let layers = (0..=net.depth())
            .map(|m| (0..net.layer_width(m)).map(DepEntry::none).collect())
            .collect();
        DependencyMatrix { layers }
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn get(&self, m: usize, k: usize) -> DepEntry {
        self.layers[m][k]
    }

    /// Number of non-`None` value relations in layers `1..=L`.
    pub fn count(&self) -> usize {
        self.layers.iter().skip(1).flatten().filter(|e| !e.value.is_none()).count()
    }

    /// One line per non-`None` entry: `m k partner value boolean`.
    pub fn dump(&self) -> String {
        let mut out = String::from("# layer neuron partner value boolean\n");
        for (m, row) in self.layers.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                if !e.value.is_none() || !e.boolean.is_none() {
                    let _ = writeln!(out, "{m} {k} {} {} {}", e.partner, e.value, e.boolean);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepOptions {
    /// Solve pairwise sub-MIPs where propagation gives nothing.
    pub use_mips: bool,
    /// Budget per sub-MIP; exhausting it leaves the entry `None`.
    pub sub_mip: BnbOptions,
}

impl Default for DepOptions {
    fn default() -> Self {
        DepOptions {
            use_mips: true,
            sub_mip: BnbOptions {
                timeout: Duration::from_secs(5),
                node_limit: Some(2_000),
                sign_threshold: Some(0.0),
                use_hints: false,
                ..BnbOptions::default()
            },
        }
    }
}

/// Relation from disjoint bound intervals of `ẑ` (input) and `ẑᵖ` (perturbed).
pub fn concrete_relation((l, u): (f64, f64), (lp, up): (f64, f64)) -> Relation {
    if l > up {
        if l > 0.0 {
            Relation::Gt
        } else {
            Relation::Ge
        }
    } else if u < lp {
        if lp > 0.0 {
            Relation::Lt
        } else {
            Relation::Le
        }
    } else {
        Relation::None
    }
}

/// Relation of `ẑ_{m,k}` against `ẑᵖ_{m,k}` by matching weighted terms
/// against the relations of layer `m − 1`.
pub fn propagate(net: &Network, deps: &DependencyMatrix, m: usize, k: usize) -> Relation {
    let prev = &deps.layers[m - 1];
    let prev_relu = m >= 2 && net.layer(m - 1).relu;
    let mut acc = Relation::Eq;
    for &(j, w) in &net.layer(m).rows()[k].terms {
        if w == 0.0 {
            continue;
        }
        let e = prev[j];
        if e.partner != j {
            return Relation::None;
        }
        let rel = if prev_relu { through_relu(e.value) } else { e.value };
        let term = if w > 0.0 { rel } else { rel.flip() };
        acc = acc.join(term);
        if acc.is_none() {
            return Relation::None;
        }
    }
    acc
}

/// Which sub-problems the bound pattern admits: minimisation of
/// `ẑ − ẑᵖ` when `lᵖ ≤ l ≤ uᵖ ≤ u`, maximisation when `l ≤ lᵖ ≤ u ≤ uᵖ`.
pub fn guard((l, u): (f64, f64), (lp, up): (f64, f64)) -> (bool, bool) {
    (lp <= l && l <= up && up <= u, l <= lp && lp <= u && u <= up)
}

/// Decides the relation of `ẑ_{m,partner}` and `ẑᵖ_{m,k}` with up to two
/// sub-MIPs over the pair encoding up to layer `m`.
#[allow(clippy::too_many_arguments)]
pub fn pairwise_relation_via_mips(
    net: &Network,
    perturbation: &Perturbation,
    bounds_input: &BoundsTable,
    bounds_pert: &BoundsTable,
    deps: &DependencyMatrix,
    m: usize,
    k: usize,
    options: &BnbOptions,
) -> Result<Relation> {
    let p = deps.layers[m][k].partner;
    let (want_min, want_max) = guard(bounds_input.pre(m, p), bounds_pert.pre(m, k));
    if !want_min && !want_max {
        return Ok(Relation::None);
    }
    let mut base = MipModel::new();
    let enc = encode_pair(&mut base, net, perturbation, bounds_input, bounds_pert, m)?;
    encode_dependencies(&mut base, &enc, deps, bounds_input, bounds_pert, 1, m - 1);
    let (zi, zp) = (enc.input.pre[m][p], enc.pert.pre[m][k]);
    let opts = BnbOptions {
        sign_threshold: Some(0.0),
        initial_lower: f64::NEG_INFINITY,
        ..options.clone()
    };
    // Returns whether max(sign·(ẑ − ẑᵖ)) ≤ 0 was proven.
    let proves = |sign: f64| -> Result<bool> {
        let mut model = base.clone();
        model.lp.objective = vec![(zi, sign), (zp, -sign)];
        let s = solve_mip(&model, &AcceptRelaxation, &opts)?;
        Ok(match s.status {
            MipStatus::Infeasible => true,
            _ => s.upper <= SIGN_TOL,
        })
    };
    let ge = want_min && proves(-1.0)?;
    let le = want_max && proves(1.0)?;
    Ok(match (ge, le) {
        (true, true) => Relation::Eq,
        (true, false) => Relation::Ge,
        (false, true) => Relation::Le,
        (false, false) => Relation::None,
    })
}

/// Fills the dependency matrix layer by layer.
pub fn compute_dependencies(
    net: &Network,
    perturbation: &Perturbation,
    bounds_input: &BoundsTable,
    bounds_pert: &BoundsTable,
    options: &DepOptions,
) -> Result<DependencyMatrix> {
    let mut deps = DependencyMatrix::empty(net);
    let mut seeded = vec![vec![false; 0]; net.depth() + 1];
    for (m, row) in seeded.iter_mut().enumerate() {
        *row = vec![false; net.layer_width(m)];
    }
    for s in perturbation.seed_dependencies(net) {
        let e = if s.layer == 0 {
            DepEntry {
                value: s.relation,
                boolean: Relation::None,
                partner: s.partner,
            }
        } else {
            DepEntry::from_value(s.relation, s.partner)
        };
        deps.layers[s.layer][s.neuron] = e;
        seeded[s.layer][s.neuron] = !s.relation.is_none();
    }
    for m in 1..=net.depth() {
        let mut pending = Vec::new();
        for k in 0..net.layer_width(m) {
            if seeded[m][k] {
                continue;
            }
            let p = deps.layers[m][k].partner;
            let (bi, bp) = (bounds_input.pre(m, p), bounds_pert.pre(m, k));
            let mut rel = concrete_relation(bi, bp);
            if rel.is_none() {
                rel = propagate(net, &deps, m, k);
            }
            if rel.is_none() {
                pending.push(k);
            } else {
                deps.layers[m][k] = DepEntry::from_value(rel, p);
            }
        }
        if options.use_mips && !pending.is_empty() {
            let snapshot = &deps;
            let solved: Vec<Result<Relation>> = pending
                .par_iter()
                .map(|&k| {
                    pairwise_relation_via_mips(
                        net,
                        perturbation,
                        bounds_input,
                        bounds_pert,
                        snapshot,
                        m,
                        k,
                        &options.sub_mip,
                    )
                })
                .collect();
            for (&k, rel) in pending.iter().zip(solved) {
                let rel = rel?;
                let p = deps.layers[m][k].partner;
                deps.layers[m][k] = DepEntry::from_value(rel, p);
            }
        }
        if deps.layers[m].iter().all(|e| e.value.is_none()) {
            break;
        }
    }
    Ok(deps)
}
