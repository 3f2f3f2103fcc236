//! Network, input and output encodings.

use super::{mccormick_rows, BoundsTable, MipModel, NetCopy, VarId, STRICT_MARGIN};
use crate::attack::HintMatrix;
use crate::bnb::IncumbentCheck;
use crate::depprop::DependencyMatrix;
use crate::error::{Error, Result};
use crate::lp::RowRelation;
use crate::net::{class_confidence, Network};
use crate::perturb::{InputVar, Perturbation};
use crate::relation::Relation;

/// Layer-0 columns: original pixels, perturbed pixels, parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InputColumns {
    pub orig: Vec<usize>,
    pub pert: Vec<usize>,
    pub eps: Vec<usize>,
}

/// Columns of one network copy. `pre[0]` is empty and `post[0]` holds the
/// layer-0 columns. On a layer without ReLU `post[m] == pre[m]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CopyColumns {
    pub pre: Vec<Vec<usize>>,
    pub post: Vec<Vec<usize>>,
    pub boolean: Vec<Vec<Option<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairEncoding {
    pub inputs: InputColumns,
    pub input: CopyColumns,
    pub pert: CopyColumns,
}

/// Encodes `z = max(0, ẑ)` for one neuron with `ẑ ∈ [l, u]`.
///
/// Returns the `z` column and the phase boolean, which exists only for
/// unstable neurons.
pub fn encode_relu(
    model: &mut MipModel,
    copy: NetCopy,
    m: usize,
    k: usize,
    pre_col: usize,
    (l, u): (f64, f64),
) -> Result<(usize, Option<usize>)> {
    if !(l <= u) {
        return Err(Error::Encoding(format!("missing or empty bounds for neuron ({m},{k})")));
    }
    let z = model.add_var(VarId::post(copy, m, k), l.max(0.0), u.max(0.0))?;
    if u <= 0.0 {
        model.add_row(vec![(z, 1.0)], RowRelation::Eq, 0.0);
        return Ok((z, None));
    }
    if l >= 0.0 {
        model.add_row(vec![(z, 1.0), (pre_col, -1.0)], RowRelation::Eq, 0.0);
        return Ok((z, None));
    }
    let a = model.add_bool(VarId::boolean(copy, m, k))?;
    model.add_row(vec![(z, 1.0)], RowRelation::Ge, 0.0);
    model.add_row(vec![(z, 1.0), (pre_col, -1.0)], RowRelation::Ge, 0.0);
    model.add_row(vec![(z, 1.0), (a, -u)], RowRelation::Le, 0.0);
    model.add_row(vec![(z, 1.0), (pre_col, -1.0), (a, -l)], RowRelation::Le, -l);
    Ok((z, Some(a)))
}

/// Original-pixel columns, and when `perturbation` is given the perturbed
/// pixels, parameters and input constraints. Perturbed pixel bounds come
/// from `pert_table.input`.
pub(crate) fn encode_inputs(
    model: &mut MipModel,
    net: &Network,
    pert_table: &BoundsTable,
    perturbation: Option<&Perturbation>,
) -> Result<InputColumns> {
    let shape = net.input_shape();
    let mut cols = InputColumns::default();
    for k in 0..shape.len() {
        cols.orig.push(model.add_var(VarId::post(NetCopy::Input, 0, k), 0.0, 1.0)?);
    }
    let Some(p) = perturbation else {
        return Ok(cols);
    };
    let phi = p.phi_in(shape);
    for (i, &(lo, hi)) in phi.eps_bounds.iter().enumerate() {
        cols.eps.push(model.add_var(VarId::epsilon(i), lo, hi)?);
    }
    for k in 0..shape.len() {
        let (lo, hi) = pert_table.input[k];
        cols.pert.push(model.add_var(VarId::post(NetCopy::Perturbed, 0, k), lo, hi)?);
    }
    let col = |v: InputVar| match v {
        InputVar::Orig(k) => cols.orig[k],
        InputVar::Pert(k) => cols.pert[k],
        InputVar::Eps(i) => cols.eps[i],
    };
    for row in &phi.rows {
        let terms = row.terms.iter().map(|&(v, w)| (col(v), w)).collect();
        model.add_row(terms, row.relation, row.rhs);
    }
    for link in &phi.products {
        model.products.push(super::Bilinear {
            product: cols.pert[link.pert],
            eps: cols.eps[link.eps],
            factor: cols.orig[link.orig],
        });
    }
    Ok(cols)
}

/// Adds the envelope of every bilinear term over the current column bounds.
pub(crate) fn static_mccormick(model: &mut MipModel) {
    for b in model.products.clone() {
        let e = (model.lp.lower[b.eps], model.lp.upper[b.eps]);
        let x = (model.lp.lower[b.factor], model.lp.upper[b.factor]);
        for row in mccormick_rows(&b, e, x) {
            model.lp.rows.push(row);
        }
    }
}

/// Encodes layers `1..=upto` of one copy on top of the given layer-0 columns.
pub(crate) fn encode_layers(
    model: &mut MipModel,
    net: &Network,
    copy: NetCopy,
    table: &BoundsTable,
    layer0: Vec<usize>,
    upto: usize,
) -> Result<CopyColumns> {
    if table.depth() != net.depth() {
        return Err(Error::Encoding("bounds table does not match the network depth".into()));
    }
    let mut cols = CopyColumns {
        pre: vec![Vec::new()],
        post: vec![layer0],
        boolean: vec![Vec::new()],
    };
    for m in 1..=upto {
        let layer = net.layer(m);
        let (mut pre, mut post, mut bools) = (Vec::new(), Vec::new(), Vec::new());
        for (k, row) in layer.rows().iter().enumerate() {
            let (l, u) = table.pre(m, k);
            let zh = model.add_var(VarId::pre(copy, m, k), l, u)?;
            let mut terms = vec![(zh, 1.0)];
            terms.extend(row.terms.iter().map(|&(j, w)| (cols.post[m - 1][j], -w)));
            model.add_row(terms, RowRelation::Eq, row.bias);
            pre.push(zh);
            if layer.relu {
                let (z, a) = encode_relu(model, copy, m, k, zh, (l, u))?;
                post.push(z);
                bools.push(a);
            } else {
                post.push(zh);
                bools.push(None);
            }
        }
        cols.pre.push(pre);
        cols.post.push(post);
        cols.boolean.push(bools);
    }
    Ok(cols)
}

/// Both copies up to layer `upto`, linked through the input constraints.
pub fn encode_pair(
    model: &mut MipModel,
    net: &Network,
    perturbation: &Perturbation,
    bounds_input: &BoundsTable,
    bounds_pert: &BoundsTable,
    upto: usize,
) -> Result<PairEncoding> {
    let inputs = encode_inputs(model, net, bounds_pert, Some(perturbation))?;
    let input = encode_layers(model, net, NetCopy::Input, bounds_input, inputs.orig.clone(), upto)?;
    let pert = encode_layers(model, net, NetCopy::Perturbed, bounds_pert, inputs.pert.clone(), upto)?;
    Ok(PairEncoding { inputs, input, pert })
}

/// Phase of a stable neuron, `None` when unstable.
fn stable_phase(table: &BoundsTable, m: usize, k: usize) -> Option<f64> {
    let (l, u) = table.pre(m, k);
    if u <= 0.0 {
        Some(0.0)
    } else if l >= 0.0 {
        Some(1.0)
    } else {
        None
    }
}

fn relation_rows(model: &mut MipModel, a: usize, b: usize, rel: Relation) -> usize {
    let terms = vec![(a, 1.0), (b, -1.0)];
    match (rel.implies_ge(), rel.implies_le()) {
        (true, true) => model.add_row(terms, RowRelation::Eq, 0.0),
        (true, false) => model.add_row(terms, RowRelation::Ge, 0.0),
        (false, true) => model.add_row(terms, RowRelation::Le, 0.0),
        (false, false) => return 0,
    }
    1
}

/// Adds dependency rows for layers `first..=last`. Strict relations are
/// encoded non-strictly. Returns the number of rows added.
pub fn encode_dependencies(
    model: &mut MipModel,
    enc: &PairEncoding,
    deps: &DependencyMatrix,
    bounds_input: &BoundsTable,
    bounds_pert: &BoundsTable,
    first: usize,
    last: usize,
) -> usize {
    let mut added = 0;
    for m in first.max(1)..=last.min(deps.depth()) {
        let relu = bounds_input.is_relu(m);
        for (k, e) in deps.layers[m].iter().enumerate() {
            let p = e.partner;
            if !e.value.is_none() {
                added += relation_rows(model, enc.input.pre[m][p], enc.pert.pre[m][k], e.value);
                let both_stable =
                    stable_phase(bounds_input, m, p).is_some() && stable_phase(bounds_pert, m, k).is_some();
                if relu && !both_stable {
                    added += relation_rows(model, enc.input.post[m][p], enc.pert.post[m][k], e.value);
                }
            }
            if !relu || e.boolean.is_none() {
                continue;
            }
            let ai = enc.input.boolean[m][p];
            let ap = enc.pert.boolean[m][k];
            match (ai, ap) {
                (Some(ai), Some(ap)) => added += relation_rows(model, ai, ap, e.boolean),
                (None, Some(ap)) => {
                    let c = stable_phase(bounds_input, m, p).expect("no boolean means stable");
                    // a ≥ aᵖ with a = 0 forces aᵖ = 0; a ≤ aᵖ with a = 1 forces aᵖ = 1.
                    if e.boolean.implies_ge() && c == 0.0 {
                        model.add_row(vec![(ap, 1.0)], RowRelation::Le, 0.0);
                        added += 1;
                    }
                    if e.boolean.implies_le() && c == 1.0 {
                        model.add_row(vec![(ap, 1.0)], RowRelation::Ge, 1.0);
                        added += 1;
                    }
                }
                (Some(ai), None) => {
                    let c = stable_phase(bounds_pert, m, k).expect("no boolean means stable");
                    if e.boolean.implies_ge() && c == 1.0 {
                        model.add_row(vec![(ai, 1.0)], RowRelation::Ge, 1.0);
                        added += 1;
                    }
                    if e.boolean.implies_le() && c == 0.0 {
                        model.add_row(vec![(ai, 1.0)], RowRelation::Le, 0.0);
                        added += 1;
                    }
                }
                (None, None) => {}
            }
        }
    }
    added
}

/// Inputs to [`build_problem`].
#[derive(Debug, Clone, Copy)]
pub struct ProblemSpec<'a> {
    pub net: &'a Network,
    pub c_prime: usize,
    pub c_target: usize,
    pub perturbation: &'a Perturbation,
    pub bounds_input: &'a BoundsTable,
    pub bounds_pert: &'a BoundsTable,
    pub deps: Option<&'a DependencyMatrix>,
    /// Attack lower bound imposed as `δ ≥ cutoff`.
    pub cutoff: f64,
    pub hints: Option<(&'a HintMatrix, &'a HintMatrix)>,
}

/// The targeted maximal non-robust bound problem.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub model: MipModel,
    pub columns: PairEncoding,
    pub delta: usize,
    pub check: ReplayCheck<'a>,
}

/// Builds: both copies, input constraints, dependencies, output families
/// `z_{c'} − z_{c''} ≥ δ` and `zᵖ_{c_t} − zᵖ_{c''} ≥ γ`, `δ ≥ cutoff`,
/// objective `max δ`.
pub fn build_problem<'a>(spec: &ProblemSpec<'a>) -> Result<Problem<'a>> {
    let net = spec.net;
    let classes = net.num_classes();
    for c in [spec.c_prime, spec.c_target] {
        if c >= classes {
            return Err(Error::ClassIndex { index: c, classes });
        }
    }
    if spec.c_prime == spec.c_target {
        return Err(Error::Argument(format!(
            "target class {} equals the source class",
            spec.c_target
        )));
    }
    let depth = net.depth();
    let mut model = MipModel::new();
    let columns = encode_pair(
        &mut model,
        net,
        spec.perturbation,
        spec.bounds_input,
        spec.bounds_pert,
        depth,
    )?;
    if let Some(deps) = spec.deps {
        encode_dependencies(&mut model, &columns, deps, spec.bounds_input, spec.bounds_pert, 1, depth);
    }
    let out_i = &columns.input.post[depth];
    let out_p = &columns.pert.post[depth];
    let (_, u_src) = spec.bounds_input.post(depth, spec.c_prime);
    let upper = (0..classes)
        .filter(|&c| c != spec.c_prime)
        .map(|c| u_src - spec.bounds_input.post(depth, c).0)
        .fold(f64::INFINITY, f64::min);
    let cutoff = spec.cutoff.max(0.0);
    let delta = model.add_var(VarId::delta(), cutoff, upper.max(cutoff))?;
    model.cutoff = cutoff;
    for c in (0..classes).filter(|&c| c != spec.c_prime) {
        model.add_row(
            vec![(out_i[spec.c_prime], 1.0), (out_i[c], -1.0), (delta, -1.0)],
            RowRelation::Ge,
            0.0,
        );
    }
    for c in (0..classes).filter(|&c| c != spec.c_target) {
        model.add_row(
            vec![(out_p[spec.c_target], 1.0), (out_p[c], -1.0)],
            RowRelation::Ge,
            STRICT_MARGIN,
        );
    }
    model.lp.objective = vec![(delta, 1.0)];
    if let Some((h, hp)) = spec.hints {
        for (hm, cols) in [(h, &columns.input), (hp, &columns.pert)] {
            for m in 1..depth {
                for (k, a) in cols.boolean[m].iter().enumerate() {
                    if let (Some(a), Some(v)) = (a, hm.get(m, k)) {
                        model.hints.push((*a, if v { 1.0 } else { 0.0 }));
                    }
                }
            }
        }
    }
    let check = ReplayCheck {
        net,
        perturbation: *spec.perturbation,
        c_prime: spec.c_prime,
        c_target: spec.c_target,
        orig: columns.inputs.orig.clone(),
        eps: columns.inputs.eps.clone(),
    };
    Ok(Problem {
        model,
        columns,
        delta,
        check,
    })
}

/// A validated counterexample.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Witness {
    pub input: Vec<f64>,
    pub eps: Vec<f64>,
    pub perturbed: Vec<f64>,
    pub confidence: f64,
    pub target_confidence: f64,
}

/// Accepts an integral node only if its input and parameters replay
/// through the network as a genuine violation.
#[derive(Debug, Clone)]
pub struct ReplayCheck<'a> {
    pub net: &'a Network,
    pub perturbation: Perturbation,
    pub c_prime: usize,
    pub c_target: usize,
    pub orig: Vec<usize>,
    pub eps: Vec<usize>,
}

impl ReplayCheck<'_> {
    pub fn replay(&self, values: &[f64]) -> Option<Witness> {
        let shape = self.net.input_shape();
        let input: Vec<f64> = self.orig.iter().map(|&c| values[c].clamp(0.0, 1.0)).collect();
        let mut eps: Vec<f64> = self.eps.iter().map(|&c| values[c]).collect();
        self.perturbation.project_params(shape, &mut eps);
        let perturbed = self.perturbation.apply_unclipped(shape, &input, &eps).ok()?;
        let confidence = self.net.confidence(&input, self.c_prime).ok()?;
        let target_confidence = self.net.confidence(&perturbed, self.c_target).ok()?;
        (confidence > 0.0 && target_confidence > 0.0).then_some(Witness {
            input,
            eps,
            perturbed,
            confidence,
            target_confidence,
        })
    }
}

impl IncumbentCheck for ReplayCheck<'_> {
    fn check(&self, values: &[f64], _lp_objective: f64) -> Option<f64> {
        self.replay(values).map(|w| w.confidence)
    }
}

/// Accepts an integral node by replaying its input's class confidence.
#[derive(Debug, Clone)]
pub struct ConfidenceCheck<'a> {
    pub net: &'a Network,
    pub c_prime: usize,
    pub orig: Vec<usize>,
}

impl IncumbentCheck for ConfidenceCheck<'_> {
    fn check(&self, values: &[f64], _lp_objective: f64) -> Option<f64> {
        let x: Vec<f64> = self.orig.iter().map(|&c| values[c].clamp(0.0, 1.0)).collect();
        let scores = self.net.scores(&x).ok()?;
        class_confidence(&scores, self.c_prime).ok()
    }
}

#[derive(Debug, Clone)]
pub struct DeltaMProblem<'a> {
    pub model: MipModel,
    pub objective: usize,
    pub check: ConfidenceCheck<'a>,
}

/// Single-copy problem `max 𝒞(x, c')` over the input box.
pub fn build_delta_m_problem<'a>(net: &'a Network, c_prime: usize, bounds: &BoundsTable) -> Result<DeltaMProblem<'a>> {
    let classes = net.num_classes();
    if c_prime >= classes {
        return Err(Error::ClassIndex {
            index: c_prime,
            classes,
        });
    }
    let depth = net.depth();
    let mut model = MipModel::new();
    let inputs = encode_inputs(&mut model, net, bounds, None)?;
    let cols = encode_layers(&mut model, net, NetCopy::Input, bounds, inputs.orig.clone(), depth)?;
    let (l_src, u_src) = bounds.post(depth, c_prime);
    let others = (0..classes).filter(|&c| c != c_prime);
    let lower = others.clone().map(|c| l_src - bounds.post(depth, c).1).fold(f64::INFINITY, f64::min);
    let upper = others.clone().map(|c| u_src - bounds.post(depth, c).0).fold(f64::INFINITY, f64::min);
    let t = model.add_var(VarId::delta(), lower.min(upper), upper)?;
    let out = &cols.post[depth];
    for c in others {
        model.add_row(vec![(out[c_prime], 1.0), (out[c], -1.0), (t, -1.0)], RowRelation::Ge, 0.0);
    }
    model.lp.objective = vec![(t, 1.0)];
    Ok(DeltaMProblem {
        model,
        objective: t,
        check: ConfidenceCheck {
            net,
            c_prime,
            orig: inputs.orig,
        },
    })
}
