//! Identification of interventional kernels by iterated fixing.
//!
//! Fixing a node `r` of a kernel moves it from the target to the source:
//! condition the descendants of `r` on everything else, then multiply by
//! the marginal law of the non-descendants. On strictly positive tables
//! this agrees with dividing the joint mass by the conditional of `r`
//! given its Markov blanket, but the conditioning form is primary here
//! because it needs no division.
//!
//! The identification routine itself is a single formula: take the
//! ancestors of the outcome set with the treatments removed, split them
//! into districts, and demand that every district be reachable by fixing
//! and a single district afterwards. If so, the interventional kernel is
//! the marginalized product of the fixed district factors; if not, the
//! effect is not identifiable at all.

use std::collections::BTreeSet;

use num::Zero;
use thiserror::Error;

use crate::graph::{
    fix_graph, fixable, reachable_intrinsic, GraphError, MixedGraph, NodeId, NodeKind,
    Reachability,
};
use crate::kernel::{FiniteKernel, KernelError};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum IdentifyError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("graph must be latent-free, found `{0}`")]
    LatentPresent(String),
    #[error("treatment and outcome sets must be non-empty and disjoint")]
    BadQuery,
    #[error("set contains non-observed node `{0}`")]
    NotObserved(String),
    #[error("node `{r}` is not fixable in the recorded graph context")]
    NotFixable { r: String },
    #[error("kernel does not match the graph context: {0}")]
    KernelGraphMismatch(String),
    #[error("evaluation requires a strictly positive observable kernel")]
    NonPositiveObservable,
    #[error("district factor for {district:?} depends on {var}, outside the district and its parents")]
    LocalityViolated { district: Vec<String>, var: String },
    #[error("product over districts failed to normalize; this is a bug")]
    ProductNotNormalized,
}

/// A symbolic identification formula.
///
/// `Fix` records the graph in which its node is fixed, innermost first:
/// the innermost context is the original graph, and each surrounding `Fix`
/// carries the graph produced by the fix below it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdentExpr {
    /// The observable kernel `P(X_V ‖ X_I)`.
    ObsRef,
    Fix {
        node: NodeId,
        graph: MixedGraph,
        child: Box<IdentExpr>,
    },
    /// District factors, ordered by their smallest member.
    Product(Vec<IdentExpr>),
    Marginalize {
        vars: BTreeSet<NodeId>,
        child: Box<IdentExpr>,
    },
}

impl IdentExpr {
    /// The graph the innermost fix was applied in, when any fix is present.
    pub fn original_graph(&self) -> Option<&MixedGraph> {
        match self {
            IdentExpr::ObsRef => None,
            IdentExpr::Fix { graph, child, .. } => child.original_graph().or(Some(graph)),
            IdentExpr::Product(children) => {
                children.iter().find_map(|c| c.original_graph())
            }
            IdentExpr::Marginalize { child, .. } => child.original_graph(),
        }
    }
}

/// Result of an identification query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdResult {
    Identifiable { formula: IdentExpr },
    NotIdentifiable { failing_district: BTreeSet<NodeId> },
}

impl IdResult {
    pub fn formula(&self) -> Option<&IdentExpr> {
        match self {
            IdResult::Identifiable { formula } => Some(formula),
            IdResult::NotIdentifiable { .. } => None,
        }
    }

    pub fn is_identifiable(&self) -> bool {
        matches!(self, IdResult::Identifiable { .. })
    }
}

/// Fixes node `r` of kernel `k` in graph context `g`.
///
/// `k` must be a kernel whose target variables are exactly the observed
/// nodes of `g` and whose source variables are exactly its input nodes.
/// The result has `r` moved from target to source.
pub fn fix_kernel(
    k: &FiniteKernel,
    r: &NodeId,
    g: &MixedGraph,
) -> Result<FiniteKernel, IdentifyError> {
    let observed: BTreeSet<String> = g.observed().iter().map(|n| n.0.clone()).collect();
    let inputs: BTreeSet<String> = g.inputs().iter().map(|n| n.0.clone()).collect();
    if k.target().var_ids() != observed {
        return Err(IdentifyError::KernelGraphMismatch(format!(
            "target {:?} vs observed {:?}",
            k.target().var_ids(),
            observed
        )));
    }
    if k.source().var_ids() != inputs {
        return Err(IdentifyError::KernelGraphMismatch(format!(
            "source {:?} vs inputs {:?}",
            k.source().var_ids(),
            inputs
        )));
    }
    if !fixable(g, r)? {
        return Err(IdentifyError::NotFixable { r: r.0.clone() });
    }
    let de: BTreeSet<String> = g
        .descendants(r)
        .iter()
        .filter(|n| observed.contains(&n.0))
        .map(|n| n.0.clone())
        .collect();
    let non_de: BTreeSet<String> = observed.difference(&de).cloned().collect();
    let mut given = non_de.clone();
    given.insert(r.0.clone());
    // P(X_{De(r)∖{r}} | X_{NonDe ∪ {r}} ‖ X_W) ⊗ P(X_{NonDe} ‖ X_W)
    let conditional = k.disintegrate(&given)?;
    let marginal = k.marginalize(&non_de)?;
    Ok(conditional.product(&marginal)?.canonical())
}

/// The division form of fixing, defined on strictly positive kernels:
/// `k / k(x_r | x_{Mb(r)} ‖ x_W)` with the Markov blanket `Mb(r)` the
/// district of `r` plus the parents of the district, minus `r`.
///
/// Agrees with [`fix_kernel`] whenever `r` is fixable; kept as an
/// independent cross-check.
pub fn fix_kernel_division(
    k: &FiniteKernel,
    r: &NodeId,
    g: &MixedGraph,
) -> Result<FiniteKernel, IdentifyError> {
    if !k.strictly_positive() {
        return Err(IdentifyError::NonPositiveObservable);
    }
    if !fixable(g, r)? {
        return Err(IdentifyError::NotFixable { r: r.0.clone() });
    }
    let district = g.district_of(r)?;
    let mut mb: BTreeSet<String> = district.iter().map(|n| n.0.clone()).collect();
    for d in &district {
        for p in g.parents(d) {
            if g.kind(&p) == Some(NodeKind::Observed) {
                mb.insert(p.0.clone());
            }
        }
    }
    mb.remove(&r.0);

    let mut mb_r = mb.clone();
    mb_r.insert(r.0.clone());
    let cond_r = k.marginalize(&mb_r)?.disintegrate(&mb)?; // (r ‖ Mb, W)

    // Divide pointwise: target loses r, source gains it.
    let target_ids: BTreeSet<String> = k
        .target()
        .var_ids()
        .into_iter()
        .filter(|id| id != &r.0)
        .collect();
    let mut svars = vec![k.target().var(&r.0).unwrap().clone()];
    svars.extend(k.source().vars().iter().cloned());
    let source = crate::kernel::FiniteSpace::new_with_star(svars)?;
    let target = {
        let tvars: Vec<_> = k
            .target()
            .vars()
            .iter()
            .filter(|v| target_ids.contains(&v.id))
            .cloned()
            .collect();
        crate::kernel::FiniteSpace::new_with_star(tvars)?
    };
    let tsize = target.size();
    let mut mass = vec![crate::kernel::Rational::zero(); source.size() * tsize];
    for s_old in 0..k.source().size() {
        let sc_old = k.source().point(s_old);
        for t_old in 0..k.target().size() {
            let tc_old = k.target().point(t_old);
            // Numerator cell and its destination.
            let num = k.get(s_old, t_old);
            let r_val = tc_old[k.target().index_of_var(&r.0).unwrap()];
            let mut sc_new = vec![r_val];
            sc_new.extend(&sc_old);
            let tc_new: Vec<usize> = target
                .vars()
                .iter()
                .map(|v| tc_old[k.target().index_of_var(&v.id).unwrap()])
                .collect();
            // Denominator: conditional of r given its blanket.
            let den_sc: Vec<usize> = cond_r
                .source()
                .vars()
                .iter()
                .map(|v| {
                    if let Some(i) = k.target().index_of_var(&v.id) {
                        tc_old[i]
                    } else {
                        sc_old[k.source().index_of_var(&v.id).unwrap()]
                    }
                })
                .collect();
            let den = cond_r.get(cond_r.source().index(&den_sc), r_val);
            mass[source.index(&sc_new) * tsize + target.index(&tc_new)] = num / den;
        }
    }
    Ok(FiniteKernel::new(source, target, mass)?.canonical())
}

/// Decides identifiability of `P(X_A ‖ do(X_B), X_I)` in a latent-free
/// mixed graph and, when identifiable, emits the formula.
pub fn one_line_identify(
    g: &MixedGraph,
    a: &BTreeSet<NodeId>,
    b: &BTreeSet<NodeId>,
) -> Result<IdResult, IdentifyError> {
    if let Some(l) = g.latents().into_iter().next() {
        return Err(IdentifyError::LatentPresent(l.0));
    }
    if a.is_empty() || b.is_empty() || !a.is_disjoint(b) {
        return Err(IdentifyError::BadQuery);
    }
    for n in a.iter().chain(b) {
        if g.kind(n) != Some(NodeKind::Observed) {
            return Err(IdentifyError::NotObserved(n.0.clone()));
        }
    }
    // Ancestors of A with the treatments removed.
    let keep: BTreeSet<NodeId> = {
        let mut all: BTreeSet<NodeId> = g.observed();
        for n in b {
            all.remove(n);
        }
        all.extend(g.inputs());
        all
    };
    let sub = g.induced(&keep);
    let dset: BTreeSet<NodeId> = sub
        .ancestors_of_set(a)
        .into_iter()
        .filter(|n| sub.kind(n) == Some(NodeKind::Observed))
        .collect();

    // Districts of the induced subgraph on the ancestor set, ordered by
    // smallest member.
    let districts = g.induced(&dset).districts();

    let mut factors = Vec::new();
    for district in &districts {
        match reachable_intrinsic(g, district)? {
            Reachability::Intrinsic { order } => {
                let mut expr = IdentExpr::ObsRef;
                let mut ctx = g.clone();
                for r in order {
                    let next = fix_graph(&ctx, &r)?;
                    expr = IdentExpr::Fix {
                        node: r,
                        graph: ctx,
                        child: Box::new(expr),
                    };
                    ctx = next;
                }
                factors.push(expr);
            }
            _ => {
                return Ok(IdResult::NotIdentifiable {
                    failing_district: district.clone(),
                })
            }
        }
    }
    let product = IdentExpr::Product(factors);
    let marg_vars: BTreeSet<NodeId> = dset.difference(a).cloned().collect();
    let formula = if marg_vars.is_empty() {
        product
    } else {
        IdentExpr::Marginalize {
            vars: marg_vars,
            child: Box::new(product),
        }
    };
    Ok(IdResult::Identifiable { formula })
}

/// Evaluates an identification formula against a strictly positive
/// observable kernel, returning the kernel from `X_B` (and the inputs)
/// to the outcome variables.
pub fn evaluate(
    expr: &IdentExpr,
    obs: &FiniteKernel,
    b: &BTreeSet<NodeId>,
) -> Result<FiniteKernel, IdentifyError> {
    if !obs.strictly_positive() {
        return Err(IdentifyError::NonPositiveObservable);
    }
    let result = eval_expr(expr, obs)?;
    // The factors provably depend only on B and the inputs among the
    // remaining source coordinates; drop the rest after checking constancy.
    let mut keep: BTreeSet<String> = b.iter().map(|n| n.0.clone()).collect();
    keep.extend(obs.source().var_ids());
    let keep: BTreeSet<String> = result
        .source()
        .var_ids()
        .intersection(&keep)
        .cloned()
        .collect();
    result
        .restrict_source_constant(&keep)
        .map(|k| k.canonical())
        .map_err(|_| IdentifyError::ProductNotNormalized)
}

fn eval_expr(expr: &IdentExpr, obs: &FiniteKernel) -> Result<FiniteKernel, IdentifyError> {
    match expr {
        IdentExpr::ObsRef => Ok(obs.clone()),
        IdentExpr::Fix { node, graph, child } => {
            let inner = eval_expr(child, obs)?;
            fix_kernel(&inner, node, graph)
        }
        IdentExpr::Marginalize { vars, child } => {
            let inner = eval_expr(child, obs)?;
            let keep: BTreeSet<String> = inner
                .target()
                .var_ids()
                .into_iter()
                .filter(|id| !vars.iter().any(|v| &v.0 == id))
                .collect();
            Ok(inner.marginalize(&keep)?)
        }
        IdentExpr::Product(children) => {
            let factors: Vec<FiniteKernel> = children
                .iter()
                .map(|c| eval_expr(c, obs))
                .collect::<Result<_, _>>()?;
            let original = expr.original_graph();
            product_over_districts(&factors, original, obs)
        }
    }
}

/// Pointwise product of district factors over the union of coordinates.
///
/// Each factor is a kernel to its district given everything else; the
/// product is a kernel to the union of the districts given the remaining
/// coordinates. Before multiplying, every factor is checked to be constant
/// in the coordinates outside its district and the district's parents, and
/// the rows of the assembled table must already sum to one.
fn product_over_districts(
    factors: &[FiniteKernel],
    original: Option<&MixedGraph>,
    obs: &FiniteKernel,
) -> Result<FiniteKernel, IdentifyError> {
    if factors.len() == 1 {
        if let Some(g) = original {
            assert_factor_locality(&factors[0], g)?;
        }
        return Ok(factors[0].clone());
    }
    let union_targets: BTreeSet<String> = factors
        .iter()
        .flat_map(|f| f.target().var_ids())
        .collect();
    let mut svars = Vec::new();
    let mut seen = BTreeSet::new();
    for f in factors {
        if let Some(g) = original {
            assert_factor_locality(f, g)?;
        }
        for v in f.source().vars() {
            if !union_targets.contains(&v.id) && seen.insert(v.id.clone()) {
                svars.push(v.clone());
            }
        }
    }
    let source = crate::kernel::FiniteSpace::new_with_star(svars)?;
    let tvars: Vec<_> = factors
        .iter()
        .flat_map(|f| f.target().vars().iter().cloned())
        .collect();
    let target = crate::kernel::FiniteSpace::new_with_star(tvars)?;
    let tsize = target.size();
    let mut mass = Vec::with_capacity(source.size() * tsize);
    for s in 0..source.size() {
        let sc = source.point(s);
        for t in 0..tsize {
            let tc = target.point(t);
            let mut m = crate::kernel::Rational::from_integer(1.into());
            for f in factors {
                let fs: Vec<usize> = f
                    .source()
                    .vars()
                    .iter()
                    .map(|v| {
                        if let Some(i) = target.index_of_var(&v.id) {
                            tc[i]
                        } else {
                            sc[source.index_of_var(&v.id).unwrap()]
                        }
                    })
                    .collect();
                let ft: Vec<usize> = f
                    .target()
                    .vars()
                    .iter()
                    .map(|v| tc[target.index_of_var(&v.id).unwrap()])
                    .collect();
                let cell = f.get(f.source().index(&fs), f.target().index(&ft));
                if cell.is_zero() {
                    m = crate::kernel::Rational::zero();
                    break;
                }
                m *= cell;
            }
            mass.push(m);
        }
    }
    let _ = obs;
    FiniteKernel::new(source, target, mass)
        .map_err(|_| IdentifyError::ProductNotNormalized)
}

/// Runtime check that a district factor only reads its district's parents:
/// the factor table must be constant in every other source coordinate.
fn assert_factor_locality(factor: &FiniteKernel, g: &MixedGraph) -> Result<(), IdentifyError> {
    let district: BTreeSet<NodeId> = factor
        .target()
        .var_ids()
        .into_iter()
        .map(NodeId::new)
        .collect();
    let mut allowed: BTreeSet<String> = district.iter().map(|n| n.0.clone()).collect();
    for d in &district {
        if !g.contains(d) {
            return Ok(()); // factor over non-graph variables; nothing to check
        }
        for p in g.parents(d) {
            allowed.insert(p.0.clone());
        }
    }
    allowed.extend(g.inputs().iter().map(|n| n.0.clone()));
    let keep: BTreeSet<String> = factor
        .source()
        .var_ids()
        .intersection(&allowed)
        .cloned()
        .collect();
    factor.restrict_source_constant(&keep).map_err(|_| {
        let extra = factor
            .source()
            .var_ids()
            .into_iter()
            .find(|id| !allowed.contains(id))
            .unwrap_or_default();
        IdentifyError::LocalityViolated {
            district: district.iter().map(|n| n.0.clone()).collect(),
            var: extra,
        }
    })?;
    Ok(())
}

/// Enumerates every valid fixing order for the observed nodes outside `d`.
/// Empty when `d` is not reachable.
pub fn all_fixing_orders(g: &MixedGraph, d: &BTreeSet<NodeId>) -> Vec<Vec<NodeId>> {
    fn go(
        g: &MixedGraph,
        remaining: &BTreeSet<NodeId>,
        prefix: &mut Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
    ) {
        if remaining.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for r in remaining {
            if fixable(g, r).unwrap_or(false) {
                let g2 = fix_graph(g, r).expect("fixable");
                let mut rem = remaining.clone();
                rem.remove(r);
                prefix.push(r.clone());
                go(&g2, &rem, prefix, out);
                prefix.pop();
            }
        }
    }
    let remaining: BTreeSet<NodeId> = g.observed().difference(d).cloned().collect();
    let mut out = Vec::new();
    go(g, &remaining, &mut Vec::new(), &mut out);
    out
}

/// Applies a fixing order to a kernel, threading the graph context along.
pub fn apply_fixing_order(
    k: &FiniteKernel,
    g: &MixedGraph,
    order: &[NodeId],
) -> Result<FiniteKernel, IdentifyError> {
    let mut kernel = k.clone();
    let mut ctx = g.clone();
    for r in order {
        kernel = fix_kernel(&kernel, r, &ctx)?;
        ctx = fix_graph(&ctx, r)?;
    }
    Ok(kernel)
}

/// Deterministic rendering of a formula; fixes render innermost-first.
pub fn emit_formula(expr: &IdentExpr) -> String {
    match expr {
        IdentExpr::ObsRef => "P(x_V ‖ x_I)".to_string(),
        IdentExpr::Fix { node, child, .. } => {
            format!("φ_{}({})", node, emit_formula(child))
        }
        IdentExpr::Product(children) => children
            .iter()
            .map(emit_formula)
            .collect::<Vec<_>>()
            .join(" · "),
        IdentExpr::Marginalize { vars, child } => {
            let vs = vars
                .iter()
                .map(|v| format!("x_{v}"))
                .collect::<Vec<_>>()
                .join(",");
            format!("Σ_{{{}}} {}", vs, emit_formula(child))
        }
    }
}

/// Two models over the bow graph (latent confounder into both endpoints of
/// `a → b`) with identical observable joints but different interventional
/// kernels; the canonical witness that the bow is not identifiable.
///
/// The tables are fixed constants; their defining properties (equal
/// observables, interventional gap of at least 1/20) are re-verified by the
/// test suite on every run.
pub fn bow_witness() -> (crate::cbn::LiCbn, crate::cbn::LiCbn) {
    use crate::cbn::LiCbn;
    use crate::kernel::{rat, FiniteSpace, Var};
    use std::collections::BTreeMap;

    let graph = || {
        MixedGraph::build(
            &[],
            &["a", "b"],
            &["u"],
            &[("u", "a"), ("u", "b"), ("a", "b")],
            &[],
        )
        .unwrap()
    };
    let spaces = || -> BTreeMap<NodeId, Vec<String>> {
        ["a", "b", "u"]
            .iter()
            .map(|n| (NodeId::from(*n), vec!["0".into(), "1".into()]))
            .collect()
    };
    let kernel = |src: &[&str], rows: &[[(i64, i64); 2]], node: &str| {
        let svars: Vec<Var> = src.iter().map(|s| Var::binary(*s)).collect();
        let source = FiniteSpace::new(svars).unwrap();
        let target = FiniteSpace::new(vec![Var::binary(node)]).unwrap();
        let mass = rows
            .iter()
            .flat_map(|row| row.iter().map(|(n, d)| rat(*n, *d)))
            .collect();
        FiniteKernel::new(source, target, mass).unwrap()
    };

    // Unconfounded variant: u is ignored, b depends on a.
    let m1 = LiCbn::new(
        graph(),
        spaces(),
        BTreeMap::from([
            (NodeId::from("u"), kernel(&[], &[[(1, 2), (1, 2)]], "u")),
            (
                NodeId::from("a"),
                kernel(&["u"], &[[(1, 2), (1, 2)], [(1, 2), (1, 2)]], "a"),
            ),
            (
                NodeId::from("b"),
                // Source order is (a, u); b follows a only.
                kernel(
                    &["a", "u"],
                    &[
                        [(3, 4), (1, 4)],
                        [(3, 4), (1, 4)],
                        [(1, 4), (3, 4)],
                        [(1, 4), (3, 4)],
                    ],
                    "b",
                ),
            ),
        ]),
    )
    .unwrap();

    // Fully confounded variant: a copies u, b depends on u only.
    let m2 = LiCbn::new(
        graph(),
        spaces(),
        BTreeMap::from([
            (NodeId::from("u"), kernel(&[], &[[(1, 2), (1, 2)]], "u")),
            (
                NodeId::from("a"),
                kernel(&["u"], &[[(1, 1), (0, 1)], [(0, 1), (1, 1)]], "a"),
            ),
            (
                NodeId::from("b"),
                kernel(
                    &["a", "u"],
                    &[
                        [(3, 4), (1, 4)],
                        [(1, 4), (3, 4)],
                        [(3, 4), (1, 4)],
                        [(1, 4), (3, 4)],
                    ],
                    "b",
                ),
            ),
        ]),
    )
    .unwrap();
    (m1, m2)
}
