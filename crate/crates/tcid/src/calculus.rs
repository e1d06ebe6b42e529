//! The causal calculus on discrete models: graphical condition, positivity
//! condition, and exact kernel equality, checked separately.
//!
//! Each rule evaluator reports three stages. The graphical test runs on the
//! latent projection of the model's graph after the rule's manipulation.
//! The positivity test is the discrete reading of two-sided absolute
//! continuity: strictly positive mass. Only when both hold is the kernel
//! equality asserted — and then it must hold exactly, row by row, with both
//! sides computed from the interventional oracle. The equality can also be
//! probed on its own via the `*_equality` functions, which is how one
//! observes that positivity is sufficient but not necessary.

use std::collections::BTreeSet;

use num::Zero;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cbn::{LiCbn, ModelError};
use crate::graph::{
    id_separated, latent_project, manipulate_hard, manipulate_soft, soft_input_id, GraphError,
    NodeId, NodeKind,
};
use crate::kernel::{Assignment, FiniteKernel, FiniteSpace, KernelError};
use crate::tci::{tci_check, TciError, TciViolation, TransitionalSpace};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CalculusError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tci(#[from] TciError),
    #[error("rule sets must be disjoint subsets of the observed nodes")]
    BadSets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    R1,
    R2,
    R3,
    BackDoor,
}

/// A point where two kernels that should agree do not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub source: Assignment,
    pub target: Assignment,
}

/// Result of one rule application.
///
/// `equality_ok` is present exactly when both preconditions hold; the
/// equality itself is then exact everywhere on the (all-positive) support.
#[derive(Debug, Clone, Serialize)]
pub struct RuleReport {
    pub rule: Rule,
    pub graphical_ok: bool,
    pub positivity_ok: bool,
    pub equality_ok: Option<bool>,
    pub counterexample: Option<Counterexample>,
}

/// Outcome of a support-restricted kernel comparison.
#[derive(Debug, Clone)]
pub struct EqualityCheck {
    pub holds: bool,
    pub counterexample: Option<Counterexample>,
    /// Number of source rows that were actually compared.
    pub compared_rows: usize,
}

/// True iff `k` has positive mass at the cell obtained by reading its
/// source and target coordinates out of `env` by name.
fn positive_at(k: &FiniteKernel, env_space: &FiniteSpace, env: &[usize]) -> bool {
    let read = |space: &FiniteSpace| -> Vec<usize> {
        space
            .vars()
            .iter()
            .map(|v| env[env_space.index_of_var(&v.id).expect("support var in env")])
            .collect()
    };
    let s = k.source().index(&read(k.source()));
    let t = k.target().index(&read(k.target()));
    !k.get(s, t).is_zero()
}

/// Compares `k1` and `k2` as kernels to the same target variables on every
/// `k1`-source row passing `support`; `k2`'s source variables must be a
/// subset of `k1`'s and are projected by name.
fn kernels_agree(
    k1: &FiniteKernel,
    k2: &FiniteKernel,
    support: impl Fn(&FiniteSpace, &[usize]) -> bool,
) -> EqualityCheck {
    assert_eq!(k1.target().var_ids(), k2.target().var_ids());
    let proj: Vec<usize> = k2
        .source()
        .vars()
        .iter()
        .map(|v| k1.source().index_of_var(&v.id).expect("source subset"))
        .collect();
    let mut compared = 0usize;
    for s1 in 0..k1.source().size() {
        let sc = k1.source().point(s1);
        if !support(k1.source(), &sc) {
            continue;
        }
        compared += 1;
        let sc2: Vec<usize> = proj.iter().map(|&i| sc[i]).collect();
        let s2 = k2.source().index(&sc2);
        for t1 in 0..k1.target().size() {
            let tc = k1.target().point(t1);
            let tc2: Vec<usize> = k2
                .target()
                .vars()
                .iter()
                .map(|v| tc[k1.target().index_of_var(&v.id).unwrap()])
                .collect();
            if k1.get(s1, t1) != k2.get(s2, k2.target().index(&tc2)) {
                let assign = |space: &FiniteSpace, coords: &[usize]| -> Assignment {
                    space
                        .vars()
                        .iter()
                        .zip(coords)
                        .map(|(v, &c)| (v.id.clone(), v.domain[c].clone()))
                        .collect()
                };
                return EqualityCheck {
                    holds: false,
                    counterexample: Some(Counterexample {
                        source: assign(k1.source(), &sc),
                        target: assign(k1.target(), &tc),
                    }),
                    compared_rows: compared,
                };
            }
        }
    }
    EqualityCheck {
        holds: true,
        counterexample: None,
        compared_rows: compared,
    }
}

fn names(set: &BTreeSet<NodeId>) -> BTreeSet<String> {
    set.iter().map(|n| n.0.clone()).collect()
}

fn check_sets(m: &LiCbn, sets: &[&BTreeSet<NodeId>]) -> Result<(), CalculusError> {
    let mut seen: BTreeSet<&NodeId> = BTreeSet::new();
    for set in sets {
        for n in set.iter() {
            if m.graph().kind(n) != Some(NodeKind::Observed) || !seen.insert(n) {
                return Err(CalculusError::BadSets);
            }
        }
    }
    Ok(())
}

/// The conditional interventional kernel `P(X_A | X_given ‖ do(X_do), X_I)`,
/// both pieces computed from the truncated-factorization oracle.
fn do_conditional(
    m: &LiCbn,
    a: &BTreeSet<NodeId>,
    given: &BTreeSet<NodeId>,
    do_set: &BTreeSet<NodeId>,
) -> Result<FiniteKernel, CalculusError> {
    let ko = m.oracle_do(do_set)?;
    let mut keep = names(a);
    keep.extend(names(given));
    Ok(ko.marginalize(&keep)?.disintegrate(&names(given))?)
}

fn soft_inputs(b: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
    b.iter().map(soft_input_id).collect()
}

/// Insertion/deletion of observation: if `A` is separated from `B` given
/// `C ∪ D` after hard manipulation of `D`, conditioning on `X_B` is
/// redundant in the `do(D)` world.
pub fn rule1(
    m: &LiCbn,
    a: &BTreeSet<NodeId>,
    b: &BTreeSet<NodeId>,
    c: &BTreeSet<NodeId>,
    d: &BTreeSet<NodeId>,
) -> Result<RuleReport, CalculusError> {
    check_sets(m, &[a, b, c, d])?;
    let proj = latent_project(m.graph())?;
    let gd = manipulate_hard(&proj, d)?;
    let cd: BTreeSet<NodeId> = c.union(d).cloned().collect();
    let graphical_ok = id_separated(&gd, a, b, &cd)?;
    let ko_d = m.oracle_do(d)?;
    let mut bc = names(b);
    bc.extend(names(c));
    let positivity_ok = ko_d.marginalize(&bc)?.strictly_positive();
    let eq = if graphical_ok {
        Some(rule1_equality(m, a, b, c, d)?)
    } else {
        None
    };
    Ok(report(Rule::R1, graphical_ok, positivity_ok, eq))
}

/// The rule-1 equality alone, compared on the support (rows with positive
/// conditioning mass); used to probe instances where positivity fails.
pub fn rule1_equality(
    m: &LiCbn,
    a: &BTreeSet<NodeId>,
    b: &BTreeSet<NodeId>,
    c: &BTreeSet<NodeId>,
    d: &BTreeSet<NodeId>,
) -> Result<EqualityCheck, CalculusError> {
    let bc: BTreeSet<NodeId> = b.union(c).cloned().collect();
    let k1 = do_conditional(m, a, &bc, d)?;
    let k2 = do_conditional(m, a, c, d)?;
    let ko_d = m.oracle_do(d)?;
    let mass_bc = ko_d.marginalize(&names(&bc))?;
    Ok(kernels_agree(&k1, &k2, |space, coords| {
        positive_at(&mass_bc, space, coords)
    }))
}

/// Action/observation exchange: under separation of `A` from the fresh
/// inputs of `B` given `B ∪ C ∪ D`, intervening on `B` and conditioning on
/// `B` agree.
pub fn rule2(
    m: &LiCbn,
    a: &BTreeSet<NodeId>,
    b: &BTreeSet<NodeId>,
    c: &BTreeSet<NodeId>,
    d: &BTreeSet<NodeId>,
) -> Result<RuleReport, CalculusError> {
    check_sets(m, &[a, b, c, d])?;
    let proj = latent_project(m.graph())?;
    let g2 = manipulate_hard(&manipulate_soft(&proj, b)?, d)?;
    let mut bcd: BTreeSet<NodeId> = b.union(c).cloned().collect();
    bcd.extend(d.iter().cloned());
    let graphical_ok = id_separated(&g2, a, &soft_inputs(b), &bcd)?;

    let ko_d = m.oracle_do(d)?;
    let bd: BTreeSet<NodeId> = b.union(d).cloned().collect();
    let ko_bd = m.oracle_do(&bd)?;
    let mut bc = names(b);
    bc.extend(names(c));
    let positivity_ok = ko_d.marginalize(&bc)?.strictly_positive()
        && ko_bd.marginalize(&names(c))?.strictly_positive();
    let eq = if graphical_ok {
        Some(rule2_equality(m, a, b, c, d)?)
    } else {
        None
    };
    Ok(report(Rule::R2, graphical_ok, positivity_ok, eq))
}

pub fn rule2_equality(
    m: &LiCbn,
    a: &BTreeSet<NodeId>,
    b: &BTreeSet<NodeId>,
    c: &BTreeSet<NodeId>,
    d: &BTreeSet<NodeId>,
) -> Result<EqualityCheck, CalculusError> {
    let bd: BTreeSet<NodeId> = b.union(d).cloned().collect();
    let bc: BTreeSet<NodeId> = b.union(c).cloned().collect();
    let k1 = do_conditional(m, a, c, &bd)?; // A | C ‖ do(B, D)
    let k2 = do_conditional(m, a, &bc, d)?; // A | B, C ‖ do(D)
    let cond1 = m.oracle_do(&bd)?.marginalize(&names(c))?;
    let cond2 = m.oracle_do(d)?.marginalize(&names(&bc))?;
    Ok(kernels_agree(&k1, &k2, |space, coords| {
        positive_at(&cond1, space, coords) && positive_at(&cond2, space, coords)
    }))
}

/// Insertion/deletion of action: under separation of `A` from the fresh
/// inputs of `B` given `C ∪ D`, the intervention on `B` is irrelevant.
pub fn rule3(
    m: &LiCbn,
    a: &BTreeSet<NodeId>,
    b: &BTreeSet<NodeId>,
    c: &BTreeSet<NodeId>,
    d: &BTreeSet<NodeId>,
) -> Result<RuleReport, CalculusError> {
    check_sets(m, &[a, b, c, d])?;
    let proj = latent_project(m.graph())?;
    let g2 = manipulate_hard(&manipulate_soft(&proj, b)?, d)?;
    let cd: BTreeSet<NodeId> = c.union(d).cloned().collect();
    let graphical_ok = id_separated(&g2, a, &soft_inputs(b), &cd)?;

    let bd: BTreeSet<NodeId> = b.union(d).cloned().collect();
    let positivity_ok = m
        .oracle_do(&bd)?
        .marginalize(&names(c))?
        .strictly_positive()
        && m.oracle_do(d)?.marginalize(&names(c))?.strictly_positive();
    let eq = if graphical_ok {
        Some(rule3_equality(m, a, b, c, d)?)
    } else {
        None
    };
    Ok(report(Rule::R3, graphical_ok, positivity_ok, eq))
}

pub fn rule3_equality(
    m: &LiCbn,
    a: &BTreeSet<NodeId>,
    b: &BTreeSet<NodeId>,
    c: &BTreeSet<NodeId>,
    d: &BTreeSet<NodeId>,
) -> Result<EqualityCheck, CalculusError> {
    let bd: BTreeSet<NodeId> = b.union(d).cloned().collect();
    let k1 = do_conditional(m, a, c, &bd)?; // A | C ‖ do(B, D): varies over x_B
    let k2 = do_conditional(m, a, c, d)?; // A | C ‖ do(D)
    let cond1 = m.oracle_do(&bd)?.marginalize(&names(c))?;
    let cond2 = m.oracle_do(d)?.marginalize(&names(c))?;
    Ok(kernels_agree(&k1, &k2, |space, coords| {
        positive_at(&cond1, space, coords) && positive_at(&cond2, space, coords)
    }))
}

/// Back-door adjustment through the set `F`: checks the two separations on
/// the soft-manipulated graph, the one-sided absolute continuity
/// `P(X_F) ⊗ P(X_B) ≪ P(X_F, X_B)`, and both adjustment displays.
pub fn backdoor(
    m: &LiCbn,
    a: &BTreeSet<NodeId>,
    b: &BTreeSet<NodeId>,
    f: &BTreeSet<NodeId>,
) -> Result<RuleReport, CalculusError> {
    check_sets(m, &[a, b, f])?;
    let proj = latent_project(m.graph())?;
    let gs = manipulate_soft(&proj, b)?;
    let ib = soft_inputs(b);
    let bf: BTreeSet<NodeId> = b.union(f).cloned().collect();
    let graphical_ok =
        id_separated(&gs, f, &ib, &BTreeSet::new())? && id_separated(&gs, a, &ib, &bf)?;

    let obs = m.observable_kernel()?;
    let pf = obs.marginalize(&names(f))?;
    let pb = obs.marginalize(&names(b))?;
    let pfb = obs.marginalize(&names(&bf))?;
    let positivity_ok = pf.product(&pb)?.absolutely_continuous(&pfb)?;
    let eq = if graphical_ok {
        Some(backdoor_equality(m, a, b, f)?)
    } else {
        None
    };
    Ok(report(Rule::BackDoor, graphical_ok, positivity_ok, eq))
}

/// Both adjustment displays, compared at every treatment row with positive
/// observational mass. Zero-mass conditioning rows of the observational
/// conditional take the documented uniform fallback, so when the absolute
/// continuity precondition fails this comparison can (and on the failure
/// instances does) differ from the oracle.
pub fn backdoor_equality(
    m: &LiCbn,
    a: &BTreeSet<NodeId>,
    b: &BTreeSet<NodeId>,
    f: &BTreeSet<NodeId>,
) -> Result<EqualityCheck, CalculusError> {
    let obs = m.observable_kernel()?;
    let bf: BTreeSet<NodeId> = b.union(f).cloned().collect();
    let mut afb = names(a);
    afb.extend(names(&bf));
    let cond = obs.marginalize(&afb)?.disintegrate(&names(&bf))?; // A | F, B
    let pf = obs.marginalize(&names(f))?;
    let rhs_joint = cond.product(&pf)?; // (A, F ‖ B, I)
    let ko_b = m.oracle_do(b)?;
    let mut af = names(a);
    af.extend(names(f));
    let lhs_joint = ko_b.marginalize(&af)?; // (A, F ‖ B, I)
    let pb = obs.marginalize(&names(b))?;

    let first = kernels_agree(&lhs_joint, &rhs_joint, |space, coords| {
        positive_at(&pb, space, coords)
    });
    if !first.holds {
        return Ok(first);
    }
    let lhs_a = ko_b.marginalize(&names(a))?;
    let rhs_a = rhs_joint.marginalize(&names(a))?;
    let second = kernels_agree(&lhs_a, &rhs_a, |space, coords| {
        positive_at(&pb, space, coords)
    });
    Ok(EqualityCheck {
        holds: second.holds,
        counterexample: second.counterexample,
        compared_rows: first.compared_rows + second.compared_rows,
    })
}

fn report(
    rule: Rule,
    graphical_ok: bool,
    positivity_ok: bool,
    eq: Option<EqualityCheck>,
) -> RuleReport {
    match eq {
        Some(eq) if graphical_ok && positivity_ok => RuleReport {
            rule,
            graphical_ok,
            positivity_ok,
            equality_ok: Some(eq.holds),
            counterexample: eq.counterexample,
        },
        _ => RuleReport {
            rule,
            graphical_ok,
            positivity_ok,
            equality_ok: None,
            counterexample: None,
        },
    }
}

/// A separated triple whose transitional conditional independence failed.
#[derive(Debug, Clone)]
pub struct MarkovViolation {
    pub a: BTreeSet<NodeId>,
    pub b: BTreeSet<NodeId>,
    pub c: BTreeSet<NodeId>,
    pub violation: Option<TciViolation>,
}

#[derive(Debug, Clone)]
pub struct MarkovReport {
    pub violations: Vec<MarkovViolation>,
    pub checked: u64,
    pub total: u64,
    /// Set when the triple enumeration was cut off by the budget; reported
    /// separately from violations.
    pub budget_exhausted: bool,
}

impl MarkovReport {
    pub fn sound(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Sweeps disjoint triples `(A, B, C)` over the inputs and observed nodes:
/// wherever the projected graph separates `A` from `B` given `C`, the
/// corresponding transitional conditional independence must hold on the
/// observable kernel (input coordinates enter as source components).
///
/// Enumeration is exhaustive up to `budget` triples, in a fixed order, so
/// runs are reproducible; the triples are checked in parallel.
pub fn verify_markov(m: &LiCbn, budget: Option<u64>) -> Result<MarkovReport, CalculusError> {
    let proj = latent_project(m.graph())?;
    let obs = m.observable_kernel()?;
    let mut nodes: Vec<NodeId> = proj.inputs().into_iter().collect();
    nodes.extend(proj.observed());
    let n = nodes.len();
    let total = 4u64.checked_pow(n as u32).expect("node count too large");
    let limit = budget.map(|b| b.min(total)).unwrap_or(total);

    let violations: Vec<MarkovViolation> = (0..limit)
        .into_par_iter()
        .filter_map(|mut code| {
            let mut a = BTreeSet::new();
            let mut b = BTreeSet::new();
            let mut c = BTreeSet::new();
            for node in &nodes {
                match code % 4 {
                    1 => {
                        a.insert(node.clone());
                    }
                    2 => {
                        b.insert(node.clone());
                    }
                    3 => {
                        c.insert(node.clone());
                    }
                    _ => {}
                }
                code /= 4;
            }
            if a.is_empty() {
                return None; // no paths leave the empty set
            }
            if !id_separated(&proj, &a, &b, &c).unwrap_or(false) {
                return None;
            }
            let mut s = TransitionalSpace::new(obs.clone());
            let coords = |set: &BTreeSet<NodeId>| -> Vec<String> {
                set.iter().map(|n| n.0.clone()).collect()
            };
            let ca = coords(&a);
            let cb = coords(&b);
            let cc = coords(&c);
            s.declare_coords("A", &ca.iter().map(|s| s.as_str()).collect::<Vec<_>>())
                .expect("coords");
            s.declare_coords("B", &cb.iter().map(|s| s.as_str()).collect::<Vec<_>>())
                .expect("coords");
            s.declare_coords("C", &cc.iter().map(|s| s.as_str()).collect::<Vec<_>>())
                .expect("coords");
            let cert = tci_check(&s, "A", "B", "C").expect("tci");
            if cert.holds {
                None
            } else {
                Some(MarkovViolation {
                    a,
                    b,
                    c,
                    violation: cert.violation,
                })
            }
        })
        .collect();
    Ok(MarkovReport {
        violations,
        checked: limit,
        total,
        budget_exhausted: limit < total,
    })
}
