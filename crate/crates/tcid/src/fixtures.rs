//! Canonical graphs and models used across the test suites, the
//! verification binaries and the guide.

use std::collections::BTreeMap;

use crate::cbn::LiCbn;
use crate::graph::{MixedGraph, NodeId};
use crate::kernel::{rat, FiniteKernel, FiniteSpace, Var};

/// A mechanism kernel from named binary/ternary parents, rows given as
/// `(numerator, denominator)` pairs in source order.
pub fn mech(node: &str, parents: &[(&str, usize)], rows: &[&[(i64, i64)]]) -> FiniteKernel {
    let svars: Vec<Var> = parents
        .iter()
        .map(|(p, size)| Var {
            id: p.to_string(),
            domain: (0..*size).map(|i| i.to_string()).collect(),
        })
        .collect();
    let source = FiniteSpace::new(svars).unwrap();
    let target = FiniteSpace::new(vec![Var::binary(node)]).unwrap();
    let mut mass = Vec::new();
    for row in rows {
        for (n, d) in row.iter() {
            mass.push(rat(*n, *d));
        }
    }
    FiniteKernel::new(source, target, mass).unwrap()
}

fn binary_spaces(names: &[&str]) -> BTreeMap<NodeId, Vec<String>> {
    names
        .iter()
        .map(|n| (NodeId::from(*n), vec!["0".into(), "1".into()]))
        .collect()
}

/// The mediation model with an unobserved common cause of treatment and
/// outcome: `u → a`, `u → b`, `a → c`, `c → b` with `u` latent. Its
/// projection is `a → c → b` plus `a ↔ b`.
pub fn front_door_model() -> LiCbn {
    let graph = MixedGraph::build(
        &[],
        &["a", "b", "c"],
        &["u"],
        &[("u", "a"), ("u", "b"), ("a", "c"), ("c", "b")],
        &[],
    )
    .unwrap();
    let mechanisms: BTreeMap<NodeId, FiniteKernel> = [
        ("u", mech("u", &[], &[&[(1, 3), (2, 3)]])),
        (
            "a",
            mech("a", &[("u", 2)], &[&[(1, 4), (3, 4)], &[(2, 3), (1, 3)]]),
        ),
        (
            "c",
            mech("c", &[("a", 2)], &[&[(5, 6), (1, 6)], &[(1, 5), (4, 5)]]),
        ),
        (
            "b",
            mech(
                "b",
                &[("c", 2), ("u", 2)],
                &[
                    &[(1, 2), (1, 2)],
                    &[(1, 3), (2, 3)],
                    &[(3, 5), (2, 5)],
                    &[(1, 6), (5, 6)],
                ],
            ),
        ),
    ]
    .into_iter()
    .map(|(n, k)| (NodeId::from(n), k))
    .collect();
    LiCbn::new(graph, binary_spaces(&["a", "b", "c", "u"]), mechanisms).unwrap()
}

/// The front-door projection: `a → c → b` with `a ↔ b`.
pub fn front_door_projection() -> MixedGraph {
    MixedGraph::build(&[], &["a", "b", "c"], &[], &[("a", "c"), ("c", "b")], &[("a", "b")])
        .unwrap()
}

/// The bow: `a → b` confounded by `a ↔ b`; nothing over it is identifiable.
pub fn bow_graph() -> MixedGraph {
    MixedGraph::build(&[], &["a", "b"], &[], &[("a", "b")], &[("a", "b")]).unwrap()
}

/// Markov chain `a → b → c` with fixed positive tables.
pub fn chain_model() -> LiCbn {
    let graph =
        MixedGraph::build(&[], &["a", "b", "c"], &[], &[("a", "b"), ("b", "c")], &[]).unwrap();
    let mechanisms: BTreeMap<NodeId, FiniteKernel> = [
        ("a", mech("a", &[], &[&[(1, 3), (2, 3)]])),
        (
            "b",
            mech("b", &[("a", 2)], &[&[(1, 4), (3, 4)], &[(2, 3), (1, 3)]]),
        ),
        (
            "c",
            mech("c", &[("b", 2)], &[&[(1, 2), (1, 2)], &[(1, 6), (5, 6)]]),
        ),
    ]
    .into_iter()
    .map(|(n, k)| (NodeId::from(n), k))
    .collect();
    LiCbn::new(graph, binary_spaces(&["a", "b", "c"]), mechanisms).unwrap()
}

/// Confounded triangle `c → a`, `c → b`, `a → b` with fixed positive tables;
/// `c` is a valid adjustment set for the effect of `a` on `b`.
pub fn triangle_model() -> LiCbn {
    let graph = MixedGraph::build(
        &[],
        &["a", "b", "c"],
        &[],
        &[("c", "a"), ("c", "b"), ("a", "b")],
        &[],
    )
    .unwrap();
    let mechanisms: BTreeMap<NodeId, FiniteKernel> = [
        ("c", mech("c", &[], &[&[(1, 2), (1, 2)]])),
        (
            "a",
            mech("a", &[("c", 2)], &[&[(1, 4), (3, 4)], &[(2, 3), (1, 3)]]),
        ),
        (
            "b",
            mech(
                "b",
                &[("a", 2), ("c", 2)],
                &[
                    &[(1, 2), (1, 2)],
                    &[(1, 3), (2, 3)],
                    &[(2, 5), (3, 5)],
                    &[(1, 6), (5, 6)],
                ],
            ),
        ),
    ]
    .into_iter()
    .map(|(n, k)| (NodeId::from(n), k))
    .collect();
    LiCbn::new(graph, binary_spaces(&["a", "b", "c"]), mechanisms).unwrap()
}

/// Triangle whose treatment is pinned to `0` whenever the confounder is `0`:
/// the discrete shape of the adjustment-failure example. The product of the
/// marginals of `c` and `a` is not absolutely continuous with respect to
/// their joint, and adjustment by `c` misses the interventional kernel at
/// the treatment value `1`.
pub fn threshold_triangle_model() -> LiCbn {
    let graph = MixedGraph::build(
        &[],
        &["a", "b", "c"],
        &[],
        &[("c", "a"), ("c", "b"), ("a", "b")],
        &[],
    )
    .unwrap();
    let mechanisms: BTreeMap<NodeId, FiniteKernel> = [
        ("c", mech("c", &[], &[&[(1, 2), (1, 2)]])),
        (
            "a",
            mech("a", &[("c", 2)], &[&[(1, 1), (0, 1)], &[(1, 2), (1, 2)]]),
        ),
        (
            "b",
            mech(
                "b",
                &[("a", 2), ("c", 2)],
                &[
                    &[(3, 4), (1, 4)],
                    &[(1, 3), (2, 3)],
                    &[(2, 3), (1, 3)],
                    &[(1, 4), (3, 4)],
                ],
            ),
        ),
    ]
    .into_iter()
    .map(|(n, k)| (NodeId::from(n), k))
    .collect();
    LiCbn::new(graph, binary_spaces(&["a", "b", "c"]), mechanisms).unwrap()
}

/// Chain `a → b → c` with a degenerate root law: positivity fails for the
/// observation-deletion rule while its equality still holds on the support.
pub fn degenerate_root_chain_model() -> LiCbn {
    let graph =
        MixedGraph::build(&[], &["a", "b", "c"], &[], &[("a", "b"), ("b", "c")], &[]).unwrap();
    let mechanisms: BTreeMap<NodeId, FiniteKernel> = [
        ("a", mech("a", &[], &[&[(1, 1), (0, 1)]])),
        (
            "b",
            mech("b", &[("a", 2)], &[&[(1, 4), (3, 4)], &[(2, 3), (1, 3)]]),
        ),
        (
            "c",
            mech("c", &[("b", 2)], &[&[(1, 2), (1, 2)], &[(1, 6), (5, 6)]]),
        ),
    ]
    .into_iter()
    .map(|(n, k)| (NodeId::from(n), k))
    .collect();
    LiCbn::new(graph, binary_spaces(&["a", "b", "c"]), mechanisms).unwrap()
}

/// The separation-asymmetry witness: inputs into each of `a`, `b`, `c` with
/// `b → c → a`, instantiated with parity mechanisms `b = I_b`,
/// `c = b xor I_c`, `a = c xor I_a`. Separation of `a` from `b` given
/// `{c, I_a}` holds, the reversed statement does not, and the instantiated
/// independences behave the same way.
pub fn asymmetry_model() -> LiCbn {
    let graph = MixedGraph::build(
        &["I_a", "I_b", "I_c"],
        &["a", "b", "c"],
        &[],
        &[("I_a", "a"), ("I_b", "b"), ("I_c", "c"), ("b", "c"), ("c", "a")],
        &[],
    )
    .unwrap();
    let xor = |node: &str, p1: &str, p2: &str| {
        let source =
            FiniteSpace::new(vec![Var::binary(p1.min(p2)), Var::binary(p1.max(p2))]).unwrap();
        let target = FiniteSpace::new(vec![Var::binary(node)]).unwrap();
        let mut mass = Vec::new();
        for s in 0..4usize {
            let bits = source.point(s);
            let v = bits[0] ^ bits[1];
            mass.push(if v == 0 { rat(1, 1) } else { rat(0, 1) });
            mass.push(if v == 1 { rat(1, 1) } else { rat(0, 1) });
        }
        FiniteKernel::new(source, target, mass).unwrap()
    };
    let mechanisms: BTreeMap<NodeId, FiniteKernel> = [
        ("b", FiniteKernel::copy(Var::binary("I_b"), "b").unwrap()),
        ("c", xor("c", "b", "I_c")),
        ("a", xor("a", "c", "I_a")),
    ]
    .into_iter()
    .map(|(n, k)| (NodeId::from(n), k))
    .collect();
    LiCbn::new(
        graph,
        binary_spaces(&["a", "b", "c", "I_a", "I_b", "I_c"]),
        mechanisms,
    )
    .unwrap()
}
