//! Directed mixed graphs with input nodes.
//!
//! A [`MixedGraph`] partitions its nodes into inputs (exogenous, never heads
//! of edges), observed nodes, and latent nodes. Directed edges must be
//! acyclic; bidirected edges connect observed nodes only, and a graph with
//! latent nodes carries no bidirected edges (confounding is represented by
//! the latents until projection).
//!
//! The module provides latent projection, hard and soft manipulation, the
//! separation test used by the calculus, and the structural predicates
//! (districts, fixability, reachability) consumed by the identification
//! algorithm.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde_json::Value;
use thiserror::Error;

/// A node identifier, unique within one graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(s: impl Into<String>) -> Self {
        NodeId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

pub fn node_set<I: IntoIterator<Item = &'static str>>(ids: I) -> BTreeSet<NodeId> {
    ids.into_iter().map(NodeId::from).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Input,
    Observed,
    Latent,
}

impl NodeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Input => "input",
            NodeKind::Observed => "observed",
            NodeKind::Latent => "latent",
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("empty node id")]
    EmptyNodeId,
    #[error("directed part contains a cycle")]
    Cyclic,
    #[error("input node `{0}` has an incoming or bidirected edge")]
    InputWithArrowhead(String),
    #[error("bidirected edge touches input node `{0}`")]
    BidirectedOnInput(String),
    #[error("bidirected self-loop on `{0}`")]
    BidirectedSelfLoop(String),
    #[error("graph has latent nodes and bidirected edges at the same time")]
    LatentWithBidirected,
    #[error("graph must not contain latent nodes for this operation, found `{0}`")]
    LatentPresent(String),
    #[error("graph must not contain bidirected edges for this operation")]
    BidirectedPresent,
    #[error("node `{0}` is not observed")]
    NotObserved(String),
    #[error("node `{0}` is latent and cannot be manipulated")]
    LatentManipulated(String),
    #[error("fresh input id `{0}` collides with an existing node")]
    NameCollision(String),
    #[error("node `{0}` is not fixable")]
    NotFixable(String),
    #[error("malformed graph JSON: {0}")]
    BadJson(String),
}

/// An acyclic directed mixed graph with input nodes, immutable after
/// construction. All operations are pure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedGraph {
    nodes: BTreeMap<NodeId, NodeKind>,
    directed: BTreeSet<(NodeId, NodeId)>,
    /// Stored with endpoints in sorted order.
    bidirected: BTreeSet<(NodeId, NodeId)>,
}

impl MixedGraph {
    pub fn new(
        nodes: Vec<(NodeId, NodeKind)>,
        directed: Vec<(NodeId, NodeId)>,
        bidirected: Vec<(NodeId, NodeId)>,
    ) -> Result<Self, GraphError> {
        let mut node_map = BTreeMap::new();
        for (id, kind) in nodes {
            if id.0.is_empty() {
                return Err(GraphError::EmptyNodeId);
            }
            if node_map.insert(id.clone(), kind).is_some() {
                return Err(GraphError::DuplicateNode(id.0));
            }
        }
        let mut dir = BTreeSet::new();
        for (tail, head) in directed {
            for n in [&tail, &head] {
                if !node_map.contains_key(n) {
                    return Err(GraphError::UnknownNode(n.0.clone()));
                }
            }
            if node_map[&head] == NodeKind::Input {
                return Err(GraphError::InputWithArrowhead(head.0));
            }
            dir.insert((tail, head));
        }
        let mut bi = BTreeSet::new();
        for (a, b) in bidirected {
            for n in [&a, &b] {
                if !node_map.contains_key(n) {
                    return Err(GraphError::UnknownNode(n.0.clone()));
                }
                if node_map[n] == NodeKind::Input {
                    return Err(GraphError::BidirectedOnInput(n.0.clone()));
                }
            }
            if a == b {
                return Err(GraphError::BidirectedSelfLoop(a.0));
            }
            bi.insert(if a <= b { (a, b) } else { (b, a) });
        }
        let has_latent = node_map.values().any(|k| *k == NodeKind::Latent);
        if has_latent && !bi.is_empty() {
            return Err(GraphError::LatentWithBidirected);
        }
        let g = MixedGraph {
            nodes: node_map,
            directed: dir,
            bidirected: bi,
        };
        g.topological_order().ok_or(GraphError::Cyclic)?;
        Ok(g)
    }

    /// Builder from string literals, for tests and examples.
    pub fn build(
        inputs: &[&str],
        observed: &[&str],
        latent: &[&str],
        directed: &[(&str, &str)],
        bidirected: &[(&str, &str)],
    ) -> Result<Self, GraphError> {
        let mut nodes = Vec::new();
        for i in inputs {
            nodes.push((NodeId::from(*i), NodeKind::Input));
        }
        for o in observed {
            nodes.push((NodeId::from(*o), NodeKind::Observed));
        }
        for l in latent {
            nodes.push((NodeId::from(*l), NodeKind::Latent));
        }
        MixedGraph::new(
            nodes,
            directed
                .iter()
                .map(|(t, h)| (NodeId::from(*t), NodeId::from(*h)))
                .collect(),
            bidirected
                .iter()
                .map(|(a, b)| (NodeId::from(*a), NodeId::from(*b)))
                .collect(),
        )
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, NodeKind)> {
        self.nodes.iter().map(|(id, k)| (id, *k))
    }

    pub fn kind(&self, id: &NodeId) -> Option<NodeKind> {
        self.nodes.get(id).copied()
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn of_kind(&self, kind: NodeKind) -> BTreeSet<NodeId> {
        self.nodes
            .iter()
            .filter(|(_, k)| **k == kind)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn inputs(&self) -> BTreeSet<NodeId> {
        self.of_kind(NodeKind::Input)
    }

    pub fn observed(&self) -> BTreeSet<NodeId> {
        self.of_kind(NodeKind::Observed)
    }

    pub fn latents(&self) -> BTreeSet<NodeId> {
        self.of_kind(NodeKind::Latent)
    }

    pub fn directed_edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.directed
    }

    pub fn bidirected_edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.bidirected
    }

    pub fn parents(&self, v: &NodeId) -> BTreeSet<NodeId> {
        self.directed
            .iter()
            .filter(|(_, h)| h == v)
            .map(|(t, _)| t.clone())
            .collect()
    }

    pub fn children(&self, v: &NodeId) -> BTreeSet<NodeId> {
        self.directed
            .iter()
            .filter(|(t, _)| t == v)
            .map(|(_, h)| h.clone())
            .collect()
    }

    pub fn spouses(&self, v: &NodeId) -> BTreeSet<NodeId> {
        self.bidirected
            .iter()
            .filter_map(|(a, b)| {
                if a == v {
                    Some(b.clone())
                } else if b == v {
                    Some(a.clone())
                } else {
                    None
                }
            })
            .collect()
    }

    /// One deterministic topological order of the directed part, smallest
    /// available node id first. `None` if the directed part is cyclic.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let mut indeg: BTreeMap<&NodeId, usize> =
            self.nodes.keys().map(|n| (n, 0usize)).collect();
        for (_, h) in &self.directed {
            *indeg.get_mut(h).unwrap() += 1;
        }
        let mut ready: BTreeSet<&NodeId> = indeg
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| *n)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(&n) = ready.iter().next() {
            ready.remove(n);
            order.push(n.clone());
            for (t, h) in &self.directed {
                if t == n {
                    let d = indeg.get_mut(h).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(h);
                    }
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    /// Reflexive ancestral closure of `v` over directed edges.
    pub fn ancestors(&self, v: &NodeId) -> BTreeSet<NodeId> {
        self.closure(v, |n| self.parents(n))
    }

    /// Reflexive descendant closure of `v` over directed edges.
    pub fn descendants(&self, v: &NodeId) -> BTreeSet<NodeId> {
        self.closure(v, |n| self.children(n))
    }

    pub fn ancestors_of_set(&self, vs: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
        vs.iter().flat_map(|v| self.ancestors(v)).collect()
    }

    pub fn descendants_of_set(&self, vs: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
        vs.iter().flat_map(|v| self.descendants(v)).collect()
    }

    fn closure(
        &self,
        v: &NodeId,
        step: impl Fn(&NodeId) -> BTreeSet<NodeId>,
    ) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut queue = VecDeque::from([v.clone()]);
        while let Some(n) = queue.pop_front() {
            if out.insert(n.clone()) {
                queue.extend(step(&n));
            }
        }
        out
    }

    /// Connected components of the bidirected part restricted to observed
    /// nodes; a node without bidirected edges forms its own district.
    pub fn districts(&self) -> Vec<BTreeSet<NodeId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for v in self.observed() {
            if seen.contains(&v) {
                continue;
            }
            let comp = self.closure(&v, |n| self.spouses(n));
            seen.extend(comp.iter().cloned());
            out.push(comp);
        }
        out
    }

    /// The district containing `v`.
    pub fn district_of(&self, v: &NodeId) -> Result<BTreeSet<NodeId>, GraphError> {
        if self.kind(v) != Some(NodeKind::Observed) {
            return Err(GraphError::NotObserved(v.0.clone()));
        }
        Ok(self.closure(v, |n| self.spouses(n)))
    }

    /// Induced subgraph on a node set (keeps node kinds and both edge sets).
    pub fn induced(&self, keep: &BTreeSet<NodeId>) -> MixedGraph {
        MixedGraph {
            nodes: self
                .nodes
                .iter()
                .filter(|(n, _)| keep.contains(n))
                .map(|(n, k)| (n.clone(), *k))
                .collect(),
            directed: self
                .directed
                .iter()
                .filter(|(t, h)| keep.contains(t) && keep.contains(h))
                .cloned()
                .collect(),
            bidirected: self
                .bidirected
                .iter()
                .filter(|(a, b)| keep.contains(a) && keep.contains(b))
                .cloned()
                .collect(),
        }
    }

    fn check_known(&self, set: &BTreeSet<NodeId>) -> Result<(), GraphError> {
        for n in set {
            if !self.contains(n) {
                return Err(GraphError::UnknownNode(n.0.clone()));
            }
        }
        Ok(())
    }

    /// Serializes to the interchange JSON format (sorted, byte-stable).
    pub fn to_json(&self) -> Value {
        let nodes: Vec<Value> = self
            .nodes
            .iter()
            .map(|(id, kind)| {
                let mut m = serde_json::Map::new();
                m.insert("id".into(), Value::String(id.0.clone()));
                m.insert("kind".into(), Value::String(kind.as_str().into()));
                Value::Object(m)
            })
            .collect();
        let pairs = |set: &BTreeSet<(NodeId, NodeId)>| {
            Value::Array(
                set.iter()
                    .map(|(a, b)| {
                        Value::Array(vec![
                            Value::String(a.0.clone()),
                            Value::String(b.0.clone()),
                        ])
                    })
                    .collect(),
            )
        };
        let mut obj = serde_json::Map::new();
        obj.insert("nodes".into(), Value::Array(nodes));
        obj.insert("directed".into(), pairs(&self.directed));
        obj.insert("bidirected".into(), pairs(&self.bidirected));
        Value::Object(obj)
    }

    pub fn from_json(v: &Value) -> Result<Self, GraphError> {
        let obj = v
            .as_object()
            .ok_or_else(|| GraphError::BadJson("expected object".into()))?;
        let nodes = obj
            .get("nodes")
            .and_then(Value::as_array)
            .ok_or_else(|| GraphError::BadJson("missing `nodes`".into()))?;
        let mut node_list = Vec::new();
        for n in nodes {
            let id = n
                .get("id")
                .and_then(Value::as_str)
                .ok_or_else(|| GraphError::BadJson("node without `id`".into()))?;
            let kind = match n.get("kind").and_then(Value::as_str) {
                Some("input") => NodeKind::Input,
                Some("observed") => NodeKind::Observed,
                Some("latent") => NodeKind::Latent,
                other => {
                    return Err(GraphError::BadJson(format!(
                        "bad node kind {other:?} for `{id}`"
                    )))
                }
            };
            node_list.push((NodeId::from(id), kind));
        }
        let pairs = |key: &str| -> Result<Vec<(NodeId, NodeId)>, GraphError> {
            match obj.get(key) {
                None => Ok(Vec::new()),
                Some(v) => v
                    .as_array()
                    .ok_or_else(|| GraphError::BadJson(format!("`{key}` must be an array")))?
                    .iter()
                    .map(|p| {
                        let p = p
                            .as_array()
                            .filter(|p| p.len() == 2)
                            .ok_or_else(|| GraphError::BadJson("edge must be a pair".into()))?;
                        Ok((
                            NodeId::from(p[0].as_str().ok_or_else(|| {
                                GraphError::BadJson("edge endpoint must be a string".into())
                            })?),
                            NodeId::from(p[1].as_str().ok_or_else(|| {
                                GraphError::BadJson("edge endpoint must be a string".into())
                            })?),
                        ))
                    })
                    .collect(),
            }
        };
        MixedGraph::new(node_list, pairs("directed")?, pairs("bidirected")?)
    }
}

/// Marginalizes the latent nodes out of a latent DAG, producing a mixed
/// graph over the inputs and observed nodes.
///
/// A directed edge `a → b` survives iff there is a directed path from `a`
/// to `b` whose interior nodes are all latent; a bidirected edge `a ↔ b`
/// appears iff some latent node reaches both `a` and `b` through directed
/// paths with latent interiors.
pub fn latent_project(g: &MixedGraph) -> Result<MixedGraph, GraphError> {
    if !g.bidirected.is_empty() && !g.latents().is_empty() {
        return Err(GraphError::LatentWithBidirected);
    }
    if !g.bidirected.is_empty() {
        // Already latent-free: nothing to project.
        return Ok(g.clone());
    }
    let latents = g.latents();
    // Non-latent nodes reachable from `start`'s children through latent-only
    // interiors.
    let reach = |start: &NodeId| -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<NodeId> = g.children(start).into_iter().collect();
        while let Some(n) = queue.pop_front() {
            if !seen.insert(n.clone()) {
                continue;
            }
            if latents.contains(&n) {
                queue.extend(g.children(&n));
            } else {
                out.insert(n);
            }
        }
        out
    };
    let keep: BTreeSet<NodeId> = g
        .nodes
        .keys()
        .filter(|n| !latents.contains(*n))
        .cloned()
        .collect();
    let mut directed = Vec::new();
    for a in &keep {
        for b in reach(a) {
            directed.push((a.clone(), b.clone()));
        }
    }
    let mut bidirected = Vec::new();
    for l in &latents {
        let r: Vec<NodeId> = reach(l).into_iter().collect();
        for i in 0..r.len() {
            for j in i + 1..r.len() {
                bidirected.push((r[i].clone(), r[j].clone()));
            }
        }
    }
    MixedGraph::new(
        keep.iter()
            .map(|n| (n.clone(), g.nodes[n]))
            .collect(),
        directed,
        bidirected,
    )
}

/// Turns the nodes of `a_set` into inputs, deleting every edge with an
/// arrowhead at them; outgoing directed edges are kept.
pub fn manipulate_hard(g: &MixedGraph, a_set: &BTreeSet<NodeId>) -> Result<MixedGraph, GraphError> {
    g.check_known(a_set)?;
    for n in a_set {
        if g.kind(n) == Some(NodeKind::Latent) {
            return Err(GraphError::LatentManipulated(n.0.clone()));
        }
    }
    let targets: BTreeSet<&NodeId> = a_set
        .iter()
        .filter(|n| g.kind(n) == Some(NodeKind::Observed))
        .collect();
    let nodes = g
        .nodes
        .iter()
        .map(|(n, k)| {
            let k = if targets.contains(n) { NodeKind::Input } else { *k };
            (n.clone(), k)
        })
        .collect();
    let directed = g
        .directed
        .iter()
        .filter(|(_, h)| !targets.contains(h))
        .cloned()
        .collect();
    let bidirected = g
        .bidirected
        .iter()
        .filter(|(a, b)| !targets.contains(a) && !targets.contains(b))
        .cloned()
        .collect();
    MixedGraph::new(nodes, directed, bidirected)
}

/// The fresh input id used by soft manipulation for node `a`.
pub fn soft_input_id(a: &NodeId) -> NodeId {
    NodeId(format!("I_{}", a.0))
}

/// Adds a fresh input node `I_a` with an edge `I_a → a` for every node in
/// `a_set`; nothing else changes.
pub fn manipulate_soft(g: &MixedGraph, a_set: &BTreeSet<NodeId>) -> Result<MixedGraph, GraphError> {
    g.check_known(a_set)?;
    let mut nodes: Vec<(NodeId, NodeKind)> =
        g.nodes.iter().map(|(n, k)| (n.clone(), *k)).collect();
    let mut directed: Vec<(NodeId, NodeId)> = g.directed.iter().cloned().collect();
    for a in a_set {
        if g.kind(a) != Some(NodeKind::Observed) {
            return Err(GraphError::NotObserved(a.0.clone()));
        }
        let ia = soft_input_id(a);
        if g.contains(&ia) {
            return Err(GraphError::NameCollision(ia.0));
        }
        nodes.push((ia.clone(), NodeKind::Input));
        directed.push((ia, a.clone()));
    }
    MixedGraph::new(
        nodes,
        directed,
        g.bidirected.iter().cloned().collect(),
    )
}

/// Ancestor/descendant closures, districts and a deterministic topological
/// order, computed once for a graph.
#[derive(Debug, Clone)]
pub struct StructuralReport {
    pub ancestors: BTreeMap<NodeId, BTreeSet<NodeId>>,
    pub descendants: BTreeMap<NodeId, BTreeSet<NodeId>>,
    pub districts: Vec<BTreeSet<NodeId>>,
    pub topo_order: Vec<NodeId>,
}

pub fn structural(g: &MixedGraph) -> StructuralReport {
    StructuralReport {
        ancestors: g
            .nodes
            .keys()
            .map(|n| (n.clone(), g.ancestors(n)))
            .collect(),
        descendants: g
            .nodes
            .keys()
            .map(|n| (n.clone(), g.descendants(n)))
            .collect(),
        districts: g.districts(),
        topo_order: g.topological_order().expect("graph invariant: acyclic"),
    }
}

/// Endpoint mark of an edge at a node while walking a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Mark {
    Arrowhead,
    Tail,
}

/// Tests whether every path from a node in `a` to a node in `b` or to any
/// input node of `g` is blocked by `c`.
///
/// Blocking follows the usual collider rule: a path is blocked iff it has a
/// non-collider in `c` (endpoints count as non-colliders) or a collider
/// none of whose descendants is in `c`. The one-node path from a node in
/// both `a` and the target set is blocked iff that node is in `c`.
pub fn id_separated(
    g: &MixedGraph,
    a: &BTreeSet<NodeId>,
    b: &BTreeSet<NodeId>,
    c: &BTreeSet<NodeId>,
) -> Result<bool, GraphError> {
    g.check_known(a)?;
    g.check_known(b)?;
    g.check_known(c)?;
    if let Some(l) = g.latents().into_iter().next() {
        return Err(GraphError::LatentPresent(l.0));
    }
    let mut targets: BTreeSet<NodeId> = b.clone();
    targets.extend(g.inputs());

    // Colliders stay open when a descendant is conditioned on.
    let opens_collider: BTreeSet<NodeId> = g
        .nodes
        .keys()
        .filter(|n| g.descendants(n).iter().any(|d| c.contains(d)))
        .cloned()
        .collect();

    // Walk states: (node, mark of the incoming edge at that node). An
    // active walk exists iff an active path exists.
    let mut visited: BTreeSet<(NodeId, Mark)> = BTreeSet::new();
    let mut queue: VecDeque<(NodeId, Mark)> = VecDeque::new();

    for start in a {
        if c.contains(start) {
            continue; // endpoint in the conditioning set blocks every path
        }
        if targets.contains(start) {
            return Ok(false); // unblocked trivial path
        }
        for ch in g.children(start) {
            queue.push_back((ch, Mark::Arrowhead));
        }
        for pa in g.parents(start) {
            queue.push_back((pa, Mark::Tail));
        }
        for sp in g.spouses(start) {
            queue.push_back((sp, Mark::Arrowhead));
        }
    }

    while let Some((n, mark)) = queue.pop_front() {
        if !visited.insert((n.clone(), mark)) {
            continue;
        }
        if targets.contains(&n) && !c.contains(&n) {
            return Ok(false);
        }
        // Continue the walk through `n`.
        let mut push = |next: NodeId, out_mark_at_n: Mark, mark_at_next: Mark| {
            let is_collider = mark == Mark::Arrowhead && out_mark_at_n == Mark::Arrowhead;
            let passable = if is_collider {
                opens_collider.contains(&n)
            } else {
                !c.contains(&n)
            };
            if passable {
                queue.push_back((next, mark_at_next));
            }
        };
        for ch in g.children(&n) {
            push(ch, Mark::Tail, Mark::Arrowhead);
        }
        for pa in g.parents(&n) {
            push(pa, Mark::Arrowhead, Mark::Tail);
        }
        for sp in g.spouses(&n) {
            push(sp, Mark::Arrowhead, Mark::Arrowhead);
        }
    }
    Ok(true)
}

/// A node is fixable iff its district intersects its descendants in `{r}`
/// only.
pub fn fixable(g: &MixedGraph, r: &NodeId) -> Result<bool, GraphError> {
    let district = g.district_of(r)?;
    let de = g.descendants(r);
    Ok(district.intersection(&de).eq([r]))
}

/// Fixes `r`: hard manipulation restricted to fixable nodes.
pub fn fix_graph(g: &MixedGraph, r: &NodeId) -> Result<MixedGraph, GraphError> {
    if !fixable(g, r)? {
        return Err(GraphError::NotFixable(r.0.clone()));
    }
    manipulate_hard(g, &BTreeSet::from([r.clone()]))
}

/// Outcome of iteratively fixing the complement of a node set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reachability {
    NotReachable,
    /// Reachable, but the remainder is not a single district.
    ReachableOnly { order: Vec<NodeId> },
    /// Reachable and a single district in the resulting graph.
    Intrinsic { order: Vec<NodeId> },
}

impl Reachability {
    pub fn order(&self) -> Option<&[NodeId]> {
        match self {
            Reachability::NotReachable => None,
            Reachability::ReachableOnly { order } | Reachability::Intrinsic { order } => {
                Some(order)
            }
        }
    }

    pub fn is_intrinsic(&self) -> bool {
        matches!(self, Reachability::Intrinsic { .. })
    }
}

/// Greedily fixes the observed nodes outside `d`, repeatedly taking the
/// smallest currently fixable one. Success is order-independent, so the
/// greedy strategy decides reachability; `d` is intrinsic iff it is
/// additionally a single district afterwards.
pub fn reachable_intrinsic(
    g: &MixedGraph,
    d: &BTreeSet<NodeId>,
) -> Result<Reachability, GraphError> {
    if let Some(l) = g.latents().into_iter().next() {
        return Err(GraphError::LatentPresent(l.0));
    }
    for n in d {
        if g.kind(n) != Some(NodeKind::Observed) {
            return Err(GraphError::NotObserved(n.0.clone()));
        }
    }
    let mut current = g.clone();
    let mut remaining: BTreeSet<NodeId> = g.observed().difference(d).cloned().collect();
    let mut order = Vec::new();
    while !remaining.is_empty() {
        let next = remaining
            .iter()
            .find(|r| fixable(&current, r).unwrap_or(false))
            .cloned();
        match next {
            Some(r) => {
                current = fix_graph(&current, &r)?;
                remaining.remove(&r);
                order.push(r);
            }
            None => return Ok(Reachability::NotReachable),
        }
    }
    let districts = current.districts();
    let intrinsic = districts.len() == 1 && &districts[0] == d;
    Ok(if intrinsic {
        Reachability::Intrinsic { order }
    } else {
        Reachability::ReachableOnly { order }
    })
}
