//! Causal Bayesian networks with latent and input nodes.
//!
//! A [`LiCbn`] couples a latent DAG with one finite space per node and one
//! exact mechanism kernel per non-input node. The observable kernel is the
//! product of the mechanisms in reverse topological order with the latent
//! coordinates marginalized out. Hard interventions delete mechanisms and
//! produce the interventional observable kernel, which serves as the
//! ground-truth oracle for every identification check in this crate.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde_json::Value;
use thiserror::Error;

use crate::graph::{
    latent_project, manipulate_hard, manipulate_soft, soft_input_id, GraphError, MixedGraph,
    NodeId, NodeKind,
};
use crate::kernel::{FiniteKernel, FiniteSpace, KernelError, Rational, Var, STAR};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("node `{0}` has no space")]
    MissingSpace(String),
    #[error("non-input node `{0}` has no mechanism")]
    MissingMechanism(String),
    #[error("input node `{0}` must not have a mechanism")]
    InputWithMechanism(String),
    #[error("mechanism of `{node}` must be a kernel from the parents' space to the node's space: {reason}")]
    BadMechanism { node: String, reason: String },
    #[error("intervention set contains non-observed node `{0}`")]
    NotObserved(String),
    #[error("malformed model JSON: {0}")]
    BadJson(String),
}

/// A causal Bayesian network over a latent DAG with input nodes.
///
/// Immutable after construction; all operations return new models. The
/// interventional oracle is memoized per intervention set, since sweeps
/// ask for the same truncated factorization many times.
#[derive(Debug)]
pub struct LiCbn {
    graph: MixedGraph,
    spaces: BTreeMap<NodeId, Vec<String>>,
    mechanisms: BTreeMap<NodeId, FiniteKernel>,
    oracle_cache: std::sync::Mutex<BTreeMap<BTreeSet<NodeId>, FiniteKernel>>,
}

impl Clone for LiCbn {
    fn clone(&self) -> Self {
        LiCbn {
            graph: self.graph.clone(),
            spaces: self.spaces.clone(),
            mechanisms: self.mechanisms.clone(),
            oracle_cache: std::sync::Mutex::new(BTreeMap::new()),
        }
    }
}

impl PartialEq for LiCbn {
    fn eq(&self, other: &Self) -> bool {
        self.graph == other.graph
            && self.spaces == other.spaces
            && self.mechanisms == other.mechanisms
    }
}

impl LiCbn {
    pub fn new(
        graph: MixedGraph,
        spaces: BTreeMap<NodeId, Vec<String>>,
        mechanisms: BTreeMap<NodeId, FiniteKernel>,
    ) -> Result<Self, ModelError> {
        for (node, _) in graph.nodes() {
            if !spaces.contains_key(node) {
                return Err(ModelError::MissingSpace(node.0.clone()));
            }
        }
        for node in spaces.keys() {
            if !graph.contains(node) {
                return Err(ModelError::Graph(GraphError::UnknownNode(node.0.clone())));
            }
        }
        let model = LiCbn {
            graph,
            spaces,
            mechanisms,
            oracle_cache: std::sync::Mutex::new(BTreeMap::new()),
        };
        for (node, kind) in model.graph.nodes() {
            match kind {
                NodeKind::Input => {
                    if model.mechanisms.contains_key(node) {
                        return Err(ModelError::InputWithMechanism(node.0.clone()));
                    }
                }
                NodeKind::Observed | NodeKind::Latent => {
                    let mech = model
                        .mechanisms
                        .get(node)
                        .ok_or_else(|| ModelError::MissingMechanism(node.0.clone()))?;
                    let want_src: BTreeSet<String> = model
                        .graph
                        .parents(node)
                        .iter()
                        .map(|p| p.0.clone())
                        .collect();
                    if mech.source().var_ids() != want_src {
                        return Err(ModelError::BadMechanism {
                            node: node.0.clone(),
                            reason: format!(
                                "source variables {:?} do not match parents {:?}",
                                mech.source().var_ids(),
                                want_src
                            ),
                        });
                    }
                    let tvars = mech.target().vars();
                    if tvars.len() != 1 || tvars[0].id != node.0 {
                        return Err(ModelError::BadMechanism {
                            node: node.0.clone(),
                            reason: "target must be exactly the node's own variable".into(),
                        });
                    }
                    for v in mech.source().vars().iter().chain(tvars) {
                        let node_id = NodeId::new(v.id.clone());
                        let space = model
                            .spaces
                            .get(&node_id)
                            .ok_or_else(|| ModelError::MissingSpace(v.id.clone()))?;
                        if space != &v.domain {
                            return Err(ModelError::BadMechanism {
                                node: node.0.clone(),
                                reason: format!("domain mismatch on `{}`", v.id),
                            });
                        }
                    }
                }
            }
        }
        Ok(model)
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.graph
    }

    pub fn space(&self, node: &NodeId) -> Option<&Vec<String>> {
        self.spaces.get(node)
    }

    pub fn mechanism(&self, node: &NodeId) -> Option<&FiniteKernel> {
        self.mechanisms.get(node)
    }

    /// The observable graph: latent projection of the model's graph.
    pub fn projected_graph(&self) -> Result<MixedGraph, GraphError> {
        latent_project(&self.graph)
    }

    fn var(&self, node: &NodeId) -> Var {
        Var {
            id: node.0.clone(),
            domain: self.spaces[node].clone(),
        }
    }

    /// The observable kernel: joint law of the observed variables given the
    /// inputs, with latents summed out. Exact; rows sum to one.
    pub fn observable_kernel(&self) -> Result<FiniteKernel, ModelError> {
        let order = self
            .graph
            .topological_order()
            .expect("graph invariant: acyclic");
        // Fold the mechanisms innermost-first: roots first, later nodes read
        // their parents from the accumulated target.
        let mut acc: Option<FiniteKernel> = None;
        for node in order {
            if self.graph.kind(&node) == Some(NodeKind::Input) {
                continue;
            }
            let mech = &self.mechanisms[&node];
            acc = Some(match acc {
                None => mech.clone(),
                Some(inner) => mech.product(&inner)?,
            });
        }
        let observed: BTreeSet<String> =
            self.graph.observed().iter().map(|n| n.0.clone()).collect();
        let joint = match acc {
            Some(k) => k,
            None => {
                // No stochastic nodes at all: the kernel to the one-point space.
                let src: Vec<Var> = self.graph.inputs().iter().map(|n| self.var(n)).collect();
                let source = FiniteSpace::new_with_star(src)?;
                let mass = vec![num::one(); source.size()];
                FiniteKernel::new(source, FiniteSpace::point_space(), mass)?
            }
        };
        let marg = joint.marginalize(&observed)?;
        // Inputs that no mechanism reads still belong to the source signature.
        let mut missing: Vec<Var> = Vec::new();
        for i in self.graph.inputs() {
            if marg.source().var(&i.0).is_none() {
                missing.push(self.var(&i));
            }
        }
        let widened = if missing.is_empty() {
            marg
        } else {
            let mut vars = marg.source().vars().to_vec();
            vars.extend(missing);
            let source = FiniteSpace::new_with_star(vars)?;
            let tsize = marg.target().size();
            let mut mass = Vec::with_capacity(source.size() * tsize);
            for s in 0..source.size() {
                let sc = source.point(s);
                let old: Vec<usize> = marg
                    .source()
                    .vars()
                    .iter()
                    .map(|v| sc[source.index_of_var(&v.id).unwrap()])
                    .collect();
                let so = marg.source().index(&old);
                for t in 0..tsize {
                    mass.push(marg.get(so, t).clone());
                }
            }
            FiniteKernel::new(source, marg.target().clone(), mass)?
        };
        Ok(widened.canonical())
    }

    /// Hard intervention: the graph is hard-manipulated and the mechanisms of
    /// the intervened nodes are removed; spaces are preserved.
    pub fn intervene_hard(&self, a_set: &BTreeSet<NodeId>) -> Result<LiCbn, ModelError> {
        for n in a_set {
            if self.graph.kind(n) != Some(NodeKind::Observed) {
                return Err(ModelError::NotObserved(n.0.clone()));
            }
        }
        let graph = manipulate_hard(&self.graph, a_set)?;
        let mechanisms = self
            .mechanisms
            .iter()
            .filter(|(n, _)| !a_set.contains(n))
            .map(|(n, k)| (n.clone(), k.clone()))
            .collect();
        LiCbn::new(graph, self.spaces.clone(), mechanisms)
    }

    /// Soft intervention: adds an input `I_a` with domain `X_a ∪ {⋆}` per
    /// intervened node; the new mechanism passes the old one through on `⋆`
    /// and is a point mass otherwise.
    pub fn intervene_soft(&self, a_set: &BTreeSet<NodeId>) -> Result<LiCbn, ModelError> {
        for n in a_set {
            if self.graph.kind(n) != Some(NodeKind::Observed) {
                return Err(ModelError::NotObserved(n.0.clone()));
            }
        }
        let graph = manipulate_soft(&self.graph, a_set)?;
        let mut spaces = self.spaces.clone();
        let mut mechanisms = self.mechanisms.clone();
        for a in a_set {
            let ia = soft_input_id(a);
            let mut ia_domain = self.spaces[a].clone();
            ia_domain.push(STAR.to_string());
            spaces.insert(ia.clone(), ia_domain.clone());

            let old = &self.mechanisms[a];
            let mut svars = old.source().vars().to_vec();
            svars.push(Var {
                id: ia.0.clone(),
                domain: ia_domain.clone(),
            });
            let source = FiniteSpace::new_with_star(svars)?;
            let target = old.target().clone();
            let tsize = target.size();
            let star_idx = ia_domain.len() - 1;
            let ia_pos = source.index_of_var(&ia.0).unwrap();
            let mut mass = Vec::with_capacity(source.size() * tsize);
            for s in 0..source.size() {
                let sc = source.point(s);
                let forced = sc[ia_pos];
                if forced == star_idx {
                    let old_coords: Vec<usize> = old
                        .source()
                        .vars()
                        .iter()
                        .map(|v| sc[source.index_of_var(&v.id).unwrap()])
                        .collect();
                    let so = old.source().index(&old_coords);
                    for t in 0..tsize {
                        mass.push(old.get(so, t).clone());
                    }
                } else {
                    for t in 0..tsize {
                        mass.push(if t == forced { num::one() } else { num::zero() });
                    }
                }
            }
            mechanisms.insert(a.clone(), FiniteKernel::new(source, target, mass)?);
        }
        LiCbn::new(graph, spaces, mechanisms)
    }

    /// Interventional observable kernel: the ground-truth oracle
    /// `P(X_{V∖A} ‖ X_I, do(X_A))`, computed by truncated factorization
    /// and memoized per intervention set.
    pub fn oracle_do(&self, a_set: &BTreeSet<NodeId>) -> Result<FiniteKernel, ModelError> {
        if let Some(hit) = self.oracle_cache.lock().unwrap().get(a_set) {
            return Ok(hit.clone());
        }
        let kernel = self.intervene_hard(a_set)?.observable_kernel()?;
        self.oracle_cache
            .lock()
            .unwrap()
            .insert(a_set.clone(), kernel.clone());
        Ok(kernel)
    }

    /// The kernel `Q[D] = P(X_D ‖ do(X_{V∖D}), X_I)` for `D` observed.
    pub fn q_factor_oracle(&self, d: &BTreeSet<NodeId>) -> Result<FiniteKernel, ModelError> {
        for n in d {
            if self.graph.kind(n) != Some(NodeKind::Observed) {
                return Err(ModelError::NotObserved(n.0.clone()));
            }
        }
        let rest: BTreeSet<NodeId> = self.graph.observed().difference(d).cloned().collect();
        self.oracle_do(&rest)
    }

    pub fn to_json(&self) -> Value {
        let mut spaces = serde_json::Map::new();
        for (n, dom) in &self.spaces {
            spaces.insert(
                n.0.clone(),
                Value::Array(dom.iter().map(|s| Value::String(s.clone())).collect()),
            );
        }
        let mut mechs = serde_json::Map::new();
        for (n, k) in &self.mechanisms {
            mechs.insert(n.0.clone(), k.to_json());
        }
        let mut obj = serde_json::Map::new();
        obj.insert("graph".into(), self.graph.to_json());
        obj.insert("spaces".into(), Value::Object(spaces));
        obj.insert("mechanisms".into(), Value::Object(mechs));
        Value::Object(obj)
    }

    pub fn from_json(v: &Value) -> Result<LiCbn, ModelError> {
        let obj = v
            .as_object()
            .ok_or_else(|| ModelError::BadJson("expected object".into()))?;
        let graph = MixedGraph::from_json(
            obj.get("graph")
                .ok_or_else(|| ModelError::BadJson("missing `graph`".into()))?,
        )?;
        let mut spaces = BTreeMap::new();
        for (n, dom) in obj
            .get("spaces")
            .and_then(Value::as_object)
            .ok_or_else(|| ModelError::BadJson("missing `spaces`".into()))?
        {
            let dom = dom
                .as_array()
                .ok_or_else(|| ModelError::BadJson(format!("space of `{n}` must be an array")))?
                .iter()
                .map(|s| {
                    s.as_str()
                        .map(String::from)
                        .ok_or_else(|| ModelError::BadJson("symbols must be strings".into()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            spaces.insert(NodeId::new(n.clone()), dom);
        }
        let mut mechanisms = BTreeMap::new();
        if let Some(mechs) = obj.get("mechanisms").and_then(Value::as_object) {
            for (n, k) in mechs {
                mechanisms.insert(NodeId::new(n.clone()), FiniteKernel::from_json(k)?);
            }
        }
        LiCbn::new(graph, spaces, mechanisms)
    }
}

/// Shape of a randomly generated model.
#[derive(Debug, Clone)]
pub struct RandomModelCfg {
    pub n_observed: usize,
    pub n_latent: usize,
    pub n_input: usize,
    /// Domain sizes are drawn from this list.
    pub domain_sizes: Vec<usize>,
    /// Probability (out of 100) of each forward edge.
    pub edge_percent: u32,
    /// Force every conditional mass to be at least 1/12.
    pub strictly_positive: bool,
}

impl Default for RandomModelCfg {
    fn default() -> Self {
        RandomModelCfg {
            n_observed: 3,
            n_latent: 1,
            n_input: 0,
            domain_sizes: vec![2, 3],
            edge_percent: 50,
            strictly_positive: true,
        }
    }
}

/// Draws a random model: a random DAG of the requested shape with exact
/// rational conditional tables. Each row is a composition of 12 into the
/// domain size, so entries have denominator 12 and the strictly positive
/// variant has every entry at least 1/12.
pub fn random_licbn<R: Rng>(rng: &mut R, cfg: &RandomModelCfg) -> LiCbn {
    let mut nodes: Vec<(NodeId, NodeKind)> = Vec::new();
    for i in 0..cfg.n_input {
        nodes.push((NodeId::new(format!("i{i}")), NodeKind::Input));
    }
    // Observed and latent nodes are interleaved in one random topological
    // order after the inputs.
    let mut rest: Vec<(NodeId, NodeKind)> = (0..cfg.n_observed)
        .map(|i| (NodeId::new(format!("v{i}")), NodeKind::Observed))
        .chain((0..cfg.n_latent).map(|i| (NodeId::new(format!("u{i}")), NodeKind::Latent)))
        .collect();
    for i in (1..rest.len()).rev() {
        rest.swap(i, rng.gen_range(0..=i));
    }
    nodes.extend(rest);

    let mut directed = Vec::new();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if nodes[j].1 == NodeKind::Input {
                continue;
            }
            if rng.gen_range(0..100) < cfg.edge_percent {
                directed.push((nodes[i].0.clone(), nodes[j].0.clone()));
            }
        }
    }
    let graph = MixedGraph::new(nodes.clone(), directed, Vec::new()).expect("generated DAG");

    let mut spaces: BTreeMap<NodeId, Vec<String>> = BTreeMap::new();
    for (n, _) in &nodes {
        let size = cfg.domain_sizes[rng.gen_range(0..cfg.domain_sizes.len())];
        spaces.insert(n.clone(), (0..size).map(|i| i.to_string()).collect());
    }
    let mut mechanisms = BTreeMap::new();
    for (n, kind) in &nodes {
        if *kind == NodeKind::Input {
            continue;
        }
        let parents = graph.parents(n);
        let svars: Vec<Var> = parents
            .iter()
            .map(|p| Var {
                id: p.0.clone(),
                domain: spaces[p].clone(),
            })
            .collect();
        let source = FiniteSpace::new(svars).unwrap();
        let target = FiniteSpace::new(vec![Var {
            id: n.0.clone(),
            domain: spaces[n].clone(),
        }])
        .unwrap();
        let k = target.size();
        let mut mass = Vec::with_capacity(source.size() * k);
        for _ in 0..source.size() {
            mass.extend(random_row(rng, k, cfg.strictly_positive));
        }
        mechanisms.insert(n.clone(), FiniteKernel::new(source, target, mass).unwrap());
    }
    LiCbn::new(graph, spaces, mechanisms).expect("generated model")
}

/// A random composition of 12 into `k` parts, as rationals summing to one.
fn random_row<R: Rng>(rng: &mut R, k: usize, strict: bool) -> Vec<Rational> {
    assert!(k <= 12);
    let total = 12u32;
    let mut parts = vec![if strict { 1u32 } else { 0 }; k];
    let mut left = total - parts.iter().sum::<u32>();
    while left > 0 {
        parts[rng.gen_range(0..k)] += 1;
        left -= 1;
    }
    parts
        .into_iter()
        .map(|p| Rational::new(p.into(), total.into()))
        .collect()
}

/// Builds the canonical latent model of a latent-free mixed graph: one fresh
/// latent parent per bidirected edge, random exact mechanisms everywhere.
pub fn canonical_latent_model<R: Rng>(
    admg: &MixedGraph,
    rng: &mut R,
    domain_size: usize,
    strictly_positive: bool,
) -> LiCbn {
    assert!(admg.latents().is_empty(), "graph must be latent-free");
    let mut nodes: Vec<(NodeId, NodeKind)> = admg.nodes().map(|(n, k)| (n.clone(), k)).collect();
    let mut directed: Vec<(NodeId, NodeId)> = admg.directed_edges().iter().cloned().collect();
    for (a, b) in admg.bidirected_edges() {
        let u = NodeId::new(format!("u_{}_{}", a.0, b.0));
        nodes.push((u.clone(), NodeKind::Latent));
        directed.push((u.clone(), a.clone()));
        directed.push((u, b.clone()));
    }
    let graph = MixedGraph::new(nodes.clone(), directed, Vec::new()).expect("canonical DAG");
    let mut spaces: BTreeMap<NodeId, Vec<String>> = BTreeMap::new();
    for (n, _) in &nodes {
        spaces.insert(n.clone(), (0..domain_size).map(|i| i.to_string()).collect());
    }
    let mut mechanisms = BTreeMap::new();
    for (n, kind) in &nodes {
        if *kind == NodeKind::Input {
            continue;
        }
        let svars: Vec<Var> = graph
            .parents(n)
            .iter()
            .map(|p| Var {
                id: p.0.clone(),
                domain: spaces[p].clone(),
            })
            .collect();
        let source = FiniteSpace::new(svars).unwrap();
        let target = FiniteSpace::new(vec![Var {
            id: n.0.clone(),
            domain: spaces[n].clone(),
        }])
        .unwrap();
        let k = target.size();
        let mut mass = Vec::with_capacity(source.size() * k);
        for _ in 0..source.size() {
            mass.extend(random_row(rng, k, strictly_positive));
        }
        mechanisms.insert(n.clone(), FiniteKernel::new(source, target, mass).unwrap());
    }
    LiCbn::new(graph, spaces, mechanisms).expect("canonical model")
}
