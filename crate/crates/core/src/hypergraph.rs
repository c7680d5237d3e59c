//! Hypergraphs over a fixed relational schema.
//!
//! A hypergraph here is a relational structure: each relation symbol holds a
//! set of tuples over an ordered node domain `0..n`, and each stored tuple is
//! a labelled hyperedge. Two tuples over the same node set are distinct
//! hyperedges. The module also provides the weight function and local probes
//! into the weighted hyperedge graph wg(H), whose vertices are the hyperedges
//! and whose edge weights count shared nodes; wg(H) is never materialized.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

/// Errors raised by schema construction and hypergraph changes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HypergraphError {
    #[error("schema must declare at least one relation")]
    EmptySchema,
    #[error("duplicate relation name `{0}`")]
    DuplicateRelation(String),
    #[error("relation `{0}` must have arity >= 1")]
    ZeroArity(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("arity mismatch for `{rel}`: expected {expected}, got {got}")]
    ArityMismatch {
        rel: String,
        expected: usize,
        got: usize,
    },
    #[error("node {0} outside the declared domain of size {1}")]
    NodeOutOfDomain(u32, usize),
    #[error("edge already present: {0}")]
    DuplicateEdge(String),
    #[error("edge not present: {0}")]
    EdgeNotPresent(String),
}

/// Index of a relation symbol within its schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelId(pub usize);

/// A node of the ordered domain `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// A set of nodes, ordered by the domain order.
pub type NodeSet = BTreeSet<NodeId>;

#[derive(Debug, Clone, PartialEq, Eq)]
struct RelDecl {
    name: String,
    arity: usize,
}

/// A fixed relational schema: relation symbols with arities.
///
/// `a_max` is the maximum declared arity and `r = 2^a_max - 1` counts the
/// non-empty node sets a single hyperedge can share with another; the
/// spanning-forest degree bounds are stated in terms of `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    rels: Vec<RelDecl>,
    a_max: usize,
}

impl Schema {
    pub fn new(relations: Vec<(String, usize)>) -> Result<Self, HypergraphError> {
        if relations.is_empty() {
            return Err(HypergraphError::EmptySchema);
        }
        let mut seen = BTreeSet::new();
        let mut rels = Vec::with_capacity(relations.len());
        for (name, arity) in relations {
            if arity == 0 {
                return Err(HypergraphError::ZeroArity(name));
            }
            if !seen.insert(name.clone()) {
                return Err(HypergraphError::DuplicateRelation(name));
            }
            rels.push(RelDecl { name, arity });
        }
        let a_max = rels.iter().map(|r| r.arity).max().unwrap();
        Ok(Schema { rels, a_max })
    }

    pub fn a_max(&self) -> usize {
        self.a_max
    }

    /// `2^a_max - 1`, the number of non-empty subsets of a largest hyperedge.
    pub fn r(&self) -> usize {
        (1usize << self.a_max) - 1
    }

    pub fn rel_count(&self) -> usize {
        self.rels.len()
    }

    pub fn rel_ids(&self) -> impl Iterator<Item = RelId> {
        (0..self.rels.len()).map(RelId)
    }

    pub fn rel_id(&self, name: &str) -> Option<RelId> {
        self.rels.iter().position(|r| r.name == name).map(RelId)
    }

    pub fn name(&self, rel: RelId) -> &str {
        &self.rels[rel.0].name
    }

    pub fn arity(&self, rel: RelId) -> usize {
        self.rels[rel.0].arity
    }

    pub fn declarations(&self) -> impl Iterator<Item = (&str, usize)> {
        self.rels.iter().map(|r| (r.name.as_str(), r.arity))
    }

    /// Renders a hyperedge as `name(n1,n2,...)`.
    pub fn edge_label(&self, e: &Hyperedge) -> String {
        format!("{}({})", self.name(e.rel), render_tuple(&e.tuple))
    }

    /// Renders a bare tuple as `(n1,n2,...)`.
    pub fn tuple_label(tuple: &[NodeId]) -> String {
        format!("({})", render_tuple(tuple))
    }
}

fn render_tuple(tuple: &[NodeId]) -> String {
    tuple
        .iter()
        .map(|n| n.0.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// A labelled hyperedge: a relation symbol plus a tuple of its declared arity.
///
/// The set of distinct nodes in the tuple may be smaller than the arity.
/// Ordering is relation order first, then lexicographic tuple order; this is
/// the deterministic hyperedge order used everywhere.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hyperedge {
    pub rel: RelId,
    pub tuple: Vec<NodeId>,
}

impl Hyperedge {
    pub fn new(rel: RelId, tuple: Vec<NodeId>) -> Self {
        Hyperedge { rel, tuple }
    }

    /// The set of distinct nodes occurring in the tuple.
    pub fn node_set(&self) -> NodeSet {
        self.tuple.iter().copied().collect()
    }

    /// Nodes this hyperedge has in common with another.
    pub fn shared_with(&self, other: &Hyperedge) -> NodeSet {
        let own = self.node_set();
        other
            .tuple
            .iter()
            .copied()
            .filter(|n| own.contains(n))
            .collect()
    }
}

/// The set of nodes two distinct hyperedges have in common; its size is the
/// weight of the wg edge between them.
pub fn shared_set(e1: &Hyperedge, e2: &Hyperedge) -> NodeSet {
    e1.shared_with(e2)
}

/// A hypergraph over a schema: per-relation tuple sets with degree
/// bookkeeping over a fixed node domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    schema: Arc<Schema>,
    domain_size: usize,
    edges: Vec<BTreeSet<Vec<NodeId>>>,
    degree: Vec<u32>,
    incident: Vec<BTreeSet<Hyperedge>>,
}

impl Hypergraph {
    pub fn new(schema: Arc<Schema>, domain_size: usize) -> Self {
        let rel_count = schema.rel_count();
        Hypergraph {
            schema,
            domain_size,
            edges: vec![BTreeSet::new(); rel_count],
            degree: vec![0; domain_size],
            incident: vec![BTreeSet::new(); domain_size],
        }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    fn check_well_formed(&self, e: &Hyperedge) -> Result<(), HypergraphError> {
        if e.rel.0 >= self.schema.rel_count() {
            return Err(HypergraphError::UnknownRelation(format!("#{}", e.rel.0)));
        }
        let expected = self.schema.arity(e.rel);
        if e.tuple.len() != expected {
            return Err(HypergraphError::ArityMismatch {
                rel: self.schema.name(e.rel).to_string(),
                expected,
                got: e.tuple.len(),
            });
        }
        for n in &e.tuple {
            if n.0 as usize >= self.domain_size {
                return Err(HypergraphError::NodeOutOfDomain(n.0, self.domain_size));
            }
        }
        Ok(())
    }

    pub fn insert_edge(&mut self, e: &Hyperedge) -> Result<(), HypergraphError> {
        self.check_well_formed(e)?;
        if self.edges[e.rel.0].contains(&e.tuple) {
            return Err(HypergraphError::DuplicateEdge(self.schema.edge_label(e)));
        }
        self.edges[e.rel.0].insert(e.tuple.clone());
        for n in e.node_set() {
            self.degree[n.0 as usize] += 1;
            self.incident[n.0 as usize].insert(e.clone());
        }
        Ok(())
    }

    pub fn delete_edge(&mut self, e: &Hyperedge) -> Result<(), HypergraphError> {
        self.check_well_formed(e)?;
        if !self.edges[e.rel.0].remove(&e.tuple) {
            return Err(HypergraphError::EdgeNotPresent(self.schema.edge_label(e)));
        }
        for n in e.node_set() {
            self.degree[n.0 as usize] -= 1;
            self.incident[n.0 as usize].remove(e);
        }
        Ok(())
    }

    pub fn contains(&self, e: &Hyperedge) -> bool {
        e.rel.0 < self.edges.len() && self.edges[e.rel.0].contains(&e.tuple)
    }

    pub fn degree(&self, v: NodeId) -> u32 {
        self.degree[v.0 as usize]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_count() == 0
    }

    /// True if some declared node occurs in no hyperedge.
    pub fn has_isolated_node(&self) -> bool {
        self.degree.contains(&0)
    }

    /// All hyperedges in deterministic order (relation order, then
    /// lexicographic tuple order).
    pub fn edges_iter(&self) -> impl Iterator<Item = Hyperedge> + '_ {
        self.edges.iter().enumerate().flat_map(|(rel, tuples)| {
            tuples
                .iter()
                .map(move |t| Hyperedge::new(RelId(rel), t.clone()))
        })
    }

    pub fn tuples(&self, rel: RelId) -> &BTreeSet<Vec<NodeId>> {
        &self.edges[rel.0]
    }

    /// Sum over non-isolated nodes of (degree - 1). Equals the weight of a
    /// maximal-weight spanning forest of wg(H) exactly when H is acyclic.
    pub fn weight(&self) -> u64 {
        self.degree
            .iter()
            .filter(|&&d| d >= 1)
            .map(|&d| (d - 1) as u64)
            .sum()
    }

    /// All wg(H) neighbours of `e`: hyperedges sharing at least one node,
    /// paired with the shared set, in deterministic order.
    pub fn wg_neighbors(
        &self,
        e: &Hyperedge,
    ) -> Result<Vec<(Hyperedge, NodeSet)>, HypergraphError> {
        if !self.contains(e) {
            return Err(HypergraphError::EdgeNotPresent(self.schema.edge_label(e)));
        }
        let mut out: BTreeMap<Hyperedge, NodeSet> = BTreeMap::new();
        for n in e.node_set() {
            for other in &self.incident[n.0 as usize] {
                if other != e && !out.contains_key(other) {
                    out.insert(other.clone(), e.shared_with(other));
                }
            }
        }
        Ok(out.into_iter().collect())
    }
}
