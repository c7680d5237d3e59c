//! Maximal-weight spanning forest of wg(H) under single-hyperedge changes.
//!
//! The forest is maintained so that for every node `e` and every non-empty
//! node set `A`, at most two incident forest edges share exactly `A` with
//! `e`. This caps every forest degree at `2r` (`r = 2^a_max - 1`), which is
//! what keeps the per-change diff constant: a hyperedge insertion runs one
//! stage per distinct shared set (largest first) and touches at most two
//! edges per stage, a deletion removes the at most `2r` incident edges and
//! reconnects the split parts with at most one maximum-weight crossing edge
//! each.
//!
//! Comparing the forest weight with the hypergraph weight decides
//! α-acyclicity, and while the hypergraph is acyclic the forest is a join
//! forest, which is what the homomorphism engine consumes.
//!
//! Callers keep the hypergraph and the forest in lockstep: insert into the
//! hypergraph first, then [`MaxSpanningForest::insert_hyperedge`]; delete
//! from the hypergraph first, then [`MaxSpanningForest::delete_hyperedge`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::hypergraph::{Hyperedge, Hypergraph, HypergraphError, NodeSet, Schema};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForestError {
    #[error("hyperedge is already a forest node")]
    NodeAlreadyInForest,
    #[error("hyperedge missing from the hypergraph")]
    HyperedgeMissingFromHypergraph,
    #[error("hyperedge is not a forest node")]
    NodeNotInForest,
    #[error("hyperedges are not in the same forest component")]
    NotSameComponent,
    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),
}

/// An undirected forest edge between two hyperedges. Endpoints are stored in
/// canonical order; the weight is the size of the shared node set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ForestEdge {
    a: Hyperedge,
    b: Hyperedge,
    shared: NodeSet,
}

impl ForestEdge {
    pub fn new(x: Hyperedge, y: Hyperedge, shared: NodeSet) -> Self {
        debug_assert!(!shared.is_empty());
        if x <= y {
            ForestEdge { a: x, b: y, shared }
        } else {
            ForestEdge { a: y, b: x, shared }
        }
    }

    pub fn endpoints(&self) -> (&Hyperedge, &Hyperedge) {
        (&self.a, &self.b)
    }

    pub fn shared(&self) -> &NodeSet {
        &self.shared
    }

    pub fn weight(&self) -> usize {
        self.shared.len()
    }
}

/// Forest edges removed and added by one hyperedge change, in processing
/// order. The two lists never overlap and their combined size is at most
/// `4r`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiffEvent {
    pub removed: Vec<ForestEdge>,
    pub added: Vec<ForestEdge>,
}

impl DiffEvent {
    pub fn size(&self) -> usize {
        self.removed.len() + self.added.len()
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }
}

/// Acyclicity test result: the hypergraph is acyclic exactly when its weight
/// matches the forest weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcyclicityVerdict {
    pub acyclic: bool,
    pub hypergraph_weight: u64,
    pub forest_weight: u64,
}

/// A single-hyperedge change, used for trial runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryChange {
    Insert(Hyperedge),
    Delete(Hyperedge),
}

/// Maximal-weight spanning forest of wg(H) with per-(node, shared-set)
/// degree bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxSpanningForest {
    r: usize,
    nodes: BTreeSet<Hyperedge>,
    adj: BTreeMap<Hyperedge, BTreeMap<Hyperedge, NodeSet>>,
    total_weight: u64,
}

impl MaxSpanningForest {
    pub fn new(schema: &Schema) -> Self {
        MaxSpanningForest {
            r: schema.r(),
            nodes: BTreeSet::new(),
            adj: BTreeMap::new(),
            total_weight: 0,
        }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains_node(&self, e: &Hyperedge) -> bool {
        self.nodes.contains(e)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Hyperedge> {
        self.nodes.iter()
    }

    /// Forest neighbours of `e` with the shared set of each forest edge.
    pub fn neighbors(&self, e: &Hyperedge) -> Option<&BTreeMap<Hyperedge, NodeSet>> {
        self.adj.get(e)
    }

    /// All forest edges in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = ForestEdge> + '_ {
        self.adj.iter().flat_map(|(u, nbrs)| {
            nbrs.iter()
                .filter(move |(v, _)| u < *v)
                .map(move |(v, shared)| ForestEdge::new(u.clone(), v.clone(), shared.clone()))
        })
    }

    /// Number of forest edges at `e` whose shared set is exactly `a_set`.
    pub fn a_degree(&self, e: &Hyperedge, a_set: &NodeSet) -> usize {
        self.adj
            .get(e)
            .map(|nbrs| nbrs.values().filter(|s| *s == a_set).count())
            .unwrap_or(0)
    }

    fn add_edge(&mut self, x: Hyperedge, y: Hyperedge, shared: NodeSet) -> ForestEdge {
        let edge = ForestEdge::new(x.clone(), y.clone(), shared.clone());
        self.total_weight += shared.len() as u64;
        self.adj
            .entry(x.clone())
            .or_default()
            .insert(y.clone(), shared.clone());
        self.adj.entry(y).or_default().insert(x, shared);
        edge
    }

    fn remove_edge(&mut self, edge: &ForestEdge) {
        let (a, b) = edge.endpoints();
        self.adj.get_mut(a).unwrap().remove(b);
        self.adj.get_mut(b).unwrap().remove(a);
        self.total_weight -= edge.weight() as u64;
    }

    fn bfs_parents(&self, start: &Hyperedge) -> BTreeMap<Hyperedge, Option<Hyperedge>> {
        let mut parents = BTreeMap::new();
        parents.insert(start.clone(), None);
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(u) = queue.pop_front() {
            if let Some(nbrs) = self.adj.get(&u) {
                for v in nbrs.keys() {
                    if !parents.contains_key(v) {
                        parents.insert(v.clone(), Some(u.clone()));
                        queue.push_back(v.clone());
                    }
                }
            }
        }
        parents
    }

    /// The unique forest path from `s` to `t`, endpoints included.
    pub fn path(&self, s: &Hyperedge, t: &Hyperedge) -> Option<Vec<Hyperedge>> {
        let parents = self.bfs_parents(s);
        parents.contains_key(t).then(|| {
            let mut path = vec![t.clone()];
            let mut cur = t;
            while let Some(Some(p)) = parents.get(cur) {
                path.push(p.clone());
                cur = path.last().unwrap();
            }
            path.reverse();
            path
        })
    }

    pub fn same_component(&self, a: &Hyperedge, b: &Hyperedge) -> bool {
        a == b || self.bfs_parents(a).contains_key(b)
    }

    pub fn component_nodes(&self, e: &Hyperedge) -> Vec<Hyperedge> {
        self.bfs_parents(e).into_keys().collect()
    }

    /// All components, each listed in canonical node order.
    pub fn components(&self) -> Vec<Vec<Hyperedge>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for e in &self.nodes {
            if seen.contains(e) {
                continue;
            }
            let comp = self.component_nodes(e);
            seen.extend(comp.iter().cloned());
            out.push(comp);
        }
        out
    }

    /// Inserts hyperedge `e` (already present in `h`) as a forest node and
    /// restores maximality in stages, one per distinct shared set of its
    /// wg-neighbourhood, largest sets first.
    pub fn insert_hyperedge(
        &mut self,
        h: &Hypergraph,
        e: &Hyperedge,
    ) -> Result<DiffEvent, ForestError> {
        if self.nodes.contains(e) {
            return Err(ForestError::NodeAlreadyInForest);
        }
        if !h.contains(e) {
            return Err(ForestError::HyperedgeMissingFromHypergraph);
        }
        let mut by_shared: BTreeMap<NodeSet, Vec<Hyperedge>> = BTreeMap::new();
        for (n, shared) in h.wg_neighbors(e)? {
            by_shared.entry(shared).or_default().push(n);
        }
        self.nodes.insert(e.clone());
        self.adj.entry(e.clone()).or_default();

        let mut stages: Vec<NodeSet> = by_shared.keys().cloned().collect();
        stages.sort_by(|x, y| y.len().cmp(&x.len()).then_with(|| x.cmp(y)));

        let mut diff = DiffEvent::default();
        for a_set in stages {
            let neighbours = &by_shared[&a_set];
            if !self.same_component(e, &neighbours[0]) {
                // e is outside the component of its A-neighbours: attach it
                // to one whose A-degree leaves room under Invariant (*).
                let target = neighbours
                    .iter()
                    .find(|n| self.a_degree(n, &a_set) <= 1)
                    .expect("a forest component always has an A-neighbour of A-degree <= 1");
                diff.added
                    .push(self.add_edge(e.clone(), target.clone(), a_set.clone()));
            } else {
                // e is already connected: swapping in an A-edge pays off only
                // if some path edge is strictly lighter than |A|.
                let mut best: Option<(usize, Hyperedge, ForestEdge)> = None;
                for n in neighbours {
                    if self.a_degree(n, &a_set) > 1 {
                        continue;
                    }
                    let path = self.path(e, n).expect("same component");
                    let min_edge = path
                        .windows(2)
                        .map(|w| {
                            let shared = self.adj[&w[0]][&w[1]].clone();
                            ForestEdge::new(w[0].clone(), w[1].clone(), shared)
                        })
                        .min_by(|x, y| x.weight().cmp(&y.weight()).then_with(|| x.cmp(y)))
                        .expect("path has at least one edge");
                    let candidate = (min_edge.weight(), n.clone(), min_edge);
                    if best.as_ref().is_none_or(|b| candidate < *b) {
                        best = Some(candidate);
                    }
                }
                if let Some((w, n, edge)) = best {
                    if w < a_set.len() {
                        self.remove_edge(&edge);
                        diff.removed.push(edge);
                        diff.added.push(self.add_edge(e.clone(), n, a_set.clone()));
                    }
                }
            }
        }
        debug_assert!(diff.size() <= 4 * self.r);
        Ok(diff)
    }

    /// Removes forest node `e` (normally already deleted from `h`), then
    /// reconnects the split parts greedily by maximum-weight crossing edges,
    /// substituting endpoints where Invariant (*) would be violated.
    pub fn delete_hyperedge(
        &mut self,
        h: &Hypergraph,
        e: &Hyperedge,
    ) -> Result<DiffEvent, ForestError> {
        if !self.nodes.contains(e) {
            return Err(ForestError::NodeNotInForest);
        }
        let former: Vec<(Hyperedge, NodeSet)> = self.adj[e]
            .iter()
            .map(|(v, s)| (v.clone(), s.clone()))
            .collect();
        let mut diff = DiffEvent::default();
        for (v, shared) in &former {
            let edge = ForestEdge::new(e.clone(), v.clone(), shared.clone());
            self.remove_edge(&edge);
            diff.removed.push(edge);
        }
        self.adj.remove(e);
        self.nodes.remove(e);

        if former.len() >= 2 {
            // each former neighbour roots its own part now
            let mut part_of: BTreeMap<Hyperedge, usize> = BTreeMap::new();
            for (i, (v, _)) in former.iter().enumerate() {
                for u in self.component_nodes(v) {
                    part_of.insert(u, i);
                }
            }
            loop {
                let mut best: Option<(usize, ForestEdge)> = None;
                for (u, &pu) in &part_of {
                    for (n, shared) in h.wg_neighbors(u)? {
                        if n == *e {
                            continue;
                        }
                        if let Some(&pn) = part_of.get(&n) {
                            if pn != pu {
                                let cand = ForestEdge::new(u.clone(), n, shared);
                                let better = match &best {
                                    None => true,
                                    Some((w, edge)) => {
                                        cand.weight() > *w || (cand.weight() == *w && cand < *edge)
                                    }
                                };
                                if better {
                                    best = Some((cand.weight(), cand));
                                }
                            }
                        }
                    }
                }
                let Some((_, cross)) = best else { break };
                let (u, v) = cross.endpoints();
                let a_set = cross.shared().clone();
                let u2 = self.low_a_degree_endpoint(u, &a_set);
                let v2 = self.low_a_degree_endpoint(v, &a_set);
                let shared = u2.shared_with(&v2);
                debug_assert_eq!(shared, a_set, "substitution must preserve the shared set");
                let keep = part_of[&u2];
                let drop = part_of[&v2];
                for p in part_of.values_mut() {
                    if *p == drop {
                        *p = keep;
                    }
                }
                diff.added.push(self.add_edge(u2, v2, shared));
            }
        }
        debug_assert!(diff.size() <= 4 * self.r);
        Ok(diff)
    }

    /// The endpoint to actually use for a reconnecting edge with shared set
    /// `a_set`: `start` itself if its A-degree is at most 1, otherwise a leaf
    /// of the exactly-A forest subgraph reachable from `start`.
    fn low_a_degree_endpoint(&self, start: &Hyperedge, a_set: &NodeSet) -> Hyperedge {
        if self.a_degree(start, a_set) <= 1 {
            return start.clone();
        }
        let mut seen = BTreeSet::from([start.clone()]);
        let mut queue = VecDeque::from([start.clone()]);
        let mut candidates = BTreeSet::new();
        while let Some(u) = queue.pop_front() {
            for (v, shared) in &self.adj[&u] {
                if shared == a_set && seen.insert(v.clone()) {
                    if self.a_degree(v, a_set) <= 1 {
                        candidates.insert(v.clone());
                    }
                    queue.push_back(v.clone());
                }
            }
        }
        candidates
            .into_iter()
            .next()
            .expect("the exactly-A subgraph is a tree and has a leaf")
    }

    /// Compares the hypergraph weight with the forest weight.
    pub fn acyclicity(&self, h: &Hypergraph) -> AcyclicityVerdict {
        let hypergraph_weight = h.weight();
        let forest_weight = self.total_weight;
        AcyclicityVerdict {
            acyclic: hypergraph_weight == forest_weight,
            hypergraph_weight,
            forest_weight,
        }
    }

    /// Trial-applies a change on scratch copies and reports whether the
    /// hypergraph would stay acyclic. Observable state is unchanged.
    pub fn would_stay_acyclic(
        &self,
        h: &Hypergraph,
        change: &QueryChange,
    ) -> Result<bool, ForestError> {
        let mut h2 = h.clone();
        let mut f2 = self.clone();
        match change {
            QueryChange::Insert(e) => {
                h2.insert_edge(e)?;
                f2.insert_hyperedge(&h2, e)?;
            }
            QueryChange::Delete(e) => {
                h2.delete_edge(e)?;
                f2.delete_hyperedge(&h2, e)?;
            }
        }
        Ok(f2.acyclicity(&h2).acyclic)
    }

    /// True iff `s` and `t` are in one component and `u` lies on the unique
    /// path between them, endpoints included.
    pub fn on_path(
        &self,
        s: &Hyperedge,
        t: &Hyperedge,
        u: &Hyperedge,
    ) -> Result<bool, ForestError> {
        for x in [s, t, u] {
            if !self.nodes.contains(x) {
                return Err(ForestError::NodeNotInForest);
            }
        }
        Ok(self.path(s, t).is_some_and(|p| p.contains(u)))
    }

    /// Lowest common ancestor of `a` and `b` in the component rooted at
    /// `root`: the unique node on all three pairwise paths.
    pub fn lca(
        &self,
        root: &Hyperedge,
        a: &Hyperedge,
        b: &Hyperedge,
    ) -> Result<Hyperedge, ForestError> {
        for x in [root, a, b] {
            if !self.nodes.contains(x) {
                return Err(ForestError::NodeNotInForest);
            }
        }
        let pa = self.path(root, a).ok_or(ForestError::NotSameComponent)?;
        let pb = self.path(root, b).ok_or(ForestError::NotSameComponent)?;
        pa.iter()
            .zip(pb.iter())
            .take_while(|(x, y)| x == y)
            .last()
            .map(|(x, _)| x.clone())
            .ok_or(ForestError::NotSameComponent)
    }

    /// True iff `b` is in the subtree rooted at `a` when the component is
    /// rooted at `root`; equivalently, `a` lies on the path from `root` to
    /// `b`. Reflexive in `b = a`.
    pub fn subtree_contains(
        &self,
        root: &Hyperedge,
        a: &Hyperedge,
        b: &Hyperedge,
    ) -> Result<bool, ForestError> {
        if !self.same_component(root, a) || !self.same_component(root, b) {
            return Err(ForestError::NotSameComponent);
        }
        self.on_path(root, b, a)
    }

    /// Text snapshot: one `F` line per forest edge, optionally followed by
    /// the full `P` path relation (every on-path triple) for small forests.
    pub fn snapshot(&self, schema: &Schema, emit_paths: bool) -> String {
        let mut out = String::new();
        for edge in self.edges() {
            let (a, b) = edge.endpoints();
            out.push_str(&format!(
                "F {} {} {}\n",
                schema.edge_label(a),
                schema.edge_label(b),
                edge.weight()
            ));
        }
        if emit_paths {
            for comp in self.components() {
                for s in &comp {
                    for t in &comp {
                        let path = self.path(s, t).expect("same component");
                        for u in &comp {
                            if path.contains(u) {
                                out.push_str(&format!(
                                    "P {} {} {}\n",
                                    schema.edge_label(s),
                                    schema.edge_label(t),
                                    schema.edge_label(u)
                                ));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}
