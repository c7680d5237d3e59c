//! Homomorphism existence from a query hypergraph into a data hypergraph,
//! maintained under join-forest edge diffs and data-side changes.
//!
//! Per directed forest edge `u -> v` the engine stores the set of image
//! tuples for `u` that extend to a homomorphism of the whole subtree hanging
//! off `u` when the edge is cut. These semijoin messages are kept at their
//! fixpoint by dirty propagation: a structural or data change recomputes the
//! messages pointing away from it until values stop changing. Subtree
//! assignment queries (`valid_assignments`) and the pinned variant down to a
//! descendant (`h_query`) are evaluated on demand from the same messages.
//!
//! The engine keeps its own copy of the forest adjacency, updated edge by
//! edge from each [`DiffEvent`]; the query hypergraph and the data index are
//! the only other inputs. Both are treated as already updated when a diff is
//! applied.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::hypergraph::{Hyperedge, Hypergraph, NodeId, RelId, Schema};
use crate::msf::{DiffEvent, MaxSpanningForest};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("the query hypergraph is not acyclic")]
    NotAcyclic,
    #[error("diff does not match the tracked forest: {0}")]
    DiffInconsistentWithForest(String),
    #[error("hyperedges are not in the same forest component")]
    NotSameComponent,
    #[error("hyperedge is not a descendant under the given root")]
    NotDescendant,
    #[error("image tuple is malformed: {0}")]
    MalformedImage(String),
    #[error("query has more than one hyperedge over the relation")]
    SelfJoinPresent,
    #[error("arity mismatch for `{rel}`: expected {expected}, got {got}")]
    ArityMismatch {
        rel: String,
        expected: usize,
        got: usize,
    },
    #[error("element {0} outside the data domain of size {1}")]
    ElementOutOfDomain(u32, usize),
    #[error("tuple already present")]
    DuplicateTuple,
    #[error("tuple not present")]
    TupleNotPresent,
}

/// The data hypergraph as a tuple index: per-relation tuple sets over its own
/// element domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataIndex {
    schema: Arc<Schema>,
    domain_size: usize,
    tuples: Vec<BTreeSet<Vec<NodeId>>>,
}

impl DataIndex {
    pub fn new(schema: Arc<Schema>, domain_size: usize) -> Self {
        let rel_count = schema.rel_count();
        DataIndex {
            schema,
            domain_size,
            tuples: vec![BTreeSet::new(); rel_count],
        }
    }

    pub fn from_hypergraph(h: &Hypergraph) -> Self {
        let mut d = DataIndex::new(h.schema().clone(), h.domain_size());
        for e in h.edges_iter() {
            d.tuples[e.rel.0].insert(e.tuple);
        }
        d
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn tuples(&self, rel: RelId) -> &BTreeSet<Vec<NodeId>> {
        &self.tuples[rel.0]
    }

    pub fn contains(&self, rel: RelId, tuple: &[NodeId]) -> bool {
        self.tuples[rel.0].contains(tuple)
    }

    pub fn tuple_count(&self) -> usize {
        self.tuples.iter().map(|s| s.len()).sum()
    }

    fn check_tuple(&self, rel: RelId, tuple: &[NodeId]) -> Result<(), EngineError> {
        let expected = self.schema.arity(rel);
        if tuple.len() != expected {
            return Err(EngineError::ArityMismatch {
                rel: self.schema.name(rel).to_string(),
                expected,
                got: tuple.len(),
            });
        }
        for n in tuple {
            if n.0 as usize >= self.domain_size {
                return Err(EngineError::ElementOutOfDomain(n.0, self.domain_size));
            }
        }
        Ok(())
    }

    pub fn insert_tuple(&mut self, rel: RelId, tuple: Vec<NodeId>) -> Result<(), EngineError> {
        self.check_tuple(rel, &tuple)?;
        if !self.tuples[rel.0].insert(tuple) {
            return Err(EngineError::DuplicateTuple);
        }
        Ok(())
    }

    pub fn delete_tuple(&mut self, rel: RelId, tuple: &[NodeId]) -> Result<(), EngineError> {
        self.check_tuple(rel, tuple)?;
        if !self.tuples[rel.0].remove(tuple) {
            return Err(EngineError::TupleNotPresent);
        }
        Ok(())
    }

    pub fn replace_relation(
        &mut self,
        rel: RelId,
        tuples: BTreeSet<Vec<NodeId>>,
    ) -> Result<(), EngineError> {
        for t in &tuples {
            self.check_tuple(rel, t)?;
        }
        self.tuples[rel.0] = tuples;
        Ok(())
    }
}

/// Insertion or deletion of a single data tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataChange {
    Insert,
    Delete,
}

type Message = BTreeSet<Vec<NodeId>>;

/// Shared-position pairs plus the projection of the incoming message onto
/// them; one per constraining neighbour.
type Constraint = (Vec<(usize, usize)>, HashSet<Vec<NodeId>>);

/// Maintained engine state: the data index, the directed semijoin messages
/// and the current answer bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineState {
    data: DataIndex,
    msgs: BTreeMap<(Hyperedge, Hyperedge), Message>,
    nbrs: BTreeMap<Hyperedge, BTreeSet<Hyperedge>>,
    answer: bool,
}

impl EngineState {
    /// Builds the full message fixpoint for an acyclic query over its join
    /// forest, two tree passes per component.
    pub fn attach(
        q: &Hypergraph,
        forest: &MaxSpanningForest,
        data: DataIndex,
    ) -> Result<Self, EngineError> {
        debug_assert_eq!(q.schema().as_ref(), data.schema().as_ref());
        if !forest.acyclicity(q).acyclic {
            return Err(EngineError::NotAcyclic);
        }
        let mut nbrs: BTreeMap<Hyperedge, BTreeSet<Hyperedge>> = BTreeMap::new();
        for edge in forest.edges() {
            let (a, b) = edge.endpoints();
            nbrs.entry(a.clone()).or_default().insert(b.clone());
            nbrs.entry(b.clone()).or_default().insert(a.clone());
        }
        let mut state = EngineState {
            data,
            msgs: BTreeMap::new(),
            nbrs,
            answer: true,
        };
        state.recompute_all();
        state.answer = state.compute_answer(q);
        Ok(state)
    }

    pub fn answer(&self) -> bool {
        self.answer
    }

    pub fn data(&self) -> &DataIndex {
        &self.data
    }

    /// The raw message store, keyed by directed forest edge.
    pub fn messages(&self) -> &BTreeMap<(Hyperedge, Hyperedge), Message> {
        &self.msgs
    }

    fn neighbor_set(&self, e: &Hyperedge) -> impl Iterator<Item = &Hyperedge> {
        self.nbrs.get(e).into_iter().flatten()
    }

    /// Data tuples that match the hyperedge pattern (repeated query nodes
    /// carry equal elements), in lexicographic order.
    fn candidates<'a>(&'a self, e: &'a Hyperedge) -> impl Iterator<Item = &'a Vec<NodeId>> {
        self.data
            .tuples(e.rel)
            .iter()
            .filter(move |t| pattern_consistent(e, t))
    }

    /// One (position-in-u, position-in-v) pair per shared query node.
    fn shared_positions(u: &Hyperedge, v: &Hyperedge) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, node) in u.tuple.iter().enumerate() {
            if seen.insert(*node) {
                if let Some(j) = v.tuple.iter().position(|m| m == node) {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Recomputes M(from -> to) from the data index and the incoming
    /// messages of `from` except the one from `to`.
    fn compute_message(&self, from: &Hyperedge, to: &Hyperedge) -> Message {
        let constraints: Vec<Constraint> = self
            .neighbor_set(from)
            .filter(|n| *n != to)
            .map(|n| self.projection_constraint(from, n))
            .collect();
        self.filter_by_constraints(from, &constraints)
    }

    /// Projects M(n -> at) onto the positions `at` shares with `n`, for O(1)
    /// agreement lookups.
    fn projection_constraint(&self, at: &Hyperedge, n: &Hyperedge) -> Constraint {
        let pairs = Self::shared_positions(at, n);
        let msg = self
            .msgs
            .get(&(n.clone(), at.clone()))
            .expect("incoming message must exist at fixpoint");
        let proj = msg
            .iter()
            .map(|b| pairs.iter().map(|&(_, j)| b[j]).collect())
            .collect();
        (pairs, proj)
    }

    fn filter_by_constraints(&self, at: &Hyperedge, constraints: &[Constraint]) -> Message {
        self.candidates(at)
            .filter(|t| {
                constraints.iter().all(|(pairs, proj)| {
                    let key: Vec<NodeId> = pairs.iter().map(|&(i, _)| t[i]).collect();
                    proj.contains(&key)
                })
            })
            .cloned()
            .collect()
    }

    /// Assignments for `x` compatible with every incoming message except the
    /// one from `exclude`.
    fn valid_set(&self, x: &Hyperedge, exclude: Option<&Hyperedge>) -> Message {
        let constraints: Vec<_> = self
            .neighbor_set(x)
            .filter(|n| Some(*n) != exclude)
            .map(|n| self.projection_constraint(x, n))
            .collect();
        self.filter_by_constraints(x, &constraints)
    }

    fn recompute_all(&mut self) {
        self.msgs.clear();
        let roots: Vec<Hyperedge> = {
            let mut seen = BTreeSet::new();
            let mut roots = Vec::new();
            for e in self.nbrs.keys() {
                if !seen.contains(e) {
                    seen.extend(self.component_of(e));
                    roots.push(e.clone());
                }
            }
            roots
        };
        for root in roots {
            let order = self.dfs_order(&root);
            for (node, parent) in order.iter().rev() {
                if let Some(p) = parent {
                    let msg = self.compute_message(node, p);
                    self.msgs.insert((node.clone(), p.clone()), msg);
                }
            }
            for (node, parent) in &order {
                if let Some(p) = parent {
                    let msg = self.compute_message(p, node);
                    self.msgs.insert((p.clone(), node.clone()), msg);
                }
            }
        }
    }

    /// Preorder over the component of `root` with each node's parent.
    fn dfs_order(&self, root: &Hyperedge) -> Vec<(Hyperedge, Option<Hyperedge>)> {
        let mut order = Vec::new();
        let mut seen = BTreeSet::from([root.clone()]);
        let mut stack = vec![(root.clone(), None)];
        while let Some((node, parent)) = stack.pop() {
            for n in self.neighbor_set(&node) {
                if seen.insert(n.clone()) {
                    stack.push((n.clone(), Some(node.clone())));
                }
            }
            order.push((node, parent));
        }
        order
    }

    fn component_of(&self, start: &Hyperedge) -> Vec<Hyperedge> {
        let mut seen = BTreeSet::from([start.clone()]);
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(u) = queue.pop_front() {
            for n in self.neighbor_set(&u) {
                if seen.insert(n.clone()) {
                    queue.push_back(n.clone());
                }
            }
        }
        seen.into_iter().collect()
    }

    /// BFS parent map over the engine's forest adjacency.
    fn bfs_parents(&self, start: &Hyperedge) -> BTreeMap<Hyperedge, Option<Hyperedge>> {
        let mut parents = BTreeMap::new();
        parents.insert(start.clone(), None);
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(u) = queue.pop_front() {
            for n in self.neighbor_set(&u) {
                if !parents.contains_key(n) {
                    parents.insert(n.clone(), Some(u.clone()));
                    queue.push_back(n.clone());
                }
            }
        }
        parents
    }

    fn path(&self, s: &Hyperedge, t: &Hyperedge) -> Option<Vec<Hyperedge>> {
        let parents = self.bfs_parents(s);
        parents.contains_key(t).then(|| {
            let mut path = vec![t.clone()];
            while let Some(Some(p)) = parents.get(path.last().unwrap()) {
                path.push(p.clone());
            }
            path.reverse();
            path
        })
    }

    /// Recomputes messages reachable from the seeds until values stop
    /// changing. Message dependencies point strictly outward on a forest, so
    /// this terminates.
    fn propagate(&mut self, seeds: Vec<(Hyperedge, Hyperedge)>) {
        let mut queue: VecDeque<(Hyperedge, Hyperedge)> = seeds.into();
        while let Some((u, v)) = queue.pop_front() {
            if !self.msgs.contains_key(&(u.clone(), v.clone())) {
                continue; // stale seed, edge is gone
            }
            let new = self.compute_message(&u, &v);
            if self.msgs.get(&(u.clone(), v.clone())) != Some(&new) {
                self.msgs.insert((u.clone(), v.clone()), new);
                for w in self.neighbor_set(&v).cloned().collect::<Vec<_>>() {
                    if w != u {
                        queue.push_back((v.clone(), w));
                    }
                }
            }
        }
    }

    fn outgoing_seeds(&self, x: &Hyperedge) -> Vec<(Hyperedge, Hyperedge)> {
        self.neighbor_set(x)
            .map(|v| (x.clone(), v.clone()))
            .collect()
    }

    /// Applies a forest diff edge by edge: removals first, then additions,
    /// restoring the message fixpoint after each edge, then refreshes the
    /// answer bit. `q` must already reflect the change that produced the
    /// diff.
    pub fn apply_forest_diff(
        &mut self,
        q: &Hypergraph,
        diff: &DiffEvent,
    ) -> Result<(), EngineError> {
        for edge in &diff.removed {
            let (x, y) = edge.endpoints();
            let fwd = (x.clone(), y.clone());
            let bwd = (y.clone(), x.clone());
            if !self.msgs.contains_key(&fwd) || !self.msgs.contains_key(&bwd) {
                return Err(EngineError::DiffInconsistentWithForest(format!(
                    "removed edge not tracked: {} -- {}",
                    q.schema().edge_label(x),
                    q.schema().edge_label(y)
                )));
            }
            self.msgs.remove(&fwd);
            self.msgs.remove(&bwd);
            self.unlink(x, y);
            let mut seeds = self.outgoing_seeds(x);
            seeds.extend(self.outgoing_seeds(y));
            self.propagate(seeds);
        }
        for edge in &diff.added {
            let (x, y) = edge.endpoints();
            if self.msgs.contains_key(&(x.clone(), y.clone())) {
                return Err(EngineError::DiffInconsistentWithForest(format!(
                    "added edge already tracked: {} -- {}",
                    q.schema().edge_label(x),
                    q.schema().edge_label(y)
                )));
            }
            if !q.contains(x) || !q.contains(y) {
                return Err(EngineError::DiffInconsistentWithForest(
                    "added edge endpoint missing from the query".to_string(),
                ));
            }
            // both fresh messages see the pre-link neighbour sets
            let to_x = self.compute_message(y, x);
            let to_y = self.compute_message(x, y);
            self.nbrs.entry(x.clone()).or_default().insert(y.clone());
            self.nbrs.entry(y.clone()).or_default().insert(x.clone());
            self.msgs.insert((y.clone(), x.clone()), to_x);
            self.msgs.insert((x.clone(), y.clone()), to_y);
            let mut seeds: Vec<(Hyperedge, Hyperedge)> = self
                .neighbor_set(x)
                .filter(|v| *v != y)
                .map(|v| (x.clone(), v.clone()))
                .collect();
            seeds.extend(
                self.neighbor_set(y)
                    .filter(|v| *v != x)
                    .map(|v| (y.clone(), v.clone())),
            );
            self.propagate(seeds);
        }
        self.answer = self.compute_answer(q);
        Ok(())
    }

    fn unlink(&mut self, x: &Hyperedge, y: &Hyperedge) {
        for (a, b) in [(x, y), (y, x)] {
            if let Some(set) = self.nbrs.get_mut(a) {
                set.remove(b);
                if set.is_empty() {
                    self.nbrs.remove(a);
                }
            }
        }
    }

    fn compute_answer(&self, q: &Hypergraph) -> bool {
        // isolated query nodes still need some element to map to
        if self.data.domain_size() == 0 && q.domain_size() > 0 && q.has_isolated_node() {
            return false;
        }
        let mut seen: BTreeSet<Hyperedge> = BTreeSet::new();
        for e in q.edges_iter() {
            if seen.contains(&e) {
                continue;
            }
            let comp = self.component_of(&e);
            let rep = comp.first().expect("component contains its start");
            if self.valid_set(rep, None).is_empty() {
                return false;
            }
            seen.extend(comp);
        }
        true
    }

    /// The assignments for `x` that extend to a homomorphism of the subtree
    /// of `x` when its component is rooted at `root`.
    pub fn valid_assignments(
        &self,
        q: &Hypergraph,
        root: &Hyperedge,
        x: &Hyperedge,
    ) -> Result<Message, EngineError> {
        if !q.contains(root) || !q.contains(x) {
            return Err(EngineError::NotSameComponent);
        }
        let parents = self.bfs_parents(root);
        let Some(parent) = parents.get(x) else {
            return Err(EngineError::NotSameComponent);
        };
        Ok(self.valid_set(x, parent.as_ref()))
    }

    /// Image tuples `y1` for `x1` such that the hyperedges in
    /// `subtree(x1) \ subtree(x2)` (under `root`) admit a homomorphism
    /// pinning `x1 -> y1` and `x2 -> y2`. Messages along the `x1 ~> x2` path
    /// are re-evaluated with the pin; everything else uses the stored
    /// fixpoint.
    pub fn h_query(
        &self,
        q: &Hypergraph,
        root: &Hyperedge,
        x1: &Hyperedge,
        x2: &Hyperedge,
        y2: &[NodeId],
    ) -> Result<Message, EngineError> {
        if !q.contains(root) || !q.contains(x1) || !q.contains(x2) {
            return Err(EngineError::NotSameComponent);
        }
        let Some(root_to_x2) = self.path(root, x2) else {
            return Err(EngineError::NotSameComponent);
        };
        if !self.bfs_parents(root).contains_key(x1) {
            return Err(EngineError::NotSameComponent);
        }
        // x2 in subtree(x1) under root means x1 lies on the root ~> x2 path
        let Some(x1_pos) = root_to_x2.iter().position(|e| e == x1) else {
            return Err(EngineError::NotDescendant);
        };
        if y2.len() != x2.tuple.len()
            || !pattern_consistent(x2, y2)
            || !self.data.contains(x2.rel, y2)
        {
            return Err(EngineError::MalformedImage(format!(
                "{} for {}",
                Schema::tuple_label(y2),
                q.schema().edge_label(x2)
            )));
        }
        if x1 == x2 {
            return Ok(BTreeSet::from([y2.to_vec()]));
        }
        let path = &root_to_x2[x1_pos..];
        // conditioned message climbing from the pin at x2 back up to x1
        let mut cond: Message = BTreeSet::from([y2.to_vec()]);
        for i in (0..path.len() - 1).rev() {
            let node = &path[i];
            let child = &path[i + 1];
            // the neighbour toward the root is the predecessor on the
            // root ~> x2 path
            let parent = if i > 0 {
                Some(path[i - 1].clone())
            } else if x1_pos > 0 {
                Some(root_to_x2[x1_pos - 1].clone())
            } else {
                None
            };
            let pairs = Self::shared_positions(node, child);
            let pinned_proj: HashSet<Vec<NodeId>> = cond
                .iter()
                .map(|b| pairs.iter().map(|&(_, j)| b[j]).collect())
                .collect();
            let mut constraints = vec![(pairs, pinned_proj)];
            for n in self.neighbor_set(node) {
                if n == child || Some(n) == parent.as_ref() {
                    continue;
                }
                constraints.push(self.projection_constraint(node, n));
            }
            cond = self.filter_by_constraints(node, &constraints);
        }
        Ok(cond)
    }

    /// Replaces one data relation wholesale. Requires the query to be
    /// self-join-free on that relation: at most one query hyperedge over it.
    pub fn replace_relation_d(
        &mut self,
        q: &Hypergraph,
        rel: RelId,
        tuples: BTreeSet<Vec<NodeId>>,
    ) -> Result<(), EngineError> {
        if q.tuples(rel).len() > 1 {
            return Err(EngineError::SelfJoinPresent);
        }
        self.data.replace_relation(rel, tuples)?;
        let mut seeds = Vec::new();
        for t in q.tuples(rel) {
            seeds.extend(self.outgoing_seeds(&Hyperedge::new(rel, t.clone())));
        }
        self.propagate(seeds);
        self.answer = self.compute_answer(q);
        Ok(())
    }

    /// Inserts or deletes a single data tuple and recomputes every message
    /// whose value can depend on the relation. Unlike whole-relation
    /// replacement this pays for one dirty propagation per query hyperedge
    /// over the relation.
    pub fn change_d_tuple(
        &mut self,
        q: &Hypergraph,
        op: DataChange,
        rel: RelId,
        tuple: Vec<NodeId>,
    ) -> Result<(), EngineError> {
        match op {
            DataChange::Insert => self.data.insert_tuple(rel, tuple)?,
            DataChange::Delete => self.data.delete_tuple(rel, &tuple)?,
        }
        let mut seeds = Vec::new();
        for t in q.tuples(rel) {
            seeds.extend(self.outgoing_seeds(&Hyperedge::new(rel, t.clone())));
        }
        self.propagate(seeds);
        self.answer = self.compute_answer(q);
        Ok(())
    }

    /// Full deterministic dump of messages and the answer bit, for snapshot
    /// comparison.
    pub fn state_lines(&self, schema: &Schema) -> String {
        let mut out = String::new();
        for ((from, to), msg) in &self.msgs {
            out.push_str(&format!(
                "M {} -> {} :",
                schema.edge_label(from),
                schema.edge_label(to)
            ));
            for t in msg {
                out.push(' ');
                out.push_str(&Schema::tuple_label(t));
            }
            out.push('\n');
        }
        out.push_str(if self.answer {
            "answer yes\n"
        } else {
            "answer no\n"
        });
        out
    }
}

/// Repeated query nodes must carry equal image elements.
fn pattern_consistent(e: &Hyperedge, image: &[NodeId]) -> bool {
    for i in 0..e.tuple.len() {
        for j in i + 1..e.tuple.len() {
            if e.tuple[i] == e.tuple[j] && image[i] != image[j] {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msf::QueryChange;
    use crate::oracle::brute_hom;
    use std::sync::Arc;

    fn schema_ef() -> Arc<Schema> {
        Arc::new(Schema::new(vec![("E".into(), 2), ("F".into(), 1)]).unwrap())
    }

    fn he(schema: &Schema, rel: &str, tuple: &[u32]) -> Hyperedge {
        Hyperedge::new(
            schema.rel_id(rel).unwrap(),
            tuple.iter().map(|&n| NodeId(n)).collect(),
        )
    }

    fn tup(t: &[u32]) -> Vec<NodeId> {
        t.iter().map(|&n| NodeId(n)).collect()
    }

    struct Fixture {
        q: Hypergraph,
        forest: MaxSpanningForest,
        engine: EngineState,
    }

    impl Fixture {
        fn new(schema: &Arc<Schema>, q_dom: usize, d: DataIndex) -> Self {
            let q = Hypergraph::new(schema.clone(), q_dom);
            let forest = MaxSpanningForest::new(schema);
            let engine = EngineState::attach(&q, &forest, d).unwrap();
            Fixture { q, forest, engine }
        }

        fn insq(&mut self, e: &Hyperedge) {
            self.q.insert_edge(e).unwrap();
            let diff = self.forest.insert_hyperedge(&self.q, e).unwrap();
            self.engine.apply_forest_diff(&self.q, &diff).unwrap();
        }

        fn delq(&mut self, e: &Hyperedge) {
            self.q.delete_edge(e).unwrap();
            let diff = self.forest.delete_hyperedge(&self.q, e).unwrap();
            self.engine.apply_forest_diff(&self.q, &diff).unwrap();
        }
    }

    fn chain_data(schema: &Arc<Schema>) -> DataIndex {
        let mut d = DataIndex::new(schema.clone(), 4);
        let rel = schema.rel_id("E").unwrap();
        d.insert_tuple(rel, tup(&[1, 2])).unwrap();
        d.insert_tuple(rel, tup(&[2, 3])).unwrap();
        d
    }

    #[test]
    fn attach_examples() {
        let schema = schema_ef();
        // empty query, no declared nodes: answer is true
        let fx = Fixture::new(&schema, 0, DataIndex::new(schema.clone(), 0));
        assert!(fx.engine.answer());

        let mut fx = Fixture::new(&schema, 3, chain_data(&schema));
        fx.insq(&he(&schema, "E", &[0, 1]));
        fx.insq(&he(&schema, "E", &[1, 2]));
        assert!(fx.engine.answer());

        let mut d = DataIndex::new(schema.clone(), 3);
        d.insert_tuple(schema.rel_id("E").unwrap(), tup(&[1, 2]))
            .unwrap();
        let mut fx = Fixture::new(&schema, 3, d);
        fx.insq(&he(&schema, "E", &[0, 1]));
        fx.insq(&he(&schema, "E", &[1, 2]));
        assert!(!fx.engine.answer());
    }

    #[test]
    fn attach_rejects_cyclic_query() {
        let schema = schema_ef();
        let mut q = Hypergraph::new(schema.clone(), 3);
        let mut forest = MaxSpanningForest::new(&schema);
        for t in [[0u32, 1], [1, 2], [0, 2]] {
            let e = he(&schema, "E", &t);
            q.insert_edge(&e).unwrap();
            forest.insert_hyperedge(&q, &e).unwrap();
        }
        let d = DataIndex::new(schema.clone(), 2);
        assert!(matches!(
            EngineState::attach(&q, &forest, d),
            Err(EngineError::NotAcyclic)
        ));
    }

    #[test]
    fn forest_diff_keeps_messages_current() {
        let schema = schema_ef();
        let mut fx = Fixture::new(&schema, 3, chain_data(&schema));
        let xy = he(&schema, "E", &[0, 1]);
        let yz = he(&schema, "E", &[1, 2]);
        fx.insq(&xy);
        let before = fx.engine.clone();
        fx.engine
            .apply_forest_diff(&fx.q, &DiffEvent::default())
            .unwrap();
        assert_eq!(fx.engine, before);

        fx.insq(&yz);
        assert!(fx.engine.answer());
        // the message from the leaf carries every matching tuple; filtering
        // against the far side happens where the message is consumed
        assert_eq!(
            fx.engine.messages()[&(yz.clone(), xy.clone())],
            BTreeSet::from([tup(&[1, 2]), tup(&[2, 3])])
        );
        assert_eq!(
            fx.engine.valid_assignments(&fx.q, &xy, &xy).unwrap(),
            BTreeSet::from([tup(&[1, 2])])
        );
        assert_eq!(
            fx.engine.valid_assignments(&fx.q, &yz, &yz).unwrap(),
            BTreeSet::from([tup(&[2, 3])])
        );

        fx.delq(&yz);
        assert!(fx.engine.answer());
        assert_eq!(
            fx.engine.valid_assignments(&fx.q, &xy, &xy).unwrap(),
            BTreeSet::from([tup(&[1, 2]), tup(&[2, 3])])
        );
    }

    #[test]
    fn scratch_recomputation_matches_incremental() {
        let schema = schema_ef();
        let mut fx = Fixture::new(&schema, 4, chain_data(&schema));
        for e in [
            he(&schema, "E", &[0, 1]),
            he(&schema, "E", &[1, 2]),
            he(&schema, "F", &[2]),
            he(&schema, "E", &[2, 3]),
        ] {
            fx.insq(&e);
            let scratch = EngineState::attach(&fx.q, &fx.forest, fx.engine.data().clone()).unwrap();
            assert_eq!(fx.engine, scratch);
        }
        fx.delq(&he(&schema, "E", &[1, 2]));
        let scratch = EngineState::attach(&fx.q, &fx.forest, fx.engine.data().clone()).unwrap();
        assert_eq!(fx.engine, scratch);
    }

    #[test]
    fn valid_assignments_on_chain() {
        let schema = schema_ef();
        let mut fx = Fixture::new(&schema, 3, chain_data(&schema));
        let xy = he(&schema, "E", &[0, 1]);
        let yz = he(&schema, "E", &[1, 2]);
        fx.insq(&xy);
        fx.insq(&yz);
        // leaf keeps all its matches, the root is constrained by the leaf
        assert_eq!(
            fx.engine.valid_assignments(&fx.q, &xy, &yz).unwrap(),
            BTreeSet::from([tup(&[1, 2]), tup(&[2, 3])])
        );
        assert_eq!(
            fx.engine.valid_assignments(&fx.q, &xy, &xy).unwrap(),
            BTreeSet::from([tup(&[1, 2])])
        );
    }

    #[test]
    fn valid_assignments_single_edge_and_empty_relation() {
        let schema = schema_ef();
        let mut d = DataIndex::new(schema.clone(), 3);
        d.insert_tuple(schema.rel_id("E").unwrap(), tup(&[1, 2]))
            .unwrap();
        let mut fx = Fixture::new(&schema, 3, d);
        let xy = he(&schema, "E", &[0, 1]);
        fx.insq(&xy);
        assert_eq!(
            fx.engine.valid_assignments(&fx.q, &xy, &xy).unwrap(),
            BTreeSet::from([tup(&[1, 2])])
        );
        // F carries no data tuples, and F(2) shares no node with E(0,1)
        let f2 = he(&schema, "F", &[2]);
        fx.insq(&f2);
        assert!(fx
            .engine
            .valid_assignments(&fx.q, &f2, &f2)
            .unwrap()
            .is_empty());
        assert!(matches!(
            fx.engine.valid_assignments(&fx.q, &xy, &f2),
            Err(EngineError::NotSameComponent)
        ));
    }

    #[test]
    fn h_query_on_chain() {
        let schema = schema_ef();
        let mut fx = Fixture::new(&schema, 3, chain_data(&schema));
        let xy = he(&schema, "E", &[0, 1]);
        let yz = he(&schema, "E", &[1, 2]);
        fx.insq(&xy);
        fx.insq(&yz);
        // x1 = x2: the edge-difference set is empty
        assert_eq!(
            fx.engine
                .h_query(&fx.q, &xy, &yz, &yz, &tup(&[2, 3]))
                .unwrap(),
            BTreeSet::from([tup(&[2, 3])])
        );
        // y is forced to 2 through the shared node
        assert_eq!(
            fx.engine
                .h_query(&fx.q, &xy, &xy, &yz, &tup(&[2, 3]))
                .unwrap(),
            BTreeSet::from([tup(&[1, 2])])
        );
        assert!(matches!(
            fx.engine.h_query(&fx.q, &xy, &xy, &yz, &tup(&[9, 9])),
            Err(EngineError::MalformedImage(_))
        ));
        // x2 must sit in the subtree of x1
        assert!(matches!(
            fx.engine.h_query(&fx.q, &xy, &yz, &xy, &tup(&[1, 2])),
            Err(EngineError::NotDescendant)
        ));
    }

    #[test]
    fn answer_conventions() {
        let schema = schema_ef();
        // two components, one unsatisfiable
        let mut d = DataIndex::new(schema.clone(), 3);
        d.insert_tuple(schema.rel_id("E").unwrap(), tup(&[1, 2]))
            .unwrap();
        let mut fx = Fixture::new(&schema, 4, d);
        fx.insq(&he(&schema, "E", &[0, 1]));
        assert!(fx.engine.answer());
        fx.insq(&he(&schema, "F", &[3]));
        assert!(!fx.engine.answer());
    }

    #[test]
    fn self_loop_query_edge_needs_diagonal_tuple() {
        let schema = schema_ef();
        let mut d = DataIndex::new(schema.clone(), 4);
        let rel = schema.rel_id("E").unwrap();
        d.insert_tuple(rel, tup(&[1, 2])).unwrap();
        let mut fx = Fixture::new(&schema, 1, d);
        fx.insq(&he(&schema, "E", &[0, 0]));
        assert!(!fx.engine.answer());
        fx.engine
            .change_d_tuple(&fx.q, DataChange::Insert, rel, tup(&[3, 3]))
            .unwrap();
        assert!(fx.engine.answer());
    }

    #[test]
    fn isolated_query_nodes_need_a_data_element() {
        let schema = schema_ef();
        let fx = Fixture::new(&schema, 2, DataIndex::new(schema.clone(), 0));
        assert!(!fx.engine.answer());
        let fx = Fixture::new(&schema, 2, DataIndex::new(schema.clone(), 1));
        assert!(fx.engine.answer());
    }

    #[test]
    fn replace_relation_examples() {
        let schema = schema_ef();
        let rel_e = schema.rel_id("E").unwrap();
        let rel_f = schema.rel_id("F").unwrap();
        let mut d = DataIndex::new(schema.clone(), 3);
        d.insert_tuple(rel_e, tup(&[1, 2])).unwrap();
        let mut fx = Fixture::new(&schema, 2, d);
        fx.insq(&he(&schema, "E", &[0, 1]));
        fx.insq(&he(&schema, "F", &[1]));

        fx.engine
            .replace_relation_d(&fx.q, rel_f, BTreeSet::from([tup(&[2])]))
            .unwrap();
        assert!(fx.engine.answer());
        fx.engine
            .replace_relation_d(&fx.q, rel_f, BTreeSet::from([tup(&[1])]))
            .unwrap();
        assert!(!fx.engine.answer());

        // replacing a relation absent from the query only touches the data
        let mut fx2 = Fixture::new(&schema, 2, fx.engine.data().clone());
        fx2.insq(&he(&schema, "F", &[0]));
        let before_answer = fx2.engine.answer();
        fx2.engine
            .replace_relation_d(&fx2.q, rel_e, BTreeSet::new())
            .unwrap();
        assert_eq!(fx2.engine.answer(), before_answer);
        assert!(fx2.engine.data().tuples(rel_e).is_empty());

        // self-join blocks whole-relation replacement
        let mut fx = Fixture::new(&schema, 3, chain_data(&schema));
        fx.insq(&he(&schema, "E", &[0, 1]));
        fx.insq(&he(&schema, "E", &[1, 2]));
        assert!(matches!(
            fx.engine.replace_relation_d(&fx.q, rel_e, BTreeSet::new()),
            Err(EngineError::SelfJoinPresent)
        ));
    }

    #[test]
    fn replace_with_same_contents_is_identity() {
        let schema = schema_ef();
        let rel_f = schema.rel_id("F").unwrap();
        let mut d = chain_data(&schema);
        d.insert_tuple(rel_f, tup(&[2])).unwrap();
        let mut fx = Fixture::new(&schema, 2, d);
        fx.insq(&he(&schema, "E", &[0, 1]));
        fx.insq(&he(&schema, "F", &[1]));
        let before = fx.engine.clone();
        let same = fx.engine.data().tuples(rel_f).clone();
        fx.engine.replace_relation_d(&fx.q, rel_f, same).unwrap();
        assert_eq!(fx.engine, before);
    }

    #[test]
    fn change_d_tuple_flips_answer() {
        let schema = schema_ef();
        let rel = schema.rel_id("E").unwrap();
        let mut d = DataIndex::new(schema.clone(), 4);
        d.insert_tuple(rel, tup(&[1, 2])).unwrap();
        let mut fx = Fixture::new(&schema, 3, d);
        fx.insq(&he(&schema, "E", &[0, 1]));
        fx.insq(&he(&schema, "E", &[1, 2]));
        assert!(!fx.engine.answer());
        fx.engine
            .change_d_tuple(&fx.q, DataChange::Insert, rel, tup(&[2, 3]))
            .unwrap();
        assert!(fx.engine.answer());
        fx.engine
            .change_d_tuple(&fx.q, DataChange::Delete, rel, tup(&[1, 2]))
            .unwrap();
        assert!(!fx.engine.answer());
        // a tuple outside every query relation in use leaves the answer alone
        let rel_f = schema.rel_id("F").unwrap();
        let before = fx.engine.answer();
        fx.engine
            .change_d_tuple(&fx.q, DataChange::Insert, rel_f, tup(&[0]))
            .unwrap();
        assert_eq!(fx.engine.answer(), before);
        assert!(matches!(
            fx.engine
                .change_d_tuple(&fx.q, DataChange::Insert, rel_f, tup(&[0])),
            Err(EngineError::DuplicateTuple)
        ));
        assert!(matches!(
            fx.engine
                .change_d_tuple(&fx.q, DataChange::Delete, rel_f, tup(&[1])),
            Err(EngineError::TupleNotPresent)
        ));
    }

    #[test]
    fn root_invariance_and_h_prime_derivation() {
        use crate::oracle::enumerate_hom_images;
        let schema = schema_ef();
        let rel_e = schema.rel_id("E").unwrap();
        let rel_f = schema.rel_id("F").unwrap();
        let mut d = DataIndex::new(schema.clone(), 4);
        for t in [[0u32, 1], [1, 2], [2, 3], [1, 3], [3, 3]] {
            d.insert_tuple(rel_e, tup(&t)).unwrap();
        }
        d.insert_tuple(rel_f, tup(&[1])).unwrap();
        d.insert_tuple(rel_f, tup(&[3])).unwrap();
        let mut fx = Fixture::new(&schema, 6, d);
        for e in [
            he(&schema, "E", &[0, 1]),
            he(&schema, "E", &[1, 2]),
            he(&schema, "F", &[1]),
            he(&schema, "E", &[2, 3]),
            he(&schema, "F", &[4]),
            he(&schema, "E", &[4, 5]),
        ] {
            fx.insq(&e);
        }
        let edges: Vec<Hyperedge> = fx.q.edges_iter().collect();
        for x in &edges {
            // rooting at x itself constrains the whole component at x
            let comp: Vec<Hyperedge> = edges
                .iter()
                .filter(|e| fx.forest.same_component(e, x))
                .cloned()
                .collect();
            let expected = enumerate_hom_images(&comp, fx.engine.data(), x, &[]);
            assert_eq!(fx.engine.valid_assignments(&fx.q, x, x).unwrap(), expected);
            // answer is root-independent: every representative choice agrees
            assert_eq!(
                fx.engine.valid_assignments(&fx.q, x, x).unwrap().is_empty(),
                comp.iter()
                    .all(|r| fx.engine.valid_assignments(&fx.q, r, r).unwrap().is_empty())
                    && expected.is_empty()
            );
        }
        // H' falls out of H: the union of h_query over the leaves under x1
        // with their matching tuples reproduces valid_assignments
        for root in &edges {
            for x1 in &edges {
                if !fx.forest.same_component(root, x1) {
                    continue;
                }
                let subtree: Vec<Hyperedge> = edges
                    .iter()
                    .filter(|y| {
                        fx.forest.same_component(root, y)
                            && fx.forest.subtree_contains(root, x1, y).unwrap()
                    })
                    .cloned()
                    .collect();
                let leaves: Vec<Hyperedge> = subtree
                    .iter()
                    .filter(|x2| {
                        // a leaf of the rooted component: no children under root
                        !edges.iter().any(|y| {
                            y != *x2
                                && fx.forest.same_component(root, y)
                                && fx.forest.subtree_contains(root, x2, y).unwrap()
                        })
                    })
                    .cloned()
                    .collect();
                let mut union = BTreeSet::new();
                for x2 in &leaves {
                    for y2 in fx.engine.data().tuples(x2.rel) {
                        if !pattern_consistent(x2, y2) {
                            continue;
                        }
                        union.extend(fx.engine.h_query(&fx.q, root, x1, x2, y2).unwrap());
                    }
                }
                assert_eq!(
                    union,
                    fx.engine.valid_assignments(&fx.q, root, x1).unwrap(),
                    "H' derivation failed at root {root:?}, x1 {x1:?}"
                );
            }
        }
    }

    /// Long differential fuzz of answers, messages and subtree queries
    /// against scratch recomputation and exhaustive search; run with
    /// `cargo test -- --ignored`.
    #[test]
    #[ignore = "slow fuzz, covered at smaller scale by the default tests"]
    fn long_fuzz_against_brute_force() {
        use crate::oracle::enumerate_hom_images;
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let schema =
            Arc::new(Schema::new(vec![("E".into(), 2), ("F".into(), 1), ("G".into(), 3)]).unwrap());
        for seed in 0..150u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d_dom = rng.gen_range(1..=6);
            let mut d = DataIndex::new(schema.clone(), d_dom as usize);
            let mut fx = Fixture {
                q: Hypergraph::new(schema.clone(), 8),
                forest: MaxSpanningForest::new(&schema),
                engine: EngineState::attach(
                    &Hypergraph::new(schema.clone(), 8),
                    &MaxSpanningForest::new(&schema),
                    DataIndex::new(schema.clone(), d_dom as usize),
                )
                .unwrap(),
            };
            for step in 0..120 {
                if rng.gen_bool(0.25) {
                    // data change
                    let rel = RelId(rng.gen_range(0..3));
                    let tuple: Vec<NodeId> = (0..schema.arity(rel))
                        .map(|_| NodeId(rng.gen_range(0..d_dom)))
                        .collect();
                    let op = if fx.engine.data().contains(rel, &tuple) {
                        DataChange::Delete
                    } else {
                        DataChange::Insert
                    };
                    fx.engine
                        .change_d_tuple(&fx.q, op, rel, tuple.clone())
                        .unwrap();
                    if op == DataChange::Insert {
                        d.insert_tuple(rel, tuple).unwrap();
                    } else {
                        d.delete_tuple(rel, &tuple).unwrap();
                    }
                } else {
                    let rel = RelId(rng.gen_range(0..3));
                    let tuple: Vec<NodeId> = (0..schema.arity(rel))
                        .map(|_| NodeId(rng.gen_range(0..8)))
                        .collect();
                    let e = Hyperedge::new(rel, tuple);
                    if fx.q.contains(&e) {
                        let c = QueryChange::Delete(e.clone());
                        if fx.forest.would_stay_acyclic(&fx.q, &c).unwrap() {
                            fx.delq(&e);
                        }
                    } else if fx.q.edge_count() < 10 {
                        let c = QueryChange::Insert(e.clone());
                        if fx.forest.would_stay_acyclic(&fx.q, &c).unwrap() {
                            fx.insq(&e);
                        }
                    }
                }
                assert_eq!(
                    fx.engine.answer(),
                    brute_hom(&fx.q, fx.engine.data()).0,
                    "seed {seed} step {step}"
                );
                if step % 15 == 0 {
                    let scratch =
                        EngineState::attach(&fx.q, &fx.forest, fx.engine.data().clone()).unwrap();
                    assert_eq!(fx.engine, scratch, "seed {seed} step {step}");
                    for comp in fx.forest.components() {
                        let root = comp[0].clone();
                        for x in &comp {
                            let subtree: Vec<Hyperedge> = comp
                                .iter()
                                .filter(|y| fx.forest.subtree_contains(&root, x, y).unwrap())
                                .cloned()
                                .collect();
                            let expected = enumerate_hom_images(&subtree, fx.engine.data(), x, &[]);
                            assert_eq!(
                                fx.engine.valid_assignments(&fx.q, &root, x).unwrap(),
                                expected,
                                "seed {seed} step {step}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn answer_matches_brute_force_after_trialed_changes() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let schema = schema_ef();
        let rel_e = schema.rel_id("E").unwrap();
        let rel_f = schema.rel_id("F").unwrap();
        for seed in 0..8u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut d = DataIndex::new(schema.clone(), 4);
            for _ in 0..rng.gen_range(0..10) {
                let _ = d.insert_tuple(rel_e, tup(&[rng.gen_range(0..4), rng.gen_range(0..4)]));
            }
            for _ in 0..rng.gen_range(0..3) {
                let _ = d.insert_tuple(rel_f, tup(&[rng.gen_range(0..4)]));
            }
            let mut fx = Fixture::new(&schema, 5, d);
            for _ in 0..60 {
                let e = if rng.gen_bool(0.5) {
                    he(&schema, "E", &[rng.gen_range(0..5), rng.gen_range(0..5)])
                } else {
                    he(&schema, "F", &[rng.gen_range(0..5)])
                };
                if fx.q.contains(&e) {
                    let change = QueryChange::Delete(e.clone());
                    if fx.forest.would_stay_acyclic(&fx.q, &change).unwrap() {
                        fx.delq(&e);
                    }
                } else {
                    let change = QueryChange::Insert(e.clone());
                    if fx.forest.would_stay_acyclic(&fx.q, &change).unwrap() {
                        fx.insq(&e);
                    }
                }
                assert_eq!(
                    fx.engine.answer(),
                    brute_hom(&fx.q, fx.engine.data()).0,
                    "seed {seed}"
                );
            }
        }
    }
}
