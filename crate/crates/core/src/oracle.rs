//! Independent brute-force references used by the property tests: exhaustive
//! homomorphism search, Kruskal on the weighted hyperedge graph, GYO ear
//! removal, and a deterministic random script generator.
//!
//! Everything here recomputes from scratch and shares no code with the
//! maintained structures it checks. Instances are expected to stay small
//! (about a dozen hyperedges, single-digit domains); the search space is
//! bounded but the implementations make no effort beyond simple pruning.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::engine::DataIndex;
use crate::hypergraph::{Hyperedge, Hypergraph, NodeId, RelId, Schema};
use crate::script::Command;

/// A homomorphism witness: node images, total on the nodes that occur in
/// query hyperedges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness(pub BTreeMap<NodeId, NodeId>);

/// Exhaustive backtracking search for a homomorphism from `q` into `d`.
///
/// Isolated query nodes impose no constraint beyond needing some data element
/// to map to; the answer convention matches the incremental engine.
pub fn brute_hom(q: &Hypergraph, d: &DataIndex) -> (bool, Option<Witness>) {
    if d.domain_size() == 0 && q.domain_size() > 0 && q.has_isolated_node() {
        return (false, None);
    }
    let edges: Vec<Hyperedge> = q.edges_iter().collect();
    match search_hom(&edges, d, &BTreeMap::new()) {
        Some(map) => {
            let witness = Witness(map);
            debug_assert!(verify_witness(q, d, &witness));
            (true, Some(witness))
        }
        None => (false, None),
    }
}

/// Re-checks a witness against every query hyperedge.
pub fn verify_witness(q: &Hypergraph, d: &DataIndex, witness: &Witness) -> bool {
    q.edges_iter().all(|e| {
        let image: Option<Vec<NodeId>> =
            e.tuple.iter().map(|n| witness.0.get(n).copied()).collect();
        image.is_some_and(|t| d.tuples(e.rel).contains(&t))
    })
}

/// First-found homomorphism of the given edge set extending `pinned`, or
/// `None`. Node order follows first occurrence; candidates are intersected
/// projections of the matching data tuples.
fn search_hom(
    edges: &[Hyperedge],
    d: &DataIndex,
    pinned: &BTreeMap<NodeId, NodeId>,
) -> Option<BTreeMap<NodeId, NodeId>> {
    let mut found = None;
    enumerate_homs(edges, d, pinned, &mut |map| {
        found = Some(map.clone());
        false
    });
    found
}

/// Enumerates homomorphisms of `edges` extending `pinned`, invoking `visit`
/// on each; a `false` return stops the enumeration.
fn enumerate_homs(
    edges: &[Hyperedge],
    d: &DataIndex,
    pinned: &BTreeMap<NodeId, NodeId>,
    visit: &mut dyn FnMut(&BTreeMap<NodeId, NodeId>) -> bool,
) -> bool {
    // candidate values per node: intersect projections over every occurrence
    let mut candidates: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    let mut order: Vec<NodeId> = Vec::new();
    for e in edges {
        for (i, node) in e.tuple.iter().enumerate() {
            let proj: BTreeSet<NodeId> = d.tuples(e.rel).iter().map(|t| t[i]).collect();
            match candidates.get_mut(node) {
                Some(set) => set.retain(|v| proj.contains(v)),
                None => {
                    order.push(*node);
                    candidates.insert(*node, proj);
                }
            }
        }
    }
    for (node, value) in pinned {
        match candidates.get_mut(node) {
            Some(set) => set.retain(|v| v == value),
            None => {
                // pinned-only nodes are fixed and need no search
                candidates.insert(*node, BTreeSet::from([*value]));
            }
        }
    }
    // an edge is checkable once its last node (in assignment order) is bound
    let position: BTreeMap<NodeId, usize> =
        order.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut check_at: Vec<Vec<&Hyperedge>> = vec![Vec::new(); order.len().max(1)];
    let mut unconstrained = Vec::new();
    for e in edges {
        match e.tuple.iter().filter_map(|n| position.get(n)).max() {
            Some(&last) => check_at[last].push(e),
            None => unconstrained.push(e),
        }
    }
    // edges whose nodes are all pinned are checked up front
    for e in unconstrained {
        let image: Vec<NodeId> = e.tuple.iter().map(|n| pinned[n]).collect();
        if !d.tuples(e.rel).contains(&image) {
            return true;
        }
    }
    let mut assignment: BTreeMap<NodeId, NodeId> = pinned.clone();
    fn descend(
        depth: usize,
        order: &[NodeId],
        candidates: &BTreeMap<NodeId, BTreeSet<NodeId>>,
        check_at: &[Vec<&Hyperedge>],
        d: &DataIndex,
        assignment: &mut BTreeMap<NodeId, NodeId>,
        visit: &mut dyn FnMut(&BTreeMap<NodeId, NodeId>) -> bool,
    ) -> bool {
        if depth == order.len() {
            return visit(assignment);
        }
        let node = order[depth];
        for &value in &candidates[&node] {
            assignment.insert(node, value);
            let ok = check_at[depth].iter().all(|e| {
                let image: Vec<NodeId> = e.tuple.iter().map(|n| assignment[n]).collect();
                d.tuples(e.rel).contains(&image)
            });
            if ok && !descend(depth + 1, order, candidates, check_at, d, assignment, visit) {
                return false;
            }
        }
        assignment.remove(&node);
        true
    }
    if order.is_empty() {
        return visit(&assignment);
    }
    descend(0, &order, &candidates, &check_at, d, &mut assignment, visit)
}

/// All images of `target` over every homomorphism of `edges` into `d`, with
/// the given hyperedges pre-pinned to fixed image tuples. Pins constrain node
/// values only; a pinned hyperedge itself need not exist in `d`.
pub fn enumerate_hom_images(
    edges: &[Hyperedge],
    d: &DataIndex,
    target: &Hyperedge,
    pins: &[(&Hyperedge, &[NodeId])],
) -> BTreeSet<Vec<NodeId>> {
    let mut pinned = BTreeMap::new();
    for (edge, image) in pins {
        assert_eq!(edge.tuple.len(), image.len());
        for (node, value) in edge.tuple.iter().zip(image.iter()) {
            if let Some(prev) = pinned.insert(*node, *value) {
                if prev != *value {
                    return BTreeSet::new();
                }
            }
        }
    }
    let mut images = BTreeSet::new();
    enumerate_homs(edges, d, &pinned, &mut |map| {
        let image: Vec<NodeId> = target.tuple.iter().map(|n| map[n]).collect();
        images.insert(image);
        true
    });
    images
}

/// Weight of a maximum-weight spanning forest of wg(H), by sorted greedy
/// edge selection with union-find cycle detection.
pub fn kruskal_msf_weight(h: &Hypergraph) -> u64 {
    let edges: Vec<Hyperedge> = h.edges_iter().collect();
    let mut wg: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..edges.len() {
        for j in i + 1..edges.len() {
            let shared = edges[i].shared_with(&edges[j]);
            if !shared.is_empty() {
                wg.push((shared.len(), i, j));
            }
        }
    }
    wg.sort_by(|a, b| b.cmp(a));
    let mut dsu = Dsu::new(edges.len());
    let mut weight = 0u64;
    for (w, i, j) in wg {
        if dsu.union(i, j) {
            weight += w as u64;
        }
    }
    weight
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            self.parent[i] = self.find(self.parent[i]);
        }
        self.parent[i]
    }

    fn union(&mut self, i: usize, j: usize) -> bool {
        let (ri, rj) = (self.find(i), self.find(j));
        if ri == rj {
            false
        } else {
            self.parent[ri] = rj;
            true
        }
    }
}

/// GYO ear removal: repeatedly delete nodes occurring in exactly one
/// hyperedge and hyperedges contained in another. The hypergraph is
/// α-acyclic iff everything vanishes.
pub fn gyo_acyclic(h: &Hypergraph) -> bool {
    let mut sets: Vec<BTreeSet<NodeId>> = h.edges_iter().map(|e| e.node_set()).collect();
    loop {
        let mut changed = false;
        // drop emptied hyperedges
        let before = sets.len();
        sets.retain(|s| !s.is_empty());
        changed |= sets.len() != before;
        // drop hyperedges contained in a distinct other
        let mut drop = None;
        'outer: for i in 0..sets.len() {
            for j in 0..sets.len() {
                if i != j && sets[i].is_subset(&sets[j]) {
                    drop = Some(i);
                    break 'outer;
                }
            }
        }
        if let Some(i) = drop {
            sets.remove(i);
            changed = true;
        }
        // shrink away nodes that occur in exactly one hyperedge
        let mut occurrences: BTreeMap<NodeId, usize> = BTreeMap::new();
        for s in &sets {
            for &v in s {
                *occurrences.entry(v).or_default() += 1;
            }
        }
        for s in &mut sets {
            let before = s.len();
            s.retain(|v| occurrences[v] > 1);
            changed |= s.len() != before;
        }
        if !changed {
            return sets.is_empty();
        }
    }
}

/// How the data side of a generated script behaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DMode {
    /// One `setd` per relation up front, then only query changes.
    Fixed,
    /// Whole-relation `setd` replacements mixed into the run.
    Replace,
    /// Single-tuple `insd`/`deld` changes mixed into the run.
    Tuples,
}

/// Bounds and biases for [`random_change_script`].
#[derive(Debug, Clone)]
pub struct ScriptLimits {
    pub q_domain: usize,
    pub d_domain: usize,
    pub max_q_edges: usize,
    /// Cap on data tuples per relation.
    pub max_d_tuples: usize,
    pub d_mode: DMode,
    /// At most one query hyperedge per relation.
    pub self_join_free: bool,
    /// Probability that a proposal breaking acyclicity is emitted anyway (it
    /// will be denied) instead of being redrawn.
    pub deny_bias: f64,
}

impl Default for ScriptLimits {
    fn default() -> Self {
        ScriptLimits {
            q_domain: 12,
            d_domain: 8,
            max_q_edges: 12,
            max_d_tuples: 13,
            d_mode: DMode::Fixed,
            self_join_free: false,
            deny_bias: 0.5,
        }
    }
}

/// Generates a deterministic change script: schema and domain headers, an
/// initial data load, then `steps` commands mixing query changes (biased to
/// keep the query acyclic, with occasional denial-triggering proposals),
/// data changes per `d_mode`, and `ask` probes. Deletions always target
/// present edges and insertions never duplicate, so the script replays
/// without errors.
pub fn random_change_script(
    schema: &Schema,
    steps: usize,
    limits: &ScriptLimits,
    seed: u64,
) -> Vec<Command> {
    let schema = Arc::new(schema.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decls: Vec<(String, usize)> = schema
        .declarations()
        .map(|(n, a)| (n.to_string(), a))
        .collect();
    let mut cmds = vec![
        Command::Schema(decls),
        Command::DomQ(limits.q_domain),
        Command::DomD(limits.d_domain),
    ];
    let mut d_state: Vec<BTreeSet<Vec<u32>>> = Vec::new();
    for rel in schema.rel_ids() {
        let tuples = random_relation(&mut rng, &schema, rel, limits);
        cmds.push(Command::SetD {
            rel: schema.name(rel).to_string(),
            tuples: tuples.iter().cloned().collect(),
        });
        d_state.push(tuples);
    }
    let mut q = Hypergraph::new(schema.clone(), limits.q_domain);

    for _ in 0..steps {
        let roll: f64 = rng.gen();
        let cmd = if roll < 0.34 {
            propose_insq(&mut rng, &schema, &mut q, limits)
        } else if roll < 0.52 {
            propose_delq(&mut rng, &schema, &mut q, limits)
        } else if roll < 0.64 {
            propose_d_change(&mut rng, &schema, &q, &mut d_state, limits)
        } else {
            None
        };
        cmds.push(cmd.unwrap_or(Command::Ask));
    }
    cmds
}

fn random_relation(
    rng: &mut ChaCha8Rng,
    schema: &Schema,
    rel: RelId,
    limits: &ScriptLimits,
) -> BTreeSet<Vec<u32>> {
    let count = rng.gen_range(0..=limits.max_d_tuples);
    let mut tuples = BTreeSet::new();
    for _ in 0..count {
        let t: Vec<u32> = (0..schema.arity(rel))
            .map(|_| rng.gen_range(0..limits.d_domain as u32))
            .collect();
        tuples.insert(t);
    }
    tuples
}

fn random_q_edge(rng: &mut ChaCha8Rng, schema: &Schema, limits: &ScriptLimits) -> Hyperedge {
    let rel = RelId(rng.gen_range(0..schema.rel_count()));
    let tuple = (0..schema.arity(rel))
        .map(|_| NodeId(rng.gen_range(0..limits.q_domain as u32)))
        .collect();
    Hyperedge::new(rel, tuple)
}

fn propose_insq(
    rng: &mut ChaCha8Rng,
    schema: &Schema,
    q: &mut Hypergraph,
    limits: &ScriptLimits,
) -> Option<Command> {
    if q.edge_count() >= limits.max_q_edges {
        return None;
    }
    for _ in 0..20 {
        let e = random_q_edge(rng, schema, limits);
        if q.contains(&e) {
            continue;
        }
        if limits.self_join_free && !q.tuples(e.rel).is_empty() {
            continue;
        }
        let mut trial = q.clone();
        trial.insert_edge(&e).unwrap();
        let cmd = Command::InsQ {
            rel: schema.name(e.rel).to_string(),
            nodes: e.tuple.iter().map(|n| n.0).collect(),
        };
        if gyo_acyclic(&trial) {
            *q = trial;
            return Some(cmd);
        }
        if rng.gen_bool(limits.deny_bias) {
            // emitted but will be denied; the simulated state is unchanged
            return Some(cmd);
        }
    }
    None
}

fn propose_delq(
    rng: &mut ChaCha8Rng,
    schema: &Schema,
    q: &mut Hypergraph,
    limits: &ScriptLimits,
) -> Option<Command> {
    let edges: Vec<Hyperedge> = q.edges_iter().collect();
    if edges.is_empty() {
        return None;
    }
    for _ in 0..10 {
        let e = edges[rng.gen_range(0..edges.len())].clone();
        let mut trial = q.clone();
        trial.delete_edge(&e).unwrap();
        let cmd = Command::DelQ {
            rel: schema.name(e.rel).to_string(),
            nodes: e.tuple.iter().map(|n| n.0).collect(),
        };
        if gyo_acyclic(&trial) {
            *q = trial;
            return Some(cmd);
        }
        if rng.gen_bool(limits.deny_bias) {
            return Some(cmd);
        }
    }
    None
}

fn propose_d_change(
    rng: &mut ChaCha8Rng,
    schema: &Schema,
    q: &Hypergraph,
    d_state: &mut [BTreeSet<Vec<u32>>],
    limits: &ScriptLimits,
) -> Option<Command> {
    let rel = RelId(rng.gen_range(0..schema.rel_count()));
    match limits.d_mode {
        DMode::Fixed => None,
        DMode::Replace => {
            // whole-relation replacement requires the query to be
            // self-join-free on the relation
            if q.tuples(rel).len() > 1 {
                return None;
            }
            let tuples = random_relation(rng, schema, rel, limits);
            d_state[rel.0] = tuples.clone();
            Some(Command::SetD {
                rel: schema.name(rel).to_string(),
                tuples: tuples.into_iter().collect(),
            })
        }
        DMode::Tuples => {
            let delete = !d_state[rel.0].is_empty() && rng.gen_bool(0.4);
            if delete {
                let tuples: Vec<Vec<u32>> = d_state[rel.0].iter().cloned().collect();
                let t = tuples[rng.gen_range(0..tuples.len())].clone();
                d_state[rel.0].remove(&t);
                Some(Command::DelD {
                    rel: schema.name(rel).to_string(),
                    elems: t,
                })
            } else {
                if d_state[rel.0].len() >= limits.max_d_tuples {
                    return None;
                }
                for _ in 0..10 {
                    let t: Vec<u32> = (0..schema.arity(rel))
                        .map(|_| rng.gen_range(0..limits.d_domain as u32))
                        .collect();
                    if d_state[rel.0].insert(t.clone()) {
                        return Some(Command::InsD {
                            rel: schema.name(rel).to_string(),
                            elems: t,
                        });
                    }
                }
                None
            }
        }
    }
}
