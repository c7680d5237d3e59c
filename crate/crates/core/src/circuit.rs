//! Layered semi-unbounded circuits, proof trees, and their encoding as
//! hypergraph homomorphism instances.
//!
//! A normal-form circuit alternates or-layers and and-layers, starts with an
//! or-layer above the inputs and ends in a single and-gate; and-gates read
//! exactly two predecessors, or-gates at least one. Each input `x_i` is
//! paired with a negated input carrying the complement, so the circuit
//! itself is monotone.
//!
//! Acceptance of an input is equivalent to the existence of a homomorphism
//! from the fixed proof tree of the circuit's depth into the encoded circuit,
//! which makes the pipeline here an end-to-end oracle for the incremental
//! engine: the proof tree is the (static) query side, the encoded circuit
//! the data side, and flipping one input bit changes exactly four data
//! tuples.

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::hypergraph::{Hyperedge, Hypergraph, NodeId, RelId, Schema};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("input vector has {got} bits, circuit reads {expected}")]
    InputLengthMismatch { expected: usize, got: usize },
    #[error("proof trees need an even depth >= 2, got {0}")]
    InvalidDepth(usize),
    #[error("invalid generator shape: {0}")]
    InvalidShape(String),
    #[error("input index {0} out of range for {1} inputs")]
    IndexOutOfRange(usize, usize),
    #[error("not in normal form: {0}")]
    NotNormalForm(NormalFormViolation),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// First normal-form condition a circuit violates, as a value.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalFormViolation {
    #[error("circuit has no layers")]
    Empty,
    #[error("layer {layer} gate {gate} reads predecessor {pred} outside the previous layer")]
    PredOutOfRange {
        layer: usize,
        gate: usize,
        pred: usize,
    },
    #[error("layer 1 must consist of or-gates")]
    FirstLayerNotOr,
    #[error("layers {0} and {1} do not alternate or/and")]
    NotAlternating(usize, usize),
    #[error("the output layer must be a single gate, found {0}")]
    OutputNotSingleGate(usize),
    #[error("the output gate must be an and-gate")]
    OutputNotAnd,
    #[error("and-gate {gate} in layer {layer} has fan-in {got}, needs exactly 2")]
    AndFanIn {
        layer: usize,
        gate: usize,
        got: usize,
    },
    #[error("or-gate {gate} in layer {layer} has fan-in 0")]
    OrFanIn { layer: usize, gate: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    Or,
    And,
}

impl GateKind {
    fn label(self) -> &'static str {
        match self {
            GateKind::Or => "OR",
            GateKind::And => "AND",
        }
    }
}

/// One layer of gates; each gate lists its predecessors in the previous
/// layer (layer 1 reads input literals: `0..n` the inputs, `n..2n` their
/// negations).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub kind: GateKind,
    pub gates: Vec<Vec<usize>>,
}

/// A layered circuit. `depth` is the number of gate layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    pub n_inputs: usize,
    pub layers: Vec<Layer>,
}

impl Circuit {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(|l| l.gates.len()).sum()
    }

    /// Checks the five normal-form conditions, reporting the first violated.
    pub fn validate_normal_form(&self) -> Result<(), NormalFormViolation> {
        if self.layers.is_empty() {
            return Err(NormalFormViolation::Empty);
        }
        for (li, layer) in self.layers.iter().enumerate() {
            let prev = if li == 0 {
                2 * self.n_inputs
            } else {
                self.layers[li - 1].gates.len()
            };
            for (gi, preds) in layer.gates.iter().enumerate() {
                for &p in preds {
                    if p >= prev {
                        return Err(NormalFormViolation::PredOutOfRange {
                            layer: li + 1,
                            gate: gi,
                            pred: p,
                        });
                    }
                }
            }
        }
        if self.layers[0].kind != GateKind::Or {
            return Err(NormalFormViolation::FirstLayerNotOr);
        }
        for i in 1..self.layers.len() {
            if self.layers[i].kind == self.layers[i - 1].kind {
                return Err(NormalFormViolation::NotAlternating(i, i + 1));
            }
        }
        let last = self.layers.last().unwrap();
        if last.gates.len() != 1 {
            return Err(NormalFormViolation::OutputNotSingleGate(last.gates.len()));
        }
        if last.kind != GateKind::And {
            return Err(NormalFormViolation::OutputNotAnd);
        }
        for (li, layer) in self.layers.iter().enumerate() {
            for (gi, preds) in layer.gates.iter().enumerate() {
                match layer.kind {
                    GateKind::And if preds.len() != 2 => {
                        return Err(NormalFormViolation::AndFanIn {
                            layer: li + 1,
                            gate: gi,
                            got: preds.len(),
                        });
                    }
                    GateKind::Or if preds.is_empty() => {
                        return Err(NormalFormViolation::OrFanIn {
                            layer: li + 1,
                            gate: gi,
                        });
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn validated(&self) -> Result<(), CircuitError> {
        self.validate_normal_form()
            .map_err(CircuitError::NotNormalForm)
    }

    /// Evaluates the output gate under `x`, with each negated input forced
    /// to the complement of its partner.
    pub fn eval(&self, x: &InputVector) -> Result<bool, CircuitError> {
        self.validated()?;
        if x.bits.len() != self.n_inputs {
            return Err(CircuitError::InputLengthMismatch {
                expected: self.n_inputs,
                got: x.bits.len(),
            });
        }
        let mut prev: Vec<bool> = x
            .bits
            .iter()
            .copied()
            .chain(x.bits.iter().map(|b| !b))
            .collect();
        for layer in &self.layers {
            prev = layer
                .gates
                .iter()
                .map(|preds| match layer.kind {
                    GateKind::Or => preds.iter().any(|&p| prev[p]),
                    GateKind::And => preds.iter().all(|&p| prev[p]),
                })
                .collect();
        }
        Ok(prev[0])
    }

    /// Deterministic text form; round-trips through [`Circuit::from_text`].
    ///
    /// Gates are numbered globally: literals `0..2n` first (inputs, then
    /// their negations), then the layers in order. `wire` lines list each
    /// gate's predecessors in wire order, which for and-gates fixes the
    /// left/right designation.
    pub fn to_text(&self) -> String {
        let mut out = format!("circuit {} {}\n", self.n_inputs, self.depth());
        for layer in &self.layers {
            out.push_str(&format!(
                "layer {} {}\n",
                layer.kind.label(),
                layer.gates.len()
            ));
        }
        let mut base = 2 * self.n_inputs;
        let mut prev_base = 0;
        for layer in &self.layers {
            for (gi, preds) in layer.gates.iter().enumerate() {
                for &p in preds {
                    out.push_str(&format!("wire {} {}\n", base + gi, prev_base + p));
                }
            }
            prev_base = base;
            base += layer.gates.len();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Circuit, CircuitError> {
        let mut n_inputs = None;
        let mut layers: Vec<Layer> = Vec::new();
        let mut wires: Vec<(usize, usize, usize)> = Vec::new(); // (line, gate, pred)
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: &str| CircuitError::Parse {
                line,
                msg: msg.to_string(),
            };
            let tokens: Vec<&str> = raw.split_whitespace().collect();
            match tokens.as_slice() {
                [] => {}
                ["circuit", n, d] => {
                    if n_inputs.is_some() {
                        return Err(err("duplicate circuit header"));
                    }
                    let n: usize = n.parse().map_err(|_| err("bad input count"))?;
                    let _d: usize = d.parse().map_err(|_| err("bad depth"))?;
                    n_inputs = Some(n);
                }
                ["layer", kind, count] => {
                    let kind = match *kind {
                        "OR" => GateKind::Or,
                        "AND" => GateKind::And,
                        _ => return Err(err("layer kind must be OR or AND")),
                    };
                    let count: usize = count.parse().map_err(|_| err("bad gate count"))?;
                    layers.push(Layer {
                        kind,
                        gates: vec![Vec::new(); count],
                    });
                }
                ["wire", gate, pred] => {
                    let gate: usize = gate.parse().map_err(|_| err("bad gate id"))?;
                    let pred: usize = pred.parse().map_err(|_| err("bad predecessor id"))?;
                    wires.push((line, gate, pred));
                }
                _ => return Err(err("unrecognized line")),
            }
        }
        let n_inputs = n_inputs.ok_or(CircuitError::Parse {
            line: 0,
            msg: "missing circuit header".to_string(),
        })?;
        // global id -> (layer, index) with literals in 0..2n
        let mut bases = Vec::with_capacity(layers.len());
        let mut base = 2 * n_inputs;
        for layer in &layers {
            bases.push(base);
            base += layer.gates.len();
        }
        for (line, gate, pred) in wires {
            let err = |msg: String| CircuitError::Parse { line, msg };
            let li = bases
                .iter()
                .rposition(|&b| gate >= b)
                .ok_or_else(|| err(format!("gate {gate} is a literal")))?;
            let gi = gate - bases[li];
            if gi >= layers[li].gates.len() {
                return Err(err(format!("gate {gate} out of range")));
            }
            let prev_base = if li == 0 { 0 } else { bases[li - 1] };
            let prev_len = if li == 0 {
                2 * n_inputs
            } else {
                layers[li - 1].gates.len()
            };
            if pred < prev_base || pred >= prev_base + prev_len {
                return Err(err(format!("wire {gate} <- {pred} skips a layer")));
            }
            layers[li].gates[gi].push(pred - prev_base);
        }
        Ok(Circuit { n_inputs, layers })
    }
}

/// Concrete input bits; the paired negated literals are derived, never
/// stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputVector {
    pub bits: Vec<bool>,
}

impl InputVector {
    pub fn new(bits: Vec<bool>) -> Self {
        InputVector { bits }
    }

    /// Parses a `0`/`1` string, most significant first.
    pub fn parse(s: &str) -> Result<Self, CircuitError> {
        let mut bits = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => {
                    return Err(CircuitError::Parse {
                        line: 1,
                        msg: format!("bit {i} must be 0 or 1"),
                    })
                }
            }
        }
        Ok(InputVector { bits })
    }

    pub fn flipped(&self, i: usize) -> Result<Self, CircuitError> {
        if i >= self.bits.len() {
            return Err(CircuitError::IndexOutOfRange(i, self.bits.len()));
        }
        let mut bits = self.bits.clone();
        bits[i] = !bits[i];
        Ok(InputVector { bits })
    }
}

/// The fixed schema circuits and proof trees are encoded over.
pub fn circuit_schema() -> Schema {
    Schema::new(vec![
        ("zero".into(), 1),
        ("one".into(), 1),
        ("or".into(), 2),
        ("and_left".into(), 2),
        ("and_right".into(), 2),
    ])
    .expect("fixed schema is well-formed")
}

struct CircuitRels {
    zero: RelId,
    one: RelId,
    or: RelId,
    and_left: RelId,
    and_right: RelId,
}

fn rels(schema: &Schema) -> CircuitRels {
    CircuitRels {
        zero: schema.rel_id("zero").unwrap(),
        one: schema.rel_id("one").unwrap(),
        or: schema.rel_id("or").unwrap(),
        and_left: schema.rel_id("and_left").unwrap(),
        and_right: schema.rel_id("and_right").unwrap(),
    }
}

/// The proof tree for circuits of the given depth, as a hypergraph over the
/// circuit schema: an and-root whose and-nodes fork into two or-children,
/// or-nodes pass through to one child, and the bottom or-layer closes with
/// constant-1 leaves. The shape is fully determined by the depth.
pub fn build_proof_tree(depth: usize) -> Result<Hypergraph, CircuitError> {
    if depth < 2 || !depth.is_multiple_of(2) {
        return Err(CircuitError::InvalidDepth(depth));
    }
    let schema = Arc::new(circuit_schema());
    let r = rels(&schema);
    // breadth-first over (node, layer); layer 0 holds the leaves
    let mut next_id = 0u32;
    let mut fresh = || {
        let id = NodeId(next_id);
        next_id += 1;
        id
    };
    let root = fresh();
    let mut frontier = vec![(root, depth)];
    let mut edges = Vec::new();
    while let Some((node, layer)) = frontier.pop() {
        if layer == 0 {
            edges.push(Hyperedge::new(r.one, vec![node]));
        } else if layer % 2 == 0 {
            let left = fresh();
            let right = fresh();
            edges.push(Hyperedge::new(r.and_left, vec![node, left]));
            edges.push(Hyperedge::new(r.and_right, vec![node, right]));
            frontier.push((left, layer - 1));
            frontier.push((right, layer - 1));
        } else {
            let child = fresh();
            edges.push(Hyperedge::new(r.or, vec![node, child]));
            frontier.push((child, layer - 1));
        }
    }
    let mut q = Hypergraph::new(schema, next_id as usize);
    for e in edges {
        q.insert_edge(&e)
            .expect("construction emits distinct edges");
    }
    Ok(q)
}

/// Encodes a circuit under an input vector as the data-side hypergraph: one
/// domain element per literal and gate, `or` tuples for or-wires,
/// `and_left`/`and_right` for the two and-wires in wire order, and
/// `one`/`zero` labels on the literals as given by `x`. The zero labels are
/// never queried by a proof tree but are part of the encoding and of the
/// bit-flip accounting.
pub fn encode_instance(c: &Circuit, x: &InputVector) -> Result<Hypergraph, CircuitError> {
    c.validated()?;
    if x.bits.len() != c.n_inputs {
        return Err(CircuitError::InputLengthMismatch {
            expected: c.n_inputs,
            got: x.bits.len(),
        });
    }
    let schema = Arc::new(circuit_schema());
    let r = rels(&schema);
    let n = c.n_inputs;
    let mut d = Hypergraph::new(schema, 2 * n + c.gate_count());
    for (i, &bit) in x.bits.iter().enumerate() {
        let (pos, neg) = (NodeId(i as u32), NodeId((n + i) as u32));
        let (pos_rel, neg_rel) = if bit {
            (r.one, r.zero)
        } else {
            (r.zero, r.one)
        };
        d.insert_edge(&Hyperedge::new(pos_rel, vec![pos])).unwrap();
        d.insert_edge(&Hyperedge::new(neg_rel, vec![neg])).unwrap();
    }
    let mut base = 2 * n;
    let mut prev_base = 0;
    for layer in &c.layers {
        for (gi, preds) in layer.gates.iter().enumerate() {
            let gate = NodeId((base + gi) as u32);
            match layer.kind {
                GateKind::Or => {
                    for &p in preds {
                        let pred = NodeId((prev_base + p) as u32);
                        d.insert_edge(&Hyperedge::new(r.or, vec![gate, pred]))
                            .unwrap();
                    }
                }
                GateKind::And => {
                    let left = NodeId((prev_base + preds[0]) as u32);
                    let right = NodeId((prev_base + preds[1]) as u32);
                    d.insert_edge(&Hyperedge::new(r.and_left, vec![gate, left]))
                        .unwrap();
                    d.insert_edge(&Hyperedge::new(r.and_right, vec![gate, right]))
                        .unwrap();
                }
            }
        }
        prev_base = base;
        base += layer.gates.len();
    }
    Ok(d)
}

/// The exact data-side difference induced by flipping input bit `i`: the
/// `one`/`zero` labels of the literal and of its negated partner swap, four
/// tuple changes in total.
pub fn diff_on_bitflip(
    c: &Circuit,
    x: &InputVector,
    i: usize,
) -> Result<(Vec<Hyperedge>, Vec<Hyperedge>), CircuitError> {
    if i >= c.n_inputs {
        return Err(CircuitError::IndexOutOfRange(i, c.n_inputs));
    }
    if x.bits.len() != c.n_inputs {
        return Err(CircuitError::InputLengthMismatch {
            expected: c.n_inputs,
            got: x.bits.len(),
        });
    }
    let schema = circuit_schema();
    let r = rels(&schema);
    let (pos, neg) = (NodeId(i as u32), NodeId((c.n_inputs + i) as u32));
    let (pos_rel, neg_rel) = if x.bits[i] {
        (r.one, r.zero)
    } else {
        (r.zero, r.one)
    };
    let removed = vec![
        Hyperedge::new(pos_rel, vec![pos]),
        Hyperedge::new(neg_rel, vec![neg]),
    ];
    let added = vec![
        Hyperedge::new(neg_rel, vec![pos]),
        Hyperedge::new(pos_rel, vec![neg]),
    ];
    Ok((removed, added))
}

/// Seed-deterministic normal-form circuit generator. Every first-layer
/// or-gate reads at least one positive literal, so the all-ones input always
/// evaluates to true; the remaining wiring is uniform.
pub fn random_normal_form_circuit(
    n_inputs: usize,
    depth: usize,
    width: usize,
    seed: u64,
) -> Result<Circuit, CircuitError> {
    if n_inputs == 0 {
        return Err(CircuitError::InvalidShape("need at least one input".into()));
    }
    if depth < 2 || !depth.is_multiple_of(2) {
        return Err(CircuitError::InvalidShape(format!(
            "depth {depth} cannot end in an and-layer above an or-layer"
        )));
    }
    if width < 2 {
        return Err(CircuitError::InvalidShape(
            "width must be at least 2".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers: Vec<Layer> = Vec::with_capacity(depth);
    for li in 0..depth {
        let kind = if li % 2 == 0 {
            GateKind::Or
        } else {
            GateKind::And
        };
        let count = if li == depth - 1 {
            1
        } else {
            rng.gen_range(2..=width)
        };
        let prev = if li == 0 {
            2 * n_inputs
        } else {
            layers[li - 1].gates.len()
        };
        let mut gates = Vec::with_capacity(count);
        for _ in 0..count {
            let preds = match kind {
                GateKind::And => sample_distinct(&mut rng, prev, 2),
                GateKind::Or => {
                    let fan = rng.gen_range(1..=prev.min(6));
                    let mut preds = sample_distinct(&mut rng, prev, fan);
                    if li == 0 && preds.iter().all(|&p| p >= n_inputs) {
                        preds[0] = rng.gen_range(0..n_inputs);
                    }
                    preds
                }
            };
            gates.push(preds);
        }
        layers.push(Layer { kind, gates });
    }
    let circuit = Circuit { n_inputs, layers };
    debug_assert!(circuit.validate_normal_form().is_ok());
    Ok(circuit)
}

fn sample_distinct(rng: &mut ChaCha8Rng, range: usize, count: usize) -> Vec<usize> {
    debug_assert!(count <= range);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = rng.gen_range(0..range);
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}
