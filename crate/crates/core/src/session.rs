//! Batch driver: executes script commands against the hypergraph, the
//! spanning forest and the engine, enforcing the denial policy.
//!
//! A query change is first trial-applied on scratch copies; if the hypergraph
//! would turn cyclic the command answers `denied` and no state moves. Applied
//! changes feed the forest diff into the engine, so the forest verdict is
//! acyclic after every executed command. Output is strictly deterministic:
//! replaying a script yields byte-identical text.

use std::io::{BufRead, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::engine::{DataChange, DataIndex, EngineError, EngineState};
use crate::hypergraph::{Hyperedge, Hypergraph, HypergraphError, NodeId, RelId, Schema};
use crate::msf::{ForestError, MaxSpanningForest};
use crate::oracle;
use crate::script::{parse_line, Command, ParseError};

/// Domain size used when a script omits `domq`/`domd`.
pub const DEFAULT_DOMAIN: usize = 64;

/// When a forest has at most this many nodes, `snapshot` also emits the full
/// path relation.
const SNAPSHOT_PATH_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("domain can only change while that side is empty")]
    DomainLocked,
    #[error("schema is already declared")]
    SchemaRedeclared,
}

impl SessionError {
    /// Short stable kind tag for `error <kind>` output lines.
    pub fn kind(&self) -> &'static str {
        match self {
            SessionError::Hypergraph(e) => match e {
                HypergraphError::EmptySchema => "empty-schema",
                HypergraphError::DuplicateRelation(_) => "duplicate-relation",
                HypergraphError::ZeroArity(_) => "zero-arity",
                HypergraphError::UnknownRelation(_) => "unknown-relation",
                HypergraphError::ArityMismatch { .. } => "arity-mismatch",
                HypergraphError::NodeOutOfDomain(..) => "node-out-of-domain",
                HypergraphError::DuplicateEdge(_) => "duplicate-edge",
                HypergraphError::EdgeNotPresent(_) => "edge-not-present",
            },
            SessionError::Forest(e) => match e {
                ForestError::NodeAlreadyInForest => "duplicate-edge",
                ForestError::HyperedgeMissingFromHypergraph => "edge-not-present",
                ForestError::NodeNotInForest => "edge-not-present",
                ForestError::NotSameComponent => "not-same-component",
                ForestError::Hypergraph(_) => "hypergraph",
            },
            SessionError::Engine(e) => match e {
                EngineError::NotAcyclic => "not-acyclic",
                EngineError::DiffInconsistentWithForest(_) => "diff-inconsistent",
                EngineError::NotSameComponent => "not-same-component",
                EngineError::NotDescendant => "not-descendant",
                EngineError::MalformedImage(_) => "malformed-image",
                EngineError::SelfJoinPresent => "self-join",
                EngineError::ArityMismatch { .. } => "arity-mismatch",
                EngineError::ElementOutOfDomain(..) => "element-out-of-domain",
                EngineError::DuplicateTuple => "duplicate-tuple",
                EngineError::TupleNotPresent => "tuple-not-present",
            },
            SessionError::DomainLocked => "domain-locked",
            SessionError::SchemaRedeclared => "schema-redeclared",
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SessionStats {
    pub applied: u64,
    pub denied: u64,
    pub max_diff: usize,
}

/// One scripted run: schema, query hypergraph, forest, engine and counters.
#[derive(Debug, Clone)]
pub struct Session {
    schema: Arc<Schema>,
    q: Hypergraph,
    forest: MaxSpanningForest,
    engine: EngineState,
    stats: SessionStats,
}

impl Session {
    pub fn new(schema: Schema, q_domain: usize, d_domain: usize) -> Self {
        let schema = Arc::new(schema);
        let q = Hypergraph::new(schema.clone(), q_domain);
        let forest = MaxSpanningForest::new(&schema);
        let engine = EngineState::attach(&q, &forest, DataIndex::new(schema.clone(), d_domain))
            .expect("empty query is acyclic");
        Session {
            schema,
            q,
            forest,
            engine,
            stats: SessionStats::default(),
        }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn query(&self) -> &Hypergraph {
        &self.q
    }

    pub fn forest(&self) -> &MaxSpanningForest {
        &self.forest
    }

    pub fn engine(&self) -> &EngineState {
        &self.engine
    }

    pub fn stats(&self) -> SessionStats {
        self.stats
    }

    fn rel(&self, name: &str) -> Result<RelId, SessionError> {
        self.schema
            .rel_id(name)
            .ok_or_else(|| HypergraphError::UnknownRelation(name.to_string()).into())
    }

    fn q_edge(&self, rel: &str, nodes: &[u32]) -> Result<Hyperedge, SessionError> {
        Ok(Hyperedge::new(
            self.rel(rel)?,
            nodes.iter().map(|&n| NodeId(n)).collect(),
        ))
    }

    /// Executes one command and returns its single output line.
    pub fn apply(&mut self, cmd: &Command) -> Result<String, SessionError> {
        match cmd {
            Command::Schema(_) => Err(SessionError::SchemaRedeclared),
            Command::DomQ(n) => {
                if !self.q.is_empty() {
                    return Err(SessionError::DomainLocked);
                }
                self.q = Hypergraph::new(self.schema.clone(), *n);
                self.forest = MaxSpanningForest::new(&self.schema);
                self.engine =
                    EngineState::attach(&self.q, &self.forest, self.engine.data().clone())?;
                Ok("ok".to_string())
            }
            Command::DomD(n) => {
                if self.engine.data().tuple_count() != 0 {
                    return Err(SessionError::DomainLocked);
                }
                self.engine = EngineState::attach(
                    &self.q,
                    &self.forest,
                    DataIndex::new(self.schema.clone(), *n),
                )?;
                Ok("ok".to_string())
            }
            Command::InsQ { rel, nodes } => {
                let e = self.q_edge(rel, nodes)?;
                self.change_q(e, true)
            }
            Command::DelQ { rel, nodes } => {
                let e = self.q_edge(rel, nodes)?;
                self.change_q(e, false)
            }
            Command::SetD { rel, tuples } => {
                let rel = self.rel(rel)?;
                let tuples = tuples
                    .iter()
                    .map(|t| t.iter().map(|&x| NodeId(x)).collect())
                    .collect();
                self.engine.replace_relation_d(&self.q, rel, tuples)?;
                Ok("applied".to_string())
            }
            Command::InsD { rel, elems } => {
                let rel = self.rel(rel)?;
                let tuple = elems.iter().map(|&x| NodeId(x)).collect();
                self.engine
                    .change_d_tuple(&self.q, DataChange::Insert, rel, tuple)?;
                Ok("applied".to_string())
            }
            Command::DelD { rel, elems } => {
                let rel = self.rel(rel)?;
                let tuple = elems.iter().map(|&x| NodeId(x)).collect();
                self.engine
                    .change_d_tuple(&self.q, DataChange::Delete, rel, tuple)?;
                Ok("applied".to_string())
            }
            Command::Ask => Ok(if self.engine.answer() { "yes" } else { "no" }.to_string()),
            Command::Stats => Ok(format!(
                "wQ={} wF={} maxdiff={} denied={}",
                self.q.weight(),
                self.forest.total_weight(),
                self.stats.max_diff,
                self.stats.denied
            )),
            Command::Snapshot => Ok(self.snapshot().trim_end_matches('\n').to_string()),
            Command::Check => Ok(self.check()),
        }
    }

    /// Trial-applies the query change on scratch copies; commits and updates
    /// the engine only when the hypergraph stays acyclic.
    fn change_q(&mut self, e: Hyperedge, insert: bool) -> Result<String, SessionError> {
        let mut q2 = self.q.clone();
        let mut f2 = self.forest.clone();
        let diff = if insert {
            q2.insert_edge(&e)?;
            f2.insert_hyperedge(&q2, &e)?
        } else {
            q2.delete_edge(&e)?;
            f2.delete_hyperedge(&q2, &e)?
        };
        if !f2.acyclicity(&q2).acyclic {
            self.stats.denied += 1;
            return Ok("denied".to_string());
        }
        self.q = q2;
        self.forest = f2;
        self.engine.apply_forest_diff(&self.q, &diff)?;
        self.stats.applied += 1;
        self.stats.max_diff = self.stats.max_diff.max(diff.size());
        Ok(format!("applied diff={}", diff.size()))
    }

    /// Forest `F`/`P` lines, then one `valid` line per query hyperedge with
    /// its full valid-assignment set.
    pub fn snapshot(&self) -> String {
        let mut out = self
            .forest
            .snapshot(&self.schema, self.forest.node_count() <= SNAPSHOT_PATH_CAP);
        for e in self.q.edges_iter() {
            let set = self
                .engine
                .valid_assignments(&self.q, &e, &e)
                .expect("query edge roots its own component");
            out.push_str(&format!("valid {} :", self.schema.edge_label(&e)));
            for t in &set {
                out.push(' ');
                out.push_str(&Schema::tuple_label(t));
            }
            out.push('\n');
        }
        out
    }

    /// Everything observable: forest, messages, answer and data. Denied
    /// commands must leave this string untouched.
    pub fn full_state_string(&self) -> String {
        let mut out = self.snapshot();
        out.push_str(&self.engine.state_lines(&self.schema));
        for rel in self.schema.rel_ids() {
            out.push_str(&format!("D {}", self.schema.name(rel)));
            for t in self.engine.data().tuples(rel) {
                out.push(' ');
                out.push_str(&Schema::tuple_label(t));
            }
            out.push('\n');
        }
        out
    }

    /// Runs the independent oracles against the current state.
    pub fn check(&self) -> String {
        let answer = self.engine.answer();
        let oracle_answer = oracle::brute_hom(&self.q, self.engine.data()).0;
        if answer != oracle_answer {
            return format!(
                "check failed: answer engine={} oracle={}",
                yes_no(answer),
                yes_no(oracle_answer)
            );
        }
        let kruskal = oracle::kruskal_msf_weight(&self.q);
        if self.forest.total_weight() != kruskal {
            return format!(
                "check failed: forest weight {} oracle {}",
                self.forest.total_weight(),
                kruskal
            );
        }
        let verdict = self.forest.acyclicity(&self.q).acyclic;
        let gyo = oracle::gyo_acyclic(&self.q);
        if verdict != gyo {
            return format!(
                "check failed: acyclicity verdict {} oracle {}",
                verdict, gyo
            );
        }
        "check ok".to_string()
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Output verbosity and periodic checking for script runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Suppress `ok`/`applied`/`denied` confirmations; query output,
    /// snapshots, checks and errors still print.
    pub quiet: bool,
    /// Run `check` automatically after every k executed commands.
    pub check_every: Option<usize>,
}

/// Executes a script from `input`, writing one line per command to `out`.
///
/// The first command must be the schema declaration. Parse errors abort the
/// run with exit status 2; state errors print `error <kind>` and processing
/// continues, turning the final exit status to 1.
pub fn run_script(
    input: impl BufRead,
    mut out: impl Write,
    opts: RunOptions,
) -> std::io::Result<i32> {
    let mut session: Option<Session> = None;
    let mut had_error = false;
    let mut executed = 0usize;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let cmd = match parse_line(&line) {
            Ok(None) => continue,
            Ok(Some(cmd)) => cmd,
            Err(ParseError { msg }) => {
                writeln!(out, "error parse line {}: {}", idx + 1, msg)?;
                return Ok(2);
            }
        };
        let outcome = match (&mut session, &cmd) {
            (None, Command::Schema(rels)) => match Schema::new(rels.clone()) {
                Ok(schema) => {
                    session = Some(Session::new(schema, DEFAULT_DOMAIN, DEFAULT_DOMAIN));
                    Ok("ok".to_string())
                }
                Err(e) => Err(SessionError::from(e)),
            },
            (None, _) => {
                writeln!(out, "error parse line {}: schema must come first", idx + 1)?;
                return Ok(2);
            }
            (Some(session), cmd) => session.apply(cmd),
        };
        match outcome {
            Ok(line) => {
                let confirmation = line == "ok"
                    || line == "applied"
                    || line == "denied"
                    || line.starts_with("applied ");
                // an empty snapshot contributes no lines
                if !(opts.quiet && confirmation) && !line.is_empty() {
                    writeln!(out, "{}", line)?;
                }
            }
            Err(e) => {
                had_error = true;
                writeln!(out, "error {}", e.kind())?;
            }
        }
        executed += 1;
        if let (Some(k), Some(session)) = (opts.check_every, &session) {
            if k > 0 && executed.is_multiple_of(k) {
                writeln!(out, "{}", session.check())?;
            }
        }
    }
    Ok(if had_error { 1 } else { 0 })
}
