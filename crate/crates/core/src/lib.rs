//! dynhom: incremental maintenance of acyclic hypergraph structure and
//! homomorphism answers.
//!
//! The library keeps three things in sync while a query hypergraph changes
//! one hyperedge at a time:
//!
//! * whether the hypergraph is α-acyclic, via the weight comparison against a
//!   maximal-weight spanning forest of its weighted hyperedge graph
//!   ([`msf::MaxSpanningForest`]),
//! * the spanning forest itself, which doubles as a join forest while the
//!   hypergraph stays acyclic, with constant-size diffs per change,
//! * the existence of a homomorphism into a fixed data hypergraph, by
//!   semijoin messages on the join forest ([`engine::EngineState`]).
//!
//! [`circuit`] adds layered semi-unbounded circuits, proof trees and their
//! encoding as hypergraph instances; that pipeline serves as an independent
//! correctness oracle for the engine. [`oracle`] holds brute-force reference
//! implementations used throughout the test suites, and [`session`] drives
//! everything from a line-oriented script protocol.

pub mod circuit;
pub mod engine;
pub mod hypergraph;
pub mod msf;
pub mod oracle;
pub mod script;
pub mod session;

pub use engine::{DataIndex, EngineError, EngineState};
pub use hypergraph::{Hyperedge, Hypergraph, HypergraphError, NodeId, NodeSet, RelId, Schema};
pub use msf::{
    AcyclicityVerdict, DiffEvent, ForestEdge, ForestError, MaxSpanningForest, QueryChange,
};
pub use session::Session;
