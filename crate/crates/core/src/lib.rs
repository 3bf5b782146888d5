//! Exact simulation of three equivalent machine models on labeled directed
//! graphs: graded modal substitution calculus (GMSC) programs, bounded
//! counting message-passing automata (FCMPA), and graph neural networks over
//! finite floating-point systems, together with the translations between them
//! and a brute-force equivalence harness.

pub mod acceptance;
pub mod automata;
pub mod bits;
pub mod circuit;
pub mod corpus;
pub mod error;
pub mod exec;
pub mod float;
pub mod gml;
pub mod gmsc;
pub mod gnn;
pub mod graph;
pub mod harness;
pub mod multiset;
pub mod transform;
pub mod types;

pub use acceptance::{classify_all, trace, Classifier, IterExpr, Machine, MachineKind, RunTrace};
pub use automata::Fcmpa;
pub use error::{Error, Result};
pub use exec::Exec;
pub use float::{Float, FloatSystem};
pub use gml::Formula;
pub use gmsc::GmscProgram;
pub use gnn::{GnnF, NLayerGnn, RSimpleParams};
pub use graph::{LabelSet, LabeledGraph, PointedGraph};
pub use harness::{EquivReport, GraphSource};
pub use multiset::BoundedMultiset;
pub use types::GradedType;
