//! Heap snapshot abstraction.
//!
//! A concrete heap ([`heap_model::ConcreteHeap`]) is summarized into an
//! [`abstract_graph::AbstractGraph`] whose nodes stand for regions of
//! objects and whose edges stand for the pointers between them, annotated
//! with types, cardinalities, injectivity and shape. The embedding returned
//! alongside lets [`abstract_graph::check_embedding`] confirm that the heap
//! is one of the graph's concretizations.

pub mod abstract_graph;
pub mod algebra;
pub mod abstraction;
mod closure;
pub mod diagnostics;
pub mod export;
pub mod fixtures;
pub mod heap_model;
pub mod interval;
pub mod reduction;

pub use algebra::{compare, merge, CompareResult, MergeMode};
pub use abstract_graph::{canonicalize, check_embedding, AbstractGraph, AbstractLabel, NodeId};
pub use abstraction::{abstract_heap, AbstractionOptions, EmbeddingMap};
pub use heap_model::{parse_snapshot, ConcreteHeap, ObjId};
pub use interval::Interval;
