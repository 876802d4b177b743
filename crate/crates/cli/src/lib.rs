//! Command line front end and local HTTP service for heap snapshots.

pub mod api;
pub mod commands;
pub mod server;
pub mod store;

use heapscope_core::abstract_graph::canonicalize_with_map;
use heapscope_core::abstraction::AbstractionError;
use heapscope_core::diagnostics::Diagnostics;
use heapscope_core::{abstract_heap, AbstractGraph, AbstractionOptions, ConcreteHeap, EmbeddingMap};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of `bytes`; snapshots are keyed by it.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Abstraction in canonical numbering, with μ renamed to match.
pub fn abstract_canonical(h: &ConcreteHeap, opts: &AbstractionOptions) -> Result<(AbstractGraph, EmbeddingMap), AbstractionError> {
    let (g, mu) = abstract_heap(h, opts)?;
    let (g, map) = canonicalize_with_map(&g);
    Ok((g, mu.relabel(&map)))
}

pub fn report_json(snapshot_hash: &str, d: &Diagnostics) -> Value {
    json!({
        "version": VERSION,
        "snapshot": snapshot_hash,
        "heapBytes": d.heap_bytes,
        "metrics": d.metrics,
        "findings": d.findings,
    })
}
