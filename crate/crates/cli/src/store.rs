use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use heapscope_core::abstraction::AbstractionError;
use heapscope_core::diagnostics::{diagnose, ByteEstimator, Diagnostics};
use heapscope_core::export::Decorations;
use heapscope_core::heap_model::SnapshotError;
use heapscope_core::reduction::{reduce, ReducedGraph};
use heapscope_core::{parse_snapshot, AbstractGraph, AbstractionOptions, ConcreteHeap, EmbeddingMap};
use serde_json::Value;
use thiserror::Error;

use crate::{abstract_canonical, content_hash};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
}

/// A loaded snapshot and everything computed from it. Immutable apart from
/// the zoom cache.
pub struct Session {
    pub hash: String,
    pub name: String,
    pub heap: ConcreteHeap,
    pub graph: AbstractGraph,
    pub mu: EmbeddingMap,
    pub reduced: ReducedGraph,
    pub diagnostics: Diagnostics,
    pub decorations: Decorations,
    zooms: RwLock<HashMap<String, Arc<Value>>>,
}

impl Session {
    pub fn build(name: &str, bytes: &[u8]) -> Result<Session, LoadError> {
        let heap = parse_snapshot(bytes)?;
        let (graph, mu) = abstract_canonical(&heap, &AbstractionOptions::default())?;
        let reduced = reduce(&graph);
        let diagnostics = diagnose(&heap, &graph, &mu, &ByteEstimator::default());
        let decorations = Decorations::from_heap(&heap, &graph, &mu, Some(&diagnostics));
        Ok(Session {
            hash: content_hash(bytes),
            name: name.to_string(),
            heap,
            graph,
            mu,
            reduced,
            diagnostics,
            decorations,
            zooms: RwLock::new(HashMap::new()),
        })
    }

    pub fn cached_zoom(&self, key: &str) -> Option<Arc<Value>> {
        self.zooms.read().unwrap().get(key).cloned()
    }

    /// Keeps the first result stored under `key`.
    pub fn store_zoom(&self, key: String, value: Value) -> Arc<Value> {
        self.zooms.write().unwrap().entry(key).or_insert_with(|| Arc::new(value)).clone()
    }
}

/// Sessions by content hash.
#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<BTreeMap<String, Arc<Session>>>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads `bytes` unless a snapshot with the same hash is already
    /// registered, in which case that one is returned.
    pub fn register(&self, name: &str, bytes: &[u8]) -> Result<Arc<Session>, LoadError> {
        if let Some(s) = self.get(&content_hash(bytes)) {
            return Ok(s);
        }
        let session = Arc::new(Session::build(name, bytes)?);
        let mut map = self.sessions.write().unwrap();
        Ok(map.entry(session.hash.clone()).or_insert(session).clone())
    }

    pub fn get(&self, hash: &str) -> Option<Arc<Session>> {
        self.sessions.read().unwrap().get(hash).cloned()
    }

    pub fn list(&self) -> Vec<Arc<Session>> {
        self.sessions.read().unwrap().values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
