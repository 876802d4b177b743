//! Per-node memory metrics, bloat detectors and the snapshot backoff rule.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::abstract_graph::{AbstractGraph, NodeId};
use crate::abstraction::EmbeddingMap;
use crate::heap_model::{ConcreteHeap, ConcreteObject, TypeTable};

/// Header bytes assumed per object.
pub const HEADER_BYTES: u64 = 4;

/// Size of an object whose snapshot entry has no `bytes`.
#[derive(Clone, Debug)]
pub struct ByteEstimator {
    pub header: u64,
    pub slot: u64,
    /// Extra bytes per type name (primitive fields the snapshot does not list).
    pub type_extra: HashMap<String, u64>,
}

impl Default for ByteEstimator {
    fn default() -> Self {
        ByteEstimator { header: HEADER_BYTES, slot: 4, type_extra: HashMap::new() }
    }
}

impl ByteEstimator {
    pub fn bytes(&self, tt: &TypeTable, o: &ConcreteObject) -> u64 {
        if let Some(b) = o.bytes {
            return b;
        }
        let extra = tt.get(o.ty).and_then(|t| self.type_extra.get(&t.name)).copied().unwrap_or(0);
        self.header + self.slot * (o.fields.len() + o.elements.len()) as u64 + extra
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum FindingKind {
    Hot5,
    Hot15,
    Hot25,
    SmallObjects,
    SmallContainers,
    SparseContainers,
    OverFactored,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeMetrics {
    pub node: NodeId,
    pub object_count: u64,
    pub total_bytes: u64,
    pub overhead_bytes: u64,
    pub data_bytes: u64,
    pub heap_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heat: Option<FindingKind>,
}

impl NodeMetrics {
    /// Header overhead is more than half the data.
    pub fn small_objects(&self) -> bool {
        self.object_count > 0 && 2 * self.overhead_bytes > self.data_bytes
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub node: NodeId,
    pub evidence: BTreeMap<&'static str, u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Diagnostics {
    pub heap_bytes: u64,
    pub metrics: Vec<NodeMetrics>,
    pub findings: Vec<Finding>,
}

/// Heat bucket of `part` bytes out of `total`.
pub fn heat(part: u64, total: u64) -> Option<FindingKind> {
    let (t, tot) = (part as u128, total as u128);
    if 4 * t > tot {
        Some(FindingKind::Hot25)
    } else if 100 * t > 15 * tot {
        Some(FindingKind::Hot15)
    } else if 20 * t > tot {
        Some(FindingKind::Hot5)
    } else {
        None
    }
}

/// Metrics for every content node of `g`, in node order.
pub fn compute_metrics(h: &ConcreteHeap, g: &AbstractGraph, mu: &EmbeddingMap, est: &ByteEstimator) -> Vec<NodeMetrics> {
    let tt = h.types();
    let total: u64 = h.objects().iter().map(|o| est.bytes(tt, o)).sum();
    g.content_nodes()
        .map(|n| {
            let members = mu.members(n.id);
            let total_bytes: u64 = members.iter().filter_map(|&o| h.object(o)).map(|o| est.bytes(tt, o)).sum();
            let object_count = members.len() as u64;
            let overhead_bytes = (HEADER_BYTES * object_count).min(total_bytes);
            NodeMetrics {
                node: n.id,
                object_count,
                total_bytes,
                overhead_bytes,
                data_bytes: total_bytes - overhead_bytes,
                heap_fraction: if total == 0 { 0.0 } else { total_bytes as f64 / total as f64 },
                heat: heat(total_bytes, total),
            }
        })
        .collect()
}

pub fn detect_heat(metrics: &[NodeMetrics]) -> Vec<Finding> {
    metrics
        .iter()
        .filter_map(|m| {
            m.heat.map(|kind| Finding {
                kind,
                node: m.node,
                evidence: [("totalBytes", m.total_bytes), ("permille", (m.heap_fraction * 1000.0).round() as u64)].into(),
            })
        })
        .collect()
}

pub fn detect_small_objects(metrics: &[NodeMetrics]) -> Vec<Finding> {
    metrics
        .iter()
        .filter(|m| m.small_objects())
        .map(|m| Finding {
            kind: FindingKind::SmallObjects,
            node: m.node,
            evidence: [("overheadBytes", m.overhead_bytes), ("dataBytes", m.data_bytes), ("objects", m.object_count)].into(),
        })
        .collect()
}

/// Nodes whose members are all arrays or containers: small when every one
/// holds at most 3 non-null elements, sparse when every one is more than
/// half null.
pub fn detect_container_issues(h: &ConcreteHeap, g: &AbstractGraph, mu: &EmbeddingMap) -> Vec<Finding> {
    let mut out = Vec::new();
    for n in g.content_nodes() {
        let objs: Vec<&ConcreteObject> = mu.members(n.id).iter().filter_map(|&o| h.object(o)).collect();
        if objs.is_empty() || !objs.iter().all(|o| h.type_of(o.id).is_some_and(|t| t.kind.has_elements())) {
            continue;
        }
        let live = |o: &ConcreteObject| o.elements.iter().filter(|e| !e.is_null()).count() as u64;
        let slots = |o: &ConcreteObject| o.elements.len() as u64;
        let max_live = objs.iter().map(|o| live(o)).max().unwrap();
        let count = objs.len() as u64;
        if max_live <= 3 {
            out.push(Finding {
                kind: FindingKind::SmallContainers,
                node: n.id,
                evidence: [("containers", count), ("maxElements", max_live)].into(),
            });
        }
        if objs.iter().all(|o| 2 * (slots(o) - live(o)) > slots(o)) {
            let nulls: u64 = objs.iter().map(|o| slots(o) - live(o)).sum();
            let total: u64 = objs.iter().map(|o| slots(o)).sum();
            out.push(Finding {
                kind: FindingKind::SparseContainers,
                node: n.id,
                evidence: [("containers", count), ("nullSlots", nulls), ("slots", total)].into(),
            });
        }
    }
    out
}

/// Small-object nodes with exactly one incoming edge (edges from root not
/// counted), that edge injective.
pub fn detect_overfactored(g: &AbstractGraph, metrics: &[NodeMetrics]) -> Vec<Finding> {
    metrics
        .iter()
        .filter(|m| m.small_objects())
        .filter_map(|m| {
            let incoming: Vec<bool> = g.in_edges(m.node).filter(|(k, _)| k.src != g.root()).map(|(_, i)| i).collect();
            (incoming == [true]).then(|| Finding {
                kind: FindingKind::OverFactored,
                node: m.node,
                evidence: [("objects", m.object_count), ("dataBytes", m.data_bytes)].into(),
            })
        })
        .collect()
}

/// All metrics and findings, findings ordered by (node, kind).
pub fn diagnose(h: &ConcreteHeap, g: &AbstractGraph, mu: &EmbeddingMap, est: &ByteEstimator) -> Diagnostics {
    let metrics = compute_metrics(h, g, mu, est);
    let mut findings = detect_heat(&metrics);
    findings.extend(detect_small_objects(&metrics));
    findings.extend(detect_container_issues(h, g, mu));
    findings.extend(detect_overfactored(g, &metrics));
    findings.sort_by_key(|f| (f.node, f.kind));
    let heap_bytes = h.objects().iter().map(|o| est.bytes(h.types(), o)).sum();
    Diagnostics { heap_bytes, metrics, findings }
}

// ---------------------------------------------------------------------------
// Snapshot backoff

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SamplerState {
    pub threshold: u64,
    pub active: bool,
    pub snapshots_taken: u64,
}

impl SamplerState {
    /// State seeded from the first reading, before any snapshot.
    pub fn new(first_reading: u64) -> Self {
        SamplerState { threshold: first_reading.max(1), active: false, snapshots_taken: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Skip,
    Snapshot,
}

/// Snapshot when reachable bytes moved by a factor of 1.5 either way.
pub fn backoff_step(st: SamplerState, reachable: u64) -> (SamplerState, Decision) {
    let (r, t) = (reachable as u128, st.threshold as u128);
    if 2 * r >= 3 * t || 3 * r <= 2 * t {
        let next = SamplerState { threshold: reachable.max(1), active: true, snapshots_taken: st.snapshots_taken + 1 };
        (next, Decision::Snapshot)
    } else {
        (st, Decision::Skip)
    }
}

pub fn run_trace(mut st: SamplerState, trace: &[u64]) -> (SamplerState, Vec<Decision>) {
    let decisions = trace
        .iter()
        .map(|&r| {
            let (next, d) = backoff_step(st, r);
            st = next;
            d
        })
        .collect();
    (st, decisions)
}

/// Heap growth then release: 20 readings ramping 100 to 400, then 10
/// decaying back to 100.
pub fn ramp_decay_trace() -> Vec<u64> {
    let ramp = (0..20).map(|i| 100 + 300 * i / 19);
    let decay = (1..=10).map(|i| 400 - 300 * i / 10);
    ramp.chain(decay).collect()
}
