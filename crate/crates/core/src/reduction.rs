//! Dominator-based collapsing of abstract graphs, and zoom by re-abstraction.
//!
//! Interesting nodes are variable targets and their neighbors. Every other
//! node joins the group of its nearest interesting ancestor in the dominator
//! tree, computed with in-edges to interesting nodes replaced by edges from
//! root.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::abstract_graph::{AbstractGraph, AbstractLabel, EdgeKey, NodeId};
use crate::abstraction::{abstract_heap, AbstractionError, AbstractionOptions, EmbeddingMap};
use crate::heap_model::{ConcreteHeap, ObjId};
use crate::interval::Interval;

/// Reduced node id. 0 and 1 stand for root and null.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ReducedId(pub u64);

impl ReducedId {
    pub const ROOT: ReducedId = ReducedId(0);
    pub const NULL: ReducedId = ReducedId(1);
}

impl std::fmt::Display for ReducedId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReducedNode {
    pub id: ReducedId,
    /// The interesting node heading the group; `None` for the unreachable group.
    pub head: Option<NodeId>,
    pub covers: BTreeSet<NodeId>,
    pub types: BTreeSet<String>,
    pub card: Interval,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes: Option<u64>,
    pub interesting: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedEdge {
    pub src: ReducedId,
    pub tgt: ReducedId,
    pub labels: BTreeSet<AbstractLabel>,
    pub injective: bool,
    pub edges: Vec<EdgeKey>,
}

#[derive(Clone, Debug, Default)]
pub struct ReduceOptions {
    /// Only successors of variable targets stay expanded.
    pub successors_only: bool,
    /// Per abstract node byte totals, summed into the groups when present.
    pub bytes: Option<BTreeMap<NodeId, u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedGraph {
    graph: AbstractGraph,
    nodes: BTreeMap<ReducedId, ReducedNode>,
    edges: Vec<ReducedEdge>,
    owner: BTreeMap<NodeId, ReducedId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subview {
    pub nodes: Vec<NodeId>,
    pub internal: Vec<EdgeKey>,
    pub boundary: Vec<EdgeKey>,
}

impl Subview {
    pub fn to_json(&self, g: &AbstractGraph) -> serde_json::Value {
        let edge = |k: &EdgeKey| {
            serde_json::json!({"src": k.src.0, "label": k.label.as_str(), "tgt": k.tgt.0, "injective": g.edge(k)})
        };
        serde_json::json!({
            "nodes": self.nodes.iter().map(|n| {
                let node = g.node(*n).unwrap();
                serde_json::json!({"id": n.0, "types": node.types, "card": node.card})
            }).collect::<Vec<_>>(),
            "internal": self.internal.iter().map(edge).collect::<Vec<_>>(),
            "boundary": self.boundary.iter().map(edge).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReduceError {
    #[error("unknown reduced node {0}")]
    UnknownReducedNode(ReducedId),
}

impl ReducedGraph {
    pub fn graph(&self) -> &AbstractGraph {
        &self.graph
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ReducedNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: ReducedId) -> Option<&ReducedNode> {
        self.nodes.get(&id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[ReducedEdge] {
        &self.edges
    }

    /// Reduced node holding an abstract node; root and null map to their
    /// pseudo ids.
    pub fn owner(&self, n: NodeId) -> Option<ReducedId> {
        if n == self.graph.root() {
            Some(ReducedId::ROOT)
        } else if n == self.graph.null() {
            Some(ReducedId::NULL)
        } else {
            self.owner.get(&n).copied()
        }
    }

    pub fn expand(&self, id: ReducedId) -> Result<Subview, ReduceError> {
        let node = self.nodes.get(&id).ok_or(ReduceError::UnknownReducedNode(id))?;
        let mut internal = Vec::new();
        let mut boundary = Vec::new();
        for (k, _) in self.graph.edge_entries() {
            let (s, t) = (node.covers.contains(&k.src), node.covers.contains(&k.tgt));
            if s && t {
                internal.push(k.clone());
            } else if s || t {
                boundary.push(k.clone());
            }
        }
        Ok(Subview { nodes: node.covers.iter().copied().collect(), internal, boundary })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "nodes": self.nodes.values().collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| serde_json::json!({
                "src": e.src, "tgt": e.tgt,
                "labels": e.labels.iter().map(|l| l.as_str()).collect::<Vec<_>>(),
                "injective": e.injective,
                "edges": e.edges.iter().map(|k| k.to_string()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Immediate dominators over nodes `0..n` with entry 0; `None` for
/// unreachable nodes. Iterative scheme over reverse postorder.
pub(crate) fn immediate_dominators(n: usize, succ: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut pred = vec![Vec::new(); n];
    for (u, vs) in succ.iter().enumerate() {
        for &v in vs {
            pred[v].push(u);
        }
    }
    // postorder by iterative DFS
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut stack = vec![(0usize, 0usize)];
    seen[0] = true;
    while let Some(&mut (u, ref mut i)) = stack.last_mut() {
        if *i < succ[u].len() {
            let v = succ[u][*i];
            *i += 1;
            if !seen[v] {
                seen[v] = true;
                stack.push((v, 0));
            }
        } else {
            order.push(u);
            stack.pop();
        }
    }
    let mut po = vec![usize::MAX; n];
    for (i, &u) in order.iter().enumerate() {
        po[u] = i;
    }
    let mut idom: Vec<Option<usize>> = vec![None; n];
    idom[0] = Some(0);
    let intersect = |idom: &[Option<usize>], mut a: usize, mut b: usize| {
        while a != b {
            while po[a] < po[b] {
                a = idom[a].unwrap();
            }
            while po[b] < po[a] {
                b = idom[b].unwrap();
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &u in order.iter().rev().skip(1) {
            let mut new = None;
            for &p in &pred[u] {
                if idom[p].is_some() {
                    new = Some(match new {
                        None => p,
                        Some(q) => intersect(&idom, p, q),
                    });
                }
            }
            if new.is_some() && idom[u] != new {
                idom[u] = new;
                changed = true;
            }
        }
    }
    idom[0] = None;
    idom
}

pub fn reduce(g: &AbstractGraph) -> ReducedGraph {
    reduce_with(g, &ReduceOptions::default())
}

pub fn reduce_with(g: &AbstractGraph, opts: &ReduceOptions) -> ReducedGraph {
    let (root, null) = (g.root(), g.null());
    let content: Vec<NodeId> = g.content_nodes().map(|n| n.id).collect();

    let var_targets: BTreeSet<NodeId> = g.out_edges(root).map(|(k, _)| k.tgt).filter(|&t| t != null).collect();
    let mut interesting = var_targets.clone();
    for &v in &var_targets {
        interesting.extend(g.out_edges(v).map(|(k, _)| k.tgt));
        if !opts.successors_only {
            interesting.extend(g.in_edges(v).map(|(k, _)| k.src));
        }
    }
    interesting.remove(&root);
    interesting.remove(&null);

    // dense index: 0 root, then content nodes
    let idx: BTreeMap<NodeId, usize> = content.iter().enumerate().map(|(i, &n)| (n, i + 1)).collect();
    let mut succ = vec![Vec::new(); content.len() + 1];
    for &i in &interesting {
        succ[0].push(idx[&i]);
    }
    for (k, _) in g.edge_entries() {
        if k.tgt == null || interesting.contains(&k.tgt) {
            continue;
        }
        let s = if k.src == root { 0 } else { idx[&k.src] };
        succ[s].push(idx[&k.tgt]);
    }
    for s in succ.iter_mut() {
        s.sort_unstable();
        s.dedup();
    }
    let idom = immediate_dominators(content.len() + 1, &succ);

    let head_of = |n: NodeId| -> Option<NodeId> {
        let mut i = idx[&n];
        idom[i]?;
        loop {
            let node = content[i - 1];
            let up = idom[i].unwrap();
            if interesting.contains(&node) || up == 0 {
                return Some(node);
            }
            i = up;
        }
    };

    let mut groups: BTreeMap<Option<NodeId>, BTreeSet<NodeId>> = BTreeMap::new();
    for &n in &content {
        groups.entry(head_of(n)).or_default().insert(n);
    }
    // heads in id order, the unreachable group last
    let mut ordered: Vec<(Option<NodeId>, BTreeSet<NodeId>)> = groups.into_iter().filter(|(h, _)| h.is_some()).collect();
    let unreachable: BTreeSet<NodeId> = content.iter().copied().filter(|&n| head_of(n).is_none()).collect();
    if !unreachable.is_empty() {
        ordered.push((None, unreachable));
    }

    let mut nodes = BTreeMap::new();
    let mut owner = BTreeMap::new();
    for (i, (head, covers)) in ordered.into_iter().enumerate() {
        let id = ReducedId(2 + i as u64);
        let mut types = BTreeSet::new();
        let mut card = Interval::ZERO;
        for &n in &covers {
            let node = g.node(n).unwrap();
            types.extend(node.types.iter().cloned());
            card = card.sum(&node.card);
            owner.insert(n, id);
        }
        let bytes = opts.bytes.as_ref().map(|b| covers.iter().map(|n| b.get(n).copied().unwrap_or(0)).sum());
        let interesting = head.is_some_and(|h| interesting.contains(&h));
        nodes.insert(id, ReducedNode { id, head, covers, types, card, bytes, interesting });
    }

    let own = |n: NodeId| {
        if n == root {
            ReducedId::ROOT
        } else if n == null {
            ReducedId::NULL
        } else {
            owner[&n]
        }
    };
    let mut by_pair: BTreeMap<(ReducedId, ReducedId), ReducedEdge> = BTreeMap::new();
    for (k, inj) in g.edge_entries() {
        let (s, t) = (own(k.src), own(k.tgt));
        if s == t {
            continue;
        }
        let e = by_pair.entry((s, t)).or_insert_with(|| ReducedEdge {
            src: s,
            tgt: t,
            labels: BTreeSet::new(),
            injective: true,
            edges: Vec::new(),
        });
        e.labels.insert(k.label.clone());
        e.injective &= inj;
        e.edges.push(k.clone());
    }

    ReducedGraph { graph: g.clone(), nodes, edges: by_pair.into_values().collect(), owner }
}

/// Re-abstracts `h` with the given objects kept as singleton nodes.
pub fn zoom(
    h: &ConcreteHeap,
    interesting: &BTreeSet<ObjId>,
    opts: &AbstractionOptions,
) -> Result<(AbstractGraph, EmbeddingMap), AbstractionError> {
    let mut opts = opts.clone();
    opts.interesting_objects = interesting.clone();
    abstract_heap(h, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstract_graph::{canonicalize, AbstractEdge, AbstractNode};
    use crate::fixtures::{build_fixture, Fixture};

    fn abs(fx: Fixture) -> AbstractGraph {
        let h = build_fixture(&fx).unwrap();
        canonicalize(&abstract_heap(&h, &AbstractionOptions::default()).unwrap().0)
    }

    #[test]
    fn dominators_of_diamond() {
        // 0 -> 1, 0 -> 2, 1 -> 3, 2 -> 3, 3 -> 4; 5 unreachable
        let succ = vec![vec![1, 2], vec![3], vec![3], vec![4], vec![], vec![4]];
        let idom = immediate_dominators(6, &succ);
        assert_eq!(idom, vec![None, Some(0), Some(0), Some(0), Some(3), None]);
    }

    #[test]
    fn exprtree_is_not_collapsed() {
        let g = abs(Fixture::ExprTree);
        let r = reduce(&g);
        assert_eq!(r.node_count(), 4);
        assert!(r.nodes().all(|n| n.covers.len() == 1 && n.interesting));
    }

    #[test]
    fn chain_collapses_below_neighbor() {
        let node = |id: u64, t: &str| AbstractNode {
            id: NodeId(id),
            types: if t.is_empty() { BTreeSet::new() } else { [t.to_string()].into() },
            card: Interval::ONE,
        };
        let edge = |s: u64, l: &str, t: u64| AbstractEdge {
            key: EdgeKey { src: NodeId(s), label: AbstractLabel::named(l), tgt: NodeId(t) },
            injective: true,
        };
        let g = AbstractGraph::new(
            NodeId(0),
            NodeId(1),
            [node(0, ""), node(1, ""), node(2, "A"), node(3, "B"), node(4, "C")],
            [edge(0, "x", 2), edge(2, "f", 3), edge(3, "f", 4)],
            [],
        )
        .unwrap();
        let r = reduce(&g);
        assert_eq!(r.node_count(), 2);
        assert_eq!(r.owner(NodeId(3)), r.owner(NodeId(4)));
        assert_ne!(r.owner(NodeId(2)), r.owner(NodeId(3)));
        let sub = r.expand(r.owner(NodeId(3)).unwrap()).unwrap();
        assert_eq!(sub.nodes, vec![NodeId(3), NodeId(4)]);
        assert_eq!(sub.internal.len(), 1);
        assert_eq!(sub.boundary.len(), 1);
    }

    #[test]
    fn octree_scene_halves() {
        let g = abs(Fixture::OctreeScene { depth: 3 });
        let r = reduce(&g);
        let content = g.content_nodes().count();
        assert!(2 * r.node_count() <= content, "{} of {}", r.node_count(), content);
        let mut seen = BTreeSet::new();
        for n in r.nodes() {
            for &a in &r.expand(n.id).unwrap().nodes {
                assert!(seen.insert(a));
            }
        }
        assert_eq!(seen.len(), content);
        let total: Interval = g.content_nodes().map(|n| n.card).sum();
        let reduced: Interval = r.nodes().map(|n| n.card).sum();
        assert_eq!(total, reduced);
    }

    #[test]
    fn expand_unknown_is_an_error() {
        let r = reduce(&abs(Fixture::List(3)));
        assert_eq!(r.expand(ReducedId(99)), Err(ReduceError::UnknownReducedNode(ReducedId(99))));
    }

    #[test]
    fn zoom_pins_objects() {
        let h = build_fixture(&Fixture::List(5)).unwrap();
        let all: BTreeSet<ObjId> = h.objects().iter().map(|o| o.id).collect();
        let (g, _) = zoom(&h, &all, &AbstractionOptions::default()).unwrap();
        assert_eq!(g.content_nodes().count(), 5);
        assert!(g.content_nodes().all(|n| n.card == Interval::ONE));
        let (g0, _) = zoom(&h, &BTreeSet::new(), &AbstractionOptions::default()).unwrap();
        assert_eq!(g0, abstract_heap(&h, &AbstractionOptions::default()).unwrap().0);
    }
}
