//! Heap abstraction: partition the objects, then summarize each partition
//! and the pointers between partitions.
//!
//! Partitioning runs in two phases over a union-find:
//! 1. objects joined by a pointer whose endpoint types belong to the same
//!    recursive type group are unioned;
//! 2. a congruence closure unions the targets of same-labeled pointers that
//!    leave one partition and reach partitions with overlapping type sets.
//!
//! Null, root and interesting objects are never unioned.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstract_graph::{AbstractEdge, AbstractGraph, AbstractLabel, AbstractNode, EdgeKey, NodeId, ShapeFact};
use crate::closure::Closure;
use crate::heap_model::{
    recursive_relation, ConcreteHeap, ConcreteObject, Label, ObjId, RecursiveRelation, Region, Shape, Source, TypeKind,
};
use crate::interval::Interval;

pub const FORMAT_MU: &str = "ahg-mu-1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractionOptions {
    /// Type-name prefixes whose objects are kept as single opaque objects.
    pub opaque_type_names: BTreeSet<String>,
    /// Type names shown as ideal containers: element links to the user
    /// objects reachable through their (opaque) internals.
    pub transparent_containers: BTreeSet<String>,
    pub shape_subset_limit: usize,
    /// Objects that stay singleton partitions.
    pub interesting_objects: BTreeSet<ObjId>,
}

impl Default for AbstractionOptions {
    fn default() -> Self {
        AbstractionOptions {
            opaque_type_names: BTreeSet::new(),
            transparent_containers: BTreeSet::new(),
            shape_subset_limit: 4,
            interesting_objects: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AbstractionError {
    #[error("interesting object {0} is not in the heap")]
    UnknownObject(ObjId),
    #[error("shape subset limit must be at least 1")]
    BadSubsetLimit,
}

// ---------------------------------------------------------------------------
// Embedding map

/// Total map from concrete objects to abstract nodes, with its inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbeddingMap {
    root: NodeId,
    null: NodeId,
    objects: BTreeMap<ObjId, NodeId>,
    inverse: BTreeMap<NodeId, BTreeSet<ObjId>>,
}

static NO_MEMBERS: BTreeSet<ObjId> = BTreeSet::new();

impl EmbeddingMap {
    pub fn new(root: NodeId, null: NodeId, pairs: impl IntoIterator<Item = (ObjId, NodeId)>) -> Self {
        let mut m = EmbeddingMap { root, null, objects: BTreeMap::new(), inverse: BTreeMap::new() };
        for (o, n) in pairs {
            m.insert(o, n);
        }
        m
    }

    fn insert(&mut self, o: ObjId, n: NodeId) {
        if let Some(old) = self.objects.insert(o, n) {
            if let Some(set) = self.inverse.get_mut(&old) {
                set.remove(&o);
                if set.is_empty() {
                    self.inverse.remove(&old);
                }
            }
        }
        self.inverse.entry(n).or_default().insert(o);
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn null(&self) -> NodeId {
        self.null
    }

    pub fn get(&self, o: ObjId) -> Option<NodeId> {
        if o.is_null() {
            return Some(self.null);
        }
        self.objects.get(&o).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ObjId, NodeId)> + '_ {
        self.objects.iter().map(|(&o, &n)| (o, n))
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// `μ⁻¹(n)`, excluding root and null.
    pub fn members(&self, n: NodeId) -> &BTreeSet<ObjId> {
        self.inverse.get(&n).unwrap_or(&NO_MEMBERS)
    }

    /// Nodes with at least one member object.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.inverse.keys().copied()
    }

    pub fn remove(&mut self, o: ObjId) -> Option<NodeId> {
        let n = self.objects.remove(&o)?;
        if let Some(set) = self.inverse.get_mut(&n) {
            set.remove(&o);
            if set.is_empty() {
                self.inverse.remove(&n);
            }
        }
        Some(n)
    }

    /// Composes with a node map, e.g. a canonical renumbering or a merge's η.
    pub fn compose(&self, f: impl Fn(NodeId) -> NodeId) -> EmbeddingMap {
        EmbeddingMap::new(f(self.root), f(self.null), self.iter().map(|(o, n)| (o, f(n))))
    }

    pub fn relabel(&self, map: &BTreeMap<NodeId, NodeId>) -> EmbeddingMap {
        self.compose(|n| map[&n])
    }

    pub fn to_json(&self) -> String {
        let doc = MuDoc {
            format: FORMAT_MU.to_string(),
            root: self.root.0,
            null: self.null.0,
            objects: self.objects.iter().map(|(o, n)| (o.0, n.0)).collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("embedding serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, MuFormatError> {
        let value: serde_json::Value = serde_json::from_slice(bytes)
            .map_err(|e| MuFormatError { at: format!("line {} column {}", e.line(), e.column()), msg: e.to_string() })?;
        match value.get("format") {
            Some(serde_json::Value::String(f)) if f == FORMAT_MU => {}
            _ => return Err(MuFormatError { at: "format".into(), msg: format!("expected \"{FORMAT_MU}\"") }),
        }
        let doc: MuDoc = serde_path_to_error::deserialize(value)
            .map_err(|e| MuFormatError { at: e.path().to_string(), msg: e.inner().to_string() })?;
        if let Some(o) = doc.objects.keys().find(|&&o| o == 0) {
            return Err(MuFormatError { at: format!("objects.{o}"), msg: "null is mapped implicitly".into() });
        }
        Ok(EmbeddingMap::new(
            NodeId(doc.root),
            NodeId(doc.null),
            doc.objects.into_iter().map(|(o, n)| (ObjId(o), NodeId(n))),
        ))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MuDoc {
    format: String,
    root: u64,
    null: u64,
    objects: BTreeMap<u64, u64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("embedding document error at {at}: {msg}")]
pub struct MuFormatError {
    pub at: String,
    pub msg: String,
}

// ---------------------------------------------------------------------------
// Preprocessed view

fn is_opaque(h: &ConcreteHeap, o: &ConcreteObject, opts: &AbstractionOptions) -> bool {
    let Some(d) = h.types().get(o.ty) else { return false };
    d.kind == TypeKind::Opaque || opts.opaque_type_names.iter().any(|p| d.name.starts_with(p.as_str()))
}

fn is_transparent(h: &ConcreteHeap, o: &ConcreteObject, opts: &AbstractionOptions) -> bool {
    opts.transparent_containers.contains(h.types().name(o.ty))
}

fn targets(o: &ConcreteObject) -> impl Iterator<Item = ObjId> + '_ {
    o.fields.iter().map(|(_, t)| *t).chain(o.elements.iter().copied())
}

/// The heap the abstraction actually sees: opaque objects lose their
/// out-pointers, transparent containers point straight at the non-opaque
/// objects reachable through their internals. Borrowed when no option or
/// type asks for rewriting.
pub fn effective_heap<'h>(h: &'h ConcreteHeap, opts: &AbstractionOptions) -> Cow<'h, ConcreteHeap> {
    let any_opaque_kind = h.types().iter().any(|d| d.kind == TypeKind::Opaque);
    if opts.opaque_type_names.is_empty() && opts.transparent_containers.is_empty() && !any_opaque_kind {
        return Cow::Borrowed(h);
    }
    let objects = h
        .objects()
        .iter()
        .map(|o| {
            if is_transparent(h, o, opts) {
                let mut elements = Vec::new();
                let mut seen: HashSet<ObjId> = HashSet::from([o.id]);
                let mut queue: VecDeque<ObjId> = targets(o).collect();
                while let Some(t) = queue.pop_front() {
                    if t.is_null() || !seen.insert(t) {
                        continue;
                    }
                    let obj = h.object(t).expect("validated target");
                    if is_opaque(h, obj, opts) && !is_transparent(h, obj, opts) {
                        queue.extend(targets(obj));
                    } else {
                        elements.push(t);
                    }
                }
                ConcreteObject { id: o.id, ty: o.ty, bytes: o.bytes, fields: Vec::new(), elements }
            } else if is_opaque(h, o, opts) {
                ConcreteObject { id: o.id, ty: o.ty, bytes: o.bytes, fields: Vec::new(), elements: Vec::new() }
            } else {
                o.clone()
            }
        })
        .collect();
    Cow::Owned(h.with_objects(objects))
}

// ---------------------------------------------------------------------------
// Partition state

/// Union-find over the heap's objects plus null and root, with the
/// pointers registered as closure edges.
pub struct PartitionState<'h> {
    heap: Cow<'h, ConcreteHeap>,
    closure: Closure,
    null_el: u32,
    root_el: u32,
    interesting: Vec<bool>,
    /// Abstract labels in text order; a label's id is its index.
    labels: Vec<AbstractLabel>,
    /// Label id per pointer of `heap`.
    pointer_labels: Vec<u32>,
}

impl<'h> PartitionState<'h> {
    /// One partition per object, with interesting objects pinned.
    pub fn initial(h: &'h ConcreteHeap, opts: &AbstractionOptions) -> Result<Self, AbstractionError> {
        if opts.shape_subset_limit == 0 {
            return Err(AbstractionError::BadSubsetLimit);
        }
        for &o in &opts.interesting_objects {
            if !h.contains(o) {
                return Err(AbstractionError::UnknownObject(o));
            }
        }
        let heap = effective_heap(h, opts);
        let n = heap.objects().len();
        let (null_el, root_el) = (n as u32, n as u32 + 1);

        let mut dense: HashMap<crate::heap_model::TypeId, u32> = HashMap::new();
        for (i, d) in heap.types().iter().enumerate() {
            dense.insert(d.id, i as u32);
        }
        let mut types: Vec<Vec<u32>> = heap.objects().iter().map(|o| vec![dense[&o.ty]]).collect();
        types.push(Vec::new());
        types.push(Vec::new());
        let mut interesting: Vec<bool> =
            heap.objects().iter().map(|o| opts.interesting_objects.contains(&o.id)).collect();
        let mut pinned = interesting.clone();
        pinned.push(true);
        pinned.push(true);
        interesting.extend([false, false]);

        let mut names: BTreeSet<&str> = BTreeSet::new();
        for p in heap.pointers() {
            match &p.label {
                Label::Var(s) | Label::Field(s) => names.insert(s),
                Label::Index(_) => names.insert(AbstractLabel::ELEMENTS_TEXT),
            };
        }
        let labels: Vec<AbstractLabel> = names.iter().map(|s| AbstractLabel::parse(s)).collect();
        let label_id: HashMap<&str, u32> = names.iter().enumerate().map(|(i, s)| (*s, i as u32)).collect();
        let pointer_labels: Vec<u32> = heap
            .pointers()
            .iter()
            .map(|p| match &p.label {
                Label::Var(s) | Label::Field(s) => label_id[&**s],
                Label::Index(_) => label_id[AbstractLabel::ELEMENTS_TEXT],
            })
            .collect();

        let mut closure = Closure::new(types, pinned);
        for (p, &l) in heap.pointers().iter().zip(&pointer_labels) {
            let src = match p.src {
                Source::Root => root_el,
                Source::Object(o) => heap.position(o).unwrap() as u32,
            };
            let tgt = if p.tgt.is_null() { null_el } else { heap.position(p.tgt).unwrap() as u32 };
            closure.add_edge(src, l, tgt);
        }
        Ok(PartitionState { heap, closure, null_el, root_el, interesting, labels, pointer_labels })
    }

    /// The heap the partitions are over (see [`effective_heap`]).
    pub fn heap(&self) -> &ConcreteHeap {
        &self.heap
    }

    /// Phase 1: unions the endpoints of every pointer whose types are in the
    /// same recursive group.
    pub fn same_structure(&mut self, rel: &RecursiveRelation) {
        let heap: &ConcreteHeap = &self.heap;
        for p in heap.pointers() {
            let Source::Object(s) = p.src else { continue };
            if p.tgt.is_null() {
                continue;
            }
            let (si, ti) = (heap.position(s).unwrap(), heap.position(p.tgt).unwrap());
            if self.interesting[si] || self.interesting[ti] {
                continue;
            }
            if rel.related(heap.objects()[si].ty, heap.objects()[ti].ty) {
                self.closure.union(si as u32, ti as u32);
            }
        }
    }

    /// Phase 2: closes under equivalence on abstract predecessors.
    pub fn predecessor_closure(&mut self) {
        self.closure.run();
    }

    /// Current partitions (objects only), each sorted, ordered by smallest
    /// member.
    pub fn partitions(&mut self) -> Vec<Vec<ObjId>> {
        let n = self.heap.objects().len();
        let mut by_class: BTreeMap<u32, Vec<ObjId>> = BTreeMap::new();
        for i in 0..n {
            let r = self.closure.find(i as u32);
            by_class.entry(r).or_default().push(self.heap.objects()[i].id);
        }
        let mut parts: Vec<Vec<ObjId>> = by_class.into_values().collect();
        parts.sort();
        parts
    }

    /// Builds the abstract graph and the embedding from the current
    /// partitions.
    pub fn properties(mut self, shape_subset_limit: usize) -> (AbstractGraph, EmbeddingMap) {
        let heap: &ConcreteHeap = &self.heap;
        let objs = heap.objects();
        let n = objs.len();
        let null = NodeId(0);
        let root = NodeId(heap.max_object_id() + 1);

        // class index per element, node id per class = smallest member id
        let mut class_of: Vec<u32> = Vec::with_capacity(n);
        let mut class_index: HashMap<u32, u32> = HashMap::new();
        let mut class_node: Vec<NodeId> = Vec::new();
        let mut class_size: Vec<u32> = Vec::new();
        let mut local: Vec<u32> = Vec::with_capacity(n);
        for (i, o) in objs.iter().enumerate() {
            let r = self.closure.find(i as u32);
            let c = *class_index.entry(r).or_insert_with(|| {
                class_node.push(NodeId(o.id.0));
                class_size.push(0);
                class_node.len() as u32 - 1
            });
            class_of.push(c);
            local.push(class_size[c as usize]);
            class_size[c as usize] += 1;
        }
        let node_of = |el: u32| -> NodeId {
            if el == self.null_el {
                null
            } else if el == self.root_el {
                root
            } else {
                class_node[class_of[el as usize] as usize]
            }
        };

        let mut class_types: Vec<BTreeSet<String>> = vec![BTreeSet::new(); class_node.len()];
        for (i, o) in objs.iter().enumerate() {
            let set = &mut class_types[class_of[i] as usize];
            let name = heap.types().name(o.ty);
            if !set.contains(name) {
                set.insert(name.to_string());
            }
        }
        let mut nodes = vec![
            AbstractNode { id: root, types: BTreeSet::new(), card: Interval::ONE },
            AbstractNode { id: null, types: BTreeSet::new(), card: Interval::ONE },
        ];
        for (c, types) in class_types.into_iter().enumerate() {
            nodes.push(AbstractNode { id: class_node[c], types, card: Interval::exact(class_size[c] as u64) });
        }

        // edges with the strong injectivity test: no target referenced twice
        let mut rows: Vec<(NodeId, u32, NodeId, ObjId)> = Vec::with_capacity(heap.pointers().len());
        let mut intra: Vec<Vec<(u32, u32, u32)>> = vec![Vec::new(); class_node.len()];
        for (p, &l) in heap.pointers().iter().zip(&self.pointer_labels) {
            let src_el = match p.src {
                Source::Root => self.root_el,
                Source::Object(o) => heap.position(o).unwrap() as u32,
            };
            let tgt_el = if p.tgt.is_null() { self.null_el } else { heap.position(p.tgt).unwrap() as u32 };
            let (s, t) = (node_of(src_el), node_of(tgt_el));
            rows.push((s, l, t, p.tgt));
            if s == t && src_el < self.null_el {
                let c = class_of[src_el as usize];
                intra[c as usize].push((l, local[src_el as usize], local[tgt_el as usize]));
            }
        }
        rows.sort_unstable();
        let mut edges = Vec::new();
        let mut i = 0;
        while i < rows.len() {
            let (s, l, t, _) = rows[i];
            let mut j = i + 1;
            let mut injective = true;
            while j < rows.len() && (rows[j].0, rows[j].1, rows[j].2) == (s, l, t) {
                if rows[j].3 == rows[j - 1].3 {
                    injective = false;
                }
                j += 1;
            }
            edges.push(AbstractEdge { key: EdgeKey { src: s, label: self.labels[l as usize].clone(), tgt: t }, injective });
            i = j;
        }

        let mut shapes = Vec::new();
        for (c, es) in intra.iter().enumerate() {
            for (ls, shape) in shape_facts(class_size[c] as usize, es, shape_subset_limit) {
                shapes.push(ShapeFact {
                    node: class_node[c],
                    labels: ls.iter().map(|&l| self.labels[l as usize].clone()).collect(),
                    shape,
                });
            }
        }

        let g = AbstractGraph::new(root, null, nodes, edges, shapes).expect("abstraction builds a valid graph");
        let mu = EmbeddingMap::new(root, null, objs.iter().enumerate().map(|(i, o)| (o.id, class_node[class_of[i] as usize])));
        (g, mu)
    }
}

/// Phase 1 as a free function over a state.
pub fn phase1_same_structure<'h>(rel: &RecursiveRelation, mut st: PartitionState<'h>) -> PartitionState<'h> {
    st.same_structure(rel);
    st
}

/// Phase 2 as a free function over a state.
pub fn phase2_predecessor_closure(mut st: PartitionState<'_>) -> PartitionState<'_> {
    st.predecessor_closure();
    st
}

/// Abstracts `h`, returning the graph and the witnessing embedding.
pub fn abstract_heap(h: &ConcreteHeap, opts: &AbstractionOptions) -> Result<(AbstractGraph, EmbeddingMap), AbstractionError> {
    let mut st = PartitionState::initial(h, opts)?;
    let rel = recursive_relation(st.heap().types());
    st.same_structure(&rel);
    st.predecessor_closure();
    Ok(st.properties(opts.shape_subset_limit))
}

// ---------------------------------------------------------------------------
// Shape

/// Shape facts for one partition given as `members` concrete objects, with
/// `intra` the pointers between members as (label, source, target) in
/// local indices. Labels are returned as the ids used in `intra`.
fn shape_facts(members: usize, intra: &[(u32, u32, u32)], limit: usize) -> Vec<(Vec<u32>, Shape)> {
    let labels: Vec<u32> = intra.iter().map(|e| e.0).collect::<BTreeSet<_>>().into_iter().collect();
    if labels.is_empty() {
        return vec![(Vec::new(), Shape::Tree)];
    }
    if forest(members, intra, |_| true, None) {
        return vec![(labels, Shape::Tree)];
    }
    let mut out = vec![(labels.clone(), Shape::Any)];
    let k = labels.len();
    if k <= limit && k < 31 {
        let full: u32 = (1u32 << k) - 1;
        let mut masks: Vec<u32> = (0..full).collect();
        masks.sort_by_key(|m| (std::cmp::Reverse(m.count_ones()), *m));
        let mut found: Vec<u32> = Vec::new();
        for m in masks {
            if found.iter().any(|f| m & !f == 0) {
                continue;
            }
            let allowed = |l: u32| labels.iter().position(|&x| x == l).is_some_and(|i| m & (1 << i) != 0);
            if forest(members, intra, allowed, None) {
                found.push(m);
            }
        }
        for m in found {
            let ls = (0..k).filter(|i| m & (1 << i) != 0).map(|i| labels[i]).collect();
            out.push((ls, Shape::Tree));
        }
    } else {
        // greedy: drop the label behind the most violations until a forest
        let mut keep: BTreeSet<u32> = labels.iter().copied().collect();
        loop {
            let mut counts: HashMap<u32, u64> = HashMap::new();
            if forest(members, intra, |l| keep.contains(&l), Some(&mut counts)) {
                break;
            }
            let worst = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&l, _)| l);
            match worst {
                Some(l) => {
                    keep.remove(&l);
                }
                None => break,
            }
        }
        out.push((keep.into_iter().collect(), Shape::Tree));
    }
    out
}

/// Forest test over local indices. With `counts`, tallies per-label
/// violations (second in-edges and back edges) instead of stopping at the
/// first one.
fn forest(n: usize, edges: &[(u32, u32, u32)], allowed: impl Fn(u32) -> bool, mut counts: Option<&mut HashMap<u32, u64>>) -> bool {
    let mut ok = true;
    let mut indeg = vec![0u32; n];
    let mut start = vec![0u32; n + 1];
    for &(l, s, t) in edges {
        if !allowed(l) {
            continue;
        }
        indeg[t as usize] += 1;
        start[s as usize + 1] += 1;
        if indeg[t as usize] > 1 {
            ok = false;
            match counts.as_deref_mut() {
                Some(c) => *c.entry(l).or_default() += 1,
                None => return false,
            }
        }
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut adj = vec![(0u32, 0u32); start[n] as usize];
    for &(l, s, t) in edges {
        if allowed(l) {
            adj[fill[s as usize] as usize] = (t, l);
            fill[s as usize] += 1;
        }
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; n];
    let mut stack: Vec<(u32, u32)> = Vec::new();
    for root in 0..n as u32 {
        if color[root as usize] != 0 {
            continue;
        }
        color[root as usize] = 1;
        stack.push((root, start[root as usize]));
        while let Some(top) = stack.last_mut() {
            let (v, next) = *top;
            if next < start[v as usize + 1] {
                top.1 += 1;
                let (w, l) = adj[next as usize];
                match color[w as usize] {
                    0 => {
                        color[w as usize] = 1;
                        stack.push((w, start[w as usize]));
                    }
                    1 => {
                        ok = false;
                        match counts.as_deref_mut() {
                            Some(c) => *c.entry(l).or_default() += 1,
                            None => return false,
                        }
                    }
                    _ => {}
                }
            } else {
                color[v as usize] = 2;
                stack.pop();
            }
        }
    }
    ok
}

/// Shape facts for one region: every maximal label subset under which the
/// intra-region pointers form a forest (exhaustive up to `limit` labels,
/// greedy above), plus an `any` fact for the full label set when that is
/// not a forest.
pub fn compute_shape(h: &ConcreteHeap, node: NodeId, members: &Region, limit: usize) -> Vec<ShapeFact> {
    let local: BTreeMap<ObjId, u32> = members.iter().enumerate().map(|(i, o)| (o, i as u32)).collect();
    let mut names: Vec<AbstractLabel> = Vec::new();
    let mut intra: Vec<(AbstractLabel, u32, u32)> = Vec::new();
    for p in h.pointers() {
        if let Source::Object(s) = p.src {
            if let (Some(&a), Some(&b)) = (local.get(&s), local.get(&p.tgt)) {
                let l = p.label.abstracted();
                names.push(l.clone());
                intra.push((l, a, b));
            }
        }
    }
    names.sort();
    names.dedup();
    let id = |l: &AbstractLabel| names.binary_search(l).unwrap() as u32;
    let intra: Vec<(u32, u32, u32)> = intra.iter().map(|(l, a, b)| (id(l), *a, *b)).collect();
    shape_facts(members.len(), &intra, limit.max(1))
        .into_iter()
        .map(|(ls, shape)| ShapeFact { node, labels: ls.iter().map(|&l| names[l as usize].clone()).collect(), shape })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstract_graph::check_embedding;
    use crate::fixtures::{build_fixture, Fixture};
    use crate::heap_model::{oracle_shape, HeapBuilder};

    fn ids(v: &[u64]) -> Vec<ObjId> {
        v.iter().map(|&i| ObjId(i)).collect()
    }

    fn labels(names: &[&str]) -> BTreeSet<AbstractLabel> {
        names.iter().map(|n| AbstractLabel::parse(n)).collect()
    }

    #[test]
    fn exprtree_partition() {
        let h = build_fixture(&Fixture::ExprTree).unwrap();
        let (g, mu) = abstract_heap(&h, &AbstractionOptions::default()).unwrap();
        let inv: Vec<(u64, Vec<ObjId>)> = mu.nodes().map(|n| (n.0, mu.members(n).iter().copied().collect())).collect();
        assert_eq!(
            inv,
            vec![(1, ids(&[1, 2, 4, 5])), (3, ids(&[3, 6])), (7, ids(&[7, 8])), (9, ids(&[9]))]
        );
        let edge = |s: u64, l: &str, t: u64| g.edge(&EdgeKey { src: NodeId(s), label: AbstractLabel::parse(l), tgt: NodeId(t) });
        assert_eq!(edge(1, "l", 7), Some(false));
        assert_eq!(edge(1, "r", 3), Some(true));
        assert_eq!(edge(9, "[]", 0), Some(true));
        let shapes: Vec<&ShapeFact> = g.shapes_of(NodeId(1)).collect();
        assert_eq!(shapes, vec![&ShapeFact { node: NodeId(1), labels: labels(&["l", "r"]), shape: Shape::Tree }]);
        let cards: Vec<String> = [1, 3, 7, 9].iter().map(|&n| g.node(NodeId(n)).unwrap().card.to_string()).collect();
        assert_eq!(cards, ["[4,4]", "[2,2]", "[2,2]", "[1,1]"]);
    }

    #[test]
    fn exprtree_phases() {
        let h = build_fixture(&Fixture::ExprTree).unwrap();
        let opts = AbstractionOptions::default();
        let mut st = PartitionState::initial(&h, &opts).unwrap();
        let rel = recursive_relation(h.types());
        st.same_structure(&rel);
        let after1 = st.partitions();
        assert_eq!(after1[0], ids(&[1, 2, 4, 5]));
        assert_eq!(after1.len(), 6);
        st.predecessor_closure();
        let after2 = st.partitions();
        assert_eq!(after2, vec![ids(&[1, 2, 4, 5]), ids(&[3, 6]), ids(&[7, 8]), ids(&[9])]);
        st.predecessor_closure();
        assert_eq!(st.partitions(), after2);
    }

    #[test]
    fn empty_heap() {
        let h = HeapBuilder::new().build().unwrap();
        let (g, mu) = abstract_heap(&h, &AbstractionOptions::default()).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 0);
        assert!(mu.is_empty());
    }

    #[test]
    fn list_is_one_summary_node() {
        let h = build_fixture(&Fixture::List(1000)).unwrap();
        let (g, _) = abstract_heap(&h, &AbstractionOptions::default()).unwrap();
        let content: Vec<&AbstractNode> = g.content_nodes().collect();
        assert_eq!(content.len(), 1);
        let n = content[0].id;
        assert_eq!(content[0].card, Interval::exact(1000));
        assert!(g.shapes_of(n).any(|s| s.shape == Shape::Tree && s.labels == labels(&["next"])));
        assert!(g.edge(&EdgeKey { src: n, label: AbstractLabel::named("next"), tgt: g.null() }).is_some());
    }

    #[test]
    fn btree_phase1_joins_everything() {
        let h = build_fixture(&Fixture::BTree(15)).unwrap();
        let mut st = PartitionState::initial(&h, &AbstractionOptions::default()).unwrap();
        st.same_structure(&recursive_relation(h.types()));
        assert_eq!(st.partitions().len(), 1);
    }

    #[test]
    fn disjoint_types_under_one_label_stay_apart() {
        let h = build_fixture(&Fixture::ExprTree).unwrap();
        let (g, _) = abstract_heap(&h, &AbstractionOptions::default()).unwrap();
        let r_targets: Vec<NodeId> =
            g.out_edges(NodeId(1)).filter(|(k, _)| k.label == AbstractLabel::named("r")).map(|(k, _)| k.tgt).collect();
        assert_eq!(r_targets, vec![NodeId(1), NodeId(3), NodeId(7)]);
    }

    #[test]
    fn dlist_shapes() {
        let h = build_fixture(&Fixture::DList(10)).unwrap();
        let (g, mu) = abstract_heap(&h, &AbstractionOptions::default()).unwrap();
        let n = g.content_nodes().next().unwrap().id;
        let facts: BTreeSet<(BTreeSet<AbstractLabel>, Shape)> = g.shapes_of(n).map(|s| (s.labels.clone(), s.shape)).collect();
        let want: BTreeSet<_> = [
            (labels(&["next", "prev"]), Shape::Any),
            (labels(&["next"]), Shape::Tree),
            (labels(&["prev"]), Shape::Tree),
        ]
        .into_iter()
        .collect();
        assert_eq!(facts, want);
        let region = Region::new(&h, mu.members(n).iter().copied()).unwrap();
        assert_eq!(oracle_shape(&h, &region, &labels(&["next"])), Shape::Tree);
        // the public entry point agrees
        let mut direct = compute_shape(&h, n, &region, 4);
        direct.sort();
        assert_eq!(direct, g.shapes_of(n).cloned().collect::<Vec<_>>());
    }

    #[test]
    fn greedy_shape_above_limit() {
        let h = build_fixture(&Fixture::DList(10)).unwrap();
        let opts = AbstractionOptions { shape_subset_limit: 1, ..Default::default() };
        let (g, mu) = abstract_heap(&h, &opts).unwrap();
        let n = g.content_nodes().next().unwrap().id;
        let trees: Vec<&ShapeFact> = g.shapes_of(n).filter(|s| s.shape == Shape::Tree).collect();
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].labels.len(), 1);
        assert!(check_embedding(&h, &g, &mu).unwrap().passed());
    }

    #[test]
    fn singleton_without_self_pointers_is_trivially_a_tree() {
        let h = build_fixture(&Fixture::ExprTree).unwrap();
        let (g, _) = abstract_heap(&h, &AbstractionOptions::default()).unwrap();
        let facts: Vec<&ShapeFact> = g.shapes_of(NodeId(9)).collect();
        assert_eq!(facts, vec![&ShapeFact { node: NodeId(9), labels: BTreeSet::new(), shape: Shape::Tree }]);
    }

    #[test]
    fn interesting_objects_stay_single() {
        let h = build_fixture(&Fixture::ExprTree).unwrap();
        let opts = AbstractionOptions { interesting_objects: [ObjId(7)].into(), ..Default::default() };
        let (g, mu) = abstract_heap(&h, &opts).unwrap();
        assert_eq!(mu.members(NodeId(7)).len(), 1);
        assert_eq!(mu.members(NodeId(8)).len(), 1);
        assert!(check_embedding(&h, &g, &mu).unwrap().passed());
        let bad = AbstractionOptions { interesting_objects: [ObjId(77)].into(), ..Default::default() };
        assert_eq!(abstract_heap(&h, &bad).unwrap_err(), AbstractionError::UnknownObject(ObjId(77)));
    }

    #[test]
    fn opaque_and_transparent_types() {
        let mut b = HeapBuilder::new();
        let user = b.object_type(1, "App.Item", None, &[]);
        let arr = b.array_type(2, "Sys.Item[]", 1);
        let list = b.object_type(3, "Sys.List", None, &[("items", 2)]);
        let stream = b.object_type(4, "Sys.Stream", None, &[("buf", 2)]);
        b.object(1, list, &[("items", 2)]);
        b.array(2, arr, None, &[3, 4, 0]);
        b.object(3, user, &[]);
        b.object(4, user, &[]);
        b.object(5, stream, &[("buf", 6)]);
        b.array(6, arr, None, &[3]);
        b.root("xs", 1).root("s", 5);
        let h = b.build().unwrap();
        let opts = AbstractionOptions {
            opaque_type_names: ["Sys.".to_string()].into(),
            transparent_containers: ["Sys.List".to_string()].into(),
            ..Default::default()
        };
        let view = effective_heap(&h, &opts);
        assert_eq!(view.object(ObjId(1)).unwrap().elements, ids(&[3, 4]));
        assert!(view.object(ObjId(5)).unwrap().fields.is_empty());
        let (g, mu) = abstract_heap(&h, &opts).unwrap();
        assert!(check_embedding(&view, &g, &mu).unwrap().passed());
        let list_node = mu.get(ObjId(1)).unwrap();
        let item_node = mu.get(ObjId(3)).unwrap();
        assert_eq!(mu.get(ObjId(4)), Some(item_node));
        assert!(g.edge(&EdgeKey { src: list_node, label: AbstractLabel::Elements, tgt: item_node }).is_some());
    }

    #[test]
    fn mu_json_round_trip() {
        let h = build_fixture(&Fixture::ExprTree).unwrap();
        let (_, mu) = abstract_heap(&h, &AbstractionOptions::default()).unwrap();
        let back = EmbeddingMap::from_json(mu.to_json().as_bytes()).unwrap();
        assert_eq!(back, mu);
        assert!(EmbeddingMap::from_json(br#"{"format":"ahg-mu-1","root":1,"null":0}"#).is_err());
    }
}
