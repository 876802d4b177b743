//! The abstract heap graph, its concretization check and its `ahg-1`
//! encoding.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::EmbeddingMap;
use crate::heap_model::{self, ConcreteHeap, Label, ObjId, Pointer, Shape, Source};
use crate::interval::Interval;

pub const FORMAT_AHG: &str = "ahg-1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Edge label: a field or variable name, or `□` standing for every element
/// index of an array or container.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AbstractLabel {
    Named(String),
    Elements,
}

impl AbstractLabel {
    pub const ELEMENTS_TEXT: &'static str = "[]";

    pub fn named(s: &str) -> Self {
        AbstractLabel::Named(s.to_string())
    }

    pub fn parse(s: &str) -> Self {
        if s == Self::ELEMENTS_TEXT {
            AbstractLabel::Elements
        } else {
            AbstractLabel::Named(s.to_string())
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            AbstractLabel::Named(s) => s,
            AbstractLabel::Elements => Self::ELEMENTS_TEXT,
        }
    }

    /// `p ∈ γ_L(self)`.
    pub fn covers(&self, p: &Label) -> bool {
        match (self, p) {
            (AbstractLabel::Elements, Label::Index(_)) => true,
            (AbstractLabel::Named(a), Label::Field(b) | Label::Var(b)) => a.as_str() == &**b,
            _ => false,
        }
    }
}

impl PartialOrd for AbstractLabel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Ordered by label text.
impl Ord for AbstractLabel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl fmt::Display for AbstractLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn format_labels(labels: &BTreeSet<AbstractLabel>) -> String {
    labels.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(", ")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractNode {
    pub id: NodeId,
    pub types: BTreeSet<String>,
    pub card: Interval,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey {
    pub src: NodeId,
    pub label: AbstractLabel,
    pub tgt: NodeId,
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}->{}", self.src, self.label, self.tgt)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractEdge {
    pub key: EdgeKey,
    pub injective: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShapeFact {
    pub node: NodeId,
    pub labels: BTreeSet<AbstractLabel>,
    pub shape: Shape,
}

impl fmt::Display for ShapeFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{{}}}", self.shape, format_labels(&self.labels))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("{0} is not a node of the graph")]
    UnknownNode(NodeId),
    #[error("duplicate edge {0}")]
    DuplicateEdge(EdgeKey),
    #[error("edge {0} targets the root")]
    RootTargeted(EdgeKey),
    #[error("null node has types or out-edges")]
    NullNotEmpty,
    #[error("{0} must have cardinality [1,1]")]
    DistinguishedCardinality(NodeId),
    #[error("root and null must be distinct nodes")]
    RootIsNull,
    #[error("shape fact on {node} uses label '{label}' which has no self-edge")]
    ShapeLabel { node: NodeId, label: AbstractLabel },
}

/// A storage shape graph with type sets, cardinalities, injectivity and
/// shape facts. Root and null are ordinary entries of `nodes` with empty type
/// sets and cardinality `[1,1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractGraph {
    root: NodeId,
    null: NodeId,
    nodes: BTreeMap<NodeId, AbstractNode>,
    edges: BTreeMap<EdgeKey, bool>,
    shapes: BTreeSet<ShapeFact>,
}

impl AbstractGraph {
    pub fn new(
        root: NodeId,
        null: NodeId,
        nodes: impl IntoIterator<Item = AbstractNode>,
        edges: impl IntoIterator<Item = AbstractEdge>,
        shapes: impl IntoIterator<Item = ShapeFact>,
    ) -> Result<Self, GraphError> {
        let mut map = BTreeMap::new();
        for n in nodes {
            let id = n.id;
            if map.insert(id, n).is_some() {
                return Err(GraphError::DuplicateNode(id));
            }
        }
        let mut emap = BTreeMap::new();
        for e in edges {
            if emap.insert(e.key.clone(), e.injective).is_some() {
                return Err(GraphError::DuplicateEdge(e.key));
            }
        }
        let g = AbstractGraph { root, null, nodes: map, edges: emap, shapes: shapes.into_iter().collect() };
        g.validate()?;
        Ok(g)
    }

    /// Graph with only root and null.
    pub fn empty(root: NodeId, null: NodeId) -> Self {
        let mk = |id| AbstractNode { id, types: BTreeSet::new(), card: Interval::ONE };
        AbstractGraph::new(root, null, [mk(root), mk(null)], [], []).expect("empty graph is valid")
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.root == self.null {
            return Err(GraphError::RootIsNull);
        }
        for id in [self.root, self.null] {
            let n = self.nodes.get(&id).ok_or(GraphError::UnknownNode(id))?;
            if !n.card.is_exact(1) {
                return Err(GraphError::DistinguishedCardinality(id));
            }
        }
        if !self.nodes[&self.null].types.is_empty() {
            return Err(GraphError::NullNotEmpty);
        }
        for k in self.edges.keys() {
            for id in [k.src, k.tgt] {
                if !self.nodes.contains_key(&id) {
                    return Err(GraphError::UnknownNode(id));
                }
            }
            if k.tgt == self.root {
                return Err(GraphError::RootTargeted(k.clone()));
            }
            if k.src == self.null {
                return Err(GraphError::NullNotEmpty);
            }
        }
        for s in &self.shapes {
            if !self.nodes.contains_key(&s.node) {
                return Err(GraphError::UnknownNode(s.node));
            }
            let self_labels = self.self_labels(s.node);
            if let Some(l) = s.labels.iter().find(|l| !self_labels.contains(l)) {
                return Err(GraphError::ShapeLabel { node: s.node, label: l.clone() });
            }
        }
        Ok(())
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn null(&self) -> NodeId {
        self.null
    }

    pub fn is_distinguished(&self, id: NodeId) -> bool {
        id == self.root || id == self.null
    }

    pub fn node(&self, id: NodeId) -> Option<&AbstractNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &AbstractNode> {
        self.nodes.values()
    }

    /// Nodes other than root and null.
    pub fn content_nodes(&self) -> impl Iterator<Item = &AbstractNode> {
        self.nodes.values().filter(move |n| !self.is_distinguished(n.id))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = AbstractEdge> + '_ {
        self.edges.iter().map(|(k, &injective)| AbstractEdge { key: k.clone(), injective })
    }

    pub fn edge_entries(&self) -> impl Iterator<Item = (&EdgeKey, bool)> {
        self.edges.iter().map(|(k, &i)| (k, i))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, key: &EdgeKey) -> Option<bool> {
        self.edges.get(key).copied()
    }

    pub fn out_edges(&self, src: NodeId) -> impl Iterator<Item = (&EdgeKey, bool)> {
        let from = EdgeKey { src, label: AbstractLabel::Named(String::new()), tgt: NodeId(0) };
        self.edges.range(from..).take_while(move |(k, _)| k.src == src).map(|(k, &i)| (k, i))
    }

    pub fn in_edges(&self, tgt: NodeId) -> impl Iterator<Item = (&EdgeKey, bool)> {
        self.edges.iter().filter(move |(k, _)| k.tgt == tgt).map(|(k, &i)| (k, i))
    }

    pub fn shapes(&self) -> impl Iterator<Item = &ShapeFact> {
        self.shapes.iter()
    }

    pub fn shapes_of(&self, node: NodeId) -> impl Iterator<Item = &ShapeFact> {
        self.shapes.iter().filter(move |s| s.node == node)
    }

    pub fn self_labels(&self, node: NodeId) -> BTreeSet<AbstractLabel> {
        self.out_edges(node).filter(|(k, _)| k.tgt == node).map(|(k, _)| k.label.clone()).collect()
    }

    pub fn set_cardinality(&mut self, id: NodeId, card: Interval) {
        if let Some(n) = self.nodes.get_mut(&id) {
            n.card = card;
        }
    }

    pub fn set_types(&mut self, id: NodeId, types: BTreeSet<String>) {
        if let Some(n) = self.nodes.get_mut(&id) {
            n.types = types;
        }
    }

    pub fn remove_edge(&mut self, key: &EdgeKey) -> Option<bool> {
        let removed = self.edges.remove(key);
        if removed.is_some() && key.src == key.tgt {
            let still = self.self_labels(key.src);
            self.shapes = std::mem::take(&mut self.shapes)
                .into_iter()
                .filter(|s| s.node != key.src || s.labels.is_subset(&still))
                .collect();
        }
        removed
    }

    pub fn set_injective(&mut self, key: &EdgeKey, injective: bool) {
        if let Some(v) = self.edges.get_mut(key) {
            *v = injective;
        }
    }

    pub fn add_shape(&mut self, fact: ShapeFact) {
        self.shapes.insert(fact);
    }

    pub fn remove_shape(&mut self, fact: &ShapeFact) -> bool {
        self.shapes.remove(fact)
    }

    /// Nodes reachable from root.
    pub fn reachable(&self) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::from([self.root]);
        let mut queue = VecDeque::from([self.root]);
        while let Some(n) = queue.pop_front() {
            for (k, _) in self.out_edges(n) {
                if seen.insert(k.tgt) {
                    queue.push_back(k.tgt);
                }
            }
        }
        seen
    }

    /// Renumbers every node through `map` (which must be injective and total).
    pub fn relabel(&self, map: &BTreeMap<NodeId, NodeId>) -> AbstractGraph {
        let m = |id: NodeId| map[&id];
        AbstractGraph {
            root: m(self.root),
            null: m(self.null),
            nodes: self
                .nodes
                .values()
                .map(|n| (m(n.id), AbstractNode { id: m(n.id), types: n.types.clone(), card: n.card }))
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|(k, &i)| (EdgeKey { src: m(k.src), label: k.label.clone(), tgt: m(k.tgt) }, i))
                .collect(),
            shapes: self
                .shapes
                .iter()
                .map(|s| ShapeFact { node: m(s.node), labels: s.labels.clone(), shape: s.shape })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Concretization check

/// One violated conjunct of the concretization relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    RootNotMapped { mapped_to: NodeId },
    NullNotMapped { mapped_to: NodeId },
    Embed { pointer: Pointer, src: NodeId, tgt: NodeId },
    Typing { object: ObjId, ty: String, node: NodeId },
    Counting { node: NodeId, count: u64, card: Interval },
    Injective { edge: EdgeKey, label: Label },
    Shape { fact: ShapeFact },
}

impl Violation {
    pub fn predicate(&self) -> &'static str {
        match self {
            Violation::RootNotMapped { .. } | Violation::NullNotMapped { .. } | Violation::Embed { .. } => "Embed",
            Violation::Typing { .. } => "Typing",
            Violation::Counting { .. } => "Counting",
            Violation::Injective { .. } => "Injective",
            Violation::Shape { .. } => "Shape",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RootNotMapped { mapped_to } => write!(f, "Embed: root maps to {mapped_to}, not the root node"),
            Violation::NullNotMapped { mapped_to } => write!(f, "Embed: null maps to {mapped_to}, not the null node"),
            Violation::Embed { pointer, src, tgt } => {
                write!(f, "Embed: pointer {pointer} has no abstract edge {src}-{}->{tgt}", pointer.label.abstracted())
            }
            Violation::Typing { object, ty, node } => write!(f, "Typing: {object} has type {ty} not in Ty#({node})"),
            Violation::Counting { node, count, card } => write!(f, "Counting: |μ⁻¹({node})| = {count} ∉ {card}"),
            Violation::Injective { edge, label } => write!(f, "Injective: {edge} is not injective on label {label}"),
            Violation::Shape { fact } => write!(f, "Shape: {} does not hold on {}", fact, fact.node),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EmbeddingReport {
    pub violations: Vec<Violation>,
}

impl EmbeddingReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmbeddingError {
    #[error("embedding is not total: {0} has no image")]
    NotTotal(ObjId),
    #[error("embedding maps {0}, which is not an object of the heap")]
    UnknownObject(ObjId),
    #[error("embedding maps {object} to {node}, which is not a node of the graph")]
    UnknownNode { object: ObjId, node: NodeId },
}

/// Decides `h ∈ γ(g)` as witnessed by `mu`, reporting every violated
/// predicate with its witness.
pub fn check_embedding(h: &ConcreteHeap, g: &AbstractGraph, mu: &EmbeddingMap) -> Result<EmbeddingReport, EmbeddingError> {
    for o in h.objects() {
        if mu.get(o.id).is_none() {
            return Err(EmbeddingError::NotTotal(o.id));
        }
    }
    for (o, n) in mu.iter() {
        if !h.contains(o) {
            return Err(EmbeddingError::UnknownObject(o));
        }
        if g.node(n).is_none() {
            return Err(EmbeddingError::UnknownNode { object: o, node: n });
        }
    }

    let mut out = Vec::new();
    if mu.root() != g.root() {
        out.push(Violation::RootNotMapped { mapped_to: mu.root() });
    }
    if mu.null() != g.null() {
        out.push(Violation::NullNotMapped { mapped_to: mu.null() });
    }
    let image_src = |s: Source| match s {
        Source::Root => mu.root(),
        Source::Object(o) => mu.get(o).unwrap(),
    };
    let image_tgt = |t: ObjId| if t.is_null() { mu.null() } else { mu.get(t).unwrap() };

    // Embed; also groups pointers per abstract edge and concrete label
    let mut per_edge: HashMap<EdgeKey, BTreeMap<Label, Vec<(ObjId, ObjId)>>> = HashMap::new();
    let mut intra: HashMap<NodeId, Vec<&Pointer>> = HashMap::new();
    for p in h.pointers() {
        let key = EdgeKey { src: image_src(p.src), label: p.label.abstracted(), tgt: image_tgt(p.tgt) };
        if g.edge(&key).is_none() {
            out.push(Violation::Embed { pointer: p.clone(), src: key.src, tgt: key.tgt });
            continue;
        }
        if let Source::Object(s) = p.src {
            if key.src == key.tgt {
                intra.entry(key.src).or_default().push(p);
            }
            per_edge.entry(key).or_default().entry(p.label.clone()).or_default().push((s, p.tgt));
        }
    }

    // Typing
    for o in h.objects() {
        let n = mu.get(o.id).unwrap();
        let ty = h.types().name(o.ty);
        if !g.node(n).is_some_and(|node| node.types.contains(ty)) {
            out.push(Violation::Typing { object: o.id, ty: ty.to_string(), node: n });
        }
    }

    // Counting
    let mut counts: HashMap<NodeId, u64> = HashMap::new();
    *counts.entry(mu.root()).or_default() += 1;
    *counts.entry(mu.null()).or_default() += 1;
    for (_, n) in mu.iter() {
        *counts.entry(n).or_default() += 1;
    }
    for n in g.nodes() {
        let c = counts.get(&n.id).copied().unwrap_or(0);
        if !n.card.contains(c) {
            out.push(Violation::Counting { node: n.id, count: c, card: n.card });
        }
    }

    // Injective: only labels that actually occur can break injectivity
    for e in g.edges().filter(|e| e.injective) {
        if e.key.src == g.root() {
            // variable names are unique, so each label has one pointer
            continue;
        }
        if let Some(by_label) = per_edge.get(&e.key) {
            for (label, pairs) in by_label {
                if !heap_model::injective_pairs(pairs.iter().copied()) {
                    out.push(Violation::Injective { edge: e.key.clone(), label: label.clone() });
                }
            }
        }
    }

    // Shape
    for fact in g.shapes().filter(|s| s.shape == Shape::Tree) {
        let members = mu.members(fact.node);
        let edges: Vec<(ObjId, ObjId)> = intra
            .get(&fact.node)
            .map(|ps| {
                ps.iter()
                    .filter(|p| fact.labels.iter().any(|l| l.covers(&p.label)))
                    .map(|p| match p.src {
                        Source::Object(s) => (s, p.tgt),
                        Source::Root => unreachable!(),
                    })
                    .collect()
            })
            .unwrap_or_default();
        if heap_model::forest_shape(members.iter().copied(), &edges) != Shape::Tree {
            out.push(Violation::Shape { fact: fact.clone() });
        }
    }

    Ok(EmbeddingReport { violations: out })
}

// ---------------------------------------------------------------------------
// Canonical form

/// Renumbers nodes deterministically: root is 0, null is 1, then content
/// nodes in breadth-first order from root, visiting out-edges by label text
/// and then by the smallest type name of the target. Nodes not reached from
/// root follow, each starting a traversal of its own. Remaining ties are
/// broken by structural colors before falling back to the old ids.
pub fn canonicalize(g: &AbstractGraph) -> AbstractGraph {
    canonicalize_with_map(g).0
}

/// Like [`canonicalize`], also returning the old-to-new id map.
pub fn canonicalize_with_map(g: &AbstractGraph) -> (AbstractGraph, BTreeMap<NodeId, NodeId>) {
    let mut map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    map.insert(g.root(), NodeId(0));
    map.insert(g.null(), NodeId(1));
    let mut next = 2u64;

    let color = refined_colors(g);
    let sort_key = |id: NodeId| {
        let n = g.node(id).unwrap();
        (n.types.iter().next().cloned().unwrap_or_default(), n.types.clone(), n.card, color[&id], id)
    };
    let visit = |start: NodeId, map: &mut BTreeMap<NodeId, NodeId>, next: &mut u64| {
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            let mut outs: Vec<&EdgeKey> = g.out_edges(n).map(|(k, _)| k).collect();
            outs.sort_by(|a, b| a.label.cmp(&b.label).then_with(|| sort_key(a.tgt).cmp(&sort_key(b.tgt))));
            for k in outs {
                if !map.contains_key(&k.tgt) {
                    map.insert(k.tgt, NodeId(*next));
                    *next += 1;
                    queue.push_back(k.tgt);
                }
            }
        }
    };
    visit(g.root(), &mut map, &mut next);

    let mut rest: Vec<NodeId> = g.nodes().map(|n| n.id).filter(|id| !map.contains_key(id)).collect();
    rest.sort_by_key(|&id| sort_key(id));
    for id in rest {
        if !map.contains_key(&id) {
            map.insert(id, NodeId(next));
            next += 1;
            visit(id, &mut map, &mut next);
        }
    }
    (g.relabel(&map), map)
}

/// Color refinement: a node's color is its local data plus the multiset of
/// (label, injectivity, color) over its in- and out-edges, iterated until the
/// number of colors stops growing. Colors depend on structure only.
fn refined_colors(g: &AbstractGraph) -> BTreeMap<NodeId, usize> {
    type Sig = (usize, Vec<(String, bool, usize)>, Vec<(String, bool, usize)>);
    let local = |id: NodeId| {
        let n = g.node(id).unwrap();
        let shapes: Vec<String> = g.shapes_of(id).map(|f| f.to_string()).collect();
        (id == g.root(), id == g.null(), n.types.clone(), n.card, shapes)
    };
    let mut keys: Vec<_> = g.nodes().map(|n| local(n.id)).collect();
    keys.sort();
    keys.dedup();
    let mut color: BTreeMap<NodeId, usize> =
        g.nodes().map(|n| (n.id, keys.binary_search(&local(n.id)).unwrap())).collect();
    let mut classes = keys.len();
    let mut inn: BTreeMap<NodeId, Vec<(&EdgeKey, bool)>> = BTreeMap::new();
    for (k, i) in g.edge_entries() {
        inn.entry(k.tgt).or_default().push((k, i));
    }
    loop {
        let sig = |id: NodeId, color: &BTreeMap<NodeId, usize>| -> Sig {
            let mut outs: Vec<_> = g.out_edges(id).map(|(k, i)| (k.label.as_str().to_string(), i, color[&k.tgt])).collect();
            let mut ins: Vec<_> = inn.get(&id).into_iter().flatten().map(|&(k, i)| (k.label.as_str().to_string(), i, color[&k.src])).collect();
            outs.sort();
            ins.sort();
            (color[&id], outs, ins)
        };
        let sigs: BTreeMap<NodeId, Sig> = g.nodes().map(|n| (n.id, sig(n.id, &color))).collect();
        let mut distinct: Vec<&Sig> = sigs.values().collect();
        distinct.sort();
        distinct.dedup();
        if distinct.len() == classes {
            return color;
        }
        classes = distinct.len();
        color = sigs.iter().map(|(&id, s)| (id, distinct.binary_search(&s).unwrap())).collect();
    }
}

// ---------------------------------------------------------------------------
// ahg-1 encoding

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AhgDoc {
    format: String,
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
    shapes: Vec<ShapeDoc>,
    root: u64,
    null: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: u64,
    types: Vec<String>,
    card: Interval,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    src: u64,
    label: String,
    tgt: u64,
    inj: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeDoc {
    node: u64,
    labels: Vec<String>,
    shape: Shape,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("schema error at {at}: {msg}")]
    Schema { at: String, msg: String },
    #[error("unknown graph format '{0}' (expected {FORMAT_AHG})")]
    UnknownFormat(String),
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
}

impl AbstractGraph {
    fn to_doc(&self) -> AhgDoc {
        AhgDoc {
            format: FORMAT_AHG.to_string(),
            nodes: self
                .nodes
                .values()
                .map(|n| NodeDoc { id: n.id.0, types: n.types.iter().cloned().collect(), card: n.card })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|(k, &inj)| EdgeDoc { src: k.src.0, label: k.label.to_string(), tgt: k.tgt.0, inj })
                .collect(),
            shapes: self
                .shapes
                .iter()
                .map(|s| ShapeDoc {
                    node: s.node.0,
                    labels: s.labels.iter().map(|l| l.to_string()).collect(),
                    shape: s.shape,
                })
                .collect(),
            root: self.root.0,
            null: self.null.0,
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_doc()).expect("graph serialization cannot fail")
    }

    /// `ahg-1` bytes. Equal graphs serialize identically.
    pub fn to_ahg_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_doc()).expect("graph serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn from_ahg_json(bytes: &[u8]) -> Result<Self, FormatError> {
        let value: serde_json::Value = serde_json::from_slice(bytes)
            .map_err(|e| FormatError::Schema { at: format!("line {} column {}", e.line(), e.column()), msg: e.to_string() })?;
        Self::from_json_value(value)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self, FormatError> {
        match value.get("format") {
            Some(serde_json::Value::String(f)) if f == FORMAT_AHG => {}
            Some(serde_json::Value::String(f)) => return Err(FormatError::UnknownFormat(f.clone())),
            _ => return Err(FormatError::Schema { at: "format".into(), msg: "missing or non-string format tag".into() }),
        }
        let doc: AhgDoc = serde_path_to_error::deserialize(value)
            .map_err(|e| FormatError::Schema { at: e.path().to_string(), msg: e.inner().to_string() })?;
        let nodes = doc.nodes.into_iter().map(|n| AbstractNode {
            id: NodeId(n.id),
            types: n.types.into_iter().collect(),
            card: n.card,
        });
        let edges = doc.edges.into_iter().map(|e| AbstractEdge {
            key: EdgeKey { src: NodeId(e.src), label: AbstractLabel::parse(&e.label), tgt: NodeId(e.tgt) },
            injective: e.inj,
        });
        let shapes = doc.shapes.into_iter().map(|s| ShapeFact {
            node: NodeId(s.node),
            labels: s.labels.iter().map(|l| AbstractLabel::parse(l)).collect(),
            shape: s.shape,
        });
        Ok(AbstractGraph::new(NodeId(doc.root), NodeId(doc.null), nodes, edges, shapes)?)
    }
}
