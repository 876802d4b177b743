//! DGML and GraphML output.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::abstract_graph::{format_labels, AbstractGraph, AbstractLabel, NodeId};
use crate::abstraction::EmbeddingMap;
use crate::diagnostics::{Diagnostics, FindingKind};
use crate::heap_model::ConcreteHeap;
use crate::interval::Interval;
use crate::reduction::ReducedGraph;

pub const DGML_NS: &str = "http://schemas.microsoft.com/vs/2009/dgml";

#[derive(Clone, Debug)]
pub struct StyleConfig {
    pub heat: bool,
    pub diagnostics: bool,
    pub collapse_multi_edges: bool,
    pub single_background: String,
    pub summary_background: String,
    pub non_injective_stroke: String,
    pub non_injective_thickness: u32,
    pub dash_array: String,
    pub hot: [String; 3],
    pub finding_stroke: String,
}

impl Default for StyleConfig {
    fn default() -> Self {
        StyleConfig {
            heat: false,
            diagnostics: false,
            collapse_multi_edges: true,
            single_background: "White".into(),
            summary_background: "Silver".into(),
            non_injective_stroke: "Orange".into(),
            non_injective_thickness: 3,
            dash_array: "4,2".into(),
            hot: ["Khaki".into(), "Gold".into(), "Tomato".into()],
            finding_stroke: "Red".into(),
        }
    }
}

/// Heap-derived decorations: container lengths and diagnostics.
#[derive(Clone, Debug, Default)]
pub struct Decorations {
    pub container_lengths: BTreeMap<NodeId, usize>,
    pub heat: BTreeMap<NodeId, FindingKind>,
    pub findings: BTreeMap<NodeId, Vec<FindingKind>>,
}

impl Decorations {
    pub fn from_heap(h: &ConcreteHeap, g: &AbstractGraph, mu: &EmbeddingMap, diag: Option<&Diagnostics>) -> Self {
        let mut d = Decorations { container_lengths: container_lengths(h, g, mu), ..Default::default() };
        if let Some(diag) = diag {
            for m in &diag.metrics {
                if let Some(k) = m.heat {
                    d.heat.insert(m.node, k);
                }
            }
            for f in &diag.findings {
                if !matches!(f.kind, FindingKind::Hot5 | FindingKind::Hot15 | FindingKind::Hot25) {
                    d.findings.entry(f.node).or_default().push(f.kind);
                }
            }
        }
        d
    }
}

/// Nodes whose members are all arrays or containers of one common length.
pub fn container_lengths(h: &ConcreteHeap, g: &AbstractGraph, mu: &EmbeddingMap) -> BTreeMap<NodeId, usize> {
    let mut out = BTreeMap::new();
    for n in g.content_nodes() {
        let mut lens = BTreeSet::new();
        let mut all = true;
        for &o in mu.members(n.id) {
            match h.object(o) {
                Some(obj) if h.type_of(o).is_some_and(|t| t.kind.has_elements()) => {
                    lens.insert(obj.elements.len());
                }
                _ => all = false,
            }
        }
        if all && lens.len() == 1 {
            out.insert(n.id, *lens.first().unwrap());
        }
    }
    out
}

fn esc(s: &str) -> String {
    let mut o = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => o.push_str("&amp;"),
            '<' => o.push_str("&lt;"),
            '>' => o.push_str("&gt;"),
            '"' => o.push_str("&quot;"),
            '\'' => o.push_str("&apos;"),
            c => o.push(c),
        }
    }
    o
}

/// Node label: type names joined, an array type `T[]` shown as `T[k]` (other
/// containers get a `[k]` suffix) when all members share length k.
pub fn node_label(g: &AbstractGraph, n: NodeId, deco: &Decorations) -> String {
    if n == g.root() {
        return "root".into();
    }
    if n == g.null() {
        return "null".into();
    }
    let node = g.node(n).unwrap();
    let len = deco.container_lengths.get(&n);
    let mut names: Vec<String> = Vec::new();
    let mut suffixed = false;
    for t in &node.types {
        match (len, t.strip_suffix("[]")) {
            (Some(k), Some(base)) => {
                names.push(format!("{base}[{k}]"));
                suffixed = true;
            }
            _ => names.push(t.clone()),
        }
    }
    let mut label = names.join(", ");
    if let (Some(k), false) = (len, suffixed) {
        let _ = write!(label, "[{k}]");
    }
    label
}

struct Link {
    src: NodeId,
    tgt: NodeId,
    labels: BTreeSet<AbstractLabel>,
    non_injective: bool,
    maybe_null: bool,
}

fn links(g: &AbstractGraph, collapse: bool) -> Vec<Link> {
    let null = g.null();
    let mut to_null: BTreeSet<(NodeId, &AbstractLabel)> = BTreeSet::new();
    for (k, _) in g.edge_entries() {
        if k.tgt == null {
            to_null.insert((k.src, &k.label));
        }
    }
    let mut out: Vec<Link> = Vec::new();
    let mut index: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
    for (k, inj) in g.edge_entries() {
        if k.tgt == null {
            continue;
        }
        let maybe_null = to_null.contains(&(k.src, &k.label));
        if collapse {
            if let Some(&i) = index.get(&(k.src, k.tgt)) {
                let l = &mut out[i];
                l.labels.insert(k.label.clone());
                l.non_injective |= !inj;
                l.maybe_null |= maybe_null;
                continue;
            }
            index.insert((k.src, k.tgt), out.len());
        }
        out.push(Link { src: k.src, tgt: k.tgt, labels: [k.label.clone()].into(), non_injective: !inj, maybe_null });
    }
    out
}

fn write_styles(out: &mut String, st: &StyleConfig) {
    out.push_str("  <Styles>\n");
    let _ = writeln!(
        out,
        "    <Style TargetType=\"Link\" GroupLabel=\"Non-injective\" ValueLabel=\"True\">\n      <Condition Expression=\"NonInjective = 'True'\" />\n      <Setter Property=\"Stroke\" Value=\"{}\" />\n      <Setter Property=\"StrokeThickness\" Value=\"{}\" />\n    </Style>",
        esc(&st.non_injective_stroke),
        st.non_injective_thickness
    );
    let _ = writeln!(
        out,
        "    <Style TargetType=\"Link\" GroupLabel=\"Maybe null\" ValueLabel=\"True\">\n      <Condition Expression=\"MaybeNull = 'True'\" />\n      <Setter Property=\"StrokeDashArray\" Value=\"{}\" />\n    </Style>",
        esc(&st.dash_array)
    );
    out.push_str("  </Styles>\n");
}

fn node_attrs(g: &AbstractGraph, n: NodeId, deco: &Decorations, st: &StyleConfig) -> String {
    let node = g.node(n).unwrap();
    let mut a = format!(
        "Id=\"{}\" Label=\"{}\" Cardinality=\"{}\"",
        n,
        esc(&node_label(g, n, deco)),
        esc(&node.card.to_string())
    );
    let mut bg = if node.card == Interval::ONE { &st.single_background } else { &st.summary_background };
    if st.heat {
        if let Some(k) = deco.heat.get(&n) {
            bg = match k {
                FindingKind::Hot5 => &st.hot[0],
                FindingKind::Hot15 => &st.hot[1],
                _ => &st.hot[2],
            };
        }
    }
    let _ = write!(a, " Background=\"{}\"", esc(bg));
    let shapes: Vec<String> = g.shapes_of(n).filter(|s| !s.labels.is_empty()).map(|s| s.to_string()).collect();
    if !shapes.is_empty() {
        let _ = write!(a, " ShapeFacts=\"{}\"", esc(&shapes.join("; ")));
    }
    if st.diagnostics {
        if let Some(fs) = deco.findings.get(&n) {
            let names: Vec<String> = fs.iter().map(|k| format!("{k:?}")).collect();
            let _ = write!(a, " Stroke=\"{}\" Findings=\"{}\"", esc(&st.finding_stroke), esc(&names.join(" ")));
        }
    }
    a
}

fn link_attrs(g: &AbstractGraph, l: &Link, st: &StyleConfig) -> String {
    let mut label = format_labels(&l.labels);
    if l.src == l.tgt {
        // shape facts on self-edges
        let facts: Vec<String> =
            g.shapes_of(l.src).filter(|s| !s.labels.is_disjoint(&l.labels)).map(|s| s.to_string()).collect();
        if !facts.is_empty() {
            let _ = write!(label, " {}", facts.join(" "));
        }
    }
    let mut a = format!("Source=\"{}\" Target=\"{}\" Label=\"{}\"", l.src, l.tgt, esc(&label));
    if l.non_injective {
        let _ = write!(
            a,
            " NonInjective=\"True\" Stroke=\"{}\" StrokeThickness=\"{}\"",
            esc(&st.non_injective_stroke),
            st.non_injective_thickness
        );
    }
    if l.maybe_null {
        let _ = write!(a, " MaybeNull=\"True\" StrokeDashArray=\"{}\"", esc(&st.dash_array));
    }
    a
}

/// Nodes drawn: everything except null, which only ever appears as a
/// folded dash.
fn drawn_nodes(g: &AbstractGraph) -> impl Iterator<Item = NodeId> + '_ {
    g.nodes().map(|n| n.id).filter(move |&n| n != g.null())
}

pub fn export_dgml(g: &AbstractGraph, deco: &Decorations, st: &StyleConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<DirectedGraph xmlns=\"{DGML_NS}\">");
    out.push_str("  <Nodes>\n");
    for n in drawn_nodes(g) {
        let _ = writeln!(out, "    <Node {} />", node_attrs(g, n, deco, st));
    }
    out.push_str("  </Nodes>\n  <Links>\n");
    for l in links(g, st.collapse_multi_edges) {
        let _ = writeln!(out, "    <Link {} />", link_attrs(g, &l, st));
    }
    out.push_str("  </Links>\n");
    write_styles(&mut out, st);
    out.push_str("</DirectedGraph>\n");
    out
}

/// The abstract graph with each reduced node as a collapsed group holding
/// its abstract nodes.
pub fn export_reduced_dgml(r: &ReducedGraph, deco: &Decorations, st: &StyleConfig) -> String {
    let g = r.graph();
    let mut out = String::new();
    let _ = writeln!(out, "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<DirectedGraph xmlns=\"{DGML_NS}\">");
    out.push_str("  <Nodes>\n");
    for rn in r.nodes() {
        let types: Vec<&str> = rn.types.iter().map(|s| s.as_str()).collect();
        let _ = writeln!(
            out,
            "    <Node Id=\"{}\" Label=\"{}\" Cardinality=\"{}\" Group=\"Collapsed\" Interesting=\"{}\" />",
            rn.id,
            esc(&types.join(", ")),
            esc(&rn.card.to_string()),
            if rn.interesting { "True" } else { "False" }
        );
    }
    for n in drawn_nodes(g) {
        let _ = writeln!(out, "    <Node {} />", node_attrs(g, n, deco, st));
    }
    out.push_str("  </Nodes>\n  <Links>\n");
    for rn in r.nodes() {
        for n in &rn.covers {
            let _ = writeln!(out, "    <Link Source=\"{}\" Target=\"{}\" Category=\"Contains\" />", rn.id, n);
        }
    }
    for l in links(g, st.collapse_multi_edges) {
        let _ = writeln!(out, "    <Link {} />", link_attrs(g, &l, st));
    }
    out.push_str("  </Links>\n");
    write_styles(&mut out, st);
    out.push_str("</DirectedGraph>\n");
    out
}

pub fn export_graphml(g: &AbstractGraph) -> String {
    let mut out = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n  <key id=\"types\" for=\"node\" attr.name=\"types\" attr.type=\"string\"/>\n  <key id=\"card\" for=\"node\" attr.name=\"card\" attr.type=\"string\"/>\n  <key id=\"label\" for=\"edge\" attr.name=\"label\" attr.type=\"string\"/>\n  <key id=\"injective\" for=\"edge\" attr.name=\"injective\" attr.type=\"boolean\"/>\n  <graph id=\"G\" edgedefault=\"directed\">\n",
    );
    for n in g.nodes() {
        let types: Vec<&str> = n.types.iter().map(|s| s.as_str()).collect();
        let _ = writeln!(
            out,
            "    <node id=\"{}\"><data key=\"types\">{}</data><data key=\"card\">{}</data></node>",
            n.id,
            esc(&types.join(", ")),
            n.card
        );
    }
    for (k, inj) in g.edge_entries() {
        let _ = writeln!(
            out,
            "    <edge source=\"{}\" target=\"{}\"><data key=\"label\">{}</data><data key=\"injective\">{}</data></edge>",
            k.src,
            k.tgt,
            esc(k.label.as_str()),
            inj
        );
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}
