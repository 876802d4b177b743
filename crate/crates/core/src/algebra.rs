//! Ordering and merging of abstract graphs.
//!
//! [`compare`] decides `g1 ⊑ g2` by building a structural map φ from g1 to
//! g2 and checking the property conjuncts through it. [`merge`] builds an
//! upper approximation of two graphs together with the maps η1 and η2 from
//! each input into the result.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::abstract_graph::{
    canonicalize_with_map, AbstractEdge, AbstractGraph, AbstractLabel, AbstractNode, EdgeKey, NodeId, ShapeFact,
};
use crate::closure::Closure;
use crate::heap_model::{recursive_relation, Shape, TypeTable};
use crate::interval::Interval;

pub const MAX_MISMATCHES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum DiffKind {
    UnmatchedEdge,
    UnmatchedNode,
    TypeExcess,
    CardinalityExcess,
    InjectivityWeakening,
    ShapeWeakening,
    /// A g2 node with no preimage whose cardinality excludes zero.
    UncoveredNode,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Mismatch {
    pub kind: DiffKind,
    /// Node (`n3`) or edge (`n2-l->n3`) of g1, or of g2 for uncovered nodes.
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {}: {}", self.kind, self.subject, self.detail)
    }
}

/// φ over nodes and edges.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IsomorphismMap {
    pub nodes: BTreeMap<NodeId, NodeId>,
    pub edges: BTreeMap<EdgeKey, EdgeKey>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CompareResult {
    Leq(IsomorphismMap),
    Incomparable(Vec<Mismatch>),
}

impl CompareResult {
    pub fn is_leq(&self) -> bool {
        matches!(self, CompareResult::Leq(_))
    }

    pub fn mismatches(&self) -> &[Mismatch] {
        match self {
            CompareResult::Leq(_) => &[],
            CompareResult::Incomparable(d) => d,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CompareResult::Leq(phi) => serde_json::json!({
                "result": "leq",
                "phi": phi.nodes.iter().map(|(a, b)| (a.0.to_string(), b.0)).collect::<BTreeMap<_, _>>(),
            }),
            CompareResult::Incomparable(diff) => serde_json::json!({ "result": "incomparable", "diff": diff }),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("graph {graph}: node {node} has two '{label}' edges to targets with overlapping types ({a} and {b})")]
    AmbiguousMatch { graph: u8, node: NodeId, label: AbstractLabel, a: NodeId, b: NodeId },
}

/// Checks that same-label out-edges of every node reach type-disjoint
/// targets, which makes edge matching deterministic.
pub fn check_matching_postcondition(g: &AbstractGraph, graph: u8) -> Result<(), CompareError> {
    for n in g.nodes() {
        let mut by_label: BTreeMap<&AbstractLabel, Vec<NodeId>> = BTreeMap::new();
        for (k, _) in g.out_edges(n.id) {
            by_label.entry(&k.label).or_default().push(k.tgt);
        }
        for (label, tgts) in by_label {
            for (i, &a) in tgts.iter().enumerate() {
                for &b in &tgts[i + 1..] {
                    let (ta, tb) = (&g.node(a).unwrap().types, &g.node(b).unwrap().types);
                    if !ta.is_disjoint(tb) {
                        return Err(CompareError::AmbiguousMatch { graph, node: n.id, label: label.clone(), a, b });
                    }
                }
            }
        }
    }
    Ok(())
}

/// The g2 edge matching g1 edge `e1` out of `src2`: same label, and a target
/// whose type set meets `e1`'s target's (null matches null).
fn matching_edge<'a>(g1: &AbstractGraph, g2: &'a AbstractGraph, e1: &EdgeKey, src2: NodeId) -> Option<&'a EdgeKey> {
    let t1 = g1.node(e1.tgt).unwrap();
    g2.out_edges(src2).map(|(k, _)| k).find(|k| {
        if k.label != e1.label {
            return false;
        }
        if e1.tgt == g1.null() {
            return k.tgt == g2.null();
        }
        k.tgt != g2.null() && !t1.types.is_disjoint(&g2.node(k.tgt).unwrap().types)
    })
}

/// Decides `g1 ⊑ g2`. φ pairs the roots and nulls, then follows matching
/// edges; g1 nodes not reached from root are seeded onto a g2 node with an
/// equal (else the smallest containing) type set. Through φ:
/// types and summed cardinalities must be contained, an injective g2 edge
/// needs every g1 edge it absorbs to be injective with pairwise distinct
/// targets, every g2 tree fact must be implied by a g1 tree fact on a
/// single preimage (contra-variant in the labels), and g2 nodes outside the
/// image must admit cardinality 0.
pub fn compare(g1: &AbstractGraph, g2: &AbstractGraph) -> Result<CompareResult, CompareError> {
    check_matching_postcondition(g1, 1)?;
    check_matching_postcondition(g2, 2)?;
    let mut diff: Vec<Mismatch> = Vec::new();
    let mut phi = IsomorphismMap::default();
    phi.nodes.insert(g1.root(), g2.root());
    phi.nodes.insert(g1.null(), g2.null());
    propagate(g1, g2, g1.root(), &mut phi, &mut diff);

    if diff.is_empty() {
        if let Some((found, _)) = Search::new(g1, g2, &[], SEARCH_BUDGET).run(phi.clone(), Vec::new()) {
            return Ok(CompareResult::Leq(found));
        }
    }
    // no φ: report the smallest diff among searches that each tolerate
    // one kind of failure
    let mut best: Option<Vec<Mismatch>> = None;
    let mut runs: Vec<(&[DiffKind], usize)> = RELAXATIONS.iter().map(|&a| (a, usize::MAX)).collect();
    // edge losses: look for few first
    runs.splice(runs.len() - 1.., [1, 2, usize::MAX].map(|k| (&[DiffKind::UnmatchedEdge][..], k.saturating_add(diff.len()).saturating_add(1))));
    for (allow, limit) in runs {
        if !diff.is_empty() && !allow.contains(&DiffKind::UnmatchedEdge) {
            continue;
        }
        let mut search = Search::new(g1, g2, allow, RELAXED_BUDGET);
        search.limit = limit;
        let Some((found, mut d)) = search.run(phi.clone(), diff.clone()) else {
            continue;
        };
        check_conjuncts(g1, g2, &found, &mut d, false);
        let d = normalized(d);
        if d.is_empty() {
            return Ok(CompareResult::Leq(found));
        }
        if best.as_ref().is_none_or(|b| d.len() < b.len()) {
            best = Some(d);
        }
        if best.as_ref().is_some_and(|b| b.len() == 1) {
            break;
        }
    }
    if let Some(d) = best {
        return Ok(CompareResult::Incomparable(d));
    }
    seed_greedily(g1, g2, &mut phi, &mut diff);
    check_conjuncts(g1, g2, &phi, &mut diff, false);
    if diff.is_empty() {
        return Ok(CompareResult::Leq(phi));
    }
    Ok(CompareResult::Incomparable(normalized(diff)))
}

fn normalized(mut diff: Vec<Mismatch>) -> Vec<Mismatch> {
    diff.sort();
    diff.dedup();
    diff.truncate(MAX_MISMATCHES);
    diff
}

/// Trial seedings tried before giving up on unreached nodes.
const SEARCH_BUDGET: usize = 4_000;
const RELAXED_BUDGET: usize = 1_000;

const RELAXATIONS: [&[DiffKind]; 4] = [
    &[DiffKind::CardinalityExcess, DiffKind::UncoveredNode],
    &[DiffKind::ShapeWeakening],
    &[DiffKind::InjectivityWeakening],
    &[DiffKind::UnmatchedEdge],
];

fn propagate(g1: &AbstractGraph, g2: &AbstractGraph, start: NodeId, phi: &mut IsomorphismMap, diff: &mut Vec<Mismatch>) {
    let mut queue = VecDeque::from([start]);
    while let Some(n1) = queue.pop_front() {
        let n2 = phi.nodes[&n1];
        for (e1, _) in g1.out_edges(n1) {
            let Some(e2) = matching_edge(g1, g2, e1, n2) else {
                diff.push(Mismatch {
                    kind: DiffKind::UnmatchedEdge,
                    subject: e1.to_string(),
                    detail: format!("no '{}' edge out of {n2} reaches matching types", e1.label),
                });
                continue;
            };
            match phi.nodes.get(&e1.tgt) {
                Some(&prev) if prev != e2.tgt => {
                    diff.push(Mismatch {
                        kind: DiffKind::UnmatchedEdge,
                        subject: e1.to_string(),
                        detail: format!("target already maps to {prev}, edge leads to {}", e2.tgt),
                    });
                    continue;
                }
                Some(_) => {}
                None => {
                    phi.nodes.insert(e1.tgt, e2.tgt);
                    queue.push_back(e1.tgt);
                }
            }
            phi.edges.insert(e1.clone(), e2.clone());
        }
    }
}

/// Next unreached g1 node to seed, sources first.
fn next_seed(g1: &AbstractGraph, phi: &IsomorphismMap) -> Option<NodeId> {
    let unmapped: Vec<NodeId> = g1.nodes().map(|n| n.id).filter(|id| !phi.nodes.contains_key(id)).collect();
    let has_unmapped_pred = |id: NodeId| g1.in_edges(id).any(|(k, _)| k.src != id && !phi.nodes.contains_key(&k.src));
    unmapped.iter().copied().find(|&id| !has_unmapped_pred(id)).or(unmapped.first().copied())
}

fn seed_candidates<'a>(g1: &AbstractGraph, g2: &'a AbstractGraph, phi: &IsomorphismMap, seed: NodeId) -> Vec<&'a AbstractNode> {
    let types = &g1.node(seed).unwrap().types;
    let image: BTreeSet<NodeId> = phi.nodes.values().copied().collect();
    let mut candidates: Vec<&AbstractNode> = g2.content_nodes().filter(|m| types.is_subset(&m.types)).collect();
    // canonical inputs: the same position is the likeliest partner
    candidates.sort_by_key(|m| (m.types != *types, m.id != seed, image.contains(&m.id), m.types.len(), m.id));
    candidates
}

/// Depth-first search over seedings of unreached nodes, pruned by the
/// partial conjunct check. Mismatches of the `allow`ed kinds are tolerated.
struct Search<'a> {
    g1: &'a AbstractGraph,
    g2: &'a AbstractGraph,
    budget: usize,
    allow: &'a [DiffKind],
    domain: BTreeMap<NodeId, BTreeSet<NodeId>>,
    best: Option<(usize, IsomorphismMap, Vec<Mismatch>)>,
    /// Mismatch count a result must stay under.
    limit: usize,
}

type Domains = BTreeMap<NodeId, BTreeSet<NodeId>>;

/// Nodes of g2 holding each g1 node's types.
fn type_domains(g1: &AbstractGraph, g2: &AbstractGraph) -> Domains {
    let mut domain: Domains = g1
        .content_nodes()
        .map(|n| (n.id, g2.content_nodes().filter(|m| n.types.is_subset(&m.types)).map(|m| m.id).collect()))
        .collect();
    domain.insert(g1.root(), BTreeSet::from([g2.root()]));
    domain.insert(g1.null(), BTreeSet::from([g2.null()]));
    domain
}

/// Shrinks `domain` to the largest relation where every edge out of n has
/// a match out of m landing in its target's domain, and every edge into n
/// has a same-labelled edge into m from its source's domain. `lenient`
/// tolerates missing matches and skips in-edges. False once some domain is
/// empty.
fn refine(g1: &AbstractGraph, g2: &AbstractGraph, domain: &mut Domains, lenient: bool) -> bool {
    loop {
        let mut changed = false;
        for n in g1.nodes() {
            let keep: BTreeSet<NodeId> = domain[&n.id]
                .iter()
                .copied()
                .filter(|&m| {
                    let outs = g1.out_edges(n.id).all(|(e1, _)| {
                        matching_edge(g1, g2, e1, m).map_or(lenient, |e2| domain[&e1.tgt].contains(&e2.tgt))
                    });
                    outs && (lenient
                        || g1.in_edges(n.id).all(|(e1, _)| {
                            g2.in_edges(m).any(|(e2, _)| {
                                e2.label == e1.label
                                    && domain[&e1.src].contains(&e2.src)
                                    && matching_edge(g1, g2, e1, e2.src).is_some_and(|k| k.tgt == m)
                            })
                        }))
                })
                .collect();
            if keep.is_empty() {
                return false;
            }
            if keep.len() != domain[&n.id].len() {
                domain.insert(n.id, keep);
                changed = true;
            }
        }
        if !changed {
            return true;
        }
    }
}

impl<'a> Search<'a> {
    fn new(g1: &'a AbstractGraph, g2: &'a AbstractGraph, allow: &'a [DiffKind], mut budget: usize) -> Self {
        let mut domain = type_domains(g1, g2);
        if !refine(g1, g2, &mut domain, allow.contains(&DiffKind::UnmatchedEdge)) {
            budget = 0;
        }
        Search { g1, g2, budget, allow, domain, best: None, limit: usize::MAX }
    }

    /// Tolerated mismatches, or None if any other kind shows up.
    fn check(&self, phi: &IsomorphismMap, partial: bool, domain: &Domains) -> Option<Vec<Mismatch>> {
        let mut diff = Vec::new();
        check_conjuncts(self.g1, self.g2, phi, &mut diff, partial);
        let counts = self.allow.contains(&DiffKind::CardinalityExcess);
        let ok = diff.iter().all(|m| self.allow.contains(&m.kind)) && !(partial && !counts && self.starved(phi, domain));
        ok.then_some(diff)
    }

    /// Some g2 lower bound is out of reach even if every unmapped g1 node
    /// that fits went there.
    fn starved(&self, phi: &IsomorphismMap, domain: &Domains) -> bool {
        let mut reach: BTreeMap<NodeId, Option<u64>> = BTreeMap::new();
        let add = |acc: Option<u64>, hi: Option<u64>| acc.zip(hi).map(|(a, b)| a.saturating_add(b));
        for n1 in self.g1.nodes() {
            match phi.nodes.get(&n1.id) {
                Some(n2) => {
                    let r = reach.entry(*n2).or_insert(Some(0));
                    *r = add(*r, n1.card.hi());
                }
                None => {
                    for &m in &domain[&n1.id] {
                        let r = reach.entry(m).or_insert(Some(0));
                        *r = add(*r, n1.card.hi());
                    }
                }
            }
        }
        self.g2.nodes().any(|n2| match reach.get(&n2.id) {
            Some(Some(r)) => *r < n2.card.lo(),
            Some(None) => false,
            None => n2.card.lo() > 0,
        })
    }

    /// Removes g2 nodes whose upper bound the unmapped node would overflow.
    fn drop_full(&self, phi: &IsomorphismMap, domain: &mut Domains) {
        let mut load: BTreeMap<NodeId, u64> = BTreeMap::new();
        for (n1, n2) in &phi.nodes {
            *load.entry(*n2).or_default() += self.g1.node(*n1).unwrap().card.lo();
        }
        for n1 in self.g1.nodes().filter(|n| !phi.nodes.contains_key(&n.id)) {
            let lo = n1.card.lo();
            if lo == 0 {
                continue;
            }
            if let Some(d) = domain.get_mut(&n1.id) {
                d.retain(|m| {
                    let hi = self.g2.node(*m).unwrap().card.hi();
                    hi.is_none_or(|hi| load.get(m).copied().unwrap_or(0).saturating_add(lo) <= hi)
                });
            }
        }
    }

    fn candidates(&self, phi: &IsomorphismMap, seed: NodeId, domain: &Domains) -> Vec<&'a AbstractNode> {
        let mut c = seed_candidates(self.g1, self.g2, phi, seed);
        c.retain(|m| domain[&seed].contains(&m.id));
        c
    }

    /// Completes `phi` with no mismatches, or with the fewest tolerated
    /// ones; `diff` carries edge mismatches already made.
    fn run(&mut self, phi: IsomorphismMap, diff: Vec<Mismatch>) -> Option<(IsomorphismMap, Vec<Mismatch>)> {
        if self.budget == 0 {
            return None;
        }
        let domain = self.domain.clone();
        if let Some(found) = self.extend(phi, diff, domain) {
            return Some(found);
        }
        self.best.take().map(|(_, phi, diff)| (phi, diff))
    }

    fn bound(&self) -> usize {
        self.best.as_ref().map_or(self.limit, |b| b.0)
    }

    fn extend(&mut self, phi: IsomorphismMap, diff: Vec<Mismatch>, domain: Domains) -> Option<(IsomorphismMap, Vec<Mismatch>)> {
        if next_seed(self.g1, &phi).is_none() {
            let mut found = self.check(&phi, false, &domain)?;
            if found.is_empty() && diff.is_empty() {
                return Some((phi, diff));
            }
            if found.len() + diff.len() <= 1 {
                // cannot do better once the exact search has failed
                return Some((phi, diff));
            }
            found.extend(diff);
            if found.len() < self.bound() {
                self.best = Some((found.len(), phi, found));
            }
            return None;
        }
        // most constrained unmapped node first
        let (_, seed, candidates) = self
            .g1
            .nodes()
            .filter(|n| !phi.nodes.contains_key(&n.id))
            .map(|n| {
                let c = self.candidates(&phi, n.id, &domain);
                let sourced = self.g1.in_edges(n.id).any(|(k, _)| k.src != n.id && !phi.nodes.contains_key(&k.src));
                ((c.len(), sourced), n.id, c)
            })
            .min_by_key(|(key, id, _)| (*key, *id))
            .unwrap();
        let edges = self.allow.contains(&DiffKind::UnmatchedEdge);
        let counts = self.allow.contains(&DiffKind::CardinalityExcess);
        let mut trials = Vec::new();
        for m in candidates {
            let mut trial = phi.clone();
            let mut trial_diff = diff.clone();
            trial.nodes.insert(seed, m.id);
            propagate(self.g1, self.g2, seed, &mut trial, &mut trial_diff);
            if trial_diff.len() > diff.len() && !edges {
                continue;
            }
            trials.push((trial, trial_diff));
        }
        for (trial, trial_diff) in trials {
            if self.budget == 0 {
                return None;
            }
            self.budget -= 1;
            let mut narrowed = domain.clone();
            for (n1, n2) in &trial.nodes {
                narrowed.insert(*n1, BTreeSet::from([*n2]));
            }
            if !counts {
                self.drop_full(&trial, &mut narrowed);
            }
            if !refine(self.g1, self.g2, &mut narrowed, edges) {
                continue;
            }
            // every failure counted so far persists as φ grows
            match self.check(&trial, true, &narrowed) {
                Some(partial) if trial_diff.len() + partial.len() < self.bound() => {}
                _ => continue,
            }
            if let Some(found) = self.extend(trial, trial_diff, narrowed) {
                return Some(found);
            }
        }
        None
    }
}

/// Maps every unreached node, taking per seed the candidate with the fewest
/// local failures.
fn seed_greedily(g1: &AbstractGraph, g2: &AbstractGraph, phi: &mut IsomorphismMap, diff: &mut Vec<Mismatch>) {
    while let Some(seed) = next_seed(g1, phi) {
        let mut best: Option<(usize, IsomorphismMap, Vec<Mismatch>)> = None;
        for m in seed_candidates(g1, g2, phi, seed) {
            let mut trial = phi.clone();
            let mut trial_diff = Vec::new();
            trial.nodes.insert(seed, m.id);
            propagate(g1, g2, seed, &mut trial, &mut trial_diff);
            let mut local = Vec::new();
            check_conjuncts(g1, g2, &trial, &mut local, true);
            let score = trial_diff.len() + local.len();
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, trial, trial_diff));
            }
            if score == 0 {
                break;
            }
        }
        match best {
            Some((_, trial, trial_diff)) => {
                *phi = trial;
                diff.extend(trial_diff);
            }
            None => {
                diff.push(Mismatch {
                    kind: DiffKind::UnmatchedNode,
                    subject: seed.to_string(),
                    detail: "no node of g2 holds its types".into(),
                });
                // placeholder that matches nothing, so the rest is still reported
                phi.nodes.insert(seed, NodeId(u64::MAX));
            }
        }
    }
}

/// With `partial`, φ may still grow: unmapped nodes are skipped and a
/// cardinality only fails once its lower bound already exceeds the target.
fn check_conjuncts(g1: &AbstractGraph, g2: &AbstractGraph, phi: &IsomorphismMap, diff: &mut Vec<Mismatch>, partial: bool) {
    let mut pre: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for (&n1, &n2) in &phi.nodes {
        pre.entry(n2).or_default().push(n1);
    }

    for n1 in g1.nodes() {
        let Some(n2) = phi.nodes.get(&n1.id).and_then(|m| g2.node(*m)) else { continue };
        if !n1.types.is_subset(&n2.types) {
            let extra: Vec<&String> = n1.types.difference(&n2.types).collect();
            diff.push(Mismatch {
                kind: DiffKind::TypeExcess,
                subject: n1.id.to_string(),
                detail: format!("types {extra:?} missing from {}", n2.id),
            });
        }
    }
    for n2 in g2.nodes() {
        let total: Interval = pre.get(&n2.id).into_iter().flatten().map(|p| g1.node(*p).unwrap().card).sum();
        let fails = if partial {
            n2.card.hi().is_some_and(|hi| total.lo() > hi)
        } else {
            !total.is_within(&n2.card)
        };
        if fails {
            let subject = match pre.get(&n2.id) {
                Some(p) if p.len() == 1 => p[0].to_string(),
                Some(p) => p.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("+"),
                None => n2.id.to_string(),
            };
            let kind = if pre.contains_key(&n2.id) { DiffKind::CardinalityExcess } else { DiffKind::UncoveredNode };
            diff.push(Mismatch { kind, subject, detail: format!("{total} not within {} of {}", n2.card, n2.id) });
        }
    }

    let mut absorbed: BTreeMap<&EdgeKey, Vec<&EdgeKey>> = BTreeMap::new();
    for (e1, e2) in &phi.edges {
        absorbed.entry(e2).or_default().push(e1);
    }
    for (e2, e1s) in absorbed {
        if !g2.edge(e2).unwrap() {
            continue;
        }
        let weak = e1s.iter().find(|e1| !g1.edge(e1).unwrap());
        let shared = e1s.iter().enumerate().find_map(|(i, a)| e1s[i + 1..].iter().find(|b| b.tgt == a.tgt).map(|b| (a, b)));
        if let Some(e1) = weak {
            diff.push(Mismatch {
                kind: DiffKind::InjectivityWeakening,
                subject: e1.to_string(),
                detail: format!("{e2} is injective but this edge is not"),
            });
        } else if let Some((a, b)) = shared {
            diff.push(Mismatch {
                kind: DiffKind::InjectivityWeakening,
                subject: a.to_string(),
                detail: format!("{e2} is injective but absorbs {a} and {b}, which share a target"),
            });
        }
    }

    for fact in g2.shapes().filter(|s| s.shape == Shape::Tree) {
        let Some(p) = pre.get(&fact.node) else { continue };
        let members: BTreeSet<NodeId> = p.iter().copied().collect();
        // labels of g1 pointers that land inside the region
        let internal: BTreeSet<&AbstractLabel> = phi
            .edges
            .keys()
            .filter(|e| members.contains(&e.src) && members.contains(&e.tgt))
            .map(|e| &e.label)
            .collect();
        let relevant: BTreeSet<AbstractLabel> = fact.labels.iter().filter(|l| internal.contains(l)).cloned().collect();
        if relevant.is_empty() {
            continue;
        }
        let implied = p.len() == 1
            && g1.shapes_of(p[0]).any(|s| s.shape == Shape::Tree && relevant.is_subset(&s.labels));
        if !implied {
            diff.push(Mismatch {
                kind: DiffKind::ShapeWeakening,
                subject: p.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("+"),
                detail: format!("{} requires {fact}", fact.node),
            });
        }
    }
}

// ---------------------------------------------------------------------------
// Merge

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeMode {
    Join,
    Widen,
}

/// Recursive type groups by type name, for the lifted same-structure rule.
#[derive(Clone, Debug, Default)]
pub struct TypeGroups {
    group: HashMap<String, usize>,
}

impl TypeGroups {
    pub fn from_types(tt: &TypeTable) -> Self {
        let rel = recursive_relation(tt);
        let mut group = HashMap::new();
        for (i, g) in rel.groups().iter().enumerate() {
            for &t in g {
                group.insert(tt.name(t).to_string(), i);
            }
        }
        TypeGroups { group }
    }

    fn group_of(&self, name: &str) -> Option<usize> {
        self.group.get(name).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeResult {
    pub graph: AbstractGraph,
    pub eta1: BTreeMap<NodeId, NodeId>,
    pub eta2: BTreeMap<NodeId, NodeId>,
    pub edges1: BTreeMap<EdgeKey, EdgeKey>,
    pub edges2: BTreeMap<EdgeKey, EdgeKey>,
    pub mode: MergeMode,
}

/// Upper approximation of `g1` and `g2`. Roots, nulls and the targets of
/// same-named variables are unioned, then the congruence closure runs over
/// both graphs' edges (plus the lifted same-structure rule when `groups` is
/// given). In widen mode `g1` is the prior iterate. The result is in
/// canonical form.
pub fn merge(g1: &AbstractGraph, g2: &AbstractGraph, mode: MergeMode, groups: Option<&TypeGroups>) -> MergeResult {
    // elements: 0 root, 1 null, then g1 content nodes, then g2 content nodes
    let c1: Vec<NodeId> = g1.content_nodes().map(|n| n.id).collect();
    let c2: Vec<NodeId> = g2.content_nodes().map(|n| n.id).collect();
    let mut el1: HashMap<NodeId, u32> = HashMap::from([(g1.root(), 0), (g1.null(), 1)]);
    let mut el2: HashMap<NodeId, u32> = HashMap::from([(g2.root(), 0), (g2.null(), 1)]);
    for (i, &n) in c1.iter().enumerate() {
        el1.insert(n, 2 + i as u32);
    }
    for (i, &n) in c2.iter().enumerate() {
        el2.insert(n, 2 + (c1.len() + i) as u32);
    }

    let mut type_names: BTreeSet<&str> = BTreeSet::new();
    for n in g1.nodes().chain(g2.nodes()) {
        type_names.extend(n.types.iter().map(|s| s.as_str()));
    }
    let type_id: HashMap<&str, u32> = type_names.iter().enumerate().map(|(i, s)| (*s, i as u32)).collect();
    let dense = |n: &AbstractNode| n.types.iter().map(|t| type_id[t.as_str()]).collect::<Vec<u32>>();
    let mut types = vec![Vec::new(), Vec::new()];
    types.extend(c1.iter().map(|&n| dense(g1.node(n).unwrap())));
    types.extend(c2.iter().map(|&n| dense(g2.node(n).unwrap())));
    let mut pinned = vec![true, true];
    pinned.resize(types.len(), false);

    let mut labels: BTreeSet<&AbstractLabel> = BTreeSet::new();
    for g in [g1, g2] {
        for (k, _) in g.edge_entries() {
            labels.insert(&k.label);
        }
    }
    let label_id: HashMap<&AbstractLabel, u32> = labels.iter().enumerate().map(|(i, l)| (*l, i as u32)).collect();

    let mut cl = Closure::new(types, pinned);
    for (g, el) in [(g1, &el1), (g2, &el2)] {
        for (k, _) in g.edge_entries() {
            cl.add_edge(el[&k.src], label_id[&k.label], el[&k.tgt]);
        }
    }

    // same-named variables
    let mut var_targets: BTreeMap<&AbstractLabel, Vec<u32>> = BTreeMap::new();
    for (g, el) in [(g1, &el1), (g2, &el2)] {
        for (k, _) in g.out_edges(g.root()) {
            if k.tgt != g.null() {
                var_targets.entry(&k.label).or_default().push(el[&k.tgt]);
            }
        }
    }
    for ts in var_targets.values() {
        for w in ts.windows(2) {
            cl.union(w[0], w[1]);
        }
    }

    if let Some(groups) = groups {
        for (g, el) in [(g1, &el1), (g2, &el2)] {
            for (k, _) in g.edge_entries() {
                if g.is_distinguished(k.src) || g.is_distinguished(k.tgt) {
                    continue;
                }
                let gs: BTreeSet<usize> = g.node(k.src).unwrap().types.iter().filter_map(|t| groups.group_of(t)).collect();
                let related = g.node(k.tgt).unwrap().types.iter().filter_map(|t| groups.group_of(t)).any(|x| gs.contains(&x));
                if related {
                    cl.union(el[&k.src], el[&k.tgt]);
                }
            }
        }
    }
    cl.run();

    // number classes: root 0, null 1, then by first element
    let total = 2 + c1.len() + c2.len();
    let mut class_node: HashMap<u32, NodeId> = HashMap::from([(0, NodeId(0)), (1, NodeId(1))]);
    let mut node_of_el: Vec<NodeId> = Vec::with_capacity(total);
    for e in 0..total as u32 {
        let r = cl.find(e);
        let next = NodeId(class_node.len() as u64);
        let id = *class_node.entry(r).or_insert(next);
        node_of_el.push(id);
    }
    let eta1: BTreeMap<NodeId, NodeId> = el1.iter().map(|(&n, &e)| (n, node_of_el[e as usize])).collect();
    let eta2: BTreeMap<NodeId, NodeId> = el2.iter().map(|(&n, &e)| (n, node_of_el[e as usize])).collect();

    let mut pre1: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut pre2: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for (&n, &m) in &eta1 {
        pre1.entry(m).or_default().push(n);
    }
    for (&n, &m) in &eta2 {
        pre2.entry(m).or_default().push(n);
    }

    let ids: BTreeSet<NodeId> = node_of_el.iter().copied().collect();
    let mut nodes = Vec::new();
    for &m in &ids {
        let mut ty = BTreeSet::new();
        let sum = |g: &AbstractGraph, pre: &BTreeMap<NodeId, Vec<NodeId>>, ty: &mut BTreeSet<String>| -> Interval {
            pre.get(&m)
                .into_iter()
                .flatten()
                .map(|n| {
                    let node = g.node(*n).unwrap();
                    ty.extend(node.types.iter().cloned());
                    node.card
                })
                .sum()
        };
        let s1 = sum(g1, &pre1, &mut ty);
        let s2 = sum(g2, &pre2, &mut ty);
        let card = match mode {
            MergeMode::Join => s1.hull(&s2),
            MergeMode::Widen => Interval::widen(&s1, &s2),
        };
        nodes.push(AbstractNode { id: m, types: ty, card });
    }

    let mut edges1 = BTreeMap::new();
    let mut edges2 = BTreeMap::new();
    // per merged edge, per input graph: absorbed (target, injective)
    let mut absorbed: BTreeMap<EdgeKey, [Vec<(NodeId, bool)>; 2]> = BTreeMap::new();
    for (gi, (g, eta)) in [(g1, &eta1), (g2, &eta2)].into_iter().enumerate() {
        for (k, inj) in g.edge_entries() {
            let k3 = EdgeKey { src: eta[&k.src], label: k.label.clone(), tgt: eta[&k.tgt] };
            absorbed.entry(k3.clone()).or_default()[gi].push((k.tgt, inj));
            if gi == 0 {
                edges1.insert(k.clone(), k3);
            } else {
                edges2.insert(k.clone(), k3);
            }
        }
    }
    let edges: Vec<AbstractEdge> = absorbed
        .into_iter()
        .map(|(key, per_graph)| {
            let injective = per_graph.iter().all(|es| {
                let distinct: BTreeSet<NodeId> = es.iter().map(|e| e.0).collect();
                distinct.len() == es.len() && es.iter().all(|e| e.1)
            });
            AbstractEdge { key, injective }
        })
        .collect();

    let mut self_labels: BTreeMap<NodeId, BTreeSet<AbstractLabel>> = BTreeMap::new();
    for e in &edges {
        if e.key.src == e.key.tgt {
            self_labels.entry(e.key.src).or_default().insert(e.key.label.clone());
        }
    }
    let mut shapes = Vec::new();
    for &m in &ids {
        if m == NodeId(0) || m == NodeId(1) {
            continue;
        }
        let own = self_labels.get(&m).cloned().unwrap_or_default();
        let trees = |g: &AbstractGraph, pre: &BTreeMap<NodeId, Vec<NodeId>>| -> Option<Vec<BTreeSet<AbstractLabel>>> {
            match pre.get(&m).map(|p| p.as_slice()) {
                None | Some([]) => Some(vec![own.clone()]),
                Some([n]) => Some(g.shapes_of(*n).filter(|s| s.shape == Shape::Tree).map(|s| s.labels.clone()).collect()),
                Some(_) => None,
            }
        };
        let mut granted: Vec<BTreeSet<AbstractLabel>> = Vec::new();
        if let (Some(t1), Some(t2)) = (trees(g1, &pre1), trees(g2, &pre2)) {
            for a in &t1 {
                for b in &t2 {
                    let l: BTreeSet<AbstractLabel> = a.intersection(b).filter(|l| own.contains(l)).cloned().collect();
                    granted.push(l);
                }
            }
        }
        granted.sort();
        granted.dedup();
        let maximal: Vec<&BTreeSet<AbstractLabel>> =
            granted.iter().filter(|l| !granted.iter().any(|o| o != *l && l.is_subset(o))).collect();
        for l in &maximal {
            shapes.push(ShapeFact { node: m, labels: (*l).clone(), shape: Shape::Tree });
        }
        if !own.is_empty() && !maximal.iter().any(|l| **l == own) {
            shapes.push(ShapeFact { node: m, labels: own, shape: Shape::Any });
        }
    }

    let g3 = AbstractGraph::new(NodeId(0), NodeId(1), nodes, edges, shapes).expect("merge builds a valid graph");
    let (canon, map) = canonicalize_with_map(&g3);
    let remap_edge = |k: &EdgeKey| EdgeKey { src: map[&k.src], label: k.label.clone(), tgt: map[&k.tgt] };
    MergeResult {
        graph: canon,
        eta1: eta1.into_iter().map(|(a, b)| (a, map[&b])).collect(),
        eta2: eta2.into_iter().map(|(a, b)| (a, map[&b])).collect(),
        edges1: edges1.iter().map(|(a, b)| (a.clone(), remap_edge(b))).collect(),
        edges2: edges2.iter().map(|(a, b)| (a.clone(), remap_edge(b))).collect(),
        mode,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstract_graph::canonicalize;
    use crate::abstraction::{abstract_heap, AbstractionOptions};
    use crate::fixtures::{build_fixture, Fixture};

    fn abs(fx: Fixture) -> AbstractGraph {
        let h = build_fixture(&fx).unwrap();
        canonicalize(&abstract_heap(&h, &AbstractionOptions::default()).unwrap().0)
    }

    fn node_with(g: &AbstractGraph, ty: &str) -> NodeId {
        g.content_nodes().find(|n| n.types.contains(ty)).unwrap().id
    }

    #[test]
    fn reflexive() {
        for fx in [Fixture::ExprTree, Fixture::List(5), Fixture::DList(4), Fixture::OctreeScene { depth: 2 }] {
            let g = abs(fx);
            match compare(&g, &g).unwrap() {
                CompareResult::Leq(phi) => assert!(phi.nodes.iter().all(|(a, b)| a == b)),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn wider_cardinality_is_above() {
        let g1 = abs(Fixture::ExprTree);
        let mut g2 = g1.clone();
        let n = node_with(&g1, "Add");
        g2.set_cardinality(n, Interval::new(1, Some(10)).unwrap());
        assert!(compare(&g1, &g2).unwrap().is_leq());
        let back = compare(&g2, &g1).unwrap();
        assert_eq!(back.mismatches()[0].kind, DiffKind::CardinalityExcess);
    }

    #[test]
    fn shape_is_contravariant_in_labels() {
        let g1 = abs(Fixture::ExprTree);
        let n = node_with(&g1, "Add");
        let mut g2 = g1.clone();
        let full = ShapeFact { node: n, labels: [AbstractLabel::named("l"), AbstractLabel::named("r")].into(), shape: Shape::Tree };
        let only_l = ShapeFact { node: n, labels: [AbstractLabel::named("l")].into(), shape: Shape::Tree };
        g2.remove_shape(&full);
        g2.add_shape(only_l);
        assert!(compare(&g1, &g2).unwrap().is_leq());
        let back = compare(&g2, &g1).unwrap();
        assert_eq!(back.mismatches().len(), 1);
        assert_eq!(back.mismatches()[0].kind, DiffKind::ShapeWeakening);
    }

    #[test]
    fn dropped_edge_and_injectivity() {
        let g1 = abs(Fixture::ExprTree);
        let add = node_with(&g1, "Add");
        let cnst = node_with(&g1, "Const");
        let r = EdgeKey { src: add, label: AbstractLabel::named("r"), tgt: cnst };
        let mut g2 = g1.clone();
        g2.remove_edge(&r);
        assert_eq!(compare(&g1, &g2).unwrap().mismatches()[0].kind, DiffKind::UnmatchedEdge);
        let mut g3 = g1.clone();
        g3.set_injective(&r, false);
        assert!(compare(&g1, &g3).unwrap().is_leq());
        assert_eq!(compare(&g3, &g1).unwrap().mismatches()[0].kind, DiffKind::InjectivityWeakening);
    }

    #[test]
    fn ambiguous_input_is_an_error() {
        let g = abs(Fixture::ExprTree);
        let add = node_with(&g, "Add");
        let cnst = node_with(&g, "Const");
        let var = node_with(&g, "Var");
        let mut nodes: Vec<AbstractNode> = g.nodes().cloned().collect();
        for n in nodes.iter_mut() {
            if n.id == cnst {
                n.types.insert("Var".into());
            }
        }
        let bad = AbstractGraph::new(g.root(), g.null(), nodes, g.edges(), g.shapes().cloned()).unwrap();
        let err = compare(&bad, &g).unwrap_err();
        assert_eq!(err, CompareError::AmbiguousMatch { graph: 1, node: add, label: AbstractLabel::named("r"), a: var.min(cnst), b: var.max(cnst) });
    }

    #[test]
    fn merge_is_idempotent() {
        for fx in [Fixture::ExprTree, Fixture::List(3), Fixture::DList(3), Fixture::BTree(7), Fixture::OctreeScene { depth: 2 }] {
            let g = abs(fx);
            let m = merge(&g, &g, MergeMode::Join, None);
            assert_eq!(m.graph, g);
        }
    }

    #[test]
    fn merge_lists_hulls_cardinality() {
        let a = abs(Fixture::List(2));
        let b = abs(Fixture::List(5));
        let m = merge(&a, &b, MergeMode::Join, None).graph;
        let n = m.content_nodes().next().unwrap();
        assert_eq!(n.card, Interval::new(2, Some(5)).unwrap());
        assert!(m.shapes_of(n.id).any(|s| s.shape == Shape::Tree && s.labels == [AbstractLabel::named("next")].into()));
        let w = merge(&a, &b, MergeMode::Widen, None).graph;
        assert_eq!(w.content_nodes().next().unwrap().card, Interval::at_least(2));
        let w = merge(&b, &a, MergeMode::Widen, None).graph;
        assert_eq!(w.content_nodes().next().unwrap().card, Interval::new(2, Some(5)).unwrap());
    }

    #[test]
    fn collapsing_injective_edges_loses_injectivity() {
        // g1: root -x-> A, A -f-> B1 {T}, A -g-> ... ; two injective 'f'
        // edges from A to distinct-typed targets that g2 forces together
        let node = |id: u64, t: &[&str], c: Interval| AbstractNode {
            id: NodeId(id),
            types: t.iter().map(|s| s.to_string()).collect(),
            card: c,
        };
        let edge = |s: u64, l: &str, t: u64, inj: bool| AbstractEdge {
            key: EdgeKey { src: NodeId(s), label: AbstractLabel::parse(l), tgt: NodeId(t) },
            injective: inj,
        };
        let base = [node(0, &[], Interval::ONE), node(1, &[], Interval::ONE), node(2, &["A"], Interval::exact(2))];
        let mut n1 = base.to_vec();
        n1.extend([node(3, &["P"], Interval::ONE), node(4, &["Q"], Interval::ONE)]);
        let g1 = AbstractGraph::new(
            NodeId(0),
            NodeId(1),
            n1,
            [edge(0, "x", 2, true), edge(2, "f", 3, true), edge(2, "f", 4, true)],
            [],
        )
        .unwrap();
        let mut n2 = base.to_vec();
        n2.push(node(3, &["P", "Q"], Interval::exact(2)));
        let g2 = AbstractGraph::new(NodeId(0), NodeId(1), n2, [edge(0, "x", 2, true), edge(2, "f", 3, true)], []).unwrap();
        let m = merge(&g1, &g2, MergeMode::Join, None);
        let a = m.eta1[&NodeId(2)];
        let pq = m.eta1[&NodeId(3)];
        assert_eq!(m.eta1[&NodeId(4)], pq);
        // distinct targets in g1 stay injective after the collapse
        assert_eq!(m.graph.edge(&EdgeKey { src: a, label: AbstractLabel::named("f"), tgt: pq }), Some(true));

        // now two sources in g1 share a target, both injective
        let mut n3 = base.to_vec();
        n3.extend([node(3, &["B"], Interval::ONE), node(4, &["P"], Interval::ONE)]);
        let g3 = AbstractGraph::new(
            NodeId(0),
            NodeId(1),
            n3,
            [edge(0, "x", 2, true), edge(0, "y", 3, true), edge(2, "f", 4, true), edge(3, "f", 4, true)],
            [],
        )
        .unwrap();
        let mut n4 = base.to_vec();
        n4[2].types.insert("B".into());
        n4.push(node(3, &["P"], Interval::ONE));
        let g4 = AbstractGraph::new(
            NodeId(0),
            NodeId(1),
            n4,
            [edge(0, "x", 2, true), edge(0, "y", 2, true), edge(2, "f", 3, true)],
            [],
        )
        .unwrap();
        let m = merge(&g3, &g4, MergeMode::Join, None);
        let ab = m.eta1[&NodeId(2)];
        assert_eq!(m.eta1[&NodeId(3)], ab);
        let p = m.eta1[&NodeId(4)];
        assert_eq!(m.graph.edge(&EdgeKey { src: ab, label: AbstractLabel::named("f"), tgt: p }), Some(false));
        assert!(compare(&g3, &m.graph).unwrap().is_leq());
        assert!(compare(&g4, &m.graph).unwrap().is_leq());
    }

    #[test]
    fn merge_is_an_upper_bound_on_fixtures() {
        let gs = [abs(Fixture::ExprTree), abs(Fixture::List(3)), abs(Fixture::BTree(6)), abs(Fixture::DList(2))];
        for a in &gs {
            for b in &gs {
                for mode in [MergeMode::Join, MergeMode::Widen] {
                    let m = merge(a, b, mode, None);
                    assert!(compare(a, &m.graph).unwrap().is_leq(), "{:?}", compare(a, &m.graph));
                    assert!(compare(b, &m.graph).unwrap().is_leq(), "{:?}", compare(b, &m.graph));
                }
            }
        }
    }
}
