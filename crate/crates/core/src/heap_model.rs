//! Concrete heap snapshots.
//!
//! A [`ConcreteHeap`] is a labeled directed graph of objects with an implicit
//! root (whose fields are the program variables) and a null object with id 0.
//! Heaps are loaded from `heapsnap-1` JSON documents or assembled with a
//! [`HeapBuilder`], and are immutable afterwards.
//!
//! This module also hosts the brute-force oracles for the concrete
//! properties (injectivity, tree shape) that the abstraction is tested
//! against. They are written for clarity, not speed.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstract_graph::AbstractLabel;

pub const FORMAT_HEAPSNAP: &str = "heapsnap-1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeId(pub u64);

/// Object identifier. Id 0 is null.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjId(pub u64);

impl ObjId {
    pub const NULL: ObjId = ObjId(0);

    pub fn is_null(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for ObjId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_null() {
            f.write_str("null")
        } else {
            write!(f, "o{}", self.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeKind {
    Object,
    Array,
    Container,
    Opaque,
}

impl TypeKind {
    pub fn has_elements(self) -> bool {
        matches!(self, TypeKind::Array | TypeKind::Container)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: Arc<str>,
    pub declared: TypeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDecl {
    pub id: TypeId,
    pub name: String,
    pub kind: TypeKind,
    pub supertype: Option<TypeId>,
    pub fields: Vec<FieldDecl>,
    pub element: Option<TypeId>,
}

/// Validated set of type declarations, closed under reference.
#[derive(Clone, Debug, Default)]
pub struct TypeTable {
    decls: BTreeMap<TypeId, TypeDecl>,
}

impl TypeTable {
    pub fn get(&self, id: TypeId) -> Option<&TypeDecl> {
        self.decls.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TypeDecl> {
        self.decls.values()
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    pub fn name(&self, id: TypeId) -> &str {
        self.decls.get(&id).map(|d| d.name.as_str()).unwrap_or("?")
    }

    /// Declared fields of `id` including inherited ones, supertypes first.
    pub fn all_fields(&self, id: TypeId) -> Vec<&FieldDecl> {
        let mut chain = Vec::new();
        let mut cur = Some(id);
        while let Some(t) = cur {
            let Some(decl) = self.decls.get(&t) else { break };
            chain.push(decl);
            cur = decl.supertype;
        }
        chain.iter().rev().flat_map(|d| d.fields.iter()).collect()
    }

    pub fn is_subtype(&self, sub: TypeId, sup: TypeId) -> bool {
        let mut cur = Some(sub);
        while let Some(t) = cur {
            if t == sup {
                return true;
            }
            cur = self.decls.get(&t).and_then(|d| d.supertype);
        }
        false
    }

    fn validate(&self) -> Result<(), SnapshotError> {
        for (i, decl) in self.decls.values().enumerate() {
            let at = |what: &str| format!("types[{i}]{what}");
            let check = |t: TypeId, what: &str| {
                if self.decls.contains_key(&t) {
                    Ok(())
                } else {
                    Err(SnapshotError::DanglingType { at: at(what), id: t.0 })
                }
            };
            if let Some(s) = decl.supertype {
                check(s, ".supertype")?;
            }
            for (j, f) in decl.fields.iter().enumerate() {
                check(f.declared, &format!(".fields[{j}].type"))?;
            }
            if let Some(e) = decl.element {
                check(e, ".elementType")?;
            }
            match decl.kind {
                TypeKind::Object | TypeKind::Opaque if decl.element.is_some() => {
                    return Err(SnapshotError::Invalid {
                        at: at(".elementType"),
                        msg: format!("type '{}' of kind {:?} cannot have an element type", decl.name, decl.kind),
                    });
                }
                TypeKind::Array | TypeKind::Container => {
                    if decl.element.is_none() {
                        return Err(SnapshotError::Invalid {
                            at: at(""),
                            msg: format!("type '{}' needs an elementType", decl.name),
                        });
                    }
                    if !decl.fields.is_empty() {
                        return Err(SnapshotError::Invalid {
                            at: at(".fields"),
                            msg: format!("type '{}' holds elements and cannot declare named fields", decl.name),
                        });
                    }
                }
                _ => {}
            }
            let mut seen = HashSet::new();
            for f in &decl.fields {
                if &*f.name == AbstractLabel::ELEMENTS_TEXT {
                    return Err(SnapshotError::Invalid { at: at(".fields"), msg: "field name '[]' is reserved".into() });
                }
                if !seen.insert(f.name.clone()) {
                    return Err(SnapshotError::Invalid {
                        at: at(".fields"),
                        msg: format!("field '{}' declared twice", f.name),
                    });
                }
            }
        }
        // supertype chains must be acyclic
        for decl in self.decls.values() {
            let mut steps = 0;
            let mut cur = decl.supertype;
            while let Some(t) = cur {
                steps += 1;
                if t == decl.id || steps > self.decls.len() {
                    return Err(SnapshotError::Invalid {
                        at: format!("types[id={}]", decl.id.0),
                        msg: format!("supertype chain of '{}' is cyclic", decl.name),
                    });
                }
                cur = self.decls[&t].supertype;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteObject {
    pub id: ObjId,
    pub ty: TypeId,
    pub bytes: Option<u64>,
    pub fields: Vec<(Arc<str>, ObjId)>,
    pub elements: Vec<ObjId>,
}

/// Label of a concrete pointer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Var(Arc<str>),
    Field(Arc<str>),
    Index(u32),
}

impl Label {
    /// The abstract label this concrete label is summarized by.
    pub fn abstracted(&self) -> AbstractLabel {
        match self {
            Label::Var(n) | Label::Field(n) => AbstractLabel::Named(n.to_string()),
            Label::Index(_) => AbstractLabel::Elements,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Var(n) | Label::Field(n) => f.write_str(n),
            Label::Index(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Root,
    Object(ObjId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pointer {
    pub src: Source,
    pub label: Label,
    pub tgt: ObjId,
}

impl fmt::Display for Pointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.src {
            Source::Root => write!(f, "root-{}->{}", self.label, self.tgt),
            Source::Object(o) => write!(f, "{}-{}->{}", o, self.label, self.tgt),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SnapshotError {
    #[error("malformed snapshot at {at}: {msg}")]
    Malformed { at: String, msg: String },
    #[error("unknown snapshot format '{0}' (expected {FORMAT_HEAPSNAP})")]
    UnknownFormat(String),
    #[error("{at}: reference to unknown object {id}")]
    DanglingObject { at: String, id: u64 },
    #[error("{at}: reference to unknown type {id}")]
    DanglingType { at: String, id: u64 },
    #[error("{at}: duplicate id {id}")]
    DuplicateId { at: String, id: u64 },
    #[error("{at}: field '{field}' is not declared on type '{ty}'")]
    UndeclaredField { at: String, field: String, ty: String },
    #[error("{at}: {msg}")]
    Invalid { at: String, msg: String },
}

/// Immutable, validated concrete heap.
#[derive(Clone, Debug)]
pub struct ConcreteHeap {
    types: TypeTable,
    /// Sorted by id.
    objects: Vec<ConcreteObject>,
    index: HashMap<ObjId, usize>,
    roots: BTreeMap<String, ObjId>,
    pointers: Vec<Pointer>,
}

impl ConcreteHeap {
    pub fn types(&self) -> &TypeTable {
        &self.types
    }

    pub fn objects(&self) -> &[ConcreteObject] {
        &self.objects
    }

    pub fn object(&self, id: ObjId) -> Option<&ConcreteObject> {
        self.index.get(&id).map(|&i| &self.objects[i])
    }

    /// Position of `id` in [`ConcreteHeap::objects`].
    pub fn position(&self, id: ObjId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn contains(&self, id: ObjId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn roots(&self) -> &BTreeMap<String, ObjId> {
        &self.roots
    }

    /// The derived pointer set: one pointer per root entry, named field and
    /// element slot.
    pub fn pointers(&self) -> &[Pointer] {
        &self.pointers
    }

    pub fn type_of(&self, id: ObjId) -> Option<&TypeDecl> {
        self.object(id).and_then(|o| self.types.get(o.ty))
    }

    pub fn type_name(&self, id: ObjId) -> Option<&str> {
        self.type_of(id).map(|d| d.name.as_str())
    }

    pub fn max_object_id(&self) -> u64 {
        self.objects.last().map(|o| o.id.0).unwrap_or(0)
    }

    /// Same types and roots over rewritten objects (ids unchanged). Used for
    /// preprocessed views of the heap; kind rules are not rechecked.
    pub(crate) fn with_objects(&self, objects: Vec<ConcreteObject>) -> ConcreteHeap {
        debug_assert!(objects.iter().zip(&self.objects).all(|(a, b)| a.id == b.id));
        let mut heap = ConcreteHeap {
            types: self.types.clone(),
            objects,
            index: self.index.clone(),
            roots: self.roots.clone(),
            pointers: Vec::new(),
        };
        heap.derive_pointers();
        heap
    }

    fn derive_pointers(&mut self) {
        let mut pts = Vec::with_capacity(
            self.roots.len() + self.objects.iter().map(|o| o.fields.len() + o.elements.len()).sum::<usize>(),
        );
        for (name, &tgt) in &self.roots {
            pts.push(Pointer { src: Source::Root, label: Label::Var(Arc::from(name.as_str())), tgt });
        }
        for o in &self.objects {
            for (label, tgt) in &o.fields {
                pts.push(Pointer { src: Source::Object(o.id), label: Label::Field(label.clone()), tgt: *tgt });
            }
            for (i, tgt) in o.elements.iter().enumerate() {
                pts.push(Pointer { src: Source::Object(o.id), label: Label::Index(i as u32), tgt: *tgt });
            }
        }
        self.pointers = pts;
    }

    /// Serializes into a `heapsnap-1` document.
    pub fn to_snapshot_json(&self) -> String {
        let doc = SnapshotDoc {
            format: FORMAT_HEAPSNAP.to_string(),
            types: self
                .types
                .iter()
                .map(|d| TypeDoc {
                    id: d.id.0,
                    name: d.name.clone(),
                    kind: d.kind,
                    supertype: d.supertype.map(|t| t.0),
                    fields: d.fields.iter().map(|f| FieldDoc { name: f.name.to_string(), ty: f.declared.0 }).collect(),
                    element_type: d.element.map(|t| t.0),
                })
                .collect(),
            objects: self
                .objects
                .iter()
                .map(|o| ObjectDoc {
                    id: o.id.0,
                    ty: o.ty.0,
                    bytes: o.bytes,
                    fields: if o.fields.is_empty() {
                        None
                    } else {
                        Some(o.fields.iter().map(|(l, t)| (l.to_string(), t.0)).collect())
                    },
                    elements: if self.types.get(o.ty).is_some_and(|d| d.kind.has_elements()) {
                        Some(o.elements.iter().map(|t| t.0).collect())
                    } else {
                        None
                    },
                })
                .collect(),
            roots: self.roots.iter().map(|(k, v)| (k.clone(), v.0)).collect(),
        };
        serde_json::to_string(&doc).expect("snapshot serialization cannot fail")
    }
}

// ---------------------------------------------------------------------------
// heapsnap-1 document

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotDoc {
    format: String,
    #[serde(default)]
    types: Vec<TypeDoc>,
    #[serde(default)]
    objects: Vec<ObjectDoc>,
    #[serde(default)]
    roots: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
struct TypeDoc {
    id: u64,
    name: String,
    kind: TypeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    supertype: Option<u64>,
    #[serde(default)]
    fields: Vec<FieldDoc>,
    #[serde(rename = "elementType", default, skip_serializing_if = "Option::is_none")]
    element_type: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct FieldDoc {
    name: String,
    #[serde(rename = "type")]
    ty: u64,
}

#[derive(Serialize, Deserialize)]
struct ObjectDoc {
    id: u64,
    #[serde(rename = "type")]
    ty: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fields: Option<BTreeMap<String, u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    elements: Option<Vec<u64>>,
}

/// Parses and validates a `heapsnap-1` document.
pub fn parse_snapshot(bytes: &[u8]) -> Result<ConcreteHeap, SnapshotError> {
    // check the format tag first so version mismatches are not reported as
    // schema errors
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| SnapshotError::Malformed {
        at: format!("line {} column {}", e.line(), e.column()),
        msg: e.to_string(),
    })?;
    match value.get("format") {
        Some(serde_json::Value::String(f)) if f == FORMAT_HEAPSNAP => {}
        Some(serde_json::Value::String(f)) => return Err(SnapshotError::UnknownFormat(f.clone())),
        _ => {
            return Err(SnapshotError::Malformed { at: "format".into(), msg: "missing or non-string format tag".into() })
        }
    }
    let doc: SnapshotDoc = serde_path_to_error::deserialize(value).map_err(|e| SnapshotError::Malformed {
        at: e.path().to_string(),
        msg: e.inner().to_string(),
    })?;

    let mut b = HeapBuilder::new();
    for (i, t) in doc.types.iter().enumerate() {
        if t.id == 0 {
            return Err(SnapshotError::Invalid { at: format!("types[{i}].id"), msg: "type ids must be positive".into() });
        }
        if b.types.decls.contains_key(&TypeId(t.id)) {
            return Err(SnapshotError::DuplicateId { at: format!("types[{i}].id"), id: t.id });
        }
        b.types.decls.insert(
            TypeId(t.id),
            TypeDecl {
                id: TypeId(t.id),
                name: t.name.clone(),
                kind: t.kind,
                supertype: t.supertype.map(TypeId),
                fields: t.fields.iter().map(|f| FieldDecl { name: Arc::from(f.name.as_str()), declared: TypeId(f.ty) }).collect(),
                element: t.element_type.map(TypeId),
            },
        );
    }
    for (i, o) in doc.objects.iter().enumerate() {
        let at = format!("objects[{i}]");
        if o.id == 0 {
            return Err(SnapshotError::Invalid { at: format!("{at}.id"), msg: "object id 0 is reserved for null".into() });
        }
        let fields = o.fields.clone().unwrap_or_default();
        let elements = o.elements.clone().unwrap_or_default();
        b.pending.push(PendingObject {
            at,
            id: ObjId(o.id),
            ty: TypeId(o.ty),
            bytes: o.bytes,
            fields: fields.into_iter().map(|(k, v)| (k, ObjId(v))).collect(),
            elements: elements.into_iter().map(ObjId).collect(),
            has_fields: o.fields.is_some(),
            has_elements: o.elements.is_some(),
        });
    }
    for (name, tgt) in doc.roots {
        b.roots.insert(name, ObjId(tgt));
    }
    b.build()
}

struct PendingObject {
    at: String,
    id: ObjId,
    ty: TypeId,
    bytes: Option<u64>,
    fields: Vec<(String, ObjId)>,
    elements: Vec<ObjId>,
    has_fields: bool,
    has_elements: bool,
}

/// Incremental construction of a [`ConcreteHeap`]; [`HeapBuilder::build`]
/// runs the same validation as [`parse_snapshot`].
#[derive(Default)]
pub struct HeapBuilder {
    types: TypeTable,
    pending: Vec<PendingObject>,
    roots: BTreeMap<String, ObjId>,
}

impl HeapBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn object_type(&mut self, id: u64, name: &str, supertype: Option<u64>, fields: &[(&str, u64)]) -> TypeId {
        self.add_type(id, name, TypeKind::Object, supertype, fields, None)
    }

    pub fn array_type(&mut self, id: u64, name: &str, element: u64) -> TypeId {
        self.add_type(id, name, TypeKind::Array, None, &[], Some(element))
    }

    pub fn add_type(
        &mut self,
        id: u64,
        name: &str,
        kind: TypeKind,
        supertype: Option<u64>,
        fields: &[(&str, u64)],
        element: Option<u64>,
    ) -> TypeId {
        let id = TypeId(id);
        self.types.decls.insert(
            id,
            TypeDecl {
                id,
                name: name.to_string(),
                kind,
                supertype: supertype.map(TypeId),
                fields: fields.iter().map(|(n, t)| FieldDecl { name: Arc::from(*n), declared: TypeId(*t) }).collect(),
                element: element.map(TypeId),
            },
        );
        id
    }

    pub fn object(&mut self, id: u64, ty: TypeId, fields: &[(&str, u64)]) -> &mut Self {
        self.object_with_bytes(id, ty, None, fields)
    }

    pub fn object_with_bytes(&mut self, id: u64, ty: TypeId, bytes: Option<u64>, fields: &[(&str, u64)]) -> &mut Self {
        let at = format!("objects[{}]", self.pending.len());
        self.pending.push(PendingObject {
            at,
            id: ObjId(id),
            ty,
            bytes,
            fields: fields.iter().map(|(n, t)| (n.to_string(), ObjId(*t))).collect(),
            elements: Vec::new(),
            has_fields: true,
            has_elements: false,
        });
        self
    }

    pub fn array(&mut self, id: u64, ty: TypeId, bytes: Option<u64>, elements: &[u64]) -> &mut Self {
        let at = format!("objects[{}]", self.pending.len());
        self.pending.push(PendingObject {
            at,
            id: ObjId(id),
            ty,
            bytes,
            fields: Vec::new(),
            elements: elements.iter().map(|&t| ObjId(t)).collect(),
            has_fields: false,
            has_elements: true,
        });
        self
    }

    pub fn root(&mut self, name: &str, target: u64) -> &mut Self {
        self.roots.insert(name.to_string(), ObjId(target));
        self
    }

    pub fn build(self) -> Result<ConcreteHeap, SnapshotError> {
        let HeapBuilder { types, pending, roots } = self;
        types.validate()?;

        let mut ids = HashSet::with_capacity(pending.len());
        for p in &pending {
            if p.id.is_null() {
                return Err(SnapshotError::Invalid { at: format!("{}.id", p.at), msg: "object id 0 is reserved for null".into() });
            }
            if !ids.insert(p.id) {
                return Err(SnapshotError::DuplicateId { at: format!("{}.id", p.at), id: p.id.0 });
            }
        }
        let target_ok = |t: ObjId| t.is_null() || ids.contains(&t);

        let mut objects = Vec::with_capacity(pending.len());
        for p in pending {
            let decl = types.get(p.ty).ok_or(SnapshotError::DanglingType { at: format!("{}.type", p.at), id: p.ty.0 })?;
            if decl.kind.has_elements() && p.has_fields && !p.fields.is_empty() {
                return Err(SnapshotError::Invalid {
                    at: format!("{}.fields", p.at),
                    msg: format!("objects of '{}' hold elements, not named fields", decl.name),
                });
            }
            if !decl.kind.has_elements() && p.has_elements {
                return Err(SnapshotError::Invalid {
                    at: format!("{}.elements", p.at),
                    msg: format!("objects of '{}' cannot hold elements", decl.name),
                });
            }
            let declared = types.all_fields(p.ty);
            let mut fields = Vec::with_capacity(p.fields.len());
            for (label, tgt) in p.fields {
                let Some(fd) = declared.iter().find(|f| *f.name == *label) else {
                    return Err(SnapshotError::UndeclaredField {
                        at: format!("{}.fields.{label}", p.at),
                        field: label,
                        ty: decl.name.clone(),
                    });
                };
                if !target_ok(tgt) {
                    return Err(SnapshotError::DanglingObject { at: format!("{}.fields.{label}", p.at), id: tgt.0 });
                }
                fields.push((fd.name.clone(), tgt));
            }
            // keep declaration order for determinism
            fields.sort_by_key(|(l, _)| declared.iter().position(|f| f.name == *l));
            for (i, &tgt) in p.elements.iter().enumerate() {
                if !target_ok(tgt) {
                    return Err(SnapshotError::DanglingObject { at: format!("{}.elements[{i}]", p.at), id: tgt.0 });
                }
            }
            objects.push(ConcreteObject { id: p.id, ty: p.ty, bytes: p.bytes, fields, elements: p.elements });
        }
        for (name, &tgt) in &roots {
            if !target_ok(tgt) {
                return Err(SnapshotError::DanglingObject { at: format!("roots.{name}"), id: tgt.0 });
            }
        }
        objects.sort_by_key(|o| o.id);
        let index = objects.iter().enumerate().map(|(i, o)| (o.id, i)).collect();
        let mut heap = ConcreteHeap { types, objects, index, roots, pointers: Vec::new() };
        heap.derive_pointers();
        Ok(heap)
    }
}

// ---------------------------------------------------------------------------
// Regions and the recursive-type relation

/// A set of heap objects, never containing null or root.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Region(BTreeSet<ObjId>);

impl Region {
    pub fn new(h: &ConcreteHeap, ids: impl IntoIterator<Item = ObjId>) -> Result<Self, SnapshotError> {
        let mut set = BTreeSet::new();
        for id in ids {
            if !h.contains(id) {
                return Err(SnapshotError::DanglingObject { at: "region".into(), id: id.0 });
            }
            set.insert(id);
        }
        Ok(Region(set))
    }

    pub fn contains(&self, id: ObjId) -> bool {
        self.0.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ObjId> + '_ {
        self.0.iter().copied()
    }
}

/// Groups of types that are part of one recursive type definition.
#[derive(Clone, Debug, Default)]
pub struct RecursiveRelation {
    group_of: HashMap<TypeId, usize>,
    groups: Vec<BTreeSet<TypeId>>,
}

impl RecursiveRelation {
    pub fn related(&self, a: TypeId, b: TypeId) -> bool {
        match (self.group_of.get(&a), self.group_of.get(&b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    /// The recursive groups (SCCs containing at least one edge).
    pub fn groups(&self) -> &[BTreeSet<TypeId>] {
        &self.groups
    }

    pub fn group_of(&self, t: TypeId) -> Option<usize> {
        self.group_of.get(&t).copied()
    }
}

/// Computes the `~` relation: types are related when they share a strongly
/// connected component of the type-reference graph (field/element edges plus
/// supertype-to-subtype edges) that contains at least one edge.
pub fn recursive_relation(tt: &TypeTable) -> RecursiveRelation {
    let mut g: DiGraph<TypeId, ()> = DiGraph::new();
    let mut idx: HashMap<TypeId, NodeIndex> = HashMap::new();
    for d in tt.iter() {
        idx.insert(d.id, g.add_node(d.id));
    }
    let mut self_loop = HashSet::new();
    let mut add = |g: &mut DiGraph<TypeId, ()>, a: TypeId, b: TypeId| {
        if let (Some(&x), Some(&y)) = (idx.get(&a), idx.get(&b)) {
            if x == y {
                self_loop.insert(a);
            }
            g.update_edge(x, y, ());
        }
    };
    for d in tt.iter() {
        for f in &d.fields {
            add(&mut g, d.id, f.declared);
        }
        if let Some(e) = d.element {
            add(&mut g, d.id, e);
        }
        if let Some(s) = d.supertype {
            add(&mut g, s, d.id);
        }
    }
    let mut rel = RecursiveRelation::default();
    for scc in tarjan_scc(&g) {
        let recursive = scc.len() > 1 || self_loop.contains(&g[scc[0]]);
        if recursive {
            let gi = rel.groups.len();
            let members: BTreeSet<TypeId> = scc.iter().map(|&n| g[n]).collect();
            for &t in &members {
                rel.group_of.insert(t, gi);
            }
            rel.groups.push(members);
        }
    }
    rel.groups.sort();
    rel.group_of.clear();
    for (gi, grp) in rel.groups.iter().enumerate() {
        for &t in grp {
            rel.group_of.insert(t, gi);
        }
    }
    rel
}

// ---------------------------------------------------------------------------
// Concrete property oracles

/// `P(C1, C2)`: all pointers from an object in `c1` to an object in `c2`.
pub fn pointers_between(h: &ConcreteHeap, c1: &Region, c2: &Region) -> BTreeSet<Pointer> {
    h.pointers()
        .iter()
        .filter(|p| matches!(p.src, Source::Object(s) if c1.contains(s)) && c2.contains(p.tgt))
        .cloned()
        .collect()
}

fn labelled(h: &ConcreteHeap, c1: &Region, c2: &Region, p: &Label) -> Vec<(ObjId, ObjId)> {
    pointers_between(h, c1, c2)
        .into_iter()
        .filter(|ptr| &ptr.label == p)
        .map(|ptr| match ptr.src {
            Source::Object(s) => (s, ptr.tgt),
            Source::Root => unreachable!("regions never contain root"),
        })
        .collect()
}

/// `inj(C1, C2, p)` by scanning every pair of `p`-labeled pointers.
pub fn oracle_injective(h: &ConcreteHeap, c1: &Region, c2: &Region, p: &Label) -> bool {
    let pts = labelled(h, c1, c2, p);
    for (i, &(s1, t1)) in pts.iter().enumerate() {
        for &(s2, t2) in &pts[i + 1..] {
            if s1 != s2 && t1 == t2 {
                return false;
            }
        }
    }
    true
}

/// No two distinct sources share a target.
pub(crate) fn injective_pairs(pairs: impl Iterator<Item = (ObjId, ObjId)>) -> bool {
    let mut first_source: HashMap<ObjId, ObjId> = HashMap::new();
    for (s, t) in pairs {
        match first_source.get(&t) {
            Some(&prev) if prev != s => return false,
            Some(_) => {}
            None => {
                first_source.insert(t, s);
            }
        }
    }
    true
}

/// `inj(C1, C2, p)` decided by hashing targets; must agree with
/// [`oracle_injective`].
pub fn injective_by_hash(h: &ConcreteHeap, c1: &Region, c2: &Region, p: &Label) -> bool {
    injective_pairs(labelled(h, c1, c2, p).into_iter())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Tree,
    Any,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Tree => "tree",
            Shape::Any => "any",
        })
    }
}

/// Shape of `P(C, C)` restricted to the concrete labels abstracted by
/// `labels`: `Tree` when the subgraph is a forest (acyclic, no object with two
/// incoming pointers), else `Any`.
pub fn oracle_shape(h: &ConcreteHeap, c: &Region, labels: &BTreeSet<AbstractLabel>) -> Shape {
    let edges: Vec<(ObjId, ObjId)> = pointers_between(h, c, c)
        .into_iter()
        .filter(|p| labels.iter().any(|l| l.covers(&p.label)))
        .map(|p| match p.src {
            Source::Object(s) => (s, p.tgt),
            Source::Root => unreachable!(),
        })
        .collect();

    forest_shape(c.iter(), &edges)
}

/// `Tree` when `edges` over `nodes` form a forest.
pub(crate) fn forest_shape(nodes: impl Iterator<Item = ObjId>, edges: &[(ObjId, ObjId)]) -> Shape {
    let mut indegree: BTreeMap<ObjId, usize> = BTreeMap::new();
    for &(_, t) in edges {
        *indegree.entry(t).or_default() += 1;
    }
    if indegree.values().any(|&d| d > 1) {
        return Shape::Any;
    }

    let mut succ: BTreeMap<ObjId, Vec<ObjId>> = BTreeMap::new();
    for &(s, t) in edges {
        succ.entry(s).or_default().push(t);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color: BTreeMap<ObjId, u8> = BTreeMap::new();
    let none: Vec<ObjId> = Vec::new();
    for start in nodes {
        if color.get(&start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        color.insert(start, 1);
        while let Some(&mut (n, ref mut next)) = stack.last_mut() {
            let out = succ.get(&n).unwrap_or(&none);
            if *next < out.len() {
                let m = out[*next];
                *next += 1;
                match color.get(&m).copied().unwrap_or(0) {
                    1 => return Shape::Any,
                    0 => {
                        color.insert(m, 1);
                        stack.push((m, 0));
                    }
                    _ => {}
                }
            } else {
                color.insert(n, 2);
                stack.pop();
            }
        }
    }
    Shape::Tree
}
