//! Deterministic heaps used by the tests, the acceptance suite and the
//! `fixture` CLI command.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::heap_model::{ConcreteHeap, HeapBuilder, SnapshotError, TypeId, TypeKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Fixture {
    /// The eight-node expression tree with its environment array.
    ExprTree,
    List(usize),
    DList(usize),
    /// Binary tree of N nodes in heap order.
    BTree(usize),
    /// F faces, each owning a `Point[4]` of unique points.
    FaceGrid { faces: usize, point_data_bytes: u64 },
    /// A ray-tracer scene: quad tree of the given depth with primitive lists
    /// at the leaves, triangles referring to faces.
    OctreeScene { depth: u32 },
    /// Random typed heap with arrays, containers, subtyping and cycles.
    Random { seed: u64, max_objects: usize, max_types: usize },
    /// Large heap for timing: a list of records whose fields point at a
    /// shared pool of leaves.
    Synthetic { records: usize, leaves: usize, fanout: usize },
}

pub const DEFAULT_POINT_DATA_BYTES: u64 = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FixtureError {
    #[error("unknown fixture '{0}'")]
    Unknown(String),
    #[error("invalid parameters for {fixture}: {msg}")]
    InvalidParams { fixture: String, msg: String },
    #[error(transparent)]
    Build(#[from] SnapshotError),
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fixture::ExprTree => f.write_str("exprtree"),
            Fixture::List(n) => write!(f, "list:{n}"),
            Fixture::DList(n) => write!(f, "dlist:{n}"),
            Fixture::BTree(n) => write!(f, "btree:{n}"),
            Fixture::FaceGrid { faces, point_data_bytes } => write!(f, "facegrid:{faces},{point_data_bytes}"),
            Fixture::OctreeScene { depth } => write!(f, "octree-scene:{depth}"),
            Fixture::Random { seed, max_objects, max_types } => write!(f, "random:{seed},{max_objects},{max_types}"),
            Fixture::Synthetic { records, leaves, fanout } => write!(f, "synthetic:{records},{leaves},{fanout}"),
        }
    }
}

/// Parses `name[:p1,p2,...]`, e.g. `list:100` or `facegrid:180,4`.
impl FromStr for Fixture {
    type Err = FixtureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let bad = |msg: &str| FixtureError::InvalidParams { fixture: name.to_string(), msg: msg.to_string() };
        let params: Vec<u64> = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',').map(|p| p.trim().parse::<u64>()).collect::<Result<_, _>>().map_err(|e| bad(&e.to_string()))?
        };
        let get = |i: usize, default: u64| params.get(i).copied().unwrap_or(default);
        let max_params = |n: usize| if params.len() > n { Err(bad(&format!("takes at most {n} parameters"))) } else { Ok(()) };
        let fx = match name {
            "exprtree" => {
                max_params(0)?;
                Fixture::ExprTree
            }
            "list" => {
                max_params(1)?;
                Fixture::List(get(0, 10) as usize)
            }
            "dlist" => {
                max_params(1)?;
                Fixture::DList(get(0, 10) as usize)
            }
            "btree" => {
                max_params(1)?;
                Fixture::BTree(get(0, 15) as usize)
            }
            "facegrid" => {
                max_params(2)?;
                Fixture::FaceGrid { faces: get(0, 180) as usize, point_data_bytes: get(1, DEFAULT_POINT_DATA_BYTES) }
            }
            "octree-scene" => {
                max_params(1)?;
                Fixture::OctreeScene { depth: get(0, 3) as u32 }
            }
            "random" => {
                max_params(3)?;
                Fixture::Random { seed: get(0, 0), max_objects: get(1, 50) as usize, max_types: get(2, 8) as usize }
            }
            "synthetic" => {
                max_params(3)?;
                Fixture::Synthetic { records: get(0, 150_000) as usize, leaves: get(1, 50_000) as usize, fanout: get(2, 2) as usize }
            }
            _ => return Err(FixtureError::Unknown(name.to_string())),
        };
        Ok(fx)
    }
}

pub fn build_fixture(fx: &Fixture) -> Result<ConcreteHeap, FixtureError> {
    let bad = |msg: &str| FixtureError::InvalidParams { fixture: fx.to_string(), msg: msg.to_string() };
    match *fx {
        Fixture::ExprTree => Ok(exprtree()?),
        Fixture::List(n) | Fixture::DList(n) | Fixture::BTree(n) if n == 0 => Err(bad("size must be at least 1")),
        Fixture::List(n) => Ok(list(n, false)?),
        Fixture::DList(n) => Ok(list(n, true)?),
        Fixture::BTree(n) => Ok(btree(n)?),
        Fixture::FaceGrid { faces: 0, .. } => Err(bad("need at least one face")),
        Fixture::FaceGrid { faces, point_data_bytes } => Ok(facegrid(faces, point_data_bytes)?),
        Fixture::OctreeScene { depth } if depth == 0 || depth > 8 => Err(bad("depth must be in 1..=8")),
        Fixture::OctreeScene { depth } => Ok(octree_scene(depth)?),
        Fixture::Random { max_types: 0, .. } => Err(bad("need at least one type")),
        Fixture::Random { seed, max_objects, max_types } => Ok(random_heap(seed, max_objects, max_types)?),
        Fixture::Synthetic { records, leaves, fanout } => {
            if records == 0 || leaves == 0 || fanout == 0 {
                return Err(bad("records, leaves and fanout must be positive"));
            }
            Ok(synthetic(records, leaves, fanout)?)
        }
    }
}

fn exprtree() -> Result<ConcreteHeap, SnapshotError> {
    let mut b = HeapBuilder::new();
    b.object_type(1, "Expr", None, &[]);
    let add = b.object_type(2, "Add", Some(1), &[("l", 1), ("r", 1)]);
    let sub = b.object_type(3, "Sub", Some(1), &[("l", 1), ("r", 1)]);
    let mult = b.object_type(4, "Mult", Some(1), &[("l", 1), ("r", 1)]);
    let cnst = b.object_type(5, "Const", Some(1), &[]);
    let var = b.object_type(6, "Var", Some(1), &[]);
    let env = b.array_type(7, "Var[]", 6);
    b.object(1, add, &[("l", 2), ("r", 5)]);
    b.object(2, sub, &[("l", 4), ("r", 3)]);
    b.object(3, cnst, &[]);
    b.object(4, mult, &[("l", 7), ("r", 6)]);
    b.object(5, mult, &[("l", 7), ("r", 8)]);
    b.object(6, cnst, &[]);
    b.object(7, var, &[]);
    b.object(8, var, &[]);
    b.array(9, env, None, &[7, 8, 0]);
    b.root("exp", 1).root("env", 9);
    b.build()
}

fn list(n: usize, doubly: bool) -> Result<ConcreteHeap, SnapshotError> {
    let mut b = HeapBuilder::new();
    let node = if doubly {
        b.object_type(1, "Node", None, &[("next", 1), ("prev", 1)])
    } else {
        b.object_type(1, "Node", None, &[("next", 1)])
    };
    let n = n as u64;
    for i in 1..=n {
        let next = if i < n { i + 1 } else { 0 };
        if doubly {
            b.object(i, node, &[("next", next), ("prev", i - 1)]);
        } else {
            b.object(i, node, &[("next", next)]);
        }
    }
    b.root("head", 1);
    b.build()
}

fn btree(n: usize) -> Result<ConcreteHeap, SnapshotError> {
    let mut b = HeapBuilder::new();
    let node = b.object_type(1, "Node", None, &[("l", 1), ("r", 1)]);
    let n = n as u64;
    let child = |c: u64| if c <= n { c } else { 0 };
    for i in 1..=n {
        b.object(i, node, &[("l", child(2 * i)), ("r", child(2 * i + 1))]);
    }
    b.root("root", 1);
    b.build()
}

const FACE_BYTES: u64 = 12;
const POINT_ARRAY_BYTES: u64 = 20;

fn facegrid(faces: usize, point_data_bytes: u64) -> Result<ConcreteHeap, SnapshotError> {
    let mut b = HeapBuilder::new();
    let face = b.object_type(1, "Face", None, &[("next", 1), ("pts", 2)]);
    let arr = b.array_type(2, "Point[]", 3);
    let point = b.object_type(3, "Point", None, &[]);
    let faces = faces as u64;
    // face i: id 6i+1, array 6i+2, points 6i+3..6i+6
    for i in 0..faces {
        let base = 6 * i;
        let next = if i + 1 < faces { base + 7 } else { 0 };
        b.object_with_bytes(base + 1, face, Some(FACE_BYTES), &[("next", next), ("pts", base + 2)]);
        b.array(base + 2, arr, Some(POINT_ARRAY_BYTES), &[base + 3, base + 4, base + 5, base + 6]);
        for k in 3..=6 {
            b.object_with_bytes(base + k, point, Some(4 + point_data_bytes), &[]);
        }
    }
    b.root("faces", 1);
    b.build()
}

fn octree_scene(depth: u32) -> Result<ConcreteHeap, SnapshotError> {
    let mut b = HeapBuilder::new();
    let scene = b.object_type(1, "Scene", None, &[("octree", 2), ("lights", 10), ("camera", 13), ("faces", 9)]);
    let oct = b.object_type(2, "OctNode", None, &[("q0", 2), ("q1", 2), ("q2", 2), ("q3", 2), ("objs", 3)]);
    let objn = b.object_type(3, "ObjNode", None, &[("next", 3), ("obj", 4)]);
    b.object_type(4, "Prim", None, &[]);
    let sphere = b.object_type(5, "Sphere", Some(4), &[("center", 7), ("mat", 8)]);
    let tri = b.object_type(6, "Triangle", Some(4), &[("face", 11), ("mat", 8)]);
    let vec3 = b.object_type(7, "Vec3", None, &[]);
    let mat = b.object_type(8, "Material", None, &[("color", 12)]);
    let face_arr = b.array_type(9, "Face[]", 11);
    let light_arr = b.array_type(10, "Light[]", 14);
    let face = b.object_type(11, "Face", None, &[("pts", 15)]);
    let color = b.object_type(12, "Color", None, &[]);
    let camera = b.object_type(13, "Camera", None, &[("pos", 7), ("look", 7)]);
    let light = b.object_type(14, "Light", None, &[("pos", 7), ("color", 12)]);
    let pt_arr = b.array_type(15, "Point[]", 16);
    let point = b.object_type(16, "Point", None, &[]);
    let ray = b.object_type(17, "Ray", None, &[("origin", 7), ("dir", 7)]);

    let mut next_id = 1u64;
    let mut fresh = || {
        let id = next_id;
        next_id += 1;
        id
    };
    let scene_id = fresh();

    // shared materials: three for spheres, three for triangles
    let mut mats = Vec::new();
    for _ in 0..6 {
        let (m, c) = (fresh(), fresh());
        b.object(c, color, &[]);
        b.object(m, mat, &[("color", c)]);
        mats.push(m);
    }

    let mut face_ids = Vec::new();
    let mut prim_count = 0u64;
    // quad tree, built level by level
    let root_oct = fresh();
    let mut level = vec![root_oct];
    for d in 0..depth {
        let mut next_level = Vec::new();
        for &o in &level {
            if d + 1 == depth {
                // leaf: a two-element primitive list
                let (n1, n2) = (fresh(), fresh());
                let (s, c) = (fresh(), fresh());
                b.object(c, vec3, &[]);
                b.object(s, sphere, &[("center", c), ("mat", mats[(prim_count % 3) as usize])]);
                let (t, f, pa) = (fresh(), fresh(), fresh());
                let pts: Vec<u64> = (0..3).map(|_| fresh()).collect();
                for &p in &pts {
                    b.object(p, point, &[]);
                }
                b.array(pa, pt_arr, None, &pts);
                b.object(f, face, &[("pts", pa)]);
                b.object(t, tri, &[("face", f), ("mat", mats[3 + (prim_count % 3) as usize])]);
                face_ids.push(f);
                prim_count += 1;
                b.object(n1, objn, &[("next", n2), ("obj", s)]);
                b.object(n2, objn, &[("next", 0), ("obj", t)]);
                b.object(o, oct, &[("q0", 0), ("q1", 0), ("q2", 0), ("q3", 0), ("objs", n1)]);
            } else {
                let kids: Vec<u64> = (0..4).map(|_| fresh()).collect();
                b.object(o, oct, &[("q0", kids[0]), ("q1", kids[1]), ("q2", kids[2]), ("q3", kids[3]), ("objs", 0)]);
                next_level.extend(kids);
            }
        }
        level = next_level;
    }

    let fa = fresh();
    b.array(fa, face_arr, None, &face_ids);
    let mut lights = Vec::new();
    for _ in 0..2 {
        let (l, p, c) = (fresh(), fresh(), fresh());
        b.object(p, vec3, &[]);
        b.object(c, color, &[]);
        b.object(l, light, &[("pos", p), ("color", c)]);
        lights.push(l);
    }
    let la = fresh();
    b.array(la, light_arr, None, &lights);
    let (cam, cp, cl) = (fresh(), fresh(), fresh());
    b.object(cp, vec3, &[]);
    b.object(cl, vec3, &[]);
    b.object(cam, camera, &[("pos", cp), ("look", cl)]);
    b.object(scene_id, scene, &[("octree", root_oct), ("lights", la), ("camera", cam), ("faces", fa)]);
    let (r, ro, rd) = (fresh(), fresh(), fresh());
    b.object(ro, vec3, &[]);
    b.object(rd, vec3, &[]);
    b.object(r, ray, &[("origin", ro), ("dir", rd)]);
    b.root("this", scene_id).root("tree", root_oct).root("eyeRay", r);
    b.build()
}

fn random_heap(seed: u64, max_objects: usize, max_types: usize) -> Result<ConcreteHeap, SnapshotError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = HeapBuilder::new();
    let ntypes = rng.gen_range(1..=max_types);
    let field_names = ["a", "b", "c", "next"];

    // (id, kind, supertype, fields, element)
    let mut decls: Vec<(u64, TypeKind, Option<u64>, Vec<(&str, u64)>, Option<u64>)> = Vec::new();
    for i in 0..ntypes as u64 {
        let id = i + 1;
        let roll = rng.gen_range(0..10);
        let kind = match roll {
            0 | 1 => TypeKind::Array,
            2 => TypeKind::Container,
            _ => TypeKind::Object,
        };
        if kind.has_elements() {
            decls.push((id, kind, None, Vec::new(), Some(rng.gen_range(1..=ntypes as u64))));
            continue;
        }
        // supertype: an earlier object type, fields not redeclared
        let earlier: Vec<u64> = decls.iter().filter(|d| d.1 == TypeKind::Object).map(|d| d.0).collect();
        let supertype = if !earlier.is_empty() && rng.gen_bool(0.3) {
            Some(earlier[rng.gen_range(0..earlier.len())])
        } else {
            None
        };
        let inherited: Vec<&str> = supertype
            .map(|s| inherited_fields(&decls, s))
            .unwrap_or_default();
        let mut fields = Vec::new();
        for name in field_names {
            if !inherited.contains(&name) && rng.gen_bool(0.4) {
                fields.push((name, rng.gen_range(1..=ntypes as u64)));
            }
        }
        decls.push((id, kind, supertype, fields, None));
    }
    let mut ids: Vec<TypeId> = Vec::new();
    for (id, kind, supertype, fields, element) in &decls {
        ids.push(b.add_type(*id, &format!("T{id}"), *kind, *supertype, fields, *element));
    }

    let nobj = rng.gen_range(0..=max_objects) as u64;
    let obj_type: Vec<u64> = (0..nobj).map(|_| rng.gen_range(1..=ntypes as u64)).collect();
    let is_sub = |mut t: u64, sup: u64| loop {
        if t == sup {
            return true;
        }
        match decls[(t - 1) as usize].2 {
            Some(s) => t = s,
            None => return false,
        }
    };
    let pick = |rng: &mut ChaCha8Rng, declared: u64| -> u64 {
        if rng.gen_bool(0.2) {
            return 0;
        }
        let fits: Vec<u64> = (0..nobj).filter(|&o| is_sub(obj_type[o as usize], declared)).map(|o| o + 1).collect();
        if fits.is_empty() {
            0
        } else {
            fits[rng.gen_range(0..fits.len())]
        }
    };
    for o in 0..nobj {
        let t = obj_type[o as usize];
        let (_, kind, _, _, element) = &decls[(t - 1) as usize];
        if kind.has_elements() {
            let len = rng.gen_range(0..=4);
            let elems: Vec<u64> = (0..len).map(|_| pick(&mut rng, element.unwrap())).collect();
            b.array(o + 1, ids[(t - 1) as usize], None, &elems);
        } else {
            let mut all: Vec<(&str, u64)> = Vec::new();
            let mut cur = Some(t);
            while let Some(c) = cur {
                all.extend(decls[(c - 1) as usize].3.iter().copied());
                cur = decls[(c - 1) as usize].2;
            }
            let mut fields: Vec<(&str, u64)> = Vec::new();
            for (name, declared) in all {
                if rng.gen_bool(0.8) {
                    fields.push((name, pick(&mut rng, declared)));
                }
            }
            b.object(o + 1, ids[(t - 1) as usize], &fields);
        }
    }
    let nroots = rng.gen_range(1..=3);
    for r in 0..nroots {
        let tgt = if nobj == 0 || rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..=nobj) };
        b.root(&format!("v{r}"), tgt);
    }
    b.build()
}

fn inherited_fields<'a>(decls: &[(u64, TypeKind, Option<u64>, Vec<(&'a str, u64)>, Option<u64>)], t: u64) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut cur = Some(t);
    while let Some(c) = cur {
        let d = &decls[(c - 1) as usize];
        out.extend(d.3.iter().map(|f| f.0));
        cur = d.2;
    }
    out
}

fn synthetic(records: usize, leaves: usize, fanout: usize) -> Result<ConcreteHeap, SnapshotError> {
    let mut b = HeapBuilder::new();
    let names: Vec<String> = (0..fanout).map(|k| format!("f{k}")).collect();
    let mut decl: Vec<(&str, u64)> = vec![("next", 1)];
    decl.extend(names.iter().map(|n| (n.as_str(), 2)));
    let record = b.object_type(1, "Record", None, &decl);
    let leaf = b.object_type(2, "Leaf", None, &[]);
    let (records, leaves) = (records as u64, leaves as u64);
    let mut fields: Vec<(&str, u64)> = Vec::with_capacity(fanout + 1);
    for i in 0..records {
        fields.clear();
        fields.push(("next", if i + 1 < records { i + 2 } else { 0 }));
        for (k, n) in names.iter().enumerate() {
            let target = (i * fanout as u64 + k as u64 * 7919) % leaves;
            fields.push((n.as_str(), records + 1 + target));
        }
        b.object(i + 1, record, &fields);
    }
    for j in 0..leaves {
        b.object(records + 1 + j, leaf, &[]);
    }
    b.root("head", 1);
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heap_model::{oracle_injective, Label, ObjId, Region};

    #[test]
    fn unit_list() {
        let h = build_fixture(&Fixture::List(1)).unwrap();
        assert_eq!(h.objects().len(), 1);
        assert_eq!(h.roots()["head"], ObjId(1));
        assert_eq!(h.object(ObjId(1)).unwrap().fields[0].1, ObjId::NULL);
    }

    #[test]
    fn exprtree_wiring() {
        let h = build_fixture(&Fixture::ExprTree).unwrap();
        let ptrs: Vec<String> = h.pointers().iter().map(|p| p.to_string()).collect();
        assert!(ptrs.contains(&"o4-l->o7".to_string()));
        assert!(ptrs.contains(&"o5-l->o7".to_string()));
        assert_eq!(h.object(ObjId(9)).unwrap().elements.iter().filter(|e| e.is_null()).count(), 1);
    }

    #[test]
    fn facegrid_counts_and_unique_points() {
        let h = build_fixture(&Fixture::FaceGrid { faces: 180, point_data_bytes: 12 }).unwrap();
        let count = |name: &str| h.objects().iter().filter(|o| h.types().name(o.ty) == name).count();
        assert_eq!((count("Face"), count("Point[]"), count("Point")), (180, 180, 720));
        let arrays = Region::new(&h, h.objects().iter().filter(|o| h.types().name(o.ty) == "Point[]").map(|o| o.id)).unwrap();
        let points = Region::new(&h, h.objects().iter().filter(|o| h.types().name(o.ty) == "Point").map(|o| o.id)).unwrap();
        for i in 0..4 {
            assert!(oracle_injective(&h, &arrays, &points, &Label::Index(i)));
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("list:100".parse::<Fixture>().unwrap(), Fixture::List(100));
        assert_eq!("facegrid:180,4".parse::<Fixture>().unwrap(), Fixture::FaceGrid { faces: 180, point_data_bytes: 4 });
        assert!(matches!("nope".parse::<Fixture>(), Err(FixtureError::Unknown(_))));
        assert!(matches!("list:x".parse::<Fixture>(), Err(FixtureError::InvalidParams { .. })));
        assert!(matches!(build_fixture(&Fixture::List(0)), Err(FixtureError::InvalidParams { .. })));
        for fx in [Fixture::ExprTree, Fixture::OctreeScene { depth: 3 }, Fixture::Random { seed: 1, max_objects: 50, max_types: 8 }] {
            assert_eq!(fx.to_string().parse::<Fixture>().unwrap(), fx);
        }
    }

    #[test]
    fn random_heaps_are_deterministic() {
        for seed in 0..50 {
            let fx = Fixture::Random { seed, max_objects: 50, max_types: 8 };
            let a = build_fixture(&fx).unwrap();
            let b = build_fixture(&fx).unwrap();
            assert_eq!(a.to_snapshot_json(), b.to_snapshot_json());
            assert!(a.objects().len() <= 50 && a.types().len() <= 8);
        }
    }

    #[test]
    fn synthetic_sizes() {
        let h = build_fixture(&Fixture::Synthetic { records: 100, leaves: 50, fanout: 3 }).unwrap();
        assert_eq!(h.objects().len(), 150);
        assert_eq!(h.pointers().len(), 1 + 100 * 4);
    }
}
