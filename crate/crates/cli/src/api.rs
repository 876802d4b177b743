//! JSON-over-HTTP endpoints, as a pure function of the store and request.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use heapscope_core::abstraction::AbstractionError;
use heapscope_core::export::{node_label, Decorations};
use heapscope_core::reduction::{zoom, ReducedId};
use heapscope_core::{AbstractGraph, AbstractionOptions, NodeId, ObjId};
use serde_json::{json, Value};

use crate::store::{Session, SessionStore};
use crate::{content_hash, report_json};

/// Most object ids one zoom request may pin.
pub const MAX_ZOOM_IDS: usize = 64;
/// Member ids listed in a node detail; the count is always exact.
pub const MAX_LISTED_MEMBERS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct Response {
    pub status: u16,
    pub body: Value,
}

impl Response {
    fn ok(body: Value) -> Self {
        Response { status: 200, body }
    }

    fn error(status: u16, msg: impl Into<String>) -> Self {
        Response { status, body: json!({ "error": msg.into() }) }
    }
}

enum Route<'a> {
    Snapshots,
    Graph(&'a str),
    Node(&'a str, &'a str),
    Diagnostics(&'a str),
    Zoom(&'a str),
    Expand(&'a str, &'a str),
}

fn route(path: &str) -> Option<Route<'_>> {
    let segs: Vec<&str> = path.trim_matches('/').split('/').collect();
    Some(match segs.as_slice() {
        ["api", "snapshots"] => Route::Snapshots,
        ["api", "graph", h] => Route::Graph(h),
        ["api", "graph", h, "node", id] => Route::Node(h, id),
        ["api", "graph", h, "diagnostics"] => Route::Diagnostics(h),
        ["api", "graph", h, "zoom"] => Route::Zoom(h),
        ["api", "graph", h, "expand", id] => Route::Expand(h, id),
        _ => return None,
    })
}

pub fn handle(store: &SessionStore, method: &str, path: &str, query: Option<&str>, body: &[u8]) -> Response {
    let Some(r) = route(path) else {
        return Response::error(404, format!("no such endpoint: {path}"));
    };
    let want = if matches!(r, Route::Zoom(_)) { "POST" } else { "GET" };
    if method != want {
        return Response::error(405, format!("{path} only accepts {want}"));
    }
    let session = |h: &str| store.get(h).ok_or_else(|| Response::error(404, format!("unknown snapshot {h}")));
    let out = match r {
        Route::Snapshots => Ok(snapshots(store)),
        Route::Graph(h) => session(h).and_then(|s| graph(&s, query)),
        Route::Node(h, id) => session(h).and_then(|s| node(&s, id)),
        Route::Diagnostics(h) => session(h).map(|s| Response::ok(report_json(&s.hash, &s.diagnostics))),
        Route::Zoom(h) => session(h).and_then(|s| zoom_view(&s, body)),
        Route::Expand(h, id) => session(h).and_then(|s| expand(&s, id)),
    };
    out.unwrap_or_else(|e| e)
}

fn snapshots(store: &SessionStore) -> Response {
    let list: Vec<Value> = store
        .list()
        .iter()
        .map(|s| {
            json!({
                "hash": s.hash,
                "name": s.name,
                "objectCount": s.heap.objects().len(),
                "bytes": s.diagnostics.heap_bytes,
            })
        })
        .collect();
    Response::ok(Value::Array(list))
}

fn labels(g: &AbstractGraph, deco: &Decorations) -> BTreeMap<String, String> {
    g.nodes().map(|n| (n.id.0.to_string(), node_label(g, n.id, deco))).collect()
}

fn query_param<'q>(query: Option<&'q str>, key: &str) -> Option<&'q str> {
    query?.split('&').filter_map(|kv| kv.split_once('=')).find(|(k, _)| *k == key).map(|(_, v)| v)
}

fn graph(s: &Session, query: Option<&str>) -> Result<Response, Response> {
    let view = query_param(query, "view").unwrap_or("abstract");
    let mut body = json!({
        "hash": s.hash,
        "view": view,
        "graph": s.graph.to_json_value(),
        "labels": labels(&s.graph, &s.decorations),
    });
    match view {
        "abstract" => {}
        "reduced" => body["reduced"] = s.reduced.to_json(),
        other => return Err(Response::error(400, format!("unknown view '{other}' (abstract or reduced)"))),
    }
    Ok(Response::ok(body))
}

fn parse_id(raw: &str, prefix: char) -> Option<u64> {
    raw.strip_prefix(prefix).unwrap_or(raw).parse().ok()
}

fn node(s: &Session, raw: &str) -> Result<Response, Response> {
    let not_found = || Response::error(404, format!("unknown node {raw}"));
    let id = NodeId(parse_id(raw, 'n').ok_or_else(not_found)?);
    let n = s.graph.node(id).ok_or_else(not_found)?;
    let members = s.mu.members(id);
    let metrics = s.diagnostics.metrics.iter().find(|m| m.node == id);
    let findings: Vec<_> = s.diagnostics.findings.iter().filter(|f| f.node == id).collect();
    Ok(Response::ok(json!({
        "id": id,
        "label": node_label(&s.graph, id, &s.decorations),
        "types": n.types,
        "card": n.card,
        "memberCount": members.len(),
        "members": members.iter().take(MAX_LISTED_MEMBERS).map(|o| o.0).collect::<Vec<_>>(),
        "metrics": metrics,
        "findings": findings,
    })))
}

fn parse_zoom_body(body: &[u8]) -> Result<BTreeSet<ObjId>, String> {
    let v: Value = serde_json::from_slice(body).map_err(|e| format!("body is not JSON: {e}"))?;
    let ids = v
        .get("interesting")
        .and_then(Value::as_array)
        .ok_or("body must be {\"interesting\": [objectIds]}")?;
    if ids.len() > MAX_ZOOM_IDS {
        return Err(format!("at most {MAX_ZOOM_IDS} interesting ids per request, got {}", ids.len()));
    }
    ids.iter()
        .map(|x| x.as_u64().map(ObjId).ok_or_else(|| format!("object id {x} is not a non-negative integer")))
        .collect()
}

fn zoom_view(s: &Session, body: &[u8]) -> Result<Response, Response> {
    let ids = parse_zoom_body(body).map_err(|e| Response::error(400, e))?;
    let key = content_hash(format!("{:?}", ids.iter().map(|o| o.0).collect::<Vec<_>>()).as_bytes());
    if let Some(hit) = s.cached_zoom(&key) {
        return Ok(Response::ok(Arc::unwrap_or_clone(hit)));
    }
    let (g, mu) = match zoom(&s.heap, &ids, &AbstractionOptions::default()) {
        Ok(r) => r,
        Err(AbstractionError::UnknownObject(o)) => return Err(Response::error(404, format!("unknown object {o}"))),
        Err(e) => return Err(Response::error(500, format!("zoom failed: {e}"))),
    };
    let (g, map) = heapscope_core::abstract_graph::canonicalize_with_map(&g);
    let mu = mu.relabel(&map);
    let deco = Decorations::from_heap(&s.heap, &g, &mu, None);
    let pinned: BTreeMap<String, NodeId> = ids.iter().filter_map(|&o| Some((o.0.to_string(), mu.get(o)?))).collect();
    let body = json!({
        "hash": s.hash,
        "view": "zoom",
        "interesting": ids.iter().map(|o| o.0).collect::<Vec<_>>(),
        "graph": g.to_json_value(),
        "labels": labels(&g, &deco),
        "pinned": pinned,
    });
    Ok(Response::ok(Arc::unwrap_or_clone(s.store_zoom(key, body))))
}

fn expand(s: &Session, raw: &str) -> Result<Response, Response> {
    let not_found = || Response::error(404, format!("unknown reduced node {raw}"));
    let id = ReducedId(parse_id(raw, 'r').ok_or_else(not_found)?);
    let sub = s.reduced.expand(id).map_err(|_| not_found())?;
    Ok(Response::ok(sub.to_json(&s.graph)))
}
