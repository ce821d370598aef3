//! JSON map file format.
//!
//! ```json
//! {
//!   "bounds": {"max_x": 100.000000, "max_y": 10.000000, "min_x": 0.000000, "min_y": -10.000000},
//!   "edges": [
//!     {"a": 0, "b": 1, "width": 6.000000}
//!   ],
//!   "landmarks": [
//!     {"id": 0, "tag": "bench", "x": 50.000000, "y": 4.000000}
//!   ],
//!   "nodes": [
//!     {"id": 0, "x": 0.000000, "y": 0.000000},
//!     {"id": 1, "x": 100.000000, "y": 0.000000}
//!   ],
//!   "version": 1
//! }
//! ```
//!
//! The canonical form written by [`save_map`] sorts keys, orders nodes and
//! landmarks by id, keeps edges in file order (an edge's id is its index)
//! and prints every coordinate with six decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::{Bounds, Edge, Landmark, NodeId, RoadNetwork, TopometricMap};
use crate::embedding::Vocabulary;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Scalar;

pub const MAP_FORMAT_VERSION: u32 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    version: u32,
    bounds: Bounds<f64>,
    nodes: Vec<NodeRecord>,
    #[serde(default)]
    edges: Vec<Edge<f64>>,
    #[serde(default)]
    landmarks: Vec<LandmarkRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: NodeId,
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LandmarkRecord {
    id: u32,
    x: f64,
    y: f64,
    tag: String,
}

/// Parses a map document; `location` names the source in error messages.
pub fn map_from_str(text: &str, location: &str, vocab: &Vocabulary) -> Result<TopometricMap<f64>> {
    let file: MapFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("{location}:{}:{}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    if file.version != MAP_FORMAT_VERSION {
        return Err(Error::Parse {
            location: location.to_string(),
            message: format!("unsupported map version {}", file.version),
        });
    }
    let mut nodes = BTreeMap::new();
    for n in &file.nodes {
        if nodes.insert(n.id, Point2::new(n.x, n.y)).is_some() {
            return Err(Error::DuplicateId { kind: "node", id: n.id });
        }
    }
    let network = RoadNetwork::new(nodes, file.edges)?;
    let landmarks = file
        .landmarks
        .iter()
        .map(|l| Landmark::new(l.id, Point2::new(l.x, l.y), &l.tag, vocab))
        .collect::<Result<Vec<_>>>()?;
    TopometricMap::new(network, landmarks, file.bounds)
}

pub fn load_map(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<TopometricMap<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    map_from_str(&text, &path.display().to_string(), vocab)
}

fn num<T: Scalar>(v: T) -> String {
    let s = format!("{:.6}", v.to_f64_lossy());
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

pub fn map_to_canonical_string<T: Scalar>(map: &TopometricMap<T>) -> String {
    let b = &map.bounds;
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(
        out,
        "  \"bounds\": {{\"max_x\": {}, \"max_y\": {}, \"min_x\": {}, \"min_y\": {}}},",
        num(b.max_x),
        num(b.max_y),
        num(b.min_x),
        num(b.min_y)
    );

    let edges: Vec<String> = map
        .network
        .edges()
        .iter()
        .map(|e| format!("    {{\"a\": {}, \"b\": {}, \"width\": {}}}", e.a, e.b, num(e.width)))
        .collect();
    write_array(&mut out, "edges", &edges);

    let mut landmarks: Vec<&Landmark<T>> = map.landmarks.iter().collect();
    landmarks.sort_by_key(|l| l.id);
    let landmarks: Vec<String> = landmarks
        .iter()
        .map(|l| {
            format!(
                "    {{\"id\": {}, \"tag\": {}, \"x\": {}, \"y\": {}}}",
                l.id,
                serde_json::to_string(&l.tag).expect("strings serialize"),
                num(l.position.x),
                num(l.position.y)
            )
        })
        .collect();
    write_array(&mut out, "landmarks", &landmarks);

    let nodes: Vec<String> = map
        .network
        .nodes()
        .iter()
        .map(|(id, p)| format!("    {{\"id\": {}, \"x\": {}, \"y\": {}}}", id, num(p.x), num(p.y)))
        .collect();
    write_array(&mut out, "nodes", &nodes);

    let _ = writeln!(out, "  \"version\": {MAP_FORMAT_VERSION}");
    out.push_str("}\n");
    out
}

fn write_array(out: &mut String, key: &str, items: &[String]) {
    if items.is_empty() {
        let _ = writeln!(out, "  \"{key}\": [],");
        return;
    }
    let _ = writeln!(out, "  \"{key}\": [");
    out.push_str(&items.join(",\n"));
    out.push_str("\n  ],\n");
}

pub fn save_map<T: Scalar>(map: &TopometricMap<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, map_to_canonical_string(map)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
