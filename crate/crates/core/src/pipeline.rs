//! The per-image processing chain, one function per stage.
//!
//! Every stage maps a polygon document to a polygon document, so running
//! the stages one by one through files gives the same artifacts as
//! [`run`]. Detected keypoints travel in each polygon's `ports` field:
//! unassigned ones are named `kp<i>`, the `ports` stage renames symbol
//! keypoints after the prototype.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::annotations::{
    ClassRole, ImageAnnotationSet, PolygonDocument, Port, PrototypeLibrary, Refinement,
};
use crate::error::{Error, Result};
use crate::geometry::{Angle, Point};
use crate::graph::{build_graph, to_netlist, BuildReport, CircuitGraph, Netlist, NetlistReport};
use crate::ports::{
    assign_ports, wire_keypoints, AssignmentStatus, KeypointSource, PortAssignment,
};
use crate::raster::{binarize, median_denoise, BinaryMap, GrayImage, Polarity, ThresholdMethod};
use crate::refine::{self, Overlap, RefineReport};

/// Every tunable of the chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    #[serde(skip)]
    pub threshold: ThresholdMethod,
    #[serde(skip)]
    pub polarity: Polarity,
    pub denoise_radius: usize,
    pub epsilon: f64,
    pub min_area: usize,
    pub erosion_radius: usize,
    pub cluster_gap: f64,
    pub tolerance: f64,
    /// Annotated rotations run clockwise; they are negated before use.
    pub rotation_clockwise: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            threshold: ThresholdMethod::Otsu,
            polarity: Polarity::DarkIsStroke,
            denoise_radius: 0,
            epsilon: refine::DEFAULT_EPSILON,
            min_area: refine::DEFAULT_MIN_AREA,
            erosion_radius: crate::ports::DEFAULT_EROSION_RADIUS,
            cluster_gap: crate::ports::DEFAULT_CLUSTER_GAP,
            tolerance: crate::graph::DEFAULT_TOLERANCE,
            rotation_clockwise: false,
        }
    }
}

pub fn binarize_stage(image: &GrayImage, config: &Config) -> BinaryMap {
    let map = binarize(image, config.threshold, config.polarity);
    median_denoise(&map, config.denoise_radius)
}

fn check_dims(doc: &PolygonDocument, map: &BinaryMap) -> Result<()> {
    if (doc.width, doc.height) != map.dims() {
        return Err(Error::DimensionMismatch {
            a: (doc.width, doc.height),
            b: map.dims(),
        });
    }
    Ok(())
}

/// Bounding boxes to rectangles.
pub fn coarse_stage(
    set: &ImageAnnotationSet,
    map: &BinaryMap,
) -> Result<(PolygonDocument, Vec<Overlap>)> {
    if (set.width, set.height) != map.dims() {
        return Err(Error::DimensionMismatch {
            a: (set.width, set.height),
            b: map.dims(),
        });
    }
    let coarse = refine::coarse_from_bboxes(set, map);
    let mut doc = PolygonDocument::new(set.image_id.clone(), set.width, set.height);
    doc.polygons = coarse.polygons;
    Ok((doc, coarse.overlaps))
}

pub fn refine_stage(
    doc: &PolygonDocument,
    map: &BinaryMap,
    config: &Config,
) -> Result<(PolygonDocument, RefineReport)> {
    check_dims(doc, map)?;
    let out = refine::refine_all(&doc.polygons, map, config.epsilon)?;
    let mut next = doc.clone();
    next.polygons = out.polygons;
    Ok((next, out.report))
}

/// Replaces previously generated wires with a fresh set appended at the end.
pub fn wires_stage(
    doc: &PolygonDocument,
    map: &BinaryMap,
    config: &Config,
) -> Result<PolygonDocument> {
    check_dims(doc, map)?;
    let mut next = doc.clone();
    next.polygons
        .retain(|p| p.refinement != Refinement::WireAuto);
    let wires =
        refine::generate_wire_polygons(map, &next.polygons, config.epsilon, config.min_area);
    next.polygons.extend(wires);
    Ok(next)
}

fn named_keypoints(points: Vec<Point>) -> Option<Vec<Port>> {
    Some(
        points
            .into_iter()
            .enumerate()
            .map(|(i, p)| Port::new(format!("kp{i}"), p))
            .collect(),
    )
}

/// Detects symbol and wire keypoints.
pub fn keypoints_stage(
    doc: &PolygonDocument,
    map: &BinaryMap,
    config: &Config,
) -> Result<PolygonDocument> {
    check_dims(doc, map)?;
    let texts: Vec<_> = doc
        .polygons
        .iter()
        .filter(|p| p.role() == ClassRole::Text)
        .cloned()
        .collect();
    let source = KeypointSource::new(map, &texts, config.erosion_radius);
    let mut next = doc.clone();
    for p in &mut next.polygons {
        p.ports = match p.role() {
            ClassRole::Symbol => named_keypoints(source.keypoints(p, config.cluster_gap)),
            ClassRole::Wire => named_keypoints(wire_keypoints(p, map, config.cluster_gap)),
            _ => None,
        };
    }
    Ok(next)
}

/// Names symbol keypoints after their prototype ports.
pub fn ports_stage(
    doc: &PolygonDocument,
    library: &PrototypeLibrary,
    config: &Config,
) -> Result<(PolygonDocument, Vec<PortAssignment>)> {
    let mut next = doc.clone();
    let mut assignments = Vec::new();
    for (i, p) in next.polygons.iter_mut().enumerate() {
        if p.role() != ClassRole::Symbol {
            continue;
        }
        let keypoints: Vec<Point> = p.ports.iter().flatten().map(|q| q.position).collect();
        let bbox = p.outline.bounding_box()?;
        if p.rotation.is_none() {
            log::warn!(
                "{}: symbol {i} ({}) has no rotation; assuming 0",
                doc.image_path,
                p.label
            );
        }
        let rotation = p.rotation.map(|r| {
            if config.rotation_clockwise {
                Angle::degrees(-r.as_degrees())
            } else {
                r
            }
        });
        let a = assign_ports(i, &keypoints, p, &bbox, rotation, library);
        if a.status == AssignmentStatus::CountMismatch {
            log::warn!(
                "{}: symbol {i} ({}) has {} keypoints for {} ports",
                doc.image_path,
                p.label,
                keypoints.len(),
                a.expected.len()
            );
        }
        p.ports = Some(a.pairs.clone());
        assignments.push(a);
    }
    Ok((next, assignments))
}

/// Wire keypoints are read from the wire polygons' ports.
pub fn graph_stage(doc: &PolygonDocument, config: &Config) -> (CircuitGraph, BuildReport) {
    let wire_kps: BTreeMap<usize, Vec<Point>> = doc
        .polygons
        .iter()
        .enumerate()
        .filter(|(_, p)| p.role() == ClassRole::Wire)
        .map(|(i, p)| (i, p.ports.iter().flatten().map(|q| q.position).collect()))
        .collect();
    build_graph(&doc.polygons, &wire_kps, config.tolerance)
}

/// Machine-readable account of one image's run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageReport {
    pub image_id: String,
    pub overlaps: Vec<Overlap>,
    pub refinement: RefineReport,
    pub wires: usize,
    pub assignments: BTreeMap<String, usize>,
    pub build: BuildReport,
    pub netlist: NetlistReport,
}

impl ImageReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone)]
pub struct Output {
    pub document: PolygonDocument,
    pub assignments: Vec<PortAssignment>,
    pub graph: CircuitGraph,
    pub netlist: Netlist,
    pub report: ImageReport,
}

/// All stages from bounding boxes and a binary map to a netlist.
pub fn run(
    set: &ImageAnnotationSet,
    map: &BinaryMap,
    library: &PrototypeLibrary,
    config: &Config,
) -> Result<Output> {
    let (coarse, overlaps) = coarse_stage(set, map)?;
    let (refined, refinement) = refine_stage(&coarse, map, config)?;
    let wired = wires_stage(&refined, map, config)?;
    let with_kps = keypoints_stage(&wired, map, config)?;
    let (document, assignments) = ports_stage(&with_kps, library, config)?;
    let (graph, build) = graph_stage(&document, config);
    let (netlist, netlist_report) = to_netlist(&graph);

    let mut status_counts = BTreeMap::new();
    for a in &assignments {
        let key = serde_json::to_value(a.status).expect("unit enum");
        *status_counts
            .entry(key.as_str().unwrap_or_default().to_string())
            .or_default() += 1;
    }
    let report = ImageReport {
        image_id: set.image_id.clone(),
        overlaps,
        refinement,
        wires: document
            .polygons
            .iter()
            .filter(|p| p.refinement == Refinement::WireAuto)
            .count(),
        assignments: status_counts,
        build,
        netlist: netlist_report,
    };
    Ok(Output {
        document,
        assignments,
        graph,
        netlist,
        report,
    })
}

/// File names of the per-image artifacts inside an output directory.
pub struct ArtifactPaths {
    pub polygons: std::path::PathBuf,
    pub graph: std::path::PathBuf,
    pub netlist: std::path::PathBuf,
    pub report: std::path::PathBuf,
    pub overlay: std::path::PathBuf,
}

impl ArtifactPaths {
    pub fn new(dir: &Path, image_id: &str) -> Self {
        Self {
            polygons: dir.join(format!("{image_id}.polygons.json")),
            graph: dir.join(format!("{image_id}.graph.json")),
            netlist: dir.join(format!("{image_id}.netlist.txt")),
            report: dir.join(format!("{image_id}.report.json")),
            overlay: dir.join(format!("{image_id}.overlay.png")),
        }
    }
}
