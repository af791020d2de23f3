//! Annotation data model and document I/O.
//!
//! Three on-disk formats are supported:
//!
//! * bounding-box documents: one VOC-style XML file per image, with optional
//!   `<rotation>` (degrees, counterclockwise) and `<text>` children per object;
//! * polygon documents: LabelMe-compatible JSON, extended per shape with
//!   `refinement`, `rotation`, `text`, `ports` and `source_bbox`;
//! * prediction documents: COCO-style JSON with per-instance polygon and
//!   flat `[x, y, visibility, ...]` keypoint arrays.
//!
//! The symbol port prototype library is a versioned JSON document; the
//! default library ships with the crate.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Angle, BoundingBox, Point, Polygon};

pub const WIRE: &str = "wire";
pub const JUNCTION: &str = "junction";
pub const CROSSOVER: &str = "crossover";
pub const TEXT: &str = "text";

const BUILTIN_CLASSES: &str = include_str!("../data/classes.txt");
const BUILTIN_PROTOTYPES: &str = include_str!("../data/prototypes.json");

/// Class name validated against a [`ClassTaxonomy`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(String);

/// What a class becomes in the electrical graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassRole {
    Symbol,
    Junction,
    Crossover,
    Text,
    Wire,
}

impl ClassLabel {
    /// Builds a label without taxonomy validation; loaders always validate.
    pub fn new_unchecked(name: impl Into<String>) -> Self {
        ClassLabel(name.into())
    }

    pub fn wire() -> Self {
        ClassLabel(WIRE.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn role(&self) -> ClassRole {
        match self.0.as_str() {
            WIRE => ClassRole::Wire,
            JUNCTION => ClassRole::Junction,
            CROSSOVER => ClassRole::Crossover,
            TEXT => ClassRole::Text,
            _ => ClassRole::Symbol,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered class list. `wire` is always accepted in addition to the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTaxonomy {
    names: Vec<String>,
    lookup: HashSet<String>,
}

impl ClassTaxonomy {
    pub fn new(names: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let mut out = Vec::new();
        let mut lookup = HashSet::new();
        for n in names {
            let n = n.into();
            if lookup.insert(n.clone()) {
                out.push(n);
            }
        }
        Self { names: out, lookup }
    }

    /// The 58-class list shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CLASSES)
    }

    /// One class per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        name == WIRE || self.lookup.contains(name)
    }

    pub fn label(&self, name: &str) -> Result<ClassLabel> {
        if self.contains(name) {
            Ok(ClassLabel(name.to_string()))
        } else {
            Err(Error::UnknownClass(name.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BBoxAnnotation {
    pub label: ClassLabel,
    pub bbox: BoundingBox,
    pub rotation: Option<Angle>,
    pub text: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Refinement {
    #[default]
    Coarse,
    Refined,
    HullFallback,
    WireAuto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub position: Point,
}

impl Port {
    pub fn new(name: impl Into<String>, position: Point) -> Self {
        Self {
            name: name.into(),
            position,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonAnnotation {
    pub label: ClassLabel,
    pub outline: Polygon,
    pub refinement: Refinement,
    pub ports: Option<Vec<Port>>,
    pub rotation: Option<Angle>,
    pub text: Option<String>,
    /// Index of the bounding box this polygon was derived from.
    pub source_bbox: Option<usize>,
}

impl PolygonAnnotation {
    pub fn new(label: ClassLabel, outline: Polygon, refinement: Refinement) -> Self {
        Self {
            label,
            outline,
            refinement,
            ports: None,
            rotation: None,
            text: None,
            source_bbox: None,
        }
    }

    pub fn role(&self) -> ClassRole {
        self.label.role()
    }

    /// Ports farther than `tolerance` from the outline.
    pub fn ports_off_border(&self, tolerance: f64) -> Vec<&Port> {
        self.ports
            .iter()
            .flatten()
            .filter(|p| self.outline.boundary_distance(p.position) > tolerance)
            .collect()
    }
}

/// Maximum distance of a stored port from its polygon's outline.
pub const PORT_BORDER_TOLERANCE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageAnnotationSet {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub bboxes: Vec<BBoxAnnotation>,
    pub polygons: Vec<PolygonAnnotation>,
}

impl ImageAnnotationSet {
    pub fn new(image_id: impl Into<String>, width: usize, height: usize) -> Self {
        Self {
            image_id: image_id.into(),
            width,
            height,
            bboxes: Vec::new(),
            polygons: Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// bounding-box XML

fn parse_error(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

pub fn load_bbox_document(
    path: impl AsRef<Path>,
    taxonomy: &ClassTaxonomy,
) -> Result<ImageAnnotationSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bbox_document(&text, path, taxonomy)
}

/// Parses a VOC-style document. Boxes are clamped to the image size and
/// classes must belong to `taxonomy`. `origin` is only used in error messages.
pub fn parse_bbox_document(
    text: &str,
    origin: &Path,
    taxonomy: &ClassTaxonomy,
) -> Result<ImageAnnotationSet> {
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        parse_error(origin, pos.row as usize, pos.col as usize, e.to_string())
    })?;
    let at = |node: roxmltree::Node<'_, '_>, msg: String| {
        let pos = doc.text_pos_at(node.range().start);
        parse_error(origin, pos.row as usize, pos.col as usize, msg)
    };
    let root = doc.root_element();
    if root.tag_name().name() != "annotation" {
        return Err(at(
            root,
            format!("expected <annotation>, found <{}>", root.tag_name().name()),
        ));
    }
    let number = |node: roxmltree::Node<'_, '_>, name: &str| -> Result<f64> {
        let c = child(node, name).ok_or_else(|| at(node, format!("missing <{name}>")))?;
        let t = c.text().unwrap_or("").trim();
        t.parse::<f64>()
            .map_err(|_| at(c, format!("<{name}> is not a number: `{t}`")))
    };

    let size = child(root, "size").ok_or_else(|| at(root, "missing <size>".into()))?;
    let width = number(size, "width")?;
    let height = number(size, "height")?;
    if width < 1.0 || height < 1.0 {
        return Err(at(size, format!("invalid image size {width}x{height}")));
    }
    let image_id = child_text(root, "filename")
        .map(|f| {
            Path::new(&f)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or(f)
        })
        .unwrap_or_default();

    let mut set = ImageAnnotationSet::new(image_id, width as usize, height as usize);
    for obj in root
        .children()
        .filter(|c| c.is_element() && c.tag_name().name() == "object")
    {
        let name =
            child_text(obj, "name").ok_or_else(|| at(obj, "object without <name>".into()))?;
        let label = taxonomy.label(&name).map_err(|e| at(obj, e.to_string()))?;
        let bnd = child(obj, "bndbox").ok_or_else(|| at(obj, "object without <bndbox>".into()))?;
        let raw = (
            number(bnd, "xmin")?,
            number(bnd, "ymin")?,
            number(bnd, "xmax")?,
            number(bnd, "ymax")?,
        );
        let bbox = BoundingBox::new(raw.0, raw.1, raw.2, raw.3)
            .and_then(|b| b.clamped(width, height))
            .map_err(|e| at(bnd, e.to_string()))?;
        let rotation = match child(obj, "rotation") {
            Some(r) => {
                let t = r.text().unwrap_or("").trim();
                Some(Angle::degrees(t.parse::<f64>().map_err(|_| {
                    at(r, format!("<rotation> is not a number: `{t}`"))
                })?))
            }
            None => None,
        };
        let text = child_text(obj, "text").filter(|t| !t.is_empty());
        set.bboxes.push(BBoxAnnotation {
            label,
            bbox,
            rotation,
            text,
        });
    }
    Ok(set)
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children()
        .find(|c| c.is_element() && c.tag_name().name() == name)
}

fn child_text(node: roxmltree::Node<'_, '_>, name: &str) -> Option<String> {
    child(node, name).map(|c| c.text().unwrap_or("").trim().to_string())
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Serializes the bounding boxes of `set` as a VOC-style document.
pub fn bbox_document_to_xml(set: &ImageAnnotationSet) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    s.push_str("<annotation>\n");
    let _ = writeln!(s, "  <filename>{}</filename>", xml_escape(&set.image_id));
    let _ = writeln!(
        s,
        "  <size>\n    <width>{}</width>\n    <height>{}</height>\n    <depth>3</depth>\n  </size>",
        set.width, set.height
    );
    for b in &set.bboxes {
        s.push_str("  <object>\n");
        let _ = writeln!(s, "    <name>{}</name>", xml_escape(b.label.as_str()));
        let _ = writeln!(
            s,
            "    <bndbox>\n      <xmin>{}</xmin>\n      <ymin>{}</ymin>\n      <xmax>{}</xmax>\n      <ymax>{}</ymax>\n    </bndbox>",
            b.bbox.xmin(),
            b.bbox.ymin(),
            b.bbox.xmax(),
            b.bbox.ymax()
        );
        if let Some(r) = b.rotation {
            let _ = writeln!(s, "    <rotation>{}</rotation>", r.as_degrees());
        }
        if let Some(t) = &b.text {
            let _ = writeln!(s, "    <text>{}</text>", xml_escape(t));
        }
        s.push_str("  </object>\n");
    }
    s.push_str("</annotation>\n");
    s
}

pub fn save_bbox_document(path: impl AsRef<Path>, set: &ImageAnnotationSet) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bbox_document_to_xml(set)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// LabelMe polygon JSON

#[derive(Debug, Serialize, Deserialize)]
struct LabelMeDocument {
    #[serde(default = "labelme_version")]
    version: String,
    #[serde(default)]
    flags: BTreeMap<String, bool>,
    shapes: Vec<LabelMeShape>,
    #[serde(rename = "imagePath", default)]
    image_path: String,
    #[serde(rename = "imageData", default)]
    image_data: Option<String>,
    #[serde(rename = "imageHeight")]
    image_height: usize,
    #[serde(rename = "imageWidth")]
    image_width: usize,
}

fn labelme_version() -> String {
    "5.0.1".to_string()
}

fn polygon_shape_type() -> String {
    "polygon".to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelMeShape {
    label: String,
    points: Vec<[f64; 2]>,
    #[serde(default)]
    group_id: Option<i64>,
    #[serde(default = "polygon_shape_type")]
    shape_type: String,
    #[serde(default)]
    flags: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    refinement: Option<Refinement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ports: Option<Vec<LabelMePort>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_bbox: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelMePort {
    name: String,
    position: [f64; 2],
}

/// A shape that could not become a polygon, kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateShape {
    pub index: usize,
    pub label: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonDocument {
    pub image_path: String,
    pub width: usize,
    pub height: usize,
    pub polygons: Vec<PolygonAnnotation>,
    pub degenerate: Vec<DegenerateShape>,
}

impl PolygonDocument {
    pub fn new(image_path: impl Into<String>, width: usize, height: usize) -> Self {
        Self {
            image_path: image_path.into(),
            width,
            height,
            polygons: Vec::new(),
            degenerate: Vec::new(),
        }
    }
}

fn json_error(origin: &Path, e: serde_json::Error) -> Error {
    parse_error(origin, e.line(), e.column(), e.to_string())
}

pub fn load_polygon_document(
    path: impl AsRef<Path>,
    taxonomy: &ClassTaxonomy,
) -> Result<PolygonDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_polygon_document(&text, path, taxonomy)
}

/// Parses a LabelMe document. `polygon` and `rectangle` shapes are accepted;
/// anything that cannot form a polygon is listed in
/// [`PolygonDocument::degenerate`] instead of being dropped silently.
pub fn parse_polygon_document(
    text: &str,
    origin: &Path,
    taxonomy: &ClassTaxonomy,
) -> Result<PolygonDocument> {
    let raw: LabelMeDocument = serde_json::from_str(text).map_err(|e| json_error(origin, e))?;
    let mut doc = PolygonDocument::new(raw.image_path, raw.image_width, raw.image_height);
    for (index, shape) in raw.shapes.into_iter().enumerate() {
        let label = taxonomy.label(&shape.label)?;
        let degenerate = |reason: String| DegenerateShape {
            index,
            label: shape.label.clone(),
            reason,
        };
        let points: Vec<Point> = match shape.shape_type.as_str() {
            "polygon" => shape
                .points
                .iter()
                .map(|p| Point::new(p[0], p[1]))
                .collect(),
            "rectangle" if shape.points.len() == 2 => {
                let [a, b] = [shape.points[0], shape.points[1]];
                let (x0, x1) = (a[0].min(b[0]), a[0].max(b[0]));
                let (y0, y1) = (a[1].min(b[1]), a[1].max(b[1]));
                vec![
                    Point::new(x0, y0),
                    Point::new(x1, y0),
                    Point::new(x1, y1),
                    Point::new(x0, y1),
                ]
            }
            other => {
                doc.degenerate.push(degenerate(format!(
                    "unsupported shape `{other}` with {} points",
                    shape.points.len()
                )));
                continue;
            }
        };
        let outline = match Polygon::new(points) {
            Ok(p) if p.area() > 0.0 => p,
            Ok(_) => {
                doc.degenerate.push(degenerate("zero-area polygon".into()));
                continue;
            }
            Err(e) => {
                doc.degenerate.push(degenerate(e.to_string()));
                continue;
            }
        };
        doc.polygons.push(PolygonAnnotation {
            label,
            outline,
            refinement: shape.refinement.unwrap_or_default(),
            ports: shape.ports.map(|ps| {
                ps.into_iter()
                    .map(|p| Port::new(p.name, Point::new(p.position[0], p.position[1])))
                    .collect()
            }),
            rotation: shape.rotation.map(Angle::degrees),
            text: shape.text,
            source_bbox: shape.source_bbox,
        });
    }
    Ok(doc)
}

pub fn polygon_document_to_json(doc: &PolygonDocument) -> String {
    let shapes = doc
        .polygons
        .iter()
        .map(|p| LabelMeShape {
            label: p.label.as_str().to_string(),
            points: p.outline.vertices().iter().map(|v| [v.x, v.y]).collect(),
            group_id: None,
            shape_type: polygon_shape_type(),
            flags: BTreeMap::new(),
            refinement: Some(p.refinement),
            rotation: p.rotation.map(Angle::as_degrees),
            text: p.text.clone(),
            ports: p.ports.as_ref().map(|ps| {
                ps.iter()
                    .map(|port| LabelMePort {
                        name: port.name.clone(),
                        position: [port.position.x, port.position.y],
                    })
                    .collect()
            }),
            source_bbox: p.source_bbox,
        })
        .collect();
    let raw = LabelMeDocument {
        version: labelme_version(),
        flags: BTreeMap::new(),
        shapes,
        image_path: doc.image_path.clone(),
        image_data: None,
        image_height: doc.height,
        image_width: doc.width,
    };
    let mut s = serde_json::to_string_pretty(&raw).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn save_polygon_document(path: impl AsRef<Path>, doc: &PolygonDocument) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, polygon_document_to_json(doc)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// COCO-style predictions

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    #[serde(default)]
    pub id: u64,
    pub file_name: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoInstance {
    pub id: u64,
    pub category_id: u64,
    #[serde(default = "full_score")]
    pub score: f64,
    /// `[x, y, width, height]`
    pub bbox: [f64; 4],
    /// Flat `[x0, y0, x1, y1, ...]` rings; the first ring is the outline.
    pub segmentation: Vec<Vec<f64>>,
    /// Flat `[x, y, visibility, ...]`; visibility 0 marks a padded slot.
    #[serde(default)]
    pub keypoints: Vec<f64>,
    #[serde(default)]
    pub num_keypoints: usize,
}

fn full_score() -> f64 {
    1.0
}

/// One image worth of detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDocument {
    pub image: CocoImage,
    pub categories: Vec<CocoCategory>,
    pub annotations: Vec<CocoInstance>,
}

pub fn load_prediction_document(path: impl AsRef<Path>) -> Result<PredictionDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| json_error(path, e))
}

impl PredictionDocument {
    /// Validates categories and geometry and converts instances scoring at
    /// least `min_score` into polygon annotations. Visible keypoints become
    /// ports named `kp0`, `kp1`, ... in slot order.
    pub fn to_polygon_document(
        &self,
        taxonomy: &ClassTaxonomy,
        min_score: f64,
    ) -> Result<PolygonDocument> {
        let categories: HashMap<u64, ClassLabel> = self
            .categories
            .iter()
            .map(|c| Ok((c.id, taxonomy.label(&c.name)?)))
            .collect::<Result<_>>()?;
        let mut doc = PolygonDocument::new(
            self.image.file_name.clone(),
            self.image.width,
            self.image.height,
        );
        for (index, inst) in self.annotations.iter().enumerate() {
            let label = categories.get(&inst.category_id).cloned().ok_or_else(|| {
                Error::Validation(format!(
                    "instance {} references unknown category {}",
                    inst.id, inst.category_id
                ))
            })?;
            if inst.score < min_score {
                continue;
            }
            if inst.keypoints.len() % 3 != 0 {
                return Err(Error::Validation(format!(
                    "instance {}: keypoint array length {} is not a multiple of 3",
                    inst.id,
                    inst.keypoints.len()
                )));
            }
            let ring = inst.segmentation.first().map(Vec::as_slice).unwrap_or(&[]);
            let outline = if ring.len() % 2 == 0 {
                Polygon::new(
                    ring.chunks_exact(2)
                        .map(|c| Point::new(c[0], c[1]))
                        .collect(),
                )
            } else {
                Err(Error::Validation("odd coordinate count".into()))
            };
            let outline = match outline {
                Ok(o) => o,
                Err(e) => {
                    doc.degenerate.push(DegenerateShape {
                        index,
                        label: label.to_string(),
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            let refinement = if label.role() == ClassRole::Wire {
                Refinement::WireAuto
            } else {
                Refinement::Refined
            };
            let ports: Vec<Port> = inst
                .keypoints
                .chunks_exact(3)
                .enumerate()
                .filter(|(_, k)| k[2] > 0.0)
                .map(|(slot, k)| Port::new(format!("kp{slot}"), Point::new(k[0], k[1])))
                .collect();
            let mut p = PolygonAnnotation::new(label, outline, refinement);
            p.ports = (!ports.is_empty()).then_some(ports);
            doc.polygons.push(p);
        }
        Ok(doc)
    }

    /// Builds the detector-format document for `doc`. Every instance carries
    /// `slots` keypoint triples: ports in prototype order when the class has
    /// a prototype, stored order otherwise, padded with `(0, 0, 0)`.
    pub fn from_polygon_document(
        doc: &PolygonDocument,
        taxonomy: &ClassTaxonomy,
        library: &PrototypeLibrary,
        slots: usize,
    ) -> Self {
        let mut names: Vec<String> = taxonomy.names().to_vec();
        names.push(WIRE.to_string());
        let categories: Vec<CocoCategory> = names
            .iter()
            .enumerate()
            .map(|(i, n)| CocoCategory {
                id: i as u64 + 1,
                name: n.clone(),
            })
            .collect();
        let id_of: HashMap<&str, u64> =
            categories.iter().map(|c| (c.name.as_str(), c.id)).collect();
        let annotations = doc
            .polygons
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let bb = p.outline.bounding_box().ok();
                let bbox = bb.map_or([0.0; 4], |b| [b.xmin(), b.ymin(), b.width(), b.height()]);
                let ports = p.ports.as_deref().unwrap_or(&[]);
                let ordered: Vec<&Port> = match library.get(p.label.as_str()) {
                    Some(proto) => proto
                        .iter()
                        .filter_map(|pp| ports.iter().find(|q| q.name == pp.name))
                        .chain(
                            ports
                                .iter()
                                .filter(|q| !proto.iter().any(|pp| pp.name == q.name)),
                        )
                        .collect(),
                    None => ports.iter().collect(),
                };
                let mut keypoints = Vec::with_capacity(slots * 3);
                for port in ordered.iter().take(slots) {
                    keypoints.extend_from_slice(&[port.position.x, port.position.y, 2.0]);
                }
                keypoints.resize(slots * 3, 0.0);
                CocoInstance {
                    id: i as u64 + 1,
                    category_id: id_of.get(p.label.as_str()).copied().unwrap_or(0),
                    score: 1.0,
                    bbox,
                    segmentation: vec![p
                        .outline
                        .vertices()
                        .iter()
                        .flat_map(|v| [v.x, v.y])
                        .collect()],
                    num_keypoints: ordered.len().min(slots),
                    keypoints,
                }
            })
            .collect();
        PredictionDocument {
            image: CocoImage {
                id: 0,
                file_name: doc.image_path.clone(),
                width: doc.width,
                height: doc.height,
            },
            categories,
            annotations,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }
}

// ---------------------------------------------------------------------------
// prototype library

pub const PROTOTYPE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypePort {
    pub name: String,
    /// Position in the unit frame `[0, 1]^2` of the unrotated symbol.
    pub position: Point,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawLibrary {
    schema_version: u32,
    prototypes: BTreeMap<String, Vec<LabelMePort>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrototypeLibrary {
    entries: BTreeMap<String, Vec<PrototypePort>>,
}

impl PrototypeLibrary {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_PROTOTYPES, Path::new("<builtin prototypes>"))
            .expect("shipped prototype library is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let raw: RawLibrary = serde_json::from_str(text).map_err(|e| json_error(origin, e))?;
        if raw.schema_version != PROTOTYPE_SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported prototype schema version {}",
                raw.schema_version
            )));
        }
        let mut lib = PrototypeLibrary::default();
        for (class, ports) in raw.prototypes {
            lib.insert(
                class,
                ports
                    .into_iter()
                    .map(|p| PrototypePort {
                        name: p.name,
                        position: Point::new(p.position[0], p.position[1]),
                    })
                    .collect(),
            )?;
        }
        Ok(lib)
    }

    /// Adds or replaces an entry after validating it.
    pub fn insert(&mut self, class: impl Into<String>, ports: Vec<PrototypePort>) -> Result<()> {
        let class = class.into();
        let mut seen = HashSet::new();
        for p in &ports {
            let Point { x, y } = p.position;
            if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                return Err(Error::Validation(format!(
                    "{class}: port `{}` at ({x}, {y}) lies outside the unit frame",
                    p.name
                )));
            }
            if !seen.insert(p.name.as_str()) {
                return Err(Error::Validation(format!(
                    "{class}: duplicate port name `{}`",
                    p.name
                )));
            }
        }
        self.entries.insert(class, ports);
        Ok(())
    }

    pub fn get(&self, class: &str) -> Option<&[PrototypePort]> {
        self.entries.get(class).map(Vec::as_slice)
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn max_ports(&self) -> usize {
        self.entries.values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        let raw = RawLibrary {
            schema_version: PROTOTYPE_SCHEMA_VERSION,
            prototypes: self
                .entries
                .iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        v.iter()
                            .map(|p| LabelMePort {
                                name: p.name.clone(),
                                position: [p.position.x, p.position.y],
                            })
                            .collect(),
                    )
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&raw).expect("plain data serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tax() -> ClassTaxonomy {
        ClassTaxonomy::builtin()
    }

    #[test]
    fn builtin_taxonomy_has_58_classes() {
        let t = tax();
        assert_eq!(t.len(), 58);
        assert!(t.contains("resistor") && t.contains("junction") && t.contains("text"));
        assert!(t.contains(WIRE));
        assert!(matches!(
            t.label("flux_capacitor"),
            Err(Error::UnknownClass(_))
        ));
    }

    const VOC: &str = r#"<annotation>
  <folder>images</folder>
  <filename>C1_D1_P1.jpg</filename>
  <size><width>100</width><height>50</height><depth>3</depth></size>
  <object>
    <name>resistor</name>
    <bndbox><xmin>10</xmin><ymin>5</ymin><xmax>40.5</xmax><ymax>20</ymax></bndbox>
    <rotation>90</rotation>
  </object>
  <object>
    <name>text</name>
    <bndbox><xmin>-4</xmin><ymin>30</ymin><xmax>20</xmax><ymax>70</ymax></bndbox>
    <text>R1 &amp; 10k</text>
  </object>
</annotation>"#;

    #[test]
    fn voc_parse_and_clamp() {
        let set = parse_bbox_document(VOC, Path::new("t.xml"), &tax()).unwrap();
        assert_eq!(set.image_id, "C1_D1_P1");
        assert_eq!((set.width, set.height), (100, 50));
        assert_eq!(set.bboxes.len(), 2);
        assert_eq!(set.bboxes[0].rotation, Some(Angle::degrees(90.0)));
        assert_eq!(
            set.bboxes[1].bbox,
            BoundingBox::new(0.0, 30.0, 20.0, 50.0).unwrap()
        );
        assert_eq!(set.bboxes[1].text.as_deref(), Some("R1 & 10k"));
        assert_eq!(set.bboxes[1].rotation, None);
    }

    #[test]
    fn voc_round_trip() {
        let set = parse_bbox_document(VOC, Path::new("t.xml"), &tax()).unwrap();
        let again =
            parse_bbox_document(&bbox_document_to_xml(&set), Path::new("u.xml"), &tax()).unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn voc_empty_document() {
        let xml = "<annotation><filename>a.png</filename><size><width>3</width><height>3</height></size></annotation>";
        let set = parse_bbox_document(xml, Path::new("e.xml"), &tax()).unwrap();
        assert!(set.bboxes.is_empty());
    }

    #[test]
    fn voc_errors_carry_positions() {
        let bad_class = VOC.replace("<name>resistor</name>", "<name>warp_core</name>");
        match parse_bbox_document(&bad_class, Path::new("t.xml"), &tax()) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("warp_core"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let inverted = VOC.replace("<xmax>40.5</xmax>", "<xmax>5</xmax>");
        assert!(matches!(
            parse_bbox_document(&inverted, Path::new("t.xml"), &tax()),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_bbox_document("<annotation>", Path::new("t.xml"), &tax()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn labelme_round_trip_and_degenerates() {
        let text = r#"{
  "version": "5.0.1",
  "shapes": [
    {"label": "resistor", "points": [[0,0],[4,0],[4,3]], "shape_type": "polygon"},
    {"label": "wire", "points": [[0,0],[4,0]], "shape_type": "polygon"},
    {"label": "junction", "points": [[1,1],[5,6]], "shape_type": "rectangle"},
    {"label": "text", "points": [[1,1]], "shape_type": "point"}
  ],
  "imagePath": "x.png", "imageHeight": 10, "imageWidth": 12
}"#;
        let doc = parse_polygon_document(text, Path::new("p.json"), &tax()).unwrap();
        assert_eq!(doc.polygons.len(), 2);
        assert_eq!(doc.degenerate.len(), 2);
        assert_eq!(doc.degenerate[0].index, 1);
        assert_eq!(doc.polygons[0].outline.vertices()[2], Point::new(4.0, 3.0));
        assert_eq!(doc.polygons[1].outline.len(), 4);

        let mut doc = doc;
        doc.degenerate.clear();
        doc.polygons[0].ports = Some(vec![Port::new("left", Point::new(0.5, 0.0))]);
        doc.polygons[0].rotation = Some(Angle::degrees(180.0));
        doc.polygons[0].source_bbox = Some(3);
        let again =
            parse_polygon_document(&polygon_document_to_json(&doc), Path::new("q.json"), &tax())
                .unwrap();
        assert_eq!(doc, again);
    }

    #[test]
    fn labelme_empty_and_bad() {
        let empty = r#"{"shapes": [], "imageHeight": 1, "imageWidth": 1}"#;
        assert!(parse_polygon_document(empty, Path::new("e.json"), &tax())
            .unwrap()
            .polygons
            .is_empty());
        let broken = "{\n  \"shapes\": [,]\n}";
        assert!(matches!(
            parse_polygon_document(broken, Path::new("b.json"), &tax()),
            Err(Error::Parse { line: 2, .. })
        ));
        let unknown = r#"{"shapes": [{"label":"gizmo","points":[[0,0],[1,0],[1,1]]}], "imageHeight": 1, "imageWidth": 1}"#;
        assert!(matches!(
            parse_polygon_document(unknown, Path::new("u.json"), &tax()),
            Err(Error::UnknownClass(_))
        ));
    }

    #[test]
    fn prototype_library() {
        let lib = PrototypeLibrary::builtin();
        let r = lib.get("resistor").unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].position, Point::new(0.0, 0.5));
        assert_eq!(r[1].position, Point::new(1.0, 0.5));
        assert!(lib.get("lamp").is_none());
        assert_eq!(lib.max_ports(), 3);

        let bad = r#"{"schema_version": 1, "prototypes": {"resistor": [{"name":"a","position":[1.2,0.5]}]}}"#;
        assert!(matches!(
            PrototypeLibrary::parse(bad, Path::new("l.json")),
            Err(Error::Validation(_))
        ));
        let dup = r#"{"schema_version": 1, "prototypes": {"resistor": [{"name":"a","position":[0,0.5]},{"name":"a","position":[1,0.5]}]}}"#;
        assert!(matches!(
            PrototypeLibrary::parse(dup, Path::new("l.json")),
            Err(Error::Validation(_))
        ));
        let unversioned = r#"{"prototypes": {}}"#;
        assert!(matches!(
            PrototypeLibrary::parse(unversioned, Path::new("l.json")),
            Err(Error::Parse { .. })
        ));

        let again = PrototypeLibrary::parse(&lib.to_json(), Path::new("r.json")).unwrap();
        assert_eq!(lib, again);
    }

    #[test]
    fn coco_round_trip_with_padding() {
        let t = tax();
        let lib = PrototypeLibrary::builtin();
        let mut doc = PolygonDocument::new("img.png", 40, 30);
        let mut r = PolygonAnnotation::new(
            t.label("resistor").unwrap(),
            Polygon::from_coords(&[(0.0, 0.0), (10.0, 0.0), (10.0, 5.0), (0.0, 5.0)]).unwrap(),
            Refinement::Refined,
        );
        r.ports = Some(vec![
            Port::new("right", Point::new(10.0, 2.5)),
            Port::new("left", Point::new(0.0, 2.5)),
        ]);
        doc.polygons.push(r);
        let coco = PredictionDocument::from_polygon_document(&doc, &t, &lib, lib.max_ports());
        let inst = &coco.annotations[0];
        assert_eq!(
            inst.keypoints,
            vec![0.0, 2.5, 2.0, 10.0, 2.5, 2.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(inst.num_keypoints, 2);

        let text = coco.to_json();
        let parsed: PredictionDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, coco);
        let back = parsed.to_polygon_document(&t, 0.5).unwrap();
        assert_eq!(back.polygons[0].outline, doc.polygons[0].outline);
        let names: Vec<_> = back.polygons[0]
            .ports
            .as_ref()
            .unwrap()
            .iter()
            .map(|p| p.name.as_str())
            .collect();
        assert_eq!(names, ["kp0", "kp1"]);
    }
}
