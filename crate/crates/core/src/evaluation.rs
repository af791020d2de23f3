//! Instance mask and keypoint metrics, metric floors and dataset statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::annotations::PolygonAnnotation;
use crate::geometry::{Footprint, Point};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
pub const DEFAULT_KEYPOINT_RADIUS: f64 = 10.0;

/// Detection scores with the counts they came from.
///
/// With nothing predicted and nothing expected all three are 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub predicted: usize,
    pub expected: usize,
}

impl Scores {
    pub fn from_counts(matched: usize, predicted: usize, expected: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                1.0
            } else {
                num as f64 / den as f64
            }
        };
        let (precision, recall) = if predicted == 0 && expected == 0 {
            (1.0, 1.0)
        } else {
            (
                if predicted == 0 {
                    0.0
                } else {
                    ratio(matched, predicted)
                },
                if expected == 0 {
                    0.0
                } else {
                    ratio(matched, expected)
                },
            )
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            matched,
            predicted,
            expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskMetrics {
    pub per_class: BTreeMap<String, Scores>,
    pub overall: Scores,
}

/// Class-aware greedy one-to-one matching by descending pixel IoU over a
/// `width x height` frame; pairs below `iou_threshold` never match.
pub fn mask_metrics(
    pred: &[PolygonAnnotation],
    gt: &[PolygonAnnotation],
    iou_threshold: f64,
    width: usize,
    height: usize,
) -> MaskMetrics {
    let fp = |ps: &[PolygonAnnotation]| -> Vec<Footprint> {
        ps.par_iter()
            .map(|p| Footprint::new(&p.outline, width, height))
            .collect()
    };
    let (pf, gf) = (fp(pred), fp(gt));
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            if p.label != g.label || !pf[i].windows_meet(&gf[j]) {
                continue;
            }
            let inter = pf[i].intersection_count(&gf[j]);
            let union = pf[i].count() + gf[j].count() - inter;
            let iou = if union == 0 {
                0.0
            } else {
                inter as f64 / union as f64
            };
            if iou >= iou_threshold {
                candidates.push((iou, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_p, mut used_g) = (vec![false; pred.len()], vec![false; gt.len()]);
    let mut matched: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, i, j) in candidates {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            *matched.entry(pred[i].label.as_str()).or_default() += 1;
        }
    }
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for p in pred {
        counts.entry(p.label.as_str()).or_default().0 += 1;
    }
    for g in gt {
        counts.entry(g.label.as_str()).or_default().1 += 1;
    }
    let per_class = counts
        .iter()
        .map(|(&c, &(np, ng))| {
            (
                c.to_string(),
                Scores::from_counts(matched.get(c).copied().unwrap_or(0), np, ng),
            )
        })
        .collect();
    MaskMetrics {
        per_class,
        overall: Scores::from_counts(matched.values().sum(), pred.len(), gt.len()),
    }
}

/// Maximum one-to-one matching of points at most `radius` apart.
pub fn keypoint_metrics(pred: &[Point], gt: &[Point], radius: f64) -> Scores {
    let adj: Vec<Vec<usize>> = pred
        .iter()
        .map(|p| {
            (0..gt.len())
                .filter(|&j| p.distance(gt[j]) <= radius)
                .collect()
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; gt.len()];
    let mut matched = 0;
    for i in 0..pred.len() {
        let mut seen = vec![false; gt.len()];
        if augment(i, &adj, &mut owner, &mut seen) {
            matched += 1;
        }
    }
    Scores::from_counts(matched, pred.len(), gt.len())
}

fn augment(i: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &j in &adj[i] {
        if seen[j] {
            continue;
        }
        seen[j] = true;
        if owner[j].is_none_or(|k| augment(k, adj, owner, seen)) {
            owner[j] = Some(i);
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// floors

/// Minimum acceptable scores; `None` disables a check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricFloors {
    pub mask_f1: Option<f64>,
    pub keypoint_f1: Option<f64>,
    pub net_f1: Option<f64>,
}

impl MetricFloors {
    /// Human-readable violations; empty when every floor holds.
    pub fn check(
        &self,
        mask: Option<&Scores>,
        keypoints: Option<&Scores>,
        nets: Option<&Scores>,
    ) -> Vec<String> {
        let mut out = Vec::new();
        for (name, floor, got) in [
            ("mask F1", self.mask_f1, mask),
            ("keypoint F1", self.keypoint_f1, keypoints),
            ("net F1", self.net_f1, nets),
        ] {
            if let (Some(floor), Some(got)) = (floor, got) {
                if got.f1 < floor {
                    out.push(format!(
                        "{name} {:.4} is below the floor {floor:.4}",
                        got.f1
                    ));
                }
            }
        }
        out
    }
}

/// Fixed-width table of per-class scores.
pub fn scores_table(rows: &BTreeMap<String, Scores>, overall: &Scores) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<32} {:>9} {:>9} {:>9} {:>6} {:>6} {:>6}",
        "class", "precision", "recall", "f1", "tp", "pred", "gt"
    );
    let mut row = |name: &str, sc: &Scores| {
        let _ = writeln!(
            s,
            "{:<32} {:>9.4} {:>9.4} {:>9.4} {:>6} {:>6} {:>6}",
            name, sc.precision, sc.recall, sc.f1, sc.matched, sc.predicted, sc.expected
        );
    };
    for (c, sc) in rows {
        row(c, sc);
    }
    row("(all)", overall);
    s
}

// ---------------------------------------------------------------------------
// dataset statistics

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Images,
    Boxes,
    Maps,
    Polygons,
}

fn role_of_dir(name: &str) -> Option<Role> {
    match name {
        "images" => Some(Role::Images),
        "annotations" | "bboxes" => Some(Role::Boxes),
        "segmentation" | "binmaps" => Some(Role::Maps),
        "instances" | "polygons" => Some(Role::Polygons),
        _ => None,
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| {
            matches!(
                e.to_ascii_lowercase().as_str(),
                "jpg" | "jpeg" | "png" | "bmp" | "tif" | "tiff"
            )
        })
        .unwrap_or(false)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileIssue {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub images: usize,
    pub boxes: usize,
    pub box_classes: BTreeMap<String, usize>,
    pub binary_maps: usize,
    pub polygon_documents: usize,
    pub polygons: usize,
    pub polygon_classes: BTreeMap<String, usize>,
    /// Unreadable documents and images without a box document.
    pub issues: Vec<FileIssue>,
}

impl DatasetStats {
    /// Distinct classes among the bounding boxes.
    pub fn classes(&self) -> usize {
        self.box_classes.len()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "images:       {}", self.images);
        let _ = writeln!(s, "boxes:        {}", self.boxes);
        let _ = writeln!(s, "classes:      {}", self.classes());
        let _ = writeln!(s, "binary maps:  {}", self.binary_maps);
        let _ = writeln!(s, "polygon docs: {}", self.polygon_documents);
        let _ = writeln!(s, "polygons:     {}", self.polygons);
        let _ = writeln!(s, "issues:       {}", self.issues.len());
        s
    }
}

/// Counts of `<object>` names in a box document, read leniently: class
/// names are not checked against a taxonomy.
fn count_box_document(path: &Path) -> Result<Vec<String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let doc = roxmltree::Document::parse(&text).map_err(|e| e.to_string())?;
    Ok(doc
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "object")
        .map(|o| {
            o.children()
                .find(|c| c.is_element() && c.tag_name().name() == "name")
                .and_then(|c| c.text())
                .unwrap_or("")
                .trim()
                .to_string()
        })
        .collect())
}

fn count_polygon_document(path: &Path) -> Result<Vec<String>, String> {
    #[derive(Deserialize)]
    struct Doc {
        shapes: Vec<Shape>,
    }
    #[derive(Deserialize)]
    struct Shape {
        label: String,
    }
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let doc: Doc = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok(doc.shapes.into_iter().map(|s| s.label).collect())
}

/// Walks `root` and counts files in directories named `images`,
/// `annotations`/`bboxes`, `segmentation`/`binmaps` and
/// `instances`/`polygons`, at any depth. A missing root gives zero counts.
pub fn dataset_stats(root: impl AsRef<Path>) -> DatasetStats {
    let mut files: Vec<(Role, PathBuf)> = WalkDir::new(root.as_ref())
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            let parent = e.path().parent()?.file_name()?.to_str()?;
            Some((role_of_dir(parent)?, e.into_path()))
        })
        .collect();
    files.sort_by(|a, b| a.1.cmp(&b.1));

    let mut stats = DatasetStats::default();
    let mut box_stems: BTreeSet<(PathBuf, String)> = BTreeSet::new();
    let mut image_stems: Vec<(PathBuf, String, PathBuf)> = Vec::new();
    let stem_key = |p: &Path| {
        let drafter = p
            .parent()
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let stem = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        (drafter, stem)
    };

    // per file: parsed class names, or why parsing failed; None when not parsed
    type Parsed<'a> = (Role, &'a PathBuf, Option<Result<Vec<String>, String>>);
    let parsed: Vec<Parsed> = files
        .par_iter()
        .map(|(role, path)| {
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            let content = match role {
                Role::Boxes if ext.eq_ignore_ascii_case("xml") => Some(count_box_document(path)),
                Role::Polygons if ext.eq_ignore_ascii_case("json") => {
                    Some(count_polygon_document(path))
                }
                _ => None,
            };
            (*role, path, content)
        })
        .collect();

    for (role, path, content) in parsed {
        match (role, content) {
            (Role::Images, _) if is_image(path) => {
                stats.images += 1;
                let (d, s) = stem_key(path);
                image_stems.push((d, s, path.clone()));
            }
            (Role::Maps, _) if is_image(path) => stats.binary_maps += 1,
            (Role::Boxes, Some(Ok(names))) => {
                box_stems.insert(stem_key(path));
                stats.boxes += names.len();
                for n in names {
                    *stats.box_classes.entry(n).or_default() += 1;
                }
            }
            (Role::Polygons, Some(Ok(labels))) => {
                stats.polygon_documents += 1;
                stats.polygons += labels.len();
                for l in labels {
                    *stats.polygon_classes.entry(l).or_default() += 1;
                }
            }
            (_, Some(Err(message))) => stats.issues.push(FileIssue {
                path: path.clone(),
                message,
            }),
            _ => {}
        }
    }
    for (d, s, path) in image_stems {
        if !box_stems.contains(&(d, s)) {
            stats.issues.push(FileIssue {
                path,
                message: "no bounding-box document".into(),
            });
        }
    }
    stats
}
