//! Terminal keypoints and their assignment to named prototype ports.
//!
//! Symbol keypoints are clusters of stroke pixels on the one-pixel border
//! ring of the symbol's polygon, after erosion and after removing text
//! areas. Wire keypoints are the places where a wire's pixels touch stroke
//! pixels owned by some other polygon.

use std::collections::BTreeSet;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::annotations::{PolygonAnnotation, Port, PrototypeLibrary};
use crate::geometry::{transform_prototype, Angle, BoundingBox, Footprint, Point, Polygon};
use crate::raster::{erode, BinaryMap};

pub const DEFAULT_EROSION_RADIUS: usize = 1;
pub const DEFAULT_CLUSTER_GAP: f64 = 3.0;

/// Largest port count solved by exhaustive permutation search.
const BRUTE_FORCE_LIMIT: usize = 6;

/// Pixels of the filled polygon that have a 4-neighbour outside the fill
/// or outside the frame.
pub fn border_ring(outline: &Polygon, width: usize, height: usize) -> Vec<(usize, usize)> {
    let fill = Footprint::new(outline, width, height);
    fill.pixels()
        .filter(|&(x, y)| {
            let (x, y) = (x as i64, y as i64);
            [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
                .iter()
                .any(|&(nx, ny)| nx < 0 || ny < 0 || !fill.contains(nx as usize, ny as usize))
        })
        .collect()
}

/// Groups pixels by their arc position along `outline`. Consecutive pixels
/// more than `gap` apart start a new group; a group running across the
/// outline's start is joined to the first one. Returns each group's
/// centroid of pixel centers, in traversal order.
pub fn cluster_along_outline(outline: &Polygon, pixels: &[(usize, usize)], gap: f64) -> Vec<Point> {
    if pixels.is_empty() {
        return Vec::new();
    }
    let mut keyed: Vec<(f64, (usize, usize))> = pixels
        .iter()
        .map(|&(x, y)| (outline.arc_position(Point::pixel_center(x, y)), (x, y)))
        .collect();
    keyed.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then((a.1 .1, a.1 .0).cmp(&(b.1 .1, b.1 .0)))
    });

    let mut groups: Vec<Vec<(usize, usize)>> = vec![vec![keyed[0].1]];
    for pair in keyed.windows(2) {
        if pair[1].0 - pair[0].0 > gap {
            groups.push(Vec::new());
        }
        groups.last_mut().expect("non-empty").push(pair[1].1);
    }
    let perimeter = outline.perimeter();
    let wrap = keyed[0].0 + perimeter - keyed[keyed.len() - 1].0;
    if groups.len() > 1 && wrap <= gap {
        let tail = groups.pop().expect("more than one group");
        groups[0].extend(tail);
    }
    groups
        .iter()
        .map(|g| {
            let n = g.len() as f64;
            let (sx, sy) = g.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| {
                (sx + x as f64 + 0.5, sy + y as f64 + 0.5)
            });
            Point::new(sx / n, sy / n)
        })
        .collect()
}

/// Eroded strokes with text areas removed; shared by all symbols of an image.
#[derive(Debug, Clone)]
pub struct KeypointSource {
    work: BinaryMap,
}

impl KeypointSource {
    pub fn new(
        map: &BinaryMap,
        text_polygons: &[PolygonAnnotation],
        erosion_radius: usize,
    ) -> Self {
        let mut work = erode(map, erosion_radius);
        let (w, h) = work.dims();
        for t in text_polygons {
            for (x, y) in Footprint::new(&t.outline, w, h).pixels() {
                work.set(x, y, false);
            }
        }
        Self { work }
    }

    pub fn strokes(&self) -> &BinaryMap {
        &self.work
    }

    pub fn keypoints(&self, symbol: &PolygonAnnotation, cluster_gap: f64) -> Vec<Point> {
        let (w, h) = self.work.dims();
        let hits: Vec<(usize, usize)> = border_ring(&symbol.outline, w, h)
            .into_iter()
            .filter(|&(x, y)| self.work.get(x, y))
            .collect();
        cluster_along_outline(&symbol.outline, &hits, cluster_gap)
    }
}

/// Terminal keypoints of one symbol. For many symbols on one image build a
/// [`KeypointSource`] once instead.
pub fn generate_keypoints(
    map: &BinaryMap,
    symbol: &PolygonAnnotation,
    text_polygons: &[PolygonAnnotation],
    erosion_radius: usize,
    cluster_gap: f64,
) -> Vec<Point> {
    KeypointSource::new(map, text_polygons, erosion_radius).keypoints(symbol, cluster_gap)
}

/// Contact points of a wire: stroke pixels outside the wire's raster that
/// touch it (8-neighbourhood), clustered along the wire outline.
pub fn wire_keypoints(wire: &PolygonAnnotation, map: &BinaryMap, cluster_gap: f64) -> Vec<Point> {
    let (w, h) = map.dims();
    let fill = Footprint::new(&wire.outline, w, h);
    let mut contacts = BTreeSet::new();
    for (x, y) in fill.pixels() {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if map.get_or_background(nx, ny) && !fill.contains(nx as usize, ny as usize) {
                    contacts.insert((ny as usize, nx as usize));
                }
            }
        }
    }
    let pixels: Vec<(usize, usize)> = contacts.into_iter().map(|(y, x)| (x, y)).collect();
    cluster_along_outline(&wire.outline, &pixels, cluster_gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignmentStatus {
    Verified,
    CountMismatch,
    UnverifiedNoRotation,
    NoPrototype,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortAssignment {
    /// Index of the symbol polygon in its document.
    pub symbol: usize,
    pub status: AssignmentStatus,
    /// Detected keypoints under their port names. Keypoints left without a
    /// port keep a `kp<i>` name, `i` being their detection index.
    pub pairs: Vec<Port>,
    /// Prototype ports placed on the bounding box.
    pub expected: Vec<Port>,
    /// Sum of keypoint-to-port distances over the named pairs.
    pub total_distance: f64,
}

impl PortAssignment {
    pub fn is_verified(&self) -> bool {
        self.status == AssignmentStatus::Verified
    }
}

/// Matches detected keypoints to the class prototype placed on `bbox`.
///
/// A missing rotation is treated as 0 and downgrades a successful match to
/// `UnverifiedNoRotation`. Differing counts give a greedy nearest-first
/// partial pairing with status `CountMismatch`.
pub fn assign_ports(
    symbol_index: usize,
    keypoints: &[Point],
    symbol: &PolygonAnnotation,
    bbox: &BoundingBox,
    rotation: Option<Angle>,
    library: &PrototypeLibrary,
) -> PortAssignment {
    let unnamed = |used: &[bool]| -> Vec<Port> {
        keypoints
            .iter()
            .enumerate()
            .filter(|(i, _)| !used.get(*i).copied().unwrap_or(false))
            .map(|(i, &p)| Port::new(format!("kp{i}"), p))
            .collect()
    };
    let Some(proto) = library.get(symbol.label.as_str()) else {
        return PortAssignment {
            symbol: symbol_index,
            status: AssignmentStatus::NoPrototype,
            pairs: unnamed(&[]),
            expected: Vec::new(),
            total_distance: 0.0,
        };
    };
    let unit: Vec<(String, Point)> = proto.iter().map(|p| (p.name.clone(), p.position)).collect();
    let placed = transform_prototype(&unit, bbox, rotation.unwrap_or_default());
    let expected: Vec<Port> = placed
        .iter()
        .map(|(n, p)| Port::new(n.clone(), *p))
        .collect();
    let targets: Vec<Point> = placed.iter().map(|(_, p)| *p).collect();

    if keypoints.len() != targets.len() {
        let (matches, total) = greedy_pairs(keypoints, &targets);
        let mut used = vec![false; keypoints.len()];
        let mut pairs = Vec::new();
        for (port, kp) in matches.iter().enumerate() {
            if let Some(k) = *kp {
                used[k] = true;
                pairs.push(Port::new(placed[port].0.clone(), keypoints[k]));
            }
        }
        pairs.extend(unnamed(&used));
        return PortAssignment {
            symbol: symbol_index,
            status: AssignmentStatus::CountMismatch,
            pairs,
            expected,
            total_distance: total,
        };
    }

    let (perm, total) = optimal_assignment(&targets, keypoints);
    PortAssignment {
        symbol: symbol_index,
        status: if rotation.is_some() {
            AssignmentStatus::Verified
        } else {
            AssignmentStatus::UnverifiedNoRotation
        },
        pairs: perm
            .iter()
            .enumerate()
            .map(|(port, &k)| Port::new(placed[port].0.clone(), keypoints[k]))
            .collect(),
        expected,
        total_distance: total,
    }
}

/// `perm[port] = keypoint` minimizing the summed distance, summed in port
/// order. Exhaustive search in lexicographic order for small sizes (first
/// minimum wins), Hungarian method above that.
pub fn optimal_assignment(ports: &[Point], keypoints: &[Point]) -> (Vec<usize>, f64) {
    assert_eq!(
        ports.len(),
        keypoints.len(),
        "assignment needs equal counts"
    );
    let n = ports.len();
    let cost = |perm: &[usize]| -> f64 {
        perm.iter()
            .enumerate()
            .map(|(p, &k)| ports[p].distance(keypoints[k]))
            .sum()
    };
    if n <= BRUTE_FORCE_LIMIT {
        let mut best: (Vec<usize>, f64) = ((0..n).collect(), f64::INFINITY);
        for perm in (0..n).permutations(n) {
            let c = cost(&perm);
            if c < best.1 {
                best = (perm, c);
            }
        }
        if n == 0 {
            best.1 = 0.0;
        }
        return best;
    }
    let matrix: Vec<Vec<f64>> = ports
        .iter()
        .map(|p| keypoints.iter().map(|k| p.distance(*k)).collect())
        .collect();
    let perm = hungarian(&matrix);
    let c = cost(&perm);
    (perm, c)
}

/// Square min-cost assignment; returns the column chosen for each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // potentials and matching use 1-based indices with 0 as a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[row_of[j] - 1] = j - 1;
    }
    out
}

/// Repeatedly pairs the closest remaining (port, keypoint); ties go to the
/// lower port, then the lower keypoint index.
fn greedy_pairs(keypoints: &[Point], ports: &[Point]) -> (Vec<Option<usize>>, f64) {
    let mut candidates: Vec<(f64, usize, usize)> = ports
        .iter()
        .enumerate()
        .flat_map(|(p, &pp)| {
            keypoints
                .iter()
                .enumerate()
                .map(move |(k, &kp)| (pp.distance(kp), p, k))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut port_to = vec![None; ports.len()];
    let mut kp_used = vec![false; keypoints.len()];
    let mut total = 0.0;
    for (d, p, k) in candidates {
        if port_to[p].is_none() && !kp_used[k] {
            port_to[p] = Some(k);
            kp_used[k] = true;
            total += d;
        }
    }
    (port_to, total)
}
