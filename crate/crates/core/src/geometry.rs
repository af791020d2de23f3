//! Polygon and point algebra.
//!
//! Coordinates are in the image frame: origin at the top-left corner of the
//! top-left pixel, `y` pointing down, pixel `(x, y)` covering
//! `[x, x+1) x [y, y+1)` with its center at `(x + 0.5, y + 0.5)`.
//!
//! Orientation is measured with the plain shoelace sum over the raw
//! coordinates: "counterclockwise" means positive [`Polygon::signed_area`].

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{connected_components, BinaryMap, Connectivity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Center of pixel `(x, y)`.
    pub fn pixel_center(x: usize, y: usize) -> Self {
        Self::new(x as f64 + 0.5, y as f64 + 0.5)
    }
}

/// `(b - a) x (c - a)`; positive when `a, b, c` turn counterclockwise.
pub fn cross(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Closest point on segment `ab` to `p`, as the segment parameter in `[0, 1]`.
pub fn project_onto_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return 0.0;
    }
    (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let t = project_onto_segment(p, a, b);
    p.distance(Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct BoundingBox {
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
}

impl TryFrom<RawBox> for BoundingBox {
    type Error = Error;
    fn try_from(r: RawBox) -> Result<Self> {
        BoundingBox::new(r.xmin, r.ymin, r.xmax, r.ymax)
    }
}

impl From<BoundingBox> for RawBox {
    fn from(b: BoundingBox) -> Self {
        RawBox {
            xmin: b.xmin,
            ymin: b.ymin,
            xmax: b.xmax,
            ymax: b.ymax,
        }
    }
}

impl BoundingBox {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        let finite = [xmin, ymin, xmax, ymax].iter().all(|v| v.is_finite());
        if !finite || xmin >= xmax || ymin >= ymax {
            return Err(Error::InvalidGeometry(format!(
                "bounding box ({xmin}, {ymin}, {xmax}, {ymax}) needs xmin < xmax and ymin < ymax"
            )));
        }
        Ok(Self {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    pub fn xmin(&self) -> f64 {
        self.xmin
    }
    pub fn ymin(&self) -> f64 {
        self.ymin
    }
    pub fn xmax(&self) -> f64 {
        self.xmax
    }
    pub fn ymax(&self) -> f64 {
        self.ymax
    }
    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }
    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Clamps into `[0, width] x [0, height]`; fails if nothing is left.
    pub fn clamped(&self, width: f64, height: f64) -> Result<Self> {
        Self::new(
            self.xmin.clamp(0.0, width),
            self.ymin.clamp(0.0, height),
            self.xmax.clamp(0.0, width),
            self.ymax.clamp(0.0, height),
        )
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            xmin: self.xmin + dx,
            ymin: self.ymin + dy,
            xmax: self.xmax + dx,
            ymax: self.ymax + dy,
        }
    }
}

/// Closed polygon; the last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl TryFrom<Vec<Point>> for Polygon {
    type Error = Error;
    fn try_from(v: Vec<Point>) -> Result<Self> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Point> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegenerateInput(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidGeometry(format!("non-finite vertex {p:?}")));
        }
        Ok(Self { vertices })
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self> {
        Self::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges as `(start, end)` pairs including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        self.edges()
            .map(|(a, b)| a.x * b.y - b.x * a.y)
            .sum::<f64>()
            / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    /// Area centroid; falls back to the vertex mean for zero-area outlines.
    pub fn centroid(&self) -> Point {
        let a = self.signed_area();
        if a.abs() < 1e-12 {
            let n = self.vertices.len() as f64;
            let (sx, sy) = self
                .vertices
                .iter()
                .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
            return Point::new(sx / n, sy / n);
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let f = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * f;
            cy += (p.y + q.y) * f;
        }
        Point::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    pub fn bounding_box(&self) -> Result<BoundingBox> {
        let (mut xmin, mut ymin) = (f64::INFINITY, f64::INFINITY);
        let (mut xmax, mut ymax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            xmin = xmin.min(p.x);
            ymin = ymin.min(p.y);
            xmax = xmax.max(p.x);
            ymax = ymax.max(p.y);
        }
        BoundingBox::new(xmin, ymin, xmax, ymax)
    }

    /// Distance from `p` to the nearest point of the outline.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Even-odd membership, boundary-inclusive.
    pub fn contains(&self, p: Point) -> bool {
        if self.boundary_distance(p) <= BOUNDARY_EPS {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y <= p.y) != (b.y <= p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Arc-length position of the outline point nearest to `p`, measured from
    /// the first vertex along the vertex order. Ties keep the earliest edge.
    pub fn arc_position(&self, p: Point) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut offset = 0.0;
        for (a, b) in self.edges() {
            let t = project_onto_segment(p, a, b);
            let q = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
            let d = p.distance(q);
            let len = a.distance(b);
            if d < best.0 - 1e-12 {
                best = (d, offset + t * len);
            }
            offset += len;
        }
        best.1
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }
}

const BOUNDARY_EPS: f64 = 1e-9;

/// Rotation in degrees, counterclockwise positive, normalized to `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Angle(f64);

impl From<f64> for Angle {
    fn from(d: f64) -> Self {
        Angle::degrees(d)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> Self {
        a.0
    }
}

impl Angle {
    pub fn degrees(d: f64) -> Self {
        let n = d.rem_euclid(360.0);
        // rem_euclid can round up to exactly 360 for tiny negative inputs
        Angle(if n >= 360.0 { 0.0 } else { n })
    }

    pub fn as_degrees(self) -> f64 {
        self.0
    }

    pub fn as_radians(self) -> f64 {
        self.0.to_radians()
    }
}

/// Directed pixel-boundary edge between lattice vertices, interior on the left.
type Lattice = (i64, i64);

/// Traces one outline per 8-connected stroke component, in the row-major
/// order of each component's first pixel.
///
/// Outlines run along pixel boundaries with positive signed area and start
/// at the top-left corner of the component's first pixel. Holes (4-connected
/// background enclosed by the component) are spliced into the outline through
/// zero-width bridges, so the even-odd rasterization of the returned polygon
/// reproduces the component pixel-exactly.
pub fn trace_contours(map: &BinaryMap) -> Vec<Polygon> {
    let labels = connected_components(map, Connectivity::Eight);
    let (w, h) = map.dims();
    let mut edges: Vec<Vec<(Lattice, Lattice)>> = vec![Vec::new(); labels.count()];
    let inside = |x: i64, y: i64, label: u32| {
        x >= 0
            && y >= 0
            && x < w as i64
            && y < h as i64
            && labels.label(x as usize, y as usize) == label
    };
    for y in 0..h {
        for x in 0..w {
            let l = labels.label(x, y);
            if l == 0 {
                continue;
            }
            let (xi, yi) = (x as i64, y as i64);
            let list = &mut edges[l as usize - 1];
            if !inside(xi, yi - 1, l) {
                list.push(((xi, yi), (xi + 1, yi)));
            }
            if !inside(xi + 1, yi, l) {
                list.push(((xi + 1, yi), (xi + 1, yi + 1)));
            }
            if !inside(xi, yi + 1, l) {
                list.push(((xi + 1, yi + 1), (xi, yi + 1)));
            }
            if !inside(xi - 1, yi, l) {
                list.push(((xi, yi + 1), (xi, yi)));
            }
        }
    }
    edges
        .into_iter()
        .map(|component| {
            let outline = outline_from_edges(component);
            Polygon::new(
                outline
                    .into_iter()
                    .map(|(x, y)| Point::new(x as f64, y as f64))
                    .collect(),
            )
            .expect("pixel outlines have at least 4 vertices")
        })
        .collect()
}

fn direction(a: Lattice, b: Lattice) -> Lattice {
    ((b.0 - a.0).signum(), (b.1 - a.1).signum())
}

fn outline_from_edges(edges: Vec<(Lattice, Lattice)>) -> Vec<Lattice> {
    // the first edge pushed is the top edge of the first pixel in scan order
    let start = edges[0].0;
    let mut outgoing: HashMap<Lattice, Vec<Lattice>> = HashMap::new();
    for &(a, b) in &edges {
        outgoing.entry(a).or_default().push(b);
    }

    // Split the edge set into cycles. Where two edges leave one vertex the
    // strokes touch diagonally; taking the rightmost turn keeps 8-connected
    // strokes on one cycle.
    let mut cycles: Vec<Vec<Lattice>> = Vec::new();
    let take_cycle = |from: Lattice, outgoing: &mut HashMap<Lattice, Vec<Lattice>>| {
        let mut cycle = vec![from];
        let mut prev = from;
        let mut cur = outgoing.get_mut(&from).unwrap().remove(0);
        while cur != from {
            cycle.push(cur);
            let incoming = direction(prev, cur);
            let outs = outgoing
                .get_mut(&cur)
                .expect("boundary edges form closed cycles");
            let pick = if outs.len() == 1 {
                0
            } else {
                // interior lies left of travel, (-dy, dx); right is (dy, -dx)
                let right = (incoming.1, -incoming.0);
                outs.iter()
                    .position(|&n| direction(cur, n) == right)
                    .unwrap_or(0)
            };
            prev = cur;
            cur = outs.remove(pick);
        }
        cycle
    };
    cycles.push(take_cycle(start, &mut outgoing));
    loop {
        let next_start = outgoing
            .iter()
            .filter(|(_, outs)| !outs.is_empty())
            .map(|(&v, _)| v)
            .min_by_key(|&(x, y)| (y, x));
        match next_start {
            Some(v) => cycles.push(take_cycle(v, &mut outgoing)),
            None => break,
        }
    }

    let mut merged = cycles.remove(0);
    // holes, topmost first, so each bridge lands on an already-merged cycle
    let mut holes: Vec<Vec<Lattice>> = cycles
        .into_iter()
        .map(|c| {
            let top = c
                .iter()
                .enumerate()
                .min_by_key(|(_, &(x, y))| (y, x))
                .map(|(i, _)| i)
                .unwrap();
            let mut rotated = c[top..].to_vec();
            rotated.extend_from_slice(&c[..top]);
            rotated
        })
        .collect();
    holes.sort_by_key(|c| (c[0].1, c[0].0));
    let mut on_outline: HashSet<Lattice> = merged.iter().copied().collect();
    for hole in holes {
        let v = hole[0];
        let w = (1..=v.1)
            .map(|k| (v.0, v.1 - k))
            .find(|p| on_outline.contains(p))
            .expect("every hole lies below part of the outer boundary");
        let position = merged.iter().position(|&p| p == w).unwrap();
        on_outline.extend(hole.iter().copied());
        let mut splice = Vec::with_capacity(hole.len() + 2);
        splice.extend_from_slice(&hole);
        splice.push(v);
        splice.push(w);
        merged.splice(position + 1..position + 1, splice);
    }
    compress_collinear(merged)
}

fn compress_collinear(cycle: Vec<Lattice>) -> Vec<Lattice> {
    let n = cycle.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let prev = cycle[(i + n - 1) % n];
        let cur = cycle[i];
        let next = cycle[(i + 1) % n];
        if i != 0 && direction(prev, cur) == direction(cur, next) {
            continue;
        }
        out.push(cur);
    }
    out
}

/// Convex hull by monotone chain: counterclockwise (positive signed area),
/// starting at the lexicographically smallest vertex, collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Result<Polygon> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "convex hull needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();

    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(Error::DegenerateInput("all points are collinear".into()));
    }
    Polygon::new(lower)
}

/// Douglas-Peucker simplification of a closed outline.
///
/// Exact consecutive duplicates are always removed. With `epsilon == 0` no
/// other vertex is touched; otherwise every dropped vertex lies within
/// `epsilon` of the simplified outline. At least 3 vertices survive.
pub fn simplify(poly: &Polygon, epsilon: f64) -> Polygon {
    let mut verts: Vec<Point> = Vec::with_capacity(poly.len());
    for &p in poly.vertices() {
        if verts.last() != Some(&p) {
            verts.push(p);
        }
    }
    while verts.len() > 1 && verts.first() == verts.last() {
        verts.pop();
    }
    if verts.len() < 3 {
        return poly.clone();
    }
    if epsilon <= 0.0 || verts.len() == 3 {
        return Polygon { vertices: verts };
    }

    let n = verts.len();
    let far = (1..n)
        .max_by(|&i, &j| {
            verts[0]
                .distance(verts[i])
                .total_cmp(&verts[0].distance(verts[j]))
        })
        .unwrap();
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[far] = true;
    let ring: Vec<Point> = verts
        .iter()
        .copied()
        .chain(std::iter::once(verts[0]))
        .collect();
    douglas_peucker(&ring, 0, far, epsilon, &mut keep);
    let mut tail_keep = vec![false; n + 1];
    douglas_peucker(&ring, far, n, epsilon, &mut tail_keep);
    for i in far..n {
        keep[i] |= tail_keep[i];
    }

    let mut kept: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    while kept.len() < 3 {
        // restore the vertex farthest from the current outline
        let current: Vec<Point> = kept.iter().map(|&i| verts[i]).collect();
        let best = (0..n)
            .filter(|i| !kept.contains(i))
            .max_by(|&i, &j| {
                outline_distance(&current, verts[i])
                    .total_cmp(&outline_distance(&current, verts[j]))
            })
            .unwrap();
        kept.push(best);
        kept.sort_unstable();
    }
    Polygon {
        vertices: kept.into_iter().map(|i| verts[i]).collect(),
    }
}

fn outline_distance(outline: &[Point], p: Point) -> f64 {
    let n = outline.len();
    (0..n)
        .map(|i| point_segment_distance(p, outline[i], outline[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn douglas_peucker(pts: &[Point], first: usize, last: usize, eps: f64, keep: &mut [bool]) {
    if last <= first + 1 {
        return;
    }
    let (a, b) = (pts[first], pts[last]);
    let (idx, dmax) = (first + 1..last)
        .map(|i| (i, point_segment_distance(pts[i], a, b)))
        .fold(
            (first, -1.0),
            |acc, cur| if cur.1 > acc.1 { cur } else { acc },
        );
    if dmax > eps {
        keep[idx] = true;
        douglas_peucker(pts, first, idx, eps, keep);
        douglas_peucker(pts, idx, last, eps, keep);
    }
}

/// Rectangle `[(xmin,ymin), (xmax,ymin), (xmax,ymax), (xmin,ymax)]`.
pub fn bbox_to_polygon(b: &BoundingBox) -> Polygon {
    Polygon {
        vertices: vec![
            Point::new(b.xmin, b.ymin),
            Point::new(b.xmax, b.ymin),
            Point::new(b.xmax, b.ymax),
            Point::new(b.xmin, b.ymax),
        ],
    }
}

/// Pixel-center sampling with the even-odd rule; centers lying on the
/// outline count as inside. Parts outside the frame are clipped.
pub fn rasterize(poly: &Polygon, width: usize, height: usize) -> BinaryMap {
    let mut out = BinaryMap::new(width, height);
    if width == 0 || height == 0 {
        return out;
    }
    let bb = match poly.bounding_box() {
        Ok(b) => (b.xmin, b.ymin, b.xmax, b.ymax),
        // zero-extent outlines still mark centers they pass through
        Err(_) => {
            let v = poly.vertices();
            let xs = v.iter().map(|p| p.x);
            let ys = v.iter().map(|p| p.y);
            (
                xs.clone().fold(f64::INFINITY, f64::min),
                ys.clone().fold(f64::INFINITY, f64::min),
                xs.fold(f64::NEG_INFINITY, f64::max),
                ys.fold(f64::NEG_INFINITY, f64::max),
            )
        }
    };
    let row_lo = ((bb.1 - 0.5).ceil().max(0.0)) as usize;
    let row_hi = (bb.3 - 0.5).floor();
    if row_hi < 0.0 {
        return out;
    }
    let row_hi = (row_hi as usize).min(height - 1);

    let edges: Vec<(Point, Point)> = poly.edges().collect();
    let mut crossings: Vec<f64> = Vec::new();
    for y in row_lo..=row_hi {
        let cy = y as f64 + 0.5;
        crossings.clear();
        for &(a, b) in &edges {
            if (a.y <= cy) != (b.y <= cy) {
                crossings.push(a.x + (cy - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        crossings.sort_by(f64::total_cmp);
        for pair in crossings.chunks_exact(2) {
            fill_span(&mut out, y, pair[0] - BOUNDARY_EPS, pair[1] + BOUNDARY_EPS);
        }
        // centers exactly on horizontal edges or vertices
        for &(a, b) in &edges {
            if (a.y - cy).abs() <= BOUNDARY_EPS && (b.y - cy).abs() <= BOUNDARY_EPS {
                fill_span(
                    &mut out,
                    y,
                    a.x.min(b.x) - BOUNDARY_EPS,
                    a.x.max(b.x) + BOUNDARY_EPS,
                );
            } else if (a.y - cy).abs() <= BOUNDARY_EPS {
                fill_span(&mut out, y, a.x - BOUNDARY_EPS, a.x + BOUNDARY_EPS);
            }
        }
    }
    out
}

fn fill_span(out: &mut BinaryMap, y: usize, lo: f64, hi: f64) {
    // pixel x is covered when lo <= x + 0.5 <= hi
    let first = (lo - 0.5).ceil().max(0.0);
    let last = (hi - 0.5).floor();
    if last < 0.0 || first > last {
        return;
    }
    let last = (last as usize).min(out.width() - 1);
    for x in first as usize..=last {
        out.set(x, y, true);
    }
}

/// Maps unit-frame port positions onto `target`: rotate about `(0.5, 0.5)`
/// by `rotation` (counterclockwise in raw coordinates), then scale and
/// translate the unit square onto the box.
pub fn transform_prototype<S: Clone>(
    ports: &[(S, Point)],
    target: &BoundingBox,
    rotation: Angle,
) -> Vec<(S, Point)> {
    let (sin, cos) = rotation.as_radians().sin_cos();
    ports
        .iter()
        .map(|(name, p)| {
            let (dx, dy) = (p.x - 0.5, p.y - 0.5);
            let u = 0.5 + dx * cos - dy * sin;
            let v = 0.5 + dx * sin + dy * cos;
            (
                name.clone(),
                Point::new(
                    target.xmin + u * target.width(),
                    target.ymin + v * target.height(),
                ),
            )
        })
        .collect()
}

/// Intersection over union of the rasterized pixel sets; 0 when both are empty.
pub fn iou(a: &Polygon, b: &Polygon, width: usize, height: usize) -> f64 {
    let ra = rasterize(a, width, height);
    let rb = rasterize(b, width, height);
    mask_iou(&ra, &rb)
}

pub(crate) fn mask_iou(a: &BinaryMap, b: &BinaryMap) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// A polygon rasterized into the smallest window of the frame that can hold
/// it. Lets per-polygon work scale with polygon size instead of image size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    x0: usize,
    y0: usize,
    mask: BinaryMap,
}

impl Footprint {
    /// Same pixel set as [`rasterize`] over a `width x height` frame.
    pub fn new(poly: &Polygon, width: usize, height: usize) -> Self {
        let v = poly.vertices();
        let lo = |f: fn(&Point) -> f64| v.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = |f: fn(&Point) -> f64| v.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let x0 = lo(|p| p.x).floor().clamp(0.0, width as f64) as usize;
        let y0 = lo(|p| p.y).floor().clamp(0.0, height as f64) as usize;
        let x1 = hi(|p| p.x).ceil().clamp(0.0, width as f64) as usize;
        let y1 = hi(|p| p.y).ceil().clamp(0.0, height as f64) as usize;
        let (w, h) = (x1.saturating_sub(x0), y1.saturating_sub(y0));
        // integer shifts are exact, so the sampled centers are unchanged
        let mask = rasterize(&poly.translated(-(x0 as f64), -(y0 as f64)), w, h);
        Self { x0, y0, mask }
    }

    pub fn wrap(x0: usize, y0: usize, mask: BinaryMap) -> Self {
        Self { x0, y0, mask }
    }

    pub fn x0(&self) -> usize {
        self.x0
    }

    pub fn y0(&self) -> usize {
        self.y0
    }

    pub fn mask(&self) -> &BinaryMap {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.count()
    }

    /// Membership in frame coordinates.
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0
            && y >= self.y0
            && x - self.x0 < self.mask.width()
            && y - self.y0 < self.mask.height()
            && self.mask.get(x - self.x0, y - self.y0)
    }

    /// Covered pixels in frame coordinates, row-major.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .stroke_pixels()
            .map(move |(x, y)| (x + self.x0, y + self.y0))
    }

    /// Sets every covered pixel of `target`.
    pub fn paint(&self, target: &mut BinaryMap) {
        for (x, y) in self.pixels() {
            if x < target.width() && y < target.height() {
                target.set(x, y, true);
            }
        }
    }

    /// The footprint restricted to stroke pixels of `map`.
    pub fn and(&self, map: &BinaryMap) -> Footprint {
        let mask = BinaryMap::from_fn(self.mask.width(), self.mask.height(), |x, y| {
            self.mask.get(x, y) && map.get(x + self.x0, y + self.y0)
        });
        Footprint::wrap(self.x0, self.y0, mask)
    }

    /// Whether the two windows overlap at all.
    pub fn windows_meet(&self, other: &Footprint) -> bool {
        self.x0 < other.x0 + other.mask.width()
            && other.x0 < self.x0 + self.mask.width()
            && self.y0 < other.y0 + other.mask.height()
            && other.y0 < self.y0 + self.mask.height()
    }

    /// Number of pixels covered by both.
    pub fn intersection_count(&self, other: &Footprint) -> usize {
        if !self.windows_meet(other) {
            return 0;
        }
        self.pixels().filter(|&(x, y)| other.contains(x, y)).count()
    }
}
