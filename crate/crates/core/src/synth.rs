//! Seeded renderer for synthetic circuit images with known netlists.
//!
//! Strokes are 3 px wide and axis-aligned. Two-terminal symbols are drawn
//! in a 33x15 canonical frame with leads on the left and right edges, then
//! rotated in quarter turns. Every drawn element gets a bounding box, and
//! the expected nets follow from the wiring the renderer drew.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotations::{
    bbox_document_to_xml, BBoxAnnotation, ClassLabel, ImageAnnotationSet, PrototypeLibrary,
    CROSSOVER, JUNCTION, TEXT,
};
use crate::error::{Error, Result};
use crate::geometry::{bbox_to_polygon, rasterize, Angle, BoundingBox, Polygon};
use crate::graph::{Netlist, Terminal};
use crate::raster::{BinaryMap, GrayImage};

pub const STROKE_VALUE: u8 = 30;
pub const BACKGROUND_VALUE: u8 = 230;
const NOISE: i32 = 15;

const SYMBOL_LEN: i64 = 33;
const SYMBOL_WIDTH: i64 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Resistor,
    Capacitor,
    Inductor,
    Diode,
}

impl SymbolKind {
    pub const ALL: [SymbolKind; 4] = [Self::Resistor, Self::Capacitor, Self::Inductor, Self::Diode];

    pub fn label(self) -> &'static str {
        match self {
            Self::Resistor => "resistor",
            Self::Capacitor => "capacitor.unpolarized",
            Self::Inductor => "inductor",
            Self::Diode => "diode",
        }
    }

    /// Whether the drawing falls apart into several stroke regions.
    pub fn is_split(self) -> bool {
        self == Self::Capacitor
    }

    fn canonical(self) -> BinaryMap {
        let mut m = BinaryMap::new(SYMBOL_LEN as usize, SYMBOL_WIDTH as usize);
        let mut rect = |x0: i64, y0: i64, x1: i64, y1: i64| fill_rect(&mut m, x0, y0, x1, y1);
        match self {
            Self::Resistor => {
                rect(0, 6, 8, 9);
                rect(25, 6, 33, 9);
                rect(8, 2, 25, 5);
                rect(8, 10, 25, 13);
                rect(8, 2, 11, 13);
                rect(22, 2, 25, 13);
            }
            Self::Capacitor => {
                rect(0, 6, 13, 9);
                rect(13, 1, 16, 14);
                rect(18, 1, 21, 14);
                rect(21, 6, 33, 9);
            }
            Self::Inductor => {
                rect(0, 6, 6, 9);
                rect(27, 6, 33, 9);
                for xa in [6, 13, 20] {
                    rect(xa, 3, xa + 7, 6);
                    rect(xa, 3, xa + 3, 9);
                    rect(xa + 4, 3, xa + 7, 9);
                }
            }
            Self::Diode => {
                rect(0, 6, 10, 9);
                rect(23, 6, 33, 9);
                rect(21, 1, 24, 14);
                let tri = Polygon::from_coords(&[(10.0, 1.0), (21.0, 7.5), (10.0, 14.0)])
                    .expect("valid triangle");
                let t = rasterize(&tri, SYMBOL_LEN as usize, SYMBOL_WIDTH as usize);
                for (x, y) in t.stroke_pixels() {
                    m.set(x, y, true);
                }
            }
        }
        m
    }
}

fn fill_rect(m: &mut BinaryMap, x0: i64, y0: i64, x1: i64, y1: i64) {
    let (w, h) = (m.width() as i64, m.height() as i64);
    for y in y0.max(0)..y1.min(h) {
        for x in x0.max(0)..x1.min(w) {
            m.set(x as usize, y as usize, true);
        }
    }
}

/// Pixel position after `quarter` counterclockwise quarter turns of a
/// `w x h` frame (counterclockwise in raw image coordinates, matching
/// [`crate::geometry::transform_prototype`]).
fn rotate_pixel(x: i64, y: i64, w: i64, h: i64, quarter: u8) -> (i64, i64) {
    match quarter % 4 {
        0 => (x, y),
        1 => (h - 1 - y, x),
        2 => (w - 1 - x, h - 1 - y),
        _ => (y, w - 1 - x),
    }
}

/// Expected-net bookkeeping: union-find over named points.
#[derive(Default)]
struct Wiring {
    keys: HashMap<Key, usize>,
    parent: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Key {
    Terminal(usize, String),
    Node(String),
}

impl Wiring {
    fn id(&mut self, k: Key) -> usize {
        let next = self.parent.len();
        let id = *self.keys.entry(k).or_insert(next);
        if id == next {
            self.parent.push(next);
        }
        id
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn connect(&mut self, a: Key, b: Key) {
        let (a, b) = (self.id(a), self.id(b));
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }

    fn netlist(mut self) -> Netlist {
        let keys: Vec<(Key, usize)> = self.keys.clone().into_iter().collect();
        let mut groups: HashMap<usize, Vec<Terminal>> = HashMap::new();
        for (k, id) in keys {
            if let Key::Terminal(node, port) = k {
                let root = self.find(id);
                groups
                    .entry(root)
                    .or_default()
                    .push(Terminal::new(node, port));
            }
        }
        Netlist::canonical(groups.into_values().filter(|g| g.len() >= 2).collect())
    }
}

/// A placed two-terminal symbol.
#[derive(Debug, Clone)]
struct Placed {
    node: usize,
    /// (port name, first wire pixel just outside the box on the lead axis)
    ports: Vec<(String, (i64, i64))>,
}

impl Placed {
    /// Port whose anchor is smaller along the lead axis (left or top).
    fn near_end(&self) -> (String, (i64, i64)) {
        let (a, b) = (&self.ports[0], &self.ports[1]);
        if (a.1 .0 + a.1 .1) <= (b.1 .0 + b.1 .1) {
            a.clone()
        } else {
            b.clone()
        }
    }

    fn far_end(&self) -> (String, (i64, i64)) {
        let near = self.near_end();
        self.ports
            .iter()
            .find(|p| p.0 != near.0)
            .cloned()
            .expect("two ports")
    }
}

/// A rendered scene with everything a test needs to check the pipeline.
#[derive(Debug, Clone)]
pub struct Scene {
    pub image: GrayImage,
    /// Noise-free stroke mask the image was rendered from.
    pub map: BinaryMap,
    pub annotations: ImageAnnotationSet,
    pub netlist: Netlist,
    /// Per bounding box: whether its strokes form several regions.
    pub split: Vec<bool>,
    pub symbols: usize,
}

struct Builder {
    map: BinaryMap,
    set: ImageAnnotationSet,
    split: Vec<bool>,
    wiring: Wiring,
    library: PrototypeLibrary,
    symbols: usize,
}

impl Builder {
    fn new(id: &str, width: usize, height: usize) -> Self {
        Self {
            map: BinaryMap::new(width, height),
            set: ImageAnnotationSet::new(id, width, height),
            split: Vec::new(),
            wiring: Wiring::default(),
            library: PrototypeLibrary::builtin(),
            symbols: 0,
        }
    }

    fn annotate(
        &mut self,
        label: &str,
        [x0, y0, x1, y1]: [i64; 4],
        rotation: Option<f64>,
        text: Option<String>,
        split: bool,
    ) -> usize {
        let bbox =
            BoundingBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64).expect("positive box");
        self.set.bboxes.push(BBoxAnnotation {
            label: ClassLabel::new_unchecked(label),
            bbox,
            rotation: rotation.map(Angle::degrees),
            text,
        });
        self.split.push(split);
        self.set.bboxes.len() - 1
    }

    /// Draws a symbol with its lead axis through `(cx, cy)`.
    fn symbol(&mut self, kind: SymbolKind, cx: i64, cy: i64, quarter: u8) -> Placed {
        let canon = kind.canonical();
        let (w, h) = (SYMBOL_LEN, SYMBOL_WIDTH);
        let (bw, bh) = if quarter.is_multiple_of(2) {
            (w, h)
        } else {
            (h, w)
        };
        let (x0, y0) = (cx - bw / 2, cy - bh / 2);
        for (x, y) in canon.stroke_pixels() {
            let (rx, ry) = rotate_pixel(x as i64, y as i64, w, h, quarter);
            fill_rect(&mut self.map, x0 + rx, y0 + ry, x0 + rx + 1, y0 + ry + 1);
        }
        let node = self.annotate(
            kind.label(),
            [x0, y0, x0 + bw, y0 + bh],
            Some(90.0 * quarter as f64),
            None,
            kind.is_split(),
        );
        let proto = self
            .library
            .get(kind.label())
            .expect("synthetic classes have prototypes");
        let name_at = |u: f64| {
            proto
                .iter()
                .find(|p| p.position.x == u)
                .map(|p| p.name.clone())
                .expect("two-terminal prototype")
        };
        let ports = [(name_at(0.0), (-1, h / 2)), (name_at(1.0), (w, h / 2))]
            .into_iter()
            .map(|(name, (x, y))| {
                let (rx, ry) = rotate_pixel(x, y, w, h, quarter);
                (name, (x0 + rx, y0 + ry))
            })
            .collect();
        self.symbols += 1;
        Placed { node, ports }
    }

    /// Axis-aligned polyline through stroke centers.
    fn wire(&mut self, pts: &[(i64, i64)]) {
        for seg in pts.windows(2) {
            let ((ax, ay), (bx, by)) = (seg[0], seg[1]);
            debug_assert!(ax == bx || ay == by, "wires are axis-aligned");
            fill_rect(
                &mut self.map,
                ax.min(bx) - 1,
                ay.min(by) - 1,
                ax.max(bx) + 2,
                ay.max(by) + 2,
            );
        }
    }

    fn junction(&mut self, cx: i64, cy: i64) -> usize {
        fill_rect(&mut self.map, cx - 3, cy - 3, cx + 4, cy + 4);
        self.annotate(
            JUNCTION,
            [cx - 4, cy - 4, cx + 5, cy + 5],
            None,
            None,
            false,
        )
    }

    fn crossover(&mut self, cx: i64, cy: i64) -> usize {
        self.annotate(
            CROSSOVER,
            [cx - 5, cy - 5, cx + 6, cy + 6],
            None,
            None,
            false,
        )
    }

    /// One or two L-shaped glyphs starting at `(x, y)`.
    fn text(&mut self, x: i64, y: i64, glyphs: usize, content: &str) {
        for g in 0..glyphs as i64 {
            let gx = x + g * 9;
            fill_rect(&mut self.map, gx, y, gx + 3, y + 9);
            fill_rect(&mut self.map, gx, y + 6, gx + 6, y + 9);
        }
        let x1 = x + (glyphs as i64 - 1) * 9 + 6;
        self.annotate(
            TEXT,
            [x - 1, y - 1, x1 + 1, y + 10],
            None,
            Some(content.to_string()),
            glyphs > 1,
        );
    }

    fn term(p: &Placed, end: &(String, (i64, i64))) -> Key {
        Key::Terminal(p.node, end.0.clone())
    }

    fn finish(self, rng: &mut ChaCha8Rng) -> Scene {
        let (w, h) = self.map.dims();
        let values = self
            .map
            .bits()
            .iter()
            .map(|&b| {
                let base = if b { STROKE_VALUE } else { BACKGROUND_VALUE } as i32;
                (base + rng.random_range(-NOISE..=NOISE)) as u8
            })
            .collect();
        Scene {
            image: GrayImage::new(w, h, values).expect("non-empty canvas"),
            map: self.map,
            annotations: self.set,
            netlist: self.wiring.netlist(),
            split: self.split,
            symbols: self.symbols,
        }
    }
}

const RAIL_TOP: i64 = 40;
const RAIL_BOTTOM: i64 = 240;
const BRANCH_SPACING: i64 = 100;
const FIRST_BRANCH: i64 = 60;

/// A ladder: vertical branches between a top and a bottom rail, with
/// junction dots where interior branches meet a rail and optional series
/// symbols in the rails. `symbols` must lie in `2..=10`.
pub fn ladder(seed: u64, symbols: usize) -> Scene {
    assert!((2..=10).contains(&symbols), "ladders hold 2 to 10 symbols");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // b branches offer b + 2(b - 1) slots for the symbols beyond one per branch
    let min_branches = (symbols + 2).div_ceil(4).max(2);
    let branches = rng.random_range(min_branches..=symbols.min(5));

    // slots: second symbol per branch, then top and bottom rail gaps
    let mut slots: Vec<usize> = (0..branches + 2 * (branches - 1)).collect();
    let mut taken = vec![false; slots.len()];
    for _ in 0..symbols - branches {
        let pick = rng.random_range(0..slots.len());
        taken[slots.swap_remove(pick)] = true;
    }
    let stacked = |b: usize| taken[b];
    let top_series = |gap: usize| taken[branches + gap];
    let bottom_series = |gap: usize| taken[branches + branches - 1 + gap];

    let width = (FIRST_BRANCH + (branches as i64 - 1) * BRANCH_SPACING + 60) as usize;
    let height = (RAIL_BOTTOM + 40) as usize;
    let mut b = Builder::new(&format!("ladder_{seed:04}"), width, height);
    let bx = |i: usize| FIRST_BRANCH + i as i64 * BRANCH_SPACING;
    let kind = |rng: &mut ChaCha8Rng| SymbolKind::ALL[rng.random_range(0..4)];
    let vertical = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1 } else { 3 };
    let horizontal = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 0 } else { 2 };
    let mut text_count = 0;

    for i in 0..branches {
        let x = bx(i);
        let top = Key::Node(format!("T{i}"));
        let bottom = Key::Node(format!("B{i}"));
        let centers: &[i64] = if stacked(i) { &[95, 185] } else { &[140] };
        let mut prev: (Key, i64) = (top, RAIL_TOP);
        for &cy in centers {
            let k = kind(&mut rng);
            let s = b.symbol(k, x, cy, vertical(&mut rng));
            let (near, far) = (s.near_end(), s.far_end());
            b.wire(&[(x, prev.1), (x, near.1 .1)]);
            b.wiring.connect(prev.0, Builder::term(&s, &near));
            prev = (Builder::term(&s, &far), far.1 .1);
            if rng.random_bool(0.6) {
                let glyphs = rng.random_range(1..=2);
                text_count += 1;
                b.text(x + 14, cy - 4, glyphs, &format!("X{text_count}"));
            }
        }
        b.wire(&[(x, prev.1), (x, RAIL_BOTTOM)]);
        b.wiring.connect(prev.0, bottom);
    }

    for (rail_y, series, tag) in [(RAIL_TOP, true, "T"), (RAIL_BOTTOM, false, "B")] {
        for gap in 0..branches - 1 {
            let (xa, xb) = (bx(gap), bx(gap + 1));
            let a = Key::Node(format!("{tag}{gap}"));
            let z = Key::Node(format!("{tag}{}", gap + 1));
            let has_symbol = if series {
                top_series(gap)
            } else {
                bottom_series(gap)
            };
            if has_symbol {
                let k = kind(&mut rng);
                let s = b.symbol(k, (xa + xb) / 2, rail_y, horizontal(&mut rng));
                let (near, far) = (s.near_end(), s.far_end());
                b.wire(&[(xa, rail_y), (near.1 .0, rail_y)]);
                b.wire(&[(far.1 .0, rail_y), (xb, rail_y)]);
                b.wiring.connect(a, Builder::term(&s, &near));
                b.wiring.connect(Builder::term(&s, &far), z);
            } else {
                b.wire(&[(xa, rail_y), (xb, rail_y)]);
                b.wiring.connect(a, z);
            }
        }
        for i in 1..branches.saturating_sub(1) {
            b.junction(bx(i), rail_y);
        }
    }
    b.finish(&mut rng)
}

/// Four symbols around a crossover. The horizontal pair and the vertical
/// pair each form a net through the crossover; the outer leads meet a ring
/// wire through four junctions.
pub fn crossover(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (left, right, top, bottom) = (40, 360, 40, 300);
    let (cx, cy) = (200, 170);
    let mut b = Builder::new(&format!("crossover_{seed:04}"), 400, 340);
    let kind = |rng: &mut ChaCha8Rng| SymbolKind::ALL[rng.random_range(0..4)];

    let q = if rng.random_bool(0.5) { 0 } else { 2 };
    let a = b.symbol(kind(&mut rng), 110, cy, q);
    let q = if rng.random_bool(0.5) { 0 } else { 2 };
    let bb = b.symbol(kind(&mut rng), 290, cy, q);
    let q = if rng.random_bool(0.5) { 1 } else { 3 };
    let c = b.symbol(kind(&mut rng), cx, 95, q);
    let q = if rng.random_bool(0.5) { 1 } else { 3 };
    let d = b.symbol(kind(&mut rng), cx, 245, q);

    b.wire(&[
        (left, top),
        (right, top),
        (right, bottom),
        (left, bottom),
        (left, top),
    ]);
    let ring = || Key::Node("ring".into());

    let (an, af) = (a.near_end(), a.far_end());
    let (bn, bf) = (bb.near_end(), bb.far_end());
    let (cn, cf) = (c.near_end(), c.far_end());
    let (dn, df) = (d.near_end(), d.far_end());
    // straight through the crossing
    b.wire(&[(af.1 .0, cy), (bn.1 .0, cy)]);
    b.wire(&[(cx, cf.1 .1), (cx, dn.1 .1)]);
    b.wiring
        .connect(Builder::term(&a, &af), Builder::term(&bb, &bn));
    b.wiring
        .connect(Builder::term(&c, &cf), Builder::term(&d, &dn));
    // out to the ring
    b.wire(&[(an.1 .0, cy), (left, cy)]);
    b.wire(&[(bf.1 .0, cy), (right, cy)]);
    b.wire(&[(cx, cn.1 .1), (cx, top)]);
    b.wire(&[(cx, df.1 .1), (cx, bottom)]);
    for (p, end) in [(&a, &an), (&bb, &bf), (&c, &cn), (&d, &df)] {
        b.wiring.connect(Builder::term(p, end), ring());
    }
    b.junction(left, cy);
    b.junction(right, cy);
    b.junction(cx, top);
    b.junction(cx, bottom);
    b.crossover(cx, cy);
    b.finish(&mut rng)
}

/// Resistor and capacitor joined by one wire; the outer leads stay open.
pub fn two_symbol() -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut b = Builder::new("two_symbol", 200, 60);
    let r = b.symbol(SymbolKind::Resistor, 50, 30, 0);
    let c = b.symbol(SymbolKind::Capacitor, 150, 30, 0);
    let (rf, cn) = (r.far_end(), c.near_end());
    b.wire(&[(rf.1 .0, 30), (cn.1 .0, 30)]);
    b.wiring
        .connect(Builder::term(&r, &rf), Builder::term(&c, &cn));
    b.finish(&mut rng)
}

/// `count - 1` ladders with 2 to 10 symbols followed by one crossover scene.
pub fn corpus(seed: u64, count: usize) -> Vec<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Scene> = (0..count.saturating_sub(1))
        .map(|i| {
            let n = 2 + i % 9;
            ladder(rng.random::<u32>() as u64 % 10_000, n)
        })
        .collect();
    if count > 0 {
        out.push(crossover(rng.random::<u32>() as u64 % 10_000));
    }
    out
}

/// Writes scenes in the directory layout the batch runner reads:
/// `images/`, `binmaps/`, `bboxes/` and `expected/` (netlists).
pub fn write_dataset(scenes: &[Scene], root: &Path) -> Result<()> {
    for sub in ["images", "binmaps", "bboxes", "expected"] {
        let dir = root.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    for s in scenes {
        let id = &s.annotations.image_id;
        s.image
            .save(root.join("images").join(format!("{id}.png")))?;
        s.map.save(root.join("binmaps").join(format!("{id}.png")))?;
        let mut set = s.annotations.clone();
        set.image_id = format!("{id}.png");
        let xml = root.join("bboxes").join(format!("{id}.xml"));
        std::fs::write(&xml, bbox_document_to_xml(&set)).map_err(|e| Error::io(&xml, e))?;
        let net = root.join("expected").join(format!("{id}.netlist.txt"));
        std::fs::write(&net, s.netlist.to_text()).map_err(|e| Error::io(&net, e))?;
    }
    Ok(())
}

/// Bounding boxes of a scene as coarse rectangles, in annotation order.
pub fn coarse_outlines(scene: &Scene) -> Vec<Polygon> {
    scene
        .annotations
        .bboxes
        .iter()
        .map(|b| bbox_to_polygon(&b.bbox))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{connected_components, Connectivity};

    #[test]
    fn rotation_matches_prototype_transform() {
        // canonical left lead end (0, 7) of a 33x15 frame after a quarter
        // turn lands on the top edge, where the rotated "left" port sits
        assert_eq!(rotate_pixel(0, 7, 33, 15, 1), (7, 0));
        assert_eq!(rotate_pixel(32, 7, 33, 15, 2), (0, 7));
        for q in 0..4 {
            let (x, y) = rotate_pixel(5, 3, 33, 15, q);
            let back = (0..(4 - q) % 4).fold((x, y, q % 2 == 1), |(x, y, swapped), _| {
                let (w, h) = if swapped { (15, 33) } else { (33, 15) };
                let (nx, ny) = rotate_pixel(x, y, w, h, 1);
                (nx, ny, !swapped)
            });
            assert_eq!((back.0, back.1), (5, 3));
        }
    }

    #[test]
    fn canonical_symbols_have_expected_regions() {
        for k in SymbolKind::ALL {
            let m = k.canonical();
            let n = connected_components(&m, Connectivity::Eight).count();
            assert_eq!(n > 1, k.is_split(), "{k:?}");
            // nothing on the top or bottom row, leads reach both ends
            assert!((0..33).all(|x| !m.get(x, 0) && !m.get(x, 14)));
            assert!(m.get(0, 7) && m.get(32, 7));
        }
    }

    #[test]
    fn ladders_are_deterministic() {
        let a = ladder(7, 6);
        let b = ladder(7, 6);
        assert_eq!(a.image, b.image);
        assert_eq!(a.netlist, b.netlist);
        assert_eq!(a.symbols, 6);
        assert_eq!(a.split.len(), a.annotations.bboxes.len());
    }

    #[test]
    fn every_size_and_seed_renders() {
        for n in 2..=10 {
            for seed in 0..20 {
                let s = ladder(seed, n);
                assert_eq!(s.symbols, n);
                assert!(!s.netlist.nets.is_empty());
            }
        }
    }

    #[test]
    fn two_symbol_has_one_net() {
        let s = two_symbol();
        assert_eq!(s.netlist.to_text(), "n0.right n1.left\n");
    }

    #[test]
    fn crossover_nets() {
        let s = crossover(3);
        assert_eq!(s.netlist.nets.len(), 3);
        let sizes: Vec<usize> = s.netlist.nets.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 8);
    }
}
