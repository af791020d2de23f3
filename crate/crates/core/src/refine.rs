//! Coarse polygons, mask refinement, wire extraction and overlay rendering.

use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use crate::annotations::{
    ClassLabel, ClassRole, ClassTaxonomy, ImageAnnotationSet, PolygonAnnotation, Refinement,
};
use crate::error::{Error, Result};
use crate::geometry::{bbox_to_polygon, convex_hull, simplify, trace_contours, Footprint, Point};
use crate::raster::{connected_components, BinaryMap, Connectivity};

pub const DEFAULT_EPSILON: f64 = 1.0;
pub const DEFAULT_MIN_AREA: usize = 8;

/// Two polygons whose rasters share stroke pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Overlap {
    pub first: usize,
    pub second: usize,
    pub pixels: usize,
}

/// Pairs (in index order) whose rasterized areas intersect on stroke pixels.
pub fn stroke_overlaps(polygons: &[PolygonAnnotation], map: &BinaryMap) -> Vec<Overlap> {
    let (w, h) = map.dims();
    let prints: Vec<Footprint> = polygons
        .iter()
        .map(|p| Footprint::new(&p.outline, w, h).and(map))
        .collect();
    let mut out = Vec::new();
    for i in 0..prints.len() {
        for j in i + 1..prints.len() {
            let pixels = prints[i].intersection_count(&prints[j]);
            if pixels > 0 {
                out.push(Overlap {
                    first: i,
                    second: j,
                    pixels,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseResult {
    pub polygons: Vec<PolygonAnnotation>,
    pub overlaps: Vec<Overlap>,
}

/// One rectangle per bounding box, carrying over rotation and text.
pub fn coarse_from_bboxes(set: &ImageAnnotationSet, map: &BinaryMap) -> CoarseResult {
    let polygons: Vec<PolygonAnnotation> = set
        .bboxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut p = PolygonAnnotation::new(
                b.label.clone(),
                bbox_to_polygon(&b.bbox),
                Refinement::Coarse,
            );
            p.rotation = b.rotation;
            p.text = b.text.clone();
            p.source_bbox = Some(i);
            p
        })
        .collect();
    let overlaps = stroke_overlaps(&polygons, map);
    for o in &overlaps {
        log::warn!(
            "{}: polygons {} and {} share {} stroke pixels",
            set.image_id,
            o.first,
            o.second,
            o.pixels
        );
    }
    CoarseResult { polygons, overlaps }
}

/// Tightens `coarse` to the strokes it covers.
///
/// A single 8-connected stroke region yields its traced outline simplified
/// by `epsilon`; several regions yield the convex hull of their pixel
/// centers. Ports are dropped since they referred to the old outline.
pub fn refine_polygon(
    coarse: &PolygonAnnotation,
    map: &BinaryMap,
    epsilon: f64,
) -> Result<PolygonAnnotation> {
    let (w, h) = map.dims();
    let inside = Footprint::new(&coarse.outline, w, h).and(map);
    let local = inside.mask();
    let labels = connected_components(local, Connectivity::Eight);
    let (dx, dy) = (inside.x0() as f64, inside.y0() as f64);
    let (outline, refinement) = match labels.count() {
        0 => return Err(Error::EmptyInterior),
        1 => {
            let traced = trace_contours(local).swap_remove(0).translated(dx, dy);
            (simplify(&traced, epsilon), Refinement::Refined)
        }
        _ => {
            let centers: Vec<Point> = inside
                .pixels()
                .map(|(x, y)| Point::pixel_center(x, y))
                .collect();
            let hull = convex_hull(&centers).or_else(|_| {
                // all centers on one line: fall back to the pixel squares
                let corners: Vec<Point> = inside
                    .pixels()
                    .flat_map(|(x, y)| {
                        let (x, y) = (x as f64, y as f64);
                        [
                            Point::new(x, y),
                            Point::new(x + 1.0, y),
                            Point::new(x, y + 1.0),
                            Point::new(x + 1.0, y + 1.0),
                        ]
                    })
                    .collect();
                convex_hull(&corners)
            })?;
            (hull, Refinement::HullFallback)
        }
    };
    Ok(PolygonAnnotation {
        label: coarse.label.clone(),
        outline,
        refinement,
        ports: None,
        rotation: coarse.rotation,
        text: coarse.text.clone(),
        source_bbox: coarse.source_bbox,
    })
}

/// Counts per refinement outcome; serialized as the per-image report.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RefineReport {
    pub refined: usize,
    pub hull_fallback: usize,
    /// Indices of polygons without stroke pixels; they are kept unchanged.
    pub empty_interior: Vec<usize>,
    /// Wire polygons passed through untouched.
    pub passed_through: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineResult {
    pub polygons: Vec<PolygonAnnotation>,
    pub report: RefineReport,
}

/// Refines every non-wire polygon; output order equals input order.
pub fn refine_all(
    polygons: &[PolygonAnnotation],
    map: &BinaryMap,
    epsilon: f64,
) -> Result<RefineResult> {
    let mut report = RefineReport::default();
    let mut out = Vec::with_capacity(polygons.len());
    for (i, p) in polygons.iter().enumerate() {
        if p.role() == ClassRole::Wire {
            report.passed_through += 1;
            out.push(p.clone());
            continue;
        }
        match refine_polygon(p, map, epsilon) {
            Ok(r) => {
                match r.refinement {
                    Refinement::HullFallback => report.hull_fallback += 1,
                    _ => report.refined += 1,
                }
                out.push(r);
            }
            Err(Error::EmptyInterior) => {
                log::warn!("polygon {i} ({}) covers no stroke pixels", p.label);
                report.empty_interior.push(i);
                out.push(p.clone());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RefineResult {
        polygons: out,
        report,
    })
}

/// Stroke pixels not covered by any of `polygons`.
pub fn residual_strokes(map: &BinaryMap, polygons: &[PolygonAnnotation]) -> BinaryMap {
    let (w, h) = map.dims();
    let mut covered = BinaryMap::new(w, h);
    for p in polygons {
        Footprint::new(&p.outline, w, h).paint(&mut covered);
    }
    BinaryMap::from_fn(w, h, |x, y| map.get(x, y) && !covered.get(x, y))
}

/// One `wire` polygon per 8-connected residual region of at least
/// `min_area` pixels, in row-major order of each region's first pixel.
pub fn generate_wire_polygons(
    map: &BinaryMap,
    polygons: &[PolygonAnnotation],
    epsilon: f64,
    min_area: usize,
) -> Vec<PolygonAnnotation> {
    let residual = residual_strokes(map, polygons);
    let labels = connected_components(&residual, Connectivity::Eight);
    let sizes = labels.component_sizes();
    let (w, h) = residual.dims();
    let kept = BinaryMap::from_fn(w, h, |x, y| {
        let l = labels.label(x, y);
        l > 0 && sizes[l as usize - 1] >= min_area
    });
    trace_contours(&kept)
        .into_iter()
        .map(|outline| {
            PolygonAnnotation::new(
                ClassLabel::wire(),
                simplify(&outline, epsilon),
                Refinement::WireAuto,
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// semantic overlay

pub const BACKGROUND_INDEX: u8 = 0;
pub const WIRE_INDEX: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LegendEntry {
    pub index: u8,
    pub class: String,
    pub color: String,
}

/// Palette-indexed rendering of a binary map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    indices: Vec<u8>,
    palette: Vec<[u8; 3]>,
    classes: Vec<String>,
    /// Stroke pixels claimed by more than one polygon.
    pub contested_pixels: usize,
}

impl SemanticMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn index(&self, x: usize, y: usize) -> u8 {
        self.indices[y * self.width + x]
    }

    pub fn class_at(&self, x: usize, y: usize) -> &str {
        &self.classes[self.index(x, y) as usize]
    }

    pub fn color_at(&self, x: usize, y: usize) -> [u8; 3] {
        self.palette[self.index(x, y) as usize]
    }

    pub fn legend(&self) -> Vec<LegendEntry> {
        self.classes
            .iter()
            .zip(&self.palette)
            .enumerate()
            .map(|(i, (c, rgb))| LegendEntry {
                index: i as u8,
                class: c.clone(),
                color: format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2]),
            })
            .collect()
    }

    pub fn legend_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.legend()).expect("plain data serializes");
        s.push('\n');
        s
    }

    /// Writes an indexed PNG and a `<stem>.legend.json` sidecar next to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc =
            png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(self.palette.iter().flatten().copied().collect::<Vec<u8>>());
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Encode(e.to_string()))?;
        writer
            .write_image_data(&self.indices)
            .map_err(|e| Error::Encode(e.to_string()))?;
        writer.finish().map_err(|e| Error::Encode(e.to_string()))?;
        let legend = legend_path(path);
        std::fs::write(&legend, self.legend_json()).map_err(|e| Error::io(&legend, e))
    }
}

pub fn legend_path(image: &Path) -> std::path::PathBuf {
    let stem = image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    image.with_file_name(format!("{stem}.legend.json"))
}

/// Fixed color for palette slot `index`; slots 0 and 1 are background and wire.
pub fn palette_color(index: usize) -> [u8; 3] {
    match index {
        0 => [255, 255, 255],
        1 => [40, 40, 40],
        i => {
            // golden-angle hue walk keeps neighbouring classes apart
            let hue = ((i - 2) as f64 * 137.507_764) % 360.0;
            let sat = if i % 2 == 0 { 0.75 } else { 0.55 };
            hsv_to_rgb(hue, sat, 0.85)
        }
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |f: f64| ((f + m) * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}

/// Colors stroke pixels by the class of the first polygon covering them;
/// uncovered strokes and wire polygons get the wire color.
pub fn render_semantic_map(
    map: &BinaryMap,
    polygons: &[PolygonAnnotation],
    taxonomy: &ClassTaxonomy,
) -> Result<SemanticMap> {
    let mut classes = vec![
        "background".to_string(),
        crate::annotations::WIRE.to_string(),
    ];
    classes.extend(
        taxonomy
            .names()
            .iter()
            .filter(|n| n.as_str() != crate::annotations::WIRE)
            .cloned(),
    );
    if classes.len() > 256 {
        return Err(Error::Validation(format!(
            "{} classes do not fit an 8-bit palette",
            classes.len()
        )));
    }
    let palette: Vec<[u8; 3]> = (0..classes.len()).map(palette_color).collect();
    let slot = |label: &ClassLabel| -> Result<u8> {
        if label.role() == ClassRole::Wire {
            return Ok(WIRE_INDEX);
        }
        classes
            .iter()
            .position(|c| c == label.as_str())
            .map(|i| i as u8)
            .ok_or_else(|| Error::UnknownClass(label.to_string()))
    };

    let (w, h) = map.dims();
    let mut indices: Vec<u8> = map
        .bits()
        .iter()
        .map(|&b| if b { WIRE_INDEX } else { BACKGROUND_INDEX })
        .collect();
    let mut owned = vec![false; w * h];
    let mut contested = 0;
    for p in polygons {
        let idx = slot(&p.label)?;
        for (x, y) in Footprint::new(&p.outline, w, h).pixels() {
            let i = y * w + x;
            if !map.bits()[i] {
                continue;
            }
            if owned[i] {
                contested += 1;
            } else {
                owned[i] = true;
                indices[i] = idx;
            }
        }
    }
    if contested > 0 {
        log::warn!("{contested} stroke pixels are claimed by several polygons; first listed wins");
    }
    Ok(SemanticMap {
        width: w,
        height: h,
        indices,
        palette,
        classes,
        contested_pixels: contested,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::BBoxAnnotation;
    use crate::geometry::{rasterize, BoundingBox, Polygon};

    fn rect(label: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> PolygonAnnotation {
        PolygonAnnotation::new(
            ClassLabel::new_unchecked(label),
            bbox_to_polygon(&BoundingBox::new(x0, y0, x1, y1).unwrap()),
            Refinement::Coarse,
        )
    }

    #[test]
    fn coarse_overlap_report() {
        let map = BinaryMap::from_ascii(&["##########", "##########"]);
        let mut set = ImageAnnotationSet::new("x", 10, 2);
        for (a, b) in [(0.0, 4.0), (6.0, 10.0), (3.0, 7.0)] {
            set.bboxes.push(BBoxAnnotation {
                label: ClassLabel::new_unchecked("resistor"),
                bbox: BoundingBox::new(a, 0.0, b, 2.0).unwrap(),
                rotation: None,
                text: None,
            });
        }
        let r = coarse_from_bboxes(&set, &map);
        assert_eq!(r.polygons.len(), 3);
        assert_eq!(r.polygons[2].source_bbox, Some(2));
        // oracle: shared columns times rows, counted by enumeration
        let count = |a: (usize, usize), b: (usize, usize)| {
            (0..10)
                .filter(|&x| x >= a.0 && x < a.1 && x >= b.0 && x < b.1)
                .count()
                * 2
        };
        assert_eq!(
            r.overlaps,
            vec![
                Overlap {
                    first: 0,
                    second: 2,
                    pixels: count((0, 4), (3, 7))
                },
                Overlap {
                    first: 1,
                    second: 2,
                    pixels: count((6, 10), (3, 7))
                },
            ]
        );
        let empty = ImageAnnotationSet::new("e", 10, 2);
        assert!(coarse_from_bboxes(&empty, &map).polygons.is_empty());
    }

    #[test]
    fn refine_single_blob_is_exact() {
        let map = BinaryMap::from_ascii(&[
            "..........",
            "..###.....",
            "..#.##....",
            "..####....",
            "..........",
        ]);
        let r = refine_polygon(&rect("resistor", 0.0, 0.0, 10.0, 5.0), &map, 0.0).unwrap();
        assert_eq!(r.refinement, Refinement::Refined);
        assert_eq!(rasterize(&r.outline, 10, 5), map);
        // idempotent
        let again = refine_polygon(&r, &map, 0.0).unwrap();
        assert_eq!(rasterize(&again.outline, 10, 5), map);
    }

    #[test]
    fn refine_split_blobs_falls_back_to_hull() {
        let map = BinaryMap::from_ascii(&["##....##", "##....##", "........"]);
        let r = refine_polygon(
            &rect("capacitor.unpolarized", 0.0, 0.0, 8.0, 3.0),
            &map,
            1.0,
        )
        .unwrap();
        assert_eq!(r.refinement, Refinement::HullFallback);
        for (x, y) in map.stroke_pixels() {
            assert!(r.outline.contains(Point::pixel_center(x, y)));
        }
        // collinear centers still give an area
        let line = BinaryMap::from_ascii(&["#.#.#"]);
        let r = refine_polygon(&rect("resistor", 0.0, 0.0, 5.0, 1.0), &line, 1.0).unwrap();
        assert_eq!(r.refinement, Refinement::HullFallback);
        assert_eq!(rasterize(&r.outline, 5, 1).count(), 5);
    }

    #[test]
    fn refine_blank_is_empty_interior() {
        let map = BinaryMap::new(6, 6);
        assert!(matches!(
            refine_polygon(&rect("resistor", 1.0, 1.0, 4.0, 4.0), &map, 1.0),
            Err(Error::EmptyInterior)
        ));
        let out = refine_all(&[rect("resistor", 1.0, 1.0, 4.0, 4.0)], &map, 1.0).unwrap();
        assert_eq!(out.report.empty_interior, vec![0]);
        assert_eq!(out.polygons.len(), 1);
    }

    #[test]
    fn refined_stays_inside_parent() {
        let map = BinaryMap::from_ascii(&["#########", "#########", "#########"]);
        let coarse = rect("resistor", 2.0, 0.0, 6.0, 3.0);
        let r = refine_polygon(&coarse, &map, 0.0).unwrap();
        let parent = rasterize(&coarse.outline, 9, 3);
        let child = rasterize(&r.outline, 9, 3);
        assert!(child.stroke_pixels().all(|(x, y)| parent.get(x, y)));
    }

    #[test]
    fn wires_from_residual() {
        let line = BinaryMap::from_ascii(&["............", ".##########.", "............"]);
        let wires = generate_wire_polygons(&line, &[], 0.0, 1);
        assert_eq!(wires.len(), 1);
        assert_eq!(rasterize(&wires[0].outline, 12, 3), line);
        assert_eq!(wires[0].label.as_str(), "wire");

        let symbol = rect("resistor", 4.0, 0.0, 8.0, 3.0);
        let wires = generate_wire_polygons(&line, std::slice::from_ref(&symbol), 0.0, 1);
        assert_eq!(wires.len(), 2);
        let a = rasterize(&wires[0].outline, 12, 3);
        let b = rasterize(&wires[1].outline, 12, 3);
        assert_eq!(a.count() + b.count(), 6);
        assert!(a.stroke_pixels().all(|(x, y)| !b.get(x, y)));

        // min_area drops the short stub
        let wires = generate_wire_polygons(&line, &[rect("resistor", 3.0, 0.0, 11.0, 3.0)], 0.0, 2);
        assert_eq!(wires.len(), 1);
        let all = rect("resistor", 0.0, 0.0, 12.0, 3.0);
        assert!(generate_wire_polygons(&line, &[all], 0.0, 1).is_empty());
    }

    #[test]
    fn semantic_map_ownership() {
        let tax = ClassTaxonomy::builtin();
        let map = BinaryMap::from_ascii(&["######", "......"]);
        let plain = render_semantic_map(&map, &[], &tax).unwrap();
        assert!((0..6).all(|x| plain.class_at(x, 0) == "wire"));
        assert_eq!(plain.class_at(0, 1), "background");

        let polys = [
            rect("resistor", 0.0, 0.0, 4.0, 2.0),
            rect("diode", 2.0, 0.0, 6.0, 2.0),
        ];
        let m = render_semantic_map(&map, &polys, &tax).unwrap();
        let owners: Vec<&str> = (0..6).map(|x| m.class_at(x, 0)).collect();
        assert_eq!(
            owners,
            ["resistor", "resistor", "resistor", "resistor", "diode", "diode"]
        );
        assert_eq!(m.contested_pixels, 2);
        assert_eq!(m.class_at(1, 1), "background");

        let unknown = [PolygonAnnotation::new(
            ClassLabel::new_unchecked("gizmo"),
            Polygon::from_coords(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]).unwrap(),
            Refinement::Coarse,
        )];
        assert!(render_semantic_map(&map, &unknown, &tax).is_err());
    }

    #[test]
    fn palette_is_distinct() {
        let tax = ClassTaxonomy::builtin();
        let colors: std::collections::HashSet<[u8; 3]> =
            (0..tax.len() + 2).map(palette_color).collect();
        assert_eq!(colors.len(), tax.len() + 2);
    }

    #[test]
    fn overlay_writes_png_and_legend() {
        let dir = tempfile::tempdir().unwrap();
        let map = BinaryMap::from_ascii(&["##..", "..##"]);
        let m = render_semantic_map(
            &map,
            &[rect("resistor", 0.0, 0.0, 2.0, 1.0)],
            &ClassTaxonomy::builtin(),
        )
        .unwrap();
        let out = dir.path().join("o.png");
        m.save(&out).unwrap();
        let decoded = image::open(&out).unwrap().to_rgb8();
        assert_eq!(decoded.get_pixel(0, 0).0, m.color_at(0, 0));
        assert_eq!(decoded.get_pixel(3, 1).0, palette_color(1));
        let legend = std::fs::read_to_string(dir.path().join("o.legend.json")).unwrap();
        assert!(legend.contains("\"resistor\""));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn map() -> impl Strategy<Value = BinaryMap> {
            (4usize..20, 4usize..20).prop_flat_map(|(w, h)| {
                proptest::collection::vec(prop::bool::weighted(0.4), w * h)
                    .prop_map(move |bits| BinaryMap::from_bits(w, h, bits).unwrap())
            })
        }

        proptest! {
            #[test]
            fn refinement_is_idempotent_and_stays_inside(
                m in map(),
                (a, b, c, d) in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
            ) {
                let (w, h) = m.dims();
                let (x0, x1) = (a.min(b) * w as f64, a.max(b) * w as f64 + 1.0);
                let (y0, y1) = (c.min(d) * h as f64, c.max(d) * h as f64 + 1.0);
                let coarse = rect("resistor", x0, y0, x1, y1);
                let Ok(once) = refine_polygon(&coarse, &m, 0.0) else {
                    return Ok(());
                };
                let twice = refine_polygon(&once, &m, 0.0).unwrap();
                prop_assert_eq!(&twice.outline, &once.outline);
                prop_assert_eq!(twice.refinement, once.refinement);
                if once.refinement == Refinement::Refined {
                    let parent = rasterize(&coarse.outline, w, h);
                    let child = rasterize(&once.outline, w, h);
                    prop_assert!(child.stroke_pixels().all(|(x, y)| parent.get(x, y)));
                }
            }

            #[test]
            fn wire_polygons_are_pairwise_disjoint(m in map(), min_area in 1usize..4) {
                let (w, h) = m.dims();
                let wires = generate_wire_polygons(&m, &[], 0.0, min_area);
                let mut seen = BinaryMap::new(w, h);
                for wire in &wires {
                    let r = rasterize(&wire.outline, w, h);
                    prop_assert!(r.count() >= min_area);
                    prop_assert!(r.stroke_pixels().all(|(x, y)| m.get(x, y) && !seen.get(x, y)));
                    seen.union_with(&r).unwrap();
                }
            }
        }
    }
}
