//! Outline tracing and its exact raster round trip.

use circuitgraph::geometry::{convex_hull, rasterize, simplify, trace_contours, Point};
use circuitgraph::raster::BinaryMap;

fn main() {
    let map = BinaryMap::from_ascii(&[
        "..........",
        ".#####....",
        ".#...#..#.",
        ".#####.###",
        "........#.",
    ]);
    let outlines = trace_contours(&map);
    println!("{} components", outlines.len());
    for (i, outline) in outlines.iter().enumerate() {
        let filled = rasterize(outline, map.width(), map.height());
        println!(
            "#{i}: {} vertices, area {}, perimeter {}, {} pixels after rasterizing",
            outline.vertices().len(),
            outline.area(),
            outline.perimeter(),
            filled.count()
        );
        let coarse = simplify(outline, 1.0);
        println!("    simplified to {} vertices", coarse.vertices().len());
    }

    // the rings round trip exactly, holes included
    let mut union = BinaryMap::new(map.width(), map.height());
    for outline in &outlines {
        union
            .union_with(&rasterize(outline, map.width(), map.height()))
            .expect("same size");
    }
    println!("round trip exact: {}", union == map);

    let centers: Vec<Point> = map
        .stroke_pixels()
        .map(|(x, y)| Point::pixel_center(x, y))
        .collect();
    match convex_hull(&centers) {
        Ok(hull) => println!(
            "hull of all pixel centers: {} vertices",
            hull.vertices().len()
        ),
        Err(e) => println!("no hull: {e}"),
    }
}
