//! Bounding boxes to stroke-tight polygons on a synthetic ladder circuit.

use circuitgraph::annotations::Refinement;
use circuitgraph::refine::{coarse_from_bboxes, refine_all, DEFAULT_EPSILON};
use circuitgraph::synth;

fn main() -> circuitgraph::Result<()> {
    let scene = synth::ladder(12, 6);
    let coarse = coarse_from_bboxes(&scene.annotations, &scene.map);
    println!(
        "{} coarse polygons, {} stroke overlaps",
        coarse.polygons.len(),
        coarse.overlaps.len()
    );

    let refined = refine_all(&coarse.polygons, &scene.map, DEFAULT_EPSILON)?;
    let r = &refined.report;
    println!(
        "refined {}, convex-hull fallback {}, empty {:?}",
        r.refined, r.hull_fallback, r.empty_interior
    );
    for (before, after) in coarse.polygons.iter().zip(&refined.polygons) {
        let note = match after.refinement {
            Refinement::HullFallback => " (strokes in several pieces)",
            _ => "",
        };
        println!(
            "{:24} area {:7.1} -> {:7.1}{note}",
            after.label.as_str(),
            before.outline.area(),
            after.outline.area()
        );
    }
    Ok(())
}
