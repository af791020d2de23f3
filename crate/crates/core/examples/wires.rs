//! Wire polygons from the strokes no annotated symbol covers.

use circuitgraph::refine::{
    coarse_from_bboxes, generate_wire_polygons, refine_all, residual_strokes,
};
use circuitgraph::synth;

fn main() -> circuitgraph::Result<()> {
    let scene = synth::crossover(1);
    let coarse = coarse_from_bboxes(&scene.annotations, &scene.map);
    let refined = refine_all(&coarse.polygons, &scene.map, 1.0)?.polygons;

    let residual = residual_strokes(&scene.map, &refined);
    println!(
        "{} of {} stroke pixels belong to wires",
        residual.count(),
        scene.map.count()
    );

    let wires = generate_wire_polygons(&scene.map, &refined, 1.0, 8);
    println!("{} wire polygons", wires.len());
    for (i, w) in wires.iter().enumerate() {
        let b = w.outline.bounding_box()?;
        println!(
            "wire {i}: {} vertices, box ({}, {})..({}, {})",
            w.outline.vertices().len(),
            b.xmin(),
            b.ymin(),
            b.xmax(),
            b.ymax()
        );
    }
    Ok(())
}
