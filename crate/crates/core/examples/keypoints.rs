//! Terminal detection on symbol outlines at several erosion radii.

use circuitgraph::annotations::ClassRole;
use circuitgraph::ports::{KeypointSource, DEFAULT_CLUSTER_GAP};
use circuitgraph::refine::{coarse_from_bboxes, refine_all};
use circuitgraph::synth;

fn main() -> circuitgraph::Result<()> {
    let scene = synth::ladder(4, 4);
    let coarse = coarse_from_bboxes(&scene.annotations, &scene.map).polygons;
    let refined = refine_all(&coarse, &scene.map, 1.0)?.polygons;
    let texts: Vec<_> = refined
        .iter()
        .filter(|p| p.role() == ClassRole::Text)
        .cloned()
        .collect();

    for radius in 0..=2 {
        let source = KeypointSource::new(&scene.map, &texts, radius);
        println!("erosion radius {radius}:");
        for p in refined.iter().filter(|p| p.role() == ClassRole::Symbol) {
            let kps = source.keypoints(p, DEFAULT_CLUSTER_GAP);
            let shown: Vec<String> = kps
                .iter()
                .map(|k| format!("({:.1}, {:.1})", k.x, k.y))
                .collect();
            println!("  {:22} {}", p.label.as_str(), shown.join(" "));
        }
    }
    Ok(())
}
