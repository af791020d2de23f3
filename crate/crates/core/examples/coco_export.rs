//! Detector-format round trip: polygons with ports out, predictions back in.

use circuitgraph::annotations::{ClassTaxonomy, PredictionDocument, PrototypeLibrary};
use circuitgraph::pipeline::{run, Config};
use circuitgraph::synth;

fn main() -> circuitgraph::Result<()> {
    let scene = synth::ladder(5, 4);
    let library = PrototypeLibrary::builtin();
    let taxonomy = ClassTaxonomy::builtin();
    let out = run(&scene.annotations, &scene.map, &library, &Config::default())?;

    let slots = library.max_ports();
    let doc = PredictionDocument::from_polygon_document(&out.document, &taxonomy, &library, slots);
    println!(
        "{} instances, {slots} keypoint slots each",
        doc.annotations.len()
    );

    let back = doc.to_polygon_document(&taxonomy, 0.0)?;
    println!(
        "read back {} polygons ({} degenerate)",
        back.polygons.len(),
        back.degenerate.len()
    );
    let path = std::env::temp_dir().join("circuitgraph_predictions.json");
    std::fs::write(&path, doc.to_json()).expect("temp dir is writable");
    println!("wrote {}", path.display());
    Ok(())
}
