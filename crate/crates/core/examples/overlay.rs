//! Class-colored rendering of a processed circuit with its legend.

use circuitgraph::annotations::{ClassTaxonomy, PrototypeLibrary};
use circuitgraph::pipeline::{run, Config};
use circuitgraph::refine::{legend_path, render_semantic_map};
use circuitgraph::synth;

fn main() -> circuitgraph::Result<()> {
    let scene = synth::ladder(8, 8);
    let out = run(
        &scene.annotations,
        &scene.map,
        &PrototypeLibrary::builtin(),
        &Config::default(),
    )?;
    let overlay = render_semantic_map(
        &scene.map,
        &out.document.polygons,
        &ClassTaxonomy::builtin(),
    )?;

    for entry in overlay.legend() {
        println!("{:3} {:24} {:?}", entry.index, entry.class, entry.color);
    }
    println!(
        "pixels claimed by more than one polygon: {}",
        overlay.contested_pixels
    );

    let path = std::env::temp_dir().join("circuitgraph_overlay.png");
    overlay.save(&path)?;
    println!(
        "wrote {} and {}",
        path.display(),
        legend_path(&path).display()
    );
    Ok(())
}
