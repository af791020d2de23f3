//! Full chain on a crossover circuit, from boxes to exported nets.

use circuitgraph::annotations::PrototypeLibrary;
use circuitgraph::graph::ExportFormat;
use circuitgraph::pipeline::{run, Config};
use circuitgraph::synth;

fn main() -> circuitgraph::Result<()> {
    let scene = synth::crossover(2);
    let out = run(
        &scene.annotations,
        &scene.map,
        &PrototypeLibrary::builtin(),
        &Config::default(),
    )?;

    println!(
        "{} nodes, {} wire edges",
        out.graph.nodes.len(),
        out.graph.edges.len()
    );
    for pairing in &out.report.netlist.crossovers {
        println!(
            "crossover n{} pairs wires {:?}",
            pairing.node, pairing.pairs
        );
    }
    print!("nets:\n{}", out.netlist.to_text());
    println!("matches the drawing: {}", out.netlist == scene.netlist);

    let dir = std::env::temp_dir();
    for (format, name) in [
        (ExportFormat::Json, "graph.json"),
        (ExportFormat::GraphMl, "graph.graphml"),
    ] {
        let path = dir.join(format!("circuitgraph_{name}"));
        std::fs::write(&path, out.graph.export(format)).expect("temp dir is writable");
        println!("wrote {}", path.display());
    }
    Ok(())
}
