//! Batch run over generated circuits, checked against their known nets.

use circuitgraph::annotations::PrototypeLibrary;
use circuitgraph::graph::compare_netlists;
use circuitgraph::pipeline::{binarize_stage, run, Config};
use circuitgraph::synth;
use rayon::prelude::*;

fn main() -> circuitgraph::Result<()> {
    let scenes = synth::corpus(42, 12);
    let library = PrototypeLibrary::builtin();
    let config = Config::default();

    let results: Vec<_> = scenes
        .par_iter()
        .map(|s| {
            let map = binarize_stage(&s.image, &config);
            run(&s.annotations, &map, &library, &config).map(|o| (s, o))
        })
        .collect::<circuitgraph::Result<_>>()?;

    for (scene, out) in &results {
        let score = compare_netlists(&out.netlist, &scene.netlist);
        println!(
            "{:16} {:2} symbols {:2} nets  net f1 {:.3}",
            scene.annotations.image_id,
            scene.symbols,
            out.netlist.nets.len(),
            score.f1
        );
    }
    Ok(())
}
