//! Dataset totals. Pass a dataset root, or a small synthetic one is written.
//!
//!     cargo run --example dataset_stats -- /data/circuits

use circuitgraph::evaluation::dataset_stats;
use circuitgraph::synth;

fn main() -> circuitgraph::Result<()> {
    let root = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let dir = std::env::temp_dir().join("circuitgraph_stats_demo");
            synth::write_dataset(&synth::corpus(1, 5), &dir)?;
            dir
        }
    };
    let stats = dataset_stats(&root);
    print!("{}", stats.summary());
    for issue in stats.issues.iter().take(10) {
        println!("issue: {} {}", issue.path.display(), issue.message);
    }
    Ok(())
}
