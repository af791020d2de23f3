//! Scores of a perturbed result against the truth.

use circuitgraph::annotations::{ClassRole, PrototypeLibrary};
use circuitgraph::evaluation::{keypoint_metrics, mask_metrics, scores_table, MetricFloors};
use circuitgraph::geometry::Point;
use circuitgraph::graph::{compare_netlists, Netlist};
use circuitgraph::pipeline::{run, Config};
use circuitgraph::synth;

fn main() -> circuitgraph::Result<()> {
    let scene = synth::ladder(30, 7);
    let truth = run(
        &scene.annotations,
        &scene.map,
        &PrototypeLibrary::builtin(),
        &Config::default(),
    )?;

    // a "prediction" that lost its last polygon and one net
    let mut pred = truth.clone();
    pred.document.polygons.pop();
    let nets = Netlist::canonical(pred.netlist.nets[1..].to_vec());

    let (w, h) = scene.map.dims();
    let masks = mask_metrics(&pred.document.polygons, &truth.document.polygons, 0.5, w, h);
    print!("{}", scores_table(&masks.per_class, &masks.overall));

    let ports = |d: &circuitgraph::annotations::PolygonDocument| -> Vec<Point> {
        d.polygons
            .iter()
            .filter(|p| p.role() == ClassRole::Symbol)
            .flat_map(|p| p.ports.iter().flatten().map(|q| q.position))
            .collect()
    };
    let kp = keypoint_metrics(&ports(&pred.document), &ports(&truth.document), 10.0);
    let net = compare_netlists(&nets, &scene.netlist);
    println!("keypoints f1 {:.3}, nets f1 {:.3}", kp.f1, net.f1);

    let floors = MetricFloors {
        mask_f1: Some(0.9),
        keypoint_f1: Some(0.9),
        net_f1: Some(0.9),
    };
    for v in floors.check(Some(&masks.overall), Some(&kp), Some(&net)) {
        println!("floor: {v}");
    }
    Ok(())
}
