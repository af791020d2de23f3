//! Naming detected terminals after a class prototype, at every rotation.

use circuitgraph::annotations::{ClassLabel, PolygonAnnotation, PrototypeLibrary, Refinement};
use circuitgraph::geometry::{bbox_to_polygon, Angle, BoundingBox, Point};
use circuitgraph::ports::assign_ports;

fn main() -> circuitgraph::Result<()> {
    let library = PrototypeLibrary::builtin();
    let bbox = BoundingBox::new(100.0, 50.0, 140.0, 90.0)?;
    let symbol = PolygonAnnotation::new(
        ClassLabel::new_unchecked("transistor.bjt"),
        bbox_to_polygon(&bbox),
        Refinement::Refined,
    );
    // terminals as a detector might find them, slightly off the box
    let keypoints = [
        Point::new(129.0, 50.5),
        Point::new(100.5, 71.0),
        Point::new(131.0, 89.0),
    ];

    for deg in [0.0, 90.0, 180.0, 270.0] {
        let a = assign_ports(
            0,
            &keypoints,
            &symbol,
            &bbox,
            Some(Angle::degrees(deg)),
            &library,
        );
        let names: Vec<String> = a
            .pairs
            .iter()
            .map(|p| format!("{}@({:.0},{:.0})", p.name, p.position.x, p.position.y))
            .collect();
        println!(
            "{deg:>5}: {:?} cost {:6.2}  {}",
            a.status,
            a.total_distance,
            names.join(" ")
        );
    }

    let two = &keypoints[..2];
    let a = assign_ports(0, two, &symbol, &bbox, Some(Angle::degrees(0.0)), &library);
    println!("two keypoints for three ports: {:?}", a.status);
    Ok(())
}
