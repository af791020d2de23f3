//! Thresholds a rendered circuit photo-substitute and cleans it up.
//!
//!     cargo run --example binarize [IMAGE]

use circuitgraph::raster::{
    binarize, median_denoise, otsu_threshold, GrayImage, Polarity, ThresholdMethod,
};
use circuitgraph::synth;

fn main() -> circuitgraph::Result<()> {
    let (image, truth) = match std::env::args().nth(1) {
        Some(path) => (GrayImage::load(path)?, None),
        None => {
            let scene = synth::ladder(3, 5);
            (scene.image, Some(scene.map))
        }
    };
    let t = otsu_threshold(&image);
    println!(
        "{}x{} image, Otsu threshold {t}",
        image.width(),
        image.height()
    );

    let map = binarize(&image, ThresholdMethod::Otsu, Polarity::DarkIsStroke);
    let smooth = median_denoise(&map, 1);
    println!(
        "stroke pixels: {} raw, {} after a 3x3 majority filter",
        map.count(),
        smooth.count()
    );
    if let Some(truth) = truth {
        println!("matches the noise-free drawing: {}", map == truth);
    }

    let out = std::env::temp_dir().join("circuitgraph_binarize.png");
    smooth.save(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
