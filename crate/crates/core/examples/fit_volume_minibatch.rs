//! Fits the signed distance of a sphere on a 32^3 grid, teaching from
//! random minibatches, and reports the occupancy IoU.
//!
//!     cargo run --release --example fit_volume_minibatch -- [steps]

use std::path::PathBuf;

use inr_teach::cli::{cmd_fit, IntSection, RunConfig, SignalSource};
use inr_teach::signals::{Shape, VolumeField};

fn main() -> inr_teach::Result<()> {
    let steps = std::env::args().nth(1).map_or(500, |s| s.parse().expect("steps"));
    let config = RunConfig {
        signal: SignalSource::Volume {
            shape: Shape::Sphere { radius: 0.5 },
            grid_dim: 32,
            field: VolumeField::Sdf,
        },
        int: IntSection {
            minibatch: Some(4096),
            ..IntSection::default()
        },
        steps,
        out: PathBuf::from("out/fit_volume"),
        ..RunConfig::default()
    };
    let fit = cmd_fit(&config)?;
    println!(
        "{} steps over 32768 voxels, {} example gradients, IoU {:.4}",
        steps,
        fit.log.example_gradients,
        fit.metrics.iou.unwrap_or(f64::NAN)
    );
    Ok(())
}
