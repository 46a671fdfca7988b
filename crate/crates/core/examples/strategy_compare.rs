//! Runs the built-in selection strategies on the cameraman image and prints
//! the comparison table (also written to out/compare/compare.csv).
//!
//!     cargo run --release --example strategy_compare -- [steps]

use std::path::PathBuf;

use inr_teach::cli::{cmd_compare, RunConfig, SignalSource};

fn main() -> inr_teach::Result<()> {
    let steps = std::env::args().nth(1).map_or(300, |s| s.parse().expect("steps"));
    let config = RunConfig {
        signal: SignalSource::Image {
            path: PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/cameraman64.pgm"),
        },
        steps,
        out: PathBuf::from("out/compare"),
        ..RunConfig::default()
    };
    let rows = cmd_compare(&config)?;
    println!("{:<12} {:>10} {:>9} {:>8} {:>12}", "strategy", "train ms", "psnr", "ssim", "gradients");
    for r in rows {
        println!(
            "{:<12} {:>10.0} {:>9.2} {:>8.4} {:>12}",
            r.name,
            r.train_ms,
            r.psnr_db,
            r.ssim.unwrap_or(f64::NAN),
            r.example_gradients
        );
    }
    Ok(())
}
