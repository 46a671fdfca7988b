//! Fits a SIREN to the bundled 64x64 cameraman image with incremental
//! teaching and writes the reconstruction next to the run log.
//!
//!     cargo run --release --example fit_image -- [steps] [out_dir]

use std::path::PathBuf;

use inr_teach::cli::{cmd_fit, RunConfig, SignalSource};

fn main() -> inr_teach::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(500, |s| s.parse().expect("steps"));
    let out = args.next().map_or_else(|| PathBuf::from("out/fit_image"), PathBuf::from);

    let config = RunConfig {
        signal: SignalSource::Image {
            path: PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/cameraman64.pgm"),
        },
        steps,
        out: out.clone(),
        masks: true,
        ..RunConfig::default()
    };
    let fit = cmd_fit(&config)?;
    println!(
        "{} steps, {} example gradients, {} refreshes, {:.0} ms",
        fit.log.optimizer_steps, fit.log.example_gradients, fit.log.refreshes, fit.train_ms
    );
    println!("PSNR {:.2} dB, SSIM {:.4}", fit.metrics.psnr_db, fit.metrics.ssim.unwrap_or(f64::NAN));
    println!("wrote {}", out.display());
    Ok(())
}
