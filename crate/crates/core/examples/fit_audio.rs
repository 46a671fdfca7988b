//! Writes a short synthetic chirp as a 16-bit WAV, then fits it.
//!
//!     cargo run --release --example fit_audio -- [steps]

use std::path::PathBuf;

use inr_teach::cli::{cmd_fit, RunConfig, SignalSource};
use inr_teach::linalg::Matrix;
use inr_teach::signals::{grid_coords, save_audio_wav, Modality, Signal, ValueScale};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = std::env::args().nth(1).map_or(1000, |s| s.parse().expect("steps"));
    let out = PathBuf::from("out/fit_audio");
    std::fs::create_dir_all(&out)?;

    let (n, rate) = (2000usize, 8000u32);
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            0.6 * (2.0 * std::f64::consts::PI * (200.0 + 1500.0 * t) * t).sin()
        })
        .collect();
    let chirp = Signal {
        modality: Modality::Audio1D,
        coords: grid_coords(&[n]),
        values: Matrix::column(&samples)?,
        shape: vec![n],
        value_scale: ValueScale::PCM16,
        sample_rate: Some(rate),
    };
    let wav = out.join("chirp.wav");
    save_audio_wav(&chirp, &wav)?;

    let config = RunConfig {
        signal: SignalSource::Audio { path: wav },
        steps,
        out: out.join("run"),
        ..RunConfig::default()
    };
    let fit = cmd_fit(&config)?;
    println!("{} samples, PSNR {:.2} dB after {} steps", n, fit.metrics.psnr_db, steps);
    Ok(())
}
