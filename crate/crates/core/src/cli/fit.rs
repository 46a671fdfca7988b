use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{default_strategies, LoadedSignal, RunConfig, Strategy};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{evaluate, occupancy_from_field, occupancy_from_sdf, MetricReport};
use crate::nn::{save_weights, Mlp};
use crate::signals::{save_audio_wav, save_image, save_occupancy, Modality, Signal, ValueScale};
use crate::teaching::{int_train, RunLog, TeachingSet, TrainOptions};

/// `sha256("blob <len>\0" || bytes)`, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything a fit produced, before anything is written.
pub struct FitOutcome {
    pub mlp: Mlp,
    pub log: RunLog,
    pub metrics: MetricReport,
    /// Training time only, data loading and output excluded.
    pub train_ms: f64,
    pub reconstruction: Matrix,
    pub masks: Vec<(usize, Vec<u8>)>,
}

/// Trains on an already loaded signal.
pub fn fit_signal(config: &RunConfig, signal: &LoadedSignal) -> Result<FitOutcome> {
    config.validate()?;
    let train = &signal.train;
    let arch = config.arch.build(train.in_dim(), train.channels())?;
    let mut mlp = Mlp::init(arch, config.seed)?;
    let (mut opt, lr) = config.optimizer.build(mlp.param_count(), config.steps)?;
    let int = config.int.build()?;
    let mut ts = TeachingSet::new(train.coords.clone(), train.values.clone())?;
    let options = TrainOptions {
        total_steps: config.steps,
        lr,
        eps: config.eps,
        seed: config.seed,
    };
    let want_masks = config.masks && train.modality == Modality::Image2D;
    let mut masks = Vec::new();
    let n = ts.len();
    let start = Instant::now();
    let log = int_train(&mut mlp, &mut ts, &int, &mut opt, &options, |ev| {
        if want_masks {
            let mut m = vec![255u8; n];
            for &i in ev.selected {
                m[i] = 0;
            }
            masks.push((ev.step, m));
        }
    })?;
    let train_ms = start.elapsed().as_secs_f64() * 1e3;
    let reconstruction = mlp.forward(&signal.eval.coords)?;
    let metrics = evaluate(&signal.eval, &reconstruction)?;
    Ok(FitOutcome {
        mlp,
        log,
        metrics,
        train_ms,
        reconstruction,
        masks,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    input_hash: String,
    coordinate_convention: &'a str,
    metric_conventions: &'a str,
    train_ms: f64,
    optimizer_steps: usize,
    example_gradients: u64,
    refreshes: usize,
    stopped_early: bool,
    partial: bool,
    outputs: Vec<String>,
}

const METRIC_CONVENTIONS: &str = "images: PSNR on [0,1] values with peak 1, SSIM 11x11 gaussian \
sigma 1.5 K1 0.01 K2 0.03 L 1; other signals: PSNR on native values with peak 1; volumes: IoU \
after thresholding SDF at 0 or occupancy at 0.5";

fn write_file(dir: &Path, name: &str, bytes: &[u8], outputs: &mut Vec<String>) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    outputs.push(name.to_string());
    Ok(())
}

fn write_reconstruction(eval: &Signal, recon: &Matrix, dir: &Path, outputs: &mut Vec<String>) -> Result<()> {
    let rec = eval.with_values(recon.clone())?;
    match eval.modality {
        Modality::Image2D => {
            let name = if eval.channels() == 1 { "recon.pgm" } else { "recon.ppm" };
            save_image(&rec, &dir.join(name))?;
            outputs.push(name.into());
        }
        Modality::Audio1D => {
            save_audio_wav(&rec, &dir.join("recon.wav"))?;
            outputs.push("recon.wav".into());
        }
        Modality::Volume3D => {
            let v = eval.values.as_slice();
            let occupancy = v.iter().all(|&x| x == 0.0 || x == 1.0);
            let occ = if occupancy {
                occupancy_from_field(recon.as_slice())
            } else {
                occupancy_from_sdf(recon.as_slice())
            };
            save_occupancy(&eval.shape, &occ, &dir.join("recon.raw"))?;
            outputs.push("recon.raw".into());
            outputs.push("recon.raw.json".into());
        }
        Modality::Synthetic1D => {
            let mut text = String::from("coord,target,prediction\n");
            for i in 0..eval.len() {
                text.push_str(&format!(
                    "{},{},{}\n",
                    eval.coords.get(i, 0),
                    eval.values.get(i, 0),
                    recon.get(i, 0)
                ));
            }
            write_file(dir, "recon.csv", text.as_bytes(), outputs)?;
        }
    }
    Ok(())
}

fn write_mask(shape: &[usize], step: usize, mask: &[u8], dir: &Path, outputs: &mut Vec<String>) -> Result<()> {
    let sig = Signal {
        modality: Modality::Image2D,
        coords: Matrix::zeros(0, 2),
        values: Matrix::from_vec(
            mask.len(),
            1,
            mask.iter().map(|&b| ValueScale::BYTE.to_value(b as f64)).collect(),
        )?,
        shape: shape.to_vec(),
        value_scale: ValueScale::BYTE,
        sample_rate: None,
    };
    let name = format!("mask_{step}.pgm");
    save_image(&sig, &dir.join(&name))?;
    outputs.push(name);
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes every artifact of a finished fit into `dir`.
fn write_outputs(
    command: &str,
    config: &RunConfig,
    signal: &LoadedSignal,
    outcome: &FitOutcome,
    dir: &Path,
) -> Result<()> {
    create_dir(dir)?;
    let mut outputs = Vec::new();
    let mut csv = Vec::new();
    outcome
        .log
        .write_csv(&mut csv)
        .map_err(|e| Error::io(dir.join("run.csv"), e))?;
    write_file(dir, "run.csv", &csv, &mut outputs)?;
    write_file(
        dir,
        "metrics.json",
        &serde_json::to_vec_pretty(&outcome.metrics)?,
        &mut outputs,
    )?;
    write_reconstruction(&signal.eval, &outcome.reconstruction, dir, &mut outputs)?;
    save_weights(&outcome.mlp, &dir.join("weights.inrw"))?;
    outputs.push("weights.inrw".into());
    for (step, mask) in &outcome.masks {
        write_mask(&signal.train.shape, *step, mask, dir, &mut outputs)?;
    }
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
        input_hash: content_hash(&signal.input_bytes),
        coordinate_convention: "grid samples at pixel centers -1 + (2j+1)/L; synthetic 1D endpoints at -1 and 1",
        metric_conventions: METRIC_CONVENTIONS,
        train_ms: outcome.train_ms,
        optimizer_steps: outcome.log.optimizer_steps,
        example_gradients: outcome.log.example_gradients,
        refreshes: outcome.log.refreshes,
        stopped_early: outcome.log.stopped_early,
        partial: false,
        outputs,
    };
    let p = dir.join("manifest.json");
    std::fs::write(&p, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&p, e))
}

/// Loads the signal, trains, and writes all artifacts to `config.out`.
pub fn cmd_fit(config: &RunConfig) -> Result<FitOutcome> {
    config.validate()?;
    let signal = config.signal.load(config.seed)?;
    let outcome = fit_signal(config, &signal)?;
    write_outputs("fit", config, &signal, &outcome, &config.out)?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub name: String,
    pub ratio: String,
    pub interval: String,
    pub train_ms: f64,
    pub psnr_db: f64,
    pub ssim: Option<f64>,
    pub iou: Option<f64>,
    pub example_gradients: u64,
    pub final_loss: f64,
}

fn dir_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Runs every strategy from the same seed (hence the same initialization)
/// one after another, writes each run under `out/<name>/` and a summary to
/// `out/compare.csv`. If a strategy fails, the rows finished so far are
/// still written and `out/manifest.json` is marked partial.
pub fn cmd_compare(config: &RunConfig) -> Result<Vec<CompareRow>> {
    config.validate()?;
    let strategies: Vec<Strategy> = if config.strategies.is_empty() {
        default_strategies()
    } else {
        config.strategies.clone()
    };
    if strategies.len() < 2 {
        return Err(Error::Config("compare needs at least two strategies".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for s in &strategies {
        if !seen.insert(dir_name(&s.name)) {
            return Err(Error::Config(format!("duplicate strategy name '{}'", s.name)));
        }
    }
    let signal = config.signal.load(config.seed)?;
    create_dir(&config.out)?;
    let mut rows = Vec::new();
    let mut failure = None;
    for s in &strategies {
        match run_strategy(config, &signal, s) {
            Ok(row) => rows.push(row),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    write_compare_csv(&rows, &config.out.join("compare.csv"))?;
    let summary = CompareManifest {
        command: "compare",
        version: env!("CARGO_PKG_VERSION"),
        config,
        input_hash: content_hash(&signal.input_bytes),
        strategies: &strategies,
        completed: rows.len(),
        partial: failure.is_some(),
        error: failure.as_ref().map(|e| e.to_string()),
    };
    let p = config.out.join("manifest.json");
    std::fs::write(&p, serde_json::to_vec_pretty(&summary)?).map_err(|e| Error::io(&p, e))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

#[derive(Serialize)]
struct CompareManifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    input_hash: String,
    strategies: &'a [Strategy],
    completed: usize,
    partial: bool,
    error: Option<String>,
}

fn run_strategy(
    config: &RunConfig,
    signal: &LoadedSignal,
    s: &Strategy,
) -> Result<CompareRow> {
    let sub = dir_name(&s.name);
    let mut c = config.clone();
    c.int.enabled = s.int;
    if s.int {
        c.int.ratio = s.ratio.clone();
        c.int.interval = s.interval.clone();
    }
    c.out = config.out.join(&sub);
    c.strategies.clear();
    let outcome = fit_signal(&c, signal)?;
    write_outputs("compare", &c, signal, &outcome, &c.out)?;
    Ok(CompareRow {
        name: s.name.clone(),
        ratio: if s.int { s.ratio.clone() } else { "-".into() },
        interval: if s.int { s.interval.clone() } else { "-".into() },
        train_ms: outcome.train_ms,
        psnr_db: outcome.metrics.psnr_db,
        ssim: outcome.metrics.ssim,
        iou: outcome.metrics.iou,
        example_gradients: outcome.log.example_gradients,
        final_loss: outcome.log.rows.last().map_or(f64::NAN, |r| r.loss),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_compare_csv(rows: &[CompareRow], p: &Path) -> Result<()> {
    let mut text =
        String::from("name,ratio,interval,train_ms,psnr_db,ssim,iou,example_gradients,final_loss\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{:.1},{:.4},{},{},{},{:e}\n",
            csv_field(&r.name),
            csv_field(&r.ratio),
            csv_field(&r.interval),
            r.train_ms,
            r.psnr_db,
            opt(r.ssim),
            opt(r.iou),
            r.example_gradients,
            r.final_loss
        ));
    }
    std::fs::write(p, text).map_err(|e| Error::io(p, e))
}
