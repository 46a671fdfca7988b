//! Command-line front end: `fit`, `compare` and `verify`.

mod config;
mod fit;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{
    default_strategies, ArchConfig, ArchKind, IntSection, LoadedSignal, OptimConfig, OptimKind,
    RunConfig, SignalSource, Strategy,
};
pub use fit::{cmd_compare, cmd_fit, content_hash, fit_signal, CompareRow, FitOutcome};
pub use verify::{run_suite, Check, Suite};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "inr-teach", version, about = "Fit signals with implicit neural representations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one signal and write the run log, metrics, reconstruction and weights.
    Fit(RunArgs),
    /// Run several selection strategies from the same initialization.
    Compare(RunArgs),
    /// Run a property suite and print one line per check.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: Suite,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

/// Flags override values from `--config`.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `image:PATH`, `audio:PATH`, `sine:N[,LO,HI]`, `sphere:DIM,R`,
    /// `sphere-occ:DIM,R`, `torus:DIM,MAJOR,MINOR`, `surface:COARSE,FINE,DIM,R`.
    #[arg(long)]
    pub signal: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub ratio: Option<String>,
    #[arg(long)]
    pub interval: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub int: Option<OnOff>,
    #[arg(long)]
    pub minibatch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_parser = parse_arch)]
    pub arch: Option<ArchKind>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Save `mask_<step>.pgm` at every refresh (images only).
    #[arg(long)]
    pub masks: bool,
    /// `NAME=RATIO@INTERVAL` or `NAME=off`; repeatable, for `compare`.
    #[arg(long = "strategy")]
    pub strategies: Vec<String>,
}

fn parse_arch(s: &str) -> std::result::Result<ArchKind, String> {
    match s {
        "siren" => Ok(ArchKind::Siren),
        "ffn" => Ok(ArchKind::Ffn),
        _ => Err(format!("unknown architecture '{s}' (siren|ffn)")),
    }
}

impl RunArgs {
    /// Reads `--config` if given and applies the flag overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = &self.signal {
            c.signal = s.parse()?;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.steps {
            c.steps = v;
        }
        if let Some(v) = &self.ratio {
            c.int.ratio = v.clone();
        }
        if let Some(v) = &self.interval {
            c.int.interval = v.clone();
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if let Some(v) = self.int {
            c.int.enabled = v == OnOff::On;
        }
        if let Some(v) = self.minibatch {
            c.int.minibatch = Some(v);
        }
        if let Some(v) = self.lr {
            c.optimizer.lr = v;
        }
        if let Some(v) = self.arch {
            c.arch.kind = v;
        }
        if let Some(v) = self.width {
            c.arch.width = v;
        }
        if let Some(v) = self.depth {
            c.arch.depth = v;
        }
        if let Some(v) = self.eps {
            c.eps = v;
        }
        if self.masks {
            c.masks = true;
        }
        if !self.strategies.is_empty() {
            c.strategies = self
                .strategies
                .iter()
                .map(|s| s.parse())
                .collect::<Result<_>>()?;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Runs a verify suite, printing each check. Errors only if a check
/// could not be evaluated at all.
pub fn cmd_verify(suite: Suite) -> Result<bool> {
    let checks = run_suite(suite)?;
    let mut ok = true;
    for c in &checks {
        println!("{c}");
        ok &= c.passed;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {} failed", checks.len(), failed);
    Ok(ok)
}

fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Fit(args) => {
            let config = args.resolve()?;
            let out = cmd_fit(&config)?;
            let m = &out.metrics;
            println!(
                "psnr {:.3} dB  ssim {}  iou {}  train {:.0} ms  steps {}  example-gradients {}  -> {}",
                m.psnr_db,
                m.ssim.map_or("-".into(), |v| format!("{v:.4}")),
                m.iou.map_or("-".into(), |v| format!("{v:.4}")),
                out.train_ms,
                out.log.optimizer_steps,
                out.log.example_gradients,
                config.out.display()
            );
            Ok(true)
        }
        Command::Compare(args) => {
            let config = args.resolve()?;
            let rows = cmd_compare(&config)?;
            println!("{:<14} {:>10} {:>10} {:>8} {:>14}", "strategy", "psnr", "train_ms", "ssim", "ex-grads");
            for r in &rows {
                println!(
                    "{:<14} {:>10.3} {:>10.0} {:>8} {:>14}",
                    r.name,
                    r.psnr_db,
                    r.train_ms,
                    r.ssim.map_or("-".into(), |v| format!("{v:.4}")),
                    r.example_gradients
                );
            }
            Ok(true)
        }
        Command::Verify { suite } => cmd_verify(*suite),
    }
}

/// Parses `args` and runs the command. Exit code 0 iff everything succeeded.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
