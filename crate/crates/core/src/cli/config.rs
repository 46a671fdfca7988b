use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Rng;
use crate::nn::{Activation, Encoding, MlpArch, DEFAULT_OMEGA0};
use crate::optim::{CosineLr, Optimizer};
use crate::signals::{
    load_audio_wav, load_image, sample_surface_points, synth_sine, synth_volume, Shape, Signal,
    SurfaceNoise, VolumeField,
};
use crate::teaching::{IntConfig, IntervalSchedule, RatioSchedule, Selection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSource {
    Image { path: PathBuf },
    Audio { path: PathBuf },
    Sine { n: usize, lo: f64, hi: f64 },
    /// A shape sampled on a voxel grid.
    Volume { shape: Shape, grid_dim: usize, field: VolumeField },
    /// Noisy surface samples for training; evaluated on a voxel grid.
    Surface {
        shape: Shape,
        n_coarse: usize,
        n_fine: usize,
        grid_dim: usize,
    },
}

impl Default for SignalSource {
    fn default() -> Self {
        SignalSource::Sine {
            n: 100,
            lo: -std::f64::consts::PI,
            hi: std::f64::consts::PI,
        }
    }
}

/// Parses `image:PATH`, `audio:PATH`, `sine:N[,LO,HI]`,
/// `sphere:DIM,RADIUS` (signed distance), `sphere-occ:DIM,RADIUS`,
/// `torus:DIM,MAJOR,MINOR` and `surface:N_COARSE,N_FINE,DIM,RADIUS`.
impl FromStr for SignalSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("signal '{s}' needs the form kind:args")))?;
        let nums = || -> Result<Vec<f64>> {
            rest.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad number '{a}' in signal '{s}'")))
                })
                .collect()
        };
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::invalid(format!("'{v}' is not a count in signal '{s}'")))
            }
        };
        let wrong = || Error::invalid(format!("wrong number of arguments in signal '{s}'"));
        Ok(match kind {
            "image" => SignalSource::Image { path: rest.into() },
            "audio" => SignalSource::Audio { path: rest.into() },
            "sine" => match nums()?.as_slice() {
                [n] => SignalSource::Sine {
                    n: count(*n)?,
                    lo: -std::f64::consts::PI,
                    hi: std::f64::consts::PI,
                },
                [n, lo, hi] => SignalSource::Sine {
                    n: count(*n)?,
                    lo: *lo,
                    hi: *hi,
                },
                _ => return Err(wrong()),
            },
            "sphere" | "sphere-occ" => match nums()?.as_slice() {
                [d, r] => SignalSource::Volume {
                    shape: Shape::Sphere { radius: *r },
                    grid_dim: count(*d)?,
                    field: if kind == "sphere" {
                        VolumeField::Sdf
                    } else {
                        VolumeField::Occupancy
                    },
                },
                _ => return Err(wrong()),
            },
            "torus" => match nums()?.as_slice() {
                [d, major, minor] => SignalSource::Volume {
                    shape: Shape::Torus {
                        major: *major,
                        minor: *minor,
                    },
                    grid_dim: count(*d)?,
                    field: VolumeField::Sdf,
                },
                _ => return Err(wrong()),
            },
            "surface" => match nums()?.as_slice() {
                [c, f, d, r] => SignalSource::Surface {
                    shape: Shape::Sphere { radius: *r },
                    n_coarse: count(*c)?,
                    n_fine: count(*f)?,
                    grid_dim: count(*d)?,
                },
                _ => return Err(wrong()),
            },
            other => return Err(Error::invalid(format!("unknown signal kind '{other}'"))),
        })
    }
}

/// Training set, evaluation target, and the raw input bytes (for hashing).
pub struct LoadedSignal {
    pub train: Signal,
    pub eval: Signal,
    pub input_bytes: Vec<u8>,
}

impl SignalSource {
    pub fn load(&self, seed: u64) -> Result<LoadedSignal> {
        let read = |p: &Path| std::fs::read(p).map_err(|e| Error::io(p, e));
        let described = || serde_json::to_vec(self).map_err(Error::from);
        let (train, eval, input_bytes) = match self {
            SignalSource::Image { path } => {
                let s = load_image(path)?;
                (s.clone(), s, read(path)?)
            }
            SignalSource::Audio { path } => {
                let s = load_audio_wav(path)?;
                (s.clone(), s, read(path)?)
            }
            SignalSource::Sine { n, lo, hi } => {
                let s = synth_sine(*n, *lo, *hi)?;
                (s.clone(), s, described()?)
            }
            SignalSource::Volume {
                shape,
                grid_dim,
                field,
            } => {
                let s = synth_volume(*shape, *grid_dim, *field)?;
                (s.clone(), s, described()?)
            }
            SignalSource::Surface {
                shape,
                n_coarse,
                n_fine,
                grid_dim,
            } => {
                let mut rng = Rng::new(seed ^ 0x5eed_5a3f_ace5);
                let train =
                    sample_surface_points(*shape, *n_coarse, *n_fine, SurfaceNoise::default(), &mut rng)?;
                let eval = synth_volume(*shape, *grid_dim, VolumeField::Sdf)?;
                (train, eval, described()?)
            }
        };
        Ok(LoadedSignal {
            train,
            eval,
            input_bytes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Siren,
    Ffn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub kind: ArchKind,
    pub width: usize,
    /// Number of linear layers.
    pub depth: usize,
    pub omega0: f64,
    pub num_features: usize,
    pub sigma: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            kind: ArchKind::Siren,
            width: 128,
            depth: 5,
            omega0: DEFAULT_OMEGA0,
            num_features: 128,
            sigma: 2.0,
        }
    }
}

impl ArchConfig {
    pub fn build(&self, in_dim: usize, out_dim: usize) -> Result<MlpArch> {
        let arch = match self.kind {
            ArchKind::Siren => MlpArch {
                in_dim,
                out_dim,
                hidden_width: self.width,
                depth: self.depth,
                activation: Activation::Sine {
                    omega0: self.omega0,
                },
                encoding: Encoding::None,
            },
            ArchKind::Ffn => MlpArch::ffn(
                in_dim,
                out_dim,
                self.width,
                self.depth,
                self.num_features,
                self.sigma,
            ),
        };
        arch.validate()?;
        Ok(arch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub kind: OptimKind,
    pub lr: f64,
    /// Cosine annealing floor; equal to `lr` for a constant rate.
    pub lr_min: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            kind: OptimKind::Adam,
            lr: 1e-3,
            lr_min: 0.0,
        }
    }
}

impl OptimConfig {
    pub fn build(&self, param_count: usize, steps: usize) -> Result<(Optimizer, CosineLr)> {
        if !(self.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        let sched = CosineLr::new(self.lr, self.lr_min, steps)
            .map_err(|e| Error::Config(e.to_string()))?;
        let opt = match self.kind {
            OptimKind::Adam => Optimizer::adam(self.lr, param_count),
            OptimKind::Sgd => Optimizer::sgd(self.lr),
        };
        Ok((opt, sched))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntSection {
    pub enabled: bool,
    /// `const:r`, `step:start,step,stages`, `cos:a,b` or `rcos:a,b`.
    pub ratio: String,
    /// `dense`, `inc:start,end,stages` or `dec:start,end,stages`.
    pub interval: String,
    pub minibatch: Option<usize>,
    pub selection: Selection,
}

impl Default for IntSection {
    fn default() -> Self {
        IntSection {
            enabled: true,
            ratio: "step:0.2,0.08,10".into(),
            interval: "inc:1,90,10".into(),
            minibatch: None,
            selection: Selection::TopK,
        }
    }
}

impl IntSection {
    pub fn build(&self) -> Result<IntConfig> {
        if !self.enabled {
            let mut full = IntConfig::full_batch();
            full.minibatch_size = self.minibatch;
            return Ok(full);
        }
        Ok(IntConfig {
            ratio: self.ratio.parse::<RatioSchedule>()?,
            interval: self.interval.parse::<IntervalSchedule>()?,
            minibatch_size: self.minibatch,
            selection: self.selection,
        })
    }
}

/// One named entry of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strategy {
    pub name: String,
    pub int: bool,
    #[serde(default)]
    pub ratio: String,
    #[serde(default)]
    pub interval: String,
}

/// Parses `NAME=RATIO@INTERVAL`, or `NAME=off` for training without selection.
impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("strategy '{s}' needs NAME=RATIO@INTERVAL")))?;
        if rest.trim() == "off" {
            return Ok(Strategy {
                name: name.trim().into(),
                int: false,
                ratio: String::new(),
                interval: String::new(),
            });
        }
        let (ratio, interval) = rest
            .split_once('@')
            .ok_or_else(|| Error::invalid(format!("strategy '{s}' needs NAME=RATIO@INTERVAL")))?;
        ratio.parse::<RatioSchedule>()?;
        interval.parse::<IntervalSchedule>()?;
        Ok(Strategy {
            name: name.trim().into(),
            int: true,
            ratio: ratio.trim().into(),
            interval: interval.trim().into(),
        })
    }
}

/// Training without selection plus the six ratio/interval pairings of the
/// strategy study.
pub fn default_strategies() -> Vec<Strategy> {
    [
        "none=off",
        "cos/dense=cos:0.2,1@dense",
        "cos/inc=cos:0.2,1@inc:1,90,10",
        "rcos/dense=rcos:0.2,1@dense",
        "rcos/dec=rcos:0.2,1@dec:90,1,10",
        "step/dense=step:0.2,0.08,10@dense",
        "step/inc=step:0.2,0.08,10@inc:1,90,10",
    ]
    .iter()
    .map(|s| s.parse().expect("built-in strategy"))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub signal: SignalSource,
    pub arch: ArchConfig,
    pub optimizer: OptimConfig,
    pub int: IntSection,
    pub steps: usize,
    pub seed: u64,
    pub eps: f64,
    pub out: PathBuf,
    /// Write `mask_<step>.pgm` at refreshes (image signals only).
    pub masks: bool,
    /// Strategies for `compare`; empty means the built-in set.
    pub strategies: Vec<Strategy>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            signal: SignalSource::default(),
            arch: ArchConfig::default(),
            optimizer: OptimConfig::default(),
            int: IntSection::default(),
            steps: 5000,
            seed: 0,
            eps: 0.0,
            out: PathBuf::from("out"),
            masks: false,
            strategies: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Checks everything that can be checked before loading data.
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::Config("eps must be non-negative".into()));
        }
        self.arch.build(1, 1).map_err(|e| Error::Config(e.to_string()))?;
        self.int.build().map_err(|e| Error::Config(e.to_string()))?;
        for s in &self.strategies {
            if s.int {
                s.ratio.parse::<RatioSchedule>()?;
                s.interval.parse::<IntervalSchedule>()?;
            }
        }
        if let Some(0) = self.int.minibatch {
            return Err(Error::Config("minibatch must be at least 1".into()));
        }
        Ok(())
    }
}
