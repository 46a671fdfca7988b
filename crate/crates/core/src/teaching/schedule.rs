use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of the candidate pool selected at each refresh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatioSchedule {
    Constant { r: f64 },
    StepIncremental { r_start: f64, r_step: f64, num_stages: usize },
    /// Cosine annealing from `r_start` at step 0 to `r_end` at the last step.
    Cosine { r_start: f64, r_end: f64 },
    /// The time reversal of `Cosine { r_start, r_end }`: starts at `r_end`.
    ReverseCosine { r_start: f64, r_end: f64 },
}

/// Number of steps between residual refreshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntervalSchedule {
    Dense,
    Incremental { i_start: usize, i_end: usize, num_stages: usize },
    Decremental { i_start: usize, i_end: usize, num_stages: usize },
}

fn check_step(step: usize, total_steps: usize) -> Result<()> {
    if step >= total_steps {
        return Err(Error::invalid(format!("step {step} outside 0..{total_steps}")));
    }
    Ok(())
}

/// Stage index of `step` when `total_steps` is cut into `num_stages` equal
/// stages, the remainder going to the last.
pub fn stage_of(step: usize, total_steps: usize, num_stages: usize) -> usize {
    let len = (total_steps / num_stages).max(1);
    (step / len).min(num_stages - 1)
}

fn valid_ratio(r: f64) -> bool {
    r > 0.0 && r <= 1.0
}

impl RatioSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RatioSchedule::Constant { r } => valid_ratio(r),
            RatioSchedule::StepIncremental {
                r_start,
                r_step,
                num_stages,
            } => {
                num_stages >= 1
                    && valid_ratio(r_start)
                    && valid_ratio(r_start + r_step * (num_stages - 1) as f64)
            }
            RatioSchedule::Cosine { r_start, r_end }
            | RatioSchedule::ReverseCosine { r_start, r_end } => {
                valid_ratio(r_start) && valid_ratio(r_end)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("ratios must lie in (0, 1]: {self}")))
        }
    }

    pub fn at(&self, step: usize, total_steps: usize) -> Result<f64> {
        ratio_at(self, step, total_steps)
    }
}

pub fn ratio_at(sched: &RatioSchedule, step: usize, total_steps: usize) -> Result<f64> {
    check_step(step, total_steps)?;
    sched.validate()?;
    let cosine = |a: f64, b: f64, s: usize| {
        b + (a - b) * 0.5 * (1.0 + (PI * s as f64 / total_steps as f64).cos())
    };
    Ok(match *sched {
        RatioSchedule::Constant { r } => r,
        RatioSchedule::StepIncremental {
            r_start,
            r_step,
            num_stages,
        } => r_start + r_step * stage_of(step, total_steps, num_stages) as f64,
        RatioSchedule::Cosine { r_start, r_end } => cosine(r_start, r_end, step),
        RatioSchedule::ReverseCosine { r_start, r_end } => {
            cosine(r_start, r_end, total_steps - step)
        }
    })
}

impl IntervalSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            IntervalSchedule::Dense => Ok(()),
            IntervalSchedule::Incremental {
                i_start,
                i_end,
                num_stages,
            }
            | IntervalSchedule::Decremental {
                i_start,
                i_end,
                num_stages,
            } => {
                if i_start == 0 || i_end == 0 || num_stages == 0 {
                    Err(Error::invalid(format!("intervals and stage count must be >= 1: {self}")))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn at(&self, step: usize, total_steps: usize) -> Result<usize> {
        interval_at(self, step, total_steps)
    }
}

/// Stage-wise interval: stage `s` of `n` uses
/// `max(lo, hi - (n - 1 - s) * ceil((hi - lo) / (n - 1)))`, which for
/// `1..90` over 10 stages gives 1, 10, 20, ..., 90.
fn staged(lo: usize, hi: usize, num_stages: usize, stage: usize) -> usize {
    if num_stages == 1 {
        return hi;
    }
    let inc = (hi - lo).div_ceil(num_stages - 1);
    hi.saturating_sub((num_stages - 1 - stage) * inc).max(lo)
}

pub fn interval_at(sched: &IntervalSchedule, step: usize, total_steps: usize) -> Result<usize> {
    check_step(step, total_steps)?;
    sched.validate()?;
    Ok(match *sched {
        IntervalSchedule::Dense => 1,
        IntervalSchedule::Incremental {
            i_start,
            i_end,
            num_stages,
        } => {
            let s = stage_of(step, total_steps, num_stages);
            if i_start <= i_end {
                staged(i_start, i_end, num_stages, s)
            } else {
                staged(i_end, i_start, num_stages, num_stages - 1 - s)
            }
        }
        IntervalSchedule::Decremental {
            i_start,
            i_end,
            num_stages,
        } => {
            // mirror of the incremental sequence between the same endpoints
            let (lo, hi) = (i_start.min(i_end), i_start.max(i_end));
            let s = stage_of(step, total_steps, num_stages);
            staged(lo, hi, num_stages, num_stages - 1 - s)
        }
    })
}

impl fmt::Display for RatioSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatioSchedule::Constant { r } => write!(f, "const:{r}"),
            RatioSchedule::StepIncremental {
                r_start,
                r_step,
                num_stages,
            } => write!(f, "step:{r_start},{r_step},{num_stages}"),
            RatioSchedule::Cosine { r_start, r_end } => write!(f, "cos:{r_start},{r_end}"),
            RatioSchedule::ReverseCosine { r_start, r_end } => write!(f, "rcos:{r_start},{r_end}"),
        }
    }
}

impl fmt::Display for IntervalSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntervalSchedule::Dense => write!(f, "dense"),
            IntervalSchedule::Incremental {
                i_start,
                i_end,
                num_stages,
            } => write!(f, "inc:{i_start},{i_end},{num_stages}"),
            IntervalSchedule::Decremental {
                i_start,
                i_end,
                num_stages,
            } => write!(f, "dec:{i_start},{i_end},{num_stages}"),
        }
    }
}

fn split_spec<'a>(s: &'a str, what: &str) -> Result<(&'a str, Vec<&'a str>)> {
    let (kind, rest) = match s.split_once(':') {
        Some((k, r)) => (k.trim(), r.split(',').map(str::trim).collect()),
        None => (s.trim(), Vec::new()),
    };
    if kind.is_empty() {
        return Err(Error::invalid(format!("empty {what} spec")));
    }
    Ok((kind, rest))
}

fn arg<T: FromStr>(args: &[&str], i: usize, spec: &str) -> Result<T> {
    args.get(i)
        .and_then(|a| a.parse().ok())
        .ok_or_else(|| Error::invalid(format!("bad or missing argument {} in '{spec}'", i + 1)))
}

fn arity(args: &[&str], n: usize, spec: &str) -> Result<()> {
    if args.len() != n {
        return Err(Error::invalid(format!("'{spec}' takes {n} arguments")));
    }
    Ok(())
}

/// `const:r`, `step:start,step,stages`, `cos:start,end`, `rcos:start,end`.
impl FromStr for RatioSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, a) = split_spec(s, "ratio")?;
        let sched = match kind {
            "const" => {
                arity(&a, 1, s)?;
                RatioSchedule::Constant { r: arg(&a, 0, s)? }
            }
            "step" => {
                arity(&a, 3, s)?;
                RatioSchedule::StepIncremental {
                    r_start: arg(&a, 0, s)?,
                    r_step: arg(&a, 1, s)?,
                    num_stages: arg(&a, 2, s)?,
                }
            }
            "cos" | "rcos" => {
                arity(&a, 2, s)?;
                let (r_start, r_end) = (arg(&a, 0, s)?, arg(&a, 1, s)?);
                if kind == "cos" {
                    RatioSchedule::Cosine { r_start, r_end }
                } else {
                    RatioSchedule::ReverseCosine { r_start, r_end }
                }
            }
            other => return Err(Error::invalid(format!("unknown ratio schedule '{other}'"))),
        };
        sched.validate()?;
        Ok(sched)
    }
}

/// `dense`, `inc:start,end,stages`, `dec:start,end,stages`.
impl FromStr for IntervalSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, a) = split_spec(s, "interval")?;
        let sched = match kind {
            "dense" => {
                arity(&a, 0, s)?;
                IntervalSchedule::Dense
            }
            "inc" | "dec" => {
                arity(&a, 3, s)?;
                let (i_start, i_end, num_stages) = (arg(&a, 0, s)?, arg(&a, 1, s)?, arg(&a, 2, s)?);
                if kind == "inc" {
                    IntervalSchedule::Incremental {
                        i_start,
                        i_end,
                        num_stages,
                    }
                } else {
                    IntervalSchedule::Decremental {
                        i_start,
                        i_end,
                        num_stages,
                    }
                }
            }
            other => return Err(Error::invalid(format!("unknown interval schedule '{other}'"))),
        };
        sched.validate()?;
        Ok(sched)
    }
}
