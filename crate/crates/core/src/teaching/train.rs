use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{k_from_ratio, refresh_with, select_topk_of, IntConfig, Selection, TeachingSet};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::nn::{Mlp, Workspace};
use crate::optim::{cosine_lr, CosineLr, Optimizer};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub total_steps: usize,
    pub lr: CosineLr,
    /// Stop at a refresh once the full residual norm is below this.
    pub eps: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLogRow {
    pub step: usize,
    pub wall_ms: f64,
    /// `(1/k) sum 1/2 |f(x_i) - y_i|^2` over the examples used this step.
    pub loss: f64,
    pub k_selected: usize,
    pub lr: f64,
    pub refresh: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<RunLogRow>,
    /// Sum over steps of the number of examples backpropagated.
    pub example_gradients: u64,
    pub refreshes: usize,
    pub optimizer_steps: usize,
    pub stopped_early: bool,
}

impl RunLog {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,wall_ms,loss,k_selected,lr,refresh_flag")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:.3},{:e},{},{:e},{}",
                r.step, r.wall_ms, r.loss, r.k_selected, r.lr, r.refresh as u8
            )?;
        }
        Ok(())
    }
}

/// What the teacher did at a refresh.
pub struct RefreshEvent<'a> {
    pub step: usize,
    /// Sorted indices into the teaching set.
    pub selected: &'a [usize],
    pub teaching_set: &'a TeachingSet,
}

struct Batch {
    indices: Vec<usize>,
    coords: Matrix,
    targets: Matrix,
}

impl Batch {
    fn gather(ts: &TeachingSet, indices: Vec<usize>) -> Self {
        Batch {
            coords: ts.coords.select_rows(&indices),
            targets: ts.targets.select_rows(&indices),
            indices,
        }
    }
}

struct Minibatcher {
    order: Vec<usize>,
    pos: usize,
    size: usize,
}

impl Minibatcher {
    fn new(n: usize, size: usize, rng: &mut Rng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        Minibatcher {
            order,
            pos: 0,
            size,
        }
    }

    fn next(&mut self, rng: &mut Rng) -> &[usize] {
        if self.pos + self.size > self.order.len() {
            rng.shuffle(&mut self.order);
            self.pos = 0;
        }
        let b = &self.order[self.pos..self.pos + self.size];
        self.pos += self.size;
        b
    }
}

fn choose(
    selection: Selection,
    scores: &[f64],
    k: usize,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    match selection {
        Selection::TopK => select_topk_of(scores, k),
        Selection::Random => {
            let mut idx: Vec<usize> = (0..scores.len()).collect();
            rng.shuffle(&mut idx);
            idx.truncate(k);
            idx.sort_unstable();
            Ok(idx)
        }
    }
}

/// Residuals `f - y` into `r`, returning `(1/k) sum 1/2 r^2` per example.
fn residual_and_loss(out: &[f64], targets: &[f64], r: &mut Vec<f64>, rows: usize) -> f64 {
    r.clear();
    r.extend(out.iter().zip(targets).map(|(f, y)| f - y));
    0.5 * r.iter().map(|v| v * v).sum::<f64>() / rows as f64
}

/// Trains `mlp` on the examples the teacher selects.
///
/// At refresh steps the residuals are recomputed and `k = ceil(ratio * N)`
/// examples are chosen; between refreshes the previous choice is reused. With
/// a minibatch size, every step draws a fresh minibatch and selects within
/// it by the stored residuals, refreshing only the minibatch's entries.
pub fn int_train(
    mlp: &mut Mlp,
    ts: &mut TeachingSet,
    config: &IntConfig,
    opt: &mut Optimizer,
    options: &TrainOptions,
    mut on_refresh: impl FnMut(&RefreshEvent<'_>),
) -> Result<RunLog> {
    let n = ts.len();
    config.validate(n)?;
    if ts.coords.cols() != mlp.arch().in_dim || ts.targets.cols() != mlp.arch().out_dim {
        return Err(Error::invalid("teaching set shape does not match the network"));
    }
    if !(options.eps >= 0.0) {
        return Err(Error::invalid("eps must be non-negative"));
    }
    let total = options.total_steps;
    let mut rng = Rng::new(options.seed);
    let mut ws = Workspace::new();
    let mut grad = vec![0.0; mlp.param_count()];
    let mut r = Vec::new();
    let mut log = RunLog::default();
    let mut batch: Option<Batch> = None;
    let mut batcher = config
        .minibatch_size
        .map(|b| Minibatcher::new(n, b, &mut rng));
    let start = Instant::now();
    let mut last_refresh: Option<usize> = None;

    for step in 0..total {
        let interval = config.interval.at(step, total)?;
        let refresh = last_refresh.is_none_or(|l| step - l >= interval);
        let ratio = config.ratio.at(step, total)?;
        let lr = cosine_lr(&options.lr, step)?;
        let loss;
        // target size; between refreshes the batch keeps the size it was picked at
        let k;

        match batcher.as_mut() {
            None => {
                k = k_from_ratio(ratio, n);
                if refresh && k == n {
                    // one pass serves both the refresh and the update
                    let out = mlp.forward_into(ts.coords.as_slice(), n, &mut ws)?;
                    ts.store_residuals(0..n, out);
                    ts.last_refresh_step = step;
                    last_refresh = Some(step);
                    log.refreshes += 1;
                    if ts.total_residual() < options.eps {
                        log.stopped_early = true;
                        break;
                    }
                    let all: Vec<usize> = (0..n).collect();
                    on_refresh(&RefreshEvent {
                        step,
                        selected: &all,
                        teaching_set: ts,
                    });
                    batch = None;
                    let out = ws.output();
                    loss = residual_and_loss(out, ts.targets.as_slice(), &mut r, n);
                } else {
                    if refresh {
                        refresh_with(ts, mlp, step, &mut ws)?;
                        last_refresh = Some(step);
                        log.refreshes += 1;
                        if ts.total_residual() < options.eps {
                            log.stopped_early = true;
                            break;
                        }
                        let picked = choose(config.selection, &ts.residual_norms, k, &mut rng)?;
                        on_refresh(&RefreshEvent {
                            step,
                            selected: &picked,
                            teaching_set: ts,
                        });
                        batch = if picked.len() == n {
                            None
                        } else {
                            Some(Batch::gather(ts, picked))
                        };
                    }
                    loss = match &batch {
                        Some(b) => {
                            let rows = b.indices.len();
                            let out = mlp.forward_into(b.coords.as_slice(), rows, &mut ws)?;
                            residual_and_loss(out, b.targets.as_slice(), &mut r, rows)
                        }
                        None => {
                            let out = mlp.forward_into(ts.coords.as_slice(), n, &mut ws)?;
                            residual_and_loss(out, ts.targets.as_slice(), &mut r, n)
                        }
                    };
                }
            }
            Some(mb) => {
                if last_refresh.is_none() {
                    refresh_with(ts, mlp, step, &mut ws)?;
                }
                let members = mb.next(&mut rng).to_vec();
                let b = members.len();
                k = k_from_ratio(ratio, b);
                if refresh {
                    if last_refresh.is_some() {
                        let sub = ts.coords.select_rows(&members);
                        let out = mlp.forward_into(sub.as_slice(), b, &mut ws)?.to_vec();
                        ts.store_residuals(members.iter().copied(), &out);
                        ts.last_refresh_step = step;
                    }
                    last_refresh = Some(step);
                    log.refreshes += 1;
                    if ts.total_residual() < options.eps {
                        log.stopped_early = true;
                        break;
                    }
                }
                let scores: Vec<f64> = members.iter().map(|&i| ts.residual_norms[i]).collect();
                let local = choose(config.selection, &scores, k, &mut rng)?;
                let picked: Vec<usize> = local.iter().map(|&j| members[j]).collect();
                if refresh {
                    let mut sorted = picked.clone();
                    sorted.sort_unstable();
                    on_refresh(&RefreshEvent {
                        step,
                        selected: &sorted,
                        teaching_set: ts,
                    });
                }
                let bt = Batch::gather(ts, picked);
                let out = mlp.forward_into(bt.coords.as_slice(), k, &mut ws)?;
                loss = residual_and_loss(out, bt.targets.as_slice(), &mut r, k);
            }
        }

        grad.fill(0.0);
        let rows = ws.rows();
        mlp.backward_from(&mut ws, &r, 1.0 / rows as f64, &mut grad)?;
        opt.step(mlp, &grad, lr)?;
        log.optimizer_steps += 1;
        log.example_gradients += rows as u64;
        log.rows.push(RunLogRow {
            step,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            loss,
            k_selected: rows,
            lr,
            refresh,
        });
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::MlpArch;
    use crate::teaching::{IntervalSchedule, RatioSchedule};

    fn problem() -> (Mlp, TeachingSet) {
        let x = Matrix::from_fn(64, 1, |i, _| -1.0 + 2.0 * (i as f64 + 0.5) / 64.0);
        let y = Matrix::from_fn(64, 1, |i, _| (4.0 * x.get(i, 0)).sin());
        let m = Mlp::init(MlpArch::siren(1, 1, 16, 3), 5).unwrap();
        (m, TeachingSet::new(x, y).unwrap())
    }

    fn opts(steps: usize) -> TrainOptions {
        TrainOptions {
            total_steps: steps,
            lr: CosineLr::constant(1e-3, steps),
            eps: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn full_ratio_dense_equals_plain_loop() {
        let (m0, ts0) = problem();
        let mut m = m0.clone();
        let mut ts = ts0.clone();
        let mut opt = Optimizer::adam(1e-3, m.param_count());
        let log = int_train(&mut m, &mut ts, &IntConfig::full_batch(), &mut opt, &opts(30), |_| {})
            .unwrap();
        assert_eq!(log.example_gradients, 30 * 64);

        let mut plain = m0.clone();
        let mut opt = Optimizer::adam(1e-3, plain.param_count());
        for _ in 0..30 {
            let f = plain.forward(&ts0.coords).unwrap();
            let g = plain.backward(&ts0.coords, &f.sub(&ts0.targets).unwrap()).unwrap();
            opt.step(&mut plain, &g, 1e-3).unwrap();
        }
        assert_eq!(m.params(), plain.params());
    }

    #[test]
    fn large_eps_stops_before_any_step() {
        let (mut m, mut ts) = problem();
        let before = m.clone();
        let mut opt = Optimizer::sgd(1e-2);
        let mut o = opts(10);
        o.eps = 1e9;
        let log = int_train(&mut m, &mut ts, &IntConfig::full_batch(), &mut opt, &o, |_| {}).unwrap();
        assert!(log.stopped_early);
        assert_eq!(log.optimizer_steps, 0);
        assert_eq!(m, before);
    }

    #[test]
    fn selection_constant_between_refreshes() {
        let (mut m, mut ts) = problem();
        let cfg = IntConfig {
            ratio: RatioSchedule::Constant { r: 0.25 },
            interval: IntervalSchedule::Incremental {
                i_start: 1,
                i_end: 5,
                num_stages: 2,
            },
            minibatch_size: None,
            selection: Selection::TopK,
        };
        let mut opt = Optimizer::adam(1e-3, m.param_count());
        let mut events = Vec::new();
        let log = int_train(&mut m, &mut ts, &cfg, &mut opt, &opts(20), |e| {
            events.push(e.step)
        })
        .unwrap();
        // every step in stage 0, then every 5 steps counted from the last refresh
        let want: Vec<usize> = (0..10).chain([14, 19]).collect();
        assert_eq!(events, want);
        assert!(log.rows.iter().all(|r| r.k_selected == 16));
        assert_eq!(log.example_gradients, 20 * 16);
    }

    #[test]
    fn minibatch_run_is_reproducible() {
        let run = || {
            let (mut m, mut ts) = problem();
            let cfg = IntConfig {
                ratio: RatioSchedule::Constant { r: 0.5 },
                interval: IntervalSchedule::Dense,
                minibatch_size: Some(16),
                selection: Selection::TopK,
            };
            let mut opt = Optimizer::adam(1e-3, m.param_count());
            let log = int_train(&mut m, &mut ts, &cfg, &mut opt, &opts(12), |_| {}).unwrap();
            (m, log.example_gradients)
        };
        let (a, ga) = run();
        let (b, gb) = run();
        assert_eq!(a.params(), b.params());
        assert_eq!(ga, 12 * 8);
        assert_eq!(gb, ga);
    }

    #[test]
    fn training_reduces_loss() {
        let (mut m, mut ts) = problem();
        let mut opt = Optimizer::adam(1e-3, m.param_count());
        let log = int_train(&mut m, &mut ts, &IntConfig::full_batch(), &mut opt, &opts(200), |_| {})
            .unwrap();
        assert!(log.rows.last().unwrap().loss < 0.1 * log.rows[0].loss);
    }
}
