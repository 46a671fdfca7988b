use inr_teach::linalg::{Matrix, Rng};
use inr_teach::nn::{Mlp, MlpArch};
use inr_teach::optim::{CosineLr, Optimizer};
use inr_teach::teaching::{
    int_train, interval_at, k_from_ratio, ratio_at, select_topk_of, IntConfig, IntervalSchedule,
    RatioSchedule, Selection, TeachingSet, TrainOptions,
};
use proptest::prelude::*;

fn ratio_schedule() -> impl Strategy<Value = RatioSchedule> {
    prop_oneof![
        (0.01f64..=1.0).prop_map(|r| RatioSchedule::Constant { r }),
        (0.01f64..0.5, 0.0f64..1.0, 1usize..12).prop_map(|(a, f, n)| RatioSchedule::StepIncremental {
            r_start: a,
            r_step: (1.0 - a) * f / n.max(2) as f64,
            num_stages: n
        }),
        (0.01f64..=1.0, 0.01f64..=1.0).prop_map(|(a, b)| RatioSchedule::Cosine { r_start: a, r_end: b }),
        (0.01f64..=1.0, 0.01f64..=1.0).prop_map(|(a, b)| RatioSchedule::ReverseCosine { r_start: a, r_end: b }),
    ]
}

fn interval_schedule() -> impl Strategy<Value = IntervalSchedule> {
    prop_oneof![
        Just(IntervalSchedule::Dense),
        (1usize..10, 10usize..100, 2usize..12).prop_map(|(a, b, n)| IntervalSchedule::Incremental {
            i_start: a,
            i_end: b,
            num_stages: n
        }),
        (1usize..10, 10usize..100, 2usize..12).prop_map(|(a, b, n)| IntervalSchedule::Decremental {
            i_start: b,
            i_end: a,
            num_stages: n
        }),
    ]
}

proptest! {
    #[test]
    fn topk_equals_full_sort(r in prop::collection::vec(0.0f64..1e3, 1..300), frac in 0.0f64..=1.0) {
        let k = ((r.len() as f64 * frac) as usize).clamp(1, r.len());
        let got = select_topk_of(&r, k).unwrap();
        let mut order: Vec<usize> = (0..r.len()).collect();
        order.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
        let mut want = order[..k].to_vec();
        want.sort_unstable();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn k_is_ceiling_within_bounds(ratio in 1e-6f64..=1.0, n in 1usize..100_000) {
        let k = k_from_ratio(ratio, n);
        prop_assert!(k >= 1 && k <= n);
        prop_assert!(k as f64 >= ratio * n as f64 - 1e-6);
        prop_assert!((k as f64) < ratio * n as f64 + 1.0 || k == 1);
    }

    #[test]
    fn schedules_stay_in_range(rs in ratio_schedule(), is in interval_schedule(), total in 1usize..20_000, frac in 0.0f64..1.0) {
        let step = ((total as f64) * frac) as usize;
        let r = ratio_at(&rs, step, total).unwrap();
        prop_assert!(r > 0.0 && r <= 1.0);
        let i = interval_at(&is, step, total).unwrap();
        prop_assert!(i >= 1);
    }

    #[test]
    fn schedule_strings_round_trip(rs in ratio_schedule(), is in interval_schedule()) {
        let r2: RatioSchedule = rs.to_string().parse().unwrap();
        let i2: IntervalSchedule = is.to_string().parse().unwrap();
        prop_assert_eq!(r2, rs);
        prop_assert_eq!(i2, is);
    }

    #[test]
    fn schedule_parser_never_panics(s in "\\PC{0,24}") {
        let _ = s.parse::<RatioSchedule>();
        let _ = s.parse::<IntervalSchedule>();
    }
}

#[test]
fn default_schedule_endpoints() {
    let r = RatioSchedule::StepIncremental {
        r_start: 0.2,
        r_step: 0.08,
        num_stages: 10,
    };
    assert!((ratio_at(&r, 0, 5000).unwrap() - 0.2).abs() < 1e-12);
    assert!((ratio_at(&r, 4999, 5000).unwrap() - 0.92).abs() < 1e-12);
    let i = IntervalSchedule::Incremental {
        i_start: 1,
        i_end: 90,
        num_stages: 10,
    };
    assert_eq!(interval_at(&i, 0, 5000).unwrap(), 1);
    assert_eq!(interval_at(&i, 600, 5000).unwrap(), 10);
    assert_eq!(interval_at(&i, 4999, 5000).unwrap(), 90);
    let c = RatioSchedule::Cosine {
        r_start: 0.2,
        r_end: 1.0,
    };
    assert!((ratio_at(&c, 2500, 5000).unwrap() - 0.6).abs() < 1e-12);
}

fn small_problem(seed: u64) -> (Mlp, TeachingSet) {
    let mut rng = Rng::new(seed);
    let x = Matrix::from_fn(64, 2, |_, _| rng.uniform(-1.0, 1.0));
    let y = Matrix::from_fn(64, 1, |i, _| (3.0 * x.get(i, 0)).sin() * x.get(i, 1));
    (
        Mlp::init(MlpArch::siren(2, 1, 16, 3), seed).unwrap(),
        TeachingSet::new(x, y).unwrap(),
    )
}

fn run(config: &IntConfig, steps: usize, seed: u64) -> (Mlp, inr_teach::teaching::RunLog) {
    let (mut mlp, mut ts) = small_problem(seed);
    let mut opt = Optimizer::adam(1e-3, mlp.param_count());
    let options = TrainOptions {
        total_steps: steps,
        lr: CosineLr::new(1e-3, 0.0, steps).unwrap(),
        eps: 0.0,
        seed,
    };
    let log = int_train(&mut mlp, &mut ts, config, &mut opt, &options, |_| {}).unwrap();
    (mlp, log)
}

#[test]
fn run_log_invariants() {
    let configs = [
        IntConfig::full_batch(),
        IntConfig {
            ratio: "step:0.2,0.08,10".parse().unwrap(),
            interval: "inc:1,90,10".parse().unwrap(),
            minibatch_size: None,
            selection: Selection::TopK,
        },
        IntConfig {
            ratio: "rcos:0.2,1".parse().unwrap(),
            interval: "dec:90,1,10".parse().unwrap(),
            minibatch_size: Some(16),
            selection: Selection::TopK,
        },
        IntConfig {
            ratio: "const:0.3".parse().unwrap(),
            interval: "dense".parse().unwrap(),
            minibatch_size: None,
            selection: Selection::Random,
        },
    ];
    for c in &configs {
        let (_, log) = run(c, 300, 1);
        assert_eq!(log.rows.len(), 300);
        assert_eq!(log.optimizer_steps, 300);
        for w in log.rows.windows(2) {
            assert!(w[1].step > w[0].step);
            assert!(w[1].wall_ms >= w[0].wall_ms);
        }
        assert!(log.rows[0].refresh);
        let total: u64 = log.rows.iter().map(|r| r.k_selected as u64).sum();
        assert_eq!(total, log.example_gradients);
        assert_eq!(log.rows.iter().filter(|r| r.refresh).count(), log.refreshes);
    }
}

#[test]
fn identical_seeds_give_identical_runs() {
    let c = IntConfig {
        ratio: "step:0.2,0.08,10".parse().unwrap(),
        interval: "inc:1,90,10".parse().unwrap(),
        minibatch_size: Some(24),
        selection: Selection::TopK,
    };
    let (m1, l1) = run(&c, 200, 5);
    let (m2, l2) = run(&c, 200, 5);
    assert_eq!(m1.params(), m2.params());
    let strip = |l: &inr_teach::teaching::RunLog| {
        l.rows.iter().map(|r| (r.step, r.loss, r.k_selected, r.lr, r.refresh)).collect::<Vec<_>>()
    };
    assert_eq!(strip(&l1), strip(&l2));
}

#[test]
fn incremental_uses_fewer_example_gradients_than_dense() {
    let int = IntConfig {
        ratio: "step:0.2,0.08,10".parse().unwrap(),
        interval: "inc:1,90,10".parse().unwrap(),
        minibatch_size: None,
        selection: Selection::TopK,
    };
    let (_, a) = run(&int, 500, 2);
    let (_, b) = run(&IntConfig::full_batch(), 500, 2);
    assert!(a.example_gradients < b.example_gradients);
}
