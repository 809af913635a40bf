use std::sync::Arc;

use orgfw::stream::{build_stream, synthetic_dataset};
use orgfw::verify::{random_logistic_loss, random_nn_loss};
use orgfw::{
    run_monitored, Algorithm, EstimatorKind, EstimatorState, FeasibleSet, Learner, LearnerConfig, LossModel,
    NoiseSpec, Point, RoundLoss, RoundRecord, StreamMode,
};
use orgfw::algorithms::FtplState;
use proptest::prelude::*;

fn strip_time(mut recs: Vec<RoundRecord<f64>>) -> Vec<RoundRecord<f64>> {
    for r in &mut recs {
        r.wall_time_ns = 0;
    }
    recs
}

fn vec_of(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

proptest! {
    #[test]
    fn recursive_and_momentum_with_full_reset_equal_plain(
        steps in prop::collection::vec((vec_of(4), vec_of(4), vec_of(4)), 1..20),
        g1 in vec_of(4),
    ) {
        let x1 = Point::zeros(4, 1);
        let g1 = Point::vector(&g1).unwrap();
        let mut plain = EstimatorState::init(EstimatorKind::Plain, &x1, g1.clone()).unwrap();
        let mut rec = EstimatorState::init(EstimatorKind::Recursive, &x1, g1.clone()).unwrap();
        let mut mom = EstimatorState::init(EstimatorKind::MomentumAverage, &x1, g1).unwrap();
        for (x, gn, go) in &steps {
            let (x, gn, go) = (Point::vector(x).unwrap(), Point::vector(gn).unwrap(), Point::vector(go).unwrap());
            plain.update(&x, &gn, &go, 1.0).unwrap();
            rec.update(&x, &gn, &go, 1.0).unwrap();
            mom.update(&x, &gn, &go, 1.0).unwrap();
            prop_assert_eq!(rec.estimate().as_slice(), plain.estimate().as_slice());
            prop_assert_eq!(mom.estimate().as_slice(), plain.estimate().as_slice());
        }
    }
}

struct Case {
    name: &'static str,
    losses: Vec<RoundLoss<f64>>,
    set: FeasibleSet<f64>,
}

fn cases(rounds: usize) -> Vec<Case> {
    let ds = synthetic_dataset::<f64>(4, 3, 400, 1.5, 3).unwrap();
    let logistic = Arc::new(LossModel::logistic(4, 3).unwrap());
    let nn = Arc::new(LossModel::one_hidden_nn(4, 3, 3).unwrap());
    let stoch = build_stream(&ds, logistic.clone(), StreamMode::Stochastic, 8, rounds, 1).unwrap();
    let adv = build_stream(&ds, logistic, StreamMode::Adversarial, 8, rounds, 1).unwrap();
    let nn_stream = build_stream(&ds, nn.clone(), StreamMode::Stochastic, 8, rounds, 2).unwrap();
    let fixed = random_logistic_loss(4, 3, 6, 9).unwrap();
    vec![
        Case {
            name: "l1 ball, stochastic",
            losses: stoch.losses().unwrap(),
            set: FeasibleSet::column_l1_ball(4, 3, 2.0).unwrap(),
        },
        Case {
            name: "l1 ball, adversarial",
            losses: adv.losses().unwrap(),
            set: FeasibleSet::column_l1_ball(4, 3, 5.0).unwrap(),
        },
        Case {
            name: "simplex, fixed loss",
            losses: vec![fixed.clone(); rounds],
            set: FeasibleSet::simplex(4, 3, 3.0).unwrap(),
        },
        Case {
            name: "l2 ball, fixed loss",
            losses: vec![fixed; rounds],
            set: FeasibleSet::l2_ball(4, 3, 1.5).unwrap(),
        },
        Case {
            name: "network blocks",
            losses: nn_stream.losses().unwrap(),
            set: nn.nn_feasible_set(2.0, 1.0).unwrap(),
        },
    ]
}

fn configs(rounds: usize, seed: u64) -> Vec<LearnerConfig<f64>> {
    let mut out = Vec::new();
    for algo in Algorithm::ALL {
        let base = LearnerConfig::new(algo, rounds).with_seed(seed).with_inner_steps(6);
        out.push(base.clone());
        out.push(base.clone().with_noise(NoiseSpec::minibatch(2, seed).unwrap()));
        out.push(base.with_noise(NoiseSpec::gaussian(3.0, seed).unwrap()));
    }
    out
}

#[test]
fn every_played_point_is_feasible() {
    let rounds = 24;
    for case in cases(rounds) {
        for cfg in configs(rounds, 4) {
            let mut worst: Option<usize> = None;
            let recs = run_monitored(&cfg, &case.losses, &case.set, rounds, None, |t, x| {
                if !case.set.contains(x, 1e-9) && worst.is_none() {
                    worst = Some(t);
                }
            })
            .unwrap();
            assert_eq!(worst, None, "{} / {:?}", case.name, cfg.algo);
            let rounds_seen: Vec<usize> = recs.iter().map(|r| r.round).collect();
            assert_eq!(rounds_seen, (1..=rounds).collect::<Vec<_>>());
        }
    }
}

#[test]
fn runs_are_pure_functions_of_config() {
    let rounds = 16;
    for case in cases(rounds).into_iter().take(2) {
        for cfg in configs(rounds, 7) {
            let a = orgfw::run(&cfg, &case.losses, &case.set, rounds).unwrap();
            let b = orgfw::run(&cfg, &case.losses, &case.set, rounds).unwrap();
            assert_eq!(strip_time(a), strip_time(b), "{} / {:?}", case.name, cfg.algo);
        }
    }
}

#[test]
fn meta_learners_coincide_without_noise() {
    let rounds = 8;
    for case in cases(rounds) {
        let mut morgfw = Learner::new(LearnerConfig::new(Algorithm::Morgfw, rounds).with_seed(3), case.set.clone()).unwrap();
        let mut meta = Learner::new(
            LearnerConfig::new(Algorithm::MetaFw, rounds).with_seed(3).with_inner_steps(rounds),
            case.set.clone(),
        )
        .unwrap();
        for rl in &case.losses {
            let (xa, _) = morgfw.step(rl, None).unwrap();
            let (xb, _) = meta.step(rl, None).unwrap();
            assert_eq!(xa.as_slice(), xb.as_slice(), "{}", case.name);
            assert_eq!(morgfw.state().ftpl, meta.state().ftpl, "{}", case.name);
        }
    }
}

#[test]
fn meta_feedback_is_the_exact_inner_gradient() {
    let rounds = 8;
    let loss = random_nn_loss(3, 2, 3, 5, 1).unwrap();
    let set = loss.model().nn_feasible_set(1.0, 1.0).unwrap();
    let cfg = LearnerConfig::new(Algorithm::Morgfw, rounds).with_seed(2);
    let mut learner = Learner::new(cfg.clone(), set.clone()).unwrap();
    let mut sums: Vec<Point<f64>> = vec![Point::zeros(set.dims().0, set.dims().1); rounds];
    for _ in 0..rounds {
        let mut x = learner.state().initial.clone();
        let mut bases = learner.state().ftpl.clone();
        if bases.is_empty() {
            bases = (0..rounds).map(|k| FtplState::seeded(set.dims(), k, 1.0, rounds, 2)).collect();
        }
        for (k, f) in bases.iter().enumerate() {
            sums[k].axpy(1.0, &loss.grad_exact(&x).unwrap());
            x = x.step_toward(&f.predict(&set).unwrap(), cfg.schedule.rho(k + 1).unwrap());
        }
        let (played, _) = learner.step(&loss, None).unwrap();
        assert_eq!(played.as_slice(), x.as_slice());
    }
    for (k, f) in learner.state().ftpl.iter().enumerate() {
        let err = f.accumulated.distance(&sums[k]);
        assert!(err <= 1e-12 * sums[k].norm().max(1.0), "learner {k}: {err}");
    }
}
