use std::sync::Arc;

use orgfw::metrics::{regret_curve, solve_comparator, solve_comparator_with, theoretical_regret_bound, BoundParams};
use orgfw::stream::{build_stream, perturbation_dataset, synthetic_dataset, synthetic_quadratic};
use orgfw::verify::random_logistic_loss;
use orgfw::{
    Algorithm, ComparatorMethod, FeasibleSet, LearnerConfig, LossModel, Point, RoundLoss, RoundRecord, RoundSource,
    StreamMode,
};

const DIM: usize = 5;
const ROUNDS: usize = 1024;

/// Largest deviations of round losses and gradients from the reference over a few probe points.
fn deviations(losses: &[RoundLoss<f64>], reference: &RoundLoss<f64>, probes: &[Point<f64>]) -> (f64, f64) {
    let (mut sigma, mut m) = (0.0f64, 0.0f64);
    for rl in losses {
        for x in probes {
            sigma = sigma.max(rl.grad_exact(x).unwrap().distance(&reference.grad_exact(x).unwrap()));
            m = m.max((rl.loss(x).unwrap() - reference.loss(x).unwrap()).abs());
        }
    }
    (sigma, m)
}

#[test]
fn quadratic_regret_stays_under_the_bound() {
    let set = FeasibleSet::column_l1_ball(DIM, 1, 2.0).unwrap();
    let probes = set.vertex_enumerate().unwrap();
    let seeds = 0..20u64;
    let mut inside = 0;
    for seed in seeds.clone() {
        let model = Arc::new(synthetic_quadratic(DIM, 1.0, seed).unwrap());
        let ds = perturbation_dataset(DIM, 1000, 1.0, seed).unwrap();
        let stream = build_stream(&ds, model, StreamMode::Stochastic, 8, ROUNDS, seed).unwrap();
        let losses = stream.losses().unwrap();
        let reference = stream.reference_loss().unwrap();

        let cfg = LearnerConfig::new(Algorithm::Orgfw, ROUNDS).with_seed(seed);
        let records = orgfw::run(&cfg, &losses, &set, ROUNDS).unwrap();
        let cmp = solve_comparator(&losses, &set, 10_000).unwrap();
        let regret = *regret_curve(&records, &losses, &cmp).unwrap().last().unwrap();

        let best = solve_comparator(std::slice::from_ref(&reference), &set, 10_000).unwrap();
        let x1 = Point::zeros(DIM, 1);
        let (sigma, m) = deviations(&losses[..64], &reference, &probes);
        let params = BoundParams {
            l: reference.lipschitz_estimate(&set, 64, seed).unwrap(),
            d: set.diameter(),
            sigma,
            sigma_hat: 0.0,
            m,
            q: reference.loss(&x1).unwrap() - best.objective_value,
            delta: 0.05,
        };
        params.validate().unwrap();
        if regret <= theoretical_regret_bound(&params, ROUNDS) {
            inside += 1;
        }
    }
    assert!(inside * 100 >= 95 * seeds.count(), "{inside} seeds inside");
}

#[test]
fn unseparated_labels_cost_log_classes_per_sample() {
    let (n, c) = (2000, 3);
    let ds = synthetic_dataset::<f64>(5, c, n, 0.0, 11).unwrap();
    let model = Arc::new(LossModel::logistic(5, c).unwrap());
    let all = RoundLoss::new(ds.samples().clone(), &(0..n).collect::<Vec<_>>(), model).unwrap();
    let set = FeasibleSet::column_l1_ball(5, c, 4.0).unwrap();
    let cmp = solve_comparator(&[all], &set, 10_000).unwrap();
    let chance = n as f64 * (c as f64).ln();
    assert!(cmp.objective_value <= chance + 1e-9);
    assert!(cmp.objective_value >= 0.98 * chance, "{} vs {chance}", cmp.objective_value);
}

#[test]
fn regret_against_a_fixed_loss_never_decreases() {
    let rl = random_logistic_loss(4, 3, 20, 6).unwrap();
    let set = FeasibleSet::column_l1_ball(4, 3, 1.0).unwrap();
    let losses = vec![rl; 200];
    let cmp = solve_comparator(&losses, &set, 10_000).unwrap();
    for algo in [Algorithm::Orgfw, Algorithm::Osfw, Algorithm::Ofw] {
        let records = orgfw::run(&LearnerConfig::new(algo, 200), &losses, &set, 200).unwrap();
        let curve = regret_curve(&records, &losses, &cmp).unwrap();
        assert!(curve[0] >= 0.0);
        for w in curve.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{algo:?}: {} after {}", w[1], w[0]);
        }
    }

    let still: Vec<RoundRecord<f64>> = (1..=200)
        .map(|t| RoundRecord::new(t, losses[t - 1].loss(&cmp.x_star).unwrap()))
        .collect();
    assert!(regret_curve(&still, &losses, &cmp).unwrap().iter().all(|&r| r == 0.0));
}

#[test]
fn comparator_certificate_tightens_with_iterations() {
    let ds = synthetic_dataset::<f64>(8, 3, 600, 1.0, 12).unwrap();
    let model = Arc::new(LossModel::logistic(8, 3).unwrap());
    let stream = build_stream(&ds, model, StreamMode::Stochastic, 16, 40, 3).unwrap();
    let losses: Vec<RoundLoss<f64>> = (1..=40).map(|t| stream.round_loss(t).unwrap()).collect();
    let set = FeasibleSet::column_l1_ball(8, 3, 4.0).unwrap();
    let mut last = f64::INFINITY;
    for iters in [1250, 2500, 5000, 10_000] {
        let cmp = solve_comparator_with(&losses, &set, ComparatorMethod::Auto { iters }).unwrap();
        assert!(cmp.gap <= last + 1e-12, "{iters}: {} after {last}", cmp.gap);
        last = cmp.gap;
    }
    assert!(last <= 1e-6, "{last}");
}
