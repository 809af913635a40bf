use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use orgfw::keyed::{keyed_rng, Domain};
use orgfw::metrics::{attach_regret, solve_comparator};
use orgfw::stream::{
    build_stream, load_cifar10, load_idx, perturbation_dataset, read_dataset_csv, synthetic_dataset,
    synthetic_quadratic,
};
use orgfw::verify::{fit_regret_slope, quantile};
use orgfw::{
    run_monitored, Algorithm, Comparator, Dataset, FeasibleSet, LearnerConfig, LossModel, Monitor, NoiseSpec, Point,
    RoundLoss, RoundRecord, ScheduleSpec, Stream,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{resolve_data_path, DataSource, ModelKind, NoiseConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::records::write_records;

/// Dataset, loss model and feasible set shared by every seed of a run.
#[derive(Clone, Debug)]
pub struct Problem {
    pub dataset: Dataset<f64>,
    pub model: Arc<LossModel<f64>>,
    pub set: FeasibleSet<f64>,
}

pub fn load_dataset(source: &DataSource) -> Result<Dataset<f64>> {
    Ok(match source {
        DataSource::Synthetic(s) => synthetic_dataset(s.d, s.classes, s.n, s.separation, s.seed)?,
        DataSource::Quadratic(q) => perturbation_dataset(q.dim, q.n, q.scale, q.seed)?,
        DataSource::Mnist(m) => {
            let ds = load_idx(resolve_data_path(&m.images), resolve_data_path(&m.labels))?;
            m.limit.map_or(ds.clone(), |n| ds.truncated(n))
        }
        DataSource::Cifar10(c) => {
            let files: Vec<PathBuf> = c.files.iter().map(|p| resolve_data_path(p)).collect();
            let ds = load_cifar10(&files)?;
            c.limit.map_or(ds.clone(), |n| ds.truncated(n))
        }
        DataSource::Csv(c) => {
            let path = resolve_data_path(&c.path);
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("csv").to_owned();
            read_dataset_csv(fs::File::open(&path)?, &name)?
        }
    })
}

pub fn build_problem(cfg: &RunConfig) -> Result<Problem> {
    let dataset = load_dataset(&cfg.source)?;
    cfg.check_dataset_len(dataset.len())?;
    let (model, set) = match (cfg.model, &cfg.source) {
        (ModelKind::Quadratic, DataSource::Quadratic(q)) => (
            synthetic_quadratic(q.dim, q.curvature, q.seed)?,
            FeasibleSet::column_l1_ball(q.dim, 1, cfg.radius)?,
        ),
        (ModelKind::Quadratic, _) => unreachable!("quadratic model requires a quadratic source"),
        (ModelKind::Logistic, _) => (
            LossModel::logistic(dataset.features(), dataset.classes())?,
            FeasibleSet::column_l1_ball(dataset.features(), dataset.classes(), cfg.radius)?,
        ),
        (ModelKind::Nn, _) => {
            let m = LossModel::one_hidden_nn(dataset.features(), cfg.hidden, dataset.classes())?;
            let set = m.nn_feasible_set(cfg.radius_w, cfg.radius_b)?;
            (m, set)
        }
    };
    Ok(Problem {
        dataset,
        model: Arc::new(model),
        set,
    })
}

pub fn seed_stream(cfg: &RunConfig, p: &Problem, seed: u64, rounds: usize) -> Result<Stream<f64>> {
    Ok(build_stream(&p.dataset, p.model.clone(), cfg.mode, cfg.batch, rounds, seed)?)
}

pub fn learner_config(cfg: &RunConfig, algo: Algorithm, seed: u64, rounds: usize) -> Result<LearnerConfig<f64>> {
    let mut lc = LearnerConfig::new(algo, rounds)
        .with_schedule(ScheduleSpec::new(cfg.alpha)?)
        .with_seed(seed);
    lc.ftpl_scale = cfg.ftpl_scale;
    if let Some(k) = cfg.inner_steps {
        lc = lc.with_inner_steps(k);
    }
    match cfg.noise {
        Some(NoiseConfig::Minibatch { size }) => lc = lc.with_noise(NoiseSpec::minibatch(size, seed)?),
        Some(NoiseConfig::Gaussian { sigma }) => lc = lc.with_noise(NoiseSpec::gaussian(sigma, seed)?),
        None => {}
    }
    Ok(lc)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CachedComparator {
    key: String,
    rows: usize,
    cols: usize,
    x_star: Vec<f64>,
    objective_value: f64,
    gap: f64,
    method_note: String,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

fn comparator_key(cfg: &RunConfig, seed: u64, rounds: usize) -> String {
    format!(
        "{:?}|{:?}|{}|B={}|T={}|seed={}|r={}|iters={}",
        cfg.source, cfg.model, cfg.mode, cfg.batch, rounds, seed, cfg.radius, cfg.comparator_iters
    )
}

pub fn comparator_cache_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join("comparators")
}

/// Comparator of the realized `rounds`-round stream of `seed`, read from or written to the cache.
///
/// Returns `None` for nonconvex models.
pub fn comparator(cfg: &RunConfig, p: &Problem, seed: u64, rounds: usize) -> Result<Option<Comparator<f64>>> {
    if !p.model.is_convex() {
        return Ok(None);
    }
    let key = comparator_key(cfg, seed, rounds);
    let dir = comparator_cache_dir(cfg);
    let path = dir.join(format!("{:016x}.json", fnv1a(&key)));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(c) = serde_json::from_str::<CachedComparator>(&text) {
            if c.key == key {
                return Ok(Some(Comparator {
                    x_star: Point::from_col_major(c.rows, c.cols, c.x_star)?,
                    objective_value: c.objective_value,
                    gap: c.gap,
                    method_note: c.method_note,
                }));
            }
        }
    }
    let losses = seed_stream(cfg, p, seed, rounds)?.losses()?;
    let cmp = solve_comparator(&losses, &p.set, cfg.comparator_iters)?;
    fs::create_dir_all(&dir).map_err(|source| CliError::OutputDir { path: dir.clone(), source })?;
    let cached = CachedComparator {
        key,
        rows: cmp.x_star.rows(),
        cols: cmp.x_star.cols(),
        x_star: cmp.x_star.as_slice().to_vec(),
        objective_value: cmp.objective_value,
        gap: cmp.gap,
        method_note: cmp.method_note.clone(),
    };
    fs::write(&path, serde_json::to_string(&cached)?)?;
    Ok(Some(cmp))
}

/// Runs one learner over the stream of `seed` and attaches regret when a comparator exists.
pub fn run_seed(
    cfg: &RunConfig,
    p: &Problem,
    algo: Algorithm,
    seed: u64,
    rounds: usize,
    cmp: Option<&Comparator<f64>>,
    monitor: bool,
) -> Result<Vec<RoundRecord<f64>>> {
    let stream = seed_stream(cfg, p, seed, rounds)?;
    let lc = learner_config(cfg, algo, seed, rounds)?;
    let mon = if monitor {
        Some(Monitor {
            reference: stream.reference_loss()?,
            est_error: true,
            fw_gap: true,
        })
    } else {
        None
    };
    let mut recs = run_monitored(&lc, &stream, &p.set, rounds, mon.as_ref(), |_, _| {})?;
    if let Some(c) = cmp {
        attach_regret(&mut recs, &stream.losses()?, c)?;
    }
    Ok(recs)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub p10: f64,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        (!values.is_empty()).then(|| Self {
            min: quantile(values, 0.0),
            p10: quantile(values, 0.1),
            median: quantile(values, 0.5),
            p90: quantile(values, 0.9),
            max: quantile(values, 1.0),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeSummary {
    pub t_grid: Vec<usize>,
    pub median_final_regret: Vec<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub csv: String,
    pub inner_steps: Option<usize>,
    pub final_regret: Option<Quantiles>,
    pub cumulative_loss: Quantiles,
    pub median_round_time_ns: f64,
    pub min_fw_gap: Option<Quantiles>,
    pub slope: Option<SlopeSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalConstants {
    /// Largest observed `‖∇f̄(x) − ∇f̄(y)‖ / ‖x − y‖`.
    pub lipschitz: f64,
    /// Largest observed `‖∇f_t(x) − ∇f̄(x)‖`.
    pub sigma: f64,
    /// Largest observed `‖∇̃f_t(x) − ∇f_t(x)‖` under the configured noise.
    pub sigma_hat: Option<f64>,
    /// Largest observed `|f_t(x) − f̄(x)|`.
    pub m: f64,
    pub diameter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparatorSummary {
    pub seed: u64,
    pub objective_value: f64,
    pub gap: f64,
    pub method_note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n: usize,
    pub features: usize,
    pub classes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    pub empirical: EmpiricalConstants,
    pub comparators: Vec<ComparatorSummary>,
    pub algorithms: Vec<AlgorithmSummary>,
}

/// In-memory results of [`run_experiment`]; `runs[i]` belongs to `cfg.algorithms[i]`.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub runs: Vec<(Algorithm, Vec<(u64, Vec<RoundRecord<f64>>)>)>,
    pub csv_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

pub fn csv_file_name(algo: Algorithm) -> String {
    format!("{}.csv", algo.name())
}

const PROBE_POINTS: usize = 8;
const PROBE_ROUNDS: usize = 32;
const LIPSCHITZ_PAIRS: usize = 64;

fn empirical_constants(cfg: &RunConfig, p: &Problem, stream: &Stream<f64>) -> Result<EmpiricalConstants> {
    let seed = stream.seed;
    let reference = stream.reference_loss()?;
    let lipschitz = reference.lipschitz_estimate(&p.set, LIPSCHITZ_PAIRS, seed)?;
    let mut rng = keyed_rng(seed, Domain::Probe, 1, 0);
    let points: Vec<Point<f64>> = (0..PROBE_POINTS).map(|_| p.set.sample(&mut rng)).collect();
    let noise = learner_config(cfg, Algorithm::Orgfw, seed, stream.rounds)?.noise;
    let (mut sigma, mut m, mut sigma_hat) = (0.0f64, 0.0f64, 0.0f64);
    for t in 1..=stream.rounds.min(PROBE_ROUNDS) {
        let rl: RoundLoss<f64> = orgfw::RoundSource::round_loss(stream, t)?;
        for x in &points {
            sigma = sigma.max(rl.grad_exact(x)?.distance(&reference.grad_exact(x)?));
            m = m.max((rl.loss(x)? - reference.loss(x)?).abs());
            if let Some(n) = &noise {
                sigma_hat = sigma_hat.max(rl.noise_radius(x, n, t as u64, 4)?);
            }
        }
    }
    Ok(EmpiricalConstants {
        lipschitz,
        sigma,
        sigma_hat: noise.map(|_| sigma_hat),
        m,
        diameter: p.set.diameter(),
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::OutputDir {
        path: dir.to_path_buf(),
        source,
    })
}

/// Runs every configured algorithm on every seed and writes `<ALGO>.csv` plus `summary.json`.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput> {
    ensure_dir(&cfg.output_dir)?;
    let p = build_problem(cfg)?;

    let comparators: Vec<Option<Comparator<f64>>> = cfg
        .seeds
        .par_iter()
        .map(|&s| comparator(cfg, &p, s, cfg.rounds))
        .collect::<Result<_>>()?;

    let jobs: Vec<(Algorithm, usize)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| (0..cfg.seeds.len()).map(move |i| (a, i)))
        .collect();
    let results: Vec<Vec<RoundRecord<f64>>> = jobs
        .par_iter()
        .map(|&(a, i)| run_seed(cfg, &p, a, cfg.seeds[i], cfg.rounds, comparators[i].as_ref(), cfg.monitor))
        .collect::<Result<_>>()?;
    let mut results = results.into_iter();
    let runs: Vec<(Algorithm, Vec<(u64, Vec<RoundRecord<f64>>)>)> = cfg
        .algorithms
        .iter()
        .map(|&a| (a, cfg.seeds.iter().map(|&s| (s, results.next().unwrap())).collect()))
        .collect();

    let mut csv_paths = Vec::new();
    for (a, per_seed) in &runs {
        let path = cfg.output_dir.join(csv_file_name(*a));
        let file = fs::File::create(&path).map_err(|source| CliError::OutputDir {
            path: path.clone(),
            source,
        })?;
        write_records(std::io::BufWriter::new(file), per_seed)?;
        csv_paths.push(path);
    }

    let slopes = slope_fits(cfg, &p)?;
    let algorithms = runs
        .iter()
        .zip(slopes)
        .map(|((a, per_seed), slope)| summarize_algorithm(cfg, *a, per_seed, slope))
        .collect();

    let first = seed_stream(cfg, &p, cfg.seeds[0], cfg.rounds)?;
    let summary = RunSummary {
        config: cfg.clone(),
        dataset: DatasetSummary {
            name: p.dataset.name().to_owned(),
            n: p.dataset.len(),
            features: p.dataset.features(),
            classes: p.dataset.classes(),
        },
        empirical: empirical_constants(cfg, &p, &first)?,
        comparators: cfg
            .seeds
            .iter()
            .zip(&comparators)
            .filter_map(|(&seed, c)| {
                c.as_ref().map(|c| ComparatorSummary {
                    seed,
                    objective_value: c.objective_value,
                    gap: c.gap,
                    method_note: c.method_note.clone(),
                })
            })
            .collect(),
        algorithms,
    };
    let summary_path = cfg.output_dir.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(RunOutput {
        summary,
        runs,
        csv_paths,
        summary_path,
    })
}

fn summarize_algorithm(
    cfg: &RunConfig,
    algo: Algorithm,
    per_seed: &[(u64, Vec<RoundRecord<f64>>)],
    slope: Option<SlopeSummary>,
) -> AlgorithmSummary {
    let finals: Vec<f64> = per_seed
        .iter()
        .filter_map(|(_, r)| r.last().and_then(|r| r.cum_regret))
        .collect();
    let cum_loss: Vec<f64> = per_seed.iter().map(|(_, r)| r.iter().map(|r| r.loss).sum()).collect();
    let times: Vec<f64> = per_seed
        .iter()
        .flat_map(|(_, r)| r.iter().map(|r| r.wall_time_ns as f64))
        .collect();
    let min_gaps: Vec<f64> = per_seed
        .iter()
        .filter_map(|(_, r)| r.iter().filter_map(|r| r.fw_gap).reduce(f64::min))
        .collect();
    AlgorithmSummary {
        algorithm: algo.name().to_owned(),
        csv: csv_file_name(algo),
        inner_steps: cfg.inner_steps_for(algo, cfg.rounds),
        final_regret: Quantiles::of(&finals),
        cumulative_loss: Quantiles::of(&cum_loss).expect("at least one seed"),
        median_round_time_ns: quantile(&times, 0.5),
        min_fw_gap: Quantiles::of(&min_gaps),
        slope,
    }
}

/// Final regret on every horizon of `t_grid` for each algorithm, with a log-log fit.
fn slope_fits(cfg: &RunConfig, p: &Problem) -> Result<Vec<Option<SlopeSummary>>> {
    if cfg.t_grid.is_empty() || !p.model.is_convex() {
        return Ok(vec![None; cfg.algorithms.len()]);
    }
    let pairs: Vec<(usize, u64)> = cfg
        .t_grid
        .iter()
        .flat_map(|&t| cfg.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let cmps: Vec<Comparator<f64>> = pairs
        .par_iter()
        .map(|&(t, s)| comparator(cfg, p, s, t).map(|c| c.expect("convex model")))
        .collect::<Result<_>>()?;
    cfg.algorithms
        .iter()
        .map(|&a| {
            let finals: Vec<f64> = pairs
                .par_iter()
                .zip(&cmps)
                .map(|(&(t, s), c)| {
                    let recs = run_seed(cfg, p, a, s, t, Some(c), false)?;
                    Ok(recs.last().and_then(|r| r.cum_regret).unwrap_or(f64::NAN))
                })
                .collect::<Result<_>>()?;
            let runs: Vec<(usize, Vec<f64>)> = cfg
                .t_grid
                .iter()
                .zip(finals.chunks(cfg.seeds.len()))
                .map(|(&t, v)| (t, v.to_vec()))
                .collect();
            let median_final_regret = runs.iter().map(|(_, v)| quantile(v, 0.5)).collect();
            let (slope, intercept, r_squared, error) = match fit_regret_slope(&runs) {
                Ok(f) => (Some(f.slope), Some(f.intercept), Some(f.r_squared), None),
                Err(e) => (None, None, None, Some(e.to_string())),
            };
            Ok(Some(SlopeSummary {
                t_grid: cfg.t_grid.clone(),
                median_final_regret,
                slope,
                intercept,
                r_squared,
                error,
            }))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a("a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn quantiles_of_empty_is_none() {
        assert!(Quantiles::of(&[]).is_none());
        let q = Quantiles::of(&[1.0, 3.0, 2.0]).unwrap();
        assert_eq!((q.min, q.median, q.max), (1.0, 2.0, 3.0));
    }
}
