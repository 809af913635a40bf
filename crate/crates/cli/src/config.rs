//! Run configuration: a TOML document plus flat `key=value` overrides.
//!
//! ```toml
//! algorithm = ["ORGFW", "OSFW"]
//! T = 256
//! seeds = [0, 1, 2]
//!
//! [synthetic]
//! d = 10
//! C = 3
//! n = 1000
//! ```

use std::path::{Path, PathBuf};

use orgfw::{Algorithm, StreamMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Directory that relative dataset paths are resolved against.
pub const DATA_DIR_ENV: &str = "ORGFW_DATA_DIR";

pub const MNIST_BATCH: usize = 600;
pub const MNIST_RADIUS: f64 = 8.0;
pub const CIFAR_BATCH: usize = 500;
pub const CIFAR_RADIUS: f64 = 32.0;
pub const NN_HIDDEN: usize = 10;
pub const NN_RADIUS: f64 = 10.0;
pub const NN_BATCH: usize = 16;
pub const ADVERSARIAL_ROUNDS: usize = 100;
pub const DEFAULT_BATCH: usize = 32;
pub const DEFAULT_RADIUS: f64 = 8.0;
pub const DEFAULT_COMPARATOR_ITERS: usize = 10_000;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    algorithm: Option<OneOrMany>,
    #[serde(rename = "T")]
    rounds: Option<usize>,
    #[serde(rename = "K")]
    inner_steps: Option<usize>,
    mode: Option<String>,
    batch: Option<usize>,
    radius: Option<f64>,
    radius_w: Option<f64>,
    radius_b: Option<f64>,
    alpha: Option<f64>,
    seeds: Option<Vec<u64>>,
    noise: Option<NoiseConfig>,
    output_dir: Option<PathBuf>,
    model: Option<String>,
    hidden: Option<usize>,
    ftpl_scale: Option<f64>,
    comparator_iters: Option<usize>,
    t_grid: Option<Vec<usize>>,
    monitor: Option<bool>,
    synthetic: Option<SyntheticSource>,
    quadratic: Option<QuadraticSource>,
    mnist: Option<MnistSource>,
    cifar10: Option<CifarSource>,
    csv: Option<CsvSource>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub d: usize,
    #[serde(rename = "C")]
    pub classes: usize,
    pub n: usize,
    #[serde(default = "one")]
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSource {
    pub dim: usize,
    #[serde(default = "half")]
    pub curvature: f64,
    #[serde(default = "thousand")]
    pub n: usize,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MnistSource {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CifarSource {
    pub files: Vec<PathBuf>,
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn thousand() -> usize {
    1000
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseConfig {
    Minibatch { size: usize },
    Gaussian { sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticSource),
    Quadratic(QuadraticSource),
    Mnist(MnistSource),
    Cifar10(CifarSource),
    Csv(CsvSource),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logistic,
    Nn,
    Quadratic,
}

/// A validated run configuration with all defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(serialize_with = "display_all")]
    pub algorithms: Vec<Algorithm>,
    pub source: DataSource,
    pub model: ModelKind,
    #[serde(serialize_with = "display_one")]
    pub mode: StreamMode,
    #[serde(rename = "T")]
    pub rounds: usize,
    /// Explicit `K`; `None` means `T` for MORGFW and `⌈T^{3/2}⌉` for MetaFW.
    #[serde(rename = "K")]
    pub inner_steps: Option<usize>,
    pub batch: usize,
    pub radius: f64,
    pub radius_w: f64,
    pub radius_b: f64,
    pub hidden: usize,
    pub alpha: f64,
    pub seeds: Vec<u64>,
    pub noise: Option<NoiseConfig>,
    pub output_dir: PathBuf,
    pub ftpl_scale: f64,
    pub comparator_iters: usize,
    pub t_grid: Vec<usize>,
    pub monitor: bool,
}

impl RunConfig {
    /// Parses a TOML document, applies `key=value` overrides, then validates.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let raw = RawConfig::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let names = match raw.algorithm.ok_or(CliError::MissingField("algorithm"))? {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        };
        if names.is_empty() {
            return Err(CliError::Config("`algorithm` lists no algorithms".into()));
        }
        let mut algorithms = Vec::with_capacity(names.len());
        for n in &names {
            let a: Algorithm = n.parse()?;
            if algorithms.contains(&a) {
                return Err(CliError::Config(format!("algorithm `{a}` listed twice")));
            }
            algorithms.push(a);
        }

        let mut sources = Vec::new();
        if let Some(s) = raw.synthetic {
            sources.push(DataSource::Synthetic(s));
        }
        if let Some(s) = raw.quadratic {
            sources.push(DataSource::Quadratic(s));
        }
        if let Some(s) = raw.mnist {
            sources.push(DataSource::Mnist(s));
        }
        if let Some(s) = raw.cifar10 {
            sources.push(DataSource::Cifar10(s));
        }
        if let Some(s) = raw.csv {
            sources.push(DataSource::Csv(s));
        }
        let source = match sources.len() {
            0 => return Err(CliError::MissingField("synthetic | quadratic | mnist | cifar10 | csv")),
            1 => sources.pop().unwrap(),
            _ => return Err(CliError::Config("exactly one data source table may be given".into())),
        };

        let mode: StreamMode = raw.mode.as_deref().unwrap_or("stochastic").parse()?;
        let model = match (&source, raw.model.as_deref()) {
            (DataSource::Quadratic(_), None | Some("quadratic")) => ModelKind::Quadratic,
            (DataSource::Quadratic(_), Some(m)) => {
                return Err(CliError::Config(format!("model `{m}` does not apply to a quadratic source")))
            }
            (_, None | Some("logistic")) => ModelKind::Logistic,
            (_, Some("nn")) => ModelKind::Nn,
            (_, Some(m)) => {
                return Err(CliError::Config(format!("unknown model `{m}`, expected logistic or nn")))
            }
        };

        let rounds = match (raw.rounds, mode) {
            (Some(t), _) => t,
            (None, StreamMode::Adversarial) => ADVERSARIAL_ROUNDS,
            (None, StreamMode::Stochastic) => return Err(CliError::MissingField("T")),
        };
        if rounds == 0 {
            return Err(CliError::Config("`T` must be at least 1".into()));
        }

        let (batch_default, radius_default) = match (&source, model) {
            (_, ModelKind::Nn) => (NN_BATCH, DEFAULT_RADIUS),
            (DataSource::Mnist(_), _) => (MNIST_BATCH, MNIST_RADIUS),
            (DataSource::Cifar10(_), _) => (CIFAR_BATCH, CIFAR_RADIUS),
            _ => (DEFAULT_BATCH, DEFAULT_RADIUS),
        };
        let batch = raw.batch.unwrap_or(batch_default);
        if batch == 0 {
            return Err(CliError::Config("`batch` must be at least 1".into()));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Config(format!("`{name}` must be positive, got {v}")))
            }
        };
        let radius = positive("radius", raw.radius.unwrap_or(radius_default))?;
        let radius_w = positive("radius_w", raw.radius_w.unwrap_or(NN_RADIUS))?;
        let radius_b = positive("radius_b", raw.radius_b.unwrap_or(NN_RADIUS))?;
        let ftpl_scale = positive("ftpl_scale", raw.ftpl_scale.unwrap_or(1.0))?;
        let alpha = raw.alpha.unwrap_or(1.0);
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(CliError::Config(format!("`alpha` must lie in (0, 1], got {alpha}")));
        }
        if raw.inner_steps == Some(0) {
            return Err(CliError::Config("`K` must be at least 1".into()));
        }
        let seeds = raw.seeds.unwrap_or_else(|| vec![0]);
        if seeds.is_empty() {
            return Err(CliError::Config("`seeds` must not be empty".into()));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(CliError::Config("`seeds` contains duplicates".into()));
        }
        match raw.noise {
            Some(NoiseConfig::Minibatch { size: 0 }) => {
                return Err(CliError::Config("noise minibatch size must be at least 1".into()))
            }
            Some(NoiseConfig::Gaussian { sigma }) if !(sigma >= 0.0 && sigma.is_finite()) => {
                return Err(CliError::Config(format!("noise sigma must be non-negative, got {sigma}")))
            }
            _ => {}
        }
        let t_grid = raw.t_grid.unwrap_or_default();
        if t_grid.iter().any(|&t| t == 0) {
            return Err(CliError::Config("`t_grid` entries must be at least 1".into()));
        }
        let comparator_iters = raw.comparator_iters.unwrap_or(DEFAULT_COMPARATOR_ITERS);
        if comparator_iters == 0 {
            return Err(CliError::Config("`comparator_iters` must be at least 1".into()));
        }

        let cfg = Self {
            algorithms,
            source,
            model,
            mode,
            rounds,
            inner_steps: raw.inner_steps,
            batch,
            radius,
            radius_w,
            radius_b,
            hidden: raw.hidden.unwrap_or(NN_HIDDEN),
            alpha,
            seeds,
            noise: raw.noise,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            ftpl_scale,
            comparator_iters,
            t_grid,
            monitor: raw.monitor.unwrap_or(true),
        };
        if let Some(n) = cfg.known_dataset_len() {
            cfg.check_dataset_len(n)?;
        }
        Ok(cfg)
    }

    /// Dataset size when it is fixed by the config itself.
    pub fn known_dataset_len(&self) -> Option<usize> {
        match &self.source {
            DataSource::Synthetic(s) => Some(s.n),
            DataSource::Quadratic(q) => Some(q.n),
            _ => None,
        }
    }

    /// Rejects adversarial streams that would need more than `n` samples.
    pub fn check_dataset_len(&self, n: usize) -> Result<()> {
        let longest = self.t_grid.iter().copied().chain([self.rounds]).max().unwrap_or(self.rounds);
        if self.mode == StreamMode::Adversarial && self.batch * longest > n {
            return Err(CliError::Config(format!(
                "adversarial stream needs B·T = {}·{} = {} samples but the dataset has {n}",
                self.batch,
                longest,
                self.batch * longest
            )));
        }
        Ok(())
    }

    /// `K` actually used by `algo`.
    pub fn inner_steps_for(&self, algo: Algorithm, rounds: usize) -> Option<usize> {
        algo.is_meta().then(|| {
            self.inner_steps.unwrap_or(match algo {
                Algorithm::MetaFw => orgfw::algorithms::default_meta_fw_steps(rounds),
                _ => rounds,
            })
        })
    }
}

fn display_one<T: std::fmt::Display, Ser: serde::Serializer>(v: &T, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
    s.collect_str(v)
}

fn display_all<T: std::fmt::Display, Ser: serde::Serializer>(v: &[T], s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

/// Resolves a dataset path against [`DATA_DIR_ENV`] when it is relative.
pub fn resolve_data_path(p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => Path::new(&dir).join(p),
        None => p.to_path_buf(),
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Config(format!("empty override key in `{spec}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_owned())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_owned(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
algorithm = "ORGFW"
T = 256
[synthetic]
d = 10
C = 3
n = 1000
"#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = RunConfig::parse(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.alpha, 1.0);
        assert_eq!(cfg.mode, StreamMode::Stochastic);
        assert_eq!(cfg.algorithms, vec![Algorithm::Orgfw]);
        assert_eq!(cfg.model, ModelKind::Logistic);
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.batch, DEFAULT_BATCH);
        assert!(cfg.noise.is_none());
    }

    #[test]
    fn meta_inner_step_defaults() {
        let cfg = RunConfig::parse(&MINIMAL.replace("\"ORGFW\"", "[\"MORGFW\", \"MetaFW\"]"), &[]).unwrap();
        assert_eq!(cfg.inner_steps_for(Algorithm::Morgfw, cfg.rounds), Some(256));
        assert_eq!(cfg.inner_steps_for(Algorithm::MetaFw, cfg.rounds), Some(4096));
        assert_eq!(cfg.inner_steps_for(Algorithm::Orgfw, cfg.rounds), None);
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let err = RunConfig::parse(&format!("learningrate = 0.1\n{MINIMAL}"), &[]).unwrap_err().to_string();
        assert!(err.contains("learningrate"), "{err}");
        assert!(err.contains("algorithm") && err.contains("seeds") && err.contains("synthetic"), "{err}");
        let nested = RunConfig::parse(&format!("{MINIMAL}bogus = 1\n"), &[]).unwrap_err().to_string();
        assert!(nested.contains("bogus") && nested.contains("separation"), "{nested}");
    }

    #[test]
    fn missing_and_invalid_fields() {
        assert!(matches!(
            RunConfig::parse("algorithm = \"ORGFW\"\n[synthetic]\nd=2\nC=2\nn=10\n", &[]),
            Err(CliError::MissingField("T"))
        ));
        assert!(matches!(
            RunConfig::parse("T = 4\n[synthetic]\nd=2\nC=2\nn=10\n", &[]),
            Err(CliError::MissingField("algorithm"))
        ));
        assert!(RunConfig::parse(&MINIMAL.replace("ORGFW", "SGD"), &[]).is_err());
        assert!(RunConfig::parse(MINIMAL, &["mode=sideways".into()]).is_err());
        assert!(RunConfig::parse(MINIMAL, &["alpha=1.5".into()]).is_err());
    }

    #[test]
    fn adversarial_defaults_and_length_check() {
        let text = "algorithm = \"MORGFW\"\nmode = \"adversarial\"\nbatch = 10\n[synthetic]\nd=2\nC=2\nn=1000\n";
        let cfg = RunConfig::parse(text, &[]).unwrap();
        assert_eq!(cfg.rounds, ADVERSARIAL_ROUNDS);
        assert_eq!(cfg.inner_steps_for(Algorithm::Morgfw, cfg.rounds), Some(100));
        let err = RunConfig::parse(text, &["batch=11".into()]).unwrap_err().to_string();
        assert!(err.contains("B·T"), "{err}");
    }

    #[test]
    fn dataset_defaults() {
        let mnist = "algorithm = \"ORGFW\"\nT = 5\n[mnist]\nimages = \"a\"\nlabels = \"b\"\n";
        let cfg = RunConfig::parse(mnist, &[]).unwrap();
        assert_eq!((cfg.batch, cfg.radius), (MNIST_BATCH, MNIST_RADIUS));
        let nn = RunConfig::parse(mnist, &["model=nn".into()]).unwrap();
        assert_eq!((nn.batch, nn.hidden, nn.radius_w, nn.radius_b), (NN_BATCH, 10, 10.0, 10.0));
        let cifar = "algorithm = \"ORGFW\"\nT = 5\n[cifar10]\nfiles = [\"x\"]\n";
        let cfg = RunConfig::parse(cifar, &[]).unwrap();
        assert_eq!((cfg.batch, cfg.radius), (CIFAR_BATCH, CIFAR_RADIUS));
    }

    #[test]
    fn overrides_are_typed_and_nested() {
        let cfg = RunConfig::parse(
            MINIMAL,
            &[
                "T=12".into(),
                "synthetic.separation=2.5".into(),
                "seeds=[3,4]".into(),
                "noise.kind=minibatch".into(),
                "noise.size=2".into(),
                "output_dir=somewhere".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.rounds, 12);
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!(cfg.noise, Some(NoiseConfig::Minibatch { size: 2 }));
        assert_eq!(cfg.output_dir, PathBuf::from("somewhere"));
        match cfg.source {
            DataSource::Synthetic(s) => assert_eq!(s.separation, 2.5),
            _ => unreachable!(),
        }
        assert!(RunConfig::parse(MINIMAL, &["novalue".into()]).is_err());
    }

    #[test]
    fn single_source_required() {
        let two = format!("{MINIMAL}[quadratic]\ndim = 3\n");
        assert!(RunConfig::parse(&two, &[]).is_err());
        let quad = "algorithm = \"ORGFW\"\nT = 3\n[quadratic]\ndim = 3\n";
        assert_eq!(RunConfig::parse(quad, &[]).unwrap().model, ModelKind::Quadratic);
    }
}
