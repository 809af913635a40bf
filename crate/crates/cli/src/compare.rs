//! Side-by-side runs of several configs over one shared set of streams.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::experiment::{run_experiment, RunOutput};
use orgfw::verify::quantile;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareEntry {
    /// Algorithm name, suffixed with `#<config index>` when several configs run the same algorithm.
    pub label: String,
    pub algorithm: String,
    pub config_index: usize,
    pub median_final_regret: Option<f64>,
    pub median_cumulative_loss: f64,
    pub median_round_time_ns: f64,
}

/// Fraction of seeds on which `a` ends with the lower cumulative loss; ties count one half.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WinRate {
    pub a: String,
    pub b: String,
    pub win_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareSummary {
    pub seeds: Vec<u64>,
    pub entries: Vec<CompareEntry>,
    pub win_rates: Vec<WinRate>,
}

fn stream_identity(c: &RunConfig) -> String {
    format!("{:?}|{:?}|{}|B={}|T={}", c.source, c.model, c.mode, c.batch, c.rounds)
}

fn check_shared_streams(configs: &[RunConfig]) -> Result<()> {
    let Some(first) = configs.first() else {
        return Err(CliError::Compare("no configs given".into()));
    };
    let entries: usize = configs.iter().map(|c| c.algorithms.len()).sum();
    if entries < 2 {
        return Err(CliError::Compare(format!("needs at least two algorithms across configs, got {entries}")));
    }
    for (i, c) in configs.iter().enumerate().skip(1) {
        if c.seeds != first.seeds {
            return Err(CliError::Compare(format!(
                "config {i} uses stream seeds {:?} but config 0 uses {:?}",
                c.seeds, first.seeds
            )));
        }
        if stream_identity(c) != stream_identity(first) {
            return Err(CliError::Compare(format!(
                "config {i} defines a different stream (dataset, model, mode, batch or T) than config 0"
            )));
        }
    }
    Ok(())
}

/// Per-config output directories under `out`, or the configs' own when `out` is `None`.
pub fn with_output_dirs(configs: &[RunConfig], out: Option<&Path>) -> Vec<RunConfig> {
    configs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut c = c.clone();
            if let Some(o) = out {
                c.output_dir = o.join(format!("config{i}"));
            }
            c
        })
        .collect()
}

/// Runs every config and returns the joint summary, also written to `<out>/compare.json`.
pub fn compare(configs: &[RunConfig], out: Option<&Path>) -> Result<(CompareSummary, PathBuf)> {
    check_shared_streams(configs)?;
    let configs = with_output_dirs(configs, out);
    let outputs: Vec<RunOutput> = configs.iter().map(run_experiment).collect::<Result<_>>()?;
    let summary = summarize(&configs[0].seeds, &outputs);
    let dir = out.map_or_else(|| configs[0].output_dir.clone(), Path::to_path_buf);
    let path = dir.join("compare.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
    Ok((summary, path))
}

/// Joint summary from completed runs that share `seeds`.
pub fn summarize(seeds: &[u64], outputs: &[RunOutput]) -> CompareSummary {
    let mut flat = Vec::new();
    for (ci, o) in outputs.iter().enumerate() {
        for (algo, per_seed) in &o.runs {
            flat.push((ci, *algo, per_seed));
        }
    }
    let entries: Vec<CompareEntry> = flat
        .iter()
        .map(|&(ci, algo, per_seed)| {
            let dup = flat.iter().filter(|(_, a, _)| *a == algo).count() > 1;
            let finals: Vec<f64> = per_seed
                .iter()
                .filter_map(|(_, r)| r.last().and_then(|r| r.cum_regret))
                .collect();
            let cum: Vec<f64> = per_seed.iter().map(|(_, r)| r.iter().map(|r| r.loss).sum()).collect();
            let times: Vec<f64> = per_seed
                .iter()
                .flat_map(|(_, r)| r.iter().map(|r| r.wall_time_ns as f64))
                .collect();
            CompareEntry {
                label: if dup { format!("{}#{ci}", algo.name()) } else { algo.name().to_owned() },
                algorithm: algo.name().to_owned(),
                config_index: ci,
                median_final_regret: (finals.len() == per_seed.len()).then(|| quantile(&finals, 0.5)),
                median_cumulative_loss: quantile(&cum, 0.5),
                median_round_time_ns: quantile(&times, 0.5),
            }
        })
        .collect();
    let cum_losses: Vec<Vec<f64>> = flat
        .iter()
        .map(|(_, _, per_seed)| per_seed.iter().map(|(_, r)| r.iter().map(|r| r.loss).sum()).collect())
        .collect();
    let mut win_rates = Vec::new();
    for i in 0..flat.len() {
        for j in 0..flat.len() {
            if i != j {
                win_rates.push(WinRate {
                    a: entries[i].label.clone(),
                    b: entries[j].label.clone(),
                    win_rate: win_rate(&cum_losses[i], &cum_losses[j]),
                });
            }
        }
    }
    CompareSummary {
        seeds: seeds.to_vec(),
        entries,
        win_rates,
    }
}

/// Share of paired seeds on which `a < b`, with ties counted as one half.
pub fn win_rate(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return f64::NAN;
    }
    let score: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Less) => 1.0,
            Some(std::cmp::Ordering::Equal) => 0.5,
            _ => 0.0,
        })
        .sum();
    score / n as f64
}
