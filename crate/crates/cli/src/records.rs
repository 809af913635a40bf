//! Per-round CSV files.
//!
//! Schema (one file per algorithm, rows ordered by seed then round):
//!
//! | column         | type    | empty when                                  |
//! |----------------|---------|---------------------------------------------|
//! | `seed`         | u64     | never                                       |
//! | `t`            | usize   | never (1-based round)                       |
//! | `loss`         | f64     | never (`f_t(x_t)`)                          |
//! | `cum_regret`   | f64     | the loss is nonconvex (no comparator)       |
//! | `est_error`    | f64     | monitoring is off or the learner is meta    |
//! | `fw_gap`       | f64     | monitoring is off                           |
//! | `wall_time_ns` | u64     | never                                       |
//!
//! Floats are written in shortest round-trip form, so a row read back with
//! [`read_records`] reproduces the [`RoundRecord`] bit for bit.

use std::io::{Read, Write};

use orgfw::RoundRecord;

use crate::error::{CliError, Result};

pub const HEADER: [&str; 7] = ["seed", "t", "loss", "cum_regret", "est_error", "fw_gap", "wall_time_ns"];

/// Index of the only column allowed to differ between identical runs.
pub const TIMING_COLUMN: usize = 6;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_records<W: Write>(out: W, runs: &[(u64, Vec<RoundRecord<f64>>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for (seed, recs) in runs {
        for r in recs {
            w.write_record([
                seed.to_string(),
                r.round.to_string(),
                r.loss.to_string(),
                opt(r.cum_regret),
                opt(r.est_error),
                opt(r.fw_gap),
                r.wall_time_ns.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a file written by [`write_records`] into `(seed, record)` rows.
pub fn read_records<R: Read>(input: R) -> Result<Vec<(u64, RoundRecord<f64>)>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(CliError::Schema(format!(
            "header `{}` does not match `{}`",
            header.iter().collect::<Vec<_>>().join(","),
            HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let bad = |c: usize| CliError::Schema(format!("line {line}: bad `{}` value `{}`", HEADER[c], field(c)));
        let req_f = |c: usize| field(c).parse::<f64>().map_err(|_| bad(c));
        let opt_f = |c: usize| match field(c) {
            "" => Ok(None),
            s => s.parse::<f64>().map(Some).map_err(|_| bad(c)),
        };
        let seed = field(0).parse::<u64>().map_err(|_| bad(0))?;
        let round = field(1).parse::<usize>().map_err(|_| bad(1))?;
        let mut out = RoundRecord::new(round, req_f(2)?);
        out.cum_regret = opt_f(3)?;
        out.est_error = opt_f(4)?;
        out.fw_gap = opt_f(5)?;
        out.wall_time_ns = field(6).parse::<u64>().map_err(|_| bad(6))?;
        rows.push((seed, out));
    }
    Ok(rows)
}

/// Final record of each seed, in file order.
pub fn final_rows(rows: &[(u64, RoundRecord<f64>)]) -> Vec<(u64, RoundRecord<f64>)> {
    let mut out: Vec<(u64, RoundRecord<f64>)> = Vec::new();
    for (seed, r) in rows {
        match out.last_mut() {
            Some((s, last)) if s == seed => {
                if r.round >= last.round {
                    *last = r.clone();
                }
            }
            _ => out.push((*seed, r.clone())),
        }
    }
    out
}
