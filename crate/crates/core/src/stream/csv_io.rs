//! Dataset CSV exchange: header `label,f1,...,fd`, one sample per row.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::oracles::Sample;
use crate::scalar::Scalar;

use super::Dataset;

pub fn write_dataset_csv<S: Scalar, W: Write>(ds: &Dataset<S>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_owned()];
    header.extend((1..=ds.features()).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for s in ds.samples().iter() {
        let mut row = vec![s.label.to_string()];
        row.extend(s.features.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset CSV; the class count is the largest label seen.
pub fn read_dataset_csv<S: Scalar, R: Read>(input: R, name: &str) -> Result<Dataset<S>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let malformed = |reason: String| Error::Malformed {
        file: name.to_owned(),
        reason,
    };
    if header.get(0) != Some("label") {
        return Err(malformed("first column must be `label`".into()));
    }
    let d = header.len() - 1;
    for (i, h) in header.iter().skip(1).enumerate() {
        if h != format!("f{}", i + 1) {
            return Err(malformed(format!("column {} is `{h}`, expected `f{}`", i + 2, i + 1)));
        }
    }
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let label: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| malformed(format!("row {}: bad label `{}`", line + 1, &rec[0])))?;
        let features = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map(S::lit)
                    .map_err(|_| malformed(format!("row {}: bad feature `{v}`", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(Sample::new(features, label));
    }
    let classes = samples.iter().map(|s| s.label).max().unwrap_or(0);
    Dataset::new(samples, d, classes, name)
}
