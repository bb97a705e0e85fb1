//! Turning evaluation records into the losses a search consumes.
//!
//! The disparate-impact loss of a model is its selection-rate gap: the mean
//! prediction on the reference group (`group = 0`) minus the mean prediction
//! on the protected group (`group = 1`). It is also the empirical mean of a
//! per-record loss, [`di_loss`], once group frequencies are plugged in.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{open_interval, unit_interval, Error, Result};

/// One scored example. `prediction` may be a hard decision or a score in
/// `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub prediction: f64,
    pub label: f64,
    /// 1 marks the protected group.
    pub group: u8,
}

impl EvalRecord {
    pub fn new(prediction: f64, label: f64, group: u8) -> Result<Self> {
        let r = Self {
            prediction,
            label,
            group,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        unit_interval("prediction", self.prediction)?;
        if self.group > 1 {
            return Err(Error::Domain {
                name: "group",
                value: f64::from(self.group),
                expected: "0 or 1".into(),
            });
        }
        Ok(())
    }
}

/// Per-record disparate-impact loss `((1 - g) / p0 - g / p1) * a`.
pub fn di_loss(a: f64, g: u8, p0: f64, p1: f64) -> Result<f64> {
    unit_interval("prediction", a)?;
    open_interval("p0", p0, 0.0, 1.0)?;
    open_interval("p1", p1, 0.0, 1.0)?;
    if (p0 + p1 - 1.0).abs() > 1e-9 {
        return Err(Error::Domain {
            name: "p0 + p1",
            value: p0 + p1,
            expected: "1 within 1e-9".into(),
        });
    }
    match g {
        0 => Ok(a / p0),
        1 => Ok(-a / p1),
        _ => Err(Error::Domain {
            name: "group",
            value: f64::from(g),
            expected: "0 or 1".into(),
        }),
    }
}

/// In-sample `(P(g = 0), P(g = 1))`.
pub fn group_frequencies(records: &[EvalRecord]) -> Result<(f64, f64)> {
    let (n0, n1) = group_counts(records)?;
    let n = (n0 + n1) as f64;
    Ok((n0 as f64 / n, n1 as f64 / n))
}

fn group_counts(records: &[EvalRecord]) -> Result<(usize, usize)> {
    if records.is_empty() {
        return Err(Error::Empty("evaluation records"));
    }
    let mut n = [0usize; 2];
    for r in records {
        r.validate()?;
        n[r.group as usize] += 1;
    }
    for g in 0..2u8 {
        if n[g as usize] == 0 {
            return Err(Error::EmptyGroup(g));
        }
    }
    Ok((n[0], n[1]))
}

/// Reference-group selection rate minus protected-group selection rate.
///
/// A negative gap is returned unchanged and logged as a warning: it falls
/// outside `[0, 1]`, so a caller feeding it to a search has to decide what
/// to do with it.
pub fn empirical_selection_gap(records: &[EvalRecord]) -> Result<f64> {
    let (n0, n1) = group_counts(records)?;
    let mut sums = [0.0f64; 2];
    for r in records {
        sums[r.group as usize] += r.prediction;
    }
    let gap = sums[0] / n0 as f64 - sums[1] / n1 as f64;
    if gap < 0.0 {
        log::warn!("negative selection-rate gap {gap}: protected group is selected more often");
    }
    Ok(gap)
}

/// Mean of `loss` over `records`.
pub fn empirical_loss<F: Fn(&EvalRecord) -> Result<f64>>(records: &[EvalRecord], loss: F) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("evaluation records"));
    }
    let mut total = 0.0;
    for r in records {
        total += loss(r)?;
    }
    Ok(total / records.len() as f64)
}

/// [`empirical_loss`] with [`di_loss`] at the in-sample group frequencies.
pub fn empirical_di_loss(records: &[EvalRecord]) -> Result<f64> {
    let (p0, p1) = group_frequencies(records)?;
    empirical_loss(records, |r| di_loss(r.prediction, r.group, p0, p1))
}

/// Reads records from CSV with header `prediction,label,group`.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<EvalRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<EvalRecord>().enumerate() {
        // Line 1 is the header.
        let line = i + 2;
        let record = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        record.validate().map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_records_path(path: impl AsRef<Path>) -> Result<Vec<EvalRecord>> {
    read_records(std::fs::File::open(path)?)
}
