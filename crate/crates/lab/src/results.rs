//! CSV result rows. Reals are written with 17 significant digits so every
//! value round-trips exactly.

use std::io::{Read, Write};

use condcorrupt::csvfmt::format_real;
use serde::Deserialize;

use crate::error::LabResult;

pub const HEADER: [&str; 11] = [
    "experiment",
    "seed",
    "gamma",
    "dim",
    "n_per_class",
    "form",
    "perturbation",
    "metric",
    "value",
    "standard_error",
    "wall_time_ms",
];

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub gamma: f64,
    pub dim: usize,
    pub n_per_class: usize,
    pub form: String,
    pub perturbation: String,
    pub metric: String,
    pub value: f64,
    /// Zero for analytic values.
    pub standard_error: f64,
    pub wall_time_ms: u64,
}

impl ResultRow {
    fn record(&self) -> [String; 11] {
        [
            self.experiment.clone(),
            self.seed.to_string(),
            format_real(self.gamma),
            self.dim.to_string(),
            self.n_per_class.to_string(),
            self.form.clone(),
            self.perturbation.clone(),
            self.metric.clone(),
            format_real(self.value),
            format_real(self.standard_error),
            self.wall_time_ms.to_string(),
        ]
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> LabResult<()> {
    let mut w = writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> LabResult<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

/// One pass/fail line of `verify`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub fn write_checks<W: Write>(out: W, checks: &[CheckOutcome]) -> LabResult<()> {
    let mut w = writer(out);
    w.write_record(["check", "status", "detail"])?;
    for c in checks {
        w.write_record([c.name.as_str(), if c.passed { "pass" } else { "fail" }, c.detail.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
