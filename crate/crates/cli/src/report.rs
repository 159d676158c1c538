use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};
use busytime::rational::{format_rational, to_f64};
use busytime::Rational;
use serde::Serialize;

/// One row of a run report. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub instance_id: String,
    pub algorithm: String,
    pub type_system: String,
    pub n: usize,
    pub cost: String,
    /// `exact_opt`, `adversary_bound` or `none`.
    pub baseline: String,
    pub baseline_value: Option<String>,
    pub ratio: Option<String>,
    pub ratio_float: Option<f64>,
    pub wall_ms: f64,
    pub seed: u64,
}

pub struct ReportInput<'a> {
    pub instance_id: &'a str,
    pub algorithm: &'a str,
    pub type_system: &'a str,
    pub n: usize,
    pub cost: Rational,
    pub baseline: Option<(&'a str, Rational)>,
    pub wall_ms: f64,
    pub seed: u64,
}

impl RunReport {
    pub fn new(input: ReportInput<'_>) -> Self {
        let (baseline, baseline_value, ratio) = match input.baseline {
            Some((kind, value)) => {
                // A zero baseline only happens for empty instances, where the cost is zero too.
                let ratio = if value == Rational::from_integer(0) {
                    Rational::from_integer(1)
                } else {
                    input.cost / value
                };
                (kind.to_string(), Some(value), Some(ratio))
            }
            None => ("none".to_string(), None, None),
        };
        Self {
            instance_id: input.instance_id.to_string(),
            algorithm: input.algorithm.to_string(),
            type_system: input.type_system.to_string(),
            n: input.n,
            cost: format_rational(&input.cost),
            baseline,
            baseline_value: baseline_value.as_ref().map(format_rational),
            ratio: ratio.as_ref().map(format_rational),
            ratio_float: ratio.as_ref().map(to_f64),
            wall_ms: input.wall_ms,
            seed: input.seed,
        }
    }
}

pub fn write_csv(path: &Path, rows: &[RunReport]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, rows: &[RunReport]) -> Result<()> {
    let text = serde_json::to_string_pretty(rows)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
