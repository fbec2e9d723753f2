//! Benchmark expectations: tolerance windows stored as data files, checked
//! against metrics computed from a run's step records.
//!
//! Windows live in `data/expectations/<preset>_<tier>.toml` and are embedded
//! into the binary; each file states where its numbers come from. Metric
//! names form a fixed vocabulary so a typo in a data file fails loudly at
//! parse time instead of passing vacuously.

use serde::{Deserialize, Serialize};

use crate::scenario::Tier;
use crate::solver::{StepRecord, StopReason};

pub const METRIC_NAMES: [&str; 7] = [
    "peak_force_n_per_mm",
    "peak_displacement_mm",
    "failure_displacement_mm",
    "final_elements",
    "max_elements",
    "interface_energy_share",
    "steps",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub preset: String,
    pub tier: String,
    /// Where the windows come from: experimental brackets where the original
    /// experiments give one, otherwise regression values recorded from this
    /// solver.
    pub provenance: String,
    #[serde(rename = "metric")]
    pub metrics: Vec<MetricWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricWindow {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("expectations: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("expectations: unknown metric '{0}'")]
    UnknownMetric(String),
    #[error("expectations: metric '{name}' window is empty ({min} > {max})")]
    EmptyWindow { name: String, min: f64, max: f64 },
    #[error("no expectations stored for preset '{0}' at tier {1}")]
    NoExpectations(String, String),
}

pub fn parse_expectations(text: &str) -> Result<Expectations, BenchError> {
    let exp: Expectations = toml::from_str(text)?;
    for m in &exp.metrics {
        if !METRIC_NAMES.contains(&m.name.as_str()) {
            return Err(BenchError::UnknownMetric(m.name.clone()));
        }
        if m.min > m.max {
            return Err(BenchError::EmptyWindow {
                name: m.name.clone(),
                min: m.min,
                max: m.max,
            });
        }
    }
    Ok(exp)
}

/// Embedded expectation files for the shipped presets.
pub fn builtin_expectations(preset: &str, tier: Tier) -> Result<Expectations, BenchError> {
    let text = match (preset, tier) {
        ("double_edge_notch", Tier::Desk) => {
            include_str!("../data/expectations/double_edge_notch_desk.toml")
        }
        ("double_edge_notch", Tier::Full) => {
            include_str!("../data/expectations/double_edge_notch_full.toml")
        }
        ("central_crack_slab", Tier::Desk) => {
            include_str!("../data/expectations/central_crack_slab_desk.toml")
        }
        ("central_crack_slab", Tier::Full) => {
            include_str!("../data/expectations/central_crack_slab_full.toml")
        }
        ("holed_panel", Tier::Desk) => {
            include_str!("../data/expectations/holed_panel_desk.toml")
        }
        ("holed_panel", Tier::Full) => {
            include_str!("../data/expectations/holed_panel_full.toml")
        }
        ("interface_strip", Tier::Desk) => {
            include_str!("../data/expectations/interface_strip_desk.toml")
        }
        ("interface_strip", Tier::Full) => {
            include_str!("../data/expectations/interface_strip_full.toml")
        }
        _ => {
            let t = if tier == Tier::Desk { "desk" } else { "full" };
            return Err(BenchError::NoExpectations(preset.to_string(), t.to_string()));
        }
    };
    parse_expectations(text)
}

/// Scalar digest of a force-displacement curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveMetrics {
    pub peak_force_n_per_mm: f64,
    /// Reported displacement where the absolute force peaks.
    pub peak_displacement_mm: f64,
    /// Reported displacement of the step where the reaction collapsed, when
    /// the run ended in full fracture.
    pub failure_displacement_mm: Option<f64>,
    pub final_displacement_mm: f64,
    pub final_elements: usize,
    pub max_elements: usize,
    pub interface_energy_share: f64,
    pub steps: usize,
}

impl CurveMetrics {
    pub fn from_records(records: &[StepRecord], stop: StopReason) -> Option<CurveMetrics> {
        let last = records.last()?;
        let peak = records
            .iter()
            .max_by(|a, b| {
                a.force_n_per_mm
                    .abs()
                    .total_cmp(&b.force_n_per_mm.abs())
            })
            .expect("records is non-empty");
        Some(CurveMetrics {
            peak_force_n_per_mm: peak.force_n_per_mm.abs(),
            peak_displacement_mm: peak.displacement_mm,
            failure_displacement_mm: match stop {
                StopReason::FullFracture => Some(last.displacement_mm),
                StopReason::TargetReached => None,
            },
            final_displacement_mm: last.displacement_mm,
            final_elements: last.elements,
            max_elements: records.iter().map(|r| r.elements).max().unwrap_or(0),
            interface_energy_share: last.interface_energy_share,
            steps: records.len(),
        })
    }

    /// Metric by name; `None` when the run did not produce it (no fracture).
    pub fn value(&self, name: &str) -> Option<f64> {
        match name {
            "peak_force_n_per_mm" => Some(self.peak_force_n_per_mm),
            "peak_displacement_mm" => Some(self.peak_displacement_mm),
            "failure_displacement_mm" => self.failure_displacement_mm,
            "final_elements" => Some(self.final_elements as f64),
            "max_elements" => Some(self.max_elements as f64),
            "interface_energy_share" => Some(self.interface_energy_share),
            "steps" => Some(self.steps as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub name: String,
    /// Measured value; absent when the run never produced the metric.
    pub value: Option<f64>,
    pub min: f64,
    pub max: f64,
    pub pass: bool,
}

impl std::fmt::Display for MetricResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.pass { "pass" } else { "FAIL" };
        match self.value {
            Some(v) => write!(
                f,
                "{verdict}  {name} = {v:.6} (window [{min}, {max}])",
                name = self.name,
                min = self.min,
                max = self.max
            ),
            None => write!(
                f,
                "{verdict}  {name} not produced by the run (window [{min}, {max}])",
                name = self.name,
                min = self.min,
                max = self.max
            ),
        }
    }
}

pub fn evaluate(expectations: &Expectations, metrics: &CurveMetrics) -> Vec<MetricResult> {
    expectations
        .metrics
        .iter()
        .map(|w| {
            let value = metrics.value(&w.name);
            let pass = value.is_some_and(|v| v >= w.min && v <= w.max);
            MetricResult {
                name: w.name.clone(),
                value,
                min: w.min,
                max: w.max,
                pass,
            }
        })
        .collect()
}

pub fn all_pass(results: &[MetricResult]) -> bool {
    !results.is_empty() && results.iter().all(|r| r.pass)
}
