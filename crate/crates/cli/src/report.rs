//! JSON report: config echo, per-point records, aggregates and gates.

use std::collections::BTreeMap;

use affine_lab_core::families::SphereVerdict;
use affine_lab_core::{Case, SphereKind};
use serde::{Deserialize, Serialize};

use crate::config::{Command, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One acceptance gate: passes iff `value ≤ limit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

/// Values computed at one sample point (or curve node), keyed by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub point: Vec<f64>,
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vectors: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl PointRecord {
    pub fn new(index: usize, point: &[f64]) -> PointRecord {
        PointRecord {
            index,
            point: point.to_vec(),
            ..PointRecord::default()
        }
    }

    pub fn set(&mut self, key: &str, value: f64) -> &mut Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Human-readable summary, e.g. "quadric detected".
    pub message: String,
    pub quadric_detected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<Case>,
    /// Sign of ζ over the samples; absent when it changes sign.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_sign: Option<i8>,
    /// Frame statistics; absent when every sample is a quadric point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_minus_r_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereCandidate {
    pub kind: SphereKind,
    pub c: f64,
    pub c_estimated: bool,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SphereSummary {
    pub candidates: Vec<SphereCandidate>,
    /// Sphere type whose equation is gated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<SphereKind>,
    pub numeric: SphereVerdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub records: Vec<PointRecord>,
    pub aggregates: BTreeMap<String, f64>,
    pub gates: Vec<Gate>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere: Option<SphereSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Paths of written artifacts, relative to the output directory.
    pub artifacts: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn new(command: Command, config: RunConfig) -> Report {
        Report {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            config,
            records: Vec::new(),
            aggregates: BTreeMap::new(),
            gates: Vec::new(),
            verdict: Verdict::Pass,
            classification: None,
            sphere: None,
            notes: Vec::new(),
            artifacts: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn aggregate(&mut self, name: &str, value: f64) {
        self.aggregates.insert(name.to_string(), value);
    }

    /// Records `name` as an aggregate and gates it against `limit`.
    pub fn gate(&mut self, name: &str, value: f64, limit: f64) {
        self.aggregate(name, value);
        self.gates.push(Gate {
            name: name.to_string(),
            value,
            limit,
            pass: value <= limit,
        });
    }

    /// Largest `values[key]` over the records (NaN propagates as failure).
    pub fn record_max(&self, key: &str) -> f64 {
        self.records
            .iter()
            .filter_map(|r| r.get(key))
            .fold(0.0, |acc, v| if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(v) })
    }

    pub fn finalize(&mut self) {
        self.verdict = if self.gates.iter().all(|g| g.pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn gate_value(&self, name: &str) -> Option<f64> {
        self.gates.iter().find(|g| g.name == name).map(|g| g.value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
