//! JSON wire forms of gate sets and estimate reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::estimate::{GateSetEstimate, ModelViolation};
use super::model::{to_m16, GateSet, V16};
use super::GateLabel;
use crate::metrics::GateMetrics;
use crate::qptm::{PauliTransferMatrix, PtmJson, PAULI_LABELS_2Q};
use crate::{Error, Result};

/// Gates as PTMs; `rho` and each effect as Pauli coefficient vectors
/// (`Tr(P_i ρ)` and `Tr(P_i E)/4`) in `basis_order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSetJson {
    pub basis_order: Vec<String>,
    pub gates: BTreeMap<String, PtmJson>,
    pub rho: Vec<f64>,
    pub effects: BTreeMap<String, Vec<f64>>,
}

const OUTCOMES: [&str; 4] = ["00", "01", "10", "11"];

impl GateSetJson {
    pub fn from_gate_set(gs: &GateSet) -> Self {
        let gates = GateLabel::GATES
            .iter()
            .map(|g| (g.name().to_string(), gs.gate_ptm(*g).to_json()))
            .collect();
        Self {
            basis_order: PAULI_LABELS_2Q.iter().map(|s| s.to_string()).collect(),
            gates,
            rho: gs.rho.iter().copied().collect(),
            effects: OUTCOMES.iter().zip(&gs.effects).map(|(k, e)| (k.to_string(), e.iter().copied().collect())).collect(),
        }
    }

    pub fn to_gate_set(&self) -> Result<GateSet> {
        if self.basis_order.iter().map(String::as_str).ne(PAULI_LABELS_2Q.iter().copied()) {
            return Err(Error::Parse("unexpected Pauli basis order".into()));
        }
        let vec16 = |v: &[f64], what: &str| -> Result<V16> {
            if v.len() != 16 {
                return Err(Error::Parse(format!("{what} needs 16 entries, got {}", v.len())));
            }
            Ok(V16::from_column_slice(v))
        };
        let mut gates = [super::model::M16::identity(); 6];
        for (i, g) in GateLabel::GATES.iter().enumerate() {
            let p = self.gates.get(g.name()).ok_or_else(|| Error::Parse(format!("missing gate {g}")))?;
            gates[i] = to_m16(PauliTransferMatrix::from_json(p)?.entries());
        }
        let mut effects = [V16::zeros(); 4];
        for (k, o) in OUTCOMES.iter().enumerate() {
            effects[k] = vec16(self.effects.get(*o).ok_or_else(|| Error::Parse(format!("missing effect {o}")))?, "effect")?;
        }
        Ok(GateSet { gates, rho: vec16(&self.rho, "rho")?, effects })
    }
}

/// Percentile interval of one metric from the bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricInterval {
    pub gate: String,
    pub metric: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub config_hash: String,
    pub seed: u64,
    pub gate_set: GateSetJson,
    pub log_likelihood: f64,
    pub max_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub model_violation: ModelViolation,
    pub metrics: Vec<GateMetrics>,
    pub intervals: Vec<MetricInterval>,
}

impl EstimateReport {
    pub fn new(
        config_hash: String,
        seed: u64,
        est: &GateSetEstimate,
        model_violation: ModelViolation,
        metrics: Vec<GateMetrics>,
    ) -> Self {
        Self {
            config_hash,
            seed,
            gate_set: GateSetJson::from_gate_set(&est.gate_set),
            log_likelihood: est.log_likelihood,
            max_log_likelihood: est.max_log_likelihood,
            iterations: est.iterations,
            converged: est.converged,
            model_violation,
            metrics,
            intervals: Vec::new(),
        }
    }
}

/// Metric names used in bootstrap intervals, in `metric_vector` order.
pub const INTERVAL_METRICS: [&str; 4] = ["f_gate", "epsilon_j", "theta_j", "trace_distance"];

/// Flattened per-gate metrics for the bootstrap.
pub fn metric_vector(gs: &GateSet) -> Result<Vec<f64>> {
    let m = crate::metrics::gate_set_metrics(gs)?;
    Ok(m.iter().flat_map(|g| [g.f_gate, g.epsilon_j, g.theta_j, g.trace_distance]).collect())
}

pub fn label_intervals(bounds: &[(f64, f64)]) -> Vec<MetricInterval> {
    bounds
        .iter()
        .enumerate()
        .map(|(i, (lo, hi))| MetricInterval {
            gate: GateLabel::GATES[i / INTERVAL_METRICS.len()].name().to_string(),
            metric: INTERVAL_METRICS[i % INTERVAL_METRICS.len()].to_string(),
            lower: *lo,
            upper: *hi,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_set_json_round_trip() {
        let gs = super::super::estimate::with_x1_zi_error(&GateSet::target(), 0.02);
        let back = GateSetJson::from_gate_set(&gs).to_gate_set().unwrap();
        assert_eq!(gs, back);
        let text = serde_json::to_string(&GateSetJson::from_gate_set(&gs)).unwrap();
        let again: GateSetJson = serde_json::from_str(&text).unwrap();
        assert_eq!(again.to_gate_set().unwrap(), gs);
    }
}
