//! GST datasets: counts per circuit, simulation and JSON-lines I/O.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde_json::json;

use super::circuit::{Circuit, Design};
use super::model::{design_probabilities, GateSet};
use crate::error::{Error, Result};

pub const OUTCOMES: [&str; 4] = ["00", "01", "10", "11"];

/// Outcome counts per circuit. Counts are stored as reals so that exact
/// probability datasets (`shots → ∞`) share the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct GstDataset {
    pub shots: f64,
    pub entries: Vec<(Circuit, [f64; 4])>,
}

impl GstDataset {
    pub fn validate(&self) -> Result<()> {
        for (c, n) in &self.entries {
            let total: f64 = n.iter().sum();
            if (total - self.shots).abs() > 1e-6 * self.shots.max(1.0) {
                return Err(Error::Domain(format!("circuit {c} has {total} counts, expected {}", self.shots)));
            }
        }
        Ok(())
    }

    /// Counts aligned with [`Design::circuits`].
    pub fn aligned_counts(&self, design: &Design) -> Result<Vec<[f64; 4]>> {
        let lookup: HashMap<&Circuit, &[f64; 4]> = self.entries.iter().map(|(c, n)| (c, n)).collect();
        design
            .circuits()
            .iter()
            .map(|c| {
                lookup
                    .get(c)
                    .map(|n| **n)
                    .ok_or_else(|| Error::Domain(format!("dataset does not cover circuit {c}")))
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (c, n) in &self.entries {
            let mut counts = serde_json::Map::new();
            for (k, label) in OUTCOMES.iter().enumerate() {
                let v = if n[k].fract() == 0.0 && n[k] >= 0.0 { json!(n[k] as u64) } else { json!(n[k]) };
                counts.insert(label.to_string(), v);
            }
            writeln!(w, "{}", json!({"circuit": c.to_string(), "counts": counts}))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut entries = Vec::new();
        for line in r.lines() {
            let line = line?;
            // blank lines and `#` provenance comments carry no counts
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let v: serde_json::Value = serde_json::from_str(&line)?;
            let circuit: Circuit = v["circuit"]
                .as_str()
                .ok_or_else(|| Error::Parse("missing circuit".into()))?
                .parse()?;
            let mut n = [0.0; 4];
            for (k, label) in OUTCOMES.iter().enumerate() {
                n[k] = v["counts"][label].as_f64().ok_or_else(|| Error::Parse(format!("missing count {label}")))?;
            }
            entries.push((circuit, n));
        }
        let shots = entries.first().map(|(_, n)| n.iter().sum()).unwrap_or(0.0);
        let ds = Self { shots, entries };
        ds.validate()?;
        Ok(ds)
    }
}

fn checked_probabilities(p: &[f64]) -> Result<Vec<f64>> {
    for (i, x) in p.iter().enumerate() {
        if !(-1e-9..=1.0 + 1e-9).contains(x) {
            return Err(Error::Model(format!("probability {x} out of range at index {i}")));
        }
    }
    Ok(p.iter().map(|x| x.clamp(0.0, 1.0)).collect())
}

/// Expected counts (`shots · p`) without sampling noise.
pub fn exact_dataset(truth: &GateSet, design: &Design, shots: f64) -> Result<GstDataset> {
    let p = checked_probabilities(&design_probabilities(truth, design))?;
    let entries = design
        .circuits()
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c, std::array::from_fn(|k| shots * p[4 * i + k])))
        .collect();
    Ok(GstDataset { shots, entries })
}

/// Multinomial counts by sequential binomial draws.
pub fn sample_counts(p: &[f64; 4], shots: u64, rng: &mut ChaCha8Rng) -> Result<[f64; 4]> {
    let mut left = shots;
    let mut mass = 1.0;
    let mut out = [0.0; 4];
    for k in 0..3 {
        let q = if mass > 0.0 { (p[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let n = Binomial::new(left, q).map_err(|e| Error::Domain(e.to_string()))?.sample(rng);
        out[k] = n as f64;
        left -= n;
        mass -= p[k];
    }
    out[3] = left as f64;
    Ok(out)
}

/// Multinomially sampled dataset; the circuit order follows the design.
pub fn simulate_dataset(truth: &GateSet, design: &Design, shots: u64, seed: u64) -> Result<GstDataset> {
    if shots == 0 {
        return Err(Error::Domain("shots must be at least 1".into()));
    }
    let p = checked_probabilities(&design_probabilities(truth, design))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(p.len() / 4);
    for (i, c) in design.circuits().into_iter().enumerate() {
        let total: f64 = p[4 * i..4 * i + 4].iter().sum();
        let pi: [f64; 4] = std::array::from_fn(|k| p[4 * i + k] / total);
        entries.push((c, sample_counts(&pi, shots, &mut rng)?));
    }
    Ok(GstDataset { shots: shots as f64, entries })
}
