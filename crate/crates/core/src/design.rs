//! Arm layouts and patient allocation.

use crate::error::{Error, Result};
use crate::scenario::{D_MAX, D_MIN};

/// Arms at which a trial randomises patients, with per-arm counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDesign {
    label: String,
    arms: Vec<f64>,
    allocation: Vec<u32>,
}

impl TrialDesign {
    /// Builds a design and splits `total_n` across the arms with [`allocate`].
    pub fn new(label: impl Into<String>, arms: Vec<f64>, total_n: u32) -> Result<Self> {
        validate_arms(&arms)?;
        let allocation = allocate(total_n, &arms)?;
        Ok(Self {
            label: label.into(),
            arms,
            allocation,
        })
    }

    /// Resolves a preset label (`ED{k}` or `NED5`).
    pub fn from_label(label: &str, total_n: u32) -> Result<Self> {
        Self::new(label, preset_arms(label)?, total_n)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn arms(&self) -> &[f64] {
        &self.arms
    }

    pub fn allocation(&self) -> &[u32] {
        &self.allocation
    }

    pub fn total_n(&self) -> u32 {
        self.allocation.iter().sum()
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }
}

/// `k` arms evenly spaced over `[d_min, d_max]`, endpoints included.
pub fn equidistant_arms(k: usize, d_min: f64, d_max: f64) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::InvalidDesign(format!("need at least 2 arms, got {k}")));
    }
    if !(d_min < d_max) {
        return Err(Error::InvalidDesign(format!(
            "empty duration range [{d_min}, {d_max}]"
        )));
    }
    let span = d_max - d_min;
    let last = (k - 1) as f64;
    Ok((0..k)
        .map(|i| {
            if i == k - 1 {
                d_max
            } else {
                d_min + i as f64 * span / last
            }
        })
        .collect())
}

/// The non-equidistant 5-arm layout concentrated on short durations.
pub fn ned_arms() -> Vec<f64> {
    vec![10.0, 11.0, 13.0, 15.0, 20.0]
}

/// Arm durations for a preset label.
pub fn preset_arms(label: &str) -> Result<Vec<f64>> {
    if label == "NED5" {
        return Ok(ned_arms());
    }
    label
        .strip_prefix("ED")
        .and_then(|k| k.parse::<usize>().ok())
        .filter(|&k| k >= 2)
        .map(|k| equidistant_arms(k, D_MIN, D_MAX))
        .unwrap_or_else(|| {
            Err(Error::InvalidDesign(format!(
                "unknown design preset {label:?} (expected ED<k> or NED5)"
            )))
        })
}

/// Splits `total_n` as evenly as possible; the first `total_n % k` arms
/// (shortest durations) receive one extra patient.
pub fn allocate(total_n: u32, arms: &[f64]) -> Result<Vec<u32>> {
    let k = arms.len() as u32;
    if k == 0 || total_n < k {
        return Err(Error::InvalidDesign(format!(
            "cannot allocate {total_n} patients to {k} arms"
        )));
    }
    let base = total_n / k;
    let rem = total_n % k;
    Ok((0..k).map(|i| base + u32::from(i < rem)).collect())
}

fn validate_arms(arms: &[f64]) -> Result<()> {
    if arms.len() < 2 {
        return Err(Error::InvalidDesign("need at least 2 arms".into()));
    }
    if arms.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidDesign("non-finite arm duration".into()));
    }
    if !arms.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidDesign("arms must be strictly ascending".into()));
    }
    if arms[0] != D_MIN || arms[arms.len() - 1] != D_MAX {
        return Err(Error::InvalidDesign(format!(
            "arms must start at {D_MIN} and end at {D_MAX}"
        )));
    }
    Ok(())
}
