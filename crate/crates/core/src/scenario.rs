//! Closed-form duration-response curves used as simulation truth.
//!
//! Every curve maps a treatment duration in days, restricted to
//! [`D_MIN`, `D_MAX`], to a probability of cure.

use crate::curve::Curve;
use crate::error::{Error, Result};

/// Shortest duration considered (days).
pub const D_MIN: f64 = 10.0;
/// Currently recommended duration (days).
pub const D_MAX: f64 = 20.0;

/// One of the eight fixed data-generating curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScenarioCurve {
    id: u8,
}

impl ScenarioCurve {
    pub const ALL_IDS: [u8; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=8).contains(&id) {
            Ok(Self { id })
        } else {
            Err(Error::UnknownScenario(id))
        }
    }

    pub fn all() -> impl Iterator<Item = ScenarioCurve> {
        Self::ALL_IDS.into_iter().map(|id| ScenarioCurve { id })
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn name(&self) -> &'static str {
        match self.id {
            1 => "Logistic growth curve",
            2 => "Gompertz curve A",
            3 => "Gompertz curve B",
            4 => "Gompertz curve C",
            5 => "Linear duration-response curve on log-odds scale",
            6 => "Quadratic duration-response curve, curvature > 0",
            7 => "Quadratic duration-response curve, curvature < 0",
            8 => "Piece-wise linear duration-response curve",
            _ => unreachable!(),
        }
    }

    /// Probability of cure at `duration`, which must lie in [10, 20].
    pub fn true_probability(&self, duration: f64) -> Result<f64> {
        check_duration(duration)?;
        Ok(self.formula(duration))
    }

    /// Element-wise [`Self::true_probability`] over a grid of durations.
    pub fn true_curve_grid(&self, grid: &[f64]) -> Result<Vec<f64>> {
        if grid.is_empty() {
            return Err(crate::error::domain("empty duration grid"));
        }
        grid.iter().map(|&d| self.true_probability(d)).collect()
    }

    fn formula(&self, d: f64) -> f64 {
        match self.id {
            1 => 0.05 + 0.9 / (1.0 + (-2.0 * d + 25.0).exp()),
            2 => 0.9 * (-(-0.5 * (d - 11.0)).exp()).exp(),
            3 => 0.9 * (-(-(d - 11.0)).exp()).exp(),
            4 => 0.9 * (-2.0 * (-(d - 9.0)).exp()).exp(),
            5 => crate::glm::inv_logit(0.847 + 0.210 * (d - 10.0)),
            6 => 0.7 + 0.0015 * (d - 10.0).powi(2),
            7 => 0.7 - 0.0015 * (d - 10.0).powi(2) + 0.03 * (d - 10.0),
            // Disjoint segments [10,12), [12,15), [15,20]; coefficients kept
            // as given, so the curve drops by 0.01 at D = 15.
            8 => {
                if d < 12.0 {
                    0.5 + 0.15 * (d - 10.0)
                } else if d < 15.0 {
                    0.8 + 0.05 * (d - 12.0)
                } else {
                    0.94 + 0.01 * (d - 15.0)
                }
            }
            _ => unreachable!(),
        }
    }
}

impl Curve for ScenarioCurve {
    fn probability(&self, duration: f64) -> f64 {
        self.formula(duration)
    }
}

impl std::fmt::Display for ScenarioCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Scenario {}", self.id)
    }
}

pub(crate) fn check_duration(duration: f64) -> Result<()> {
    if (D_MIN..=D_MAX).contains(&duration) {
        Ok(())
    } else {
        Err(Error::DurationOutOfRange {
            duration,
            min: D_MIN,
            max: D_MAX,
        })
    }
}
