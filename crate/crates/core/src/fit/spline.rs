use crate::error::{Error, Result};
use crate::glm::{fit_logistic, DesignMatrix};
use crate::scenario::{D_MAX, D_MIN};
use crate::simulate::TrialData;

use super::{Basis, FittedCurve, Method};

pub const LS3_KNOTS: [f64; 3] = [12.5, 15.0, 17.5];
pub const LSNE_KNOTS: [f64; 3] = [11.0, 13.0, 15.0];

/// Five equidistant interior knots.
pub fn ls5_knots() -> Vec<f64> {
    let step = (D_MAX - D_MIN) / 6.0;
    (1..=5).map(|i| D_MIN + i as f64 * step).collect()
}

/// `(1, D, (D - K_1)_+, ..., (D - K_m)_+)`.
pub fn spline_basis(duration: f64, knots: &[f64]) -> Result<Vec<f64>> {
    if !knots.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidBasis(format!("knots {knots:?} not strictly ascending")));
    }
    if knots.iter().any(|&k| !(k > D_MIN && k < D_MAX)) {
        return Err(Error::InvalidBasis(format!(
            "knots {knots:?} must lie strictly inside ({D_MIN}, {D_MAX})"
        )));
    }
    let mut row = Vec::with_capacity(knots.len() + 2);
    row.push(1.0);
    row.push(duration);
    row.extend(knots.iter().map(|&k| (duration - k).max(0.0)));
    Ok(row)
}

/// Logistic fit on a linear-spline basis with fixed knots. Designs with
/// fewer arms than columns come back ridge-flagged rather than failing.
pub fn fit_linear_spline(data: &TrialData, knots: &[f64]) -> Result<FittedCurve> {
    spline_basis(D_MIN, knots)?;
    let x = DesignMatrix::from_trial(data, |d| spline_basis(d, knots))?;
    let glm = fit_logistic(&x)?;
    let method = if knots == LS3_KNOTS {
        Method::Ls3
    } else if knots == LSNE_KNOTS {
        Method::Lsne
    } else {
        Method::Ls5
    };
    Ok(FittedCurve {
        method,
        basis: Basis::LinearSpline {
            knots: knots.to_vec(),
        },
        glm,
    })
}
