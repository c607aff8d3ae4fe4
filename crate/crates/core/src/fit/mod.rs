//! Flexible regression strategies producing fitted duration-response curves.

mod fp;
mod mars;
mod spline;

use std::fmt;
use std::str::FromStr;

pub use fp::{
    fit_fp, fit_fp1, fit_fp2, fp1_basis, fp2_candidates, fp_basis, FpSelection, CHI2_2DF_95,
    CHI2_3DF_95, FP_POWERS, FP_TIE_TOL,
};
pub use mars::{
    effective_parameters, fit_mars, gcv, mars_forward, mars_max_terms, mars_prune, MarsTerm,
    GCV_PENALTY, MARS_MAX_TERMS_CAP,
};
pub use spline::{fit_linear_spline, spline_basis, LS3_KNOTS, LSNE_KNOTS, ls5_knots};

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::glm::{inv_logit, GlmFit, ETA_CLAMP};
use crate::simulate::TrialData;

/// Regression strategy used to estimate the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Fp,
    Ls3,
    Ls5,
    Lsne,
    Mars,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Fp, Method::Ls3, Method::Ls5, Method::Lsne, Method::Mars];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Fp => "FP",
            Method::Ls3 => "LS3",
            Method::Ls5 => "LS5",
            Method::Lsne => "LSNE",
            Method::Mars => "MARS",
        }
    }

    /// Fits this method to one trial with default settings.
    pub fn fit(&self, data: &TrialData) -> Result<FittedCurve> {
        self.fit_with(data, FpSelection::default())
    }

    pub fn fit_with(&self, data: &TrialData, fp_selection: FpSelection) -> Result<FittedCurve> {
        match self {
            Method::Fp => fit_fp(data, fp_selection),
            Method::Ls3 => fit_linear_spline(data, &LS3_KNOTS).map(|c| c.with_method(*self)),
            Method::Ls5 => fit_linear_spline(data, &ls5_knots()).map(|c| c.with_method(*self)),
            Method::Lsne => fit_linear_spline(data, &LSNE_KNOTS).map(|c| c.with_method(*self)),
            Method::Mars => fit_mars(data),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Domain(format!("unknown method {s:?} (expected FP, LS3, LS5, LSNE or MARS)"))
            })
    }
}

/// The basis a curve was fitted on; fully determines the design columns.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// One or two powers; see [`fp_basis`] for the conventions.
    FractionalPolynomial { powers: Vec<f64> },
    LinearSpline { knots: Vec<f64> },
    Mars { terms: Vec<MarsTerm> },
}

impl Basis {
    pub fn evaluate(&self, duration: f64) -> Result<Vec<f64>> {
        match self {
            Basis::FractionalPolynomial { powers } => match powers[..] {
                [p] => fp1_basis(duration, p),
                [p1, p2] => fp_basis(duration, p1, p2),
                _ => Err(Error::InvalidBasis(format!("FP with powers {powers:?}"))),
            },
            Basis::LinearSpline { knots } => spline_basis(duration, knots),
            Basis::Mars { terms } => Ok(terms.iter().map(|t| t.eval(duration)).collect()),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::FractionalPolynomial { powers } => {
                let p: Vec<String> = powers.iter().map(|p| p.to_string()).collect();
                write!(f, "FP{}({})", powers.len(), p.join(", "))
            }
            Basis::LinearSpline { knots } => write!(f, "knots {knots:?}"),
            Basis::Mars { terms } => {
                let parts: Vec<String> = terms.iter().map(|t| t.to_string()).collect();
                write!(f, "{}", parts.join(" + "))
            }
        }
    }
}

/// A fitted logistic curve over the duration range.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedCurve {
    pub method: Method,
    pub basis: Basis,
    pub glm: GlmFit,
}

impl FittedCurve {
    fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    /// Fitted log-odds at `duration` (unclamped).
    pub fn log_odds(&self, duration: f64) -> f64 {
        let row = self
            .basis
            .evaluate(duration)
            .expect("basis evaluation at a positive duration");
        self.glm
            .linear_predictor(&row)
            .expect("basis length matches coefficients")
    }

    /// Estimated probability of cure, strictly inside (0, 1).
    pub fn predict(&self, duration: f64) -> f64 {
        inv_logit(self.log_odds(duration).clamp(-ETA_CLAMP, ETA_CLAMP))
    }
}

impl Curve for FittedCurve {
    fn probability(&self, duration: f64) -> f64 {
        self.predict(duration)
    }
}
