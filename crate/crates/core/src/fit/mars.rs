//! Adaptive hinge-function regression in one covariate.
//!
//! Term selection runs on arm-level cure proportions by weighted least
//! squares (weights are arm sizes). The residual sum of squares is the
//! patient-level one: it includes the within-arm binary variance, which is
//! constant across models but keeps the GCV denominator, computed with the
//! total number of patients, on a consistent scale. The selected basis is
//! then refitted by logistic regression.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::glm::{fit_logistic, DesignMatrix};
use crate::simulate::TrialData;

use super::{Basis, FittedCurve, Method};

/// GCV cost per hinge knot for an additive single-covariate model.
pub const GCV_PENALTY: f64 = 2.0;
pub const MARS_MAX_TERMS_CAP: usize = 11;
const MIN_RSS_GAIN: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarsTerm {
    Intercept,
    /// `max(0, D - knot)`
    Right(f64),
    /// `max(0, knot - D)`
    Left(f64),
}

impl MarsTerm {
    pub fn eval(&self, d: f64) -> f64 {
        match *self {
            MarsTerm::Intercept => 1.0,
            MarsTerm::Right(k) => (d - k).max(0.0),
            MarsTerm::Left(k) => (k - d).max(0.0),
        }
    }

    pub fn knot(&self) -> Option<f64> {
        match *self {
            MarsTerm::Intercept => None,
            MarsTerm::Right(k) | MarsTerm::Left(k) => Some(k),
        }
    }
}

impl fmt::Display for MarsTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarsTerm::Intercept => f.write_str("1"),
            MarsTerm::Right(k) => write!(f, "max(0, D - {k})"),
            MarsTerm::Left(k) => write!(f, "max(0, {k} - D)"),
        }
    }
}

/// `min(2 * arms - 1, 11)`.
pub fn mars_max_terms(n_arms: usize) -> usize {
    (2 * n_arms).saturating_sub(1).clamp(1, MARS_MAX_TERMS_CAP)
}

/// Effective parameter count `C(M) = M + d (M - 1) / 2`.
pub fn effective_parameters(n_terms: usize) -> f64 {
    let m = n_terms as f64;
    m + GCV_PENALTY * (m - 1.0) / 2.0
}

/// Patient-level residual sum of squares of the least-squares fit on `terms`,
/// or `None` if the term columns are rank deficient on this data.
fn weighted_rss(terms: &[MarsTerm], data: &TrialData) -> Option<f64> {
    let rows = data.rows();
    let (m, p) = (rows.len(), terms.len());
    if p > m {
        return None;
    }
    let mut a = DMatrix::zeros(m, p);
    let mut b = DVector::zeros(m);
    let mut pure_error = 0.0;
    for (i, r) in rows.iter().enumerate() {
        let n = f64::from(r.n);
        let prop = r.proportion();
        let sw = n.sqrt();
        for (j, t) in terms.iter().enumerate() {
            a[(i, j)] = sw * t.eval(r.duration);
        }
        b[i] = sw * prop;
        pure_error += n * prop * (1.0 - prop);
    }
    let col_norms: Vec<f64> = (0..p).map(|j| a.column(j).norm()).collect();
    if col_norms.contains(&0.0) {
        return None;
    }
    for j in 0..p {
        a.column_mut(j).scale_mut(1.0 / col_norms[j]);
    }
    let qr = a.qr();
    let r = qr.r();
    if (0..p).any(|j| r[(j, j)].abs() <= RANK_TOL) {
        return None;
    }
    let qtb = qr.q().transpose() * &b;
    let explained = qtb.norm_squared();
    let lack_of_fit = (b.norm_squared() - explained).max(0.0);
    Some(pure_error + lack_of_fit)
}

/// Generalised cross-validation score of a term set.
pub fn gcv(terms: &[MarsTerm], data: &TrialData) -> f64 {
    let Some(rss) = weighted_rss(terms, data) else {
        return f64::INFINITY;
    };
    let n = data.total_n() as f64;
    let c = effective_parameters(terms.len());
    if c >= n {
        return f64::INFINITY;
    }
    (rss / n) / (1.0 - c / n).powi(2)
}

/// Greedy forward pass. Each step tries a reflected hinge pair at every arm
/// duration (halves that vanish on every arm are dropped) and keeps the one
/// that reduces the residual sum of squares most.
pub fn mars_forward(data: &TrialData, max_terms: usize) -> Vec<MarsTerm> {
    let mut terms = vec![MarsTerm::Intercept];
    let mut rss = weighted_rss(&terms, data).expect("intercept-only fit");
    let durations = data.durations();

    while terms.len() < max_terms {
        let mut best: Option<(f64, Vec<MarsTerm>)> = None;
        for &k in &durations {
            let pair: Vec<MarsTerm> = [MarsTerm::Right(k), MarsTerm::Left(k)]
                .into_iter()
                .filter(|t| durations.iter().any(|&d| t.eval(d) != 0.0))
                .filter(|t| !terms.contains(t))
                .collect();
            if pair.is_empty() || terms.len() + pair.len() > max_terms {
                continue;
            }
            let mut trial = terms.clone();
            trial.extend_from_slice(&pair);
            let Some(trial_rss) = weighted_rss(&trial, data) else {
                continue;
            };
            if best.as_ref().is_none_or(|(r, _)| trial_rss < *r) {
                best = Some((trial_rss, pair));
            }
        }
        match best {
            Some((new_rss, pair)) if rss - new_rss >= MIN_RSS_GAIN => {
                terms.extend(pair);
                rss = new_rss;
            }
            _ => break,
        }
    }
    terms
}

/// Backward elimination: repeatedly drop the non-intercept term whose removal
/// gives the lowest GCV and return the visited subset with minimum GCV
/// (ties favour the smaller model).
pub fn mars_prune(terms: &[MarsTerm], data: &TrialData) -> Vec<MarsTerm> {
    let mut current = terms.to_vec();
    let mut best_gcv = gcv(&current, data);
    let mut best = current.clone();

    while current.len() > 1 {
        let mut step: Option<(f64, usize)> = None;
        for (idx, t) in current.iter().enumerate() {
            if *t == MarsTerm::Intercept {
                continue;
            }
            let mut reduced = current.clone();
            reduced.remove(idx);
            let score = gcv(&reduced, data);
            if step.is_none_or(|(s, _)| score < s) {
                step = Some((score, idx));
            }
        }
        let Some((score, idx)) = step else { break };
        current.remove(idx);
        if score <= best_gcv {
            best_gcv = score;
            best = current.clone();
        }
    }
    best
}

/// Forward pass, GCV pruning, then a logistic refit of the selected terms.
pub fn fit_mars(data: &TrialData) -> Result<FittedCurve> {
    let forward = mars_forward(data, mars_max_terms(data.n_arms()));
    let terms = mars_prune(&forward, data);
    let x = DesignMatrix::from_trial(data, |d| Ok(terms.iter().map(|t| t.eval(d)).collect()))?;
    let glm = fit_logistic(&x)?;
    Ok(FittedCurve {
        method: Method::Mars,
        basis: Basis::Mars { terms },
        glm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::TrialDesign;
    use crate::scenario::ScenarioCurve;
    use crate::simulate::{derive_stream, simulate_trial, ArmOutcome};

    fn trial(seed: u64, id: u8) -> TrialData {
        let design = TrialDesign::from_label("ED7", 504).unwrap();
        let sc = ScenarioCurve::new(id).unwrap();
        simulate_trial(&design, &sc, &mut derive_stream(seed, id, "ED7", 0)).unwrap()
    }

    #[test]
    fn hinge_definition() {
        assert_eq!(MarsTerm::Right(15.0).eval(12.0), 0.0);
        assert_eq!(MarsTerm::Left(15.0).eval(12.0), 3.0);
        assert_eq!(MarsTerm::Intercept.eval(12.0), 1.0);
    }

    #[test]
    fn effective_parameter_count() {
        assert_eq!(effective_parameters(1), 1.0);
        assert_eq!(effective_parameters(3), 5.0);
        assert_eq!(mars_max_terms(7), 11);
        assert_eq!(mars_max_terms(3), 5);
        assert_eq!(mars_max_terms(20), 11);
    }

    #[test]
    fn forward_respects_cap_and_descends() {
        let data = trial(11, 6);
        assert_eq!(mars_forward(&data, 1), vec![MarsTerm::Intercept]);
        let three = mars_forward(&data, 3);
        assert!(three.len() <= 3);
        let rss0 = weighted_rss(&[MarsTerm::Intercept], &data).unwrap();
        let rss1 = weighted_rss(&three, &data).unwrap();
        assert!(rss1 <= rss0);
        let full = mars_forward(&data, 11);
        assert!(full.len() <= data.n_arms());
        assert_eq!(full[0], MarsTerm::Intercept);
    }

    #[test]
    fn prune_minimises_gcv() {
        for id in 1..=8 {
            let data = trial(21, id);
            let full = mars_forward(&data, mars_max_terms(data.n_arms()));
            let pruned = mars_prune(&full, &data);
            assert!(gcv(&pruned, &data) <= gcv(&full, &data));
            assert!(pruned.contains(&MarsTerm::Intercept));
        }
        let data = trial(21, 1);
        assert_eq!(mars_prune(&[MarsTerm::Intercept], &data), vec![MarsTerm::Intercept]);
    }

    #[test]
    fn knots_come_from_arms_on_piecewise_linear_truth() {
        let design = TrialDesign::from_label("ED7", 7000).unwrap();
        let bend = design.arms()[2];
        let rows: Vec<ArmOutcome> = design
            .arms()
            .iter()
            .zip(design.allocation())
            .map(|(&d, &n)| {
                let p = 0.5 + 0.08 * (d.min(bend) - 10.0) + 0.01 * (d - bend).max(0.0);
                ArmOutcome {
                    duration: d,
                    n,
                    cures: (f64::from(n) * p).round() as u32,
                }
            })
            .collect();
        let data = TrialData::new(rows).unwrap();
        let fit = fit_mars(&data).unwrap();
        let Basis::Mars { terms } = &fit.basis else {
            unreachable!()
        };
        assert_eq!(terms[0], MarsTerm::Intercept);
        for k in terms.iter().filter_map(MarsTerm::knot) {
            assert!(design.arms().contains(&k));
        }
        assert!(terms.iter().any(|t| t.knot() == Some(bend)), "{terms:?}");
        for i in 0..=100 {
            let p = fit.predict(10.0 + 0.1 * i as f64);
            assert!(p > 0.0 && p < 1.0);
        }
    }
}
