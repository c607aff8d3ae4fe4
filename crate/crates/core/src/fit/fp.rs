use crate::error::{domain, Error, Result};
use crate::glm::{fit_logistic, DesignMatrix, GlmFit};
use crate::simulate::TrialData;

use super::{Basis, FittedCurve, Method};

/// Candidate powers; `0` denotes the natural logarithm.
pub const FP_POWERS: [f64; 8] = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0];

/// Deviances closer than this are treated as tied.
pub const FP_TIE_TOL: f64 = 1e-9;

fn power_term(d: f64, p: f64) -> f64 {
    if p == 0.0 {
        d.ln()
    } else if p == 0.5 {
        d.sqrt()
    } else if p == -0.5 {
        1.0 / d.sqrt()
    } else {
        d.powi(p as i32)
    }
}

/// `(1, D^p1, D^p2)`, with `D^0 = ln D` and `(1, D^p, D^p ln D)` for `p1 == p2`.
pub fn fp_basis(duration: f64, p1: f64, p2: f64) -> Result<Vec<f64>> {
    for p in [p1, p2] {
        if !FP_POWERS.contains(&p) {
            return Err(Error::InvalidBasis(format!("power {p} is not in {FP_POWERS:?}")));
        }
    }
    if p1 > p2 {
        return Err(Error::InvalidBasis(format!("powers must satisfy p1 <= p2, got ({p1}, {p2})")));
    }
    if !(duration > 0.0) {
        return Err(Error::InvalidBasis(format!("duration {duration} must be positive")));
    }
    let first = power_term(duration, p1);
    let second = if p1 == p2 {
        first * duration.ln()
    } else {
        power_term(duration, p2)
    };
    Ok(vec![1.0, first, second])
}

/// All 36 power pairs `p1 <= p2` in lexicographic order, each fitted by
/// maximum likelihood.
pub fn fp2_candidates(data: &TrialData) -> Result<Vec<((f64, f64), GlmFit)>> {
    if data.n_arms() < 3 {
        return Err(domain(format!(
            "FP2 has 3 coefficients but the trial has only {} arms",
            data.n_arms()
        )));
    }
    let mut out = Vec::with_capacity(36);
    for (i, &p1) in FP_POWERS.iter().enumerate() {
        for &p2 in &FP_POWERS[i..] {
            let x = DesignMatrix::from_trial(data, |d| fp_basis(d, p1, p2))?;
            out.push(((p1, p2), fit_logistic(&x)?));
        }
    }
    Ok(out)
}

/// Minimum-deviance FP2 model; ties go to the lexicographically smallest pair.
pub fn fit_fp2(data: &TrialData) -> Result<FittedCurve> {
    let ((p1, p2), glm) = best_of(fp2_candidates(data)?);
    Ok(fp_curve(vec![p1, p2], glm))
}

/// `(1, D^p)` with `D^0 = ln D`.
pub fn fp1_basis(duration: f64, p: f64) -> Result<Vec<f64>> {
    fp_basis(duration, p, p).map(|mut row| {
        row.truncate(2);
        row
    })
}

/// Minimum-deviance FP1 model over the eight powers.
pub fn fit_fp1(data: &TrialData) -> Result<FittedCurve> {
    let mut cands = Vec::with_capacity(FP_POWERS.len());
    for &p in &FP_POWERS {
        let x = DesignMatrix::from_trial(data, |d| fp1_basis(d, p))?;
        cands.push((p, fit_logistic(&x)?));
    }
    let (p, glm) = best_of(cands);
    Ok(fp_curve(vec![p], glm))
}

/// Deviance gap above which FP2 is preferred to a straight line
/// (chi-squared, 3 df, upper 5% point).
pub const CHI2_3DF_95: f64 = 7.814_727_903_251_178;
/// Deviance gap above which FP2 is preferred to the best FP1
/// (chi-squared, 2 df, upper 5% point).
pub const CHI2_2DF_95: f64 = 5.991_464_547_107_979;

/// How the final fractional polynomial is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FpSelection {
    /// Closed test at the 5% level: best FP2 against the linear model
    /// (3 df), then against the best FP1 (2 df); the simpler model is kept
    /// unless FP2 is significantly better.
    #[default]
    ClosedTest,
    /// Best FP2 by deviance, no simplification.
    MinDeviance,
}

impl FpSelection {
    pub fn label(&self) -> &'static str {
        match self {
            FpSelection::ClosedTest => "closed-test",
            FpSelection::MinDeviance => "min-deviance",
        }
    }
}

impl std::str::FromStr for FpSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-test" => Ok(FpSelection::ClosedTest),
            "min-deviance" => Ok(FpSelection::MinDeviance),
            _ => Err(domain(format!(
                "unknown FP selection {s:?} (expected closed-test or min-deviance)"
            ))),
        }
    }
}

/// Fractional polynomial of degree at most two, chosen by `selection`.
pub fn fit_fp(data: &TrialData, selection: FpSelection) -> Result<FittedCurve> {
    let fp2 = fit_fp2(data)?;
    if selection == FpSelection::MinDeviance {
        return Ok(fp2);
    }
    let x = DesignMatrix::from_trial(data, |d| fp1_basis(d, 1.0))?;
    let linear = fp_curve(vec![1.0], fit_logistic(&x)?);
    if linear.glm.deviance - fp2.glm.deviance < CHI2_3DF_95 {
        return Ok(linear);
    }
    let fp1 = fit_fp1(data)?;
    if fp1.glm.deviance - fp2.glm.deviance < CHI2_2DF_95 {
        return Ok(fp1);
    }
    Ok(fp2)
}

fn best_of<K>(cands: Vec<(K, GlmFit)>) -> (K, GlmFit) {
    let mut best: Option<(K, GlmFit)> = None;
    for (key, fit) in cands {
        let better = match &best {
            None => true,
            Some((_, b)) => fit.deviance < b.deviance - FP_TIE_TOL,
        };
        if better {
            best = Some((key, fit));
        }
    }
    best.expect("at least one candidate")
}

fn fp_curve(powers: Vec<f64>, glm: GlmFit) -> FittedCurve {
    FittedCurve {
        method: Method::Fp,
        basis: Basis::FractionalPolynomial { powers },
        glm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::TrialDesign;
    use crate::metrics::sabc;
    use crate::scenario::ScenarioCurve;
    use crate::simulate::{derive_stream, simulate_trial, ArmOutcome};

    #[test]
    fn basis_conventions() {
        let b = fp_basis(10.0, 0.0, 1.0).unwrap();
        assert_eq!(b[0], 1.0);
        assert!((b[1] - 10f64.ln()).abs() < 1e-15);
        assert_eq!(b[2], 10.0);
        let r = fp_basis(10.0, 1.0, 1.0).unwrap();
        assert!((r[2] - 10.0 * 10f64.ln()).abs() < 1e-12);
        for (i, &p) in FP_POWERS.iter().enumerate() {
            for &q in &FP_POWERS[i..] {
                let one = fp_basis(1.0, p, q).unwrap();
                let e1 = if p == 0.0 { 0.0 } else { 1.0 };
                let e2 = if p == q || q == 0.0 { 0.0 } else { 1.0 };
                assert_eq!(one, vec![1.0, e1, e2], "({p}, {q})");
            }
        }
        assert!((fp_basis(4.0, -2.0, -0.5).unwrap()[1] - 1.0 / 16.0).abs() < 1e-15);
        assert!(fp_basis(10.0, 1.5, 2.0).is_err());
        assert!(fp_basis(10.0, 2.0, 1.0).is_err());
        assert!(fp_basis(0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn enumerates_thirty_six_models() {
        let design = TrialDesign::from_label("ED7", 504).unwrap();
        let sc = ScenarioCurve::new(1).unwrap();
        let data = simulate_trial(&design, &sc, &mut derive_stream(1, 1, "ED7", 0)).unwrap();
        let cands = fp2_candidates(&data).unwrap();
        assert_eq!(cands.len(), 36);
        let repeated = cands.iter().filter(|((a, b), _)| a == b).count();
        assert_eq!(repeated, 8);
        let best = fit_fp2(&data).unwrap();
        for (_, c) in &cands {
            assert!(best.glm.deviance <= c.deviance + FP_TIE_TOL);
        }
    }

    #[test]
    fn noise_free_linear_logit_recovered() {
        let sc = ScenarioCurve::new(5).unwrap();
        let design = TrialDesign::from_label("ED7", 504).unwrap();
        let rows: Vec<ArmOutcome> = design
            .arms()
            .iter()
            .zip(design.allocation())
            .map(|(&d, &n)| ArmOutcome {
                duration: d,
                n,
                cures: (f64::from(n) * sc.true_probability(d).unwrap()).round() as u32,
            })
            .collect();
        let fit = fit_fp2(&TrialData::new(rows).unwrap()).unwrap();
        let err = sabc(&sc, &fit, 10.0, 20.0, 0.01).unwrap();
        assert!(err < 0.01, "sABC {err}");
    }

    #[test]
    fn saturated_ties_pick_smallest_pair() {
        // Three arms: every FP2 model is saturated, so all deviances tie at 0.
        let data = TrialData::from_triples(&[(10.0, 100, 40), (15.0, 100, 60), (20.0, 100, 70)])
            .unwrap();
        let fit = fit_fp2(&data).unwrap();
        assert_eq!(fit.basis, Basis::FractionalPolynomial { powers: vec![-2.0, -2.0] });
    }

    #[test]
    fn too_few_arms_rejected() {
        let data = TrialData::from_triples(&[(10.0, 100, 40), (20.0, 100, 70)]).unwrap();
        assert!(fit_fp2(&data).is_err());
    }

    fn term_derivative(d: f64, p: f64) -> f64 {
        if p == 0.0 {
            1.0 / d
        } else {
            p * d.powf(p - 1.0)
        }
    }

    #[test]
    fn log_odds_derivative_matches_analytic() {
        let design = TrialDesign::from_label("ED7", 504).unwrap();
        for id in 1..=8 {
            let sc = ScenarioCurve::new(id).unwrap();
            let data =
                simulate_trial(&design, &sc, &mut derive_stream(77, id, "ED7", 3)).unwrap();
            let fit = fit_fp2(&data).unwrap();
            let Basis::FractionalPolynomial { powers } = &fit.basis else {
                unreachable!()
            };
            let (p1, p2) = (powers[0], powers[1]);
            let b = &fit.glm.coefficients;
            for d in [11.0f64, 13.3, 15.0, 17.7, 19.0] {
                let analytic = if p1 == p2 {
                    let t = if p1 == 0.0 { d.ln() } else { d.powf(p1) };
                    b[1] * term_derivative(d, p1)
                        + b[2] * (term_derivative(d, p1) * d.ln() + t / d)
                } else {
                    b[1] * term_derivative(d, p1) + b[2] * term_derivative(d, p2)
                };
                let h = 1e-5;
                let numeric = (fit.log_odds(d + h) - fit.log_odds(d - h)) / (2.0 * h);
                assert!(
                    (numeric - analytic).abs() < 1e-4,
                    "scenario {id} ({p1},{p2}) at {d}: {numeric} vs {analytic}"
                );
            }
        }
    }
    fn tail_mass(df: f64, x: f64) -> f64 {
        // Simpson rule on the upper tail of the chi-squared density.
        let norm = 2f64.powf(df / 2.0) * if df == 2.0 { 1.0 } else { std::f64::consts::PI.sqrt() / 2.0 };
        let f = |t: f64| t.powf(df / 2.0 - 1.0) * (-t / 2.0).exp() / norm;
        let (a, b, n) = (x, x + 200.0, 200_000);
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn chi_squared_cutoffs_are_upper_five_percent_points() {
        assert!((tail_mass(3.0, CHI2_3DF_95) - 0.05).abs() < 1e-9);
        assert!((tail_mass(2.0, CHI2_2DF_95) - 0.05).abs() < 1e-9);
    }

    fn noise_free(id: u8) -> TrialData {
        let sc = ScenarioCurve::new(id).unwrap();
        let design = TrialDesign::from_label("ED7", 504).unwrap();
        let rows = design
            .arms()
            .iter()
            .zip(design.allocation())
            .map(|(&d, &n)| ArmOutcome {
                duration: d,
                n,
                cures: (f64::from(n) * sc.true_probability(d).unwrap()).round() as u32,
            })
            .collect();
        TrialData::new(rows).unwrap()
    }

    #[test]
    fn closed_test_keeps_line_for_linear_logit() {
        let fit = fit_fp(&noise_free(5), FpSelection::ClosedTest).unwrap();
        assert_eq!(fit.basis, Basis::FractionalPolynomial { powers: vec![1.0] });
        let fp2 = fit_fp(&noise_free(5), FpSelection::MinDeviance).unwrap();
        assert!(fp2.glm.deviance <= fit.glm.deviance + FP_TIE_TOL);
    }

    #[test]
    fn closed_test_agrees_with_deviance_gaps() {
        let design = TrialDesign::from_label("ED7", 504).unwrap();
        for id in 1..=8 {
            let sc = ScenarioCurve::new(id).unwrap();
            for sim in 0..5 {
                let data =
                    simulate_trial(&design, &sc, &mut derive_stream(9, id, "ED7", sim)).unwrap();
                let fp2 = fit_fp2(&data).unwrap().glm.deviance;
                let fp1 = fit_fp1(&data).unwrap().glm.deviance;
                let x = DesignMatrix::from_trial(&data, |d| fp1_basis(d, 1.0)).unwrap();
                let lin = fit_logistic(&x).unwrap().deviance;
                let chosen = fit_fp(&data, FpSelection::ClosedTest).unwrap().glm.deviance;
                let expected = if lin - fp2 < CHI2_3DF_95 {
                    lin
                } else if fp1 - fp2 < CHI2_2DF_95 {
                    fp1
                } else {
                    fp2
                };
                assert_eq!(chosen, expected, "scenario {id} sim {sim}");
            }
        }
    }

    #[test]
    fn selection_parses() {
        assert_eq!("closed-test".parse::<FpSelection>().unwrap(), FpSelection::ClosedTest);
        assert_eq!("min-deviance".parse::<FpSelection>().unwrap(), FpSelection::MinDeviance);
        assert!("aic".parse::<FpSelection>().is_err());
        assert_eq!(FpSelection::default(), FpSelection::ClosedTest);
    }
}
