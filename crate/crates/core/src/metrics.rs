//! Discrepancy between true and fitted curves, and summaries over replicates.

use crate::curve::Curve;
use crate::error::{domain, Result};

/// Default integration step in days.
pub const DEFAULT_STEP: f64 = 0.01;
/// Name of the percentile estimator, recorded in run metadata.
pub const PERCENTILE_RULE: &str = "linear interpolation between order statistics at 1 + q(n-1)";

/// Uniform grid from `d_min` to `d_max` inclusive with spacing `step`.
/// The range must be an integer number of steps.
pub fn integration_grid(d_min: f64, d_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(domain(format!("integration step must be positive, got {step}")));
    }
    if !(d_min < d_max) {
        return Err(domain(format!("empty integration range [{d_min}, {d_max}]")));
    }
    let intervals = (d_max - d_min) / step;
    let n = intervals.round();
    if (intervals - n).abs() > 1e-9 * n.max(1.0) {
        return Err(domain(format!(
            "step {step} does not divide [{d_min}, {d_max}] so the grid would miss an endpoint"
        )));
    }
    let n = n as usize;
    let span = d_max - d_min;
    Ok((0..=n)
        .map(|i| {
            if i == n {
                d_max
            } else {
                d_min + span * i as f64 / n as f64
            }
        })
        .collect())
}

/// Scaled area between two curves: the composite trapezoid integral of
/// `|truth - fitted|` over `[d_min, d_max]`, divided by the range length.
/// Returned as a fraction; multiply by 100 for a percentage.
pub fn sabc<A: Curve, B: Curve>(
    truth: &A,
    fitted: &B,
    d_min: f64,
    d_max: f64,
    step: f64,
) -> Result<f64> {
    let grid = integration_grid(d_min, d_max, step)?;
    let gaps: Vec<f64> = grid
        .iter()
        .map(|&d| (truth.probability(d) - fitted.probability(d)).abs())
        .collect();
    let h = (d_max - d_min) / (grid.len() - 1) as f64;
    let interior: f64 = gaps[1..gaps.len() - 1].iter().sum();
    let area = h * (interior + 0.5 * (gaps[0] + gaps[gaps.len() - 1]));
    Ok(area / (d_max - d_min))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distance {
    Absolute,
    Squared,
}

/// Mean pointwise distance over a fixed set of durations.
pub fn expected_error<A: Curve, B: Curve>(
    truth: &A,
    fitted: &B,
    durations: &[f64],
    distance: Distance,
) -> Result<f64> {
    if durations.is_empty() {
        return Err(domain("expected error needs at least one duration"));
    }
    for &d in durations {
        crate::scenario::check_duration(d)?;
    }
    let total: f64 = durations
        .iter()
        .map(|&d| {
            let diff = truth.probability(d) - fitted.probability(d);
            match distance {
                Distance::Absolute => diff.abs(),
                Distance::Squared => diff * diff,
            }
        })
        .sum();
    Ok(total / durations.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SabcSummary {
    pub min: f64,
    pub p5: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
    pub mean: f64,
    pub n_sims: usize,
}

/// Percentile `q` in [0, 1] of already-sorted values.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<SabcSummary> {
    if values.is_empty() {
        return Err(domain("cannot summarise an empty list"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(domain("NaN in values to summarise"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SabcSummary {
        min: sorted[0],
        p5: percentile_sorted(&sorted, 0.05),
        median: percentile_sorted(&sorted, 0.5),
        p95: percentile_sorted(&sorted, 0.95),
        max: sorted[sorted.len() - 1],
        mean: values.iter().sum::<f64>() / values.len() as f64,
        n_sims: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::FnCurve;
    use crate::scenario::ScenarioCurve;
    use proptest::prelude::*;

    #[test]
    fn identical_curves_give_zero() {
        for sc in ScenarioCurve::all() {
            assert_eq!(sabc(&sc, &sc, 10.0, 20.0, DEFAULT_STEP).unwrap(), 0.0);
        }
    }

    #[test]
    fn constant_offset() {
        let sc = ScenarioCurve::new(6).unwrap();
        let shifted = FnCurve(|d| sc.probability(d) + 0.02);
        let v = sabc(&sc, &shifted, 10.0, 20.0, DEFAULT_STEP).unwrap();
        assert!((v - 0.02).abs() < 1e-12, "{v}");
        let ee = expected_error(&sc, &shifted, &[10.0, 13.0, 20.0], Distance::Absolute).unwrap();
        assert!((ee - 0.02).abs() < 1e-12);
    }

    #[test]
    fn quadratic_against_constant() {
        // (1/10) * integral_10^20 0.0015 (D-10)^2 dD = 0.0015 * 1000 / 3 / 10
        let sc = ScenarioCurve::new(6).unwrap();
        let v = sabc(&sc, &FnCurve(|_| 0.7), 10.0, 20.0, DEFAULT_STEP).unwrap();
        assert!((v - 0.05).abs() < 1e-6, "{v}");
    }

    #[test]
    fn grid_shape_and_errors() {
        let g = integration_grid(10.0, 20.0, 0.01).unwrap();
        assert_eq!(g.len(), 1001);
        assert_eq!((g[0], g[1000]), (10.0, 20.0));
        assert!(integration_grid(10.0, 20.0, 0.0).is_err());
        assert!(integration_grid(10.0, 20.0, -0.1).is_err());
        assert!(integration_grid(10.0, 20.0, 0.3).is_err());
        assert!(integration_grid(20.0, 10.0, 0.1).is_err());
    }

    #[test]
    fn symmetric_in_its_arguments() {
        let a = ScenarioCurve::new(1).unwrap();
        let b = ScenarioCurve::new(3).unwrap();
        let ab = sabc(&a, &b, 10.0, 20.0, 0.01).unwrap();
        let ba = sabc(&b, &a, 10.0, 20.0, 0.01).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn expected_error_cases() {
        let sc = ScenarioCurve::new(2).unwrap();
        assert_eq!(expected_error(&sc, &sc, &[12.0, 18.0], Distance::Squared).unwrap(), 0.0);
        let g = FnCurve(|_| 0.3);
        let single = expected_error(&sc, &g, &[14.0], Distance::Absolute).unwrap();
        assert_eq!(single, (sc.probability(14.0) - 0.3).abs());
        let sq = expected_error(&sc, &g, &[14.0], Distance::Squared).unwrap();
        assert!((sq - single * single).abs() < 1e-15);
        assert!(expected_error(&sc, &g, &[], Distance::Absolute).is_err());
        assert!(expected_error(&sc, &g, &[25.0], Distance::Absolute).is_err());
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.min, s.median, s.max), (1.0, 3.0, 5.0));
        assert!((s.p5 - 1.2).abs() < 1e-12);
        assert!((s.p95 - 4.8).abs() < 1e-12);
        assert_eq!(s.mean, 3.0);
        let one = summarize(&[0.42]).unwrap();
        assert_eq!(
            [one.min, one.p5, one.median, one.p95, one.max, one.mean],
            [0.42; 6]
        );
        assert!(summarize(&[]).is_err());
    }

    proptest! {
        #[test]
        fn summary_is_ordered(values in prop::collection::vec(0.0f64..1.0, 1..300)) {
            let s = summarize(&values).unwrap();
            prop_assert!(s.min <= s.p5 && s.p5 <= s.median);
            prop_assert!(s.median <= s.p95 && s.p95 <= s.max);
            prop_assert!(s.min <= s.mean && s.mean <= s.max);
        }

        #[test]
        fn summary_ignores_order(mut values in prop::collection::vec(0.0f64..1.0, 1..100)) {
            let a = summarize(&values).unwrap();
            values.reverse();
            let b = summarize(&values).unwrap();
            prop_assert_eq!(a.median.to_bits(), b.median.to_bits());
            prop_assert_eq!(a.p95.to_bits(), b.p95.to_bits());
        }
    }
}
