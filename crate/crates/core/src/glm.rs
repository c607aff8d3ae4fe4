//! Weighted binomial logistic regression by iteratively reweighted least
//! squares, shared by every curve fitter.
//!
//! Non-intercept columns are centred and scaled to unit standard deviation
//! before iterating; reported coefficients are on the original column scale.
//! Each weighted least-squares step is solved by Householder QR.

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Result};
use crate::simulate::TrialData;

/// Linear predictor bound applied during iteration and prediction.
pub const ETA_CLAMP: f64 = 30.0;
pub const MAX_ITER: usize = 50;
pub const DEVIANCE_TOL: f64 = 1e-8;
pub const MAX_HALVINGS: usize = 10;
/// Ridge penalty on the standardised scale, intercept excluded.
pub const RIDGE: f64 = 1e-6;
const RANK_TOL: f64 = 1e-10;

pub fn inv_logit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Basis rows, binomial trial counts and successes for one fit.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    x: DMatrix<f64>,
    trials: Vec<f64>,
    cures: Vec<f64>,
}

impl DesignMatrix {
    /// `rows[i]` is the basis evaluated for observation `i`; its first entry
    /// must be the intercept `1`.
    pub fn new(rows: &[Vec<f64>], trials: &[f64], cures: &[f64]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(domain("design matrix has no rows"));
        }
        if trials.len() != m || cures.len() != m {
            return Err(domain("row, trial and cure counts differ"));
        }
        let p = rows[0].len();
        if p == 0 || rows.iter().any(|r| r.len() != p) {
            return Err(domain("ragged or empty design rows"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(domain("non-finite entry in design matrix"));
        }
        if rows.iter().any(|r| r[0] != 1.0) {
            return Err(domain("first design column must be the intercept"));
        }
        for (&n, &y) in trials.iter().zip(cures) {
            if !(n.is_finite() && y.is_finite() && n > 0.0 && (0.0..=n).contains(&y)) {
                return Err(domain(format!("invalid binomial row: {y} of {n}")));
            }
        }
        Ok(Self {
            x: DMatrix::from_fn(m, p, |i, j| rows[i][j]),
            trials: trials.to_vec(),
            cures: cures.to_vec(),
        })
    }

    /// Evaluates `basis` at each arm of `data`.
    pub fn from_trial<F>(data: &TrialData, basis: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<Vec<f64>>,
    {
        let rows = data
            .rows()
            .iter()
            .map(|r| basis(r.duration))
            .collect::<Result<Vec<_>>>()?;
        let trials: Vec<f64> = data.rows().iter().map(|r| f64::from(r.n)).collect();
        let cures: Vec<f64> = data.rows().iter().map(|r| f64::from(r.cures)).collect();
        Self::new(&rows, &trials, &cures)
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    pub fn trials(&self) -> &[f64] {
        &self.trials
    }

    pub fn cures(&self) -> &[f64] {
        &self.cures
    }
}

/// Centring and scaling applied to one column before iterating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnTransform {
    pub center: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub coefficients: Vec<f64>,
    pub deviance: f64,
    pub converged: bool,
    /// The ridge penalty was needed (rank deficiency or non-convergence).
    pub ridged: bool,
    pub iterations: usize,
    pub column_transform: Vec<ColumnTransform>,
}

impl GlmFit {
    pub fn linear_predictor(&self, basis_row: &[f64]) -> Result<f64> {
        if basis_row.len() != self.coefficients.len() {
            return Err(domain(format!(
                "basis row has {} entries, fit has {} coefficients",
                basis_row.len(),
                self.coefficients.len()
            )));
        }
        Ok(dot(&self.coefficients, basis_row))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub standardize: bool,
    pub force_ridge: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            standardize: true,
            force_ridge: false,
        }
    }
}

/// Maximum-likelihood logistic fit with default options.
pub fn fit_logistic(x: &DesignMatrix) -> Result<GlmFit> {
    fit_logistic_with(x, FitOptions::default())
}

pub fn fit_logistic_with(x: &DesignMatrix, opts: FitOptions) -> Result<GlmFit> {
    let (z, transform) = if opts.standardize {
        standardize(&x.x)
    } else {
        let t = vec![ColumnTransform { center: 0.0, scale: 1.0 }; x.n_cols()];
        (x.x.clone(), t)
    };

    let rank_deficient = opts.force_ridge || is_rank_deficient(&z);
    let mut run = irls(&z, &x.trials, &x.cures, rank_deficient);
    if !run.converged && !run.ridged {
        let iters = run.iterations;
        run = irls(&z, &x.trials, &x.cures, true);
        run.iterations += iters;
    }

    let coefficients = unstandardize(&run.gamma, &transform);
    Ok(GlmFit {
        coefficients,
        deviance: run.deviance,
        converged: run.converged,
        ridged: run.ridged,
        iterations: run.iterations,
        column_transform: transform,
    })
}

/// Inverse-logit of `fit · basis_row`, with the linear predictor clamped to
/// `[-ETA_CLAMP, ETA_CLAMP]` so the result stays strictly inside (0, 1).
pub fn predict_probability(fit: &GlmFit, basis_row: &[f64]) -> Result<f64> {
    let eta = fit.linear_predictor(basis_row)?;
    Ok(inv_logit(eta.clamp(-ETA_CLAMP, ETA_CLAMP)))
}

/// Binomial deviance of fitted probabilities `mu` against `cures` of `trials`.
pub fn binomial_deviance(trials: &[f64], cures: &[f64], mu: &[f64]) -> f64 {
    let mut dev = 0.0;
    for ((&n, &y), &m) in trials.iter().zip(cures).zip(mu) {
        if y > 0.0 {
            dev += y * (y / (n * m)).ln();
        }
        if y < n {
            dev += (n - y) * ((n - y) / (n * (1.0 - m))).ln();
        }
    }
    (2.0 * dev).max(0.0)
}

struct IrlsRun {
    gamma: DVector<f64>,
    deviance: f64,
    converged: bool,
    ridged: bool,
    iterations: usize,
}

fn irls(z: &DMatrix<f64>, trials: &[f64], cures: &[f64], mut ridged: bool) -> IrlsRun {
    let m = z.nrows();
    let props: Vec<f64> = cures.iter().zip(trials).map(|(y, n)| y / n).collect();

    // Start from the empirical logits, shrunk away from 0 and 1.
    let mu0: Vec<f64> = cures
        .iter()
        .zip(trials)
        .map(|(y, n)| (y + 0.5) / (n + 1.0))
        .collect();
    let w0: Vec<f64> = mu0.iter().zip(trials).map(|(mu, n)| n * mu * (1.0 - mu)).collect();
    let z0: Vec<f64> = mu0.iter().map(|&mu| logit(mu)).collect();
    let mut gamma = match wls(z, &w0, &z0, ridged) {
        Some(g) => g,
        None => {
            ridged = true;
            wls(z, &w0, &z0, true).expect("ridged least squares is full rank")
        }
    };

    let objective = |g: &DVector<f64>, ridged: bool| -> (f64, f64) {
        let mu = fitted_probs(z, g);
        let dev = binomial_deviance(trials, cures, &mu);
        let pen = if ridged {
            RIDGE * g.iter().skip(1).map(|v| v * v).sum::<f64>()
        } else {
            0.0
        };
        (dev + pen, dev)
    };

    let (mut obj, mut dev) = objective(&gamma, ridged);
    let mut converged = false;
    let mut iterations = 0;
    let mut w = vec![0.0; m];
    let mut work = vec![0.0; m];

    while iterations < MAX_ITER {
        iterations += 1;
        for i in 0..m {
            let eta = eta_at(z, &gamma, i);
            let mu = inv_logit(eta);
            let v = mu * (1.0 - mu);
            w[i] = trials[i] * v;
            work[i] = eta + (props[i] - mu) / v;
        }
        let mut next = match wls(z, &w, &work, ridged) {
            Some(g) => g,
            None => {
                ridged = true;
                let g = wls(z, &w, &work, true).expect("ridged least squares is full rank");
                (obj, dev) = objective(&gamma, true);
                g
            }
        };
        let (mut obj_next, mut dev_next) = objective(&next, ridged);
        let mut halvings = 0;
        while !(obj_next <= obj) && halvings < MAX_HALVINGS {
            next = (&gamma + &next) * 0.5;
            (obj_next, dev_next) = objective(&next, ridged);
            halvings += 1;
        }
        if !(obj_next <= obj) {
            // No improving step along this direction; treat as stationary.
            converged = (obj - obj_next).abs() < DEVIANCE_TOL;
            break;
        }
        let change = (obj - obj_next).abs();
        gamma = next;
        obj = obj_next;
        dev = dev_next;
        if change < DEVIANCE_TOL {
            converged = true;
            break;
        }
    }

    IrlsRun {
        gamma,
        deviance: dev,
        converged,
        ridged,
        iterations,
    }
}

fn eta_at(z: &DMatrix<f64>, g: &DVector<f64>, i: usize) -> f64 {
    let mut eta = 0.0;
    for j in 0..z.ncols() {
        eta += z[(i, j)] * g[j];
    }
    eta.clamp(-ETA_CLAMP, ETA_CLAMP)
}

fn fitted_probs(z: &DMatrix<f64>, g: &DVector<f64>) -> Vec<f64> {
    (0..z.nrows()).map(|i| inv_logit(eta_at(z, g, i))).collect()
}

/// Solves `min || sqrt(w) (y - Z g) ||^2 (+ RIDGE ||g[1..]||^2)` by QR.
/// Returns `None` when the unpenalised system is numerically rank deficient.
fn wls(z: &DMatrix<f64>, w: &[f64], y: &[f64], ridged: bool) -> Option<DVector<f64>> {
    let (m, p) = z.shape();
    let extra = if ridged { p - 1 } else { 0 };
    let rows = m + extra;
    if rows < p {
        return None;
    }
    let mut a = DMatrix::zeros(rows, p);
    let mut b = DVector::zeros(rows);
    for i in 0..m {
        let sw = w[i].max(0.0).sqrt();
        for j in 0..p {
            a[(i, j)] = sw * z[(i, j)];
        }
        b[i] = sw * y[i];
    }
    let sr = RIDGE.sqrt();
    for j in 1..p.min(extra + 1) {
        a[(m + j - 1, j)] = sr;
    }
    let qr = a.qr();
    let r = qr.r();
    let diag_max = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if !ridged && (0..p).any(|j| r[(j, j)].abs() <= RANK_TOL * diag_max) {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
        .filter(|g| g.iter().all(|v| v.is_finite()))
}

fn is_rank_deficient(z: &DMatrix<f64>) -> bool {
    let (m, p) = z.shape();
    if m < p {
        return true;
    }
    let r = z.clone().qr().r();
    let diag_max = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    (0..p).any(|j| r[(j, j)].abs() <= RANK_TOL * diag_max)
}

fn standardize(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<ColumnTransform>) {
    let (m, p) = x.shape();
    let mut z = x.clone();
    let mut t = Vec::with_capacity(p);
    t.push(ColumnTransform { center: 0.0, scale: 1.0 });
    for j in 1..p {
        let col = x.column(j);
        let center = col.mean();
        let var = col.iter().map(|v| (v - center).powi(2)).sum::<f64>() / m as f64;
        let sd = var.sqrt();
        let scale = if sd > 1e-12 * center.abs().max(1.0) { sd } else { 1.0 };
        for i in 0..m {
            z[(i, j)] = (x[(i, j)] - center) / scale;
        }
        t.push(ColumnTransform { center, scale });
    }
    (z, t)
}

fn unstandardize(gamma: &DVector<f64>, t: &[ColumnTransform]) -> Vec<f64> {
    let mut beta: Vec<f64> = gamma.iter().zip(t).map(|(g, ct)| g / ct.scale).collect();
    let shift: f64 = beta.iter().zip(t).skip(1).map(|(b, ct)| b * ct.center).sum();
    beta[0] -= shift;
    beta
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
