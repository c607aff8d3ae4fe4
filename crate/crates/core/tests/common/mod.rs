#![allow(dead_code)]

use std::fs;
use std::path::Path;

/// Binomial log-likelihood of a logistic model with linear predictor
/// `b0 + b1 * x`, up to a constant.
pub fn log_likelihood(b0: f64, b1: f64, arms: &[(f64, f64, f64)]) -> f64 {
    arms.iter()
        .map(|&(x, n, y)| {
            let eta = b0 + b1 * x;
            // log(1 + e^eta) computed without overflow
            let softplus = eta.max(0.0) + (-eta.abs()).exp().ln_1p();
            y * eta - n * softplus
        })
        .sum()
}

/// Maximises the log-likelihood by repeated grid refinement: a 201 x 201
/// grid around the current best point, shrinking the half-width by 10x
/// each round until the spacing is below `resolution`.
pub fn grid_mle(arms: &[(f64, f64, f64)], start: (f64, f64), half_width: (f64, f64), resolution: f64) -> (f64, f64) {
    let (mut c0, mut c1) = start;
    let (mut w0, mut w1) = half_width;
    loop {
        let (s0, s1) = (w0 / 100.0, w1 / 100.0);
        let mut best = (f64::NEG_INFINITY, c0, c1);
        for i in -100..=100 {
            for j in -100..=100 {
                let b0 = c0 + f64::from(i) * s0;
                let b1 = c1 + f64::from(j) * s1;
                let ll = log_likelihood(b0, b1, arms);
                if ll > best.0 {
                    best = (ll, b0, b1);
                }
            }
        }
        c0 = best.1;
        c1 = best.2;
        if s0.max(s1) < resolution {
            return (c0, c1);
        }
        w0 /= 10.0;
        w1 /= 10.0;
    }
}

/// Every file under `dir`, as (relative path, bytes), sorted by path.
pub fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
