//! Logistic (Platt-style) calibration of decision values.

use crate::error::{Error, Result};

use super::linear::{sigmoid, LinearModel};

const MAX_ITERATIONS: usize = 100;

/// Mean log-loss of `σ(a·s + b)` against labels `y ∈ {−1, +1}`.
pub fn log_loss(a: f64, b: f64, scores: &[f64], labels: &[f64]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            // −log σ(y·z) computed without overflow
            let z = y * (a * s + b);
            if z > 0.0 {
                (-z).exp().ln_1p()
            } else {
                -z + z.exp().ln_1p()
            }
        })
        .sum();
    total / scores.len().max(1) as f64
}

/// Fits `(calib_a, calib_b)` for `model` on held-out `(vector, ±1)` pairs.
pub fn fit_calibration<X: AsRef<[f64]>>(model: &LinearModel, held_out: &[(X, f64)]) -> Result<(f64, f64)> {
    let scores: Vec<f64> = held_out.iter().map(|(x, _)| model.decision(x.as_ref())).collect();
    let labels: Vec<f64> = held_out.iter().map(|(_, y)| *y).collect();
    fit_logistic(&scores, &labels)
}

/// Maximum-likelihood logistic fit over decision values by damped Newton
/// iterations with backtracking. Rejects fits with a negative slope.
pub fn fit_logistic(scores: &[f64], labels: &[f64]) -> Result<(f64, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Calibration("scores and labels differ in length".into()));
    }
    if let Some(y) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::Calibration(format!("labels must be ±1, found {y}")));
    }
    let positives = labels.iter().filter(|&&y| y > 0.0).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Calibration("held-out set must contain both classes".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Calibration("non-finite decision value".into()));
    }

    let n = scores.len() as f64;
    let (mut a, mut b) = (0.0, ((positives as f64) / (n - positives as f64)).ln());
    let mut loss = log_loss(a, b, scores, labels);
    for _ in 0..MAX_ITERATIONS {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&s, &y) in scores.iter().zip(labels) {
            let p = sigmoid(a * s + b);
            let t = if y > 0.0 { 1.0 } else { 0.0 };
            let r = p - t;
            let w = p * (1.0 - p);
            ga += r * s;
            gb += r;
            haa += w * s * s;
            hab += w * s;
            hbb += w;
        }
        let (ga, gb) = (ga / n, gb / n);
        if ga.abs().max(gb.abs()) < 1e-12 {
            break;
        }
        let damping = 1e-9 + 1e-6 * (haa + hbb) / n;
        let (haa, hab, hbb) = (haa / n + damping, hab / n, hbb / n + damping);
        let det = haa * hbb - hab * hab;
        let (da, db) = if det > 0.0 && det.is_finite() {
            ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
        } else {
            (ga, gb)
        };
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-10 {
            let (na, nb) = (a - step * da, b - step * db);
            let nl = log_loss(na, nb, scores, labels);
            if nl < loss {
                a = na;
                b = nb;
                improved = loss - nl > 1e-15;
                loss = nl;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if a < 0.0 {
        return Err(Error::Calibration(format!(
            "fitted slope {a:.4} is negative; decision values rank the classes backwards"
        )));
    }
    Ok((a, b))
}
