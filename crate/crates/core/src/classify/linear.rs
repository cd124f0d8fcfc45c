//! Binary linear models trained on an L2-regularized squared-hinge loss.
//!
//! ```text
//! J(w, b) = ½‖w‖² + C · Σᵢ max(0, 1 − yᵢ(w·xᵢ + b))²
//! ```
//!
//! The bias is not regularized. Training is plain stochastic gradient
//! descent over seed-shuffled epochs; the returned parameters are the best
//! full-batch objective seen at any epoch boundary (either the current
//! iterate or the mean iterate of that epoch).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub label: String,
    pub weights: Vec<f32>,
    pub bias: f64,
    /// Logistic calibration `p = σ(calib_a·s + calib_b)`; `calib_a ≥ 0`.
    pub calib_a: f64,
    pub calib_b: f64,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `w·x + b`, accumulated in f64.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(&w, &v)| f64::from(w) * v).sum::<f64>() + self.bias
    }

    /// Calibrated probability for a decision value.
    pub fn confidence(&self, decision: f64) -> f64 {
        sigmoid(self.calib_a * decision + self.calib_b)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdParams {
    pub reg_c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SgdParams {
    fn default() -> Self {
        SgdParams {
            reg_c: 1.0,
            epochs: 50,
            seed: 7,
        }
    }
}

/// A borrowed training example with label `y ∈ {−1, +1}`.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub x: &'a [f64],
    pub y: f64,
}

/// Full-batch squared-hinge objective.
pub fn objective(w: &[f64], b: f64, data: &[Example<'_>], reg_c: f64) -> f64 {
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let loss: f64 = data
        .iter()
        .map(|e| {
            let slack = 1.0 - e.y * (dot(w, e.x) + b);
            if slack > 0.0 {
                slack * slack
            } else {
                0.0
            }
        })
        .sum();
    reg + reg_c * loss
}

/// Analytic gradient of [`objective`] with respect to `(w, b)`.
pub fn objective_gradient(w: &[f64], b: f64, data: &[Example<'_>], reg_c: f64) -> (Vec<f64>, f64) {
    let mut gw = w.to_vec();
    let mut gb = 0.0;
    for e in data {
        let slack = 1.0 - e.y * (dot(w, e.x) + b);
        if slack > 0.0 {
            let coef = -2.0 * reg_c * slack * e.y;
            for (g, &x) in gw.iter_mut().zip(e.x) {
                *g += coef * x;
            }
            gb += coef;
        }
    }
    (gw, gb)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains one uncalibrated binary model (`calib_a = 1`, `calib_b = 0`).
pub fn train_binary<P, N>(label: &str, positives: &[P], negatives: &[N], params: &SgdParams) -> Result<LinearModel>
where
    P: AsRef<[f64]>,
    N: AsRef<[f64]>,
{
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Training(format!(
            "{label}: need both classes, got {} positives and {} negatives",
            positives.len(),
            negatives.len()
        )));
    }
    if !(params.reg_c > 0.0 && params.reg_c.is_finite()) {
        return Err(Error::Training(format!("{label}: reg_c must be positive, got {}", params.reg_c)));
    }
    let dim = positives[0].as_ref().len();
    let mut data = Vec::with_capacity(positives.len() + negatives.len());
    data.extend(positives.iter().map(|p| Example { x: p.as_ref(), y: 1.0 }));
    data.extend(negatives.iter().map(|n| Example { x: n.as_ref(), y: -1.0 }));
    if let Some(bad) = data.iter().find(|e| e.x.len() != dim) {
        return Err(Error::Schema(format!(
            "{label}: training vector has dimension {}, expected {dim}",
            bad.x.len()
        )));
    }
    let (w, b) = sgd(&data, dim, params);
    Ok(LinearModel {
        label: label.to_owned(),
        weights: w.iter().map(|&v| v as f32).collect(),
        bias: b,
        calib_a: 1.0,
        calib_b: 0.0,
    })
}

fn sgd(data: &[Example<'_>], dim: usize, params: &SgdParams) -> (Vec<f64>, f64) {
    let n = data.len() as f64;
    let lambda = 1.0 / (params.reg_c * n);
    // Step sizes follow 1/(λ(t + t0)). The offset keeps every single step
    // from overshooting an example's margin: η·2(‖x‖² + 1) ≤ 1.
    let radius_sq = data.iter().map(|e| dot(e.x, e.x)).fold(0.0, f64::max) + 1.0;
    let t0 = 2.0 * radius_sq / lambda;

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut best_w = w.clone();
    let mut best_b = b;
    let mut best_obj = objective(&w, b, data, params.reg_c);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut avg_w = vec![0.0; dim];
    let mut t = 0.0f64;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        avg_w.iter_mut().for_each(|v| *v = 0.0);
        let mut avg_b = 0.0;
        for (k, &i) in order.iter().enumerate() {
            t += 1.0;
            let eta = 1.0 / (lambda * (t + t0));
            let e = &data[i];
            let margin = e.y * (dot(&w, e.x) + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                let step = eta * 2.0 * (1.0 - margin) * e.y;
                for (v, &x) in w.iter_mut().zip(e.x) {
                    *v += step * x;
                }
                b += step;
            }
            let k = (k + 1) as f64;
            for (a, &v) in avg_w.iter_mut().zip(&w) {
                *a += (v - *a) / k;
            }
            avg_b += (b - avg_b) / k;
        }
        for (cw, cb) in [(&w, b), (&avg_w, avg_b)] {
            let obj = objective(cw, cb, data, params.reg_c);
            if obj < best_obj {
                best_obj = obj;
                best_w.clone_from(cw);
                best_b = cb;
            }
        }
    }
    (best_w, best_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn separable_points_are_fit() {
        let pos = [vec![1.0, 0.0]];
        let neg = [vec![-1.0, 0.0]];
        let m = train_binary("x", &pos, &neg, &SgdParams::default()).unwrap();
        assert!(m.decision(&pos[0]) > 0.0);
        assert!(m.decision(&neg[0]) < 0.0);
    }

    #[test]
    fn tiny_c_forces_small_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pos: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random_range(0.0..2.0), 1.0]).collect();
        let neg: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random_range(-2.0..0.0), -1.0]).collect();
        let params = SgdParams {
            reg_c: 1e-9,
            ..Default::default()
        };
        let m = train_binary("x", &pos, &neg, &params).unwrap();
        let norm = m.weights.iter().map(|&w| (w as f64).powi(2)).sum::<f64>().sqrt();
        assert!(norm <= 1e-3, "{norm}");
    }

    #[test]
    fn single_class_and_dim_errors() {
        let pos = [vec![1.0]];
        let none: [Vec<f64>; 0] = [];
        assert!(matches!(
            train_binary("x", &pos, &none, &SgdParams::default()),
            Err(Error::Training(_))
        ));
        let neg = [vec![1.0, 2.0]];
        assert!(matches!(train_binary("x", &pos, &neg, &SgdParams::default()), Err(Error::Schema(_))));
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pos: Vec<Vec<f64>> = (0..30).map(|_| (0..5).map(|_| rng.random_range(-1.0..2.0)).collect()).collect();
        let neg: Vec<Vec<f64>> = (0..30).map(|_| (0..5).map(|_| rng.random_range(-2.0..1.0)).collect()).collect();
        let p = SgdParams::default();
        let a = train_binary("x", &pos, &neg, &p).unwrap();
        let b = train_binary("x", &pos, &neg, &p).unwrap();
        assert_eq!(a.bias.to_bits(), b.bias.to_bits());
        assert_eq!(
            a.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
            b.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>()
        );
        let data: Vec<Example> = pos
            .iter()
            .map(|x| Example { x, y: 1.0 })
            .chain(neg.iter().map(|x| Example { x, y: -1.0 }))
            .collect();
        let w: Vec<f64> = a.weights.iter().map(|&v| v as f64).collect();
        assert!(objective(&w, a.bias, &data, p.reg_c) <= objective(&[0.0; 5], 0.0, &data, p.reg_c));
    }

    #[test]
    fn confidence_is_logistic() {
        let m = LinearModel {
            label: "x".into(),
            weights: vec![],
            bias: 0.0,
            calib_a: 1.0,
            calib_b: 0.0,
        };
        assert_eq!(m.confidence(0.0), 0.5);
        assert!(m.confidence(-800.0) >= 0.0 && m.confidence(800.0) <= 1.0);
    }
}
