//! Soft-bit training loss: cross entropy plus a logarithmic error-rate term
//! plus L2 weight decay.

use crate::error::{NnError, Result};
use crate::graph::Graph;
use crate::real::Real;
use crate::tensor::Tensor;
use std::f64::consts::LN_10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// L2 coefficient on weight blocks.
    pub lambda: f64,
    /// Floor inside `log10(soft_ber)`.
    pub ber_floor: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-5,
            ber_floor: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    /// Mean negative log-likelihood of the true class, in nats.
    pub ce: f64,
    /// Mean probability mass on the wrong class.
    pub soft_ber: f64,
    /// Fraction of bits whose argmax is wrong.
    pub hard_ber: f64,
    pub l_reg: f64,
    pub total: f64,
}

/// Tolerance on `p0 + p1 = 1` before a pair is rejected as unnormalized.
const NORM_TOL: f64 = 1e-3;

/// Data part of the loss for per-bit pairs `[.., 2]` (class 0 = bit 0).
///
/// Returns the report (with `l_reg = 0`) and the gradient of the data loss
/// w.r.t. the *logits* feeding the softmax that produced `probs`. Working
/// on logits keeps the gradient finite when a probability underflows.
pub fn soft_bit_loss<T: Real>(
    probs: &Tensor<T>,
    labels: &[u8],
    cfg: &LossConfig,
) -> Result<(LossReport, Tensor<T>)> {
    if probs.last_dim() != 2 || probs.len() != 2 * labels.len() {
        return Err(NnError::Shape {
            context: "soft bits vs labels".into(),
            expected: vec![labels.len(), 2],
            got: probs.shape().to_vec(),
        });
    }
    let bits = labels.len();
    let count = bits as f64;
    let (mut ce, mut soft, mut hard) = (0.0, 0.0, 0usize);
    for (pair, &label) in probs.data().chunks_exact(2).zip(labels) {
        let (p0, p1) = (pair[0].as_f64(), pair[1].as_f64());
        if !(p0.is_finite() && p1.is_finite()) {
            return Err(NnError::NonFinite("soft bits".into()));
        }
        if (p0 + p1 - 1.0).abs() > NORM_TOL || p0 < 0.0 || p1 < 0.0 {
            return Err(NnError::Invalid(format!(
                "soft-bit pair ({p0}, {p1}) is not normalized"
            )));
        }
        let (pt, pw) = if label == 0 { (p0, p1) } else { (p1, p0) };
        ce -= pt.max(1e-30).ln();
        soft += pw;
        let decided = u8::from(p1 > p0);
        if decided != label {
            hard += 1;
        }
    }
    ce /= count;
    let soft_ber = soft / count;
    let log_term = soft_ber.max(cfg.ber_floor).log10();
    let report = LossReport {
        ce,
        soft_ber,
        hard_ber: hard as f64 / count,
        l_reg: 0.0,
        total: ce + log_term,
    };

    // d/dz of CE is (p - onehot); d log10(sb)/d p_wrong = 1/(sb ln10 count)
    // and for a pair softmax d p_w/d z_w = -d p_w/d z_t = p_w p_t.
    let k = if soft_ber > cfg.ber_floor {
        1.0 / (soft_ber * LN_10 * count)
    } else {
        0.0
    };
    let mut grad = vec![T::zero(); probs.len()];
    for ((pair, &label), g) in probs
        .data()
        .chunks_exact(2)
        .zip(labels)
        .zip(grad.chunks_exact_mut(2))
    {
        let (t, w) = if label == 0 { (0, 1) } else { (1, 0) };
        let (pt, pw) = (pair[t].as_f64(), pair[w].as_f64());
        let cross = k * pw * pt;
        g[t] = T::of((pt - 1.0) / count - cross);
        g[w] = T::of(pw / count + cross);
    }
    Ok((report, Tensor::from_vec(probs.shape(), grad)?))
}

/// `lambda * sum(w^2)` over decayed trainable blocks; adds its gradient
/// into the parameter gradients.
pub fn apply_weight_decay<T: Real>(graph: &mut Graph<T>, lambda: f64) -> f64 {
    let mut total = 0.0;
    let two_l = T::of(2.0 * lambda);
    for p in graph.params_mut().iter_mut().filter(|p| p.decay && p.trainable) {
        total += p.values.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>();
        for (g, &v) in p.grad.iter_mut().zip(&p.values) {
            *g = *g + two_l * v;
        }
    }
    lambda * total
}

/// L2 penalty value without touching gradients.
pub fn weight_penalty<T: Real>(graph: &Graph<T>, lambda: f64) -> f64 {
    lambda
        * graph
            .params()
            .iter()
            .filter(|p| p.decay && p.trainable)
            .flat_map(|p| p.values.iter())
            .map(|v| v.as_f64() * v.as_f64())
            .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::activation::softmax_forward;

    fn probs(logits: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(&[logits.len() / 2, 2], softmax_forward(logits, 2)).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let p = Tensor::<f64>::from_f64(&[3, 2], &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let (r, _) = soft_bit_loss(&p, &[0, 1, 0], &LossConfig::default()).unwrap();
        assert_eq!(r.ce, 0.0);
        assert_eq!(r.hard_ber, 0.0);
        assert_eq!(r.soft_ber, 0.0);
        assert!((r.total - (-7.0)).abs() < 1e-12);
    }

    #[test]
    fn uniform_predictions() {
        let p = Tensor::<f64>::from_f64(&[4, 2], &[0.5; 8]).unwrap();
        let (r, _) = soft_bit_loss(&p, &[0, 1, 1, 0], &LossConfig::default()).unwrap();
        assert!((r.ce - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((r.soft_ber - 0.5).abs() < 1e-12);
        assert_eq!(r.hard_ber, 0.5);
    }

    #[test]
    fn unnormalized_rejected() {
        let p = Tensor::<f64>::from_f64(&[1, 2], &[0.7, 0.7]).unwrap();
        assert!(soft_bit_loss(&p, &[0], &LossConfig::default()).is_err());
        let p = Tensor::<f64>::from_f64(&[2, 2], &[0.5; 4]).unwrap();
        assert!(soft_bit_loss(&p, &[0], &LossConfig::default()).is_err());
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let logits = [0.3, -1.2, 2.0, 0.1, -0.4, -0.5, 1.5, 1.0];
        let labels = [0u8, 1, 1, 0];
        let cfg = LossConfig::default();
        let total = |z: &[f64]| soft_bit_loss(&probs(z), &labels, &cfg).unwrap().0.total;
        let (_, g) = soft_bit_loss(&probs(&logits), &labels, &cfg).unwrap();
        let h = 1e-6;
        for i in 0..logits.len() {
            let (mut a, mut b) = (logits, logits);
            a[i] += h;
            b[i] -= h;
            let num = (total(&a) - total(&b)) / (2.0 * h);
            let ana = g.data()[i];
            let rel = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-5);
            assert!(rel < 1e-4, "logit {i}: analytic {ana} numeric {num}");
        }
    }
}
