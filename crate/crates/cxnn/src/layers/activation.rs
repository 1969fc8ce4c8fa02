use crate::real::Real;

pub fn lrelu_forward<T: Real>(x: &[T], alpha: T) -> Vec<T> {
    x.iter()
        .map(|&v| if v > T::zero() { v } else { alpha * v })
        .collect()
}

pub fn lrelu_backward<T: Real>(x: &[T], dy: &[T], alpha: T) -> Vec<T> {
    x.iter()
        .zip(dy)
        .map(|(&v, &g)| if v > T::zero() { g } else { alpha * g })
        .collect()
}

pub fn tanh_forward<T: Real>(x: &[T]) -> Vec<T> {
    x.iter().map(|v| v.tanh()).collect()
}

/// Uses the cached output `y = tanh(x)`.
pub fn tanh_backward<T: Real>(y: &[T], dy: &[T]) -> Vec<T> {
    y.iter().zip(dy).map(|(&t, &g)| g * (T::one() - t * t)).collect()
}

/// Softmax over consecutive groups of `width` values.
pub fn softmax_forward<T: Real>(x: &[T], width: usize) -> Vec<T> {
    let mut y = vec![T::zero(); x.len()];
    for (src, dst) in x.chunks_exact(width).zip(y.chunks_exact_mut(width)) {
        let max = src.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = (s - max).exp();
            sum = sum + *d;
        }
        for d in dst.iter_mut() {
            *d = *d / sum;
        }
    }
    y
}

/// Uses the cached output probabilities.
pub fn softmax_backward<T: Real>(p: &[T], dy: &[T], width: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); p.len()];
    for ((p, g), d) in p
        .chunks_exact(width)
        .zip(dy.chunks_exact(width))
        .zip(dx.chunks_exact_mut(width))
    {
        let dot: T = p.iter().zip(g).map(|(&a, &b)| a * b).sum();
        for i in 0..width {
            d[i] = p[i] * (g[i] - dot);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lrelu_values() {
        assert_eq!(lrelu_forward(&[-1.0, 1.0, 0.0], 0.2), vec![-0.2, 1.0, 0.0]);
        assert_eq!(lrelu_backward(&[-3.0, 2.0], &[1.0, 1.0], 0.2), vec![0.2, 1.0]);
    }

    #[test]
    fn softmax_symmetric_pair() {
        assert_eq!(softmax_forward(&[0.0f64, 0.0], 2), vec![0.5, 0.5]);
        let p = softmax_forward(&[1000.0f32, -1000.0, 3.0, 3.5], 2);
        assert_eq!(p[0], 1.0);
        assert!((p[2] + p[3] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn tanh_derivative_at_zero() {
        let y = tanh_forward(&[0.0f64]);
        assert_eq!(tanh_backward(&y, &[2.0]), vec![2.0]);
    }
}
