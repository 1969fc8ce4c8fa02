use crate::real::Real;

/// Cached statistics for a normalization backward pass.
#[derive(Debug, Clone, Default)]
pub struct NormCache<T> {
    pub xhat: Vec<T>,
    /// `1 / sqrt(var + eps)` per normalized group.
    pub inv_std: Vec<T>,
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

/// Per-feature statistics over all rows (`x` is `[rows, features]`).
pub fn batch_norm_train<T: Real>(
    x: &[T],
    gamma: &[T],
    beta: &[T],
    features: usize,
    eps: T,
) -> (Vec<T>, NormCache<T>) {
    let rows = x.len() / features;
    let count = T::of(rows as f64);
    let mut mean = vec![T::zero(); features];
    for row in x.chunks_exact(features) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m = *m + v;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / count);
    let mut var = vec![T::zero(); features];
    for row in x.chunks_exact(features) {
        for c in 0..features {
            let d = row[c] - mean[c];
            var[c] = var[c] + d * d;
        }
    }
    var.iter_mut().for_each(|v| *v = *v / count);
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![T::zero(); x.len()];
    let mut y = vec![T::zero(); x.len()];
    for i in 0..x.len() {
        let c = i % features;
        xhat[i] = (x[i] - mean[c]) * inv_std[c];
        y[i] = gamma[c] * xhat[i] + beta[c];
    }
    (
        y,
        NormCache {
            xhat,
            inv_std,
            mean,
            var,
        },
    )
}

/// Inference-mode batch norm with fixed statistics.
pub fn batch_norm_eval<T: Real>(
    x: &[T],
    gamma: &[T],
    beta: &[T],
    mean: &[T],
    var: &[T],
    eps: T,
) -> (Vec<T>, NormCache<T>) {
    let features = gamma.len();
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![T::zero(); x.len()];
    let mut y = vec![T::zero(); x.len()];
    for i in 0..x.len() {
        let c = i % features;
        xhat[i] = (x[i] - mean[c]) * inv_std[c];
        y[i] = gamma[c] * xhat[i] + beta[c];
    }
    (
        y,
        NormCache {
            xhat,
            inv_std,
            mean: mean.to_vec(),
            var: var.to_vec(),
        },
    )
}

pub struct NormGrads<T> {
    pub dx: Vec<T>,
    pub dgamma: Vec<T>,
    pub dbeta: Vec<T>,
}

/// Backward of [`batch_norm_train`] (`batch_stats`) or [`batch_norm_eval`].
pub fn batch_norm_backward<T: Real>(
    cache: &NormCache<T>,
    gamma: &[T],
    dy: &[T],
    batch_stats: bool,
) -> NormGrads<T> {
    let features = gamma.len();
    let rows = dy.len() / features;
    let mut dgamma = vec![T::zero(); features];
    let mut dbeta = vec![T::zero(); features];
    let mut sum_dxhat = vec![T::zero(); features];
    let mut sum_dxhat_xhat = vec![T::zero(); features];
    for i in 0..dy.len() {
        let c = i % features;
        dgamma[c] = dgamma[c] + dy[i] * cache.xhat[i];
        dbeta[c] = dbeta[c] + dy[i];
        let dxh = dy[i] * gamma[c];
        sum_dxhat[c] = sum_dxhat[c] + dxh;
        sum_dxhat_xhat[c] = sum_dxhat_xhat[c] + dxh * cache.xhat[i];
    }
    let count = T::of(rows as f64);
    let dx = (0..dy.len())
        .map(|i| {
            let c = i % features;
            let dxh = dy[i] * gamma[c];
            if batch_stats {
                cache.inv_std[c] / count * (count * dxh - sum_dxhat[c] - cache.xhat[i] * sum_dxhat_xhat[c])
            } else {
                dxh * cache.inv_std[c]
            }
        })
        .collect();
    NormGrads { dx, dgamma, dbeta }
}

/// Normalizes each sample of `size` values to zero mean and unit variance,
/// then applies elementwise `gamma`/`beta` of length `size`.
pub fn layer_norm_forward<T: Real>(
    x: &[T],
    gamma: &[T],
    beta: &[T],
    size: usize,
    eps: T,
) -> (Vec<T>, NormCache<T>) {
    let count = T::of(size as f64);
    let mut cache = NormCache {
        xhat: vec![T::zero(); x.len()],
        ..Default::default()
    };
    let mut y = vec![T::zero(); x.len()];
    for (s, (src, dst)) in x.chunks_exact(size).zip(y.chunks_exact_mut(size)).enumerate() {
        let mean = src.iter().copied().sum::<T>() / count;
        let var = src.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / count;
        let inv = T::one() / (var + eps).sqrt();
        let xhat = &mut cache.xhat[s * size..(s + 1) * size];
        for i in 0..size {
            xhat[i] = (src[i] - mean) * inv;
            dst[i] = gamma[i] * xhat[i] + beta[i];
        }
        cache.mean.push(mean);
        cache.var.push(var);
        cache.inv_std.push(inv);
    }
    (y, cache)
}

pub fn layer_norm_backward<T: Real>(
    cache: &NormCache<T>,
    gamma: &[T],
    dy: &[T],
    size: usize,
) -> NormGrads<T> {
    let count = T::of(size as f64);
    let mut dgamma = vec![T::zero(); size];
    let mut dbeta = vec![T::zero(); size];
    let mut dx = vec![T::zero(); dy.len()];
    for (s, (g, d)) in dy.chunks_exact(size).zip(dx.chunks_exact_mut(size)).enumerate() {
        let xhat = &cache.xhat[s * size..(s + 1) * size];
        let mut sum = T::zero();
        let mut sum_x = T::zero();
        for i in 0..size {
            dgamma[i] = dgamma[i] + g[i] * xhat[i];
            dbeta[i] = dbeta[i] + g[i];
            let dxh = g[i] * gamma[i];
            sum = sum + dxh;
            sum_x = sum_x + dxh * xhat[i];
        }
        let inv = cache.inv_std[s];
        for i in 0..size {
            let dxh = g[i] * gamma[i];
            d[i] = inv / count * (count * dxh - sum - xhat[i] * sum_x);
        }
    }
    NormGrads { dx, dgamma, dbeta }
}
