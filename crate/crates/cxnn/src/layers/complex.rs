//! Complex-valued layers over interleaved `(re, im)` buffers.

use crate::real::{gemm, Real};

/// Real `[2W, 2K]` matrix equivalent to `K` complex filters of width `W`.
///
/// `w` holds the complex taps as `[K, W, 2]`. A row vector of `W`
/// interleaved complex inputs times this matrix gives the `K` interleaved
/// outputs `sum_j x_j w_kj`, i.e. the complex product expanded into the
/// doubled real convolution `(ac - bd) + (ad + bc)i`.
pub fn conv1d_real_embedding<T: Real>(w: &[T], width: usize, filters: usize) -> Vec<T> {
    let cols = 2 * filters;
    let mut m = vec![T::zero(); 2 * width * cols];
    for k in 0..filters {
        for j in 0..width {
            let a = w[(k * width + j) * 2];
            let b = w[(k * width + j) * 2 + 1];
            m[2 * j * cols + 2 * k] = a;
            m[2 * j * cols + 2 * k + 1] = b;
            m[(2 * j + 1) * cols + 2 * k] = -b;
            m[(2 * j + 1) * cols + 2 * k + 1] = a;
        }
    }
    m
}

/// Folds a gradient w.r.t. the real embedding back onto the complex taps.
fn fold_embedding_grad<T: Real>(dm: &[T], width: usize, filters: usize) -> Vec<T> {
    let cols = 2 * filters;
    let mut dw = vec![T::zero(); filters * width * 2];
    for k in 0..filters {
        for j in 0..width {
            let rr = dm[2 * j * cols + 2 * k];
            let ri = dm[2 * j * cols + 2 * k + 1];
            let ir = dm[(2 * j + 1) * cols + 2 * k];
            let ii = dm[(2 * j + 1) * cols + 2 * k + 1];
            dw[(k * width + j) * 2] = rr + ii;
            dw[(k * width + j) * 2 + 1] = ri - ir;
        }
    }
    dw
}

/// Stride-`width` complex convolution: every window of `width` complex
/// samples maps to `filters` complex outputs. `x` holds `windows * width`
/// complex values. Returns the output and the embedding (reused backward).
pub fn complex_conv1d_forward<T: Real>(
    x: &[T],
    w: &[T],
    windows: usize,
    width: usize,
    filters: usize,
) -> (Vec<T>, Vec<T>) {
    let m = conv1d_real_embedding(w, width, filters);
    let mut y = vec![T::zero(); windows * 2 * filters];
    gemm(
        windows,
        2 * width,
        2 * filters,
        x,
        false,
        &m,
        false,
        &mut y,
        false,
    );
    (y, m)
}

pub fn complex_conv1d_backward<T: Real>(
    x: &[T],
    embedding: &[T],
    dy: &[T],
    windows: usize,
    width: usize,
    filters: usize,
) -> (Vec<T>, Vec<T>) {
    let (k2, w2) = (2 * filters, 2 * width);
    let mut dx = vec![T::zero(); windows * w2];
    gemm(windows, k2, w2, dy, false, embedding, true, &mut dx, false);
    let mut dm = vec![T::zero(); w2 * k2];
    gemm(w2, windows, k2, x, true, dy, false, &mut dm, false);
    (dx, fold_embedding_grad(&dm, width, filters))
}

#[inline]
fn cmul<T: Real>(a: T, b: T, c: T, d: T) -> (T, T) {
    (a * c - b * d, a * d + b * c)
}

/// Circular 2-D complex convolution of `grids` complex `[rows, cols]` grids
/// with one `[kr, kc]` complex filter:
/// `y[f, n] = sum_{i,j} w[i, j] x[(f + i) % rows, (n + j) % cols]`.
pub fn complex_conv2d_forward<T: Real>(
    x: &[T],
    w: &[T],
    grids: usize,
    rows: usize,
    cols: usize,
    kr: usize,
    kc: usize,
) -> Vec<T> {
    let size = rows * cols * 2;
    let mut y = vec![T::zero(); grids * size];
    for (src, dst) in x.chunks_exact(size).zip(y.chunks_exact_mut(size)).take(grids) {
        for f in 0..rows {
            for n in 0..cols {
                let (mut re, mut im) = (T::zero(), T::zero());
                for i in 0..kr {
                    let r = (f + i) % rows;
                    for j in 0..kc {
                        let c = (n + j) % cols;
                        let wi = (i * kc + j) * 2;
                        let xi = (r * cols + c) * 2;
                        let (pr, pi) = cmul(w[wi], w[wi + 1], src[xi], src[xi + 1]);
                        re = re + pr;
                        im = im + pi;
                    }
                }
                dst[(f * cols + n) * 2] = re;
                dst[(f * cols + n) * 2 + 1] = im;
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub fn complex_conv2d_backward<T: Real>(
    x: &[T],
    w: &[T],
    dy: &[T],
    grids: usize,
    rows: usize,
    cols: usize,
    kr: usize,
    kc: usize,
) -> (Vec<T>, Vec<T>) {
    let size = rows * cols * 2;
    let mut dx = vec![T::zero(); grids * size];
    let mut dw = vec![T::zero(); kr * kc * 2];
    for ((src, g), d) in x
        .chunks_exact(size)
        .zip(dy.chunks_exact(size))
        .zip(dx.chunks_exact_mut(size))
        .take(grids)
    {
        for f in 0..rows {
            for n in 0..cols {
                let gi = (f * cols + n) * 2;
                let (gr, gim) = (g[gi], g[gi + 1]);
                for i in 0..kr {
                    let r = (f + i) % rows;
                    for j in 0..kc {
                        let c = (n + j) % cols;
                        let wi = (i * kc + j) * 2;
                        let xi = (r * cols + c) * 2;
                        // Gradients of a complex product pick up conjugates.
                        let (a, b) = cmul(w[wi], -w[wi + 1], gr, gim);
                        d[xi] = d[xi] + a;
                        d[xi + 1] = d[xi + 1] + b;
                        let (a, b) = cmul(src[xi], -src[xi + 1], gr, gim);
                        dw[wi] = dw[wi] + a;
                        dw[wi + 1] = dw[wi + 1] + b;
                    }
                }
            }
        }
    }
    (dx, dw)
}

/// `(a + bi) / (c + di) = ((ac + bd) + (bc - ad)i) / (c^2 + d^2 + eps)`.
pub fn complex_divide_forward<T: Real>(num: &[T], den: &[T], eps: T) -> Vec<T> {
    let mut q = vec![T::zero(); num.len()];
    for ((n, d), out) in num
        .chunks_exact(2)
        .zip(den.chunks_exact(2))
        .zip(q.chunks_exact_mut(2))
    {
        let (a, b, c, dd) = (n[0], n[1], d[0], d[1]);
        let denom = c * c + dd * dd + eps;
        out[0] = (a * c + b * dd) / denom;
        out[1] = (b * c - a * dd) / denom;
    }
    q
}

/// Returns gradients w.r.t. numerator and denominator.
pub fn complex_divide_backward<T: Real>(num: &[T], den: &[T], dq: &[T], eps: T) -> (Vec<T>, Vec<T>) {
    let mut dn = vec![T::zero(); num.len()];
    let mut dd = vec![T::zero(); den.len()];
    let two = T::of(2.0);
    for i in (0..num.len()).step_by(2) {
        let (a, b, c, d) = (num[i], num[i + 1], den[i], den[i + 1]);
        let (gr, gi) = (dq[i], dq[i + 1]);
        let denom = c * c + d * d + eps;
        let qr = (a * c + b * d) / denom;
        let qi = (b * c - a * d) / denom;
        dn[i] = (gr * c - gi * d) / denom;
        dn[i + 1] = (gr * d + gi * c) / denom;
        dd[i] = (gr * (a - two * c * qr) + gi * (b - two * c * qi)) / denom;
        dd[i + 1] = (gr * (b - two * d * qr) - gi * (a + two * d * qi)) / denom;
    }
    (dn, dd)
}
