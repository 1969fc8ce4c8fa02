use crate::real::{gemm, Real};

/// `y = x W + b` for `rows` rows of width `n_in`; `w` is `[n_in, n_out]`.
pub fn dense_forward<T: Real>(
    x: &[T],
    w: &[T],
    b: Option<&[T]>,
    rows: usize,
    n_in: usize,
    n_out: usize,
) -> Vec<T> {
    let mut y = vec![T::zero(); rows * n_out];
    if let Some(b) = b {
        for row in y.chunks_exact_mut(n_out) {
            row.copy_from_slice(b);
        }
    }
    gemm(rows, n_in, n_out, x, false, w, false, &mut y, b.is_some());
    y
}

pub struct DenseGrads<T> {
    pub dx: Vec<T>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

pub fn dense_backward<T: Real>(
    x: &[T],
    w: &[T],
    dy: &[T],
    rows: usize,
    n_in: usize,
    n_out: usize,
) -> DenseGrads<T> {
    let mut dx = vec![T::zero(); rows * n_in];
    gemm(rows, n_out, n_in, dy, false, w, true, &mut dx, false);
    let mut dw = vec![T::zero(); n_in * n_out];
    gemm(n_in, rows, n_out, x, true, dy, false, &mut dw, false);
    let mut db = vec![T::zero(); n_out];
    for row in dy.chunks_exact(n_out) {
        for (acc, &g) in db.iter_mut().zip(row) {
            *acc = *acc + g;
        }
    }
    DenseGrads { dx, dw, db }
}
