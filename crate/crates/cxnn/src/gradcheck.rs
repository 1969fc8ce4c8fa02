//! Central finite-difference checks of every layer's backward pass.

use crate::error::Result;
use crate::graph::{Graph, Mode};
use crate::layers::activation::softmax_forward;
use crate::loss::{soft_bit_loss, LossConfig};
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Maximum accepted relative error.
pub const GRAD_TOL: f64 = 1e-4;
/// Finite-difference step.
pub const STEP: f64 = 1e-6;
/// Denominator floor of the relative error, so that gradients that are zero
/// up to rounding are compared absolutely.
const REL_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub layer: String,
    pub input_shape: Vec<usize>,
    pub max_rel_error: f64,
    pub coordinates: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRAD_TOL
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Picks at most `max` indices out of `0..n`, deterministically.
fn sample_indices(n: usize, max: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    (0..max).map(|_| rng.random_range(0..n)).collect()
}

/// Checks d/dx and d/dparams of `L = sum(r * y)` for a fixed random `r`,
/// probing at most `max_coords` coordinates per tensor.
pub fn check_graph(
    graph: &mut Graph<f64>,
    x: &Tensor<f64>,
    mode: Mode,
    seed: u64,
    max_coords: usize,
) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out_len = graph.forward(x, mode)?.output().len();
    let r: Vec<f64> = (0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |g: &Graph<f64>, x: &Tensor<f64>| -> Result<f64> {
        let tape = g.forward(x, mode)?;
        Ok(tape.output().data().iter().zip(&r).map(|(y, w)| y * w).sum())
    };

    graph.zero_grad();
    let tape = graph.forward(x, mode)?;
    let seed_grad = Tensor::from_vec(tape.output().shape(), r.clone())?;
    let out = graph.output();
    let dx = graph.backward(&tape, &[(out, &seed_grad)])?;

    let mut worst: f64 = 0.0;
    let mut count = 0;
    for i in sample_indices(x.len(), max_coords, &mut rng) {
        let (mut a, mut b) = (x.clone(), x.clone());
        a.data_mut()[i] += STEP;
        b.data_mut()[i] -= STEP;
        let num = (loss(graph, &a)? - loss(graph, &b)?) / (2.0 * STEP);
        worst = worst.max(relative_error(dx.data()[i], num));
        count += 1;
    }
    for p in 0..graph.params().len() {
        if !graph.params()[p].trainable {
            continue;
        }
        let analytic = graph.params()[p].grad.clone();
        for i in sample_indices(analytic.len(), max_coords, &mut rng) {
            let orig = graph.params()[p].values[i];
            graph.params_mut()[p].values[i] = orig + STEP;
            let la = loss(graph, x)?;
            graph.params_mut()[p].values[i] = orig - STEP;
            let lb = loss(graph, x)?;
            graph.params_mut()[p].values[i] = orig;
            worst = worst.max(relative_error(analytic[i], (la - lb) / (2.0 * STEP)));
            count += 1;
        }
    }
    Ok(GradCheck {
        layer: String::new(),
        input_shape: x.shape().to_vec(),
        max_rel_error: worst,
        coordinates: count,
    })
}

/// Every layer kind the engine provides.
pub const LAYER_KINDS: &[&str] = &[
    "dense",
    "conv1d_real",
    "conv1d_complex",
    "conv2d_complex",
    "batch_norm",
    "layer_norm",
    "lrelu",
    "tanh",
    "softmax",
    "complex_divide",
    "slice",
    "reshape",
    "concat",
    "subtract",
    "loss",
];

fn uniform(shape: &[usize], rng: &mut ChaCha8Rng, scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Random values bounded away from zero (kinks, division singularities).
fn away_from_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m: f64 = rng.random_range(0.3..1.5);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Builds a one-layer graph of `kind` on a random shape.
fn build_case(kind: &str, rng: &mut ChaCha8Rng) -> Result<(Graph<f64>, Tensor<f64>, Mode)> {
    let batch = rng.random_range(2..5);
    let mut d = |lo: usize, hi: usize| rng.random_range(lo..=hi);
    let (mut g, shape, mode): (Graph<f64>, Vec<usize>, Mode);
    match kind {
        "dense" | "conv1d_real" => {
            let (rows, n_in, n_out) = (d(1, 4), d(1, 6), d(1, 6));
            shape = vec![rows, n_in];
            g = Graph::new("x", &shape);
            let x = g.input();
            if kind == "dense" {
                g.dense(kind, x, n_out, true)?;
            } else {
                g.conv1d_real(kind, x, n_out)?;
            }
            mode = Mode::Train;
        }
        "conv1d_complex" => {
            let (pos, width, filters) = (d(1, 3), d(1, 5), d(1, 5));
            shape = vec![d(1, 3), pos * width, 2];
            g = Graph::new("x", &shape);
            let x = g.input();
            g.complex_conv1d(kind, x, width, filters)?;
            mode = Mode::Train;
        }
        "conv2d_complex" => {
            let (rows, cols) = (d(1, 4), d(1, 5));
            let (kr, kc) = (d(1, rows), d(1, cols));
            shape = vec![rows, cols, 1, 2];
            g = Graph::new("x", &shape);
            let x = g.input();
            g.complex_conv2d(kind, x, kr, kc)?;
            mode = Mode::Train;
        }
        "batch_norm" | "layer_norm" => {
            shape = vec![d(1, 4), d(2, 5)];
            g = Graph::new("x", &shape);
            let x = g.input();
            if kind == "batch_norm" {
                g.batch_norm(kind, x, 0.99, 1e-5)?;
            } else {
                g.layer_norm(kind, x, 1e-5)?;
            }
            mode = Mode::Train;
        }
        "lrelu" | "tanh" | "softmax" => {
            shape = vec![d(1, 5), if kind == "softmax" { d(2, 4) } else { d(1, 4) }];
            g = Graph::new("x", &shape);
            let x = g.input();
            match kind {
                "lrelu" => g.lrelu(kind, x, 0.2)?,
                "tanh" => g.tanh(kind, x)?,
                _ => g.softmax(kind, x)?,
            };
            mode = Mode::Train;
        }
        "complex_divide" => {
            let len = d(1, 6);
            shape = vec![len, 4];
            g = Graph::new("x", &shape);
            let x = g.input();
            let num = g.slice("num", x, 1, 0, 2)?;
            let den = g.slice("den", x, 1, 2, 4)?;
            g.complex_divide(kind, num, den, 1e-9)?;
            mode = Mode::Train;
        }
        "slice" | "reshape" | "concat" | "subtract" => {
            let (a, b) = (d(2, 4), d(2, 4));
            shape = vec![a, b];
            g = Graph::new("x", &shape);
            let x = g.input();
            let t = g.tanh("pre", x)?;
            match kind {
                "slice" => g.slice(kind, t, 1, 1, b)?,
                "reshape" => g.reshape(kind, t, &[b, a])?,
                "concat" => g.concat(kind, &[t, x, t])?,
                _ => g.subtract(kind, t, x)?,
            };
            mode = Mode::Train;
        }
        other => {
            return Err(crate::error::NnError::Invalid(format!(
                "no gradient case for `{other}`"
            )));
        }
    }
    g.initialize(rng);
    // Move norm parameters off their trivial initial values.
    for p in g.params_mut() {
        for v in &mut p.values {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let mut full = vec![batch];
    full.extend_from_slice(&shape);
    let x = match kind {
        "lrelu" | "complex_divide" => away_from_zero(&full, rng),
        _ => uniform(&full, rng, 1.5),
    };
    Ok((g, x, mode))
}

/// Finite-difference check of the loss gradient w.r.t. the logits.
fn check_loss(rng: &mut ChaCha8Rng) -> Result<GradCheck> {
    let bits = rng.random_range(2..20);
    let logits: Vec<f64> = (0..2 * bits).map(|_| rng.random_range(-3.0..3.0)).collect();
    let labels: Vec<u8> = (0..bits).map(|_| rng.random_range(0..2u8)).collect();
    let cfg = LossConfig::default();
    let total = |z: &[f64]| -> Result<f64> {
        let p = Tensor::from_vec(&[bits, 2], softmax_forward(z, 2))?;
        Ok(soft_bit_loss(&p, &labels, &cfg)?.0.total)
    };
    let p = Tensor::from_vec(&[bits, 2], softmax_forward(&logits, 2))?;
    let (_, grad) = soft_bit_loss(&p, &labels, &cfg)?;
    let mut worst: f64 = 0.0;
    for i in 0..logits.len() {
        let (mut a, mut b) = (logits.clone(), logits.clone());
        a[i] += STEP;
        b[i] -= STEP;
        let num = (total(&a)? - total(&b)?) / (2.0 * STEP);
        worst = worst.max(relative_error(grad.data()[i], num));
    }
    Ok(GradCheck {
        layer: String::new(),
        input_shape: vec![bits, 2],
        max_rel_error: worst,
        coordinates: logits.len(),
    })
}

/// Runs `cases` random shapes of every layer kind.
pub fn layer_suite(seed: u64, cases: usize) -> Result<Vec<GradCheck>> {
    let mut out = Vec::new();
    for (k, kind) in LAYER_KINDS.iter().enumerate() {
        for c in 0..cases {
            let case_seed = seed ^ ((k as u64) << 32) ^ c as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
            let mut check = if *kind == "loss" {
                check_loss(&mut rng)?
            } else {
                let (mut g, x, mode) = build_case(kind, &mut rng)?;
                check_graph(&mut g, &x, mode, case_seed, 64)?
            };
            check.layer = kind.to_string();
            out.push(check);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!(relative_error(1e-12, 0.0) < 1e-6);
    }
}
