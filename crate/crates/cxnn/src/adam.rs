use crate::graph::Graph;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `values` in place. `t` is the 1-based
/// step number.
pub fn adam_update<T: Real>(
    values: &mut [T],
    grads: &[T],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
    cfg: &AdamConfig,
) {
    let c1 = 1.0 - cfg.beta1.powf(t as f64);
    let c2 = 1.0 - cfg.beta2.powf(t as f64);
    for i in 0..values.len() {
        let g = grads[i].as_f64();
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let mhat = m[i] / c1;
        let vhat = v[i] / c2;
        values[i] = values[i] - T::of(lr * mhat / (vhat.sqrt() + cfg.eps));
    }
}

/// Adam state for every parameter block of one graph.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<T: Real>(graph: &Graph<T>, cfg: AdamConfig) -> Self {
        let zeros = |g: &Graph<T>| g.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            cfg,
            step: 0,
            m: zeros(graph),
            v: zeros(graph),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies the accumulated gradients to every trainable block.
    pub fn step<T: Real>(&mut self, graph: &mut Graph<T>, lr: f64) {
        self.step += 1;
        for (i, p) in graph.params_mut().iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            adam_update(
                &mut p.values,
                &p.grad,
                &mut self.m[i],
                &mut self.v[i],
                self.step,
                lr,
                &self.cfg,
            );
        }
    }
}
