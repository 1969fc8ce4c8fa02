use crate::error::{NnError, Result};
use crate::layers::{activation, complex, dense, norm};
use crate::real::Real;
use crate::tensor::Tensor;
use rand::Rng;
use std::collections::HashSet;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform in `+-sqrt(6 / (fan_in + fan_out))`.
    Glorot {
        fan_in: usize,
        fan_out: usize,
    },
}

/// A named parameter array with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct ParamBlock<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<T>,
    pub grad: Vec<T>,
    /// Updated by the optimizer.
    pub trainable: bool,
    /// Included in the L2 penalty.
    pub decay: bool,
    pub init: Init,
}

impl<T: Real> ParamBlock<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Input,
    /// Fully connected on the last axis; `w` is `[in, out]`.
    Dense {
        w: usize,
        b: Option<usize>,
    },
    /// Kernel-1 real convolution over the last (channel) axis, with bias.
    Conv1dReal {
        w: usize,
        b: usize,
    },
    /// `filters` complex filters of `width` taps, stride `width`.
    ComplexConv1d {
        w: usize,
        width: usize,
        filters: usize,
    },
    /// One complex `[kr, kc]` filter, circular padding.
    ComplexConv2d {
        w: usize,
        kr: usize,
        kc: usize,
    },
    BatchNorm {
        gamma: usize,
        beta: usize,
        mean: usize,
        var: usize,
        momentum: f64,
        eps: f64,
        /// Always use running statistics and never update them.
        frozen: bool,
    },
    /// Normalizes each sample over all of its values.
    LayerNorm {
        gamma: usize,
        beta: usize,
        eps: f64,
    },
    LRelu {
        alpha: f64,
    },
    Tanh,
    Linear,
    /// Softmax over the last axis.
    Softmax,
    ComplexDivide {
        eps: f64,
    },
    /// `start..end` along a per-sample axis.
    Slice {
        axis: usize,
        start: usize,
        end: usize,
    },
    Reshape,
    /// Concatenation along the last axis.
    Concat,
    Subtract,
}

impl Op {
    pub fn kind(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Dense { .. } => "dense",
            Op::Conv1dReal { .. } => "conv1d_real",
            Op::ComplexConv1d { .. } => "conv1d_complex",
            Op::ComplexConv2d { .. } => "conv2d_complex",
            Op::BatchNorm { .. } => "batch_norm",
            Op::LayerNorm { .. } => "layer_norm",
            Op::LRelu { .. } => "lrelu",
            Op::Tanh => "tanh",
            Op::Linear => "linear",
            Op::Softmax => "softmax",
            Op::ComplexDivide { .. } => "complex_divide",
            Op::Slice { .. } => "slice",
            Op::Reshape => "reshape",
            Op::Concat => "concat",
            Op::Subtract => "subtract",
        }
    }

    fn params(&self) -> Vec<usize> {
        match *self {
            Op::Dense { w, b } => std::iter::once(w).chain(b).collect(),
            Op::Conv1dReal { w, b } => vec![w, b],
            Op::ComplexConv1d { w, .. } | Op::ComplexConv2d { w, .. } => vec![w],
            Op::BatchNorm {
                gamma,
                beta,
                mean,
                var,
                ..
            } => vec![gamma, beta, mean, var],
            Op::LayerNorm { gamma, beta, .. } => vec![gamma, beta],
            _ => Vec::new(),
        }
    }

    fn remap_params(&self, offset: usize) -> Op {
        let mut op = self.clone();
        match &mut op {
            Op::Dense { w, b } => {
                *w += offset;
                if let Some(b) = b {
                    *b += offset;
                }
            }
            Op::Conv1dReal { w, b } => {
                *w += offset;
                *b += offset;
            }
            Op::ComplexConv1d { w, .. } | Op::ComplexConv2d { w, .. } => *w += offset,
            Op::BatchNorm {
                gamma,
                beta,
                mean,
                var,
                ..
            } => {
                *gamma += offset;
                *beta += offset;
                *mean += offset;
                *var += offset;
            }
            Op::LayerNorm { gamma, beta, .. } => {
                *gamma += offset;
                *beta += offset;
            }
            _ => {}
        }
        op
    }

    fn attributes(&self) -> String {
        match *self {
            Op::Dense { b, .. } => format!("bias={}", b.is_some()),
            Op::ComplexConv1d { width, filters, .. } => format!("width={width} filters={filters}"),
            Op::ComplexConv2d { kr, kc, .. } => format!("kernel={kr}x{kc}"),
            Op::BatchNorm {
                momentum,
                eps,
                frozen,
                ..
            } => format!("momentum={momentum} eps={eps} frozen={frozen}"),
            Op::LayerNorm { eps, .. } => format!("eps={eps}"),
            Op::LRelu { alpha } => format!("alpha={alpha}"),
            Op::ComplexDivide { eps } => format!("eps={eps}"),
            Op::Slice { axis, start, end } => format!("axis={axis} range={start}..{end}"),
            _ => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub op: Op,
    pub inputs: Vec<NodeId>,
    /// Per-sample output shape (no batch axis).
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm.
    Train,
    /// Running statistics everywhere.
    Eval,
}

#[derive(Debug, Clone)]
enum Cache<T> {
    None,
    Embedding(Vec<T>),
    Norm(norm::NormCache<T>),
}

/// Forward activations of every node, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    values: Vec<Tensor<T>>,
    caches: Vec<Cache<T>>,
    mode: Mode,
    output: NodeId,
}

impl<T: Real> Tape<T> {
    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.values[id.0]
    }

    pub fn output(&self) -> &Tensor<T> {
        &self.values[self.output.0]
    }

    pub fn into_output(mut self) -> Tensor<T> {
        self.values.swap_remove(self.output.0)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
}

/// Directed acyclic layer graph with a single input node. Nodes are stored
/// in insertion order, which is a valid topological order because a node can
/// only reference nodes that already exist.
#[derive(Debug, Clone)]
pub struct Graph<T> {
    nodes: Vec<Node>,
    params: Vec<ParamBlock<T>>,
    output: NodeId,
}

fn shape_err(context: impl Into<String>, expected: &[usize], got: &[usize]) -> NnError {
    NnError::Shape {
        context: context.into(),
        expected: expected.to_vec(),
        got: got.to_vec(),
    }
}

impl<T: Real> Graph<T> {
    pub fn new(input_name: &str, input_shape: &[usize]) -> Self {
        Self {
            nodes: vec![Node {
                name: input_name.to_string(),
                op: Op::Input,
                inputs: Vec::new(),
                shape: input_shape.to_vec(),
            }],
            params: Vec::new(),
            output: NodeId(0),
        }
    }

    pub fn input(&self) -> NodeId {
        NodeId(0)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.nodes[0].shape
    }

    pub fn output(&self) -> NodeId {
        self.output
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.nodes[self.output.0].shape
    }

    pub fn set_output(&mut self, id: NodeId) {
        self.output = id;
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.0]
    }

    pub fn find(&self, name: &str) -> Result<NodeId> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .map(NodeId)
            .ok_or_else(|| NnError::UnknownTensor(name.to_string()))
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn params(&self) -> &[ParamBlock<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [ParamBlock<T>] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Result<&ParamBlock<T>> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| NnError::UnknownTensor(name.to_string()))
    }

    pub fn param_mut(&mut self, name: &str) -> Result<&mut ParamBlock<T>> {
        self.params
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| NnError::UnknownTensor(name.to_string()))
    }

    /// Parameter blocks owned by one node, in declaration order.
    pub fn node_params(&self, id: NodeId) -> Vec<&ParamBlock<T>> {
        self.nodes[id.0]
            .op
            .params()
            .into_iter()
            .map(|i| &self.params[i])
            .collect()
    }

    pub fn trainable_count(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.len()).sum()
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    fn add_param(
        &mut self,
        name: String,
        shape: &[usize],
        init: Init,
        trainable: bool,
        decay: bool,
    ) -> usize {
        let n = shape.iter().product();
        let fill = if init == Init::Ones { T::one() } else { T::zero() };
        self.params.push(ParamBlock {
            name,
            shape: shape.to_vec(),
            values: vec![fill; n],
            grad: vec![T::zero(); n],
            trainable,
            decay,
            init,
        });
        self.params.len() - 1
    }

    fn push(&mut self, name: &str, op: Op, inputs: Vec<NodeId>, shape: Vec<usize>) -> Result<NodeId> {
        if self.nodes.iter().any(|n| n.name == name) {
            return Err(NnError::DuplicateName(name.to_string()));
        }
        if let Some(bad) = inputs.iter().find(|i| i.0 >= self.nodes.len()) {
            return Err(NnError::Invalid(format!("node {} does not exist", bad.0)));
        }
        self.nodes.push(Node {
            name: name.to_string(),
            op,
            inputs,
            shape,
        });
        let id = NodeId(self.nodes.len() - 1);
        self.output = id;
        Ok(id)
    }

    pub fn dense(&mut self, name: &str, x: NodeId, out: usize, bias: bool) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        let n_in = *shape
            .last()
            .ok_or_else(|| NnError::Invalid(format!("{name}: scalar input")))?;
        let w = self.add_param(
            format!("{name}/w"),
            &[n_in, out],
            Init::Glorot {
                fan_in: n_in,
                fan_out: out,
            },
            true,
            true,
        );
        let b = bias.then(|| self.add_param(format!("{name}/b"), &[out], Init::Zeros, true, false));
        let mut out_shape = shape;
        *out_shape.last_mut().unwrap() = out;
        self.push(name, Op::Dense { w, b }, vec![x], out_shape)
    }

    pub fn conv1d_real(&mut self, name: &str, x: NodeId, filters: usize) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        let channels = *shape
            .last()
            .ok_or_else(|| NnError::Invalid(format!("{name}: scalar input")))?;
        let w = self.add_param(
            format!("{name}/w"),
            &[channels, filters],
            Init::Glorot {
                fan_in: channels,
                fan_out: filters,
            },
            true,
            true,
        );
        let b = self.add_param(format!("{name}/b"), &[filters], Init::Zeros, true, false);
        let mut out_shape = shape;
        *out_shape.last_mut().unwrap() = filters;
        self.push(name, Op::Conv1dReal { w, b }, vec![x], out_shape)
    }

    /// Input `[..., L, 2]` with `L` a multiple of `width`; output
    /// `[..., (L / width) * filters, 2]`.
    pub fn complex_conv1d(&mut self, name: &str, x: NodeId, width: usize, filters: usize) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        let k = shape.len();
        if k < 2 || shape[k - 1] != 2 || width == 0 || shape[k - 2] % width != 0 {
            return Err(shape_err(
                format!("{name}: complex conv input"),
                &[width, 2],
                &shape,
            ));
        }
        let w = self.add_param(
            format!("{name}/w"),
            &[filters, width, 2],
            Init::Glorot {
                fan_in: 2 * width,
                fan_out: 2 * filters,
            },
            true,
            true,
        );
        let mut out_shape = shape.clone();
        out_shape[k - 2] = shape[k - 2] / width * filters;
        self.push(name, Op::ComplexConv1d { w, width, filters }, vec![x], out_shape)
    }

    /// Input `[rows, cols, 1.., 2]`; one `[kr, kc]` complex filter.
    pub fn complex_conv2d(&mut self, name: &str, x: NodeId, kr: usize, kc: usize) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        let (rows, cols) = grid_dims(&shape)
            .ok_or_else(|| shape_err(format!("{name}: 2-D complex conv input"), &[kr, kc, 1, 2], &shape))?;
        if kr == 0 || kc == 0 || kr > rows || kc > cols {
            return Err(shape_err(
                format!("{name}: filter larger than grid"),
                &[rows, cols],
                &[kr, kc],
            ));
        }
        let w = self.add_param(
            format!("{name}/w"),
            &[kr, kc, 2],
            Init::Glorot {
                fan_in: 2 * kr * kc,
                fan_out: 2,
            },
            true,
            true,
        );
        self.push(name, Op::ComplexConv2d { w, kr, kc }, vec![x], shape)
    }

    pub fn batch_norm(&mut self, name: &str, x: NodeId, momentum: f64, eps: f64) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        let c = *shape
            .last()
            .ok_or_else(|| NnError::Invalid(format!("{name}: scalar input")))?;
        let gamma = self.add_param(format!("{name}/gamma"), &[c], Init::Ones, true, false);
        let beta = self.add_param(format!("{name}/beta"), &[c], Init::Zeros, true, false);
        let mean = self.add_param(format!("{name}/moving_mean"), &[c], Init::Zeros, false, false);
        let var = self.add_param(format!("{name}/moving_var"), &[c], Init::Ones, false, false);
        self.push(
            name,
            Op::BatchNorm {
                gamma,
                beta,
                mean,
                var,
                momentum,
                eps,
                frozen: false,
            },
            vec![x],
            shape,
        )
    }

    pub fn layer_norm(&mut self, name: &str, x: NodeId, eps: f64) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        let gamma = self.add_param(format!("{name}/gamma"), &shape, Init::Ones, true, false);
        let beta = self.add_param(format!("{name}/beta"), &shape, Init::Zeros, true, false);
        self.push(name, Op::LayerNorm { gamma, beta, eps }, vec![x], shape)
    }

    fn unary(&mut self, name: &str, x: NodeId, op: Op) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        self.push(name, op, vec![x], shape)
    }

    pub fn lrelu(&mut self, name: &str, x: NodeId, alpha: f64) -> Result<NodeId> {
        self.unary(name, x, Op::LRelu { alpha })
    }

    pub fn tanh(&mut self, name: &str, x: NodeId) -> Result<NodeId> {
        self.unary(name, x, Op::Tanh)
    }

    pub fn linear(&mut self, name: &str, x: NodeId) -> Result<NodeId> {
        self.unary(name, x, Op::Linear)
    }

    pub fn softmax(&mut self, name: &str, x: NodeId) -> Result<NodeId> {
        self.unary(name, x, Op::Softmax)
    }

    pub fn complex_divide(&mut self, name: &str, num: NodeId, den: NodeId, eps: f64) -> Result<NodeId> {
        let (a, b) = (self.shape(num).to_vec(), self.shape(den).to_vec());
        if a != b || a.last() != Some(&2) {
            return Err(shape_err(format!("{name}: complex division operands"), &a, &b));
        }
        self.push(name, Op::ComplexDivide { eps }, vec![num, den], a)
    }

    pub fn slice(&mut self, name: &str, x: NodeId, axis: usize, start: usize, end: usize) -> Result<NodeId> {
        let mut shape = self.shape(x).to_vec();
        if axis >= shape.len() || start >= end || end > shape[axis] {
            return Err(NnError::Invalid(format!(
                "{name}: slice {start}..{end} on axis {axis} of {shape:?}"
            )));
        }
        shape[axis] = end - start;
        self.push(name, Op::Slice { axis, start, end }, vec![x], shape)
    }

    pub fn reshape(&mut self, name: &str, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let from = self.shape(x);
        if from.iter().product::<usize>() != shape.iter().product::<usize>() {
            return Err(shape_err(format!("{name}: reshape"), shape, from));
        }
        self.push(name, Op::Reshape, vec![x], shape.to_vec())
    }

    pub fn concat(&mut self, name: &str, xs: &[NodeId]) -> Result<NodeId> {
        let first = self
            .shape(
                *xs.first()
                    .ok_or_else(|| NnError::Invalid(format!("{name}: nothing to concat")))?,
            )
            .to_vec();
        let lead = &first[..first.len() - 1];
        let mut width = 0;
        for &x in xs {
            let s = self.shape(x);
            if &s[..s.len() - 1] != lead {
                return Err(shape_err(format!("{name}: concat operand"), &first, s));
            }
            width += s[s.len() - 1];
        }
        let mut shape = lead.to_vec();
        shape.push(width);
        self.push(name, Op::Concat, xs.to_vec(), shape)
    }

    pub fn subtract(&mut self, name: &str, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa != sb {
            return Err(shape_err(format!("{name}: subtract operands"), &sa, &sb));
        }
        self.push(name, Op::Subtract, vec![a, b], sa)
    }

    /// Draws every parameter from its initializer, in declaration order.
    pub fn initialize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for p in &mut self.params {
            match p.init {
                Init::Zeros => p.values.iter_mut().for_each(|v| *v = T::zero()),
                Init::Ones => p.values.iter_mut().for_each(|v| *v = T::one()),
                Init::Glorot { fan_in, fan_out } => {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    for v in &mut p.values {
                        *v = T::of(rng.random_range(-limit..limit));
                    }
                }
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Stops updates of every parameter owned by nodes whose name starts with
    /// `prefix`; their batch norms switch to running statistics for good.
    pub fn freeze(&mut self, prefix: &str) {
        let mut owned = HashSet::new();
        for node in self.nodes.iter_mut().filter(|n| n.name.starts_with(prefix)) {
            owned.extend(node.op.params());
            if let Op::BatchNorm { frozen, .. } = &mut node.op {
                *frozen = true;
            }
        }
        for i in owned {
            self.params[i].trainable = false;
        }
    }

    /// Copies `other` behind `feed`: `other`'s input is replaced by `feed`
    /// and its node and parameter names get `prefix/`. Returns the id of
    /// `other`'s output inside `self`.
    pub fn append(&mut self, other: &Graph<T>, feed: NodeId, prefix: &str) -> Result<NodeId> {
        if self.shape(feed) != other.input_shape() {
            return Err(shape_err(
                format!("{prefix}: appended graph input"),
                other.input_shape(),
                self.shape(feed),
            ));
        }
        let offset = self.params.len();
        for p in &other.params {
            let mut p = p.clone();
            p.name = format!("{prefix}/{}", p.name);
            self.params.push(p);
        }
        let mut map = vec![feed];
        for node in &other.nodes[1..] {
            let inputs = node.inputs.iter().map(|i| map[i.0]).collect();
            let id = self.push(
                &format!("{prefix}/{}", node.name),
                node.op.remap_params(offset),
                inputs,
                node.shape.clone(),
            )?;
            map.push(id);
        }
        Ok(map[other.output.0])
    }

    /// One line per node: name, kind, attributes, inputs and shape.
    pub fn describe(&self) -> Vec<String> {
        self.nodes
            .iter()
            .map(|n| {
                let mut line = format!("{} {}", n.name, n.op.kind());
                let attrs = n.op.attributes();
                if !attrs.is_empty() {
                    let _ = write!(line, " {attrs}");
                }
                if !n.inputs.is_empty() {
                    let names: Vec<&str> = n.inputs.iter().map(|i| self.nodes[i.0].name.as_str()).collect();
                    let _ = write!(line, " <- {}", names.join(","));
                }
                let dims: Vec<String> = n.shape.iter().map(|d| d.to_string()).collect();
                let _ = write!(line, " : [{}]", dims.join(","));
                line
            })
            .collect()
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<Tape<T>> {
        if x.shape().len() != self.input_shape().len() + 1 || &x.shape()[1..] != self.input_shape() {
            let mut want = vec![x.batch()];
            want.extend_from_slice(self.input_shape());
            return Err(shape_err("graph input", &want, x.shape()));
        }
        let batch = x.batch();
        let mut values: Vec<Tensor<T>> = Vec::with_capacity(self.nodes.len());
        let mut caches = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let mut out_shape = vec![batch];
            out_shape.extend_from_slice(&node.shape);
            let (data, cache) = self.forward_node(node, x, &values, mode);
            values.push(Tensor::from_vec(&out_shape, data)?);
            caches.push(cache);
        }
        Ok(Tape {
            values,
            caches,
            mode,
            output: self.output,
        })
    }

    /// Eval-mode forward returning only the output.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(x, Mode::Eval)?.into_output())
    }

    fn p(&self, i: usize) -> &[T] {
        &self.params[i].values
    }

    fn forward_node(
        &self,
        node: &Node,
        x: &Tensor<T>,
        values: &[Tensor<T>],
        mode: Mode,
    ) -> (Vec<T>, Cache<T>) {
        let arg = |k: usize| values[node.inputs[k].0].data();
        let in_shape = |k: usize| values[node.inputs[k].0].shape();
        match node.op {
            Op::Input => (x.data().to_vec(), Cache::None),
            Op::Dense { w, b } => {
                let n_in = *in_shape(0).last().unwrap();
                let n_out = *node.shape.last().unwrap();
                let rows = arg(0).len() / n_in;
                let b = b.map(|b| self.p(b));
                (
                    dense::dense_forward(arg(0), self.p(w), b, rows, n_in, n_out),
                    Cache::None,
                )
            }
            Op::Conv1dReal { w, b } => {
                let n_in = *in_shape(0).last().unwrap();
                let n_out = *node.shape.last().unwrap();
                let rows = arg(0).len() / n_in;
                (
                    dense::dense_forward(arg(0), self.p(w), Some(self.p(b)), rows, n_in, n_out),
                    Cache::None,
                )
            }
            Op::ComplexConv1d { w, width, filters } => {
                let windows = arg(0).len() / (2 * width);
                let (y, m) = complex::complex_conv1d_forward(arg(0), self.p(w), windows, width, filters);
                (y, Cache::Embedding(m))
            }
            Op::ComplexConv2d { w, kr, kc } => {
                let (rows, cols) = grid_dims(&node.shape).unwrap();
                let grids = arg(0).len() / (rows * cols * 2);
                (
                    complex::complex_conv2d_forward(arg(0), self.p(w), grids, rows, cols, kr, kc),
                    Cache::None,
                )
            }
            Op::BatchNorm {
                gamma,
                beta,
                mean,
                var,
                eps,
                frozen,
                ..
            } => {
                let c = *node.shape.last().unwrap();
                let (y, cache) = if mode == Mode::Train && !frozen {
                    norm::batch_norm_train(arg(0), self.p(gamma), self.p(beta), c, T::of(eps))
                } else {
                    norm::batch_norm_eval(
                        arg(0),
                        self.p(gamma),
                        self.p(beta),
                        self.p(mean),
                        self.p(var),
                        T::of(eps),
                    )
                };
                (y, Cache::Norm(cache))
            }
            Op::LayerNorm { gamma, beta, eps } => {
                let size = node.shape.iter().product();
                let (y, cache) =
                    norm::layer_norm_forward(arg(0), self.p(gamma), self.p(beta), size, T::of(eps));
                (y, Cache::Norm(cache))
            }
            Op::LRelu { alpha } => (activation::lrelu_forward(arg(0), T::of(alpha)), Cache::None),
            Op::Tanh => (activation::tanh_forward(arg(0)), Cache::None),
            Op::Linear | Op::Reshape => (arg(0).to_vec(), Cache::None),
            Op::Softmax => (
                activation::softmax_forward(arg(0), *node.shape.last().unwrap()),
                Cache::None,
            ),
            Op::ComplexDivide { eps } => (
                complex::complex_divide_forward(arg(0), arg(1), T::of(eps)),
                Cache::None,
            ),
            Op::Slice { axis, start, end } => {
                let (outer, len, inner) = slice_geometry(in_shape(0), axis + 1);
                let mut y = Vec::with_capacity(outer * (end - start) * inner);
                for o in 0..outer {
                    let base = o * len * inner;
                    y.extend_from_slice(&arg(0)[base + start * inner..base + end * inner]);
                }
                (y, Cache::None)
            }
            Op::Concat => {
                let widths: Vec<usize> = (0..node.inputs.len())
                    .map(|k| *in_shape(k).last().unwrap())
                    .collect();
                let total: usize = widths.iter().sum();
                let rows = arg(0).len() / widths[0];
                let mut y = Vec::with_capacity(rows * total);
                for r in 0..rows {
                    for (k, &w) in widths.iter().enumerate() {
                        y.extend_from_slice(&arg(k)[r * w..(r + 1) * w]);
                    }
                }
                (y, Cache::None)
            }
            Op::Subtract => (
                arg(0).iter().zip(arg(1)).map(|(&a, &b)| a - b).collect(),
                Cache::None,
            ),
        }
    }

    /// Moves every trainable batch norm's running statistics toward the
    /// batch statistics recorded in a training-mode tape.
    pub fn update_running_stats(&mut self, tape: &Tape<T>) {
        if tape.mode != Mode::Train {
            return;
        }
        for (node, cache) in self.nodes.iter().zip(&tape.caches) {
            if let (
                Op::BatchNorm {
                    mean,
                    var,
                    momentum,
                    frozen: false,
                    ..
                },
                Cache::Norm(c),
            ) = (&node.op, cache)
            {
                let m = T::of(*momentum);
                let keep = T::one() - m;
                for (r, &b) in self.params[*mean].values.iter_mut().zip(&c.mean) {
                    *r = m * *r + keep * b;
                }
                for (r, &b) in self.params[*var].values.iter_mut().zip(&c.var) {
                    *r = m * *r + keep * b;
                }
            }
        }
    }

    /// Reverse pass from gradient seeds on arbitrary nodes. Parameter
    /// gradients accumulate into [`ParamBlock::grad`]; the gradient w.r.t.
    /// the graph input is returned.
    pub fn backward(&mut self, tape: &Tape<T>, seeds: &[(NodeId, &Tensor<T>)]) -> Result<Tensor<T>> {
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        for (id, g) in seeds {
            let v = tape.value(*id);
            if g.shape() != v.shape() {
                return Err(shape_err(
                    format!("gradient seed for {}", self.nodes[id.0].name),
                    v.shape(),
                    g.shape(),
                ));
            }
            accumulate(&mut grads[id.0], g.data());
        }
        for idx in (1..self.nodes.len()).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            let input_grads = self.backward_node(idx, tape, &dy);
            for (k, g) in input_grads.into_iter().enumerate() {
                let src = self.nodes[idx].inputs[k].0;
                accumulate(&mut grads[src], &g);
            }
        }
        let input = tape.value(NodeId(0));
        let g = grads[0].take().unwrap_or_else(|| vec![T::zero(); input.len()]);
        Tensor::from_vec(input.shape(), g)
    }

    fn add_grad(&mut self, i: usize, g: &[T]) {
        for (acc, &v) in self.params[i].grad.iter_mut().zip(g) {
            *acc = *acc + v;
        }
    }

    fn backward_node(&mut self, idx: usize, tape: &Tape<T>, dy: &[T]) -> Vec<Vec<T>> {
        let node = self.nodes[idx].clone();
        let arg = |k: usize| tape.values[node.inputs[k].0].data();
        let in_shape = |k: usize| tape.values[node.inputs[k].0].shape();
        match node.op {
            Op::Input => Vec::new(),
            Op::Dense { w, b } => {
                let n_in = *in_shape(0).last().unwrap();
                let n_out = *node.shape.last().unwrap();
                let rows = arg(0).len() / n_in;
                let g = dense::dense_backward(arg(0), self.p(w), dy, rows, n_in, n_out);
                self.add_grad(w, &g.dw);
                if let Some(b) = b {
                    self.add_grad(b, &g.db);
                }
                vec![g.dx]
            }
            Op::Conv1dReal { w, b } => {
                let n_in = *in_shape(0).last().unwrap();
                let n_out = *node.shape.last().unwrap();
                let rows = arg(0).len() / n_in;
                let g = dense::dense_backward(arg(0), self.p(w), dy, rows, n_in, n_out);
                self.add_grad(w, &g.dw);
                self.add_grad(b, &g.db);
                vec![g.dx]
            }
            Op::ComplexConv1d { w, width, filters } => {
                let Cache::Embedding(m) = &tape.caches[idx] else {
                    unreachable!("conv cache")
                };
                let windows = arg(0).len() / (2 * width);
                let (dx, dw) = complex::complex_conv1d_backward(arg(0), m, dy, windows, width, filters);
                self.add_grad(w, &dw);
                vec![dx]
            }
            Op::ComplexConv2d { w, kr, kc } => {
                let (rows, cols) = grid_dims(&node.shape).unwrap();
                let grids = arg(0).len() / (rows * cols * 2);
                let (dx, dw) =
                    complex::complex_conv2d_backward(arg(0), self.p(w), dy, grids, rows, cols, kr, kc);
                self.add_grad(w, &dw);
                vec![dx]
            }
            Op::BatchNorm {
                gamma, beta, frozen, ..
            } => {
                let Cache::Norm(c) = &tape.caches[idx] else {
                    unreachable!("norm cache")
                };
                let batch_stats = tape.mode == Mode::Train && !frozen;
                let g = norm::batch_norm_backward(c, self.p(gamma), dy, batch_stats);
                self.add_grad(gamma, &g.dgamma);
                self.add_grad(beta, &g.dbeta);
                vec![g.dx]
            }
            Op::LayerNorm { gamma, beta, .. } => {
                let Cache::Norm(c) = &tape.caches[idx] else {
                    unreachable!("norm cache")
                };
                let size = node.shape.iter().product();
                let g = norm::layer_norm_backward(c, self.p(gamma), dy, size);
                self.add_grad(gamma, &g.dgamma);
                self.add_grad(beta, &g.dbeta);
                vec![g.dx]
            }
            Op::LRelu { alpha } => vec![activation::lrelu_backward(arg(0), dy, T::of(alpha))],
            Op::Tanh => vec![activation::tanh_backward(tape.values[idx].data(), dy)],
            Op::Linear | Op::Reshape => vec![dy.to_vec()],
            Op::Softmax => vec![activation::softmax_backward(
                tape.values[idx].data(),
                dy,
                *node.shape.last().unwrap(),
            )],
            Op::ComplexDivide { eps } => {
                let (dn, dd) = complex::complex_divide_backward(arg(0), arg(1), dy, T::of(eps));
                vec![dn, dd]
            }
            Op::Slice { axis, start, end } => {
                let (outer, len, inner) = slice_geometry(in_shape(0), axis + 1);
                let mut dx = vec![T::zero(); arg(0).len()];
                let w = (end - start) * inner;
                for o in 0..outer {
                    let base = o * len * inner + start * inner;
                    dx[base..base + w].copy_from_slice(&dy[o * w..(o + 1) * w]);
                }
                vec![dx]
            }
            Op::Concat => {
                let widths: Vec<usize> = (0..node.inputs.len())
                    .map(|k| *in_shape(k).last().unwrap())
                    .collect();
                let total: usize = widths.iter().sum();
                let rows = dy.len() / total;
                let mut out: Vec<Vec<T>> = widths.iter().map(|w| Vec::with_capacity(rows * w)).collect();
                for row in dy.chunks_exact(total) {
                    let mut at = 0;
                    for (k, &w) in widths.iter().enumerate() {
                        out[k].extend_from_slice(&row[at..at + w]);
                        at += w;
                    }
                }
                out
            }
            Op::Subtract => vec![dy.to_vec(), dy.iter().map(|&g| -g).collect()],
        }
    }
}

fn accumulate<T: Real>(slot: &mut Option<Vec<T>>, g: &[T]) {
    match slot {
        Some(acc) => {
            for (a, &b) in acc.iter_mut().zip(g) {
                *a = *a + b;
            }
        }
        None => *slot = Some(g.to_vec()),
    }
}

/// `(outer, len, inner)` around `axis` of a full (batched) shape.
fn slice_geometry(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        shape[..axis].iter().product(),
        shape[axis],
        shape[axis + 1..].iter().product(),
    )
}

/// `(rows, cols)` of a per-sample complex grid shaped `[rows, cols, 1.., 2]`.
fn grid_dims(shape: &[usize]) -> Option<(usize, usize)> {
    let k = shape.len();
    if k < 3 || shape[k - 1] != 2 || shape[2..k - 1].iter().any(|&d| d != 1) {
        return None;
    }
    Some((shape[0], shape[1]))
}
