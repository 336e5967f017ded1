use std::collections::HashMap;

use super::array::{numel, Array};
use super::kernels::{self, ConvGeom};
use crate::error::{Error, Result};
use crate::real::{Precision, Real};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Scale(f64),
    AddScalar,
    Pow(f64),
    Tanh,
    Sigmoid,
    Softplus,
    /// `[C] -> [outer, C, inner]`
    Expand { outer: usize, inner: usize },
    /// `[outer, C, inner] -> [C]`
    Reduce { outer: usize, inner: usize },
    Reshape,
    MatMul,
    Transpose,
    Conv(ConvGeom),
    ConvBackInput(ConvGeom),
    ConvBackWeight(ConvGeom),
    Upsample2,
    SumPool2,
    /// Per-channel slope: `x` viewed as `[outer, C, inner]`.
    Prelu { outer: usize, inner: usize },
}

#[derive(Debug)]
struct Node<T> {
    op: Op,
    inputs: [usize; 2],
    arity: u8,
    value: Array<T>,
    requires_grad: bool,
}

impl<T> Node<T> {
    fn inputs(&self) -> &[usize] {
        &self.inputs[..self.arity as usize]
    }
}

/// Append-only record of tensor operations supporting reverse-mode
/// differentiation, including differentiation of the backward pass itself.
///
/// Nodes whose inputs never require gradients are folded into constants at
/// construction, so the recorded graph only spans the differentiable part.
#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

/// Result of a backward pass.
#[derive(Debug)]
pub struct Gradients<T> {
    values: HashMap<Var, Array<T>>,
    nodes: HashMap<Var, Var>,
}

impl<T: Real> Gradients<T> {
    /// Gradient value for `v`, `None` when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Array<T>> {
        self.values.get(&v)
    }

    /// Gradient for `v` as a differentiable node (create_graph mode only).
    pub fn node(&self, v: Var) -> Option<Var> {
        self.nodes.get(&v).copied()
    }

    /// Gradient values for `v`, or zeros of the given shape if unreached.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Array<T> {
        self.values.get(&v).cloned().unwrap_or_else(|| Array::zeros(shape))
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), consumed: false }
    }

    pub fn precision(&self) -> Precision {
        if std::mem::size_of::<T>() == 8 {
            Precision::Double
        } else {
            Precision::Single
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Indices of the nodes that node `index` was computed from.
    pub fn input_indices(&self, index: usize) -> &[usize] {
        self.nodes[index].inputs()
    }

    pub fn leaf(&mut self, value: Array<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { op: Op::Leaf, inputs: [0; 2], arity: 0, value, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Array<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Array<T>) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, op: Op, inputs: &[Var], value: Array<T>) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        if !requires_grad {
            return self.constant(value);
        }
        let mut idx = [0usize; 2];
        for (slot, v) in idx.iter_mut().zip(inputs) {
            *slot = v.0;
        }
        self.nodes.push(Node { op, inputs: idx, arity: inputs.len() as u8, value, requires_grad });
        Var(self.nodes.len() - 1)
    }

    // ---- shape plumbing -------------------------------------------------

    fn expand_raw(&mut self, a: Var, outer: usize, inner: usize, shape: &[usize]) -> Var {
        let data = kernels::expand(self.value(a).data(), outer, inner);
        let value = Array::new(shape.to_vec(), data).expect("expand shape");
        self.push(Op::Expand { outer, inner }, &[a], value)
    }

    fn reduce_raw(&mut self, a: Var, outer: usize, inner: usize, shape: &[usize]) -> Var {
        let mid = numel(shape);
        let data = kernels::reduce(self.value(a).data(), outer, mid, inner);
        let value = Array::new(shape.to_vec(), data).expect("reduce shape");
        self.push(Op::Reduce { outer, inner }, &[a], value)
    }

    /// Broadcasts `a` to `shape` when `a` is a scalar or matches the
    /// trailing dimensions of `shape`.
    pub fn broadcast_to(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        if sa == shape {
            return Ok(a);
        }
        let n = numel(&sa);
        if n == 1 {
            return Ok(self.expand_raw(a, numel(shape), 1, shape));
        }
        if sa.len() < shape.len() && shape[shape.len() - sa.len()..] == sa[..] {
            return Ok(self.expand_raw(a, numel(shape) / n, 1, shape));
        }
        Err(Error::ShapeMismatch(format!("cannot broadcast {:?} to {:?}", sa, shape)))
    }

    fn broadcast_pair(&mut self, a: Var, b: Var) -> Result<(Var, Var)> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa == sb {
            return Ok((a, b));
        }
        let (na, nb) = (numel(&sa), numel(&sb));
        if nb == 1 || (sb.len() < sa.len() && na >= nb) {
            Ok((a, self.broadcast_to(b, &sa)?))
        } else if na == 1 || sa.len() < sb.len() {
            Ok((self.broadcast_to(a, &sb)?, b))
        } else {
            Err(Error::ShapeMismatch(format!("{:?} vs {:?}", sa, sb)))
        }
    }

    /// Broadcasts a per-channel vector `[C]` over `[B, C, ...]`.
    pub fn expand_channels(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let c = numel(self.shape(a));
        if shape.len() < 2 || shape[1] != c {
            return Err(Error::ShapeMismatch(format!("{c} channel values for shape {:?}", shape)));
        }
        Ok(self.expand_raw(a, shape[0], numel(&shape[2..]), shape))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshaped(shape.to_vec())?;
        Ok(self.push(Op::Reshape, &[a], value))
    }

    // ---- elementwise ----------------------------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.broadcast_pair(a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(Op::Add, &[a, b], value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.broadcast_pair(a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(Op::Sub, &[a, b], value))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.broadcast_pair(a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(Op::Mul, &[a, b], value))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let cv = T::of(c);
        let value = self.value(a).map(|x| x * cv);
        self.push(Op::Scale(c), &[a], value)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let cv = T::of(c);
        let value = self.value(a).map(|x| x + cv);
        self.push(Op::AddScalar, &[a], value)
    }

    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        let value = if p == 2.0 {
            self.value(a).map(|x| x * x)
        } else {
            let pv = T::of(p);
            self.value(a).map(|x| x.powf(pv))
        };
        self.push(Op::Pow(p), &[a], value)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.powf(a, 2.0)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.powf(a, 0.5)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.tanh());
        self.push(Op::Tanh, &[a], value)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid, &[a], value)
    }

    /// `ln(1 + eˣ)` in overflow-free form.
    pub fn softplus(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(T::zero()) + (-x.abs()).exp().ln_1p());
        self.push(Op::Softplus, &[a], value)
    }

    // ---- reductions -----------------------------------------------------

    /// Sum of all elements as a rank-0 value.
    pub fn sum(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        self.reduce_raw(a, 1, n, &[])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    /// Sum over all non-leading axes: `[B, ...] -> [B]`.
    pub fn sum_per_sample(&mut self, a: Var) -> Var {
        let shape = self.shape(a).to_vec();
        let inner = numel(&shape[1..]);
        self.reduce_raw(a, 1, inner, &shape[..1])
    }

    /// Broadcasts `[B]` over `[B, ...]`.
    pub fn expand_per_sample(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if self.shape(a) != &shape[..1] {
            return Err(Error::ShapeMismatch(format!("{:?} per-sample over {:?}", self.shape(a), shape)));
        }
        Ok(self.expand_raw(a, 1, numel(&shape[1..]), shape))
    }

    // ---- linear algebra -------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch(format!("matmul {:?} · {:?}", sa, sb)));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let data = kernels::matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        let value = Array::new(vec![m, n], data)?;
        Ok(self.push(Op::MatMul, &[a, b], value))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() != 2 {
            return Err(Error::ShapeMismatch(format!("transpose of {:?}", s)));
        }
        let data = kernels::transpose(self.value(a).data(), s[0], s[1]);
        let value = Array::new(vec![s[1], s[0]], data)?;
        Ok(self.push(Op::Transpose, &[a], value))
    }

    /// Cross-correlation of `x[B,C,H,W]` with `w[F,C,k,k]`, `k ∈ {1, 3}`,
    /// zero padding `k / 2`, stride 1 or 2.
    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize) -> Result<Var> {
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if sx.len() != 4 || sw.len() != 4 {
            return Err(Error::ShapeMismatch(format!("conv2d {:?} with {:?}", sx, sw)));
        }
        if sw[1] != sx[1] {
            return Err(Error::ShapeMismatch(format!("conv2d: input has {} channels, kernel expects {}", sx[1], sw[1])));
        }
        if sw[2] != sw[3] || !(sw[2] == 3 || sw[2] == 1) {
            return Err(Error::ShapeMismatch(format!("unsupported kernel {}x{}", sw[2], sw[3])));
        }
        if !(stride == 1 || stride == 2) {
            return Err(Error::ShapeMismatch(format!("unsupported stride {stride}")));
        }
        if sx[2] == 0 || sx[3] == 0 {
            return Err(Error::ShapeMismatch("empty spatial extent".into()));
        }
        let geom = ConvGeom {
            batch: sx[0],
            in_ch: sx[1],
            in_h: sx[2],
            in_w: sx[3],
            out_ch: sw[0],
            kernel: sw[2],
            stride,
            pad: sw[2] / 2,
        };
        Ok(self.conv_fwd(x, w, geom))
    }

    fn conv_fwd(&mut self, x: Var, w: Var, g: ConvGeom) -> Var {
        let data = kernels::conv_forward(self.value(x).data(), self.value(w).data(), &g);
        let value = Array::new(vec![g.batch, g.out_ch, g.out_h(), g.out_w()], data).expect("conv shape");
        self.push(Op::Conv(g), &[x, w], value)
    }

    fn conv_bx(&mut self, dy: Var, w: Var, g: ConvGeom) -> Var {
        let data = kernels::conv_backward_input(self.value(dy).data(), self.value(w).data(), &g);
        let value = Array::new(vec![g.batch, g.in_ch, g.in_h, g.in_w], data).expect("conv shape");
        self.push(Op::ConvBackInput(g), &[dy, w], value)
    }

    fn conv_bw(&mut self, x: Var, dy: Var, g: ConvGeom) -> Var {
        let data = kernels::conv_backward_weight(self.value(x).data(), self.value(dy).data(), &g);
        let value = Array::new(vec![g.out_ch, g.in_ch, g.kernel, g.kernel], data).expect("conv shape");
        self.push(Op::ConvBackWeight(g), &[x, dy], value)
    }

    /// Nearest-neighbour 2× upsampling of `[B, C, H, W]`.
    pub fn upsample2(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 {
            return Err(Error::ShapeMismatch(format!("upsample2 of {:?}", s)));
        }
        let data = kernels::upsample2(self.value(x).data(), s[0] * s[1], s[2], s[3]);
        let value = Array::new(vec![s[0], s[1], 2 * s[2], 2 * s[3]], data)?;
        Ok(self.push(Op::Upsample2, &[x], value))
    }

    fn sum_pool2(&mut self, x: Var) -> Var {
        let s = self.shape(x).to_vec();
        let (h, w) = (s[2] / 2, s[3] / 2);
        let data = kernels::sum_pool2(self.value(x).data(), s[0] * s[1], h, w);
        let value = Array::new(vec![s[0], s[1], h, w], data).expect("pool shape");
        self.push(Op::SumPool2, &[x], value)
    }

    // ---- network primitives ---------------------------------------------

    /// Parametric ReLU with one slope per channel (axis 1) or one shared
    /// slope.
    pub fn prelu(&mut self, x: Var, slope: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let c = numel(self.shape(slope));
        let (outer, inner) = if c == 1 {
            (numel(&sx), 1)
        } else if sx.len() >= 2 && sx[1] == c {
            (sx[0], numel(&sx[2..]))
        } else {
            return Err(Error::ShapeMismatch(format!("{c} slopes for input {:?}", sx)));
        };
        let xs = self.value(x).data();
        let a = self.value(slope).data();
        let mut out = Vec::with_capacity(xs.len());
        for o in 0..outer {
            for (ci, &av) in a.iter().enumerate() {
                let base = (o * c + ci) * inner;
                out.extend(xs[base..base + inner].iter().map(|&v| if v >= T::zero() { v } else { av * v }));
            }
        }
        let value = Array::new(sx, out)?;
        Ok(self.push(Op::Prelu { outer, inner }, &[x, slope], value))
    }

    /// Normalizes each sample over all non-batch axes, then applies
    /// elementwise `gain` and `bias` shaped like one sample.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(Error::ShapeMismatch(format!("layer_norm needs a batch axis, got {:?}", shape)));
        }
        let feat = &shape[1..];
        if self.shape(gain) != feat || self.shape(bias) != feat {
            return Err(Error::ShapeMismatch(format!(
                "layer_norm gain {:?} / bias {:?} for features {:?}",
                self.shape(gain),
                self.shape(bias),
                feat
            )));
        }
        let d = numel(feat) as f64;
        let s = self.sum_per_sample(x);
        let mu = self.scale(s, 1.0 / d);
        let mu_b = self.expand_per_sample(mu, &shape)?;
        let xc = self.sub(x, mu_b)?;
        let sq = self.square(xc);
        let ss = self.sum_per_sample(sq);
        let var = self.scale(ss, 1.0 / d);
        let ve = self.add_scalar(var, eps);
        let inv = self.powf(ve, -0.5);
        let inv_b = self.expand_per_sample(inv, &shape)?;
        let y = self.mul(xc, inv_b)?;
        let yg = self.mul(y, gain)?;
        self.add(yg, bias)
    }

    // ---- backward -------------------------------------------------------

    /// Backpropagates from scalar `loss` into every reachable leaf that
    /// requires a gradient.
    pub fn backward(&mut self, loss: Var, create_graph: bool) -> Result<Gradients<T>> {
        let targets: Vec<Var> = (0..=loss.0)
            .filter(|&i| matches!(self.nodes[i].op, Op::Leaf) && self.nodes[i].requires_grad)
            .map(Var)
            .collect();
        self.backward_wrt(loss, &targets, create_graph)
    }

    /// Backpropagates from scalar `loss` into `wrt` only. With
    /// `create_graph` the gradient computation is recorded so gradients can
    /// be differentiated again; otherwise the backward nodes are discarded
    /// and the graph is consumed.
    pub fn backward_wrt(&mut self, loss: Var, wrt: &[Var], create_graph: bool) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::DeadGraph);
        }
        if self.value(loss).len() != 1 {
            return Err(Error::NotScalar(self.shape(loss).to_vec()));
        }
        let start_len = self.nodes.len();
        let end = loss.0 + 1;

        // Nodes with a path from some target: only these need gradients.
        let mut reach = vec![false; end];
        for v in wrt {
            if v.0 < end && self.nodes[v.0].requires_grad {
                reach[v.0] = true;
            }
        }
        for i in 0..end {
            if !reach[i] && self.nodes[i].requires_grad {
                reach[i] = self.nodes[i].inputs().iter().any(|&j| reach[j]);
            }
        }

        let mut grads: Vec<Option<Var>> = vec![None; end];
        if reach[loss.0] {
            let seed = self.constant(Array::full(self.shape(loss), T::one()));
            grads[loss.0] = Some(seed);
        }
        for i in (0..end).rev() {
            let Some(g) = grads[i] else { continue };
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let (op, inputs) = (node.op, node.inputs().to_vec());
            let need: Vec<bool> = inputs.iter().map(|&j| reach[j]).collect();
            let contribs = self.vjp(i, op, &inputs, &need, g)?;
            for (j, c) in contribs {
                grads[j] = Some(match grads[j] {
                    None => c,
                    Some(prev) => self.add(prev, c)?,
                });
            }
        }

        let mut values = HashMap::new();
        let mut nodes = HashMap::new();
        for v in wrt {
            if v.0 < end {
                if let Some(g) = grads[v.0] {
                    values.insert(*v, self.value(g).clone().reshaped(self.shape(*v).to_vec())?);
                    if create_graph {
                        nodes.insert(*v, g);
                    }
                }
            }
        }
        if !create_graph {
            self.nodes.truncate(start_len);
            self.consumed = true;
        }
        Ok(Gradients { values, nodes })
    }

    /// Vector-Jacobian product of node `i` against output gradient `g`,
    /// built from differentiable graph operations.
    fn vjp(&mut self, i: usize, op: Op, inputs: &[usize], need: &[bool], g: Var) -> Result<Vec<(usize, Var)>> {
        let mut out = Vec::with_capacity(2);
        let x = |k: usize| Var(inputs[k]);
        match op {
            Op::Leaf => {}
            Op::Add => {
                if need[0] {
                    out.push((inputs[0], g));
                }
                if need[1] {
                    out.push((inputs[1], g));
                }
            }
            Op::Sub => {
                if need[0] {
                    out.push((inputs[0], g));
                }
                if need[1] {
                    out.push((inputs[1], self.neg(g)));
                }
            }
            Op::Mul => {
                if need[0] {
                    out.push((inputs[0], self.mul(g, x(1))?));
                }
                if need[1] {
                    out.push((inputs[1], self.mul(g, x(0))?));
                }
            }
            Op::Scale(c) => out.push((inputs[0], self.scale(g, c))),
            Op::AddScalar => out.push((inputs[0], g)),
            Op::Pow(p) => {
                let d = if p == 2.0 {
                    self.scale(x(0), 2.0)
                } else {
                    let pm = self.powf(x(0), p - 1.0);
                    self.scale(pm, p)
                };
                out.push((inputs[0], self.mul(g, d)?));
            }
            Op::Tanh => {
                let y2 = self.square(Var(i));
                let neg = self.scale(y2, -1.0);
                let d = self.add_scalar(neg, 1.0);
                out.push((inputs[0], self.mul(g, d)?));
            }
            Op::Sigmoid => {
                let s = Var(i);
                let ns = self.scale(s, -1.0);
                let one_minus = self.add_scalar(ns, 1.0);
                let d = self.mul(s, one_minus)?;
                out.push((inputs[0], self.mul(g, d)?));
            }
            Op::Softplus => {
                let s = self.sigmoid(x(0));
                out.push((inputs[0], self.mul(g, s)?));
            }
            Op::Expand { outer, inner } => {
                let shape = self.shape(x(0)).to_vec();
                out.push((inputs[0], self.reduce_raw(g, outer, inner, &shape)));
            }
            Op::Reduce { outer, inner } => {
                let shape = self.shape(x(0)).to_vec();
                out.push((inputs[0], self.expand_raw(g, outer, inner, &shape)));
            }
            Op::Reshape => {
                let shape = self.shape(x(0)).to_vec();
                out.push((inputs[0], self.reshape(g, &shape)?));
            }
            Op::MatMul => {
                if need[0] {
                    let bt = self.transpose(x(1))?;
                    out.push((inputs[0], self.matmul(g, bt)?));
                }
                if need[1] {
                    let at = self.transpose(x(0))?;
                    out.push((inputs[1], self.matmul(at, g)?));
                }
            }
            Op::Transpose => out.push((inputs[0], self.transpose(g)?)),
            Op::Conv(geom) => {
                if need[0] {
                    out.push((inputs[0], self.conv_bx(g, x(1), geom)));
                }
                if need[1] {
                    out.push((inputs[1], self.conv_bw(x(0), g, geom)));
                }
            }
            Op::ConvBackInput(geom) => {
                // inputs: (dy, w); output lives in input space.
                if need[0] {
                    out.push((inputs[0], self.conv_fwd(g, x(1), geom)));
                }
                if need[1] {
                    out.push((inputs[1], self.conv_bw(g, x(0), geom)));
                }
            }
            Op::ConvBackWeight(geom) => {
                // inputs: (x, dy); output lives in weight space.
                if need[0] {
                    out.push((inputs[0], self.conv_bx(x(1), g, geom)));
                }
                if need[1] {
                    out.push((inputs[1], self.conv_fwd(x(0), g, geom)));
                }
            }
            Op::Upsample2 => out.push((inputs[0], self.sum_pool2(g))),
            Op::SumPool2 => out.push((inputs[0], self.upsample2(g)?)),
            Op::Prelu { outer, inner } => {
                let shape = self.shape(x(0)).to_vec();
                let xs = self.value(x(0));
                let neg_mask = xs.map(|v| if v >= T::zero() { T::zero() } else { T::one() });
                let pos_mask = xs.map(|v| if v >= T::zero() { T::one() } else { T::zero() });
                let neg_mask = self.constant(neg_mask);
                if need[0] {
                    let pos_mask = self.constant(pos_mask);
                    let a = self.expand_raw(x(1), outer, inner, &shape);
                    let neg_slope = self.mul(neg_mask, a)?;
                    let slope = self.add(pos_mask, neg_slope)?;
                    out.push((inputs[0], self.mul(g, slope)?));
                }
                if need[1] {
                    let slope_shape = self.shape(x(1)).to_vec();
                    let neg_part = self.mul(x(0), neg_mask)?;
                    let ga = self.mul(g, neg_part)?;
                    out.push((inputs[1], self.reduce_raw(ga, outer, inner, &slope_shape)));
                }
            }
        }
        Ok(out)
    }
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
