//! Reverse-mode automatic differentiation over vectors.

use super::{Grads, ParamId, ParamStore, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op<T> {
    Input,
    Param(ParamId),
    Row(ParamId, usize),
    /// `w · x + b` with `w` of shape `[out, in]`.
    Affine {
        w: ParamId,
        x: NodeId,
        b: Option<ParamId>,
    },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    OneMinus(NodeId),
    /// Elementwise product with a constant vector.
    Mask(NodeId, Vec<T>),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Concat(Vec<NodeId>),
    Slice(NodeId, usize),
    Sum(Vec<NodeId>),
    /// Sum of the entries of one node.
    Total(NodeId),
    Scale(NodeId, T),
    /// Negative log-likelihood of `target` under softmax(logits).
    SoftmaxXent {
        logits: NodeId,
        target: usize,
        probs: Vec<T>,
    },
    /// Binary cross entropy of a single logit against a 0/1 target.
    SigmoidBce {
        logit: NodeId,
        target: T,
        prob: T,
    },
}

/// A tape of vector-valued nodes. Parameters are read from the borrowed
/// store; [`Graph::backward`] returns their gradients.
pub struct Graph<'p, T: Real> {
    params: &'p ParamStore<T>,
    values: Vec<Vec<T>>,
    ops: Vec<Op<T>>,
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Graph {
            params,
            values: Vec::new(),
            ops: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    fn push(&mut self, value: Vec<T>, op: Op<T>) -> NodeId {
        self.values.push(value);
        self.ops.push(op);
        NodeId(self.values.len() - 1)
    }

    pub fn value(&self, node: NodeId) -> &[T] {
        &self.values[node.0]
    }

    pub fn scalar(&self, node: NodeId) -> T {
        let v = self.value(node);
        assert_eq!(v.len(), 1, "node is not a scalar");
        v[0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn input(&mut self, value: Vec<T>) -> NodeId {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        let value = self.params.get(id).data.clone();
        self.push(value, Op::Param(id))
    }

    /// Row `row` of a matrix parameter, e.g. an embedding lookup.
    pub fn row(&mut self, id: ParamId, row: usize) -> NodeId {
        let value = self.params.get(id).row(row).to_vec();
        self.push(value, Op::Row(id, row))
    }

    pub fn affine(&mut self, w: ParamId, x: NodeId, b: Option<ParamId>) -> NodeId {
        let wt = self.params.get(w);
        let (rows, cols) = (wt.rows(), wt.cols());
        let xv = &self.values[x.0];
        assert_eq!(
            xv.len(),
            cols,
            "affine input size for {}",
            self.params.name(w)
        );
        let mut out = match b {
            Some(b) => {
                let bv = &self.params.get(b).data;
                assert_eq!(
                    bv.len(),
                    rows,
                    "affine bias size for {}",
                    self.params.name(b)
                );
                bv.clone()
            }
            None => vec![T::zero(); rows],
        };
        for (r, o) in out.iter_mut().enumerate() {
            let row = &wt.data[r * cols..(r + 1) * cols];
            let mut acc = T::zero();
            for (a, b) in row.iter().zip(xv) {
                acc += *a * *b;
            }
            *o += acc;
        }
        self.push(out, Op::Affine { w, x, b })
    }

    fn zip_with(&self, a: NodeId, b: NodeId, f: impl Fn(T, T) -> T) -> Vec<T> {
        let (av, bv) = (&self.values[a.0], &self.values[b.0]);
        assert_eq!(av.len(), bv.len(), "elementwise operands differ in size");
        av.iter().zip(bv).map(|(&x, &y)| f(x, y)).collect()
    }

    fn map(&self, a: NodeId, f: impl Fn(T) -> T) -> Vec<T> {
        self.values[a.0].iter().map(|&x| f(x)).collect()
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.zip_with(a, b, |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.zip_with(a, b, |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, |x| T::one() - x);
        self.push(v, Op::OneMinus(a))
    }

    pub fn mask(&mut self, a: NodeId, mask: Vec<T>) -> NodeId {
        assert_eq!(mask.len(), self.values[a.0].len(), "mask size");
        let v = self.values[a.0]
            .iter()
            .zip(&mask)
            .map(|(&x, &m)| x * m)
            .collect();
        self.push(v, Op::Mask(a, mask))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, T::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, |x| x.max(T::zero()));
        self.push(v, Op::Relu(a))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let v = parts
            .iter()
            .flat_map(|p| self.values[p.0].iter().copied())
            .collect();
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.values[a.0][start..start + len].to_vec();
        self.push(v, Op::Slice(a, start))
    }

    /// Elementwise sum of equally sized nodes.
    pub fn sum(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "sum of nothing");
        let mut v = self.values[parts[0].0].clone();
        for p in &parts[1..] {
            let pv = &self.values[p.0];
            assert_eq!(pv.len(), v.len(), "sum operands differ in size");
            for (a, b) in v.iter_mut().zip(pv) {
                *a += *b;
            }
        }
        self.push(v, Op::Sum(parts.to_vec()))
    }

    /// Scalar sum of all entries.
    pub fn total(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].iter().copied().sum();
        self.push(vec![v], Op::Total(a))
    }

    pub fn scale(&mut self, a: NodeId, factor: T) -> NodeId {
        let v = self.map(a, |x| x * factor);
        self.push(v, Op::Scale(a, factor))
    }

    pub fn softmax_xent(&mut self, logits: NodeId, target: usize) -> NodeId {
        let probs = softmax(&self.values[logits.0]);
        assert!(target < probs.len(), "target {target} out of range");
        let loss = -probs[target].max(T::min_positive_value()).ln();
        self.push(
            vec![loss],
            Op::SoftmaxXent {
                logits,
                target,
                probs,
            },
        )
    }

    /// `target` is 0 or 1; the loss is computed stably from the logit.
    pub fn sigmoid_bce(&mut self, logit: NodeId, target: bool) -> NodeId {
        let z = self.scalar(logit);
        let t = if target { T::one() } else { T::zero() };
        // max(z, 0) - z t + log(1 + exp(-|z|))
        let loss = z.max(T::zero()) - z * t + (T::one() + (-z.abs()).exp()).ln();
        let prob = sigmoid(z);
        self.push(
            vec![loss],
            Op::SigmoidBce {
                logit,
                target: t,
                prob,
            },
        )
    }

    /// Gradients of the scalar `loss` with respect to every parameter.
    /// Sign of every ReLU input on the tape, in tape order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                Op::Relu(a) => Some(self.values[a.0].iter().map(|&x| x > T::zero())),
                _ => None,
            })
            .flatten()
            .collect()
    }

    pub fn backward(&self, loss: NodeId) -> Grads<T> {
        let mut grads = Grads::zeros_like(self.params);
        self.backward_into(loss, &mut grads);
        grads
    }

    /// Like [`Graph::backward`] but accumulates into `grads`.
    pub fn backward_into(&self, loss: NodeId, grads: &mut Grads<T>) {
        assert_eq!(self.values[loss.0].len(), 1, "loss must be a scalar");
        let mut d: Vec<Vec<T>> = vec![Vec::new(); loss.0 + 1];
        d[loss.0] = vec![T::one()];
        for i in (0..=loss.0).rev() {
            if d[i].is_empty() {
                continue;
            }
            let dy = std::mem::take(&mut d[i]);
            let y = &self.values[i];
            let acc = |d: &mut Vec<Vec<T>>, node: NodeId, f: &dyn Fn(usize) -> T| {
                let slot = &mut d[node.0];
                if slot.is_empty() {
                    *slot = vec![T::zero(); self.values[node.0].len()];
                }
                for (k, s) in slot.iter_mut().enumerate() {
                    *s += f(k);
                }
            };
            match &self.ops[i] {
                Op::Input => {}
                Op::Param(id) => {
                    for (g, &x) in grads.get_mut(*id).iter_mut().zip(&dy) {
                        *g += x;
                    }
                }
                Op::Row(id, r) => {
                    let cols = self.params.get(*id).cols();
                    let g = &mut grads.get_mut(*id)[r * cols..(r + 1) * cols];
                    for (g, &x) in g.iter_mut().zip(&dy) {
                        *g += x;
                    }
                }
                Op::Affine { w, x, b } => {
                    let wt = self.params.get(*w);
                    let cols = wt.cols();
                    let xv = &self.values[x.0];
                    {
                        let gw = grads.get_mut(*w);
                        for (r, &dyr) in dy.iter().enumerate() {
                            if dyr == T::zero() {
                                continue;
                            }
                            for (g, &xc) in gw[r * cols..(r + 1) * cols].iter_mut().zip(xv) {
                                *g += dyr * xc;
                            }
                        }
                    }
                    if let Some(b) = b {
                        for (g, &x) in grads.get_mut(*b).iter_mut().zip(&dy) {
                            *g += x;
                        }
                    }
                    if !matches!(self.ops[x.0], Op::Input) {
                        let mut dx = vec![T::zero(); cols];
                        for (r, &dyr) in dy.iter().enumerate() {
                            if dyr == T::zero() {
                                continue;
                            }
                            for (g, &wc) in dx.iter_mut().zip(&wt.data[r * cols..(r + 1) * cols]) {
                                *g += dyr * wc;
                            }
                        }
                        acc(&mut d, *x, &|k| dx[k]);
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut d, *a, &|k| dy[k]);
                    acc(&mut d, *b, &|k| dy[k]);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.values[a.0], &self.values[b.0]);
                    acc(&mut d, *a, &|k| dy[k] * bv[k]);
                    acc(&mut d, *b, &|k| dy[k] * av[k]);
                }
                Op::OneMinus(a) => acc(&mut d, *a, &|k| -dy[k]),
                Op::Mask(a, m) => acc(&mut d, *a, &|k| dy[k] * m[k]),
                Op::Sigmoid(a) => acc(&mut d, *a, &|k| dy[k] * y[k] * (T::one() - y[k])),
                Op::Tanh(a) => acc(&mut d, *a, &|k| dy[k] * (T::one() - y[k] * y[k])),
                Op::Relu(a) => acc(&mut d, *a, &|k| {
                    if y[k] > T::zero() {
                        dy[k]
                    } else {
                        T::zero()
                    }
                }),
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.values[p.0].len();
                        acc(&mut d, *p, &|k| dy[offset + k]);
                        offset += n;
                    }
                }
                Op::Slice(a, start) => {
                    let n = dy.len();
                    let start = *start;
                    acc(&mut d, *a, &|k| {
                        if k >= start && k < start + n {
                            dy[k - start]
                        } else {
                            T::zero()
                        }
                    });
                }
                Op::Sum(parts) => {
                    for p in parts {
                        acc(&mut d, *p, &|k| dy[k]);
                    }
                }
                Op::Total(a) => acc(&mut d, *a, &|_| dy[0]),
                Op::Scale(a, c) => acc(&mut d, *a, &|k| dy[k] * *c),
                Op::SoftmaxXent {
                    logits,
                    target,
                    probs,
                } => {
                    let t = *target;
                    acc(&mut d, *logits, &|k| {
                        dy[0] * (probs[k] - if k == t { T::one() } else { T::zero() })
                    });
                }
                Op::SigmoidBce {
                    logit,
                    target,
                    prob,
                } => acc(&mut d, *logit, &|_| dy[0] * (*prob - *target)),
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}
