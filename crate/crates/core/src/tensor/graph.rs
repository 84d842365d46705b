use super::{checked_numel, Tensor, TensorError};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Concat(Vec<Var>),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Log(Var),
    Softmax(Var),
    L2Normalize(Var, f64),
    Sum(Var),
    Mean(Var),
    GatherRow(Var, usize),
    SmoothL1(Var),
}

#[derive(Debug, Clone)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    tracked: bool,
}

/// The computation record: nodes in execution order.
///
/// Every kernel appends exactly one node after its inputs, so the node list
/// is already topologically sorted. A node is `tracked` when any of its
/// inputs is; untracked nodes are skipped during the backward sweep.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of one backward sweep, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn smooth_l1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        0.5 * x * x
    } else {
        x.abs() - 0.5
    }
}

fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &[f64] {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        &self.nodes[var.0].shape
    }

    pub fn is_tracked(&self, var: Var) -> bool {
        self.nodes[var.0].tracked
    }

    /// Value of a single-element node.
    pub fn scalar(&self, var: Var) -> f64 {
        self.nodes[var.0].value[0]
    }

    pub fn to_tensor(&self, var: Var) -> Tensor {
        let node = &self.nodes[var.0];
        Tensor::new(&node.shape, node.value.clone()).expect("graph nodes are well formed")
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, tracked: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            tracked,
        });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].tracked)
    }

    /// Copies a tensor into the record. The leaf tracks gradients iff the
    /// tensor does.
    pub fn leaf(&mut self, tensor: &Tensor) -> Var {
        self.push(
            tensor.shape().to_vec(),
            tensor.values().to_vec(),
            Op::Leaf,
            tensor.is_tracked(),
        )
    }

    /// An untracked leaf.
    pub fn constant(&mut self, shape: &[usize], values: Vec<f64>) -> Result<Var, TensorError> {
        let numel = checked_numel(shape)?;
        if numel != values.len() {
            return Err(TensorError::LengthMismatch {
                shape: shape.to_vec(),
                values: values.len(),
            });
        }
        Ok(self.push(shape.to_vec(), values, Op::Leaf, false))
    }

    pub fn constant_vector(&mut self, values: Vec<f64>) -> Result<Var, TensorError> {
        let n = values.len();
        self.constant(&[n], values)
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let node = &self.nodes[a.0];
        let value = node.value.iter().map(|&x| f(x)).collect();
        let shape = node.shape.clone();
        let tracked = node.tracked;
        self.push(shape, value, op, tracked)
    }

    fn same_shape(&self, kernel: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                kernel,
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        Ok(())
    }

    fn binary(
        &mut self,
        kernel: &'static str,
        a: Var,
        b: Var,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var, TensorError> {
        self.same_shape(kernel, a, b)?;
        let value = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(shape, value, op, tracked))
    }

    /// `[k] x [k, n] -> [n]` or `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let sa = self.nodes[a.0].shape.clone();
        let sb = self.nodes[b.0].shape.clone();
        let mismatch = || TensorError::ShapeMismatch {
            kernel: "matmul",
            lhs: sa.clone(),
            rhs: sb.clone(),
        };
        if sb.len() != 2 {
            return Err(mismatch());
        }
        let (m, k) = match sa.len() {
            1 => (1, sa[0]),
            2 => (sa[0], sa[1]),
            _ => return Err(mismatch()),
        };
        if k != sb[0] {
            return Err(mismatch());
        }
        let n = sb[1];
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let x = av[i * k + p];
                if x == 0.0 {
                    continue;
                }
                for (o, &w) in row.iter_mut().zip(&bv[p * n..(p + 1) * n]) {
                    *o += x * w;
                }
            }
        }
        let shape = if sa.len() == 1 { vec![n] } else { vec![m, n] };
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(shape, out, Op::MatMul(a, b), tracked))
    }

    /// Adds a `[n]` bias to every row of `x` (whose last dimension is `n`).
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, TensorError> {
        let sx = &self.nodes[x.0].shape;
        let sb = &self.nodes[b.0].shape;
        if sb.len() != 1 || sx.is_empty() || sx[sx.len() - 1] != sb[0] {
            return Err(TensorError::ShapeMismatch {
                kernel: "add_bias",
                lhs: sx.clone(),
                rhs: sb.clone(),
            });
        }
        let n = sb[0];
        let bv = &self.nodes[b.0].value;
        let value = self.nodes[x.0]
            .value
            .iter()
            .enumerate()
            .map(|(i, &v)| v + bv[i % n])
            .collect();
        let shape = sx.clone();
        let tracked = self.tracked(&[x, b]);
        Ok(self.push(shape, value, Op::AddBias(x, b), tracked))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        self.unary(a, Op::Scale(a, factor), |x| x * factor)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    /// Concatenates one-dimensional vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::InvalidShape {
                kernel: "concat",
                expected: "at least one input",
                shape: Vec::new(),
            });
        }
        let mut value = Vec::new();
        for &p in parts {
            let node = &self.nodes[p.0];
            if node.shape.len() != 1 {
                return Err(TensorError::InvalidShape {
                    kernel: "concat",
                    expected: "one-dimensional inputs",
                    shape: node.shape.clone(),
                });
            }
            value.extend_from_slice(&node.value);
        }
        let shape = vec![value.len()];
        let tracked = self.tracked(parts);
        Ok(self.push(shape, value, Op::Concat(parts.to_vec()), tracked))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    /// Natural log; every input must be strictly positive.
    pub fn log(&mut self, a: Var) -> Result<Var, TensorError> {
        if let Some(&bad) = self.nodes[a.0].value.iter().find(|&&x| !(x > 0.0)) {
            return Err(TensorError::NonPositiveLog(bad));
        }
        Ok(self.unary(a, Op::Log(a), f64::ln))
    }

    fn require_vector(&self, kernel: &'static str, a: Var) -> Result<(), TensorError> {
        let shape = &self.nodes[a.0].shape;
        if shape.len() != 1 {
            return Err(TensorError::InvalidShape {
                kernel,
                expected: "a one-dimensional vector",
                shape: shape.clone(),
            });
        }
        Ok(())
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var, TensorError> {
        self.require_vector("softmax", a)?;
        let x = &self.nodes[a.0].value;
        let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let value = exps.into_iter().map(|e| e / total).collect();
        let shape = self.nodes[a.0].shape.clone();
        let tracked = self.nodes[a.0].tracked;
        Ok(self.push(shape, value, Op::Softmax(a), tracked))
    }

    /// Scales a vector to unit Euclidean norm. The zero vector is returned
    /// unchanged.
    pub fn l2_normalize(&mut self, a: Var) -> Result<Var, TensorError> {
        self.require_vector("l2_normalize", a)?;
        let x = &self.nodes[a.0].value;
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let value = if norm > 0.0 {
            x.iter().map(|v| v / norm).collect()
        } else {
            x.clone()
        };
        let shape = self.nodes[a.0].shape.clone();
        let tracked = self.nodes[a.0].tracked;
        Ok(self.push(shape, value, Op::L2Normalize(a, norm), tracked))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.nodes[a.0].value.iter().sum();
        let tracked = self.nodes[a.0].tracked;
        self.push(Vec::new(), vec![total], Op::Sum(a), tracked)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let node = &self.nodes[a.0];
        let total = node.value.iter().sum::<f64>() / node.value.len() as f64;
        let tracked = node.tracked;
        self.push(Vec::new(), vec![total], Op::Mean(a), tracked)
    }

    /// Row lookup into a `[rows, d]` table, producing a `[d]` vector.
    pub fn gather_row(&mut self, table: Var, row: usize) -> Result<Var, TensorError> {
        let shape = &self.nodes[table.0].shape;
        if shape.len() != 2 {
            return Err(TensorError::InvalidShape {
                kernel: "gather_row",
                expected: "a two-dimensional table",
                shape: shape.clone(),
            });
        }
        let (rows, d) = (shape[0], shape[1]);
        if row >= rows {
            return Err(TensorError::IndexOutOfRange {
                kernel: "gather_row",
                index: row,
                len: rows,
            });
        }
        let value = self.nodes[table.0].value[row * d..(row + 1) * d].to_vec();
        let tracked = self.nodes[table.0].tracked;
        Ok(self.push(vec![d], value, Op::GatherRow(table, row), tracked))
    }

    /// Elementwise Huber-style smooth L1: `0.5 x^2` inside `|x| < 1`, `|x| - 0.5` outside.
    pub fn smooth_l1(&mut self, a: Var) -> Var {
        self.unary(a, Op::SmoothL1(a), smooth_l1)
    }

    /// Smallest distance from any ReLU input to 0 or any smooth-L1 input to
    /// `|x| = 1`. Finite-difference checks are only meaningful when the
    /// perturbation step stays well below this.
    pub fn nearest_kink(&self) -> f64 {
        let mut best = f64::INFINITY;
        for node in &self.nodes {
            match node.op {
                Op::Relu(a) => {
                    for &x in &self.nodes[a.0].value {
                        best = best.min(x.abs());
                    }
                }
                Op::SmoothL1(a) => {
                    for &x in &self.nodes[a.0].value {
                        best = best.min((x.abs() - 1.0).abs());
                    }
                }
                _ => {}
            }
        }
        best
    }

    /// Reverse sweep from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let loss_node = &self.nodes[loss.0];
        if loss_node.value.len() != 1 {
            return Err(TensorError::NonScalarLoss(loss_node.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &dy, &mut grads);
            grads[idx] = Some(dy);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, dy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let nodes = &self.nodes;
        let mut send = |target: Var, delta: Vec<f64>| {
            if !nodes[target.0].tracked {
                return;
            }
            match &mut grads[target.0] {
                Some(g) => {
                    for (a, d) in g.iter_mut().zip(&delta) {
                        *a += d;
                    }
                }
                slot @ None => *slot = Some(delta),
            }
        };
        let val = |v: Var| nodes[v.0].value.as_slice();

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let sa = &nodes[a.0].shape;
                let (m, k) = if sa.len() == 1 { (1, sa[0]) } else { (sa[0], sa[1]) };
                let n = nodes[b.0].shape[1];
                let (av, bv) = (val(*a), val(*b));
                if nodes[a.0].tracked {
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            let brow = &bv[p * n..(p + 1) * n];
                            da[i * k + p] = dy[i * n..(i + 1) * n]
                                .iter()
                                .zip(brow)
                                .map(|(g, w)| g * w)
                                .sum();
                        }
                    }
                    send(*a, da);
                }
                if nodes[b.0].tracked {
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        let grow = &dy[i * n..(i + 1) * n];
                        for p in 0..k {
                            let x = av[i * k + p];
                            for (d, g) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *d += x * g;
                            }
                        }
                    }
                    send(*b, db);
                }
            }
            Op::AddBias(x, b) => {
                let n = nodes[b.0].shape[0];
                let mut db = vec![0.0; n];
                for (i, g) in dy.iter().enumerate() {
                    db[i % n] += g;
                }
                send(*x, dy.to_vec());
                send(*b, db);
            }
            Op::Add(a, b) => {
                send(*a, dy.to_vec());
                send(*b, dy.to_vec());
            }
            Op::Sub(a, b) => {
                send(*a, dy.to_vec());
                send(*b, dy.iter().map(|g| -g).collect());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                send(*a, dy.iter().zip(bv).map(|(g, y)| g * y).collect());
                send(*b, dy.iter().zip(av).map(|(g, x)| g * x).collect());
            }
            Op::Scale(a, factor) => send(*a, dy.iter().map(|g| g * factor).collect()),
            Op::AddScalar(a) => send(*a, dy.to_vec()),
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = nodes[p.0].value.len();
                    send(*p, dy[offset..offset + len].to_vec());
                    offset += len;
                }
            }
            Op::Relu(a) => send(
                *a,
                dy.iter()
                    .zip(val(*a))
                    .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                    .collect(),
            ),
            Op::Sigmoid(a) => send(
                *a,
                dy.iter()
                    .zip(&node.value)
                    .map(|(g, y)| g * y * (1.0 - y))
                    .collect(),
            ),
            Op::Tanh(a) => send(
                *a,
                dy.iter()
                    .zip(&node.value)
                    .map(|(g, y)| g * (1.0 - y * y))
                    .collect(),
            ),
            Op::Log(a) => send(*a, dy.iter().zip(val(*a)).map(|(g, x)| g / x).collect()),
            Op::Softmax(a) => {
                let y = &node.value;
                let dot: f64 = dy.iter().zip(y).map(|(g, y)| g * y).sum();
                send(*a, dy.iter().zip(y).map(|(g, y)| y * (g - dot)).collect());
            }
            Op::L2Normalize(a, norm) => {
                if *norm > 0.0 {
                    let y = &node.value;
                    let dot: f64 = dy.iter().zip(y).map(|(g, y)| g * y).sum();
                    send(
                        *a,
                        dy.iter().zip(y).map(|(g, y)| (g - y * dot) / norm).collect(),
                    );
                } else {
                    send(*a, vec![0.0; dy.len()]);
                }
            }
            Op::Sum(a) => send(*a, vec![dy[0]; nodes[a.0].value.len()]),
            Op::Mean(a) => {
                let n = nodes[a.0].value.len();
                send(*a, vec![dy[0] / n as f64; n]);
            }
            Op::GatherRow(table, row) => {
                let d = nodes[table.0].shape[1];
                let mut dt = vec![0.0; nodes[table.0].value.len()];
                dt[row * d..(row + 1) * d].copy_from_slice(dy);
                send(*table, dt);
            }
            Op::SmoothL1(a) => send(
                *a,
                dy.iter()
                    .zip(val(*a))
                    .map(|(g, &x)| g * smooth_l1_grad(x))
                    .collect(),
            ),
        }
    }
}
