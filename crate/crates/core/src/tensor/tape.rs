use super::{gemm_at, gemm_bt, softmax_rows, ParamStore, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Relu(Var),
    Tanh(Var),
    SoftmaxRows(Var),
    Sum(Var),
    Reshape(Var),
    Transpose(Var),
    Pick(Var, usize),
    Ln(Var, f64),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// Records forward ops so `backward` can replay them in reverse.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Tape variables of every parameter in a store, indexed by `ParamId`.
#[derive(Debug, Clone)]
pub struct Bindings(pub Vec<Var>);

impl Bindings {
    pub fn get(&self, id: super::ParamId) -> Var {
        self.0[id.0]
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::Shape { op, left: a.shape.clone(), right: b.shape.clone() }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    /// A constant.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { value: t, op: Op::Leaf, requires_grad: false, grad: None });
        Var(self.nodes.len() - 1)
    }

    /// A leaf whose gradient `backward` computes.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { value: t, op: Op::Leaf, requires_grad: true, grad: None });
        Var(self.nodes.len() - 1)
    }

    /// Records every parameter of `store` as a variable.
    pub fn bind(&mut self, store: &ParamStore) -> Bindings {
        Bindings(store.tensors().map(|t| self.variable(t.clone())).collect())
    }

    /// Records every parameter of `store` as a constant, for inference.
    pub fn bind_constants(&mut self, store: &ParamStore) -> Bindings {
        Bindings(store.tensors().map(|t| self.constant(t.clone())).collect())
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` loss with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let n = &self.nodes[v.0];
        n.grad.as_ref().map(|g| Tensor { shape: n.value.shape.clone(), data: g.clone() })
    }

    /// Gradients of every bound parameter, in `ParamId` order.
    pub fn grads(&self, b: &Bindings) -> Vec<Option<Tensor>> {
        b.0.iter().map(|&v| self.grad(v)).collect()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape != y.shape {
            return Err(shape_err("add", x, y));
        }
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p + q).collect();
        let out = Tensor { shape: x.shape.clone(), data };
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    /// Adds the `1 × c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if y.rows() != 1 || x.cols() != y.cols() {
            return Err(shape_err("add_row", x, y));
        }
        let c = x.cols();
        let data = x.data.iter().enumerate().map(|(i, p)| p + y.data[i % c]).collect();
        let out = Tensor::matrix(x.rows(), c, data);
        Ok(self.push(out, Op::AddRow(a, b), &[a, b]))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape != y.shape {
            return Err(shape_err("mul", x, y));
        }
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect();
        let out = Tensor { shape: x.shape.clone(), data };
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let x = self.value(a);
        let out = Tensor { shape: x.shape.clone(), data: x.data.iter().map(|v| v * s).collect() };
        self.push(out, Op::Scale(a, s), &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = self.value(parts[0]);
        let rows = first.rows();
        if let Some(bad) = parts.iter().map(|&p| self.value(p)).find(|t| t.rows() != rows) {
            return Err(shape_err("concat_cols", first, bad));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        Ok(self.push(Tensor::matrix(rows, cols, data), Op::ConcatCols(parts.to_vec()), parts))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = self.value(parts[0]);
        let cols = first.cols();
        if let Some(bad) = parts.iter().map(|&p| self.value(p)).find(|t| t.cols() != cols) {
            return Err(shape_err("concat_rows", first, bad));
        }
        let data: Vec<f64> = parts.iter().flat_map(|&p| self.value(p).data.iter().copied()).collect();
        let rows = data.len() / cols;
        Ok(self.push(Tensor::matrix(rows, cols, data), Op::ConcatRows(parts.to_vec()), parts))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor { shape: x.shape.clone(), data: x.data.iter().map(|v| v.max(0.0)).collect() };
        self.push(out, Op::Relu(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor { shape: x.shape.clone(), data: x.data.iter().map(|v| v.tanh()).collect() };
        self.push(out, Op::Tanh(a), &[a])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor { shape: x.shape.clone(), data: softmax_rows(&x.data, x.cols()) };
        self.push(out, Op::SoftmaxRows(a), &[a])
    }

    /// Sum of all entries, as a `1 × 1`.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    /// Mean of all entries, as a `1 × 1`.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, TensorError> {
        let x = self.value(a);
        if rows * cols != x.len() {
            return Err(TensorError::Shape { op: "reshape", left: x.shape.clone(), right: vec![rows, cols] });
        }
        let out = Tensor::matrix(rows, cols, x.data.clone());
        Ok(self.push(out, Op::Reshape(a), &[a]))
    }

    /// Row-major flatten to `1 × n`.
    pub fn flatten(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        self.reshape(a, 1, n).expect("same element count")
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a), &[a])
    }

    /// Entry `index` of the row-major data, as a `1 × 1`.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var, TensorError> {
        let x = self.value(a);
        if index >= x.len() {
            return Err(TensorError::Usage(format!("pick index {index} outside shape {:?}", x.shape)));
        }
        let out = Tensor::scalar(x.data[index]);
        Ok(self.push(out, Op::Pick(a, index), &[a]))
    }

    /// `ln(max(x, floor))`; the gradient is zero where the floor applies.
    pub fn ln(&mut self, a: Var, floor: f64) -> Var {
        let x = self.value(a);
        let out = Tensor { shape: x.shape.clone(), data: x.data.iter().map(|v| v.max(floor).ln()).collect() };
        self.push(out, Op::Ln(a, floor), &[a])
    }

    /// Populates gradients of every variable the scalar `loss` depends on.
    /// Earlier gradients are discarded.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if self.value(loss).len() != 1 {
            return Err(TensorError::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape
            )));
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else { continue };
            let op = self.nodes[i].op.clone();
            self.propagate(i, &op, &g);
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, delta: impl IntoIterator<Item = f64>) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(g) => g.iter_mut().zip(delta).for_each(|(a, d)| *a += d),
            None => node.grad = Some(delta.into_iter().collect()),
        }
    }

    fn propagate(&mut self, i: usize, op: &Op, g: &[f64]) {
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (x, y) = (self.value(a), self.value(b));
                let (r, k, c) = (x.rows(), x.cols(), y.cols());
                let da = self.nodes[a.0].requires_grad.then(|| gemm_bt(g, &y.data, r, c, k));
                let db = self.nodes[b.0].requires_grad.then(|| gemm_at(&x.data, g, r, k, c));
                if let Some(d) = da {
                    self.accumulate(a, d);
                }
                if let Some(d) = db {
                    self.accumulate(b, d);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(a, g.iter().copied());
                self.accumulate(b, g.iter().copied());
            }
            Op::AddRow(a, b) => {
                self.accumulate(a, g.iter().copied());
                let c = self.value(b).cols();
                let mut db = vec![0.0; c];
                for (j, v) in g.iter().enumerate() {
                    db[j % c] += v;
                }
                self.accumulate(b, db);
            }
            Op::Mul(a, b) => {
                let da: Vec<f64> = g.iter().zip(&self.value(b).data).map(|(g, y)| g * y).collect();
                let db: Vec<f64> = g.iter().zip(&self.value(a).data).map(|(g, x)| g * x).collect();
                self.accumulate(a, da);
                self.accumulate(b, db);
            }
            Op::Scale(a, s) => self.accumulate(a, g.iter().map(|v| v * s)),
            Op::ConcatCols(ref parts) => {
                let rows = self.nodes[i].value.rows();
                let total = self.nodes[i].value.cols();
                let mut offset = 0;
                for &p in parts {
                    let c = self.value(p).cols();
                    let d: Vec<f64> =
                        (0..rows).flat_map(|r| g[r * total + offset..r * total + offset + c].iter().copied()).collect();
                    self.accumulate(p, d);
                    offset += c;
                }
            }
            Op::ConcatRows(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    self.accumulate(p, g[offset..offset + n].iter().copied());
                    offset += n;
                }
            }
            Op::Relu(a) => {
                let d: Vec<f64> = g.iter().zip(&self.value(a).data).map(|(g, x)| if *x > 0.0 { *g } else { 0.0 }).collect();
                self.accumulate(a, d);
            }
            Op::Tanh(a) => {
                let d: Vec<f64> = g.iter().zip(&self.nodes[i].value.data).map(|(g, y)| g * (1.0 - y * y)).collect();
                self.accumulate(a, d);
            }
            Op::SoftmaxRows(a) => {
                let y = &self.nodes[i].value;
                let c = y.cols();
                let mut d = Vec::with_capacity(g.len());
                for (gr, yr) in g.chunks(c).zip(y.data.chunks(c)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(g, y)| g * y).sum();
                    d.extend(gr.iter().zip(yr).map(|(g, y)| y * (g - dot)));
                }
                self.accumulate(a, d);
            }
            Op::Sum(a) => {
                let n = self.value(a).len();
                self.accumulate(a, std::iter::repeat_n(g[0], n));
            }
            Op::Reshape(a) => self.accumulate(a, g.iter().copied()),
            Op::Transpose(a) => {
                let (r, c) = (self.nodes[i].value.rows(), self.nodes[i].value.cols());
                let gt = Tensor::matrix(r, c, g.to_vec()).transpose();
                self.accumulate(a, gt.data);
            }
            Op::Pick(a, index) => {
                let mut d = vec![0.0; self.value(a).len()];
                d[index] = g[0];
                self.accumulate(a, d);
            }
            Op::Ln(a, floor) => {
                let d: Vec<f64> =
                    g.iter().zip(&self.value(a).data).map(|(g, x)| if *x > floor { g / x } else { 0.0 }).collect();
                self.accumulate(a, d);
            }
        }
    }
}
