//! Dense f64 tensors, a recording tape with reverse-mode gradients, and Adam.
//!
//! Every op works on 2-D tensors; a vector is a `1 × n` matrix and a scalar
//! is `1 × 1`.

mod optim;
mod tape;

pub use optim::{Adam, ParamId, ParamStore, CHECKPOINT_VERSION};
pub use tape::{Bindings, Tape, Var};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape { op: &'static str, left: Vec<usize>, right: Vec<usize> },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor, TensorError> {
        if shape.iter().product::<usize>() != data.len() || shape.contains(&0) {
            return Err(TensorError::Usage(format!("shape {shape:?} does not hold {} values", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        assert_eq!(rows * cols, data.len(), "matrix {rows}x{cols} from {} values", data.len());
        Tensor { shape: vec![rows, cols], data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Tensor::matrix(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Tensor {
        Tensor::matrix(rows, cols, vec![value; rows * cols])
    }

    pub fn row(values: Vec<f64>) -> Tensor {
        let n = values.len();
        Tensor::matrix(1, n, values)
    }

    pub fn scalar(x: f64) -> Tensor {
        Tensor::matrix(1, 1, vec![x])
    }

    pub fn eye(n: usize) -> Tensor {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// `1 × n` indicator of `index`.
    pub fn one_hot(index: usize, n: usize) -> Tensor {
        let mut t = Tensor::zeros(1, n);
        t.data[index] = 1.0;
        t
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on shape {:?}", self.shape);
        self.data[0]
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::matrix(c, r, out)
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        if self.cols() != other.rows() {
            return Err(TensorError::Shape { op: "matmul", left: self.shape.clone(), right: other.shape.clone() });
        }
        let (r, k, c) = (self.rows(), self.cols(), other.cols());
        Ok(Tensor::matrix(r, c, gemm(&self.data, &other.data, r, k, c)))
    }
}

/// `a (r×k) · b (k×c)`.
pub(crate) fn gemm(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let row = &mut out[i * c..(i + 1) * c];
        for p in 0..k {
            let x = a[i * k + p];
            if x == 0.0 {
                continue;
            }
            for (o, &y) in row.iter_mut().zip(&b[p * c..(p + 1) * c]) {
                *o += x * y;
            }
        }
    }
    out
}

/// `a (r×k) · bᵀ` where `b` is `c×k`.
pub(crate) fn gemm_bt(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..c {
            out[i * c + j] = ar.iter().zip(&b[j * k..(j + 1) * k]).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// `aᵀ · b` where `a` is `k×r` and `b` is `k×c`.
pub(crate) fn gemm_at(a: &[f64], b: &[f64], k: usize, r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for p in 0..k {
        let br = &b[p * c..(p + 1) * c];
        for i in 0..r {
            let x = a[p * r + i];
            if x == 0.0 {
                continue;
            }
            for (o, &y) in out[i * c..(i + 1) * c].iter_mut().zip(br) {
                *o += x * y;
            }
        }
    }
    out
}

/// Row-wise softmax of a `rows × cols` buffer, max-shifted.
pub fn softmax_rows(data: &[f64], cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(data.len());
    for row in data.chunks(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / sum));
    }
    out
}
