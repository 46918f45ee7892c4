use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major float64 tensor. Every operation in this crate works on
/// rank-2 views; a rank-1 shape `[n]` is treated as a `1 x n` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape("tensor", &shape, &[data.len()]));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1, 1],
            data: vec![v],
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn row(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![1, data.len()],
            data,
        }
    }

    pub fn column(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len(), 1],
            data,
        }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::shape("from_rows", &[cols], &[bad.len()]));
        }
        Ok(Tensor {
            shape: vec![rows.len(), cols],
            data: rows.concat(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(rows, cols)` of the rank-2 view.
    pub fn dims(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [] => (1, 1),
            [n] => (1, *n),
            [r, c] => (*r, *c),
            more => {
                let c = *more.last().unwrap_or(&1);
                (self.data.len() / c.max(1), c)
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.dims().0
    }

    pub fn cols(&self) -> usize {
        self.dims().1
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        match self.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::Rank {
                op: "item",
                shape: self.shape.clone(),
            }),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transposed(&self) -> Tensor {
        let (r, c) = self.dims();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor {
            shape: vec![c, r],
            data,
        }
    }

    /// Plain matrix product, outside any tape.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (n, k) = self.dims();
        let (k2, m) = other.dims();
        if k != k2 {
            return Err(Error::shape("matmul", &self.shape, &other.shape));
        }
        let mut out = vec![0.0; n * m];
        matmul_into(&self.data, &other.data, &mut out, n, k, m);
        Ok(Tensor {
            shape: vec![n, m],
            data: out,
        })
    }
}

/// `out += a (n x k) * b (k x m)`.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out += a (n x k) * b^T` where `b` is `m x k`.
pub(crate) fn matmul_bt_into(a: &[f64], b: &[f64], out: &mut [f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..m {
            let brow = &b[j * k..(j + 1) * k];
            out[i * m + j] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `out += a^T * b` where `a` is `n x k` and `b` is `n x m`; `out` is `k x m`.
pub(crate) fn matmul_at_into(a: &[f64], b: &[f64], out: &mut [f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let brow = &b[i * m..(i + 1) * m];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}
