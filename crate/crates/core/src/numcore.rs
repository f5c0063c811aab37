//! Dense numeric kernels shared by every stage of the pipeline.
//!
//! Everything here is deterministic: fixed accumulation order, no fused or
//! reordered reductions, so a seeded run reproduces bit-for-bit. Kernels are
//! generic over [`Scalar`] so the same code runs in f64 for tests and
//! gradient checks and in f32 for training.

use std::fmt;

use thiserror::Error;

/// Element type for all dense math. f64 is the test/gradient-check mode,
/// f32 the training mode.
pub trait Scalar:
    num_traits::Float + fmt::Debug + fmt::Display + Default + Send + Sync + 'static
{
    /// Tag stored in checkpoints so a file cannot be loaded at the wrong width.
    const PRECISION: &'static str;
    /// Bytes per element in the checkpoint blob section.
    const WIDTH: usize;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const PRECISION: &'static str = "f32";
    const WIDTH: usize = 4;

    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

impl Scalar for f64 {
    const PRECISION: &'static str = "f64";
    const WIDTH: usize = 8;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes([
            bytes[0], bytes[1], bytes[2], bytes[3], bytes[4], bytes[5], bytes[6], bytes[7],
        ])
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum NumError {
    #[error("{op}: dimension mismatch, lhs is {lhs_rows}x{lhs_cols}, rhs is {rhs_rows}x{rhs_cols}")]
    DimensionMismatch {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },
    #[error("{op}: vectors have lengths {lhs} and {rhs}")]
    LengthMismatch {
        op: &'static str,
        lhs: usize,
        rhs: usize,
    },
    #[error("matrix data length {len} does not match shape {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, len: usize },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("{0}")]
    Invalid(String),
}

/// Row-major dense matrix. Public constructors and kernels uphold the
/// all-entries-finite invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, NumError> {
        if data.len() != rows * cols {
            return Err(NumError::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        let m = Matrix { rows, cols, data };
        m.check_finite("from_vec")?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, NumError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(NumError::BadShape {
                    rows: r,
                    cols: c,
                    len: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn check_finite(&self, op: &'static str) -> Result<(), NumError> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(NumError::NonFinite(op))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Standard product with deterministic accumulation: each output entry
    /// sums over k in ascending order.
    pub fn matmul(&self, rhs: &Matrix<T>) -> Result<Matrix<T>, NumError> {
        if self.cols != rhs.rows {
            return Err(NumError::DimensionMismatch {
                op: "matmul",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: rhs.rows,
                rhs_cols: rhs.cols,
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let lhs_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a) in lhs_row.iter().enumerate() {
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o = *o + a * b;
                }
            }
        }
        out.check_finite("matmul")?;
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn add(&self, rhs: &Matrix<T>) -> Result<Matrix<T>, NumError> {
        if self.shape() != rhs.shape() {
            return Err(NumError::DimensionMismatch {
                op: "add",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: rhs.rows,
                rhs_cols: rhs.cols,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn sub(&self, rhs: &Matrix<T>) -> Result<Matrix<T>, NumError> {
        if self.shape() != rhs.shape() {
            return Err(NumError::DimensionMismatch {
                op: "sub",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: rhs.rows,
                rhs_cols: rhs.cols,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, c: T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * c).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Widen or narrow the element type. Lossy when narrowing to f32.
    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }
}

/// Row-wise softmax with max-subtraction. Rows of the result sum to 1.
pub fn softmax_rows<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        softmax_slice(m.row(i), out.row_mut(i));
    }
    out
}

/// Softmax of one row into `out`. Split out so masked attention can reuse it.
pub(crate) fn softmax_slice<T: Scalar>(row: &[T], out: &mut [T]) {
    if row.is_empty() {
        return;
    }
    let mut max = row[0];
    for &v in &row[1..] {
        if v > max {
            max = v;
        }
    }
    let mut sum = T::zero();
    for (o, &v) in out.iter_mut().zip(row) {
        let e = (v - max).exp();
        *o = e;
        sum = sum + e;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

/// Cosine similarity; 0 when either vector's norm is below 1e-12.
pub fn cosine_sim<T: Scalar>(u: &[T], v: &[T]) -> Result<T, NumError> {
    if u.len() != v.len() {
        return Err(NumError::LengthMismatch {
            op: "cosine_sim",
            lhs: u.len(),
            rhs: v.len(),
        });
    }
    let mut dot = T::zero();
    let mut nu = T::zero();
    let mut nv = T::zero();
    for (&a, &b) in u.iter().zip(v) {
        dot = dot + a * b;
        nu = nu + a * a;
        nv = nv + b * b;
    }
    let nu = nu.sqrt();
    let nv = nv.sqrt();
    let floor = T::from_f64(1e-12);
    if nu < floor || nv < floor {
        return Ok(T::zero());
    }
    Ok(dot / (nu * nv))
}

/// Learning-rate group a parameter belongs to. GCN weights train faster
/// than the rest of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LrGroup {
    Gcn,
    Backbone,
}

/// One trainable tensor: value plus a same-shape gradient slot.
#[derive(Clone, Debug)]
pub struct ParamTensor<T> {
    pub name: String,
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
    pub lr_group: LrGroup,
}

impl<T: Scalar> ParamTensor<T> {
    pub fn new(name: impl Into<String>, value: Matrix<T>, lr_group: LrGroup) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        ParamTensor {
            name: name.into(),
            value,
            grad,
            lr_group,
        }
    }

    pub fn zero_grad(&mut self) {
        for g in self.grad.data_mut() {
            *g = T::zero();
        }
    }
}

/// Central-difference gradients of `f` with respect to every entry of every
/// tensor: (f(θ+ε) − f(θ−ε)) / 2ε. Tensors are restored to their original
/// values before returning.
pub fn finite_diff_grad<T, F>(
    tensors: &mut [ParamTensor<T>],
    epsilon: T,
    mut f: F,
) -> Result<Vec<Matrix<T>>, NumError>
where
    T: Scalar,
    F: FnMut(&[ParamTensor<T>]) -> Result<T, NumError>,
{
    if epsilon <= T::zero() {
        return Err(NumError::Invalid("epsilon must be positive".into()));
    }
    let mut grads = Vec::with_capacity(tensors.len());
    for t in 0..tensors.len() {
        let (rows, cols) = tensors[t].value.shape();
        let mut g = Matrix::zeros(rows, cols);
        for idx in 0..rows * cols {
            let original = tensors[t].value.data()[idx];
            tensors[t].value.data_mut()[idx] = original + epsilon;
            let plus = f(tensors)?;
            tensors[t].value.data_mut()[idx] = original - epsilon;
            let minus = f(tensors)?;
            tensors[t].value.data_mut()[idx] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(NumError::NonFinite("finite_diff_grad evaluation"));
            }
            g.data_mut()[idx] = (plus - minus) / (epsilon + epsilon);
        }
        grads.push(g);
    }
    Ok(grads)
}

/// Relative error used by all gradient checks. The 1e-6 floor keeps
/// finite-difference round-off on near-zero gradients from registering
/// as disagreement.
pub fn rel_err<T: Scalar>(a: T, b: T) -> f64 {
    let a = a.to_f64();
    let b = b.to_f64();
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}
