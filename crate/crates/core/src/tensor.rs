//! Dense complex tensors and the small-matrix kernels built on them.
//!
//! Tensors are stored row-major: the last axis varies fastest. The
//! linearization is part of the serialized format.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const SYMMETRIC_TOL: f64 = 1e-12;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::ShapeMismatch(format!("zero extent in shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite tensor entry".into()));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        DenseTensor {
            shape,
            data: vec![C64::new(0.0, 0.0); len],
        }
    }

    pub fn scalar(value: C64) -> Self {
        DenseTensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn from_matrix(m: &CMatrix) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        DenseTensor {
            shape: vec![r, c],
            data,
        }
    }

    /// Reads a rank-2 tensor as a matrix.
    pub fn to_matrix(&self) -> Result<CMatrix> {
        match self.shape[..] {
            [r, c] => Ok(CMatrix::from_row_slice(r, c, &self.data)),
            _ => Err(Error::ShapeMismatch(format!(
                "expected a matrix, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.shape)
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        self.data[linear_index(&self.shape, index)]
    }

    pub fn set(&mut self, index: &[usize], value: C64) {
        let i = linear_index(&self.shape, index);
        self.data[i] = value;
    }

    pub fn conj(&self) -> Self {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `self + factor * other` for equal shapes.
    pub fn axpy(&self, factor: C64, other: &DenseTensor) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + factor * b)
                .collect(),
        })
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        DenseTensor::new(shape, self.data.clone())
    }

    /// Reorders axes: axis `k` of the result is axis `axes[k]` of `self`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::ShapeMismatch(format!(
                "{axes:?} is not a permutation of 0..{rank}"
            )));
        }
        if axes.iter().enumerate().all(|(i, &a)| i == a) {
            return Ok(self.clone());
        }
        let in_strides = self.strides();
        let new_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; rank];
        let mut offset = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[offset]);
            // odometer increment over the output index
            for k in (0..rank).rev() {
                idx[k] += 1;
                offset += src_strides[k];
                if idx[k] < new_shape[k] {
                    break;
                }
                offset -= src_strides[k] * new_shape[k];
                idx[k] = 0;
            }
        }
        Ok(DenseTensor {
            shape: new_shape,
            data,
        })
    }

    /// Multiplies one axis by a matrix: `out[.., j, ..] = sum_i self[.., i, ..] * m[i, j]`.
    pub fn contract_axis_matrix(&self, axis: usize, m: &CMatrix) -> Result<Self> {
        if axis >= self.rank() || m.nrows() != self.shape[axis] {
            return Err(Error::ShapeMismatch(format!(
                "cannot apply {}x{} matrix to axis {axis} of {:?}",
                m.nrows(),
                m.ncols(),
                self.shape
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let (n_in, n_out) = (m.nrows(), m.ncols());
        let mut shape = self.shape.clone();
        shape[axis] = n_out;
        let mut data = vec![C64::new(0.0, 0.0); outer * n_out * inner];
        for o in 0..outer {
            for i in 0..n_in {
                let src = &self.data[(o * n_in + i) * inner..(o * n_in + i + 1) * inner];
                for j in 0..n_out {
                    let w = m[(i, j)];
                    if w == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let dst = &mut data[(o * n_out + j) * inner..(o * n_out + j + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s * w;
                    }
                }
            }
        }
        Ok(DenseTensor { shape, data })
    }
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

fn linear_index(shape: &[usize], index: &[usize]) -> usize {
    assert_eq!(shape.len(), index.len(), "index rank mismatch");
    index.iter().zip(shape).fold(0, |acc, (&i, &s)| {
        assert!(i < s, "index out of bounds");
        acc * s + i
    })
}

/// Sums over the paired axes `(axis of a, axis of b)`. The result carries the
/// unpaired axes of `a` followed by the unpaired axes of `b`, each in their
/// original order.
pub fn contract(a: &DenseTensor, b: &DenseTensor, axis_pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    let mut paired_a = vec![false; a.rank()];
    let mut paired_b = vec![false; b.rank()];
    for &(i, j) in axis_pairs {
        if i >= a.rank() || j >= b.rank() {
            return Err(Error::ShapeMismatch(format!("axis pair ({i}, {j}) out of range")));
        }
        if paired_a[i] || paired_b[j] {
            return Err(Error::ShapeMismatch(format!("axis pair ({i}, {j}) repeats an axis")));
        }
        if a.shape[i] != b.shape[j] {
            return Err(Error::ShapeMismatch(format!(
                "paired extents differ: {} vs {}",
                a.shape[i], b.shape[j]
            )));
        }
        paired_a[i] = true;
        paired_b[j] = true;
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&i| !paired_a[i]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&j| !paired_b[j]).collect();

    let perm_a: Vec<usize> = free_a.iter().copied().chain(axis_pairs.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = axis_pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let at = a.permute(&perm_a)?;
    let bt = b.permute(&perm_b)?;

    let rows: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let inner: usize = axis_pairs.iter().map(|p| a.shape[p.0]).product();
    let cols: usize = free_b.iter().map(|&j| b.shape[j]).product();

    let mut out = vec![C64::new(0.0, 0.0); rows * cols];
    for i in 0..rows {
        let row = &mut out[i * cols..(i + 1) * cols];
        for k in 0..inner {
            let x = at.data[i * inner + k];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            let brow = &bt.data[k * cols..(k + 1) * cols];
            for (o, y) in row.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
    let shape: Vec<usize> = free_a
        .iter()
        .map(|&i| a.shape[i])
        .chain(free_b.iter().map(|&j| b.shape[j]))
        .collect();
    Ok(DenseTensor { shape, data: out })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorJson {
    pub shape: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&DenseTensor> for TensorJson {
    fn from(t: &DenseTensor) -> Self {
        TensorJson {
            shape: t.shape.clone(),
            re: t.data.iter().map(|z| z.re).collect(),
            im: t.data.iter().map(|z| z.im).collect(),
        }
    }
}

impl TryFrom<&TensorJson> for DenseTensor {
    type Error = Error;

    fn try_from(j: &TensorJson) -> Result<Self> {
        if j.re.len() != j.im.len() {
            return Err(Error::ShapeMismatch("re/im length mismatch".into()));
        }
        let data = j.re.iter().zip(&j.im).map(|(&r, &i)| C64::new(r, i)).collect();
        DenseTensor::new(j.shape.clone(), data)
    }
}

impl Serialize for DenseTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseTensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = TensorJson::deserialize(d)?;
        DenseTensor::try_from(&j).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// matrix kernels

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigendecomposition `m = V diag(λ) V†` of a Hermitian matrix, eigenvalues
/// ascending.
pub fn hermitian_eig(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(dev));
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eig(m)?.0)
}

/// Finds a square `A` with `A Aᵀ = m` for complex symmetric `m` (plain
/// transpose, no conjugation).
///
/// Real `m`: `A = V Λ^{1/2}` from `m = V Λ Vᵀ`, using principal complex
/// square roots so negative eigenvalues give imaginary columns.
/// Complex `m`: Takagi factorization read off the real symmetric embedding
/// `[[Re m, Im m], [Im m, -Re m]]`, whose eigenpairs `σ ≥ 0, (x, y)` give
/// `m = Σ σ u uᵀ` with `u = x + i y`.
pub fn symmetric_factor(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = (m - m.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > SYMMETRIC_TOL * scale {
        return Err(Error::NotSymmetric(dev));
    }
    let n = m.nrows();
    let is_real = m.iter().all(|z| z.im.abs() <= SYMMETRIC_TOL * scale);
    if is_real {
        let re = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)].re + m[(j, i)].re));
        let eig = re.symmetric_eigen();
        return Ok(CMatrix::from_fn(n, n, |i, j| {
            C64::new(eig.eigenvalues[j], 0.0).sqrt() * eig.eigenvectors[(i, j)]
        }));
    }
    let emb = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, bj) = (i / n, j / n);
        let z = 0.5 * (m[(i % n, j % n)] + m[(j % n, i % n)]);
        match (bi, bj) {
            (0, 0) => z.re,
            (1, 1) => -z.re,
            _ => z.im,
        }
    });
    let eig = emb.symmetric_eigen();
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut a = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().take(n).enumerate() {
        let sigma = eig.eigenvalues[k].max(0.0);
        let root = sigma.sqrt();
        for i in 0..n {
            a[(i, col)] = C64::new(eig.eigenvectors[(i, k)], eig.eigenvectors[(i + n, k)]) * root;
        }
    }
    Ok(a)
}

/// Kronecker product with `a` as the left (slow) factor.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(0., -1.), c64(0., 1.), c64(0., 0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64(-1., 0.)])
}
