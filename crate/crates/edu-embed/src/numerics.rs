//! Dense vector/matrix primitives and numerically stable kernels.
//!
//! Everything here is plain `f64` with brute-force dense loops; the corpora
//! this crate targets are small enough that exactness beats cleverness.

use crate::error::{Error, Result};

/// Norms at or below this threshold are treated as degenerate rather than
/// silently normalized to zero.
pub const EPS_NORM: f64 = 1e-12;

/// A dense real vector. Constructors reject non-finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite entry at index {i}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has length {} but row 0 has length {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// `self (m x k) * otherᵀ (n x k) -> m x n`.
    pub fn matmul_nt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "matmul_nt: inner dims {} vs {}",
                self.cols, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                let b = other.row(j);
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += a[k] * b[k];
                }
                out.row_mut(i)[j] = acc;
            }
        }
        Ok(out)
    }

    /// `self (m x k) * other (k x n) -> m x n`.
    pub fn matmul_nn(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "matmul_nn: inner dims {} vs {}",
                self.cols, other.rows
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            for (k, &aik) in a.iter().enumerate() {
                let b = other.row(k);
                let o = out.row_mut(i);
                for j in 0..other.cols {
                    o[j] += aik * b[j];
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ (k x m) * other (k x n) -> m x n`.
    pub fn matmul_tn(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Dimension(format!(
                "matmul_tn: inner dims {} vs {}",
                self.rows, other.rows
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a = self.row(k);
            let b = other.row(k);
            for (i, &aki) in a.iter().enumerate() {
                let o = out.row_mut(i);
                for j in 0..other.cols {
                    o[j] += aki * b[j];
                }
            }
        }
        Ok(out)
    }
}

/// Inner product of two equal-length slices.
pub fn dot(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!(
            "dot: lengths {} vs {}",
            u.len(),
            v.len()
        )));
    }
    Ok(u.iter().zip(v).map(|(a, b)| a * b).sum())
}

/// Euclidean norm.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scale `v` to unit norm. Norms at or below [`EPS_NORM`] are rejected.
pub fn l2_normalize(v: &[f64]) -> Result<Vector> {
    let norm = l2_norm(v);
    if norm <= EPS_NORM {
        return Err(Error::Degenerate(format!("norm {norm:e} below threshold")));
    }
    Vector::new(v.iter().map(|x| x / norm).collect())
}

/// Cosine similarity, clamped to `[-1, 1]` against rounding.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu <= EPS_NORM || nv <= EPS_NORM {
        return Err(Error::Degenerate(
            "cosine_similarity requires nondegenerate inputs".into(),
        ));
    }
    let c = dot(u, v)? / (nu * nv);
    Ok(c.clamp(-1.0, 1.0))
}

/// Mean softmax cross-entropy over rows of a score matrix, with the exact
/// gradient with respect to every score.
///
/// Row maxima are subtracted before exponentiation, which is stable for all
/// score magnitudes this crate produces.
pub fn softmax_cross_entropy_rows(scores: &Matrix, targets: &[usize]) -> Result<(f64, Matrix)> {
    if targets.len() != scores.rows() {
        return Err(Error::Dimension(format!(
            "targets length {} vs {} rows",
            targets.len(),
            scores.rows()
        )));
    }
    if let Some((i, &t)) = targets.iter().enumerate().find(|(_, &t)| t >= scores.cols()) {
        return Err(Error::Dimension(format!(
            "target {t} at row {i} exceeds {} columns",
            scores.cols()
        )));
    }

    let rows = scores.rows();
    let cols = scores.cols();
    let inv_rows = 1.0 / rows as f64;
    let mut grad = Matrix::zeros(rows, cols);
    let mut loss = 0.0;
    for i in 0..rows {
        let row = scores.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &s in row {
            sum += (s - max).exp();
        }
        let log_sum = sum.ln() + max;
        loss += log_sum - row[targets[i]];

        let g = grad.row_mut(i);
        for (j, &s) in row.iter().enumerate() {
            g[j] = (s - max).exp() / sum * inv_rows;
        }
        g[targets[i]] -= inv_rows;
    }
    Ok((loss * inv_rows, grad))
}

/// Central-difference gradient of `f` at `x` with step `h`.
///
/// This is the oracle every analytic gradient in the crate is checked
/// against; it stays independent of those implementations by construction.
pub fn finite_difference_grad<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(Error::Range(format!("step size {h} must be positive")));
    }
    let mut point = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = point[i];
        point[i] = orig + h;
        let plus = f(&point)?;
        point[i] = orig - h;
        let minus = f(&point)?;
        point[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite evaluation while differencing coordinate {i}"
            )));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}
