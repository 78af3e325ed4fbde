//! Dense point sets, incrementally orthonormalized spans of selected points,
//! and the `l_p` subspace error `err_p(X, V) = sum_i d(x_i, V)^p`.
//!
//! Spans are maintained with modified Gram-Schmidt plus one
//! re-orthogonalization pass per insertion. The span of the empty subset is
//! `{0}`, so distances to it are plain Euclidean norms.

use crate::error::{Error, Result};

/// Relative residual (against the point norm) below which an inserted point is
/// treated as lying inside the current span.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A finite set of `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,
    dim: usize,
}

impl PointSet {
    /// Builds a point set from rows; all rows must share one dimension.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::input("point set must contain at least one point"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::input(format!(
                    "point {i} has dimension {}, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(dim, data)
    }

    /// Builds a point set from a row-major buffer of `n * dim` coordinates.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("dimension must be at least 1"));
        }
        if data.is_empty() {
            return Err(Error::input("point set must contain at least one point"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::input(format!(
                "buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite coordinate in point {} (column {})",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    /// Always false; a point set holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn get(&self, index: usize) -> Option<&[f64]> {
        (index < self.len()).then(|| self.point(index))
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Row-major coordinate buffer.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// Admissible `(p, k)` pair for an `l_p` subspace approximation problem in `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrParams {
    pub p: f64,
    pub k: usize,
}

impl ErrParams {
    pub fn new(p: f64, k: usize, dim: usize) -> Result<Self> {
        check_exponent(p)?;
        if k == 0 || k > dim {
            return Err(Error::param(format!("k = {k} must lie in [1, {dim}]")));
        }
        Ok(Self { p, k })
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("exponent p = {p} must lie in [1, inf)")))
    }
}

/// `dist^p`, with exact fast paths for the common exponents.
#[inline]
pub fn pow_p(dist: f64, p: f64) -> f64 {
    if p == 1.0 {
        dist
    } else if p == 2.0 {
        dist * dist
    } else {
        dist.powf(p)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// A selected subset `S` together with an orthonormal basis of `span(S)`.
///
/// Values are immutable; [`SubsetBasis::extend_basis`] returns a new basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetBasis {
    members: Vec<usize>,
    // rank * dim, row-major; row j is the j-th orthonormal direction
    basis: Vec<f64>,
    dim: usize,
}

impl SubsetBasis {
    /// The empty subset; its span is `{0}`.
    pub fn empty(dim: usize) -> Self {
        Self {
            members: Vec::new(),
            basis: Vec::new(),
            dim,
        }
    }

    /// Spans the listed points of `x`, in order. Repeated indices are kept.
    pub fn from_indices(x: &PointSet, indices: &[usize]) -> Result<Self> {
        let mut out = Self::empty(x.dim());
        for &i in indices {
            let point = x
                .get(i)
                .ok_or_else(|| Error::input(format!("index {i} out of range for n = {}", x.len())))?;
            out.push(i, point)?;
        }
        Ok(out)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn rank(&self) -> usize {
        self.basis.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.contains(&index)
    }

    pub fn basis_vectors(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.basis.chunks_exact(self.dim)
    }

    /// Appends `x[point_index]` to the subset.
    pub fn extend_basis(&self, point_index: usize, x: &PointSet) -> Result<Self> {
        let point = x.get(point_index).ok_or_else(|| {
            Error::input(format!("index {point_index} out of range for n = {}", x.len()))
        })?;
        self.with_point(point_index, point)
    }

    /// Appends a point known only by value (as in a streamed sample) under `index`.
    pub fn with_point(&self, index: usize, point: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.push(index, point)?;
        Ok(out)
    }

    pub(crate) fn push(&mut self, index: usize, point: &[f64]) -> Result<()> {
        self.check_dim(point)?;
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("point {index} has non-finite coordinates")));
        }
        self.members.push(index);
        let scale = norm(point);
        if scale == 0.0 {
            return Ok(());
        }
        let mut residual = point.to_vec();
        // second sweep restores orthogonality lost to cancellation
        for _ in 0..2 {
            self.project_out(&mut residual);
        }
        let len = norm(&residual);
        if len > RANK_TOLERANCE * scale && self.rank() < self.dim {
            self.basis.extend(residual.iter().map(|v| v / len));
        }
        Ok(())
    }

    fn project_out(&self, v: &mut [f64]) {
        for b in self.basis.chunks_exact(self.dim) {
            let c = dot(v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dim {
            Ok(())
        } else {
            Err(Error::input(format!(
                "vector has dimension {}, basis lives in R^{}",
                x.len(),
                self.dim
            )))
        }
    }

    /// Euclidean distance from `x` to the span of the subset.
    ///
    /// Residuals at or below `RANK_TOLERANCE * |x|` are reported as exactly 0,
    /// so every member point is at distance 0 from its own span.
    pub fn dist_to_span(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.dist_unchecked(x))
    }

    pub(crate) fn dist_unchecked(&self, x: &[f64]) -> f64 {
        let scale = norm(x);
        if self.basis.is_empty() || scale == 0.0 {
            return scale;
        }
        let mut residual = x.to_vec();
        self.project_out(&mut residual);
        let len = norm(&residual);
        if len <= RANK_TOLERANCE * scale {
            0.0
        } else {
            len
        }
    }

    /// Largest absolute deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let rows: Vec<&[f64]> = self.basis_vectors().collect();
        let mut worst = 0.0_f64;
        for (i, a) in rows.iter().enumerate() {
            for (j, b) in rows.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }
}

/// Free-function form of [`SubsetBasis::extend_basis`].
pub fn extend_basis(basis: &SubsetBasis, point_index: usize, x: &PointSet) -> Result<SubsetBasis> {
    basis.extend_basis(point_index, x)
}

/// Free-function form of [`SubsetBasis::dist_to_span`].
pub fn dist_to_span(basis: &SubsetBasis, x: &[f64]) -> Result<f64> {
    basis.dist_to_span(x)
}

/// `err_p(X, span S) = sum_x d(x, span S)^p`.
///
/// Summation is sequential in point order, so the result is reproducible bit for bit.
pub fn err_p(x: &PointSet, basis: &SubsetBasis, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if basis.dim() != x.dim() {
        return Err(Error::input(format!(
            "basis lives in R^{}, points in R^{}",
            basis.dim(),
            x.dim()
        )));
    }
    Ok(x.iter().map(|pt| pow_p(basis.dist_unchecked(pt), p)).sum())
}
