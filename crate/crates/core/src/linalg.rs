//! Thin dense linear-algebra layer over `faer`.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::error::{Error, Result};

pub type Matrix = Mat<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(alpha: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| alpha * x).collect()
}

/// `A x`
pub fn matvec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.ncols(), x.len());
    let mut y = vec![0.0; a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let col = a.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += col[i] * xj;
        }
    }
    y
}

/// `A^T x`
pub fn matvec_t(a: &Matrix, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.nrows(), x.len());
    (0..a.ncols())
        .map(|j| {
            let col = a.col(j);
            (0..a.nrows()).map(|i| col[i] * x[i]).sum()
        })
        .collect()
}

/// `x^T A y`
pub fn bilinear(a: &Matrix, x: &[f64], y: &[f64]) -> f64 {
    dot(x, &matvec(a, y))
}

pub fn quad_form(a: &Matrix, x: &[f64]) -> f64 {
    bilinear(a, x, x)
}

pub fn symmetrize(a: &mut Matrix) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// Largest relative asymmetry `max |a_ij - a_ji| / max |a_ij|`.
pub fn asymmetry(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut scale = 0.0f64;
    let mut diff = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            scale = scale.max(a[(i, j)].abs());
            diff = diff.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug)]
pub struct Cholesky {
    llt: faer::linalg::solvers::Llt<f64>,
    n: usize,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        let llt = a
            .llt(Side::Lower)
            .map_err(|e| Error::Linalg(format!("cholesky failed: {e:?}")))?;
        Ok(Self { llt, n: a.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_mat(&self, b: &Matrix) -> Matrix {
        self.llt.solve(b)
    }
}

/// Eigenvalues (ascending) and eigenvectors of a symmetric matrix.
pub fn sym_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn sym_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigenvalues failed: {e:?}")))
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    a.singular_values()
        .map_err(|e| Error::Linalg(format!("svd failed: {e:?}")))
}

fn rank_from_values(s: &[f64], rtol: f64) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rtol * smax).count()
}

/// Numerical rank with relative threshold `rtol * sigma_max`.
pub fn rank(a: &Matrix, rtol: f64) -> Result<usize> {
    Ok(rank_from_values(&singular_values(a)?, rtol))
}

/// Full SVD split into `(rank, singular values, V)` where V is `ncols x ncols`.
pub fn svd_right(a: &Matrix, rtol: f64) -> Result<(usize, Vec<f64>, Matrix)> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Ok((0, Vec::new(), Mat::identity(n, n)));
    }
    let svd = a
        .svd()
        .map_err(|e| Error::Linalg(format!("svd failed: {e:?}")))?;
    let sv = svd.S().column_vector();
    let s: Vec<f64> = (0..a.nrows().min(n)).map(|i| sv[i]).collect();
    let r = rank_from_values(&s, rtol);
    Ok((r, s, svd.V().to_owned()))
}

/// Full SVD `(s, U, V)` with singular values nonincreasing.
pub fn svd_full(a: &Matrix) -> Result<(Vec<f64>, Matrix, Matrix)> {
    let svd = a
        .svd()
        .map_err(|e| Error::Linalg(format!("svd failed: {e:?}")))?;
    let sv = svd.S().column_vector();
    let s = (0..a.nrows().min(a.ncols())).map(|i| sv[i]).collect();
    Ok((s, svd.U().to_owned(), svd.V().to_owned()))
}

/// Orthonormal basis of the null space of `a` (columns).
pub fn null_space(a: &Matrix, rtol: f64) -> Result<Matrix> {
    let (r, _, v) = svd_right(a, rtol)?;
    let n = a.ncols();
    Ok(Mat::from_fn(n, n - r, |i, j| v[(i, r + j)]))
}

/// Largest `|(Q^T Q - I)_ij|`.
pub fn orthonormality_defect(q: &Matrix) -> f64 {
    let g = q.transpose() * q;
    let mut d = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            d = d.max((g[(i, j)] - target).abs());
        }
    }
    d
}

/// Compressed sparse row matrix assembled from triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Duplicate entries are summed in the order they appear.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { nrows, ncols, row_ptr, cols, vals }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `self * b` for a dense `b`, columns computed independently.
    pub fn mul_dense(&self, b: &Matrix) -> Matrix {
        let cols = crate::par::map_range(b.ncols(), |j| {
            let col: Vec<f64> = (0..b.nrows()).map(|i| b[(i, j)]).collect();
            self.matvec(&col)
        });
        Mat::from_fn(self.nrows, b.ncols(), |i, j| cols[j][i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_rank_one() {
        let a = Mat::from_fn(2, 3, |i, j| ((i + 1) * (j + 1)) as f64);
        let n = null_space(&a, 1e-12).unwrap();
        assert_eq!(n.ncols(), 2);
        assert!(orthonormality_defect(&n) < 1e-12);
        for j in 0..2 {
            let x: Vec<f64> = (0..3).map(|i| n[(i, j)]).collect();
            assert!(max_abs(&matvec(&a, &x)) < 1e-12);
        }
    }

    #[test]
    fn csr_sums_duplicates() {
        let a = Csr::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5), (0, 1, -1.0)]);
        assert_eq!(a.matvec(&[1.0, 1.0, 2.0]), vec![1.0, 3.0]);
        let b = Mat::from_fn(3, 2, |i, j| (i + j) as f64);
        let c = a.mul_dense(&b);
        let d = Mat::from_fn(2, 3, |i, j| a.row(i).filter(|&(k, _)| k == j).map(|(_, v)| v).sum::<f64>()) * &b;
        assert_eq!(c, d);
    }

    #[test]
    fn cholesky_solves() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { 4.0 } else { 1.0 });
        let c = Cholesky::new(&a).unwrap();
        let x = c.solve(&[1.0, 2.0, 3.0]);
        let back = matvec(&a, &x);
        assert!(max_abs(&sub(&back, &[1.0, 2.0, 3.0])) < 1e-13);
    }

    #[test]
    fn matvec_transpose_agree() {
        let a = Mat::from_fn(3, 2, |i, j| (i as f64) - 2.0 * j as f64);
        let x = [1.0, -1.0, 0.5];
        let y = [0.25, 2.0];
        assert!((dot(&matvec_t(&a, &x), &y) - dot(&x, &matvec(&a, &y))).abs() < 1e-14);
    }
}
