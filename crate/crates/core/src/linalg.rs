//! Small dense and banded linear algebra.
//!
//! The boundary systems solved here have `M + 1 + |N|` unknowns, and the
//! oracle systems are banded. Both are handled by LU with partial pivoting.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use thiserror::Error;

/// Pivots smaller than this in magnitude are treated as exact zeros.
pub const PIVOT_FLOOR: f64 = 1e-300;

/// Condition estimate above which `lu_solve` applies one refinement step.
pub const REFINE_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("singular matrix: pivot {pivot:e} in column {column}")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Max absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Copy without row `skip`.
    pub fn without_row(&self, skip: usize) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.data.len().saturating_sub(self.cols));
        for i in (0..self.rows).filter(|&i| i != skip) {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix {
            rows: self.rows - 1,
            cols: self.cols,
            data,
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// LU factorization `PA = LU` with partial pivoting.
#[derive(Debug, Clone)]
pub struct LuDecomposition {
    n: usize,
    lu: DenseMatrix,
    perm: Vec<usize>,
    norm_one: f64,
}

impl LuDecomposition {
    pub fn factor(a: &DenseMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot < PIVOT_FLOOR {
                return Err(LinalgError::SingularMatrix { column: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self {
            n,
            lu,
            perm,
            norm_one: a.norm_one(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let n = self.n;
        // A^T = U^T L^T P, so solve U^T y = b, L^T z = y, x = P^T z.
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.lu[(j, i)] * y[j];
            }
            y[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.lu[(j, i)] * y[j];
            }
            y[i] = s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<DenseMatrix, LinalgError> {
        let n = self.n;
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// 1-norm condition estimate `||A||_1 * est(||A^-1||_1)` (Hager's method).
    pub fn condition_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 1.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut estimate = 0.0;
        for _ in 0..5 {
            let Ok(y) = self.solve(&x) else {
                return f64::INFINITY;
            };
            let y_norm: f64 = y.iter().map(|v| v.abs()).sum();
            if y_norm <= estimate {
                break;
            }
            estimate = y_norm;
            let xi: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let Ok(z) = self.solve_transpose(&xi) else {
                return f64::INFINITY;
            };
            let (jmax, zmax) =
                z.iter()
                    .enumerate()
                    .map(|(i, v)| (i, v.abs()))
                    .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[jmax] = 1.0;
        }
        if !estimate.is_finite() {
            return f64::INFINITY;
        }
        self.norm_one * estimate
    }
}

/// Outcome of [`lu_solve_detailed`].
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub condition: f64,
    pub refined: bool,
}

/// Solves `Ax = b` by LU with partial pivoting.
pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    lu_solve_detailed(a, b).map(|r| r.x)
}

/// Like [`lu_solve`], also returning the condition estimate. One step of
/// iterative refinement is applied when the estimate exceeds
/// [`REFINE_CONDITION`].
pub fn lu_solve_detailed(a: &DenseMatrix, b: &[f64]) -> Result<SolveReport, LinalgError> {
    let lu = LuDecomposition::factor(a)?;
    let mut x = lu.solve(b)?;
    let condition = lu.condition_estimate();
    let refined = condition > REFINE_CONDITION;
    if refined {
        let ax = a.mul_vec(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
        let dx = lu.solve(&r)?;
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
    }
    Ok(SolveReport { x, condition, refined })
}

/// `||Ax - b||_inf`.
pub fn residual_inf_norm(a: &DenseMatrix, x: &[f64], b: &[f64]) -> Result<f64, LinalgError> {
    if b.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            got: b.len(),
        });
    }
    let ax = a.mul_vec(x)?;
    Ok(ax.iter().zip(b).map(|(l, r)| (l - r).abs()).fold(0.0, f64::max))
}

/// Numerical rank by Gaussian elimination with full pivoting. Pivots at or
/// below `rel_tol * max|a_ij|` count as zero.
pub fn rank(a: &DenseMatrix, rel_tol: f64) -> usize {
    let mut m = a.clone();
    let (rows, cols) = (m.rows(), m.cols());
    let scale = m.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    let tol = rel_tol * scale;
    let mut r = 0;
    let mut col_used = vec![false; cols];
    let mut row_used = vec![false; rows];
    loop {
        let mut best = (0, 0, 0.0);
        for i in (0..rows).filter(|&i| !row_used[i]) {
            for j in (0..cols).filter(|&j| !col_used[j]) {
                if m[(i, j)].abs() > best.2 {
                    best = (i, j, m[(i, j)].abs());
                }
            }
        }
        if best.2 <= tol {
            return r;
        }
        let (p, q, _) = best;
        row_used[p] = true;
        col_used[q] = true;
        r += 1;
        for i in (0..rows).filter(|&i| !row_used[i]) {
            let f = m[(i, q)] / m[(p, q)];
            if f != 0.0 {
                for j in 0..cols {
                    let v = m[(p, j)];
                    m[(i, j)] -= f * v;
                }
            }
        }
    }
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored with
/// `kl` extra super-diagonals of fill-in room for pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        // Row i holds columns i-kl ..= i+kl+ku.
        if j + self.kl < i || j > i + self.kl + self.ku {
            return None;
        }
        Some(i * self.width + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`. Panics if the entry is outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i},{j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j).expect("in band");
        self.data[s] += v;
    }

    pub fn set_row_zero(&mut self, i: usize) {
        let start = i * self.width;
        self.data[start..start + self.width].iter_mut().for_each(|v| *v = 0.0);
    }

    /// Solves `Ax = b` in place with partial pivoting; consumes the matrix.
    pub fn solve(mut self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut x = b.to_vec();
        let kl = self.kl;
        let reach = kl + self.ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let (mut p, mut best) = (k, -1.0);
            for i in k..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < PIVOT_FLOOR {
                return Err(LinalgError::SingularMatrix { column: k, pivot: best });
            }
            let col_end = (k + reach).min(n - 1);
            if p != k {
                for j in k..=col_end {
                    let a = self.get(k, j);
                    let c = self.get(p, j);
                    let sk = self.slot(k, j).expect("in band");
                    let sp = self.slot(p, j).expect("in band");
                    self.data[sk] = c;
                    self.data[sp] = a;
                }
                x.swap(k, p);
            }
            let d = self.get(k, k);
            for i in k + 1..=last {
                let si = self.slot(i, k).expect("in band");
                let f = self.data[si] / d;
                if f == 0.0 {
                    continue;
                }
                self.data[si] = 0.0;
                for j in k + 1..=col_end {
                    let v = self.get(k, j);
                    if v != 0.0 {
                        let s = self.slot(i, j).expect("in band");
                        self.data[s] -= f * v;
                    }
                }
                x[i] -= f * x[k];
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            let end = (i + reach).min(n - 1);
            for j in i + 1..=end {
                s -= self.get(i, j) * x[j];
            }
            x[i] = s / self.get(i, i);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64)
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = DenseMatrix::identity(4);
        let b = [1.0, -2.0, 3.5, 0.0];
        assert_eq!(lu_solve(&a, &b).unwrap(), b.to_vec());
    }

    #[test]
    fn diagonal_solve() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        assert_eq!(lu_solve(&a, &[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn random_well_conditioned_residual() {
        let mut seed = 7;
        let n = 20;
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = lcg(&mut seed) - 0.5;
            }
            a[(i, i)] += n as f64;
        }
        let b: Vec<f64> = (0..n).map(|_| lcg(&mut seed)).collect();
        let x = lu_solve(&a, &b).unwrap();
        let res = residual_inf_norm(&a, &x, &b).unwrap();
        let xn = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let bn = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(res / (a.norm_inf() * xn + bn) <= 1e-12, "res {res}");
    }

    #[test]
    fn singular_is_reported() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            lu_solve(&a, &[1.0, 1.0]),
            Err(LinalgError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn non_square_and_mismatch() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(lu_solve(&a, &[0.0, 0.0]), Err(LinalgError::NotSquare { .. })));
        let a = DenseMatrix::identity(2);
        assert!(matches!(
            residual_inf_norm(&a, &[1.0, 1.0], &[1.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn residual_norms() {
        let a = DenseMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let b = [5.0, 5.0];
        let x = lu_solve(&a, &b).unwrap();
        assert!(residual_inf_norm(&a, &x, &b).unwrap() < 1e-15);
        // Perturbing x by 1e-6 moves Ax by at least the smallest row effect.
        let xp = [x[0] + 1e-6, x[1]];
        let r = residual_inf_norm(&a, &xp, &b).unwrap();
        assert!((r - 3e-6).abs() < 1e-12);
        assert!(r >= 1e-7 * a.norm_inf());
        let z = DenseMatrix::zeros(3, 3);
        assert_eq!(residual_inf_norm(&z, &[1.0, 2.0, 3.0], &[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn condition_estimate_tracks_exact() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1e-6]]).unwrap();
        let lu = LuDecomposition::factor(&a).unwrap();
        let c = lu.condition_estimate();
        assert!((c - 1e6).abs() / 1e6 < 1e-12);
    }

    #[test]
    fn transpose_solve_matches() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![0.2, 3.0, 1.0], vec![1.0, 0.0, 2.0]]).unwrap();
        let lu = LuDecomposition::factor(&a).unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = lu.solve_transpose(&b).unwrap();
        let r = residual_inf_norm(&a.transpose(), &x, &b).unwrap();
        assert!(r < 1e-14);
        let inv = lu.inverse().unwrap();
        let id = a.mul(&inv).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rank_detects_dependency() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0], vec![0.0, 1.0, 1.0]]).unwrap();
        assert_eq!(rank(&a, 1e-12), 2);
        assert_eq!(rank(&DenseMatrix::identity(5), 1e-12), 5);
        assert_eq!(rank(&DenseMatrix::zeros(2, 2), 1e-12), 0);
    }

    #[test]
    fn band_matches_dense() {
        let mut seed = 99;
        let n = 30;
        let (kl, ku) = (3, 2);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // Weak diagonal forces real pivoting.
                let v = if i == j { 0.01 } else { lcg(&mut seed) - 0.3 };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| i as f64 * 0.1 - 1.0).collect();
        let xb = band.solve(&b).unwrap();
        let res = residual_inf_norm(&dense, &xb, &b).unwrap();
        assert!(res < 1e-10, "band residual {res}");
    }
}
