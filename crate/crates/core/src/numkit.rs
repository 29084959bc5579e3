//! Dense complex matrices and the handful of kernels the solver needs:
//! multiplication, LU inversion, Householder QR, singular values and a
//! compensated trace.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit roundoff of IEEE double precision.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix stored column-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from column-major data, rejecting non-finite entries.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix construction"));
        }
        Ok(CMatrix { rows, cols, data })
    }

    /// Builds a matrix from a list of rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for j in 0..c {
            for row in rows {
                data.push(row[j]);
            }
        }
        Self::from_col_major(r, c, data)
    }

    /// Builds a real matrix from rows of `f64`.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Column-major view of the entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scaled(&self, s: Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// Returns `A - z I`.
    pub fn shifted(&self, z: Complex64) -> CMatrix {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] -= z;
        }
        m
    }

    /// Copies `count` consecutive columns starting at `start`.
    pub fn columns(&self, start: usize, count: usize) -> CMatrix {
        assert!(start + count <= self.cols, "column range out of bounds");
        CMatrix {
            rows: self.rows,
            cols: count,
            data: self.data[start * self.rows..(start + count) * self.rows].to_vec(),
        }
    }

    /// Horizontal concatenation.
    pub fn hstack(blocks: &[&CMatrix]) -> Result<CMatrix> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        if blocks.iter().any(|b| b.rows != rows) {
            return Err(Error::Dimension("hstack blocks differ in row count".into()));
        }
        let mut data = Vec::new();
        let mut cols = 0;
        for b in blocks {
            data.extend_from_slice(&b.data);
            cols += b.cols;
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn frobenius_norm(&self) -> f64 {
        vec_norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a + j * self.rows, b + j * self.rows);
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    /// Panics on inner-dimension mismatch; use [`mat_mul`] for a checked product.
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        mat_mul(self, rhs).expect("inner dimensions must agree")
    }
}

/// Error-model constants of a floating-point backend.
///
/// Multiplication, inversion and QR are assumed backward stable with error
/// factors `mm_coeff * n`, `inv_coeff * n * kappa^(inv_exponent * ln n)` and
/// `qr_coeff * n` respectively.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendProfile {
    pub mm_coeff: f64,
    pub inv_coeff: f64,
    pub inv_exponent: f64,
    pub qr_coeff: f64,
    pub norm_coeff: f64,
    pub unit_roundoff: f64,
}

impl Default for BackendProfile {
    fn default() -> Self {
        BackendProfile {
            mm_coeff: 1.0,
            inv_coeff: 10.0,
            inv_exponent: 1.0,
            qr_coeff: 30.0,
            norm_coeff: 1.0,
            unit_roundoff: UNIT_ROUNDOFF,
        }
    }
}

impl BackendProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mm_coeff", self.mm_coeff),
            ("inv_coeff", self.inv_coeff),
            ("inv_exponent", self.inv_exponent),
            ("qr_coeff", self.qr_coeff),
            ("norm_coeff", self.norm_coeff),
        ] {
            if !(v >= 1.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be a finite constant >= 1, got {v}")));
            }
        }
        if !(self.unit_roundoff > 0.0 && self.unit_roundoff < 0.5) {
            return Err(Error::param("unit_roundoff", "must lie in (0, 1/2)"));
        }
        Ok(())
    }

    pub fn mu_mm(&self, n: usize) -> f64 {
        self.mm_coeff * n as f64
    }

    pub fn mu_inv(&self, n: usize) -> f64 {
        self.inv_coeff * n as f64
    }

    pub fn mu_qr(&self, n: usize) -> f64 {
        self.qr_coeff * n as f64
    }
}

pub(crate) fn vec_norm(v: &[Complex64]) -> f64 {
    let scale = v.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = v
        .iter()
        .map(|z| {
            let (a, b) = (z.re / scale, z.im / scale);
            a * a + b * b
        })
        .sum();
    scale * s.sqrt()
}

/// `sum conj(a_i) b_i`
pub(crate) fn vec_dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Matrix product.
pub fn mat_mul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.cols != b.rows {
        return Err(Error::Dimension(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut c = CMatrix::zeros(a.rows, b.cols);
    for j in 0..b.cols {
        let out = &mut c.data[j * a.rows..(j + 1) * a.rows];
        for k in 0..a.cols {
            let bkj = b.data[k + j * b.rows];
            if bkj == ZERO {
                continue;
            }
            let acol = &a.data[k * a.rows..(k + 1) * a.rows];
            for (o, &x) in out.iter_mut().zip(acol) {
                *o += x * bkj;
            }
        }
    }
    Ok(c)
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    factors: CMatrix,
    perm: Vec<usize>,
}

/// Factors a square matrix. Pivots no larger than `n u max|a_ij|` count as zero.
pub fn lu_factor(a: &CMatrix) -> Result<Lu> {
    if !a.is_square() {
        return Err(Error::Dimension("LU requires a square matrix".into()));
    }
    let n = a.rows;
    let mut f = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let floor = (n.max(1) as f64) * UNIT_ROUNDOFF * a.max_abs();
    for k in 0..n {
        let (p, mag) = (k..n)
            .map(|i| (i, f[(i, k)].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(mag > floor) || mag == 0.0 {
            return Err(Error::Singular {
                pivot_index: k,
                pivot_magnitude: mag.max(0.0),
            });
        }
        f.swap_rows(k, p);
        perm.swap(k, p);
        let pivot = f[(k, k)];
        for i in k + 1..n {
            f[(i, k)] /= pivot;
        }
        for j in k + 1..n {
            let akj = f[(k, j)];
            if akj == ZERO {
                continue;
            }
            for i in k + 1..n {
                let l = f[(i, k)];
                f[(i, j)] -= l * akj;
            }
        }
    }
    Ok(Lu { factors: f, perm })
}

impl Lu {
    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Smallest over largest pivot magnitude; a cheap reciprocal condition proxy.
    pub fn pivot_ratio(&self) -> f64 {
        let mags: Vec<f64> = (0..self.dim()).map(|k| self.factors[(k, k)].norm()).collect();
        let max = mags.iter().cloned().fold(0.0, f64::max);
        let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            0.0
        } else {
            min / max
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.dim();
        let f = &self.factors;
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let yj = y[j];
            for i in j + 1..n {
                y[i] -= f[(i, j)] * yj;
            }
        }
        for j in (0..n).rev() {
            y[j] /= f[(j, j)];
            let yj = y[j];
            for i in 0..j {
                y[i] -= f[(i, j)] * yj;
            }
        }
        b.copy_from_slice(&y);
    }

    /// Solves `A^* x = b` in place.
    pub fn solve_adjoint_in_place(&self, b: &mut [Complex64]) {
        let n = self.dim();
        let f = &self.factors;
        let mut z = b.to_vec();
        for i in 0..n {
            let s: Complex64 = (0..i).map(|k| f[(k, i)].conj() * z[k]).sum();
            z[i] = (z[i] - s) / f[(i, i)].conj();
        }
        for i in (0..n).rev() {
            let s: Complex64 = (i + 1..n).map(|k| f[(k, i)].conj() * z[k]).sum();
            z[i] -= s;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = z[k];
        }
    }

    pub fn inverse(&self) -> CMatrix {
        let n = self.dim();
        let mut inv = CMatrix::identity(n);
        for j in 0..n {
            self.solve_in_place(inv.column_mut(j));
        }
        inv
    }
}

/// Inverse by partial-pivot LU.
pub fn mat_inv(a: &CMatrix) -> Result<CMatrix> {
    let inv = lu_factor(a)?.inverse();
    if !inv.is_finite() {
        return Err(Error::NonFinite("matrix inversion"));
    }
    Ok(inv)
}

/// Householder QR, `A = Q R`, with `Q` unitary (`m x m`) and `R` upper
/// trapezoidal with a real nonnegative diagonal.
pub fn qr_factor(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if !a.is_finite() {
        return Err(Error::NonFinite("QR input"));
    }
    let (m, n) = (a.rows, a.cols);
    let mut r = a.clone();
    let mut reflectors: Vec<(usize, Vec<Complex64>, f64)> = Vec::new();
    for k in 0..m.saturating_sub(1).min(n) {
        let x: Vec<Complex64> = (k..m).map(|i| r[(i, k)]).collect();
        let xnorm = vec_norm(&x);
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0] == ZERO { ONE } else { x[0] / x[0].norm() };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vv == 0.0 {
            continue;
        }
        let tau = 2.0 / vv;
        for j in k..n {
            let s: Complex64 = v.iter().enumerate().map(|(t, vi)| vi.conj() * r[(k + t, j)]).sum();
            let s = s * tau;
            for (t, vi) in v.iter().enumerate() {
                r[(k + t, j)] -= s * vi;
            }
        }
        for i in k + 1..m {
            r[(i, k)] = ZERO;
        }
        reflectors.push((k, v, tau));
    }
    let mut q = CMatrix::identity(m);
    for (k, v, tau) in reflectors.iter().rev() {
        for j in 0..m {
            let s: Complex64 = v.iter().enumerate().map(|(t, vi)| vi.conj() * q[(k + t, j)]).sum();
            let s = s * *tau;
            for (t, vi) in v.iter().enumerate() {
                q[(k + t, j)] -= s * vi;
            }
        }
    }
    for j in 0..m.min(n) {
        let d = r[(j, j)];
        let mag = d.norm();
        if mag == 0.0 {
            continue;
        }
        let ph = d / mag;
        for c in j..n {
            r[(j, c)] *= ph.conj();
        }
        r[(j, j)] = Complex64::new(mag, 0.0);
        for z in q.column_mut(j) {
            *z *= ph;
        }
    }
    Ok((q, r))
}

/// Singular values in decreasing order (one-sided Jacobi).
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    if !a.is_finite() {
        return Err(Error::NonFinite("singular value input"));
    }
    let mut w = if a.rows >= a.cols { a.clone() } else { a.adjoint() };
    let (m, n) = (w.rows, w.cols);
    let tol = f64::EPSILON * (m as f64).sqrt();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let cp = w.column(p);
                    let cq = w.column(q);
                    (
                        cp.iter().map(|z| z.norm_sqr()).sum::<f64>(),
                        cq.iter().map(|z| z.norm_sqr()).sum::<f64>(),
                        vec_dot(cp, cq),
                    )
                };
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let ph = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 { 1.0 } else { -1.0 } / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let ap = w.data[i + p * m];
                    let aq = w.data[i + q * m] * ph.conj();
                    w.data[i + p * m] = ap * c - aq * s;
                    w.data[i + q * m] = (ap * s + aq * c) * ph;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n).map(|j| vec_norm(w.column(j))).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(sv)
}

/// Spectral norm.
pub fn op_norm(a: &CMatrix) -> Result<f64> {
    if a.rows == 0 || a.cols == 0 {
        return Ok(0.0);
    }
    Ok(singular_values(a)?[0])
}

/// Two-norm condition number `sigma_max / sigma_min` of a square matrix.
pub fn condition_number(a: &CMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension("condition number needs a square matrix".into()));
    }
    let sv = singular_values(a)?;
    let smin = *sv.last().unwrap_or(&0.0);
    Ok(if smin == 0.0 { f64::INFINITY } else { sv[0] / smin })
}

const INVERSE_ITERATION_THRESHOLD: usize = 128;

/// `sigma_min(z I - A)`: exact singular values for small matrices, inverse
/// iteration on `(zI - A)^* (zI - A)` from dimension 128 upwards.
pub fn sigma_min_shifted(a: &CMatrix, z: Complex64) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension("shifted sigma_min needs a square matrix".into()));
    }
    if a.rows == 0 {
        return Ok(f64::INFINITY);
    }
    let m = a.shifted(z).scaled(-ONE);
    if a.rows < INVERSE_ITERATION_THRESHOLD {
        let sv = singular_values(&m)?;
        return Ok(*sv.last().unwrap());
    }
    sigma_min_inverse_iteration(&m)
}

pub(crate) fn sigma_min_inverse_iteration(m: &CMatrix) -> Result<f64> {
    let lu = match lu_factor(m) {
        Ok(lu) => lu,
        Err(Error::Singular { .. }) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let n = m.rows;
    let mut x: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + (i as f64 * 0.618).sin() * 0.25, 0.0))
        .collect();
    let nx = vec_norm(&x);
    x.iter_mut().for_each(|z| *z /= nx);
    let mut estimate = 0.0;
    for _ in 0..300 {
        lu.solve_in_place(&mut x);
        lu.solve_adjoint_in_place(&mut x);
        let growth = vec_norm(&x);
        if !growth.is_finite() || growth == 0.0 {
            return Ok(0.0);
        }
        x.iter_mut().for_each(|z| *z /= growth);
        let next = 1.0 / growth.sqrt();
        if (next - estimate).abs() <= 1e-13 * next {
            return Ok(next);
        }
        estimate = next;
    }
    Ok(estimate)
}

/// Trace with compensated (Neumaier) summation of the diagonal.
pub fn trace(a: &CMatrix) -> Result<Complex64> {
    if !a.is_square() {
        return Err(Error::Dimension("trace needs a square matrix".into()));
    }
    let re = compensated_sum(a.diagonal().iter().map(|z| z.re));
    let im = compensated_sum(a.diagonal().iter().map(|z| z.im));
    Ok(Complex64::new(re, im))
}

fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Scales every column to unit Euclidean norm.
pub fn normalize_columns(a: &CMatrix) -> Result<CMatrix> {
    let mut out = a.clone();
    for j in 0..a.cols {
        let nrm = vec_norm(a.column(j));
        if nrm == 0.0 {
            return Err(Error::ZeroColumn { index: j });
        }
        for z in out.column_mut(j) {
            *z /= nrm;
        }
    }
    Ok(out)
}

/// `‖Q^* Q - I‖_max`, a cheap orthonormality defect.
pub fn orthonormality_defect(q: &CMatrix) -> f64 {
    let g = &q.adjoint() * q;
    let mut worst: f64 = 0.0;
    for j in 0..g.cols {
        for i in 0..g.rows {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pseudo_random(n: usize, m: usize, seed: u64) -> CMatrix {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(n, m, |_, _| c(next(), next()))
    }

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn product_of_shears() {
        let a = CMatrix::from_rows(&[vec![c(1., 0.), c(0., 1.)], vec![c(0., 0.), c(1., 0.)]]).unwrap();
        let b = CMatrix::from_rows(&[vec![c(1., 0.), c(0., 0.)], vec![c(0., 1.), c(1., 0.)]]).unwrap();
        let expect = CMatrix::from_rows(&[vec![c(0., 0.), c(0., 1.)], vec![c(0., 1.), c(1., 0.)]]).unwrap();
        assert_eq!(mat_mul(&a, &b).unwrap(), expect);
    }

    #[test]
    fn product_dimension_mismatch() {
        let a = CMatrix::zeros(2, 3);
        assert!(matches!(mat_mul(&a, &a), Err(Error::Dimension(_))));
    }

    #[test]
    fn rejects_non_finite_entries() {
        let r = CMatrix::from_col_major(1, 1, vec![c(f64::NAN, 0.0)]);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn norm_of_diagonal() {
        let d = CMatrix::from_diagonal(&[c(3., 0.), c(0., -4.)]);
        assert!((op_norm(&d).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn shifted_sigma_min_of_diagonal() {
        let d = CMatrix::from_diagonal(&[c(1., 0.), c(2., 0.)]);
        assert!((sigma_min_shifted(&d, c(5., 0.)).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn normalizes_columns() {
        let v = CMatrix::from_real_rows(&[&[3.0], &[4.0]]).unwrap();
        let u = normalize_columns(&v).unwrap();
        assert!((u[(0, 0)] - c(0.6, 0.)).norm() < 1e-16);
        assert!((u[(1, 0)] - c(0.8, 0.)).norm() < 1e-16);
        let z = CMatrix::zeros(2, 1);
        assert_eq!(normalize_columns(&z), Err(Error::ZeroColumn { index: 0 }));
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = CMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        match mat_inv(&a) {
            Err(Error::Singular { pivot_index, pivot_magnitude }) => {
                assert_eq!(pivot_index, 1);
                assert!(pivot_magnitude < 1e-15);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn inverse_round_trip() {
        let a = pseudo_random(7, 7, 3);
        let inv = mat_inv(&a).unwrap();
        assert!(close(&(&a * &inv), &CMatrix::identity(7), 1e-12));
    }

    #[test]
    fn adjoint_solve() {
        let a = pseudo_random(6, 6, 11);
        let lu = lu_factor(&a).unwrap();
        let mut x: Vec<Complex64> = (0..6).map(|i| c(i as f64, 1.0)).collect();
        let b = x.clone();
        lu.solve_adjoint_in_place(&mut x);
        let back = mat_mul(&a.adjoint(), &CMatrix::from_col_major(6, 1, x).unwrap()).unwrap();
        for i in 0..6 {
            assert!((back[(i, 0)] - b[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn qr_of_rectangular() {
        for (m, n) in [(5, 3), (3, 5), (4, 4), (1, 3)] {
            let a = pseudo_random(m, n, (m * 10 + n) as u64);
            let (q, r) = qr_factor(&a).unwrap();
            assert!(orthonormality_defect(&q) < 1e-14);
            assert!(close(&(&q * &r), &a, 1e-14));
            for j in 0..n {
                for i in j + 1..m {
                    assert_eq!(r[(i, j)], ZERO);
                }
                if j < m {
                    assert_eq!(r[(j, j)].im, 0.0);
                    assert!(r[(j, j)].re >= 0.0);
                }
            }
        }
    }

    #[test]
    fn trace_is_compensated() {
        let diag = [c(1e16, 0.), c(1.0, 0.), c(-1e16, 0.), c(1.0, 0.)];
        assert_eq!(trace(&CMatrix::from_diagonal(&diag)).unwrap(), c(2.0, 0.0));
    }

    #[test]
    fn inverse_iteration_matches_jacobi() {
        let a = pseudo_random(12, 12, 5);
        let z = c(0.1, -0.2);
        let m = a.shifted(z).scaled(-ONE);
        let exact = *singular_values(&m).unwrap().last().unwrap();
        let iter = sigma_min_inverse_iteration(&m).unwrap();
        assert!((exact - iter).abs() <= 1e-9 * exact);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn singular_values_are_unitarily_invariant(seed in 0u64..10_000, n in 1usize..7) {
            let a = pseudo_random(n, n, seed);
            let (q, _) = qr_factor(&pseudo_random(n, n, seed + 1)).unwrap();
            let sa = singular_values(&a).unwrap();
            let sqa = singular_values(&(&q * &a)).unwrap();
            for (x, y) in sa.iter().zip(&sqa) {
                prop_assert!((x - y).abs() <= 1e-13 * sa[0].max(1e-300));
            }
        }

        #[test]
        fn frobenius_matches_singular_values(seed in 0u64..10_000, m in 1usize..6, n in 1usize..6) {
            let a = pseudo_random(m, n, seed);
            let s: f64 = singular_values(&a).unwrap().iter().map(|x| x * x).sum();
            prop_assert!((s.sqrt() - a.frobenius_norm()).abs() <= 1e-13);
        }
    }
}
