//! Reference dense eigendecomposition (complex Schur form plus triangular
//! back-substitution). Used as an oracle for diagnostics and certificates,
//! never inside the divide-and-conquer path itself.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkit::{condition_number, mat_inv, normalize_columns, vec_norm, CMatrix, UNIT_ROUNDOFF};

/// Eigenvalues with unit-norm right eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<Complex64>,
    pub vectors: CMatrix,
}

fn to_nalgebra(a: &CMatrix) -> DMatrix<Complex64> {
    DMatrix::from_column_slice(a.rows(), a.cols(), a.as_slice())
}

fn from_nalgebra(m: &DMatrix<Complex64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigenvalues and unit eigenvectors of a square matrix.
pub fn dense_eig(a: &CMatrix) -> Result<Eigensystem> {
    if !a.is_square() {
        return Err(Error::Dimension("eigendecomposition needs a square matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("eigendecomposition input"));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Eigensystem {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let schur = Schur::try_new(to_nalgebra(a), f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::Oracle("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let q = from_nalgebra(&q);
    let t = from_nalgebra(&t);
    let values = t.diagonal();
    let tiny = f64::MIN_POSITIVE / UNIT_ROUNDOFF;
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = values[k];
        let smin = (UNIT_ROUNDOFF * lambda.norm()).max(UNIT_ROUNDOFF * t.max_abs()).max(tiny);
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[(j, k)];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < smin {
                d = Complex64::new(smin, 0.0);
            }
            y[(i, k)] = -s / d;
        }
        let scale = vec_norm(y.column(k));
        if scale > 1e100 {
            for z in y.column_mut(k) {
                *z /= scale;
            }
        }
    }
    let vectors = normalize_columns(&(&q * &y))?;
    Ok(Eigensystem { values, vectors })
}

pub fn eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>> {
    Ok(dense_eig(a)?.values)
}

impl Eigensystem {
    /// Two-norm condition number of the eigenvector matrix.
    pub fn vector_condition(&self) -> Result<f64> {
        condition_number(&self.vectors)
    }

    /// Condition numbers `‖v_i‖ ‖w_i‖` with `w_i^* v_j = delta_ij`.
    pub fn eigenvalue_conditions(&self) -> Result<Vec<f64>> {
        let inv = mat_inv(&self.vectors).map_err(|_| Error::Defective {
            condition: f64::INFINITY,
        })?;
        let n = self.values.len();
        Ok((0..n)
            .map(|i| {
                let row: Vec<Complex64> = (0..n).map(|j| inv[(i, j)]).collect();
                vec_norm(&row)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangular_matrix_eigenpairs() {
        let a = CMatrix::from_real_rows(&[&[1.0, 10.0], &[0.0, -1.0]]).unwrap();
        let es = dense_eig(&a).unwrap();
        let mut vals: Vec<f64> = es.values.iter().map(|z| z.re).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let d = CMatrix::from_diagonal(&es.values);
        let r = &(&a * &es.vectors) - &(&es.vectors * &d);
        assert!(r.max_abs() < 1e-13);
    }

    #[test]
    fn eigenvalue_conditions_of_normal_matrix_are_one() {
        let a = CMatrix::from_diagonal(&[Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.5)]);
        let es = dense_eig(&a).unwrap();
        for k in es.eigenvalue_conditions().unwrap() {
            assert!((k - 1.0).abs() < 1e-12);
        }
    }
}
