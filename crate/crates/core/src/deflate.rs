//! Randomized rank-revealing factorization and extraction of an orthonormal
//! basis for the range of an approximate projector.

use crate::error::{Error, Result};
use crate::numkit::{mat_mul, op_norm, orthonormality_defect, qr_factor, CMatrix, UNIT_ROUNDOFF};
use crate::randmat::{sample_haar_unitary, SeededRng};

/// `A = U R V` with `V` Haar-distributed.
#[derive(Clone, Debug)]
pub struct RurvResult {
    pub u: CMatrix,
    pub r: CMatrix,
    pub v_used: CMatrix,
}

impl RurvResult {
    /// `‖U R V - A‖`.
    pub fn reconstruction_residual(&self, a: &CMatrix) -> Result<f64> {
        let urv = mat_mul(&mat_mul(&self.u, &self.r)?, &self.v_used)?;
        op_norm(&(&urv - a))
    }

    /// Norm of the trailing `(n-k) x (n-k)` block of `R`.
    pub fn trailing_block_norm(&self, k: usize) -> Result<f64> {
        trailing_block_norm(&self.r, k)
    }
}

pub fn trailing_block_norm(r: &CMatrix, k: usize) -> Result<f64> {
    let n = r.rows();
    if k >= n || !r.is_square() {
        return Err(Error::param("k", "must be below the dimension of a square R"));
    }
    let m = n - k;
    op_norm(&CMatrix::from_fn(m, m, |i, j| r[(k + i, k + j)]))
}

pub fn rurv(a: &CMatrix, rng: &mut SeededRng) -> Result<RurvResult> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::Dimension("rurv needs a nonempty square matrix".into()));
    }
    let v = sample_haar_unitary(a.rows(), rng)?;
    let b = mat_mul(a, &v.adjoint())?;
    let (u, r) = qr_factor(&b)?;
    Ok(RurvResult { u, r, v_used: v })
}

/// First `k` columns of the `U` factor of `rurv(a)`, for any `a` of rank `k`.
pub(crate) fn range_basis(a: &CMatrix, k: usize, rng: &mut SeededRng) -> Result<CMatrix> {
    let n = a.rows();
    if k < 1 || k >= n {
        return Err(Error::param("k", format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    let f = rurv(a, rng)?;
    let q = f.u.columns(0, k);
    let defect = orthonormality_defect(&q);
    let limit = 10.0 * n as f64 * UNIT_ROUNDOFF;
    if defect > limit {
        return Err(Error::DeflateSanity(format!("orthonormality defect {defect:e} exceeds {limit:e}")));
    }
    Ok(q)
}

/// Orthonormal `n x k` basis approximately spanning the range of the rank-`k`
/// projector that `p_tilde` approximates to within `beta`.
pub fn deflate(p_tilde: &CMatrix, k: usize, beta: f64, eta: f64, rng: &mut SeededRng) -> Result<CMatrix> {
    if !p_tilde.is_square() || p_tilde.rows() == 0 {
        return Err(Error::Dimension("deflate needs a nonempty square matrix".into()));
    }
    if !(0.0..=0.25).contains(&beta) {
        return Err(Error::param("beta", "must lie in [0, 1/4]"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param("eta", "must lie in (0, 1)"));
    }
    range_basis(p_tilde, k, rng)
}

/// Sine of the largest principal angle between the column spaces of two
/// matrices with orthonormal columns.
pub fn subspace_distance(q1: &CMatrix, q2: &CMatrix) -> Result<f64> {
    if q1.rows() != q2.rows() || q1.cols() != q2.cols() {
        return Err(Error::Dimension("subspaces must have equal shape".into()));
    }
    let proj = mat_mul(q2, &mat_mul(&q2.adjoint(), q1)?)?;
    op_norm(&(q1 - &proj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::mat_inv;
    use crate::randmat::sample_ginibre;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    const U: f64 = UNIT_ROUNDOFF;

    #[test]
    fn zero_matrix() {
        let a = CMatrix::zeros(5, 5);
        let f = rurv(&a, &mut SeededRng::new(1)).unwrap();
        assert_eq!(f.r.max_abs(), 0.0);
        assert!(orthonormality_defect(&f.u) < 1e-14);
    }

    #[test]
    fn unitary_reconstruction() {
        let mut rng = SeededRng::new(2);
        let n = 7;
        let a = sample_haar_unitary(n, &mut rng).unwrap();
        let f = rurv(&a, &mut rng).unwrap();
        assert!(f.reconstruction_residual(&a).unwrap() <= 10.0 * n as f64 * U);
        for i in 0..n {
            for j in 0..i {
                assert_eq!(f.r[(i, j)], c(0.0));
            }
        }
        assert!(orthonormality_defect(&f.u) <= (n * 30 * n) as f64 * U);
    }

    #[test]
    fn exact_rank_two_corner_vanishes() {
        let mut rng = SeededRng::new(3);
        for _ in 0..20 {
            let x = sample_ginibre(5, &mut rng).unwrap().columns(0, 2);
            let y = sample_ginibre(5, &mut rng).unwrap().columns(0, 2);
            let a = mat_mul(&x, &y.adjoint()).unwrap();
            let f = rurv(&a, &mut rng).unwrap();
            assert!(f.trailing_block_norm(2).unwrap() <= 1e-10 * op_norm(&a).unwrap());
        }
    }

    #[test]
    fn coordinate_projector() {
        let mut p = CMatrix::zeros(4, 4);
        p[(0, 0)] = c(1.0);
        let q = deflate(&p, 1, 0.0, 0.1, &mut SeededRng::new(4)).unwrap();
        assert!((q[(0, 0)].norm() - 1.0).abs() <= 10.0 * U);
        for i in 1..4 {
            assert!(q[(i, 0)].norm() <= 10.0 * U);
        }
    }

    #[test]
    fn orthogonal_rank_two_projector() {
        let mut rng = SeededRng::new(5);
        let w = sample_haar_unitary(3, &mut rng).unwrap().columns(0, 2);
        let p = mat_mul(&w, &w.adjoint()).unwrap();
        let q = deflate(&p, 2, 0.0, 0.1, &mut rng).unwrap();
        let qq = mat_mul(&q, &q.adjoint()).unwrap();
        assert!(op_norm(&(&qq - &p)).unwrap() <= 10.0 * 3.0 * U);
    }

    #[test]
    fn oblique_projector_with_noise() {
        let n = 6;
        let k = 2;
        let (beta, eta) = (1e-8, 1e-2);
        let mut rng = SeededRng::new(6);
        let noise = sample_ginibre(n, &mut rng).unwrap();
        let v = &CMatrix::identity(n) + &noise.scaled(c(0.3));
        let w = mat_inv(&v).unwrap();
        let vk = v.columns(0, k);
        let wk = w.adjoint().columns(0, k);
        let p = mat_mul(&vk, &wk.adjoint()).unwrap();
        let (exact, _) = qr_factor(&vk).unwrap();
        let exact = exact.columns(0, k);
        for _ in 0..20 {
            let e = sample_ginibre(n, &mut rng).unwrap();
            let e = e.scaled(c(beta / op_norm(&e).unwrap()));
            let q = deflate(&(&p + &e), k, beta, eta, &mut rng).unwrap();
            assert!(orthonormality_defect(&q) <= 10.0 * n as f64 * U);
            assert!(subspace_distance(&q, &exact).unwrap() <= eta);
        }
    }

    #[test]
    fn rejects_bad_rank() {
        let p = CMatrix::identity(3);
        let mut rng = SeededRng::new(0);
        assert!(deflate(&p, 0, 0.0, 0.1, &mut rng).is_err());
        assert!(deflate(&p, 3, 0.0, 0.1, &mut rng).is_err());
        assert!(deflate(&p, 1, 0.5, 0.1, &mut rng).is_err());
    }

    #[test]
    fn distance_of_identical_spaces_is_zero() {
        let q = sample_haar_unitary(5, &mut SeededRng::new(9)).unwrap().columns(0, 3);
        assert!(subspace_distance(&q, &q).unwrap() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn rurv_reconstructs_random_input(seed in any::<u64>(), n in 1usize..9) {
            let mut rng = SeededRng::new(seed);
            let a = sample_ginibre(n, &mut rng).unwrap();
            let f = rurv(&a, &mut rng).unwrap();
            let scale = op_norm(&a).unwrap();
            prop_assert!(f.reconstruction_residual(&a).unwrap() <= 100.0 * n as f64 * U * scale);
            prop_assert!(orthonormality_defect(&f.u) <= (n * 30 * n) as f64 * U);
            for i in 0..n {
                for j in 0..i {
                    prop_assert_eq!(f.r[(i, j)], c(0.0));
                }
            }
        }
    }
}
