//! Seeded randomness: complex Gaussian matrices, Haar unitaries and the
//! closed-form tail laws used to validate them.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numkit::{qr_factor, CMatrix};

/// Counter-based generator keyed by a seed and a stream index.
///
/// Children produced by [`SeededRng::derive`] depend only on the parent's
/// key and the child index, never on how many draws the parent has made.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha12Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent child generator number `index`.
    pub fn derive(&self, index: u64) -> SeededRng {
        let key = splitmix64(self.seed ^ splitmix64(self.stream));
        SeededRng::with_stream(key, index)
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Standard real Gaussian draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random::<u64>()
    }
}

/// `n x n` complex Ginibre matrix: real and imaginary parts i.i.d. `N(0, 1/(2n))`.
pub fn sample_ginibre(n: usize, rng: &mut SeededRng) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::param("n", "dimension must be positive"));
    }
    let scale = (0.5 / n as f64).sqrt();
    Ok(CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.normal() * scale, rng.normal() * scale)
    }))
}

/// Haar-distributed unitary: the `Q` factor of a Ginibre matrix with the
/// nonnegative-diagonal convention on `R`.
pub fn sample_haar_unitary(n: usize, rng: &mut SeededRng) -> Result<CMatrix> {
    for _ in 0..2 {
        let g = sample_ginibre(n, rng)?;
        let (q, r) = qr_factor(&g)?;
        let floor = 1e-300_f64.max(f64::MIN_POSITIVE);
        if r.diagonal().iter().all(|d| d.re > floor) {
            return Ok(q);
        }
    }
    Err(Error::Precondition("Ginibre draw was rank deficient twice".into()))
}

fn check_corner(n: usize, r: usize) -> Result<f64> {
    if r == 0 || r >= n {
        return Err(Error::param("r", format!("need 1 <= r < n, got r = {r}, n = {n}")));
    }
    Ok((r * (n - r)) as f64)
}

/// `P[sigma_min(X) <= theta]` for the top-left `r x r` corner `X` of an
/// `n x n` Haar unitary.
pub fn haar_corner_sigma_min_cdf(n: usize, r: usize, theta: f64) -> Result<f64> {
    let k = check_corner(n, r)?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::param("theta", "must lie in [0, 1]"));
    }
    if theta == 1.0 {
        return Ok(1.0);
    }
    Ok(-(k * (-theta * theta).ln_1p()).exp_m1())
}

/// Density of `sigma_min(X)^2` at `x` for the same corner law.
pub fn haar_corner_sigma_sq_density(n: usize, r: usize, x: f64) -> Result<f64> {
    let k = check_corner(n, r)?;
    if !(0.0..=1.0).contains(&x) {
        return Ok(0.0);
    }
    Ok(k * (1.0 - x).powf(k - 1.0))
}

/// Upper bound on `P[sigma_j(G) < alpha (n - j + 1) / n]` for a Ginibre `G`.
pub fn ginibre_sigma_tail(n: usize, j: usize, alpha: f64) -> Result<f64> {
    if j == 0 || j > n {
        return Err(Error::param("j", format!("need 1 <= j <= n, got j = {j}, n = {n}")));
    }
    if !(alpha >= 0.0) {
        return Err(Error::param("alpha", "must be nonnegative"));
    }
    let m = (n - j + 1) as f64;
    Ok(((2.0 * std::f64::consts::E).sqrt() * alpha).powf(2.0 * m * m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::orthonormality_defect;
    use proptest::prelude::*;

    #[test]
    fn corner_cdf_examples() {
        assert!((haar_corner_sigma_min_cdf(2, 1, 0.5).unwrap() - 0.25).abs() < 1e-15);
        let expected = 1.0 - 0.91f64.powi(4);
        assert!((haar_corner_sigma_min_cdf(4, 2, 0.3).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.31425039).abs() < 1e-8);
        assert_eq!(haar_corner_sigma_min_cdf(5, 2, 0.0).unwrap(), 0.0);
        assert_eq!(haar_corner_sigma_min_cdf(5, 2, 1.0).unwrap(), 1.0);
        assert!(haar_corner_sigma_min_cdf(3, 3, 0.5).is_err());
        assert!(haar_corner_sigma_min_cdf(3, 0, 0.5).is_err());
    }

    #[test]
    fn szarek_examples() {
        let v = ginibre_sigma_tail(8, 7, 0.1).unwrap();
        assert!((v - 8.7357040e-6).abs() < 1e-12);
        assert_eq!(ginibre_sigma_tail(4, 2, 0.0).unwrap(), 0.0);
        assert!(ginibre_sigma_tail(4, 5, 0.1).is_err());
    }

    #[test]
    fn ginibre_variance_is_one_over_n() {
        let n = 32;
        let mut rng = SeededRng::new(17);
        let mut total = 0.0;
        let reps = 40;
        for _ in 0..reps {
            total += sample_ginibre(n, &mut rng).unwrap().frobenius_norm().powi(2);
        }
        // E ||G||_F^2 = n^2 * (1/n) = n
        let mean = total / reps as f64;
        assert!((mean - n as f64).abs() < 0.05 * n as f64, "mean {mean}");
    }

    #[test]
    fn derived_streams_are_reproducible() {
        let parent = SeededRng::new(99);
        let mut used = parent.clone();
        for _ in 0..10 {
            used.uniform();
        }
        let mut a = parent.derive(3);
        let mut b = used.derive(3);
        assert_eq!(a.next_u64(), b.next_u64());
        let mut c = parent.derive(4);
        assert_ne!(parent.derive(3).next_u64(), c.next_u64());
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = SeededRng::new(5);
        let q = sample_haar_unitary(9, &mut rng).unwrap();
        assert!(orthonormality_defect(&q) < 1e-14);
    }

    proptest! {
        #[test]
        fn corner_law_is_symmetric(n in 2usize..20, r_frac in 0.0f64..1.0, theta in 0.0f64..1.0) {
            let r = 1 + ((n - 1) as f64 * r_frac) as usize % (n - 1);
            let a = haar_corner_sigma_min_cdf(n, r, theta).unwrap();
            let b = haar_corner_sigma_min_cdf(n, n - r, theta).unwrap();
            prop_assert!((a - b).abs() <= 1e-15);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn corner_cdf_is_monotone(n in 2usize..12, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(haar_corner_sigma_min_cdf(n, 1, lo).unwrap() <= haar_corner_sigma_min_cdf(n, 1, hi).unwrap());
        }
    }
}
