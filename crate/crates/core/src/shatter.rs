//! Gaussian perturbation plus a randomly offset grid, so that every
//! eigenvalue lands in its own square with a measurable margin.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gap_of, line_minimum_checked, Grid, ShatterCert, ShatterMode};
use crate::numkit::{op_norm, BackendProfile, CMatrix};
use crate::randmat::{sample_ginibre, SeededRng};
use crate::sgn::required_precision_sgn_gap;
use crate::spectrum::dense_eig;

/// Bottom-left corner of the square region covered by every grid.
pub const REGION_CORNER: Complex64 = Complex64::new(-4.0, -4.0);
/// Side length of that region.
pub const REGION_SIDE: f64 = 8.0;
/// Fresh perturbations tried in empirical mode before giving up.
pub const EMPIRICAL_ATTEMPTS: usize = 3;
const OFFSET_CANDIDATES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShatterParams {
    pub gamma: f64,
    pub mode: ShatterMode,
    pub mesh_per_segment: u64,
}

impl ShatterParams {
    pub fn new(gamma: f64, mode: ShatterMode) -> Result<Self> {
        let p = ShatterParams {
            gamma,
            mode,
            mesh_per_segment: 64,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return Err(Error::param("gamma", "must lie in (0, 1/2)"));
        }
        if self.mesh_per_segment == 0 {
            return Err(Error::param("mesh_per_segment", "must be positive"));
        }
        Ok(())
    }
}

/// `(omega, eps) = (gamma^4 / (4 n^5), gamma^5 / (32 n^9))`.
pub fn theoretical_grid_parameters(n: usize, gamma: f64) -> (f64, f64) {
    let nf = n as f64;
    (gamma.powi(4) / (4.0 * nf.powi(5)), gamma.powi(5) / (32.0 * nf.powi(9)))
}

/// `(n^2 / gamma, gamma^4 / n^5, 12 / n^2)`: eigenvector-condition bound, gap
/// bound and the failure probability of the pair.
pub fn smoothed_bounds(n: usize, gamma: f64) -> Result<(f64, f64, f64)> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::param("gamma", "must lie in (0, 1/2)"));
    }
    let nf = n as f64;
    Ok((nf * nf / gamma, gamma.powi(4) / nf.powi(5), 12.0 / (nf * nf)))
}

/// `min(1, 42 (n/gamma)^3.2 r^1.2 + 2 e^{-2n})`.
pub fn gap_tail_bound(n: usize, gamma: f64, r: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", "must be positive"));
    }
    if !(r >= 0.0) {
        return Err(Error::param("r", "must be nonnegative"));
    }
    let nf = n as f64;
    let v = 42.0 * (nf / gamma).powf(3.2) * r.powf(1.2) + 2.0 * (-2.0 * nf).exp();
    Ok(v.min(1.0))
}

fn check_input(a: &CMatrix) -> Result<()> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::Dimension("shatter needs a nonempty square matrix".into()));
    }
    let norm = op_norm(a)?;
    if norm > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!("‖A‖ = {norm} exceeds 1")));
    }
    Ok(())
}

/// Perturbs `a` by `gamma` times a Ginibre matrix and lays down a grid.
pub fn shatter(a: &CMatrix, p: &ShatterParams, rng: &mut SeededRng) -> Result<ShatterCert> {
    p.validate()?;
    check_input(a)?;
    match p.mode {
        ShatterMode::Theoretical => shatter_theoretical(a, p, rng),
        ShatterMode::Empirical => shatter_empirical(a, p, rng),
    }
}

fn perturb(a: &CMatrix, gamma: f64, rng: &mut SeededRng) -> Result<CMatrix> {
    let g = sample_ginibre(a.rows(), rng)?;
    Ok(a + &g.scaled(Complex64::new(gamma, 0.0)))
}

fn shatter_theoretical(a: &CMatrix, p: &ShatterParams, rng: &mut SeededRng) -> Result<ShatterCert> {
    let n = a.rows();
    let x = perturb(a, p.gamma, rng)?;
    let (omega, eps) = theoretical_grid_parameters(n, p.gamma);
    let s = (REGION_SIDE / omega).ceil() as u64;
    let z = REGION_CORNER + Complex64::new(rng.uniform(), rng.uniform()) * omega;
    let grid = Grid::new(z, omega, s, s)?;
    let mut cert = ShatterCert::new(x, grid, eps, p.gamma, ShatterMode::Theoretical)?;
    cert.below_hardware_precision = exceeds_hardware(n, eps, &grid);
    Ok(cert)
}

/// Whether the splitting sign computations at these parameters need more than double precision.
fn exceeds_hardware(n: usize, eps: f64, grid: &Grid) -> bool {
    let half = eps / 2.0;
    let beta = (0.05 / n as f64).min(0.08);
    required_precision_sgn_gap(n, half / grid.diag_sq(), (half / 2.0).min(0.5), beta, &BackendProfile::default())
        .map_or(true, |p| p.exceeds_hardware)
}

fn line_clearance(values: &[Complex64], g: &Grid) -> f64 {
    let w = g.omega;
    values
        .iter()
        .map(|l| {
            let fx = ((l.re - g.z0_re) / w).rem_euclid(1.0);
            let fy = ((l.im - g.z0_im) / w).rem_euclid(1.0);
            w * fx.min(1.0 - fx).min(fy).min(1.0 - fy)
        })
        .fold(f64::INFINITY, f64::min)
}

fn shatter_empirical(a: &CMatrix, p: &ShatterParams, rng: &mut SeededRng) -> Result<ShatterCert> {
    let n = a.rows();
    let mut last_reason = String::new();
    for attempt in 1..=EMPIRICAL_ATTEMPTS {
        let x = perturb(a, p.gamma, rng)?;
        let es = match dense_eig(&x) {
            Ok(es) => es,
            Err(e) => {
                last_reason = e.to_string();
                continue;
            }
        };
        let omega = (gap_of(&es.values) / 4.0).min(1.0);
        if !(omega > 0.0) {
            last_reason = "perturbed matrix has a repeated eigenvalue".into();
            continue;
        }
        let s = (REGION_SIDE / omega).ceil() as u64;
        let mut best: Option<(f64, Grid)> = None;
        for _ in 0..OFFSET_CANDIDATES {
            let z = REGION_CORNER + Complex64::new(rng.uniform(), rng.uniform()) * omega;
            let g = Grid::new(z, omega, s, s)?;
            let score = line_clearance(&es.values, &g);
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, g));
            }
        }
        let (_, grid) = best.expect("at least one candidate offset");
        let mut squares: Vec<(u64, u64)> = Vec::with_capacity(n);
        for &l in &es.values {
            match grid.square_of(l) {
                Some(sq) => squares.push(sq),
                None => break,
            }
        }
        squares.sort();
        squares.dedup();
        if squares.len() != n {
            last_reason = "eigenvalues do not occupy distinct squares".into();
            continue;
        }
        let found = match line_minimum_checked(&x, &grid, p.mesh_per_segment, &es) {
            Ok(m) => m,
            Err(e) => {
                last_reason = e.to_string();
                continue;
            }
        };
        let eps = found.sigma / 2.0;
        if !(eps > 0.0) || eps > omega / 2.0 {
            last_reason = format!("line margin {} unusable", found.sigma);
            continue;
        }
        let mut cert = ShatterCert::new(x, grid, eps, p.gamma, ShatterMode::Empirical)?;
        cert.certified = true;
        cert.below_hardware_precision = exceeds_hardware(n, eps, &grid);
        cert.attempts = attempt;
        return Ok(cert);
    }
    Err(Error::ShatterFailed {
        attempts: EMPIRICAL_ATTEMPTS,
        reason: last_reason,
    })
}
