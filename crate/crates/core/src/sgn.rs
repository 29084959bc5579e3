//! Matrix sign function by Newton iteration with an a-priori step count,
//! together with the Apollonius-disk geometry that drives the count.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numkit::{lu_factor, op_norm, BackendProfile, CMatrix, UNIT_ROUNDOFF};

const LN2: f64 = std::f64::consts::LN_2;

/// `(1 - z) / (1 + z)`, mapping the right half-plane onto the unit disk.
pub fn mobius(z: Complex64) -> Result<Complex64> {
    let den = Complex64::new(1.0, 0.0) + z;
    if den == Complex64::new(0.0, 0.0) {
        return Err(Error::param("z", "pole of the Möbius map at -1"));
    }
    Ok((Complex64::new(1.0, 0.0) - z) / den)
}

/// `(z + 1/z) / 2`.
pub fn newton_map(z: Complex64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::param("z", "pole of the Newton map at 0"));
    }
    Ok(0.5 * (z + z.inv()))
}

/// `min(|m(z)|, 1/|m(z)|)`: the smallest `alpha` whose Apollonius region holds `z`.
pub fn apollonius_parameter(z: Complex64) -> f64 {
    let num = (Complex64::new(1.0, 0.0) - z).norm();
    let den = (Complex64::new(1.0, 0.0) + z).norm();
    if num <= den {
        num / den
    } else {
        den / num
    }
}

/// Membership in the union of the two Apollonius disks of parameter `alpha`.
pub fn apollonius_contains(alpha: f64, z: Complex64) -> Result<bool> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", "must lie in (0, 1)"));
    }
    Ok(apollonius_parameter(z) <= alpha)
}

/// Centre and radius of the right-hand Apollonius disk.
pub fn apollonius_disk(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", "must lie in (0, 1)"));
    }
    let a2 = alpha * alpha;
    Ok(((1.0 + a2) / (1.0 - a2), 2.0 * alpha / (1.0 - a2)))
}

/// Smallest `alpha` (to bisection accuracy) whose Apollonius region contains
/// the closed disk of radius `r` about `c`; `None` if the disk meets the
/// imaginary axis.
pub fn alpha_covering_disk(c: Complex64, r: f64) -> Option<f64> {
    if c.re.abs() <= r {
        return None;
    }
    let c = if c.re < 0.0 { -c } else { c };
    let fits = |alpha: f64| {
        let (centre, radius) = apollonius_disk(alpha).expect("alpha in range");
        (c - Complex64::new(centre, 0.0)).norm() + r <= radius
    };
    let (mut lo, mut hi) = (apollonius_parameter(c), 1.0 - 1e-16);
    if !fits(hi) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    Some(hi)
}

/// Inputs of the sign iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgnParams {
    pub eps0: f64,
    pub alpha0: f64,
    pub beta: f64,
}

impl SgnParams {
    pub fn new(eps0: f64, alpha0: f64, beta: f64) -> Result<Self> {
        let p = SgnParams { eps0, alpha0, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(Error::param("eps0", "must lie in (0, 1)"));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(Error::param("alpha0", "must lie in (0, 1)"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0 / 12.0) {
            return Err(Error::param("beta", "must lie in (0, 1/12)"));
        }
        Ok(())
    }

    /// `1 - alpha0`.
    pub fn s(&self) -> f64 {
        1.0 - self.alpha0
    }
}

/// Whether `alpha0` is in the range where the step-count formula was derived.
pub fn iteration_formula_regime(alpha0: f64) -> bool {
    1.0 - alpha0 < 0.01
}

/// Unrounded step-count formula with `lg(1/beta)` supplied directly, so that
/// astronomically small `beta` never underflows.
pub(crate) fn iteration_formula_lg(s: f64, eps0: f64, lg_inv_beta: f64) -> f64 {
    let lg_inv_s = -s.log2();
    let lg_inv_beta_eps = lg_inv_beta - eps0.log2();
    lg_inv_s + 3.0 * lg_inv_s.log2() + lg_inv_beta_eps.log2() + 7.59
}

pub(crate) fn steps_from_formula(x: f64) -> usize {
    if x.is_finite() {
        x.ceil().max(1.0) as usize
    } else {
        1
    }
}

/// Newton steps needed for accuracy `beta` from an `(eps0, alpha0)` start.
pub fn sgn_iteration_count(alpha0: f64, eps0: f64, beta: f64) -> Result<usize> {
    let p = SgnParams::new(eps0, alpha0, beta)?;
    Ok(steps_from_formula(iteration_formula_lg(p.s(), eps0, -beta.log2())))
}

/// Same count with `beta` given as `lg(1/beta)`.
pub fn sgn_iteration_count_lg(alpha0: f64, eps0: f64, lg_inv_beta: f64) -> Result<usize> {
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(Error::param("alpha0", "must lie in (0, 1)"));
    }
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return Err(Error::param("eps0", "must lie in (0, 1)"));
    }
    if !(lg_inv_beta > 12f64.log2()) {
        return Err(Error::param("beta", "must lie in (0, 1/12)"));
    }
    Ok(steps_from_formula(iteration_formula_lg(1.0 - alpha0, eps0, lg_inv_beta)))
}

/// `alpha_k` by the recursion `alpha_{k+1} = (1 + s/4) alpha_k^2`, carried
/// out on logarithms so rounding does not double at every step.
pub fn alpha_sequence(alpha0: f64, steps: usize) -> Vec<f64> {
    let ln_d = ((1.0 - alpha0) / 4.0).ln_1p();
    let mut out = Vec::with_capacity(steps + 1);
    let mut l = alpha0.ln();
    out.push(alpha0);
    for _ in 0..steps {
        l = ln_d + 2.0 * l;
        out.push(l.exp());
    }
    out
}

/// Closed form `(1 + s/4)^(2^k - 1) alpha0^(2^k)`, evaluated in log space.
pub fn alpha_closed_form(alpha0: f64, k: u32) -> f64 {
    let s = 1.0 - alpha0;
    let p = 2f64.powi(k as i32);
    ((p - 1.0) * (s / 4.0).ln_1p() + p * alpha0.ln()).exp()
}

/// Pseudospectral floors `e_k = eps0 (s^2/50)^k alpha_k`.
pub fn eps_floor_sequence(alpha0: f64, eps0: f64, steps: usize) -> Vec<f64> {
    let s = 1.0 - alpha0;
    let r = s * s / 50.0;
    alpha_sequence(alpha0, steps)
        .into_iter()
        .enumerate()
        .map(|(k, a)| eps0 * r.powi(k as i32) * a)
        .collect()
}

/// `8 alpha^2 / ((1 - alpha)^2 (1 + alpha) eps)`.
pub fn sgn_error_bound(alpha_n: f64, eps_n: f64) -> f64 {
    8.0 * alpha_n * alpha_n / ((1.0 - alpha_n).powi(2) * (1.0 + alpha_n) * eps_n)
}

/// Pseudospectral parameter after one Newton step, `eps (alpha' - alpha^2)(1 - alpha^2) / (8 alpha)`.
pub fn pseudospectral_step(alpha: f64, alpha_next: f64, eps: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", "must lie in (0, 1)"));
    }
    if !(alpha_next > alpha * alpha) {
        return Err(Error::param("alpha_next", "must exceed alpha^2"));
    }
    Ok(eps * (alpha_next - alpha * alpha) * (1.0 - alpha * alpha) / (8.0 * alpha))
}

/// `(1/eps, 4 alpha / ((1 - alpha)^2 eps))`: bounds on `‖A^{-1}‖` and `‖A‖`.
pub fn condition_bounds_from_pseudospectrum(alpha: f64, eps: f64) -> (f64, f64) {
    (1.0 / eps, 4.0 * alpha / ((1.0 - alpha).powi(2) * eps))
}

/// `(eps/2, 1 - eps/diag^2)` for a grid with a line on the imaginary axis.
pub fn sgn_params_from_shattering(eps: f64, grid: &Grid) -> Result<(f64, f64)> {
    if grid.line_on_imaginary_axis().is_none() {
        return Err(Error::Precondition("grid has no line on the imaginary axis".into()));
    }
    Ok(params_from_diag_sq(eps, grid.diag_sq()))
}

pub(crate) fn params_from_diag_sq(eps: f64, diag_sq: f64) -> (f64, f64) {
    (eps / 2.0, 1.0 - eps / diag_sq)
}

/// Precision needed for the sign iteration to meet its guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRequirement {
    /// `lg` of the largest admissible unit roundoff.
    pub log2_u_max: f64,
    /// `lg(1/u)`.
    pub bits: f64,
    pub steps: usize,
    /// True when more than 53 bits are needed.
    pub exceeds_hardware: bool,
}

pub(crate) fn sgn_precision_lg(
    n: usize,
    s: f64,
    steps: usize,
    profile: &BackendProfile,
) -> PrecisionRequirement {
    let n_f = n.max(1) as f64;
    let lg_inv_alpha = -(-s).ln_1p() / LN2;
    let exponent = 2f64.powi(steps as i32 + 1) * (profile.inv_exponent * n_f.ln() + 3.0);
    let prefactor = (2.0 * profile.mu_inv(n.max(1)) * n_f.sqrt() * steps as f64).log2();
    let bits = exponent * lg_inv_alpha + prefactor;
    PrecisionRequirement {
        log2_u_max: -bits,
        bits,
        steps,
        exceeds_hardware: bits > 53.0,
    }
}

/// `lg` of `alpha0^(2^(N+1)(c ln n + 3)) / (2 mu_inv(n) sqrt(n) N)` and the bit count.
pub fn required_precision_sgn(
    n: usize,
    alpha0: f64,
    eps0: f64,
    beta: f64,
    profile: &BackendProfile,
) -> Result<PrecisionRequirement> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    profile.validate()?;
    let steps = sgn_iteration_count(alpha0, eps0, beta)?;
    Ok(sgn_precision_lg(n, 1.0 - alpha0, steps, profile))
}

/// [`required_precision_sgn`] with the start given by `s = 1 - alpha0`, which
/// stays exact when `alpha0` is too close to 1 to be represented.
pub fn required_precision_sgn_gap(
    n: usize,
    s: f64,
    eps0: f64,
    beta: f64,
    profile: &BackendProfile,
) -> Result<PrecisionRequirement> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", "must lie in (0, 1)"));
    }
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return Err(Error::param("eps0", "must lie in (0, 1)"));
    }
    if !(beta > 0.0 && beta < 1.0 / 12.0) {
        return Err(Error::param("beta", "must lie in (0, 1/12)"));
    }
    profile.validate()?;
    let steps = steps_from_formula(iteration_formula_lg(s, eps0, -beta.log2()));
    Ok(sgn_precision_lg(n, s, steps, profile))
}

/// Options for [`sgn_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgnOptions {
    /// Stop once consecutive iterates differ by at most `beta / 4` in Frobenius norm.
    pub early_stop: bool,
    /// Record spectral norms of every iterate and its inverse.
    pub record_norms: bool,
}

impl Default for SgnOptions {
    fn default() -> Self {
        SgnOptions {
            early_stop: false,
            record_norms: true,
        }
    }
}

/// Diagnostics of one sign computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgnTrace {
    pub iterates_norms: Vec<(f64, f64)>,
    pub n_steps: usize,
    pub planned_steps: usize,
    pub predicted_alpha: Vec<f64>,
    pub predicted_eps_floor: Vec<f64>,
    pub formula_regime: bool,
    pub precision: PrecisionRequirement,
}

/// Newton iteration `A <- (A + A^{-1}) / 2` for the planned number of steps.
pub fn sgn(a: &CMatrix, params: &SgnParams) -> Result<(CMatrix, SgnTrace)> {
    sgn_with(a, params, &SgnOptions::default())
}

pub fn sgn_with(a: &CMatrix, params: &SgnParams, opts: &SgnOptions) -> Result<(CMatrix, SgnTrace)> {
    params.validate()?;
    let steps = sgn_iteration_count(params.alpha0, params.eps0, params.beta)?;
    let (s, trace) = run_newton(a, params.beta, steps, opts)?;
    let precision = sgn_precision_lg(a.rows(), params.s(), steps, &BackendProfile::default());
    Ok((
        s,
        SgnTrace {
            iterates_norms: trace.0,
            n_steps: trace.1,
            planned_steps: steps,
            predicted_alpha: alpha_sequence(params.alpha0, steps),
            predicted_eps_floor: eps_floor_sequence(params.alpha0, params.eps0, steps),
            formula_regime: iteration_formula_regime(params.alpha0),
            precision,
        },
    ))
}

type NewtonLog = (Vec<(f64, f64)>, usize);

pub(crate) fn run_newton(a: &CMatrix, beta: f64, steps: usize, opts: &SgnOptions) -> Result<(CMatrix, NewtonLog)> {
    if !a.is_square() {
        return Err(Error::Dimension("sign function needs a square matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("sign iteration input"));
    }
    let mut x = a.clone();
    let mut norms = Vec::new();
    let mut taken = 0;
    for k in 0..steps {
        let lu = lu_factor(&x).map_err(|e| match e {
            Error::Singular { .. } => Error::IllConditionedIterate {
                step: k,
                pivot_ratio: 0.0,
            },
            other => other,
        })?;
        let ratio = lu.pivot_ratio();
        if ratio < 10.0 * UNIT_ROUNDOFF {
            return Err(Error::IllConditionedIterate {
                step: k,
                pivot_ratio: ratio,
            });
        }
        let inv = lu.inverse();
        if opts.record_norms {
            norms.push((op_norm(&x)?, op_norm(&inv)?));
        }
        let next = (&x + &inv).scaled(Complex64::new(0.5, 0.0));
        if !next.is_finite() {
            return Err(Error::NonFinite("sign iteration"));
        }
        taken = k + 1;
        let change = (&next - &x).frobenius_norm();
        x = next;
        if opts.early_stop && change <= beta / 4.0 {
            break;
        }
    }
    Ok((x, (norms, taken)))
}
