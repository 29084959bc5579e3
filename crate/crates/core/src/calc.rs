//! Closed-form bounds and parameter calculators, evaluated in log space
//! where the raw values leave the `f64` range.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eig::{eig_precision_requirement, inner_delta, split_lg_beta};
use crate::error::{Error, Result};
use crate::numkit::{op_norm, sigma_min_shifted, BackendProfile, CMatrix, UNIT_ROUNDOFF};
use crate::randmat::{ginibre_sigma_tail, haar_corner_sigma_min_cdf};
use crate::sgn::{required_precision_sgn, sgn_iteration_count};
use crate::shatter::{gap_tail_bound, smoothed_bounds, theoretical_grid_parameters};
use crate::spectrum::eigenvalues;
use crate::split::split_iteration_budget;

/// Points of the first pass of [`kappa_sign_estimate`].
pub const AXIS_MESH: usize = 512;

/// One evaluated formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormulaReport {
    pub name: String,
    pub inputs: BTreeMap<String, f64>,
    pub value: f64,
    pub log2_value: f64,
    /// Secondary quantities produced by the same evaluation.
    pub details: BTreeMap<String, f64>,
    pub in_hardware_range: bool,
}

fn lg(x: f64) -> f64 {
    x.log2()
}

/// Smallest `j` with `j >= lg(1/t) + 2 lg lg(1/t) + lg lg(1/c) + 1.62`.
pub fn prelim_n_bound(t: f64, c: f64) -> Result<u32> {
    if !(t > 0.0 && t < 1.0 / 800.0) {
        return Err(Error::param("t", "must lie in (0, 1/800)"));
    }
    if !(c > 0.0 && c <= 0.5) {
        return Err(Error::param("c", "must lie in (0, 1/2]"));
    }
    let x = lg(1.0 / t) + 2.0 * lg(lg(1.0 / t)) + lg(lg(1.0 / c)) + 1.62;
    Ok(x.ceil() as u32)
}

/// `ln((1 - t)^(2^j) / t^(2j))`.
pub fn prelim_log_ratio(t: f64, j: u32) -> f64 {
    2f64.powi(j as i32) * (-t).ln_1p() - 2.0 * j as f64 * t.ln()
}

/// Whether `(1 - t)^(2^j) / t^(2j) < c`.
pub fn verify_prelim(t: f64, c: f64, j: u32) -> bool {
    prelim_log_ratio(t, j) < c.ln()
}

/// `lg` of `(‖A‖ + ‖A^{-1}‖ + mu_inv(n) κ^(c ln n) ‖A^{-1}‖) 4 sqrt(n) u`.
pub fn one_step_error_bound_lg(
    norm_a: f64,
    norm_ainv: f64,
    kappa: f64,
    n: usize,
    profile: &BackendProfile,
) -> Result<f64> {
    for (name, v) in [("norm_a", norm_a), ("norm_ainv", norm_ainv), ("kappa", kappa)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, "must be positive and finite"));
        }
    }
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    profile.validate()?;
    let nf = n as f64;
    let lg_power = profile.inv_exponent * nf.ln() * lg(kappa) + lg(profile.mu_inv(n)) + lg(norm_ainv);
    let lg_rest = lg(norm_a + norm_ainv);
    let hi = lg_power.max(lg_rest);
    let lg_sum = hi + lg(2f64.powf(lg_power - hi) + 2f64.powf(lg_rest - hi));
    Ok(lg_sum + lg(4.0 * nf.sqrt() * profile.unit_roundoff))
}

/// Additive error of one computed Newton step `(A + A^{-1}) / 2`.
pub fn one_step_error_bound(
    norm_a: f64,
    norm_ainv: f64,
    kappa: f64,
    n: usize,
    profile: &BackendProfile,
) -> Result<f64> {
    Ok(2f64.powf(one_step_error_bound_lg(norm_a, norm_ainv, kappa, n, profile)?))
}

/// Failure probabilities of deflation under the two available constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeflateFailure {
    /// `min(1, (20n)^3 sqrt(beta) / eta^2)`.
    pub coarse_bound: f64,
    /// `min(1, 6000 n^3 sqrt(beta) / eta^2)`.
    pub sharp_bound: f64,
}

impl DeflateFailure {
    pub fn looser(&self) -> f64 {
        self.coarse_bound.max(self.sharp_bound)
    }
}

pub fn deflate_failure_bound(n: usize, beta: f64, eta: f64) -> Result<DeflateFailure> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    if !(0.0..=0.25).contains(&beta) {
        return Err(Error::param("beta", "must lie in [0, 1/4]"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param("eta", "must lie in (0, 1)"));
    }
    let nf = n as f64;
    let core = beta.sqrt() / (eta * eta);
    Ok(DeflateFailure {
        coarse_bound: ((20.0 * nf).powi(3) * core).min(1.0),
        sharp_bound: (6000.0 * nf.powi(3) * core).min(1.0),
    })
}

/// `lg` of the unclamped coarse failure bound when `beta` is known only through `lg beta`.
pub fn deflate_failure_bound_lg(n: usize, lg_beta: f64, eta: f64) -> f64 {
    3.0 * lg(20.0 * n as f64) + 0.5 * lg_beta - 2.0 * lg(eta)
}

fn axis_sweep(a: &CMatrix, lo: f64, hi: f64, points: usize) -> Result<(f64, f64)> {
    let mut best = (f64::INFINITY, lo);
    for k in 0..points {
        let t = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        let s = sigma_min_shifted(a, num_complex::Complex64::new(0.0, t))?;
        if s < best.0 {
            best = (s, t);
        }
    }
    Ok(best)
}

/// `1 / eps^2` for the largest `eps` whose pseudospectrum misses the
/// imaginary axis, estimated on a mesh of `points` with one refinement pass.
pub fn kappa_sign_estimate_with(a: &CMatrix, points: usize) -> Result<f64> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::Dimension("kappa_sign needs a nonempty square matrix".into()));
    }
    if points < 3 {
        return Err(Error::param("points", "need at least 3 mesh points"));
    }
    let norm = op_norm(a)?;
    let tol = 10.0 * a.rows() as f64 * UNIT_ROUNDOFF * norm.max(1.0);
    if let Some(l) = eigenvalues(a)?.into_iter().find(|l| l.re.abs() <= tol) {
        return Err(Error::Precondition(format!("eigenvalue {l} lies on the imaginary axis")));
    }
    let reach = norm + 1.0;
    let (_, t_star) = axis_sweep(a, -reach, reach, points)?;
    let h = 2.0 * reach / (points - 1) as f64;
    let (sigma, _) = axis_sweep(a, t_star - h, t_star + h, points)?;
    Ok(1.0 / (sigma * sigma))
}

pub fn kappa_sign_estimate(a: &CMatrix) -> Result<f64> {
    kappa_sign_estimate_with(a, AXIS_MESH)
}

fn need(inputs: &BTreeMap<String, f64>, key: &'static str) -> Result<f64> {
    inputs
        .get(key)
        .copied()
        .ok_or_else(|| Error::param(key, "missing input"))
}

fn need_count(inputs: &BTreeMap<String, f64>, key: &'static str) -> Result<usize> {
    let v = need(inputs, key)?;
    if !(v >= 0.0 && v.fract() == 0.0 && v < 1e15) {
        return Err(Error::param(key, "must be a nonnegative integer"));
    }
    Ok(v as usize)
}

/// Formula identifiers understood by [`evaluate`], with their inputs.
pub const FORMULAS: &[(&str, &[&str])] = &[
    ("n-formula", &["alpha0", "eps0", "beta"]),
    ("split-budget", &["eps", "beta"]),
    ("prelim-n", &["t", "c"]),
    ("one-step-error", &["norm_a", "norm_ainv", "kappa", "n"]),
    ("deflate-failure", &["n", "beta", "eta"]),
    ("sgn-precision", &["n", "alpha0", "eps0", "beta"]),
    ("eig-precision", &["n", "eps", "delta", "theta"]),
    ("smoothed-bounds", &["n", "gamma"]),
    ("gap-tail", &["n", "gamma", "r"]),
    ("theoretical-grid", &["n", "gamma"]),
    ("haar-corner-cdf", &["n", "r", "theta"]),
    ("ginibre-tail", &["n", "j", "alpha"]),
    ("inner-delta", &["n", "delta"]),
    ("split-beta", &["delta", "eps", "theta", "n"]),
];

fn representable(v: f64) -> bool {
    v.is_finite() && (v == 0.0 || v.abs() >= f64::MIN_POSITIVE)
}

/// Evaluates the named formula on `inputs`.
pub fn evaluate(name: &str, inputs: &BTreeMap<String, f64>, profile: &BackendProfile) -> Result<FormulaReport> {
    let expected = FORMULAS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::param("formula", format!("unknown formula `{name}`")))?
        .1;
    let used: BTreeMap<String, f64> = expected
        .iter()
        .map(|k| need(inputs, k).map(|v| (k.to_string(), v)))
        .collect::<Result<_>>()?;
    let mut details = BTreeMap::new();
    let mut hardware = None;
    let (value, log2_value) = match name {
        "n-formula" => {
            let v = sgn_iteration_count(need(inputs, "alpha0")?, need(inputs, "eps0")?, need(inputs, "beta")?)? as f64;
            (v, lg(v))
        }
        "split-budget" => {
            let v = split_iteration_budget(need(inputs, "eps")?, need(inputs, "beta")?)? as f64;
            (v, lg(v))
        }
        "prelim-n" => {
            let (t, c) = (need(inputs, "t")?, need(inputs, "c")?);
            let j = prelim_n_bound(t, c)?;
            details.insert("log_ratio".into(), prelim_log_ratio(t, j));
            details.insert("verified".into(), f64::from(u8::from(verify_prelim(t, c, j))));
            (j as f64, lg(j as f64))
        }
        "one-step-error" => {
            let l = one_step_error_bound_lg(
                need(inputs, "norm_a")?,
                need(inputs, "norm_ainv")?,
                need(inputs, "kappa")?,
                need_count(inputs, "n")?,
                profile,
            )?;
            (2f64.powf(l), l)
        }
        "deflate-failure" => {
            let f = deflate_failure_bound(need_count(inputs, "n")?, need(inputs, "beta")?, need(inputs, "eta")?)?;
            details.insert("sharp_bound".into(), f.sharp_bound);
            (f.coarse_bound, lg(f.coarse_bound))
        }
        "sgn-precision" => {
            let p = required_precision_sgn(
                need_count(inputs, "n")?,
                need(inputs, "alpha0")?,
                need(inputs, "eps0")?,
                need(inputs, "beta")?,
                profile,
            )?;
            details.insert("steps".into(), p.steps as f64);
            details.insert("log2_u_max".into(), p.log2_u_max);
            hardware = Some(!p.exceeds_hardware);
            (p.bits, lg(p.bits))
        }
        "eig-precision" => {
            let p = eig_precision_requirement(
                need_count(inputs, "n")?,
                need(inputs, "eps")?,
                need(inputs, "delta")?,
                need(inputs, "theta")?,
                profile,
            )?;
            details.insert("steps".into(), p.steps as f64);
            details.insert("log2_u_max".into(), p.log2_u_max);
            hardware = Some(!p.exceeds_hardware);
            (p.bits, lg(p.bits))
        }
        "smoothed-bounds" => {
            let (k, g, f) = smoothed_bounds(need_count(inputs, "n")?, need(inputs, "gamma")?)?;
            details.insert("kappa_v_bound".into(), k);
            details.insert("gap_bound".into(), g);
            (f, lg(f))
        }
        "gap-tail" => {
            let v = gap_tail_bound(need_count(inputs, "n")?, need(inputs, "gamma")?, need(inputs, "r")?)?;
            (v, lg(v))
        }
        "theoretical-grid" => {
            let n = need_count(inputs, "n")?;
            if n == 0 {
                return Err(Error::param("n", "must be positive"));
            }
            let (omega, eps) = theoretical_grid_parameters(n, need(inputs, "gamma")?);
            details.insert("epsilon".into(), eps);
            (omega, lg(omega))
        }
        "haar-corner-cdf" => {
            let v = haar_corner_sigma_min_cdf(need_count(inputs, "n")?, need_count(inputs, "r")?, need(inputs, "theta")?)?;
            (v, lg(v))
        }
        "ginibre-tail" => {
            let v = ginibre_sigma_tail(need_count(inputs, "n")?, need_count(inputs, "j")?, need(inputs, "alpha")?)?;
            (v, lg(v))
        }
        "inner-delta" => {
            let n = need_count(inputs, "n")?;
            let d = need(inputs, "delta")?;
            if n == 0 || !(d > 0.0 && d < 1.0) {
                return Err(Error::param("delta", "need n >= 1 and delta in (0, 1)"));
            }
            let v = inner_delta(n, d);
            (v, lg(v))
        }
        "split-beta" => {
            let n = need_count(inputs, "n")?;
            let (d, e, t) = (need(inputs, "delta")?, need(inputs, "eps")?, need(inputs, "theta")?);
            if n == 0 || !(d > 0.0 && e > 0.0 && t > 0.0) {
                return Err(Error::param("n", "all inputs must be positive"));
            }
            let l = split_lg_beta(d, e, t, n);
            (2f64.powf(l), l)
        }
        _ => unreachable!("formula table and dispatch agree"),
    };
    Ok(FormulaReport {
        name: name.to_string(),
        inputs: used,
        value,
        log2_value,
        details,
        in_hardware_range: hardware.unwrap_or_else(|| representable(value)),
    })
}
