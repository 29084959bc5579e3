//! Spectral bisection: counting eigenvalues on either side of a grid line
//! through the trace of the sign function, and building the projectors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Orientation};
use crate::numkit::{op_norm, trace, CMatrix};
use crate::sgn::{
    iteration_formula_lg, params_from_diag_sq, run_newton, sgn_iteration_count_lg, sgn_params_from_shattering,
    steps_from_formula, SgnOptions,
};

/// Largest distance of the sign-estimate trace from an integer that still
/// counts as a clean eigenvalue census.
pub const TRACE_TOLERANCE: f64 = 0.3;

/// Outcome of a successful bisection.
#[derive(Clone, Debug)]
pub struct SplitResult {
    pub p_plus: CMatrix,
    pub p_minus: CMatrix,
    pub g_plus: Grid,
    pub g_minus: Grid,
    pub n_plus: usize,
    pub n_minus: usize,
    /// `h` for a vertical line `Re z = h`; `i c` for a horizontal line `Im z = c`.
    pub shift_used: Complex64,
    pub orientation: Orientation,
    pub line_index: u64,
    /// Number of sign computations performed.
    pub probes: usize,
}

/// Serializable summary of a [`SplitResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub n_plus: usize,
    pub n_minus: usize,
    pub shift_used: [f64; 2],
    pub orientation: Orientation,
    pub line_index: u64,
    pub probes: usize,
    pub g_plus: Grid,
    pub g_minus: Grid,
}

impl SplitResult {
    pub fn summary(&self) -> SplitSummary {
        SplitSummary {
            n_plus: self.n_plus,
            n_minus: self.n_minus,
            shift_used: [self.shift_used.re, self.shift_used.im],
            orientation: self.orientation,
            line_index: self.line_index,
            probes: self.probes,
            g_plus: self.g_plus,
            g_minus: self.g_minus,
        }
    }
}

struct Census {
    count: i64,
    sign: CMatrix,
}

fn census(m: &CMatrix, eps0: f64, alpha0: f64, lg_inv_beta: f64) -> Result<Census> {
    let n = m.rows() as i64;
    let steps = sgn_iteration_count_lg(alpha0, eps0, lg_inv_beta)?;
    let opts = SgnOptions {
        early_stop: false,
        record_norms: false,
    };
    let (sign, _) = run_newton(m, 2f64.powf(-lg_inv_beta), steps, &opts)?;
    let tr = trace(&sign)?.re;
    let k = tr.round();
    if (tr - k).abs() > TRACE_TOLERANCE || !k.is_finite() {
        return Err(Error::AmbiguousCount { trace: tr });
    }
    let count = k as i64;
    if count.abs() > n || (n - count).rem_euclid(2) != 0 {
        return Err(Error::AmbiguousCount { trace: tr });
    }
    Ok(Census { count, sign })
}

fn check_beta(beta: f64, n: usize) -> Result<()> {
    if !(beta > 0.0) || beta > 0.05 / n as f64 {
        return Err(Error::param("beta", "must lie in (0, 0.05/n]"));
    }
    Ok(())
}

/// `n_+ - n_-` for the vertical line `Re z = h`, read off the trace of the
/// approximate sign of `A - hI`.
pub fn eig_count_signed(a: &CMatrix, h: f64, eps: f64, g: &Grid, beta: f64) -> Result<i64> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::Dimension("eigenvalue count needs a nonempty square matrix".into()));
    }
    check_beta(beta, a.rows())?;
    let shifted_grid = g.translated(Complex64::new(-h, 0.0));
    let (eps0, alpha0) = sgn_params_from_shattering(eps, &shifted_grid)?;
    let m = a.shifted(Complex64::new(h, 0.0));
    Ok(census(&m, eps0, alpha0, -beta.log2())?.count)
}

/// Steps per sign computation inside a split on the standard `8 x 8` region.
pub fn split_iteration_budget(eps: f64, beta: f64) -> Result<usize> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::param("eps", "must lie in (0, 1/2]"));
    }
    if !(beta > 0.0 && beta < 1.0 / 12.0) {
        return Err(Error::param("beta", "must lie in (0, 1/12)"));
    }
    Ok(steps_from_formula(iteration_formula_lg(eps / 256.0, eps / 4.0, -beta.log2())))
}

/// Largest admissible `|n_+ - n_-|` for an `n x n` problem.
pub fn balance_threshold(n: usize) -> i64 {
    if n > 5 {
        (3 * n / 5) as i64
    } else {
        n as i64 - 2
    }
}

/// Bisects the spectrum of `a` along a grid line.
pub fn split(a: &CMatrix, eps: f64, g: &Grid, beta: f64) -> Result<SplitResult> {
    if a.is_square() {
        check_beta(beta, a.rows())?;
    }
    split_lg(a, eps, g, -beta.log2())
}

pub(crate) fn split_lg(a: &CMatrix, eps: f64, g: &Grid, lg_inv_beta: f64) -> Result<SplitResult> {
    if !a.is_square() {
        return Err(Error::Dimension("split needs a square matrix".into()));
    }
    let n = a.rows();
    if n < 2 {
        return Err(Error::param("A", "split needs at least a 2 x 2 matrix"));
    }
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::param("eps", "must lie in (0, 1/2]"));
    }
    let norm = op_norm(a)?;
    if norm > 4.0 {
        return Err(Error::Precondition(format!("‖A‖ = {norm} exceeds 4")));
    }
    let (eps0, alpha0) = params_from_diag_sq(eps / 2.0, g.diag_sq());
    let threshold = balance_threshold(n);
    let mut probes = 0;
    for orientation in [Orientation::Vertical, Orientation::Horizontal] {
        let (lines, rotated) = match orientation {
            Orientation::Vertical => (g.s1, a.clone()),
            Orientation::Horizontal => (g.s2, a.scaled(Complex64::new(0.0, -1.0))),
        };
        let position = |k: u64| match orientation {
            Orientation::Vertical => g.vertical_line(k),
            Orientation::Horizontal => g.horizontal_line(k),
        };
        let (mut lo, mut hi) = (0u64, lines);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let h = position(mid);
            let c = census(&rotated.shifted(Complex64::new(h, 0.0)), eps0, alpha0, lg_inv_beta)?;
            probes += 1;
            if c.count.abs() <= threshold {
                return finish(n, c, orientation, mid, h, g, probes);
            }
            if c.count > threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Err(Error::NoBalancedSplit)
}

fn finish(
    n: usize,
    c: Census,
    orientation: Orientation,
    k: u64,
    h: f64,
    g: &Grid,
    probes: usize,
) -> Result<SplitResult> {
    let id = CMatrix::identity(n);
    let half = Complex64::new(0.5, 0.0);
    let p_plus = (&c.sign + &id).scaled(half);
    let p_minus = (&id - &c.sign).scaled(half);
    let n_plus = ((n as i64 + c.count) / 2) as usize;
    let n_minus = n - n_plus;
    let ((g_minus, g_plus), shift_used) = match orientation {
        Orientation::Vertical => (g.split_vertical(k)?, Complex64::new(h, 0.0)),
        Orientation::Horizontal => (g.split_horizontal(k)?, Complex64::new(0.0, h)),
    };
    Ok(SplitResult {
        p_plus,
        p_minus,
        g_plus,
        g_minus,
        n_plus,
        n_minus,
        shift_used,
        orientation,
        line_index: k,
        probes,
    })
}
