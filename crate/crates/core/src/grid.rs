//! Square grids in the complex plane, shattering certificates and the
//! spectral diagnostics built on the reference eigendecomposition.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{sigma_min_shifted, CMatrix, UNIT_ROUNDOFF};
use crate::spectrum::{dense_eig, Eigensystem};

/// Axis-aligned grid of `s1 x s2` squares of side `omega` whose bottom-left
/// corner is `z0`. Squares are half-open: `[x, x + omega) x [y, y + omega)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub z0_re: f64,
    pub z0_im: f64,
    pub omega: f64,
    pub s1: u64,
    pub s2: u64,
}

/// Which family of grid lines a split uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Vertical,
    Horizontal,
}

impl Grid {
    pub fn new(z0: Complex64, omega: f64, s1: u64, s2: u64) -> Result<Grid> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::param("omega", "must be positive and finite"));
        }
        if s1 == 0 || s2 == 0 {
            return Err(Error::param("s1/s2", "grid needs at least one square per side"));
        }
        if !z0.re.is_finite() || !z0.im.is_finite() {
            return Err(Error::param("z0", "must be finite"));
        }
        Ok(Grid {
            z0_re: z0.re,
            z0_im: z0.im,
            omega,
            s1,
            s2,
        })
    }

    pub fn z0(&self) -> Complex64 {
        Complex64::new(self.z0_re, self.z0_im)
    }

    /// Length of the grid diagonal.
    pub fn diag(&self) -> f64 {
        self.omega * ((self.s1 as f64).powi(2) + (self.s2 as f64).powi(2)).sqrt()
    }

    pub fn diag_sq(&self) -> f64 {
        self.omega * self.omega * ((self.s1 as f64).powi(2) + (self.s2 as f64).powi(2))
    }

    /// Real part of vertical line `k`, `0 <= k <= s1`.
    pub fn vertical_line(&self, k: u64) -> f64 {
        self.z0_re + k as f64 * self.omega
    }

    /// Imaginary part of horizontal line `k`, `0 <= k <= s2`.
    pub fn horizontal_line(&self, k: u64) -> f64 {
        self.z0_im + k as f64 * self.omega
    }

    fn cell(offset: f64, omega: f64, count: u64) -> Option<u64> {
        if !(offset >= 0.0) {
            return None;
        }
        let idx = (offset / omega).floor();
        if idx >= count as f64 {
            return None;
        }
        Some(idx as u64)
    }

    /// Index `(column, row)` of the square containing `z`.
    pub fn square_of(&self, z: Complex64) -> Option<(u64, u64)> {
        let i = Self::cell(z.re - self.z0_re, self.omega, self.s1)?;
        let j = Self::cell(z.im - self.z0_im, self.omega, self.s2)?;
        Some((i, j))
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.square_of(z).is_some()
    }

    pub fn translated(&self, shift: Complex64) -> Grid {
        Grid {
            z0_re: self.z0_re + shift.re,
            z0_im: self.z0_im + shift.im,
            ..*self
        }
    }

    /// Index of a vertical line lying on the imaginary axis, if any.
    pub fn line_on_imaginary_axis(&self) -> Option<u64> {
        let k = (-self.z0_re / self.omega).round();
        if k < 0.0 || k > self.s1 as f64 {
            return None;
        }
        let x = self.z0_re + k * self.omega;
        (x.abs() <= 1e-9 * self.omega.max(self.z0_re.abs())).then_some(k as u64)
    }

    /// Sub-grids left and right of vertical line `k`.
    pub fn split_vertical(&self, k: u64) -> Result<(Grid, Grid)> {
        if k == 0 || k >= self.s1 {
            return Err(Error::param("k", "split line must be interior"));
        }
        let left = Grid { s1: k, ..*self };
        let right = Grid {
            z0_re: self.vertical_line(k),
            s1: self.s1 - k,
            ..*self
        };
        Ok((left, right))
    }

    /// Sub-grids below and above horizontal line `k`.
    pub fn split_horizontal(&self, k: u64) -> Result<(Grid, Grid)> {
        if k == 0 || k >= self.s2 {
            return Err(Error::param("k", "split line must be interior"));
        }
        let below = Grid { s2: k, ..*self };
        let above = Grid {
            z0_im: self.horizontal_line(k),
            s2: self.s2 - k,
            ..*self
        };
        Ok((below, above))
    }
}

/// How a shattering was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShatterMode {
    Theoretical,
    Empirical,
}

/// A perturbed matrix together with a grid whose lines stay outside its
/// `epsilon`-pseudospectrum.
#[derive(Clone, Debug)]
pub struct ShatterCert {
    pub matrix: CMatrix,
    pub grid: Grid,
    pub epsilon: f64,
    pub gamma: f64,
    pub mode: ShatterMode,
    /// True when the line margins were checked numerically.
    pub certified: bool,
    /// True when the parameters demand more precision than `f64` offers.
    pub below_hardware_precision: bool,
    pub attempts: usize,
}

impl ShatterCert {
    pub fn new(matrix: CMatrix, grid: Grid, epsilon: f64, gamma: f64, mode: ShatterMode) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if epsilon > grid.omega / 2.0 {
            return Err(Error::param("epsilon", "cannot exceed half the grid spacing"));
        }
        if !matrix.is_square() {
            return Err(Error::Dimension("shattered matrix must be square".into()));
        }
        Ok(ShatterCert {
            matrix,
            grid,
            epsilon,
            gamma,
            mode,
            certified: false,
            below_hardware_precision: false,
            attempts: 1,
        })
    }
}

/// Whether `z` lies in the open `eps`-pseudospectrum of `a`.
pub fn pseudospectrum_member(a: &CMatrix, eps: f64, z: Complex64) -> Result<bool> {
    if !(eps > 0.0) {
        return Err(Error::param("eps", "must be positive"));
    }
    Ok(sigma_min_shifted(a, z)? < eps)
}

const DEFECTIVE_CONDITION: f64 = 1.0 / (1000.0 * UNIT_ROUNDOFF);

fn checked_eigensystem(a: &CMatrix) -> Result<(Eigensystem, f64)> {
    let es = dense_eig(a)?;
    let cond = es.vector_condition()?;
    if !(cond < DEFECTIVE_CONDITION) {
        return Err(Error::Defective { condition: cond });
    }
    Ok((es, cond))
}

/// Upper bound `sqrt(n * sum kappa(lambda_i)^2)` on the eigenvector condition number.
pub fn kappa_v_upper(a: &CMatrix) -> Result<f64> {
    let (es, _) = checked_eigensystem(a)?;
    let kappas = es.eigenvalue_conditions()?;
    let n = kappas.len() as f64;
    let s: f64 = kappas.iter().map(|k| k * k).sum();
    Ok((n * s).sqrt())
}

/// Smallest distance between two eigenvalues (infinite for `1 x 1`).
pub fn min_gap(a: &CMatrix) -> Result<f64> {
    let vals = dense_eig(a)?.values;
    Ok(gap_of(&vals))
}

pub(crate) fn gap_of(vals: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            best = best.min((vals[i] - vals[j]).norm());
        }
    }
    best
}

/// A reason a grid fails to shatter a matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OutsideGrid { eigenvalue: [f64; 2] },
    SharedSquare { square: [u64; 2], count: usize },
    LineTooClose { point: [f64; 2], sigma: f64 },
}

/// Outcome of [`certify_shattered`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateReport {
    pub certified: bool,
    pub epsilon: f64,
    /// Smallest `sigma_min(zI - A)` over the line mesh.
    pub min_line_sigma: f64,
    pub argmin: [f64; 2],
    /// `min_line_sigma - epsilon`.
    pub margin: f64,
    /// Distance between neighbouring mesh points.
    pub mesh_spacing: f64,
    /// `min_line_sigma - mesh_spacing / 2`, valid for every point on the lines.
    pub line_lower_bound: f64,
    pub squares: Vec<[u64; 2]>,
    pub violation: Option<Violation>,
    pub evaluations: usize,
}

/// Result of a mesh search for the smallest singular value on grid lines.
#[derive(Clone, Copy, Debug)]
pub struct LineMinimum {
    pub sigma: f64,
    pub point: Complex64,
    pub evaluations: usize,
}

struct LineSearch<'a> {
    a: &'a CMatrix,
    values: &'a [Complex64],
    kappa: f64,
    best: f64,
    point: Complex64,
    evaluations: usize,
    stop_below: f64,
}

impl LineSearch<'_> {
    fn eval(&mut self, z: Complex64) -> Result<f64> {
        let s = sigma_min_shifted(self.a, z)?;
        self.evaluations += 1;
        if s < self.best {
            self.best = s;
            self.point = z;
        }
        Ok(s)
    }

    fn done(&self) -> bool {
        self.best < self.stop_below
    }

    fn segment_distance(&self, p: Complex64, q: Complex64) -> f64 {
        let d = q - p;
        let len2 = d.norm_sqr();
        self.values
            .iter()
            .map(|&l| {
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((l - p) * d.conj()).re / len2).clamp(0.0, 1.0)
                };
                (p + d * t - l).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Branch and bound over mesh indices `0..=count` of the line `base + t * step`.
    fn scan_line(&mut self, base: Complex64, step: Complex64, count: u64) -> Result<()> {
        let h = step.norm();
        let mut stack = vec![(0u64, count)];
        while let Some((lo, hi)) = stack.pop() {
            if self.done() {
                return Ok(());
            }
            let p = base + step * lo as f64;
            let q = base + step * hi as f64;
            if self.segment_distance(p, q) / self.kappa >= self.best {
                continue;
            }
            let mid = lo + (hi - lo) / 2;
            let s = self.eval(base + step * mid as f64)?;
            let reach = (mid - lo).max(hi - mid) as f64 * h;
            if s - reach >= self.best {
                continue;
            }
            if mid > lo {
                stack.push((lo, mid - 1));
            }
            if mid < hi {
                stack.push((mid + 1, hi));
            }
        }
        Ok(())
    }
}

fn line_minimum_with(
    a: &CMatrix,
    g: &Grid,
    mesh_per_segment: u64,
    es: &Eigensystem,
    cond: f64,
    stop_below: f64,
) -> Result<LineMinimum> {
    if mesh_per_segment == 0 {
        return Err(Error::param("mesh_per_segment", "must be positive"));
    }
    let h = g.omega / mesh_per_segment as f64;
    let mut search = LineSearch {
        a,
        values: &es.values,
        kappa: 1.5 * cond,
        best: f64::INFINITY,
        point: g.z0(),
        evaluations: 0,
        stop_below,
    };
    let v_count = g.s2 * mesh_per_segment;
    let h_count = g.s1 * mesh_per_segment;
    let clamp_line = |x: f64, n: u64| -> u64 { x.max(0.0).min(n as f64) as u64 };
    for &l in &es.values {
        let kv = ((l.re - g.z0_re) / g.omega).floor();
        let kh = ((l.im - g.z0_im) / g.omega).floor();
        let tv = clamp_line(((l.im - g.z0_im) / h).round(), v_count);
        let th = clamp_line(((l.re - g.z0_re) / h).round(), h_count);
        for k in [kv, kv + 1.0] {
            let k = clamp_line(k, g.s1);
            search.eval(Complex64::new(g.vertical_line(k), g.z0_im + tv as f64 * h))?;
        }
        for k in [kh, kh + 1.0] {
            let k = clamp_line(k, g.s2);
            search.eval(Complex64::new(g.z0_re + th as f64 * h, g.horizontal_line(k)))?;
        }
    }
    let reach = search.kappa * search.best;
    let mut vertical = BTreeSet::new();
    let mut horizontal = BTreeSet::new();
    for &l in &es.values {
        let lo = clamp_line(((l.re - reach - g.z0_re) / g.omega).ceil(), g.s1);
        let hi = clamp_line(((l.re + reach - g.z0_re) / g.omega).floor(), g.s1);
        vertical.extend(lo..=hi);
        let lo = clamp_line(((l.im - reach - g.z0_im) / g.omega).ceil(), g.s2);
        let hi = clamp_line(((l.im + reach - g.z0_im) / g.omega).floor(), g.s2);
        horizontal.extend(lo..=hi);
    }
    for k in vertical {
        search.scan_line(
            Complex64::new(g.vertical_line(k), g.z0_im),
            Complex64::new(0.0, h),
            v_count,
        )?;
    }
    for k in horizontal {
        search.scan_line(
            Complex64::new(g.z0_re, g.horizontal_line(k)),
            Complex64::new(h, 0.0),
            h_count,
        )?;
    }
    Ok(LineMinimum {
        sigma: search.best,
        point: search.point,
        evaluations: search.evaluations,
    })
}

pub(crate) fn line_minimum_checked(
    a: &CMatrix,
    g: &Grid,
    mesh_per_segment: u64,
    es: &Eigensystem,
) -> Result<LineMinimum> {
    let cond = es.vector_condition()?;
    if !(cond < DEFECTIVE_CONDITION) {
        return Err(Error::Defective { condition: cond });
    }
    line_minimum_with(a, g, mesh_per_segment, es, cond, f64::NEG_INFINITY)
}

/// Smallest `sigma_min(zI - A)` over the mesh points of every grid line.
pub fn line_sigma_minimum(a: &CMatrix, g: &Grid, mesh_per_segment: u64) -> Result<LineMinimum> {
    let (es, cond) = checked_eigensystem(a)?;
    line_minimum_with(a, g, mesh_per_segment, &es, cond, f64::NEG_INFINITY)
}

/// Checks that every eigenvalue of `a` sits in its own grid square and that
/// every line mesh point is at least `eps` from the pseudospectrum boundary.
pub fn certify_shattered(a: &CMatrix, g: &Grid, eps: f64, mesh_per_segment: u64) -> Result<CertificateReport> {
    if !a.is_square() {
        return Err(Error::Dimension("certification needs a square matrix".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::param("eps", "must be positive"));
    }
    if mesh_per_segment == 0 {
        return Err(Error::param("mesh_per_segment", "must be positive"));
    }
    let (es, cond) = checked_eigensystem(a)?;
    let spacing = g.omega / mesh_per_segment as f64;
    let mut report = CertificateReport {
        certified: false,
        epsilon: eps,
        min_line_sigma: f64::NAN,
        argmin: [f64::NAN; 2],
        margin: f64::NAN,
        mesh_spacing: spacing,
        line_lower_bound: f64::NAN,
        squares: Vec::with_capacity(es.values.len()),
        violation: None,
        evaluations: 0,
    };
    for &l in &es.values {
        match g.square_of(l) {
            Some((i, j)) => report.squares.push([i, j]),
            None => {
                report.violation = Some(Violation::OutsideGrid { eigenvalue: [l.re, l.im] });
                return Ok(report);
            }
        }
    }
    let mut sorted = report.squares.clone();
    sorted.sort();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            let count = sorted.iter().filter(|s| **s == w[0]).count();
            report.violation = Some(Violation::SharedSquare { square: w[0], count });
            return Ok(report);
        }
    }
    let found = line_minimum_with(a, g, mesh_per_segment, &es, cond, eps)?;
    report.min_line_sigma = found.sigma;
    report.argmin = [found.point.re, found.point.im];
    report.margin = found.sigma - eps;
    report.line_lower_bound = found.sigma - spacing / 2.0;
    report.evaluations = found.evaluations;
    if found.sigma < eps {
        report.violation = Some(Violation::LineTooClose {
            point: [found.point.re, found.point.im],
            sigma: found.sigma,
        });
    } else {
        report.certified = true;
    }
    Ok(report)
}
