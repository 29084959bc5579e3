//! Recursive spectral bisection eigensolver, the perturb-then-solve backward
//! driver, and the forward-error wrapper.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::deflate::deflate;
use crate::error::{Error, Result};
use crate::grid::{kappa_v_upper, min_gap, Grid, ShatterMode};
use crate::numkit::{
    condition_number, mat_inv, mat_mul, normalize_columns, op_norm, BackendProfile, CMatrix, UNIT_ROUNDOFF,
};
use crate::randmat::{sample_ginibre, SeededRng};
use crate::sgn::{steps_from_formula, PrecisionRequirement};
use crate::shatter::{shatter, ShatterParams};
use crate::split::split_lg;

/// Denominator of the inner accuracy `delta^3 / (1536 n^2.5)` used by the backward driver.
pub const INNER_DELTA_DENOMINATOR: f64 = 1536.0;
/// Largest norm tolerated for any matrix handed to a split.
pub const SPLIT_NORM_LIMIT: f64 = 4.0;
/// Largest norm accepted by [`eig_shattered`] at the top level.
pub const TOP_LEVEL_NORM_LIMIT: f64 = 3.5;
pub const DEFAULT_RETRY_BUDGET: usize = 2;

/// Settings that apply at every level of the recursion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionOptions {
    /// Extra deflation attempts with fresh randomness after a sanity failure.
    pub retry_budget: usize,
    /// Solve the two halves of every split concurrently.
    pub parallel: bool,
    /// Add bounded random errors after every compression and assembly.
    pub inject_noise: bool,
}

impl Default for RecursionOptions {
    fn default() -> Self {
        RecursionOptions {
            retry_budget: DEFAULT_RETRY_BUDGET,
            parallel: false,
            inject_noise: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigParams {
    pub delta: f64,
    pub theta: f64,
    pub mode: ShatterMode,
    pub retry_budget: usize,
    pub parallel: bool,
    pub mesh_per_segment: u64,
    pub inject_noise: bool,
}

impl EigParams {
    pub fn new(delta: f64, theta: f64, mode: ShatterMode) -> Result<Self> {
        let p = EigParams {
            delta,
            theta,
            mode,
            retry_budget: DEFAULT_RETRY_BUDGET,
            parallel: false,
            mesh_per_segment: 64,
            inject_noise: false,
        };
        p.validate()?;
        Ok(p)
    }

    /// Single-shot behaviour: no retries anywhere.
    pub fn conformance(mut self) -> Self {
        self.retry_budget = 0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("delta", self.delta)?;
        check_unit("theta", self.theta)?;
        if self.mesh_per_segment == 0 {
            return Err(Error::param("mesh_per_segment", "must be positive"));
        }
        Ok(())
    }

    pub fn options(&self) -> RecursionOptions {
        RecursionOptions {
            retry_budget: self.retry_budget,
            parallel: self.parallel,
            inject_noise: self.inject_noise,
        }
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::param(name, "must lie in (0, 1)"));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct EigResult {
    /// Approximate eigenvectors as unit columns.
    pub v: CMatrix,
    /// Approximate eigenvalues, in the column order of `v`.
    pub d: Vec<Complex64>,
    /// `‖A - V D V^{-1}‖` against the caller's matrix.
    pub residual: f64,
    /// `‖V‖ ‖V^{-1}‖`.
    pub kappa_v: f64,
    /// Square of the top-level grid holding each eigenvalue.
    pub square_assignment: Vec<Option<[u64; 2]>>,
    pub depth: usize,
    pub grid: Grid,
    pub epsilon: f64,
    /// Full pipeline attempts used (1 when the first succeeded).
    pub attempts: usize,
    /// Whether the shattering margins were verified numerically.
    pub certified: bool,
    /// Whether the backward contract held; `None` for a bare [`eig_shattered`] call.
    pub contract_met: Option<bool>,
}

/// JSON form of an [`EigResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigReport {
    pub n: usize,
    pub delta: f64,
    pub mode: ShatterMode,
    pub seed: u64,
    pub eigenvalues: Vec<[f64; 2]>,
    pub residual: f64,
    pub kappa_v: f64,
    pub kappa_v_limit: f64,
    pub depth: usize,
    pub depth_limit: f64,
    pub square_assignment: Vec<Option<[u64; 2]>>,
    pub grid: Grid,
    pub epsilon: f64,
    pub certified: bool,
    pub attempts: usize,
    pub contract_met: Option<bool>,
}

impl EigResult {
    pub fn report(&self, delta: f64, mode: ShatterMode, seed: u64) -> EigReport {
        let n = self.d.len();
        EigReport {
            n,
            delta,
            mode,
            seed,
            eigenvalues: self.d.iter().map(|z| [z.re, z.im]).collect(),
            residual: self.residual,
            kappa_v: self.kappa_v,
            kappa_v_limit: kappa_v_limit(n, delta),
            depth: self.depth,
            depth_limit: depth_limit(n),
            square_assignment: self.square_assignment.clone(),
            grid: self.grid,
            epsilon: self.epsilon,
            certified: self.certified,
            attempts: self.attempts,
            contract_met: self.contract_met,
        }
    }
}

/// `32 n^2.5 / delta`.
pub fn kappa_v_limit(n: usize, delta: f64) -> f64 {
    32.0 * (n as f64).powf(2.5) / delta
}

/// `log_{5/4} n`.
pub fn depth_limit(n: usize) -> f64 {
    (n.max(1) as f64).ln() / 1.25f64.ln()
}

/// `‖A - V D V^{-1}‖`.
pub fn reconstruction_residual(a: &CMatrix, v: &CMatrix, d: &[Complex64]) -> Result<f64> {
    let vd = mat_mul(v, &CMatrix::from_diagonal(d))?;
    let rebuilt = mat_mul(&vd, &mat_inv(v)?)?;
    op_norm(&(a - &rebuilt))
}

/// `lg beta` for a split at accuracy `delta` and pseudospectral margin `eps`:
/// `beta = eta^4 / (20 n)^6 * theta^2 / (4 n^8)` with `eta = delta eps^2 / 200`.
pub fn split_lg_beta(delta: f64, eps: f64, theta: f64, n_global: usize) -> f64 {
    let n = n_global as f64;
    let lg_eta = delta.log2() + 2.0 * eps.log2() - 200f64.log2();
    4.0 * lg_eta - 6.0 * (20.0 * n).log2() + 2.0 * theta.log2() - 2.0 - 8.0 * n.log2()
}

struct Node {
    v: CMatrix,
    d: Vec<Complex64>,
    depth: usize,
}

struct Recursion {
    theta: f64,
    n_global: usize,
    opts: RecursionOptions,
}

/// `Q* A Q`.
pub(crate) fn compress(a: &CMatrix, q: &CMatrix) -> Result<CMatrix> {
    mat_mul(&q.adjoint(), &mat_mul(a, q)?)
}

fn add_noise(x: &CMatrix, rng: &mut SeededRng) -> Result<CMatrix> {
    let n = x.rows().max(x.cols());
    let size = BackendProfile::default().mu_mm(n) * UNIT_ROUNDOFF * op_norm(x)?;
    let e = sample_ginibre(n, rng)?;
    let e = e.scaled(Complex64::new(size / op_norm(&e)?, 0.0));
    let e = CMatrix::from_fn(x.rows(), x.cols(), |i, j| e[(i, j)]);
    Ok(x + &e)
}

impl Recursion {
    fn solve(&self, a: &CMatrix, delta: f64, g: &Grid, eps: f64, rng: &SeededRng) -> Result<Node> {
        let m = a.rows();
        if m == 1 {
            return Ok(Node {
                v: CMatrix::identity(1),
                d: vec![a[(0, 0)]],
                depth: 0,
            });
        }
        let norm = op_norm(a)?;
        if norm > SPLIT_NORM_LIMIT {
            return Err(Error::NormGrowth {
                norm,
                limit: SPLIT_NORM_LIMIT,
            });
        }
        let eta = delta * eps * eps / 200.0;
        let lg_beta = split_lg_beta(delta, eps, self.theta, self.n_global);
        let beta = 2f64.powf(lg_beta);
        let sp = split_lg(a, eps, g, -lg_beta)?;

        let (q_plus, q_minus) = self.deflate_pair(&sp.p_plus, sp.n_plus, &sp.p_minus, sp.n_minus, beta, eta, rng)?;
        let mut a_plus = compress(a, &q_plus)?;
        let mut a_minus = compress(a, &q_minus)?;
        if self.opts.inject_noise {
            a_plus = add_noise(&a_plus, &mut rng.derive(4))?;
            a_minus = add_noise(&a_minus, &mut rng.derive(5))?;
        }

        let (child_delta, child_eps) = (0.8 * delta, 0.8 * eps);
        let (rng_plus, rng_minus) = (rng.derive(2), rng.derive(3));
        let (plus, minus) = if self.opts.parallel {
            rayon::join(
                || self.solve(&a_plus, child_delta, &sp.g_plus, child_eps, &rng_plus),
                || self.solve(&a_minus, child_delta, &sp.g_minus, child_eps, &rng_minus),
            )
        } else {
            (
                self.solve(&a_plus, child_delta, &sp.g_plus, child_eps, &rng_plus),
                self.solve(&a_minus, child_delta, &sp.g_minus, child_eps, &rng_minus),
            )
        };
        let (plus, minus) = (plus?, minus?);

        let left = mat_mul(&q_plus, &plus.v)?;
        let right = mat_mul(&q_minus, &minus.v)?;
        let mut v = CMatrix::hstack(&[&left, &right])?;
        if self.opts.inject_noise {
            v = add_noise(&v, &mut rng.derive(6))?;
        }
        let v = normalize_columns(&v)?;
        let mut d = plus.d;
        d.extend(minus.d);
        Ok(Node {
            v,
            d,
            depth: 1 + plus.depth.max(minus.depth),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn deflate_pair(
        &self,
        p_plus: &CMatrix,
        n_plus: usize,
        p_minus: &CMatrix,
        n_minus: usize,
        beta: f64,
        eta: f64,
        rng: &SeededRng,
    ) -> Result<(CMatrix, CMatrix)> {
        let mut last = None;
        for attempt in 0..=self.opts.retry_budget {
            let base = if attempt == 0 { rng.clone() } else { rng.derive(10 + attempt as u64) };
            let pair = deflate(p_plus, n_plus, beta, eta, &mut base.derive(0))
                .and_then(|qp| Ok((qp, deflate(p_minus, n_minus, beta, eta, &mut base.derive(1))?)));
            match pair {
                Ok(p) => return Ok(p),
                Err(e @ Error::DeflateSanity(_)) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one deflation attempt"))
    }
}

/// Diagonalizes a matrix whose `eps`-pseudospectrum is shattered by `g`.
#[allow(clippy::too_many_arguments)]
pub fn eig_shattered(
    a: &CMatrix,
    delta: f64,
    g: &Grid,
    eps: f64,
    theta: f64,
    n_global: usize,
    opts: &RecursionOptions,
    rng: &SeededRng,
) -> Result<EigResult> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::Dimension("eig needs a nonempty square matrix".into()));
    }
    check_unit("delta", delta)?;
    check_unit("theta", theta)?;
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::param("eps", "must lie in (0, 1/2]"));
    }
    if a.rows() > n_global {
        return Err(Error::param("n_global", "must be at least the matrix dimension"));
    }
    let norm = op_norm(a)?;
    if norm > TOP_LEVEL_NORM_LIMIT {
        return Err(Error::Precondition(format!("‖A‖ = {norm} exceeds {TOP_LEVEL_NORM_LIMIT}")));
    }
    let rec = Recursion {
        theta,
        n_global,
        opts: *opts,
    };
    let node = rec.solve(a, delta, g, eps, rng)?;
    finish(a, node, g, eps)
}

fn finish(a: &CMatrix, node: Node, g: &Grid, eps: f64) -> Result<EigResult> {
    let residual = reconstruction_residual(a, &node.v, &node.d)?;
    let kappa_v = condition_number(&node.v)?;
    let square_assignment = node
        .d
        .iter()
        .map(|&z| g.square_of(z).map(|(i, j)| [i, j]))
        .collect();
    Ok(EigResult {
        v: node.v,
        d: node.d,
        residual,
        kappa_v,
        square_assignment,
        depth: node.depth,
        grid: *g,
        epsilon: eps,
        attempts: 1,
        certified: false,
        contract_met: None,
    })
}

/// `delta^3 / (1536 n^2.5)`.
pub fn inner_delta(n: usize, delta: f64) -> f64 {
    delta.powi(3) / (INNER_DELTA_DENOMINATOR * (n as f64).powf(2.5))
}

/// Backward-stable diagonalization: `‖A - V D V^{-1}‖ <= delta` and
/// `κ(V) <= 32 n^2.5 / delta` with high probability.
pub fn eig_backward(a: &CMatrix, params: &EigParams, rng: &SeededRng) -> Result<EigResult> {
    params.validate()?;
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::Dimension("eig needs a nonempty square matrix".into()));
    }
    let norm = op_norm(a)?;
    if norm > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!("‖A‖ = {norm} exceeds 1")));
    }
    let n = a.rows();
    let delta = params.delta;
    let shatter_params = ShatterParams {
        gamma: delta / 8.0,
        mode: params.mode,
        mesh_per_segment: params.mesh_per_segment,
    };
    let theta = params.theta.min(1.0 / n as f64);
    let inner = inner_delta(n, delta);
    let mut last = None;
    for attempt in 0..=params.retry_budget {
        let run = rng.derive(attempt as u64);
        let outcome = shatter(a, &shatter_params, &mut run.derive(0)).and_then(|cert| {
            let theta = if theta < 1.0 { theta } else { 0.5 };
            let r = eig_shattered(
                &cert.matrix,
                inner,
                &cert.grid,
                cert.epsilon.min(0.5),
                theta,
                n,
                &params.options(),
                &run.derive(1),
            )?;
            Ok((cert, r))
        });
        match outcome {
            Ok((cert, mut r)) => {
                r.residual = reconstruction_residual(a, &r.v, &r.d)?;
                r.attempts = attempt + 1;
                r.certified = cert.certified;
                r.contract_met = Some(r.residual <= delta && r.kappa_v <= kappa_v_limit(n, delta));
                return Ok(r);
            }
            Err(e) if e.is_probabilistic() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Runs the backward driver at accuracy `delta / (6 n K)` where `K` bounds
/// the eigenvalue condition number `κ_V / gap`.
pub fn eig_forward(a: &CMatrix, kappa_eig_bound: f64, params: &EigParams, rng: &SeededRng) -> Result<EigResult> {
    params.validate()?;
    if !(kappa_eig_bound > 0.0 && kappa_eig_bound.is_finite()) {
        return Err(Error::param("kappa_eig_bound", "must be positive and finite"));
    }
    let n = a.rows().max(1) as f64;
    let mut inner = *params;
    inner.delta = params.delta / (6.0 * n * kappa_eig_bound);
    eig_backward(a, &inner, rng)
}

/// `κ_V(A) / gap(A)` from the reference eigendecomposition.
pub fn kappa_eig_measure(a: &CMatrix) -> Result<f64> {
    let gap = min_gap(a)?;
    let floor = 1e3 * UNIT_ROUNDOFF * op_norm(a)?;
    if gap.is_finite() && gap <= floor {
        return Err(Error::Precondition(format!(
            "eigenvalue gap {gap:e} is below {floor:e}; the eigenproblem is ill-posed"
        )));
    }
    Ok(kappa_v_upper(a)? / gap)
}

/// Steps per sign computation and bits of precision sufficient for the full
/// recursion at accuracy `delta`, margin `eps` and failure probability `theta`.
pub fn eig_precision_requirement(
    n: usize,
    eps: f64,
    delta: f64,
    theta: f64,
    profile: &BackendProfile,
) -> Result<PrecisionRequirement> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    check_unit("eps", eps)?;
    check_unit("delta", delta)?;
    check_unit("theta", theta)?;
    profile.validate()?;
    let nf = n as f64;
    let lg_inv = -2.0 * theta.log2() - 4.0 * delta.log2();
    let lg_ratio = (256.0 * nf / eps).log2();
    let lg_tail = 26.0 * (5.0 * nf).log2() + lg_inv - 9.0 * eps.log2();
    let n_eig = lg_ratio + 3.0 * lg_ratio.log2() + lg_tail.log2();
    let l8 = 26.0 * (5.0 * nf).log2() + lg_inv - 8.0 * eps.log2();
    let l30 = 30.0 * (5.0 * nf).log2() + lg_inv - 8.0 * eps.log2();
    let lg_n_over_eps = (nf / eps).log2();
    let first =
        lg_n_over_eps.powi(3) * l8 * 2f64.powf(14.83) * (profile.inv_exponent * nf.ln() + 3.0) + n_eig.log2();
    let mu = profile.mu_mm(n).max(profile.mu_qr(n)).max(nf);
    let second = l30 + mu.log2();
    let bits = first.max(second);
    Ok(PrecisionRequirement {
        log2_u_max: -bits,
        bits,
        steps: steps_from_formula(n_eig),
        exceeds_hardware: bits > 53.0,
    })
}
