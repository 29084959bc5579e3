//! Monte-Carlo experiments that compare empirical frequencies and
//! distributions with the closed-form probability bounds.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deflate::rurv;
use crate::eig::{depth_limit, eig_backward, EigParams};
use crate::error::{Error, Result};
use crate::grid::{gap_of, kappa_v_upper, ShatterMode};
use crate::numkit::{mat_mul, op_norm, singular_values, CMatrix};
use crate::randmat::{haar_corner_sigma_min_cdf, sample_ginibre, sample_haar_unitary, SeededRng};
use crate::spectrum::eigenvalues;

/// Singular values of the fixed test matrix of the `R22` experiment.
pub const R22_SPECTRUM: [f64; 8] = [1.0, 0.9, 0.8, 0.7, 0.1, 0.05, 0.02, 0.01];

/// Direction in which the statistic must clear the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtLeast,
    AtMost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    pub trials: usize,
    pub statistics: BTreeMap<String, f64>,
    /// Name of the entry of `statistics` compared against `threshold`.
    pub tested_statistic: String,
    /// Theoretical value from the bound being checked.
    pub bound: f64,
    /// Slack granted on top of `bound` (three binomial standard deviations or a KS critical value).
    pub tolerance: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub pass: bool,
    pub seed: u64,
    pub sample_columns: Vec<String>,
    pub samples: Vec<Vec<f64>>,
}

impl ExperimentReport {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        name: &str,
        parameters: &[(&str, f64)],
        trials: usize,
        statistics: BTreeMap<String, f64>,
        tested: &str,
        bound: f64,
        tolerance: f64,
        comparison: Comparison,
        seed: u64,
        sample_columns: &[&str],
        samples: Vec<Vec<f64>>,
    ) -> Self {
        let threshold = match comparison {
            Comparison::AtLeast => bound - tolerance,
            Comparison::AtMost => bound + tolerance,
        };
        let value = statistics[tested];
        let pass = match comparison {
            Comparison::AtLeast => value >= threshold,
            Comparison::AtMost => value <= threshold,
        };
        ExperimentReport {
            name: name.into(),
            parameters: parameters.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            trials,
            statistics,
            tested_statistic: tested.into(),
            bound,
            tolerance,
            threshold,
            comparison,
            pass,
            seed,
            sample_columns: sample_columns.iter().map(|s| s.to_string()).collect(),
            samples,
        }
    }

    /// Raw samples as CSV with a header row.
    pub fn samples_csv(&self) -> String {
        let mut out = self.sample_columns.join(",");
        out.push('\n');
        for row in &self.samples {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// `sqrt(p (1 - p) / trials)`.
pub fn binomial_sigma(p: f64, trials: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// KS critical value at the 1% level.
pub fn ks_critical(samples: usize) -> f64 {
    1.63 / (samples as f64).sqrt()
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Largest gap between the empirical CDFs of two samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / xs.len() as f64 - j as f64 / ys.len() as f64).abs());
    }
    d
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted_column(rows: &[Vec<f64>], col: usize) -> Vec<f64> {
    let mut v: Vec<f64> = rows.iter().map(|r| r[col]).filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn run_trials<T: Send>(trials: usize, seed: u64, f: impl Fn(SeededRng) -> T + Sync + Send) -> Vec<T> {
    let root = SeededRng::new(seed);
    (0..trials as u64).into_par_iter().map(|i| f(root.derive(i))).collect()
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    Ok(())
}

fn frequency(rows: &[Vec<f64>], col: usize) -> f64 {
    rows.iter().filter(|r| r[col] > 0.5).count() as f64 / rows.len() as f64
}

fn flag(b: bool) -> f64 {
    f64::from(u8::from(b))
}

/// Strictly upper triangular Toeplitz matrix of ones, scaled to unit norm.
pub fn toeplitz_nilpotent(n: usize) -> Result<CMatrix> {
    let a = CMatrix::from_fn(n, n, |i, j| if j > i { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    let norm = op_norm(&a)?;
    Ok(if norm > 0.0 { a.scaled(Complex64::new(1.0 / norm, 0.0)) } else { a })
}

/// Frequency of `{gap >= gamma^4/n^5} ∩ {κ_V <= n^2/gamma} ∩ {‖G‖ <= 4}`
/// for `X = A + gamma G`.
pub fn run_gap_experiment(
    n: usize,
    gamma: f64,
    trials: usize,
    seed: u64,
    base: Option<&CMatrix>,
) -> Result<ExperimentReport> {
    if n < 4 {
        return Err(Error::param("n", "must be at least 4"));
    }
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::param("gamma", "must lie in (0, 1/2)"));
    }
    check_trials(trials)?;
    let a = match base {
        Some(a) if a.rows() == n && a.is_square() => a.clone(),
        Some(_) => return Err(Error::Dimension("base matrix must be n x n".into())),
        None => toeplitz_nilpotent(n)?,
    };
    let nf = n as f64;
    let gap_floor = gamma.powi(4) / nf.powi(5);
    let kappa_ceiling = nf * nf / gamma;
    let rows: Vec<Vec<f64>> = run_trials(trials, seed, |mut rng| {
        let g = sample_ginibre(n, &mut rng).expect("n >= 4");
        let x = &a + &g.scaled(Complex64::new(gamma, 0.0));
        let g_norm = op_norm(&g).unwrap_or(f64::INFINITY);
        let gap = eigenvalues(&x).map(|v| gap_of(&v)).unwrap_or(0.0);
        let kappa = kappa_v_upper(&x).unwrap_or(f64::INFINITY);
        let joint = gap >= gap_floor && kappa <= kappa_ceiling && g_norm <= 4.0;
        vec![gap, kappa, g_norm, flag(g_norm <= 4.0), flag(joint)]
    });
    let bound = 1.0 - 12.0 / (nf * nf);
    let mut stats = BTreeMap::new();
    stats.insert("joint_frequency".into(), frequency(&rows, 4));
    stats.insert("norm_frequency".into(), frequency(&rows, 3));
    stats.insert("norm_bound".into(), 1.0 - 2.0 * (-2.0 * nf).exp());
    let gaps = sorted_column(&rows, 0);
    stats.insert("median_gap".into(), quantile(&gaps, 0.5));
    stats.insert("min_gap".into(), gaps.first().copied().unwrap_or(f64::NAN));
    let kappas = sorted_column(&rows, 1);
    stats.insert("median_kappa_v".into(), quantile(&kappas, 0.5));
    stats.insert("max_kappa_v".into(), kappas.last().copied().unwrap_or(f64::NAN));
    Ok(ExperimentReport::assemble(
        "gap",
        &[("n", nf), ("gamma", gamma), ("gap_floor", gap_floor), ("kappa_ceiling", kappa_ceiling)],
        trials,
        stats,
        "joint_frequency",
        bound,
        3.0 * binomial_sigma(bound, trials),
        Comparison::AtLeast,
        seed,
        &["gap", "kappa_v_upper", "ginibre_norm", "norm_ok", "joint_event"],
        rows,
    ))
}

/// Smallest singular value of the top-left `r x r` corner of a Haar unitary.
pub fn haar_corner_sigma_min(n: usize, r: usize, rng: &mut SeededRng) -> Result<f64> {
    let q = sample_haar_unitary(n, rng)?;
    let corner = CMatrix::from_fn(r, r, |i, j| q[(i, j)]);
    Ok(*singular_values(&corner)?.last().expect("r >= 1"))
}

/// KS distance between sampled corner `sigma_min` values and the closed-form law.
pub fn run_haar_sigma_experiment(n: usize, r: usize, trials: usize, seed: u64) -> Result<ExperimentReport> {
    haar_corner_sigma_min_cdf(n, r, 0.5)?;
    check_trials(trials)?;
    let rows: Vec<Vec<f64>> = run_trials(trials, seed, |mut rng| {
        vec![haar_corner_sigma_min(n, r, &mut rng).expect("valid corner")]
    });
    let samples: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let ks = ks_distance(&samples, |t| haar_corner_sigma_min_cdf(n, r, t.clamp(0.0, 1.0)).unwrap_or(1.0));
    let mut stats = BTreeMap::new();
    stats.insert("ks_distance".into(), ks);
    let sorted = sorted_column(&rows, 0);
    stats.insert("median".into(), quantile(&sorted, 0.5));
    Ok(ExperimentReport::assemble(
        "haar_sigma_min",
        &[("n", n as f64), ("r", r as f64)],
        trials,
        stats,
        "ks_distance",
        0.0,
        ks_critical(trials),
        Comparison::AtMost,
        seed,
        &["sigma_min"],
        rows,
    ))
}

/// Fixed matrix `U diag(sigmas) W*` with Haar `U`, `W` drawn from `seed`.
pub fn matrix_with_singular_values(sigmas: &[f64], seed: u64) -> Result<CMatrix> {
    let n = sigmas.len();
    let mut rng = SeededRng::new(seed);
    let u = sample_haar_unitary(n, &mut rng)?;
    let w = sample_haar_unitary(n, &mut rng)?;
    let s: Vec<Complex64> = sigmas.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    mat_mul(&mat_mul(&u, &CMatrix::from_diagonal(&s))?, &w.adjoint())
}

/// Frequency of `‖R22‖ > sqrt(r (n-r)) / theta * sigma_{r+1}(A)` over fresh
/// randomized factorizations of one fixed `A`.
pub fn run_r22_experiment(sigmas: &[f64], r: usize, theta: f64, trials: usize, seed: u64) -> Result<ExperimentReport> {
    let n = sigmas.len();
    if r == 0 || r >= n {
        return Err(Error::param("r", "need 1 <= r < n"));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::param("theta", "must lie in (0, 1]"));
    }
    if sigmas.windows(2).any(|w| w[0] < w[1]) || sigmas.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::param("sigmas", "must be nonnegative and nonincreasing"));
    }
    check_trials(trials)?;
    let a = matrix_with_singular_values(sigmas, seed ^ 0x05EE_D0FA)?;
    let limit = ((r * (n - r)) as f64).sqrt() / theta * sigmas[r];
    let rows: Vec<Vec<f64>> = run_trials(trials, seed, |mut rng| {
        let f = rurv(&a, &mut rng).expect("square input");
        let r22 = f.trailing_block_norm(r).expect("r < n");
        vec![r22, flag(r22 > limit)]
    });
    let bound = (theta * theta).min(1.0);
    let mut stats = BTreeMap::new();
    stats.insert("violation_frequency".into(), frequency(&rows, 1));
    let sorted = sorted_column(&rows, 0);
    stats.insert("median_r22".into(), quantile(&sorted, 0.5));
    stats.insert("max_r22".into(), sorted.last().copied().unwrap_or(f64::NAN));
    stats.insert("limit".into(), limit);
    Ok(ExperimentReport::assemble(
        "r22_tail",
        &[("n", n as f64), ("r", r as f64), ("theta", theta), ("sigma_next", sigmas[r])],
        trials,
        stats,
        "violation_frequency",
        bound,
        3.0 * binomial_sigma(bound, trials),
        Comparison::AtMost,
        seed,
        &["r22_norm", "violation"],
        rows,
    ))
}

/// Ginibre matrix scaled to unit spectral norm.
pub fn unit_norm_ginibre(n: usize, rng: &mut SeededRng) -> Result<CMatrix> {
    let g = sample_ginibre(n, rng)?;
    Ok(g.scaled(Complex64::new(1.0 / op_norm(&g)?, 0.0)))
}

/// Success frequency of the backward driver (both residual and condition
/// bounds) on random unit-norm inputs.
pub fn run_e2e_experiment(n: usize, delta: f64, trials: usize, seed: u64) -> Result<ExperimentReport> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    check_trials(trials)?;
    let theta = if n >= 2 { 1.0 / n as f64 } else { 0.5 };
    let params = EigParams::new(delta, theta, ShatterMode::Empirical)?;
    let rows: Vec<Vec<f64>> = run_trials(trials, seed, |mut rng| {
        let a = unit_norm_ginibre(n, &mut rng).expect("n >= 1");
        match eig_backward(&a, &params, &rng.derive(1)) {
            Ok(r) => vec![
                flag(r.contract_met == Some(true)),
                r.residual,
                r.kappa_v,
                r.depth as f64,
                r.attempts as f64,
                1.0,
            ],
            Err(_) => vec![0.0, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0.0],
        }
    });
    let nf = n as f64;
    let bound = (1.0 - 1.0 / nf - 12.0 / (nf * nf)).max(0.0);
    let mut stats = BTreeMap::new();
    stats.insert("success_frequency".into(), frequency(&rows, 0));
    stats.insert("completed_frequency".into(), frequency(&rows, 5));
    let res = sorted_column(&rows, 1);
    for (k, q) in [("residual_median", 0.5), ("residual_q90", 0.9), ("residual_max", 1.0)] {
        stats.insert(k.into(), quantile(&res, q));
    }
    let kap = sorted_column(&rows, 2);
    stats.insert("kappa_v_median".into(), quantile(&kap, 0.5));
    stats.insert("kappa_v_max".into(), quantile(&kap, 1.0));
    let depths = sorted_column(&rows, 3);
    stats.insert("depth_max".into(), depths.last().copied().unwrap_or(f64::NAN));
    stats.insert("depth_limit".into(), depth_limit(n));
    let within = rows.iter().filter(|r| r[5] > 0.5).all(|r| r[3] <= depth_limit(n));
    stats.insert("depth_within_limit".into(), flag(within));
    Ok(ExperimentReport::assemble(
        "end_to_end",
        &[("n", nf), ("delta", delta), ("theta", theta)],
        trials,
        stats,
        "success_frequency",
        bound,
        3.0 * binomial_sigma(bound, trials),
        Comparison::AtLeast,
        seed,
        &["success", "residual", "kappa_v", "depth", "attempts", "completed"],
        rows,
    ))
}
