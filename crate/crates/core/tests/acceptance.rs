//! Acceptance suite: one PASS/FAIL line per criterion.

use std::io::Write;
use std::time::{Duration, Instant};

use specdiv::calc::{prelim_n_bound, verify_prelim};
use specdiv::deflate::{deflate, subspace_distance};
use specdiv::eig::{depth_limit, eig_precision_requirement, inner_delta};
use specdiv::grid::{certify_shattered, line_sigma_minimum, Grid, ShatterMode};
use specdiv::lab::{
    run_e2e_experiment, run_gap_experiment, run_haar_sigma_experiment, run_r22_experiment, R22_SPECTRUM,
};
use specdiv::numkit::{condition_number, mat_inv, mat_mul, op_norm, orthonormality_defect, qr_factor, UNIT_ROUNDOFF};
use specdiv::randmat::{sample_ginibre, sample_haar_unitary, SeededRng};
use specdiv::sgn::{
    alpha_covering_disk, apollonius_parameter, mobius, newton_map, required_precision_sgn, sgn, sgn_iteration_count,
    required_precision_sgn_gap, SgnParams,
};
use specdiv::shatter::{shatter, theoretical_grid_parameters, ShatterParams, REGION_CORNER, REGION_SIDE};
use specdiv::spectrum::dense_eig;
use specdiv::split::{eig_count_signed, split};
use specdiv::{BackendProfile, CMatrix, Complex64};

fn verdict(id: u32, title: &str, pass: bool, elapsed: Duration, budget: Duration, detail: String) {
    let ok = pass && elapsed <= budget;
    // Written to the raw handle so the line survives the harness's output capture.
    let _ = writeln!(
        std::io::stdout().lock(),
        "{} criterion {id:>2}: {title} | {detail} | {:.2?} (budget {:.0?})",
        if ok { "PASS" } else { "FAIL" },
        elapsed,
        budget
    );
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(elapsed <= budget, "criterion {id} exceeded its runtime budget");
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn criterion_01_apollonius_identity() {
    let start = Instant::now();
    let mut rng = SeededRng::new(101);
    let mut worst = 0f64;
    let mut worst_right = 0f64;
    let mut worst_folded = 0f64;
    let mut drawn = 0;
    while drawn < 10_000 {
        let z = c(20.0 * rng.uniform() - 10.0, 20.0 * rng.uniform() - 10.0);
        if z.norm() > 10.0 || z.re.abs() < 1e-3 {
            continue;
        }
        drawn += 1;
        let gz = newton_map(z).unwrap();
        let lhs = mobius(gz).unwrap().norm();
        let rhs = mobius(z).unwrap().norm().powi(2);
        let dev = (lhs - rhs).abs();
        worst = worst.max(dev);
        if z.re > 0.0 {
            worst_right = worst_right.max(dev);
        }
        let folded = (apollonius_parameter(gz) - apollonius_parameter(z).powi(2)).abs();
        worst_folded = worst_folded.max(folded);
    }
    verdict(
        1,
        "Apollonius identity |m(g(z))| = |m(z)|^2",
        worst <= 1e-12,
        start.elapsed(),
        Duration::from_secs(1),
        format!(
            "max deviation {worst:.3e} <= 1e-12 over {drawn} points; right half-plane only {worst_right:.3e}; \
             min(|m|, 1/|m|) form {worst_folded:.3e}"
        ),
    );
}

/// Diagonalizable test matrix with eigenvalues well off the imaginary axis.
fn sign_test_matrix(n: usize, normal: bool, rng: &mut SeededRng) -> (CMatrix, f64, Vec<Complex64>) {
    let vals: Vec<Complex64> = (0..n)
        .map(|_| {
            let re = 0.2 + 0.8 * rng.uniform();
            let side = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            c(side * re, 1.6 * rng.uniform() - 0.8)
        })
        .collect();
    let v = if normal {
        sample_haar_unitary(n, rng).unwrap()
    } else {
        loop {
            let g = sample_ginibre(n, rng).unwrap();
            let v = &CMatrix::identity(n) + &g.scaled(c(0.4, 0.0));
            let k = condition_number(&v).unwrap();
            if k <= 20.0 && k > 1.5 {
                break v;
            }
        }
    };
    let kappa = condition_number(&v).unwrap();
    let a = mat_mul(&mat_mul(&v, &CMatrix::from_diagonal(&vals)).unwrap(), &mat_inv(&v).unwrap()).unwrap();
    (a, kappa, vals)
}

fn oracle_sign(a: &CMatrix) -> CMatrix {
    let es = dense_eig(a).unwrap();
    let signs: Vec<Complex64> = es.values.iter().map(|l| c(l.re.signum(), 0.0)).collect();
    mat_mul(&mat_mul(&es.vectors, &CMatrix::from_diagonal(&signs)).unwrap(), &mat_inv(&es.vectors).unwrap()).unwrap()
}

#[test]
fn criterion_02_sign_function_convergence() {
    let start = Instant::now();
    let beta = 1e-8;
    let mut rng = SeededRng::new(202);
    let mut worst = 0f64;
    let mut cases = 0;
    for normal in [true, false] {
        for i in 0..20 {
            let n = 2 + (i * 7) % 15;
            let (a, kappa, vals) = sign_test_matrix(n, normal, &mut rng);
            let min_re = vals.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
            let eps0 = (min_re / (2.0 * kappa)).min(0.01);
            let alpha0 = vals
                .iter()
                .map(|&l| alpha_covering_disk(l, kappa * eps0).expect("disk clear of the axis"))
                .fold(0.0, f64::max);
            let (s, _) = sgn(&a, &SgnParams::new(eps0, alpha0, beta).unwrap()).unwrap();
            let err = op_norm(&(&s - &oracle_sign(&a))).unwrap();
            worst = worst.max(err);
            cases += 1;
        }
    }
    verdict(
        2,
        "sign function vs dense oracle",
        worst <= beta,
        start.elapsed(),
        Duration::from_secs(10),
        format!("max ‖SGN - sgn‖ = {worst:.3e} <= {beta:e} over {cases} matrices"),
    );
}

#[test]
fn criterion_03_iteration_count() {
    let start = Instant::now();
    let anchor = sgn_iteration_count(0.9, 0.01, 1e-3).unwrap();
    let alphas = [0.5, 0.8, 0.9, 0.99, 0.999];
    let betas = [1e-2, 1e-4, 1e-6, 1e-8, 1e-12];
    let mut monotone = true;
    for (i, &a) in alphas.iter().enumerate() {
        for (j, &b) in betas.iter().enumerate() {
            let n = sgn_iteration_count(a, 0.01, b).unwrap();
            if i > 0 {
                monotone &= n >= sgn_iteration_count(alphas[i - 1], 0.01, b).unwrap();
            }
            if j > 0 {
                monotone &= n >= sgn_iteration_count(a, 0.01, betas[j - 1]).unwrap();
            }
        }
    }
    verdict(
        3,
        "iteration-count formula",
        anchor == 21 && monotone,
        start.elapsed(),
        Duration::from_secs(1),
        format!("N(0.9, 0.01, 1e-3) = {anchor} (want 21); monotone over 5x5 sweep: {monotone}"),
    );
}

#[test]
fn criterion_04_haar_corner_law() {
    let start = Instant::now();
    let mut worst = 0f64;
    let mut all = true;
    let mut parts = Vec::new();
    for (i, (n, r)) in [(2, 1), (4, 1), (4, 2), (8, 3)].into_iter().enumerate() {
        let rep = run_haar_sigma_experiment(n, r, 10_000, 400 + i as u64).unwrap();
        let ks = rep.statistics["ks_distance"];
        worst = worst.max(ks);
        all &= rep.pass && ks <= 1.63 / 100.0;
        parts.push(format!("({n},{r}) KS {ks:.4}"));
    }
    verdict(
        4,
        "Haar-corner sigma_min law",
        all,
        start.elapsed(),
        Duration::from_secs(60),
        format!("{}; critical value 0.0163", parts.join(", ")),
    );
}

#[test]
fn criterion_05_r22_tail() {
    let start = Instant::now();
    let rep = run_r22_experiment(&R22_SPECTRUM, 4, 0.5, 2000, 505).unwrap();
    let f = rep.statistics["violation_frequency"];
    let sigma = (0.25f64 * 0.75 / 2000.0).sqrt();
    let threshold = 0.25 + 3.0 * sigma;
    verdict(
        5,
        "R22 tail frequency",
        rep.pass && f <= threshold,
        start.elapsed(),
        Duration::from_secs(30),
        format!("violation frequency {f:.4} <= {threshold:.4}"),
    );
}

#[test]
fn criterion_06_smoothed_gap_and_condition() {
    let start = Instant::now();
    let n = 16.0f64;
    let rep = run_gap_experiment(16, 0.1, 500, 606, None).unwrap();
    let f = rep.statistics["joint_frequency"];
    let floor = 1.0 - 12.0 / (n * n);
    let threshold = floor - 3.0 * (floor * (1.0 - floor) / 500.0).sqrt();
    verdict(
        6,
        "smoothed gap / eigenvector condition",
        rep.pass && f >= threshold,
        start.elapsed(),
        Duration::from_secs(120),
        format!("joint frequency {f:.4} >= {threshold:.4}"),
    );
}

#[test]
fn criterion_07_split_counting() {
    let start = Instant::now();
    let mut rng = SeededRng::new(707);
    let mut counts_ok = true;
    let mut balance_ok = true;
    let mut lines = 0;
    for i in 0..50 {
        let n = 6 + i % 7;
        let omega = 0.5;
        let grid = Grid::new(c(-4.0 + 0.13, -4.0 + 0.29), omega, 16, 16).unwrap();
        let mut squares = Vec::new();
        while squares.len() < n {
            let sq = (4 + (rng.uniform() * 7.0) as u64, 4 + (rng.uniform() * 7.0) as u64);
            if !squares.contains(&sq) {
                squares.push(sq);
            }
        }
        let vals: Vec<Complex64> = squares
            .iter()
            .map(|&(x, y)| {
                let jitter = c(0.2 * rng.uniform() - 0.1, 0.2 * rng.uniform() - 0.1);
                grid.z0() + c((x as f64 + 0.5) * omega, (y as f64 + 0.5) * omega) + jitter
            })
            .collect();
        let g = sample_ginibre(n, &mut rng).unwrap();
        let v = &CMatrix::identity(n) + &g.scaled(c(0.15, 0.0));
        let a = mat_mul(&mat_mul(&v, &CMatrix::from_diagonal(&vals)).unwrap(), &mat_inv(&v).unwrap()).unwrap();
        let eps = (line_sigma_minimum(&a, &grid, 32).unwrap().sigma / 2.0).min(omega / 2.0);
        let beta = 0.05 / n as f64;
        for k in 3..=12 {
            let h = grid.vertical_line(k);
            let census: i64 = vals.iter().map(|l| if l.re > h { 1 } else { -1 }).sum();
            let got = eig_count_signed(&a, h, eps, &grid, beta);
            counts_ok &= got == Ok(census);
            lines += 1;
        }
        let r = split(&a, eps, &grid, beta).unwrap();
        balance_ok &= r.n_plus + r.n_minus == n && 5 * r.n_plus.min(r.n_minus) >= n;
    }
    verdict(
        7,
        "split counting and balance",
        counts_ok && balance_ok,
        start.elapsed(),
        Duration::from_secs(60),
        format!("counts match census on {lines} lines: {counts_ok}; n± >= n/5 on 50 splits: {balance_ok}"),
    );
}

#[test]
fn criterion_08_deflate_recovery() {
    let start = Instant::now();
    let (beta, eta) = (1e-8, 1e-2);
    let mut rng = SeededRng::new(808);
    let trials = 200;
    let mut successes = 0;
    let mut orthonormal = true;
    let mut worst_defect = 0f64;
    for t in 0..trials {
        let n = 2 + t % 7;
        let k = 1 + (t / 7) % (n - 1);
        let g = sample_ginibre(n, &mut rng).unwrap();
        let v = &CMatrix::identity(n) + &g.scaled(c(0.3, 0.0));
        let w = mat_inv(&v).unwrap();
        let vk = v.columns(0, k);
        let p = mat_mul(&vk, &w.adjoint().columns(0, k).adjoint()).unwrap();
        let e = sample_ginibre(n, &mut rng).unwrap();
        let e = e.scaled(c(beta / op_norm(&e).unwrap(), 0.0));
        let q = deflate(&(&p + &e), k, beta, eta, &mut rng).unwrap();
        let defect = orthonormality_defect(&q);
        worst_defect = worst_defect.max(defect);
        orthonormal &= defect <= 10.0 * n as f64 * UNIT_ROUNDOFF;
        let exact = qr_factor(&vk).unwrap().0.columns(0, k);
        if subspace_distance(&q, &exact).unwrap() <= eta {
            successes += 1;
        }
    }
    let freq = successes as f64 / trials as f64;
    verdict(
        8,
        "deflate subspace recovery",
        freq >= 0.99 && orthonormal,
        start.elapsed(),
        Duration::from_secs(30),
        format!("success {freq:.3} >= 0.99; max orthonormality defect {worst_defect:.2e} (<= 10nu: {orthonormal})"),
    );
}

#[test]
fn criteria_09_and_11_end_to_end_and_depth() {
    let start = Instant::now();
    let mut success_ok = true;
    let mut depth_ok = true;
    let mut parts = Vec::new();
    let mut depth_parts = Vec::new();
    for n in [4usize, 8, 16] {
        let rep = run_e2e_experiment(n, 0.05, 100, 900 + n as u64).unwrap();
        let f = rep.statistics["success_frequency"];
        success_ok &= f >= 0.95;
        let completed: Vec<&Vec<f64>> = rep.samples.iter().filter(|r| r[5] > 0.5).collect();
        let max_depth = completed.iter().map(|r| r[3]).fold(0.0, f64::max);
        depth_ok &= completed.iter().all(|r| r[3] <= depth_limit(n));
        parts.push(format!("n={n}: {f:.2}"));
        depth_parts.push(format!("n={n}: {max_depth} <= {:.2}", depth_limit(n)));
    }
    let elapsed = start.elapsed();
    verdict(
        9,
        "end-to-end backward error and κ(V)",
        success_ok,
        elapsed,
        Duration::from_secs(600),
        format!("success frequency {} (need >= 0.95)", parts.join(", ")),
    );
    verdict(
        11,
        "recursion depth bound",
        depth_ok,
        elapsed,
        Duration::from_secs(600),
        format!("max depth {}", depth_parts.join(", ")),
    );
}

#[test]
fn criterion_10_certificate_refinement() {
    let start = Instant::now();
    let mut rng = SeededRng::new(1010);
    let mut sound = true;
    let mut certified = 0;
    let mesh = 16;
    for i in 0..30 {
        let n = 2 + i % 5;
        let a = sample_ginibre(n, &mut rng).unwrap();
        let a = a.scaled(c(1.0 / op_norm(&a).unwrap(), 0.0));
        let omega = 0.45 + 0.1 * rng.uniform();
        let s = (REGION_SIDE / omega).ceil() as u64;
        let z0 = REGION_CORNER + c(rng.uniform(), rng.uniform()) * omega;
        let g = Grid::new(z0, omega, s, s).unwrap();
        let min = line_sigma_minimum(&a, &g, mesh).map(|m| m.sigma).unwrap_or(0.0);
        let eps = if i % 2 == 0 { min / 2.0 } else { min * 0.999 };
        let coarse = certify_shattered(&a, &g, eps.max(1e-12), mesh).unwrap();
        let fine = certify_shattered(&a, &g, eps.max(1e-12), 4 * mesh).unwrap();
        if coarse.certified {
            certified += 1;
            let floor = coarse.min_line_sigma - coarse.mesh_spacing / 2.0;
            sound &= fine.min_line_sigma >= floor - 1e-12;
            if coarse.margin > coarse.mesh_spacing / 2.0 {
                sound &= fine.certified;
            }
        }
        if coarse.squares == fine.squares && coarse.violation.is_none() {
            sound &= fine.min_line_sigma <= coarse.min_line_sigma + 1e-12;
        }
    }
    verdict(
        10,
        "shattering certificate vs 4x finer mesh",
        sound && certified > 0,
        start.elapsed(),
        Duration::from_secs(60),
        format!("{certified}/30 coarse certificates, no flip beyond the reported margin: {sound}"),
    );
}

#[test]
fn criterion_12_precision_calculators() {
    let start = Instant::now();
    let prof = BackendProfile::default();
    let beta = 1e-6;
    let eps0 = 1e-3;
    let s1 = 1e-3;
    let s2 = s1 * s1;
    let b1 = required_precision_sgn(8, 1.0 - s1, eps0, beta, &prof).unwrap().bits;
    let b2 = required_precision_sgn(8, 1.0 - s2, eps0, beta, &prof).unwrap().bits;
    let sgn_ratio = b2 / b1;
    let sgn_ok = (4.0..=16.0).contains(&sgn_ratio);

    let dominant = |n: f64, eps: f64, delta: f64, theta: f64| {
        let l8 = 26.0 * (5.0 * n).log2() - 2.0 * theta.log2() - 4.0 * delta.log2() - 8.0 * eps.log2();
        (n / eps).log2().powi(3) * l8 * 2f64.powf(14.83) * (n.ln() + 3.0)
    };
    let e1 = eig_precision_requirement(16, 0.1, 0.1, 1.0 / 16.0, &prof).unwrap().bits;
    let e2 = eig_precision_requirement(16, 0.01, 0.1, 1.0 / 16.0, &prof).unwrap().bits;
    let predicted = dominant(16.0, 0.01, 0.1, 1.0 / 16.0) / dominant(16.0, 0.1, 0.1, 1.0 / 16.0);
    let eig_ratio = e2 / e1;
    let eig_ok = (eig_ratio / predicted - 1.0).abs() <= 0.01;
    let e3 = eig_precision_requirement(32, 0.1, 0.1, 1.0 / 16.0, &prof).unwrap().bits;
    let predicted_n = dominant(32.0, 0.1, 0.1, 1.0 / 16.0) / dominant(16.0, 0.1, 0.1, 1.0 / 16.0);
    let eig_n_ok = ((e3 / e1) / predicted_n - 1.0).abs() <= 0.01;

    let n = 10;
    let gamma = 0.1;
    let (omega, eps) = theoretical_grid_parameters(n, gamma);
    let side = (REGION_SIDE / omega).ceil() as u64;
    let grid = Grid::new(REGION_CORNER, omega, side, side).unwrap();
    let half = eps / 2.0;
    let sgn_flag = required_precision_sgn_gap(n, half / grid.diag_sq(), half / 2.0, 0.05 / n as f64, &prof)
        .unwrap()
        .exceeds_hardware;
    let delta = 8.0 * gamma;
    let eig_flag = eig_precision_requirement(n, eps, inner_delta(n, delta), 1.0 / n as f64, &prof)
        .unwrap()
        .exceeds_hardware;
    let cert = shatter(
        &CMatrix::zeros(n, n),
        &ShatterParams::new(gamma, ShatterMode::Theoretical).unwrap(),
        &mut SeededRng::new(12),
    )
    .unwrap();
    let prelim_ok = prelim_n_bound(1e-3, 0.25).unwrap() == 20 && verify_prelim(1e-3, 0.25, 20);
    verdict(
        12,
        "precision calculators",
        sgn_ok && eig_ok && eig_n_ok && sgn_flag && eig_flag && cert.below_hardware_precision && prelim_ok,
        start.elapsed(),
        Duration::from_secs(1),
        format!(
            "sgn bits ratio {sgn_ratio:.2} in [4, 16]; eig ratio {eig_ratio:.4} vs {predicted:.4} (eps), {:.4} vs {predicted_n:.4} (n); > 53 bits flagged: sgn {sgn_flag}, eig {eig_flag}, shatter {}",
            e3 / e1,
            cert.below_hardware_precision
        ),
    );
}
