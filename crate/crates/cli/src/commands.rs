use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use specdiv::calc::{evaluate, FormulaReport, FORMULAS};
use specdiv::eig::{eig_backward, eig_forward, EigParams, EigReport};
use specdiv::grid::{certify_shattered, CertificateReport, Grid, ShatterMode};
use specdiv::lab::{
    run_e2e_experiment, run_gap_experiment, run_haar_sigma_experiment, run_r22_experiment, ExperimentReport,
    R22_SPECTRUM,
};
use specdiv::numkit::op_norm;
use specdiv::randmat::SeededRng;
use specdiv::sgn::{sgn_with, SgnOptions, SgnParams, SgnTrace};
use specdiv::shatter::{shatter, ShatterParams, REGION_CORNER, REGION_SIDE};
use specdiv::split::{split, SplitSummary};
use specdiv::{BackendProfile, CMatrix, Complex64, Error, Result};

use crate::mtx::{read_matrix, write_matrix};
use crate::output::{default_path, emit, flatten_csv, to_json, Envelope, Format};

#[derive(Parser, Debug)]
#[command(name = "specdiv", version, about = "Randomized spectral bisection eigensolver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Diagonalize a matrix of norm at most 1.
    Eig(EigArgs),
    /// Run the Newton iteration for the matrix sign function.
    Sgn(SgnArgs),
    /// Shatter a matrix and bisect its spectrum along a grid line.
    Split(SplitArgs),
    /// Perturb a matrix and lay down a shattering grid.
    Shatter(ShatterArgs),
    /// Evaluate an iteration-count, probability or precision formula.
    Calc(CalcArgs),
    /// Run a statistical experiment.
    Lab(LabArgs),
    /// Check numerically whether a grid shatters a matrix.
    Certify(CertifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; defaults to `<command>.json` or `<command>.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Theoretical,
    Empirical,
}

impl From<Mode> for ShatterMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Theoretical => ShatterMode::Theoretical,
            Mode::Empirical => ShatterMode::Empirical,
        }
    }
}

#[derive(Args, Debug)]
pub struct EigArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub theta: f64,
    #[arg(long, value_enum, default_value_t = Mode::Empirical)]
    pub mode: Mode,
    /// Target forward error using this bound on the eigenvalue condition number.
    #[arg(long)]
    pub kappa_eig: Option<f64>,
    /// Divide the input by its norm first and scale eigenvalues back.
    #[arg(long)]
    pub scale: bool,
    /// Solve the two halves of every split concurrently.
    #[arg(long)]
    pub parallel: bool,
    /// Fresh-randomness retries after probabilistic failures (0 disables).
    #[arg(long)]
    pub retries: Option<usize>,
    /// Re-perturb each compressed block before recursing.
    #[arg(long)]
    pub inject_noise: bool,
    /// Write the eigenvector matrix to this Matrix Market file.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SgnArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Pseudospectral parameter of the starting matrix.
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub beta: f64,
    #[arg(long)]
    pub early_stop: bool,
    /// Write the computed sign matrix to this Matrix Market file.
    #[arg(long)]
    pub sign_output: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct ShatterArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = Mode::Empirical)]
    pub mode: Mode,
    /// Write the perturbed matrix to this Matrix Market file.
    #[arg(long)]
    pub matrix_output: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = Mode::Empirical)]
    pub mode: Mode,
    /// Projector accuracy; defaults to 0.05 / n.
    #[arg(long)]
    pub beta: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub omega: f64,
    #[arg(long, default_value_t = REGION_CORNER.re, allow_hyphen_values = true)]
    pub z0_re: f64,
    #[arg(long, default_value_t = REGION_CORNER.im, allow_hyphen_values = true)]
    pub z0_im: f64,
    /// Squares per row; defaults to covering the side-8 region.
    #[arg(long)]
    pub s1: Option<u64>,
    #[arg(long)]
    pub s2: Option<u64>,
    #[arg(long, default_value_t = 64)]
    pub mesh: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct CalcArgs {
    /// Formula name; `list` prints the available formulas.
    pub formula: String,
    /// Inputs as `--name value` pairs, plus `--output`, `--format`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    pub params: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Gap,
    HaarSigma,
    R22,
    E2e,
}

#[derive(Args, Debug)]
pub struct LabArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    #[arg(long, default_value_t = 0.3)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Base matrix for the gap experiment; zero when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

/// Report body plus a CSV rendering and the exit code to return.
struct Outcome<T: Serialize> {
    report: T,
    csv: Option<String>,
    status: &'static str,
    code: u8,
}

impl<T: Serialize> Outcome<T> {
    fn ok(report: T) -> Self {
        Outcome {
            report,
            csv: None,
            status: "ok",
            code: 0,
        }
    }
}

fn finish<T: Serialize>(command: &str, common: &Common, outcome: Outcome<T>) -> Result<u8> {
    let path = common
        .output
        .clone()
        .unwrap_or_else(|| default_path(command, common.format));
    let body = match common.format {
        Format::Json => to_json(&Envelope {
            command,
            status: outcome.status,
            seed: common.seed,
            report: &outcome.report,
        })?,
        Format::Csv => match outcome.csv {
            Some(csv) => csv,
            None => {
                let value =
                    serde_json::to_value(&outcome.report).map_err(|e| Error::Io(format!("serializing report: {e}")))?;
                flatten_csv(&value)
            }
        },
    };
    emit(&path, &body)?;
    Ok(outcome.code)
}

pub fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Eig(a) => finish("eig", &a.common, run_eig(&a)?),
        Command::Sgn(a) => finish("sgn", &a.common, run_sgn(&a)?),
        Command::Split(a) => finish("split", &a.common, run_split(&a)?),
        Command::Shatter(a) => finish("shatter", &a.common, run_shatter(&a)?),
        Command::Certify(a) => finish("certify", &a.common, run_certify(&a)?),
        Command::Lab(a) => finish("lab", &a.common, run_lab(&a)?),
        Command::Calc(a) => {
            let (common, inputs) = parse_calc_params(&a.params)?;
            finish("calc", &common, run_calc(&a.formula, &inputs)?)
        }
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

#[derive(Serialize)]
struct EigOutput {
    #[serde(flatten)]
    result: EigReport,
    /// Factor the input was divided by before solving.
    scale: f64,
    forward_target: Option<f64>,
}

fn run_eig(args: &EigArgs) -> Result<Outcome<EigOutput>> {
    let mut a = read_matrix(&args.input)?;
    let norm = if args.scale { op_norm(&a)? } else { 0.0 };
    let scale = if norm > 0.0 { norm } else { 1.0 };
    if scale != 1.0 {
        a = a.scaled(Complex64::new(1.0 / scale, 0.0));
    }
    let mut params = EigParams::new(args.delta, args.theta, args.mode.into())?;
    if let Some(r) = args.retries {
        params.retry_budget = r;
    }
    params.parallel = args.parallel;
    params.inject_noise = args.inject_noise;
    let rng = SeededRng::new(args.common.seed);
    let result = match args.kappa_eig {
        Some(k) => eig_forward(&a, k, &params, &rng)?,
        None => eig_backward(&a, &params, &rng)?,
    };
    if let Some(path) = &args.vectors {
        write_matrix(path, &result.v)?;
    }
    let mut report = result.report(args.delta, args.mode.into(), args.common.seed);
    for z in report.eigenvalues.iter_mut() {
        z[0] *= scale;
        z[1] *= scale;
    }
    report.residual *= scale;
    let mut csv = String::from("re,im,square_col,square_row\n");
    for (z, sq) in report.eigenvalues.iter().zip(&report.square_assignment) {
        let (c, r) = sq.map_or((String::new(), String::new()), |s| (s[0].to_string(), s[1].to_string()));
        let _ = writeln!(csv, "{:.17e},{:.17e},{c},{r}", z[0], z[1]);
    }
    let violated = report.contract_met == Some(false);
    Ok(Outcome {
        report: EigOutput {
            result: report,
            scale,
            forward_target: args.kappa_eig.map(|k| args.delta / (6.0 * a.rows() as f64 * k)),
        },
        csv: Some(csv),
        status: if violated { "contract_violated" } else { "ok" },
        code: if violated { 1 } else { 0 },
    })
}

#[derive(Serialize)]
struct SgnOutput {
    n: usize,
    params: SgnParams,
    trace: SgnTrace,
}

fn run_sgn(args: &SgnArgs) -> Result<Outcome<SgnOutput>> {
    let a = read_matrix(&args.input)?;
    let params = SgnParams::new(args.eps, args.alpha0, args.beta)?;
    let opts = SgnOptions {
        early_stop: args.early_stop,
        record_norms: true,
    };
    let (s, trace) = sgn_with(&a, &params, &opts)?;
    if let Some(path) = &args.sign_output {
        write_matrix(path, &s)?;
    }
    Ok(Outcome::ok(SgnOutput {
        n: a.rows(),
        params,
        trace,
    }))
}

#[derive(Serialize)]
struct ShatterOutput {
    n: usize,
    gamma: f64,
    mode: ShatterMode,
    grid: Grid,
    epsilon: f64,
    certified: bool,
    below_hardware_precision: bool,
    attempts: usize,
}

fn shatter_input(path: &Path, gamma: f64, mode: Mode, seed: u64) -> Result<(CMatrix, ShatterOutput)> {
    let a = read_matrix(path)?;
    let params = ShatterParams::new(gamma, mode.into())?;
    let cert = shatter(&a, &params, &mut SeededRng::new(seed).derive(0))?;
    let summary = ShatterOutput {
        n: a.rows(),
        gamma,
        mode: cert.mode,
        grid: cert.grid,
        epsilon: cert.epsilon,
        certified: cert.certified,
        below_hardware_precision: cert.below_hardware_precision,
        attempts: cert.attempts,
    };
    Ok((cert.matrix, summary))
}

fn run_shatter(args: &ShatterArgs) -> Result<Outcome<ShatterOutput>> {
    let (x, summary) = shatter_input(&args.input, args.gamma, args.mode, args.common.seed)?;
    if let Some(path) = &args.matrix_output {
        write_matrix(path, &x)?;
    }
    Ok(Outcome::ok(summary))
}

#[derive(Serialize)]
struct SplitOutput {
    shattering: ShatterOutput,
    beta: f64,
    split: SplitSummary,
}

fn run_split(args: &SplitArgs) -> Result<Outcome<SplitOutput>> {
    let (x, shattering) = shatter_input(&args.input, args.gamma, args.mode, args.common.seed)?;
    let beta = args.beta.unwrap_or(0.05 / x.rows().max(1) as f64);
    let result = split(&x, shattering.epsilon.min(0.5), &shattering.grid, beta)?;
    Ok(Outcome::ok(SplitOutput {
        shattering,
        beta,
        split: result.summary(),
    }))
}

fn run_certify(args: &CertifyArgs) -> Result<Outcome<CertificateReport>> {
    let a = read_matrix(&args.input)?;
    let cover = (REGION_SIDE / args.omega).ceil() as u64;
    let grid = Grid::new(
        Complex64::new(args.z0_re, args.z0_im),
        args.omega,
        args.s1.unwrap_or(cover),
        args.s2.unwrap_or(cover),
    )?;
    let report = certify_shattered(&a, &grid, args.eps, args.mesh)?;
    let certified = report.certified;
    Ok(Outcome {
        report,
        csv: None,
        status: if certified { "ok" } else { "not_certified" },
        code: 0,
    })
}

fn run_lab(args: &LabArgs) -> Result<Outcome<ExperimentReport>> {
    let seed = args.common.seed;
    let report = match args.experiment {
        Experiment::Gap => {
            let base = args.input.as_ref().map(|p| read_matrix(p)).transpose()?;
            let n = args.n.or(base.as_ref().map(|b| b.rows())).unwrap_or(8);
            run_gap_experiment(n, args.gamma, args.trials.unwrap_or(200), seed, base.as_ref())?
        }
        Experiment::HaarSigma => {
            run_haar_sigma_experiment(args.n.unwrap_or(4), args.r, args.trials.unwrap_or(2000), seed)?
        }
        Experiment::R22 => {
            if args.n.is_some_and(|n| n != R22_SPECTRUM.len()) {
                return Err(invalid("n", format!("the r22 experiment uses n = {}", R22_SPECTRUM.len())));
            }
            run_r22_experiment(&R22_SPECTRUM, args.r, args.theta, args.trials.unwrap_or(1000), seed)?
        }
        Experiment::E2e => run_e2e_experiment(args.n.unwrap_or(8), args.delta, args.trials.unwrap_or(20), seed)?,
    };
    let csv = report.samples_csv();
    let status = if report.pass { "ok" } else { "bound_exceeded" };
    Ok(Outcome {
        report,
        csv: Some(csv),
        status,
        code: 0,
    })
}

fn parse_calc_params(params: &[String]) -> Result<(Common, BTreeMap<String, f64>)> {
    let mut common = Common {
        seed: 0,
        output: None,
        format: Format::Json,
    };
    let mut inputs = BTreeMap::new();
    let mut it = params.iter();
    while let Some(flag) = it.next() {
        let name = flag
            .strip_prefix("--")
            .ok_or_else(|| invalid("calc", format!("expected `--name value`, found `{flag}`")))?;
        let (key, value) = match name.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| invalid("calc", format!("missing value for `--{name}`")))?;
                (name.to_string(), v.clone())
            }
        };
        match key.as_str() {
            "output" => common.output = Some(PathBuf::from(value)),
            "format" => {
                common.format = Format::from_str(&value, true).map_err(|e| invalid("format", e))?;
            }
            "seed" => common.seed = value.parse().map_err(|_| invalid("seed", format!("`{value}`")))?,
            _ => {
                let x: f64 = value
                    .parse()
                    .map_err(|_| invalid("calc", format!("`--{key}` needs a number, found `{value}`")))?;
                inputs.insert(key.replace('-', "_"), x);
            }
        }
    }
    Ok((common, inputs))
}

#[derive(Serialize)]
struct FormulaList {
    formulas: BTreeMap<&'static str, Vec<&'static str>>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum CalcOutput {
    Formula(FormulaReport),
    List(FormulaList),
}

fn run_calc(formula: &str, inputs: &BTreeMap<String, f64>) -> Result<Outcome<CalcOutput>> {
    if formula == "list" {
        let formulas = FORMULAS.iter().map(|(n, p)| (*n, p.to_vec())).collect();
        return Ok(Outcome::ok(CalcOutput::List(FormulaList { formulas })));
    }
    let report = evaluate(formula, inputs, &BackendProfile::default())?;
    Ok(Outcome::ok(CalcOutput::Formula(report)))
}
