//! Command-line front end for the lagsem toolkit: one subcommand per module,
//! JSON for structured results, CSV for series.
//!
//! Exit codes: 0 on success, 1 on a validation failure (bad model file,
//! out-of-domain argument, failed verification), 2 on a usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use lagsem::bernstein::{wphi, wphi_ln, wphi_residual};
use lagsem::distributions::{moments, DensityInverter, MomentKind};
use lagsem::intertwining::{lambda_poly, lambda_shifted, verify_killed, verify_reflected};
use lagsem::localtime::{krein_atoms, phi_subordinator, ExponentTag};
use lagsem::model::presets;
use lagsem::montecarlo::{estimate, Observable, PathConfig};
use lagsem::spectral::{eigenpoly, eigenpoly_killed, Operator, SpectralModel};
use lagsem::{Error, Poly, PsiModel, Result, ThetaShiftedPoly};

#[derive(Parser)]
#[command(
    name = "lagsem",
    version,
    about = "Spectral toolkit for generalized Laguerre semigroups",
    propagate_version = true
)]
struct Cli {
    /// JSON model file holding the quadruplet {beta, sigma2, kappa, jumps}
    #[arg(long, global = true, value_name = "FILE")]
    model: Option<PathBuf>,

    /// Working precision of the verification kernel (`verify` only; every
    /// other subcommand has a single fixed-precision implementation)
    #[arg(long, global = true, value_enum, default_value_t = Precision::Extended)]
    precision: Precision,

    /// Master seed for the randomized subcommands (verify, simulate, acceptance)
    #[arg(long, global = true, default_value_t = 11)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Precision {
    /// Plain f64 throughout.
    Double,
    /// Double-double compensation in the verification kernel.
    Extended,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a model: θ, class-membership flags, and the constant 𝔟
    #[command(override_usage = "lagsem inspect --model <FILE>")]
    Inspect,
    /// Entire moment M(n+1) of one of the catalogued laws
    Moments(MomentsArgs),
    /// Bernstein-gamma function W_φ at a point, with its recursion residual
    Wphi(WphiArgs),
    /// Invariant density by Mellin inversion: one point, or a CSV grid
    Density(DensityArgs),
    /// Coefficients of an eigen-polynomial of the reflected or killed semigroup
    Eigen(EigenArgs),
    /// Apply a semigroup operator to a polynomial
    Apply(ApplyArgs),
    /// Intertwining deviation table on seeded random polynomials
    Verify(VerifyArgs),
    /// Laplace exponent of a catalogued inverse local time: value or CSV series
    Phi(PhiArgs),
    /// Krein atoms (location, weight) of the Laguerre exponent as CSV
    Krein(KreinArgs),
    /// Monte Carlo estimate of an observable, with standard error and config echo
    Simulate(SimulateArgs),
    /// Run the thirteen-point release gate and report pass/fail per check
    #[command(override_usage = "lagsem acceptance [--seed <SEED>]")]
    Acceptance,
}

#[derive(Args)]
#[command(override_usage = "lagsem moments --kind <v_psi|i_phi|v_t1psi|m_up|gamma_ref> --n <N> --model <FILE>")]
struct MomentsArgs {
    /// Moment family: v_psi | i_phi | v_t1psi | m_up | gamma_ref
    #[arg(long)]
    kind: String,
    /// Moment index: emits M(n+1), so --n 0 is the normalization 1
    #[arg(long)]
    n: usize,
}

#[derive(Args)]
#[command(override_usage = "lagsem wphi --re <RE> [--im <IM>] --model <FILE>")]
struct WphiArgs {
    /// Real part of the argument
    #[arg(long)]
    re: f64,
    /// Imaginary part of the argument
    #[arg(long, default_value_t = 0.0)]
    im: f64,
}

#[derive(Args)]
#[command(override_usage = "lagsem density --x <X> [--x-max <X_MAX> --points <POINTS>] --model <FILE>")]
struct DensityArgs {
    /// Evaluation point (with --x-max, the left end of the grid)
    #[arg(long)]
    x: f64,
    /// Right end of a CSV grid; omit for a single-point JSON result
    #[arg(long)]
    x_max: Option<f64>,
    /// Number of grid points when --x-max is given
    #[arg(long, default_value_t = 100)]
    points: usize,
}

#[derive(Args)]
#[command(override_usage = "lagsem eigen --n <N> [--killed] --model <FILE>")]
struct EigenArgs {
    /// Index of the eigen-polynomial
    #[arg(long)]
    n: usize,
    /// Emit the killed-semigroup eigenfunction x^θ·p(x) instead
    #[arg(long)]
    killed: bool,
}

#[derive(Args)]
#[command(
    override_usage = "lagsem apply --operator <p|p_dag|q|q_dag> --t <T> --coeffs <C0,C1,...> [--depth <DEPTH>] --model <FILE>"
)]
struct ApplyArgs {
    /// Semigroup to apply: p | p_dag | q | q_dag
    #[arg(long)]
    operator: String,
    /// Time parameter, t ≥ 0
    #[arg(long)]
    t: f64,
    /// Coefficients of the input polynomial, constant term first; for the
    /// killed operators this is the factor multiplying x^θ
    #[arg(long, value_delimiter = ',', required = true)]
    coeffs: Vec<f64>,
    /// Spectral depth (defaults to the input degree)
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args)]
#[command(
    override_usage = "lagsem verify [--t <T1,T2,...>] [--count <COUNT>] [--degree <DEGREE>] --model <FILE> [--precision <double|extended>] [--seed <SEED>]"
)]
struct VerifyArgs {
    /// Semigroup times to check
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 5.0])]
    t: Vec<f64>,
    /// Number of random polynomials per time
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Degree of the random polynomials
    #[arg(long, default_value_t = 10)]
    degree: usize,
}

#[derive(Args)]
#[command(
    override_usage = "lagsem phi --tag <x_laguerre|xbar_selfsimilar|tilde_x|tilde_y> (--theta <THETA> | --model <FILE>) [--q <Q> | --q-max <Q_MAX> --points <POINTS>]"
)]
struct PhiArgs {
    /// Exponent: x_laguerre | xbar_selfsimilar | tilde_x | tilde_y
    #[arg(long)]
    tag: String,
    /// Self-similarity index; uses the quadratic model with this θ instead of --model
    #[arg(long)]
    theta: Option<f64>,
    /// Single evaluation point; omit for a CSV series
    #[arg(long)]
    q: Option<f64>,
    /// Right end of the CSV grid
    #[arg(long, default_value_t = 10.0)]
    q_max: f64,
    /// Number of grid points
    #[arg(long, default_value_t = 100)]
    points: usize,
}

#[derive(Args)]
#[command(override_usage = "lagsem krein (--theta <THETA> | --model <FILE>) [--n-max <N_MAX>]")]
struct KreinArgs {
    /// Self-similarity index; alternatively taken from --model
    #[arg(long)]
    theta: Option<f64>,
    /// Largest atom index to emit
    #[arg(long, default_value_t = 100)]
    n_max: usize,
}

#[derive(Args)]
#[command(
    override_usage = "lagsem simulate --observable <killed_semigroup|hitting_laplace|stationary_moment> \
    [--t <T>] [--x <X>] [--q <Q>] [--k <K>] [--f <C0,C1,...>] [--dt <DT>] [--eps <EPS>] \
    [--replicas <REPLICAS>] [--threads <THREADS>] --model <FILE> [--seed <SEED>]"
)]
struct SimulateArgs {
    /// Observable: killed_semigroup | hitting_laplace | stationary_moment
    #[arg(long)]
    observable: String,
    /// Semigroup time (killed_semigroup) or path horizon (the others)
    #[arg(long)]
    t: Option<f64>,
    /// Starting point (killed_semigroup, hitting_laplace)
    #[arg(long)]
    x: Option<f64>,
    /// Laplace argument (hitting_laplace)
    #[arg(long)]
    q: Option<f64>,
    /// Moment order (stationary_moment)
    #[arg(long)]
    k: Option<usize>,
    /// Polynomial factor of x^θ for killed_semigroup, constant term first
    #[arg(long, value_delimiter = ',')]
    f: Option<Vec<f64>>,
    /// Euler step of the driving grid
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Absorption threshold standing in for the boundary
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Number of independent replicas
    #[arg(long, default_value_t = 10_000)]
    replicas: usize,
    /// Worker threads (defaults to the rayon global pool)
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    // Die quietly when the reader closes the pipe (`lagsem verify | head`),
    // matching the standard text tools this binary is designed to feed.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(clean) => {
            if clean {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_model(cli: &Cli) -> Result<PsiModel> {
    let Some(path) = &cli.model else {
        return Err(Error::Config(
            "this subcommand needs --model <FILE> (a JSON quadruplet)".into(),
        ));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    PsiModel::from_json(&text)
}

/// Model for the exponent subcommands, which accept either a full model file
/// or a bare index (backed by the quadratic calibration, on which the
/// catalogued exponents only depend through θ).
fn model_or_classical(cli: &Cli, theta: Option<f64>) -> Result<PsiModel> {
    match theta {
        Some(theta) => {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(Error::DomainViolation(format!(
                    "--theta must lie in (0, 1), got {theta}"
                )));
            }
            Ok(presets::classical(theta))
        }
        None if cli.model.is_none() => Err(Error::Config(
            "this subcommand needs --theta <THETA> (quadratic-exponent family) \
             or --model <FILE> (a JSON quadruplet)"
                .into(),
        )),
        None => load_model(cli),
    }
}

fn coefficients_json(poly: &Poly) -> serde_json::Value {
    json!(poly.to_f64_coeffs())
}

/// Run a subcommand. `Ok(false)` is a soft failure: output was produced but
/// a verification did not meet its tolerance, so the exit code is 1.
fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Inspect => {
            let model = load_model(cli)?;
            let report = json!({
                "theta": model.theta(),
                "flags": serde_json::to_value(model.flags())?,
                "frakb": model.frakb(),
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Moments(args) => {
            let model = load_model(cli)?;
            let kind: MomentKind = args.kind.parse()?;
            println!("{}", moments(&model, kind, args.n));
            Ok(true)
        }
        Command::Wphi(args) => {
            let model = load_model(cli)?;
            let z = Complex64::new(args.re, args.im);
            let value = wphi(&model, z)?;
            let ln = wphi_ln(&model, z)?;
            let report = json!({
                "z": [z.re, z.im],
                "value": [value.re, value.im],
                "ln": [ln.re, ln.im],
                "residual": wphi_residual(&model, z)?,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Density(args) => {
            let model = load_model(cli)?;
            let inverter = DensityInverter::new(&model);
            match args.x_max {
                None => {
                    let (value, error) = inverter.value(args.x)?;
                    let report = json!({ "x": args.x, "value": value, "error": error });
                    println!("{}", serde_json::to_string_pretty(&report)?);
                }
                Some(x_max) => {
                    let grid_ok = args.points >= 2 && x_max > args.x;
                    if !grid_ok {
                        return Err(Error::Config(
                            "a density grid needs --points >= 2 and --x-max > --x".into(),
                        ));
                    }
                    println!("x,value,error");
                    let step = (x_max - args.x) / (args.points - 1) as f64;
                    for i in 0..args.points {
                        let x = args.x + step * i as f64;
                        let (value, error) = inverter.value(x)?;
                        println!("{x},{value},{error:e}");
                    }
                }
            }
            Ok(true)
        }
        Command::Eigen(args) => {
            let model = load_model(cli)?;
            let report = if args.killed {
                let mode = eigenpoly_killed(&model, args.n);
                json!({
                    "n": args.n,
                    "decay_rate": args.n as f64 + model.theta(),
                    "shift": mode.theta,
                    "coefficients": coefficients_json(&mode.poly),
                })
            } else {
                json!({
                    "n": args.n,
                    "decay_rate": args.n as f64,
                    "shift": 0.0,
                    "coefficients": coefficients_json(&eigenpoly(&model, args.n)),
                })
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Apply(args) => {
            let model = load_model(cli)?;
            let operator: Operator = args.operator.parse()?;
            let degree = args.coeffs.len().saturating_sub(1);
            let spectral = SpectralModel::new(&model, args.depth.unwrap_or(degree))?;
            let poly = Poly::from_f64_coeffs(&args.coeffs);
            let (shift, result) = match operator {
                Operator::P | Operator::Q => {
                    (0.0, spectral.apply(&poly, args.t, operator)?)
                }
                Operator::PDag | Operator::QDag => {
                    let input = ThetaShiftedPoly::new(model.theta(), poly);
                    let out = spectral.apply_killed(&input, args.t, operator)?;
                    (out.theta, out.poly)
                }
            };
            let report = json!({
                "operator": args.operator,
                "t": args.t,
                "shift": shift,
                "coefficients": coefficients_json(&result),
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Verify(args) => verify_table(cli, args),
        Command::Phi(args) => {
            let tag: ExponentTag = args.tag.parse()?;
            let model = model_or_classical(cli, args.theta)?;
            match args.q {
                Some(q) => {
                    println!("{}", phi_subordinator(tag, &model, q)?);
                }
                None => {
                    let series_ok = args.points >= 1 && args.q_max > 0.0;
                    if !series_ok {
                        return Err(Error::Config(
                            "a series needs --points >= 1 and --q-max > 0".into(),
                        ));
                    }
                    println!("q,phi");
                    for i in 1..=args.points {
                        let q = args.q_max * i as f64 / args.points as f64;
                        println!("{q},{}", phi_subordinator(tag, &model, q)?);
                    }
                }
            }
            Ok(true)
        }
        Command::Krein(args) => {
            let theta = match args.theta {
                Some(theta) => theta,
                None => load_model(cli)?.theta(),
            };
            if !(theta > 0.0 && theta < 1.0) {
                return Err(Error::DomainViolation(format!(
                    "--theta must lie in (0, 1), got {theta}"
                )));
            }
            println!("location,weight");
            for atom in krein_atoms(theta, args.n_max) {
                println!("{},{}", atom.location, atom.weight);
            }
            Ok(true)
        }
        Command::Simulate(args) => simulate(cli, args),
        Command::Acceptance => {
            let reports = lagsem::acceptance::run_all(cli.seed);
            let mut all_passed = true;
            for report in &reports {
                let tag = if report.passed { "PASS" } else { "FAIL" };
                println!(
                    "{:>2}. {tag} {:7.2}s  {} — {}",
                    report.id, report.seconds, report.name, report.detail
                );
                all_passed &= report.passed;
            }
            println!(
                "{}",
                if all_passed {
                    "all 13 checks passed"
                } else {
                    "release gate FAILED"
                }
            );
            Ok(all_passed)
        }
    }
}

/// Intertwining deviation table: CSV of (t, variant, max deviation) over
/// seeded random polynomials, evaluated with the selected kernel. Exits
/// with a validation failure when a deviation exceeds the kernel's
/// tolerance (1e-10 extended, 1e-8 double).
fn verify_table(cli: &Cli, args: &VerifyArgs) -> Result<bool> {
    let model = load_model(cli)?;
    let theta = model.theta();
    let spectral = match cli.precision {
        Precision::Double => Some(SpectralModel::new(&model, args.degree)?),
        Precision::Extended => None,
    };
    let tolerance = match cli.precision {
        Precision::Double => 1e-8,
        Precision::Extended => 1e-10,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut clean = true;
    println!("t,variant,max_deviation");
    for &t in &args.t {
        let mut worst_reflected = 0.0f64;
        let mut worst_killed = 0.0f64;
        for _ in 0..args.count {
            let coeffs: Vec<f64> = (0..=args.degree)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect();
            let f = Poly::from_f64_coeffs(&coeffs);
            let shifted = ThetaShiftedPoly::new(theta, f.clone());
            let (reflected, killed) = match &spectral {
                None => (
                    verify_reflected(&model, &f, t)?,
                    verify_killed(&model, &shifted, t)?,
                ),
                Some(spectral) => (
                    double_precision_reflected(&model, spectral, &f, t)?,
                    double_precision_killed(&model, spectral, &shifted, t)?,
                ),
            };
            worst_reflected = worst_reflected.max(reflected);
            worst_killed = worst_killed.max(killed);
        }
        println!("{t},reflected,{worst_reflected:e}");
        println!("{t},killed,{worst_killed:e}");
        clean &= worst_reflected <= tolerance && worst_killed <= tolerance;
    }
    if !clean {
        eprintln!("error: intertwining deviation exceeded {tolerance:e}");
    }
    Ok(clean)
}

/// Plain-f64 check of P_t∘Λ = Λ∘Q_t through the spectral engine.
fn double_precision_reflected(
    model: &PsiModel,
    spectral: &SpectralModel,
    f: &Poly,
    t: f64,
) -> Result<f64> {
    let lhs = spectral.apply(&lambda_poly(model, f), t, Operator::P)?;
    let rhs = lambda_poly(model, &spectral.apply(f, t, Operator::Q)?);
    Ok(max_coefficient_gap(&lhs, &rhs))
}

/// Plain-f64 check of the killed counterpart on θ-shifted functions.
fn double_precision_killed(
    model: &PsiModel,
    spectral: &SpectralModel,
    f: &ThetaShiftedPoly,
    t: f64,
) -> Result<f64> {
    let lhs = spectral
        .apply_killed(&lambda_shifted(model, f)?, t, Operator::PDag)?
        .poly;
    let rhs = lambda_shifted(model, &spectral.apply_killed(f, t, Operator::QDag)?)?.poly;
    Ok(max_coefficient_gap(&lhs, &rhs))
}

fn max_coefficient_gap(a: &Poly, b: &Poly) -> f64 {
    let scale = (0..=b.degree())
        .map(|k| b.coeff(k).to_f64().abs())
        .fold(1.0, f64::max);
    (0..=a.degree().max(b.degree()))
        .map(|k| (a.coeff(k).to_f64() - b.coeff(k).to_f64()).abs())
        .fold(0.0, f64::max)
        / scale
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<bool> {
    let model = load_model(cli)?;
    let theta = model.theta();
    let (observable, horizon, params) = match args.observable.as_str() {
        "killed_semigroup" => {
            let t = args.t.unwrap_or(1.0);
            let x = args.x.unwrap_or(1.0);
            let coeffs = args.f.clone().unwrap_or_else(|| vec![1.0]);
            let factor = Poly::from_f64_coeffs(&coeffs);
            (
                Observable::KilledSemigroup {
                    f: ThetaShiftedPoly::new(theta, factor),
                    x,
                    t,
                },
                t.max(args.dt),
                json!({ "t": t, "x": x, "f": coeffs }),
            )
        }
        "hitting_laplace" => {
            let q = args.q.unwrap_or(1.0);
            let x = args.x.unwrap_or(1.0);
            (
                Observable::HittingLaplace { q, x },
                args.t.unwrap_or(40.0),
                json!({ "q": q, "x": x }),
            )
        }
        "stationary_moment" => {
            let k = args.k.unwrap_or(2);
            (
                Observable::StationaryMoment { k },
                args.t.unwrap_or(200.0),
                json!({ "k": k }),
            )
        }
        other => {
            return Err(Error::Config(format!(
                "unknown observable `{other}`; expected killed_semigroup | \
                 hitting_laplace | stationary_moment"
            )))
        }
    };
    let cfg = PathConfig {
        dt: args.dt,
        horizon,
        eps_absorb: args.eps,
        seed: cli.seed,
        replicas: args.replicas,
    };
    let result = match args.threads {
        None => estimate(&model, &observable, &cfg)?,
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| estimate(&model, &observable, &cfg))?,
    };
    let report = json!({
        "value": result.value,
        "stderr": result.std_error,
        "config": {
            "model": serde_json::to_value(model.quad())?,
            "observable": args.observable,
            "params": params,
            "dt": args.dt,
            "eps": args.eps,
            "horizon": horizon,
            "replicas": args.replicas,
            "seed": cli.seed,
            "threads": args.threads,
        },
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(true)
}
