mod decimal;

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use waylimit::bloch::{relative_angle, GateSpec};
use waylimit::bounds::{bound_alt, bound_main, bound_rotational, sweep, BoundReport};
use waylimit::channel::{conservation_residual, sigma_ancilla, worst_case_fidelity, FidelityOptions};
use waylimit::models::{
    build_jc, build_spin_invariant, coherent_state, optimize_implementation, optimize_spin, JcParams, NamedLaw,
    OptimizeOptions,
};
use waylimit::verify::{run_suite, Suite};
use waylimit::{Complex64, Error};

#[derive(Parser)]
#[command(name = "waylimit", version, about = "Conservation-law limits on single-qubit gate fidelity")]
struct Cli {
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, env = "WAYLIMIT_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form bounds at one point.
    Bounds {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long, allow_negative_numbers = true)]
        psi: f64,
        /// Standard deviation of L_A, in the same units as c.
        #[arg(long, allow_negative_numbers = true)]
        sigma: f64,
        /// Scale c of the qubit conserved quantity.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        c: f64,
    },
    /// Tabulate the bounds against psi in [0, pi/2] as CSV.
    Sweep {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long, allow_negative_numbers = true)]
        sigma: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Run a seeded property suite.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Atom-field model driven towards a target gate.
    Jc {
        #[command(flatten)]
        gate: GateArgs,
        /// Modulus of the coherent field amplitude.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        alpha: f64,
        /// Phase of the coherent field amplitude.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        alpha_phase: f64,
        #[arg(long, default_value_t = 32)]
        nmax: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        delta: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        g: f64,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
    },
    /// Best rotationally invariant implementation with a spin-N/2 ancilla.
    Spin {
        #[arg(long = "N", short = 'N')]
        big_n: usize,
        #[command(flatten)]
        gate: GateArgs,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
    },
    /// Best implementation under a named conservation law.
    Optimize {
        /// z, x or jc.
        #[arg(long)]
        law: String,
        #[command(flatten)]
        gate: GateArgs,
        #[arg(long)]
        adim: usize,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
    },
}

#[derive(Args)]
struct GateArgs {
    /// X, Y, Z, H or custom.
    #[arg(long, default_value = "X")]
    gate: String,
    #[arg(long, allow_negative_numbers = true)]
    phi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    ux: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    uy: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    uz: Option<f64>,
}

impl GateArgs {
    fn spec(&self) -> Result<GateSpec, CliError> {
        match self.gate.to_ascii_uppercase().as_str() {
            "X" => Ok(GateSpec::pauli_x()),
            "Y" => Ok(GateSpec::pauli_y()),
            "Z" => Ok(GateSpec::pauli_z()),
            "H" => Ok(GateSpec::hadamard()),
            "I" => Ok(GateSpec::identity()),
            "CUSTOM" => {
                let theta = self.theta.ok_or_else(|| CliError::Usage("--gate custom requires --theta".into()))?;
                let axis = [self.ux.unwrap_or(0.0), self.uy.unwrap_or(0.0), self.uz.unwrap_or(0.0)];
                GateSpec::new(self.phi.unwrap_or(0.0), theta, axis)
                    .map_err(|e| CliError::Usage(format!("--ux/--uy/--uz: {e}")))
            }
            other => Err(CliError::Usage(format!("--gate: unknown gate '{other}', expected X, Y, Z, H or custom"))),
        }
    }
}

enum CliError {
    Usage(String),
    Io(String),
    Model(String),
    PropertyFailed,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::PropertyFailed => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Model(_) => 4,
        }
    }
}

fn require(ok: bool, flag: &str, what: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--{flag}: {what}")))
    }
}

fn finite_in(x: f64, lo: f64, hi: f64) -> bool {
    x.is_finite() && x >= lo && x <= hi
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn model_error(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(msg) => CliError::Usage(msg),
        other => CliError::Model(other.to_string()),
    }
}

#[derive(Serialize)]
struct JcRecord {
    gate: GateSpec,
    params: JcParams,
    alpha: f64,
    alpha_phase: f64,
    psi: f64,
    worst_fidelity: f64,
    infidelity: f64,
    sigma_ancilla: f64,
    bound_main: f64,
    bound_alt: f64,
    conservation_residual: f64,
    bound_respected: bool,
}

#[derive(Serialize)]
struct SpinRecord {
    big_n: usize,
    gate: GateSpec,
    worst_fidelity: f64,
    infidelity: f64,
    bound_rotational: f64,
    gap_to_bound: f64,
    bound_respected: bool,
    restarts: usize,
    best_restart: usize,
    evaluations: usize,
    seed: u64,
}

#[derive(Serialize)]
struct OptimizeRecord {
    law: NamedLaw,
    adim: usize,
    gate: GateSpec,
    psi: f64,
    worst_fidelity: f64,
    infidelity: f64,
    sigma_ancilla: f64,
    bound_main: f64,
    bound_alt: f64,
    gap_to_bound: f64,
    bound_respected: bool,
    conservation_residual: f64,
    restarts: usize,
    best_restart: usize,
    evaluations: usize,
    restart_fidelities: Vec<f64>,
    seed: u64,
}

const BOUND_SLACK: f64 = 1e-7;

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bounds { theta, psi, sigma, c } => {
            require(finite_in(theta, 0.0, TAU), "theta", "must lie in [0, 2 pi]")?;
            require(finite_in(psi, 0.0, std::f64::consts::PI), "psi", "must lie in [0, pi]")?;
            require(finite_in(sigma, 0.0, f64::MAX), "sigma", "must be a non-negative number")?;
            require(finite_in(c, f64::MIN_POSITIVE, f64::MAX), "c", "must be positive")?;
            emit(&cli.out, &to_json(&BoundReport::evaluate(theta, psi, sigma / c)))
        }
        Command::Sweep { theta, sigma, points } => {
            require(finite_in(theta, 0.0, TAU), "theta", "must lie in [0, 2 pi]")?;
            require(finite_in(sigma, 0.0, f64::MAX), "sigma", "must be a non-negative number")?;
            require(points >= 2, "points", "must be at least 2")?;
            let mut csv = String::from("psi,bound_main,bound_alt,bound_alt_simplified\n");
            for row in sweep(theta, sigma, points) {
                let cells = [row.psi, row.bound_main, row.bound_alt, row.bound_alt_simplified]
                    .map(|x| decimal::significant(x, 12));
                writeln!(csv, "{}", cells.join(",")).unwrap();
            }
            emit(&cli.out, &csv)
        }
        Command::Verify { suite, samples } => {
            let suite: Suite = suite.parse().map_err(|e: Error| CliError::Usage(format!("--suite: {e}")))?;
            require(samples >= 1, "samples", "must be at least 1")?;
            let report = run_suite(suite, samples, cli.seed);
            emit(&cli.out, &to_json(&report))?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::PropertyFailed)
            }
        }
        Command::Jc { gate, alpha, alpha_phase, nmax, delta, g, t } => {
            let target = gate.spec()?;
            require(alpha.is_finite() && alpha >= 0.0, "alpha", "must be a non-negative number")?;
            require(nmax >= 1, "nmax", "must be at least 1")?;
            let params = JcParams { detuning: delta, coupling: g, time: t, n_max: nmax };
            let model = build_jc(params).map_err(model_error)?;
            let field = coherent_state(Complex64::from_polar(alpha, alpha_phase), nmax)
                .map_err(|e| CliError::Model(format!("{e}; try a larger --nmax")))?;
            let imp = model
                .implementation(field)
                .map_err(|e| CliError::Model(format!("{e}; try a larger --nmax")))?;
            let fid = worst_case_fidelity(&imp, &target, &FidelityOptions::default());
            let psi = relative_angle(&target, &model.law).psi;
            let sigma = sigma_ancilla(imp.ancilla_state(), &model.law);
            let (bm, ba) = (bound_main(target.theta, psi, sigma), bound_alt(target.theta, psi, sigma));
            let record = JcRecord {
                gate: target,
                params,
                alpha,
                alpha_phase,
                psi,
                worst_fidelity: fid.worst_fidelity,
                infidelity: fid.infidelity(),
                sigma_ancilla: sigma,
                bound_main: bm,
                bound_alt: ba,
                conservation_residual: conservation_residual(&imp, &model.law),
                bound_respected: fid.infidelity() >= bm.max(ba) - BOUND_SLACK,
            };
            emit(&cli.out, &to_json(&record))
        }
        Command::Spin { big_n, gate, restarts, budget } => {
            let target = gate.spec()?;
            require(big_n >= 1, "N", "must be at least 1")?;
            require(restarts >= 1, "restarts", "must be at least 1")?;
            let model = build_spin_invariant(big_n);
            let options = OptimizeOptions { restarts, seed: cli.seed, budget, ..Default::default() };
            let out = optimize_spin(&model, &target, &options);
            let bound = bound_rotational(target.theta, big_n as f64);
            let infidelity = out.fidelity.infidelity();
            let record = SpinRecord {
                big_n,
                gate: target,
                worst_fidelity: out.fidelity.worst_fidelity,
                infidelity,
                bound_rotational: bound,
                gap_to_bound: infidelity - bound,
                bound_respected: infidelity >= bound - BOUND_SLACK,
                restarts,
                best_restart: out.best_restart,
                evaluations: out.evaluations,
                seed: cli.seed,
            };
            emit(&cli.out, &to_json(&record))
        }
        Command::Optimize { law, gate, adim, restarts, budget } => {
            let target = gate.spec()?;
            let named: NamedLaw = law.parse().map_err(|e: Error| CliError::Usage(format!("--law: {e}")))?;
            require(adim >= 1, "adim", "must be at least 1")?;
            require(restarts >= 1, "restarts", "must be at least 1")?;
            let law = named.build(adim);
            let options = OptimizeOptions { restarts, seed: cli.seed, budget, ..Default::default() };
            let out = optimize_implementation(&law, &target, &options);
            let psi = relative_angle(&target, &law).psi;
            let sigma = sigma_ancilla(out.implementation.ancilla_state(), &law);
            let (bm, ba) = (bound_main(target.theta, psi, sigma), bound_alt(target.theta, psi, sigma));
            let infidelity = out.fidelity.infidelity();
            let record = OptimizeRecord {
                law: named,
                adim,
                gate: target,
                psi,
                worst_fidelity: out.fidelity.worst_fidelity,
                infidelity,
                sigma_ancilla: sigma,
                bound_main: bm,
                bound_alt: ba,
                gap_to_bound: infidelity - bm.max(ba),
                bound_respected: infidelity >= bm.max(ba) - BOUND_SLACK,
                conservation_residual: conservation_residual(&out.implementation, &law),
                restarts,
                best_restart: out.best_restart,
                evaluations: out.evaluations,
                restart_fidelities: out.restart_fidelities,
                seed: cli.seed,
            };
            emit(&cli.out, &to_json(&record))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::Io(msg) => eprintln!("error: cannot write output: {msg}"),
                CliError::Model(msg) => eprintln!("error: invalid model: {msg}"),
                CliError::PropertyFailed => eprintln!("error: property check failed"),
            }
            ExitCode::from(e.code())
        }
    }
}
