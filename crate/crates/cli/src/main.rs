//! `vnr`: batch front end for value-and-risk computations.
//!
//! Exit status: 0 on success, 1 for invalid input, 2 when a property check
//! finds a counterexample, 3 on an internal invariant breach.

mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vnr_core::VnrError;

#[derive(Parser, Debug)]
#[command(name = "vnr", version, about = "Value-and-risk measures, intrinsic risk pricing and duality checks")]
pub struct Cli {
    /// Worker threads for the parallel sections; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Report file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Law-invariant risk of a distribution.
    Risk(RiskArgs),
    /// Intrinsic value-and-risk measure R(p) of a test family.
    Vr {
        #[command(flatten)]
        model: ModelArgs,
        /// Purchase price p.
        #[arg(long, allow_negative_numbers = true)]
        price: f64,
    },
    /// CSV curve of Π, R or H on a grid.
    PriceCurve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = CurveArg::R)]
        kind: CurveArg,
        /// Abscissae as `lo:hi:n`.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
    },
    /// Randomised axiom suite.
    Axioms(AxiomArgs),
    /// Cone duality check on random payoffs.
    Duality(DualityArgs),
    /// Indirect model risk recovered from a ramp basket.
    ModelRisk(ModelRiskArgs),
    /// Dual lower bound of the lambda value at risk.
    Propvolle(PropvolleArgs),
}

#[derive(Args, Debug)]
pub struct RiskArgs {
    #[arg(long)]
    pub dist: PathBuf,
    #[arg(long, value_enum)]
    pub measure: RiskArg,
    /// Level λ of the value at risk, or θ of the entropic measure.
    #[arg(long = "risk-level", visible_alias = "lambda")]
    pub risk_level: Option<f64>,
    /// Benchmark Λ for the lambda value at risk.
    #[arg(long = "lambda-fn")]
    pub lambda_fn: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RiskArg {
    Var,
    LambdaVar,
    WorstCase,
    Entropic,
}

/// A test family priced on a law given directly or through a scenario.
#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Family name (`call`, `exp_concave`, ...; a `-family` suffix is
    /// accepted) or a family JSON file.
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub dist: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Pricing measure of the scenario.
    #[arg(long)]
    pub measure: Option<String>,
    /// Random variable of the scenario.
    #[arg(long)]
    pub variable: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CurveArg {
    Pi,
    R,
    H,
}

#[derive(Args, Debug)]
pub struct AxiomArgs {
    /// A family (`call-family`, a family file) or a control map
    /// (`pnl-var`, `shifted-var`).
    #[arg(long)]
    pub target: String,
    /// Comma-separated axiom tags; a default list per target otherwise.
    #[arg(long)]
    pub axioms: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Level of the value at risk in the control maps.
    #[arg(long = "risk-level", visible_alias = "lambda", default_value_t = 0.25)]
    pub risk_level: f64,
}

#[derive(Args, Debug)]
pub struct DualityArgs {
    /// Cone file.
    #[arg(long)]
    pub cone: PathBuf,
    #[arg(long, value_enum, default_value_t = PhiArg::Min)]
    pub phi: PhiArg,
    /// Comma-separated weights of the linear risk reduction.
    #[arg(long)]
    pub weights: Option<String>,
    /// Number of random payoffs.
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
    /// Lattice resolution of the polar sample; 1 keeps the vertices only.
    #[arg(long, default_value_t = 1)]
    pub resolution: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PhiArg {
    Min,
    Linear,
}

#[derive(Args, Debug)]
pub struct ModelRiskArgs {
    /// Model set file.
    #[arg(long = "model-set")]
    pub model_set: PathBuf,
    #[arg(long)]
    pub variable: String,
    /// Number of ramps in the test basket.
    #[arg(long, default_value_t = 64)]
    pub ramps: usize,
    /// Depth of the ramp lattice; ramps have width span / 2^depth.
    #[arg(long, default_value_t = 12)]
    pub depth: u32,
}

#[derive(Args, Debug)]
pub struct PropvolleArgs {
    #[arg(long)]
    pub dist: PathBuf,
    /// Constant benchmark λ.
    #[arg(long = "risk-level", visible_alias = "lambda")]
    pub risk_level: Option<f64>,
    #[arg(long = "lambda-fn")]
    pub lambda_fn: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub ramps: usize,
    #[arg(long, default_value_t = 12)]
    pub depth: u32,
}

fn exit_code(e: &VnrError) -> u8 {
    match e {
        VnrError::Internal(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VNR_LOG", "off")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("vnr: cannot start the thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    let report = match commands::run(&cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("vnr: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &report.body),
        None => std::io::stdout().write_all(report.body.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("vnr: cannot write the report: {e}");
        return ExitCode::from(1);
    }
    if report.failed {
        log::info!("property check failed");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
