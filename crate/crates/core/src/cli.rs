//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! unreadable or unusable data. With `--exit-code-decision`, `test` exits 10
//! when it rejects.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::baselines::{median_heuristic_test, split_test, SplitConfig};
use crate::error::{Error, Result};
use crate::exec::{configure_threads, Execution};
use crate::experiments::{
    concentration_limit, level_calibration, null_concentration_report, power_sweep, runtime_scaling,
    CalibrationSpec, ConcentrationConfig, ConcentrationReport, PowerCurve, Setting, SweepSpec, TestId,
};
use crate::fuse::{FuseVariant, Lambda};
use crate::io::read_matrix;
use crate::kernels::{BankConfig, KernelFamily, NormalizerDenominator};
use crate::permutation::{run_test, PermutationConfig, TestConfig, TestResult};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_REJECT: i32 = 10;

#[derive(Parser, Debug)]
#[command(name = "mmd-fuse", version, about = "Kernel two-sample tests with fused MMD statistics")]
struct Cli {
    /// Worker threads (falls back to FUSE_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test two samples read from delimited text files.
    Test(TestArgs),
    /// Run a power sweep described by a JSON file.
    Power(PowerArgs),
    /// Estimate type-I error rates on a null setting.
    Calibrate(CalibrateArgs),
    /// Compare null tail frequencies of the fused statistics with their bounds.
    Concentration(ConcentrationArgs),
    /// Time single-threaded tests across sample sizes.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct TestArgs {
    /// First sample, one observation per line.
    #[arg(long)]
    x: PathBuf,
    /// Second sample, with the same number of columns.
    #[arg(long)]
    y: PathBuf,
    /// fuse-n, fuse-1, median or split.
    #[arg(long, default_value = "fuse-n")]
    test: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Number of sampled permutations.
    #[arg(long = "b", default_value_t = 2000)]
    permutations: usize,
    /// Soft-max temperature, or `auto` for the first sample size.
    #[arg(long, default_value = "auto")]
    lambda: String,
    #[arg(long, value_delimiter = ',', default_value = "gaussian,laplace")]
    families: Vec<String>,
    #[arg(long, default_value_t = 10)]
    grid_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Centre and scale each coordinate by pooled statistics first.
    #[arg(long)]
    standardize: bool,
    /// Normaliser denominator: first (n (n - 1)) or full (N (N - 1)).
    #[arg(long, default_value = "first")]
    normalizer: String,
    /// Require enough permutations for the power guarantee at this δ.
    #[arg(long)]
    power_delta: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Include every permuted statistic in JSON output.
    #[arg(long)]
    verbose: bool,
    /// Exit with status 10 when the null is rejected.
    #[arg(long)]
    exit_code_decision: bool,
}

#[derive(Args, Debug)]
struct PowerArgs {
    /// JSON sweep description.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SettingArg {
    GaussMixture,
    PerturbedUniform,
    ShiftedGaussian,
    ScaledGaussian,
}

impl SettingArg {
    fn with_dim(self, d: usize) -> Setting {
        match self {
            SettingArg::GaussMixture => Setting::GaussMixture,
            SettingArg::PerturbedUniform => Setting::PerturbedUniform { d },
            SettingArg::ShiftedGaussian => Setting::ShiftedGaussian { d },
            SettingArg::ScaledGaussian => Setting::ScaledGaussian { d },
        }
    }
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, value_enum, default_value_t = SettingArg::GaussMixture)]
    setting: SettingArg,
    /// Dimension, for settings that have one.
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "fuse-n,fuse-1,median,split")]
    tests: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long = "b", default_value_t = 500)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    One,
    N,
    Both,
}

#[derive(Args, Debug)]
struct ConcentrationArgs {
    #[arg(long, value_enum, default_value_t = VariantArg::Both)]
    variant: VariantArg,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    m: usize,
    /// Upper-tail temperature; overrides --lambda-fraction.
    #[arg(long)]
    lambda: Option<f64>,
    /// Upper-tail temperature as a fraction of each variant's admissible limit.
    #[arg(long, default_value_t = 0.5)]
    lambda_fraction: f64,
    /// Lower-tail temperature; overrides --t-fraction.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    t_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SettingArg::ShiftedGaussian)]
    setting: SettingArg,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    grid_size: usize,
    #[arg(long = "b", default_value_t = 500)]
    permutations: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::UnknownTest(_) => EXIT_USAGE,
            Error::InvalidInput(_) | Error::DegenerateData(_) | Error::DegenerateKernel { .. } | Error::Data(_) => {
                EXIT_DATA
            }
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: String) -> Failure {
    Failure { code: EXIT_USAGE, message }
}

/// Parse `args` (program name first), run the command, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: Cli) -> std::result::Result<i32, Failure> {
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => match std::env::var("FUSE_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| usage(format!("FUSE_THREADS must be a positive integer, got `{v}`")))?),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(usage("threads must be at least 1".into()));
        }
        configure_threads(t);
    }
    match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Power(args) => cmd_power(args).map(|_| 0),
        Command::Calibrate(args) => cmd_calibrate(args).map(|_| 0),
        Command::Concentration(args) => cmd_concentration(args).map(|_| 0),
        Command::Bench(args) => cmd_bench(args).map(|_| 0),
    }
}

fn check_alpha(alpha: f64) -> std::result::Result<(), Failure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(usage(format!("--alpha must lie in the open interval (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_permutations(b: usize) -> std::result::Result<(), Failure> {
    if b < 1 {
        return Err(usage("--b must be at least 1".into()));
    }
    Ok(())
}

fn emit(output: Option<&PathBuf>, text: &str) -> std::result::Result<(), Failure> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure {
            code: EXIT_DATA,
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialise");
    s.push('\n');
    s
}

fn cmd_test(args: TestArgs) -> std::result::Result<i32, Failure> {
    check_alpha(args.alpha)?;
    check_permutations(args.permutations)?;
    let test: TestId = args.test.parse()?;
    let lambda: Lambda = args.lambda.parse()?;
    let normalizer: NormalizerDenominator = args.normalizer.parse()?;
    let families = args
        .families
        .iter()
        .map(|f| f.parse::<KernelFamily>())
        .collect::<Result<Vec<_>>>()?;
    let x = read_matrix(&args.x)?;
    let y = read_matrix(&args.y)?;

    let permutation = PermutationConfig {
        alpha: args.alpha,
        permutations: args.permutations,
        seed: args.seed,
        execution: Execution::Parallel,
        power_delta: args.power_delta,
    };
    let mut extra = serde_json::Map::new();
    let result: TestResult = match test {
        TestId::FuseN | TestId::Fuse1 => {
            let config = TestConfig {
                variant: if test == TestId::FuseN { FuseVariant::Normalised } else { FuseVariant::Unnormalised },
                lambda,
                bank: BankConfig { families: families.clone(), grid_size: args.grid_size, ..BankConfig::default() },
                standardize: args.standardize,
                normalizer,
                permutation,
            };
            run_test(&x, &y, &config)?
        }
        TestId::Median => median_heuristic_test(&x, &y, &permutation)?,
        TestId::Split => {
            let split = split_test(&x, &y, &permutation, &SplitConfig::default())?;
            extra.insert("selected_bandwidth".into(), json!(split.selection.bandwidth()));
            split.result
        }
    };

    let text = match args.format {
        Format::Json => {
            let mut value = serde_json::to_value(&result).expect("results serialise");
            let obj = value.as_object_mut().expect("result is an object");
            if !args.verbose {
                obj.remove("permuted_stats");
            }
            obj.extend(extra);
            obj.insert(
                "config".into(),
                json!({
                    "test": test.name(),
                    "alpha": args.alpha,
                    "permutations": args.permutations,
                    "seed": args.seed,
                    "lambda": lambda.to_string(),
                    "families": families.iter().map(|f| f.name()).collect::<Vec<_>>(),
                    "grid_size": args.grid_size,
                    "standardize": args.standardize,
                    "normalizer": normalizer,
                    "power_delta": args.power_delta,
                    "x": args.x.display().to_string(),
                    "y": args.y.display().to_string(),
                }),
            );
            to_json(&Value::Object(obj.clone()))
        }
        Format::Csv => format!(
            "method,statistic,threshold,p_proxy,reject\n{},{},{},{},{}\n",
            result.method, result.statistic, result.threshold, result.p_proxy, result.reject
        ),
    };
    emit(args.output.as_ref(), &text)?;
    Ok(if args.exit_code_decision && result.reject { EXIT_REJECT } else { 0 })
}

fn emit_curve(curve: &PowerCurve, format: Format, output: Option<&PathBuf>) -> std::result::Result<(), Failure> {
    let text = match format {
        Format::Csv => curve.to_csv(),
        Format::Json => to_json(curve),
    };
    emit(output, &text)
}

fn cmd_power(args: PowerArgs) -> std::result::Result<(), Failure> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("cannot read {}: {e}", args.config.display()),
    })?;
    let spec: SweepSpec = serde_json::from_str(&text)
        .map_err(|e| usage(format!("invalid sweep config {}: {e}", args.config.display())))?;
    check_alpha(spec.alpha)?;
    let curve = power_sweep(&spec, Execution::Parallel)?;
    emit_curve(&curve, args.format, args.output.as_ref())
}

fn cmd_calibrate(args: CalibrateArgs) -> std::result::Result<(), Failure> {
    check_alpha(args.alpha)?;
    check_permutations(args.permutations)?;
    let tests = args.tests.iter().map(|t| t.parse()).collect::<Result<Vec<TestId>>>()?;
    let spec = CalibrationSpec {
        setting: args.setting.with_dim(args.d),
        n: args.n,
        reps: args.reps,
        tests,
        alpha: args.alpha,
        permutations: args.permutations,
        seed: args.seed,
    };
    let curve = level_calibration(&spec, Execution::Parallel)?;
    emit_curve(&curve, args.format, args.output.as_ref())
}

const CONCENTRATION_HEADER: &str =
    "variant,n,m,lambda,t,delta,reps,limit,upper_bound,lower_bound,upper_violation,lower_violation,slack,pass";

fn cmd_concentration(args: ConcentrationArgs) -> std::result::Result<(), Failure> {
    let variants = match args.variant {
        VariantArg::One => vec![FuseVariant::Unnormalised],
        VariantArg::N => vec![FuseVariant::Normalised],
        VariantArg::Both => vec![FuseVariant::Unnormalised, FuseVariant::Normalised],
    };
    let reports = variants
        .into_iter()
        .map(|variant| {
            let limit = concentration_limit(variant, args.n, args.m);
            null_concentration_report(
                &ConcentrationConfig {
                    variant,
                    n: args.n,
                    m: args.m,
                    lambda: args.lambda.unwrap_or(args.lambda_fraction * limit),
                    t: args.t.unwrap_or(args.t_fraction * limit),
                    delta: args.delta,
                    reps: args.reps,
                    seed: args.seed,
                    setting: args.setting.with_dim(args.d),
                },
                Execution::Parallel,
            )
        })
        .collect::<Result<Vec<ConcentrationReport>>>()?;
    let text = match args.format {
        Format::Json => to_json(&reports),
        Format::Csv => {
            let mut s = format!("{CONCENTRATION_HEADER}\n");
            for r in &reports {
                let name = match r.variant {
                    FuseVariant::Normalised => "fuse_n",
                    FuseVariant::Unnormalised => "fuse_1",
                };
                s.push_str(&format!(
                    "{name},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.n, r.m, r.lambda, r.t, r.delta, r.reps, r.limit, r.upper_bound, r.lower_bound,
                    r.upper_violation, r.lower_violation, r.slack, r.pass
                ));
            }
            s
        }
    };
    emit(args.output.as_ref(), &text)
}

fn cmd_bench(args: BenchArgs) -> std::result::Result<(), Failure> {
    check_permutations(args.permutations)?;
    let report = runtime_scaling(&args.sizes, args.d, args.grid_size, args.permutations, args.seed, args.repeats)?;
    let text = match args.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut s = String::from("n,kernels,permutations,seconds\n");
            for r in &report.rows {
                s.push_str(&format!("{},{},{},{}\n", r.n, r.kernels, r.permutations, r.seconds));
            }
            s
        }
    };
    eprintln!("log-log slope: {:.3}", report.slope);
    emit(args.output.as_ref(), &text)
}
