//! Monte-Carlo harness: power sweeps, level calibration, null-concentration
//! checks and runtime scaling.
//!
//! Repetitions are the parallel axis. Each repetition draws its data and runs
//! its tests from seeds derived from the master seed and its grid position, so
//! a sweep is reproducible whatever the worker count.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{median_heuristic_test, split_test, SplitConfig};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::fuse::{fuse_statistic, FuseConfig, FuseVariant, Lambda};
use crate::kernels::{build_kernel_bank, BankConfig, DataMatrix, GramStack, NormalizerDenominator, PooledSample};
use crate::permutation::{run_test, PermutationConfig, TestConfig};
use crate::seed::derive_seed;
use crate::synth::{self, GaussMixtureSetting, PerturbedUniformSetting};

/// A family of (p, q) pairs indexed by an effect size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Setting {
    /// Effect: standard deviation of the fourth mixture component in `q`.
    GaussMixture,
    /// Effect: perturbation amplitude of `q`; `p` is uniform.
    PerturbedUniform { d: usize },
    /// Effect: mean shift in every coordinate of `q`.
    ShiftedGaussian { d: usize },
    /// Effect: variance ratio of `q` to `p`.
    ScaledGaussian { d: usize },
}

impl Setting {
    /// The effect value at which `p = q`.
    pub fn null_effect(&self) -> f64 {
        match self {
            Setting::GaussMixture | Setting::ScaledGaussian { .. } => 1.0,
            Setting::PerturbedUniform { .. } | Setting::ShiftedGaussian { .. } => 0.0,
        }
    }

    pub fn generate(&self, effect: f64, n: usize, m: usize, seed: u64) -> Result<(DataMatrix, DataMatrix)> {
        let (sx, sy) = (derive_seed(seed, 0), derive_seed(seed, 1));
        match *self {
            Setting::GaussMixture => Ok((
                synth::sample_gauss_mixture(&GaussMixtureSetting { sigma4: 1.0, n, seed: sx })?,
                synth::sample_gauss_mixture(&GaussMixtureSetting { sigma4: effect, n: m, seed: sy })?,
            )),
            Setting::PerturbedUniform { d } => Ok((
                synth::sample_perturbed_uniform(&PerturbedUniformSetting { a: 0.0, d, n, seed: sx })?,
                synth::sample_perturbed_uniform(&PerturbedUniformSetting { a: effect, d, n: m, seed: sy })?,
            )),
            Setting::ShiftedGaussian { d } => {
                check_dim(d)?;
                Ok((
                    synth::sample_shifted_gaussian(n, d, 0.0, 1.0, sx),
                    synth::sample_shifted_gaussian(m, d, effect, 1.0, sy),
                ))
            }
            Setting::ScaledGaussian { d } => {
                check_dim(d)?;
                if !(effect > 0.0 && effect.is_finite()) {
                    return Err(Error::InvalidConfig(format!("variance ratio must be positive, got {effect}")));
                }
                Ok((
                    synth::sample_shifted_gaussian(n, d, 0.0, 1.0, sx),
                    synth::sample_shifted_gaussian(m, d, 0.0, effect.sqrt(), sy),
                ))
            }
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TestId {
    FuseN,
    Fuse1,
    Median,
    Split,
}

impl TestId {
    pub const ALL: [TestId; 4] = [TestId::FuseN, TestId::Fuse1, TestId::Median, TestId::Split];

    pub fn name(self) -> &'static str {
        match self {
            TestId::FuseN => "fuse_n",
            TestId::Fuse1 => "fuse_1",
            TestId::Median => "median",
            TestId::Split => "split",
        }
    }
}

impl std::str::FromStr for TestId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "fuse_n" => Ok(TestId::FuseN),
            "fuse_1" => Ok(TestId::Fuse1),
            "median" => Ok(TestId::Median),
            "split" => Ok(TestId::Split),
            _ => Err(Error::UnknownTest(s.to_string())),
        }
    }
}

impl TryFrom<String> for TestId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TestId> for String {
    fn from(t: TestId) -> String {
        t.name().to_string()
    }
}

/// Options shared by every test a harness runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestOptions {
    pub alpha: f64,
    pub permutations: usize,
    pub lambda: Lambda,
    pub grid_size: usize,
}

/// Run one test with all of its work on the calling thread.
pub fn run_named_test(test: TestId, x: &DataMatrix, y: &DataMatrix, options: &TestOptions, seed: u64) -> Result<bool> {
    let permutation = PermutationConfig {
        alpha: options.alpha,
        permutations: options.permutations,
        seed,
        execution: Execution::Sequential,
        power_delta: None,
    };
    let fused = |variant| -> Result<bool> {
        let config = TestConfig {
            variant,
            lambda: options.lambda,
            bank: BankConfig { grid_size: options.grid_size, ..BankConfig::default() },
            permutation,
            ..TestConfig::default()
        };
        Ok(run_test(x, y, &config)?.reject)
    };
    match test {
        TestId::FuseN => fused(FuseVariant::Normalised),
        TestId::Fuse1 => fused(FuseVariant::Unnormalised),
        TestId::Median => Ok(median_heuristic_test(x, y, &permutation)?.reject),
        TestId::Split => Ok(split_test(x, y, &permutation, &SplitConfig::default())?.result.reject),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "vary", rename_all = "snake_case")]
pub enum SweepGrid {
    Effect { values: Vec<f64>, n: usize },
    SampleSize { values: Vec<usize>, effect: f64 },
}

impl SweepGrid {
    fn len(&self) -> usize {
        match self {
            SweepGrid::Effect { values, .. } => values.len(),
            SweepGrid::SampleSize { values, .. } => values.len(),
        }
    }

    /// `(grid value, effect, sample size)` of point `g`.
    fn point(&self, g: usize) -> (f64, f64, usize) {
        match self {
            SweepGrid::Effect { values, n } => (values[g], values[g], *n),
            SweepGrid::SampleSize { values, effect } => (values[g] as f64, *effect, values[g]),
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_permutations() -> usize {
    2000
}

fn default_grid_size() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub setting: Setting,
    pub grid: SweepGrid,
    pub reps: usize,
    pub tests: Vec<TestId>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub lambda: Lambda,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if self.grid.len() == 0 {
            return Err(Error::InvalidConfig("grid must not be empty".into()));
        }
        if self.tests.is_empty() {
            return Err(Error::InvalidConfig("tests must not be empty".into()));
        }
        PermutationConfig { alpha: self.alpha, permutations: self.permutations, ..Default::default() }.validate()?;
        self.lambda.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub test: TestId,
    pub grid_value: f64,
    pub reps: usize,
    pub rejections: usize,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub points: Vec<PowerPoint>,
}

pub const CSV_HEADER: &str = "test,grid_value,reps,rejections,rate,ci_lo,ci_hi";

impl PowerCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.test.name(),
                p.grid_value,
                p.reps,
                p.rejections,
                p.rate,
                p.ci_lo,
                p.ci_hi
            ));
        }
        out
    }

    pub fn point(&self, test: TestId, grid_value: f64) -> Option<&PowerPoint> {
        self.points.iter().find(|p| p.test == test && p.grid_value == grid_value)
    }
}

const Z95: f64 = 1.959963984540054;

/// Wilson score 95% interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

fn power_point(test: TestId, grid_value: f64, reps: usize, rejections: usize) -> PowerPoint {
    let (ci_lo, ci_hi) = wilson_interval(rejections, reps);
    PowerPoint {
        test,
        grid_value,
        reps,
        rejections,
        rate: rejections as f64 / reps as f64,
        ci_lo,
        ci_hi,
    }
}

/// Rejection counts of every test at every grid point. Each repetition draws
/// one `(X, Y)` pair shared by all tests.
pub fn power_sweep(spec: &SweepSpec, execution: Execution) -> Result<PowerCurve> {
    spec.validate()?;
    let options = TestOptions {
        alpha: spec.alpha,
        permutations: spec.permutations,
        lambda: spec.lambda,
        grid_size: spec.grid_size,
    };
    let cells = spec.grid.len() * spec.reps;
    let outcomes = exec::map_indexed(execution, cells, |c| -> Result<Vec<bool>> {
        let (g, r) = (c / spec.reps, c % spec.reps);
        let (_, effect, n) = spec.grid.point(g);
        let rep_seed = derive_seed(derive_seed(spec.master_seed, g as u64), r as u64);
        let (x, y) = spec.setting.generate(effect, n, n, rep_seed)?;
        let test_seed = derive_seed(rep_seed, 2);
        spec.tests
            .iter()
            .map(|&t| run_named_test(t, &x, &y, &options, test_seed))
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::with_capacity(spec.grid.len() * spec.tests.len());
    for (ti, &test) in spec.tests.iter().enumerate() {
        for g in 0..spec.grid.len() {
            let rejections = outcomes[g * spec.reps..(g + 1) * spec.reps]
                .iter()
                .filter(|o| o[ti])
                .count();
            points.push(power_point(test, spec.grid.point(g).0, spec.reps, rejections));
        }
    }
    Ok(PowerCurve { points })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub setting: Setting,
    pub n: usize,
    pub reps: usize,
    pub tests: Vec<TestId>,
    pub alpha: f64,
    pub permutations: usize,
    pub seed: u64,
}

/// Rejection rates at the setting's null.
pub fn level_calibration(spec: &CalibrationSpec, execution: Execution) -> Result<PowerCurve> {
    power_sweep(
        &SweepSpec {
            setting: spec.setting,
            grid: SweepGrid::Effect { values: vec![spec.setting.null_effect()], n: spec.n },
            reps: spec.reps,
            tests: spec.tests.clone(),
            alpha: spec.alpha,
            permutations: spec.permutations,
            master_seed: spec.seed,
            lambda: Lambda::Auto,
            grid_size: default_grid_size(),
        },
        execution,
    )
}

/// One-sided tolerance an empirical rate is allowed above `p` after `reps` trials.
pub fn mc_slack(p: f64, reps: usize) -> f64 {
    3.0 * (p * (1.0 - p) / reps as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationConfig {
    pub variant: FuseVariant,
    pub n: usize,
    pub m: usize,
    pub lambda: f64,
    pub t: f64,
    pub delta: f64,
    pub reps: usize,
    pub seed: u64,
    pub setting: Setting,
}

/// Largest admissible `λ` (and `t`), exclusive.
pub fn concentration_limit(variant: FuseVariant, n: usize, m: usize) -> f64 {
    let n0 = n.min(m) as f64;
    let base = (n0 * (n0 - 1.0)).sqrt() / std::f64::consts::SQRT_2;
    match variant {
        FuseVariant::Unnormalised => base / 8.0,
        FuseVariant::Normalised => base / 16.0,
    }
}

/// `c s / (n0 (n0 - 1)) + ln(1/δ) / s` with `c = 4` (bounded by 1) or `16`.
pub fn concentration_bound(variant: FuseVariant, n: usize, m: usize, s: f64, delta: f64) -> f64 {
    let n0 = n.min(m) as f64;
    let c = match variant {
        FuseVariant::Unnormalised => 4.0,
        FuseVariant::Normalised => 16.0,
    };
    c * s / (n0 * (n0 - 1.0)) + (1.0 / delta).ln() / s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub variant: FuseVariant,
    pub n: usize,
    pub m: usize,
    pub lambda: f64,
    pub t: f64,
    pub delta: f64,
    pub reps: usize,
    pub limit: f64,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub upper_violation: f64,
    pub lower_violation: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Tail frequencies of the fused statistic on fresh null draws against the
/// high-probability bounds. The upper tail uses the statistic at `λ`; the
/// lower tail uses it at `t`.
pub fn null_concentration_report(config: &ConcentrationConfig, execution: Execution) -> Result<ConcentrationReport> {
    let ConcentrationConfig { variant, n, m, lambda, t, delta, reps, seed, setting } = *config;
    if n < 2 || m < 2 {
        return Err(Error::InvalidInput(format!("need n, m >= 2 (got {n}, {m})")));
    }
    let limit = concentration_limit(variant, n, m);
    for (name, v) in [("lambda", lambda), ("t", t)] {
        if !(v > 0.0 && v < limit) {
            return Err(Error::InvalidConfig(format!("{name} = {v} must lie in (0, {limit})")));
        }
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
    }
    if reps < 1 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    let upper_bound = concentration_bound(variant, n, m, lambda, delta);
    let lower_bound = concentration_bound(variant, n, m, t, delta);
    let identity: Vec<usize> = (0..n + m).collect();
    let outcomes = exec::map_indexed(execution, reps, |r| -> Result<(bool, bool)> {
        let (x, y) = setting.generate(setting.null_effect(), n, m, derive_seed(seed, r as u64))?;
        let z = PooledSample::new(&x, &y)?;
        let bank = build_kernel_bank(&z, &BankConfig::default())?;
        let stack = GramStack::with_execution(&bank, &z, NormalizerDenominator::FirstSample, Execution::Sequential);
        let at = |l: f64| fuse_statistic(&stack, &identity, &FuseConfig { variant, lambda: Lambda::Value(l) });
        let upper = at(lambda)?.value > upper_bound;
        let lower = -at(t)?.value > lower_bound;
        Ok((upper, lower))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let frac = |f: fn(&(bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / reps as f64;
    let upper_violation = frac(|o| o.0);
    let lower_violation = frac(|o| o.1);
    let slack = mc_slack(delta, reps);
    Ok(ConcentrationReport {
        variant,
        n,
        m,
        lambda,
        t,
        delta,
        reps,
        limit,
        upper_bound,
        lower_bound,
        upper_violation,
        lower_violation,
        slack,
        pass: upper_violation <= delta + slack && lower_violation <= delta + slack,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub n: usize,
    pub kernels: usize,
    pub permutations: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<TimingRow>,
    /// Least-squares slope of log time against log n.
    pub slope: f64,
}

/// Fastest wall time over `repeats` single-threaded FUSE-N tests at `n = m`
/// on the `N(0, I)` versus `N(0, 1.1 I)` pair, after one untimed warm-up.
/// Interference only ever slows a run down, so the minimum is the most
/// stable estimate of the cost. Data generation is not timed; bank and gram
/// construction are.
pub fn time_run_test(n: usize, d: usize, grid_size: usize, permutations: usize, seed: u64, repeats: usize) -> Result<TimingRow> {
    if repeats < 1 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    let (x, y) = Setting::ScaledGaussian { d }.generate(1.1, n, n, seed)?;
    let config = TestConfig {
        bank: BankConfig { grid_size, ..BankConfig::default() },
        permutation: PermutationConfig {
            permutations,
            seed,
            execution: Execution::Sequential,
            ..PermutationConfig::default()
        },
        ..TestConfig::default()
    };
    let kernels = run_test(&x, &y, &config)?.kernels.len();
    let mut seconds = f64::INFINITY;
    for _ in 0..repeats {
        let start = Instant::now();
        run_test(&x, &y, &config)?;
        seconds = seconds.min(start.elapsed().as_secs_f64());
    }
    Ok(TimingRow { n, kernels, permutations, seconds })
}

pub fn runtime_scaling(sizes: &[usize], d: usize, grid_size: usize, permutations: usize, seed: u64, repeats: usize) -> Result<ScalingReport> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("sizes must be nonempty and strictly ascending".into()));
    }
    let rows = sizes
        .iter()
        .map(|&n| time_run_test(n, d, grid_size, permutations, seed, repeats))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.n as f64).ln(), r.seconds.ln())).collect();
    let slope = if pts.len() < 2 {
        f64::NAN
    } else {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    Ok(ScalingReport { rows, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::gram_stack;
    use crate::permutation::{permuted_statistics, sample_permutations, Statistic};
    use crate::quantile::empirical_quantile;

    #[test]
    fn wilson_cases() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036995).abs() < 1e-5);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.403831).abs() < 1e-5 && (hi - 0.596169).abs() < 1e-5);
    }

    #[test]
    fn test_ids_parse() {
        assert_eq!("fuse-n".parse::<TestId>().unwrap(), TestId::FuseN);
        assert_eq!("FUSE_1".parse::<TestId>().unwrap(), TestId::Fuse1);
        assert!(matches!("agg".parse::<TestId>(), Err(Error::UnknownTest(_))));
        let bad = serde_json::from_str::<Vec<TestId>>(r#"["median", "mmdagg"]"#);
        assert!(bad.unwrap_err().to_string().contains("mmdagg"));
    }

    fn small_spec() -> SweepSpec {
        SweepSpec {
            setting: Setting::ShiftedGaussian { d: 1 },
            grid: SweepGrid::Effect { values: vec![0.0, 100.0], n: 20 },
            reps: 12,
            tests: vec![TestId::FuseN, TestId::Median],
            alpha: 0.05,
            permutations: 100,
            master_seed: 3,
            lambda: Lambda::Auto,
            grid_size: 10,
        }
    }

    #[test]
    fn sweep_is_reproducible_and_counts_are_consistent() {
        let spec = small_spec();
        let a = power_sweep(&spec, Execution::Sequential).unwrap();
        let b = power_sweep(&spec, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.len(), 4);
        for p in &a.points {
            assert!(p.rejections <= p.reps);
            assert!(p.ci_lo <= p.rate && p.rate <= p.ci_hi);
        }
        assert_eq!(a.point(TestId::FuseN, 100.0).unwrap().rejections, 12);
        let csv = a.to_csv();
        assert!(csv.starts_with("test,grid_value,reps,rejections,rate,ci_lo,ci_hi\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn sweep_json_round_trip() {
        let text = r#"{"setting":{"kind":"perturbed_uniform","d":1},
            "grid":{"vary":"sample_size","values":[20,40],"effect":0.5},
            "reps":3,"tests":["fuse_n","split"],"permutations":50}"#;
        let spec: SweepSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.alpha, 0.05);
        assert_eq!(spec.lambda, Lambda::Auto);
        let back: SweepSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn settings_generate_nulls_and_shapes() {
        for s in [
            Setting::GaussMixture,
            Setting::PerturbedUniform { d: 2 },
            Setting::ShiftedGaussian { d: 3 },
            Setting::ScaledGaussian { d: 4 },
        ] {
            let (x, y) = s.generate(s.null_effect(), 10, 12, 5).unwrap();
            assert_eq!((x.rows(), y.rows()), (10, 12));
            assert_eq!(x.dim(), y.dim());
        }
        assert!(Setting::PerturbedUniform { d: 1 }.generate(1.5, 5, 5, 0).is_err());
    }

    #[test]
    fn concentration_range_is_enforced() {
        let limit = concentration_limit(FuseVariant::Normalised, 50, 50);
        let mut cfg = ConcentrationConfig {
            variant: FuseVariant::Normalised,
            n: 50,
            m: 50,
            lambda: 1.01 * limit,
            t: 0.5 * limit,
            delta: 0.1,
            reps: 10,
            seed: 0,
            setting: Setting::ShiftedGaussian { d: 1 },
        };
        let err = null_concentration_report(&cfg, Execution::Sequential).unwrap_err();
        assert!(err.to_string().contains("lambda"));
        cfg.lambda = 0.5 * limit;
        let report = null_concentration_report(&cfg, Execution::Sequential).unwrap();
        assert!(report.pass);
        assert_eq!(
            concentration_limit(FuseVariant::Unnormalised, 50, 50),
            2.0 * concentration_limit(FuseVariant::Normalised, 50, 50)
        );
    }

    #[test]
    fn permutation_upper_tail_of_fuse1() {
        // Fixed Z, random σ: the (1 - δ) permutation quantile sits below the bound.
        let (n, delta) = (50, 0.1);
        let lambda = (n as f64 * (n as f64 - 1.0)).sqrt() / (16.0 * std::f64::consts::SQRT_2);
        let bound = concentration_bound(FuseVariant::Unnormalised, n, n, lambda, delta);
        let mut failures = 0;
        for s in 0..10u64 {
            let (x, y) = Setting::ShiftedGaussian { d: 2 }.generate(0.5, n, n, s).unwrap();
            let z = PooledSample::new(&x, &y).unwrap();
            let stack = gram_stack(&build_kernel_bank(&z, &BankConfig::default()).unwrap(), &z);
            let perms = sample_permutations(2 * n, 5000, s).unwrap();
            let stat = Statistic::Fuse { variant: FuseVariant::Unnormalised, lambda: Lambda::Value(lambda) };
            let stats = permuted_statistics(&stack, stat, &perms, Execution::Parallel).unwrap();
            let q = empirical_quantile(&stats[..5000], 1.0 - delta).unwrap();
            failures += (q > bound) as usize;
        }
        assert!(failures <= 1);
    }

    #[test]
    fn scaling_rejects_unsorted_sizes() {
        assert!(runtime_scaling(&[40, 20], 2, 2, 10, 0, 1).is_err());
        let r = runtime_scaling(&[20, 40], 2, 2, 10, 0, 1).unwrap();
        assert_eq!(r.rows[0].kernels, 4);
        assert!(r.slope.is_finite());
    }
}
