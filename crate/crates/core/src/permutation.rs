//! Permutation sampling, the batched permutation-statistic engine, and the
//! complete test decision.
//!
//! Every statistic needed by a permutation test is a function of three block
//! sums of each gram: within `X`, within `Y` and across. With the row sums and
//! the off-diagonal total precomputed, only the within-`X` sum has to be
//! gathered per permutation. The gather walks the packed gram row by row for a
//! batch of permutations at once, so each row is loaded once per batch rather
//! than once per permutation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::fuse::{self, FuseVariant, Lambda};
use crate::kernels::{
    build_kernel_bank, check_permutation, pooled_standardize, BankConfig, DataMatrix, GramStack,
    NormalizerDenominator, PooledSample, Standardization,
};
use crate::mmd::mmd_from_block_sums;
use crate::seed;

pub use crate::quantile::empirical_quantile;

/// Permutations gathered together in one pass over the gram.
const BATCH: usize = 32;

/// `B` sampled permutations of `0..size` followed by the identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationSet {
    size: usize,
    sampled: usize,
    seed: u64,
    perms: Vec<usize>,
}

impl PermutationSet {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of sampled (non-identity) permutations.
    pub fn sampled(&self) -> usize {
        self.sampled
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `B + 1`.
    pub fn len(&self) -> usize {
        self.sampled + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, j: usize) -> &[usize] {
        &self.perms[j * self.size..(j + 1) * self.size]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        self.perms.chunks_exact(self.size)
    }
}

/// Draw `b` i.i.d. uniform permutations by Fisher-Yates, permutation `j`
/// from stream `j` of `seed`, and append the identity.
pub fn sample_permutations(size: usize, b: usize, seed: u64) -> Result<PermutationSet> {
    if size < 2 {
        return Err(Error::InvalidInput(format!("cannot permute {size} points")));
    }
    if b < 1 {
        return Err(Error::InvalidConfig("number of permutations must be at least 1".into()));
    }
    let mut perms = Vec::with_capacity((b + 1) * size);
    for j in 0..b {
        let start = perms.len();
        perms.extend(0..size);
        perms[start..].shuffle(&mut seed::stream_rng(seed, j as u64));
    }
    perms.extend(0..size);
    Ok(PermutationSet {
        size,
        sampled: b,
        seed,
        perms,
    })
}

/// `Σ_j row[j] mask[j]` with eight interleaved partial sums combined in a
/// fixed order, so the loop vectorises and the result is reproducible.
#[inline]
fn masked_sum(row: &[f64], mask: &[f64]) -> f64 {
    let mut lanes = [0.0f64; 8];
    let split = row.len() - row.len() % 8;
    for (r, w) in row[..split].chunks_exact(8).zip(mask[..split].chunks_exact(8)) {
        for l in 0..8 {
            lanes[l] += r[l] * w[l];
        }
    }
    let mut tail = 0.0;
    for (r, w) in row[split..].iter().zip(&mask[split..]) {
        tail += r * w;
    }
    ((lanes[0] + lanes[4]) + (lanes[2] + lanes[6]))
        + ((lanes[1] + lanes[5]) + (lanes[3] + lanes[7]))
        + tail
}

/// Fill `masks` with the `X` indicator of each permutation, `[p * N + i]`.
fn fill_masks(perms: &[&[usize]], n: usize, size: usize, masks: &mut Vec<f64>) {
    masks.clear();
    masks.resize(perms.len() * size, 0.0);
    for (p, perm) in perms.iter().enumerate() {
        for &i in &perm[..n] {
            masks[p * size + i] = 1.0;
        }
    }
}

/// Half the within-`X` off-diagonal sum of kernel `k`, per permutation. The
/// sum runs over `X` rows in ascending order, each row a [`masked_sum`]
/// against the `X` indicator, so the value does not depend on batching.
fn within_sums(stack: &GramStack, k: usize, masks: &[f64], count: usize) -> Vec<f64> {
    let size = stack.size();
    let mut within = vec![0.0; count];
    for i in 1..size {
        let row = stack.strict_row(k, i);
        for (p, w) in within.iter_mut().enumerate() {
            let mask = &masks[p * size..(p + 1) * size];
            if mask[i] != 0.0 {
                *w += masked_sum(row, &mask[..i]);
            }
        }
    }
    within
}

/// Sum of off-diagonal row sums over `X`, per kernel, rows ascending.
fn x_row_sums(stack: &GramStack, mask: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; stack.kernel_count()];
    for i in (0..stack.size()).filter(|&i| mask[i] != 0.0) {
        for (a, &s) in acc.iter_mut().zip(stack.row_sums(i)) {
            *a += s;
        }
    }
    acc
}

/// Per-kernel MMD² of every permutation, `[j * K + k]`.
///
/// Kernels form the outer loop so that one kernel's triangle is reused by
/// all permutation batches while it is still cached.
fn mmd_table(stack: &GramStack, perms: &[&[usize]], execution: Execution) -> Vec<f64> {
    let kernels = stack.kernel_count();
    let (n, m, size) = (stack.n(), stack.m(), stack.size());
    let total = perms.len();
    let batches = total.div_ceil(BATCH);
    let batch = |b: usize| &perms[b * BATCH..((b + 1) * BATCH).min(total)];

    let x_rows = exec::map_indexed(execution, batches, |b| {
        let mut masks = Vec::new();
        fill_masks(batch(b), n, size, &mut masks);
        (0..batch(b).len())
            .map(|p| x_row_sums(stack, &masks[p * size..(p + 1) * size]))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect::<Vec<_>>();

    let mut table = vec![0.0; total * kernels];
    for k in 0..kernels {
        let within = exec::map_indexed(execution, batches, |b| {
            let mut masks = Vec::new();
            fill_masks(batch(b), n, size, &mut masks);
            within_sums(stack, k, &masks, batch(b).len())
        });
        let totals = stack.totals();
        for (j, w) in within.into_iter().flatten().enumerate() {
            table[j * kernels + k] = mmd_from_block_sums(2.0 * w, x_rows[j][k], totals[k], n, m);
        }
    }
    table
}

/// MMD² of `σZ` under every bank kernel.
pub fn kernel_mmds(stack: &GramStack, perm: &[usize]) -> Result<Vec<f64>> {
    check_permutation(perm, stack.size())?;
    Ok(mmd_table(stack, &[perm], Execution::Sequential))
}

/// The statistic evaluated on each permuted sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// Raw MMD² of a single-kernel bank.
    Mmd,
    Fuse { variant: FuseVariant, lambda: Lambda },
}

impl Statistic {
    pub fn label(&self) -> &'static str {
        match self {
            Statistic::Mmd => "mmd",
            Statistic::Fuse { variant: FuseVariant::Normalised, .. } => "fuse_n",
            Statistic::Fuse { variant: FuseVariant::Unnormalised, .. } => "fuse_1",
        }
    }

    fn check(&self, stack: &GramStack) -> Result<()> {
        match *self {
            Statistic::Mmd if stack.kernel_count() != 1 => Err(Error::InvalidConfig(format!(
                "raw MMD statistic needs a single kernel, bank has {}",
                stack.kernel_count()
            ))),
            Statistic::Mmd => Ok(()),
            Statistic::Fuse { variant, lambda } => {
                lambda.validate()?;
                fuse::check_normalisers(stack, variant)
            }
        }
    }
}

/// The statistic on every permutation of `perms`, in order.
pub fn permuted_statistics(
    stack: &GramStack,
    statistic: Statistic,
    perms: &PermutationSet,
    execution: Execution,
) -> Result<Vec<f64>> {
    if perms.size() != stack.size() {
        return Err(Error::InvalidInput(format!(
            "permutations of {} points for a sample of {}",
            perms.size(),
            stack.size()
        )));
    }
    statistic.check(stack)?;
    let kernels = stack.kernel_count();
    let weights = stack.bank().weights().as_slice();
    let normalisers = stack.normalisers();
    let lambda = match statistic {
        Statistic::Fuse { lambda, .. } => lambda.resolve(stack.n()),
        Statistic::Mmd => 1.0,
    };
    let all: Vec<&[usize]> = perms.iter().collect();
    let table = mmd_table(stack, &all, execution);
    let mut terms = vec![0.0; kernels];
    Ok(table
        .chunks_exact(kernels)
        .map(|values| match statistic {
            Statistic::Mmd => values[0],
            Statistic::Fuse { variant, .. } => {
                fuse::fuse_terms(values, normalisers, variant, &mut terms);
                fuse::soft_max(&terms, weights, lambda)
            }
        })
        .collect())
}

/// `(1 + #{sampled σ : stat(σ) >= observed}) / (B + 1)`.
pub fn p_proxy(sampled_stats: &[f64], observed: f64) -> f64 {
    let exceed = sampled_stats.iter().filter(|&&s| s >= observed).count();
    (1 + exceed) as f64 / (sampled_stats.len() + 1) as f64
}

/// `ceil(8 α⁻² ln(2/δ))`, the permutation count that keeps the randomised
/// threshold within reach of the full-group one with probability `1 - δ`.
pub fn guaranteed_power_permutations(alpha: f64, delta: f64) -> usize {
    (8.0 / (alpha * alpha) * (2.0 / delta).ln()).ceil() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PermutationConfig {
    pub alpha: f64,
    pub permutations: usize,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
    /// When set, require enough permutations for the power guarantee at this δ.
    pub power_delta: Option<f64>,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            permutations: 2000,
            seed: 0,
            execution: Execution::Parallel,
            power_delta: None,
        }
    }
}

impl PermutationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.permutations < 1 {
            return Err(Error::InvalidConfig("number of permutations must be at least 1".into()));
        }
        if let Some(delta) = self.power_delta {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::InvalidConfig(format!("power delta must lie in (0, 1), got {delta}")));
            }
            let need = guaranteed_power_permutations(self.alpha, delta);
            if self.permutations < need {
                return Err(Error::InvalidConfig(format!(
                    "guaranteed-power mode at alpha {} and delta {delta} needs at least {need} permutations, got {}",
                    self.alpha, self.permutations
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub method: String,
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
    pub p_proxy: f64,
    pub alpha: f64,
    pub permutations: usize,
    pub seed: u64,
    /// Resolved soft-max temperature, for fused statistics.
    pub lambda: Option<f64>,
    pub kernels: Vec<String>,
    pub standardization: Option<Standardization>,
    /// Statistic on each sampled permutation, then on the identity.
    pub permuted_stats: Vec<f64>,
}

/// Permutation test of `statistic` on a prepared gram stack.
pub fn permutation_test(stack: &GramStack, statistic: Statistic, config: &PermutationConfig) -> Result<TestResult> {
    config.validate()?;
    let perms = sample_permutations(stack.size(), config.permutations, config.seed)?;
    let stats = permuted_statistics(stack, statistic, &perms, config.execution)?;
    let observed = *stats.last().expect("identity is always present");
    let threshold = empirical_quantile(&stats, 1.0 - config.alpha)?;
    let lambda = match statistic {
        Statistic::Fuse { lambda, .. } => Some(lambda.resolve(stack.n())),
        Statistic::Mmd => None,
    };
    Ok(TestResult {
        method: statistic.label().to_string(),
        statistic: observed,
        threshold,
        reject: observed > threshold,
        p_proxy: p_proxy(&stats[..stats.len() - 1], observed),
        alpha: config.alpha,
        permutations: config.permutations,
        seed: config.seed,
        lambda,
        kernels: stack.bank().specs().iter().map(|s| s.label()).collect(),
        standardization: None,
        permuted_stats: stats,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestConfig {
    pub variant: FuseVariant,
    pub lambda: Lambda,
    pub bank: BankConfig,
    pub standardize: bool,
    pub normalizer: NormalizerDenominator,
    pub permutation: PermutationConfig,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            variant: FuseVariant::Normalised,
            lambda: Lambda::Auto,
            bank: BankConfig::default(),
            standardize: false,
            normalizer: NormalizerDenominator::FirstSample,
            permutation: PermutationConfig::default(),
        }
    }
}

/// The fused test of `X` against `Y`: pool, optionally standardise, build the
/// bank from the pooled sample, and calibrate by permutation.
pub fn run_test(x: &DataMatrix, y: &DataMatrix, config: &TestConfig) -> Result<TestResult> {
    config.permutation.validate()?;
    config.lambda.validate()?;
    let pooled = PooledSample::new(x, y)?;
    let (standardization, z) = if config.standardize {
        let (t, z) = pooled_standardize(&pooled);
        (Some(t), z)
    } else {
        (None, pooled)
    };
    let bank = build_kernel_bank(&z, &config.bank)?;
    let stack = GramStack::with_execution(&bank, &z, config.normalizer, config.permutation.execution);
    let statistic = Statistic::Fuse {
        variant: config.variant,
        lambda: config.lambda,
    };
    let mut result = permutation_test(&stack, statistic, &config.permutation)?;
    result.standardization = standardization;
    Ok(result)
}
