//! Single-kernel reference tests: the median-heuristic test and the
//! data-splitting test that selects its bandwidth on a held-out half.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::kernels::{
    bandwidth_grid, gram_stack, median_bandwidth, pairwise_distances, DataMatrix, GramMatrix,
    KernelBank, KernelSpec, Norm, PooledSample,
};
use crate::mmd::mmd_u;
use crate::permutation::{permutation_test, PermutationConfig, Statistic, TestResult};
use crate::seed::{derive_seed, rng};

/// Raw-MMD permutation test with a Gaussian kernel at the pooled median distance.
pub fn median_heuristic_test(x: &DataMatrix, y: &DataMatrix, config: &PermutationConfig) -> Result<TestResult> {
    config.validate()?;
    let z = PooledSample::new(x, y)?;
    let bandwidth = median_bandwidth(z.data())?;
    let bank = KernelBank::single(KernelSpec::gaussian(bandwidth)?);
    let mut result = permutation_test(&gram_stack(&bank, &z), Statistic::Mmd, config)?;
    result.method = "median".into();
    Ok(result)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// Share of each sample used for bandwidth selection.
    pub split_fraction: f64,
    pub selection_grid_size: usize,
    pub variance_regularizer: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            split_fraction: 0.5,
            selection_grid_size: 100,
            variance_regularizer: 1e-8,
        }
    }
}

/// Paired variance proxy of the MMD estimate under the alternative.
///
/// `gram` is the gram of `(x_1..x_n, y_1..y_n)`. With
/// `H_ij = k(x_i, x_j) + k(y_i, y_j) - k(x_i, y_j) - k(x_j, y_i)`, returns
/// `(4/n) [mean_i (mean_j H_ij)² - (mean_ij H_ij)²] + reg`, never below `reg`.
pub fn variance_estimate_h1(gram: &GramMatrix, n: usize, m: usize, reg: f64) -> Result<f64> {
    if n != m {
        return Err(Error::InvalidInput(format!("paired variance needs n = m (got {n}, {m})")));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("paired variance needs n >= 2 (got {n})")));
    }
    if gram.size() != 2 * n {
        return Err(Error::InvalidInput(format!("gram has size {}, expected {}", gram.size(), 2 * n)));
    }
    let nf = n as f64;
    let mut sum_sq_rows = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        let row: f64 = (0..n)
            .map(|j| gram.get(i, j) + gram.get(n + i, n + j) - gram.get(i, n + j) - gram.get(j, n + i))
            .sum();
        sum_sq_rows += (row / nf) * (row / nf);
        total += row;
    }
    let mean = total / (nf * nf);
    let var = 4.0 / nf * (sum_sq_rows / nf - mean * mean);
    Ok(var.max(0.0) + reg)
}

/// `mmd / sqrt(variance)`, where `variance` already includes the regulariser.
pub fn split_criterion(mmd: f64, variance: f64) -> f64 {
    mmd / variance.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitSelection {
    pub bandwidths: Vec<f64>,
    pub criteria: Vec<f64>,
    pub chosen: usize,
}

impl SplitSelection {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidths[self.chosen]
    }
}

/// Pick the Gaussian bandwidth maximising the power proxy on the selection
/// half. Only `x_sel` and `y_sel` are read; `seed` drives the subsampling of
/// the larger sample for the paired variance.
pub fn select_split_bandwidth(
    x_sel: &DataMatrix,
    y_sel: &DataMatrix,
    config: &SplitConfig,
    seed: u64,
    execution: exec::Execution,
) -> Result<SplitSelection> {
    let z = PooledSample::new(x_sel, y_sel)?;
    let dist = pairwise_distances(z.data(), Norm::L2)?;
    let bandwidths = bandwidth_grid(&dist, config.selection_grid_size)?;

    let (n, m) = (z.n(), z.m());
    let paired = n.min(m);
    let mut xi: Vec<usize> = (0..n).collect();
    let mut yi: Vec<usize> = (n..n + m).collect();
    let mut r = rng(seed);
    if n > paired {
        xi.shuffle(&mut r);
        xi.truncate(paired);
    }
    if m > paired {
        yi.shuffle(&mut r);
        yi.truncate(paired);
    }
    let pair_index: Vec<usize> = xi.into_iter().chain(yi).collect();
    let identity: Vec<usize> = (0..n + m).collect();

    let criteria = exec::map_indexed(execution, bandwidths.len(), |b| -> Result<f64> {
        let spec = KernelSpec::gaussian(bandwidths[b])?;
        let gram = GramMatrix::from_fn(n + m, |i, j| spec.eval_distance(dist.get(i, j)));
        let mmd = mmd_u(&gram, n, m, &identity)?;
        let paired_gram = GramMatrix::from_fn(2 * paired, |i, j| gram.get(pair_index[i], pair_index[j]));
        let var = variance_estimate_h1(&paired_gram, paired, paired, config.variance_regularizer)?;
        Ok(split_criterion(mmd, var))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let mut chosen = 0;
    for (b, &c) in criteria.iter().enumerate() {
        if c > criteria[chosen] {
            chosen = b;
        }
    }
    Ok(SplitSelection {
        bandwidths,
        criteria,
        chosen,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitResult {
    pub result: TestResult,
    pub selection: SplitSelection,
}

/// Shuffle each sample, choose a bandwidth on the first part, and run a
/// raw-MMD permutation test on the rest.
pub fn split_test(
    x: &DataMatrix,
    y: &DataMatrix,
    config: &PermutationConfig,
    split: &SplitConfig,
) -> Result<SplitResult> {
    config.validate()?;
    if !(split.split_fraction > 0.0 && split.split_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split fraction must lie in (0, 1), got {}",
            split.split_fraction
        )));
    }
    if x.rows() < 8 || y.rows() < 8 {
        return Err(Error::InvalidInput(format!(
            "split test needs at least 8 points per sample (got {}, {})",
            x.rows(),
            y.rows()
        )));
    }
    let parts = |data: &DataMatrix, stream: u64| -> Result<(DataMatrix, DataMatrix)> {
        let mut idx: Vec<usize> = (0..data.rows()).collect();
        idx.shuffle(&mut rng(derive_seed(config.seed, stream)));
        let cut = (split.split_fraction * data.rows() as f64).floor() as usize;
        if cut < 2 || data.rows() - cut < 2 {
            return Err(Error::InvalidInput(format!(
                "split fraction {} leaves fewer than 2 points on one side of {}",
                split.split_fraction,
                data.rows()
            )));
        }
        Ok((data.select(&idx[..cut]), data.select(&idx[cut..])))
    };
    let (x_sel, x_test) = parts(x, 1)?;
    let (y_sel, y_test) = parts(y, 2)?;
    let selection = select_split_bandwidth(&x_sel, &y_sel, split, derive_seed(config.seed, 3), config.execution)?;

    let z = PooledSample::new(&x_test, &y_test)?;
    let bank = KernelBank::single(KernelSpec::gaussian(selection.bandwidth())?);
    let mut result = permutation_test(&gram_stack(&bank, &z), Statistic::Mmd, config)?;
    result.method = "split".into();
    Ok(SplitResult { result, selection })
}
