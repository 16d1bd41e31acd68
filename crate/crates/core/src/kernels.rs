//! Kernels, pooled distances, permutation-invariant kernel banks and gram matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::quantile::select_quantile;

/// Row-major matrix of observations. All entries are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    rows: usize,
    dim: usize,
}

impl DataMatrix {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if values.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} values cannot form rows of width {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry in row {}",
                pos / dim
            )));
        }
        Ok(Self {
            rows: values.len() / dim,
            values,
            dim,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::InvalidInput("no rows".into()))?;
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != dim {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {dim}",
                    r.as_ref().len()
                )));
            }
            values.extend_from_slice(r.as_ref());
        }
        Self::new(values, dim)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> DataMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        DataMatrix {
            rows: indices.len(),
            values,
            dim: self.dim,
        }
    }
}

/// The ordered combination `Z = (X, Y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledSample {
    data: DataMatrix,
    n: usize,
    m: usize,
}

impl PooledSample {
    pub fn new(x: &DataMatrix, y: &DataMatrix) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::InvalidInput(format!(
                "samples have different dimensions ({} vs {})",
                x.dim(),
                y.dim()
            )));
        }
        let mut values = Vec::with_capacity(x.as_slice().len() + y.as_slice().len());
        values.extend_from_slice(x.as_slice());
        values.extend_from_slice(y.as_slice());
        let data = DataMatrix {
            rows: x.rows() + y.rows(),
            values,
            dim: x.dim(),
        };
        Self::from_pooled(data, x.rows())
    }

    /// Treat the first `n` rows of `data` as the first sample.
    pub fn from_pooled(data: DataMatrix, n: usize) -> Result<Self> {
        let m = data.rows().saturating_sub(n);
        if n < 2 || m < 2 {
            return Err(Error::InvalidInput(format!(
                "each sample needs at least 2 points (got n = {n}, m = {m})"
            )));
        }
        Ok(Self { data, n, m })
    }

    pub fn data(&self) -> &DataMatrix {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.n + self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Reorder rows: row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.len())?;
        Ok(Self {
            data: self.data.select(perm),
            n: self.n,
            m: self.m,
        })
    }
}

pub(crate) fn check_permutation(perm: &[usize], size: usize) -> Result<()> {
    if perm.len() != size {
        return Err(Error::InvalidInput(format!(
            "permutation has length {}, expected {size}",
            perm.len()
        )));
    }
    let mut seen = vec![false; size];
    for &p in perm {
        if p >= size || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidInput("index map is not a bijection".into()));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Laplace,
    RationalQuadratic,
}

impl KernelFamily {
    /// The distance the family is a function of (and whose quantiles set its bandwidths).
    pub fn norm(self) -> Norm {
        match self {
            KernelFamily::Laplace => Norm::L1,
            KernelFamily::Gaussian | KernelFamily::RationalQuadratic => Norm::L2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplace => "laplace",
            KernelFamily::RationalQuadratic => "rational_quadratic",
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "laplace" => Ok(KernelFamily::Laplace),
            "rational_quadratic" | "rq" => Ok(KernelFamily::RationalQuadratic),
            other => Err(Error::InvalidConfig(format!("unknown kernel family `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
}

/// A parametric kernel. All shipped families peak at 1 when `x = y`, so the bound is 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
    /// Exponent of the rational quadratic kernel; ignored by the other families.
    pub shape: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64, shape: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!("bandwidth {bandwidth} must be positive")));
        }
        if family == KernelFamily::RationalQuadratic && !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::InvalidInput(format!("rational quadratic shape {shape} must be positive")));
        }
        Ok(Self {
            family,
            bandwidth,
            shape,
        })
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth, 1.0)
    }

    pub fn laplace(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Laplace, bandwidth, 1.0)
    }

    pub fn rational_quadratic(shape: f64, bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::RationalQuadratic, bandwidth, shape)
    }

    pub fn bound(&self) -> f64 {
        1.0
    }

    /// Kernel value from the distance in the family's own norm.
    #[inline]
    pub fn eval_distance(&self, dist: f64) -> f64 {
        let g = self.bandwidth;
        match self.family {
            KernelFamily::Gaussian => (-dist * dist / (2.0 * g * g)).exp(),
            KernelFamily::Laplace => (-std::f64::consts::SQRT_2 * dist / g).exp(),
            KernelFamily::RationalQuadratic => {
                (1.0 + dist * dist / (2.0 * g * g)).powf(-self.shape)
            }
        }
    }

    /// `Gaussian`/`RationalQuadratic` from a squared ℓ2 distance, `Laplace` from an ℓ1 distance.
    #[inline]
    fn eval_pair(&self, sq_l2: f64, l1: f64) -> f64 {
        let g = self.bandwidth;
        match self.family {
            KernelFamily::Gaussian => (-sq_l2 / (2.0 * g * g)).exp(),
            KernelFamily::Laplace => (-std::f64::consts::SQRT_2 * l1 / g).exp(),
            KernelFamily::RationalQuadratic => (1.0 + sq_l2 / (2.0 * g * g)).powf(-self.shape),
        }
    }

    pub fn label(&self) -> String {
        match self.family {
            KernelFamily::RationalQuadratic => {
                format!("{}(shape={}, bandwidth={})", self.family.name(), self.shape, self.bandwidth)
            }
            _ => format!("{}(bandwidth={})", self.family.name(), self.bandwidth),
        }
    }
}

pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(x, y)?;
    Ok(spec.eval_pair(sq_l2(x, y), l1(x, y)))
}

pub(crate) fn check_dims(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

#[inline]
fn sq_l2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn l1(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

pub fn distance(x: &[f64], y: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::L1 => l1(x, y),
        Norm::L2 => sq_l2(x, y).sqrt(),
    }
}

/// Dense symmetric matrix of pairwise distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    /// Strictly positive entries above the diagonal.
    pub fn positive_off_diagonal(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.size * (self.size - 1) / 2);
        for i in 0..self.size {
            out.extend(
                self.values[i * self.size + i + 1..(i + 1) * self.size]
                    .iter()
                    .copied()
                    .filter(|&d| d > 0.0),
            );
        }
        out
    }
}

pub fn pairwise_distances(data: &DataMatrix, norm: Norm) -> Result<DistanceMatrix> {
    let size = data.rows();
    if size < 2 {
        return Err(Error::InvalidInput("pairwise distances need at least 2 rows".into()));
    }
    let mut values = vec![0.0; size * size];
    for i in 0..size {
        for j in i + 1..size {
            let d = distance(data.row(i), data.row(j), norm);
            values[i * size + j] = d;
            values[j * size + i] = d;
        }
    }
    Ok(DistanceMatrix { size, values })
}

/// `grid_size` evenly spaced bandwidths from half the 5% quantile to twice the
/// 95% quantile of the positive off-diagonal distances.
pub fn bandwidth_grid(distances: &DistanceMatrix, grid_size: usize) -> Result<Vec<f64>> {
    let positive = distances.positive_off_diagonal();
    bandwidth_grid_from_positive(positive, grid_size)
}

fn bandwidth_grid_from_positive(mut positive: Vec<f64>, grid_size: usize) -> Result<Vec<f64>> {
    if grid_size == 0 {
        return Err(Error::InvalidConfig("grid size must be at least 1".into()));
    }
    if positive.is_empty() {
        return Err(Error::DegenerateData(
            "all pooled distances are zero; no valid bandwidth".into(),
        ));
    }
    let low = select_quantile(&mut positive, 0.05)?;
    let high = select_quantile(&mut positive, 0.95)?;
    Ok(grid_from_quantiles(low, high, grid_size))
}

pub fn grid_from_quantiles(q05: f64, q95: f64, grid_size: usize) -> Vec<f64> {
    let lower = 0.5 * q05;
    let upper = 2.0 * q95;
    if grid_size == 1 {
        return vec![lower];
    }
    let step = (upper - lower) / (grid_size - 1) as f64;
    (0..grid_size).map(|i| lower + i as f64 * step).collect()
}

/// Lower median of the positive off-diagonal pooled ℓ2 distances.
pub fn median_bandwidth(data: &DataMatrix) -> Result<f64> {
    let mut positive = pairwise_distances(data, Norm::L2)?.positive_off_diagonal();
    if positive.is_empty() {
        return Err(Error::DegenerateData(
            "all pooled distances are zero; no median bandwidth".into(),
        ));
    }
    select_quantile(&mut positive, 0.5)
}

/// Nonnegative weights summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("weights must be nonempty".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0 / len as f64; len])
    }

    pub fn point_mass(len: usize, at: usize) -> Self {
        let mut w = vec![0.0; len];
        w[at] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A finite prior over kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    specs: Vec<KernelSpec>,
    weights: SimplexWeights,
}

impl KernelBank {
    pub fn new(specs: Vec<KernelSpec>, weights: SimplexWeights) -> Result<Self> {
        if specs.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} kernels but {} weights",
                specs.len(),
                weights.len()
            )));
        }
        Ok(Self { specs, weights })
    }

    pub fn uniform(specs: Vec<KernelSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidInput("kernel bank must be nonempty".into()));
        }
        let w = SimplexWeights::uniform(specs.len());
        Self::new(specs, w)
    }

    pub fn single(spec: KernelSpec) -> Self {
        Self {
            specs: vec![spec],
            weights: SimplexWeights(vec![1.0]),
        }
    }

    pub fn specs(&self) -> &[KernelSpec] {
        &self.specs
    }

    pub fn weights(&self) -> &SimplexWeights {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BankConfig {
    pub families: Vec<KernelFamily>,
    pub grid_size: usize,
    /// Shape used for rational quadratic members.
    pub rq_shape: f64,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            families: vec![KernelFamily::Gaussian, KernelFamily::Laplace],
            grid_size: 10,
            rq_shape: 1.0,
        }
    }
}

/// Uniform bank over `grid_size` bandwidths per family. Depends only on the
/// unordered pooled sample.
pub fn build_kernel_bank(z: &PooledSample, config: &BankConfig) -> Result<KernelBank> {
    if config.families.is_empty() {
        return Err(Error::InvalidConfig("at least one kernel family is required".into()));
    }
    let mut grids: [Option<Vec<f64>>; 2] = [None, None];
    let mut specs = Vec::with_capacity(config.families.len() * config.grid_size);
    for &family in &config.families {
        let slot = match family.norm() {
            Norm::L1 => 0,
            Norm::L2 => 1,
        };
        if grids[slot].is_none() {
            let dist = pairwise_distances(z.data(), family.norm())?;
            grids[slot] = Some(bandwidth_grid(&dist, config.grid_size)?);
        }
        for &g in grids[slot].as_ref().unwrap() {
            specs.push(KernelSpec::new(family, g, config.rq_shape)?);
        }
    }
    KernelBank::uniform(specs)
}

/// Dense single-kernel gram matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    size: usize,
    values: Vec<f64>,
}

impl GramMatrix {
    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                values.push(f(i, j));
            }
        }
        Self { size, values }
    }

    pub fn compute(spec: &KernelSpec, data: &DataMatrix) -> Self {
        let size = data.rows();
        let mut values = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..=i {
                let (a, b) = (data.row(i), data.row(j));
                let v = spec.eval_pair(sq_l2(a, b), l1(a, b));
                values[i * size + j] = v;
                values[j * size + i] = v;
            }
        }
        Self { size, values }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// How the normaliser's pair sum is scaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizerDenominator {
    /// `1 / (n (n - 1))` with `n` the first sample size.
    #[default]
    #[serde(rename = "first")]
    FirstSample,
    /// `1 / (N (N - 1))` with `N = n + m`.
    Full,
}

impl std::str::FromStr for NormalizerDenominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Self::FirstSample),
            "full" => Ok(Self::Full),
            other => Err(Error::InvalidConfig(format!(
                "unknown normalizer denominator `{other}` (expected first or full)"
            ))),
        }
    }
}

/// Gram matrices of every bank kernel on one pooled sample, with the
/// per-kernel sums the permutation engine needs.
///
/// Each kernel's lower triangle (diagonal included) is stored row by row in
/// its own contiguous block: entry `(i, j), j <= i` of kernel `k` lives at
/// `k T + i (i + 1) / 2 + j` with `T = N (N + 1) / 2`.
#[derive(Clone, Debug)]
pub struct GramStack {
    bank: KernelBank,
    n: usize,
    m: usize,
    packed: Vec<f64>,
    /// Off-diagonal row sums, `[i * K + k]`.
    row_sums: Vec<f64>,
    /// Off-diagonal total per kernel.
    totals: Vec<f64>,
    normalisers: Vec<f64>,
}

#[inline]
fn tri_offset(i: usize) -> usize {
    i * (i + 1) / 2
}

impl GramStack {
    pub fn new(bank: &KernelBank, z: &PooledSample, denominator: NormalizerDenominator) -> Self {
        Self::with_execution(bank, z, denominator, Execution::Parallel)
    }

    pub fn with_execution(
        bank: &KernelBank,
        z: &PooledSample,
        denominator: NormalizerDenominator,
        exec: Execution,
    ) -> Self {
        let size = z.len();
        let kernels = bank.len();
        let specs = bank.specs();
        let data = z.data();
        let tri = tri_offset(size);

        let uses = |norm| specs.iter().any(|s| s.family.norm() == norm);
        let (want_l2, want_l1) = (uses(Norm::L2), uses(Norm::L1));
        let mut sq = vec![0.0; if want_l2 { tri } else { 0 }];
        let mut abs = vec![0.0; if want_l1 { tri } else { 0 }];
        for i in 0..size {
            let a = data.row(i);
            for j in 0..=i {
                let b = data.row(j);
                if want_l2 {
                    sq[tri_offset(i) + j] = sq_l2(a, b);
                }
                if want_l1 {
                    abs[tri_offset(i) + j] = l1(a, b);
                }
            }
        }

        let mut packed = vec![0.0; tri * kernels];
        let mut blocks: Vec<&mut [f64]> = packed.chunks_mut(tri.max(1)).collect();
        exec::for_each_mut(exec, &mut blocks, |k, block| {
            let spec = &specs[k];
            let g = spec.bandwidth;
            // Same expressions as `eval_pair`, with the family match hoisted.
            match spec.family {
                KernelFamily::Gaussian => {
                    let scale = 2.0 * g * g;
                    block.iter_mut().zip(&sq).for_each(|(v, &d2)| *v = (-d2 / scale).exp());
                }
                KernelFamily::Laplace => {
                    block.iter_mut().zip(&abs).for_each(|(v, &d1)| *v = (-std::f64::consts::SQRT_2 * d1 / g).exp());
                }
                KernelFamily::RationalQuadratic => {
                    let scale = 2.0 * g * g;
                    block.iter_mut().zip(&sq).for_each(|(v, &d2)| *v = (1.0 + d2 / scale).powf(-spec.shape));
                }
            }
        });
        drop(blocks);

        let mut row_sums = vec![0.0; size * kernels];
        let mut sq_sums = vec![0.0; kernels];
        let mut totals = vec![0.0; kernels];
        let mut local = vec![0.0; size];
        for k in 0..kernels {
            let block = &packed[k * tri..(k + 1) * tri];
            local.fill(0.0);
            for i in 0..size {
                let row = &block[tri_offset(i)..tri_offset(i) + i];
                let mut own = 0.0;
                for (acc, &v) in local[..i].iter_mut().zip(row) {
                    own += v;
                    *acc += v;
                    sq_sums[k] += v * v;
                }
                local[i] += own;
            }
            for (i, &r) in local.iter().enumerate() {
                row_sums[i * kernels + k] = r;
                totals[k] += r;
            }
        }
        let n = z.n();
        let denom = match denominator {
            NormalizerDenominator::FirstSample => (n * (n - 1)) as f64,
            NormalizerDenominator::Full => (size * (size - 1)) as f64,
        };
        let normalisers = sq_sums.iter().map(|s| 2.0 * s / denom).collect();
        Self {
            bank: bank.clone(),
            n,
            m: z.m(),
            packed,
            row_sums,
            totals,
            normalisers,
        }
    }

    pub fn bank(&self) -> &KernelBank {
        &self.bank
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn size(&self) -> usize {
        self.n + self.m
    }

    pub fn kernel_count(&self) -> usize {
        self.bank.len()
    }

    pub fn normalisers(&self) -> &[f64] {
        &self.normalisers
    }

    pub fn entry(&self, kernel: usize, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        self.packed[kernel * tri_offset(self.size()) + tri_offset(i) + j]
    }

    pub fn matrix(&self, kernel: usize) -> GramMatrix {
        GramMatrix::from_fn(self.size(), |i, j| self.entry(kernel, i, j))
    }

    /// Entries `(i, 0..i)` of one kernel.
    #[inline]
    pub(crate) fn strict_row(&self, kernel: usize, i: usize) -> &[f64] {
        let start = kernel * tri_offset(self.size()) + tri_offset(i);
        &self.packed[start..start + i]
    }

    #[inline]
    pub(crate) fn row_sums(&self, i: usize) -> &[f64] {
        let k = self.kernel_count();
        &self.row_sums[i * k..(i + 1) * k]
    }

    pub(crate) fn totals(&self) -> &[f64] {
        &self.totals
    }
}

pub fn gram_stack(bank: &KernelBank, z: &PooledSample) -> GramStack {
    GramStack::new(bank, z, NormalizerDenominator::FirstSample)
}

/// Per-coordinate affine map computed from the pooled sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    /// Population standard deviation, or 1 for a constant coordinate.
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, data: &DataMatrix) -> DataMatrix {
        let mut values = data.as_slice().to_vec();
        for row in values.chunks_exact_mut(data.dim()) {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.scale[c];
            }
        }
        DataMatrix {
            values,
            rows: data.rows(),
            dim: data.dim(),
        }
    }
}

/// Centre and scale each coordinate by its pooled mean and standard deviation.
///
/// Column sums run over sorted values, so the transform is bit-identical for
/// any row order of the pooled sample.
pub fn pooled_standardize(z: &PooledSample) -> (Standardization, PooledSample) {
    let data = z.data();
    let rows = data.rows() as f64;
    let mut mean = Vec::with_capacity(data.dim());
    let mut scale = Vec::with_capacity(data.dim());
    let mut column = Vec::with_capacity(data.rows());
    for c in 0..data.dim() {
        column.clear();
        column.extend(data.iter_rows().map(|r| r[c]));
        column.sort_by(f64::total_cmp);
        let mu = column.iter().sum::<f64>() / rows;
        let var = column.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / rows;
        let sd = var.sqrt();
        mean.push(mu);
        scale.push(if sd > 0.0 { sd } else { 1.0 });
    }
    let transform = Standardization { mean, scale };
    let transformed = PooledSample {
        data: transform.apply(data),
        n: z.n,
        m: z.m,
    };
    (transform, transformed)
}
