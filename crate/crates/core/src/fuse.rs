//! Fused MMD statistics: a prior-weighted soft maximum of per-kernel MMD values.
//!
//! For a bank with prior weights `w` and per-kernel terms `t_k`,
//!
//! ```text
//! FUSE = (1 / λ) log Σ_k w_k exp(λ t_k)
//! ```
//!
//! where `t_k = MMD²_k / sqrt(N_k)` for the normalised variant and
//! `t_k = MMD²_k` for the un-normalised one. The un-normalised statistic has
//! the dual form `sup_ρ MMD²(K_ρ) - KL(ρ, π) / λ`, attained by the Gibbs
//! posterior `ρ_k ∝ w_k exp(λ MMD²_k)`; [`gibbs_dual_fuse1`] evaluates that side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{GramMatrix, GramStack, KernelSpec, PooledSample, SimplexWeights};
use crate::mmd::{mean_gram, mmd_u};
use crate::permutation;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FuseVariant {
    /// Each MMD divided by the square root of its kernel's normaliser.
    #[default]
    #[serde(rename = "fuse_n")]
    Normalised,
    #[serde(rename = "fuse_1")]
    Unnormalised,
}

/// Soft-max temperature. `Auto` resolves to the first sample size.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Lambda {
    #[default]
    Auto,
    Value(f64),
}

impl Lambda {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            Lambda::Auto => n as f64,
            Lambda::Value(v) => v,
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            Lambda::Value(v) if !(v > 0.0 && v.is_finite()) => Err(Error::InvalidConfig(format!(
                "lambda must be positive, got {v}"
            ))),
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for Lambda {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Lambda::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("lambda must be `auto` or a number, got `{s}`")))?;
        let l = Lambda::Value(v);
        l.validate()?;
        Ok(l)
    }
}

impl std::fmt::Display for Lambda {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lambda::Auto => f.write_str("auto"),
            Lambda::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Lambda {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Lambda::Auto => s.serialize_str("auto"),
            Lambda::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Lambda {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => {
                let l = Lambda::Value(v);
                l.validate().map_err(serde::de::Error::custom)?;
                Ok(l)
            }
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FuseConfig {
    pub variant: FuseVariant,
    pub lambda: Lambda,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FuseValue {
    pub value: f64,
    /// `λ t_k` per kernel.
    pub scaled_terms: Vec<f64>,
}

/// `(1/λ) log Σ_k w_k exp(λ t_k)`, shifted by the largest exponent.
/// Zero-weight kernels are skipped entirely.
pub fn soft_max(terms: &[f64], weights: &[f64], lambda: f64) -> f64 {
    let shift = terms
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&t, _)| lambda * t)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&t, &w)| w * (lambda * t - shift).exp())
        .sum();
    (shift + sum.ln()) / lambda
}

/// Fill `terms` with `t_k` for the variant.
#[inline]
pub(crate) fn fuse_terms(mmds: &[f64], normalisers: &[f64], variant: FuseVariant, terms: &mut [f64]) {
    match variant {
        FuseVariant::Normalised => {
            for ((t, &v), &nk) in terms.iter_mut().zip(mmds).zip(normalisers) {
                *t = v / nk.sqrt();
            }
        }
        FuseVariant::Unnormalised => terms.copy_from_slice(mmds),
    }
}

pub(crate) fn check_normalisers(stack: &GramStack, variant: FuseVariant) -> Result<()> {
    if variant == FuseVariant::Normalised {
        if let Some(k) = stack.normalisers().iter().position(|&v| !(v > 0.0)) {
            return Err(Error::DegenerateKernel {
                index: k,
                kernel: stack.bank().specs()[k].label(),
            });
        }
    }
    Ok(())
}

/// The fused statistic of `σZ`, with `perm` as in [`mmd_u`].
pub fn fuse_statistic(stack: &GramStack, perm: &[usize], config: &FuseConfig) -> Result<FuseValue> {
    config.lambda.validate()?;
    check_normalisers(stack, config.variant)?;
    let lambda = config.lambda.resolve(stack.n());
    let mmds = permutation::kernel_mmds(stack, perm)?;
    let mut terms = vec![0.0; mmds.len()];
    fuse_terms(&mmds, stack.normalisers(), config.variant, &mut terms);
    let value = soft_max(&terms, stack.bank().weights().as_slice(), lambda);
    Ok(FuseValue {
        value,
        scaled_terms: terms.iter().map(|t| lambda * t).collect(),
    })
}

/// `Σ ρ_k log(ρ_k / π_k)`, with `0 log 0 = 0` and `+∞` when `ρ` is not
/// absolutely continuous with respect to `π`.
pub fn kl_divergence(rho: &[f64], pi: &[f64]) -> Result<f64> {
    if rho.len() != pi.len() {
        return Err(Error::InvalidInput(format!(
            "KL between vectors of length {} and {}",
            rho.len(),
            pi.len()
        )));
    }
    let mut kl = 0.0;
    for (&r, &p) in rho.iter().zip(pi) {
        if r > 0.0 {
            if p == 0.0 {
                return Ok(f64::INFINITY);
            }
            kl += r * (r / p).ln();
        }
    }
    Ok(kl.max(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsDual {
    pub value: f64,
    pub posterior: SimplexWeights,
}

/// The KL-regularised supremum over posteriors, evaluated at the Gibbs
/// posterior through the mean-kernel gram.
pub fn gibbs_dual_fuse1(stack: &GramStack, perm: &[usize], lambda: f64) -> Result<GibbsDual> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    let (n, m) = (stack.n(), stack.m());
    let prior = stack.bank().weights().as_slice();
    let mmds = (0..stack.kernel_count())
        .map(|k| mmd_u(&stack.matrix(k), n, m, perm))
        .collect::<Result<Vec<_>>>()?;
    let shift = mmds
        .iter()
        .zip(prior)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, _)| lambda * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = mmds
        .iter()
        .zip(prior)
        .map(|(&v, &w)| if w > 0.0 { w * (lambda * v - shift).exp() } else { 0.0 })
        .collect();
    let total: f64 = unnorm.iter().sum();
    let mut rho: Vec<f64> = unnorm.iter().map(|u| u / total).collect();
    // Renormalise so the simplex check holds to rounding.
    let s: f64 = rho.iter().sum();
    rho.iter_mut().for_each(|r| *r /= s);
    let posterior = SimplexWeights::new(rho)?;
    let fused = mmd_u(&mean_gram(stack, &posterior)?, n, m, perm)?;
    let kl = kl_divergence(posterior.as_slice(), prior)?;
    Ok(GibbsDual {
        value: fused - kl / lambda,
        posterior,
    })
}

/// Default `R` grid: 30 log-spaced points on `[1e-2, 1e2]`.
pub fn default_r_grid() -> Vec<f64> {
    (0..30)
        .map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 29.0))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RqFuseValue {
    pub value: f64,
    /// Maximising bandwidth ratio `R` (bandwidth is `sqrt(R) η0`).
    pub best_r: f64,
}

/// KL penalty of a Gamma posterior relative to the prior with the same shape,
/// `shape (log R + 1/R - 1)`.
pub fn rq_penalty(shape: f64, r: f64) -> f64 {
    shape * (r.ln() + 1.0 / r - 1.0)
}

/// Closed-form un-normalised FUSE over a Gamma prior on the inverse squared
/// Gaussian bandwidth, which mixes to a rational quadratic kernel. The
/// supremum over `R` is taken on `r_grid`.
pub fn rq_fuse1(z: &PooledSample, shape: f64, eta0: f64, lambda: f64, r_grid: &[f64]) -> Result<RqFuseValue> {
    if r_grid.is_empty() {
        return Err(Error::InvalidInput("R grid is empty".into()));
    }
    if let Some(r) = r_grid.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidInput(format!("R grid entry {r} must be positive")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    let identity: Vec<usize> = (0..z.len()).collect();
    let mut best = RqFuseValue {
        value: f64::NEG_INFINITY,
        best_r: r_grid[0],
    };
    for &r in r_grid {
        let spec = KernelSpec::rational_quadratic(shape, r.sqrt() * eta0)?;
        let gram = GramMatrix::compute(&spec, z.data());
        let objective = mmd_u(&gram, z.n(), z.m(), &identity)? - rq_penalty(shape, r) / lambda;
        if objective > best.value {
            best = RqFuseValue {
                value: objective,
                best_r: r,
            };
        }
    }
    Ok(best)
}
