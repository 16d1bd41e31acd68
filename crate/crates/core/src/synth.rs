//! Seeded generators for the synthetic benchmark distributions.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::DataMatrix;
use crate::seed;

/// Mode separation of the Gaussian mixture.
pub const MIXTURE_OFFSET: f64 = 20.0;

/// Four 2-d Gaussians at `(±20, ±20)` with equal weights; the first three have
/// unit standard deviation, the one at `(20, 20)` has `sigma4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussMixtureSetting {
    pub sigma4: f64,
    pub n: usize,
    pub seed: u64,
}

const MIXTURE_MEANS: [[f64; 2]; 4] = [
    [-MIXTURE_OFFSET, -MIXTURE_OFFSET],
    [-MIXTURE_OFFSET, MIXTURE_OFFSET],
    [MIXTURE_OFFSET, -MIXTURE_OFFSET],
    [MIXTURE_OFFSET, MIXTURE_OFFSET],
];

pub fn sample_gauss_mixture(setting: &GaussMixtureSetting) -> Result<DataMatrix> {
    if !(setting.sigma4 > 0.0 && setting.sigma4.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "sigma4 must be positive, got {}",
            setting.sigma4
        )));
    }
    let mut rng = seed::rng(setting.seed);
    let mut values = Vec::with_capacity(2 * setting.n);
    for _ in 0..setting.n {
        let c = rng.random_range(0..4);
        let sd = if c == 3 { setting.sigma4 } else { 1.0 };
        for mean in MIXTURE_MEANS[c] {
            let e: f64 = StandardNormal.sample(&mut rng);
            values.push(mean + sd * e);
        }
    }
    DataMatrix::new(values, 2)
}

/// Unit-peak bump supported on `(-1, 1)`.
fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// A positive bump on `[0, ½]` and a negative one on `[½, 1]`.
fn coordinate_perturbation(x: f64) -> f64 {
    bump(4.0 * (x - 0.25)) - bump(4.0 * (x - 0.75))
}

/// Density on `[0, 1]^d` of the uniform distribution with amplitude-`a`
/// perturbations, `1 + a Π_j g(x_j)`.
pub fn perturbed_uniform_density(x: &[f64], a: f64) -> Result<f64> {
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("point coordinate {v} outside the unit cube")));
    }
    Ok(1.0 + a * x.iter().map(|&v| coordinate_perturbation(v)).product::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedUniformSetting {
    pub a: f64,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
}

/// Rejection sampling under the envelope `1 + a`. Also returns the number of
/// proposals drawn.
pub fn sample_perturbed_uniform_counted(setting: &PerturbedUniformSetting) -> Result<(DataMatrix, usize)> {
    let PerturbedUniformSetting { a, d, n, seed } = *setting;
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidConfig(format!("amplitude a must lie in [0, 1], got {a}")));
    }
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    let mut rng = seed::rng(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut point = vec![0.0; d];
    let mut proposals = 0;
    while values.len() < n * d {
        proposals += 1;
        point.iter_mut().for_each(|v| *v = rng.random::<f64>());
        let u: f64 = rng.random();
        if u * (1.0 + a) < perturbed_uniform_density(&point, a)? {
            values.extend_from_slice(&point);
        }
    }
    Ok((DataMatrix::new(values, d)?, proposals))
}

pub fn sample_perturbed_uniform(setting: &PerturbedUniformSetting) -> Result<DataMatrix> {
    sample_perturbed_uniform_counted(setting).map(|(m, _)| m)
}

/// `n` i.i.d. draws of `N(shift · 1, scale² I_d)`. Panics if `d == 0` or
/// either parameter is not finite.
pub fn sample_shifted_gaussian(n: usize, d: usize, shift: f64, scale: f64, seed: u64) -> DataMatrix {
    assert!(d > 0 && scale.is_finite() && shift.is_finite());
    let mut rng = seed::rng(seed);
    let values = (0..n * d)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            shift + scale * e
        })
        .collect();
    DataMatrix::new(values, d).expect("finite Gaussian draws")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, steps: usize) -> f64 {
        let h = 1.0 / steps as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..steps {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn mixture_is_centred_with_equal_modes() {
        let pts = sample_gauss_mixture(&GaussMixtureSetting { sigma4: 1.0, n: 100_000, seed: 3 }).unwrap();
        let mut mean = [0.0; 2];
        let mut counts = [0usize; 4];
        for r in pts.iter_rows() {
            mean[0] += r[0];
            mean[1] += r[1];
            let c = (r[0] > 0.0) as usize * 2 + (r[1] > 0.0) as usize;
            counts[c] += 1;
        }
        for m in mean {
            assert!((m / 100_000.0).abs() < 0.3);
        }
        for c in counts {
            assert!((c as f64 / 100_000.0 - 0.25).abs() < 0.01);
        }
        assert!(sample_gauss_mixture(&GaussMixtureSetting { sigma4: 0.0, n: 3, seed: 0 }).is_err());
    }

    #[test]
    fn fourth_mode_uses_its_own_scale() {
        let pts = sample_gauss_mixture(&GaussMixtureSetting { sigma4: 3.0, n: 40_000, seed: 1 }).unwrap();
        let xs: Vec<f64> = pts.iter_rows().filter(|r| r[0] > 0.0 && r[1] > 0.0).map(|r| r[0]).collect();
        let mu = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
        assert!((sd - 3.0).abs() < 0.1, "{sd}");
    }

    #[test]
    fn density_cases() {
        assert_eq!(perturbed_uniform_density(&[0.3], 0.0).unwrap(), 1.0);
        assert_eq!(perturbed_uniform_density(&[0.25], 1.0).unwrap(), 2.0);
        assert_eq!(perturbed_uniform_density(&[0.75], 1.0).unwrap(), 0.0);
        assert_eq!(perturbed_uniform_density(&[0.5], 1.0).unwrap(), 1.0);
        assert!((perturbed_uniform_density(&[0.25, 0.75], 1.0).unwrap()).abs() < 1e-15);
        assert!(perturbed_uniform_density(&[1.2], 0.5).is_err());
        for i in 0..=10_000 {
            let x = i as f64 / 10_000.0;
            assert!(perturbed_uniform_density(&[x], 1.0).unwrap() >= 0.0);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        for a in [0.3, 1.0] {
            let one = simpson(|x| perturbed_uniform_density(&[x], a).unwrap(), 4000);
            assert!((one - 1.0).abs() < 1e-4);
            let two = simpson(
                |x| simpson(|y| perturbed_uniform_density(&[x, y], a).unwrap(), 400),
                400,
            );
            assert!((two - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn acceptance_rate_matches_envelope() {
        let setting = PerturbedUniformSetting { a: 0.5, d: 1, n: 66_667, seed: 9 };
        let (_, proposals) = sample_perturbed_uniform_counted(&setting).unwrap();
        let rate = setting.n as f64 / proposals as f64;
        assert!((rate - 1.0 / 1.5).abs() < 0.01, "{rate}");
        let null = PerturbedUniformSetting { a: 0.0, d: 2, n: 500, seed: 1 };
        assert_eq!(sample_perturbed_uniform_counted(&null).unwrap().1, 500);
    }

    #[test]
    fn histogram_matches_density() {
        let n = 100_000;
        let pts = sample_perturbed_uniform(&PerturbedUniformSetting { a: 1.0, d: 1, n, seed: 4 }).unwrap();
        let mut bins = [0usize; 20];
        for r in pts.iter_rows() {
            bins[((r[0] * 20.0) as usize).min(19)] += 1;
        }
        for (b, &count) in bins.iter().enumerate() {
            let lo = b as f64 / 20.0;
            let p = simpson(|t| perturbed_uniform_density(&[lo + t / 20.0], 1.0).unwrap(), 200) / 20.0;
            let se = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((count as f64 - n as f64 * p).abs() <= 3.0 * se + 1.0, "bin {b}");
        }
    }

    #[test]
    fn gaussian_moments_and_determinism() {
        let pts = sample_shifted_gaussian(100_000, 2, 1.0, 1.1, 5);
        for c in 0..2 {
            let col: Vec<f64> = pts.iter_rows().map(|r| r[c]).collect();
            let mu = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
            assert!((var / 1.21 - 1.0).abs() < 0.02);
            assert!((mu - 1.0).abs() < 0.02);
        }
        assert_eq!(sample_shifted_gaussian(5, 3, 0.0, 1.0, 8), sample_shifted_gaussian(5, 3, 0.0, 1.0, 8));
    }
}
