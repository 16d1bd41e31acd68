//! The quadratic-time unbiased MMD² estimator and related kernels.

use crate::error::{Error, Result};
use crate::kernels::{check_dims, check_permutation, eval_kernel, GramMatrix, GramStack, KernelSpec, SimplexWeights};

/// Unbiased MMD² of `(X, Y) = σZ` read from a gram matrix on `Z`.
///
/// `perm[i]` is the index in `Z` of the `i`-th point of `σZ`; the first `n`
/// entries form `X`. The gram is only indexed, never recomputed. The value
/// may be negative.
pub fn mmd_u(gram: &GramMatrix, n: usize, m: usize, perm: &[usize]) -> Result<f64> {
    if n < 2 || m < 2 {
        return Err(Error::InvalidInput(format!("need n, m >= 2 (got {n}, {m})")));
    }
    if gram.size() != n + m {
        return Err(Error::InvalidInput(format!(
            "gram has size {}, expected {}",
            gram.size(),
            n + m
        )));
    }
    check_permutation(perm, n + m)?;
    let (xs, ys) = perm.split_at(n);

    let mut xx = 0.0;
    for (a, &i) in xs.iter().enumerate() {
        for (b, &j) in xs.iter().enumerate() {
            if a != b {
                xx += gram.get(i, j);
            }
        }
    }
    let mut yy = 0.0;
    for (a, &i) in ys.iter().enumerate() {
        for (b, &j) in ys.iter().enumerate() {
            if a != b {
                yy += gram.get(i, j);
            }
        }
    }
    let mut xy = 0.0;
    for &i in xs {
        for &j in ys {
            xy += gram.get(i, j);
        }
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok(xx / (nf * (nf - 1.0)) + yy / (mf * (mf - 1.0)) - 2.0 * xy / (nf * mf))
}

/// MMD² from the within-`X` off-diagonal sum, the sum of `X`'s off-diagonal
/// row sums, and the off-diagonal total of the gram.
#[inline]
pub(crate) fn mmd_from_block_sums(xx: f64, x_row_sums: f64, total: f64, n: usize, m: usize) -> f64 {
    let xy = x_row_sums - xx;
    let yy = total - xx - 2.0 * xy;
    let (nf, mf) = (n as f64, m as f64);
    xx / (nf * (nf - 1.0)) + yy / (mf * (mf - 1.0)) - 2.0 * xy / (nf * mf)
}

/// `h(x, x'; y, y') = k(x, x') + k(y, y') - k(x, y') - k(x', y)`.
pub fn h_kernel(spec: &KernelSpec, x: &[f64], x2: &[f64], y: &[f64], y2: &[f64]) -> Result<f64> {
    check_dims(x, x2)?;
    check_dims(x, y)?;
    check_dims(x, y2)?;
    Ok(eval_kernel(spec, x, x2)? + eval_kernel(spec, y, y2)?
        - eval_kernel(spec, x, y2)?
        - eval_kernel(spec, x2, y)?)
}

/// `h` averaged over swapping `x` and `x'`, which also makes it symmetric in `(y, y')`.
pub fn h_kernel_symmetrised(spec: &KernelSpec, x: &[f64], x2: &[f64], y: &[f64], y2: &[f64]) -> Result<f64> {
    Ok(0.5 * (h_kernel(spec, x, x2, y, y2)? + h_kernel(spec, x2, x, y, y2)?))
}

/// Gram of the mean kernel `K_ρ = Σ_k ρ_k k`.
pub fn mean_gram(stack: &GramStack, rho: &SimplexWeights) -> Result<GramMatrix> {
    if rho.len() != stack.kernel_count() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} kernels",
            rho.len(),
            stack.kernel_count()
        )));
    }
    let w = rho.as_slice();
    Ok(GramMatrix::from_fn(stack.size(), |i, j| {
        w.iter()
            .enumerate()
            .map(|(k, &wk)| wk * stack.entry(k, i, j))
            .sum()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram_stack, DataMatrix, KernelBank, PooledSample};
    use crate::synth;

    fn identity(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn identical_points_give_zero() {
        let g = GramMatrix::from_fn(6, |_, _| 1.0);
        assert_eq!(mmd_u(&g, 3, 3, &identity(6)).unwrap(), 0.0);
    }

    #[test]
    fn small_case_matches_scalar_loops() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let k = |a: f64, b: f64| (-(a - b) * (a - b) / 2.0).exp();
        let expected = (k(0.0, 2.0) * 2.0) / 2.0 + (k(1.0, 3.0) * 2.0) / 2.0
            - 2.0 / 4.0 * (k(0.0, 1.0) + k(0.0, 3.0) + k(2.0, 1.0) + k(2.0, 3.0));
        let z = DataMatrix::new(vec![0.0, 2.0, 1.0, 3.0], 1).unwrap();
        let g = GramMatrix::compute(&spec, &z);
        assert!((mmd_u(&g, 2, 2, &identity(4)).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_bijection() {
        let g = GramMatrix::from_fn(4, |_, _| 1.0);
        assert!(mmd_u(&g, 2, 2, &[0, 1, 1, 3]).is_err());
        assert!(mmd_u(&g, 2, 2, &[0, 1, 2]).is_err());
        assert!(mmd_u(&g, 1, 3, &identity(4)).is_err());
    }

    #[test]
    fn h_kernel_cases() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(h_kernel(&spec, &[1.0], &[1.0], &[1.0], &[1.0]).unwrap(), 0.0);
        let v = h_kernel(&spec, &[0.0], &[0.0], &[10.0], &[10.0]).unwrap();
        assert!((v - (2.0 - 2.0 * (-50f64).exp())).abs() < 1e-15);
        assert!(h_kernel(&spec, &[0.0], &[0.0, 1.0], &[1.0], &[1.0]).is_err());
        let (a, b, c, d) = ([0.1], [0.9], [0.4], [2.0]);
        let s1 = h_kernel_symmetrised(&spec, &a, &b, &c, &d).unwrap();
        assert!((s1 - h_kernel_symmetrised(&spec, &b, &a, &c, &d).unwrap()).abs() < 1e-15);
        assert!((s1 - h_kernel_symmetrised(&spec, &a, &b, &d, &c).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn h_kernel_is_bounded() {
        let spec = KernelSpec::laplace(0.3).unwrap();
        let pts = synth::sample_shifted_gaussian(40, 2, 0.0, 1.0, 5);
        for i in 0..10 {
            let v = h_kernel(&spec, pts.row(i), pts.row(i + 10), pts.row(i + 20), pts.row(i + 30)).unwrap();
            assert!(v.abs() <= 2.0 * spec.bound());
        }
    }

    #[test]
    fn mean_gram_cases() {
        let x = synth::sample_shifted_gaussian(5, 1, 0.0, 1.0, 1);
        let y = synth::sample_shifted_gaussian(6, 1, 0.5, 1.0, 2);
        let z = PooledSample::new(&x, &y).unwrap();
        let g = KernelSpec::gaussian(0.8).unwrap();
        let bank = KernelBank::uniform(vec![g, KernelSpec::laplace(1.3).unwrap(), KernelSpec::gaussian(2.0).unwrap()]).unwrap();
        let stack = gram_stack(&bank, &z);
        assert_eq!(mean_gram(&stack, &SimplexWeights::point_mass(3, 1)).unwrap(), stack.matrix(1));

        let twin = KernelBank::uniform(vec![g, g]).unwrap();
        let twin_stack = gram_stack(&twin, &z);
        let mg = mean_gram(&twin_stack, &SimplexWeights::uniform(2)).unwrap();
        for (a, b) in mg.as_slice().iter().zip(twin_stack.matrix(0).as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }

        let rho = SimplexWeights::new(vec![0.2, 0.5, 0.3]).unwrap();
        let id = identity(11);
        let lhs = mmd_u(&mean_gram(&stack, &rho).unwrap(), 5, 6, &id).unwrap();
        let rhs: f64 = (0..3)
            .map(|k| rho.as_slice()[k] * mmd_u(&stack.matrix(k), 5, 6, &id).unwrap())
            .sum();
        assert!((lhs - rhs).abs() < 1e-10);
        assert!(mean_gram(&stack, &SimplexWeights::uniform(2)).is_err());
    }

    #[test]
    fn unbiased_under_the_null() {
        // 2000 null draws, n = m = 20, N(0, 1), Gaussian bandwidth 1.
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let reps = 2000;
        let id = identity(40);
        let values: Vec<f64> = (0..reps)
            .map(|r| {
                let x = synth::sample_shifted_gaussian(20, 1, 0.0, 1.0, 2 * r);
                let y = synth::sample_shifted_gaussian(20, 1, 0.0, 1.0, 2 * r + 1);
                let z = PooledSample::new(&x, &y).unwrap();
                mmd_u(&GramMatrix::compute(&spec, z.data()), 20, 20, &id).unwrap()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / reps as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
        let se = (var / reps as f64).sqrt();
        assert!(mean.abs() < 4.0 * se, "mean {mean}, se {se}");
    }
}
