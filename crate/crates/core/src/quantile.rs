//! The empirical quantile `inf { r : (1/|A|) #{a <= r} >= q }`.

use crate::error::{Error, Result};

/// 0-based order-statistic index of the `q` quantile of `len` values.
///
/// The smallest `k` with `k / len >= q` (evaluated in floating point, as the
/// definition reads), minus one.
pub fn quantile_rank(len: usize, q: f64) -> Result<usize> {
    if len == 0 {
        return Err(Error::InvalidInput("quantile of an empty list".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidInput(format!("quantile level {q} outside (0, 1]")));
    }
    let n = len as f64;
    let mut k = ((q * n).ceil() as usize).clamp(1, len);
    while k > 1 && (k - 1) as f64 / n >= q {
        k -= 1;
    }
    while k < len && (k as f64) / n < q {
        k += 1;
    }
    Ok(k - 1)
}

/// Quantile of `values` at level `q`; the result is always an element of `values`.
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    let mut scratch = values.to_vec();
    select_quantile(&mut scratch, q)
}

/// As [`empirical_quantile`] but reorders `values` in place instead of copying.
pub fn select_quantile(values: &mut [f64], q: f64) -> Result<f64> {
    let rank = quantile_rank(values.len(), q)?;
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("quantile of a list containing NaN".into()));
    }
    let (_, v, _) = values.select_nth_unstable_by(rank, |a, b| a.total_cmp(b));
    Ok(*v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn order_statistics() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(empirical_quantile(&v, 0.5).unwrap(), 5.0);
        assert_eq!(empirical_quantile(&v, 1.0).unwrap(), 10.0);
        assert_eq!(empirical_quantile(&v, 0.7).unwrap(), 7.0);
        assert_eq!(empirical_quantile(&v, 0.05).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&[3.0, 3.0, 3.0, 7.0], 0.75).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&[3.0, 3.0, 3.0, 7.0], 0.76).unwrap(), 7.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(empirical_quantile(&[], 0.5).is_err());
        assert!(empirical_quantile(&[1.0], 0.0).is_err());
        assert!(empirical_quantile(&[1.0], 1.5).is_err());
    }

    proptest! {
        // Literal evaluation of the infimum over candidate values.
        #[test]
        fn matches_definition(values in proptest::collection::vec(-5i32..5, 1..40), q in 0.001f64..=1.0) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            let n = values.len() as f64;
            let mut candidates = values.clone();
            candidates.sort_by(f64::total_cmp);
            let expected = candidates
                .iter()
                .copied()
                .find(|&r| values.iter().filter(|&&v| v <= r).count() as f64 / n >= q)
                .unwrap();
            prop_assert_eq!(empirical_quantile(&values, q).unwrap(), expected);
        }
    }
}
