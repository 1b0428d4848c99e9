//! Max-shifted reductions for log-space arithmetic.

use crate::error::{Error, Result};

/// `log Σ exp(v_j)` computed with a max shift.
///
/// Entries equal to `-inf` are allowed (they contribute nothing) as long as
/// at least one entry is finite; `+inf` and NaN are rejected.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::domain("log_sum_exp of an empty vector"));
    }
    if v.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::domain("log_sum_exp requires finite entries"));
    }
    Ok(lse(v))
}

/// Unchecked variant for hot loops. Returns `-inf` when every entry is `-inf`.
pub(crate) fn lse(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Replace `v` by `softmax(v)` and return the normalizer `log Σ exp(v_j)`.
pub fn softmax_in_place(v: &mut [f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    #[test]
    fn fixtures() {
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - LN_2).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[1000.0, 1000.0]).unwrap(), 1000.0 + LN_2);
        assert!((log_sum_exp(&[0.0, 3f64.ln()]).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[f64::NEG_INFINITY, 0.0]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn constant_vectors_are_exact() {
        for c in [-700.0, -3.5, 0.0, 12.25, 1e5] {
            assert_eq!(log_sum_exp(&[c; 4]).unwrap(), c + 4f64.ln());
        }
    }

    #[test]
    fn rejects_empty_and_nan() {
        assert!(matches!(log_sum_exp(&[]), Err(Error::Domain(_))));
        assert!(log_sum_exp(&[0.0, f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            v in prop::collection::vec(-50.0f64..50.0, 1..12),
            shift in -500.0f64..500.0,
        ) {
            let mut a = v.clone();
            softmax_in_place(&mut a);
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let mut b: Vec<f64> = v.iter().map(|x| x + shift).collect();
            softmax_in_place(&mut b);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
