use crate::error::{Error, Result};
use crate::fmath;

/// Probability floor guarding `log(0)`.
pub const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable in-place softmax.
pub fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in z.iter_mut() {
        *x = fmath::exp(*x - m);
        s += *x;
    }
    for x in z.iter_mut() {
        *x /= s;
    }
}

/// `−ln(max(probs[label], 1e-12))`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = *probs.get(label).ok_or(Error::DimensionMismatch {
        expected: label + 1,
        got: probs.len(),
    })?;
    Ok(-fmath::ln(p.max(PROB_FLOOR)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cross_entropy_values() {
        assert_eq!(cross_entropy(&[1.0, 0.0, 0.0], 0).unwrap(), 0.0);
        let third = 1.0 / 3.0;
        assert!((cross_entropy(&[third; 3], 2).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!((cross_entropy(&[0.5, 0.25, 0.25], 1).unwrap() - 1.3862943611198906).abs() < 1e-15);
        // floored rather than infinite
        assert!((cross_entropy(&[1.0, 0.0, 0.0], 1).unwrap() - 1e-12f64.ln().abs()).abs() < 1e-9);
        assert!(cross_entropy(&[1.0], 3).is_err());
    }

    proptest! {
        #[test]
        fn softmax_normalized_and_shift_invariant(z in proptest::collection::vec(-50.0f64..50.0, 3),
                                                  c in -100.0f64..100.0) {
            let mut a = z.clone();
            softmax_in_place(&mut a);
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mut b: alloc::vec::Vec<f64> = z.iter().map(|x| x + c).collect();
            softmax_in_place(&mut b);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
