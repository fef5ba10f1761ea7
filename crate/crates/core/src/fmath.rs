//! Thin wrappers over `libm` so the crate stays `no_std` and bit-reproducible
//! across targets.

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn log10(x: f64) -> f64 {
    libm::log10(x)
}
#[inline]
pub fn pow10(x: f64) -> f64 {
    libm::pow(10.0, x)
}
#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}
#[inline]
pub fn sincos(x: f64) -> (f64, f64) {
    libm::sincos(x)
}
#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}
#[inline]
pub fn acos(x: f64) -> f64 {
    libm::acos(x)
}
#[inline]
pub fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}
#[inline]
pub fn asin(x: f64) -> f64 {
    libm::asin(x)
}

/// `10·log10(x)`.
#[inline]
pub fn db(x: f64) -> f64 {
    10.0 * log10(x)
}

/// Inverse of [`db`].
#[inline]
pub fn undb(x: f64) -> f64 {
    pow10(x / 10.0)
}

/// Wrap an angle in degrees into (−180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let mut w = a - 360.0 * floor((a + 180.0) / 360.0);
    // floor puts -180 in range; move it to +180
    if w <= -180.0 {
        w += 360.0;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_deg(185.0), -175.0);
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert_eq!(wrap_deg(180.0), 180.0);
        assert_eq!(wrap_deg(540.0), 180.0);
        assert_eq!(wrap_deg(-190.0), 170.0);
        assert_eq!(wrap_deg(0.0), 0.0);
    }

    proptest::proptest! {
        #[test]
        fn wrap_in_range_and_congruent(a in -1e4f64..1e4) {
            let w = wrap_deg(a);
            proptest::prop_assert!(w > -180.0 && w <= 180.0);
            let k = (a - w) / 360.0;
            proptest::prop_assert!((k - libm::round(k)).abs() < 1e-9);
        }
    }
}
