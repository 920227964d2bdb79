//! Scalar abstraction for rates, similarities and fractions.
//!
//! Every quantity the simulator reports is a ratio of counts (or a mean of
//! such ratios), so the metric code is written once against [`Scalar`] and
//! instantiated with `f64`, `f32` or an exact rational. Tests use the exact
//! instantiation to compare against brute-force oracles without tolerances.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A number type the metric and overlap computations can be carried out in.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// Exact image of a count.
    fn from_count(n: usize) -> Self;

    /// Lossy view used for rendering and for comparing against thresholds.
    fn to_f64(&self) -> f64;

    /// `num / den`, with `den > 0`.
    fn ratio(num: usize, den: usize) -> Self {
        debug_assert!(den > 0);
        Self::from_count(num) / Self::from_count(den)
    }

    /// Arithmetic mean; `None` for an empty input.
    fn mean<I: IntoIterator<Item = Self>>(values: I) -> Option<Self> {
        let mut n = 0usize;
        let mut acc = Self::zero();
        for v in values {
            acc = acc + v;
            n += 1;
        }
        (n > 0).then(|| acc / Self::from_count(n))
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_count(n: usize) -> Self {
                n as $t
            }

            fn to_f64(&self) -> f64 {
                f64::from(*self)
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for Ratio<i64> {
    fn from_count(n: usize) -> Self {
        Ratio::from_usize(n).expect("count fits in i64")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for Ratio<i128> {
    fn from_count(n: usize) -> Self {
        Ratio::from_usize(n).expect("count fits in i128")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_is_exact() {
        let third: Ratio<i64> = Scalar::ratio(1, 3);
        assert_eq!(third * Ratio::from_integer(3), Ratio::from_integer(1));
    }

    #[test]
    fn mean_of_nothing_is_absent() {
        assert_eq!(<f64 as Scalar>::mean(std::iter::empty()), None);
        assert_eq!(<f64 as Scalar>::mean([1.0, 0.0]), Some(0.5));
    }
}
