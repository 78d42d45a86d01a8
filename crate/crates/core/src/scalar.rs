//! Scalar abstractions.
//!
//! Truth values only need the lattice operations of `[0, 1]` (min, max and
//! complement), so evaluation works over exact rationals as well as floats.
//! Anything that exponentiates (scores, partition functions, learning) needs
//! [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumCast, One, Zero};

/// A degree of truth in `[0, 1]`.
pub trait Truth: Copy + PartialOrd + Zero + One + std::ops::Sub<Output = Self> + Debug {
    fn min_truth(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max_truth(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn complement(self) -> Self {
        Self::one() - self
    }
}

impl<T> Truth for T where T: Copy + PartialOrd + Zero + One + std::ops::Sub<Output = T> + Debug {}

/// Floating point scalar used by scoring, inference and learning: `f32` or `f64`.
pub trait Real:
    Float
    + Truth
    + FromPrimitive
    + NumCast
    + FromStr
    + Sum
    + Display
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 is representable in every Real")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `ln(1 + e^x)` without overflow.
    fn softplus(self) -> Self {
        if self > Self::zero() {
            self + (-self).exp().ln_1p()
        } else {
            self.exp().ln_1p()
        }
    }

    /// Logistic sigmoid.
    fn sigmoid(self) -> Self {
        if self >= Self::zero() {
            Self::one() / (Self::one() + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::one() + e)
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Pairwise summation. The reduction tree depends only on the slice length,
/// so results are reproducible however the inputs were produced.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `ln Σ exp(v)` with max-shift. Returns `-inf` for an empty slice or when
/// every entry is `-inf`.
pub fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let shifted: Vec<T> = values.iter().map(|&v| (v - max).exp()).collect();
    max + pairwise_sum(&shifted).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive() {
        let v = [0.3f64, -1.2, 2.5, 0.0];
        let naive: f64 = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - naive).abs() < 1e-14);
    }

    #[test]
    fn lse_survives_large_values() {
        let v = [1000.0f64, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn softplus_and_sigmoid() {
        for x in [-800.0f64, -3.0, 0.0, 2.0, 800.0] {
            let sp = x.softplus();
            assert!(sp.is_finite());
            let s = x.sigmoid();
            assert!((0.0..=1.0).contains(&s));
        }
        assert!((0.0f64.softplus() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(0.0f64.sigmoid(), 0.5);
    }

    #[test]
    fn truth_ops_on_rationals() {
        use num_rational::Ratio;
        let a = Ratio::new(9i64, 10);
        let b = Ratio::new(1i64, 100);
        assert_eq!(a.min_truth(b), b);
        assert_eq!(a.max_truth(b), a);
        assert_eq!(a.complement(), Ratio::new(1, 10));
    }
}
