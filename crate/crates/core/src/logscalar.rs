//! Nonnegative scalars stored as base-2 logarithms.
//!
//! Squared indicator values decay like `2^(-(alpha + beta/M) k)` along long
//! adaptive runs, far past the range of `f64` in the linear domain. All
//! indicator arithmetic therefore happens on `log2` values; zero gets the
//! distinguished representation `-inf`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::f64::consts::LN_2;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul};

/// A nonnegative scalar `x >= 0` represented by `log2(x)`; `x = 0` is `-inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogScalar(f64);

/// `log2(1 + x)` without the cancellation of a naive `1 + x` round trip.
#[inline]
fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

#[inline]
fn logaddexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    // Factor out the larger exponent so the residual is in [0, 1].
    if a >= b {
        a + log2_1p((b - a).exp2())
    } else {
        b + log2_1p((a - b).exp2())
    }
}

impl LogScalar {
    pub const ZERO: LogScalar = LogScalar(f64::NEG_INFINITY);
    pub const ONE: LogScalar = LogScalar(0.0);

    /// Wraps a base-2 logarithm. `-inf` is the zero value; NaN is rejected.
    pub fn from_log2(log2: f64) -> LogScalar {
        assert!(!log2.is_nan(), "LogScalar exponent must not be NaN");
        LogScalar(log2)
    }

    /// Converts from the linear domain; `x` must be nonnegative.
    pub fn from_linear(x: f64) -> LogScalar {
        assert!(x >= 0.0, "LogScalar represents nonnegative values, got {x}");
        if x == 0.0 {
            LogScalar::ZERO
        } else {
            LogScalar(x.log2())
        }
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// The stored base-2 logarithm (`-inf` for zero).
    #[inline]
    pub fn log2(self) -> f64 {
        self.0
    }

    /// Back to the linear domain; underflows to 0.0 and overflows to `inf`.
    #[inline]
    pub fn to_linear(self) -> f64 {
        self.0.exp2()
    }

    /// Multiplication by `2^delta`, exact addition on the exponent.
    #[inline]
    pub fn scale_exp2(self, delta: f64) -> LogScalar {
        if self.is_zero() {
            self
        } else {
            LogScalar(self.0 + delta)
        }
    }

    /// Square root: halves the exponent.
    #[inline]
    pub fn sqrt(self) -> LogScalar {
        if self.is_zero() {
            self
        } else {
            LogScalar(self.0 / 2.0)
        }
    }

    /// Linear-domain ratio `self / other` as an `f64`; `0/0` is defined as 0.
    pub fn ratio(self, other: LogScalar) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        (self.0 - other.0).exp2()
    }

    /// Guarded difference `self - other` for `self >= other`.
    ///
    /// Returns the difference together with the linear ratio `other / self`,
    /// which measures how much cancellation the subtraction suffered (a ratio
    /// near 1 means the result lost almost all relative precision). A
    /// slightly larger `other` (rounding noise) clamps to zero.
    pub fn sub_ge(self, other: LogScalar) -> (LogScalar, f64) {
        if other.is_zero() {
            return (self, 0.0);
        }
        if other.0 >= self.0 {
            return (LogScalar::ZERO, 1.0);
        }
        let r = (other.0 - self.0).exp2();
        let diff = self.0 + log2_1p(-r);
        (LogScalar(diff), r)
    }

    /// Sum with max-exponent factoring; more accurate than a fold of binary
    /// additions when many terms share a scale.
    pub fn sum<I: IntoIterator<Item = LogScalar>>(terms: I) -> LogScalar {
        let exps: Vec<f64> = terms
            .into_iter()
            .filter(|t| !t.is_zero())
            .map(|t| t.0)
            .collect();
        if exps.is_empty() {
            return LogScalar::ZERO;
        }
        let hi = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        for e in &exps {
            acc += (e - hi).exp2();
        }
        LogScalar(hi + acc.log2())
    }

    pub fn max(self, other: LogScalar) -> LogScalar {
        if self.0 >= other.0 {
            self
        } else {
            other
        }
    }
}

/// Linear-domain addition.
impl Add for LogScalar {
    type Output = LogScalar;

    fn add(self, rhs: LogScalar) -> LogScalar {
        LogScalar(logaddexp2(self.0, rhs.0))
    }
}

impl AddAssign for LogScalar {
    fn add_assign(&mut self, rhs: LogScalar) {
        self.0 = logaddexp2(self.0, rhs.0);
    }
}

/// Linear-domain multiplication: exponents add.
impl Mul for LogScalar {
    type Output = LogScalar;

    fn mul(self, rhs: LogScalar) -> LogScalar {
        if self.is_zero() || rhs.is_zero() {
            LogScalar::ZERO
        } else {
            LogScalar(self.0 + rhs.0)
        }
    }
}

impl Sum for LogScalar {
    fn sum<I: Iterator<Item = LogScalar>>(iter: I) -> LogScalar {
        LogScalar::sum(iter)
    }
}

impl Ord for LogScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        // Exponents are never NaN by construction.
        self.0.partial_cmp(&other.0).expect("LogScalar is total")
    }
}

impl PartialOrd for LogScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Eq for LogScalar {}

impl Serialize for LogScalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(1))?;
        if self.is_zero() {
            map.serialize_entry("zero", &true)?;
        } else {
            map.serialize_entry("log2", &self.0)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for LogScalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            log2: Option<f64>,
            zero: Option<bool>,
        }
        let repr = Repr::deserialize(deserializer)?;
        match (repr.log2, repr.zero) {
            (Some(e), None) if !e.is_nan() => Ok(LogScalar(e)),
            (None, Some(true)) => Ok(LogScalar::ZERO),
            _ => Err(D::Error::custom(
                "expected {\"log2\": number} or {\"zero\": true}",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_absorbing_for_add() {
        let v = LogScalar::from_linear(3.5);
        assert_eq!(LogScalar::ZERO + v, v);
        assert_eq!(v + LogScalar::ZERO, v);
        assert_eq!(LogScalar::ZERO + LogScalar::ZERO, LogScalar::ZERO);
    }

    #[test]
    fn add_matches_linear_domain() {
        let a = LogScalar::from_linear(0.375);
        let b = LogScalar::from_linear(12.0);
        let sum = a + b;
        assert!((sum.to_linear() - 12.375).abs() < 1e-12);
    }

    #[test]
    fn summing_equal_values_shifts_by_log2_n() {
        let v = LogScalar::from_log2(-700.0);
        for n in [1u32, 2, 7, 64, 1000] {
            let s = LogScalar::sum(std::iter::repeat_n(v, n as usize));
            let expected = -700.0 + f64::from(n).log2();
            assert!(
                (s.log2() - expected).abs() < 1e-13,
                "n = {n}: {} vs {expected}",
                s.log2()
            );
        }
    }

    #[test]
    fn scale_is_exact_on_exponent() {
        let v = LogScalar::from_log2(-3201.5);
        assert_eq!(v.scale_exp2(-0.0625).log2(), -3201.5 - 0.0625);
        assert_eq!(LogScalar::ZERO.scale_exp2(5.0), LogScalar::ZERO);
    }

    #[test]
    fn sub_ge_reports_cancellation() {
        let a = LogScalar::from_linear(1.0);
        let b = LogScalar::from_linear(0.5);
        let (d, r) = a.sub_ge(b);
        assert!((d.to_linear() - 0.5).abs() < 1e-15);
        assert!((r - 0.5).abs() < 1e-15);

        let (z, r) = a.sub_ge(a);
        assert!(z.is_zero());
        assert_eq!(r, 1.0);

        let (same, r) = a.sub_ge(LogScalar::ZERO);
        assert_eq!(same, a);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn sub_ge_survives_deep_exponents() {
        // Values around 2^-4000 are far below linear f64 range.
        let a = LogScalar::from_log2(-4000.0);
        let b = LogScalar::from_log2(-4001.0);
        let (d, _) = a.sub_ge(b);
        assert!((d.log2() - (-4001.0)).abs() < 1e-12); // a - b = a/2
    }

    #[test]
    fn serde_round_trip() {
        let v = LogScalar::from_log2(-12.5);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, "{\"log2\":-12.5}");
        assert_eq!(serde_json::from_str::<LogScalar>(&s).unwrap(), v);

        let z = serde_json::to_string(&LogScalar::ZERO).unwrap();
        assert_eq!(z, "{\"zero\":true}");
        assert_eq!(
            serde_json::from_str::<LogScalar>(&z).unwrap(),
            LogScalar::ZERO
        );
    }
}
