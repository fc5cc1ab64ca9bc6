use std::fmt;

use num_rational::Rational64;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Constant payload of an expression node.
///
/// Rationals stay exact until an operation overflows `i64`, at which point the
/// value degrades to an IEEE double.
#[derive(Clone, Copy, Debug)]
pub enum Scalar {
    Rational(Rational64),
    Real(f64),
}

// Exact arithmetic that falls back to floats on overflow; not the operator traits
// because division is partial.
#[allow(clippy::should_implement_trait)]
impl Scalar {
    pub fn int(v: i64) -> Self {
        Scalar::Rational(Rational64::from_integer(v))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Scalar::Rational(Rational64::new(num, den))
    }

    pub fn real(v: f64) -> Self {
        Scalar::Real(v)
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Scalar::Rational(r) => r.to_f64().unwrap_or(f64::NAN),
            Scalar::Real(v) => v,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            Scalar::Rational(r) => r.is_zero(),
            Scalar::Real(v) => v == 0.0,
        }
    }

    pub fn is_one(self) -> bool {
        match self {
            Scalar::Rational(r) => r.is_one(),
            Scalar::Real(v) => v == 1.0,
        }
    }

    pub fn is_negative(self) -> bool {
        match self {
            Scalar::Rational(r) => r.is_negative(),
            Scalar::Real(v) => v < 0.0,
        }
    }

    pub fn as_rational(self) -> Option<Rational64> {
        match self {
            Scalar::Rational(r) => Some(r),
            Scalar::Real(_) => None,
        }
    }

    /// Integer value, when the scalar is an exact integer.
    pub fn as_integer(self) -> Option<i64> {
        match self {
            Scalar::Rational(r) if r.is_integer() => Some(r.to_integer()),
            _ => None,
        }
    }

    pub fn neg(self) -> Self {
        match self {
            Scalar::Rational(r) => match r.numer().checked_neg() {
                Some(n) => Scalar::Rational(Rational64::new_raw(n, *r.denom())),
                None => Scalar::Real(-self.to_f64()),
            },
            Scalar::Real(v) => Scalar::Real(-v),
        }
    }

    pub fn add(self, other: Self) -> Self {
        match (self, other) {
            (Scalar::Rational(a), Scalar::Rational(b)) => checked(a, b, |a, b| {
                let den = a.denom().checked_mul(*b.denom())?;
                let num = a
                    .numer()
                    .checked_mul(*b.denom())?
                    .checked_add(b.numer().checked_mul(*a.denom())?)?;
                Some(Rational64::new(num, den))
            })
            .unwrap_or_else(|| Scalar::Real(self.to_f64() + other.to_f64())),
            _ => Scalar::Real(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(self, other: Self) -> Self {
        match (self, other) {
            (Scalar::Rational(a), Scalar::Rational(b)) => checked(a, b, |a, b| {
                let num = a.numer().checked_mul(*b.numer())?;
                let den = a.denom().checked_mul(*b.denom())?;
                Some(Rational64::new(num, den))
            })
            .unwrap_or_else(|| Scalar::Real(self.to_f64() * other.to_f64())),
            _ => Scalar::Real(self.to_f64() * other.to_f64()),
        }
    }

    /// `None` when dividing by zero.
    pub fn div(self, other: Self) -> Option<Self> {
        if other.is_zero() {
            return None;
        }
        Some(match (self, other) {
            (Scalar::Rational(a), Scalar::Rational(b)) => checked(a, b, |a, b| {
                let num = a.numer().checked_mul(*b.denom())?;
                let den = a.denom().checked_mul(*b.numer())?;
                Some(Rational64::new(num, den))
            })
            .unwrap_or_else(|| Scalar::Real(self.to_f64() / other.to_f64())),
            _ => Scalar::Real(self.to_f64() / other.to_f64()),
        })
    }

    /// Exact integer power of a rational; `None` if it would not stay exact or finite.
    pub fn powi_exact(self, exp: i64) -> Option<Self> {
        let r = self.as_rational()?;
        if exp.unsigned_abs() > 64 {
            return None;
        }
        if r.is_zero() && exp < 0 {
            return None;
        }
        let mut acc = Rational64::one();
        for _ in 0..exp.unsigned_abs() {
            let num = acc.numer().checked_mul(*r.numer())?;
            let den = acc.denom().checked_mul(*r.denom())?;
            acc = Rational64::new(num, den);
        }
        if exp < 0 {
            acc = acc.recip();
        }
        Some(Scalar::Rational(acc))
    }

    pub(crate) fn hash_bits(self) -> (u8, u64, u64) {
        match self {
            Scalar::Rational(r) => (0, *r.numer() as u64, *r.denom() as u64),
            Scalar::Real(v) => (1, v.to_bits(), 0),
        }
    }
}

fn checked(
    a: Rational64,
    b: Rational64,
    op: impl FnOnce(Rational64, Rational64) -> Option<Rational64>,
) -> Option<Scalar> {
    op(a, b).map(Scalar::Rational)
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Scalar::Rational(a), Scalar::Rational(b)) => a == b,
            (Scalar::Real(a), Scalar::Real(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Scalar {}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::int(v)
    }
}

impl From<Rational64> for Scalar {
    fn from(v: Rational64) -> Self {
        Scalar::Rational(v)
    }
}

impl fmt::Display for Scalar {
    /// Rationals print as `p` or `p/q`; reals always carry an exponent so that
    /// re-parsing yields a real again.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Rational(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Scalar::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Scalar::Real(v) => write!(f, "{v:e}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overflow_degrades_to_real() {
        let big = Scalar::int(i64::MAX / 2);
        let s = big.mul(Scalar::int(4));
        assert!(matches!(s, Scalar::Real(_)));
        assert!((s.to_f64() - 2.0 * i64::MAX as f64).abs() / s.to_f64() < 1e-12);
    }

    #[test]
    fn exact_arithmetic() {
        let a = Scalar::ratio(1, 2).add(Scalar::ratio(1, 3));
        assert_eq!(a, Scalar::ratio(5, 6));
        assert_eq!(
            Scalar::ratio(2, 3).powi_exact(-2),
            Some(Scalar::ratio(9, 4))
        );
        assert_eq!(Scalar::int(0).powi_exact(-1), None);
        assert_eq!(Scalar::int(1).div(Scalar::int(0)), None);
    }

    #[test]
    fn display_forms() {
        assert_eq!(Scalar::ratio(-3, 4).to_string(), "-3/4");
        assert_eq!(Scalar::int(7).to_string(), "7");
        assert_eq!(Scalar::real(0.25).to_string(), "2.5e-1");
    }
}
