//! Numeric scalar abstraction shared by the LP, flow and rounding code.

use std::fmt::{Debug, Display};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Exact rational scalar used by default throughout the pipeline.
pub type Rational = BigRational;

const DEFAULT_EPS: f64 = 1e-7;
const DEFAULT_LP_EPS: f64 = 1e-9;

/// Downstream feasibility tolerance. Reads `TWROUTER_EPS` once.
pub fn eps() -> f64 {
    static EPS: OnceLock<f64> = OnceLock::new();
    *EPS.get_or_init(|| {
        std::env::var("TWROUTER_EPS")
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|e| e.is_finite() && *e >= 0.0)
            .unwrap_or(DEFAULT_EPS)
    })
}

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Num
    + Signed
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// True when arithmetic is exact, so comparisons need no slack.
    const EXACT: bool;

    /// Slack used by feasibility comparisons.
    fn tol() -> Self;

    /// Pivot tolerance for the simplex solver.
    fn lp_tol() -> Self;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_rational(q: &Rational) -> Self;

    fn to_rational(&self) -> Rational;

    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn le_tol(&self, other: &Self) -> bool {
        *self <= other.clone() + Self::tol()
    }

    fn ge_tol(&self, other: &Self) -> bool {
        self.clone() + Self::tol() >= *other
    }

    fn eq_tol(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).abs() <= Self::tol()
    }

    fn is_pos(&self) -> bool {
        *self > Self::tol()
    }

    fn floor_int(&self) -> Self;

    fn ceil_int(&self) -> Self {
        let f = self.floor_int();
        if f == *self {
            f
        } else {
            f + Self::one()
        }
    }

    fn is_integral(&self) -> bool {
        let f = self.floor_int();
        if Self::EXACT {
            f == *self
        } else {
            (self.clone() - f.clone()).abs() <= Self::tol()
                || (f + Self::one() - self.clone()).abs() <= Self::tol()
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if a <= b {
            a
        } else {
            b
        }
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn tol() -> Self {
        Self::zero()
    }

    fn lp_tol() -> Self {
        Self::zero()
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }

    fn to_rational(&self) -> Rational {
        self.clone()
    }

    fn floor_int(&self) -> Self {
        self.floor()
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            fn tol() -> Self {
                eps() as $t
            }

            fn lp_tol() -> Self {
                DEFAULT_LP_EPS as $t
            }

            fn from_ratio(num: i64, den: i64) -> Self {
                num as $t / den as $t
            }

            fn from_rational(q: &Rational) -> Self {
                q.to_f64().unwrap_or(0.0) as $t
            }

            fn to_rational(&self) -> Rational {
                BigRational::from_float(*self).unwrap_or_else(BigRational::zero)
            }

            fn floor_int(&self) -> Self {
                self.floor()
            }
        }
    };
}

float_scalar!(f64);
float_scalar!(f32);

/// Rounds `x` to the nearest multiple of `1/den`.
pub fn snap(x: f64, den: u64) -> Rational {
    let scaled = (x * den as f64).round();
    BigRational::new(
        BigInt::from_f64(scaled).unwrap_or_default(),
        BigInt::from(den),
    )
}

pub fn q(num: i64, den: i64) -> Rational {
    Rational::from_ratio(num, den)
}

pub fn qi(v: u64) -> Rational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn one<T: Scalar>() -> T {
    T::one()
}

pub fn sum<T: Scalar, I: IntoIterator<Item = T>>(it: I) -> T {
    it.into_iter().fold(T::zero(), |a, b| a + b)
}
