use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A numeric coefficient: exact rational, or a float once one has been mixed in.
#[derive(Debug, Clone, PartialEq)]
pub enum Num {
    Exact(BigRational),
    Approx(f64),
}

impl Num {
    pub fn int(n: i64) -> Num {
        Num::Exact(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn zero() -> Num {
        Num::Exact(BigRational::zero())
    }

    pub fn one() -> Num {
        Num::Exact(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Num::Exact(r) => r.is_zero(),
            Num::Approx(v) => *v == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Num::Exact(r) => r.is_one(),
            Num::Approx(v) => *v == 1.0,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Num::Exact(r) => r.is_negative(),
            Num::Approx(v) => *v < 0.0,
        }
    }

    pub fn is_integer(&self) -> bool {
        match self {
            Num::Exact(r) => r.is_integer(),
            Num::Approx(_) => true,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Num::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Num::Exact(r) => ratio_to_f64(r),
            Num::Approx(v) => *v,
        }
    }

    pub fn abs(&self) -> Num {
        match self {
            Num::Exact(r) => Num::Exact(r.abs()),
            Num::Approx(v) => Num::Approx(v.abs()),
        }
    }

    pub fn add(&self, o: &Num) -> Num {
        match (self, o) {
            (Num::Exact(a), Num::Exact(b)) => Num::Exact(a + b),
            _ => Num::Approx(self.to_f64() + o.to_f64()),
        }
    }

    pub fn mul(&self, o: &Num) -> Num {
        match (self, o) {
            (Num::Exact(a), Num::Exact(b)) => Num::Exact(a * b),
            _ => Num::Approx(self.to_f64() * o.to_f64()),
        }
    }

    pub fn neg(&self) -> Num {
        match self {
            Num::Exact(a) => Num::Exact(-a),
            Num::Approx(v) => Num::Approx(-v),
        }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn recip(&self) -> Option<Num> {
        if self.is_zero() {
            return None;
        }
        Some(match self {
            Num::Exact(a) => Num::Exact(a.recip()),
            Num::Approx(v) => Num::Approx(1.0 / v),
        })
    }

    pub fn powi(&self, k: i32) -> Option<Num> {
        if k < 0 {
            return self.recip()?.powi(-k);
        }
        Some(match self {
            Num::Exact(a) => Num::Exact(num_traits::pow(a.clone(), k as usize)),
            Num::Approx(v) => Num::Approx(v.powi(k)),
        })
    }

    /// Exact square root when the value is a perfect rational square.
    pub fn exact_sqrt(&self) -> Option<Num> {
        let Num::Exact(r) = self else { return None };
        if r.is_negative() {
            return None;
        }
        let n = r.numer().sqrt();
        let d = r.denom().sqrt();
        if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
            Some(Num::Exact(BigRational::new(n, d)))
        } else {
            None
        }
    }
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => r.to_f64().unwrap_or(f64::NAN),
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Exact(r) => {
                if r.is_integer() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            // `{:?}` always keeps a decimal point or exponent, so the literal
            // parses back as a float.
            Num::Approx(v) => write!(f, "{v:?}"),
        }
    }
}
