//! Exact rational scalars.
//!
//! `Rat` wraps `num_rational::BigRational` and is kept in canonical reduced
//! form by construction. All kernel arithmetic bottoms out here; floating
//! point appears only in independent test oracles.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::Error;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rat(BigRational);

impl Rat {
    pub fn zero() -> Rat {
        Rat(BigRational::zero())
    }

    pub fn one() -> Rat {
        Rat(BigRational::one())
    }

    pub fn new(numer: i64, denom: i64) -> Rat {
        assert!(denom != 0, "zero denominator");
        Rat(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_int(n: i64) -> Rat {
        Rat(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_big(r: BigRational) -> Rat {
        Rat(r)
    }

    pub fn from_bigint(n: BigInt) -> Rat {
        Rat(BigRational::from_integer(n))
    }

    /// 2^e for any integer exponent, exact.
    pub fn pow2(e: i64) -> Rat {
        let one = BigInt::one();
        if e >= 0 {
            Rat(BigRational::from_integer(one << (e as usize)))
        } else {
            Rat(BigRational::new(one.clone(), one << ((-e) as usize)))
        }
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Rat {
        Rat(self.0.abs())
    }

    pub fn min(self, other: Rat) -> Rat {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Rat) -> Rat {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn floor_int(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    pub fn fract(&self) -> Rat {
        Rat(&self.0 - self.0.floor())
    }

    pub fn recip(&self) -> Rat {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rat(self.0.recip())
    }

    /// Some(e) iff self == 2^e exactly.
    pub fn as_pow2(&self) -> Option<i64> {
        if !self.is_positive() {
            return None;
        }
        let n = self.numer();
        let d = self.denom();
        if d.is_one() {
            if is_pow2_int(n) {
                return Some(n.bits() as i64 - 1);
            }
            return None;
        }
        if n.is_one() && is_pow2_int(d) {
            return Some(-(d.bits() as i64 - 1));
        }
        None
    }

    /// Exact square root when it exists.
    pub fn perfect_sqrt(&self) -> Option<Rat> {
        if self.is_negative() {
            return None;
        }
        let n = self.numer().sqrt();
        let d = self.denom().sqrt();
        if &(&n * &n) == self.numer() && &(&d * &d) == self.denom() {
            Some(Rat(BigRational::new(n, d)))
        } else {
            None
        }
    }

    /// Smallest b >= 0 with |self| <= 2^b. Used for precision shifts.
    pub fn mag_bits(&self) -> u32 {
        let a = self.abs();
        if a <= Rat::one() {
            return 0;
        }
        // ceil(|n|/d) has bit length giving the bound.
        let q = a.numer().div_ceil(a.denom());
        q.bits() as u32
    }

    /// Round toward zero onto the grid of multiples of 2^-k.
    pub fn dyadic_trunc(&self, k: u32) -> Rat {
        let scaled = &self.0 * BigRational::from_integer(BigInt::one() << (k as usize));
        let t = scaled.trunc();
        Rat(t / BigRational::from_integer(BigInt::one() << (k as usize)))
    }

    /// Largest multiple of 2^-k that is <= self.
    pub fn dyadic_floor(&self, k: u32) -> Rat {
        let scaled = &self.0 * BigRational::from_integer(BigInt::one() << (k as usize));
        let t = scaled.floor();
        Rat(t / BigRational::from_integer(BigInt::one() << (k as usize)))
    }

    /// Smallest multiple of 2^-k that is >= self.
    pub fn dyadic_ceil(&self, k: u32) -> Rat {
        let scaled = &self.0 * BigRational::from_integer(BigInt::one() << (k as usize));
        let t = scaled.ceil();
        Rat(t / BigRational::from_integer(BigInt::one() << (k as usize)))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn into_big(self) -> BigRational {
        self.0
    }
}

fn is_pow2_int(n: &BigInt) -> bool {
    if n.sign() != Sign::Plus {
        return false;
    }
    let m = n.magnitude();
    m.count_ones() == 1
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat(self.0 $op rhs.0)
            }
        }
        impl<'a> $trait<&'a Rat> for &Rat {
            type Output = Rat;
            fn $method(self, rhs: &'a Rat) -> Rat {
                Rat(&self.0 $op &rhs.0)
            }
        }
        impl $trait<&Rat> for Rat {
            type Output = Rat;
            fn $method(self, rhs: &Rat) -> Rat {
                Rat(self.0 $op &rhs.0)
            }
        }
        impl $trait<Rat> for &Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat(&self.0 $op rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Div for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(self.0 / rhs.0)
    }
}

impl<'a> Div<&'a Rat> for &Rat {
    type Output = Rat;
    fn div(self, rhs: &'a Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(&self.0 / &rhs.0)
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-&self.0)
    }
}

impl fmt::Display for Rat {
    /// Canonical "p/q" form; integers print without the denominator.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Rat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Rat, Error> {
        let t = s.trim();
        if t.is_empty() {
            return Err(Error::Parse { pos: 0, msg: "empty rational".into() });
        }
        let parse_int = |part: &str, pos: usize| -> Result<BigInt, Error> {
            part.trim().parse::<BigInt>().map_err(|_| Error::Parse {
                pos,
                msg: format!("invalid integer '{}'", part.trim()),
            })
        };
        match t.find('/') {
            None => Ok(Rat(BigRational::from_integer(parse_int(t, 0)?))),
            Some(i) => {
                let n = parse_int(&t[..i], 0)?;
                let d = parse_int(&t[i + 1..], i + 1)?;
                if d.is_zero() {
                    return Err(Error::Parse { pos: i + 1, msg: "zero denominator".into() });
                }
                Ok(Rat(BigRational::new(n, d)))
            }
        }
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Rat {
        Rat::from_int(n)
    }
}

pub fn cmp_rat(a: &Rat, b: &Rat) -> Ordering {
    a.cmp(b)
}
