//! Computable reals as memoized approximation streams.
//!
//! A `CReal` produces, for every depth k, a rational within 2^-k of the number
//! it denotes. Values built from exact rationals keep an exactness flag that
//! propagates through arithmetic whenever every input is exact, so chains of
//! rational operations never lose precision. Everything here is deterministic:
//! the same value queried twice returns the identical rational.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::rat::Rat;

type ApproxFn = Box<dyn Fn(u32) -> Result<Rat> + Send + Sync>;

struct Inner {
    exact: Option<Rat>,
    // |x| <= mag, computed on first demand from approx(0)
    mag: Mutex<Option<Rat>>,
    approx: ApproxFn,
    memo: Mutex<BTreeMap<u32, Rat>>,
}

/// A real number presented by rational approximations: |approx(k) - x| <= 2^-k.
#[derive(Clone)]
pub struct CReal {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for CReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.inner.exact {
            Some(q) => write!(f, "CReal({q})"),
            None => write!(f, "CReal(~)"),
        }
    }
}

/// Smallest s with n <= 2^s (n >= 1).
pub(crate) fn clog2(n: usize) -> u32 {
    (n.max(1) as u64).next_power_of_two().trailing_zeros()
}

impl CReal {
    pub fn from_rat(q: Rat) -> CReal {
        let qq = q.clone();
        CReal {
            inner: Arc::new(Inner {
                exact: Some(q),
                mag: Mutex::new(None),
                approx: Box::new(move |_| Ok(qq.clone())),
                memo: Mutex::new(BTreeMap::new()),
            }),
        }
    }

    pub fn from_int(n: i64) -> CReal {
        CReal::from_rat(Rat::from_int(n))
    }

    pub fn zero() -> CReal {
        CReal::from_rat(Rat::zero())
    }

    pub fn one() -> CReal {
        CReal::from_rat(Rat::one())
    }

    pub fn from_fn(f: impl Fn(u32) -> Result<Rat> + Send + Sync + 'static) -> CReal {
        CReal {
            inner: Arc::new(Inner {
                exact: None,
                mag: Mutex::new(None),
                approx: Box::new(f),
                memo: Mutex::new(BTreeMap::new()),
            }),
        }
    }

    /// A deliberately inexact presentation of a rational: the depth-k
    /// approximant misses by exactly 2^-(k+1), with alternating sign. Useful
    /// for exercising approximation paths on values whose limit is known.
    pub fn inexact_rat(q: Rat) -> CReal {
        CReal::from_fn(move |k| {
            let off = Rat::pow2(-(k as i64 + 1));
            Ok(if k % 2 == 0 { &q + off } else { &q - off })
        })
    }

    pub fn is_exact(&self) -> bool {
        self.inner.exact.is_some()
    }

    pub fn exact_value(&self) -> Option<Rat> {
        self.inner.exact.clone()
    }

    /// |approx(k) - x| <= 2^-k. Memoized; a finer cached answer also serves.
    pub fn approx(&self, k: u32) -> Result<Rat> {
        if let Some(q) = &self.inner.exact {
            return Ok(q.clone());
        }
        {
            let memo = self.inner.memo.lock().unwrap();
            if let Some((_, v)) = memo.range(k..).next() {
                return Ok(v.clone());
            }
        }
        let v = (self.inner.approx)(k)?;
        self.inner.memo.lock().unwrap().insert(k, v.clone());
        Ok(v)
    }

    /// An upper bound for |x|, cached after the first computation.
    pub fn mag(&self) -> Result<Rat> {
        if let Some(q) = &self.inner.exact {
            return Ok(q.abs());
        }
        if let Some(m) = self.inner.mag.lock().unwrap().clone() {
            return Ok(m);
        }
        let m = self.approx(0)?.abs() + Rat::one();
        *self.inner.mag.lock().unwrap() = Some(m.clone());
        Ok(m)
    }

    pub fn add(&self, other: &CReal) -> CReal {
        if let (Some(a), Some(b)) = (self.exact_value(), other.exact_value()) {
            return CReal::from_rat(a + b);
        }
        let (x, y) = (self.clone(), other.clone());
        CReal::from_fn(move |k| Ok(x.approx(k + 1)? + y.approx(k + 1)?))
    }

    pub fn sub(&self, other: &CReal) -> CReal {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> CReal {
        if let Some(a) = self.exact_value() {
            return CReal::from_rat(-a);
        }
        let x = self.clone();
        CReal::from_fn(move |k| Ok(-x.approx(k)?))
    }

    pub fn abs(&self) -> CReal {
        if let Some(a) = self.exact_value() {
            return CReal::from_rat(a.abs());
        }
        let x = self.clone();
        CReal::from_fn(move |k| Ok(x.approx(k)?.abs()))
    }

    pub fn min(&self, other: &CReal) -> CReal {
        if let (Some(a), Some(b)) = (self.exact_value(), other.exact_value()) {
            return CReal::from_rat(a.min(b));
        }
        let (x, y) = (self.clone(), other.clone());
        // min is 1-Lipschitz in the sup metric on pairs
        CReal::from_fn(move |k| Ok(x.approx(k)?.min(y.approx(k)?)))
    }

    pub fn max(&self, other: &CReal) -> CReal {
        if let (Some(a), Some(b)) = (self.exact_value(), other.exact_value()) {
            return CReal::from_rat(a.max(b));
        }
        let (x, y) = (self.clone(), other.clone());
        CReal::from_fn(move |k| Ok(x.approx(k)?.max(y.approx(k)?)))
    }

    pub fn add_rat(&self, c: &Rat) -> CReal {
        if let Some(a) = self.exact_value() {
            return CReal::from_rat(a + c);
        }
        let x = self.clone();
        let c = c.clone();
        CReal::from_fn(move |k| Ok(x.approx(k)? + &c))
    }

    pub fn scale(&self, c: &Rat) -> CReal {
        if let Some(a) = self.exact_value() {
            return CReal::from_rat(a * c);
        }
        if c.is_zero() {
            return CReal::zero();
        }
        let x = self.clone();
        let c = c.clone();
        let shift = c.mag_bits();
        CReal::from_fn(move |k| Ok(x.approx(k + shift)? * &c))
    }

    pub fn mul(&self, other: &CReal) -> CReal {
        if let (Some(a), Some(b)) = (self.exact_value(), other.exact_value()) {
            return CReal::from_rat(a * b);
        }
        let (x, y) = (self.clone(), other.clone());
        CReal::from_fn(move |k| {
            // |a'b' - ab| <= |a||b-b'| + |b'||a-a'| <= (ma + mb + 1) 2^-j
            let shift = (x.mag()? + y.mag()? + Rat::one()).mag_bits();
            let j = k + shift;
            Ok(x.approx(j)? * y.approx(j)?)
        })
    }

    pub fn clamp(&self, lo: &Rat, hi: &Rat) -> CReal {
        assert!(lo <= hi, "clamp bounds out of order");
        if let Some(a) = self.exact_value() {
            return CReal::from_rat(a.max(lo.clone()).min(hi.clone()));
        }
        let x = self.clone();
        let (lo, hi) = (lo.clone(), hi.clone());
        // clamping is 1-Lipschitz
        CReal::from_fn(move |k| Ok(x.approx(k)?.max(lo.clone()).min(hi.clone())))
    }

    pub fn clamp_sym(&self, r: &Rat) -> CReal {
        self.clamp(&-r, r)
    }

    /// Sum with a uniform precision shift; exact when every term is exact.
    pub fn sum_slice(terms: &[CReal]) -> CReal {
        if terms.is_empty() {
            return CReal::zero();
        }
        if terms.iter().all(|t| t.is_exact()) {
            let s = terms
                .iter()
                .fold(Rat::zero(), |acc, t| acc + t.exact_value().unwrap());
            return CReal::from_rat(s);
        }
        let terms: Vec<CReal> = terms.to_vec();
        let shift = clog2(terms.len());
        CReal::from_fn(move |k| {
            let mut s = Rat::zero();
            for t in &terms {
                s = s + t.approx(k + shift)?;
            }
            Ok(s)
        })
    }

    /// Reciprocal of a value promised to be >= lb > 0. The promise is spot
    /// checked: approximants strictly contradicting it surface as errors.
    pub fn div_lb(&self, lb: &Rat) -> CReal {
        assert!(lb.is_positive(), "div_lb needs a positive lower bound");
        if let Some(y) = self.exact_value() {
            if &y >= lb {
                return CReal::from_rat(y.recip());
            }
        }
        let y = self.clone();
        let lb = lb.clone();
        let b = lb.recip().mag_bits(); // 1/lb <= 2^b
        CReal::from_fn(move |k| {
            let j = k + 1 + 2 * b;
            let t = y.approx(j)?;
            let tol = Rat::pow2(-(j as i64));
            if &t + &tol < lb {
                return Err(Error::contract(
                    "div_lb",
                    "denominator fell below its stated lower bound",
                ));
            }
            // t >= lb - 2^-j >= lb/2, so |1/t - 1/y| <= 2^-j * 2 / lb^2 <= 2^-k
            Ok(t.recip())
        })
    }

    /// Square root of a nonnegative real.
    pub fn sqrt_nonneg(&self) -> CReal {
        if let Some(a) = self.exact_value() {
            if let Some(r) = a.perfect_sqrt() {
                return CReal::from_rat(r);
            }
        }
        let x = self.clone();
        CReal::from_fn(move |k| {
            // |sqrt t - sqrt x| <= sqrt |t - x|
            let t = x.approx(2 * k + 2)?.max(Rat::zero());
            Ok(sqrt_rat_approx(&t, k + 1))
        })
    }

    /// 2^-x. Exact when x is an exact integer.
    pub fn pow2_neg(&self) -> CReal {
        if let Some(q) = self.exact_value() {
            if q.is_integer() {
                if let Some(e) = q.floor_int().to_i64() {
                    return CReal::from_rat(Rat::pow2(-e));
                }
            }
        }
        let x = self.clone();
        CReal::from_fn(move |k| {
            // integer bound M >= |x| controls both the derivative of 2^-t on
            // [-M, M] (< 2^M) and the scaling amplification below
            let m_bound = (x.mag()?.floor_int() + BigInt::from(1))
                .to_u32()
                .ok_or_else(|| Error::contract("pow2_neg", "exponent bound does not fit u32"))?;
            let j = k + 2 + m_bound;
            let q = x.approx(j + 1)?.dyadic_trunc(j + 1); // |q - x| <= 2^-j
            Ok(pow2_neg_dyadic(&q, j + 1, k + 1))
        })
    }

    /// Probe for a certified positive lower bound: the first depth j with
    /// approx(j) > 2^-j witnesses x >= approx(j) - 2^-j > 0.
    pub fn positive_lower_bound(&self, budget: u64) -> Result<Rat> {
        if let Some(q) = self.exact_value() {
            if q.is_positive() {
                return Ok(q);
            }
            return Err(Error::contract(
                "positive_lower_bound",
                "value is exactly nonpositive",
            ));
        }
        let mut j: u32 = 0;
        let mut spent: u64 = 0;
        loop {
            if spent >= budget {
                return Err(Error::budget(
                    "positive_lower_bound",
                    "no positive witness within budget",
                ));
            }
            spent += 1;
            let a = self.approx(j)?;
            let tol = Rat::pow2(-(j as i64));
            if a > tol {
                return Ok(a - tol);
            }
            j += 1;
        }
    }

    /// -log2(x) for x > 0; probing for positivity is budget bounded.
    /// Exact when x is an exact power of two.
    pub fn neg_log2(&self, budget: u64) -> Result<CReal> {
        if let Some(q) = self.exact_value() {
            if !q.is_positive() {
                return Err(Error::contract("neg_log2", "input must be positive"));
            }
            if let Some(e) = q.as_pow2() {
                return Ok(CReal::from_rat(Rat::from_int(-e)));
            }
            return Ok(CReal::from_fn(move |k| Ok(neg_log2_rat(&q, k))));
        }
        let lb = self.positive_lower_bound(budget)?;
        let bbits = lb.recip().mag_bits(); // lb >= 2^-bbits
        let x = self.clone();
        Ok(CReal::from_fn(move |k| {
            // -log2 is 2^(bbits+2)-Lipschitz on [lb/2, inf)
            let t = x.approx(k + bbits + 4)?;
            Ok(neg_log2_rat(&t, k + 1))
        }))
    }
}

impl std::ops::Add<&CReal> for &CReal {
    type Output = CReal;
    fn add(self, rhs: &CReal) -> CReal {
        CReal::add(self, rhs)
    }
}

impl std::ops::Sub<&CReal> for &CReal {
    type Output = CReal;
    fn sub(self, rhs: &CReal) -> CReal {
        CReal::sub(self, rhs)
    }
}

impl std::ops::Mul<&CReal> for &CReal {
    type Output = CReal;
    fn mul(self, rhs: &CReal) -> CReal {
        CReal::mul(self, rhs)
    }
}

impl std::ops::Neg for &CReal {
    type Output = CReal;
    fn neg(self) -> CReal {
        CReal::neg(self)
    }
}

/// |result - sqrt(t)| <= 2^-prec for rational t >= 0, via integer sqrt.
pub(crate) fn sqrt_rat_approx(t: &Rat, prec: u32) -> Rat {
    debug_assert!(!t.is_negative());
    if let Some(r) = t.perfect_sqrt() {
        return r;
    }
    let m = prec + 1;
    let n = (t * Rat::pow2(2 * m as i64)).floor_int();
    // isqrt(N)/2^m is within 2^(1-m) of sqrt(t)
    Rat::from_bigint(n.sqrt()) * Rat::pow2(-(m as i64))
}

/// 2^-q for dyadic q (a multiple of 2^-m), to absolute accuracy 2^-out_prec.
/// Splits q = n + b/2^m and evaluates 2^(-b/2^m) as a product of iterated
/// square roots of 1/2.
fn pow2_neg_dyadic(q: &Rat, m: u32, out_prec: u32) -> Rat {
    let n = q.floor_int();
    let frac = q - &Rat::from_bigint(n.clone());
    let b = (frac * Rat::pow2(m as i64)).floor_int();
    let shift: u32 = if n.is_negative() {
        (-&n).to_u32().expect("pow2_neg exponent bound")
    } else {
        0
    };
    // per-factor error <= 4*2^-p, <= m factors in [1/2,1], plus m rounding
    // floors: total <= 5m*2^-p <= 2^-(out_prec+shift+3)
    let p = out_prec + shift + m + 6;
    let mut factor = Rat::one();
    let mut cur = Rat::new(1, 2);
    let mut any = false;
    for t in 1..=m {
        cur = sqrt_rat_approx(&cur, p);
        if bigint_bit(&b, (m - t) as u64) {
            factor = (factor * &cur).dyadic_floor(p);
            any = true;
        }
    }
    if !any {
        factor = Rat::one();
    }
    let e = n.to_i64().expect("pow2_neg exponent bound");
    factor * Rat::pow2(-e)
}

fn bigint_bit(n: &BigInt, i: u64) -> bool {
    if n.is_negative() {
        panic!("bit probe on negative integer");
    }
    n.magnitude().bit(i)
}

/// Exact floor(log2 t) for rational t > 0.
fn floor_log2(t: &Rat) -> i64 {
    debug_assert!(t.is_positive());
    let mut e = t.numer().bits() as i64 - t.denom().bits() as i64;
    while Rat::pow2(e + 1) <= *t {
        e += 1;
    }
    while Rat::pow2(e) > *t {
        e -= 1;
    }
    e
}

/// |result - (-log2 t)| <= 2^-prec for rational t > 0. Normalizes t = 2^e * mu
/// with mu in [1,2) and extracts bits of log2(mu) by interval squaring with
/// outward dyadic rounding; an interval straddling 2 certifies the remaining
/// tail is 2^-(i+1) up to the interval width, so stopping early stays sound.
fn neg_log2_rat(t: &Rat, prec: u32) -> Rat {
    if let Some(e) = t.as_pow2() {
        return Rat::from_int(-e);
    }
    let e = floor_log2(t);
    let mu = t * Rat::pow2(-e);
    let n = prec + 2;
    let p = 2 * n + 8;
    let two = Rat::from_int(2);
    let half = Rat::new(1, 2);
    let mut lo = mu.clone();
    let mut hi = mu;
    let mut v = Rat::zero();
    for i in 1..=n {
        lo = (&lo * &lo).dyadic_floor(p);
        hi = (&hi * &hi).dyadic_ceil(p);
        if hi < two {
            // bit 0
        } else if lo >= two {
            v = v + Rat::pow2(-(i as i64));
            lo = lo * &half;
            hi = hi * &half;
        } else {
            return Rat::from_int(-e) - (v + Rat::pow2(-(i as i64 + 1)));
        }
    }
    Rat::from_int(-e) - v
}

/// Three-valued comparison at resolution 2^-k. Strict verdicts are always
/// true; Indistinguishable certifies |x - y| <= 2^-k. A gap above 2^(1-k)
/// always produces a strict verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoftOrd {
    Less,
    Greater,
    Indistinguishable,
}

pub fn soft_compare(x: &CReal, y: &CReal, k: u32) -> Result<SoftOrd> {
    let a = x.approx(k + 2)?;
    let b = y.approx(k + 2)?;
    let tol = Rat::pow2(-(k as i64 + 1));
    let d = a - b;
    if d > tol {
        Ok(SoftOrd::Greater)
    } else if d < -&tol {
        Ok(SoftOrd::Less)
    } else {
        Ok(SoftOrd::Indistinguishable)
    }
}

struct Trisect {
    lo: Rat,
    hi: Rat,
    fuel: u64,
}

/// Preimage of y under a strictly monotone continuous f on [lo, hi],
/// located by trisection. Each step compares f at the two inner cut points
/// against y with rising resolution; strict monotonicity guarantees at least
/// one comparison eventually resolves, shrinking the bracket by 2/3. Before an
/// approximant is released the residual |f(mid) - y| is soft checked, so a
/// target outside f([lo, hi]) burns fuel and reports a budget error instead of
/// silently converging to an endpoint.
pub fn monotone_inverse<F>(
    f: F,
    y: &CReal,
    lo: &Rat,
    hi: &Rat,
    increasing: bool,
    budget: u64,
) -> Result<CReal>
where
    F: Fn(&Rat) -> Result<CReal> + Send + Sync + 'static,
{
    if lo >= hi {
        return Err(Error::contract("monotone_inverse", "empty bracket"));
    }
    let state = Mutex::new(Trisect {
        lo: lo.clone(),
        hi: hi.clone(),
        fuel: budget,
    });
    let y = y.clone();
    Ok(CReal::from_fn(move |k| {
        let mut st = state.lock().unwrap();
        let target = Rat::pow2(-(k as i64 + 1));
        loop {
            if &st.hi - &st.lo <= target {
                let mid = (&st.lo + &st.hi) * Rat::new(1, 2);
                if soft_compare(&f(&mid)?, &y, k + 2)? == SoftOrd::Indistinguishable {
                    return Ok(mid);
                }
            }
            let third = (&st.hi - &st.lo) * Rat::new(1, 3);
            let m1 = &st.lo + &third;
            let m2 = &st.hi - &third;
            let f1 = f(&m1)?;
            let f2 = f(&m2)?;
            let mut j: u32 = 2;
            loop {
                if st.fuel == 0 {
                    return Err(Error::budget(
                        "monotone_inverse",
                        "bracket refinement fuel exhausted",
                    ));
                }
                st.fuel -= 1;
                let c1 = soft_compare(&f1, &y, j)?;
                let c2 = soft_compare(&f2, &y, j)?;
                // orient verdicts so they read as "preimage is left/right of m"
                let (c1, c2) = if increasing { (c1, c2) } else { (flip(c1), flip(c2)) };
                let mut cut = false;
                if c1 == SoftOrd::Greater {
                    st.hi = m1.clone();
                    cut = true;
                } else if c2 == SoftOrd::Less {
                    st.lo = m2.clone();
                    cut = true;
                } else {
                    if c1 == SoftOrd::Less {
                        st.lo = m1.clone();
                        cut = true;
                    }
                    if c2 == SoftOrd::Greater {
                        st.hi = m2.clone();
                        cut = true;
                    }
                }
                if cut {
                    break;
                }
                j += 1;
            }
        }
    }))
}

fn flip(c: SoftOrd) -> SoftOrd {
    match c {
        SoftOrd::Less => SoftOrd::Greater,
        SoftOrd::Greater => SoftOrd::Less,
        SoftOrd::Indistinguishable => SoftOrd::Indistinguishable,
    }
}
