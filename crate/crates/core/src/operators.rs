//! Operator toolbox over normed presentations: modified sequences and limits,
//! the two-branch Case operator, the accumulation operator (exact and the
//! two-algorithm approximate race), its probability-distribution variant, and
//! limits of fast-converging distribution streams.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use crate::creal::{clog2, soft_compare, CReal, SoftOrd};
use crate::error::{Error, Result};
use crate::qvec::QVec;
use crate::rat::Rat;
use crate::spaces::{MetricSpace, Point};

/// Linear-space operations with an exact rational norm. Implementations are
/// value witnesses (possibly carrying data, like a compiled formula space)
/// rather than methods on the element type, so one element type can serve
/// several norms.
pub trait BanachOps: Send + Sync {
    type Elem: Clone + PartialEq + std::fmt::Debug + Send + Sync + 'static;

    fn zero(&self) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn scale(&self, c: &Rat, a: &Self::Elem) -> Self::Elem;
    fn norm(&self, a: &Self::Elem) -> Rat;

    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.add(a, &self.neg(b))
    }
}

/// The rational line with absolute value.
pub struct RealOps;

impl BanachOps for RealOps {
    type Elem = Rat;

    fn zero(&self) -> Rat {
        Rat::zero()
    }
    fn add(&self, a: &Rat, b: &Rat) -> Rat {
        a + b
    }
    fn neg(&self, a: &Rat) -> Rat {
        -a
    }
    fn scale(&self, c: &Rat, a: &Rat) -> Rat {
        c * a
    }
    fn norm(&self, a: &Rat) -> Rat {
        a.abs()
    }
}

/// Finitely supported vectors under a compiled formula norm.
pub struct PairOps(pub crate::normlab::NormedPair);

impl BanachOps for PairOps {
    type Elem = QVec;

    fn zero(&self) -> QVec {
        QVec::zero()
    }
    fn add(&self, a: &QVec, b: &QVec) -> QVec {
        a.add(b)
    }
    fn neg(&self, a: &QVec) -> QVec {
        a.neg()
    }
    fn scale(&self, c: &Rat, a: &QVec) -> QVec {
        a.scale(c)
    }
    fn norm(&self, a: &QVec) -> Rat {
        self.0.norm(a)
    }
}

/// A point of the completion of a normed presentation: approx(k) returns an
/// element within 2^-k of the limit. Memoized; a finer cached answer serves a
/// coarser request.
pub struct BanachPoint<B: BanachOps> {
    inner: Arc<BpInner<B>>,
}

struct BpInner<B: BanachOps> {
    approx: Box<dyn Fn(u32) -> Result<B::Elem> + Send + Sync>,
    memo: Mutex<BTreeMap<u32, B::Elem>>,
}

impl<B: BanachOps> Clone for BanachPoint<B> {
    fn clone(&self) -> Self {
        BanachPoint { inner: self.inner.clone() }
    }
}

impl<B: BanachOps + 'static> BanachPoint<B> {
    pub fn from_fn(f: impl Fn(u32) -> Result<B::Elem> + Send + Sync + 'static) -> Self {
        BanachPoint {
            inner: Arc::new(BpInner {
                approx: Box::new(f),
                memo: Mutex::new(BTreeMap::new()),
            }),
        }
    }

    pub fn constant(v: B::Elem) -> Self {
        BanachPoint::from_fn(move |_| Ok(v.clone()))
    }

    pub fn approx(&self, k: u32) -> Result<B::Elem> {
        if let Some((_, v)) = self.inner.memo.lock().unwrap().range(k..).next() {
            return Ok(v.clone());
        }
        let v = (self.inner.approx)(k)?;
        self.inner.memo.lock().unwrap().insert(k, v.clone());
        Ok(v)
    }
}

impl BanachPoint<RealOps> {
    pub fn from_creal(x: &CReal) -> Self {
        let x = x.clone();
        BanachPoint::from_fn(move |k| x.approx(k))
    }

    pub fn to_creal(&self) -> CReal {
        let p = self.clone();
        CReal::from_fn(move |k| p.approx(k))
    }
}

/// One step of the modified-sequence recursion on exact elements: move from
/// `cur` toward `next`, the full way if the gap is within 2^-k, else exactly
/// 2^-k of the way in norm. A gap of exactly 2^-k takes the full step (both
/// rules agree there).
fn mod_step<B: BanachOps>(ops: &B, cur: &B::Elem, next: &B::Elem, k: u32) -> B::Elem {
    let diff = ops.sub(next, cur);
    let n = ops.norm(&diff);
    let bound = Rat::pow2(-(k as i64));
    if n <= bound {
        next.clone()
    } else {
        let lambda = bound / n;
        ops.add(cur, &ops.scale(&lambda, &diff))
    }
}

/// Exact modified sequence of an exact prefix: output i is w^m_i, and
/// consecutive outputs are at most 2^-i apart in norm by construction.
pub fn modified_prefix<B: BanachOps>(ops: &B, w: &[B::Elem]) -> Vec<B::Elem> {
    let mut out: Vec<B::Elem> = Vec::with_capacity(w.len());
    for (k, next) in w.iter().enumerate() {
        match out.last() {
            None => out.push(next.clone()),
            Some(cur) => out.push(mod_step(ops, cur, next, k as u32 - 1)),
        }
    }
    out
}

/// Modified limit of an exact element stream: total, and the identity on
/// fast-converging streams. The point's approx(k) reads w^m_{k+2}, which is
/// within 2^-(k+1) of the limit of the modified sequence.
pub fn ml_exact<B: BanachOps + 'static>(
    ops: Arc<B>,
    w: Arc<dyn Fn(u64) -> Result<B::Elem> + Send + Sync>,
) -> BanachPoint<B> {
    let state: Mutex<Vec<B::Elem>> = Mutex::new(Vec::new());
    BanachPoint::from_fn(move |k| {
        let mut st = state.lock().unwrap();
        while st.len() < k as usize + 3 {
            let i = st.len();
            let next = w(i as u64)?;
            let v = match st.last() {
                None => next,
                Some(cur) => mod_step(ops.as_ref(), cur, &next, i as u32 - 1),
            };
            st.push(v);
        }
        Ok(st[k as usize + 2].clone())
    })
}

/// Modified sequence over the reals. On the line the norm-clipped step is a
/// symmetric clamp, so the recursion stays exact in the CReal graph even for
/// inexact inputs: w^m_{k+1} = w^m_k + clamp(w_{k+1} - w^m_k, +-2^-k).
pub fn modified_real_prefix(w: &[CReal]) -> Vec<CReal> {
    let mut out: Vec<CReal> = Vec::with_capacity(w.len());
    for (k, next) in w.iter().enumerate() {
        match out.last() {
            None => out.push(next.clone()),
            Some(cur) => {
                let step = next.sub(cur).clamp_sym(&Rat::pow2(-(k as i64 - 1)));
                out.push(cur.add(&step));
            }
        }
    }
    out
}

/// Modified limit of a real stream; total for any stream the budget reaches.
pub fn ml_real(w: Arc<dyn Fn(u64) -> Result<CReal> + Send + Sync>) -> CReal {
    let state: Mutex<Vec<CReal>> = Mutex::new(Vec::new());
    CReal::from_fn(move |k| {
        let wm = {
            let mut st = state.lock().unwrap();
            while st.len() < k as usize + 3 {
                let i = st.len();
                let next = w(i as u64)?;
                let v = match st.last() {
                    None => next,
                    Some(cur) => {
                        let step = next.sub(cur).clamp_sym(&Rat::pow2(-(i as i64 - 1)));
                        cur.add(&step)
                    }
                };
                st.push(v);
            }
            st[k as usize + 2].clone()
        };
        wm.approx(k + 1)
    })
}

/// Two-branch Case operator on the line: evaluates to below(x) on x < y, to
/// above(x) on x > y, and at the seam to their common value; genuinely
/// undefined (budget error) only when the branches disagree at x = y.
///
/// Each precision query races a comparison of x against y at rising precision
/// with attempts to read both branches; a decisive comparison routes to that
/// branch (propagating its errors), while branch errors during the race are
/// treated as "not yet" since the comparison may still resolve.
pub fn case_op(
    below: Arc<dyn Fn(&CReal) -> Result<CReal> + Send + Sync>,
    above: Arc<dyn Fn(&CReal) -> Result<CReal> + Send + Sync>,
    y: CReal,
    budget: u32,
) -> impl Fn(&CReal) -> CReal {
    move |x: &CReal| {
        let (below, above, y, x) = (below.clone(), above.clone(), y.clone(), x.clone());
        CReal::from_fn(move |k| {
            for j in 0..budget {
                match soft_compare(&x, &y, j)? {
                    SoftOrd::Less => return below(&x)?.approx(k),
                    SoftOrd::Greater => return above(&x)?.approx(k),
                    SoftOrd::Indistinguishable => {}
                }
                // near the seam: if both branches answer and agree, either
                // answer is within contract no matter which side x is on
                if let (Ok(fa), Ok(ga)) = (below(&x), above(&x)) {
                    if let (Ok(a), Ok(b)) = (fa.approx(k + 2), ga.approx(k + 2)) {
                        if (&a - &b).abs() <= Rat::pow2(-(k as i64 + 1)) {
                            return Ok(a);
                        }
                    }
                }
            }
            Err(Error::budget(
                "case",
                "branches disagree at an indistinguishable scrutinee",
            ))
        })
    }
}

/// Case for points of the space: routes like the scalar version, agreeing
/// branches near the seam measured in the norm.
pub fn case_elem<B: BanachOps + 'static>(
    ops: Arc<B>,
    below: BanachPoint<B>,
    above: BanachPoint<B>,
    y: CReal,
    x: CReal,
    budget: u32,
) -> BanachPoint<B> {
    BanachPoint::from_fn(move |k| {
        for j in 0..budget {
            match soft_compare(&x, &y, j)? {
                SoftOrd::Less => return below.approx(k),
                SoftOrd::Greater => return above.approx(k),
                SoftOrd::Indistinguishable => {}
            }
            if let (Ok(a), Ok(b)) = (below.approx(k + 2), above.approx(k + 2)) {
                if ops.norm(&ops.sub(&a, &b)) <= Rat::pow2(-(k as i64 + 1)) {
                    return Ok(a);
                }
            }
        }
        Err(Error::budget(
            "case",
            "branches disagree at an indistinguishable scrutinee",
        ))
    })
}

/// Pointwise sum of two points.
pub fn add_point<B: BanachOps + 'static>(
    ops: Arc<B>,
    a: &BanachPoint<B>,
    b: &BanachPoint<B>,
) -> BanachPoint<B> {
    let (a, b) = (a.clone(), b.clone());
    BanachPoint::from_fn(move |k| Ok(ops.add(&a.approx(k + 1)?, &b.approx(k + 1)?)))
}

/// Scalar multiple of a point by a real scalar; both factors are read at a
/// precision scaled by a bound on the other.
pub fn smul_point<B: BanachOps + 'static>(
    ops: Arc<B>,
    r: &CReal,
    m: &BanachPoint<B>,
) -> BanachPoint<B> {
    let (r, m) = (r.clone(), m.clone());
    BanachPoint::from_fn(move |k| {
        let mb = ops.norm(&m.approx(0)?) + Rat::one();
        let rb = r.approx(0)?.abs() + Rat::one();
        let rr = r.approx(k + 3 + mb.mag_bits())?;
        let mm = m.approx(k + 3 + rb.mag_bits())?;
        Ok(ops.scale(&rr, &mm))
    })
}

/// Norm of a point as a real; the norm is 1-Lipschitz.
pub fn norm_point<B: BanachOps + 'static>(ops: Arc<B>, m: &BanachPoint<B>) -> CReal {
    let m = m.clone();
    CReal::from_fn(move |k| Ok(ops.norm(&m.approx(k)?)))
}

/// Coefficients of the exact accumulation: the prefix of f up to (excluding)
/// the first index n where the running sum exceeds 1, followed by the
/// leftover 1 - sum. Nonnegative, sums to exactly 1, at most the final
/// coefficient falls short of its f value.
pub fn acc_exact_coeffs(f: &[Rat]) -> Result<Vec<Rat>> {
    for q in f {
        if q.is_negative() {
            return Err(Error::contract("acc", "negative mass"));
        }
    }
    let mut sum = Rat::zero();
    for (n, q) in f.iter().enumerate() {
        let next = &sum + q;
        if next > Rat::one() {
            let mut coeffs: Vec<Rat> = f[..n].to_vec();
            coeffs.push(Rat::one() - sum);
            return Ok(coeffs);
        }
        sum = next;
    }
    Err(Error::InsufficientMass(format!(
        "mass {sum} over {} entries never exceeds 1",
        f.len()
    )))
}

/// Exact accumulation of rational masses against a list of elements.
pub fn acc_exact<B: BanachOps>(ops: &B, f: &[Rat], g: &[B::Elem]) -> Result<B::Elem> {
    let coeffs = acc_exact_coeffs(f)?;
    if g.len() < coeffs.len() {
        return Err(Error::contract(
            "acc",
            "element list shorter than the accumulated prefix",
        ));
    }
    let mut out = ops.zero();
    for (c, v) in coeffs.iter().zip(g) {
        out = ops.add(&out, &ops.scale(c, v));
    }
    Ok(out)
}

/// Certified strict bound helpers: approx(j) +- 2^-j brackets the value.
fn certified_below(x: &CReal, bound: &Rat, j: u32) -> Result<bool> {
    Ok(x.approx(j)? + Rat::pow2(-(j as i64)) < *bound)
}

fn certified_above(x: &CReal, bound: &Rat, j: u32) -> Result<bool> {
    Ok(x.approx(j)? - Rat::pow2(-(j as i64)) > *bound)
}

/// Evaluate sum of f(i) g(i) for i < m plus (1 - sum of f(i), i < m) g(m),
/// within 2^-(k+1), given a rational bound elem_bound >= every |g(i)| used.
fn acc_combine<B: BanachOps>(
    ops: &B,
    f: &dyn Fn(u64) -> CReal,
    g: &dyn Fn(u64) -> BanachPoint<B>,
    m: u64,
    k: u32,
    elem_bound: &Rat,
) -> Result<B::Elem>
where
    B: 'static,
{
    let terms = m as usize + 2;
    let p = k + 3 + clog2(terms) + elem_bound.mag_bits();
    let q = k + 3;
    let mut coeffs = Vec::with_capacity(terms);
    let mut csum = Rat::zero();
    for i in 0..m {
        let c = f(i).approx(p)?;
        csum = csum + &c;
        coeffs.push(c);
    }
    coeffs.push(Rat::one() - csum);
    let mut out = ops.zero();
    for (i, c) in coeffs.iter().enumerate() {
        let v = g(i as u64).approx(q)?;
        out = ops.add(&out, &ops.scale(c, &v));
    }
    Ok(out)
}

/// Approximate accumulation: an element within 2^-k of the accumulated value,
/// computed by a deterministic round-robin race of two searches.
///
/// The first search certifies a strict crossing: an n with the partial sum
/// below 1 before it and above 1 through it. It terminates whenever no
/// partial sum equals 1 exactly.
///
/// The second search handles the boundary: it finds a certified over-1 index
/// n-hat and an element-norm bound N, then hunts for m1 <= n1 <= n-hat with
/// the sum below 1 before m1 (or m1 = 0), the sum through m1 within eps/N of
/// 1, the mass strictly between m1 and n1 below eps/N, and the sum through n1
/// above 1, where eps = 2^-(k+3). Treating the crossing as if it happened at
/// m1 then misplaces at most 3 eps of mass onto elements of norm at most N.
/// The mass window differs from overlapping endpoint conventions seen
/// elsewhere: it must exclude both m1 and n1, or a sum sitting exactly at 1
/// admits no valid pair at all.
pub fn acc_approx<B: BanachOps + 'static>(
    ops: &B,
    f: &dyn Fn(u64) -> CReal,
    g: &dyn Fn(u64) -> BanachPoint<B>,
    k: u32,
    budget: u64,
) -> Result<B::Elem> {
    let one = Rat::one();
    // partial sums S(n) = sum of f(i) for i <= n, built lazily and shared
    let mut sums: Vec<CReal> = Vec::new();
    let extend_to = |sums: &mut Vec<CReal>, n: usize| {
        while sums.len() <= n {
            let i = sums.len() as u64;
            let s = match sums.last() {
                None => f(0),
                Some(prev) => prev.add(&f(i)),
            };
            sums.push(s);
        }
    };
    // algorithm-2 state
    let mut nhat: Option<u64> = None;
    let mut elem_bound: Option<Rat> = None;

    for t in 0..budget {
        let s = (t / 2) as u32;
        if t % 2 == 0 {
            // algorithm 1: strict crossing search at precision s
            extend_to(&mut sums, s as usize);
            for n in 0..=s as usize {
                let below_ok = n == 0 || certified_below(&sums[n - 1], &one, s)?;
                if below_ok && certified_above(&sums[n], &one, s)? {
                    let bound = (0..=n as u64)
                        .map(|i| {
                            let v = g(i).approx(2)?;
                            Ok(ops.norm(&v) + Rat::one())
                        })
                        .try_fold(Rat::one(), |a: Rat, b: Result<Rat>| Ok(a.max(b?)))?;
                    return acc_combine(ops, f, g, n as u64, k, &bound);
                }
            }
        } else {
            // algorithm 2, phase 1: certify any over-1 index and bound norms
            if nhat.is_none() {
                extend_to(&mut sums, s as usize);
                for n in 0..=s as usize {
                    if certified_above(&sums[n], &one, s)? {
                        let mut b = Rat::one();
                        for i in 0..=n as u64 {
                            let v = g(i).approx(2)?;
                            b = b.max(ops.norm(&v) + Rat::one());
                        }
                        nhat = Some(n as u64);
                        elem_bound = Some(b);
                        break;
                    }
                }
            }
            // algorithm 2, phase 2: boundary pair search at precision s
            if let (Some(nh), Some(nb)) = (&nhat, &elem_bound) {
                let eps_over_n = Rat::pow2(-(k as i64 + 3)) / nb.clone();
                extend_to(&mut sums, *nh as usize);
                'pairs: for m1 in 0..=*nh {
                    if m1 > 0 && !certified_below(&sums[m1 as usize - 1], &one, s)? {
                        continue;
                    }
                    let dev = sums[m1 as usize].add_rat(&-Rat::one()).abs();
                    if !certified_below(&dev, &eps_over_n, s)? {
                        continue;
                    }
                    for n1 in m1..=*nh {
                        if !certified_above(&sums[n1 as usize], &one, s)? {
                            continue;
                        }
                        // mass strictly between m1 and n1
                        let mid = if n1 > m1 + 1 {
                            sums[n1 as usize - 1].sub(&sums[m1 as usize])
                        } else {
                            CReal::zero()
                        };
                        if !certified_below(&mid, &eps_over_n, s)? {
                            continue 'pairs;
                        }
                        return acc_combine(ops, f, g, m1, k, nb);
                    }
                }
            }
        }
    }
    Err(Error::budget(
        "acc",
        "no crossing certified within budget (total mass may be <= 1)",
    ))
}

/// A finitely supported probability distribution over natural indices.
#[derive(Clone)]
pub struct ProbDist {
    /// (index, weight) pairs, strictly increasing in index.
    pub weights: Vec<(u64, CReal)>,
}

impl std::fmt::Debug for ProbDist {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let idx: Vec<u64> = self.weights.iter().map(|(i, _)| *i).collect();
        write!(f, "ProbDist over {idx:?}")
    }
}

impl ProbDist {
    pub fn point_mass(m: u64) -> ProbDist {
        ProbDist { weights: vec![(m, CReal::one())] }
    }

    pub fn mass(&self) -> CReal {
        let terms: Vec<CReal> = self.weights.iter().map(|(_, w)| w.clone()).collect();
        CReal::sum_slice(&terms)
    }

    pub fn weight(&self, m: u64) -> CReal {
        self.weights
            .iter()
            .find(|(i, _)| *i == m)
            .map(|(_, w)| w.clone())
            .unwrap_or_else(CReal::zero)
    }
}

/// Distribution-valued accumulation: masses f accumulate onto the labels g
/// until the first certified crossing; the crossing label receives exactly
/// the leftover. The leftover attaches to the label of the crossing index,
/// g(n), not to the label equal to the index.
pub fn acc_star(
    f: &dyn Fn(u64) -> CReal,
    g: &dyn Fn(u64) -> u64,
    budget: u64,
) -> Result<ProbDist> {
    // exact fast path: scan exact partial sums
    let mut exact_prefix: Vec<Rat> = Vec::new();
    let mut all_exact = true;
    let mut sum = Rat::zero();
    let mut crossing: Option<u64> = None;
    for i in 0..budget {
        match f(i).exact_value() {
            Some(q) => {
                if q.is_negative() {
                    return Err(Error::contract("acc_star", "negative mass"));
                }
                sum = sum + &q;
                exact_prefix.push(q);
                if sum > Rat::one() {
                    crossing = Some(i);
                    break;
                }
            }
            None => {
                all_exact = false;
                break;
            }
        }
    }
    let n = if all_exact {
        match crossing {
            Some(n) => n,
            None => {
                return Err(Error::budget(
                    "acc_star",
                    "exact mass never exceeds 1 within budget",
                ))
            }
        }
    } else {
        // minimal certified crossing: every earlier prefix strictly below 1
        let mut sums: Vec<CReal> = Vec::new();
        let mut found: Option<u64> = None;
        'outer: for j in 1..64u32 {
            while sums.len() <= j as usize {
                let i = sums.len() as u64;
                let s = match sums.last() {
                    None => f(0),
                    Some(prev) => prev.add(&f(i)),
                };
                sums.push(s);
            }
            if (j as u64) * (j as u64) > budget {
                break;
            }
            for n in 0..=j as usize {
                let ok_min =
                    (0..n).try_fold(true, |acc, i| -> Result<bool> {
                        Ok(acc && certified_below(&sums[i], &Rat::one(), j)?)
                    })?;
                if ok_min && certified_above(&sums[n], &Rat::one(), j)? {
                    found = Some(n as u64);
                    break 'outer;
                }
            }
        }
        match found {
            Some(n) => n,
            None => {
                return Err(Error::budget(
                    "acc_star",
                    "no minimal crossing certified within budget",
                ))
            }
        }
    };
    // weights: for m != g(n), the sum of f(i) with i < n and g(i) = m;
    // the label g(n) additionally receives 1 - sum of f(i), i < n
    let mut pre: Vec<CReal> = Vec::new();
    for i in 0..n {
        pre.push(f(i));
    }
    let prefix_sum = CReal::sum_slice(&pre);
    let leftover = CReal::one().sub(&prefix_sum);
    let mut by_label: BTreeMap<u64, Vec<CReal>> = BTreeMap::new();
    for (i, w) in pre.iter().enumerate() {
        by_label.entry(g(i as u64)).or_default().push(w.clone());
    }
    by_label.entry(g(n)).or_default().push(leftover);
    let weights = by_label
        .into_iter()
        .map(|(m, ws)| (m, CReal::sum_slice(&ws)))
        .collect();
    Ok(ProbDist { weights })
}

/// Limit of a fast-converging stream of distributions over a space's dense
/// sequence: at each level pick the smallest index whose weight certifies
/// positive, and read the dense points along that selection. The point
/// machinery validates the step modulus of the selected elements.
pub fn prob_fast_limit(
    space: Arc<dyn MetricSpace>,
    mus: Arc<dyn Fn(u64) -> Result<ProbDist> + Send + Sync>,
) -> Point {
    let sp = space.clone();
    Point::from_fn(space, move |n| {
        let mu = mus(n as u64)?;
        for (idx, w) in &mu.weights {
            // certified positive at a precision tied to the level
            for j in 2..16u32 {
                let a = w.approx(j)?;
                if &a - Rat::pow2(-(j as i64)) > Rat::zero() {
                    return Ok(sp.dense(*idx as usize));
                }
                if &a + Rat::pow2(-(j as i64)) < Rat::zero() {
                    break;
                }
            }
        }
        Err(Error::contract(
            "prob_limit",
            "no certified positive weight at this level",
        ))
    })
}
