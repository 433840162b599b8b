//! Internal computability: a combinator language over a metric space and a
//! Banach space, and a compiler turning an externally given stream
//! transformer into a combinator evaluator.
//!
//! The external function is handed over as a total monotone map on finite
//! sequences: an input prefix enumerating dense points that approach x maps
//! to an output prefix approaching f(x). The compiler evaluates f at x by
//! weighting candidate input prefixes with tent functions measuring how well
//! their entries match x, accumulating the tail entries of their outputs
//! against those weights, and taking the modified limit over precision.

pub mod ast;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::creal::CReal;
use crate::enumerate::{rat_at, rat_index};
use crate::error::{Error, Result};
use crate::operators::{acc_approx, ml_exact, BanachOps, BanachPoint};
use crate::rat::Rat;
use crate::spaces::{MetricSpace, Point};

/// A finite sequence of naturals; the initial-segment order makes the set of
/// these a tree, and the numeric encoding is bijective.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SeqNum(pub Vec<u64>);

fn cantor_pair(a: &BigUint, b: &BigUint) -> BigUint {
    let s = a + b;
    (&s * (&s + 1u32)) / 2u32 + b
}

fn cantor_unpair(t: &BigUint) -> (BigUint, BigUint) {
    let w = ((t * 8u32 + 1u32).sqrt() - 1u32) / 2u32;
    let tri = (&w * (&w + 1u32)) / 2u32;
    let b = t - tri;
    let a = &w - &b;
    (a, b)
}

impl SeqNum {
    pub fn empty() -> SeqNum {
        SeqNum(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[u64] {
        &self.0
    }

    /// Strict initial segment.
    pub fn is_prefix_of(&self, other: &SeqNum) -> bool {
        self.0.len() < other.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Initial segment or equal.
    pub fn le_prefix(&self, other: &SeqNum) -> bool {
        self.0.len() <= other.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Bijective sequence number: the empty sequence is 0, and a head s with
    /// an encoded tail c becomes pair(s, c) + 1.
    pub fn encode(&self) -> BigUint {
        let mut acc = BigUint::zero();
        for s in self.0.iter().rev() {
            acc = cantor_pair(&BigUint::from(*s), &acc) + BigUint::one();
        }
        acc
    }

    pub fn decode(code: &BigUint) -> Result<SeqNum> {
        let mut out = Vec::new();
        let mut n = code.clone();
        while !n.is_zero() {
            let (a, rest) = cantor_unpair(&(n - BigUint::one()));
            let s = a.to_u64().ok_or_else(|| {
                Error::contract("seqnum", "sequence entry exceeds the machine range")
            })?;
            out.push(s);
            n = rest;
        }
        Ok(SeqNum(out))
    }
}

impl fmt::Display for SeqNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

/// A total map on finite sequences promised to respect the prefix order:
/// extending the input only ever extends the output. Queries are memoized
/// and every new answer is spot-checked against all previous ones; a
/// violation is a contract error, since downstream accumulation silently
/// depends on the promise.
pub struct PrefixMap {
    f: Box<dyn Fn(&SeqNum) -> SeqNum + Send + Sync>,
    memo: Mutex<BTreeMap<Vec<u64>, SeqNum>>,
}

impl PrefixMap {
    pub fn new(f: impl Fn(&SeqNum) -> SeqNum + Send + Sync + 'static) -> PrefixMap {
        PrefixMap {
            f: Box::new(f),
            memo: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn query(&self, s: &SeqNum) -> Result<SeqNum> {
        let mut memo = self.memo.lock().unwrap();
        if let Some(out) = memo.get(&s.0) {
            return Ok(out.clone());
        }
        let out = (self.f)(s);
        for (key, val) in memo.iter() {
            let key = SeqNum(key.clone());
            if key.le_prefix(s) && !val.le_prefix(&out) {
                return Err(Error::contract(
                    "prefix_map",
                    format!("extending {key} to {s} did not extend the output"),
                ));
            }
            if s.le_prefix(&key) && !out.le_prefix(val) {
                return Err(Error::contract(
                    "prefix_map",
                    format!("extending {s} to {key} did not extend the output"),
                ));
            }
        }
        memo.insert(s.0.clone(), out.clone());
        Ok(out)
    }
}

/// The identity transformer: input prefixes for x are already output
/// prefixes for x.
pub fn prefix_map_id() -> PrefixMap {
    PrefixMap::new(|s| s.clone())
}

/// Constant function: every input entry pledges one more output entry, all
/// of them the index of the constant.
pub fn prefix_map_const(q: &Rat) -> PrefixMap {
    let idx = rat_index(q);
    PrefixMap::new(move |s| SeqNum(vec![idx; s.len()]))
}

/// x -> a*x + b over the rational dense sequence of the line. The output is
/// shifted so the scaled input tolerance still fits the output tolerance:
/// entry m is computed from input entry m + shift where 2^shift bounds |a|.
pub fn prefix_map_affine(a: &Rat, b: &Rat) -> PrefixMap {
    let shift = a.abs().mag_bits() as usize;
    let (a, b) = (a.clone(), b.clone());
    PrefixMap::new(move |s| {
        let n = s.len().saturating_sub(shift);
        let out = (0..n)
            .map(|m| rat_index(&(&a * rat_at(s.0[m + shift]) + &b)))
            .collect();
        SeqNum(out)
    })
}

/// Evaluation context: the source space with its dense sequence, the target
/// space carried by its exact dense operations, and the step cap shared by
/// the searching operators.
pub struct EvalCtx<B: BanachOps + 'static> {
    pub space: Arc<dyn MetricSpace>,
    pub ops: Arc<B>,
    pub target_elem: Arc<dyn Fn(u64) -> B::Elem + Send + Sync>,
    pub budget: u64,
}

/// How well the dense point indexed by a sequence entry matches x at depth
/// i: 1 within 2^-(i+3), 0 beyond 2^-(i+2), the linear ramp in between.
pub fn tent(space: &Arc<dyn MetricSpace>, x: &Point, i: usize, entry: u64) -> CReal {
    let d = x.dist_to_elem(&space.dense(entry as usize));
    tent_of_dist(&d, i)
}

fn tent_of_dist(d: &CReal, i: usize) -> CReal {
    CReal::from_int(2)
        .sub(&d.scale(&Rat::pow2(i as i64 + 3)))
        .clamp(&Rat::zero(), &Rat::one())
}

/// Product of the per-entry tents: how strongly the whole prefix matches x.
/// Values in [0,1]; positive only when every entry is close at its depth.
pub fn prefix_weight(space: &Arc<dyn MetricSpace>, x: &Point, sigma: &SeqNum) -> CReal {
    let mut w = CReal::one();
    for (i, s) in sigma.entries().iter().enumerate() {
        w = w.mul(&tent(space, x, i, *s));
    }
    w
}

/// matching the tent acceptance threshold: the prune certifies tents that
/// are zero beyond doubt at this fixed precision, keeping the enumeration
/// deterministic
const PRUNE_PREC: u32 = 10;
/// grid candidates: entries below this bound
const GRID_BASE: usize = 4;
/// grid candidates: lengths up to this bound
const GRID_LEN: usize = 4;

fn bounded_grid() -> Vec<SeqNum> {
    let mut out = vec![SeqNum::empty()];
    for len in 1..=GRID_LEN {
        for code in 0..GRID_BASE.pow(len as u32) {
            let mut s = vec![0u64; len];
            let mut c = code;
            for p in (0..len).rev() {
                s[p] = (c % GRID_BASE) as u64;
                c /= GRID_BASE;
            }
            out.push(SeqNum(s));
        }
    }
    out
}

/// Deterministic enumeration of candidate input prefixes for x whose
/// outputs already have the required length: a fixed length-lexicographic
/// grid of small prefixes (with certainly-mismatching ones pruned), followed
/// by the chain of prefixes built from x's own certified approximants. The
/// chain guarantees the enumeration carries full-weight candidates, which
/// the accumulation needs to find total mass above 1.
pub struct CandidateStream {
    space: Arc<dyn MetricSpace>,
    fhat: Arc<PrefixMap>,
    min_len: usize,
    x: Point,
    budget: u64,
    state: Mutex<StreamState>,
    dists: Mutex<BTreeMap<u64, CReal>>,
}

struct StreamState {
    grid: Vec<SeqNum>,
    grid_pos: usize,
    chain_len: usize,
    gamma: Vec<u64>,
    accepted: Vec<SeqNum>,
}

impl CandidateStream {
    pub fn new(
        space: Arc<dyn MetricSpace>,
        fhat: Arc<PrefixMap>,
        k: u32,
        x: Point,
        budget: u64,
    ) -> CandidateStream {
        CandidateStream {
            space,
            fhat,
            min_len: k.max(1) as usize,
            x,
            budget,
            state: Mutex::new(StreamState {
                grid: bounded_grid(),
                grid_pos: 0,
                chain_len: 0,
                gamma: Vec::new(),
                accepted: Vec::new(),
            }),
            dists: Mutex::new(BTreeMap::new()),
        }
    }

    fn dist_to_entry(&self, s: u64) -> CReal {
        let mut cache = self.dists.lock().unwrap();
        cache
            .entry(s)
            .or_insert_with(|| self.x.dist_to_elem(&self.space.dense(s as usize)))
            .clone()
    }

    pub fn weight_of(&self, sigma: &SeqNum) -> CReal {
        let mut w = CReal::one();
        for (i, s) in sigma.entries().iter().enumerate() {
            w = w.mul(&tent_of_dist(&self.dist_to_entry(*s), i));
        }
        w
    }

    /// Weight of the n-th candidate.
    pub fn weight(&self, n: usize) -> Result<CReal> {
        Ok(self.weight_of(&self.sigma(n)?))
    }

    /// Output prefix of the n-th candidate.
    pub fn output(&self, n: usize) -> Result<SeqNum> {
        self.fhat.query(&self.sigma(n)?)
    }

    /// Index of the dense point the n-th candidate's output settles on: the
    /// last output entry.
    pub fn label(&self, n: usize) -> Result<u64> {
        let out = self.output(n)?;
        out.0.last().copied().ok_or_else(|| {
            Error::contract("candidates", "admitted candidate with empty output")
        })
    }

    pub fn sigma(&self, n: usize) -> Result<SeqNum> {
        loop {
            {
                let st = self.state.lock().unwrap();
                if n < st.accepted.len() {
                    return Ok(st.accepted[n].clone());
                }
            }
            self.advance()?;
        }
    }

    fn advance(&self) -> Result<()> {
        loop {
            let cand = {
                let mut st = self.state.lock().unwrap();
                if st.grid_pos < st.grid.len() {
                    st.grid_pos += 1;
                    Some(st.grid[st.grid_pos - 1].clone())
                } else {
                    None
                }
            };
            match cand {
                Some(sigma) => {
                    if self.admit(&sigma)? {
                        self.state.lock().unwrap().accepted.push(sigma);
                        return Ok(());
                    }
                }
                None => break,
            }
        }
        loop {
            let l = {
                let mut st = self.state.lock().unwrap();
                st.chain_len += 1;
                st.chain_len
            };
            if l as u64 > self.budget {
                return Err(Error::budget(
                    "candidates",
                    "no candidate of the required output length within budget",
                ));
            }
            let sigma = SeqNum(self.gamma_prefix(l)?);
            if self.fhat.query(&sigma)?.len() >= self.min_len {
                self.state.lock().unwrap().accepted.push(sigma);
                return Ok(());
            }
        }
    }

    fn admit(&self, sigma: &SeqNum) -> Result<bool> {
        if self.fhat.query(sigma)?.len() < self.min_len {
            return Ok(false);
        }
        for (i, s) in sigma.entries().iter().enumerate() {
            // unclamped tent profile; certainly nonpositive means weight 0
            let u = CReal::from_int(2).sub(&self.dist_to_entry(*s).scale(&Rat::pow2(i as i64 + 3)));
            if u.approx(PRUNE_PREC)? + Rat::pow2(-(PRUNE_PREC as i64)) <= Rat::zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// First l entries of the approximant chain: gamma(i) indexes a dense
    /// point certified within 2^-(i+4) of x, so its tent at depth i is
    /// exactly 1.
    fn gamma_prefix(&self, l: usize) -> Result<Vec<u64>> {
        let mut st = self.state.lock().unwrap();
        while st.gamma.len() < l {
            let i = st.gamma.len();
            let prec = i as u32 + 6;
            let thresh = Rat::pow2(-(i as i64 + 4));
            let tol = Rat::pow2(-(prec as i64));
            let mut found = None;
            for m in 0..self.budget {
                let d = self.x.dist_to_elem(&self.space.dense(m as usize));
                if d.approx(prec)? + &tol <= thresh {
                    found = Some(m);
                    break;
                }
            }
            match found {
                Some(m) => st.gamma.push(m),
                None => {
                    return Err(Error::budget(
                        "candidates",
                        format!("no dense point certified within 2^-{} of x", i + 4),
                    ))
                }
            }
        }
        Ok(st.gamma[..l].to_vec())
    }
}

/// The compiler from an external transformer to an evaluator.
pub struct Internalizer<B: BanachOps + 'static> {
    pub ctx: Arc<EvalCtx<B>>,
    pub fhat: Arc<PrefixMap>,
}

impl<B: BanachOps + 'static> Clone for Internalizer<B> {
    fn clone(&self) -> Self {
        Internalizer {
            ctx: self.ctx.clone(),
            fhat: self.fhat.clone(),
        }
    }
}

impl<B: BanachOps + 'static> Internalizer<B> {
    pub fn candidates(&self, k: u32, x: &Point) -> Arc<CandidateStream> {
        Arc::new(CandidateStream::new(
            self.ctx.space.clone(),
            self.fhat.clone(),
            k,
            x.clone(),
            self.ctx.budget,
        ))
    }

    /// Stage j approximation: accumulate the output labels of candidates
    /// whose outputs have length at least j+2 against their weights. Each
    /// positive-weight label is then within 2^-(j+3) of the value, so the
    /// accumulated combination is within 2^-(j+1) counting evaluation error.
    pub fn stage(&self, j: u32, x: &Point) -> Result<B::Elem> {
        let ds = self.candidates(j + 2, x);
        let target = self.ctx.target_elem.clone();
        let h = {
            let ds = ds.clone();
            move |n: u64| {
                let ds = ds.clone();
                CReal::from_fn(move |kk| ds.weight(n as usize)?.approx(kk))
            }
        };
        let g = {
            let ds = ds.clone();
            move |n: u64| {
                let ds = ds.clone();
                let target = target.clone();
                BanachPoint::from_fn(move |_| Ok((target)(ds.label(n as usize)?)))
            }
        };
        acc_approx(&*self.ctx.ops, &h, &g, j + 1, self.ctx.budget)
    }

    /// The compiled evaluator: modified limit of the stages.
    pub fn value(&self, x: &Point) -> BanachPoint<B> {
        let me = self.clone();
        let x = x.clone();
        ml_exact(
            self.ctx.ops.clone(),
            Arc::new(move |j| me.stage(j as u32, &x)),
        )
    }
}
