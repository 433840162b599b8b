//! Metric spaces presented by enumerated dense sequences, and points of their
//! completions presented by fast-converging streams.
//!
//! A space is given by a countable dense set (`dense`) together with a
//! distance that can be queried to any accuracy (`metric`). A `Point` of the
//! completion is a stream of dense elements with d(e_n, e_{n+1}) <= 2^-n, so
//! entry n is within 2^(1-n) of the limit.

use std::fmt;
use std::sync::{Arc, Mutex};

use crate::creal::CReal;
use crate::enumerate::{rat2_at, rat_at};
use crate::error::{Error, Result};
use crate::qvec::QVec;
use crate::rat::Rat;

/// One element of some space's dense sequence. A single workspace-wide enum
/// keeps equality decidable and lets products nest without extra traits.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum DenseElem {
    /// A rational, for the real line.
    Q(Rat),
    /// A rational pair, for the plane.
    Q2(Rat, Rat),
    /// A finitely supported rational vector, for sequence-space presentations.
    V(QVec),
    /// An index into an internally built countable metric space.
    U(usize),
    /// A triple (x, y, z) with z a finitely supported vector.
    Ae(Rat, Rat, QVec),
    /// An element of a binary product.
    Prod(Box<DenseElem>, Box<DenseElem>),
}

impl fmt::Display for DenseElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenseElem::Q(a) => write!(f, "{a}"),
            DenseElem::Q2(a, b) => write!(f, "({a}, {b})"),
            DenseElem::V(v) => write!(f, "{v}"),
            DenseElem::U(n) => write!(f, "u{n}"),
            DenseElem::Ae(x, y, z) => write!(f, "({x}, {y}, {z})"),
            DenseElem::Prod(a, b) => write!(f, "<{a}, {b}>"),
        }
    }
}

pub trait MetricSpace: Send + Sync {
    /// n-th element of the dense sequence.
    fn dense(&self, n: usize) -> DenseElem;
    /// |metric(a,b,k) - d(a,b)| <= 2^-k. Exact spaces ignore k.
    fn metric(&self, a: &DenseElem, b: &DenseElem, k: u32) -> Result<Rat>;
    /// Whether `metric` returns exact distances.
    fn exact(&self) -> bool;
    fn descriptor(&self) -> String;
}

fn elem_err(space: &str) -> Error {
    Error::contract("metric", format!("dense element does not belong to {space}"))
}

/// The real line: dense sequence is the zig-zag enumeration of the rationals,
/// metric is |a - b| exactly.
pub struct RSpace;

impl MetricSpace for RSpace {
    fn dense(&self, n: usize) -> DenseElem {
        DenseElem::Q(rat_at(n as u64))
    }

    fn metric(&self, a: &DenseElem, b: &DenseElem, _k: u32) -> Result<Rat> {
        match (a, b) {
            (DenseElem::Q(x), DenseElem::Q(y)) => Ok((x - y).abs()),
            _ => Err(elem_err("R")),
        }
    }

    fn exact(&self) -> bool {
        true
    }

    fn descriptor(&self) -> String {
        "R".into()
    }
}

/// The plane with the max metric. Using the box norm keeps every distance
/// rational, so the space stays exact; it is bi-Lipschitz to the Euclidean
/// plane and the distance from (a, b) to the first axis is still |b|.
pub struct R2Space;

impl MetricSpace for R2Space {
    fn dense(&self, n: usize) -> DenseElem {
        let (a, b) = rat2_at(n as u64);
        DenseElem::Q2(a, b)
    }

    fn metric(&self, a: &DenseElem, b: &DenseElem, _k: u32) -> Result<Rat> {
        match (a, b) {
            (DenseElem::Q2(x1, y1), DenseElem::Q2(x2, y2)) => {
                Ok((x1 - x2).abs().max((y1 - y2).abs()))
            }
            _ => Err(elem_err("R2")),
        }
    }

    fn exact(&self) -> bool {
        true
    }

    fn descriptor(&self) -> String {
        "R2".into()
    }
}

type ElemStream = Arc<dyn Fn(usize) -> Result<DenseElem> + Send + Sync>;

/// A point of a space's completion: a stream of dense elements with
/// d(e_n, e_{n+1}) <= 2^-n. Entries are materialized in order and the modulus
/// is spot checked as they appear; for exact spaces the check is exact, for
/// approximate metrics a violation is reported only when certified.
pub struct Point {
    space: Arc<dyn MetricSpace>,
    stream: ElemStream,
    memo: Mutex<Vec<DenseElem>>,
}

impl Clone for Point {
    fn clone(&self) -> Self {
        Point {
            space: self.space.clone(),
            stream: self.stream.clone(),
            memo: Mutex::new(self.memo.lock().unwrap().clone()),
        }
    }
}

impl Point {
    pub fn from_fn(
        space: Arc<dyn MetricSpace>,
        f: impl Fn(usize) -> Result<DenseElem> + Send + Sync + 'static,
    ) -> Point {
        Point {
            space,
            stream: Arc::new(f),
            memo: Mutex::new(Vec::new()),
        }
    }

    pub fn constant(space: Arc<dyn MetricSpace>, e: DenseElem) -> Point {
        Point::from_fn(space, move |_| Ok(e.clone()))
    }

    pub fn space(&self) -> &Arc<dyn MetricSpace> {
        &self.space
    }

    /// n-th stream entry; materializes and modulus-checks entries 0..=n.
    pub fn entry(&self, n: usize) -> Result<DenseElem> {
        let mut memo = self.memo.lock().unwrap();
        while memo.len() <= n {
            let i = memo.len();
            let e = (self.stream)(i)?;
            if i > 0 {
                let prev = &memo[i - 1];
                let step = Rat::pow2(-(i as i64 - 1));
                if self.space.exact() {
                    let d = self.space.metric(prev, &e, 0)?;
                    if d > step {
                        return Err(Error::contract(
                            "point",
                            format!("stream step {i} moved {d}, allowed {step}"),
                        ));
                    }
                } else {
                    let k = i as u32 + 3;
                    let d = self.space.metric(prev, &e, k)?;
                    if d > &step + Rat::pow2(-(k as i64)) {
                        return Err(Error::contract(
                            "point",
                            format!("stream step {i} certified above its modulus"),
                        ));
                    }
                }
            }
            memo.push(e);
        }
        Ok(memo[n].clone())
    }

    /// A dense element within 2^-k of the limit.
    pub fn approx_elem(&self, k: u32) -> Result<DenseElem> {
        self.entry(k as usize + 1)
    }

    /// Distance from the limit to a fixed dense element, as a real.
    pub fn dist_to_elem(&self, e: &DenseElem) -> CReal {
        let p = self.clone();
        let e = e.clone();
        CReal::from_fn(move |k| {
            let a = p.entry(k as usize + 2)?;
            let d = p.space.metric(&a, &e, k + 2)?;
            // entry error 2^-(k+1), metric error 2^-(k+2)
            Ok(d)
        })
    }
}

/// Distance between the limits of two points of the same space.
pub fn point_dist(p: &Point, q: &Point) -> CReal {
    let p = p.clone();
    let q = q.clone();
    CReal::from_fn(move |k| {
        let a = p.entry(k as usize + 3)?;
        let b = q.entry(k as usize + 3)?;
        let d = p.space.metric(&a, &b, k + 3)?;
        Ok(d)
    })
}

type SubsetDist = Arc<dyn Fn(&Point, u32) -> Result<Rat> + Send + Sync>;

/// A closed subset presented the way the constructions here consume one: its
/// own dense sequence inside the ambient space plus a distance-to-the-set
/// oracle with |oracle(p, k) - d(p, S)| <= 2^-k.
pub struct ClosedSubset {
    pub ambient: Arc<dyn MetricSpace>,
    sub_dense: ElemStream,
    dist_fn: SubsetDist,
}

impl ClosedSubset {
    pub fn new(
        ambient: Arc<dyn MetricSpace>,
        sub_dense: impl Fn(usize) -> Result<DenseElem> + Send + Sync + 'static,
        dist_fn: impl Fn(&Point, u32) -> Result<Rat> + Send + Sync + 'static,
    ) -> ClosedSubset {
        ClosedSubset {
            ambient,
            sub_dense: Arc::new(sub_dense),
            dist_fn: Arc::new(dist_fn),
        }
    }

    pub fn dense(&self, n: usize) -> Result<DenseElem> {
        (self.sub_dense)(n)
    }

    pub fn dist(&self, p: &Point) -> CReal {
        let p = p.clone();
        let f = self.dist_fn.clone();
        CReal::from_fn(move |k| f(&p, k))
    }

    /// Cross-checks the oracle against the subset's own dense points: each
    /// must be at distance ~0, and the oracle may never exceed the ambient
    /// distance to any sample.
    pub fn validate_samples(&self, count: usize, k: u32) -> Result<()> {
        let tol = Rat::pow2(-(k as i64));
        for i in 0..count {
            let e = self.dense(i)?;
            let p = Point::constant(self.ambient.clone(), e.clone());
            let d = (self.dist_fn)(&p, k)?;
            if d.abs() > &tol + &tol {
                return Err(Error::invariant(
                    "closed_subset",
                    format!("dense member {i} sits at distance {d} from the set"),
                ));
            }
            for j in 0..count {
                let q = Point::constant(self.ambient.clone(), self.dense(j)?);
                let through = self.ambient.metric(&e, &self.dense(j)?, k)?;
                let dq = (self.dist_fn)(&q, k)?;
                if dq > &through + &tol + &tol {
                    return Err(Error::invariant(
                        "closed_subset",
                        format!("oracle at sample {j} exceeds distance via member {i}"),
                    ));
                }
            }
        }
        Ok(())
    }
}
