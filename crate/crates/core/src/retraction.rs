//! Distance-driven retraction of an ambient metric space onto a computably
//! closed linear subspace.
//!
//! The construction follows the probabilistic-projection recipe: over the
//! first n+1 dense points of the subspace, weights proportional to
//! (d(x, M_n) + 2^-n) truncated-minus d(x, a_i) define a finite distribution
//! whose barycenter f_n(x) drifts toward x's nearest region; a carefully
//! chosen depth index y(n, x), computed through comparisons and a monotone
//! inverse, makes g_n(x) = f_{y(n,x)}(x) fast-converging, and the modified
//! limit of that stream is the retraction. Points of the subspace come back
//! unchanged; no step ever branches on the undecidable "x in M".

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use crate::creal::{clog2, monotone_inverse, soft_compare, CReal, SoftOrd};
use crate::enumerate::rat_at;
use crate::error::{Error, Result};
use crate::operators::{ml_exact, BanachOps, BanachPoint, RealOps};
use crate::rat::Rat;
use crate::spaces::{DenseElem, MetricSpace, Point, R2Space};

/// max(x - y, 0); exact when both arguments are exact.
pub fn trunc_minus(x: &CReal, y: &CReal) -> CReal {
    x.sub(y).max(&CReal::zero())
}

/// Presentation data the retraction is computable in: the ambient space, an
/// enumeration of a dense subset of the subspace carrying its linear
/// structure, the embedding of those elements into the ambient dense set,
/// and the distance-to-subspace oracle.
pub struct RetractionSetup<B: BanachOps> {
    pub ambient: Arc<dyn MetricSpace>,
    pub ops: Arc<B>,
    pub sub_elem: Arc<dyn Fn(usize) -> B::Elem + Send + Sync>,
    pub embed: Arc<dyn Fn(&B::Elem) -> DenseElem + Send + Sync>,
    pub dist_oracle: Arc<dyn Fn(&Point) -> CReal + Send + Sync>,
    /// step cap for the comparison loops and searches
    pub budget: u64,
}

/// The standard test fixture: ambient plane with the max metric, subspace
/// the first axis with the frozen rational enumeration 0, 1, -1, 1/2, ...
/// Example values in the tests depend on this enumeration.
pub fn xaxis_setup() -> RetractionSetup<RealOps> {
    RetractionSetup {
        ambient: Arc::new(R2Space),
        ops: Arc::new(RealOps),
        sub_elem: Arc::new(|i| rat_at(i as u64)),
        embed: Arc::new(|t| DenseElem::Q2(t.clone(), Rat::zero())),
        dist_oracle: Arc::new(|p: &Point| {
            let p = p.clone();
            CReal::from_fn(move |k| match p.approx_elem(k)? {
                DenseElem::Q2(_, b) => Ok(b.abs()),
                other => Err(Error::contract(
                    "dist_oracle",
                    format!("expected a plane element, got {other}"),
                )),
            })
        }),
        budget: 20_000,
    }
}

/// Finite distribution over the first n+1 subspace dense points.
pub struct FiniteDist {
    /// normalized weights for indices 0..=n
    pub weights: Vec<CReal>,
}

impl FiniteDist {
    pub fn mass(&self) -> CReal {
        CReal::sum_slice(&self.weights)
    }
}

/// Per-point evaluation context; caches distances, running minima, and
/// barycenters across the precision queries of one retraction.
pub struct RetractEval<B: BanachOps + 'static> {
    inner: Arc<EvalInner<B>>,
}

impl<B: BanachOps + 'static> Clone for RetractEval<B> {
    fn clone(&self) -> Self {
        RetractEval { inner: self.inner.clone() }
    }
}

struct EvalInner<B: BanachOps + 'static> {
    setup: Arc<RetractionSetup<B>>,
    x: Point,
    dist_m: CReal,
    dists: Mutex<Vec<CReal>>,
    mins: Mutex<Vec<CReal>>,
    barys: Mutex<BTreeMap<usize, BanachPoint<B>>>,
    // per-n threshold depths and depth indices; reusing them keeps the
    // bracket-refinement state alive across precision queries
    thresholds: Mutex<BTreeMap<u32, (CReal, u32)>>,
    ys: Mutex<BTreeMap<u32, CReal>>,
}

impl<B: BanachOps + 'static> RetractEval<B> {
    pub fn new(setup: Arc<RetractionSetup<B>>, x: Point) -> Self {
        let dist_m = (setup.dist_oracle)(&x);
        RetractEval {
            inner: Arc::new(EvalInner {
                setup,
                x,
                dist_m,
                dists: Mutex::new(Vec::new()),
                mins: Mutex::new(Vec::new()),
                barys: Mutex::new(BTreeMap::new()),
                thresholds: Mutex::new(BTreeMap::new()),
                ys: Mutex::new(BTreeMap::new()),
            }),
        }
    }

    /// d(x, a_i)
    fn dist(&self, i: usize) -> CReal {
        let mut ds = self.inner.dists.lock().unwrap();
        while ds.len() <= i {
            let j = ds.len();
            let a = (self.inner.setup.sub_elem)(j);
            let e = (self.inner.setup.embed)(&a);
            ds.push(self.inner.x.dist_to_elem(&e));
        }
        ds[i].clone()
    }

    /// d(x, M_n) as the minimum over the finite set
    fn dmin(&self, n: usize) -> CReal {
        {
            let ms = self.inner.mins.lock().unwrap();
            if let Some(m) = ms.get(n) {
                return m.clone();
            }
        }
        let mut i = self.inner.mins.lock().unwrap().len();
        while i <= n {
            let d = self.dist(i);
            let mut ms = self.inner.mins.lock().unwrap();
            let m = match ms.last() {
                None => d,
                Some(prev) => prev.min(&d),
            };
            ms.push(m);
            i += 1;
        }
        self.inner.mins.lock().unwrap()[n].clone()
    }

    /// h(m) = d(x, M_m) + 2^-(m+4) at integer depth
    fn h_int(&self, m: usize) -> CReal {
        self.dmin(m).add_rat(&Rat::pow2(-(m as i64 + 4)))
    }

    /// h at rational depth: linear interpolation between integer depths, and
    /// slope -1 continuation below zero so every threshold above the depth-0
    /// value stays reachable. Strictly decreasing.
    fn h_tilde(&self, q: &Rat) -> CReal {
        if q.is_negative() {
            return self.h_int(0).add_rat(&-q);
        }
        let n0: usize = q.floor_int().try_into().expect("depth fits a machine word");
        let lam = q - Rat::from_int(n0 as i64);
        if lam.is_zero() {
            return self.h_int(n0);
        }
        let a = self.h_int(n0).scale(&(Rat::one() - &lam));
        let b = self.h_int(n0 + 1).scale(&lam);
        a.add(&b)
    }

    /// Minimal depth satisfying the threshold condition: the y >= n+3 where
    /// h first falls to 2^-(n+3), found by the monotone inverse once an
    /// integer bracket is certified. Callers must know d(x, M) < 2^-(n+3),
    /// which guarantees the bracket search terminates. Also returns an
    /// integer upper bound on the result.
    fn y_threshold(&self, n: u32) -> Result<(CReal, u32)> {
        if let Some(hit) = self.inner.thresholds.lock().unwrap().get(&n) {
            return Ok(hit.clone());
        }
        let thresh = Rat::pow2(-(n as i64 + 3));
        let thresh_c = CReal::from_rat(thresh.clone());
        let budget = self.inner.setup.budget;
        let mut hi: Option<usize> = None;
        for s in 0..budget {
            let cand = n as usize + 3 + s as usize;
            let j = 2 + s as u32;
            match soft_compare(&self.h_int(cand), &thresh_c, j)? {
                SoftOrd::Less => {
                    hi = Some(cand);
                    break;
                }
                _ => {}
            }
        }
        let hi = hi.ok_or_else(|| {
            Error::budget("retract", "threshold depth not bracketed within budget")
        })?;
        let me = self.clone();
        let z = monotone_inverse(
            move |q: &Rat| Ok(me.h_tilde(q)),
            &thresh_c,
            &-Rat::one(),
            &Rat::from_int(hi as i64),
            false,
            budget,
        )?;
        let y2 = z.add_rat(&Rat::one()).max(&CReal::from_int(n as i64 + 3));
        let out = (y2, hi as u32 + 1);
        self.inner
            .thresholds
            .lock()
            .unwrap()
            .insert(n, out.clone());
        Ok(out)
    }

    /// The depth index y(n, x): the least real depth y where either
    /// d(x, M) = 2^-y or h(y - 1) has fallen to 2^-(n+3) with y >= n+3.
    /// The first candidate is -log2 of the distance (when positive), the
    /// second comes from y_threshold; the answer is their minimum, resolved
    /// through comparisons whose undecidable seams all agree.
    pub fn y_index(&self, n: u32) -> CReal {
        if let Some(hit) = self.inner.ys.lock().unwrap().get(&n) {
            return hit.clone();
        }
        let me = self.clone();
        let y = CReal::from_fn(move |k| {
            let d = &me.inner.dist_m;
            let split = CReal::from_rat(Rat::pow2(-(n as i64 + 5)));
            let budget = me.inner.setup.budget;
            for j in 2..(budget as u32).max(3) {
                match soft_compare(d, &split, j)? {
                    SoftOrd::Greater => return me.y_large(n, k, j),
                    SoftOrd::Less => return me.y_small(n, k),
                    SoftOrd::Indistinguishable => {
                        // the band around the split keeps d certified
                        // positive, so the large-distance route is sound
                        if j >= n + 7 {
                            return me.y_large(n, k, j);
                        }
                    }
                }
            }
            Err(Error::budget("retract", "depth split never resolved"))
        });
        self.inner.ys.lock().unwrap().insert(n, y.clone());
        y
    }

    /// Large-distance route: d is certified positive, so the distance depth
    /// y1 = -log2 d exists. If d stays above the threshold 2^-(n+3) the
    /// threshold depth does not exist and y1 is the answer; below it, take
    /// the minimum with the threshold depth. In the undecided band the
    /// threshold depth (if any) provably exceeds y1.
    fn y_large(&self, n: u32, k: u32, j0: u32) -> Result<Rat> {
        let d = &self.inner.dist_m;
        let budget = self.inner.setup.budget;
        let y1 = d.neg_log2(budget)?;
        let thresh = CReal::from_rat(Rat::pow2(-(n as i64 + 3)));
        for j in j0..(budget as u32).max(j0 + 1) {
            match soft_compare(d, &thresh, j)? {
                SoftOrd::Greater => return y1.approx(k),
                SoftOrd::Less => {
                    let (y2, _) = self.y_threshold(n)?;
                    return y1.min(&y2).approx(k);
                }
                SoftOrd::Indistinguishable => {
                    // |d - 2^-(n+3)| <= 2^-j: any threshold depth is at
                    // least j - 3, while y1 is near n + 3, so for j past
                    // n + 10 the minimum is y1
                    if j >= n + 10 {
                        return y1.approx(k);
                    }
                }
            }
        }
        Err(Error::budget("retract", "threshold comparison never resolved"))
    }

    /// Small-distance route: the threshold depth y2 exists. Compare d with
    /// 2^-y2 to decide whether the distance depth undercuts it; if that
    /// stays undecided, d is within 2^-j of 2^-y2 and the two candidates
    /// agree to within the output tolerance.
    fn y_small(&self, n: u32, k: u32) -> Result<Rat> {
        let d = &self.inner.dist_m;
        let budget = self.inner.setup.budget;
        let (y2, ub) = self.y_threshold(n)?;
        // cheap pre-check against the exact bound 2^-ub <= 2^-y2: certifying
        // d below it forces the distance depth past ub >= y2, so y2 is the
        // minimum outright and the costly 2^-y2 evaluations never start
        let lb = CReal::from_rat(Rat::pow2(-(ub as i64)));
        for j in 2..(budget as u32).max(3) {
            match soft_compare(d, &lb, j)? {
                SoftOrd::Less => return y2.approx(k),
                SoftOrd::Greater => break,
                SoftOrd::Indistinguishable => {
                    if j > ub + 2 {
                        break;
                    }
                }
            }
        }
        let pw = y2.pow2_neg();
        for j in 2..(budget as u32).max(3) {
            match soft_compare(d, &pw, j)? {
                SoftOrd::Greater => {
                    let y1 = d.neg_log2(budget)?;
                    return y1.min(&y2).approx(k);
                }
                SoftOrd::Less => return y2.approx(k),
                SoftOrd::Indistinguishable => {
                    if j >= ub + k + 3 {
                        return y2.approx(k + 2);
                    }
                }
            }
        }
        Err(Error::budget("retract", "distance-depth comparison never resolved"))
    }

    /// The weight distribution over M_n: numerators
    /// (d(x, M_n) + 2^-n) truncated-minus d(x, a_i); the nearest point keeps
    /// at least 2^-n, so the total is safely positive and normalization is
    /// a reciprocal with a certified lower bound.
    pub fn mu_dist(&self, n: usize) -> FiniteDist {
        let top = self.dmin(n).add_rat(&Rat::pow2(-(n as i64)));
        let raw: Vec<CReal> = (0..=n)
            .map(|i| trunc_minus(&top, &self.dist(i)))
            .collect();
        let total = CReal::sum_slice(&raw);
        let inv = total.div_lb(&Rat::pow2(-(n as i64)));
        FiniteDist {
            weights: raw.iter().map(|w| w.mul(&inv)).collect(),
        }
    }

    /// Barycenter of mu over M_n in the subspace's linear structure.
    pub fn barycenter(&self, n: usize) -> BanachPoint<B> {
        if let Some(b) = self.inner.barys.lock().unwrap().get(&n) {
            return b.clone();
        }
        let mu = self.mu_dist(n);
        let ops = self.inner.setup.ops.clone();
        let elems: Vec<B::Elem> = (0..=n).map(|i| (self.inner.setup.sub_elem)(i)).collect();
        let bound = elems
            .iter()
            .map(|e| ops.norm(e))
            .fold(Rat::one(), Rat::max);
        let b = BanachPoint::from_fn(move |p| {
            let pp = p + 1 + clog2(elems.len()) + bound.mag_bits();
            let mut out = ops.zero();
            for (w, e) in mu.weights.iter().zip(&elems) {
                out = ops.add(&out, &ops.scale(&w.approx(pp)?, e));
            }
            Ok(out)
        });
        self.inner.barys.lock().unwrap().insert(n, b.clone());
        b
    }

    /// Convex interpolation f_y between consecutive barycenters, at a real
    /// depth clamped to be nonnegative. Piecewise linear in the depth; the
    /// evaluation measures the local barycenter gap to decide how precisely
    /// the depth must be read.
    pub fn f_interp(&self, y: &CReal) -> BanachPoint<B> {
        let me = self.clone();
        let y = y.max(&CReal::zero());
        BanachPoint::from_fn(move |k| {
            let ops = &me.inner.setup.ops;
            let rough = y.approx(2)?;
            let base: usize = rough
                .floor_int()
                .max(num_bigint::BigInt::from(0))
                .try_into()
                .expect("depth fits a machine word");
            // local variation bound over the intervals the true depth
            // could touch, from coarse barycenter evaluations
            let mut var = Rat::one();
            let lo = base.saturating_sub(1);
            for m in lo..=base + 1 {
                let a = me.barycenter(m).approx(3)?;
                let b = me.barycenter(m + 1).approx(3)?;
                var = var.max(ops.norm(&ops.sub(&b, &a)) + Rat::one());
            }
            let p = k + 2 + var.mag_bits();
            let yq = y.approx(p)?.max(Rat::zero());
            let n0: usize = yq
                .floor_int()
                .try_into()
                .expect("depth fits a machine word");
            let lam = &yq - Rat::from_int(n0 as i64);
            let q = k + 3;
            let b0 = me.barycenter(n0).approx(q)?;
            if lam.is_zero() {
                return Ok(b0);
            }
            let b1 = me.barycenter(n0 + 1).approx(q)?;
            Ok(ops.add(
                &ops.scale(&(Rat::one() - &lam), &b0),
                &ops.scale(&lam, &b1),
            ))
        })
    }

    /// g_n(x) = f_{y(n,x)}(x)
    pub fn g_n(&self, n: u32) -> BanachPoint<B> {
        self.f_interp(&self.y_index(n))
    }

    /// The retraction value as a point of the subspace: the modified limit
    /// of the g_n stream, fed shifted and snapped to exact elements so the
    /// input is genuinely fast-converging and the limit is preserved.
    pub fn retract_point(&self) -> BanachPoint<B> {
        let me = self.clone();
        let stream = Arc::new(move |j: u64| {
            let g = me.g_n(j as u32 + 1);
            g.approx(j as u32 + 3)
        });
        ml_exact(self.inner.setup.ops.clone(), stream)
    }

    /// An element of the subspace within 2^-k of the retraction of x.
    pub fn retract(&self, k: u32) -> Result<B::Elem> {
        self.retract_point().approx(k)
    }
}
