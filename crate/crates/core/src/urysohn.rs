//! A universal rational metric space built as a deterministic, replayable
//! enumeration of one-point Katetov extensions, plus isometric embeddings of
//! computable metric spaces into it. Embedded images carry exactly enforced
//! protective radii around the ambient dense points, which is what makes the
//! distance to the image computable.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};

use crate::creal::{clog2, CReal};
use crate::error::{Error, Result};
use crate::rat::{cmp_rat, Rat};
use crate::spaces::{DenseElem, MetricSpace, Point};

fn contract(detail: impl Into<String>) -> Error {
    Error::contract("urysohn", detail.into())
}

// ---------------------------------------------------------------------------
// finite rational metric spaces
// ---------------------------------------------------------------------------

/// A finite pseudometric space with exact rational distances. Zero distance
/// between distinct points is allowed; the triangle inequality is exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteQMetric {
    d: Vec<Vec<Rat>>,
}

impl FiniteQMetric {
    pub fn new(d: Vec<Vec<Rat>>) -> Result<Self> {
        let space = FiniteQMetric { d };
        space.validate()?;
        Ok(space)
    }

    pub fn empty() -> Self {
        FiniteQMetric { d: Vec::new() }
    }

    pub fn single() -> Self {
        FiniteQMetric {
            d: vec![vec![Rat::zero()]],
        }
    }

    /// Points on the rational line with the absolute-value distance.
    pub fn from_line_points(coords: &[Rat]) -> Self {
        let d = coords
            .iter()
            .map(|a| coords.iter().map(|b| (a - b).abs()).collect())
            .collect();
        FiniteQMetric { d }
    }

    pub fn size(&self) -> usize {
        self.d.len()
    }

    pub fn dist(&self, i: usize, j: usize) -> &Rat {
        &self.d[i][j]
    }

    /// The subspace on the first n points.
    pub fn restriction(&self, n: usize) -> FiniteQMetric {
        let d = self.d[..n]
            .iter()
            .map(|row| row[..n].to_vec())
            .collect();
        FiniteQMetric { d }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.d.len();
        for row in &self.d {
            if row.len() != n {
                return Err(contract("distance matrix is not square"));
            }
        }
        for i in 0..n {
            if !self.d[i][i].is_zero() {
                return Err(contract(format!("nonzero self-distance at {i}")));
            }
            for j in 0..n {
                if self.d[i][j].is_negative() {
                    return Err(contract(format!("negative distance at ({i}, {j})")));
                }
                if self.d[i][j] != self.d[j][i] {
                    return Err(contract(format!("asymmetric distance at ({i}, {j})")));
                }
            }
        }
        self.check_triangles()
    }

    /// Exact triangle inequality over all ordered triples.
    pub fn check_triangles(&self) -> Result<()> {
        let n = self.d.len();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let via = &self.d[i][k] + &self.d[k][j];
                    if self.d[i][j] > via {
                        return Err(contract(format!(
                            "triangle inequality fails at ({i}, {j}) via {k}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A prospective one-point extension: required exact distances from the new
/// point to a subset of the existing ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KatetovFn {
    pub domain: Vec<usize>,
    pub values: Vec<Rat>,
}

impl KatetovFn {
    pub fn new(domain: Vec<usize>, values: Vec<Rat>) -> Result<Self> {
        if domain.len() != values.len() {
            return Err(contract("domain and value lists differ in length"));
        }
        if domain.windows(2).any(|w| w[0] >= w[1]) {
            return Err(contract("domain must be strictly increasing"));
        }
        if values.iter().any(|v| v.is_negative()) {
            return Err(contract("extension distances must be nonnegative"));
        }
        Ok(KatetovFn { domain, values })
    }

    pub fn empty() -> Self {
        KatetovFn {
            domain: Vec::new(),
            values: Vec::new(),
        }
    }
}

/// Whether the required distances are admissible: for all a, b in the domain,
/// |f(a) - f(b)| <= d(a, b) <= f(a) + f(b), exactly.
pub fn katetov_check(space: &FiniteQMetric, f: &KatetovFn) -> bool {
    if f.domain.iter().any(|&a| a >= space.size()) {
        return false;
    }
    if f.values.iter().any(|v| v.is_negative()) {
        return false;
    }
    for (pa, va) in f.domain.iter().zip(&f.values) {
        for (pb, vb) in f.domain.iter().zip(&f.values) {
            let d = space.dist(*pa, *pb);
            if &(va - vb).abs() > d || d > &(va + vb) {
                return false;
            }
        }
    }
    true
}

/// Total distance assignment for the new point: on the domain the given
/// values, elsewhere the largest compatible distance min_a (f(a) + d(a, x)).
/// An empty domain anchors at point 0 with default distance 1.
pub fn canonical_extension(space: &FiniteQMetric, f: &KatetovFn) -> Vec<Rat> {
    let n = space.size();
    if n == 0 {
        return Vec::new();
    }
    if f.domain.is_empty() {
        return (0..n).map(|x| Rat::one() + space.dist(0, x)).collect();
    }
    (0..n)
        .map(|x| {
            let mut best: Option<Rat> = None;
            for (a, v) in f.domain.iter().zip(&f.values) {
                let cand = v + space.dist(*a, x);
                best = Some(match best {
                    Some(b) => b.min(cand),
                    None => cand,
                });
            }
            best.unwrap()
        })
        .collect()
}

/// Adds one point realizing the extension. The canonical values keep the
/// triangle inequality exact, so the result validates by construction.
pub fn one_point_extend(space: &FiniteQMetric, f: &KatetovFn) -> Result<FiniteQMetric> {
    if !katetov_check(space, f) {
        return Err(contract("extension distances are not admissible"));
    }
    let ext = canonical_extension(space, f);
    let mut d = space.d.clone();
    for (row, v) in d.iter_mut().zip(&ext) {
        row.push(v.clone());
    }
    let mut last = ext;
    last.push(Rat::zero());
    d.push(last);
    let out = FiniteQMetric { d };
    debug_assert!(out.validate().is_ok());
    Ok(out)
}

// ---------------------------------------------------------------------------
// the deterministic extension schedule
// ---------------------------------------------------------------------------

/// One realized schedule task: the extension it asked for and the index of
/// the point that realizes it.
#[derive(Clone, Debug)]
pub struct Realization {
    pub domain: Vec<usize>,
    pub values: Vec<Rat>,
    pub witness: usize,
}

/// Distance values admitted at a given stage: p/q in lowest terms with
/// q <= s and p/q <= s, ascending. Zero is excluded; a zero-distance
/// extension is already realized by the witnessing point itself.
fn stage_values(s: usize) -> Vec<Rat> {
    let mut out = Vec::new();
    for q in 1..=s as i64 {
        for p in 1..=(s as i64) * q {
            if num_integer::gcd(p, q) == 1 {
                out.push(Rat::new(p, q));
            }
        }
    }
    out.sort_by(cmp_rat);
    out
}

/// The first stage whose enumeration contains the task: points, denominators
/// and magnitudes must all fit. Revisiting stages skip it, so every task is
/// realized exactly once.
fn first_stage(domain: &[usize], values: &[Rat]) -> usize {
    let mut s = 1usize;
    for &p in domain {
        s = s.max(p + 1);
    }
    for v in values {
        let den = v.denom().to_usize().unwrap_or(usize::MAX);
        let mag = {
            let f = v.floor_int();
            let c = if v.is_integer() { f } else { f + 1 };
            c.to_usize().unwrap_or(usize::MAX)
        };
        s = s.max(den).max(mag);
    }
    s
}

/// Grows a universal rational metric space one Katetov extension at a time.
/// The schedule is a pure function of how many points have been realized, so
/// any two builders agree on every prefix.
pub struct U0Builder {
    d: Vec<Vec<Rat>>,
    log: Vec<Realization>,
    stage: usize,
    values: Vec<Rat>,
    mask: u64,
    odo: Vec<usize>,
}

const STAGE_CAP: usize = 60;

impl U0Builder {
    pub fn new() -> Self {
        U0Builder {
            d: vec![vec![Rat::zero()]],
            log: Vec::new(),
            stage: 1,
            values: stage_values(1),
            mask: 0,
            odo: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dist(&self, i: usize, j: usize) -> Rat {
        self.d[i][j].clone()
    }

    pub fn log(&self) -> &[Realization] {
        &self.log
    }

    /// The first n points. Prefixes are bit-identical across builder
    /// instances and never change as the builder grows.
    pub fn prefix(&self, n: usize) -> Result<FiniteQMetric> {
        if n > self.len() {
            return Err(contract("prefix longer than the realized space"));
        }
        let d = self.d[..n].iter().map(|row| row[..n].to_vec()).collect();
        Ok(FiniteQMetric { d })
    }

    pub fn ensure_len(&mut self, n: usize) -> Result<()> {
        while self.len() < n {
            self.advance_one()?;
        }
        Ok(())
    }

    fn current_candidate(&self) -> (Vec<usize>, Vec<Rat>) {
        let domain: Vec<usize> = (0..self.stage).filter(|i| self.mask >> i & 1 == 1).collect();
        let values: Vec<Rat> = self.odo.iter().map(|&i| self.values[i].clone()).collect();
        (domain, values)
    }

    fn bump(&mut self) {
        // odometer over value choices, last domain slot fastest
        for pos in (0..self.odo.len()).rev() {
            self.odo[pos] += 1;
            if self.odo[pos] < self.values.len() {
                return;
            }
            self.odo[pos] = 0;
        }
        self.mask += 1;
        if self.stage < 64 && self.mask >> self.stage & 1 == 1 {
            self.stage += 1;
            self.values = stage_values(self.stage);
            self.mask = 0;
            self.odo = Vec::new();
            return;
        }
        self.odo = vec![0; self.mask.count_ones() as usize];
    }

    /// Realizes the next scheduled extension and returns its witness index.
    pub fn advance_one(&mut self) -> Result<usize> {
        loop {
            if self.stage > STAGE_CAP {
                return Err(Error::budget("urysohn", "extension schedule exhausted"));
            }
            let stage = self.stage;
            let (domain, values) = self.current_candidate();
            self.bump();
            if first_stage(&domain, &values) != stage {
                continue;
            }
            let f = KatetovFn { domain, values };
            let space = FiniteQMetric { d: self.d.clone() };
            if !katetov_check(&space, &f) {
                continue;
            }
            let w = self.push_extension(&f);
            self.log.push(Realization {
                domain: f.domain,
                values: f.values,
                witness: w,
            });
            return Ok(w);
        }
    }

    fn push_extension(&mut self, f: &KatetovFn) -> usize {
        let space = FiniteQMetric { d: std::mem::take(&mut self.d) };
        let ext = canonical_extension(&space, f);
        self.d = space.d;
        for (row, v) in self.d.iter_mut().zip(&ext) {
            row.push(v.clone());
        }
        let mut last = ext;
        last.push(Rat::zero());
        self.d.push(last);
        self.d.len() - 1
    }

    /// Realizes an extension immediately, outside the schedule. Used by the
    /// embedding construction, which needs exact values the schedule would
    /// only reach much later.
    pub(crate) fn force_extend(&mut self, f: &KatetovFn) -> Result<usize> {
        let space = FiniteQMetric { d: std::mem::take(&mut self.d) };
        let ok = katetov_check(&space, f);
        self.d = space.d;
        if !ok {
            return Err(contract("forced extension is not admissible"));
        }
        Ok(self.push_extension(f))
    }

    /// Finds a point whose distances to the domain equal the values exactly,
    /// advancing the schedule up to max_new realizations if none exists yet.
    pub fn find_witness(
        &mut self,
        domain: &[usize],
        values: &[Rat],
        max_new: usize,
    ) -> Result<usize> {
        if domain.iter().any(|&a| a >= self.len()) {
            return Err(contract("witness domain outside the realized space"));
        }
        let matches = |d: &Vec<Vec<Rat>>, z: usize| {
            domain
                .iter()
                .zip(values)
                .all(|(&a, v)| &d[z][a] == v)
        };
        for z in 0..self.len() {
            if matches(&self.d, z) {
                return Ok(z);
            }
        }
        for _ in 0..max_new {
            let w = self.advance_one()?;
            if matches(&self.d, w) {
                return Ok(w);
            }
        }
        Err(Error::budget(
            "urysohn",
            "no witness within the realization budget",
        ))
    }
}

impl Default for U0Builder {
    fn default() -> Self {
        Self::new()
    }
}

/// The first n points of the schedule, replayed from scratch.
pub fn u0_prefix(n: usize) -> Result<FiniteQMetric> {
    let mut b = U0Builder::new();
    b.ensure_len(n)?;
    b.prefix(n)
}

/// The schedule-built space behind the dense-space interface. Distances are
/// exact; querying a pair advances the schedule far enough to realize both.
pub struct U0Space {
    builder: Mutex<U0Builder>,
}

impl U0Space {
    pub fn new() -> Self {
        U0Space {
            builder: Mutex::new(U0Builder::new()),
        }
    }
}

impl Default for U0Space {
    fn default() -> Self {
        Self::new()
    }
}

impl MetricSpace for U0Space {
    fn dense(&self, n: usize) -> DenseElem {
        DenseElem::U(n)
    }

    fn metric(&self, a: &DenseElem, b: &DenseElem, _k: u32) -> Result<Rat> {
        match (a, b) {
            (DenseElem::U(i), DenseElem::U(j)) => {
                let mut builder = self.builder.lock().unwrap();
                builder.ensure_len(i.max(j) + 1)?;
                Ok(builder.dist(*i, *j))
            }
            _ => Err(contract("dense element does not belong to u0")),
        }
    }

    fn exact(&self) -> bool {
        true
    }

    fn descriptor(&self) -> String {
        "u0".into()
    }
}

/// Extends an exact isometric embedding of an initial restriction to the
/// whole space, one point at a time, by searching the schedule for witnesses
/// with exactly the induced distances.
pub fn extend_embedding(
    builder: &mut U0Builder,
    sub: &FiniteQMetric,
    full: &FiniteQMetric,
    f: &[usize],
    max_new_per_point: usize,
) -> Result<Vec<usize>> {
    if f.len() != sub.size() {
        return Err(contract("embedding length differs from the subspace size"));
    }
    if &full.restriction(sub.size()) != sub {
        return Err(contract("subspace is not an initial restriction"));
    }
    for (i, &fi) in f.iter().enumerate() {
        if fi >= builder.len() {
            return Err(contract("embedding hits unrealized points"));
        }
        for (j, &fj) in f.iter().enumerate().take(i) {
            if &builder.dist(fi, fj) != sub.dist(i, j) {
                return Err(contract(format!(
                    "embedding is not isometric at ({j}, {i})"
                )));
            }
        }
    }
    let mut g = f.to_vec();
    for b in sub.size()..full.size() {
        // distances to equal images agree by the triangle inequality, so the
        // dedup below never sees conflicting requirements
        let mut wanted: BTreeMap<usize, Rat> = BTreeMap::new();
        for (a, &ga) in g.iter().enumerate() {
            let v = full.dist(b, a).clone();
            if let Some(prev) = wanted.get(&ga) {
                if prev != &v {
                    return Err(contract("collapsed images demand distinct distances"));
                }
            } else {
                wanted.insert(ga, v);
            }
        }
        let domain: Vec<usize> = wanted.keys().copied().collect();
        let values: Vec<Rat> = wanted.values().cloned().collect();
        let w = builder.find_witness(&domain, &values, max_new_per_point)?;
        g.push(w);
    }
    Ok(g)
}

// ---------------------------------------------------------------------------
// embedding a computable metric space
// ---------------------------------------------------------------------------

/// A finite exact space behind the dense-space interface; the dense sequence
/// cycles through the points.
pub struct FiniteSpace {
    m: FiniteQMetric,
}

impl FiniteSpace {
    pub fn new(m: FiniteQMetric) -> Result<Self> {
        if m.size() == 0 {
            return Err(contract("empty source space"));
        }
        Ok(FiniteSpace { m })
    }
}

impl MetricSpace for FiniteSpace {
    fn dense(&self, n: usize) -> DenseElem {
        DenseElem::U(n % self.m.size())
    }

    fn metric(&self, a: &DenseElem, b: &DenseElem, _k: u32) -> Result<Rat> {
        match (a, b) {
            (DenseElem::U(i), DenseElem::U(j)) => Ok(self
                .m
                .dist(i % self.m.size(), j % self.m.size())
                .clone()),
            _ => Err(contract("dense element does not belong to the source")),
        }
    }

    fn exact(&self) -> bool {
        true
    }

    fn descriptor(&self) -> String {
        format!("finite:{}", self.m.size())
    }
}

struct EmbedCore {
    source: Arc<dyn MetricSpace>,
    elems: Vec<DenseElem>,
    builder: U0Builder,
    /// table[n] lists the witness indices of row n; exact sources keep a
    /// single constant entry, inexact ones one entry per column c >= n.
    table: Vec<Vec<usize>>,
    /// radii[m][j] for j <= m: the stage-m protective radius around point j.
    radii: Vec<Vec<Rat>>,
    cols_done: usize,
    rows: usize,
}

impl EmbedCore {
    fn approx_dist(&self, n: usize, j: usize, prec: u32) -> Result<Rat> {
        let a = self
            .source
            .metric(&self.elems[n], &self.elems[j], prec)?;
        Ok(a.max(Rat::zero()))
    }

    /// Maximal k with (k+2)*2^-m <= min over the given witnesses of their
    /// distance to point j; radius k*2^-m, or 0 when no k exists (an empty
    /// witness set also yields 0: nothing to protect against yet).
    fn compute_radii(&self, m: usize, entries: &[usize]) -> Vec<Rat> {
        (0..=m)
            .map(|j| {
                let mut min_d: Option<Rat> = None;
                for &e in entries {
                    let v = self.builder.dist(j, e);
                    min_d = Some(match min_d {
                        Some(b) => b.min(v),
                        None => v,
                    });
                }
                let Some(min_d) = min_d else {
                    return Rat::zero();
                };
                let k = (min_d * Rat::pow2(m as i64)).floor_int() - BigInt::from(2);
                if k.is_negative() {
                    Rat::zero()
                } else {
                    Rat::from_big(num_rational::BigRational::from(k)) * Rat::pow2(-(m as i64))
                }
            })
            .collect()
    }

    /// Builds the extension for one witness: the pinned distances plus, for
    /// every protected point with a positive floor, the smallest value that
    /// is 1-Lipschitz over the floors and below the pin cones. Pins stay as
    /// given; a pinned point under a floor must already clear it.
    fn assemble(
        &self,
        pins: &BTreeMap<usize, Rat>,
        floors: &BTreeMap<usize, Rat>,
    ) -> Result<KatetovFn> {
        let mut map = pins.clone();
        for (&j, floor) in floors {
            if let Some(pin) = map.get(&j) {
                if pin < floor {
                    return Err(contract(format!(
                        "pinned distance at point {j} undercuts its protective radius"
                    )));
                }
                continue;
            }
            if pins.is_empty() {
                return Err(contract("protective floor without any pinned distance"));
            }
            let natural = pins
                .iter()
                .map(|(&p, v)| v + self.builder.dist(p, j))
                .min_by(cmp_rat)
                .unwrap();
            let pushed = floors
                .iter()
                .map(|(&j2, f2)| f2 - self.builder.dist(j, j2))
                .max_by(cmp_rat)
                .unwrap();
            map.insert(j, natural.max(pushed));
        }
        let domain: Vec<usize> = map.keys().copied().collect();
        let values: Vec<Rat> = map.values().cloned().collect();
        KatetovFn::new(domain, values)
    }

    /// One forced realization, interleaved with one scheduled task so the
    /// ambient space keeps its independent dense points.
    fn realize(&mut self, kf: &KatetovFn) -> Result<usize> {
        let w = self.builder.force_extend(kf)?;
        self.builder.advance_one()?;
        Ok(w)
    }

    fn floors_for(&self, row: usize, stages: std::ops::RangeInclusive<usize>) -> BTreeMap<usize, Rat> {
        let _ = row;
        let mut floors: BTreeMap<usize, Rat> = BTreeMap::new();
        for m in stages {
            for (j, r) in self.radii[m].iter().enumerate() {
                if r.is_positive() {
                    let e = floors.entry(j).or_insert_with(Rat::zero);
                    if &*e < r {
                        *e = r.clone();
                    }
                }
            }
        }
        floors
    }

    // -- exact sources: constant witness per row, realized once --

    fn build_exact(&mut self) -> Result<()> {
        for n in 0..self.rows {
            let entries: Vec<usize> = self.table.iter().map(|row| row[0]).collect();
            let r = self.compute_radii(n, &entries);
            self.radii.push(r);
            // a zero source distance reuses the earlier witness: collapsed
            // points share their image
            let mut collapsed = None;
            for j in 0..n {
                if self.approx_dist(n, j, 0)?.is_zero() {
                    collapsed = Some(self.table[j][0]);
                    break;
                }
            }
            if let Some(w) = collapsed {
                self.table.push(vec![w]);
                continue;
            }
            let mut pins: BTreeMap<usize, Rat> = BTreeMap::new();
            for j in 0..n {
                let v = self.approx_dist(n, j, 0)?;
                if let Some(prev) = pins.get(&self.table[j][0]) {
                    if prev != &v {
                        return Err(contract("exact source distances are inconsistent"));
                    }
                } else {
                    pins.insert(self.table[j][0], v);
                }
            }
            let floors = self.floors_for(n, n..=n);
            let kf = self.assemble(&pins, &floors)?;
            let w = self.realize(&kf)?;
            self.table.push(vec![w]);
        }
        Ok(())
    }

    // -- inexact sources: column-major table of moving witnesses --

    /// Pinned distance of row n to row j at column c: a rational within
    /// 2^-(c+3) of the source distance, inflated by 2^-(c+1) so the pinned
    /// values always satisfy the triangle conditions among themselves.
    fn grid(&self, n: usize, j: usize, c: usize) -> Result<Rat> {
        Ok(self.approx_dist(n, j, c as u32 + 3)? + Rat::pow2(-(c as i64 + 1)))
    }

    fn entry(&self, n: usize, c: usize) -> usize {
        self.table[n][c - n]
    }

    fn ensure_cols(&mut self, target: usize) -> Result<()> {
        while self.cols_done <= target {
            let c = self.cols_done;
            // existing rows move to column c; each is pinned to the rows
            // below it at this column, to its own previous witness, and to
            // the floors accumulated since it started
            for n in 0..self.rows.min(c) {
                let mut pins: BTreeMap<usize, Rat> = BTreeMap::new();
                for j in 0..n {
                    pins.insert(self.entry(j, c), self.grid(n, j, c)?);
                }
                let step = Rat::from_int(n as i64 + 1) * Rat::pow2(-(c as i64));
                pins.insert(self.entry(n, c - 1), step);
                let floors = self.floors_for(n, n..=c - 1);
                let kf = self.assemble(&pins, &floors)?;
                let w = self.realize(&kf)?;
                self.table[n].push(w);
            }
            let entries: Vec<usize> = (0..self.rows.min(c)).map(|i| self.entry(i, c)).collect();
            let r = self.compute_radii(c, &entries);
            self.radii.push(r);
            if c < self.rows {
                // row c starts here, under its own stage's floors
                let mut pins: BTreeMap<usize, Rat> = BTreeMap::new();
                for j in 0..c {
                    pins.insert(self.entry(j, c), self.grid(c, j, c)?);
                }
                let floors = self.floors_for(c, c..=c);
                let kf = self.assemble(&pins, &floors)?;
                let w = self.realize(&kf)?;
                self.table.push(vec![w]);
            }
            self.cols_done += 1;
        }
        Ok(())
    }
}

/// The ambient space an embedding builds into, behind the dense-space
/// interface. Distances are exact rationals from the underlying builder.
pub struct EmbedSpace {
    core: Arc<Mutex<EmbedCore>>,
}

impl MetricSpace for EmbedSpace {
    fn dense(&self, n: usize) -> DenseElem {
        DenseElem::U(n)
    }

    fn metric(&self, a: &DenseElem, b: &DenseElem, _k: u32) -> Result<Rat> {
        match (a, b) {
            (DenseElem::U(i), DenseElem::U(j)) => {
                let core = self.core.lock().unwrap();
                if i.max(j) >= &core.builder.len() {
                    return Err(contract("point index beyond the realized ambient space"));
                }
                Ok(core.builder.dist(*i, *j))
            }
            _ => Err(contract("dense element does not belong to the ambient space")),
        }
    }

    fn exact(&self) -> bool {
        true
    }

    fn descriptor(&self) -> String {
        "u0".into()
    }
}

/// An isometric embedding of the first `rows` dense points of a source space
/// into a schedule-built ambient space. Exact sources embed with exact
/// distances and constant witness streams; inexact sources get fast
/// converging witness streams whose committed distances converge to the
/// source distances.
pub struct Embedding {
    core: Arc<Mutex<EmbedCore>>,
    space: Arc<EmbedSpace>,
    rows: usize,
    exact: bool,
}

impl Embedding {
    pub fn new(source: Arc<dyn MetricSpace>, rows: usize) -> Result<Embedding> {
        if rows == 0 {
            return Err(contract("embedding needs at least one point"));
        }
        let elems = (0..rows).map(|n| source.dense(n)).collect();
        let exact = source.exact();
        let mut core = EmbedCore {
            source,
            elems,
            builder: U0Builder::new(),
            table: Vec::new(),
            radii: Vec::new(),
            cols_done: 0,
            rows,
        };
        if exact {
            core.build_exact()?;
        }
        let core = Arc::new(Mutex::new(core));
        let space = Arc::new(EmbedSpace { core: core.clone() });
        Ok(Embedding {
            core,
            space,
            rows,
            exact,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn space(&self) -> Arc<EmbedSpace> {
        self.space.clone()
    }

    /// The image of source point n as a point of the ambient completion.
    pub fn image(&self, n: usize) -> Result<Point> {
        if n >= self.rows {
            return Err(contract("image index beyond the embedded rows"));
        }
        let space: Arc<dyn MetricSpace> = self.space.clone();
        if self.exact {
            let w = {
                let core = self.core.lock().unwrap();
                core.table[n][0]
            };
            return Ok(Point::constant(space, DenseElem::U(w)));
        }
        // witness at column m + clog2(n+1) + 2 is within 2^-(m+1) of the
        // limit, so consecutive entries satisfy the stream modulus
        let offset = clog2(n + 1) as usize + 2;
        let core = self.core.clone();
        Ok(Point::from_fn(space, move |m| {
            let c = (m + offset).max(n);
            let mut core = core.lock().unwrap();
            core.ensure_cols(c)?;
            Ok(DenseElem::U(core.entry(n, c)))
        }))
    }

    /// Builder index of the witness for row n at column c (exact sources
    /// ignore c).
    pub fn witness(&self, n: usize, c: usize) -> Result<usize> {
        if n >= self.rows {
            return Err(contract("row beyond the embedded rows"));
        }
        let mut core = self.core.lock().unwrap();
        if self.exact {
            return Ok(core.table[n][0]);
        }
        if c < n {
            return Err(contract("rows have witnesses from their own stage on"));
        }
        core.ensure_cols(c)?;
        Ok(core.entry(n, c))
    }

    /// Stage-m protective radii (index j <= m).
    pub fn radii(&self, m: usize) -> Result<Vec<Rat>> {
        let mut core = self.core.lock().unwrap();
        if self.exact {
            if m >= self.rows {
                return Err(contract("exact embeddings compute radii per row"));
            }
        } else {
            core.ensure_cols(m)?;
        }
        Ok(core.radii[m].clone())
    }

    pub fn ambient_len(&self) -> usize {
        self.core.lock().unwrap().builder.len()
    }

    pub fn ambient_dist(&self, i: usize, j: usize) -> Result<Rat> {
        let core = self.core.lock().unwrap();
        if i.max(j) >= core.builder.len() {
            return Err(contract("point index beyond the realized ambient space"));
        }
        Ok(core.builder.dist(i, j))
    }

    /// Distance from ambient point j to the image set, within 2^-k. For
    /// exact sources this is an exact minimum; otherwise the witnesses at a
    /// column deep enough that every row has at most 2^-(k+2) left to travel.
    pub fn dist_to_image(&self, j: usize, k: u32) -> Result<Rat> {
        let mut core = self.core.lock().unwrap();
        if self.exact {
            if j >= core.builder.len() {
                return Err(contract("point index beyond the realized ambient space"));
            }
            let m = (0..self.rows)
                .map(|n| core.builder.dist(j, core.table[n][0]))
                .min_by(cmp_rat)
                .unwrap();
            return Ok(m);
        }
        let c = k as usize + clog2(self.rows + 1) as usize + 2;
        core.ensure_cols(c)?;
        if j >= core.builder.len() {
            return Err(contract("point index beyond the realized ambient space"));
        }
        Ok((0..self.rows)
            .map(|n| core.builder.dist(j, core.entry(n, c)))
            .min_by(cmp_rat)
            .unwrap())
    }

    pub fn dist_to_image_real(&self, j: usize) -> CReal
    where
        Self: Sized,
    {
        let core = self.core.clone();
        let rows = self.rows;
        let exact = self.exact;
        CReal::from_fn(move |k| {
            let mut core = core.lock().unwrap();
            if exact {
                if j >= core.builder.len() {
                    return Err(contract("point index beyond the realized ambient space"));
                }
                return Ok((0..rows)
                    .map(|n| core.builder.dist(j, core.table[n][0]))
                    .min_by(cmp_rat)
                    .unwrap());
            }
            let c = k as usize + clog2(rows + 1) as usize + 2;
            core.ensure_cols(c)?;
            if j >= core.builder.len() {
                return Err(contract("point index beyond the realized ambient space"));
            }
            Ok((0..rows)
                .map(|n| core.builder.dist(j, core.entry(n, c)))
                .min_by(cmp_rat)
                .unwrap())
        })
    }
}
