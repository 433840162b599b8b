//! Normed-space presentations of propositional formulas.
//!
//! Each formula compiles to a pair (norm, functional) on finitely supported
//! rational vectors. The functional has norm 1; it attains 1 on the unit ball
//! of the completion exactly when the formula is true. Leaves use an l1-style
//! space (attaining) and a sup-norm space (non-attaining); disjunction takes
//! an l1 direct sum over components, conjunction a weighted coupled-max sum.
//! Components of the combined spaces live on coordinate blocks through the
//! Cantor pairing.
//!
//! On top of the pairs: exact unit-ball suprema over truncated regions (via
//! an exact LP for the coupled-max norm), witness streams for true formulas,
//! the three-ball membership problem whose solvability encodes attainment,
//! and a Euclidean product for bundling ball problems.

pub mod lp;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::creal::CReal;
use crate::enumerate::{pair, qvec_at, unpair};
use crate::error::{Error, Result};
use crate::qvec::QVec;
use crate::rat::Rat;
use crate::spaces::{DenseElem, MetricSpace, Point};
use lp::{maximize, Lp};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Formula {
    Top,
    Bot,
    Or(Vec<Formula>),
    And(Vec<Formula>),
}

impl Formula {
    pub fn truth(&self) -> bool {
        match self {
            Formula::Top => true,
            Formula::Bot => false,
            Formula::Or(cs) => cs.iter().any(Formula::truth),
            Formula::And(cs) => cs.iter().all(Formula::truth),
        }
    }

    pub fn depth(&self) -> u32 {
        match self {
            Formula::Top | Formula::Bot => 0,
            Formula::Or(cs) | Formula::And(cs) => {
                1 + cs.iter().map(Formula::depth).max().unwrap_or(0)
            }
        }
    }

    pub fn parse(s: &str) -> Result<Formula> {
        let mut p = Parser { b: s.as_bytes(), pos: 0 };
        let f = p.formula()?;
        p.ws();
        if p.pos != p.b.len() {
            return Err(Error::Parse {
                pos: p.pos,
                msg: "trailing input after formula".into(),
            });
        }
        Ok(f)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Top => write!(f, "T"),
            Formula::Bot => write!(f, "F"),
            Formula::Or(cs) | Formula::And(cs) => {
                let kw = if matches!(self, Formula::Or(_)) { "or" } else { "and" };
                write!(f, "{kw}(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for Formula {
    type Err = Error;
    fn from_str(s: &str) -> Result<Formula> {
        Formula::parse(s)
    }
}

struct Parser<'a> {
    b: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn ws(&mut self) {
        while self.pos < self.b.len() && self.b[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn eat(&mut self, kw: &str) -> Result<()> {
        if self.b[self.pos..].starts_with(kw.as_bytes()) {
            self.pos += kw.len();
            Ok(())
        } else {
            Err(self.err(&format!("expected `{kw}`")))
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        self.ws();
        match self.b.get(self.pos) {
            Some(b'T') => {
                self.pos += 1;
                Ok(Formula::Top)
            }
            Some(b'F') => {
                self.pos += 1;
                Ok(Formula::Bot)
            }
            Some(b'o') => {
                self.eat("or")?;
                Ok(Formula::Or(self.children()?))
            }
            Some(b'a') => {
                self.eat("and")?;
                Ok(Formula::And(self.children()?))
            }
            _ => Err(self.err("expected one of T, F, or(...), and(...)")),
        }
    }

    fn children(&mut self) -> Result<Vec<Formula>> {
        self.ws();
        if self.b.get(self.pos) != Some(&b'(') {
            return Err(self.err("expected `(`"));
        }
        self.pos += 1;
        let mut out = vec![self.formula()?];
        loop {
            self.ws();
            match self.b.get(self.pos) {
                Some(b',') => {
                    self.pos += 1;
                    out.push(self.formula()?);
                }
                Some(b')') => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(self.err("expected `,` or `)`")),
            }
        }
    }
}

/// Weight of component j's functional inside the conjunction functional:
/// 1/4 for j = 0, 3 * 2^-(j+2) for j >= 1. These are the exact totals the
/// per-n sum 2^-(n+2)(F_n + F_{n+1}) assigns to each component.
fn and_coeff(j: u64) -> Rat {
    if j == 0 {
        Rat::new(1, 4)
    } else {
        Rat::from_int(3) * Rat::pow2(-(j as i64 + 2))
    }
}

/// Child formula at component n of a combination node, honoring the padding
/// rule: disjunctions continue with refutable leaves, conjunctions with
/// provable ones, so truth is preserved while the component sequence becomes
/// infinite.
fn child_at(cs: &[Formula], pad: &Formula, n: u64) -> Formula {
    cs.get(n as usize).cloned().unwrap_or_else(|| pad.clone())
}

/// Split a vector on NxN-coded coordinates into its per-component vectors.
fn decompose(v: &QVec) -> Vec<(u64, QVec)> {
    let mut comps: std::collections::BTreeMap<u64, QVec> = Default::default();
    for (i, q) in v.iter() {
        let (n, m) = unpair(i);
        comps.entry(n).or_insert_with(QVec::zero).set(m, q.clone());
    }
    comps.into_iter().collect()
}

/// Place a vector into component n of a combination space.
pub fn embed_component(n: u64, v: &QVec) -> QVec {
    v.map_support(|m| pair(n, m))
}

fn norm_of(phi: &Formula, v: &QVec) -> Rat {
    match phi {
        Formula::Top => v.l1_norm(),
        Formula::Bot => v.sup_norm(),
        Formula::Or(cs) => {
            // l1 sum of component norms
            decompose(v)
                .into_iter()
                .map(|(n, vn)| norm_of(&child_at(cs, &Formula::Bot, n), &vn))
                .fold(Rat::zero(), |a, b| a + b)
        }
        Formula::And(cs) => {
            // sum over n of 2^-(n+1) max(|v_n|_n, |v_{n+1}|_{n+1});
            // only components in the support and their predecessors matter
            let comps = decompose(v);
            let norms: std::collections::BTreeMap<u64, Rat> = comps
                .into_iter()
                .map(|(n, vn)| {
                    let nm = norm_of(&child_at(cs, &Formula::Top, n), &vn);
                    (n, nm)
                })
                .collect();
            let mut positions: std::collections::BTreeSet<u64> = Default::default();
            for &n in norms.keys() {
                positions.insert(n);
                if n > 0 {
                    positions.insert(n - 1);
                }
            }
            let zero = Rat::zero();
            let mut total = Rat::zero();
            for n in positions {
                let a = norms.get(&n).unwrap_or(&zero);
                let b = norms.get(&(n + 1)).unwrap_or(&zero);
                total = total + Rat::pow2(-(n as i64 + 1)) * a.clone().max(b.clone());
            }
            total
        }
    }
}

fn func_of(phi: &Formula, v: &QVec) -> Rat {
    match phi {
        Formula::Top => v.iter().fold(Rat::zero(), |a, (_, q)| a + q),
        Formula::Bot => v
            .iter()
            .fold(Rat::zero(), |a, (n, q)| a + Rat::pow2(-(n as i64 + 1)) * q),
        Formula::Or(cs) => decompose(v)
            .into_iter()
            .map(|(n, vn)| func_of(&child_at(cs, &Formula::Bot, n), &vn))
            .fold(Rat::zero(), |a, b| a + b),
        Formula::And(cs) => decompose(v)
            .into_iter()
            .map(|(n, vn)| and_coeff(n) * func_of(&child_at(cs, &Formula::Top, n), &vn))
            .fold(Rat::zero(), |a, b| a + b),
    }
}

/// A compiled formula: an exact norm and an exact linear functional on
/// finitely supported rational vectors, with |func| <= norm and sup of func
/// over the completed unit ball equal to 1.
#[derive(Clone)]
pub struct NormedPair {
    formula: Formula,
}

impl NormedPair {
    pub fn top() -> NormedPair {
        NormedPair { formula: Formula::Top }
    }

    pub fn bot() -> NormedPair {
        NormedPair { formula: Formula::Bot }
    }

    pub fn compile(phi: &Formula) -> NormedPair {
        NormedPair { formula: phi.clone() }
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn norm(&self, v: &QVec) -> Rat {
        norm_of(&self.formula, v)
    }

    pub fn func(&self, v: &QVec) -> Rat {
        func_of(&self.formula, v)
    }
}

/// Exact supremum of the functional over vectors of norm <= 1 supported on
/// formula components 0..=comp_bound and leaf coordinates 0..=coord_bound.
///
/// Leaves are closed forms; disjunction maximizes componentwise; conjunction
/// needs an LP because its norm couples consecutive components: with s_n the
/// child suprema and t_n the component norms, maximize sum c_n s_n t_n
/// subject to u_n >= t_n, u_n >= t_{n+1}, sum 2^-(n+1) u_n <= 1.
pub fn sup_unit_ball(phi: &Formula, comp_bound: u32, coord_bound: u32) -> Result<Rat> {
    match phi {
        Formula::Top => Ok(Rat::one()),
        Formula::Bot => Ok(Rat::one() - Rat::pow2(-(coord_bound as i64 + 1))),
        Formula::Or(cs) => {
            let mut best = Rat::zero();
            for n in 0..=comp_bound as u64 {
                let s = sup_unit_ball(&child_at(cs, &Formula::Bot, n), comp_bound, coord_bound)?;
                best = best.max(s);
            }
            Ok(best)
        }
        Formula::And(cs) => {
            let jj = comp_bound as usize + 1; // components 0..=J
            let mut sups = Vec::with_capacity(jj);
            for n in 0..jj as u64 {
                sups.push(sup_unit_ball(
                    &child_at(cs, &Formula::Top, n),
                    comp_bound,
                    coord_bound,
                )?);
            }
            // variables: t_0..t_J, u_0..u_J
            let mut objective = Vec::with_capacity(2 * jj);
            for (n, s) in sups.iter().enumerate() {
                objective.push(and_coeff(n as u64) * s);
            }
            objective.extend(std::iter::repeat_with(Rat::zero).take(jj));
            let mut rows = Vec::new();
            for n in 0..jj {
                // u_n >= t_n
                let mut r = vec![Rat::zero(); 2 * jj];
                r[n] = Rat::one();
                r[jj + n] = -Rat::one();
                rows.push((r, Rat::zero()));
                // u_n >= t_{n+1} whenever t_{n+1} is a variable
                if n + 1 < jj {
                    let mut r = vec![Rat::zero(); 2 * jj];
                    r[n + 1] = Rat::one();
                    r[jj + n] = -Rat::one();
                    rows.push((r, Rat::zero()));
                }
            }
            let mut weights = vec![Rat::zero(); 2 * jj];
            for (n, w) in weights.iter_mut().skip(jj).enumerate() {
                *w = Rat::pow2(-(n as i64 + 1));
            }
            rows.push((weights, Rat::one()));
            Ok(maximize(&Lp { objective, rows })?.value)
        }
    }
}

/// Witness stream for a true formula: truncation(m) is a vector of norm <= 1
/// with both 1 - norm and 1 - func bounded by 2^(1-m), and consecutive
/// truncations at most 3 * 2^-m apart, so shifting by two depths gives a
/// fast-converging point stream.
pub struct Witness {
    formula: Formula,
}

fn witness_vec(phi: &Formula, m: u32) -> QVec {
    match phi {
        Formula::Top => QVec::unit(0),
        Formula::Bot => unreachable!("witnesses exist only for true formulas"),
        Formula::Or(cs) => {
            let i = cs
                .iter()
                .position(Formula::truth)
                .expect("a true disjunction has a true child");
            embed_component(i as u64, &witness_vec(&cs[i], m))
        }
        Formula::And(cs) => {
            // deepening the inner truncation with the component index keeps
            // the loss geometric across nesting levels: child n contributes
            // deficit ~ c_n * 2^-(m+n+2), which sums to at most 2^-m / 4
            let mut out = QVec::zero();
            for n in 0..m as u64 {
                let c = child_at(cs, &Formula::Top, n);
                let w = witness_vec(&c, m + n as u32 + 2);
                out = out.add(&embed_component(n, &w));
            }
            out
        }
    }
}

impl Witness {
    pub fn truncation(&self, m: u32) -> QVec {
        witness_vec(&self.formula, m)
    }

    /// The witness as a point of the compiled space; entry n is the
    /// truncation at depth n+2, which meets the 2^-n step modulus.
    pub fn point(&self) -> Point {
        let space: Arc<dyn MetricSpace> = Arc::new(PairSpace::new(NormedPair::compile(&self.formula)));
        let phi = self.formula.clone();
        Point::from_fn(space, move |n| {
            Ok(DenseElem::V(witness_vec(&phi, n as u32 + 2)))
        })
    }
}

/// Some(witness) iff the formula is true.
pub fn synthesize_witness(phi: &Formula) -> Option<Witness> {
    if phi.truth() {
        Some(Witness { formula: phi.clone() })
    } else {
        None
    }
}

/// The compiled space as a metric space: dense sequence enumerates all
/// finitely supported vectors, distance is the exact norm of the difference.
pub struct PairSpace {
    pair: NormedPair,
}

impl PairSpace {
    pub fn new(pair: NormedPair) -> PairSpace {
        PairSpace { pair }
    }

    pub fn pair(&self) -> &NormedPair {
        &self.pair
    }
}

impl MetricSpace for PairSpace {
    fn dense(&self, n: usize) -> DenseElem {
        DenseElem::V(qvec_at(n as u64))
    }

    fn metric(&self, a: &DenseElem, b: &DenseElem, _k: u32) -> Result<Rat> {
        match (a, b) {
            (DenseElem::V(x), DenseElem::V(y)) => Ok(self.pair.norm(&x.sub(y))),
            _ => Err(Error::contract("metric", "expected vector elements")),
        }
    }

    fn exact(&self) -> bool {
        true
    }

    fn descriptor(&self) -> String {
        format!("formula:{}", self.pair.formula())
    }
}

/// The three-ball membership problem over the augmented space whose elements
/// are triples (x, y, z) with norm max{|x|, |y|, |z|_M, |x + y + F(z)|}.
/// All three unit balls intersect exactly when F attains 1 on the unit ball
/// of M's completion: the first two centers force x = y = 1, and the third
/// then demands F(z) >= 1.
pub struct BallProblem {
    pub pair: NormedPair,
}

pub fn ball_centers() -> [(Rat, Rat, QVec); 3] {
    [
        (Rat::from_int(2), Rat::zero(), QVec::zero()),
        (Rat::zero(), Rat::from_int(2), QVec::zero()),
        (Rat::from_int(2), Rat::from_int(2), QVec::zero()),
    ]
}

impl BallProblem {
    pub fn new(pair: NormedPair) -> BallProblem {
        BallProblem { pair }
    }

    pub fn mf_norm(&self, x: &Rat, y: &Rat, z: &QVec) -> Rat {
        let lin = (x + y + self.pair.func(z)).abs();
        x.abs().max(y.abs()).max(self.pair.norm(z)).max(lin)
    }

    pub fn dist_to_center(&self, center: usize, x: &Rat, y: &Rat, z: &QVec) -> Rat {
        let (cx, cy, _) = &ball_centers()[center];
        self.mf_norm(&(x - cx), &(y - cy), z)
    }

    /// Exact membership in all three unit balls.
    pub fn contains_exact(&self, x: &Rat, y: &Rat, z: &QVec) -> bool {
        (0..3).all(|c| self.dist_to_center(c, x, y, z) <= Rat::one())
    }

    /// Membership with slack 2^-k, for stream truncations.
    pub fn contains_within(&self, x: &Rat, y: &Rat, z: &QVec, k: u32) -> bool {
        let bound = Rat::one() + Rat::pow2(-(k as i64));
        (0..3).all(|c| self.dist_to_center(c, x, y, z) <= bound)
    }

    /// Distance from (x, y, lim z) to a center, as a real; the norm is
    /// 1-Lipschitz in z so stream entries transfer their accuracy.
    pub fn center_dist_point(&self, center: usize, x: &Rat, y: &Rat, z: &Point) -> CReal {
        let pair = self.pair.clone();
        let (cx, cy, _) = ball_centers()[center].clone();
        let (x, y, z) = (x.clone(), y.clone(), z.clone());
        CReal::from_fn(move |k| {
            let e = z.entry(k as usize + 2)?;
            let DenseElem::V(v) = e else {
                return Err(Error::contract("ball", "expected a vector stream"));
            };
            let bp = BallProblem { pair: pair.clone() };
            Ok(bp.mf_norm(&(&x - &cx), &(&y - &cy), &v))
        })
    }

    /// True iff (x, y, lim z) is within 1 + 2^-k of all three centers.
    pub fn contains_point(&self, x: &Rat, y: &Rat, z: &Point, k: u32) -> Result<bool> {
        let bound = Rat::one() + Rat::pow2(-(k as i64));
        for c in 0..3 {
            let d = self.center_dist_point(c, x, y, z).approx(k + 2)?;
            if d - Rat::pow2(-(k as i64 + 2)) > bound {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Finitely many ball problems glued with the l2 combination of their norms.
/// Centers of problem n live in coordinate n (zero elsewhere), so a witness
/// supported in coordinate n solves the lifted problem n.
pub struct EuclideanProduct {
    pub factors: Vec<BallProblem>,
}

impl EuclideanProduct {
    pub fn new(factors: Vec<BallProblem>) -> EuclideanProduct {
        EuclideanProduct { factors }
    }

    /// l2 norm of a finitely supported coordinate list; exact squares under
    /// the root, so perfect squares come back exact.
    pub fn norm(&self, coords: &[(Rat, Rat, QVec)]) -> CReal {
        let mut sq = Rat::zero();
        for (f, (x, y, z)) in self.factors.iter().zip(coords) {
            let n = f.mf_norm(x, y, z);
            sq = sq + &n * &n;
        }
        CReal::from_rat(sq).sqrt_nonneg()
    }

    /// Distance from a coordinate list to center `center` of problem
    /// `coordinate`, lifted with zeros elsewhere.
    pub fn dist_to_lifted_center(
        &self,
        coords: &[(Rat, Rat, QVec)],
        coordinate: usize,
        center: usize,
    ) -> CReal {
        let mut sq = Rat::zero();
        for (i, (f, (x, y, z))) in self.factors.iter().zip(coords).enumerate() {
            let d = if i == coordinate {
                f.dist_to_center(center, x, y, z)
            } else {
                f.mf_norm(x, y, z)
            };
            sq = sq + &d * &d;
        }
        CReal::from_rat(sq).sqrt_nonneg()
    }

    /// Membership of the lifted problem `coordinate` with slack 2^-k.
    pub fn contains_lifted(
        &self,
        coords: &[(Rat, Rat, QVec)],
        coordinate: usize,
        k: u32,
    ) -> Result<bool> {
        let bound = Rat::one() + Rat::pow2(-(k as i64));
        for c in 0..3 {
            let d = self
                .dist_to_lifted_center(coords, coordinate, c)
                .approx(k + 2)?;
            if d - Rat::pow2(-(k as i64 + 2)) > bound {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rat {
        Rat::new(n, d)
    }

    fn f(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    fn vec3(a: i64, b: i64, c: i64) -> QVec {
        QVec::from_slice(&[Rat::from_int(a), Rat::from_int(b), Rat::from_int(c)])
    }

    #[test]
    fn parser_roundtrips_and_reports_positions() {
        for s in ["T", "F", "or(T,F)", "and(or(T,F),F,T)"] {
            assert_eq!(f(s).to_string(), s);
        }
        assert_eq!(f(" and ( T , F ) "), f("and(T,F)"));
        let e = Formula::parse("or(T").unwrap_err();
        assert!(matches!(e, Error::Parse { pos: 4, .. }), "{e}");
        let e = Formula::parse("x").unwrap_err();
        assert!(matches!(e, Error::Parse { pos: 0, .. }));
        let e = Formula::parse("and()").unwrap_err();
        assert!(matches!(e, Error::Parse { pos: 4, .. }));
        let e = Formula::parse("T,F").unwrap_err();
        assert!(matches!(e, Error::Parse { pos: 1, .. }));
    }

    #[test]
    fn truth_evaluation() {
        assert!(f("T").truth());
        assert!(!f("F").truth());
        assert!(f("or(F,T)").truth());
        assert!(!f("and(T,F)").truth());
        assert!(f("and(or(F,T),T)").truth());
    }

    #[test]
    fn attaining_leaf_norm_and_functional() {
        let top = NormedPair::top();
        assert_eq!(top.norm(&QVec::zero()), Rat::zero());
        assert_eq!(top.func(&QVec::zero()), Rat::zero());
        let v = vec3(1, -2, 3);
        assert_eq!(top.norm(&v), q(6, 1));
        assert_eq!(top.func(&v), q(2, 1));
        assert_eq!(top.norm(&QVec::unit(0)), Rat::one());
        assert_eq!(top.func(&QVec::unit(0)), Rat::one());
    }

    #[test]
    fn non_attaining_leaf_norm_and_functional() {
        let bot = NormedPair::bot();
        let v = vec3(1, -2, 3);
        assert_eq!(bot.norm(&v), q(3, 1));
        assert_eq!(bot.func(&v), q(3, 8));
        let ones = vec3(1, 1, 1);
        assert_eq!(bot.norm(&ones), Rat::one());
        assert_eq!(bot.func(&ones), q(7, 8));
    }

    #[test]
    fn disjunction_sums_component_norms() {
        let p = NormedPair::compile(&f("or(T,F,T)"));
        // norm-2 block in component 0 (l1 child), norm-3 block in component 1
        // (sup child)
        let v = embed_component(0, &QVec::from_slice(&[q(2, 1)]))
            .add(&embed_component(1, &QVec::from_slice(&[q(3, 1)])));
        assert_eq!(p.norm(&v), q(5, 1));
        assert_eq!(p.func(&v), q(2, 1) + q(3, 2));
    }

    #[test]
    fn conjunction_couples_neighbor_norms() {
        let p = NormedPair::compile(&f("and(T,T)"));
        let v = embed_component(0, &QVec::unit(0)).add(&embed_component(1, &QVec::unit(0)));
        assert_eq!(p.norm(&v), q(3, 4));
        assert_eq!(p.func(&v), q(5, 8));
    }

    #[test]
    fn disjunction_attains_through_provable_child() {
        let p = NormedPair::compile(&f("or(F,T)"));
        let w = embed_component(1, &QVec::unit(0));
        assert_eq!(p.norm(&w), Rat::one());
        assert_eq!(p.func(&w), Rat::one());
    }

    #[test]
    fn locality_of_combination_nodes() {
        let v = embed_component(0, &vec3(1, -2, 3));
        let a = NormedPair::compile(&f("or(T,F)"));
        let b = NormedPair::compile(&f("or(T,and(T,F))"));
        assert_eq!(a.norm(&v), b.norm(&v));
        assert_eq!(a.func(&v), b.func(&v));
        let c = NormedPair::compile(&f("and(F,T)"));
        let d = NormedPair::compile(&f("and(F,or(T,F))"));
        assert_eq!(c.norm(&v), d.norm(&v));
        assert_eq!(c.func(&v), d.func(&v));
    }

    #[test]
    fn sup_closed_forms() {
        assert_eq!(sup_unit_ball(&f("T"), 3, 5).unwrap(), Rat::one());
        assert_eq!(sup_unit_ball(&f("F"), 3, 2).unwrap(), q(7, 8));
        assert_eq!(sup_unit_ball(&f("or(F,F)"), 2, 2).unwrap(), q(7, 8));
    }

    #[test]
    fn sup_of_mixed_conjunction_is_the_lp_value() {
        // LP with child sups (1, 7/8): hand optimum 37/48 at t0 = t1 = 4/3
        assert_eq!(sup_unit_ball(&f("and(T,F)"), 1, 2).unwrap(), q(37, 48));
    }

    #[test]
    fn sup_of_provable_conjunctions_matches_uniform_scaling() {
        // all-provable children: optimum scales every component equally;
        // value (1 - 3*2^-(J+2)) / (1 - 2^-(J+1)), certified optimal by the
        // dual multipliers worked out by hand for J = 2
        assert_eq!(sup_unit_ball(&f("and(T,T)"), 1, 2).unwrap(), q(5, 6));
        assert_eq!(sup_unit_ball(&f("and(T,T)"), 2, 2).unwrap(), q(13, 14));
        assert_eq!(sup_unit_ball(&f("and(T,T,T)"), 2, 4).unwrap(), q(13, 14));
    }

    #[test]
    fn sup_grid_cross_check() {
        // float grid search over the J=1 LP feasible region at step 1/64
        // must stay below the exact optimum and come within Lipschitz reach
        let exact = sup_unit_ball(&f("and(T,F)"), 1, 2).unwrap().to_f64();
        let s0 = 1.0f64;
        let s1 = 0.875f64;
        let mut best = 0.0f64;
        let step = 1.0 / 64.0;
        // u0, u1 up to the largest values the weight row allows
        let mut u0 = 0.0f64;
        while u0 <= 2.0 {
            let mut u1 = 0.0;
            while 0.5 * u0 + 0.25 * u1 <= 1.0 + 1e-12 {
                let t0 = u0;
                let t1 = u0.min(u1);
                let val = 0.25 * t0 * s0 + 0.375 * t1 * s1;
                best = best.max(val);
                u1 += step;
            }
            u0 += step;
        }
        assert!(best <= exact + 1e-9);
        assert!(best >= exact - 0.05);
    }

    #[test]
    fn false_formulas_stay_below_one() {
        for phi in [
            f("F"),
            f("and(T,F)"),
            f("and(F,T)"),
            f("or(F,and(T,F))"),
            f("and(or(F,F),T)"),
            f("and(T,T,or(F,F))"),
        ] {
            assert!(!phi.truth());
            for jm in 0..=6u32 {
                let s = sup_unit_ball(&phi, jm, jm).unwrap();
                assert!(s < Rat::one(), "{phi} at {jm}: {s}");
            }
        }
    }

    #[test]
    fn witness_for_attaining_leaf_is_the_unit_vector() {
        let w = synthesize_witness(&f("T")).unwrap();
        assert_eq!(w.truncation(3), QVec::unit(0));
        assert_eq!(w.truncation(9), QVec::unit(0));
        assert!(synthesize_witness(&f("F")).is_none());
        assert!(synthesize_witness(&f("and(T,F)")).is_none());
    }

    #[test]
    fn witness_rates_for_two_way_conjunction_are_closed_forms() {
        let p = NormedPair::compile(&f("and(T,T)"));
        let w = synthesize_witness(&f("and(T,T)")).unwrap();
        for m in 1..9u32 {
            let fm = w.truncation(m);
            assert_eq!(p.norm(&fm), Rat::one() - Rat::pow2(-(m as i64)));
            assert_eq!(
                p.func(&fm),
                Rat::one() - q(3, 2) * Rat::pow2(-(m as i64))
            );
        }
    }

    #[test]
    fn witness_rates_hold_across_nesting() {
        for phi in [
            f("and(T,T)"),
            f("and(T,and(T,T))"),
            f("and(and(T,T),and(T,T))"),
            f("or(F,and(T,T))"),
            f("and(T,T,T)"),
            f("and(or(F,T),and(T,or(T,F)))"),
        ] {
            let p = NormedPair::compile(&phi);
            let w = synthesize_witness(&phi).unwrap();
            for m in 1..9u32 {
                let fm = w.truncation(m);
                let nm = p.norm(&fm);
                let fv = p.func(&fm);
                let rate = Rat::pow2(1 - m as i64);
                assert!(nm <= Rat::one(), "{phi} m={m}: norm {nm}");
                assert!(Rat::one() - &nm <= rate, "{phi} m={m}: norm {nm}");
                assert!(Rat::one() - &fv <= rate, "{phi} m={m}: func {fv}");
                let gap = p.norm(&w.truncation(m + 1).sub(&fm));
                assert!(
                    gap <= q(3, 1) * Rat::pow2(-(m as i64)),
                    "{phi} m={m}: gap {gap}"
                );
            }
        }
    }

    #[test]
    fn witness_point_stream_is_a_valid_point() {
        let w = synthesize_witness(&f("and(T,and(T,T))")).unwrap();
        let pt = w.point();
        let e = pt.entry(6).unwrap();
        let DenseElem::V(v) = e else { panic!("vector expected") };
        let p = NormedPair::compile(&f("and(T,and(T,T))"));
        assert!(Rat::one() - p.func(&v) <= Rat::pow2(-7));
    }

    #[test]
    fn three_ball_distances_on_identity_example() {
        // one-coordinate attaining space, F = identity on that coordinate
        let bp = BallProblem::new(NormedPair::top());
        let e0 = QVec::unit(0);
        for c in 0..3 {
            assert_eq!(
                bp.dist_to_center(c, &Rat::one(), &Rat::one(), &e0),
                Rat::one()
            );
        }
        assert!(bp.contains_exact(&Rat::one(), &Rat::one(), &e0));
        assert_eq!(
            bp.dist_to_center(2, &Rat::zero(), &Rat::zero(), &QVec::zero()),
            q(4, 1)
        );
        assert!(!bp.contains_exact(&Rat::zero(), &Rat::zero(), &QVec::zero()));
    }

    #[test]
    fn membership_forces_the_attainment_equations() {
        // grid over x, y at step 1/8 with a handful of z candidates: the only
        // exact members have x = y = 1, |z| = 1, F(z) = 1
        let bp = BallProblem::new(NormedPair::top());
        let zs = [
            QVec::zero(),
            QVec::unit(0),
            QVec::from_slice(&[q(1, 2)]),
            QVec::from_slice(&[q(1, 2), q(1, 2)]),
            QVec::from_slice(&[q(-1, 1)]),
            QVec::from_slice(&[q(1, 1), q(1, 8)]),
        ];
        let mut members = 0;
        for xi in -16..=24i64 {
            for yi in -16..=24i64 {
                let x = Rat::new(xi, 8);
                let y = Rat::new(yi, 8);
                for z in &zs {
                    if bp.contains_exact(&x, &y, z) {
                        members += 1;
                        assert_eq!(x, Rat::one());
                        assert_eq!(y, Rat::one());
                        assert_eq!(bp.pair.norm(z), Rat::one());
                        assert_eq!(bp.pair.func(z), Rat::one());
                    }
                }
            }
        }
        assert!(members > 0, "the witness triple must appear on the grid");
    }

    #[test]
    fn conjunction_witness_enters_the_balls() {
        let phi = f("and(T,T)");
        let bp = BallProblem::new(NormedPair::compile(&phi));
        let w = synthesize_witness(&phi).unwrap();
        for k in 2..8u32 {
            let zm = w.truncation(k + 2);
            assert!(bp.contains_within(&Rat::one(), &Rat::one(), &zm, k));
        }
        // and through the stream interface
        let pt = w.point();
        assert!(bp.contains_point(&Rat::one(), &Rat::one(), &pt, 6).unwrap());
        // a plainly distant triple is rejected at every precision
        let far = Point::constant(
            Arc::new(PairSpace::new(NormedPair::compile(&phi))),
            DenseElem::V(QVec::zero()),
        );
        assert!(!bp.contains_point(&Rat::zero(), &Rat::zero(), &far, 4).unwrap());
    }

    #[test]
    fn product_norm_is_euclidean() {
        let prod = EuclideanProduct::new(vec![
            BallProblem::new(NormedPair::top()),
            BallProblem::new(NormedPair::top()),
        ]);
        // coordinate norms 3 and 4
        let coords = [
            (q(3, 1), Rat::zero(), QVec::zero()),
            (Rat::zero(), q(4, 1), QVec::zero()),
        ];
        let n = prod.norm(&coords);
        assert_eq!(n.exact_value(), Some(q(5, 1)));
    }

    #[test]
    fn single_coordinate_product_reproduces_distances() {
        let prod = EuclideanProduct::new(vec![BallProblem::new(NormedPair::top())]);
        let coords = [(Rat::one(), Rat::one(), QVec::unit(0))];
        for c in 0..3 {
            let d = prod.dist_to_lifted_center(&coords, 0, c);
            assert_eq!(d.exact_value(), Some(Rat::one()));
        }
        assert!(prod.contains_lifted(&coords, 0, 8).unwrap());
    }

    #[test]
    fn coordinate_witness_solves_the_lifted_problem() {
        let phi = f("and(T,T)");
        let prod = EuclideanProduct::new(vec![
            BallProblem::new(NormedPair::top()),
            BallProblem::new(NormedPair::compile(&phi)),
        ]);
        let w = synthesize_witness(&phi).unwrap();
        let coords = [
            (Rat::zero(), Rat::zero(), QVec::zero()),
            (Rat::one(), Rat::one(), w.truncation(8)),
        ];
        assert!(prod.contains_lifted(&coords, 1, 5).unwrap());
        assert!(!prod.contains_lifted(&coords, 0, 5).unwrap());
    }

    fn arb_qvec_paired() -> impl Strategy<Value = QVec> {
        // vectors over paired coordinates touching components 0..3
        proptest::collection::vec((0u64..4, 0u64..3, -8i64..9, 1i64..6), 0..5).prop_map(|cells| {
            QVec::from_entries(
                cells
                    .into_iter()
                    .map(|(n, m, p, d)| (pair(n, m), Rat::new(p, d))),
            )
        })
    }

    fn test_pairs() -> Vec<NormedPair> {
        [
            "T",
            "F",
            "or(T,F)",
            "and(T,F)",
            "and(or(T,F),T,F)",
            "or(and(T,T),F)",
        ]
        .iter()
        .map(|s| NormedPair::compile(&f(s)))
        .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn norm_axioms_hold_exactly(v in arb_qvec_paired(), w in arb_qvec_paired(), n in -6i64..7, d in 1i64..5) {
            let c = Rat::new(n, d);
            for p in test_pairs() {
                let nv = p.norm(&v);
                prop_assert_eq!(p.norm(&v.scale(&c)), c.abs() * &nv);
                prop_assert!(p.norm(&v.add(&w)) <= &nv + p.norm(&w));
                prop_assert_eq!(nv.is_zero(), v.is_zero());
                prop_assert!(p.func(&v).abs() <= nv);
            }
        }

        #[test]
        fn functional_is_linear(v in arb_qvec_paired(), w in arb_qvec_paired(), n in -6i64..7, d in 1i64..5) {
            let c = Rat::new(n, d);
            for p in test_pairs() {
                let lhs = p.func(&v.scale(&c).add(&w));
                let rhs = &c * p.func(&v) + p.func(&w);
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
