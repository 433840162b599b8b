//! The combinator language itself: programs over the four sorts (naturals,
//! reals, source-space points, target-space points) built from the fixed
//! basic functions and the closure operators, a sort checker, and a big-step
//! evaluator. Nothing outside the listed constructors exists; the compiled
//! evaluator from the parent module is reproduced here as an actual program
//! to witness that it lives inside the language.

use std::sync::Arc;

use crate::creal::CReal;
use crate::error::{Error, Result};
use crate::operators::{
    acc_approx, add_point, case_elem, case_op, ml_exact, ml_real, norm_point, smul_point,
    BanachOps, BanachPoint,
};
use crate::rat::Rat;
use crate::spaces::{point_dist, Point};

use super::{CandidateStream, EvalCtx, Internalizer, SeqNum};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sort {
    Nat,
    Real,
    PointX,
    PointM,
}

impl std::fmt::Display for Sort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Sort::Nat => "nat",
            Sort::Real => "real",
            Sort::PointX => "source point",
            Sort::PointM => "target point",
        };
        write!(f, "{name}")
    }
}

/// A program node. Argument access is positional; the sequence-forming
/// operators (primitive recursion, minimization, the limit and accumulation
/// operators) prepend their counter to the argument frame of their bodies.
#[derive(Clone, Debug)]
pub enum Prog {
    Proj(usize),
    ConstNat(u64),
    Succ(Box<Prog>),
    One,
    Add(Box<Prog>, Box<Prog>),
    Sub(Box<Prog>, Box<Prog>),
    Mul(Box<Prog>, Box<Prog>),
    Abs(Box<Prog>),
    DenseX(Box<Prog>),
    DistX(Box<Prog>, Box<Prog>),
    DenseM(Box<Prog>),
    AddM(Box<Prog>, Box<Prog>),
    SmulM(Box<Prog>, Box<Prog>),
    NormM(Box<Prog>),
    PrimRec {
        arg: Box<Prog>,
        base: Box<Prog>,
        step: Box<Prog>,
    },
    MuRec {
        body: Box<Prog>,
    },
    Case {
        scrutinee: Box<Prog>,
        threshold: Rat,
        below: Box<Prog>,
        above: Box<Prog>,
    },
    Ml {
        body: Box<Prog>,
    },
    Acc {
        mass: Box<Prog>,
        label: Box<Prog>,
    },
}

fn sort_err(detail: String) -> Error {
    Error::contract("sort", detail)
}

/// Static well-sortedness: returns the sort of the program under the given
/// argument frame.
pub fn sort_check(prog: &Prog, frame: &[Sort]) -> Result<Sort> {
    use Prog::*;
    let expect = |p: &Prog, s: Sort, frame: &[Sort]| -> Result<()> {
        let got = sort_check(p, frame)?;
        if got == s {
            Ok(())
        } else {
            Err(sort_err(format!("expected {s}, found {got}")))
        }
    };
    match prog {
        Proj(i) => frame
            .get(*i)
            .copied()
            .ok_or_else(|| sort_err(format!("argument {i} out of range"))),
        ConstNat(_) => Ok(Sort::Nat),
        Succ(a) => {
            expect(a, Sort::Nat, frame)?;
            Ok(Sort::Nat)
        }
        One => Ok(Sort::Real),
        Add(a, b) | Sub(a, b) | Mul(a, b) => {
            expect(a, Sort::Real, frame)?;
            expect(b, Sort::Real, frame)?;
            Ok(Sort::Real)
        }
        Abs(a) => {
            expect(a, Sort::Real, frame)?;
            Ok(Sort::Real)
        }
        DenseX(a) => {
            expect(a, Sort::Nat, frame)?;
            Ok(Sort::PointX)
        }
        DistX(a, b) => {
            expect(a, Sort::PointX, frame)?;
            expect(b, Sort::PointX, frame)?;
            Ok(Sort::Real)
        }
        DenseM(a) => {
            expect(a, Sort::Nat, frame)?;
            Ok(Sort::PointM)
        }
        AddM(a, b) => {
            expect(a, Sort::PointM, frame)?;
            expect(b, Sort::PointM, frame)?;
            Ok(Sort::PointM)
        }
        SmulM(a, b) => {
            expect(a, Sort::Real, frame)?;
            expect(b, Sort::PointM, frame)?;
            Ok(Sort::PointM)
        }
        NormM(a) => {
            expect(a, Sort::PointM, frame)?;
            Ok(Sort::Real)
        }
        PrimRec { arg, base, step } => {
            expect(arg, Sort::Nat, frame)?;
            let s = sort_check(base, frame)?;
            let mut inner = vec![Sort::Nat, s];
            inner.extend_from_slice(frame);
            let got = sort_check(step, &inner)?;
            if got != s {
                return Err(sort_err(format!(
                    "recursion step produces {got}, base produces {s}"
                )));
            }
            Ok(s)
        }
        MuRec { body } => {
            let mut inner = vec![Sort::Nat];
            inner.extend_from_slice(frame);
            expect(body, Sort::Nat, &inner)?;
            Ok(Sort::Nat)
        }
        Case {
            scrutinee,
            below,
            above,
            ..
        } => {
            expect(scrutinee, Sort::Real, frame)?;
            let s = sort_check(below, frame)?;
            if s != Sort::Real && s != Sort::PointM {
                return Err(sort_err(format!("case branches of sort {s}")));
            }
            let t = sort_check(above, frame)?;
            if t != s {
                return Err(sort_err(format!("case branches disagree: {s} vs {t}")));
            }
            Ok(s)
        }
        Ml { body } => {
            let mut inner = vec![Sort::Nat];
            inner.extend_from_slice(frame);
            let s = sort_check(body, &inner)?;
            if s != Sort::Real && s != Sort::PointM {
                return Err(sort_err(format!("limit over sort {s}")));
            }
            Ok(s)
        }
        Acc { mass, label } => {
            let mut inner = vec![Sort::Nat];
            inner.extend_from_slice(frame);
            expect(mass, Sort::Real, &inner)?;
            expect(label, Sort::PointM, &inner)?;
            Ok(Sort::PointM)
        }
    }
}

/// A runtime value of one of the four sorts.
pub enum Value<B: BanachOps + 'static> {
    Nat(u64),
    Real(CReal),
    PointX(Point),
    PointM(BanachPoint<B>),
}

impl<B: BanachOps + 'static> Clone for Value<B> {
    fn clone(&self) -> Self {
        match self {
            Value::Nat(n) => Value::Nat(*n),
            Value::Real(r) => Value::Real(r.clone()),
            Value::PointX(p) => Value::PointX(p.clone()),
            Value::PointM(p) => Value::PointM(p.clone()),
        }
    }
}

impl<B: BanachOps + 'static> std::fmt::Debug for Value<B> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Nat(n) => write!(f, "Nat({n})"),
            Value::Real(_) => write!(f, "Real(..)"),
            Value::PointX(_) => write!(f, "PointX(..)"),
            Value::PointM(_) => write!(f, "PointM(..)"),
        }
    }
}

impl<B: BanachOps + 'static> Value<B> {
    fn as_nat(&self) -> Result<u64> {
        match self {
            Value::Nat(n) => Ok(*n),
            _ => Err(sort_err("expected a natural".into())),
        }
    }
    fn as_real(&self) -> Result<CReal> {
        match self {
            Value::Real(r) => Ok(r.clone()),
            _ => Err(sort_err("expected a real".into())),
        }
    }
    fn as_point_m(&self) -> Result<BanachPoint<B>> {
        match self {
            Value::PointM(p) => Ok(p.clone()),
            _ => Err(sort_err("expected a target point".into())),
        }
    }
    fn as_point_x(&self) -> Result<Point> {
        match self {
            Value::PointX(p) => Ok(p.clone()),
            _ => Err(sort_err("expected a source point".into())),
        }
    }
}

/// Big-step evaluation. Fuel bounds the number of recursion steps and
/// minimization probes in this call tree; the lazily evaluated operators
/// (limits, accumulation, case) capture the remaining fuel by value, so
/// each later precision query restarts from that allotment.
pub fn eval<B: BanachOps + 'static>(
    ctx: &Arc<EvalCtx<B>>,
    prog: &Prog,
    args: &[Value<B>],
    fuel: u64,
) -> Result<Value<B>> {
    use Prog::*;
    if fuel == 0 {
        return Err(Error::budget("eval", "fuel exhausted"));
    }
    let fuel = fuel - 1;
    match prog {
        Proj(i) => args
            .get(*i)
            .cloned()
            .ok_or_else(|| sort_err(format!("argument {i} out of range"))),
        ConstNat(n) => Ok(Value::Nat(*n)),
        Succ(a) => Ok(Value::Nat(eval(ctx, a, args, fuel)?.as_nat()? + 1)),
        One => Ok(Value::Real(CReal::one())),
        Add(a, b) => {
            let x = eval(ctx, a, args, fuel)?.as_real()?;
            let y = eval(ctx, b, args, fuel)?.as_real()?;
            Ok(Value::Real(x.add(&y)))
        }
        Sub(a, b) => {
            let x = eval(ctx, a, args, fuel)?.as_real()?;
            let y = eval(ctx, b, args, fuel)?.as_real()?;
            Ok(Value::Real(x.sub(&y)))
        }
        Mul(a, b) => {
            let x = eval(ctx, a, args, fuel)?.as_real()?;
            let y = eval(ctx, b, args, fuel)?.as_real()?;
            Ok(Value::Real(x.mul(&y)))
        }
        Abs(a) => Ok(Value::Real(eval(ctx, a, args, fuel)?.as_real()?.abs())),
        DenseX(a) => {
            let n = eval(ctx, a, args, fuel)?.as_nat()?;
            Ok(Value::PointX(Point::constant(
                ctx.space.clone(),
                ctx.space.dense(n as usize),
            )))
        }
        DistX(a, b) => {
            let p = eval(ctx, a, args, fuel)?.as_point_x()?;
            let q = eval(ctx, b, args, fuel)?.as_point_x()?;
            Ok(Value::Real(point_dist(&p, &q)))
        }
        DenseM(a) => {
            let m = eval(ctx, a, args, fuel)?.as_nat()?;
            Ok(Value::PointM(BanachPoint::constant((ctx.target_elem)(m))))
        }
        AddM(a, b) => {
            let p = eval(ctx, a, args, fuel)?.as_point_m()?;
            let q = eval(ctx, b, args, fuel)?.as_point_m()?;
            Ok(Value::PointM(add_point(ctx.ops.clone(), &p, &q)))
        }
        SmulM(a, b) => {
            let r = eval(ctx, a, args, fuel)?.as_real()?;
            let p = eval(ctx, b, args, fuel)?.as_point_m()?;
            Ok(Value::PointM(smul_point(ctx.ops.clone(), &r, &p)))
        }
        NormM(a) => {
            let p = eval(ctx, a, args, fuel)?.as_point_m()?;
            Ok(Value::Real(norm_point(ctx.ops.clone(), &p)))
        }
        PrimRec { arg, base, step } => {
            let n = eval(ctx, arg, args, fuel)?.as_nat()?;
            if n >= fuel {
                return Err(Error::budget("eval", "recursion exceeds fuel"));
            }
            let mut acc = eval(ctx, base, args, fuel)?;
            for m in 0..n {
                let mut inner = vec![Value::Nat(m), acc];
                inner.extend_from_slice(args);
                acc = eval(ctx, step, &inner, fuel - m - 1)?;
            }
            Ok(acc)
        }
        MuRec { body } => {
            for n in 0..fuel {
                let mut inner = vec![Value::Nat(n)];
                inner.extend_from_slice(args);
                if eval(ctx, body, &inner, fuel - n)?.as_nat()? == 0 {
                    return Ok(Value::Nat(n));
                }
            }
            Err(Error::budget("eval", "minimization exceeds fuel"))
        }
        Case {
            scrutinee,
            threshold,
            below,
            above,
        } => {
            let sc = eval(ctx, scrutinee, args, fuel)?.as_real()?;
            let y = CReal::from_rat(threshold.clone());
            let bl = eval(ctx, below, args, fuel)?;
            let ab = eval(ctx, above, args, fuel)?;
            let cap = (ctx.budget.min(u32::MAX as u64)) as u32;
            match (bl, ab) {
                (Value::Real(bl), Value::Real(ab)) => {
                    let below_fn: Arc<dyn Fn(&CReal) -> Result<CReal> + Send + Sync> = {
                        let bl = bl.clone();
                        Arc::new(move |_| Ok(bl.clone()))
                    };
                    let above_fn: Arc<dyn Fn(&CReal) -> Result<CReal> + Send + Sync> = {
                        let ab = ab.clone();
                        Arc::new(move |_| Ok(ab.clone()))
                    };
                    Ok(Value::Real(case_op(below_fn, above_fn, y, cap)(&sc)))
                }
                (Value::PointM(bl), Value::PointM(ab)) => Ok(Value::PointM(case_elem(
                    ctx.ops.clone(),
                    bl,
                    ab,
                    y,
                    sc,
                    cap,
                ))),
                _ => Err(sort_err("case branches of mismatched sorts".into())),
            }
        }
        Ml { body } => {
            // probe the body's sort at index 0 to pick the carrier
            let mut inner = vec![Value::Nat(0)];
            inner.extend_from_slice(args);
            let probe = eval(ctx, body, &inner, fuel)?;
            let ctx2 = ctx.clone();
            let body = body.clone();
            let args: Vec<Value<B>> = args.to_vec();
            match probe {
                Value::Real(_) => {
                    let stream = Arc::new(move |j: u64| {
                        let mut inner = vec![Value::Nat(j)];
                        inner.extend_from_slice(&args);
                        eval(&ctx2, &body, &inner, fuel)?.as_real()
                    });
                    Ok(Value::Real(ml_real(stream)))
                }
                Value::PointM(_) => {
                    // points are snapped to dense elements one step finer
                    // than the seam the limit inspects, preserving fast
                    // converging streams and their limits
                    let ops = ctx.ops.clone();
                    let stream = Arc::new(move |j: u64| {
                        let mut inner = vec![Value::Nat(j)];
                        inner.extend_from_slice(&args);
                        eval(&ctx2, &body, &inner, fuel)?
                            .as_point_m()?
                            .approx(j as u32 + 3)
                    });
                    Ok(Value::PointM(ml_exact(ops, stream)))
                }
                _ => Err(sort_err("limit over a non-limit sort".into())),
            }
        }
        Acc { mass, label } => {
            let ctx2 = ctx.clone();
            let mass = mass.clone();
            let label = label.clone();
            let args: Vec<Value<B>> = args.to_vec();
            let ops = ctx.ops.clone();
            let budget = ctx.budget;
            let point = BanachPoint::from_fn(move |kk| {
                let h = {
                    let (ctx2, mass, args) = (ctx2.clone(), mass.clone(), args.clone());
                    move |n: u64| {
                        let (ctx2, mass, args) = (ctx2.clone(), mass.clone(), args.clone());
                        CReal::from_fn(move |p| {
                            let mut inner = vec![Value::Nat(n)];
                            inner.extend_from_slice(&args);
                            eval(&ctx2, &mass, &inner, fuel)?.as_real()?.approx(p)
                        })
                    }
                };
                let g = {
                    let (ctx2, label, args) = (ctx2.clone(), label.clone(), args.clone());
                    move |n: u64| {
                        let (ctx2, label, args) = (ctx2.clone(), label.clone(), args.clone());
                        BanachPoint::from_fn(move |p| {
                            let mut inner = vec![Value::Nat(n)];
                            inner.extend_from_slice(&args);
                            eval(&ctx2, &label, &inner, fuel)?.as_point_m()?.approx(p)
                        })
                    }
                };
                acc_approx(&*ops, &h, &g, kk, budget)
            });
            Ok(Value::PointM(point))
        }
    }
}

// ---- program builders ----

pub fn bx(p: Prog) -> Box<Prog> {
    Box::new(p)
}

/// The real constant 0 as 1 - 1.
pub fn zero_real() -> Prog {
    Prog::Sub(bx(Prog::One), bx(Prog::One))
}

/// The real constant 2 as 1 + 1.
pub fn two_real() -> Prog {
    Prog::Add(bx(Prog::One), bx(Prog::One))
}

/// The counter as a real: recursion adding 1 per step.
pub fn nat_as_real(n: Prog) -> Prog {
    Prog::PrimRec {
        arg: bx(n),
        base: bx(zero_real()),
        step: bx(Prog::Add(bx(Prog::One), bx(Prog::Proj(1)))),
    }
}

/// 2^j by recursion doubling.
pub fn pow2_real(j: Prog) -> Prog {
    Prog::PrimRec {
        arg: bx(j),
        base: bx(Prog::One),
        step: bx(Prog::Mul(bx(two_real()), bx(Prog::Proj(1)))),
    }
}

/// min via Case on the difference: seam at equal arguments, where the
/// branches agree.
pub fn min_real(a: Prog, b: Prog) -> Prog {
    Prog::Case {
        scrutinee: bx(Prog::Sub(bx(a.clone()), bx(b.clone()))),
        threshold: Rat::zero(),
        below: bx(a),
        above: bx(b),
    }
}

pub fn max_real(a: Prog, b: Prog) -> Prog {
    Prog::Case {
        scrutinee: bx(Prog::Sub(bx(a.clone()), bx(b.clone()))),
        threshold: Rat::zero(),
        below: bx(b),
        above: bx(a),
    }
}

/// Clamp to [0, 1] with the endpoints as agreeing seams.
pub fn clamp01(u: Prog) -> Prog {
    max_real(zero_real(), min_real(Prog::One, u))
}

/// Selects leaves[n] by a balanced comparison tree over the counter read as
/// a real; thresholds sit at half-integers so integer scrutinees never land
/// on a seam. Counters past the end take the last leaf.
pub fn select_by_counter(counter: Prog, leaves: &[Prog]) -> Prog {
    assert!(!leaves.is_empty(), "selection over no leaves");
    fn build(scrut: &Prog, leaves: &[Prog], lo: usize, hi: usize) -> Prog {
        if hi - lo == 1 {
            return leaves[lo].clone();
        }
        let mid = lo + (hi - lo) / 2;
        Prog::Case {
            scrutinee: bx(scrut.clone()),
            threshold: Rat::from_int(mid as i64) - Rat::new(1, 2),
            below: bx(build(scrut, leaves, lo, mid)),
            above: bx(build(scrut, leaves, mid, hi)),
        }
    }
    let scrut = nat_as_real(counter);
    build(&scrut, leaves, 0, leaves.len())
}

/// The tent profile of one prefix entry as a program: clamp of
/// 2 - d(x, x_entry) * 2^(i+3), with x at the given argument position.
pub fn tent_prog(i: usize, entry: u64, x_arg: usize) -> Prog {
    let d = Prog::DistX(
        bx(Prog::Proj(x_arg)),
        bx(Prog::DenseX(bx(Prog::ConstNat(entry)))),
    );
    let scaled = Prog::Mul(bx(pow2_real(Prog::ConstNat(i as u64 + 3))), bx(d));
    clamp01(Prog::Sub(bx(two_real()), bx(scaled)))
}

/// Product of the tents of a whole prefix.
pub fn weight_prog(sigma: &SeqNum, x_arg: usize) -> Prog {
    let mut w = Prog::One;
    for (i, s) in sigma.entries().iter().enumerate() {
        w = Prog::Mul(bx(w), bx(tent_prog(i, *s, x_arg)));
    }
    w
}

/// Snapshot of a candidate enumeration long enough for accumulation: scans
/// until two essentially full-weight candidates have appeared.
fn snapshot(ds: &CandidateStream) -> Result<Vec<SeqNum>> {
    let mut out = Vec::new();
    let mut full = 0;
    for n in 0..512usize {
        let sigma = ds.sigma(n)?;
        let w = ds.weight(n)?.approx(12)?;
        out.push(sigma);
        if w >= Rat::one() - Rat::pow2(-12) {
            full += 1;
            if full >= 2 {
                return Ok(out);
            }
        }
    }
    Err(Error::budget(
        "internalize",
        "no pair of full-weight candidates among the first 512",
    ))
}

/// The compiled evaluator as an actual program: for each stage the candidate
/// tables are baked into selection trees over the accumulation counter, the
/// stages are selected by the limit counter, and the whole thing is one
/// limit-of-accumulations term. The source point is the single argument.
/// Valid for evaluation up to the stated precision.
pub fn internalize_program<B: BanachOps + 'static>(
    intern: &Internalizer<B>,
    x: &Point,
    k_max: u32,
) -> Result<Prog> {
    let mut stages = Vec::new();
    for j in 0..=(k_max + 2) {
        let ds = intern.candidates(j + 2, x);
        let sigmas = snapshot(&ds)?;
        // inside Acc under Ml: frame is [acc counter, limit counter, x]
        let masses: Vec<Prog> = sigmas.iter().map(|s| weight_prog(s, 2)).collect();
        let mut labels = Vec::new();
        for sigma in &sigmas {
            let out = intern.fhat.query(sigma)?;
            let last = out.0.last().copied().ok_or_else(|| {
                Error::contract("internalize", "candidate with empty output")
            })?;
            labels.push(Prog::DenseM(bx(Prog::ConstNat(last))));
        }
        stages.push(Prog::Acc {
            mass: bx(select_by_counter(Prog::Proj(0), &masses)),
            label: bx(select_by_counter(Prog::Proj(0), &labels)),
        });
    }
    Ok(Prog::Ml {
        body: bx(select_by_counter(Prog::Proj(0), &stages)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::{rat_at, rat_index};
    use crate::internal::{prefix_map_affine, prefix_map_id};
    use crate::operators::RealOps;
    use crate::spaces::{DenseElem, MetricSpace, RSpace};

    fn q(n: i64, d: i64) -> Rat {
        Rat::new(n, d)
    }

    fn ctx() -> Arc<EvalCtx<RealOps>> {
        Arc::new(EvalCtx {
            space: Arc::new(RSpace),
            ops: Arc::new(RealOps),
            target_elem: Arc::new(rat_at),
            budget: 200_000,
        })
    }

    fn eval_real(prog: &Prog, args: &[Value<RealOps>], k: u32) -> Rat {
        eval(&ctx(), prog, args, 1_000_000)
            .unwrap()
            .as_real()
            .unwrap()
            .approx(k)
            .unwrap()
    }

    /// predecessor: recursion whose step returns the counter
    fn pred(n: Prog) -> Prog {
        Prog::PrimRec {
            arg: bx(n),
            base: bx(Prog::ConstNat(0)),
            step: bx(Prog::Proj(0)),
        }
    }

    #[test]
    fn sort_checker_accepts_the_basics() {
        assert_eq!(
            sort_check(&Prog::Succ(bx(Prog::ConstNat(3))), &[]).unwrap(),
            Sort::Nat
        );
        let three = Prog::Add(bx(two_real()), bx(Prog::One));
        assert_eq!(sort_check(&three, &[]).unwrap(), Sort::Real);
        assert_eq!(
            sort_check(&nat_as_real(Prog::Proj(0)), &[Sort::Nat]).unwrap(),
            Sort::Real
        );
        let norm = Prog::NormM(bx(Prog::SmulM(
            bx(two_real()),
            bx(Prog::DenseM(bx(Prog::ConstNat(3)))),
        )));
        assert_eq!(sort_check(&norm, &[]).unwrap(), Sort::Real);
    }

    #[test]
    fn sort_checker_rejects_mismatches() {
        // a natural where a real is required
        let bad = Prog::Add(bx(Prog::ConstNat(1)), bx(Prog::One));
        assert!(sort_check(&bad, &[]).is_err());
        // out-of-range argument
        assert!(sort_check(&Prog::Proj(2), &[Sort::Nat]).is_err());
        // case over naturals
        let bad = Prog::Case {
            scrutinee: bx(Prog::One),
            threshold: Rat::zero(),
            below: bx(Prog::ConstNat(0)),
            above: bx(Prog::ConstNat(1)),
        };
        assert!(sort_check(&bad, &[]).is_err());
        // accumulation whose mass is a point
        let bad = Prog::Acc {
            mass: bx(Prog::DenseM(bx(Prog::ConstNat(0)))),
            label: bx(Prog::DenseM(bx(Prog::ConstNat(0)))),
        };
        assert!(sort_check(&bad, &[]).is_err());
        // recursion whose step changes sort
        let bad = Prog::PrimRec {
            arg: bx(Prog::ConstNat(2)),
            base: bx(Prog::One),
            step: bx(Prog::Proj(0)),
        };
        assert!(sort_check(&bad, &[]).is_err());
    }

    #[test]
    fn arithmetic_composition_evaluates() {
        let three = Prog::Add(bx(Prog::Add(bx(Prog::One), bx(Prog::One))), bx(Prog::One));
        assert_eq!(eval_real(&three, &[], 10), q(3, 1));
        let diff = Prog::Abs(bx(Prog::Sub(bx(Prog::One), bx(two_real()))));
        assert_eq!(eval_real(&diff, &[], 10), Rat::one());
    }

    #[test]
    fn recursion_doubles_to_powers_of_two() {
        let p = pow2_real(Prog::ConstNat(5));
        assert_eq!(eval_real(&p, &[], 10), q(32, 1));
        assert_eq!(eval_real(&pow2_real(Prog::ConstNat(0)), &[], 10), Rat::one());
    }

    #[test]
    fn minimization_finds_the_first_zero() {
        // 4 - n by iterated predecessor: first zero at n = 4
        let four_minus_n = Prog::PrimRec {
            arg: bx(Prog::Proj(0)),
            base: bx(Prog::ConstNat(4)),
            step: bx(pred(Prog::Proj(1))),
        };
        let mu = Prog::MuRec {
            body: bx(four_minus_n),
        };
        let v = eval(&ctx(), &mu, &[], 1_000).unwrap().as_nat().unwrap();
        assert_eq!(v, 4);
    }

    #[test]
    fn minimization_exhausts_fuel_when_never_zero() {
        let mu = Prog::MuRec {
            body: bx(Prog::ConstNat(1)),
        };
        let err = eval(&ctx(), &mu, &[], 500).unwrap_err();
        assert!(format!("{err}").contains("fuel") || format!("{err}").contains("budget"));
    }

    #[test]
    fn case_gives_min_and_max() {
        let m = min_real(two_real(), Prog::Add(bx(two_real()), bx(Prog::One)));
        assert!((eval_real(&m, &[], 10) - q(2, 1)).abs() <= Rat::pow2(-10));
        let m = max_real(two_real(), Prog::Add(bx(two_real()), bx(Prog::One)));
        assert!((eval_real(&m, &[], 10) - q(3, 1)).abs() <= Rat::pow2(-10));
        // seam: equal arguments
        let m = min_real(Prog::One, Prog::One);
        assert!((eval_real(&m, &[], 10) - Rat::one()).abs() <= Rat::pow2(-9));
    }

    #[test]
    fn dense_points_and_distances_evaluate() {
        // x_0 = 0 and x_1 = 1 on the line
        let d = Prog::DistX(
            bx(Prog::DenseX(bx(Prog::ConstNat(0)))),
            bx(Prog::DenseX(bx(Prog::ConstNat(1)))),
        );
        assert!((eval_real(&d, &[], 10) - Rat::one()).abs() <= Rat::pow2(-10));
        // || 2 * y_m || where y_m = 1/2
        let m = rat_index(&q(1, 2));
        let norm = Prog::NormM(bx(Prog::SmulM(
            bx(two_real()),
            bx(Prog::DenseM(bx(Prog::ConstNat(m)))),
        )));
        assert!((eval_real(&norm, &[], 10) - Rat::one()).abs() <= Rat::pow2(-9));
    }

    #[test]
    fn limit_of_alternating_signs_matches_the_direct_operator() {
        // stream n -> (-1)^n by recursion negating per step
        let alt = Prog::PrimRec {
            arg: bx(Prog::Proj(0)),
            base: bx(Prog::One),
            step: bx(Prog::Sub(bx(zero_real()), bx(Prog::Proj(1)))),
        };
        let prog = Prog::Ml { body: bx(alt) };
        let direct = ml_real(Arc::new(|n: u64| {
            Ok(CReal::from_rat(if n % 2 == 0 { Rat::one() } else { q(-1, 1) }))
        }));
        for k in [2u32, 6, 10] {
            let got = eval_real(&prog, &[], k);
            let want = direct.approx(k).unwrap();
            assert!(
                (&got - &want).abs() <= Rat::pow2(-(k as i64) + 1),
                "k={k}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn selection_tree_picks_each_leaf() {
        let leaves: Vec<Prog> = (0..5)
            .map(|v| {
                let mut e = zero_real();
                for _ in 0..v {
                    e = Prog::Add(bx(e), bx(Prog::One));
                }
                e
            })
            .collect();
        let table = select_by_counter(Prog::Proj(0), &leaves);
        for n in 0..5u64 {
            let got = eval_real(&table, &[Value::Nat(n)], 10);
            assert_eq!(got, Rat::from_int(n as i64), "leaf {n}");
        }
        // past the end: the last leaf
        let got = eval_real(&table, &[Value::Nat(9)], 10);
        assert_eq!(got, q(4, 1));
    }

    #[test]
    fn tent_program_matches_the_direct_tent() {
        let sp: Arc<dyn MetricSpace> = Arc::new(RSpace);
        let x = Point::constant(sp.clone(), DenseElem::Q(q(3, 16)));
        let want = crate::internal::tent(&sp, &x, 0, 0).approx(10).unwrap();
        let prog = tent_prog(0, 0, 0);
        let got = eval_real(&prog, &[Value::PointX(x)], 10);
        assert!((got - want).abs() <= Rat::pow2(-8));
    }

    #[test]
    fn compiled_program_agrees_with_the_direct_evaluator() {
        let intern = crate::internal::Internalizer {
            ctx: ctx(),
            fhat: Arc::new(prefix_map_id()),
        };
        for xv in [q(1, 3), q(-2, 5), q(7, 8)] {
            let x = Point::constant(Arc::new(RSpace), DenseElem::Q(xv.clone()));
            let k = 4u32;
            let prog = internalize_program(&intern, &x, k).unwrap();
            assert_eq!(
                sort_check(&prog, &[Sort::PointX]).unwrap(),
                Sort::PointM
            );
            let ast = eval(&ctx(), &prog, &[Value::PointX(x.clone())], 1_000_000)
                .unwrap()
                .as_point_m()
                .unwrap()
                .approx(k)
                .unwrap();
            let direct = intern.value(&x).approx(k).unwrap();
            assert!(
                (&ast - &direct).abs() <= Rat::pow2(-(k as i64) + 1),
                "x={xv}: {ast} vs {direct}"
            );
            // the program is the reference: it must sit within tolerance of
            // the true value as well
            assert!((&ast - &xv).abs() <= Rat::pow2(-(k as i64) + 1), "x={xv}");
        }
    }

    #[test]
    fn compiled_affine_program_matches_the_oracle() {
        let intern = crate::internal::Internalizer {
            ctx: ctx(),
            fhat: Arc::new(prefix_map_affine(&q(2, 1), &Rat::one())),
        };
        let xv = q(1, 3);
        let x = Point::constant(Arc::new(RSpace), DenseElem::Q(xv.clone()));
        let k = 4u32;
        let prog = internalize_program(&intern, &x, k).unwrap();
        let ast = eval(&ctx(), &prog, &[Value::PointX(x)], 1_000_000)
            .unwrap()
            .as_point_m()
            .unwrap()
            .approx(k)
            .unwrap();
        let want = q(2, 1) * &xv + Rat::one();
        assert!((&ast - &want).abs() <= Rat::pow2(-(k as i64) + 1), "{ast}");
    }
}
