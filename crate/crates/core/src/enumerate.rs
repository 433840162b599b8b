//! Fixed enumerations of countable dense sets.
//!
//! Downstream values (retraction barycenters, embedding images) depend on
//! these orderings, so they are frozen here and covered by tests:
//!
//! * `rat_at`: 0, 1, -1, 1/2, -1/2, 2, -2, 1/3, -1/3, 3, -3, ...
//!   (positive rationals by diagonals p+q = 2, 3, ... in increasing p,
//!   skipping non-reduced fractions, each followed by its negative)
//! * `rat2_at`: pairs of rationals through the Cantor pairing
//! * `pair`/`unpair`: the Cantor bijection N^2 <-> N

use num_integer::Integer;

use crate::qvec::QVec;
use crate::rat::Rat;

/// Cantor pairing (a, b) -> (a+b)(a+b+1)/2 + b.
///
/// Panics on u64 overflow rather than wrapping: a wrapped index would
/// silently collide with a small one and corrupt vector supports.
pub fn pair(a: u64, b: u64) -> u64 {
    let s = a.checked_add(b).expect("pairing index overflow");
    s.checked_add(1)
        .and_then(|s1| s.checked_mul(s1))
        .and_then(|t| (t / 2).checked_add(b))
        .expect("pairing index overflow")
}

pub fn unpair(n: u64) -> (u64, u64) {
    // Largest s with s(s+1)/2 <= n.
    let mut s = ((((8 * n + 1) as f64).sqrt() as u64).saturating_sub(1)) / 2;
    while (s + 1) * (s + 2) / 2 <= n {
        s += 1;
    }
    while s * (s + 1) / 2 > n {
        s -= 1;
    }
    let b = n - s * (s + 1) / 2;
    (s - b, b)
}

/// Positive rationals in diagonal order: 1, 1/2, 2, 1/3, 3, 1/4, 2/3, 3/2, 4, ...
fn pos_rat_at(idx: u64) -> Rat {
    let mut seen = 0u64;
    let mut diag = 2u64;
    loop {
        for p in 1..diag {
            let q = diag - p;
            if p.gcd(&q) == 1 {
                if seen == idx {
                    return Rat::new(p as i64, q as i64);
                }
                seen += 1;
            }
        }
        diag += 1;
    }
}

fn pos_rat_index(r: &Rat) -> u64 {
    let p: u64 = r.numer().try_into().expect("positive rational expected");
    let q: u64 = r.denom().try_into().expect("positive denominator");
    let target = p + q;
    let mut seen = 0u64;
    for diag in 2..=target {
        for pp in 1..diag {
            let qq = diag - pp;
            if pp.gcd(&qq) == 1 {
                if diag == target && pp == p {
                    return seen;
                }
                seen += 1;
            }
        }
    }
    unreachable!("reduced positive rational is on its diagonal")
}

/// The canonical enumeration of Q.
pub fn rat_at(n: u64) -> Rat {
    if n == 0 {
        return Rat::zero();
    }
    let k = (n - 1) / 2;
    let r = pos_rat_at(k);
    if n % 2 == 1 {
        r
    } else {
        -r
    }
}

/// Inverse of `rat_at`.
pub fn rat_index(r: &Rat) -> u64 {
    if r.is_zero() {
        return 0;
    }
    let k = pos_rat_index(&r.abs());
    if r.is_positive() {
        2 * k + 1
    } else {
        2 * k + 2
    }
}

/// The canonical enumeration of Q^2.
pub fn rat2_at(n: u64) -> (Rat, Rat) {
    let (a, b) = unpair(n);
    (rat_at(a), rat_at(b))
}

pub fn rat2_index(x: &Rat, y: &Rat) -> u64 {
    pair(rat_index(x), rat_index(y))
}

/// Enumeration of the finitely supported rational vectors. An index decodes
/// as a chain of (coordinate, nonzero rational) cells; every vector has a
/// canonical index (see `qvec_index`), so the map is surjective.
pub fn qvec_at(n: u64) -> QVec {
    let mut v = QVec::zero();
    let mut rest = n;
    while rest > 0 {
        // components of unpair(k) are strictly below k for k >= 1
        let (head, tail) = unpair(rest - 1);
        let (i, q) = unpair(head);
        v.set(i, rat_at(q + 1));
        rest = tail;
    }
    v
}

/// Canonical index of a vector: cells chained in decreasing coordinate order
/// so that decoding visits them increasingly. Inverse of `qvec_at` on
/// canonical indices; overflows u64 for large supports, so callers keep
/// vectors small.
pub fn qvec_index(v: &QVec) -> u64 {
    let mut acc = 0u64;
    let entries: Vec<(u64, Rat)> = v.iter().map(|(i, q)| (i, q.clone())).collect();
    for (i, q) in entries.iter().rev() {
        let cell = pair(*i, rat_index(q) - 1);
        acc = pair(cell, acc) + 1;
    }
    acc
}
