//! Exact rational linear programming, just enough for the unit-ball suprema:
//! maximize c.x subject to Ax <= b, x >= 0, with b >= 0 so the slack basis is
//! feasible from the start. Dense tableau simplex with Bland's rule, which
//! cannot cycle, so termination needs no fuel parameter.

use crate::error::{Error, Result};
use crate::rat::Rat;

pub struct Lp {
    pub objective: Vec<Rat>,
    /// Each row is (coefficients, bound) meaning coeffs . x <= bound.
    pub rows: Vec<(Vec<Rat>, Rat)>,
}

#[derive(Debug)]
pub struct LpSolution {
    pub value: Rat,
    pub point: Vec<Rat>,
}

/// Exact maximum of the LP, plus a point attaining it.
pub fn maximize(lp: &Lp) -> Result<LpSolution> {
    let n = lp.objective.len();
    let m = lp.rows.len();
    for (coeffs, b) in &lp.rows {
        if coeffs.len() != n {
            return Err(Error::invariant("lp", "row width does not match objective"));
        }
        if b.is_negative() {
            return Err(Error::invariant("lp", "bounds must be nonnegative"));
        }
    }
    // columns: n structural vars, m slacks, then the rhs
    let width = n + m + 1;
    let mut tab: Vec<Vec<Rat>> = Vec::with_capacity(m);
    for (i, (coeffs, b)) in lp.rows.iter().enumerate() {
        let mut row = vec![Rat::zero(); width];
        row[..n].clone_from_slice(coeffs);
        row[n + i] = Rat::one();
        row[width - 1] = b.clone();
        tab.push(row);
    }
    // reduced-cost row; slack basis means costs start as the raw objective
    let mut cost = vec![Rat::zero(); width];
    cost[..n].clone_from_slice(&lp.objective);
    let mut value = Rat::zero();
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        // Bland: entering variable is the lowest index with positive cost
        let Some(enter) = (0..n + m).find(|&j| cost[j].is_positive()) else {
            break;
        };
        // ratio test; Bland tie-break by lowest basis variable index
        let mut leave: Option<(usize, Rat)> = None;
        for (i, row) in tab.iter().enumerate() {
            if !row[enter].is_positive() {
                continue;
            }
            let ratio = &row[width - 1] / &row[enter];
            let better = match &leave {
                None => true,
                Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        let Some((pivot_row, _)) = leave else {
            return Err(Error::invariant("lp", "objective is unbounded"));
        };
        // normalize the pivot row, then eliminate the column everywhere else
        let piv = tab[pivot_row][enter].clone();
        for x in tab[pivot_row].iter_mut() {
            *x = &*x / &piv;
        }
        for i in 0..m {
            if i == pivot_row || tab[i][enter].is_zero() {
                continue;
            }
            let factor = tab[i][enter].clone();
            for j in 0..width {
                let delta = &factor * &tab[pivot_row][j];
                tab[i][j] = &tab[i][j] - &delta;
            }
        }
        if !cost[enter].is_zero() {
            let factor = cost[enter].clone();
            for j in 0..width {
                let delta = &factor * &tab[pivot_row][j];
                cost[j] = &cost[j] - &delta;
            }
            value = value + factor * &tab[pivot_row][width - 1];
        }
        basis[pivot_row] = enter;
    }

    let mut point = vec![Rat::zero(); n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            point[b] = tab[i][width - 1].clone();
        }
    }
    // defense in depth: the reported point must be exactly feasible and
    // reproduce the reported value
    let mut check = Rat::zero();
    for (c, x) in lp.objective.iter().zip(&point) {
        check = check + c * x;
    }
    if check != value {
        return Err(Error::invariant("lp", "optimal point does not reproduce value"));
    }
    for (coeffs, b) in &lp.rows {
        let mut s = Rat::zero();
        for (c, x) in coeffs.iter().zip(&point) {
            s = s + c * x;
        }
        if s > *b {
            return Err(Error::invariant("lp", "optimal point is infeasible"));
        }
    }
    Ok(LpSolution { value, point })
}
