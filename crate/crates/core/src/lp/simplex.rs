//! Dense two-phase primal simplex with Bland's rule.

use std::fmt::Debug;
use std::ops::Neg;

use num_rational::BigRational;
use num_traits::{Num, Zero};
use serde::Serialize;

use super::program::ResponseFunctionProgram;
use crate::scalar::Scalar;

/// Arithmetic for the tableau; `tolerance` is zero in exact arithmetic.
pub trait LpField: Clone + Debug + Num + Neg<Output = Self> + PartialOrd {
    fn tolerance() -> Self;
    /// Largest total constraint residual accepted as feasible.
    fn feasibility_tolerance() -> Self;
    fn from_rational(v: &BigRational) -> Self;
}

impl LpField for BigRational {
    fn tolerance() -> Self {
        BigRational::zero()
    }

    fn feasibility_tolerance() -> Self {
        BigRational::zero()
    }

    fn from_rational(v: &BigRational) -> Self {
        v.clone()
    }
}

impl LpField for f64 {
    fn tolerance() -> Self {
        1e-12
    }

    fn feasibility_tolerance() -> Self {
        1e-10
    }

    fn from_rational(v: &BigRational) -> Self {
        Scalar::to_f64(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LpStatus<T> {
    Optimal { value: T, vertex: Vec<T> },
    Infeasible,
}

impl<T: Clone> LpStatus<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            LpStatus::Optimal { value, .. } => Some(value.clone()),
            LpStatus::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution<T> {
    pub min: LpStatus<T>,
    pub max: LpStatus<T>,
}

impl<T: Clone> LpSolution<T> {
    pub fn interval(&self) -> Option<(T, T)> {
        Some((self.min.value()?, self.max.value()?))
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self.min, LpStatus::Optimal { .. })
    }
}

struct Tableau<T> {
    /// `m` rows of `n` coefficients followed by the right-hand side.
    a: Vec<Vec<T>>,
    basis: Vec<usize>,
    n: usize,
}

impl<T: LpField> Tableau<T> {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col].clone();
        for v in self.a[row].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.a[row].clone();
        for (i, r) in self.a.iter_mut().enumerate() {
            if i == row || r[col].is_zero() {
                continue;
            }
            let f = r[col].clone();
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v = v.clone() - f.clone() * pv.clone();
                }
            }
            // keep exact zeros in float mode to avoid drift in the pivot column
            r[col] = T::zero();
        }
        self.basis[row] = col;
    }

    /// Reduced costs `c_j - c_B B^{-1} A_j` for columns `< limit`, plus the
    /// negated objective value in the last slot.
    fn reduced_costs(&self, cost: &[T], limit: usize) -> Vec<T> {
        let mut d: Vec<T> = (0..limit).map(|j| cost[j].clone()).collect();
        let mut value = T::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b].clone();
            if cb.is_zero() {
                continue;
            }
            for (j, dj) in d.iter_mut().enumerate() {
                *dj = dj.clone() - cb.clone() * self.a[i][j].clone();
            }
            value = value + cb * self.a[i][self.n].clone();
        }
        d.push(-value);
        d
    }

    /// Minimizes `cost` over columns `< limit` from the current feasible basis.
    fn optimize(&mut self, cost: &[T], limit: usize) {
        let tol = T::tolerance();
        let neg_tol = -tol.clone();
        loop {
            let d = self.reduced_costs(cost, limit);
            let Some(col) = (0..limit).find(|&j| d[j] < neg_tol) else { return };
            let mut best: Option<(usize, T)> = None;
            for (i, row) in self.a.iter().enumerate() {
                if row[col] > tol {
                    let ratio = row[self.n].clone() / row[col].clone();
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            // the feasible region lies in the probability simplex, so a
            // ratio-test failure would mean a malformed program
            let (row, _) = best.expect("bounded program");
            self.pivot(row, col);
        }
    }

    fn vertex(&self, n_vars: usize) -> Vec<T> {
        let mut x = vec![T::zero(); n_vars];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n_vars {
                x[b] = self.a[i][self.n].clone();
            }
        }
        x
    }
}

/// Minimum and maximum of the objective over the program's polytope.
pub fn solve_min_max<T: LpField>(p: &ResponseFunctionProgram) -> LpSolution<T> {
    let n_vars = p.variables.len();
    let m = p.rows.len();
    let n = n_vars + m;
    let mut a = Vec::with_capacity(m);
    for (i, row) in p.rows.iter().enumerate() {
        let negate = row.rhs < BigRational::zero();
        let sign = |v: T| if negate { -v } else { v };
        let mut r = vec![T::zero(); n + 1];
        for &j in &row.indices {
            r[j] = sign(T::one());
        }
        r[n_vars + i] = T::one();
        r[n] = sign(T::from_rational(&row.rhs));
        a.push(r);
    }
    let mut t = Tableau { a, basis: (n_vars..n).collect(), n };

    let phase1: Vec<T> = (0..n).map(|j| if j < n_vars { T::zero() } else { T::one() }).collect();
    t.optimize(&phase1, n);
    let residual = -t.reduced_costs(&phase1, n)[n].clone();
    if residual > T::feasibility_tolerance() {
        return LpSolution { min: LpStatus::Infeasible, max: LpStatus::Infeasible };
    }

    // drive artificial variables out of the basis, dropping redundant rows
    let mut i = 0;
    while i < t.basis.len() {
        if t.basis[i] >= n_vars {
            let tol = T::tolerance();
            let col = (0..n_vars).find(|&j| t.a[i][j] > tol || t.a[i][j] < -tol.clone());
            match col {
                Some(j) => t.pivot(i, j),
                None => {
                    t.a.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let solve = |sign: i8| {
        let mut tt = Tableau { a: t.a.clone(), basis: t.basis.clone(), n: t.n };
        let mut cost: Vec<T> = p
            .objective
            .iter()
            .map(|&c| match c * sign {
                1 => T::one(),
                -1 => -T::one(),
                _ => T::zero(),
            })
            .collect();
        cost.resize(n, T::zero());
        tt.optimize(&cost, n_vars);
        let value = tt.reduced_costs(&cost, n_vars)[n_vars].clone();
        let value = if sign > 0 { -value } else { value };
        LpStatus::Optimal { value, vertex: tt.vertex(n_vars) }
    };
    LpSolution { min: solve(1), max: solve(-1) }
}
