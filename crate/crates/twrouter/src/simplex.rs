//! Dense tableau simplex for `max c·x` subject to `Ax ≤ b` / `Ax = 0`, `x ≥ 0`.
//!
//! All right-hand sides are non-negative, so slacks give a feasible start.
//! Equality rows start with an artificial basic variable fixed at zero: it
//! blocks any entering column with a nonzero entry in its row and, once it
//! leaves, never returns.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Row<T> {
    pub coeffs: Vec<(usize, T)>,
    pub kind: RowKind,
    pub rhs: T,
}

#[derive(Clone, Debug)]
pub struct LinearProgram<T> {
    pub num_vars: usize,
    pub objective: Vec<(usize, T)>,
    pub rows: Vec<Row<T>>,
}

#[derive(Clone, Debug)]
pub struct LpResult<T> {
    pub x: Vec<T>,
    pub objective: T,
    pub pivots: usize,
}

const DEGENERATE_RUN: usize = 40;

impl<T: Scalar> LinearProgram<T> {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, T)>, kind: RowKind, rhs: T) {
        self.rows.push(Row { coeffs, kind, rhs });
    }

    pub fn solve(&self) -> Result<LpResult<T>> {
        Tableau::build(self)?.run()
    }
}

struct Tableau<T> {
    a: Vec<Vec<T>>,
    rhs: Vec<T>,
    z: Vec<T>,
    zval: T,
    basis: Vec<Option<usize>>,
    is_basic: Vec<bool>,
    num_vars: usize,
}

impl<T: Scalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Result<Self> {
        let slacks = lp.rows.iter().filter(|r| r.kind == RowKind::Le).count();
        let cols = lp.num_vars + slacks;
        let mut a = Vec::with_capacity(lp.rows.len());
        let mut rhs = Vec::with_capacity(lp.rows.len());
        let mut basis = Vec::with_capacity(lp.rows.len());
        let mut is_basic = vec![false; cols];
        let mut next_slack = lp.num_vars;
        for (i, row) in lp.rows.iter().enumerate() {
            if row.rhs < T::zero() {
                return Err(Error::Numerical(format!("row {i} has negative right-hand side")));
            }
            if row.kind == RowKind::Eq && !row.rhs.is_zero() {
                return Err(Error::Numerical(format!("equality row {i} has nonzero right-hand side")));
            }
            let mut dense = vec![T::zero(); cols];
            for (j, c) in &row.coeffs {
                if *j >= lp.num_vars {
                    return Err(Error::Numerical(format!("row {i} references variable {j}")));
                }
                dense[*j] = dense[*j].clone() + c.clone();
            }
            match row.kind {
                RowKind::Le => {
                    dense[next_slack] = T::one();
                    basis.push(Some(next_slack));
                    is_basic[next_slack] = true;
                    next_slack += 1;
                }
                RowKind::Eq => basis.push(None),
            }
            a.push(dense);
            rhs.push(row.rhs.clone());
        }
        let mut z = vec![T::zero(); cols];
        for (j, c) in &lp.objective {
            z[*j] = z[*j].clone() + c.clone();
        }
        Ok(Tableau {
            a,
            rhs,
            z,
            zval: T::zero(),
            basis,
            is_basic,
            num_vars: lp.num_vars,
        })
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let tol = T::lp_tol();
        let mut best: Option<usize> = None;
        for j in 0..self.z.len() {
            if self.is_basic[j] || self.z[j] <= tol {
                continue;
            }
            if bland {
                return Some(j);
            }
            match best {
                Some(b) if self.z[b] >= self.z[j] => {}
                _ => best = Some(j),
            }
        }
        best
    }

    fn leaving(&self, j: usize, bland: bool) -> Option<usize> {
        let tol = T::lp_tol();
        let mut best: Option<(usize, T)> = None;
        for i in 0..self.a.len() {
            let aij = &self.a[i][j];
            let ratio = match self.basis[i] {
                None => {
                    if aij.abs() > tol {
                        return Some(i);
                    }
                    continue;
                }
                Some(_) => {
                    if *aij <= tol {
                        continue;
                    }
                    self.rhs[i].clone() / aij.clone()
                }
            };
            let better = match &best {
                None => true,
                Some((b, r)) => {
                    if ratio < *r {
                        true
                    } else if ratio == *r {
                        if bland {
                            self.basis[i] < self.basis[*b]
                        } else {
                            self.a[i][j] > self.a[*b][j]
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((i, ratio));
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, p: usize, j: usize) {
        let piv = self.a[p][j].clone();
        let nz: Vec<usize> = (0..self.a[p].len()).filter(|&c| !self.a[p][c].is_zero()).collect();
        for &c in &nz {
            self.a[p][c] = self.a[p][c].clone() / piv.clone();
        }
        self.rhs[p] = self.rhs[p].clone() / piv;
        self.a[p][j] = T::one();
        let prow: Vec<(usize, T)> = nz.iter().map(|&c| (c, self.a[p][c].clone())).collect();
        let prhs = self.rhs[p].clone();
        let clean = !T::EXACT;
        let tiny = T::lp_tol() * T::lp_tol();
        for i in 0..self.a.len() {
            if i == p || self.a[i][j].is_zero() {
                continue;
            }
            let factor = self.a[i][j].clone();
            let row = &mut self.a[i];
            for (c, v) in &prow {
                let nv = row[*c].clone() - factor.clone() * v.clone();
                row[*c] = if clean && nv.abs() <= tiny { T::zero() } else { nv };
            }
            row[j] = T::zero();
            let nr = self.rhs[i].clone() - factor * prhs.clone();
            self.rhs[i] = if clean && nr.abs() <= tiny { T::zero() } else { nr };
        }
        if !self.z[j].is_zero() {
            let factor = self.z[j].clone();
            for (c, v) in &prow {
                self.z[*c] = self.z[*c].clone() - factor.clone() * v.clone();
            }
            self.z[j] = T::zero();
            self.zval = self.zval.clone() + factor * prhs;
        }
        if let Some(old) = self.basis[p] {
            self.is_basic[old] = false;
        }
        self.basis[p] = Some(j);
        self.is_basic[j] = true;
    }

    fn run(mut self) -> Result<LpResult<T>> {
        let limit = 50 * (self.a.len() + self.z.len()) + 1000;
        let mut pivots = 0;
        let mut degenerate = 0;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let Some(j) = self.entering(bland) else { break };
            let Some(p) = self.leaving(j, bland) else {
                return Err(Error::Numerical(format!("objective unbounded along column {j}")));
            };
            let step_zero = self.rhs[p].is_zero() || self.basis[p].is_none();
            self.pivot(p, j);
            pivots += 1;
            degenerate = if step_zero { degenerate + 1 } else { 0 };
            if pivots > limit {
                return Err(Error::Numerical(format!("simplex exceeded {limit} pivots")));
            }
        }
        let mut x = vec![T::zero(); self.num_vars];
        for (i, b) in self.basis.iter().enumerate() {
            if let Some(j) = *b {
                if j < self.num_vars {
                    let v = self.rhs[i].clone();
                    x[j] = if v < T::zero() { T::zero() } else { v };
                }
            }
        }
        Ok(LpResult {
            x,
            objective: self.zval,
            pivots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, Rational};

    #[test]
    fn textbook_lp() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let mut lp: LinearProgram<Rational> = LinearProgram::new(2);
        lp.objective = vec![(0, q(3, 1)), (1, q(5, 1))];
        lp.add_row(vec![(0, q(1, 1))], RowKind::Le, q(4, 1));
        lp.add_row(vec![(1, q(2, 1))], RowKind::Le, q(12, 1));
        lp.add_row(vec![(0, q(3, 1)), (1, q(2, 1))], RowKind::Le, q(18, 1));
        let r = lp.solve().unwrap();
        assert_eq!(r.objective, q(36, 1));
        assert_eq!(r.x, vec![q(2, 1), q(6, 1)]);
    }

    #[test]
    fn equality_rows_hold() {
        // max y, x - y = 0, x <= 1/2
        let mut lp: LinearProgram<f64> = LinearProgram::new(2);
        lp.objective = vec![(1, 1.0)];
        lp.add_row(vec![(0, 1.0), (1, -1.0)], RowKind::Eq, 0.0);
        lp.add_row(vec![(0, 1.0)], RowKind::Le, 0.5);
        let r = lp.solve().unwrap();
        assert!((r.objective - 0.5).abs() < 1e-12);
        assert!((r.x[0] - r.x[1]).abs() < 1e-12);
    }
}
