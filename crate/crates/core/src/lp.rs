//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Problems are tiny here (tens of variables), so the full tableau is kept
//! dense and rebuilt per call. All variables are implicitly nonnegative.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const FEASIBILITY_EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Constraint { coeffs, relation, rhs }
    }

    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Constraint::new(coeffs, Relation::Eq, rhs)
    }

    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Constraint::new(coeffs, Relation::Le, rhs)
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Constraint::new(coeffs, Relation::Ge, rhs)
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Amount by which `x` violates the constraint (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.lhs(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `optimize objective . x` subject to `constraints` and `x >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, sense: Sense, constraints: Vec<Constraint>) -> Self {
        LinearProgram { objective, sense, constraints }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let n = self.n_vars();
        if let Some(c) = self.constraints.iter().find(|c| c.coeffs.len() != n) {
            return Err(Error::NumericalFailure(format!(
                "constraint has {} coefficients, program has {n} variables",
                c.coeffs.len()
            )));
        }
        let mut tableau = Tableau::build(self);
        tableau.phase_one()?;
        tableau.phase_two(self)?;
        let x: Vec<f64> = tableau.primal(n);
        let value = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { value, x, pivots: tableau.pivots })
    }
}

/// Row-major tableau. Column layout: structural vars, slack/surplus, artificials, rhs.
struct Tableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    n_struct: usize,
    first_artificial: usize,
    // Objective row (reduced costs of a minimization), length cols.
    cost: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let m = lp.constraints.len();
        // Normalize to rhs >= 0.
        let normalized: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let flipped = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|v| -v).collect(), flipped, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let n_slack = normalized.iter().filter(|c| c.1 != Relation::Eq).count();
        let n_art = normalized.iter().filter(|c| c.1 != Relation::Le).count();
        let first_artificial = n + n_slack;
        let cols = first_artificial + n_art + 1;
        let mut data = vec![0.0; m * cols];
        let mut basis = vec![0; m];
        let (mut slack, mut art) = (n, first_artificial);
        for (i, (coeffs, rel, rhs)) in normalized.iter().enumerate() {
            let row = &mut data[i * cols..(i + 1) * cols];
            row[..n].copy_from_slice(coeffs);
            row[cols - 1] = *rhs;
            match rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Tableau {
            rows: m,
            cols,
            data,
            basis,
            n_struct: n,
            first_artificial,
            cost: vec![0.0; cols],
            pivots: 0,
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols - 1)
    }

    /// Sets the cost row to `c` (over all columns) expressed in the current basis.
    fn price_out(&mut self, c: &[f64]) {
        self.cost.copy_from_slice(c);
        for r in 0..self.rows {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                for j in 0..self.cols {
                    self.cost[j] -= cb * self.data[r * self.cols + j];
                }
            }
        }
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let cols = self.cols;
        let pv = self.at(pr, pc);
        for j in 0..cols {
            self.data[pr * cols + j] /= pv;
        }
        let pivot_row: Vec<f64> = self.data[pr * cols..(pr + 1) * cols].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let factor = self.data[r * cols + pc];
            if factor != 0.0 {
                for (j, pj) in pivot_row.iter().enumerate() {
                    self.data[r * cols + j] -= factor * pj;
                }
                self.data[r * cols + pc] = 0.0;
            }
        }
        let factor = self.cost[pc];
        if factor != 0.0 {
            for (j, pj) in pivot_row.iter().enumerate() {
                self.cost[j] -= factor * pj;
            }
            self.cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Minimizes the priced-out cost row over columns `< allowed`, Bland's rule.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::NumericalFailure("simplex pivot limit exceeded".into()));
            }
            let Some(pc) = (0..allowed).find(|&j| self.cost[j] < -PIVOT_EPS) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-13
                                || (ratio <= bratio + 1e-13 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = best else {
                return Err(Error::NumericalFailure("linear program is unbounded".into()));
            };
            self.pivot(pr, pc);
        }
    }

    fn phase_one(&mut self) -> Result<()> {
        if self.first_artificial == self.cols - 1 {
            return Ok(());
        }
        let mut c = vec![0.0; self.cols];
        for v in c.iter_mut().take(self.cols - 1).skip(self.first_artificial) {
            *v = 1.0;
        }
        self.price_out(&c);
        self.optimize(self.cols - 1)?;
        let infeasibility: f64 = (0..self.rows)
            .filter(|&r| self.basis[r] >= self.first_artificial)
            .map(|r| self.rhs(r))
            .sum();
        if infeasibility > FEASIBILITY_EPS {
            return Err(Error::NumericalFailure(format!(
                "linear program is infeasible (phase-one residual {infeasibility:e})"
            )));
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < self.rows {
            if self.basis[r] >= self.first_artificial {
                match (0..self.first_artificial).find(|&j| self.at(r, j).abs() > PIVOT_EPS) {
                    Some(pc) => {
                        self.pivot(r, pc);
                        r += 1;
                    }
                    None => self.remove_row(r),
                }
            } else {
                r += 1;
            }
        }
        Ok(())
    }

    fn remove_row(&mut self, r: usize) {
        let cols = self.cols;
        self.data.drain(r * cols..(r + 1) * cols);
        self.basis.remove(r);
        self.rows -= 1;
    }

    fn phase_two(&mut self, lp: &LinearProgram) -> Result<()> {
        let mut c = vec![0.0; self.cols];
        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        for (j, v) in lp.objective.iter().enumerate() {
            c[j] = sign * v;
        }
        self.price_out(&c);
        self.optimize(self.first_artificial)
    }

    fn primal(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for r in 0..self.rows {
            let j = self.basis[r];
            if j < self.n_struct {
                x[j] = self.rhs(r).max(0.0);
            }
        }
        x
    }
}
