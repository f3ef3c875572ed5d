//! Log-barrier path following for small convex programs with one linear
//! matrix inequality and a block of linear inequalities:
//!
//! ```text
//!   minimize   h(z)
//!   subject to F0 + sum_i z_i F_i  >= 0   (positive semidefinite)
//!              b + A z            >= 0   (componentwise)
//! ```
//!
//! Each centering step minimizes `t h(z) - log det F(z) - sum log(b + A z)`
//! by damped Newton; `t` grows geometrically until the central-path gap
//! bound `nu / t` drops below the requested tolerance.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Affine symmetric matrix map `F(z) = F0 + sum_i z_i F_i`.
#[derive(Clone, Debug)]
pub(crate) struct AffineMatrix {
    pub constant: DMatrix<f64>,
    pub coeffs: Vec<DMatrix<f64>>,
}

impl AffineMatrix {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (zi, fi) in z.iter().zip(&self.coeffs) {
            if *zi != 0.0 {
                m += fi * *zi;
            }
        }
        m
    }
}

/// Affine vector map `b + A z`.
#[derive(Clone, Debug)]
pub(crate) struct AffineVector {
    pub offset: DVector<f64>,
    pub matrix: DMatrix<f64>,
}

impl AffineVector {
    pub fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.offset + &self.matrix * z
    }

    pub fn len(&self) -> usize {
        self.offset.len()
    }
}

/// Objectives supported by the solver, each a separable function of an
/// affine image `v = b + A z` or linear in `z`.
#[derive(Clone, Debug)]
pub(crate) enum Objective {
    /// `c . z`
    Linear(DVector<f64>),
    /// `sum_k w_k f_k log(f_k / v_k)` over cells with `f_k > 0`.
    Kl { map: AffineVector, target: Vec<f64>, weights: Vec<f64> },
    /// `0.5 * |v - target|^2`
    SquaredDistance { map: AffineVector, target: Vec<f64> },
}

impl Objective {
    fn value(&self, z: &DVector<f64>) -> f64 {
        match self {
            Objective::Linear(c) => c.dot(z),
            Objective::Kl { map, target, weights } => {
                let v = map.eval(z);
                let mut total = 0.0;
                for k in 0..target.len() {
                    if target[k] > 0.0 {
                        if v[k] <= 0.0 {
                            return f64::INFINITY;
                        }
                        total += weights[k] * target[k] * (target[k] / v[k]).ln();
                    }
                }
                total
            }
            Objective::SquaredDistance { map, target } => {
                let v = map.eval(z);
                0.5 * v.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
        }
    }

    /// Adds `scale * gradient` and `scale * hessian` into the accumulators.
    fn accumulate(&self, z: &DVector<f64>, scale: f64, g: &mut DVector<f64>, h: &mut DMatrix<f64>) {
        match self {
            Objective::Linear(c) => *g += c * scale,
            Objective::Kl { map, target, weights } => {
                let v = map.eval(z);
                let n = target.len();
                let mut gv = DVector::zeros(n);
                let mut hv = DVector::zeros(n);
                for k in 0..n {
                    if target[k] > 0.0 {
                        let wf = weights[k] * target[k];
                        gv[k] = -wf / v[k];
                        hv[k] = wf / (v[k] * v[k]);
                    }
                }
                add_cell_terms(&map.matrix, &gv, &hv, scale, g, h);
            }
            Objective::SquaredDistance { map, target } => {
                let v = map.eval(z);
                let gv = DVector::from_iterator(v.len(), v.iter().zip(target).map(|(a, b)| a - b));
                let hv = DVector::from_element(v.len(), 1.0);
                add_cell_terms(&map.matrix, &gv, &hv, scale, g, h);
            }
        }
    }
}

/// `g += s A^T gv`, `h += s A^T diag(hv) A`.
fn add_cell_terms(
    a: &DMatrix<f64>,
    gv: &DVector<f64>,
    hv: &DVector<f64>,
    scale: f64,
    g: &mut DVector<f64>,
    h: &mut DMatrix<f64>,
) {
    *g += a.transpose() * gv * scale;
    let mut weighted = a.clone();
    for (k, mut row) in weighted.row_iter_mut().enumerate() {
        row *= hv[k] * scale;
    }
    *h += a.transpose() * weighted;
}

#[derive(Clone, Debug)]
pub(crate) struct Problem {
    pub lmi: AffineMatrix,
    pub inequalities: Option<AffineVector>,
    pub objective: Objective,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Settings {
    /// Target bound on `h(z) - h*`.
    pub gap_tol: f64,
    pub max_newton_steps: usize,
    pub t_initial: f64,
    pub t_factor: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { gap_tol: 1e-9, max_newton_steps: 5_000, t_initial: 1.0, t_factor: 8.0 }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Solution {
    pub z: DVector<f64>,
    /// Central-path bound `nu / t` on suboptimality.
    pub gap: f64,
    pub newton_steps: usize,
}

impl Problem {
    fn barrier_parameter(&self) -> f64 {
        (self.lmi.dim() + self.inequalities.as_ref().map_or(0, |c| c.len())) as f64
    }

    /// `-log det F(z) - sum log(c(z))`, or `None` outside the interior.
    fn barrier(&self, z: &DVector<f64>) -> Option<f64> {
        let chol = Cholesky::new(self.lmi.eval(z))?;
        let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let mut total = -logdet;
        if let Some(c) = &self.inequalities {
            for v in c.eval(z).iter() {
                if *v <= 0.0 {
                    return None;
                }
                total -= v.ln();
            }
        }
        Some(total)
    }

    fn merit(&self, z: &DVector<f64>, t: f64) -> Option<f64> {
        let b = self.barrier(z)?;
        let h = self.objective.value(z);
        if !h.is_finite() {
            return None;
        }
        Some(t * h + b)
    }

    fn derivatives(&self, z: &DVector<f64>, t: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = z.len();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        let inv = Cholesky::new(self.lmi.eval(z))?.inverse();
        let products: Vec<DMatrix<f64>> = self.lmi.coeffs.iter().map(|fi| &inv * fi).collect();
        for i in 0..n {
            g[i] -= products[i].trace();
            for j in 0..=i {
                // tr(F^-1 F_i F^-1 F_j)
                let v = products[i].component_mul(&products[j].transpose()).sum();
                h[(i, j)] += v;
                if i != j {
                    h[(j, i)] += v;
                }
            }
        }
        if let Some(c) = &self.inequalities {
            let v = c.eval(z);
            let gv = DVector::from_iterator(v.len(), v.iter().map(|x| -1.0 / x));
            let hv = DVector::from_iterator(v.len(), v.iter().map(|x| 1.0 / (x * x)));
            add_cell_terms(&c.matrix, &gv, &hv, 1.0, &mut g, &mut h);
        }
        self.objective.accumulate(z, t, &mut g, &mut h);
        Some((g, h))
    }

    /// Solves from a strictly feasible `z0`.
    pub fn solve(&self, z0: DVector<f64>, settings: Settings) -> Result<Solution> {
        if self.merit(&z0, settings.t_initial).is_none() {
            return Err(Error::NumericalFailure("barrier start point is not strictly feasible".into()));
        }
        let nu = self.barrier_parameter();
        let mut z = z0;
        let mut t = settings.t_initial;
        let mut steps = 0;
        loop {
            steps += self.center(&mut z, t, settings.max_newton_steps.saturating_sub(steps))?;
            let t_final = nu / settings.gap_tol;
            if t >= t_final {
                break;
            }
            t = (t * settings.t_factor).min(t_final);
        }
        // At the final stage nu / t equals gap_tol up to rounding.
        let gap = (nu / t).min(settings.gap_tol);
        Ok(Solution { z, gap, newton_steps: steps })
    }

    fn center(&self, z: &mut DVector<f64>, t: f64, budget: usize) -> Result<usize> {
        let mut steps = 0;
        loop {
            if steps >= budget {
                return Err(Error::IterationLimit { iterations: steps, residual: f64::NAN });
            }
            let (g, h) = self
                .derivatives(z, t)
                .ok_or_else(|| Error::NumericalFailure("iterate left the barrier domain".into()))?;
            let dz = newton_direction(&h, &g)?;
            let decrement = -g.dot(&dz);
            if decrement.is_nan() {
                return Err(Error::NumericalFailure("newton decrement is NaN".into()));
            }
            if decrement <= 2e-12 {
                return Ok(steps);
            }
            let f0 = self.merit(z, t).expect("iterate is interior");
            let mut alpha = 1.0;
            let accepted = loop {
                let trial = &*z + &dz * alpha;
                if trial == *z {
                    break None;
                }
                if let Some(f) = self.merit(&trial, t) {
                    if f <= f0 - 0.25 * alpha * decrement {
                        break Some((trial, f));
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-16 {
                    break None;
                }
            };
            steps += 1;
            match accepted {
                Some((trial, f)) => {
                    *z = trial;
                    // Progress below the merit's rounding level: centered as far
                    // as double precision allows.
                    if f0 - f <= 1e-13 * (1.0 + f0.abs()) {
                        return Ok(steps);
                    }
                }
                // Rounding floor: no descent is representable any more.
                None => return Ok(steps),
            }
        }
    }
}

fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = Cholesky::new(h.clone()) {
        return Ok(-chol.solve(g));
    }
    let scale = h.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut reg = h.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-12 * scale;
    }
    Cholesky::new(reg)
        .map(|c| -c.solve(g))
        .ok_or_else(|| Error::NumericalFailure("barrier hessian is not positive definite".into()))
}
