//! Polytopal hypothesis sets: no-signaling, the two one-way no-signaling
//! sets, and the local polytope.
//!
//! NS and OWNS are handled through their H-representation (nonnegativity,
//! per-setting normalization, marginal equalities). The local set is
//! handled through its deterministic vertices, with linear programs posed
//! over mixture weights.

use crate::error::Result;
use crate::hypothesis::HypothesisId;
use crate::lp::{Constraint, LinearProgram, Sense};
use crate::scenario::{BellFunctional, Correlation, Dims, Scenario};

/// Entries below this magnitude in an LP vertex are snapped to zero.
const VERTEX_SNAP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolytopeKind {
    NoSignaling,
    OwnsAnotB,
    OwnsBnotA,
    Local,
}

impl From<PolytopeKind> for HypothesisId {
    fn from(k: PolytopeKind) -> Self {
        match k {
            PolytopeKind::NoSignaling => HypothesisId::NoSignaling,
            PolytopeKind::OwnsAnotB => HypothesisId::OwnsAnotB,
            PolytopeKind::OwnsBnotA => HypothesisId::OwnsBnotA,
            PolytopeKind::Local => HypothesisId::Local,
        }
    }
}

/// Result of optimizing a linear form over a polytope.
#[derive(Clone, Debug)]
pub struct LpOutcome {
    pub value: f64,
    pub argument: Correlation,
}

#[derive(Clone, Debug)]
pub struct PolytopeSet {
    kind: PolytopeKind,
    scenario: Scenario,
    /// Normalization and marginal equalities over the probability table.
    equalities: Vec<Constraint>,
    /// Deterministic strategies; populated for the local polytope only.
    vertices: Vec<Correlation>,
}

impl PolytopeSet {
    pub fn build(kind: PolytopeKind, scenario: &Scenario) -> Self {
        let dims = scenario.dims();
        let mut equalities = normalization_rows(dims);
        match kind {
            PolytopeKind::NoSignaling | PolytopeKind::Local => {
                equalities.extend(bob_to_alice_rows(dims));
                equalities.extend(alice_to_bob_rows(dims));
            }
            PolytopeKind::OwnsBnotA => equalities.extend(bob_to_alice_rows(dims)),
            PolytopeKind::OwnsAnotB => equalities.extend(alice_to_bob_rows(dims)),
        }
        let vertices = if kind == PolytopeKind::Local { deterministic_vertices(dims) } else { vec![] };
        PolytopeSet { kind, scenario: scenario.clone(), equalities, vertices }
    }

    pub fn kind(&self) -> PolytopeKind {
        self.kind
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn dims(&self) -> Dims {
        self.scenario.dims()
    }

    /// Equality constraints (normalization first, then marginal equalities).
    pub fn equalities(&self) -> &[Constraint] {
        &self.equalities
    }

    /// Full H-representation including one nonnegativity row per cell.
    ///
    /// For the local polytope these are necessary conditions only; its exact
    /// description is the vertex list.
    pub fn h_rep(&self) -> Vec<Constraint> {
        let n = self.dims().cells();
        let mut rows = self.equalities.clone();
        rows.extend((0..n).map(|i| {
            let mut c = vec![0.0; n];
            c[i] = 1.0;
            Constraint::ge(c, 0.0)
        }));
        rows
    }

    /// Deterministic vertices, empty unless this is the local polytope.
    pub fn vertices(&self) -> &[Correlation] {
        &self.vertices
    }

    /// Optimizes the raw linear form `objective . P` over the polytope.
    ///
    /// For the local polytope the program runs over mixture weights of the
    /// vertices; among optimal vertices the lowest index is returned.
    pub fn optimize(&self, objective: &[f64], sense: Sense) -> Result<LpOutcome> {
        let dims = self.dims();
        debug_assert_eq!(objective.len(), dims.cells());
        match self.kind {
            PolytopeKind::Local => {
                let values: Vec<f64> = self.vertices.iter().map(|v| dot(objective, v.as_slice())).collect();
                let lp = LinearProgram::new(
                    values.clone(),
                    sense,
                    vec![Constraint::eq(vec![1.0; values.len()], 1.0)],
                );
                let sol = lp.solve()?;
                let better = |v: f64| match sense {
                    Sense::Maximize => v >= sol.value - 1e-12,
                    Sense::Minimize => v <= sol.value + 1e-12,
                };
                let best = values.iter().position(|&v| better(v)).unwrap_or(0);
                Ok(LpOutcome { value: sol.value, argument: self.vertices[best].clone() })
            }
            _ => {
                let lp = LinearProgram::new(objective.to_vec(), sense, self.equalities.clone());
                let sol = lp.solve()?;
                let probs = sol.x.into_iter().map(|p| if p < VERTEX_SNAP { 0.0 } else { p }).collect();
                Ok(LpOutcome {
                    value: sol.value,
                    argument: Correlation::from_raw(dims, probs),
                })
            }
        }
    }

    /// Maximum of `sum R P(x,y) P` over the polytope.
    pub fn max_functional(&self, functional: &BellFunctional) -> Result<LpOutcome> {
        self.optimize(&functional.weighted(&self.scenario), Sense::Maximize)
    }

    /// Exact maximum over the vertex list, bypassing the LP. Local polytope only.
    pub fn vertex_max(&self, objective: &[f64]) -> Option<(f64, usize)> {
        self.vertices
            .iter()
            .map(|v| dot(objective, v.as_slice()))
            .enumerate()
            .fold(None, |best, (i, v)| match best {
                Some((bv, _)) if bv >= v => best,
                _ => Some((v, i)),
            })
    }

    /// Membership within `tol`.
    ///
    /// For H-sets every constraint (equalities and nonnegativity) must hold
    /// within `tol`. For the local polytope, the sup-norm distance to the
    /// convex hull of the vertices must be at most `tol`.
    pub fn contains(&self, p: &Correlation, tol: f64) -> Result<bool> {
        assert!(tol > 0.0, "membership tolerance must be positive");
        if p.dims() != self.dims() {
            return Ok(false);
        }
        match self.kind {
            PolytopeKind::Local => Ok(self.hull_distance(p)? <= tol),
            _ => Ok(self.max_violation(p) <= tol),
        }
    }

    /// Largest violation of any H-representation row.
    pub fn max_violation(&self, p: &Correlation) -> f64 {
        let eq = self
            .equalities
            .iter()
            .map(|c| c.violation(p.as_slice()))
            .fold(0.0, f64::max);
        let neg = p.as_slice().iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
        eq.max(neg)
    }

    /// Sup-norm distance from `p` to the convex hull of the vertices (local polytope).
    pub fn hull_distance(&self, p: &Correlation) -> Result<f64> {
        let n = self.dims().cells();
        let nv = self.vertices.len();
        // Variables: weights w_0..w_{nv-1}, then the slack bound t.
        let mut constraints = Vec::with_capacity(2 * n + 1);
        let mut sum = vec![1.0; nv + 1];
        sum[nv] = 0.0;
        constraints.push(Constraint::eq(sum, 1.0));
        for i in 0..n {
            let mut row: Vec<f64> = self.vertices.iter().map(|v| v.as_slice()[i]).collect();
            row.push(-1.0);
            constraints.push(Constraint::le(row.clone(), p.as_slice()[i]));
            row[nv] = 1.0;
            constraints.push(Constraint::ge(row, p.as_slice()[i]));
        }
        let mut objective = vec![0.0; nv + 1];
        objective[nv] = 1.0;
        let sol = LinearProgram::new(objective, Sense::Minimize, constraints).solve()?;
        Ok(sol.value.max(0.0))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalization_rows(dims: Dims) -> Vec<Constraint> {
    let mut rows = Vec::with_capacity(dims.settings());
    for x in 0..dims.n_x {
        for y in 0..dims.n_y {
            let mut c = vec![0.0; dims.cells()];
            for a in 0..dims.n_a {
                for b in 0..dims.n_b {
                    c[dims.index(a, b, x, y)] = 1.0;
                }
            }
            rows.push(Constraint::eq(c, 1.0));
        }
    }
    rows
}

/// `sum_b P(a,b|x,y) = sum_b P(a,b|x,0)` for all `a, x` and `y > 0`.
fn bob_to_alice_rows(dims: Dims) -> Vec<Constraint> {
    let mut rows = Vec::new();
    for a in 0..dims.n_a {
        for x in 0..dims.n_x {
            for y in 1..dims.n_y {
                let mut c = vec![0.0; dims.cells()];
                for b in 0..dims.n_b {
                    c[dims.index(a, b, x, y)] += 1.0;
                    c[dims.index(a, b, x, 0)] -= 1.0;
                }
                rows.push(Constraint::eq(c, 0.0));
            }
        }
    }
    rows
}

/// `sum_a P(a,b|x,y) = sum_a P(a,b|0,y)` for all `b, y` and `x > 0`.
fn alice_to_bob_rows(dims: Dims) -> Vec<Constraint> {
    let mut rows = Vec::new();
    for b in 0..dims.n_b {
        for y in 0..dims.n_y {
            for x in 1..dims.n_x {
                let mut c = vec![0.0; dims.cells()];
                for a in 0..dims.n_a {
                    c[dims.index(a, b, x, y)] += 1.0;
                    c[dims.index(a, b, 0, y)] -= 1.0;
                }
                rows.push(Constraint::eq(c, 0.0));
            }
        }
    }
    rows
}

/// All `n_a^n_x * n_b^n_y` deterministic strategies, Alice's response
/// function varying slowest.
pub fn deterministic_vertices(dims: Dims) -> Vec<Correlation> {
    let alice = response_functions(dims.n_x, dims.n_a);
    let bob = response_functions(dims.n_y, dims.n_b);
    let mut out = Vec::with_capacity(alice.len() * bob.len());
    for fa in &alice {
        for fb in &bob {
            out.push(Correlation::deterministic(dims, fa, fb));
        }
    }
    out
}

fn response_functions(n_inputs: usize, n_outputs: usize) -> Vec<Vec<usize>> {
    let total = n_outputs.pow(n_inputs as u32);
    (0..total)
        .map(|mut k| {
            let mut f = vec![0; n_inputs];
            for slot in f.iter_mut().rev() {
                *slot = k % n_outputs;
                k /= n_outputs;
            }
            f
        })
        .collect()
}
