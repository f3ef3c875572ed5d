//! Moment-matrix outer approximations of the quantum set for the
//! (2,2,2,2) scenario.
//!
//! Each binary measurement is represented by the projector onto outcome 0;
//! outcome 1 follows by completeness. A correlation `P` belongs to the
//! relaxation when it is no-signaling, nonnegative, and some choice of the
//! moments not fixed by `P` makes the real symmetric moment matrix PSD.
//!
//! Level `1` uses the words `{1, A0, A1, B0, B1}`; level `1+AB` appends the
//! four products `A_x B_y`.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::barrier::{AffineMatrix, AffineVector, Objective, Problem, Settings, Solution};
use crate::error::{Error, Result};
use crate::hypothesis::HypothesisId;
use crate::polytope::{deterministic_vertices, PolytopeKind, PolytopeSet};
use crate::scenario::{BellFunctional, Correlation, Dims, Scenario};

/// Number of no-signaling coordinates: `pA(0|x)`, `pB(0|y)`, `P(0,0|x,y)`.
const N_THETA: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MomentLevel {
    One,
    OneAB,
}

impl From<MomentLevel> for HypothesisId {
    fn from(l: MomentLevel) -> Self {
        match l {
            MomentLevel::One => HypothesisId::Q1,
            MomentLevel::OneAB => HypothesisId::Q1AB,
        }
    }
}

/// A product of projectors with Alice's factors moved to the left.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word {
    alice: Vec<usize>,
    bob: Vec<usize>,
}

impl Word {
    fn new(alice: Vec<usize>, bob: Vec<usize>) -> Self {
        Word { alice: collapse(alice), bob: collapse(bob) }
    }

    fn identity() -> Self {
        Word { alice: vec![], bob: vec![] }
    }

    /// `self^dagger * other`, reduced by commutation and idempotence.
    fn adjoint_times(&self, other: &Word) -> Word {
        let mut alice: Vec<usize> = self.alice.iter().rev().copied().collect();
        alice.extend_from_slice(&other.alice);
        let mut bob: Vec<usize> = self.bob.iter().rev().copied().collect();
        bob.extend_from_slice(&other.bob);
        Word::new(alice, bob)
    }

    /// Representative shared by a word and its adjoint; their expectations
    /// have equal real parts.
    fn canonical(self) -> Word {
        let rev = Word {
            alice: self.alice.iter().rev().copied().collect(),
            bob: self.bob.iter().rev().copied().collect(),
        };
        std::cmp::min(self, rev)
    }

    /// Expectation under a deterministic strategy answering `alice[x]`, `bob[y]`.
    fn deterministic_value(&self, alice: &[usize], bob: &[usize]) -> f64 {
        let hit = self.alice.iter().all(|&x| alice[x] == 0) && self.bob.iter().all(|&y| bob[y] == 0);
        if hit {
            1.0
        } else {
            0.0
        }
    }
}

fn collapse(mut v: Vec<usize>) -> Vec<usize> {
    v.dedup();
    v
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.alice.is_empty() && self.bob.is_empty() {
            return f.write_str("1");
        }
        for x in &self.alice {
            write!(f, "A{x}")?;
        }
        for y in &self.bob {
            write!(f, "B{y}")?;
        }
        Ok(())
    }
}

/// What a moment-matrix entry is tied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Entry {
    One,
    /// No-signaling coordinate index.
    Linked(usize),
    /// Free moment index.
    Free(usize),
}

/// A real symmetric moment matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrix {
    pub entries: DMatrix<f64>,
}

impl MomentMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| (self.entries[(i, j)] - self.entries[(j, i)]).abs() <= tol))
    }

    /// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped to zero.
    pub fn clip_to_psd(&self) -> MomentMatrix {
        let eig = SymmetricEigen::new(self.entries.clone());
        let clipped = eig.eigenvalues.map(|v| v.max(0.0));
        let entries = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        MomentMatrix { entries }
    }
}

/// Outcome of [`MomentSet::project`].
#[derive(Clone, Debug)]
pub struct MomentProjection {
    pub member: bool,
    /// Euclidean distance in probability space to the set; zero for members.
    pub distance: f64,
    /// Largest achievable minimum eigenvalue of the completed moment matrix
    /// (meaningful only when the input is no-signaling).
    pub margin: f64,
    /// Nearest point of the set (the input itself for members).
    pub nearest: Correlation,
    pub witness: Option<MomentMatrix>,
}

/// Moment relaxation descriptor.
#[derive(Clone, Debug)]
pub struct MomentSet {
    level: MomentLevel,
    scenario: Scenario,
    basis: Vec<Word>,
    entries: Vec<Entry>,
    free_words: Vec<Word>,
    ns: PolytopeSet,
}

impl MomentSet {
    pub fn build(level: MomentLevel, scenario: &Scenario) -> Result<Self> {
        if scenario.dims() != Dims::CHSH {
            return Err(Error::UnsupportedScenario(format!(
                "moment relaxations are implemented for (2,2,2,2), got {:?}",
                scenario.dims()
            )));
        }
        let mut basis = vec![
            Word::identity(),
            Word::new(vec![0], vec![]),
            Word::new(vec![1], vec![]),
            Word::new(vec![], vec![0]),
            Word::new(vec![], vec![1]),
        ];
        if level == MomentLevel::OneAB {
            for x in 0..2 {
                for y in 0..2 {
                    basis.push(Word::new(vec![x], vec![y]));
                }
            }
        }
        let dim = basis.len();
        let mut free_words: Vec<Word> = Vec::new();
        let mut entries = Vec::with_capacity(dim * dim);
        for wi in &basis {
            for wj in &basis {
                let w = wi.adjoint_times(wj).canonical();
                let entry = match (w.alice.as_slice(), w.bob.as_slice()) {
                    ([], []) => Entry::One,
                    ([x], []) => Entry::Linked(*x),
                    ([], [y]) => Entry::Linked(2 + y),
                    ([x], [y]) => Entry::Linked(4 + 2 * x + y),
                    _ => match free_words.iter().position(|f| *f == w) {
                        Some(k) => Entry::Free(k),
                        None => {
                            free_words.push(w);
                            Entry::Free(free_words.len() - 1)
                        }
                    },
                };
                entries.push(entry);
            }
        }
        Ok(MomentSet {
            level,
            scenario: scenario.clone(),
            basis,
            entries,
            free_words,
            ns: PolytopeSet::build(PolytopeKind::NoSignaling, scenario),
        })
    }

    pub fn level(&self) -> MomentLevel {
        self.level
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn matrix_dim(&self) -> usize {
        self.basis.len()
    }

    /// Basis words in matrix order, e.g. `["1", "A0", "A1", "B0", "B1"]`.
    pub fn basis_labels(&self) -> Vec<String> {
        self.basis.iter().map(Word::to_string).collect()
    }

    /// Labels of the moments left free by the correlation.
    pub fn free_moment_labels(&self) -> Vec<String> {
        self.free_words.iter().map(Word::to_string).collect()
    }

    pub fn n_free(&self) -> usize {
        self.free_words.len()
    }

    fn n_vars(&self) -> usize {
        N_THETA + self.n_free()
    }

    /// No-signaling coordinates of `p` (marginals averaged over the other input).
    pub fn coordinates(p: &Correlation) -> [f64; N_THETA] {
        let mut t = [0.0; N_THETA];
        for x in 0..2 {
            t[x] = 0.5 * (p.marginal_a(0, x, 0) + p.marginal_a(0, x, 1));
        }
        for y in 0..2 {
            t[2 + y] = 0.5 * (p.marginal_b(0, 0, y) + p.marginal_b(0, 1, y));
        }
        for x in 0..2 {
            for y in 0..2 {
                t[4 + 2 * x + y] = p.get(0, 0, x, y);
            }
        }
        t
    }

    /// Correlation table from no-signaling coordinates.
    fn correlation_from(theta: &[f64]) -> Correlation {
        let dims = Dims::CHSH;
        let probs = dims
            .cells_iter()
            .map(|(a, b, x, y)| {
                let (pa, pb, p00) = (theta[x], theta[2 + y], theta[4 + 2 * x + y]);
                match (a, b) {
                    (0, 0) => p00,
                    (0, 1) => pa - p00,
                    (1, 0) => pb - p00,
                    _ => 1.0 - pa - pb + p00,
                }
            })
            .collect();
        Correlation::from_raw(dims, probs)
    }

    /// Affine map from `z = (theta, free)` to the 16 probabilities.
    fn cell_map(&self) -> AffineVector {
        let dims = Dims::CHSH;
        let n = self.n_vars();
        let mut offset = DVector::zeros(dims.cells());
        let mut matrix = DMatrix::zeros(dims.cells(), n);
        for (k, (a, b, x, y)) in dims.cells_iter().enumerate() {
            let (ia, ib, ip) = (x, 2 + y, 4 + 2 * x + y);
            match (a, b) {
                (0, 0) => matrix[(k, ip)] = 1.0,
                (0, 1) => {
                    matrix[(k, ia)] = 1.0;
                    matrix[(k, ip)] = -1.0;
                }
                (1, 0) => {
                    matrix[(k, ib)] = 1.0;
                    matrix[(k, ip)] = -1.0;
                }
                _ => {
                    offset[k] = 1.0;
                    matrix[(k, ia)] = -1.0;
                    matrix[(k, ib)] = -1.0;
                    matrix[(k, ip)] = 1.0;
                }
            }
        }
        AffineVector { offset, matrix }
    }

    /// Moment matrix as an affine function of `z = (theta, free)`.
    fn full_lmi(&self) -> AffineMatrix {
        let d = self.matrix_dim();
        let mut constant = DMatrix::zeros(d, d);
        let mut coeffs = vec![DMatrix::zeros(d, d); self.n_vars()];
        for i in 0..d {
            for j in 0..d {
                match self.entries[i * d + j] {
                    Entry::One => constant[(i, j)] = 1.0,
                    Entry::Linked(k) => coeffs[k][(i, j)] = 1.0,
                    Entry::Free(k) => coeffs[N_THETA + k][(i, j)] = 1.0,
                }
            }
        }
        AffineMatrix { constant, coeffs }
    }

    /// Moment matrix for fixed coordinates and free moments.
    pub fn moment_matrix(&self, p: &Correlation, free: &[f64]) -> MomentMatrix {
        let theta = Self::coordinates(p);
        let d = self.matrix_dim();
        let entries = DMatrix::from_fn(d, d, |i, j| match self.entries[i * d + j] {
            Entry::One => 1.0,
            Entry::Linked(k) => theta[k],
            Entry::Free(k) => free[k],
        });
        MomentMatrix { entries }
    }

    /// Moment vector `z` of a mixture of deterministic strategies.
    ///
    /// With all 16 weights positive the matrix is positive definite, which
    /// makes this a strictly feasible barrier start.
    fn classical_point(&self, weights: &[f64]) -> DVector<f64> {
        let mut z = DVector::zeros(self.n_vars());
        let total: f64 = weights.iter().sum();
        let strategies = strategy_table();
        for (w, (alice, bob)) in weights.iter().zip(&strategies) {
            let det = Correlation::deterministic(Dims::CHSH, alice, bob);
            let theta = Self::coordinates(&det);
            for k in 0..N_THETA {
                z[k] += w / total * theta[k];
            }
            for (k, word) in self.free_words.iter().enumerate() {
                z[N_THETA + k] += w / total * word.deterministic_value(alice, bob);
            }
        }
        z
    }

    fn uniform_start(&self) -> DVector<f64> {
        self.classical_point(&[1.0; 16])
    }

    /// Largest minimum eigenvalue over completions of `p`'s moment matrix.
    ///
    /// Returns the margin and the maximizing completion.
    pub fn completion_margin(&self, p: &Correlation, gap_tol: f64) -> Result<(f64, MomentMatrix)> {
        let theta = Self::coordinates(p);
        let d = self.matrix_dim();
        let full = self.full_lmi();
        let mut constant = full.constant.clone();
        for k in 0..N_THETA {
            constant += &full.coeffs[k] * theta[k];
        }
        let mut coeffs: Vec<DMatrix<f64>> = full.coeffs[N_THETA..].to_vec();
        coeffs.push(-DMatrix::identity(d, d));
        let n = coeffs.len();
        let start_free: Vec<f64> = self.uniform_start().iter().skip(N_THETA).copied().collect();
        let start_matrix = self.moment_matrix(p, &start_free);
        let mut z0 = DVector::zeros(n);
        for (k, v) in start_free.iter().enumerate() {
            z0[k] = *v;
        }
        z0[n - 1] = start_matrix.min_eigenvalue() - 1.0;
        let mut objective = DVector::zeros(n);
        objective[n - 1] = -1.0;
        let problem = Problem {
            lmi: AffineMatrix { constant, coeffs },
            inequalities: None,
            objective: Objective::Linear(objective),
        };
        let sol = problem.solve(z0, Settings { gap_tol, ..Settings::default() })?;
        let free: Vec<f64> = sol.z.iter().take(n - 1).copied().collect();
        Ok((sol.z[n - 1], self.moment_matrix(p, &free)))
    }

    /// Membership and distance in probability space.
    ///
    /// `p` is a member when it satisfies the no-signaling constraints within
    /// `tol` and its moment matrix admits a completion whose minimum
    /// eigenvalue is at least `-tol`. For non-members the distance is that of
    /// the Euclidean projection onto the set.
    pub fn project(&self, p: &Correlation, tol: f64) -> Result<MomentProjection> {
        assert!(tol > 0.0, "membership tolerance must be positive");
        let ns_ok = self.ns.max_violation(p) <= tol;
        let (margin, witness) = if ns_ok {
            let (m, w) = self.completion_margin(p, (tol * 1e-3).min(1e-9))?;
            (m, Some(w))
        } else {
            (f64::NEG_INFINITY, None)
        };
        if ns_ok && margin >= -tol {
            return Ok(MomentProjection { member: true, distance: 0.0, margin, nearest: p.clone(), witness });
        }
        let (nearest, distance) = self.euclidean_projection(p, (tol * tol).min(1e-12))?;
        if distance < tol {
            // Boundary case: the completion certificate was inconclusive but the
            // projection lands within tolerance.
            return Ok(MomentProjection { member: true, distance, margin, nearest, witness });
        }
        Ok(MomentProjection { member: false, distance, margin, nearest, witness })
    }

    pub fn contains(&self, p: &Correlation, tol: f64) -> Result<bool> {
        Ok(self.project(p, tol)?.member)
    }

    /// Nearest member in Euclidean norm over the 16 probabilities.
    pub fn euclidean_projection(&self, p: &Correlation, gap_tol: f64) -> Result<(Correlation, f64)> {
        let problem = Problem {
            lmi: self.full_lmi(),
            inequalities: Some(self.cell_map()),
            objective: Objective::SquaredDistance { map: self.cell_map(), target: p.as_slice().to_vec() },
        };
        let sol = problem.solve(self.uniform_start(), Settings { gap_tol, ..Settings::default() })?;
        let nearest = Self::correlation_from(sol.z.as_slice());
        let distance = nearest
            .as_slice()
            .iter()
            .zip(p.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        Ok((nearest, distance))
    }

    /// Minimizes `D(f || P)` over the set by path following.
    ///
    /// `start_weights` selects the interior start as a mixture of the 16
    /// deterministic strategies (uniform when `None`).
    pub(crate) fn minimize_kl(
        &self,
        f: &Correlation,
        gap_tol: f64,
        max_newton_steps: usize,
        start_weights: Option<&[f64]>,
    ) -> Result<(Correlation, Solution)> {
        let problem = Problem {
            lmi: self.full_lmi(),
            inequalities: Some(self.cell_map()),
            objective: Objective::Kl {
                map: self.cell_map(),
                target: f.as_slice().to_vec(),
                weights: self.scenario.cell_weights(),
            },
        };
        let z0 = match start_weights {
            Some(w) => {
                // Half-weight on uniform keeps every deterministic corner off the boundary.
                let mixed: Vec<f64> = w.iter().map(|v| 0.5 * v / w.iter().sum::<f64>() + 0.5 / 16.0).collect();
                self.classical_point(&mixed)
            }
            None => self.uniform_start(),
        };
        let settings = Settings { gap_tol, max_newton_steps, ..Settings::default() };
        let sol = problem.solve(z0, settings)?;
        Ok((Self::correlation_from(sol.z.as_slice()), sol))
    }

    /// Certified upper bound on `sum R P(x,y) P` over the set: the exact
    /// maximum over the no-signaling polytope, which contains it.
    pub fn max_functional_bound(&self, functional: &BellFunctional) -> Result<f64> {
        Ok(self.ns.max_functional(functional)?.value)
    }

    /// Near-optimal feasible value of `sum R P(x,y) P` from the interior;
    /// a lower bound on the true maximum within `gap_tol`.
    pub fn maximize_interior(&self, functional: &BellFunctional, gap_tol: f64) -> Result<(f64, Correlation)> {
        let map = self.cell_map();
        let weighted = functional.weighted(&self.scenario);
        let c = map.matrix.transpose() * DVector::from_vec(weighted.clone());
        let problem = Problem {
            lmi: self.full_lmi(),
            inequalities: Some(map),
            objective: Objective::Linear(-c),
        };
        let sol = problem.solve(self.uniform_start(), Settings { gap_tol, ..Settings::default() })?;
        let p = Self::correlation_from(sol.z.as_slice());
        let value = p.as_slice().iter().zip(&weighted).map(|(a, b)| a * b).sum();
        Ok((value, p))
    }
}

/// Deterministic strategies in the same order as the local polytope's vertices.
fn strategy_table() -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::with_capacity(16);
    for fa in 0..4usize {
        for fb in 0..4usize {
            out.push((vec![fa >> 1, fa & 1], vec![fb >> 1, fb & 1]));
        }
    }
    debug_assert!(out
        .iter()
        .zip(deterministic_vertices(Dims::CHSH))
        .all(|((a, b), v)| Correlation::deterministic(Dims::CHSH, a, b) == v));
    out
}
