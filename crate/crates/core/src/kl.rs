//! KL divergence `D(f || P) = sum P(x,y) f log(f / P)` (nats) and its
//! minimization over hypothesis sets.
//!
//! Polytopes are handled by pairwise Frank-Wolfe: the iterate is kept as an
//! explicit convex combination of vertices, each step moves weight from the
//! worst active vertex to the LP oracle's vertex, and the Frank-Wolfe gap
//! `<grad, P - s>` certifies suboptimality. Moment relaxations are handled
//! by log-barrier path following.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::HypothesisSet;
use crate::lp::Sense;
use crate::polytope::{deterministic_vertices, PolytopeSet};
use crate::scenario::{Correlation, Scenario};

pub const DEFAULT_POLYTOPE_TOL: f64 = 1e-8;
pub const DEFAULT_MOMENT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

/// Weights below this are dropped from the active set.
const DROP_WEIGHT: f64 = 1e-15;

/// `D(f || P)` in nats. Cells with `f = 0` contribute nothing; `+inf` when
/// `P` vanishes where `f` does not.
pub fn kl_divergence(f: &Correlation, p: &Correlation, scenario: &Scenario) -> f64 {
    debug_assert_eq!(f.dims(), p.dims());
    let weights = scenario.cell_weights();
    let mut total = 0.0;
    for ((fi, pi), w) in f.as_slice().iter().zip(p.as_slice()).zip(weights) {
        if *fi > 0.0 {
            if *pi <= 0.0 {
                return f64::INFINITY;
            }
            total += w * fi * (fi / pi).ln();
        }
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlResult {
    pub minimizer: Correlation,
    pub divergence: f64,
    /// Certified bound on `divergence - min`.
    pub duality_gap: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out before the gap reached `tol`.
    pub certified: bool,
}

impl KlResult {
    /// Turns an uncertified result into [`Error::IterationLimit`].
    pub fn require_certified(self) -> Result<Self> {
        if self.certified {
            Ok(self)
        } else {
            Err(Error::IterationLimit { iterations: self.iterations, residual: self.duality_gap })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KlOptions {
    pub tol: Option<f64>,
    pub max_iterations: usize,
    /// Start from this mixture of the deterministic strategies instead of uniform.
    pub start_weights: Option<Vec<f64>>,
}

impl Default for KlOptions {
    fn default() -> Self {
        KlOptions { tol: None, max_iterations: DEFAULT_MAX_ITERATIONS, start_weights: None }
    }
}

impl KlOptions {
    pub fn with_tol(tol: f64) -> Self {
        KlOptions { tol: Some(tol), ..Default::default() }
    }
}

/// KL projection of `f` onto `set` with default options.
pub fn kl_project(f: &Correlation, set: &HypothesisSet, tol: f64) -> Result<KlResult> {
    kl_project_with(f, set, &KlOptions::with_tol(tol))
}

pub fn kl_project_with(f: &Correlation, set: &HypothesisSet, options: &KlOptions) -> Result<KlResult> {
    match set {
        HypothesisSet::Polytope(p) => {
            let tol = options.tol.unwrap_or(DEFAULT_POLYTOPE_TOL);
            frank_wolfe(f, p, tol, options)
        }
        HypothesisSet::Moment(m) => {
            let tol = options.tol.unwrap_or(DEFAULT_MOMENT_TOL);
            let (minimizer, sol) =
                match m.minimize_kl(f, tol, options.max_iterations, options.start_weights.as_deref()) {
                    Ok(ok) => ok,
                    Err(Error::IterationLimit { iterations, .. }) => {
                        return Err(Error::IterationLimit { iterations, residual: f64::NAN })
                    }
                    Err(e) => return Err(e),
                };
            let divergence = kl_divergence(f, &minimizer, m.scenario());
            Ok(KlResult {
                minimizer,
                divergence,
                duality_gap: sol.gap,
                iterations: sol.newton_steps,
                certified: sol.gap <= tol,
            })
        }
    }
}

struct ActiveSet {
    vertices: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl ActiveSet {
    fn point(&self, n: usize) -> Vec<f64> {
        let mut p = vec![0.0; n];
        for (v, w) in self.vertices.iter().zip(&self.weights) {
            for (pi, vi) in p.iter_mut().zip(v) {
                *pi += w * vi;
            }
        }
        p
    }

    fn find(&self, v: &[f64]) -> Option<usize> {
        self.vertices
            .iter()
            .position(|u| u.iter().zip(v).all(|(a, b)| (a - b).abs() <= 1e-12))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn frank_wolfe(f: &Correlation, set: &PolytopeSet, tol: f64, options: &KlOptions) -> Result<KlResult> {
    let dims = set.dims();
    if f.dims() != dims {
        return Err(Error::InvalidCorrelation("frequency table does not match the set's scenario".into()));
    }
    let n = dims.cells();
    let wf: Vec<f64> = f
        .as_slice()
        .iter()
        .zip(set.scenario().cell_weights())
        .map(|(fi, w)| fi * w)
        .collect();

    // Deterministic strategies are 0/1 points of every set here, hence vertices,
    // and their uniform mixture is the uniform correlation.
    let start = deterministic_vertices(dims);
    let mut weights = options.start_weights.clone().unwrap_or_else(|| vec![1.0; start.len()]);
    if weights.len() != start.len() || weights.iter().any(|w| *w <= 0.0 || !w.is_finite()) {
        return Err(Error::InvalidConfig("start weights must be positive, one per deterministic strategy".into()));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut active = ActiveSet { vertices: start.into_iter().map(Correlation::into_vec).collect(), weights };
    let mut p = active.point(n);

    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        let grad: Vec<f64> =
            wf.iter().zip(&p).map(|(w, pi)| if *w > 0.0 { -w / pi } else { 0.0 }).collect();
        let fw_vertex = set.optimize(&grad, Sense::Minimize)?.argument.into_vec();
        gap = dot(&grad, &p) - dot(&grad, &fw_vertex);
        if gap <= tol {
            break;
        }
        let (away, _) = active
            .vertices
            .iter()
            .map(|v| dot(&grad, v))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        let direction: Vec<f64> = fw_vertex.iter().zip(&active.vertices[away]).map(|(s, v)| s - v).collect();
        let max_step = active.weights[away];
        let step = line_search(&wf, &p, &direction, max_step);
        iterations += 1;
        if step <= 0.0 {
            // The pairwise direction stalls at the rounding floor; the current gap stands.
            break;
        }
        let target = match active.find(&fw_vertex) {
            Some(i) => i,
            None => {
                active.vertices.push(fw_vertex);
                active.weights.push(0.0);
                active.vertices.len() - 1
            }
        };
        active.weights[target] += step;
        active.weights[away] -= step;
        if active.weights[away] <= DROP_WEIGHT {
            let leftover = active.weights[away];
            active.vertices.remove(away);
            active.weights.remove(away);
            let t = if target > away { target - 1 } else { target };
            active.weights[t] += leftover.max(0.0);
        }
        for (pi, di) in p.iter_mut().zip(&direction) {
            *pi += step * di;
        }
        // Periodically rebuild from the weights to stop drift.
        if iterations % 64 == 0 {
            p = active.point(n);
        }
    }
    let p = active.point(n);
    let minimizer = Correlation::renormalized(dims, p)?;
    let divergence = kl_divergence(f, &minimizer, set.scenario());
    Ok(KlResult { minimizer, divergence, duality_gap: gap, iterations, certified: gap <= tol })
}

/// Exact minimizer of `D(P + s d)` over `s in [0, max_step]`.
///
/// The derivative `-sum wf_i d_i / (P_i + s d_i)` is increasing in `s`, so a
/// safeguarded Newton iteration on it converges to the unique root.
fn line_search(wf: &[f64], p: &[f64], d: &[f64], max_step: f64) -> f64 {
    let deriv = |s: f64| -> (f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for i in 0..p.len() {
            if wf[i] > 0.0 && d[i] != 0.0 {
                let q = p[i] + s * d[i];
                d1 -= wf[i] * d[i] / q;
                d2 += wf[i] * d[i] * d[i] / (q * q);
            }
        }
        (d1, d2)
    };
    // Stay strictly inside the domain where every f-supported cell is positive.
    let mut hi = max_step;
    for i in 0..p.len() {
        if wf[i] > 0.0 && d[i] < 0.0 {
            hi = hi.min(p[i] / -d[i] * (1.0 - 1e-12));
        }
    }
    if hi <= 0.0 {
        return 0.0;
    }
    let (d0, _) = deriv(0.0);
    if d0 >= 0.0 {
        return 0.0;
    }
    let (dh, _) = deriv(hi);
    if dh <= 0.0 {
        return hi;
    }
    let (mut lo, mut up) = (0.0, hi);
    let mut s = 0.5 * hi;
    for _ in 0..100 {
        let (g, h) = deriv(s);
        if g.abs() <= 1e-18 {
            return s;
        }
        if g > 0.0 {
            up = s;
        } else {
            lo = s;
        }
        if up - lo <= 1e-16 * hi {
            break;
        }
        let newton = s - g / h;
        s = if newton > lo && newton < up { newton } else { 0.5 * (lo + up) };
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::PolytopeKind;
    use crate::scenario::Dims;

    #[test]
    fn divergence_closed_forms() {
        let s = Scenario::chsh();
        let u = Correlation::uniform(Dims::CHSH);
        assert_eq!(kl_divergence(&u, &u, &s), 0.0);
        let point = Correlation::deterministic(Dims::CHSH, &[0, 0], &[0, 0]);
        assert!((kl_divergence(&point, &u, &s) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&u, &point, &s), f64::INFINITY);
    }

    #[test]
    fn line_search_hits_interior_root() {
        // D(s) = -w log(p0 + s d0) - w log(p1 + s d1) with p = (0.2, 0.8), d = (1, -1): root at s = 0.3.
        let s = line_search(&[0.5, 0.5], &[0.2, 0.8], &[1.0, -1.0], 1.0);
        assert!((s - 0.3).abs() < 1e-12, "{s}");
    }

    #[test]
    fn line_search_returns_exact_root_when_first_probe_hits_it() {
        // First probe is s = hi / 2 = 0.25, where the derivative vanishes exactly.
        let s = line_search(&[0.5, 0.5], &[0.25, 0.75], &[1.0, -1.0], 0.5);
        assert_eq!(s, 0.25);
    }

    #[test]
    fn member_projects_to_itself() {
        let set = HypothesisSet::Polytope(PolytopeSet::build(PolytopeKind::NoSignaling, &Scenario::chsh()));
        let u = Correlation::uniform(Dims::CHSH);
        let r = kl_project(&u, &set, 1e-10).unwrap();
        assert!(r.divergence.abs() < 1e-12);
        assert!(r.minimizer.max_abs_diff(&u) < 1e-9);
        assert!(r.certified);
    }
}
