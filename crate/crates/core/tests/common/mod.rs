//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use rand::Rng;
use xtalk_core::{Correlation, Dims, Scenario};

/// A full-support table: every setting gets its own random distribution.
pub fn random_table(rng: &mut impl Rng) -> Correlation {
    let mut probs = vec![0.0; 16];
    for s in 0..4 {
        let w: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        for k in 0..4 {
            probs[s * 4 + k] = w[k] / total;
        }
    }
    Correlation::new(Dims::CHSH, probs).unwrap()
}

/// The 16 deterministic strategies written out from response functions.
pub fn local_vertices() -> Vec<Vec<f64>> {
    let dims = Dims::CHSH;
    let mut out = Vec::new();
    for fa in 0..4usize {
        for fb in 0..4usize {
            let mut p = vec![0.0; 16];
            for x in 0..2 {
                for y in 0..2 {
                    p[dims.index((fa >> x) & 1, (fb >> y) & 1, x, y)] = 1.0;
                }
            }
            out.push(p);
        }
    }
    out
}

/// Input-weighted KL divergence, written independently of the library.
pub fn weighted_kl(f: &[f64], q: &[f64], scenario: &Scenario) -> f64 {
    let w = scenario.cell_weights();
    f.iter()
        .zip(q)
        .zip(&w)
        .filter(|((fi, _), _)| **fi > 0.0)
        .map(|((fi, qi), wi)| wi * fi * (fi / qi).ln())
        .sum()
}

/// Result of the multiplicative-update (EM) oracle for projection onto L.
pub struct EmBounds {
    pub upper: f64,
    pub lower: f64,
}

/// Mixture-weight EM over the deterministic strategies. `upper` is the
/// divergence of the final mixture; `lower` the dual bound
/// `D(q) - log max_v sum_c w_c f_c v_c / q_c`.
pub fn em_projection(f: &[f64], scenario: &Scenario, iterations: usize) -> EmBounds {
    let vertices = local_vertices();
    let w = scenario.cell_weights();
    let mut mix = vec![1.0 / 16.0; 16];
    let mixture = |mix: &[f64]| -> Vec<f64> {
        (0..16).map(|c| vertices.iter().zip(mix).map(|(v, m)| m * v[c]).sum()).collect()
    };
    let scores = |q: &[f64]| -> Vec<f64> {
        vertices
            .iter()
            .map(|v| (0..16).filter(|&c| f[c] > 0.0).map(|c| w[c] * f[c] * v[c] / q[c]).sum())
            .collect()
    };
    for _ in 0..iterations {
        let q = mixture(&mix);
        let g = scores(&q);
        for (m, gv) in mix.iter_mut().zip(&g) {
            *m *= gv;
        }
    }
    let q = mixture(&mix);
    let upper = weighted_kl(f, &q, scenario);
    let best = scores(&q).into_iter().fold(f64::NEG_INFINITY, f64::max);
    EmBounds { upper, lower: upper - best.ln() }
}
