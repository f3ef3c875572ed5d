//! LP optima against vertex enumeration and exact rational arithmetic.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xtalk_core::lp::Sense;
use xtalk_core::{BellFunctional, Correlation, Dims, PolytopeKind, PolytopeSet, Scenario};

/// The 16 local deterministic boxes and the 8 PR-type boxes
/// `P = 1/2 [a + b = xy + alpha x + beta y + gamma mod 2]`, built from formulas.
fn ns_vertices_oracle() -> Vec<Vec<f64>> {
    let dims = Dims::CHSH;
    let mut out = Vec::new();
    for fa in 0..4usize {
        for fb in 0..4usize {
            let alice = |x: usize| (fa >> (1 - x)) & 1;
            let bob = |y: usize| (fb >> (1 - y)) & 1;
            let mut p = vec![0.0; 16];
            for x in 0..2 {
                for y in 0..2 {
                    p[dims.index(alice(x), bob(y), x, y)] = 1.0;
                }
            }
            out.push(p);
        }
    }
    for alpha in 0..2 {
        for beta in 0..2 {
            for gamma in 0..2 {
                let mut p = vec![0.0; 16];
                for (a, b, x, y) in dims.cells_iter() {
                    if (a ^ b) == ((x & y) ^ (alpha & x) ^ (beta & y) ^ gamma) {
                        p[dims.index(a, b, x, y)] = 0.5;
                    }
                }
                out.push(p);
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn oracle_vertices_are_feasible_and_distinct() {
    let ns = PolytopeSet::build(PolytopeKind::NoSignaling, &Scenario::chsh());
    let v = ns_vertices_oracle();
    assert_eq!(v.len(), 24);
    for p in &v {
        let c = Correlation::new(Dims::CHSH, p.clone()).unwrap();
        assert!(ns.contains(&c, 1e-12).unwrap());
    }
    for i in 0..v.len() {
        for j in 0..i {
            assert_ne!(v[i], v[j]);
        }
    }
}

#[test]
fn ns_lp_matches_vertex_enumeration() {
    let ns = PolytopeSet::build(PolytopeKind::NoSignaling, &Scenario::chsh());
    let vertices = ns_vertices_oracle();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..100 {
        let c: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for sense in [Sense::Maximize, Sense::Minimize] {
            let lp = ns.optimize(&c, sense).unwrap();
            let values = vertices.iter().map(|v| dot(&c, v));
            let oracle = match sense {
                Sense::Maximize => values.fold(f64::NEG_INFINITY, f64::max),
                Sense::Minimize => values.fold(f64::INFINITY, f64::min),
            };
            assert!((lp.value - oracle).abs() < 1e-9, "lp {} oracle {oracle}", lp.value);
            // The argument attains the value and is feasible.
            assert!((dot(&c, lp.argument.as_slice()) - lp.value).abs() < 1e-9);
            assert!(ns.max_violation(&lp.argument) < 1e-9);
        }
    }
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap()
}

#[test]
fn local_lp_matches_rational_vertex_maximum() {
    let l = PolytopeSet::build(PolytopeKind::Local, &Scenario::chsh());
    let vertices = ns_vertices_oracle()[..16].to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let c: Vec<f64> = (0..16).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let oracle = vertices
            .iter()
            .map(|v| {
                c.iter()
                    .zip(v)
                    .fold(BigRational::zero(), |acc, (ci, vi)| acc + exact(*ci) * exact(*vi))
            })
            .max()
            .unwrap();
        let lp = l.optimize(&c, Sense::Maximize).unwrap();
        assert!((lp.value - oracle.to_f64().unwrap()).abs() < 1e-9);
        let (vm, _) = l.vertex_max(&c).unwrap();
        assert!((vm - oracle.to_f64().unwrap()).abs() < 1e-12);
    }
}

#[test]
fn chsh_maxima() {
    let s = Scenario::chsh();
    let chsh = BellFunctional::chsh(&s);
    let l = PolytopeSet::build(PolytopeKind::Local, &s);
    let ns = PolytopeSet::build(PolytopeKind::NoSignaling, &s);
    assert!((l.max_functional(&chsh).unwrap().value - 2.0).abs() < 1e-9);
    assert!((ns.max_functional(&chsh).unwrap().value - 4.0).abs() < 1e-9);
    let pr = Correlation::pr_box();
    assert!(ns.contains(&pr, 1e-9).unwrap());
    assert!(!l.contains(&pr, 1e-9).unwrap());
}

#[test]
fn one_way_sets_contain_ns_optimum() {
    let s = Scenario::chsh();
    let ns = PolytopeSet::build(PolytopeKind::NoSignaling, &s);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for kind in [PolytopeKind::OwnsAnotB, PolytopeKind::OwnsBnotA] {
        let owns = PolytopeSet::build(kind, &s);
        for _ in 0..30 {
            let c: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let big = owns.optimize(&c, Sense::Maximize).unwrap();
            let small = ns.optimize(&c, Sense::Maximize).unwrap();
            assert!(big.value >= small.value - 1e-9);
            assert!(owns.max_violation(&big.argument) < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_value_is_linear_in_positive_scaling(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let ns = PolytopeSet::build(PolytopeKind::NoSignaling, &Scenario::chsh());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scaled: Vec<f64> = c.iter().map(|v| v * scale).collect();
        let a = ns.optimize(&c, Sense::Maximize).unwrap().value;
        let b = ns.optimize(&scaled, Sense::Maximize).unwrap().value;
        prop_assert!((a * scale - b).abs() < 1e-9 * scale.max(1.0));
    }

    #[test]
    fn local_is_inside_ns(seed in any::<u64>()) {
        let s = Scenario::chsh();
        let l = PolytopeSet::build(PolytopeKind::Local, &s);
        let ns = PolytopeSet::build(PolytopeKind::NoSignaling, &s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lv = l.optimize(&c, Sense::Maximize).unwrap().value;
        let nv = ns.optimize(&c, Sense::Maximize).unwrap().value;
        prop_assert!(lv <= nv + 1e-9);
    }
}
