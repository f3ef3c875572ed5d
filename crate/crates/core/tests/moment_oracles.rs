//! Moment relaxations against explicit quantum moment matrices and Tsirelson's bound.

use nalgebra::{DMatrix, Matrix2, Matrix4, SymmetricEigen, Vector4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use xtalk_core::sim::Circuit;
use xtalk_core::{BellFunctional, Correlation, Dims, MomentLevel, MomentSet, Scenario};

fn level(l: MomentLevel) -> MomentSet {
    MomentSet::build(l, &Scenario::chsh()).unwrap()
}

const LEVELS: [MomentLevel; 2] = [MomentLevel::One, MomentLevel::OneAB];

/// Maximally entangled state, Z on Alice, then a pi/4 y-rotation on Bob.
fn quantum_state() -> Vector4<f64> {
    let bell = Vector4::new(FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2);
    let z = Matrix2::new(1.0, 0.0, 0.0, -1.0);
    let (c, s) = ((std::f64::consts::PI / 8.0).cos(), (std::f64::consts::PI / 8.0).sin());
    let ry = Matrix2::new(c, -s, s, c);
    z.kronecker(&ry) * bell
}

/// Outcome-0 projector of input `x`: computational basis for 0, Hadamard basis for 1.
fn projector(x: usize) -> Matrix2<f64> {
    if x == 0 {
        Matrix2::new(1.0, 0.0, 0.0, 0.0)
    } else {
        Matrix2::new(0.5, 0.5, 0.5, 0.5)
    }
}

/// Operator of a word label such as `A0B1` or `A0A1`.
fn word_operator(label: &str) -> Matrix4<f64> {
    let mut alice = Matrix2::identity();
    let mut bob = Matrix2::identity();
    if label != "1" {
        let chars: Vec<char> = label.chars().collect();
        for pair in chars.chunks(2) {
            let input = pair[1].to_digit(10).unwrap() as usize;
            match pair[0] {
                'A' => alice *= projector(input),
                'B' => bob *= projector(input),
                other => panic!("unexpected party {other}"),
            }
        }
    }
    alice.kronecker(&bob)
}

fn expectation(psi: &Vector4<f64>, op: &Matrix4<f64>) -> f64 {
    (psi.transpose() * op * psi)[(0, 0)]
}

fn quantum_correlation() -> Correlation {
    let psi = quantum_state();
    Correlation::from_fn(Dims::CHSH, |a, b, x, y| {
        let pa = if a == 0 { projector(x) } else { Matrix2::identity() - projector(x) };
        let pb = if b == 0 { projector(y) } else { Matrix2::identity() - projector(y) };
        expectation(&psi, &pa.kronecker(&pb))
    })
    .unwrap()
}

#[test]
fn explicit_state_reproduces_the_nonlocal_circuit() {
    let oracle = quantum_correlation();
    assert!(oracle.max_abs_diff(&Circuit::Nonlocal.ideal_correlation()) < 1e-12);
    let value = xtalk_core::scenario::bell_functional(&oracle, &BellFunctional::chsh(&Scenario::chsh()), &Scenario::chsh());
    assert!((value - 2.0 * SQRT_2).abs() < 1e-12);
}

#[test]
fn quantum_moment_matrix_matches_library_layout() {
    let psi = quantum_state();
    let p = quantum_correlation();
    for l in LEVELS {
        let set = level(l);
        let labels = set.basis_labels();
        let d = labels.len();
        let ops: Vec<Matrix4<f64>> = labels.iter().map(|s| word_operator(s)).collect();
        let gamma = DMatrix::from_fn(d, d, |i, j| expectation(&psi, &(ops[i].transpose() * ops[j])));
        let min_eig = SymmetricEigen::new(gamma.clone()).eigenvalues.min();
        assert!(min_eig > -1e-12, "quantum moment matrix must be PSD");

        let free: Vec<f64> =
            set.free_moment_labels().iter().map(|s| expectation(&psi, &word_operator(s))).collect();
        let lib = set.moment_matrix(&p, &free);
        let diff = (&lib.entries - &gamma).abs().max();
        assert!(diff < 1e-12, "{l:?}: moment matrices differ by {diff}");

        let proj = set.project(&p, 1e-7).unwrap();
        assert!(proj.member);
        assert!(proj.nearest.max_abs_diff(&p) < 1e-6);
    }
}

#[test]
fn uniform_table_is_strictly_inside() {
    for l in LEVELS {
        let (margin, witness) = level(l).completion_margin(&Correlation::uniform(Dims::CHSH), 1e-10).unwrap();
        assert!(margin > 1e-3, "{l:?}: {margin}");
        assert!(witness.min_eigenvalue() >= margin - 1e-8);
    }
}

#[test]
fn pr_box_is_not_a_member() {
    for l in LEVELS {
        let proj = level(l).project(&Correlation::pr_box(), 1e-7).unwrap();
        assert!(!proj.member);
        assert!(proj.distance > 0.2, "{l:?}: {}", proj.distance);
        assert!(level(l).contains(&proj.nearest, 1e-6).unwrap());
    }
}

#[test]
fn isotropic_line_crosses_at_tsirelson_bound() {
    // Largest eigenvalue of the CHSH operator for the optimal observables.
    let z = Matrix2::new(1.0, 0.0, 0.0, -1.0);
    let x = Matrix2::new(0.0, 1.0, 1.0, 0.0);
    let (a0, a1) = (z, x);
    let (b0, b1) = ((z + x) / SQRT_2, (z - x) / SQRT_2);
    let op = a0.kronecker(&b0) + a0.kronecker(&b1) + a1.kronecker(&b0) - a1.kronecker(&b1);
    let tsirelson = SymmetricEigen::new(op).eigenvalues.max();
    assert!((tsirelson - 2.0 * SQRT_2).abs() < 1e-12);

    let pr = Correlation::pr_box();
    let uniform = Correlation::uniform(Dims::CHSH);
    for l in LEVELS {
        let set = level(l);
        let (mut lo, mut hi) = (0.5, 1.0);
        while hi - lo > 1e-5 {
            let mid = 0.5 * (lo + hi);
            if set.contains(&pr.mix(&uniform, mid), 1e-9).unwrap() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // CHSH of s * PR + (1 - s) * uniform is 4 s.
        assert!((4.0 * lo - tsirelson).abs() < 1e-3, "{l:?}: {}", 4.0 * lo);

        let (best, _) = set.maximize_interior(&BellFunctional::chsh(&Scenario::chsh()), 1e-9).unwrap();
        assert!(best <= tsirelson + 1e-6 && best >= tsirelson - 1e-6, "{l:?}: {best}");
    }
}

fn random_ns_point(rng: &mut impl Rng) -> Correlation {
    // Mixture of deterministic boxes and one PR-type box.
    let mut probs = vec![0.0; 16];
    let dims = Dims::CHSH;
    let w_pr: f64 = rng.gen_range(0.0..1.0);
    let (al, be) = (rng.gen_range(0..2), rng.gen_range(0..2));
    for (a, b, x, y) in dims.cells_iter() {
        if (a ^ b) == ((x & y) ^ (al & x) ^ (be & y)) {
            probs[dims.index(a, b, x, y)] += 0.5 * w_pr;
        }
    }
    let weights: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for (k, w) in weights.iter().enumerate() {
        let (fa, fb) = (k / 4, k % 4);
        for x in 0..2 {
            for y in 0..2 {
                probs[dims.index((fa >> x) & 1, (fb >> y) & 1, x, y)] += (1.0 - w_pr) * w / total;
            }
        }
    }
    Correlation::renormalized(dims, probs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn level_one_ab_is_inside_level_one(seed in any::<u64>()) {
        let p = random_ns_point(&mut ChaCha8Rng::seed_from_u64(seed));
        let inner = level(MomentLevel::OneAB).contains(&p, 1e-7).unwrap();
        let outer = level(MomentLevel::One).contains(&p, 1e-7).unwrap();
        prop_assert!(!inner || outer);
        let d_inner = level(MomentLevel::OneAB).project(&p, 1e-7).unwrap().distance;
        let d_outer = level(MomentLevel::One).project(&p, 1e-7).unwrap().distance;
        prop_assert!(d_outer <= d_inner + 2e-7);
    }

    #[test]
    fn moment_matrices_are_symmetric_with_tied_entries(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_ns_point(&mut rng);
        for l in LEVELS {
            let set = level(l);
            let free: Vec<f64> = (0..set.n_free()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = set.moment_matrix(&p, &free);
            prop_assert!(m.is_symmetric(0.0));
            // Projectors are idempotent: <W^dagger W> = <W> for single-party-per-side words.
            for i in 0..m.dim() {
                prop_assert_eq!(m.entries[(i, i)], m.entries[(0, i)]);
            }
            prop_assert_eq!(m.entries[(0, 0)], 1.0);
        }
    }
}
