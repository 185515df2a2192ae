use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::basis::{coeff_count, degree_offset, labels};
use super::*;

fn plan(l: usize, over: usize) -> SphereTransform {
    SphereTransform::new(&GridSpec::new(l, over).unwrap()).unwrap()
}

fn random_field(l: usize, amp: f64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..coeff_count(l)).map(|_| rng.gen_range(-amp..amp)).collect();
    SpectralField::from_coeffs(l, coeffs)
}

#[test]
fn degree_one_fields_are_coordinates() {
    let p = plan(4, 1);
    for axis in 0..5 {
        let vals = p.synthesize_values(&SpectralField::coordinate(4, axis)).unwrap();
        for (v, x) in vals.iter().zip(p.grid().nodes()) {
            assert!((v - x[axis]).abs() < 1e-14, "axis {axis}: {v} vs {}", x[axis]);
        }
    }
}

#[test]
fn analysis_of_constant() {
    let p = plan(16, 1);
    let c = p.analyze_values(&vec![1.0; p.grid().len()]);
    assert!((c.coeffs()[0] - 1.0).abs() < 1e-13);
    // ∫ Y dc = 0 for every basis function of degree 1..16
    let worst = c.coeffs()[1..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn analysis_of_x5_is_pure_degree_one() {
    let p = plan(16, 1);
    let vals: Vec<f64> = p.grid().nodes().iter().map(|x| x[4]).collect();
    let c = p.analyze_values(&vals);
    let expect = SpectralField::coordinate(16, 4);
    assert!(c.max_abs_diff(&expect) < 1e-11);
    for k in 2..=16 {
        assert!(c.degree_block(k).iter().all(|v| v.abs() < 1e-11));
    }
}

#[test]
fn round_trip_random_l12() {
    let p = plan(12, 1);
    let u = random_field(12, 1.0, 3);
    let g = p.synthesize(&u).unwrap();
    let back = p.analyze(&g).unwrap();
    assert!(back.max_abs_diff(&u) < 1e-10);
    let again = p.synthesize_values(&back).unwrap();
    let scale = g.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let err = again.iter().zip(g.values()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err <= 1e-10 * scale);
}

#[test]
fn zero_coefficients_synthesize_to_zero() {
    let p = plan(6, 1);
    let vals = p.synthesize_values(&SpectralField::zeros(6)).unwrap();
    assert!(vals.iter().all(|&v| v == 0.0));
}

#[test]
fn degree_two_basis_element_is_normalized() {
    let p = plan(8, 1);
    for idx in degree_offset(2)..degree_offset(3) {
        let mut u = SpectralField::zeros(8);
        u.coeffs_mut()[idx] = 1.0;
        let vals = p.synthesize_values(&u).unwrap();
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        assert!((p.grid().integrate_dc(&sq) - 1.0).abs() < 1e-11);
    }
}

#[test]
fn gram_matrix_is_identity_at_l8() {
    let p = plan(8, 1);
    let n = coeff_count(8);
    for i in 0..n {
        let mut u = SpectralField::zeros(8);
        u.coeffs_mut()[i] = 1.0;
        let back = p.analyze(&p.synthesize(&u).unwrap()).unwrap();
        for (j, &v) in back.coeffs().iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-11, "({i},{j}) = {v}");
        }
    }
}

#[test]
fn gram_columns_at_l16_sampled() {
    let p = plan(16, 1);
    let n = coeff_count(16);
    for i in (0..n).step_by(97).chain([n - 1]) {
        let mut u = SpectralField::zeros(16);
        u.coeffs_mut()[i] = 1.0;
        let back = p.analyze(&p.synthesize(&u).unwrap()).unwrap();
        for (j, &v) in back.coeffs().iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-11, "({i},{j}) = {v}");
        }
    }
}

#[test]
fn evaluate_at_examples() {
    let c = SpectralField::constant(6, 2.5);
    assert!((evaluate_at(&c, &[0.6, 0.0, 0.0, 0.8, 0.0]).unwrap() - 2.5).abs() < 1e-14);
    let x5 = SpectralField::coordinate(6, 4);
    assert!((evaluate_at(&x5, &[0.0, 0.0, 0.0, 0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
    assert!(evaluate_at(&x5, &[0.0, 0.0, 0.0, 0.0, 1.1]).is_err());
}

#[test]
fn evaluate_matches_synthesis_at_nodes() {
    let p = plan(10, 1);
    let u = random_field(10, 1.0, 11);
    let vals = p.synthesize_values(&u).unwrap();
    let nodes = p.grid().nodes();
    for i in (0..nodes.len()).step_by(53) {
        let v = evaluate_at(&u, &nodes[i]).unwrap();
        assert!((v - vals[i]).abs() < 1e-10, "node {i}: {v} vs {}", vals[i]);
    }
}

#[test]
fn evaluate_matches_dense_grid_oracle_at_random_points() {
    // Oracle: synthesize on a denser grid (different nodes) and compare
    // with off-grid evaluation at those nodes, which are generic points.
    let u = random_field(8, 1.0, 5);
    let dense = SphereTransform::on_grid(8, Arc::new(QuadratureGrid::with_resolution(23))).unwrap();
    let vals = dense.synthesize_values(&u).unwrap();
    let nodes = dense.grid().nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let i = rng.gen_range(0..nodes.len());
        let v = evaluate_at(&u, &nodes[i]).unwrap();
        assert!((v - vals[i]).abs() < 1e-8);
    }
}

#[test]
fn laplacian_and_paneitz_eigenvalues() {
    let c = SpectralField::constant(8, 1.0);
    assert!(apply_laplacian(&c).coeffs().iter().all(|&v| v == 0.0));
    assert!(apply_paneitz(&c).coeffs().iter().all(|&v| v == 0.0));
    let x5 = SpectralField::coordinate(8, 4);
    assert!(apply_laplacian(&x5).max_abs_diff(&x5.scaled(-4.0)) < 1e-15);
    assert!(apply_paneitz(&x5).max_abs_diff(&x5.scaled(24.0)) < 1e-15);
    for (k, lam, mu) in [(2usize, -10.0, 120.0), (3, -18.0, 360.0)] {
        let mut u = SpectralField::zeros(8);
        u.coeffs_mut()[degree_offset(k) + 1] = 1.0;
        assert!(apply_laplacian(&u).max_abs_diff(&u.scaled(lam)) < 1e-15);
        assert!(apply_paneitz(&u).max_abs_diff(&u.scaled(mu)) < 1e-15);
    }
}

#[test]
fn paneitz_quadratic_form_of_small_linear_field() {
    let eps = 0.37;
    let u = SpectralField::coordinate(8, 4).scaled(eps);
    let form = u.dot(&apply_paneitz(&u));
    assert!((form / (24.0 * eps * eps / 5.0) - 1.0).abs() < 1e-10);
}

#[test]
fn paneitz_is_laplacian_squared_minus_twice_laplacian() {
    let u = random_field(12, 1.0, 21);
    let lap = apply_laplacian(&u);
    let mut composed = apply_laplacian(&lap);
    composed.axpy(-2.0, &lap);
    let p = apply_paneitz(&u);
    for (a, b) in composed.coeffs().iter().zip(p.coeffs()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn green_identity_by_quadrature() {
    let p = plan(10, 1);
    let u = random_field(10, 1.0, 1);
    let v = random_field(10, 1.0, 2);
    let pu = p.synthesize_values(&apply_paneitz(&u)).unwrap();
    let pv = p.synthesize_values(&apply_paneitz(&v)).unwrap();
    let uu = p.synthesize_values(&u).unwrap();
    let vv = p.synthesize_values(&v).unwrap();
    let lhs: Vec<f64> = uu.iter().zip(&pv).map(|(a, b)| a * b).collect();
    let rhs: Vec<f64> = pu.iter().zip(&vv).map(|(a, b)| a * b).collect();
    let l = p.grid().integrate_dc(&lhs);
    let r = p.grid().integrate_dc(&rhs);
    assert!((l - r).abs() <= 1e-10 * l.abs());
}

#[test]
fn integrate_examples() {
    let p = plan(8, 1);
    let g = p.grid().clone();
    let one = GridField::new(g.clone(), vec![1.0; g.len()]);
    assert!((integrate(&one) / VOLUME_S4 - 1.0).abs() < 1e-13);
    let x5 = GridField::from_fn(g.clone(), |x| x[4]);
    assert!(integrate(&x5).abs() < 1e-12);
    let x5sq = GridField::from_fn(g.clone(), |x| x[4] * x[4]);
    assert!((integrate(&x5sq) - 8.0 * PI * PI / 15.0).abs() < 1e-11);
}

#[test]
fn exp_examples_and_overflow() {
    let p = plan(4, 1);
    let g = p.grid().clone();
    let zero = GridField::new(g.clone(), vec![0.0; g.len()]);
    assert!(pointwise_exp_product(&zero, 4.0).unwrap().values().iter().all(|&v| v == 1.0));
    let c = GridField::new(g.clone(), vec![0.3; g.len()]);
    let e = pointwise_exp_product(&c, 4.0).unwrap();
    assert!(e.values().iter().all(|&v| (v - 1.2f64.exp()).abs() < 1e-15));
    let big = GridField::new(g.clone(), vec![200.0; g.len()]);
    assert!(pointwise_exp_product(&big, 4.0).is_err());
}

#[test]
fn exp_tail_stays_small_for_smooth_field() {
    let p = plan(16, 2);
    let u = SpectralField::coordinate(16, 4).scaled(0.2);
    let ug = p.synthesize(&u).unwrap();
    let e = pointwise_exp_product(&ug, 4.0).unwrap();
    let (_, tail) = p.tail_fraction(e.values());
    assert!(tail < DEFAULT_TAIL_TOL, "{tail}");
}

#[test]
fn transforms_are_deterministic() {
    let p = plan(10, 2);
    let u = random_field(10, 1.0, 8);
    let a = p.synthesize_values(&u).unwrap();
    let b = p.synthesize_values(&u).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    let ca = p.analyze_values(&a);
    let cb = p.analyze_values(&b);
    assert!(ca.coeffs().iter().zip(cb.coeffs()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn labels_cover_layout() {
    assert_eq!(labels(16).len(), coeff_count(16));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn round_trip_property(seed in 0u64..10_000, l in 4usize..9) {
        let p = plan(l, 1);
        let u = random_field(l, 1.0, seed);
        let back = p.analyze(&p.synthesize(&u).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&u) < 1e-10);
    }
}
