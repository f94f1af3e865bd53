mod common;

use approx::assert_relative_eq;
use common::*;
use hallar::testing::DenseSdp;
use hallar::{al_gradient, al_value, gradient_operator, project_ball, Factor, SymmetricOperator};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn one_dim() -> hallar::SdpInstance {
    DenseSdp::new(DMatrix::from_element(1, 1, 2.0), vec![DMatrix::from_element(1, 1, 1.0)])
        .instance(DVector::from_element(1, 1.0), 1.0)
}

fn half() -> Factor {
    Factor::new(DMatrix::from_element(1, 1, 0.5)).unwrap()
}

#[test]
fn one_dimensional_value_gradient_and_operator() {
    let inst = one_dim();
    let p = DVector::zeros(1);
    assert_relative_eq!(al_value(&inst, &half(), &p, 2.0).unwrap(), 1.0625, epsilon = 1e-15);
    assert_relative_eq!(al_gradient(&inst, &half(), &p, 2.0).unwrap()[0], 0.5, epsilon = 1e-15);
    let g = gradient_operator(&inst, &half(), &p, 2.0).unwrap();
    assert_relative_eq!(g.apply(&DVector::from_element(1, 1.0))[0], 0.5, epsilon = 1e-15);
}

#[test]
fn zero_factor() {
    let mut r = rng(1);
    let (_, inst) = random_instance(5, 3, &mut r);
    let z = Factor::zeros(5, 2);
    let p = DVector::zeros(3);
    for beta in [0.1, 1.0, 37.0] {
        let v = al_value(&inst, &z, &p, beta).unwrap();
        assert_relative_eq!(v, 0.5 * beta * inst.b().norm_squared(), max_relative = 1e-14);
        assert_eq!(al_gradient(&inst, &z, &p, beta).unwrap(), DMatrix::zeros(5, 2));
    }
}

#[test]
fn value_matches_dense_oracle() {
    let mut r = rng(2);
    for _ in 0..20 {
        let (dense, inst) = random_instance(6, 4, &mut r);
        let u = gaussian(6, 2, &mut r);
        let p = gaussian_vec(4, &mut r);
        let got = al_value(&inst, &Factor::new(u.clone()).unwrap(), &p, 3.0).unwrap();
        let want = dense_al(&dense, inst.b(), &(&u * u.transpose()), &p, 3.0);
        assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()), "{got} vs {want}");
    }
}

#[test]
fn operator_matches_dense_gradient() {
    let mut r = rng(3);
    let (dense, inst) = random_instance(7, 3, &mut r);
    let u = gaussian(7, 2, &mut r);
    let p = gaussian_vec(3, &mut r);
    let beta = 4.0;
    let g = gradient_operator(&inst, &Factor::new(u.clone()).unwrap(), &p, beta).unwrap();
    let q = &p + (dense.map_matrix(&(&u * u.transpose())) - inst.b()) * beta;
    let big_g = &dense.c + dense.adjoint_matrix(&q);
    for _ in 0..5 {
        let v = gaussian_vec(7, &mut r);
        assert!((g.apply(&v) - &big_g * &v).norm() <= 1e-10 * (1.0 + v.norm()));
    }
}

#[test]
fn operator_with_zero_multiplier_is_c() {
    let mut r = rng(4);
    let dense = random_dense(5, 2, &mut r);
    let u = ball_point(5, 1, &mut r);
    let b = dense.map_matrix(&(&u * u.transpose()));
    let inst = dense.clone().instance(b, 1.0);
    let g = gradient_operator(&inst, &Factor::new(u).unwrap(), &DVector::zeros(2), 1.0).unwrap();
    let v = gaussian_vec(5, &mut r);
    assert!((g.apply(&v) - &dense.c * &v).norm() < 1e-12);
}

#[test]
fn dimension_mismatch_is_an_input_error() {
    let inst = one_dim();
    assert!(al_value(&inst, &half(), &DVector::zeros(2), 1.0).is_err());
    assert!(al_value(&inst, &Factor::zeros(2, 1), &DVector::zeros(1), 1.0).is_err());
    assert!(al_value(&inst, &half(), &DVector::zeros(1), 0.0).is_err());
}

#[test]
fn project_ball_examples() {
    let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]);
    let got = project_ball(m).unwrap();
    assert_relative_eq!(*got.matrix(), DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.0, 0.8]), epsilon = 1e-15);
    let inside = DMatrix::from_column_slice(2, 1, &[0.3, 0.4]);
    assert_eq!(project_ball(inside.clone()).unwrap().matrix(), &inside);
    assert_eq!(project_ball(DMatrix::zeros(2, 3)).unwrap().matrix(), &DMatrix::zeros(2, 3));
}

/// Central differences of `al_value` along every coordinate.
fn finite_difference(inst: &hallar::SdpInstance, u: &DMatrix<f64>, p: &DVector<f64>, beta: f64) -> DMatrix<f64> {
    let h = 1e-6;
    let f = |m: &DMatrix<f64>| al_value(inst, &Factor::new(m.clone()).unwrap(), p, beta).unwrap();
    DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[(i, j)] += h;
        dn[(i, j)] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (_, inst) = random_instance(8, 5, &mut r);
        let u = gaussian(8, 3, &mut r) * 0.5;
        let p = gaussian_vec(5, &mut r);
        let got = al_gradient(&inst, &Factor::new(u.clone()).unwrap(), &p, 2.0).unwrap();
        let fd = finite_difference(&inst, &u, &p, 2.0);
        let scale = got.amax().max(1.0);
        for (a, b) in got.iter().zip(fd.iter()) {
            prop_assert!((a - b).abs() <= 1e-5 * scale, "{} vs {}", a, b);
        }
    }

    #[test]
    fn value_is_rotation_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (_, inst) = random_instance(6, 3, &mut r);
        let u = gaussian(6, 3, &mut r);
        let q = gaussian(3, 3, &mut r).qr().q();
        let p = gaussian_vec(3, &mut r);
        let a = al_value(&inst, &Factor::new(u.clone()).unwrap(), &p, 5.0).unwrap();
        let b = al_value(&inst, &Factor::new(u * q).unwrap(), &p, 5.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive(seed in any::<u64>(), s1 in 0.01f64..10.0, s2 in 0.01f64..10.0) {
        let mut r = rng(seed);
        let a = gaussian(4, 2, &mut r) * s1;
        let b = gaussian(4, 2, &mut r) * s2;
        let pa = project_ball(a.clone()).unwrap().into_matrix();
        let pb = project_ball(b.clone()).unwrap().into_matrix();
        prop_assert!(pa.norm() <= 1.0 + 1e-15);
        prop_assert!((project_ball(pa.clone()).unwrap().into_matrix() - &pa).amax() <= 1e-15);
        prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-12);
    }
}
