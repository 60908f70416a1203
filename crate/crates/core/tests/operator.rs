use impctl::operator::expm::expm;
use impctl::operator::{downstream_maps, jump_apply, SemigroupModel};
use impctl::models::make_rotation_example;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
}

fn vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-3.0..3.0f64, n).prop_map(DVector::from_vec)
}

fn models() -> impl Strategy<Value = SemigroupModel> {
    prop_oneof![
        matrix(3).prop_map(|a| SemigroupModel::dense(a).unwrap()),
        prop::collection::vec(-10.0..0.0f64, 3)
            .prop_map(|e| SemigroupModel::spectral(DVector::from_vec(e)).unwrap()),
        (1usize..4).prop_map(|m| SemigroupModel::wave(m).unwrap()),
    ]
}

/// Truncated Taylor series with enough terms for `|A t| <= 4`.
fn taylor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..80 {
        term = &term * a / k as f64;
        sum += &term;
    }
    sum
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup_law(model in models(), t in 0.0..1.5f64, s in 0.0..1.5f64) {
        let st = model.transfer(t).unwrap();
        let ss = model.transfer(s).unwrap();
        let sts = model.transfer(t + s).unwrap();
        let scale = 1.0 + sts.amax();
        prop_assert!((&st * &ss - &sts).amax() <= 1e-10 * scale);
    }

    #[test]
    fn adjoint_is_metric_adjoint(model in models(), t in 0.0..2.0f64) {
        let d = model.dim();
        let x = DVector::from_fn(d, |i, _| (i as f64 + 1.0).sin());
        let y = DVector::from_fn(d, |i, _| (2.0 * i as f64 + 0.5).cos());
        let lhs = model.inner(&model.evolve(t, &x).unwrap(), &y);
        let rhs = model.inner(&x, &model.evolve_adjoint(t, &y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn expm_matches_taylor(a in matrix(4), t in 0.0..1.0f64) {
        let at = &a * t;
        let e = expm(&at).unwrap();
        let reference = taylor(&at);
        prop_assert!((&e - &reference).amax() <= 1e-11 * (1.0 + reference.amax()));
    }

    #[test]
    fn jump_is_affine(b in matrix(2), x in vector(2), y in vector(2), v in vector(1), c in -2.0..2.0f64) {
        let d = DMatrix::from_column_slice(2, 1, &[0.3, -1.1]);
        let zero = DVector::zeros(1);
        let lhs = jump_apply(&b, &d, &(&x + &y * c), &v).unwrap();
        let rhs = jump_apply(&b, &d, &x, &v).unwrap() + jump_apply(&b, &d, &y, &zero).unwrap() * c;
        prop_assert!((lhs - rhs).amax() <= 1e-12 * 10.0);
    }
}

#[test]
fn downstream_maps_compose_flow_and_jumps() {
    let sys = make_rotation_example().unwrap();
    let e = downstream_maps(&sys).unwrap();
    let model = sys.semigroup();
    let b = model.transfer(1.0).unwrap();
    let jump = DMatrix::identity(2, 2) + &sys.impulses()[0].jump;
    assert!((&e[1] - &b).amax() < 1e-14);
    assert!((&e[0] - &b * jump * &b).amax() < 1e-14);
}

#[test]
fn printed_jump_of_the_rotation_example() {
    let sys = make_rotation_example().unwrap();
    let imp = &sys.impulses()[0];
    let flow = sys.semigroup().evolve(1.0, sys.initial_state()).unwrap();
    let x = jump_apply(&imp.jump, &imp.input, &flow, &DVector::from_element(1, 1.0)).unwrap();
    let expected = [1.0 + 1f64.cos(), -0.5 * 1f64.sin()];
    assert!((x[0] - expected[0]).abs() < 1e-15);
    assert!((x[1] - expected[1]).abs() < 1e-15);
    assert!((x[0] - 1.5403).abs() < 5e-5 && (x[1] + 0.42075).abs() < 5e-5);
}
