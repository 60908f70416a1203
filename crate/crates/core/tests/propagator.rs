use impctl::models::{make_heat, make_rotation_example, reset_impulses, rotation_controls, HeatBoundary};
use impctl::operator::{Impulse, ImpulsiveSystem, NonlinearityKind, SemigroupModel, TabulatedForcing};
use impctl::propagator::{
    dense_oracle, mild_solve_linear, mild_solve_semilinear, PicardOptions, QuadratureGrid, Side, Trajectory,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn euclid(x: &DVector<f64>) -> f64 {
    x.norm()
}

fn damped_oscillator(kappa: NonlinearityKind) -> ImpulsiveSystem {
    let a = DMatrix::from_row_slice(2, 2, &[-0.2, 1.0, -1.5, -0.1]);
    ImpulsiveSystem::new(
        SemigroupModel::dense(a).unwrap(),
        3.0,
        vec![
            Impulse {
                time: 0.8,
                jump: DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.2, -0.3]),
                input: DMatrix::from_column_slice(2, 1, &[1.0, 0.5]),
            },
            Impulse {
                time: 2.1,
                jump: DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.0]),
                input: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            },
        ],
        DMatrix::identity(2, 2),
        DVector::from_vec(vec![0.7, -0.3]),
        kappa,
    )
    .unwrap()
}

#[test]
fn zero_inputs_sample_the_free_flow() {
    let sys = make_rotation_example().unwrap().without_impulses();
    let sys = sys.with_nonlinearity(NonlinearityKind::None).unwrap();
    let grid = QuadratureGrid::default_for(&sys).unwrap();
    let traj = mild_solve_linear(&sys, &|_| DVector::zeros(2), &[], &grid).unwrap();
    for (t, _, x) in traj.samples() {
        let exact = DVector::from_vec(vec![t.cos(), -t.sin()]);
        assert!((x - exact).amax() < 1e-13, "t = {t}");
    }
}

#[test]
fn semilinear_matches_rk4_with_two_impulses() {
    let sys = damped_oscillator(NonlinearityKind::BoundedSin { coefficient: 0.3 });
    let grid = QuadratureGrid::default_for(&sys).unwrap();
    let u = |t: f64| DVector::from_vec(vec![(2.0 * t).cos(), 0.2]);
    let v = [DVector::from_element(1, 0.4), DVector::from_element(1, -0.6)];
    let sol = mild_solve_semilinear(&sys, &u, &v, &grid, &PicardOptions::default()).unwrap();
    let oracle = dense_oracle(&sys, &u, &v, 1e-3).unwrap();
    assert!(sol.trajectory.sup_distance(&oracle, euclid) < 1e-9);
    assert_eq!(sol.trajectory.impulse_count(), 2);
}

#[test]
fn refinement_converges_to_the_fine_solution() {
    let sys = damped_oscillator(NonlinearityKind::Example53Quadratic { coefficient: 0.2 });
    let u = |t: f64| DVector::from_vec(vec![(5.0 * t).sin(), 0.0]);
    let v = [DVector::from_element(1, 0.0), DVector::from_element(1, 0.0)];
    let opts = PicardOptions::default();
    let fine = {
        let grid = QuadratureGrid::uniform(&sys, 8, 32).unwrap();
        mild_solve_semilinear(&sys, &u, &v, &grid, &opts).unwrap().trajectory
    };
    let mut errors = vec![];
    for order in [2, 3, 4] {
        let grid = QuadratureGrid::uniform(&sys, order, 4).unwrap();
        let sol = mild_solve_semilinear(&sys, &u, &v, &grid, &opts).unwrap();
        errors.push((sol.trajectory.terminal() - fine.terminal()).norm());
    }
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
    assert!(errors[2] < 1e-4);
}

#[test]
fn rotation_figures_have_the_jump_only_when_impulsive() {
    let sys = make_rotation_example().unwrap();
    let opts = PicardOptions::default();
    for with_u in [true, false] {
        let c = rotation_controls(with_u);
        let u = |_: f64| c.u.clone();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let jumpy = mild_solve_semilinear(&sys, &u, &c.v, &grid, &opts).unwrap().trajectory;
        let gap = (jumpy.eval(1.0, Side::Right) - jumpy.eval(1.0, Side::Left)).norm();
        assert!(gap > 0.5);

        let plain = sys.without_impulses();
        let grid = QuadratureGrid::default_for(&plain).unwrap();
        let smooth = mild_solve_semilinear(&plain, &u, &[], &grid, &opts).unwrap().trajectory;
        assert_eq!(smooth.impulse_count(), 0);
        let oracle = dense_oracle(&plain, &u, &[], 1e-3).unwrap();
        assert!(smooth.sup_distance(&oracle, euclid) < 1e-6);
    }
}

#[test]
fn reset_impulse_zeroes_the_state() {
    let sys = make_heat(4, 1.0, HeatBoundary::Dirichlet, reset_impulses(&[0.5], 4))
        .unwrap()
        .with_initial_state(DVector::from_element(4, 1.0))
        .unwrap();
    let grid = QuadratureGrid::default_for(&sys).unwrap();
    let v = [DVector::zeros(4)];
    let traj = mild_solve_linear(&sys, &|_| DVector::zeros(3), &v, &grid).unwrap();
    assert!(traj.right_limit(0).amax() == 0.0);
    assert!(traj.terminal().amax() == 0.0);
    assert!(traj.left_limit(0).amax() > 0.1);
}

#[test]
fn trajectory_csv_reingests_exactly() {
    let sys = damped_oscillator(NonlinearityKind::None);
    let grid = QuadratureGrid::uniform(&sys, 4, 3).unwrap();
    let v = [DVector::from_element(1, 1.0), DVector::from_element(1, 2.0)];
    let traj = mild_solve_linear(&sys, &|t| DVector::from_vec(vec![t, -t]), &v, &grid).unwrap();
    let text = traj.to_csv();
    let back = Trajectory::from_csv(&text).unwrap();
    assert_eq!(back.to_csv(), text);
    assert_eq!(back.sup_distance(&traj, euclid), 0.0);
}

#[test]
fn tabulated_forcing_from_a_trajectory_reproduces_its_samples() {
    let sys = damped_oscillator(NonlinearityKind::None).without_impulses();
    let grid = QuadratureGrid::uniform(&sys, 6, 4).unwrap();
    let traj = mild_solve_linear(&sys, &|_| DVector::from_vec(vec![1.0, 0.0]), &[], &grid).unwrap();
    let seg = &traj.segments()[0];
    let f = TabulatedForcing::from_samples(seg.times.clone(), seg.states.clone()).unwrap();
    for (t, x) in seg.times.iter().zip(&seg.states) {
        assert_eq!(&f.eval(*t), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linear_mild_solution_matches_rk4(
        a in prop::collection::vec(-1.0..1.0f64, 4),
        b in prop::collection::vec(-0.5..0.5f64, 4),
        x0 in prop::collection::vec(-1.0..1.0f64, 2),
        t1_ms in 300u32..1700,
        w in 0.5..4.0f64,
    ) {
        let sys = ImpulsiveSystem::new(
            SemigroupModel::dense(DMatrix::from_vec(2, 2, a)).unwrap(),
            2.0,
            vec![Impulse { time: t1_ms as f64 / 1000.0, jump: DMatrix::from_vec(2, 2, b), input: DMatrix::identity(2, 2) }],
            DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(x0),
            NonlinearityKind::None,
        ).unwrap();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let u = |t: f64| DVector::from_element(1, (w * t).sin());
        let v = [DVector::from_vec(vec![0.5, -0.25])];
        let traj = mild_solve_linear(&sys, &u, &v, &grid).unwrap();
        let oracle = dense_oracle(&sys, &u, &v, 1e-3).unwrap();
        prop_assert!(traj.sup_distance(&oracle, euclid) < 1e-8);
    }
}
