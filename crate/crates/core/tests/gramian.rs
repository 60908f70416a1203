use impctl::gramian::{
    a0_diagnostic, assemble, gramian_from_input_map, input_to_terminal_matrix, resolvent_solve, GramianSet,
};
use impctl::models::{make_heat, HeatBoundary, ModelPreset};
use impctl::operator::{Impulse, ImpulsiveSystem, NonlinearityKind, SemigroupModel};
use impctl::propagator::QuadratureGrid;
use impctl::synthesis::DEFAULT_ALPHAS;
use nalgebra::{DMatrix, DVector};

fn frob_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

#[test]
fn every_preset_is_psd_and_factors_through_the_input_map() {
    for preset in ModelPreset::ALL {
        let sys = preset.build().unwrap();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let g = assemble(&sys, &grid).unwrap();
        let scale = g.total.amax();
        for (name, m) in g.parts().into_iter().chain([("total", &g.total)]) {
            assert!(g.self_adjoint_defect(m) <= 1e-12 * scale, "{preset} {name}");
            assert!(g.min_eigenvalue(m) >= -1e-10 * scale, "{preset} {name}");
        }
        let sum = &g.gamma + &g.gamma_tilde + &g.theta + &g.theta_tilde;
        assert!(frob_rel(&sum, &g.total) < 1e-14, "{preset}");
        let ll = gramian_from_input_map(&sys, &grid).unwrap();
        assert!(frob_rel(&ll, &g.total) < 1e-8, "{preset}");
    }
}

#[test]
fn scalar_integrator_with_an_impulse() {
    // x' = u, x(1+) = 2 x(1) + v on [0, 2]: W = 4 * 1 + 1 + 1 * 1 = 6
    let sys = ImpulsiveSystem::new(
        SemigroupModel::dense(DMatrix::zeros(1, 1)).unwrap(),
        2.0,
        vec![Impulse {
            time: 1.0,
            jump: DMatrix::from_element(1, 1, 1.0),
            input: DMatrix::from_element(1, 1, 1.0),
        }],
        DMatrix::from_element(1, 1, 1.0),
        DVector::zeros(1),
        NonlinearityKind::None,
    )
    .unwrap();
    let g = assemble(&sys, &QuadratureGrid::default_for(&sys).unwrap()).unwrap();
    assert!((g.total[(0, 0)] - 6.0).abs() < 1e-13);
    assert!((g.gamma[(0, 0)] - 1.0).abs() < 1e-13);
    assert!((g.gamma_tilde[(0, 0)] - 1.0).abs() < 1e-13);
    assert!((g.theta[(0, 0)] - 4.0).abs() < 1e-13);
    assert!(g.theta_tilde[(0, 0)].abs() < 1e-13);
}

#[test]
fn dirichlet_heat_matches_closed_form_without_impulses() {
    for n in 2..=6 {
        let sys = make_heat(n, 1.0, HeatBoundary::Dirichlet, vec![]).unwrap();
        let g = assemble(&sys, &QuadratureGrid::default_for(&sys).unwrap()).unwrap();
        let omega = sys.input_map();
        let oo = omega * omega.transpose();
        for i in 0..n {
            for j in 0..n {
                let s = ((i + 1) * (i + 1) + (j + 1) * (j + 1)) as f64;
                let exact = oo[(i, j)] * (1.0 - (-s).exp()) / s;
                assert!((g.gamma[(i, j)] - exact).abs() < 1e-10, "n={n} ({i},{j})");
            }
        }
    }
}

#[test]
fn input_map_columns_match_the_grid() {
    let sys = ModelPreset::Rotation.build().unwrap();
    let grid = QuadratureGrid::uniform(&sys, 4, 2).unwrap();
    let l = input_to_terminal_matrix(&sys, &grid).unwrap();
    assert_eq!(l.ncols(), grid.node_count() * sys.control_dim() + 1);
    assert_eq!(l.nrows(), 2);
}

#[test]
fn resolvent_solve_agrees_with_a_dense_inverse() {
    let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 0.3]);
    let w = &a * a.transpose();
    let rhs = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    for alpha in DEFAULT_ALPHAS {
        let x = resolvent_solve(&w, alpha, &rhs).unwrap();
        let reference = (DMatrix::identity(3, 3) * alpha + &w).try_inverse().unwrap() * &rhs;
        assert!((&x - &reference).norm() <= 1e-10 * reference.norm());
    }
    assert!(resolvent_solve(&w, 0.0, &rhs).is_err());
}

#[test]
fn decay_ratios_respect_the_spectral_bound() {
    for preset in [ModelPreset::Rotation, ModelPreset::HeatDirichlet, ModelPreset::Wave] {
        let sys = preset.build().unwrap();
        let g = assemble(&sys, &QuadratureGrid::default_for(&sys).unwrap()).unwrap();
        let mu = g.eigenvalues()[0];
        assert!(mu > 0.0, "{preset}");
        let d = g.dim();
        let probes: Vec<_> = (0..d)
            .map(|i| DVector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 }))
            .chain([DVector::from_fn(d, |j, _| (j as f64 + 0.3).sin())])
            .collect();
        let rep = a0_diagnostic(&g, &DEFAULT_ALPHAS, &probes, 1e-3).unwrap();
        for (alpha, row) in rep.alphas.iter().zip(&rep.ratios) {
            for r in row {
                assert!(*r <= alpha / (alpha + mu) + 1e-10, "{preset} alpha={alpha}");
            }
        }
        assert_eq!(rep.flag(), "A0-satisfied");
    }
    let zero = GramianSet::from_total(DMatrix::zeros(2, 2));
    let rep = a0_diagnostic(&zero, &DEFAULT_ALPHAS, &[DVector::from_vec(vec![1.0, 0.0])], 1e-3).unwrap();
    assert_eq!(rep.flag(), "A0-violated");
    assert!(rep.ratios.iter().flatten().all(|r| (r - 1.0).abs() < 1e-14));
}
