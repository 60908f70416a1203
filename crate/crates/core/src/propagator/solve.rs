use nalgebra::DVector;

use super::engine::Propagator;
use super::quadrature::QuadratureGrid;
use super::trajectory::Trajectory;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::operator::{jump_apply, ImpulsiveSystem};

/// A continuous control `t -> u(t)`.
pub type ControlFn<'a> = &'a dyn Fn(f64) -> DVector<f64>;

/// Settings for the fixed-point iteration behind the semilinear solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Relative tolerance on the sup-norm change between iterates.
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation weight in `(0, 1]`; 1 is plain Picard.
    pub damping: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            damping: 1.0,
        }
    }
}

impl PicardOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Converged semilinear solution with its iteration record.
#[derive(Debug, Clone)]
pub struct SemilinearSolution {
    pub trajectory: Trajectory,
    /// Picard sweeps performed; zero when the problem is linear.
    pub iterations: usize,
    /// Sup-norm change at each sweep.
    pub gaps: Vec<f64>,
    pub node_states: Vec<DVector<f64>>,
}

pub(crate) fn check_impulse_controls(system: &ImpulsiveSystem, v: &[DVector<f64>]) -> Result<()> {
    check_dim("impulse control count", system.impulse_count(), v.len())?;
    for (imp, vk) in system.impulses().iter().zip(v) {
        check_dim("impulse control", imp.input.ncols(), vk.len())?;
        check_finite("impulse control", vk.iter())?;
    }
    Ok(())
}

/// `Omega u(s_j)` plus any time-only forcing, at every quadrature node.
pub(crate) fn control_forcing(
    system: &ImpulsiveSystem,
    grid: &QuadratureGrid,
    u: ControlFn<'_>,
) -> Result<Vec<DVector<f64>>> {
    let d = system.dim();
    let mut out = Vec::with_capacity(grid.node_count());
    for node in grid.nodes() {
        let uj = u(node.time);
        check_dim("control value", system.control_dim(), uj.len())?;
        check_finite("control value", uj.iter())?;
        let mut f = system.input_map() * uj;
        f += system.nonlinearity().known_forcing(node.time, d);
        out.push(f);
    }
    Ok(out)
}

pub(crate) fn standard_jumps<'v>(
    system: &'v ImpulsiveSystem,
    v: &'v [DVector<f64>],
) -> impl FnMut(usize, &DVector<f64>) -> Result<DVector<f64>> + 'v {
    move |k, x| {
        let imp = &system.impulses()[k];
        jump_apply(&imp.jump, &imp.input, x, &v[k])
    }
}

/// Mild solution of the linear impulsive system. State-dependent
/// nonlinearities are ignored; a tabulated nonlinearity enters as a known
/// forcing.
pub fn mild_solve_linear(
    system: &ImpulsiveSystem,
    u: ControlFn<'_>,
    v: &[DVector<f64>],
    grid: &QuadratureGrid,
) -> Result<Trajectory> {
    let prop = Propagator::new(system, grid)?;
    Ok(linear_with(&prop, u, v)?.0)
}

fn linear_with(
    prop: &Propagator<'_>,
    u: ControlFn<'_>,
    v: &[DVector<f64>],
) -> Result<(Trajectory, Vec<DVector<f64>>)> {
    let system = prop.system();
    check_impulse_controls(system, v)?;
    let forcing = control_forcing(system, prop.grid(), u)?;
    let out = prop.run(system.initial_state(), &forcing, standard_jumps(system, v))?;
    Ok((out.trajectory, out.node_states))
}

/// Mild solution of the semilinear impulsive system by Picard iteration on
/// the node states.
pub fn mild_solve_semilinear(
    system: &ImpulsiveSystem,
    u: ControlFn<'_>,
    v: &[DVector<f64>],
    grid: &QuadratureGrid,
    opts: &PicardOptions,
) -> Result<SemilinearSolution> {
    opts.validate()?;
    let prop = Propagator::new(system, grid)?;
    semilinear_with(&prop, u, v, opts, None)
}

pub(crate) fn semilinear_with(
    prop: &Propagator<'_>,
    u: ControlFn<'_>,
    v: &[DVector<f64>],
    opts: &PicardOptions,
    warm_start: Option<&[DVector<f64>]>,
) -> Result<SemilinearSolution> {
    let system = prop.system();
    if !system.nonlinearity().is_state_dependent() {
        let (trajectory, node_states) = linear_with(prop, u, v)?;
        return Ok(SemilinearSolution {
            trajectory,
            iterations: 0,
            gaps: vec![],
            node_states,
        });
    }
    check_impulse_controls(system, v)?;
    let base = control_forcing(system, prop.grid(), u)?;
    let nodes: Vec<f64> = prop.grid().nodes().map(|n| n.time).collect();
    let model = system.semigroup();
    let kappa = system.nonlinearity();

    let mut current = match warm_start {
        Some(w) => w.to_vec(),
        None => prop.run(system.initial_state(), &base, standard_jumps(system, v))?.node_states,
    };
    let mut gaps = Vec::new();
    for iter in 1..=opts.max_iter {
        let forcing: Vec<DVector<f64>> = base
            .iter()
            .zip(&current)
            .zip(&nodes)
            .map(|((b, x), &t)| b + kappa.eval(t, x))
            .collect();
        let out = match prop.run(system.initial_state(), &forcing, standard_jumps(system, v)) {
            Ok(o) => o,
            Err(Error::NonFinite(_)) => {
                return Err(Error::Diverged {
                    what: "semilinear Picard iteration",
                    iteration: iter,
                })
            }
            Err(e) => return Err(e),
        };
        let mut gap: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (new, old) in out.node_states.iter().zip(&current) {
            gap = gap.max(model.norm(&(new - old)));
            scale = scale.max(model.norm(new));
        }
        if !gap.is_finite() {
            return Err(Error::Diverged {
                what: "semilinear Picard iteration",
                iteration: iter,
            });
        }
        gaps.push(gap);
        if gap <= opts.tol * (1.0 + scale) {
            return Ok(SemilinearSolution {
                trajectory: out.trajectory,
                iterations: iter,
                gaps,
                node_states: out.node_states,
            });
        }
        current = if opts.damping == 1.0 {
            out.node_states
        } else {
            out.node_states
                .iter()
                .zip(&current)
                .map(|(new, old)| old * (1.0 - opts.damping) + new * opts.damping)
                .collect()
        };
    }
    Err(Error::NotConverged {
        what: "semilinear Picard iteration",
        iterations: opts.max_iter,
        last_gap: gaps.last().copied().unwrap_or(f64::NAN),
        history: gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{Impulse, NonlinearityKind, SemigroupModel};
    use crate::propagator::dense_oracle;
    use nalgebra::DMatrix;

    fn scalar(kappa: NonlinearityKind) -> ImpulsiveSystem {
        ImpulsiveSystem::new(
            SemigroupModel::dense(DMatrix::zeros(1, 1)).unwrap(),
            1.0,
            vec![],
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 0.25),
            kappa,
        )
        .unwrap()
    }

    fn rotation() -> ImpulsiveSystem {
        ImpulsiveSystem::new(
            SemigroupModel::dense(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap(),
            2.0,
            vec![Impulse {
                time: 1.0,
                jump: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -0.5]),
                input: DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            }],
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.0]),
            NonlinearityKind::Example53Quadratic { coefficient: 0.1 },
        )
        .unwrap()
    }

    #[test]
    fn constant_control_on_trivial_generator() {
        let sys = scalar(NonlinearityKind::None);
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let tr = mild_solve_linear(&sys, &|_| DVector::from_element(1, 1.0), &[], &grid).unwrap();
        assert!((tr.terminal()[0] - 1.25).abs() < 1e-14);
        assert!((tr.state_at(0.5)[0] - 0.75).abs() < 1e-13);
    }

    #[test]
    fn zero_input_is_pure_flow() {
        let sys = rotation().without_impulses();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let zero = |_| DVector::zeros(2);
        let tr = mild_solve_linear(&sys, &zero, &[], &grid).unwrap();
        for (t, _, x) in tr.samples() {
            let want = sys.semigroup().evolve(t, sys.initial_state()).unwrap();
            assert!((x - want).amax() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn linear_rotation_jump_decomposition() {
        let sys = rotation().with_nonlinearity(NonlinearityKind::None).unwrap();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let u = |_| DVector::from_vec(vec![1.0, 0.0]);
        let v = [DVector::from_element(1, 1.0)];
        let tr = mild_solve_linear(&sys, &u, &v, &grid).unwrap();
        // int_0^1 S(1-s) (1,0) ds = (sin 1, cos 1 - 1)
        let c1 = 1f64.cos();
        let s1 = 1f64.sin();
        let left = DVector::from_vec(vec![c1 + s1, -s1 + c1 - 1.0]);
        assert!((tr.left_limit(0) - &left).amax() < 1e-14);
        let right = DVector::from_vec(vec![left[0] + 1.0, 0.5 * left[1]]);
        assert!((tr.right_limit(0) - right).amax() < 1e-14);
    }

    #[test]
    fn none_nonlinearity_is_bitwise_linear() {
        let sys = rotation().with_nonlinearity(NonlinearityKind::None).unwrap();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let u = |t: f64| DVector::from_vec(vec![t.cos(), 0.0]);
        let v = [DVector::from_element(1, 0.3)];
        let a = mild_solve_linear(&sys, &u, &v, &grid).unwrap();
        let b = mild_solve_semilinear(&sys, &u, &v, &grid, &PicardOptions::default()).unwrap();
        assert_eq!(a, b.trajectory);
        assert_eq!(b.iterations, 0);
    }

    #[test]
    fn bounded_sin_matches_rk4() {
        let sys = scalar(NonlinearityKind::BoundedSin { coefficient: 0.1 });
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let u = |t: f64| DVector::from_element(1, (3.0 * t).sin());
        let sol = mild_solve_semilinear(&sys, &u, &[], &grid, &PicardOptions::default()).unwrap();
        let oracle = dense_oracle(&sys, &u, &[], 1e-3).unwrap();
        let dist = sol.trajectory.sup_distance(&oracle, |x| x.amax());
        assert!(dist < 1e-6, "{dist}");
        // small Lipschitz constant: geometric contraction of the gaps
        let g = &sol.gaps;
        assert!(g.len() >= 4);
        for w in g.windows(2).take(3) {
            assert!(w[1] < w[0], "{g:?}");
        }
    }

    #[test]
    fn quadratic_example_converges_with_exact_jump() {
        let sys = rotation();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let u = |_| DVector::from_vec(vec![1.0, 0.0]);
        let v = [DVector::from_element(1, 1.0)];
        let sol = mild_solve_semilinear(&sys, &u, &v, &grid, &PicardOptions::default()).unwrap();
        let imp = &sys.impulses()[0];
        let want = jump_apply(&imp.jump, &imp.input, sol.trajectory.left_limit(0), &v[0]).unwrap();
        assert!((sol.trajectory.right_limit(0) - want).amax() <= 1e-10);
    }

    #[test]
    fn non_convergence_is_reported() {
        let sys = rotation();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let u = |_| DVector::from_vec(vec![1.0, 0.0]);
        let v = [DVector::from_element(1, 1.0)];
        let opts = PicardOptions {
            max_iter: 2,
            ..Default::default()
        };
        match mild_solve_semilinear(&sys, &u, &v, &grid, &opts) {
            Err(Error::NotConverged { history, .. }) => assert_eq!(history.len(), 2),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn rejects_wrong_control_shapes() {
        let sys = rotation();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let u = |_| DVector::from_vec(vec![1.0, 0.0]);
        assert!(mild_solve_linear(&sys, &u, &[], &grid).is_err());
        let bad = |_| DVector::from_vec(vec![f64::NAN, 0.0]);
        assert!(mild_solve_linear(&sys, &bad, &[DVector::zeros(1)], &grid).is_err());
        let other = QuadratureGrid::default_for(&sys.without_impulses()).unwrap();
        assert!(mild_solve_linear(&sys, &u, &[DVector::zeros(1)], &other).is_err());
    }
}
