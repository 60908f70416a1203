//! Moment vectors, regularized control synthesis, the closed-loop terminal
//! identity, the semilinear outer loop and α sweeps.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::gramian::GramianSet;
use crate::operator::{downstream_maps, ImpulsiveSystem};
use crate::propagator::{
    fmt_f64, semilinear_with, standard_jumps, ControlFn, PicardOptions, Propagator, QuadratureGrid,
    Trajectory,
};

/// Default decreasing regularization schedule for sweeps.
pub const DEFAULT_ALPHAS: [f64; 9] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 1e-5, 1e-6];

/// Relative size below which a Gramian eigenvalue counts as zero.
pub const KERNEL_RTOL: f64 = 1e-12;

/// Target defect of the control-free flow.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub p: DVector<f64>,
}

/// Which continuous control law to synthesize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlVariant {
    /// Exact adjoint of the input-to-terminal map; makes the terminal
    /// identity hold.
    #[default]
    Adjoint,
    /// The printed formula, which drops the jump factors from the
    /// continuous part.
    PaperLiteral,
}

/// A synthesized control pair.
#[derive(Debug, Clone)]
pub struct ControlLaw {
    pub phi: DVector<f64>,
    pub alpha: f64,
    pub variant: ControlVariant,
    /// Impulse controls `v_1, ..., v_p`.
    pub v: Vec<DVector<f64>>,
    system: ImpulsiveSystem,
    /// Adjoint weight applied after `S*(t_{i+1} - s)` on subinterval `i`.
    psi: Vec<DVector<f64>>,
    omega_adj: DMatrix<f64>,
}

impl ControlLaw {
    pub fn system(&self) -> &ImpulsiveSystem {
        &self.system
    }

    /// Continuous control `u(s)`; `s` is clamped to `[0, b]`.
    pub fn continuous(&self, s: f64) -> DVector<f64> {
        let b = self.system.horizon();
        let s = s.clamp(0.0, b);
        let i = self.system.interval_of(s).min(self.system.impulse_count());
        let end = self.system.breakpoints()[i + 1];
        let sa = self
            .system
            .semigroup()
            .evolve_adjoint((end - s).max(0.0), &self.psi[i])
            .expect("adjoint evolution over a non-negative time");
        &self.omega_adj * sa
    }

    pub fn as_fn(&self) -> impl Fn(f64) -> DVector<f64> + '_ {
        move |s| self.continuous(s)
    }
}

pub(crate) fn zero_impulse_controls(system: &ImpulsiveSystem) -> Vec<DVector<f64>> {
    system
        .impulses()
        .iter()
        .map(|imp| DVector::zeros(imp.input.ncols()))
        .collect()
}

/// Terminal state from `x0` with node forcing `forcing` and zero controls.
pub(crate) fn free_terminal(
    prop: &Propagator<'_>,
    x0: &DVector<f64>,
    forcing: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let system = prop.system();
    let zeros = zero_impulse_controls(system);
    prop.terminal(x0, forcing, standard_jumps(system, &zeros))
}

/// `kappa(s_j, x_j)` at every node.
pub(crate) fn kappa_at_nodes(
    system: &ImpulsiveSystem,
    grid: &QuadratureGrid,
    states: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    grid.nodes()
        .zip(states)
        .map(|(n, x)| system.nonlinearity().eval(n.time, x))
        .collect()
}

/// `h` minus the terminal value of the flow driven only by `kappa_forcing`.
pub fn moment_vector(
    system: &ImpulsiveSystem,
    grid: &QuadratureGrid,
    kappa_forcing: ControlFn<'_>,
    h: &DVector<f64>,
) -> Result<MomentVector> {
    let prop = Propagator::new(system, grid)?;
    let mut forcing = Vec::with_capacity(grid.node_count());
    for node in grid.nodes() {
        let k = kappa_forcing(node.time);
        check_dim("kappa forcing", system.dim(), k.len())?;
        forcing.push(k);
    }
    moment_with(&prop, system.initial_state(), &forcing, h)
}

pub(crate) fn moment_with(
    prop: &Propagator<'_>,
    x0: &DVector<f64>,
    forcing: &[DVector<f64>],
    h: &DVector<f64>,
) -> Result<MomentVector> {
    check_dim("target", prop.system().dim(), h.len())?;
    check_finite("target", h.iter())?;
    let p = h - free_terminal(prop, x0, forcing)?;
    check_finite("moment vector", p.iter())?;
    Ok(MomentVector { p })
}

/// Regularized minimum-energy control for the moment vector `p`.
pub fn synthesize(
    system: &ImpulsiveSystem,
    gramians: &GramianSet,
    alpha: f64,
    p: &MomentVector,
    variant: ControlVariant,
) -> Result<ControlLaw> {
    check_dim("moment vector", system.dim(), p.p.len())?;
    let phi = gramians.resolvent_solve(alpha, &p.p)?;
    let model = system.semigroup();
    let e = downstream_maps(system)?;
    let n = system.impulse_count();
    let t = system.breakpoints();
    let d = system.dim();
    let ident = DMatrix::<f64>::identity(d, d);

    let mut psi = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let w = match variant {
            ControlVariant::Adjoint if i < n => {
                let m = &e[i + 1] * (&ident + &system.impulses()[i].jump);
                model.adjoint_state_map(&m) * &phi
            }
            ControlVariant::Adjoint => phi.clone(),
            ControlVariant::PaperLiteral => model.evolve_adjoint(t[n + 1] - t[i + 1], &phi)?,
        };
        psi.push(w);
    }

    let mut v = Vec::with_capacity(n);
    for k in 1..=n {
        let imp = &system.impulses()[k - 1];
        let d_adj = model.adjoint_input_map(&imp.input);
        let w = match variant {
            ControlVariant::Adjoint => model.adjoint_state_map(&e[k]) * &phi,
            ControlVariant::PaperLiteral => {
                // D_k* prod_{i=k}^{p} S*(t_i - t_{i-1}) (I + B_i*) S*(b - t_p) phi,
                // factors applied right to left; the last impulse uses D_p* S*(b - t_p)
                let mut w = model.evolve_adjoint(t[n + 1] - t[n], &phi)?;
                if k < n {
                    for i in (k..=n).rev() {
                        let b_adj = model.adjoint_state_map(&system.impulses()[i - 1].jump);
                        w = &w + b_adj * &w;
                        w = model.evolve_adjoint(t[i] - t[i - 1], &w)?;
                    }
                }
                w
            }
        };
        v.push(d_adj * w);
    }

    Ok(ControlLaw {
        phi,
        alpha,
        variant,
        v,
        omega_adj: model.adjoint_input_map(system.input_map()),
        system: system.clone(),
        psi,
    })
}

/// `-alpha (alpha I + W)^{-1} p`.
pub fn predicted_deviation(gramians: &GramianSet, alpha: f64, p: &MomentVector) -> Result<DVector<f64>> {
    Ok(gramians.resolvent_solve(alpha, &p.p)? * (-alpha))
}

/// Outcome of a closed-loop terminal identity check.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub alpha: f64,
    pub moment: MomentVector,
    /// `xi(b) - h`.
    pub measured: DVector<f64>,
    pub predicted: DVector<f64>,
    pub residual: f64,
    /// `residual / |p|`, or the plain residual when `p = 0`.
    pub relative_residual: f64,
    pub law: ControlLaw,
    pub trajectory: Trajectory,
}

/// Synthesizes with `kappa_forcing` as a known forcing, simulates the linear
/// closed loop and compares its terminal defect with the prediction.
pub fn verify_lemma31(
    system: &ImpulsiveSystem,
    gramians: &GramianSet,
    kappa_forcing: ControlFn<'_>,
    h: &DVector<f64>,
    alpha: f64,
    grid: &QuadratureGrid,
    variant: ControlVariant,
) -> Result<IdentityReport> {
    let prop = Propagator::new(system, grid)?;
    let mut forcing = Vec::with_capacity(grid.node_count());
    for node in grid.nodes() {
        let k = kappa_forcing(node.time);
        check_dim("kappa forcing", system.dim(), k.len())?;
        forcing.push(k);
    }
    let moment = moment_with(&prop, system.initial_state(), &forcing, h)?;
    let law = synthesize(system, gramians, alpha, &moment, variant)?;
    let controlled: Vec<DVector<f64>> = grid
        .nodes()
        .zip(&forcing)
        .map(|(n, k)| system.input_map() * law.continuous(n.time) + k)
        .collect();
    let out = prop.run(system.initial_state(), &controlled, standard_jumps(system, &law.v))?;
    let measured = out.trajectory.terminal() - h;
    let predicted = predicted_deviation(gramians, alpha, &moment)?;
    let model = system.semigroup();
    let residual = model.norm(&(&measured - &predicted));
    let pn = model.norm(&moment.p);
    Ok(IdentityReport {
        alpha,
        relative_residual: if pn > 0.0 { residual / pn } else { residual },
        residual,
        moment,
        measured,
        predicted,
        law,
        trajectory: out.trajectory,
    })
}

/// Settings for the semilinear outer loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterOptions {
    pub tol: f64,
    pub max_outer: usize,
    /// Relaxation weight in `[0.1, 1]`.
    pub damping: f64,
    pub picard: PicardOptions,
    pub variant: ControlVariant,
}

impl Default for OuterOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_outer: 100,
            damping: 1.0,
            picard: PicardOptions::default(),
            variant: ControlVariant::Adjoint,
        }
    }
}

impl OuterOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("outer tolerance must be positive, got {}", self.tol)));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidArgument("max_outer must be >= 1".into()));
        }
        if !(0.1..=1.0).contains(&self.damping) {
            return Err(Error::InvalidArgument(format!(
                "outer damping must lie in [0.1, 1], got {}",
                self.damping
            )));
        }
        self.picard.validate()
    }
}

/// Fixed point of the semilinear synthesis loop.
#[derive(Debug, Clone)]
pub struct SemilinearSynthesis {
    pub law: ControlLaw,
    pub trajectory: Trajectory,
    /// Moment vector evaluated along the returned trajectory.
    pub moment: MomentVector,
    pub outer_iterations: usize,
    pub gaps: Vec<f64>,
    /// `|xi(b) - h + alpha (alpha I + W)^{-1} p(xi)|`.
    pub terminal_residual: f64,
    /// `|alpha (alpha I + W)^{-1} p(xi)|`.
    pub predicted_error: f64,
}

pub fn semilinear_synthesize(
    system: &ImpulsiveSystem,
    gramians: &GramianSet,
    grid: &QuadratureGrid,
    h: &DVector<f64>,
    alpha: f64,
    opts: &OuterOptions,
) -> Result<SemilinearSynthesis> {
    opts.validate()?;
    let prop = Propagator::new(system, grid)?;
    let model = system.semigroup();
    let x0 = system.initial_state();

    if !system.nonlinearity().is_state_dependent() {
        let forcing = kappa_at_nodes(system, grid, &vec![DVector::zeros(system.dim()); grid.node_count()]);
        let moment = moment_with(&prop, x0, &forcing, h)?;
        let law = synthesize(system, gramians, alpha, &moment, opts.variant)?;
        let sol = semilinear_with(&prop, &law.as_fn(), &law.v, &opts.picard, None)?;
        return finish(gramians, h, alpha, moment, law, sol.trajectory, 1, vec![]);
    }

    let zeros = zero_impulse_controls(system);
    let zero_u = |_: f64| DVector::zeros(system.control_dim());
    let mut current = semilinear_with(&prop, &zero_u, &zeros, &opts.picard, None)?.node_states;
    let mut gaps = Vec::new();
    for iter in 1..=opts.max_outer {
        let forcing = kappa_at_nodes(system, grid, &current);
        let moment = moment_with(&prop, x0, &forcing, h)?;
        let law = synthesize(system, gramians, alpha, &moment, opts.variant)?;
        let sol = semilinear_with(&prop, &law.as_fn(), &law.v, &opts.picard, Some(&current))?;
        let mut gap: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (new, old) in sol.node_states.iter().zip(&current) {
            gap = gap.max(model.norm(&(new - old)));
            scale = scale.max(model.norm(new));
        }
        if !gap.is_finite() {
            return Err(Error::Diverged {
                what: "outer synthesis iteration",
                iteration: iter,
            });
        }
        gaps.push(gap);
        log::debug!("outer iteration {iter}: gap {gap:.3e}");
        if gap <= opts.tol * (1.0 + scale) {
            let forcing = kappa_at_nodes(system, grid, &sol.node_states);
            let moment = moment_with(&prop, x0, &forcing, h)?;
            return finish(gramians, h, alpha, moment, law, sol.trajectory, iter, gaps);
        }
        current = if opts.damping == 1.0 {
            sol.node_states
        } else {
            sol.node_states
                .iter()
                .zip(&current)
                .map(|(new, old)| old * (1.0 - opts.damping) + new * opts.damping)
                .collect()
        };
    }
    Err(Error::NotConverged {
        what: "outer synthesis iteration",
        iterations: opts.max_outer,
        last_gap: gaps.last().copied().unwrap_or(f64::NAN),
        history: gaps,
    })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    gramians: &GramianSet,
    h: &DVector<f64>,
    alpha: f64,
    moment: MomentVector,
    law: ControlLaw,
    trajectory: Trajectory,
    outer_iterations: usize,
    gaps: Vec<f64>,
) -> Result<SemilinearSynthesis> {
    let model = law.system().semigroup();
    let predicted = predicted_deviation(gramians, alpha, &moment)?;
    let terminal_residual = model.norm(&(trajectory.terminal() - h - &predicted));
    Ok(SemilinearSynthesis {
        predicted_error: model.norm(&predicted),
        law,
        trajectory,
        moment,
        outer_iterations,
        gaps,
        terminal_residual,
    })
}

/// How each sweep row simulates the closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// The nonlinearity enters only through its time-only part.
    #[default]
    Linear,
    Semilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// `p` has a component in `ker W`; the defect cannot fall below it.
    Plateau,
    NotConverged,
    Diverged,
    Failed,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Plateau => "plateau",
            RowStatus::NotConverged => "not-converged",
            RowStatus::Diverged => "diverged",
            RowStatus::Failed => "failed",
        }
    }

    fn of(err: &Error) -> Self {
        match err {
            Error::NotConverged { .. } => RowStatus::NotConverged,
            Error::Diverged { .. } => RowStatus::Diverged,
            _ => RowStatus::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub measured_error: f64,
    pub predicted_error: f64,
    pub outer_iters: usize,
    pub status: RowStatus,
    /// Norm of the kernel component of `p`, when nonzero.
    pub plateau: Option<f64>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub const HEADER: &'static str = "alpha,measured_error,predicted_error,outer_iters,status";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(r.alpha),
                fmt_f64(r.measured_error),
                fmt_f64(r.predicted_error),
                r.outer_iters,
                r.status.as_str()
            );
        }
        out
    }

    pub fn measured(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.measured_error).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub mode: SweepMode,
    pub outer: OuterOptions,
    /// Worker threads; rows are independent.
    pub jobs: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            mode: SweepMode::Linear,
            outer: OuterOptions::default(),
            jobs: 1,
        }
    }
}

fn plateau_of(gramians: &GramianSet, p: &DVector<f64>, pnorm: f64) -> Option<f64> {
    let k = gramians.kernel_component_norm(p, KERNEL_RTOL);
    (k > 1e-8 * pnorm.max(f64::MIN_POSITIVE)).then_some(k)
}

fn sweep_row(
    system: &ImpulsiveSystem,
    gramians: &GramianSet,
    grid: &QuadratureGrid,
    h: &DVector<f64>,
    alpha: f64,
    opts: &SweepOptions,
) -> Result<SweepRow> {
    let model = system.semigroup();
    let (measured, predicted, iters, p) = match opts.mode {
        SweepMode::Linear => {
            let linear = system.with_nonlinearity(match system.nonlinearity() {
                k if k.is_state_dependent() => Default::default(),
                k => k.clone(),
            })?;
            let kappa = |t: f64| linear.nonlinearity().known_forcing(t, linear.dim());
            let rep = verify_lemma31(&linear, gramians, &kappa, h, alpha, grid, opts.outer.variant)?;
            (model.norm(&rep.measured), model.norm(&rep.predicted), 1, rep.moment.p)
        }
        SweepMode::Semilinear => {
            let out = semilinear_synthesize(system, gramians, grid, h, alpha, &opts.outer)?;
            return Ok(row_from(gramians, |x| model.norm(x), h, alpha, &out));
        }
    };
    let plateau = plateau_of(gramians, &p, model.norm(&p));
    Ok(SweepRow {
        alpha,
        measured_error: measured,
        predicted_error: predicted,
        outer_iters: iters,
        status: if plateau.is_some() { RowStatus::Plateau } else { RowStatus::Ok },
        plateau,
        message: None,
    })
}

/// Closed-loop terminal errors along a decreasing α schedule. Per-row
/// failures are recorded in the row and the sweep continues.
pub fn alpha_sweep(
    system: &ImpulsiveSystem,
    gramians: &GramianSet,
    grid: &QuadratureGrid,
    h: &DVector<f64>,
    alphas: &[f64],
    opts: &SweepOptions,
) -> Result<SweepTable> {
    validate_schedule(alphas)?;
    check_dim("target", system.dim(), h.len())?;
    opts.outer.validate()?;

    Ok(run_rows(alphas, opts.jobs, |alpha| {
        sweep_row(system, gramians, grid, h, alpha, opts)
    }))
}

pub(crate) fn validate_schedule(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidArgument("alpha schedule must be non-empty and positive".into()));
    }
    if alphas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("alpha schedule must be strictly decreasing".into()));
    }
    Ok(())
}

pub(crate) fn row_from(
    gramians: &GramianSet,
    model_norm: impl Fn(&DVector<f64>) -> f64,
    h: &DVector<f64>,
    alpha: f64,
    out: &SemilinearSynthesis,
) -> SweepRow {
    let plateau = plateau_of(gramians, &out.moment.p, model_norm(&out.moment.p));
    SweepRow {
        alpha,
        measured_error: model_norm(&(out.trajectory.terminal() - h)),
        predicted_error: out.predicted_error,
        outer_iters: out.outer_iterations,
        status: if plateau.is_some() { RowStatus::Plateau } else { RowStatus::Ok },
        plateau,
        message: None,
    }
}

/// Evaluates `row` for every α, on up to `jobs` threads, keeping order.
pub(crate) fn run_rows(
    alphas: &[f64],
    jobs: usize,
    row: impl Fn(f64) -> Result<SweepRow> + Sync,
) -> SweepTable {
    let row = |alpha: f64| -> SweepRow {
        row(alpha).unwrap_or_else(|e| {
            log::warn!("sweep row alpha={alpha:e} failed: {e}");
            SweepRow {
                alpha,
                measured_error: f64::NAN,
                predicted_error: f64::NAN,
                outer_iters: match &e {
                    Error::NotConverged { iterations, .. } => *iterations,
                    Error::Diverged { iteration, .. } => *iteration,
                    _ => 0,
                },
                status: RowStatus::of(&e),
                plateau: None,
                message: Some(e.to_string()),
            }
        })
    };

    let jobs = jobs.max(1).min(alphas.len());
    let rows = if jobs == 1 {
        alphas.iter().map(|&a| row(a)).collect()
    } else {
        let mut rows: Vec<Option<SweepRow>> = vec![None; alphas.len()];
        let chunk = alphas.len().div_ceil(jobs);
        std::thread::scope(|scope| {
            for (slots, alphas) in rows.chunks_mut(chunk).zip(alphas.chunks(chunk)) {
                let row = &row;
                scope.spawn(move || {
                    for (slot, &a) in slots.iter_mut().zip(alphas) {
                        *slot = Some(row(a));
                    }
                });
            }
        });
        rows.into_iter().map(|r| r.expect("every row filled")).collect()
    };
    SweepTable { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gramian::assemble;
    use crate::operator::{NonlinearityKind, SemigroupModel};

    fn scalar() -> ImpulsiveSystem {
        ImpulsiveSystem::new(
            SemigroupModel::dense(DMatrix::zeros(1, 1)).unwrap(),
            1.0,
            vec![],
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            NonlinearityKind::None,
        )
        .unwrap()
    }

    fn one(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn scalar_moment_and_control() {
        let sys = scalar();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let zero = |_: f64| one(0.0);
        let p = moment_vector(&sys, &grid, &zero, &one(1.0)).unwrap();
        assert_eq!(p.p[0], 1.0);
        let g = assemble(&sys, &grid).unwrap();
        let law = synthesize(&sys, &g, 0.01, &p, ControlVariant::Adjoint).unwrap();
        assert!((law.phi[0] - 1.0 / 1.01).abs() < 1e-14);
        assert!((law.continuous(0.3)[0] - 0.990099).abs() < 1e-6);
        let pred = predicted_deviation(&g, 0.01, &p).unwrap();
        assert!((pred[0] + 0.01 / 1.01).abs() < 1e-14);
        let rep = verify_lemma31(&sys, &g, &zero, &one(1.0), 0.01, &grid, ControlVariant::Adjoint).unwrap();
        assert!(rep.residual < 1e-12);
    }

    #[test]
    fn zero_moment_gives_zero_controls() {
        let sys = scalar().with_initial_state(one(0.7)).unwrap();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let zero = |_: f64| one(0.0);
        let p = moment_vector(&sys, &grid, &zero, &one(0.7)).unwrap();
        assert_eq!(p.p[0], 0.0);
        let g = assemble(&sys, &grid).unwrap();
        let law = synthesize(&sys, &g, 0.1, &p, ControlVariant::Adjoint).unwrap();
        assert_eq!(law.phi[0], 0.0);
        assert_eq!(law.continuous(0.5)[0], 0.0);
        assert!(synthesize(&sys, &g, 0.0, &p, ControlVariant::Adjoint).is_err());
    }

    #[test]
    fn scalar_sweep_matches_closed_form() {
        let sys = scalar();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let g = assemble(&sys, &grid).unwrap();
        let t = alpha_sweep(&sys, &g, &grid, &one(1.0), &DEFAULT_ALPHAS, &SweepOptions::default()).unwrap();
        for r in &t.rows {
            assert!((r.measured_error - r.alpha / (r.alpha + 1.0)).abs() < 1e-12);
            assert_eq!(r.status, RowStatus::Ok);
        }
        let par = alpha_sweep(
            &sys,
            &g,
            &grid,
            &one(1.0),
            &DEFAULT_ALPHAS,
            &SweepOptions { jobs: 4, ..Default::default() },
        )
        .unwrap();
        assert_eq!(par, t);
        assert!(t.to_csv().starts_with("alpha,measured_error,predicted_error,outer_iters,status\n"));
    }

    #[test]
    fn uncontrollable_sweep_plateaus() {
        let sys = ImpulsiveSystem::new(
            SemigroupModel::dense(DMatrix::zeros(1, 1)).unwrap(),
            1.0,
            vec![],
            DMatrix::zeros(1, 1),
            DVector::zeros(1),
            NonlinearityKind::None,
        )
        .unwrap();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let g = assemble(&sys, &grid).unwrap();
        let t = alpha_sweep(&sys, &g, &grid, &one(2.0), &[1.0, 1e-3], &SweepOptions::default()).unwrap();
        for r in &t.rows {
            assert_eq!(r.measured_error, 2.0);
            assert_eq!(r.status, RowStatus::Plateau);
            assert_eq!(r.plateau, Some(2.0));
        }
    }

    #[test]
    fn sweep_rejects_bad_schedule() {
        let sys = scalar();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let g = assemble(&sys, &grid).unwrap();
        let o = SweepOptions::default();
        assert!(alpha_sweep(&sys, &g, &grid, &one(1.0), &[], &o).is_err());
        assert!(alpha_sweep(&sys, &g, &grid, &one(1.0), &[1e-3, 1e-2], &o).is_err());
        assert!(alpha_sweep(&sys, &g, &grid, &one(1.0), &[1.0, -1.0], &o).is_err());
    }

    #[test]
    fn linear_semilinear_synthesis_is_single_pass() {
        let sys = scalar();
        let grid = QuadratureGrid::default_for(&sys).unwrap();
        let g = assemble(&sys, &grid).unwrap();
        let out = semilinear_synthesize(&sys, &g, &grid, &one(1.0), 0.01, &OuterOptions::default()).unwrap();
        assert_eq!(out.outer_iterations, 1);
        assert!(out.terminal_residual < 1e-12);
        assert!(((out.trajectory.terminal()[0] - 1.0) + 0.01 / 1.01).abs() < 1e-12);
    }
}
