//! Neutral impulsive systems `d/dt [x + sigma(t, x_t)] = A [x + sigma] + Omega u + kappa`
//! with a constant delay and a sampled history segment.
//!
//! Two conventions are provided for where the neutral correction enters the
//! mild form:
//!
//! - [`NeutralConvention::Paper`]: `x(t) = z(t) - sigma(b, x_b)` on every
//!   subinterval, where `z` is the impulsive mild solution started from
//!   `phi(0) + sigma(0, phi)`. The jump relation holds for `z`, not for `x`.
//! - [`NeutralConvention::Standard`]: `x(t) = y(t) - sigma(t, x_t)` with
//!   `y` the mild solution of the differentiated quantity and jumps
//!   `y+ = y + B (y - sigma) + D v`, so that `x` itself jumps as
//!   `x+ = (I + B) x + D v`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::gramian::GramianSet;
use crate::interp;
use crate::operator::{jump_apply, ImpulsiveSystem, TabulatedForcing};
use crate::propagator::{
    check_impulse_controls, mild_solve_semilinear, rk4_step, step_count, ControlFn,
    PicardOptions, Propagator, QuadratureGrid, Segment, SemilinearSolution, Trajectory,
};
use crate::synthesis::{
    alpha_sweep, finish, row_from, run_rows, semilinear_synthesize, synthesize, validate_schedule,
    zero_impulse_controls, MomentVector, OuterOptions, SemilinearSynthesis, SweepMode, SweepOptions,
    SweepTable,
};

pub const DEFAULT_HISTORY_SAMPLES: usize = 64;

/// Initial history `phi` on `[-delay, 0]`, stored on a uniform grid and
/// interpolated with local cubics.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    delay: f64,
    times: Vec<f64>,
    samples: Vec<DVector<f64>>,
}

impl HistorySegment {
    /// `samples` are uniform on `[-delay, 0]`, endpoints included.
    pub fn from_samples(delay: f64, samples: Vec<DVector<f64>>) -> Result<Self> {
        if !(delay > 0.0) || !delay.is_finite() {
            return Err(Error::InvalidArgument(format!("delay must be positive, got {delay}")));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidArgument(
                "history needs at least two samples covering [-delay, 0]".into(),
            ));
        }
        let dim = samples[0].len();
        for s in &samples {
            check_dim("history sample", dim, s.len())?;
            check_finite("history sample", s.iter())?;
        }
        let n = samples.len() - 1;
        let times = (0..=n).map(|i| -delay + delay * i as f64 / n as f64).collect();
        Ok(Self { delay, times, samples })
    }

    /// Samples `f` at `intervals + 1` uniform points.
    pub fn from_fn(delay: f64, intervals: usize, f: impl Fn(f64) -> DVector<f64>) -> Result<Self> {
        let n = intervals.max(1);
        let samples = (0..=n).map(|i| f(-delay + delay * i as f64 / n as f64)).collect();
        Self::from_samples(delay, samples)
    }

    pub fn constant(delay: f64, value: DVector<f64>) -> Result<Self> {
        Self::from_fn(delay, DEFAULT_HISTORY_SAMPLES, |_| value.clone())
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    /// `phi(0)`.
    pub fn present(&self) -> &DVector<f64> {
        self.samples.last().unwrap()
    }

    /// `phi(theta)` for `theta` in `[-delay, 0]`; clamped outside.
    pub fn eval(&self, theta: f64) -> DVector<f64> {
        interp::cubic(&self.times, &self.samples, theta.clamp(-self.delay, 0.0))
    }
}

/// The neutral term, evaluated on the delayed state `x(t - delay)`.
#[derive(Debug, Clone, Default)]
pub enum NeutralTerm {
    #[default]
    Zero,
    /// `c * tanh(x(t - delay))` componentwise.
    BoundedDemo { coefficient: f64 },
    /// A known function of time.
    Tabulated(TabulatedForcing),
}

impl NeutralTerm {
    pub fn is_zero(&self) -> bool {
        matches!(self, NeutralTerm::Zero)
    }

    pub fn eval(&self, t: f64, delayed: &DVector<f64>) -> DVector<f64> {
        match self {
            NeutralTerm::Zero => DVector::zeros(delayed.len()),
            NeutralTerm::BoundedDemo { coefficient } => delayed.map(|x| coefficient * x.tanh()),
            NeutralTerm::Tabulated(g) => g.eval(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeutralConvention {
    #[default]
    Paper,
    Standard,
}

impl NeutralConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            NeutralConvention::Paper => "paper",
            NeutralConvention::Standard => "standard",
        }
    }
}

impl fmt::Display for NeutralConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NeutralConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(NeutralConvention::Paper),
            "standard" => Ok(NeutralConvention::Standard),
            _ => Err(Error::InvalidArgument(format!(
                "unknown neutral convention '{s}', expected paper or standard"
            ))),
        }
    }
}

/// An impulsive system with a neutral term and a history segment. The
/// system's initial state must equal `phi(0)`.
#[derive(Debug, Clone)]
pub struct NeutralSystem {
    base: ImpulsiveSystem,
    sigma: NeutralTerm,
    history: HistorySegment,
    convention: NeutralConvention,
}

impl NeutralSystem {
    pub fn new(
        base: ImpulsiveSystem,
        sigma: NeutralTerm,
        history: HistorySegment,
        convention: NeutralConvention,
    ) -> Result<Self> {
        check_dim("history", base.dim(), history.dim())?;
        let gap = (history.present() - base.initial_state()).amax();
        if gap > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "history endpoint differs from the initial state by {gap:.3e}"
            )));
        }
        match &sigma {
            NeutralTerm::Zero => {}
            NeutralTerm::BoundedDemo { coefficient } => check_finite("neutral coefficient", [coefficient])?,
            NeutralTerm::Tabulated(g) => check_dim("tabulated neutral term", base.dim(), g.dim())?,
        }
        Ok(Self {
            base,
            sigma,
            history,
            convention,
        })
    }

    pub fn base(&self) -> &ImpulsiveSystem {
        &self.base
    }

    pub fn sigma(&self) -> &NeutralTerm {
        &self.sigma
    }

    pub fn history(&self) -> &HistorySegment {
        &self.history
    }

    pub fn delay(&self) -> f64 {
        self.history.delay()
    }

    pub fn convention(&self) -> NeutralConvention {
        self.convention
    }

    pub fn with_convention(&self, convention: NeutralConvention) -> Self {
        Self {
            convention,
            ..self.clone()
        }
    }

    /// `phi(0) + sigma(0, phi)`.
    pub fn start_value(&self) -> DVector<f64> {
        self.history.present() + self.sigma.eval(0.0, &self.history.eval(-self.delay()))
    }

    /// `sigma(t, x_t)` with `x` on `(0, b]` read from `traj`.
    fn sigma_along(&self, traj: &Trajectory, t: f64) -> DVector<f64> {
        let s = t - self.delay();
        let delayed = if s <= 0.0 { self.history.eval(s) } else { traj.state_at(s) };
        self.sigma.eval(t, &delayed)
    }

    /// `x(s)`, reconstructed from the continuous quantity `y` when the
    /// iterate carries it, since `x` itself jumps wherever `s - delay` hits
    /// an earlier discontinuity.
    fn delayed_state(&self, it: &Iterate, s: f64) -> DVector<f64> {
        if s <= 0.0 {
            return self.history.eval(s);
        }
        match &it.raw {
            Some(y) => y.state_at(s) - self.sigma.eval(s, &self.delayed_state(it, s - self.delay())),
            None => it.trajectory.state_at(s),
        }
    }

    fn sigma_at(&self, it: &Iterate, t: f64) -> DVector<f64> {
        self.sigma.eval(t, &self.delayed_state(it, t - self.delay()))
    }
}

/// Trajectory together with its quadrature-node states and, in the
/// standard convention, the propagated quantity `y = x + sigma`.
#[derive(Debug, Clone)]
struct Iterate {
    trajectory: Trajectory,
    node_states: Vec<DVector<f64>>,
    raw: Option<Trajectory>,
}

/// Neutral data frozen from a previous iterate.
struct Frozen {
    sigma_b: DVector<f64>,
    /// `sigma(t_k, x_{t_k})` per impulse, standard convention only.
    sigma_k: Vec<DVector<f64>>,
}

fn freeze(nsys: &NeutralSystem, prev: &Iterate) -> Frozen {
    let b = nsys.base.horizon();
    Frozen {
        sigma_b: nsys.sigma_at(prev, b),
        sigma_k: match nsys.convention {
            NeutralConvention::Paper => vec![],
            NeutralConvention::Standard => nsys
                .base
                .impulses()
                .iter()
                .map(|imp| nsys.sigma_at(prev, imp.time))
                .collect(),
        },
    }
}

/// Jump map for the propagated quantity (`z` or `y`).
fn neutral_jump<'a>(
    nsys: &'a NeutralSystem,
    frozen: &'a Frozen,
    v: &'a [DVector<f64>],
) -> impl FnMut(usize, &DVector<f64>) -> Result<DVector<f64>> + 'a {
    move |k, x| {
        let imp = &nsys.base.impulses()[k];
        let mut y = jump_apply(&imp.jump, &imp.input, x, &v[k])?;
        if nsys.convention == NeutralConvention::Standard {
            y -= &imp.jump * &frozen.sigma_k[k];
        }
        Ok(y)
    }
}

fn sweep(
    prop: &Propagator<'_>,
    nsys: &NeutralSystem,
    u: ControlFn<'_>,
    v: &[DVector<f64>],
    prev: &Iterate,
) -> Result<Iterate> {
    let sys = &nsys.base;
    let frozen = freeze(nsys, prev);
    let mut forcing = Vec::with_capacity(prop.grid().node_count());
    for (node, x) in prop.grid().nodes().zip(&prev.node_states) {
        let uj = u(node.time);
        check_dim("control value", sys.control_dim(), uj.len())?;
        forcing.push(sys.input_map() * uj + sys.nonlinearity().eval(node.time, x));
    }
    let out = prop.run(&nsys.start_value(), &forcing, neutral_jump(nsys, &frozen, v))?;
    Ok(match nsys.convention {
        NeutralConvention::Paper => Iterate {
            trajectory: out.trajectory.map_states(|_, x| x - &frozen.sigma_b)?,
            node_states: out.node_states.iter().map(|x| x - &frozen.sigma_b).collect(),
            raw: None,
        },
        NeutralConvention::Standard => Iterate {
            trajectory: out.trajectory.map_states(|t, x| x - nsys.sigma_at(prev, t))?,
            node_states: prop
                .grid()
                .nodes()
                .zip(&out.node_states)
                .map(|(n, x)| x - nsys.sigma_at(prev, n.time))
                .collect(),
            raw: Some(out.trajectory),
        },
    })
}

fn sample_gap(nsys: &NeutralSystem, a: &Trajectory, b: &Trajectory) -> (f64, f64) {
    let model = nsys.base.semigroup();
    let mut gap: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for ((_, _, x), (_, _, y)) in a.samples().zip(b.samples()) {
        gap = gap.max(model.norm(&(x - y)));
        scale = scale.max(model.norm(x));
    }
    (gap, scale)
}

fn blend(old: &Iterate, new: Iterate, theta: f64) -> Result<Iterate> {
    if theta == 1.0 {
        return Ok(new);
    }
    let mix = |o: &DVector<f64>, n: &DVector<f64>| o * (1.0 - theta) + n * theta;
    let mix_traj = |o: &Trajectory, n: &Trajectory| {
        let segments = o
            .segments()
            .iter()
            .zip(n.segments())
            .map(|(os, ns)| Segment {
                times: ns.times.clone(),
                states: os.states.iter().zip(&ns.states).map(|(a, b)| mix(a, b)).collect(),
            })
            .collect();
        Trajectory::new(segments)
    };
    Ok(Iterate {
        trajectory: mix_traj(&old.trajectory, &new.trajectory)?,
        raw: match (&old.raw, new.raw) {
            (Some(o), Some(n)) => Some(mix_traj(o, &n)?),
            (_, n) => n,
        },
        node_states: old
            .node_states
            .iter()
            .zip(&new.node_states)
            .map(|(a, b)| mix(a, b))
            .collect(),
    })
}

fn neutral_with(
    prop: &Propagator<'_>,
    nsys: &NeutralSystem,
    u: ControlFn<'_>,
    v: &[DVector<f64>],
    opts: &PicardOptions,
    warm: Option<Iterate>,
) -> Result<(Iterate, usize, Vec<f64>)> {
    check_impulse_controls(&nsys.base, v)?;
    let mut current = match warm {
        Some(w) => w,
        None => {
            // control-driven linear flow from phi(0) as the first guess
            let sys = &nsys.base;
            let mut forcing = Vec::with_capacity(prop.grid().node_count());
            for node in prop.grid().nodes() {
                forcing.push(sys.input_map() * u(node.time) + sys.nonlinearity().known_forcing(node.time, sys.dim()));
            }
            let out = prop.run(sys.initial_state(), &forcing, |k, x| {
                let imp = &sys.impulses()[k];
                jump_apply(&imp.jump, &imp.input, x, &v[k])
            })?;
            Iterate {
                trajectory: out.trajectory,
                node_states: out.node_states,
                raw: None,
            }
        }
    };
    let mut gaps = Vec::new();
    for iter in 1..=opts.max_iter {
        let next = match sweep(prop, nsys, u, v, &current) {
            Ok(n) => n,
            Err(Error::NonFinite(_)) => {
                return Err(Error::Diverged {
                    what: "neutral Picard iteration",
                    iteration: iter,
                })
            }
            Err(e) => return Err(e),
        };
        let (gap, scale) = sample_gap(nsys, &next.trajectory, &current.trajectory);
        if !gap.is_finite() {
            return Err(Error::Diverged {
                what: "neutral Picard iteration",
                iteration: iter,
            });
        }
        gaps.push(gap);
        if gap <= opts.tol * (1.0 + scale) {
            return Ok((next, iter, gaps));
        }
        current = blend(&current, next, opts.damping)?;
    }
    Err(Error::NotConverged {
        what: "neutral Picard iteration",
        iterations: opts.max_iter,
        last_gap: gaps.last().copied().unwrap_or(f64::NAN),
        history: gaps,
    })
}

/// Mild solution of the neutral system by Picard iteration. A zero neutral
/// term reduces to [`mild_solve_semilinear`].
pub fn neutral_mild_solve(
    nsys: &NeutralSystem,
    u: ControlFn<'_>,
    v: &[DVector<f64>],
    grid: &QuadratureGrid,
    opts: &PicardOptions,
) -> Result<SemilinearSolution> {
    if nsys.sigma.is_zero() {
        return mild_solve_semilinear(&nsys.base, u, v, grid, opts);
    }
    opts.validate()?;
    let prop = Propagator::new(&nsys.base, grid)?;
    let (it, iterations, gaps) = neutral_with(&prop, nsys, u, v, opts, None)?;
    Ok(SemilinearSolution {
        trajectory: it.trajectory,
        iterations,
        gaps,
        node_states: it.node_states,
    })
}

/// Moment vector `h + sigma(b, x_b) - (free terminal value)`, where the free
/// flow starts from `phi(0) + sigma(0, phi)` and carries the frozen `kappa`
/// and, in the standard convention, the `-B_k sigma_k` jump corrections.
fn neutral_moment(
    prop: &Propagator<'_>,
    nsys: &NeutralSystem,
    h: &DVector<f64>,
    at: &Iterate,
) -> Result<MomentVector> {
    let sys = &nsys.base;
    let frozen = freeze(nsys, at);
    let forcing: Vec<DVector<f64>> = prop
        .grid()
        .nodes()
        .zip(&at.node_states)
        .map(|(n, x)| sys.nonlinearity().eval(n.time, x))
        .collect();
    let zeros = zero_impulse_controls(sys);
    let terminal = prop.terminal(&nsys.start_value(), &forcing, neutral_jump(nsys, &frozen, &zeros))?;
    let p = h + &frozen.sigma_b - terminal;
    check_finite("neutral moment vector", p.iter())?;
    Ok(MomentVector { p })
}

/// Outer synthesis loop for the neutral system. A zero neutral term reduces
/// to [`semilinear_synthesize`].
pub fn neutral_synthesize(
    nsys: &NeutralSystem,
    gramians: &GramianSet,
    grid: &QuadratureGrid,
    h: &DVector<f64>,
    alpha: f64,
    opts: &OuterOptions,
) -> Result<SemilinearSynthesis> {
    if nsys.sigma.is_zero() {
        return semilinear_synthesize(&nsys.base, gramians, grid, h, alpha, opts);
    }
    opts.validate()?;
    check_dim("target", nsys.base.dim(), h.len())?;
    let sys = &nsys.base;
    let prop = Propagator::new(sys, grid)?;
    let zeros = zero_impulse_controls(sys);
    let zero_u = |_: f64| DVector::zeros(sys.control_dim());
    let (mut current, _, _) = neutral_with(&prop, nsys, &zero_u, &zeros, &opts.picard, None)?;
    let mut gaps = Vec::new();
    for iter in 1..=opts.max_outer {
        let moment = neutral_moment(&prop, nsys, h, &current)?;
        let law = synthesize(sys, gramians, alpha, &moment, opts.variant)?;
        let (next, _, _) =
            neutral_with(&prop, nsys, &law.as_fn(), &law.v, &opts.picard, Some(current.clone()))?;
        let (gap, scale) = sample_gap(nsys, &next.trajectory, &current.trajectory);
        if !gap.is_finite() {
            return Err(Error::Diverged {
                what: "neutral synthesis iteration",
                iteration: iter,
            });
        }
        gaps.push(gap);
        log::debug!("neutral outer iteration {iter}: gap {gap:.3e}");
        if gap <= opts.tol * (1.0 + scale) {
            let moment = neutral_moment(&prop, nsys, h, &next)?;
            return finish(gramians, h, alpha, moment, law, next.trajectory, iter, gaps);
        }
        current = blend(&current, next, opts.damping)?;
    }
    Err(Error::NotConverged {
        what: "neutral synthesis iteration",
        iterations: opts.max_outer,
        last_gap: gaps.last().copied().unwrap_or(f64::NAN),
        history: gaps,
    })
}

/// α sweep of [`neutral_synthesize`]. A zero neutral term reduces to the
/// semilinear sweep.
pub fn neutral_alpha_sweep(
    nsys: &NeutralSystem,
    gramians: &GramianSet,
    grid: &QuadratureGrid,
    h: &DVector<f64>,
    alphas: &[f64],
    opts: &SweepOptions,
) -> Result<SweepTable> {
    if nsys.sigma.is_zero() {
        let opts = SweepOptions {
            mode: SweepMode::Semilinear,
            ..*opts
        };
        return alpha_sweep(&nsys.base, gramians, grid, h, alphas, &opts);
    }
    validate_schedule(alphas)?;
    check_dim("target", nsys.base.dim(), h.len())?;
    opts.outer.validate()?;
    let model = nsys.base.semigroup();
    Ok(run_rows(alphas, opts.jobs, |alpha| {
        let out = neutral_synthesize(nsys, gramians, grid, h, alpha, &opts.outer)?;
        Ok(row_from(gramians, |x| model.norm(x), h, alpha, &out))
    }))
}

/// `x(t)` on `(0, b]` from segments built so far, left-continuous at
/// impulse instants.
fn lookup(segments: &[Segment], s: f64) -> DVector<f64> {
    let idx = segments
        .iter()
        .position(|seg| *seg.times.last().unwrap() >= s)
        .unwrap_or(segments.len() - 1);
    let seg = &segments[idx];
    interp::cubic(&seg.times, &seg.states, s)
}

/// Method-of-steps RK4 reference solution with fixed step `step`, which
/// must not exceed the delay.
pub fn neutral_dense_oracle(
    nsys: &NeutralSystem,
    u: ControlFn<'_>,
    v: &[DVector<f64>],
    step: f64,
) -> Result<Trajectory> {
    let sys = &nsys.base;
    check_impulse_controls(sys, v)?;
    if !(step > 0.0) || step > nsys.delay() {
        return Err(Error::InvalidArgument(format!(
            "oracle step must lie in (0, {}], got {step}",
            nsys.delay()
        )));
    }
    if nsys.sigma.is_zero() {
        return crate::propagator::dense_oracle(sys, u, v, step);
    }
    match nsys.convention {
        NeutralConvention::Paper => paper_oracle(nsys, u, v, step),
        NeutralConvention::Standard => standard_oracle(nsys, u, v, step),
    }
}

/// Runs RK4 on `z' = A z + Omega u + kappa(t, z - sigma_b)` with a fixed
/// `sigma_b`, then iterates `sigma_b = sigma(b, x_b)` to a fixed point.
fn paper_oracle(
    nsys: &NeutralSystem,
    u: ControlFn<'_>,
    v: &[DVector<f64>],
    step: f64,
) -> Result<Trajectory> {
    let sys = &nsys.base;
    let a = sys.semigroup().generator();
    let mut sigma_b = DVector::zeros(sys.dim());
    for _ in 0..200 {
        let rhs = |t: f64, z: &DVector<f64>| {
            &a * z + sys.input_map() * u(t) + sys.nonlinearity().eval(t, &(z - &sigma_b))
        };
        let z = crate::propagator::rk4_impulsive(sys, step, nsys.start_value(), rhs, |k, x| {
            let imp = &sys.impulses()[k];
            jump_apply(&imp.jump, &imp.input, x, &v[k])
        })?;
        let x = z.map_states(|_, z| z - &sigma_b)?;
        let next = nsys.sigma_along(&x, sys.horizon());
        let change = (&next - &sigma_b).amax();
        sigma_b = next;
        if change <= 1e-14 * (1.0 + sigma_b.amax()) {
            return z.map_states(|_, z| z - &sigma_b);
        }
    }
    Err(Error::NotConverged {
        what: "neutral oracle terminal fixed point",
        iterations: 200,
        last_gap: f64::NAN,
        history: vec![],
    })
}

/// `x(s)` from stored samples of `y = x + sigma`, recursing through the
/// delay so that no interpolation stencil straddles a derived jump of `x`.
fn oracle_state(
    nsys: &NeutralSystem,
    done: &[Segment],
    current: &Segment,
    s: f64,
) -> DVector<f64> {
    if s <= 0.0 {
        return nsys.history.eval(s);
    }
    let y = if !current.times.is_empty() && s >= current.times[0] {
        interp::cubic(&current.times, &current.states, s)
    } else {
        lookup(done, s)
    };
    y - nsys
        .sigma
        .eval(s, &oracle_state(nsys, done, current, s - nsys.delay()))
}

/// Direct method of steps for `y = x + sigma(t, x(t - delay))`.
fn standard_oracle(
    nsys: &NeutralSystem,
    u: ControlFn<'_>,
    v: &[DVector<f64>],
    step: f64,
) -> Result<Trajectory> {
    let sys = &nsys.base;
    let a = sys.semigroup().generator();
    let delay = nsys.delay();
    let breaks = sys.breakpoints();
    let mut done: Vec<Segment> = Vec::with_capacity(breaks.len() - 1);
    let mut y = nsys.start_value();

    for (k, w) in breaks.windows(2).enumerate() {
        let (t0, t1) = (w[0], w[1]);
        let n = step_count(t1 - t0, step)?;
        let h = (t1 - t0) / n as f64;
        let mut current = Segment {
            times: vec![t0],
            states: vec![y.clone()],
        };
        for i in 0..n {
            let t = t0 + h * i as f64;
            let mut rhs = |tt: f64, yy: &DVector<f64>| {
                let sig = nsys.sigma.eval(tt, &oracle_state(nsys, &done, &current, tt - delay));
                &a * yy + sys.input_map() * u(tt) + sys.nonlinearity().eval(tt, &(yy - sig))
            };
            y = rk4_step(&mut rhs, t, &y, h);
            if y.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("neutral oracle state"));
            }
            current.times.push(if i + 1 == n { t1 } else { t0 + h * (i + 1) as f64 });
            current.states.push(y.clone());
        }
        if k + 2 < breaks.len() {
            let imp = &sys.impulses()[k];
            let sig = nsys.sigma.eval(t1, &oracle_state(nsys, &done, &current, t1 - delay));
            y = jump_apply(&imp.jump, &imp.input, &y, &v[k])? - &imp.jump * sig;
        }
        done.push(current);
    }
    // x = y - sigma(t, x_t) at every stored sample
    let raw = Trajectory::new(done.clone())?;
    let empty = Segment {
        times: vec![],
        states: vec![],
    };
    raw.map_states(|t, yy| yy - nsys.sigma.eval(t, &oracle_state(nsys, &done, &empty, t - delay)))
}
