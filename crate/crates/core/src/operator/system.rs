use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::semigroup::SemigroupModel;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::interp;

type ForcingFn = dyn Fn(f64) -> DVector<f64> + Send + Sync;

/// A forcing known as a function of time only.
#[derive(Clone)]
pub struct TabulatedForcing {
    dim: usize,
    f: Arc<ForcingFn>,
}

impl TabulatedForcing {
    pub fn from_fn(dim: usize, f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self { dim, f: Arc::new(f) }
    }

    /// Piecewise-cubic interpolant of sampled values; `times` strictly increasing.
    pub fn from_samples(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "tabulated forcing needs matching non-empty times/values ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "tabulated sample times must be strictly increasing".into(),
            ));
        }
        let dim = values[0].len();
        for v in &values {
            check_dim("tabulated sample", dim, v.len())?;
            check_finite("tabulated sample", v.iter())?;
        }
        check_finite("tabulated sample time", times.iter())?;
        Ok(Self {
            dim,
            f: Arc::new(move |t| interp::cubic(&times, &values, t)),
        })
    }

    pub fn constant(value: DVector<f64>) -> Self {
        Self::from_fn(value.len(), move |_| value.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        (self.f)(t)
    }
}

impl fmt::Debug for TabulatedForcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabulatedForcing").field("dim", &self.dim).finish_non_exhaustive()
    }
}

/// The nonlinear term `kappa(t, x)`.
#[derive(Debug, Clone, Default)]
pub enum NonlinearityKind {
    #[default]
    None,
    /// `kappa(t, x) = c * x_0^2 * e_1`.
    Example53Quadratic { coefficient: f64 },
    /// `kappa(t, x) = c * sin(x)` componentwise.
    BoundedSin { coefficient: f64 },
    /// `kappa(t, x) = g(t)` for a known forcing `g`.
    Tabulated(TabulatedForcing),
}

impl NonlinearityKind {
    pub fn is_state_dependent(&self) -> bool {
        matches!(
            self,
            NonlinearityKind::Example53Quadratic { .. } | NonlinearityKind::BoundedSin { .. }
        )
    }

    pub fn eval(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        match self {
            NonlinearityKind::None => DVector::zeros(x.len()),
            NonlinearityKind::Example53Quadratic { coefficient } => {
                let mut out = DVector::zeros(x.len());
                out[1] = coefficient * x[0] * x[0];
                out
            }
            NonlinearityKind::BoundedSin { coefficient } => x.map(|v| coefficient * v.sin()),
            NonlinearityKind::Tabulated(g) => g.eval(t),
        }
    }

    /// Time-only part of the term, zero for state-dependent kinds.
    pub fn known_forcing(&self, t: f64, dim: usize) -> DVector<f64> {
        match self {
            NonlinearityKind::Tabulated(g) => g.eval(t),
            _ => DVector::zeros(dim),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            NonlinearityKind::None => Ok(()),
            NonlinearityKind::Example53Quadratic { coefficient } => {
                check_finite("nonlinearity coefficient", [coefficient])?;
                if dim < 2 {
                    return Err(Error::InvalidArgument(
                        "quadratic nonlinearity needs state dimension >= 2".into(),
                    ));
                }
                Ok(())
            }
            NonlinearityKind::BoundedSin { coefficient } => {
                check_finite("nonlinearity coefficient", [coefficient])
            }
            NonlinearityKind::Tabulated(g) => check_dim("tabulated nonlinearity", dim, g.dim()),
        }
    }
}

/// One impulse instant with jump `x+ = (I + jump) x + input v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Impulse {
    pub time: f64,
    pub jump: DMatrix<f64>,
    pub input: DMatrix<f64>,
}

/// Linear or semilinear evolution equation with impulses on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct ImpulsiveSystem {
    semigroup: SemigroupModel,
    horizon: f64,
    impulses: Vec<Impulse>,
    input_map: DMatrix<f64>,
    initial_state: DVector<f64>,
    nonlinearity: NonlinearityKind,
}

impl ImpulsiveSystem {
    pub fn new(
        semigroup: SemigroupModel,
        horizon: f64,
        impulses: Vec<Impulse>,
        input_map: DMatrix<f64>,
        initial_state: DVector<f64>,
        nonlinearity: NonlinearityKind,
    ) -> Result<Self> {
        let sys = Self {
            semigroup,
            horizon,
            impulses,
            input_map,
            initial_state,
            nonlinearity,
        };
        sys.validate()?;
        Ok(sys)
    }

    fn validate(&self) -> Result<()> {
        let d = self.semigroup.dim();
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let mut prev = 0.0;
        for imp in &self.impulses {
            if !(imp.time > prev) || !(imp.time < self.horizon) {
                return Err(Error::InvalidArgument(format!(
                    "impulse times must be strictly increasing inside (0, {}), got {}",
                    self.horizon, imp.time
                )));
            }
            prev = imp.time;
            check_dim("jump matrix rows", d, imp.jump.nrows())?;
            check_dim("jump matrix columns", d, imp.jump.ncols())?;
            check_dim("impulse input rows", d, imp.input.nrows())?;
            check_finite("jump matrix", imp.jump.iter())?;
            check_finite("impulse input matrix", imp.input.iter())?;
        }
        check_dim("input map rows", d, self.input_map.nrows())?;
        check_finite("input map", self.input_map.iter())?;
        check_dim("initial state", d, self.initial_state.len())?;
        check_finite("initial state", self.initial_state.iter())?;
        self.nonlinearity.validate(d)
    }

    pub fn semigroup(&self) -> &SemigroupModel {
        &self.semigroup
    }
    pub fn dim(&self) -> usize {
        self.semigroup.dim()
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn impulses(&self) -> &[Impulse] {
        &self.impulses
    }
    pub fn impulse_count(&self) -> usize {
        self.impulses.len()
    }
    pub fn input_map(&self) -> &DMatrix<f64> {
        &self.input_map
    }
    pub fn control_dim(&self) -> usize {
        self.input_map.ncols()
    }
    pub fn initial_state(&self) -> &DVector<f64> {
        &self.initial_state
    }
    pub fn nonlinearity(&self) -> &NonlinearityKind {
        &self.nonlinearity
    }

    /// `0 = t_0 < t_1 < ... < t_p < t_{p+1} = b`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.impulses.len() + 2);
        out.push(0.0);
        out.extend(self.impulses.iter().map(|i| i.time));
        out.push(self.horizon);
        out
    }

    pub fn with_nonlinearity(&self, nonlinearity: NonlinearityKind) -> Result<Self> {
        let mut s = self.clone();
        s.nonlinearity = nonlinearity;
        s.validate()?;
        Ok(s)
    }

    pub fn with_initial_state(&self, x0: DVector<f64>) -> Result<Self> {
        let mut s = self.clone();
        s.initial_state = x0;
        s.validate()?;
        Ok(s)
    }

    pub fn with_impulses(&self, impulses: Vec<Impulse>) -> Result<Self> {
        let mut s = self.clone();
        s.impulses = impulses;
        s.validate()?;
        Ok(s)
    }

    pub fn without_impulses(&self) -> Self {
        let mut s = self.clone();
        s.impulses.clear();
        s
    }

    /// Index `i` of the subinterval `[t_i, t_{i+1}]` that owns time `t`;
    /// impulse instants belong to the interval they close.
    pub fn interval_of(&self, t: f64) -> usize {
        self.impulses.iter().take_while(|imp| imp.time < t).count()
    }
}

/// `(I + jump) x + input v`.
pub fn jump_apply(
    jump: &DMatrix<f64>,
    input: &DMatrix<f64>,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("jump matrix rows", x.len(), jump.nrows())?;
    check_dim("jump matrix columns", x.len(), jump.ncols())?;
    check_dim("impulse input rows", x.len(), input.nrows())?;
    check_dim("impulse control", input.ncols(), v.len())?;
    Ok(x + jump * x + input * v)
}

/// All downstream maps `E_0, ..., E_p`, where `E_i` carries the state at
/// `t_i+` (with `t_0 = 0`) to the horizon along the input-free flow.
pub fn downstream_maps(system: &ImpulsiveSystem) -> Result<Vec<DMatrix<f64>>> {
    let t = system.breakpoints();
    let p = system.impulse_count();
    let d = system.dim();
    let mut maps = vec![DMatrix::zeros(d, d); p + 1];
    maps[p] = system.semigroup().transfer(t[p + 1] - t[p])?;
    for i in (0..p).rev() {
        let imp = &system.impulses()[i];
        let step = system.semigroup().transfer(t[i + 1] - t[i])?;
        let jump = DMatrix::identity(d, d) + &imp.jump;
        maps[i] = &maps[i + 1] * jump * step;
    }
    Ok(maps)
}

/// The single map `E_i`.
pub fn downstream_map(system: &ImpulsiveSystem, i: usize) -> Result<DMatrix<f64>> {
    let p = system.impulse_count();
    if i > p {
        return Err(Error::IndexOutOfRange { index: i, max: p });
    }
    Ok(downstream_maps(system)?.swap_remove(i))
}
