//! Bundled example systems: truncated heat equations, a truncated wave
//! equation and a two-dimensional rotation with one impulse.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::neutral::{HistorySegment, NeutralConvention, NeutralSystem, NeutralTerm, DEFAULT_HISTORY_SAMPLES};
use crate::operator::{Impulse, ImpulsiveSystem, NonlinearityKind, SemigroupModel};

pub const DEFAULT_HEAT_MODES: usize = 8;
pub const DEFAULT_WAVE_MODES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatBoundary {
    /// Sine basis on `(0, pi)`, eigenvalues `-n^2`, `n >= 1`.
    Dirichlet,
    /// Cosine basis on `(0, 1)`, eigenvalues `-n^2 pi^2`, `n >= 0`.
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelPreset {
    HeatDirichlet,
    HeatNeumann,
    Wave,
    Rotation,
}

impl ModelPreset {
    pub const ALL: [ModelPreset; 4] = [
        ModelPreset::HeatDirichlet,
        ModelPreset::HeatNeumann,
        ModelPreset::Wave,
        ModelPreset::Rotation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelPreset::HeatDirichlet => "heat-dirichlet",
            ModelPreset::HeatNeumann => "heat-neumann",
            ModelPreset::Wave => "wave",
            ModelPreset::Rotation => "rotation-example",
        }
    }

    /// The preset with its default constants.
    pub fn build(self) -> Result<ImpulsiveSystem> {
        match self {
            ModelPreset::HeatDirichlet => make_heat(
                DEFAULT_HEAT_MODES,
                1.0,
                HeatBoundary::Dirichlet,
                reset_impulses(&[0.5], DEFAULT_HEAT_MODES),
            ),
            ModelPreset::HeatNeumann => make_heat(4, 1.0, HeatBoundary::Neumann, reset_impulses(&[0.5], 4))?
                .with_nonlinearity(NonlinearityKind::BoundedSin { coefficient: 0.05 }),
            ModelPreset::Wave => {
                let n = DEFAULT_WAVE_MODES;
                let gammas = vec![1.0; n];
                make_wave(n, 2.0 * PI + 1.0, &gammas, additive_impulses(&[1.0], 2 * n))
            }
            ModelPreset::Rotation => make_rotation_example(),
        }
    }

    /// Target state used by the bundled studies.
    pub fn default_target(self, dim: usize) -> DVector<f64> {
        match self {
            ModelPreset::HeatDirichlet | ModelPreset::HeatNeumann => {
                let mut h = DVector::zeros(dim);
                h[0] = 1.0;
                h
            }
            ModelPreset::Wave | ModelPreset::Rotation => DVector::zeros(dim),
        }
    }
}

impl fmt::Display for ModelPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown model '{s}', expected one of heat-dirichlet, heat-neumann, wave, rotation-example"
                ))
            })
    }
}

/// Impulses `x+ = x - x - v = -v`, i.e. `B_k = D_k = -I`.
pub fn reset_impulses(times: &[f64], dim: usize) -> Vec<Impulse> {
    times
        .iter()
        .map(|&time| Impulse {
            time,
            jump: -DMatrix::identity(dim, dim),
            input: -DMatrix::identity(dim, dim),
        })
        .collect()
}

/// Impulses `x+ = x + v`.
pub fn additive_impulses(times: &[f64], dim: usize) -> Vec<Impulse> {
    times
        .iter()
        .map(|&time| Impulse {
            time,
            jump: DMatrix::zeros(dim, dim),
            input: DMatrix::identity(dim, dim),
        })
        .collect()
}

pub fn heat_eigenvalues(modes: usize, boundary: HeatBoundary) -> DVector<f64> {
    DVector::from_fn(modes, |i, _| match boundary {
        HeatBoundary::Dirichlet => -(((i + 1) * (i + 1)) as f64),
        HeatBoundary::Neumann => -((i * i) as f64) * PI * PI,
    })
}

/// Dirichlet input map `u -> 2 u_2 e_1 + sum_{n>=2} u_n e_n`, truncated to
/// `modes` rows and `modes - 1` control components `u_2, ..., u_modes`.
pub fn heat_input_map(modes: usize) -> Result<DMatrix<f64>> {
    if modes < 2 {
        return Err(Error::InvalidArgument(format!(
            "the heat input map needs at least 2 modes, got {modes}"
        )));
    }
    let mut omega = DMatrix::zeros(modes, modes - 1);
    omega[(0, 0)] = 2.0;
    for n in 2..=modes {
        omega[(n - 1, n - 2)] = 1.0;
    }
    Ok(omega)
}

/// Spectral Galerkin truncation of the heat equation with zero initial
/// coefficients. Neumann models are driven on every mode.
pub fn make_heat(
    modes: usize,
    horizon: f64,
    boundary: HeatBoundary,
    impulses: Vec<Impulse>,
) -> Result<ImpulsiveSystem> {
    if modes == 0 {
        return Err(Error::InvalidArgument("heat model needs at least one mode".into()));
    }
    let omega = match boundary {
        HeatBoundary::Dirichlet => heat_input_map(modes)?,
        HeatBoundary::Neumann => DMatrix::identity(modes, modes),
    };
    ImpulsiveSystem::new(
        SemigroupModel::spectral(heat_eigenvalues(modes, boundary))?,
        horizon,
        impulses,
        omega,
        DVector::zeros(modes),
        NonlinearityKind::None,
    )
}

/// Warning text when the final control window is shorter than one period.
pub fn wave_window_warning(system: &ImpulsiveSystem) -> Option<String> {
    let t = system.breakpoints();
    let window = system.horizon() - t[t.len() - 2];
    (window < 2.0 * PI - 1e-9).then(|| {
        format!("final control window b - t_p = {window:.6} is shorter than 2*pi; approximate controllability is not guaranteed")
    })
}

/// Truncated wave equation with `modes` modes and a scalar control entering
/// mode `m`'s velocity with weight `gammas[m-1]`. Initial displacement
/// coefficients are `1/m^2`, velocities zero.
pub fn make_wave(
    modes: usize,
    horizon: f64,
    gammas: &[f64],
    impulses: Vec<Impulse>,
) -> Result<ImpulsiveSystem> {
    if gammas.len() != modes {
        return Err(Error::DimensionMismatch {
            context: "wave input coefficients",
            expected: modes,
            found: gammas.len(),
        });
    }
    if let Some(m) = gammas.iter().position(|g| *g == 0.0 || !g.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "wave input coefficient for mode {} must be finite and nonzero",
            m + 1
        )));
    }
    let mut omega = DMatrix::zeros(2 * modes, 1);
    let mut x0 = DVector::zeros(2 * modes);
    for (m, g) in gammas.iter().enumerate() {
        omega[(2 * m + 1, 0)] = *g;
        x0[2 * m] = 1.0 / ((m + 1) * (m + 1)) as f64;
    }
    let sys = ImpulsiveSystem::new(
        SemigroupModel::wave(modes)?,
        horizon,
        impulses,
        omega,
        x0,
        NonlinearityKind::None,
    )?;
    if let Some(w) = wave_window_warning(&sys) {
        log::warn!("{w}");
    }
    Ok(sys)
}

pub const NEUTRAL_DELAY: f64 = 0.25;
pub const NEUTRAL_COEFFICIENT: f64 = 0.05;

/// The Neumann heat preset as a neutral system: delay 0.25, bounded neutral
/// term with coefficient 0.05 and constant history `phi_n = 1/(n+1)`.
pub fn make_neutral_heat(convention: NeutralConvention) -> Result<NeutralSystem> {
    let base = ModelPreset::HeatNeumann.build()?;
    let x0 = DVector::from_fn(base.dim(), |i, _| 1.0 / (i + 1) as f64);
    let base = base.with_initial_state(x0.clone())?;
    let history = HistorySegment::from_fn(NEUTRAL_DELAY, DEFAULT_HISTORY_SAMPLES, |_| x0.clone())?;
    NeutralSystem::new(
        base,
        NeutralTerm::BoundedDemo {
            coefficient: NEUTRAL_COEFFICIENT,
        },
        history,
        convention,
    )
}

pub const ROTATION_KAPPA: f64 = 0.1;

/// Two-dimensional rotation with one impulse at `t = 1` on `[0, 2]`.
pub fn make_rotation_example() -> Result<ImpulsiveSystem> {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let impulse = Impulse {
        time: 1.0,
        jump: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -0.5]),
        input: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
    };
    ImpulsiveSystem::new(
        SemigroupModel::dense(a)?,
        2.0,
        vec![impulse],
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        DVector::from_vec(vec![1.0, 0.0]),
        NonlinearityKind::Example53Quadratic {
            coefficient: ROTATION_KAPPA,
        },
    )
}

/// The fixed open-loop controls of the rotation example.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationControls {
    pub u: DVector<f64>,
    pub v: Vec<DVector<f64>>,
}

/// `u = (1, 0)` when `with_u`, otherwise `u = 0`; always `v_1 = 1`.
pub fn rotation_controls(with_u: bool) -> RotationControls {
    RotationControls {
        u: if with_u {
            DVector::from_vec(vec![1.0, 0.0])
        } else {
            DVector::zeros(2)
        },
        v: vec![DVector::from_element(1, 1.0)],
    }
}
