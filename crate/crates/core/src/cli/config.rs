//! The JSON run configuration and its translation into library objects.

use std::f64::consts::PI;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::models::{
    additive_impulses, make_heat, make_wave, reset_impulses, HeatBoundary, ModelPreset,
    DEFAULT_HEAT_MODES, DEFAULT_WAVE_MODES, NEUTRAL_COEFFICIENT, NEUTRAL_DELAY,
};
use crate::neutral::{
    HistorySegment, NeutralConvention, NeutralSystem, NeutralTerm, DEFAULT_HISTORY_SAMPLES,
};
use crate::operator::{Impulse, ImpulsiveSystem, NonlinearityKind, SemigroupModel, TabulatedForcing};
use crate::propagator::quadrature::{DEFAULT_ORDER, DEFAULT_PANELS};
use crate::propagator::{PicardOptions, QuadratureGrid};
use crate::synthesis::{ControlVariant, OuterOptions, SweepMode, DEFAULT_ALPHAS};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Replaces the preset's impulse schedule when present.
    pub impulses: Option<Vec<ImpulseConfig>>,
    /// Replaces the preset's nonlinearity when present.
    pub nonlinearity: Option<NonlinearityConfig>,
    pub neutral: Option<NeutralConfig>,
    pub synthesis: SynthesisConfig,
    pub quadrature: QuadratureConfig,
    pub controls: ControlsConfig,
    pub output: OutputConfig,
}

/// Either a named preset or a custom generator given as a dense matrix or
/// a list of eigenvalues.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub preset: Option<String>,
    pub generator: Option<Vec<Vec<f64>>>,
    pub eigenvalues: Option<Vec<f64>>,
    /// Mode count for the heat and wave presets.
    pub modes: Option<usize>,
    pub horizon: Option<f64>,
    /// Wave input weights, one per mode.
    pub gammas: Option<Vec<f64>>,
    pub input_map: Option<Vec<Vec<f64>>>,
    pub initial_state: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseConfig {
    pub time: f64,
    pub jump: Vec<Vec<f64>>,
    pub input: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    None,
    /// `c * x_0^2` in the second component.
    Quadratic { coefficient: f64 },
    BoundedSin { coefficient: f64 },
    /// Known forcing sampled at strictly increasing times.
    Tabulated { times: Vec<f64>, values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SigmaConfig {
    Zero,
    BoundedDemo { coefficient: f64 },
    Constant { value: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeutralConfig {
    pub sigma: SigmaConfig,
    pub delay: f64,
    pub history_samples: usize,
    /// Samples on `[-delay, 0]`; a single row is a constant history.
    /// Defaults to the constant initial state.
    pub history: Option<Vec<Vec<f64>>>,
    pub convention: NeutralConvention,
}

impl Default for NeutralConfig {
    fn default() -> Self {
        Self {
            sigma: SigmaConfig::BoundedDemo {
                coefficient: NEUTRAL_COEFFICIENT,
            },
            delay: NEUTRAL_DELAY,
            history_samples: DEFAULT_HISTORY_SAMPLES,
            history: None,
            convention: NeutralConvention::Paper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    pub target: Option<Vec<f64>>,
    pub alpha: f64,
    pub alphas: Option<Vec<f64>>,
    pub tol: f64,
    /// Picard sweeps per solve.
    pub max_iter: usize,
    pub max_outer: usize,
    pub damping: f64,
    pub paper_literal_control: bool,
    pub mode: SweepMode,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        let outer = OuterOptions::default();
        Self {
            target: None,
            alpha: 1e-2,
            alphas: None,
            tol: outer.tol,
            max_iter: outer.picard.max_iter,
            max_outer: outer.max_outer,
            damping: outer.damping,
            paper_literal_control: false,
            mode: SweepMode::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub order: usize,
    /// Panels per subinterval.
    pub panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            panels: DEFAULT_PANELS,
        }
    }
}

/// Open-loop controls for `simulate` and `figures`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlsConfig {
    /// Constant continuous control.
    pub u: Option<Vec<f64>>,
    pub v: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Uniform sample count for control CSVs.
    pub samples: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("output"),
            samples: 201,
        }
    }
}

/// The system, grid and settings a subcommand runs on.
#[derive(Debug, Clone)]
pub struct Setup {
    pub preset: Option<ModelPreset>,
    pub system: ImpulsiveSystem,
    pub neutral: Option<NeutralSystem>,
    pub grid: QuadratureGrid,
    pub target: DVector<f64>,
    pub alphas: Vec<f64>,
    pub alpha: f64,
    pub outer: OuterOptions,
    pub mode: SweepMode,
    pub u: Option<DVector<f64>>,
    pub v: Option<Vec<DVector<f64>>>,
    pub samples: usize,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

fn vector(v: &[f64], what: &str) -> Result<DVector<f64>, CliError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(schema(format!("{what} contains a non-finite value")));
    }
    Ok(DVector::from_column_slice(v))
}

/// Row-major nested arrays to a matrix.
pub fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(schema(format!("{what} must be a non-empty matrix")));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != ncols) {
        return Err(schema(format!(
            "{what} row {r} has {} entries, expected {ncols}",
            rows[r].len()
        )));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(schema(format!("{what} contains a non-finite value")));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied()))
}

fn preset_system(preset: ModelPreset, m: &ModelConfig) -> crate::Result<ImpulsiveSystem> {
    match preset {
        ModelPreset::HeatDirichlet | ModelPreset::HeatNeumann => {
            let n = m.modes.unwrap_or(if preset == ModelPreset::HeatDirichlet {
                DEFAULT_HEAT_MODES
            } else {
                4
            });
            if preset == ModelPreset::HeatDirichlet {
                make_heat(n, 1.0, HeatBoundary::Dirichlet, reset_impulses(&[0.5], n))
            } else {
                let sys = make_heat(n, 1.0, HeatBoundary::Neumann, reset_impulses(&[0.5], n))?;
                sys.with_nonlinearity(NonlinearityKind::BoundedSin { coefficient: 0.05 })?
                    .with_initial_state(DVector::from_fn(n, |i, _| 1.0 / (i + 1) as f64))
            }
        }
        ModelPreset::Wave => {
            let n = m
                .modes
                .or(m.gammas.as_ref().map(Vec::len))
                .unwrap_or(DEFAULT_WAVE_MODES);
            let gammas = m.gammas.clone().unwrap_or_else(|| vec![1.0; n]);
            make_wave(n, 2.0 * PI + 1.0, &gammas, additive_impulses(&[1.0], 2 * n))
        }
        ModelPreset::Rotation => preset.build(),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| schema(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Builds and validates everything a subcommand needs.
    pub fn setup(&self) -> Result<Setup, CliError> {
        let m = &self.model;
        let custom = m.generator.is_some() as u8 + m.eigenvalues.is_some() as u8;
        if custom > 1 || (custom == 1 && m.preset.is_some()) {
            return Err(schema("model: give exactly one of preset, generator, eigenvalues"));
        }
        let preset = match (&m.preset, custom) {
            (Some(name), _) => Some(name.parse::<ModelPreset>().map_err(|e| schema(e.to_string()))?),
            (None, 0) => Some(ModelPreset::Rotation),
            (None, _) => None,
        };
        if preset.is_none() && (m.modes.is_some() || m.gammas.is_some()) {
            return Err(schema("model: modes and gammas apply only to presets"));
        }
        if m.gammas.is_some() && preset != Some(ModelPreset::Wave) {
            return Err(schema("model: gammas apply only to the wave preset"));
        }

        let base = match preset {
            Some(p) => preset_system(p, m).map_err(|e| schema(format!("model: {e}")))?,
            None => {
                let semigroup = match (&m.generator, &m.eigenvalues) {
                    (Some(g), _) => SemigroupModel::dense(matrix(g, "model.generator")?),
                    (_, Some(e)) => SemigroupModel::spectral(vector(e, "model.eigenvalues")?),
                    _ => unreachable!(),
                }
                .map_err(|e| schema(format!("model: {e}")))?;
                let d = semigroup.dim();
                let input = m
                    .input_map
                    .as_ref()
                    .ok_or_else(|| schema("model: a custom generator needs input_map"))?;
                let horizon = m
                    .horizon
                    .ok_or_else(|| schema("model: a custom generator needs horizon"))?;
                ImpulsiveSystem::new(
                    semigroup,
                    horizon,
                    vec![],
                    matrix(input, "model.input_map")?,
                    DVector::zeros(d),
                    NonlinearityKind::None,
                )
                .map_err(|e| schema(format!("model: {e}")))?
            }
        };

        let impulses = match &self.impulses {
            Some(list) => list
                .iter()
                .enumerate()
                .map(|(k, imp)| {
                    Ok(Impulse {
                        time: imp.time,
                        jump: matrix(&imp.jump, &format!("impulses[{k}].jump"))?,
                        input: matrix(&imp.input, &format!("impulses[{k}].input"))?,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?,
            None => base.impulses().to_vec(),
        };
        let nonlinearity = match &self.nonlinearity {
            Some(n) => n.build()?,
            None => base.nonlinearity().clone(),
        };
        let input_map = match (&m.input_map, preset) {
            (Some(rows), Some(_)) => matrix(rows, "model.input_map")?,
            _ => base.input_map().clone(),
        };
        let x0 = match &m.initial_state {
            Some(x) => vector(x, "model.initial_state")?,
            None => base.initial_state().clone(),
        };
        let system = ImpulsiveSystem::new(
            base.semigroup().clone(),
            m.horizon.unwrap_or(base.horizon()),
            impulses,
            input_map,
            x0,
            nonlinearity,
        )
        .map_err(|e| schema(format!("model: {e}")))?;

        let neutral = match (&self.neutral, preset) {
            (Some(n), _) => Some(n.build(&system)?),
            (None, Some(ModelPreset::HeatNeumann)) => Some(NeutralConfig::default().build(&system)?),
            _ => None,
        };

        let q = &self.quadrature;
        let grid = QuadratureGrid::uniform(&system, q.order, q.panels)
            .map_err(|e| schema(format!("quadrature: {e}")))?;

        let s = &self.synthesis;
        let target = match &s.target {
            Some(h) => vector(h, "synthesis.target")?,
            None => preset.map_or_else(|| DVector::zeros(system.dim()), |p| p.default_target(system.dim())),
        };
        if target.len() != system.dim() {
            return Err(schema(format!(
                "synthesis.target has {} entries, the state has {}",
                target.len(),
                system.dim()
            )));
        }
        if !(s.alpha > 0.0) || !s.alpha.is_finite() {
            return Err(schema(format!("synthesis.alpha must be positive, got {}", s.alpha)));
        }
        let alphas = s.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
        if alphas.is_empty()
            || alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite())
            || alphas.windows(2).any(|w| !(w[1] < w[0]))
        {
            return Err(schema("synthesis.alphas must be positive and strictly decreasing"));
        }
        let outer = OuterOptions {
            tol: s.tol,
            max_outer: s.max_outer,
            damping: s.damping,
            picard: PicardOptions {
                tol: s.tol,
                max_iter: s.max_iter,
                damping: 1.0,
            },
            variant: if s.paper_literal_control {
                ControlVariant::PaperLiteral
            } else {
                ControlVariant::Adjoint
            },
        };
        if !(outer.tol > 0.0) || outer.max_outer == 0 || outer.picard.max_iter == 0 {
            return Err(schema("synthesis: tol, max_iter and max_outer must be positive"));
        }
        if !(0.1..=1.0).contains(&outer.damping) {
            return Err(schema(format!("synthesis.damping must lie in [0.1, 1], got {}", outer.damping)));
        }

        let c = &self.controls;
        let u = c.u.as_ref().map(|u| vector(u, "controls.u")).transpose()?;
        if let Some(u) = &u {
            if u.len() != system.control_dim() {
                return Err(schema(format!(
                    "controls.u has {} entries, the input map takes {}",
                    u.len(),
                    system.control_dim()
                )));
            }
        }
        let v = match &c.v {
            Some(rows) => {
                if rows.len() != system.impulse_count() {
                    return Err(schema(format!(
                        "controls.v has {} entries for {} impulses",
                        rows.len(),
                        system.impulse_count()
                    )));
                }
                let mut out = Vec::with_capacity(rows.len());
                for (k, (r, imp)) in rows.iter().zip(system.impulses()).enumerate() {
                    if r.len() != imp.input.ncols() {
                        return Err(schema(format!(
                            "controls.v[{k}] has {} entries, impulse {k} takes {}",
                            r.len(),
                            imp.input.ncols()
                        )));
                    }
                    out.push(vector(r, "controls.v")?);
                }
                Some(out)
            }
            None => None,
        };
        if self.output.samples < 2 {
            return Err(schema("output.samples must be at least 2"));
        }

        Ok(Setup {
            preset,
            system,
            neutral,
            grid,
            target,
            alphas,
            alpha: s.alpha,
            outer,
            mode: s.mode,
            u,
            v,
            samples: self.output.samples,
        })
    }
}

impl NonlinearityConfig {
    fn build(&self) -> Result<NonlinearityKind, CliError> {
        Ok(match self {
            NonlinearityConfig::None => NonlinearityKind::None,
            NonlinearityConfig::Quadratic { coefficient } => NonlinearityKind::Example53Quadratic {
                coefficient: *coefficient,
            },
            NonlinearityConfig::BoundedSin { coefficient } => NonlinearityKind::BoundedSin {
                coefficient: *coefficient,
            },
            NonlinearityConfig::Tabulated { times, values } => {
                let values = values
                    .iter()
                    .map(|v| vector(v, "nonlinearity.values"))
                    .collect::<Result<Vec<_>, _>>()?;
                NonlinearityKind::Tabulated(
                    TabulatedForcing::from_samples(times.clone(), values)
                        .map_err(|e| schema(format!("nonlinearity: {e}")))?,
                )
            }
        })
    }
}

impl NeutralConfig {
    fn build(&self, system: &ImpulsiveSystem) -> Result<NeutralSystem, CliError> {
        let sigma = match &self.sigma {
            SigmaConfig::Zero => NeutralTerm::Zero,
            SigmaConfig::BoundedDemo { coefficient } => NeutralTerm::BoundedDemo {
                coefficient: *coefficient,
            },
            SigmaConfig::Constant { value } => {
                NeutralTerm::Tabulated(TabulatedForcing::constant(vector(value, "neutral.sigma.value")?))
            }
        };
        let history = match &self.history {
            None => HistorySegment::from_fn(self.delay, self.history_samples, |_| {
                system.initial_state().clone()
            }),
            Some(rows) if rows.len() == 1 => {
                let value = vector(&rows[0], "neutral.history")?;
                HistorySegment::from_fn(self.delay, self.history_samples, |_| value.clone())
            }
            Some(rows) => HistorySegment::from_samples(
                self.delay,
                rows.iter()
                    .map(|r| vector(r, "neutral.history"))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        }
        .map_err(|e| schema(format!("neutral: {e}")))?;
        NeutralSystem::new(system.clone(), sigma, history, self.convention)
            .map_err(|e| schema(format!("neutral: {e}")))
    }
}
