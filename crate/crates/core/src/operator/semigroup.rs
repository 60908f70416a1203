use nalgebra::{DMatrix, DVector};

use super::expm::expm;
use crate::error::{check_dim, check_finite, Error, Result};

/// Representation of the generator behind a [`SemigroupModel`].
#[derive(Debug, Clone, PartialEq)]
pub enum SemigroupKind {
    /// Dense generator matrix `A`; `S(t) = exp(tA)`.
    DenseGenerator(DMatrix<f64>),
    /// Self-adjoint generator diagonal in an orthonormal eigenbasis.
    SpectralDiagonal(DVector<f64>),
    /// Truncated wave equation with modes `m = 1..=modes`. The state is the
    /// coefficient vector `(alpha_1, beta_1, ..., alpha_N, beta_N)`.
    WaveBlock { modes: usize },
}

/// Evaluator for `S(t)` and its Hilbert-space adjoint.
///
/// The state space carries a diagonal inner product
/// `<x, y> = sum_i w_i x_i y_i`. All kinds use unit weights except the wave
/// model, whose displacement coefficients are weighted by `m^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupModel {
    kind: SemigroupKind,
    metric: DVector<f64>,
}

impl SemigroupModel {
    pub fn dense(generator: DMatrix<f64>) -> Result<Self> {
        if !generator.is_square() || generator.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "generator must be square and non-empty, got {}x{}",
                generator.nrows(),
                generator.ncols()
            )));
        }
        check_finite("generator", generator.iter())?;
        let d = generator.nrows();
        Ok(Self {
            kind: SemigroupKind::DenseGenerator(generator),
            metric: DVector::from_element(d, 1.0),
        })
    }

    pub fn spectral(eigenvalues: DVector<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidArgument("empty eigenvalue list".into()));
        }
        check_finite("eigenvalues", eigenvalues.iter())?;
        let d = eigenvalues.len();
        Ok(Self {
            kind: SemigroupKind::SpectralDiagonal(eigenvalues),
            metric: DVector::from_element(d, 1.0),
        })
    }

    pub fn wave(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidArgument("wave model needs at least one mode".into()));
        }
        let metric = DVector::from_fn(2 * modes, |i, _| {
            if i % 2 == 0 {
                let m = (i / 2 + 1) as f64;
                m * m
            } else {
                1.0
            }
        });
        Ok(Self {
            kind: SemigroupKind::WaveBlock { modes },
            metric,
        })
    }

    pub fn kind(&self) -> &SemigroupKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.metric.len()
    }

    /// Diagonal weights of the state inner product.
    pub fn metric(&self) -> &DVector<f64> {
        &self.metric
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.iter()
            .zip(y.iter())
            .zip(self.metric.iter())
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// Generator as a dense matrix in state coordinates.
    pub fn generator(&self) -> DMatrix<f64> {
        match &self.kind {
            SemigroupKind::DenseGenerator(a) => a.clone(),
            SemigroupKind::SpectralDiagonal(l) => DMatrix::from_diagonal(l),
            SemigroupKind::WaveBlock { modes } => {
                let mut a = DMatrix::zeros(2 * modes, 2 * modes);
                for k in 0..*modes {
                    let m = (k + 1) as f64;
                    a[(2 * k, 2 * k + 1)] = 1.0;
                    a[(2 * k + 1, 2 * k)] = -m * m;
                }
                a
            }
        }
    }

    /// `S(t)` as a dense matrix. `t` must be non-negative.
    pub fn transfer(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "semigroup time must be finite and non-negative, got {t}"
            )));
        }
        Ok(match &self.kind {
            SemigroupKind::DenseGenerator(a) => expm(&(a * t))?,
            SemigroupKind::SpectralDiagonal(l) => DMatrix::from_diagonal(&l.map(|v| (v * t).exp())),
            SemigroupKind::WaveBlock { modes } => {
                let mut s = DMatrix::zeros(2 * modes, 2 * modes);
                for k in 0..*modes {
                    let m = (k + 1) as f64;
                    let (sn, cs) = (m * t).sin_cos();
                    s[(2 * k, 2 * k)] = cs;
                    s[(2 * k, 2 * k + 1)] = sn / m;
                    s[(2 * k + 1, 2 * k)] = -m * sn;
                    s[(2 * k + 1, 2 * k + 1)] = cs;
                }
                s
            }
        })
    }

    /// `S*(t)` as a dense matrix.
    pub fn transfer_adjoint(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(self.adjoint_state_map(&self.transfer(t)?))
    }

    /// Hilbert adjoint of a state-to-state map: `G^-1 M^T G`.
    pub fn adjoint_state_map(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let g = &self.metric;
        DMatrix::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)] * g[j] / g[i])
    }

    /// Adjoint of an input map `U -> H` where `U` carries the Euclidean
    /// inner product: `M^T G`.
    pub fn adjoint_input_map(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let g = &self.metric;
        DMatrix::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)] * g[j])
    }

    /// `S(dt) x`.
    pub fn evolve(&self, dt: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_vector(x)?;
        self.apply(dt, x, false)
    }

    /// `S*(dt) x`.
    pub fn evolve_adjoint(&self, dt: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_vector(x)?;
        self.apply(dt, x, true)
    }

    fn check_vector(&self, x: &DVector<f64>) -> Result<()> {
        check_dim("semigroup state", self.dim(), x.len())?;
        check_finite("semigroup state", x.iter())
    }

    fn apply(&self, dt: f64, x: &DVector<f64>, adjoint: bool) -> Result<DVector<f64>> {
        match &self.kind {
            SemigroupKind::SpectralDiagonal(l) => {
                if !(dt >= 0.0) || !dt.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "semigroup time must be finite and non-negative, got {dt}"
                    )));
                }
                Ok(x.zip_map(l, |xi, li| xi * (li * dt).exp()))
            }
            _ => {
                let s = if adjoint {
                    self.transfer_adjoint(dt)?
                } else {
                    self.transfer(dt)?
                };
                Ok(s * x)
            }
        }
    }
}
