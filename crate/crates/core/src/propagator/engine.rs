//! Panel-wise variation-of-constants marching shared by every mild solver.
//!
//! Across a panel `[a, a+h]` the state advances as
//! `x(a+h) = S(h) x(a) + sum_m w_m S(a+h-s_m) f(s_m)`, so composing panels
//! reproduces the composite Gauss–Legendre approximation of the full
//! subinterval integral. Interior node values integrate the Lagrange
//! interpolant of the node forcing with a finer rule.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::quadrature::{gauss_legendre, QuadratureGrid};
use super::trajectory::{Segment, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::operator::{ImpulsiveSystem, SemigroupModel};

struct PanelOps {
    full: DMatrix<f64>,
    end_weights: Vec<DMatrix<f64>>,
    node_free: Vec<DMatrix<f64>>,
    node_quad: Vec<Vec<DMatrix<f64>>>,
}

impl PanelOps {
    fn build(model: &SemigroupModel, order: usize, width: f64) -> Result<Self> {
        let (ref_x, ref_w) = gauss_legendre(order);
        let local: Vec<f64> = ref_x.iter().map(|x| 0.5 * width * (1.0 + x)).collect();
        let weights: Vec<f64> = ref_w.iter().map(|w| 0.5 * width * w).collect();

        let full = model.transfer(width)?;
        let end_weights = local
            .iter()
            .zip(&weights)
            .map(|(&x, &w)| Ok(model.transfer(width - x)? * w))
            .collect::<Result<Vec<_>>>()?;
        let node_free = local
            .iter()
            .map(|&x| model.transfer(x))
            .collect::<Result<Vec<_>>>()?;

        let lagrange = |m: usize, r: f64| -> f64 {
            local
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != m)
                .map(|(_, &xk)| (r - xk) / (local[m] - xk))
                .product()
        };
        let (sub_x, sub_w) = gauss_legendre((2 * order).max(16));
        let d = model.dim();
        let mut node_quad = Vec::with_capacity(order);
        for &xj in &local {
            let mut row = vec![DMatrix::zeros(d, d); order];
            for (&sx, &sw) in sub_x.iter().zip(&sub_w) {
                let r = 0.5 * xj * (1.0 + sx);
                let w = 0.5 * xj * sw;
                let s = model.transfer(xj - r)?;
                for (m, q) in row.iter_mut().enumerate() {
                    *q += &s * (w * lagrange(m, r));
                }
            }
            node_quad.push(row);
        }
        Ok(Self {
            full,
            end_weights,
            node_free,
            node_quad,
        })
    }
}

/// Output of one march: the sampled trajectory and the state at every
/// quadrature node (global node order).
pub struct Propagation {
    pub trajectory: Trajectory,
    pub node_states: Vec<DVector<f64>>,
}

/// Precomputed panel operators for one system/grid pair.
pub struct Propagator<'a> {
    system: &'a ImpulsiveSystem,
    grid: &'a QuadratureGrid,
    ops: Vec<Arc<PanelOps>>,
}

impl<'a> Propagator<'a> {
    pub fn new(system: &'a ImpulsiveSystem, grid: &'a QuadratureGrid) -> Result<Self> {
        grid.check_against(system)?;
        let mut cache: HashMap<u64, Arc<PanelOps>> = HashMap::new();
        let mut ops = Vec::new();
        for sub in grid.subintervals() {
            let width = (sub.end - sub.start) / sub.panels.len() as f64;
            let entry = match cache.get(&width.to_bits()) {
                Some(e) => e.clone(),
                None => {
                    let e = Arc::new(PanelOps::build(system.semigroup(), grid.order(), width)?);
                    cache.insert(width.to_bits(), e.clone());
                    e
                }
            };
            ops.push(entry);
        }
        Ok(Self { system, grid, ops })
    }

    pub fn system(&self) -> &ImpulsiveSystem {
        self.system
    }

    pub fn grid(&self) -> &QuadratureGrid {
        self.grid
    }

    /// Marches from `x0` with node forcing `forcing`, calling `jump(k, left)`
    /// at the `k`-th impulse to obtain the right limit.
    pub fn run(
        &self,
        x0: &DVector<f64>,
        forcing: &[DVector<f64>],
        mut jump: impl FnMut(usize, &DVector<f64>) -> Result<DVector<f64>>,
    ) -> Result<Propagation> {
        let d = self.system.dim();
        check_dim("initial state", d, x0.len())?;
        check_dim("node forcing count", self.grid.node_count(), forcing.len())?;
        let mut node_states = vec![DVector::zeros(d); self.grid.node_count()];
        let mut segments = Vec::with_capacity(self.grid.subintervals().len());
        let mut x = x0.clone();
        let last = self.grid.subintervals().len() - 1;

        for (si, sub) in self.grid.subintervals().iter().enumerate() {
            let ops = &self.ops[si];
            let n_samples = sub.panels.len() * (self.grid.order() + 1) + 1;
            let mut times = Vec::with_capacity(n_samples);
            let mut states = Vec::with_capacity(n_samples);
            times.push(sub.start);
            states.push(x.clone());
            for panel in &sub.panels {
                let f = &forcing[panel.first_node..panel.first_node + self.grid.order()];
                for (j, &t) in panel.nodes.iter().enumerate() {
                    let mut y = &ops.node_free[j] * &x;
                    for (q, fm) in ops.node_quad[j].iter().zip(f) {
                        y.gemv(1.0, q, fm, 1.0);
                    }
                    times.push(t);
                    states.push(y.clone());
                    node_states[panel.first_node + j] = y;
                }
                let mut next = &ops.full * &x;
                for (e, fm) in ops.end_weights.iter().zip(f) {
                    next.gemv(1.0, e, fm, 1.0);
                }
                x = next;
                times.push(panel.end);
                states.push(x.clone());
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("mild solution state"));
            }
            segments.push(Segment { times, states });
            if si < last {
                x = jump(si, &x)?;
            }
        }
        Ok(Propagation {
            trajectory: Trajectory::new(segments)?,
            node_states,
        })
    }

    /// Terminal value of [`Propagator::run`] without sampling interior
    /// nodes. Bitwise equal to the full march's terminal state.
    pub fn terminal(
        &self,
        x0: &DVector<f64>,
        forcing: &[DVector<f64>],
        mut jump: impl FnMut(usize, &DVector<f64>) -> Result<DVector<f64>>,
    ) -> Result<DVector<f64>> {
        check_dim("initial state", self.system.dim(), x0.len())?;
        check_dim("node forcing count", self.grid.node_count(), forcing.len())?;
        let mut x = x0.clone();
        let last = self.grid.subintervals().len() - 1;
        for (si, sub) in self.grid.subintervals().iter().enumerate() {
            let ops = &self.ops[si];
            for panel in &sub.panels {
                let f = &forcing[panel.first_node..panel.first_node + self.grid.order()];
                let mut next = &ops.full * &x;
                for (e, fm) in ops.end_weights.iter().zip(f) {
                    next.gemv(1.0, e, fm, 1.0);
                }
                x = next;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("mild solution state"));
            }
            if si < last {
                x = jump(si, &x)?;
            }
        }
        Ok(x)
    }
}
