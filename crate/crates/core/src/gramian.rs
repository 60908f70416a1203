//! Controllability operators, resolvent solves and the strong-decay diagnostic.
//!
//! Every operator is stored in state coordinates. When the state space has a
//! non-Euclidean metric `G` (wave model) the operators are `G`-self-adjoint,
//! i.e. `G W` is symmetric; with unit weights this is plain symmetry.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::operator::{downstream_maps, ImpulsiveSystem};
use crate::propagator::{Propagator, QuadratureGrid};

/// The four controllability operators and their sum `W`.
pub struct GramianSet {
    /// Continuous control over the last subinterval `[t_p, b]`.
    pub gamma: DMatrix<f64>,
    /// Last impulse control.
    pub gamma_tilde: DMatrix<f64>,
    /// Continuous control over the earlier subintervals.
    pub theta: DMatrix<f64>,
    /// Earlier impulse controls.
    pub theta_tilde: DMatrix<f64>,
    pub total: DMatrix<f64>,
    metric: DVector<f64>,
    cache: RwLock<HashMap<u64, Arc<Cholesky<f64, Dyn>>>>,
}

impl Clone for GramianSet {
    fn clone(&self) -> Self {
        Self::from_parts(
            self.gamma.clone(),
            self.gamma_tilde.clone(),
            self.theta.clone(),
            self.theta_tilde.clone(),
            self.metric.clone(),
        )
    }
}

impl fmt::Debug for GramianSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GramianSet")
            .field("gamma", &self.gamma)
            .field("gamma_tilde", &self.gamma_tilde)
            .field("theta", &self.theta)
            .field("theta_tilde", &self.theta_tilde)
            .field("metric", &self.metric)
            .finish_non_exhaustive()
    }
}

fn sandwich(m: &DMatrix<f64>, inner: &DMatrix<f64>) -> DMatrix<f64> {
    m * inner * m.transpose()
}

fn right_metric(c: DMatrix<f64>, metric: &DVector<f64>) -> DMatrix<f64> {
    let mut w = c;
    for (j, mut col) in w.column_iter_mut().enumerate() {
        col *= metric[j];
    }
    w
}

impl GramianSet {
    pub fn from_parts(
        gamma: DMatrix<f64>,
        gamma_tilde: DMatrix<f64>,
        theta: DMatrix<f64>,
        theta_tilde: DMatrix<f64>,
        metric: DVector<f64>,
    ) -> Self {
        let total = &gamma + &gamma_tilde + &theta + &theta_tilde;
        Self {
            gamma,
            gamma_tilde,
            theta,
            theta_tilde,
            total,
            metric,
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// A set whose only nonzero part is `total`, with unit metric.
    pub fn from_total(total: DMatrix<f64>) -> Self {
        let d = total.nrows();
        let z = DMatrix::zeros(d, d);
        Self::from_parts(total, z.clone(), z.clone(), z, DVector::from_element(d, 1.0))
    }

    pub fn dim(&self) -> usize {
        self.total.nrows()
    }

    pub fn metric(&self) -> &DVector<f64> {
        &self.metric
    }

    pub fn parts(&self) -> [(&'static str, &DMatrix<f64>); 4] {
        [
            ("gamma", &self.gamma),
            ("gamma_tilde", &self.gamma_tilde),
            ("theta", &self.theta),
            ("theta_tilde", &self.theta_tilde),
        ]
    }

    /// `G^{1/2} M G^{-1/2}`, symmetrized. Its spectrum is that of `M`.
    pub fn symmetric_form(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let g = &self.metric;
        let s = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (g[i] / g[j]).sqrt());
        (&s + s.transpose()) * 0.5
    }

    /// `max |G M - (G M)^T|`.
    pub fn self_adjoint_defect(&self, m: &DMatrix<f64>) -> f64 {
        let g = &self.metric;
        let gm = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| g[i] * m[(i, j)]);
        (&gm - gm.transpose()).amax()
    }

    /// Eigenvalues of `W` in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigenvalues_of(&self.symmetric_form(&self.total))
    }

    pub fn min_eigenvalue(&self, m: &DMatrix<f64>) -> f64 {
        eigenvalues_of(&self.symmetric_form(m))
            .first()
            .copied()
            .unwrap_or(0.0)
    }

    fn norm(&self, x: &DVector<f64>) -> f64 {
        x.iter()
            .zip(self.metric.iter())
            .map(|(v, w)| v * v * w)
            .sum::<f64>()
            .sqrt()
    }

    fn factor(&self, alpha: f64) -> Result<Arc<Cholesky<f64, Dyn>>> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "regularization parameter must be positive, got {alpha}"
            )));
        }
        if let Some(f) = self.cache.read().unwrap().get(&alpha.to_bits()) {
            return Ok(f.clone());
        }
        let scale = self.total.amax().max(1.0);
        if self.self_adjoint_defect(&self.total) > 1e-10 * scale {
            return Err(Error::InvalidArgument(
                "Gramian is not self-adjoint within tolerance".into(),
            ));
        }
        // G (alpha I + W), symmetrized
        let g = &self.metric;
        let gw = DMatrix::from_fn(self.dim(), self.dim(), |i, j| g[i] * self.total[(i, j)]);
        let mut m = (&gw + gw.transpose()) * 0.5;
        for i in 0..self.dim() {
            m[(i, i)] += alpha * g[i];
        }
        let chol = Cholesky::new(m).ok_or_else(|| {
            Error::Factorization(format!("alpha I + W is not positive definite at alpha={alpha}"))
        })?;
        let chol = Arc::new(chol);
        self.cache
            .write()
            .unwrap()
            .insert(alpha.to_bits(), chol.clone());
        Ok(chol)
    }

    /// `(alpha I + W)^{-1} rhs`.
    pub fn resolvent_solve(&self, alpha: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("resolvent right-hand side", self.dim(), rhs.len())?;
        check_finite("resolvent right-hand side", rhs.iter())?;
        let chol = self.factor(alpha)?;
        let apply = |x: &DVector<f64>| x * alpha + &self.total * x;
        let weighted = |r: &DVector<f64>| r.component_mul(&self.metric);
        let mut x = chol.solve(&weighted(rhs));
        // two rounds of iterative refinement
        for _ in 0..2 {
            let r = rhs - apply(&x);
            x += chol.solve(&weighted(&r));
        }
        let residual = self.norm(&(rhs - apply(&x)));
        let scale = self.norm(rhs);
        if residual > 1e-10 * scale.max(f64::MIN_POSITIVE) && residual > 0.0 {
            return Err(Error::Factorization(format!(
                "resolvent residual {residual:.3e} exceeds 1e-10 relative at alpha={alpha}"
            )));
        }
        Ok(x)
    }

    /// Component of `x` in the (numerical) kernel of `W`, in the state norm.
    pub fn kernel_component_norm(&self, x: &DVector<f64>, rel_tol: f64) -> f64 {
        let eig = SymmetricEigen::new(self.symmetric_form(&self.total));
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let cutoff = rel_tol * lmax.max(f64::MIN_POSITIVE);
        let hat = x.zip_map(&self.metric, |v, g| v * g.sqrt());
        eig.eigenvalues
            .iter()
            .zip(eig.eigenvectors.column_iter())
            .filter(|(l, _)| **l <= cutoff)
            .map(|(_, v)| v.dot(&hat).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

fn eigenvalues_of(sym: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(sym.clone()).eigenvalues.iter().cloned().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

/// Assembles the four operators from their defining integrals and sums.
pub fn assemble(system: &ImpulsiveSystem, grid: &QuadratureGrid) -> Result<GramianSet> {
    grid.check_against(system)?;
    let model = system.semigroup();
    let d = system.dim();
    let p = system.impulse_count();
    let breaks = system.breakpoints();
    let e = downstream_maps(system)?;
    let omega = system.input_map();

    // kernels int S(t_{i+1}-s) Omega Omega^T S(t_{i+1}-s)^T ds, one per subinterval
    let mut kernels = Vec::with_capacity(p + 1);
    for (i, sub) in grid.subintervals().iter().enumerate() {
        let end = breaks[i + 1];
        let mut k = DMatrix::zeros(d, d);
        for panel in &sub.panels {
            for (&s, &w) in panel.nodes.iter().zip(&panel.weights) {
                let so = model.transfer(end - s)? * omega;
                k += (&so * so.transpose()) * w;
            }
        }
        kernels.push(k);
    }

    let ident = DMatrix::<f64>::identity(d, d);
    let metric = model.metric().clone();
    let gamma = right_metric(kernels[p].clone(), &metric);
    let mut theta = DMatrix::zeros(d, d);
    for i in 0..p {
        let m = &e[i + 1] * (&ident + &system.impulses()[i].jump);
        theta += sandwich(&m, &kernels[i]);
    }
    let theta = right_metric(theta, &metric);

    let mut gamma_tilde = DMatrix::zeros(d, d);
    let mut theta_tilde = DMatrix::zeros(d, d);
    for k in 1..=p {
        let inj = &e[k] * &system.impulses()[k - 1].input;
        let part = &inj * inj.transpose();
        if k == p {
            gamma_tilde = part;
        } else {
            theta_tilde += part;
        }
    }
    let gamma_tilde = right_metric(gamma_tilde, &metric);
    let theta_tilde = right_metric(theta_tilde, &metric);

    Ok(GramianSet::from_parts(gamma, gamma_tilde, theta, theta_tilde, metric))
}

/// The discretized input-to-terminal map `L`, one column per (node, control
/// component) scaled by the square root of the node weight, followed by one
/// column per impulse-control component. Built by propagating unit
/// injections through the mild solver.
pub fn input_to_terminal_matrix(system: &ImpulsiveSystem, grid: &QuadratureGrid) -> Result<DMatrix<f64>> {
    let prop = Propagator::new(system, grid)?;
    let d = system.dim();
    let m = system.control_dim();
    let imp_cols: usize = system.impulses().iter().map(|i| i.input.ncols()).sum();
    let mut l = DMatrix::zeros(d, grid.node_count() * m + imp_cols);
    let zero = DVector::zeros(d);
    let zero_forcing = vec![DVector::zeros(d); grid.node_count()];
    let no_kick = |k: usize, x: &DVector<f64>| Ok(x + &system.impulses()[k].jump * x);

    let mut col = 0;
    for node in grid.nodes() {
        for c in 0..m {
            let mut forcing = zero_forcing.clone();
            forcing[node.index] = system.input_map().column(c) / node.weight.sqrt();
            l.set_column(col, &prop.terminal(&zero, &forcing, no_kick)?);
            col += 1;
        }
    }
    for (k, imp) in system.impulses().iter().enumerate() {
        for c in 0..imp.input.ncols() {
            let kick = |j: usize, x: &DVector<f64>| {
                let mut y = x + &system.impulses()[j].jump * x;
                if j == k {
                    y += imp.input.column(c);
                }
                Ok(y)
            };
            l.set_column(col, &prop.terminal(&zero, &zero_forcing, kick)?);
            col += 1;
        }
    }
    Ok(l)
}

/// `W` recomputed as `L L*` from [`input_to_terminal_matrix`].
pub fn gramian_from_input_map(system: &ImpulsiveSystem, grid: &QuadratureGrid) -> Result<DMatrix<f64>> {
    let l = input_to_terminal_matrix(system, grid)?;
    Ok(right_metric(&l * l.transpose(), system.semigroup().metric()))
}

/// Free-standing resolvent solve for a symmetric PSD matrix with the
/// Euclidean inner product.
pub fn resolvent_solve(w: &DMatrix<f64>, alpha: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if !w.is_square() {
        return Err(Error::InvalidArgument("Gramian must be square".into()));
    }
    GramianSet::from_total(w.clone()).resolvent_solve(alpha, rhs)
}

/// Decay of `alpha (alpha I + W)^{-1}` on probe vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct A0Report {
    pub alphas: Vec<f64>,
    /// `ratios[a][k] = |alpha_a (alpha_a I + W)^{-1} x_k| / |x_k|`.
    pub ratios: Vec<Vec<f64>>,
    pub threshold: f64,
    pub satisfied: bool,
}

impl A0Report {
    pub fn flag(&self) -> &'static str {
        if self.satisfied {
            "A0-satisfied"
        } else {
            "A0-violated"
        }
    }
}

pub const A0_DEFAULT_THRESHOLD: f64 = 1e-3;

pub fn a0_diagnostic(
    gramians: &GramianSet,
    alphas: &[f64],
    probes: &[DVector<f64>],
    threshold: f64,
) -> Result<A0Report> {
    if alphas.is_empty() || probes.is_empty() {
        return Err(Error::InvalidArgument(
            "decay diagnostic needs a non-empty schedule and probe set".into(),
        ));
    }
    if alphas.iter().any(|a| !(*a > 0.0)) || alphas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument(
            "alpha schedule must be positive and strictly decreasing".into(),
        ));
    }
    let mut ratios = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut row = Vec::with_capacity(probes.len());
        for x in probes {
            let nx = gramians.norm(x);
            if nx == 0.0 {
                return Err(Error::InvalidArgument("probe vectors must be nonzero".into()));
            }
            let y = gramians.resolvent_solve(alpha, x)? * alpha;
            row.push(gramians.norm(&y) / nx);
        }
        ratios.push(row);
    }
    let satisfied = ratios.last().unwrap().iter().all(|&r| r < threshold);
    Ok(A0Report {
        alphas: alphas.to_vec(),
        ratios,
        threshold,
        satisfied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{NonlinearityKind, SemigroupModel};

    fn scalar_system() -> ImpulsiveSystem {
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

    #[test]
    fn scalar_gramian_is_horizon() {
        let sys = scalar_system();
        let g = assemble(&sys, &QuadratureGrid::default_for(&sys).unwrap()).unwrap();
        assert!((g.gamma[(0, 0)] - 1.0).abs() < 1e-14);
        assert_eq!(g.theta[(0, 0)], 0.0);
        assert_eq!(g.gamma_tilde[(0, 0)], 0.0);
        assert_eq!(g.theta_tilde[(0, 0)], 0.0);
    }

    #[test]
    fn heat_gramian_closed_form() {
        let sys = ImpulsiveSystem::new(
            SemigroupModel::spectral(DVector::from_vec(vec![-1.0, -4.0, -9.0])).unwrap(),
            1.0,
            vec![],
            DMatrix::identity(3, 3),
            DVector::zeros(3),
            NonlinearityKind::None,
        )
        .unwrap();
        let g = assemble(&sys, &QuadratureGrid::default_for(&sys).unwrap()).unwrap();
        for n in 1..=3 {
            let l = (n * n) as f64;
            let want = (1.0 - (-2.0 * l).exp()) / (2.0 * l);
            assert!((g.gamma[(n - 1, n - 1)] - want).abs() < 1e-12);
        }
        assert!(g.gamma[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn trivial_resolvents() {
        let r = DVector::from_vec(vec![1.0, -3.0]);
        let x = resolvent_solve(&DMatrix::zeros(2, 2), 0.5, &r).unwrap();
        assert!((x - &r * 2.0).amax() < 1e-15);
        let x = resolvent_solve(&DMatrix::identity(2, 2), 1.0, &DVector::from_vec(vec![2.0, 0.0])).unwrap();
        assert!((x - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-15);
        assert!(resolvent_solve(&DMatrix::identity(2, 2), 0.0, &r).is_err());
        assert!(resolvent_solve(&DMatrix::identity(2, 2), -1.0, &r).is_err());
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(resolvent_solve(&skew, 1.0, &r).is_err());
    }

    #[test]
    fn a0_scalar_closed_form_and_degenerate_flag() {
        let g = GramianSet::from_total(DMatrix::identity(1, 1));
        let rep = a0_diagnostic(&g, &[0.1, 0.01], &[DVector::from_element(1, 1.0)], 1e-3).unwrap();
        assert!((rep.ratios[1][0] - 0.01 / 1.01).abs() < 1e-15);
        assert!(!rep.satisfied);

        let z = GramianSet::from_total(DMatrix::zeros(2, 2));
        let rep = a0_diagnostic(&z, &[1.0, 1e-3, 1e-6], &[DVector::from_vec(vec![1.0, 2.0])], 1e-3).unwrap();
        assert!(rep.ratios.iter().all(|r| (r[0] - 1.0).abs() < 1e-15));
        assert_eq!(rep.flag(), "A0-violated");
    }

    #[test]
    fn a0_rejects_bad_schedules() {
        let g = GramianSet::from_total(DMatrix::identity(1, 1));
        let x = [DVector::from_element(1, 1.0)];
        assert!(a0_diagnostic(&g, &[], &x, 1e-3).is_err());
        assert!(a0_diagnostic(&g, &[0.1], &[], 1e-3).is_err());
        assert!(a0_diagnostic(&g, &[0.1, 0.2], &x, 1e-3).is_err());
        assert!(a0_diagnostic(&g, &[0.1, -0.2], &x, 1e-3).is_err());
    }

    #[test]
    fn kernel_component_of_singular_gramian() {
        let g = GramianSet::from_total(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])));
        let k = g.kernel_component_norm(&DVector::from_vec(vec![3.0, 4.0]), 1e-12);
        assert!((k - 4.0).abs() < 1e-14);
    }
}
