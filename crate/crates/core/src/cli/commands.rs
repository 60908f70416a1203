use std::cell::RefCell;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use super::config::Setup;
use super::CliError;
use crate::gramian::{a0_diagnostic, assemble, GramianSet, A0_DEFAULT_THRESHOLD};
use crate::neutral::{neutral_alpha_sweep, neutral_mild_solve, neutral_synthesize, NeutralSystem};
use crate::operator::ImpulsiveSystem;
use crate::propagator::{fmt_f64, mild_solve_semilinear, QuadratureGrid, SemilinearSolution};
use crate::synthesis::{
    alpha_sweep, semilinear_synthesize, verify_lemma31, ControlVariant, SemilinearSynthesis,
    SweepOptions,
};

/// Relative residual below which `verify` reports a pass.
const VERIFY_RTOL: f64 = 1e-8;

pub(super) struct Output {
    dir: PathBuf,
    written: RefCell<Vec<PathBuf>>,
}

impl Output {
    pub(super) fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: RefCell::new(Vec::new()),
        })
    }

    pub(super) fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.written.borrow_mut().push(path);
        Ok(())
    }

    pub(super) fn written(&self) -> Vec<PathBuf> {
        self.written.borrow().clone()
    }
}

pub(super) struct Context<'a> {
    pub setup: &'a Setup,
    pub out: &'a Output,
    pub jobs: usize,
    pub alphas_given: bool,
}

pub(super) fn history_csv(gaps: &[f64]) -> String {
    let mut s = String::from("iteration,gap\n");
    for (i, g) in gaps.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, fmt_f64(*g));
    }
    s
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    let mut s = header.join(",");
    s.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

struct Summary(String);

impl Summary {
    fn new() -> Self {
        Summary(String::from("key,value\n"))
    }

    fn text(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        let _ = writeln!(self.0, "{key},{value}");
        self
    }

    fn num(self, key: &str, value: f64) -> Self {
        self.text(key, fmt_f64(value))
    }
}

fn model_name(setup: &Setup) -> &'static str {
    setup.preset.map_or("custom", |p| p.name())
}

fn zero_v(system: &ImpulsiveSystem) -> Vec<DVector<f64>> {
    system
        .impulses()
        .iter()
        .map(|imp| DVector::zeros(imp.input.ncols()))
        .collect()
}

/// Open-loop solve, neutral when `neutral` is given.
fn solve(
    system: &ImpulsiveSystem,
    neutral: Option<&NeutralSystem>,
    setup: &Setup,
    grid: &QuadratureGrid,
    u: &DVector<f64>,
    v: &[DVector<f64>],
) -> crate::Result<SemilinearSolution> {
    let uf = |_: f64| u.clone();
    match neutral {
        Some(n) => neutral_mild_solve(n, &uf, v, grid, &setup.outer.picard),
        None => mild_solve_semilinear(system, &uf, v, grid, &setup.outer.picard),
    }
}

pub(super) fn simulate(ctx: &Context<'_>) -> Result<(), CliError> {
    let s = ctx.setup;
    let u = s.u.clone().unwrap_or_else(|| DVector::zeros(s.system.control_dim()));
    let v = s.v.clone().unwrap_or_else(|| zero_v(&s.system));
    let sol = solve(&s.system, s.neutral.as_ref(), s, &s.grid, &u, &v)?;
    ctx.out.write("trajectory.csv", &sol.trajectory.to_csv())?;
    let summary = Summary::new()
        .text("model", model_name(s))
        .text("neutral", s.neutral.as_ref().map_or("none", |n| n.convention().as_str()))
        .text("picard_iterations", sol.iterations)
        .num("last_gap", sol.gaps.last().copied().unwrap_or(0.0));
    ctx.out.write("summary.csv", &summary.0)
}

pub(super) fn gramian(ctx: &Context<'_>) -> Result<(), CliError> {
    let s = ctx.setup;
    let g = assemble(&s.system, &s.grid)?;
    ctx.out.write("W.csv", &matrix_csv(&g.total))?;
    for (name, m) in g.parts() {
        ctx.out.write(&format!("{name}.csv"), &matrix_csv(m))?;
    }
    let eig = g.eigenvalues();
    let mut e = String::from("index,eigenvalue\n");
    for (i, v) in eig.iter().enumerate() {
        let _ = writeln!(e, "{i},{}", fmt_f64(*v));
    }
    ctx.out.write("eigenvalues.csv", &e)?;

    let d = g.dim();
    let probes: Vec<DVector<f64>> = (0..d)
        .map(|i| DVector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 }))
        .collect();
    let report = a0_diagnostic(&g, &s.alphas, &probes, A0_DEFAULT_THRESHOLD)?;
    let mut a = String::from("alpha,probe,ratio\n");
    for (alpha, row) in report.alphas.iter().zip(&report.ratios) {
        for (k, r) in row.iter().enumerate() {
            let _ = writeln!(a, "{},{k},{}", fmt_f64(*alpha), fmt_f64(*r));
        }
    }
    ctx.out.write("a0.csv", &a)?;

    let summary = Summary::new()
        .text("model", model_name(s))
        .text("dim", d)
        .num("self_adjoint_defect", g.self_adjoint_defect(&g.total))
        .num("min_eigenvalue", eig.first().copied().unwrap_or(0.0))
        .num("max_eigenvalue", eig.last().copied().unwrap_or(0.0))
        .text("a0", report.flag());
    ctx.out.write("summary.csv", &summary.0)
}

fn synthesis_run(s: &Setup, g: &GramianSet, alpha: f64) -> crate::Result<SemilinearSynthesis> {
    match &s.neutral {
        Some(n) => neutral_synthesize(n, g, &s.grid, &s.target, alpha, &s.outer),
        None => semilinear_synthesize(&s.system, g, &s.grid, &s.target, alpha, &s.outer),
    }
}

fn variant_name(v: ControlVariant) -> &'static str {
    match v {
        ControlVariant::Adjoint => "adjoint",
        ControlVariant::PaperLiteral => "paper-literal",
    }
}

pub(super) fn synthesize(ctx: &Context<'_>) -> Result<(), CliError> {
    let s = ctx.setup;
    let g = assemble(&s.system, &s.grid)?;
    let out = synthesis_run(s, &g, s.alpha)?;
    let law = &out.law;

    let b = s.system.horizon();
    let mut u = String::from("t");
    for i in 0..s.system.control_dim() {
        let _ = write!(u, ",u{i}");
    }
    u.push('\n');
    for i in 0..s.samples {
        let t = b * i as f64 / (s.samples - 1) as f64;
        let _ = write!(u, "{}", fmt_f64(t));
        for x in law.continuous(t).iter() {
            let _ = write!(u, ",{}", fmt_f64(*x));
        }
        u.push('\n');
    }
    ctx.out.write("control_u.csv", &u)?;

    let mut v = String::from("k,time,component,value\n");
    for (k, (vk, imp)) in law.v.iter().zip(s.system.impulses()).enumerate() {
        for (c, x) in vk.iter().enumerate() {
            let _ = writeln!(v, "{},{},{c},{}", k + 1, fmt_f64(imp.time), fmt_f64(*x));
        }
    }
    ctx.out.write("control_v.csv", &v)?;

    let mut phi = String::from("component,value\n");
    for (c, x) in law.phi.iter().enumerate() {
        let _ = writeln!(phi, "{c},{}", fmt_f64(*x));
    }
    ctx.out.write("control_phi.csv", &phi)?;
    ctx.out.write("trajectory.csv", &out.trajectory.to_csv())?;

    let model = s.system.semigroup();
    let summary = Summary::new()
        .text("model", model_name(s))
        .num("alpha", s.alpha)
        .text("control", variant_name(s.outer.variant))
        .text("outer_iterations", out.outer_iterations)
        .num("terminal_error", model.norm(&(out.trajectory.terminal() - &s.target)))
        .num("predicted_error", out.predicted_error)
        .num("terminal_residual", out.terminal_residual);
    ctx.out.write("summary.csv", &summary.0)
}

struct VerifyRow {
    alpha: f64,
    residual: f64,
    relative: f64,
    measured: f64,
    predicted: f64,
}

fn verify_row(s: &Setup, g: &GramianSet, alpha: f64, frozen: Option<&SemilinearSolution>) -> crate::Result<VerifyRow> {
    let model = s.system.semigroup();
    if let Some(n) = s.neutral.as_ref().filter(|n| !n.sigma().is_zero()) {
        let out = neutral_synthesize(n, g, &s.grid, &s.target, alpha, &s.outer)?;
        let pn = model.norm(&out.moment.p);
        return Ok(VerifyRow {
            alpha,
            residual: out.terminal_residual,
            relative: if pn > 0.0 { out.terminal_residual / pn } else { out.terminal_residual },
            measured: model.norm(&(out.trajectory.terminal() - &s.target)),
            predicted: out.predicted_error,
        });
    }
    let sys = &s.system;
    let kappa = |t: f64| match frozen {
        Some(sol) => sys.nonlinearity().eval(t, &sol.trajectory.state_at(t)),
        None => sys.nonlinearity().known_forcing(t, sys.dim()),
    };
    let rep = verify_lemma31(sys, g, &kappa, &s.target, alpha, &s.grid, s.outer.variant)?;
    Ok(VerifyRow {
        alpha,
        residual: rep.residual,
        relative: rep.relative_residual,
        measured: model.norm(&rep.measured),
        predicted: model.norm(&rep.predicted),
    })
}

/// The terminal identity per α. A state-dependent nonlinearity is frozen
/// along the uncontrolled trajectory and enters as a known forcing.
pub(super) fn verify(ctx: &Context<'_>) -> Result<(), CliError> {
    let s = ctx.setup;
    let g = assemble(&s.system, &s.grid)?;
    let alphas = if ctx.alphas_given { s.alphas.clone() } else { vec![s.alpha] };
    let frozen = if s.system.nonlinearity().is_state_dependent() {
        let u = DVector::zeros(s.system.control_dim());
        Some(solve(&s.system, None, s, &s.grid, &u, &zero_v(&s.system))?)
    } else {
        None
    };
    let mut csv = String::from("alpha,residual,relative_residual,measured_error,predicted_error,status\n");
    let mut failed = 0;
    for &alpha in &alphas {
        let r = verify_row(s, &g, alpha, frozen.as_ref())?;
        let pass = r.relative <= VERIFY_RTOL;
        if !pass {
            failed += 1;
        }
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_f64(r.alpha),
            fmt_f64(r.residual),
            fmt_f64(r.relative),
            fmt_f64(r.measured),
            fmt_f64(r.predicted),
            if pass { "pass" } else { "fail" }
        );
    }
    if failed > 0 {
        log::warn!(
            "{failed} of {} rows exceed relative residual {VERIFY_RTOL:e} ({} control)",
            alphas.len(),
            variant_name(s.outer.variant)
        );
    }
    ctx.out.write("verify.csv", &csv)
}

pub(super) fn sweep(ctx: &Context<'_>) -> Result<(), CliError> {
    let s = ctx.setup;
    let g = assemble(&s.system, &s.grid)?;
    let opts = SweepOptions {
        mode: s.mode,
        outer: s.outer,
        jobs: ctx.jobs,
    };
    let table = match &s.neutral {
        Some(n) => neutral_alpha_sweep(n, &g, &s.grid, &s.target, &s.alphas, &opts)?,
        None => alpha_sweep(&s.system, &g, &s.grid, &s.target, &s.alphas, &opts)?,
    };
    for r in table.rows.iter().filter(|r| r.message.is_some()) {
        log::warn!("alpha {:e}: {}", r.alpha, r.message.as_deref().unwrap_or(""));
    }
    ctx.out.write("sweep.csv", &table.to_csv())
}

/// Trajectories with and without the impulses, each with the configured
/// continuous control and with `u = 0`.
pub(super) fn figures(ctx: &Context<'_>) -> Result<(), CliError> {
    let s = ctx.setup;
    let m = s.system.control_dim();
    let u_on = s
        .u
        .clone()
        .unwrap_or_else(|| DVector::from_fn(m, |i, _| if i == 0 { 1.0 } else { 0.0 }));
    let u_off = DVector::zeros(m);
    let v = s.v.clone().unwrap_or_else(|| {
        s.system
            .impulses()
            .iter()
            .map(|imp| DVector::from_element(imp.input.ncols(), 1.0))
            .collect()
    });

    let plain = s.system.without_impulses();
    let plain_grid = QuadratureGrid::new(&plain, s.grid.order(), &[s.grid.panel_counts().iter().sum()])?;
    let plain_neutral = match &s.neutral {
        Some(n) => Some(NeutralSystem::new(
            plain.clone(),
            n.sigma().clone(),
            n.history().clone(),
            n.convention(),
        )?),
        None => None,
    };

    let cases: [(&str, &ImpulsiveSystem, Option<&NeutralSystem>, &QuadratureGrid, &DVector<f64>, &[DVector<f64>]); 4] = [
        ("figure_impulsive_u.csv", &s.system, s.neutral.as_ref(), &s.grid, &u_on, &v),
        ("figure_impulsive_u0.csv", &s.system, s.neutral.as_ref(), &s.grid, &u_off, &v),
        ("figure_nonimpulsive_u.csv", &plain, plain_neutral.as_ref(), &plain_grid, &u_on, &[]),
        ("figure_nonimpulsive_u0.csv", &plain, plain_neutral.as_ref(), &plain_grid, &u_off, &[]),
    ];
    for (name, sys, neutral, grid, u, v) in cases {
        let sol = solve(sys, neutral, s, grid, u, v)?;
        ctx.out.write(name, &sol.trajectory.to_csv())?;
    }
    Ok(())
}
