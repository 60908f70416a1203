use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::operator::ImpulsiveSystem;

pub const DEFAULT_ORDER: usize = 8;
pub const DEFAULT_PANELS: usize = 16;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One composite panel `[start, end]` with its mapped rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub start: f64,
    pub end: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Global index of the first node of this panel.
    pub first_node: usize,
}

impl Panel {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

/// Panels covering one inter-impulse subinterval.
#[derive(Debug, Clone, PartialEq)]
pub struct Subinterval {
    pub start: f64,
    pub end: f64,
    pub panels: Vec<Panel>,
}

/// Composite Gauss–Legendre rule with panels aligned to impulse instants.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    order: usize,
    subintervals: Vec<Subinterval>,
    node_count: usize,
}

/// A quadrature node together with its location in the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub index: usize,
    pub subinterval: usize,
    pub time: f64,
    pub weight: f64,
}

impl QuadratureGrid {
    /// Same panel count on every subinterval.
    pub fn uniform(system: &ImpulsiveSystem, order: usize, panels: usize) -> Result<Self> {
        Self::new(system, order, &vec![panels; system.impulse_count() + 1])
    }

    pub fn default_for(system: &ImpulsiveSystem) -> Result<Self> {
        Self::uniform(system, DEFAULT_ORDER, DEFAULT_PANELS)
    }

    pub fn new(system: &ImpulsiveSystem, order: usize, panels: &[usize]) -> Result<Self> {
        Self::from_breakpoints(&system.breakpoints(), order, panels)
    }

    pub fn from_breakpoints(breaks: &[f64], order: usize, panels: &[usize]) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("quadrature order must be >= 1".into()));
        }
        if breaks.len() < 2 || panels.len() != breaks.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "need one panel count per subinterval ({} breakpoints, {} counts)",
                breaks.len(),
                panels.len()
            )));
        }
        if panels.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument("panel counts must be >= 1".into()));
        }
        let (ref_nodes, ref_weights) = gauss_legendre(order);
        let mut subintervals = Vec::with_capacity(panels.len());
        let mut next = 0;
        for (w, &count) in breaks.windows(2).zip(panels) {
            let (a, b) = (w[0], w[1]);
            if !(b > a) {
                return Err(Error::InvalidArgument("breakpoints must increase".into()));
            }
            let h = (b - a) / count as f64;
            let mut list = Vec::with_capacity(count);
            for k in 0..count {
                let start = a + h * k as f64;
                let end = if k + 1 == count { b } else { a + h * (k + 1) as f64 };
                let half = 0.5 * (end - start);
                let mid = 0.5 * (end + start);
                list.push(Panel {
                    start,
                    end,
                    nodes: ref_nodes.iter().map(|x| mid + half * x).collect(),
                    weights: ref_weights.iter().map(|w| half * w).collect(),
                    first_node: next,
                });
                next += order;
            }
            subintervals.push(Subinterval {
                start: a,
                end: b,
                panels: list,
            });
        }
        Ok(Self {
            order,
            subintervals,
            node_count: next,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn subintervals(&self) -> &[Subinterval] {
        &self.subintervals
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn panel_counts(&self) -> Vec<usize> {
        self.subintervals.iter().map(|s| s.panels.len()).collect()
    }

    /// Same layout with every panel count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let mut breaks: Vec<f64> = self.subintervals.iter().map(|s| s.start).collect();
        breaks.push(self.subintervals.last().map(|s| s.end).unwrap_or(0.0));
        let counts: Vec<usize> = self.panel_counts().iter().map(|c| c * factor).collect();
        Self::from_breakpoints(&breaks, self.order, &counts)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        self.subintervals.iter().enumerate().flat_map(|(si, sub)| {
            sub.panels.iter().flat_map(move |p| {
                p.nodes
                    .iter()
                    .zip(&p.weights)
                    .enumerate()
                    .map(move |(j, (&t, &w))| Node {
                        index: p.first_node + j,
                        subinterval: si,
                        time: t,
                        weight: w,
                    })
            })
        })
    }

    /// Checks that subinterval boundaries coincide with the system's breakpoints.
    pub fn check_against(&self, system: &ImpulsiveSystem) -> Result<()> {
        let breaks = system.breakpoints();
        let ok = breaks.len() == self.subintervals.len() + 1
            && self
                .subintervals
                .iter()
                .zip(breaks.windows(2))
                .all(|(s, w)| s.start == w[0] && s.end == w[1]);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "quadrature grid is inconsistent with the impulse schedule".into(),
            ))
        }
    }
}
