use std::fmt::Write as _;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::interp;

/// Which one-sided value a sample represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Cont,
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Cont => "cont",
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cont" => Some(Side::Cont),
            "left" => Some(Side::Left),
            "right" => Some(Side::Right),
            _ => None,
        }
    }
}

/// Samples on one closed subinterval. The first sample is the right limit at
/// the opening instant and the last the left limit at the closing instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl Segment {
    pub fn start(&self) -> f64 {
        self.times[0]
    }
    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// Piecewise record of a state trajectory with jumps between segments.
///
/// Queries at an impulse instant return the left limit; use
/// [`Trajectory::right_limit`] for the post-jump value.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    segments: Vec<Segment>,
}

impl Trajectory {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidArgument("trajectory needs a segment".into()));
        }
        let dim = segments[0].states.first().map(|s| s.len()).unwrap_or(0);
        for seg in &segments {
            if seg.times.is_empty() || seg.times.len() != seg.states.len() {
                return Err(Error::InvalidArgument("malformed trajectory segment".into()));
            }
            if seg.times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidArgument(
                    "segment sample times must increase".into(),
                ));
            }
            for s in &seg.states {
                if s.len() != dim {
                    return Err(Error::DimensionMismatch {
                        context: "trajectory sample",
                        expected: dim,
                        found: s.len(),
                    });
                }
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("trajectory sample"));
                }
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.segments[0].states[0].len()
    }

    pub fn impulse_count(&self) -> usize {
        self.segments.len() - 1
    }

    pub fn impulse_times(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| s.start()).collect()
    }

    pub fn terminal(&self) -> &DVector<f64> {
        self.segments.last().unwrap().states.last().unwrap()
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.segments[0].states[0]
    }

    /// Post-jump state at the `k`-th impulse (0-based).
    pub fn right_limit(&self, k: usize) -> &DVector<f64> {
        &self.segments[k + 1].states[0]
    }

    /// Pre-jump state at the `k`-th impulse (0-based).
    pub fn left_limit(&self, k: usize) -> &DVector<f64> {
        self.segments[k].states.last().unwrap()
    }

    /// State at `t`, left-continuous at impulse instants.
    pub fn state_at(&self, t: f64) -> DVector<f64> {
        self.eval(t, Side::Left)
    }

    /// State at `t` with an explicit one-sided convention at impulse instants.
    pub fn eval(&self, t: f64, side: Side) -> DVector<f64> {
        let idx = match side {
            Side::Right => self
                .segments
                .iter()
                .rposition(|s| s.start() <= t)
                .unwrap_or(0),
            Side::Left | Side::Cont => self
                .segments
                .iter()
                .position(|s| s.end() >= t)
                .unwrap_or(self.segments.len() - 1),
        };
        let seg = &self.segments[idx];
        interp::cubic(&seg.times, &seg.states, t)
    }

    /// Every sample in time order with its side label.
    pub fn samples(&self) -> impl Iterator<Item = (f64, Side, &DVector<f64>)> + '_ {
        let last = self.segments.len() - 1;
        self.segments.iter().enumerate().flat_map(move |(k, seg)| {
            let n = seg.times.len();
            seg.times
                .iter()
                .zip(&seg.states)
                .enumerate()
                .map(move |(j, (&t, x))| {
                    let side = if j == 0 && k > 0 {
                        Side::Right
                    } else if j + 1 == n && k < last {
                        Side::Left
                    } else {
                        Side::Cont
                    };
                    (t, side, x)
                })
        })
    }

    /// Maximum over this trajectory's samples of `norm(self - other)`, the
    /// other trajectory being interpolated at matching sides.
    pub fn sup_distance(&self, other: &Trajectory, norm: impl Fn(&DVector<f64>) -> f64) -> f64 {
        self.samples()
            .map(|(t, side, x)| norm(&(x - other.eval(t, side))))
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self, norm: impl Fn(&DVector<f64>) -> f64) -> f64 {
        self.samples().map(|(_, _, x)| norm(x)).fold(0.0, f64::max)
    }

    pub fn map_states(&self, f: impl Fn(f64, &DVector<f64>) -> DVector<f64>) -> Result<Self> {
        let segments = self
            .segments
            .iter()
            .map(|seg| Segment {
                times: seg.times.clone(),
                states: seg.times.iter().zip(&seg.states).map(|(&t, x)| f(t, x)).collect(),
            })
            .collect();
        Self::new(segments)
    }

    /// CSV with header `t,side,x0,...` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,side");
        for i in 0..self.dim() {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (t, side, x) in self.samples() {
            let _ = write!(out, "{},{}", fmt_f64(t), side.as_str());
            for v in x.iter() {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty trajectory CSV".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[0] != "t" || cols[1] != "side" {
            return Err(Error::InvalidArgument(format!(
                "unexpected trajectory header '{header}'"
            )));
        }
        let dim = cols.len() - 2;
        let mut segments = vec![Segment {
            times: vec![],
            states: vec![],
        }];
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 2 {
                return Err(Error::InvalidArgument(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    dim + 2
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("bad number '{s}' on row {}", lineno + 2))
                })
            };
            let t = parse(fields[0])?;
            let side = Side::parse(fields[1]).ok_or_else(|| {
                Error::InvalidArgument(format!("bad side '{}' on row {}", fields[1], lineno + 2))
            })?;
            let x = DVector::from_vec(
                fields[2..].iter().map(|s| parse(s)).collect::<Result<Vec<f64>>>()?,
            );
            if side == Side::Right {
                segments.push(Segment {
                    times: vec![],
                    states: vec![],
                });
            }
            let seg = segments.last_mut().unwrap();
            seg.times.push(t);
            seg.states.push(x);
        }
        Self::new(segments)
    }
}

/// Lossless float formatting used by every CSV writer.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
