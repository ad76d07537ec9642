//! Time-dependent loading programs: body force, Neumann traction, and
//! external boundary temperature, each a sum of (time signal x spatial
//! profile) terms, plus the per-slab time averages consumed by the schemes.
//!
//! Slab averages use composite 5-point Gauss quadrature, splitting each slab
//! at signal breakpoints; the rule is exact for polynomials of degree <= 9,
//! hence exact on every polynomial or piecewise-linear preset.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::{BoundaryPart, Grid, VectorField};

/// 5-point Gauss-Legendre nodes and weights on [-1, 1].
pub const GAUSS5: [(f64, f64); 5] = [
    (-0.906179845938664, 0.23692688505618908),
    (-0.5384693101056831, 0.47862867049936647),
    (0.0, 0.5688888888888889),
    (0.5384693101056831, 0.47862867049936647),
    (0.906179845938664, 0.23692688505618908),
];

/// Average of `f` over [a, b] by composite 5-point Gauss, honoring interior
/// breakpoints of piecewise-defined signals.
pub fn gauss_average(a: f64, b: f64, breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    debug_assert!(b > a);
    let mut cuts = vec![a];
    for &t in breaks {
        if t > a && t < b {
            cuts.push(t);
        }
    }
    cuts.push(b);
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        for (x, wt) in GAUSS5 {
            acc += wt * half * f(mid + half * x);
        }
    }
    acc / (b - a)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TimeSignal {
    Constant { value: f64 },
    /// value = slope * t.
    Ramp { slope: f64 },
    /// value = amp * sin(omega t + phase).
    Sinusoid {
        amp: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// value on [t0, t1], zero outside.
    Pulse { t0: f64, t1: f64, value: f64 },
    /// Piecewise-linear interpolation of (t, v) pairs, clamped outside.
    Table { points: Vec<[f64; 2]> },
}

impl TimeSignal {
    pub fn validate(&self) -> Result<()> {
        match self {
            TimeSignal::Pulse { t0, t1, .. } if t1 <= t0 => Err(CoreError::InvalidConfig(
                format!("pulse needs t1 > t0, got [{t0}, {t1}]"),
            )),
            TimeSignal::Table { points } => {
                if points.len() < 2 {
                    return Err(CoreError::InvalidConfig(
                        "time table needs at least 2 points".into(),
                    ));
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(CoreError::InvalidConfig(
                        "time table abscissae must strictly increase".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeSignal::Constant { value } => *value,
            TimeSignal::Ramp { slope } => slope * t,
            TimeSignal::Sinusoid { amp, omega, phase } => amp * (omega * t + phase).sin(),
            TimeSignal::Pulse { t0, t1, value } => {
                if t >= *t0 && t <= *t1 {
                    *value
                } else {
                    0.0
                }
            }
            TimeSignal::Table { points } => {
                if t <= points[0][0] {
                    return points[0][1];
                }
                if t >= points[points.len() - 1][0] {
                    return points[points.len() - 1][1];
                }
                let i = points.partition_point(|p| p[0] <= t);
                let (p0, p1) = (points[i - 1], points[i]);
                let s = (t - p0[0]) / (p1[0] - p0[0]);
                p0[1] + s * (p1[1] - p0[1])
            }
        }
    }

    /// Interior non-smooth points (where composite quadrature must split).
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            TimeSignal::Pulse { t0, t1, .. } => vec![*t0, *t1],
            TimeSignal::Table { points } => points.iter().map(|p| p[0]).collect(),
            _ => Vec::new(),
        }
    }

    /// Average over the k-th slab [(k-1) tau, k tau].
    pub fn slab_average(&self, k: usize, tau: f64) -> f64 {
        let a = (k - 1) as f64 * tau;
        let b = k as f64 * tau;
        gauss_average(a, b, &self.breakpoints(), |t| self.eval(t))
    }

    /// Lower bound of the signal over [0, t_end] (exact for all presets:
    /// extrema lie at endpoints, breakpoints, or sinusoid troughs).
    pub fn min_on(&self, t_end: f64) -> f64 {
        match self {
            TimeSignal::Constant { value } => *value,
            TimeSignal::Ramp { slope } => (slope * t_end).min(0.0),
            TimeSignal::Sinusoid { amp, omega, phase } => {
                let mut m = (phase.sin() * amp).min((omega * t_end + phase).sin() * amp);
                // stationary points of sin at omega t + phase = pi/2 + n pi
                if *omega != 0.0 {
                    let mut n = ((omega * 0.0 + phase) / std::f64::consts::PI - 0.5).ceil() as i64;
                    loop {
                        let t = (std::f64::consts::PI * (0.5 + n as f64) - phase) / omega;
                        if t > t_end.max(0.0) {
                            break;
                        }
                        if t >= 0.0 {
                            m = m.min(amp * (omega * t + phase).sin());
                        }
                        n += 1;
                    }
                }
                m
            }
            TimeSignal::Pulse { value, .. } => value.min(0.0),
            TimeSignal::Table { points } => points
                .iter()
                .map(|p| p[1])
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// Separable spatial weight for bulk loads on the reference domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpatialProfile {
    Uniform,
    /// sin(pi x / Lx) sin(pi y / Ly): vanishes on the whole boundary.
    Bump,
}

impl SpatialProfile {
    pub fn eval(&self, g: &Grid, x: f64, y: f64) -> f64 {
        match self {
            SpatialProfile::Uniform => 1.0,
            SpatialProfile::Bump => {
                (std::f64::consts::PI * x / g.lx).sin() * (std::f64::consts::PI * y / g.ly).sin()
            }
        }
    }
}

/// One bulk body-force term f(t, x) = signal(t) * profile(x) * direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyLoad {
    pub direction: [f64; 2],
    pub signal: TimeSignal,
    #[serde(default = "uniform")]
    pub profile: SpatialProfile,
}

fn uniform() -> SpatialProfile {
    SpatialProfile::Uniform
}

/// One traction term on the Neumann boundary, spatially uniform.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionLoad {
    pub direction: [f64; 2],
    pub signal: TimeSignal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadingProgram {
    #[serde(default)]
    pub body: Vec<BodyLoad>,
    #[serde(default)]
    pub traction: Vec<TractionLoad>,
    /// External temperature on the whole boundary, spatially uniform.
    #[serde(default = "zero_signal")]
    pub theta_flat: TimeSignal,
}

fn zero_signal() -> TimeSignal {
    TimeSignal::Constant { value: 0.0 }
}

impl Default for LoadingProgram {
    fn default() -> Self {
        LoadingProgram {
            body: Vec::new(),
            traction: Vec::new(),
            theta_flat: zero_signal(),
        }
    }
}

/// Slab-averaged loads for one time step.
#[derive(Debug, Clone)]
pub struct SlabLoads {
    /// Nodal body-force values f^k.
    pub f: VectorField,
    /// Traction g^k at Neumann edge midpoints, in `edges_of(Neumann)` order.
    pub g: Vec<[f64; 2]>,
    /// External temperature average, spatially uniform on the boundary.
    pub theta_b: f64,
}

impl LoadingProgram {
    pub fn validate(&self, t_end: f64) -> Result<()> {
        for b in &self.body {
            b.signal.validate()?;
        }
        for t in &self.traction {
            t.signal.validate()?;
        }
        self.theta_flat.validate()?;
        let min = self.theta_flat.min_on(t_end);
        if min < 0.0 {
            return Err(CoreError::InvalidConfig(format!(
                "external temperature must stay nonnegative, found minimum {min}"
            )));
        }
        Ok(())
    }

    pub fn slab_loads(&self, g: &Grid, k: usize, tau: f64) -> SlabLoads {
        let mut f = VectorField::zeros(g);
        for term in &self.body {
            let avg = term.signal.slab_average(k, tau);
            if avg == 0.0 {
                continue;
            }
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let (x, y) = g.node_pos(i, j);
                    let w = avg * term.profile.eval(g, x, y);
                    let n = g.node(i, j);
                    f.0[n][0] += w * term.direction[0];
                    f.0[n][1] += w * term.direction[1];
                }
            }
        }
        let nneu = g.edges_of(BoundaryPart::Neumann).count();
        let mut gvals = vec![[0.0; 2]; nneu];
        for term in &self.traction {
            let avg = term.signal.slab_average(k, tau);
            for gv in gvals.iter_mut() {
                gv[0] += avg * term.direction[0];
                gv[1] += avg * term.direction[1];
            }
        }
        SlabLoads {
            f,
            g: gvals,
            theta_b: self.theta_flat.slab_average(k, tau),
        }
    }

    /// Loads evaluated at one instant (no slab averaging); same layout as
    /// `slab_loads`.
    pub fn instant_loads(&self, g: &Grid, t: f64) -> SlabLoads {
        let mut f = VectorField::zeros(g);
        for term in &self.body {
            let v = term.signal.eval(t);
            if v == 0.0 {
                continue;
            }
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let (x, y) = g.node_pos(i, j);
                    let w = v * term.profile.eval(g, x, y);
                    let n = g.node(i, j);
                    f.0[n][0] += w * term.direction[0];
                    f.0[n][1] += w * term.direction[1];
                }
            }
        }
        let nneu = g.edges_of(BoundaryPart::Neumann).count();
        let mut gvals = vec![[0.0; 2]; nneu];
        for term in &self.traction {
            let v = term.signal.eval(t);
            for gv in gvals.iter_mut() {
                gv[0] += v * term.direction[0];
                gv[1] += v * term.direction[1];
            }
        }
        SlabLoads {
            f,
            g: gvals,
            theta_b: self.theta_flat.eval(t),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.body.is_empty()
            && self.traction.is_empty()
            && matches!(self.theta_flat, TimeSignal::Constant { value } if value == 0.0)
    }
}
