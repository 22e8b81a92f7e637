//! Three-amplitude model of the inversion-about-average example and its
//! continuous limit.
//!
//! Time `t` counts diffusions: `t = 0` is `|s>`, `t = 1` is `D|s>`, and each
//! later unit is one `(I_t, I_s, D)` round. In this indexing the discrete
//! target amplitude tracks `1/2 - 1/2 cos(2 sqrt(2) t / sqrt(N))` with no
//! offset.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitudes of the target, the source, and each of the `N - 2` other states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub target: f64,
    pub source: f64,
    pub other: f64,
    pub dim: usize,
}

impl ReducedState {
    pub fn from_source(dim: usize) -> Self {
        Self {
            target: 0.0,
            source: 1.0,
            other: 0.0,
            dim,
        }
    }

    /// `D|s>`: the state at `t = 1`.
    pub fn after_first_diffusion(dim: usize) -> Self {
        let mut r = Self::from_source(dim);
        r.diffuse();
        r
    }

    /// Average amplitude over all `N` states.
    pub fn mean(&self) -> f64 {
        (self.target + self.source + (self.dim as f64 - 2.0) * self.other) / self.dim as f64
    }

    pub fn norm_sqr(&self) -> f64 {
        self.target * self.target
            + self.source * self.source
            + (self.dim as f64 - 2.0) * self.other * self.other
    }

    pub fn diffuse(&mut self) {
        let m2 = 2.0 * self.mean();
        self.target = m2 - self.target;
        self.source = m2 - self.source;
        self.other = m2 - self.other;
    }

    pub fn flip_source_and_target(&mut self) {
        self.target = -self.target;
        self.source = -self.source;
    }
}

/// One round: phase flips on `s` and `t`, then the diffusion.
pub fn reduced_step(rs: ReducedState) -> ReducedState {
    let mut next = rs;
    next.flip_source_and_target();
    next.diffuse();
    next
}

/// Index `k` holds the state after `k` diffusions, for `k = 0..=diffusions`.
pub fn reduced_trajectory(dim: usize, diffusions: u64) -> Vec<ReducedState> {
    let mut out = Vec::with_capacity(diffusions as usize + 1);
    out.push(ReducedState::from_source(dim));
    if diffusions == 0 {
        return out;
    }
    let mut r = ReducedState::after_first_diffusion(dim);
    out.push(r);
    for _ in 1..diffusions {
        r = reduced_step(r);
        out.push(r);
    }
    out
}

/// Angular frequency `2 sqrt(2) / sqrt(N)` of the continuous model.
pub fn angular_frequency(dim: usize) -> f64 {
    2.0 * SQRT_2 / (dim as f64).sqrt()
}

pub fn closed_form_target(t: f64, dim: usize) -> f64 {
    0.5 - 0.5 * (angular_frequency(dim) * t).cos()
}

/// `pi sqrt(N) / (2 sqrt(2))`: where the closed form reaches 1.
pub fn critical_iterations(dim: usize) -> f64 {
    PI * (dim as f64).sqrt() / (2.0 * SQRT_2)
}

/// Standard Grover count `pi sqrt(N) / 4`.
pub fn grover_iterations(dim: usize) -> f64 {
    PI * (dim as f64).sqrt() / 4.0
}

pub fn small_t_target(t: f64, dim: usize) -> f64 {
    2.0 * t * t / dim as f64
}

/// Largest `| |T(t)| - closed_form_target(t) |` of the discrete model over
/// integer `t` in `[0, critical_iterations(N)]`.
pub fn max_closed_form_deviation(dim: usize) -> f64 {
    let last = critical_iterations(dim).floor() as u64;
    reduced_trajectory(dim, last)
        .iter()
        .enumerate()
        .map(|(t, r)| (r.target.abs() - closed_form_target(t as f64, dim)).abs())
        .fold(0.0, f64::max)
}

/// Initial mean amplitude for the continuous model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMean {
    /// `A(0) = 0`; the solution is exactly the cosine closed form.
    #[default]
    Zero,
    /// `A(0) = 1/N`, the mean of `|s>`. Adds `(2 / (N w)) sin(w t)` to `T`.
    SourceMean,
}

impl InitialMean {
    pub fn value(self, dim: usize) -> f64 {
        match self {
            InitialMean::Zero => 0.0,
            InitialMean::SourceMean => 1.0 / dim as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeSample {
    pub t: f64,
    pub mean: f64,
    pub source: f64,
    pub target: f64,
}

/// Closed-form solution of the continuous system for either initial mean.
pub fn exact_continuous(t: f64, dim: usize, init: InitialMean) -> OdeSample {
    let w = angular_frequency(dim);
    let a0 = init.value(dim);
    let (sin, cos) = (w * t).sin_cos();
    // x = S - T satisfies x'' = -w^2 x with x(0) = 1, x'(0) = -4 A(0)
    let x = cos - 4.0 * a0 / w * sin;
    OdeSample {
        t,
        mean: w / 4.0 * sin + a0 * cos,
        source: 0.5 + 0.5 * x,
        target: 0.5 - 0.5 * x,
    }
}

fn derivative(y: [f64; 3], dim: usize) -> [f64; 3] {
    let [a, s, t] = y;
    let n = dim as f64;
    [2.0 * s / n - 2.0 * t / n, -2.0 * a, 2.0 * a]
}

fn axpy(y: [f64; 3], h: f64, k: [f64; 3]) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

fn rk4_step(y: [f64; 3], h: f64, dim: usize) -> [f64; 3] {
    let k1 = derivative(y, dim);
    let k2 = derivative(axpy(y, h / 2.0, k1), dim);
    let k3 = derivative(axpy(y, h / 2.0, k2), dim);
    let k4 = derivative(axpy(y, h, k3), dim);
    let mut out = y;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Fixed-step classical Runge-Kutta integration of
/// `A' = 2S/N - 2T/N`, `S' = -2A`, `T' = 2A` from `(A(0), 1, 0)`.
/// The final step is shortened so the last sample lands on `t_max`.
pub fn integrate_continuous(
    dim: usize,
    t_max: f64,
    dt: f64,
    init: InitialMean,
) -> Result<Vec<OdeSample>> {
    if dt.is_nan() || dt <= 0.0 || !t_max.is_finite() || t_max < dt {
        return Err(Error::OutOfRange(format!("dt = {dt}, t_max = {t_max}")));
    }
    if dim < 2 {
        return Err(Error::BadDimension(dim));
    }
    let steps = (t_max / dt - 1e-9).ceil() as u64;
    let mut y = [init.value(dim), 1.0, 0.0];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(OdeSample {
        t,
        mean: y[0],
        source: y[1],
        target: y[2],
    });
    for k in 1..=steps {
        let next_t = if k == steps { t_max } else { k as f64 * dt };
        y = rk4_step(y, next_t - t, dim);
        t = next_t;
        out.push(OdeSample {
            t,
            mean: y[0],
            source: y[1],
            target: y[2],
        });
    }
    Ok(out)
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,A,S,T,closed_form_T,abs_err";

pub fn trajectory_csv(samples: &[OdeSample], dim: usize) -> String {
    let mut out = String::from(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for s in samples {
        let cf = closed_form_target(s.t, dim);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.t,
            s.mean,
            s.source,
            s.target,
            cf,
            (s.target - cf).abs()
        );
    }
    out
}

/// Integer window `[2, max(4, floor(0.05 sqrt N))]` on which `T(t)` is still
/// in its quadratic regime.
pub fn early_window(dim: usize) -> (u64, u64) {
    let hi = (0.05 * (dim as f64).sqrt()).floor() as u64;
    (2, hi.max(4))
}

/// Least-squares slope of `ln y` against `ln x`. Needs two or more points
/// with positive coordinates.
pub fn fit_power_law(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionBudget {
    /// `ln(1/delta) / ln 4`.
    pub levels: f64,
    /// `2^levels = 1/sqrt(delta)`.
    pub queries: f64,
}

pub fn recursion_budget(delta: f64) -> Result<RecursionBudget> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange(format!("delta = {delta} must lie in (0, 1)")));
    }
    let levels = (1.0 / delta).ln() / 4f64.ln();
    Ok(RecursionBudget {
        levels,
        queries: 2f64.powf(levels),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub name: String,
    pub value: f64,
    pub formula_id: String,
}

impl Prediction {
    fn new(name: &str, value: f64, formula_id: &str) -> Self {
        debug_assert!(value.is_finite());
        Self {
            name: name.into(),
            value,
            formula_id: formula_id.into(),
        }
    }
}

/// Analytic predictions for dimension `N`, keyed by formula id.
pub fn predictions(dim: usize) -> BTreeMap<String, Prediction> {
    let mut out = BTreeMap::new();
    let items = [
        Prediction::new("superlinear peak iterations", critical_iterations(dim), "critical_iterations"),
        Prediction::new("grover peak iterations", grover_iterations(dim), "grover_iterations"),
        Prediction::new(
            "superlinear / grover iteration ratio",
            critical_iterations(dim) / grover_iterations(dim),
            "sqrt2_overhead",
        ),
        Prediction::new("early-time coefficient of t^2", 2.0 / dim as f64, "small_t_coefficient"),
        Prediction::new("angular frequency", angular_frequency(dim), "angular_frequency"),
        Prediction::new("single diffusion U_ts", 2.0 / dim as f64, "iaa_u_ts"),
        Prediction::new("single diffusion U_ss", -1.0 + 2.0 / dim as f64, "iaa_u_ss"),
    ];
    for p in items {
        out.insert(p.formula_id.clone(), p);
    }
    out
}
