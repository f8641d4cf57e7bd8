//! Fixed-step integration of delay equations of Nicholson type.
//!
//! The scheme is classical four-stage Runge–Kutta. Delayed arguments are
//! read from a cubic Hermite interpolant through the stored nodes
//! `(t_i, x_i, x'_i)`, or from the history for `t ≤ t0`. A delayed argument
//! falling inside the step being computed is read from a provisional segment
//! over that step, and the step is repeated until the provisional end point
//! agrees with the result.

use std::io::{self, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::expr::EvalError;
use crate::model::{check_admissible, History, NicholsonModel};

#[derive(Debug, Error)]
pub enum DdeError {
    #[error("t = {t} is outside the covered range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("solution lost positivity near t = {t} even with step {step}")]
    Positivity { t: f64, step: f64 },
    #[error("fixed-point correction did not converge in the step starting at t = {t}")]
    FixedPoint { t: f64 },
    #[error("inadmissible history: {0}")]
    History(String),
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Coefficients of one term at a given time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TermValues {
    pub p: f64,
    pub a: f64,
    pub tau: f64,
    pub sigma: f64,
}

/// An equation `x' = Σ p_j x(t−τ_j) e^{−a_j x(t−σ_j)} − δ x` whose
/// coefficients can be evaluated pointwise.
pub trait DelayEquation: Sync {
    fn term_count(&self) -> usize;
    fn start_time(&self) -> f64;
    /// Upper bound for every delay.
    fn max_delay(&self) -> f64;
    /// Fills `out` with the term coefficients at `t` and returns `δ(t)`.
    fn coefficients(&self, t: f64, out: &mut [TermValues]) -> Result<f64, DdeError>;
}

impl DelayEquation for NicholsonModel {
    fn term_count(&self) -> usize {
        NicholsonModel::term_count(self)
    }

    fn start_time(&self) -> f64 {
        self.t0()
    }

    fn max_delay(&self) -> f64 {
        self.tau_bound()
    }

    fn coefficients(&self, t: f64, out: &mut [TermValues]) -> Result<f64, DdeError> {
        for (slot, term) in out.iter_mut().zip(self.terms()) {
            *slot = TermValues {
                p: term.p.eval(t)?,
                a: term.a.eval(t)?,
                tau: term.tau.eval(t)?,
                sigma: term.sigma.eval(t)?,
            };
        }
        Ok(self.delta().eval(t)?)
    }
}

/// Evaluates the right-hand side given `δ`, `x(t)` and the delayed value
/// for each delay.
fn combine(
    delta: f64,
    x: f64,
    terms: &[TermValues],
    mut delayed: impl FnMut(f64) -> Result<f64, DdeError>,
) -> Result<f64, DdeError> {
    let mut acc = -delta * x;
    for term in terms {
        let xt = delayed(term.tau)?;
        let xs = delayed(term.sigma)?;
        acc += term.p * xt * (-term.a * xs).exp();
    }
    Ok(acc)
}

/// Right-hand side at `t`, with `lookup(s)` returning `x(s)` for `s ≤ t`.
pub fn rhs<E: DelayEquation + ?Sized>(
    eq: &E,
    t: f64,
    mut lookup: impl FnMut(f64) -> Result<f64, DdeError>,
) -> Result<f64, DdeError> {
    let mut terms = vec![TermValues::default(); eq.term_count()];
    let delta = eq.coefficients(t, &mut terms)?;
    let x = lookup(t)?;
    combine(delta, x, &terms, |d| lookup(t - d))
}

/// Cubic Hermite interpolant on `[t0, t1]` evaluated at `t`. Exact at the
/// end points.
#[inline]
pub fn hermite_value(t0: f64, x0: f64, m0: f64, t1: f64, x1: f64, m1: f64, t: f64) -> f64 {
    if t == t0 {
        return x0;
    }
    if t == t1 {
        return x1;
    }
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * x0
        + (s3 - 2.0 * s2 + s) * h * m0
        + (-2.0 * s3 + 3.0 * s2) * x1
        + (s3 - s2) * h * m1
}

/// Derivative of [`hermite_value`] with respect to `t`.
#[inline]
pub fn hermite_slope(t0: f64, x0: f64, m0: f64, t1: f64, x1: f64, m1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    (6.0 * s2 - 6.0 * s) * (x0 - x1) / h + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (3.0 * s2 - 2.0 * s) * m1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Local step refinements `h/2^k` tried before a positivity failure.
    pub max_halvings: u32,
    /// Relative agreement required of the fixed-point correction.
    pub fixed_point_tol: f64,
    pub fixed_point_iterations: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            max_halvings: 6,
            fixed_point_tol: 1e-12,
            fixed_point_iterations: 30,
        }
    }
}

/// Default step of the integrator.
pub const DEFAULT_STEP: f64 = 1e-2;

/// A computed solution: history on `[t0 − τ, t0]` and nodes on `[t0, t_end]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    t0: f64,
    tau: f64,
    history: Arc<dyn History>,
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Trajectory {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn history(&self) -> &Arc<dyn History> {
        &self.history
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory has a node at t0")
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("trajectory has a node at t0")
    }

    fn slack(&self) -> f64 {
        1e-9 * self.tau.max(self.end_time().abs()).max(1.0)
    }

    fn check_range(&self, t: f64) -> Result<(), DdeError> {
        let lo = self.t0 - self.tau;
        let hi = self.end_time();
        if t < lo - self.slack() || t > hi + self.slack() || t.is_nan() {
            return Err(DdeError::OutOfRange { t, lo, hi });
        }
        Ok(())
    }

    /// `x(t)` for `t ∈ [t0 − τ, t_end]`; exact at nodes.
    pub fn eval_at(&self, t: f64) -> Result<f64, DdeError> {
        self.check_range(t)?;
        Ok(self.value_unchecked(t)?)
    }

    /// `x'(t)`; node slopes at nodes, the history slope before `t0`.
    pub fn derivative_at(&self, t: f64) -> Result<f64, DdeError> {
        self.check_range(t)?;
        if t < self.t0 {
            return Ok(self.history.slope(t - self.t0)?);
        }
        let i = self.segment(t);
        if t == self.times[i] {
            return Ok(self.slopes[i]);
        }
        Ok(hermite_slope(
            self.times[i],
            self.values[i],
            self.slopes[i],
            self.times[i + 1],
            self.values[i + 1],
            self.slopes[i + 1],
            t,
        ))
    }

    /// Index of the segment `[t_i, t_{i+1}]` containing `t ≥ t0`.
    fn segment(&self, t: f64) -> usize {
        let n = self.times.len();
        if n == 1 {
            return 0;
        }
        let i = self.times.partition_point(|&s| s <= t);
        i.clamp(1, n - 1) - 1
    }

    fn value_unchecked(&self, t: f64) -> Result<f64, EvalError> {
        if t < self.t0 {
            return self.history.value(t - self.t0);
        }
        let i = self.segment(t);
        if t == self.times[i] || self.times.len() == 1 {
            return Ok(self.values[i]);
        }
        Ok(hermite_value(
            self.times[i],
            self.values[i],
            self.slopes[i],
            self.times[i + 1],
            self.values[i + 1],
            self.slopes[i + 1],
            t,
        ))
    }

    /// Node minimum and maximum over `t ≥ from`.
    pub fn tail_extrema(&self, from: f64) -> (f64, f64) {
        let start = self.times.partition_point(|&s| s < from).min(self.len() - 1);
        self.values[start..]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Writes `t,x` rows for every `stride`-th node (and the last one) with
    /// 17 significant digits.
    pub fn write_csv(&self, mut out: impl Write, stride: usize) -> io::Result<()> {
        let stride = stride.max(1);
        writeln!(out, "t,x")?;
        let last = self.len() - 1;
        for i in (0..self.len()).filter(|i| i % stride == 0 || *i == last) {
            writeln!(out, "{:.16e},{:.16e}", self.times[i], self.values[i])?;
        }
        Ok(())
    }
}

/// Provisional Hermite segment over the step being computed.
#[derive(Clone, Copy)]
struct Provisional {
    t0: f64,
    x0: f64,
    m0: f64,
    t1: f64,
    x1: f64,
    m1: f64,
}

impl Provisional {
    fn eval(&self, t: f64) -> f64 {
        hermite_value(self.t0, self.x0, self.m0, self.t1, self.x1, self.m1, t)
    }
}

struct Stepper<'a, E: ?Sized> {
    eq: &'a E,
    traj: Trajectory,
    buf: Vec<TermValues>,
    opts: IntegrateOptions,
}

impl<E: DelayEquation + ?Sized> Stepper<'_, E> {
    /// `f(s, x)` with delayed values from the stored past, the stage value,
    /// or the provisional segment; `inside` records use of the latter.
    fn slope(
        &mut self,
        s: f64,
        x: f64,
        prov: &Provisional,
        inside: &mut bool,
    ) -> Result<f64, DdeError> {
        let delta = self.eq.coefficients(s, &mut self.buf)?;
        let traj = &self.traj;
        let tn = prov.t0;
        combine(delta, x, &self.buf, |d| {
            let u = s - d;
            if u >= s {
                Ok(x)
            } else if u <= tn {
                Ok(traj.value_unchecked(u)?)
            } else {
                *inside = true;
                Ok(prov.eval(u))
            }
        })
    }

    /// One RK4 step of size `h` from the last node; returns the new node
    /// value and slope without storing them.
    fn step(&mut self, h: f64) -> Result<(f64, f64), DdeError> {
        let n = self.traj.len() - 1;
        let tn = self.traj.times[n];
        let xn = self.traj.values[n];
        let k1 = self.traj.slopes[n];
        let t1 = tn + h;
        let (mut x1, mut m1) = if n == 0 {
            (xn + h * k1, k1)
        } else {
            let (ta, xa, ma) = (self.traj.times[n - 1], self.traj.values[n - 1], self.traj.slopes[n - 1]);
            (
                hermite_value(ta, xa, ma, tn, xn, k1, t1),
                hermite_slope(ta, xa, ma, tn, xn, k1, t1),
            )
        };
        for _ in 0..self.opts.fixed_point_iterations.max(1) {
            let prov = Provisional { t0: tn, x0: xn, m0: k1, t1, x1, m1 };
            let mut inside = false;
            let half = tn + 0.5 * h;
            let k2 = self.slope(half, xn + 0.5 * h * k1, &prov, &mut inside)?;
            let k3 = self.slope(half, xn + 0.5 * h * k2, &prov, &mut inside)?;
            let k4 = self.slope(t1, xn + h * k3, &prov, &mut inside)?;
            let x_new = xn + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            let prov_new = Provisional { x1: x_new, ..prov };
            let m_new = self.slope(t1, x_new, &prov_new, &mut inside)?;
            if !inside {
                return Ok((x_new, m_new));
            }
            let change = (x_new - x1).abs() + h * (m_new - m1).abs();
            x1 = x_new;
            m1 = m_new;
            if change <= self.opts.fixed_point_tol * x_new.abs().max(f64::MIN_POSITIVE) {
                return Ok((x1, m1));
            }
        }
        Err(DdeError::FixedPoint { t: tn })
    }

    fn push(&mut self, t: f64, x: f64, m: f64) {
        self.traj.times.push(t);
        self.traj.values.push(x);
        self.traj.slopes.push(m);
    }

    fn truncate(&mut self, len: usize) {
        self.traj.times.truncate(len);
        self.traj.values.truncate(len);
        self.traj.slopes.truncate(len);
    }

    /// Advances to `target`, refining the step locally if a node would
    /// become nonpositive or the correction for short delays does not
    /// settle.
    fn advance(&mut self, target: f64) -> Result<(), DdeError> {
        let start = self.traj.end_time();
        let len = self.traj.len();
        let mut failure = None;
        for k in 0..=self.opts.max_halvings {
            let pieces = 1usize << k;
            let h = (target - start) / pieces as f64;
            let mut ok = true;
            for i in 1..=pieces {
                let t = if i == pieces { target } else { start + h * i as f64 };
                let h_i = t - self.traj.end_time();
                let (x, m) = match self.step(h_i) {
                    Err(e @ DdeError::FixedPoint { .. }) => {
                        failure = Some(e);
                        ok = false;
                        break;
                    }
                    r => r?,
                };
                if !(x > 0.0 && x.is_finite() && m.is_finite()) {
                    failure = None;
                    ok = false;
                    break;
                }
                self.push(t, x, m);
            }
            if ok {
                return Ok(());
            }
            self.truncate(len);
        }
        Err(failure.unwrap_or(DdeError::Positivity {
            t: start,
            step: (target - start) / (1u64 << self.opts.max_halvings) as f64,
        }))
    }
}

/// Integrates `eq` from its start time to `t_end` with step `step`.
///
/// Node times are `t0 + n·step` (the last one clipped to `t_end`) plus any
/// intermediate nodes inserted by positivity refinement.
pub fn integrate<E: DelayEquation + ?Sized>(
    eq: &E,
    history: Arc<dyn History>,
    t_end: f64,
    step: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory, DdeError> {
    let t0 = eq.start_time();
    if !(step > 0.0 && step.is_finite()) {
        return Err(DdeError::InvalidArguments(format!("step must be positive, got {step}")));
    }
    if !(t_end > t0) {
        return Err(DdeError::InvalidArguments(format!(
            "t_end = {t_end} must exceed t0 = {t0}"
        )));
    }
    let tau = eq.max_delay();
    check_admissible(history.as_ref(), tau).map_err(DdeError::History)?;
    let x0 = history.value(0.0)?;
    let capacity = ((t_end - t0) / step).ceil() as usize + 2;
    let mut stepper = Stepper {
        eq,
        traj: Trajectory {
            t0,
            tau,
            history,
            times: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            slopes: Vec::with_capacity(capacity),
        },
        buf: vec![TermValues::default(); eq.term_count()],
        opts: *opts,
    };
    let m0 = {
        let traj = &stepper.traj;
        rhs(eq, t0, |u| {
            if u >= t0 {
                Ok(x0)
            } else {
                Ok(traj.history.value(u - t0)?)
            }
        })?
    };
    stepper.push(t0, x0, m0);
    let mut n: u64 = 0;
    loop {
        let t = stepper.traj.end_time();
        if t >= t_end {
            break;
        }
        n += 1;
        let mut target = t0 + step * n as f64;
        if target > t_end || t_end - target < 1e-9 * step {
            target = t_end;
        }
        if target <= t {
            continue;
        }
        stepper.advance(target)?;
    }
    Ok(stepper.traj)
}
