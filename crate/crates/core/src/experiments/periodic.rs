use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::{ratio_field, CriteriaReport, A0_GRID, WINDOW_TOL};
use crate::dde::{integrate, IntegrateOptions, Trajectory, DEFAULT_STEP};
use crate::model::{validate_a0, History, NicholsonModel, SampledHistory};
use crate::numerics::{adaptive_simpson, grid_extremum, Extremum};

use super::checks::{attractivity_certificate, DeviationRun};
use super::{simulate, ExperimentError, LabeledHistory, RunSettings, Status};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicOptions {
    /// Hermite nodes representing a history segment on `[−τ, 0]`.
    pub n_history_nodes: usize,
    pub max_iter: usize,
    /// Sup-norm change between successive histories that stops the iteration.
    pub tol: f64,
    pub step: f64,
    /// Constant starting history; defaults to `e^D log(γ)/a⁻`.
    pub initial: Option<f64>,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        PeriodicOptions {
            n_history_nodes: 129,
            max_iter: 2000,
            tol: 1e-10,
            step: DEFAULT_STEP,
            initial: None,
        }
    }
}

/// One period of a computed periodic solution and its history segment.
#[allow(non_snake_case)]
#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    pub omega: f64,
    pub iterations: usize,
    /// Sup-norm change of the last period-map step.
    pub residual: f64,
    pub m_star: f64,
    pub M_star: f64,
    /// `∫_{t0}^{t0+ω} δ`.
    pub D: f64,
    /// `max p/δ` over one period.
    pub gamma: f64,
    pub a_minus: f64,
    pub history: Arc<SampledHistory>,
    pub period: Arc<Trajectory>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicSummary {
    pub omega: f64,
    pub iterations: usize,
    pub residual: f64,
    pub m_star: f64,
    pub M_star: f64,
    pub D: f64,
    /// `M*/m*`, bounded by `e^D` on the cone of the existence proof.
    pub ratio: f64,
    pub ratio_bound: f64,
    pub ratio_holds: bool,
    /// `e^D log(γ)/a⁻`.
    pub upper_bound: f64,
    pub upper_bound_holds: bool,
}

impl PeriodicSolution {
    /// `x*(t)` extended periodically.
    pub fn eval(&self, t: f64) -> Result<f64, ExperimentError> {
        let t0 = self.period.t0();
        let s = t0 + (t - t0).rem_euclid(self.omega);
        Ok(self.period.eval_at(s)?)
    }

    /// Integrates `x*` from its history up to `t_end`.
    pub fn extend(
        &self,
        model: &NicholsonModel,
        t_end: f64,
        step: f64,
    ) -> Result<Trajectory, ExperimentError> {
        Ok(integrate(
            model,
            self.history.clone(),
            t_end,
            step,
            &IntegrateOptions::default(),
        )?)
    }

    /// The solution's own history segment, labelled `x*`.
    pub fn labeled_history(&self) -> LabeledHistory {
        let h: Arc<dyn History> = self.history.clone();
        LabeledHistory::new("x*", h)
    }

    pub fn ratio_holds(&self) -> bool {
        self.M_star / self.m_star <= self.D.exp() * (1.0 + 1e-12)
    }

    pub fn upper_bound(&self) -> f64 {
        self.D.exp() * self.gamma.ln() / self.a_minus
    }

    pub fn summary(&self) -> PeriodicSummary {
        PeriodicSummary {
            omega: self.omega,
            iterations: self.iterations,
            residual: self.residual,
            m_star: self.m_star,
            M_star: self.M_star,
            D: self.D,
            ratio: self.M_star / self.m_star,
            ratio_bound: self.D.exp(),
            ratio_holds: self.ratio_holds(),
            upper_bound: self.upper_bound(),
            upper_bound_holds: self.M_star <= self.upper_bound() * (1.0 + 1e-12),
        }
    }
}

fn sample_segment(
    traj: &Trajectory,
    anchor: f64,
    thetas: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), ExperimentError> {
    let mut values = Vec::with_capacity(thetas.len());
    let mut slopes = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        values.push(traj.eval_at(anchor + theta)?);
        slopes.push(traj.derivative_at(anchor + theta)?);
    }
    Ok((values, slopes))
}

/// Iterates the period map on Hermite-sampled histories until successive
/// histories agree to `opts.tol`.
pub fn find_periodic_solution(
    model: &NicholsonModel,
    omega: f64,
    opts: &PeriodicOptions,
) -> Result<PeriodicSolution, ExperimentError> {
    if !(omega > 0.0) || !model.is_periodic_with(omega) {
        return Err(ExperimentError::Invalid(format!(
            "model coefficients are not {omega}-periodic"
        )));
    }
    if opts.n_history_nodes < 2 {
        return Err(ExperimentError::Invalid("at least two history nodes are needed".into()));
    }
    let t0 = model.t0();
    let tau = model.tau_bound();
    let delta = model.delta();
    let d = adaptive_simpson(&|s| delta.eval(s), t0, t0 + omega, WINDOW_TOL)
        .map_err(crate::model::ModelError::from)?;
    let ratio = ratio_field(model)?;
    let (_, gamma) = grid_extremum(&|t| ratio.eval(t), t0, t0 + omega, Extremum::Sup)
        .map_err(crate::model::ModelError::from)?;
    let a_minus = validate_a0(model, A0_GRID)
        .a_minus
        .map(|b| b.value)
        .filter(|v| *v > 0.0)
        .ok_or_else(|| ExperimentError::Invalid("no positive lower bound for a_j".into()))?;

    let thetas: Vec<f64> = if tau > 0.0 {
        let n = opts.n_history_nodes;
        (0..n).map(|i| -tau + tau * i as f64 / (n - 1) as f64).collect()
    } else {
        vec![0.0]
    };
    let start = opts.initial.unwrap_or_else(|| {
        let guess = d.exp() * gamma.ln() / a_minus;
        if guess > 0.0 {
            guess
        } else {
            1.0
        }
    });
    let mut history = Arc::new(SampledHistory::new(
        thetas.clone(),
        vec![start; thetas.len()],
        vec![0.0; thetas.len()],
    ));
    let integrate_opts = IntegrateOptions::default();
    let mut residual = f64::INFINITY;
    for iteration in 1..=opts.max_iter {
        let traj = integrate(model, history.clone(), t0 + omega, opts.step, &integrate_opts)?;
        let (values, slopes) = sample_segment(&traj, t0 + omega, &thetas)?;
        residual = values
            .iter()
            .zip(history.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        history = Arc::new(SampledHistory::new(thetas.clone(), values, slopes));
        if residual < opts.tol {
            let period = Arc::new(integrate(model, history.clone(), t0 + omega, opts.step, &integrate_opts)?);
            let (m_star, big_m_star) = dense_extrema(&period)?;
            return Ok(PeriodicSolution {
                omega,
                iterations: iteration,
                residual,
                m_star,
                M_star: big_m_star,
                D: d,
                gamma,
                a_minus,
                history,
                period,
            });
        }
    }
    Err(ExperimentError::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Extrema over nodes and segment midpoints.
fn dense_extrema(traj: &Trajectory) -> Result<(f64, f64), ExperimentError> {
    let (mut lo, mut hi) = traj.tail_extrema(traj.t0());
    for w in traj.times().windows(2) {
        let v = traj.eval_at(0.5 * (w[0] + w[1]))?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicAttractorSection {
    pub settings: RunSettings,
    pub tol: f64,
    pub certificate: Option<String>,
    pub runs: Vec<DeviationRun>,
    pub pass: bool,
    pub status: Status,
}

/// Checks that every history tracks the periodic solution over the tail.
pub fn verify_periodic_attractor(
    model: &NicholsonModel,
    xstar: &PeriodicSolution,
    report: Option<&CriteriaReport>,
    histories: &[LabeledHistory],
    settings: &RunSettings,
    tol: f64,
) -> Result<PeriodicAttractorSection, ExperimentError> {
    settings.validate()?;
    let from = settings.tail_start();
    let runs = histories
        .par_iter()
        .map(|h| {
            let traj = simulate(model, h, settings)?;
            let mut tail_sup: f64 = 0.0;
            for (&t, &x) in traj.times().iter().zip(traj.values()) {
                if t >= from {
                    tail_sup = tail_sup.max((x - xstar.eval(t)?).abs());
                }
            }
            Ok(DeviationRun {
                history: h.label.clone(),
                tail_sup,
                final_deviation: (traj.last_value() - xstar.eval(traj.end_time())?).abs(),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let pass = runs.iter().all(|r| r.tail_sup < tol);
    let certificate = report.and_then(|r| attractivity_certificate(model, r));
    Ok(PeriodicAttractorSection {
        settings: *settings,
        tol,
        status: Status::from_checks(certificate.is_some(), pass),
        certificate,
        runs,
        pass,
    })
}
