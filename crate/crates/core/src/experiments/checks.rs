use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::{CriteriaReport, A0_GRID};
use crate::dde::{integrate, IntegrateOptions, Trajectory};
use crate::interval_map::{MapSpec, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use crate::model::{
    transform_about_solution, validate_a0, History, NicholsonModel, RatioHistory,
};

use super::{simulate, ExperimentError, LabeledHistory, RunSettings, Status};

/// Permanence tails must lie in `[LOWER_FACTOR·m, UPPER_FACTOR·M]`.
pub const LOWER_FACTOR: f64 = 0.95;
pub const UPPER_FACTOR: f64 = 1.05;
/// Envelope increases below this are treated as rounding noise.
pub const ENVELOPE_NOISE: f64 = 1e-12;
/// Envelope windows span this many multiples of `τ`.
pub const ENVELOPE_WINDOW: f64 = 10.0;
/// Tails with `max − min ≤ OSCILLATION_FLOOR·K` count as converged.
pub const OSCILLATION_FLOOR: f64 = 1e-6;
/// A tail whose second-half spread is below this fraction of the first-half
/// spread is still converging rather than oscillating.
pub const DECAY_RATIO: f64 = 0.5;
pub const CROSSCHECK_TOL: f64 = 1e-6;
/// Cross-check window in multiples of `τ`.
pub const CROSSCHECK_SPAN: f64 = 20.0;
pub const MAP_SEEDS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRun {
    pub history: String,
    pub tail_min: f64,
    pub tail_max: f64,
    /// Smallest node value over the whole run.
    pub min_value: f64,
    pub positive: bool,
    pub inside: bool,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermanenceSection {
    pub settings: RunSettings,
    pub m: Option<f64>,
    pub M: Option<f64>,
    pub runs: Vec<TailRun>,
    pub pass: bool,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Simulates every history and checks its tail against the permanence
/// bounds of `report`. Not applicable unless (A1)–(A3) pass.
pub fn verify_permanence(
    model: &NicholsonModel,
    report: &CriteriaReport,
    histories: &[LabeledHistory],
    settings: &RunSettings,
) -> Result<PermanenceSection, ExperimentError> {
    settings.validate()?;
    let trajectories = simulate_all(model, histories, settings)?;
    let from = settings.tail_start();
    let bounds = report.bounds.m.zip(report.bounds.M);
    let runs: Vec<TailRun> = histories
        .iter()
        .zip(&trajectories)
        .map(|(h, traj)| {
            let (tail_min, tail_max) = traj.tail_extrema(from);
            let min_value = traj.values().iter().copied().fold(f64::INFINITY, f64::min);
            let inside = bounds.is_some_and(|(m, big_m)| {
                LOWER_FACTOR * m <= tail_min && tail_max <= UPPER_FACTOR * big_m
            });
            TailRun {
                history: h.label.clone(),
                tail_min,
                tail_max,
                min_value,
                positive: min_value > 0.0,
                inside,
            }
        })
        .collect();
    let permanent = ["A1", "A2", "A3"].iter().all(|c| report.passes(c));
    let pass = runs.iter().all(|r| r.inside && r.positive);
    let (status, note) = match (permanent, bounds) {
        (true, Some(_)) => (Status::from_checks(true, pass), None),
        _ => (
            Status::NotApplicable,
            Some("(A1)-(A3) not all certified, no permanence bounds".to_string()),
        ),
    };
    Ok(PermanenceSection {
        settings: *settings,
        m: bounds.map(|b| b.0),
        M: bounds.map(|b| b.1),
        runs,
        pass: pass && bounds.is_some(),
        status,
        note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRun {
    pub first: String,
    pub second: String,
    /// `sup |x₁ − x₂|` over the tail window.
    pub tail_sup: f64,
    /// Maxima of `|x₁ − x₂|` over consecutive windows.
    pub envelope: Vec<f64>,
    pub envelope_nonincreasing: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractivitySection {
    pub settings: RunSettings,
    pub tol: f64,
    pub window: f64,
    pub certificate: Option<String>,
    pub pairs: Vec<PairRun>,
    pub pass: bool,
    pub status: Status,
}

/// The first sufficient attractivity condition that holds for `model`.
///
/// (A5) covers any two solutions; (K2), (K2*) and the factored (H3) make
/// the equilibrium attractive; without `σ` delays every solution attracts;
/// (periodic2) with an existence condition makes the periodic solution
/// attractive; (A4) covers the solution whose bounds were supplied.
pub fn attractivity_certificate(model: &NicholsonModel, report: &CriteriaReport) -> Option<String> {
    let all = |names: &[&str]| names.iter().all(|n| report.passes(n));
    let permanent = all(&["A0", "A1", "A2", "A3"]);
    let sigma_free = model
        .terms()
        .iter()
        .all(|t| t.sigma.is_constant() && t.sigma.eval(model.t0()) == Ok(0.0));
    let candidates = [
        ("A5", permanent && report.passes("A5")),
        ("K2", permanent && all(&["K1", "K2"])),
        ("K2*", permanent && all(&["K1", "K2*"])),
        ("H3", all(&["H0", "H1", "H2", "H3"])),
        ("sigma-free", permanent && sigma_free),
        (
            "periodic2",
            all(&["A0", "periodic2"]) && (report.passes("periodic1") || report.passes("periodic_alt")),
        ),
        ("A4", permanent && report.passes("A4")),
    ];
    candidates
        .iter()
        .find(|(_, ok)| *ok)
        .map(|(name, _)| name.to_string())
}

/// Shared output grid `t0 + n·step`, ending exactly at `t_end`.
fn grid(settings: &RunSettings) -> Vec<f64> {
    let n = ((settings.t_end - settings.t0) / settings.step).round().max(1.0) as usize;
    (0..=n)
        .map(|i| {
            if i == n {
                settings.t_end
            } else {
                (settings.t0 + i as f64 * settings.step).min(settings.t_end)
            }
        })
        .collect()
}

fn simulate_all(
    model: &NicholsonModel,
    histories: &[LabeledHistory],
    settings: &RunSettings,
) -> Result<Vec<Trajectory>, ExperimentError> {
    histories
        .par_iter()
        .map(|h| simulate(model, h, settings))
        .collect()
}

/// Checks that paired solutions merge: the tail difference stays below
/// `tol` and its windowed envelope stops growing after the first quarter.
pub fn verify_attractivity(
    model: &NicholsonModel,
    report: Option<&CriteriaReport>,
    pairs: &[(LabeledHistory, LabeledHistory)],
    settings: &RunSettings,
    tol: f64,
) -> Result<AttractivitySection, ExperimentError> {
    settings.validate()?;
    let flat: Vec<LabeledHistory> = pairs
        .iter()
        .flat_map(|(a, b)| [a.clone(), b.clone()])
        .collect();
    let trajectories = simulate_all(model, &flat, settings)?;
    let times = grid(settings);
    let window = ENVELOPE_WINDOW * model.tau_bound().max(settings.step);
    let from = settings.tail_start();
    let settled = settings.t0 + 0.25 * (settings.t_end - settings.t0);
    let mut runs = Vec::with_capacity(pairs.len());
    for (k, (a, b)) in pairs.iter().enumerate() {
        let (x1, x2) = (&trajectories[2 * k], &trajectories[2 * k + 1]);
        let mut tail_sup: f64 = 0.0;
        let mut envelope: Vec<f64> = Vec::new();
        let mut starts: Vec<f64> = Vec::new();
        for &t in &times {
            let e = (x1.eval_at(t)? - x2.eval_at(t)?).abs();
            if t >= from {
                tail_sup = tail_sup.max(e);
            }
            let w = ((t - settings.t0) / window).floor() as usize;
            if w >= envelope.len() {
                envelope.resize(w + 1, 0.0);
                starts.resize(w + 1, 0.0);
                starts[w] = settings.t0 + w as f64 * window;
            }
            envelope[w] = envelope[w].max(e);
        }
        let nonincreasing = envelope
            .windows(2)
            .zip(&starts)
            .filter(|(_, &s)| s >= settled)
            .all(|(pair, _)| pair[1] <= pair[0] + ENVELOPE_NOISE);
        runs.push(PairRun {
            first: a.label.clone(),
            second: b.label.clone(),
            tail_sup,
            pass: tail_sup < tol && nonincreasing,
            envelope_nonincreasing: nonincreasing,
            envelope,
        });
    }
    let pass = runs.iter().all(|r| r.pass);
    let certificate = report.and_then(|r| attractivity_certificate(model, r));
    Ok(AttractivitySection {
        settings: *settings,
        tol,
        window,
        status: Status::from_checks(certificate.is_some(), pass),
        certificate,
        pairs: runs,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRun {
    pub history: String,
    /// Tail supremum of the distance to the target solution.
    pub tail_sup: f64,
    /// Distance at `t_end`.
    pub final_deviation: f64,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSection {
    pub settings: RunSettings,
    pub K: f64,
    pub tol: f64,
    pub certificate: Option<String>,
    pub runs: Vec<DeviationRun>,
    pub pass: bool,
    pub status: Status,
}

/// Checks that every history converges to the constant `k`.
pub fn verify_convergence(
    model: &NicholsonModel,
    report: Option<&CriteriaReport>,
    k: f64,
    histories: &[LabeledHistory],
    settings: &RunSettings,
    tol: f64,
) -> Result<ConvergenceSection, ExperimentError> {
    settings.validate()?;
    let trajectories = simulate_all(model, histories, settings)?;
    let from = settings.tail_start();
    let runs: Vec<DeviationRun> = histories
        .iter()
        .zip(&trajectories)
        .map(|(h, traj)| {
            let (lo, hi) = traj.tail_extrema(from);
            DeviationRun {
                history: h.label.clone(),
                tail_sup: (lo - k).abs().max((hi - k).abs()),
                final_deviation: (traj.last_value() - k).abs(),
            }
        })
        .collect();
    let pass = runs.iter().all(|r| r.tail_sup < tol);
    let certificate = report.and_then(|r| attractivity_certificate(model, r));
    Ok(ConvergenceSection {
        settings: *settings,
        K: k,
        tol,
        status: Status::from_checks(certificate.is_some(), pass),
        certificate,
        runs,
        pass,
    })
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StraddleSection {
    pub settings: RunSettings,
    pub K: Option<f64>,
    pub tail_min: f64,
    pub tail_max: f64,
    pub pass: bool,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// For an oscillatory tail, checks `tail_min < K < tail_max`.
pub fn straddle_check(
    report: &CriteriaReport,
    trajectory: &Trajectory,
    settings: &RunSettings,
) -> StraddleSection {
    let from = settings.tail_start();
    let (tail_min, tail_max) = trajectory.tail_extrema(from);
    let middle = 0.5 * (from + settings.t_end);
    let early = spread_between(trajectory, from, middle);
    let late = spread_between(trajectory, middle, settings.t_end);
    let k = report.K.map(|e| e.K).filter(|&k| k > 0.0);
    let mut section = StraddleSection {
        settings: *settings,
        K: k,
        tail_min,
        tail_max,
        pass: false,
        status: Status::NotApplicable,
        note: None,
    };
    match k {
        None => section.note = Some("no positive equilibrium".into()),
        Some(k) if tail_max - tail_min <= OSCILLATION_FLOOR * k => {
            section.note = Some("tail is not oscillatory".into())
        }
        Some(_) if late < DECAY_RATIO * early => {
            section.note = Some(format!(
                "tail still converging: spread {early:.3e} then {late:.3e}"
            ))
        }
        Some(k) => {
            section.pass = tail_min < k && k < tail_max;
            let criterion = report.passes("A0") && report.passes("K1");
            section.status = Status::from_checks(criterion, section.pass);
        }
    }
    section
}

fn spread_between(traj: &Trajectory, from: f64, to: f64) -> f64 {
    let (lo, hi) = traj
        .times()
        .iter()
        .zip(traj.values())
        .filter(|(&t, _)| t >= from && t <= to)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &v)| (lo.min(v), hi.max(v)));
    hi - lo
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckSection {
    pub history: String,
    pub window_end: f64,
    pub step: f64,
    /// `sup |y − x/x*|` over the window.
    pub sup_difference: f64,
    pub tol: f64,
    pub z_plus: f64,
    pub z_plus_bound: f64,
    pub z_bound_holds: bool,
    pub pass: bool,
    pub status: Status,
}

/// Integrates the model from `phi` and the equation for `y = x/x*` from
/// `phi/x*`, and compares `y` with `x/x*` over `[t0, t0 + 20τ]`.
pub fn crosscheck_change_of_variables(
    model: &NicholsonModel,
    xstar: Arc<Trajectory>,
    phi: &LabeledHistory,
    step: f64,
) -> Result<CrosscheckSection, ExperimentError> {
    let t0 = model.t0();
    let tau = model.tau_bound();
    let window_end = t0 + CROSSCHECK_SPAN * tau.max(0.05);
    if xstar.end_time() < window_end {
        return Err(ExperimentError::Invalid(format!(
            "x* ends at {} before the cross-check window end {window_end}",
            xstar.end_time()
        )));
    }
    let (mut lo, mut hi) = xstar.tail_extrema(t0);
    for i in 0..=64 {
        let v = xstar.eval_at(t0 - tau + tau * i as f64 / 64.0)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let transformed = transform_about_solution(model, xstar.clone(), lo, hi)?;
    let ratio: Arc<dyn History> = Arc::new(RatioHistory::new(phi.history.clone(), xstar.clone()));
    let opts = IntegrateOptions::default();
    let (x, y) = rayon::join(
        || integrate(model, phi.history.clone(), window_end, step, &opts),
        || integrate(&transformed, ratio, window_end, step, &opts),
    );
    let (x, y) = (x?, y?);
    let mut sup: f64 = 0.0;
    for (&t, &yv) in y.times().iter().zip(y.values()) {
        sup = sup.max((yv - x.eval_at(t)? / xstar.eval_at(t)?).abs());
    }
    let pass = sup < CROSSCHECK_TOL;
    let criterion = validate_a0(model, A0_GRID).pass;
    Ok(CrosscheckSection {
        history: phi.label.clone(),
        window_end,
        step,
        sup_difference: sup,
        tol: CROSSCHECK_TOL,
        z_plus: transformed.z_plus(),
        z_plus_bound: transformed.z_plus_bound(),
        z_bound_holds: transformed.z_bound_holds(),
        pass,
        status: Status::from_checks(criterion, pass),
    })
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSection {
    pub K: f64,
    pub a_plus: f64,
    pub theta0: f64,
    pub margin: f64,
    pub derivative_at_K: f64,
    pub sweep_pass: Option<bool>,
    pub converged: Option<usize>,
    pub cycles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Builds the interval map for `(K, a⁺, θ₀ = e^{−ζ})` and sweeps seeds when
/// the map condition holds.
pub fn map_section(k: f64, a_plus: f64, zeta: f64) -> MapSection {
    let theta0 = (-zeta).exp();
    let mut section = MapSection {
        K: k,
        a_plus,
        theta0,
        margin: a_plus * k * zeta.exp_m1(),
        derivative_at_K: crate::interval_map::derivative_at_k(k, a_plus, theta0),
        sweep_pass: None,
        converged: None,
        cycles: None,
        error: None,
    };
    match MapSpec::from_zeta(k, a_plus, zeta) {
        Ok(spec) => {
            let sweep = spec.global_attractor_sweep(MAP_SEEDS, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE);
            section.sweep_pass = Some(sweep.pass);
            section.converged = Some(sweep.converged);
            section.cycles = Some(sweep.cycles);
        }
        Err(e) => section.error = Some(e.to_string()),
    }
    section
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{evaluate, CriteriaOptions};
    use std::f64::consts::E;

    fn classic(p: f64, tau: f64) -> NicholsonModel {
        NicholsonModel::autonomous(1.0, &[(p, 1.0, tau, tau)]).unwrap()
    }

    fn consts(vals: &[f64]) -> Vec<LabeledHistory> {
        vals.iter().map(|&v| LabeledHistory::constant(v)).collect()
    }

    #[test]
    fn classic_permanence_tails_inside_bounds() {
        let m = classic(E, 1.0);
        let r = evaluate(&m, &CriteriaOptions::default()).unwrap();
        let s = verify_permanence(&m, &r, &consts(&[0.1, 1.0, 5.0]), &RunSettings::defaults(&m)).unwrap();
        assert!(s.pass);
        assert_eq!(s.status, Status::Certified);
        for run in &s.runs {
            assert!((run.tail_min - 1.0).abs() < 1e-3 && (run.tail_max - 1.0).abs() < 1e-3);
        }
        assert!((s.m.unwrap() - (-(2.0 + E)).exp()).abs() < 1e-12);
    }

    #[test]
    fn extinction_permanence_not_applicable() {
        let m = classic(0.9, 0.1);
        let r = evaluate(&m, &CriteriaOptions::default()).unwrap();
        let s = verify_permanence(&m, &r, &consts(&[1.0]), &RunSettings::defaults(&m)).unwrap();
        assert_eq!(s.status, Status::NotApplicable);
        assert!(s.runs[0].tail_max < 1e-6);
    }

    #[test]
    fn identical_histories_have_zero_difference() {
        let m = classic(E, 1.0);
        let s = RunSettings::defaults(&m).with_t_end(50.0);
        let pair = (LabeledHistory::constant(0.7), LabeledHistory::constant(0.7));
        let a = verify_attractivity(&m, None, &[pair], &s, 1e-12).unwrap();
        assert_eq!(a.pairs[0].tail_sup, 0.0);
        assert!(a.pairs[0].envelope.iter().all(|&e| e == 0.0));
        assert_eq!(a.status, Status::SimulationConsistent);
    }

    #[test]
    fn straddle_not_applicable_when_converged() {
        let m = classic(E, 1.0);
        let r = evaluate(&m, &CriteriaOptions::default()).unwrap();
        let s = RunSettings::defaults(&m);
        let traj = simulate(&m, &LabeledHistory::constant(0.5), &s).unwrap();
        assert_eq!(straddle_check(&r, &traj, &s).status, Status::NotApplicable);
        let m = classic(0.9, 1.0);
        let r = evaluate(&m, &CriteriaOptions::default()).unwrap();
        let traj = simulate(&m, &LabeledHistory::constant(0.5), &s).unwrap();
        let st = straddle_check(&r, &traj, &s);
        assert_eq!(st.status, Status::NotApplicable);
        assert_eq!(st.K, None);
    }

    #[test]
    fn constant_solution_crosscheck_is_scaling() {
        let m = classic(E, 1.0);
        let s = RunSettings::defaults(&m).with_t_end(25.0);
        let xstar = Arc::new(simulate(&m, &LabeledHistory::constant(1.0), &s).unwrap());
        let c = crosscheck_change_of_variables(&m, xstar.clone(), &LabeledHistory::constant(2.0), 0.01).unwrap();
        assert!(c.pass, "{c:?}");
        assert!(c.z_bound_holds);
        let own = LabeledHistory::new("x*", xstar.history().clone());
        let c = crosscheck_change_of_variables(&m, xstar, &own, 0.01).unwrap();
        assert!(c.sup_difference < 1e-12);
    }

    #[test]
    fn certificates() {
        let m = classic(1.5, 1.0);
        let r = evaluate(&m, &CriteriaOptions::default()).unwrap();
        assert_eq!(attractivity_certificate(&m, &r).as_deref(), Some("K2"));
        let m = NicholsonModel::autonomous(1.0, &[(3.0, 1.0, 1.0, 0.0)]).unwrap();
        let r = evaluate(&m, &CriteriaOptions::default()).unwrap();
        assert!(attractivity_certificate(&m, &r).is_some());
        let m = classic(E.powi(3), 2.0);
        let r = evaluate(&m, &CriteriaOptions::default()).unwrap();
        assert_eq!(attractivity_certificate(&m, &r), None);
    }

    #[test]
    fn map_section_reports_violation() {
        let s = map_section(1.0, 1.0, 1.0);
        assert!(s.error.is_some() && s.sweep_pass.is_none());
        let s = map_section(0.5, 1.0, 0.5);
        assert_eq!(s.sweep_pass, Some(true));
        assert!((s.derivative_at_K + 0.5 * 0.5f64.exp_m1()).abs() < 1e-15);
    }
}
