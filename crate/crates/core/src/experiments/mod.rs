//! Simulation experiments checking the conclusions of the criteria, and the
//! reproducible scenarios built from them.
//!
//! Limits `t → ∞` are replaced by a finite horizon and a tail window, both
//! recorded in [`RunSettings`] next to every fact they produce.

mod checks;
mod periodic;
mod scenarios;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::criteria::CriteriaReport;
use crate::dde::{integrate, DdeError, IntegrateOptions, Trajectory, DEFAULT_STEP};
use crate::model::{History, HistoryFunction, ModelError, NicholsonModel, TransformError};

pub use checks::{
    attractivity_certificate, crosscheck_change_of_variables, map_section, straddle_check,
    verify_attractivity, verify_convergence, verify_permanence, AttractivitySection,
    ConvergenceSection, CrosscheckSection, MapSection, PairRun, PermanenceSection, StraddleSection,
    TailRun, DeviationRun,
};
pub use periodic::{
    find_periodic_solution, verify_periodic_attractor, PeriodicAttractorSection, PeriodicOptions,
    PeriodicSolution, PeriodicSummary,
};
pub use scenarios::{
    ex41_model, ex42_model, ex43_alpha_gamma, ex43_exact_alpha_gamma, ex43_model, ex43_reduced_model,
    reproduce_example, Ex42Row, SCENARIOS,
};

/// Tail fraction used when none is given.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;
/// Shortest default horizon, in time units past `t0`.
pub const MIN_HORIZON: f64 = 200.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dde(#[from] DdeError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("period map did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Horizon, step and tail window of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSettings {
    pub t0: f64,
    pub t_end: f64,
    pub step: f64,
    pub tail_fraction: f64,
}

impl RunSettings {
    /// `t_end` defaults to `t0 + max(100τ, 200)`.
    pub fn for_model(model: &NicholsonModel, t_end: Option<f64>, step: f64, tail_fraction: f64) -> Self {
        let t0 = model.t0();
        RunSettings {
            t0,
            t_end: t_end.unwrap_or(t0 + (100.0 * model.tau_bound()).max(MIN_HORIZON)),
            step,
            tail_fraction,
        }
    }

    pub fn defaults(model: &NicholsonModel) -> Self {
        RunSettings::for_model(model, None, DEFAULT_STEP, DEFAULT_TAIL_FRACTION)
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn tail_start(&self) -> f64 {
        self.t_end - self.tail_fraction * (self.t_end - self.t0)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.step > 0.0 && self.t_end > self.t0) {
            return Err(ExperimentError::Invalid(format!(
                "need step > 0 and t_end > t0, got step = {}, t_end = {}",
                self.step, self.t_end
            )));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(ExperimentError::Invalid(format!(
                "tail fraction must lie in (0, 1], got {}",
                self.tail_fraction
            )));
        }
        Ok(())
    }
}

/// Outcome vocabulary. The tool never claims non-attractivity: a failed
/// check only means the conclusion was not certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// A sufficient criterion holds and the simulation agrees.
    Certified,
    /// The simulation agrees but no criterion covers the model.
    SimulationConsistent,
    NotCertified,
    NotApplicable,
}

impl Status {
    pub fn from_checks(criterion: bool, simulation: bool) -> Status {
        match (criterion, simulation) {
            (true, true) => Status::Certified,
            (false, true) => Status::SimulationConsistent,
            _ => Status::NotCertified,
        }
    }

    /// Whether the status counts as success for exit codes.
    pub fn is_ok(self) -> bool {
        self != Status::NotCertified
    }

    /// The worse of two statuses; not-applicable never dominates.
    pub fn combine(self, other: Status) -> Status {
        use Status::*;
        match (self, other) {
            (NotCertified, _) | (_, NotCertified) => NotCertified,
            (NotApplicable, s) | (s, NotApplicable) => s,
            (SimulationConsistent, _) | (_, SimulationConsistent) => SimulationConsistent,
            _ => Certified,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Certified => "certified",
            Status::SimulationConsistent => "simulation-consistent",
            Status::NotCertified => "not-certified",
            Status::NotApplicable => "not-applicable",
        })
    }
}

/// An initial history with the label used in reports and file names.
#[derive(Debug, Clone)]
pub struct LabeledHistory {
    pub label: String,
    pub history: Arc<dyn History>,
}

impl LabeledHistory {
    pub fn new(label: impl Into<String>, history: Arc<dyn History>) -> Self {
        LabeledHistory {
            label: label.into(),
            history,
        }
    }

    pub fn constant(value: f64) -> Self {
        LabeledHistory::new(format!("{value}"), Arc::new(value))
    }

    /// Parses an expression in `t` (standing for `θ ∈ [−τ, 0]`).
    pub fn parse(source: &str) -> Result<Self, crate::expr::ParseError> {
        Ok(LabeledHistory::new(source, Arc::new(HistoryFunction::parse(source)?)))
    }
}

/// Integrates `model` from `history` with the default integrator options.
pub fn simulate(
    model: &NicholsonModel,
    history: &LabeledHistory,
    settings: &RunSettings,
) -> Result<Trajectory, ExperimentError> {
    Ok(integrate(
        model,
        history.history.clone(),
        settings.t_end,
        settings.step,
        &IntegrateOptions::default(),
    )?)
}

/// One model analysed inside a scenario.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSection {
    pub label: String,
    pub criteria: Option<CriteriaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permanence: Option<PermanenceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attractivity: Option<AttractivitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub straddle: Option<StraddleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periodic: Option<PeriodicSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periodic_attractor: Option<PeriodicAttractorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crosscheck: Option<CrosscheckSection>,
    pub notes: Vec<String>,
}

impl ScenarioSection {
    pub fn new(label: impl Into<String>, criteria: Option<CriteriaReport>) -> Self {
        ScenarioSection {
            label: label.into(),
            criteria,
            map: None,
            permanence: None,
            attractivity: None,
            convergence: None,
            straddle: None,
            periodic: None,
            periodic_attractor: None,
            crosscheck: None,
            notes: Vec::new(),
        }
    }

    pub fn status(&self) -> Status {
        let parts = [
            self.permanence.as_ref().map(|s| s.status),
            self.attractivity.as_ref().map(|s| s.status),
            self.convergence.as_ref().map(|s| s.status),
            self.straddle.as_ref().map(|s| s.status),
            self.periodic_attractor.as_ref().map(|s| s.status),
            self.crosscheck.as_ref().map(|s| s.status),
        ];
        parts
            .into_iter()
            .flatten()
            .fold(Status::NotApplicable, Status::combine)
    }
}

/// A scalar fact checked against a stated threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedCheck {
    pub name: String,
    pub value: f64,
    pub expected: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl NamedCheck {
    pub fn new(name: impl Into<String>, value: f64, expected: impl Into<String>, pass: bool) -> Self {
        NamedCheck {
            name: name.into(),
            value,
            expected: expected.into(),
            pass,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Full output of one reproducible scenario.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub sections: Vec<ScenarioSection>,
    pub checks: Vec<NamedCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Ex42Row>>,
    pub artifacts: Vec<String>,
    pub notes: Vec<String>,
    pub status: Status,
}

impl ExperimentReport {
    pub fn section(&self, label: &str) -> Option<&ScenarioSection> {
        self.sections.iter().find(|s| s.label == label)
    }

    pub fn check(&self, name: &str) -> Option<&NamedCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Knobs shared by every scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub step: f64,
    /// Overrides each scenario's horizon.
    pub t_end: Option<f64>,
    pub tail_fraction: f64,
    /// Overrides each scenario's tracking tolerance.
    pub tol: Option<f64>,
    /// Directory for CSV and JSON artifacts; nothing is written when unset.
    /// Reports list artifacts by file name.
    pub out_dir: Option<std::path::PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            step: DEFAULT_STEP,
            t_end: None,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            tol: None,
            out_dir: None,
        }
    }
}
