//! The nonautonomous Nicholson equation
//!
//! ```text
//! x'(t) = Σ_j p_j(t) x(t − τ_j(t)) exp(−a_j(t) x(t − σ_j(t))) − δ(t) x(t)
//! ```
//!
//! together with its optional factored form
//! `x'(t) = β(t)(−δ x(t) + Σ_j p_j x(t − τ_j(t)) exp(−a_j x(t − σ_j(t))))`
//! with scalar `δ, p_j, a_j`.

mod config;
mod field;
mod history;
mod transform;
mod validate;

use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::numerics::Extremum;

pub use config::{load_model, FieldDocument, ModelDocument, TermDocument};
pub use field::{common_period, Bound, EvalDomain, FieldClass, Horizon, ScalarField};
pub use history::{check_admissible, History, HistoryFunction, SampledHistory};
pub use transform::{transform_about_solution, RatioHistory, TransformError, TransformedModel};
pub use validate::{validate_a0, A0Report, BoundSource, ClauseResult, EstimatedBound};

/// Horizon sampled for generic fields that declare no scan horizon.
pub const DEFAULT_SAMPLE_SPAN: f64 = 10.0;
/// Grid size of the sampled-value validation run by [`load_model`].
pub const VALIDATION_GRID: usize = 256;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot parse expression `{field}`: {source}")]
    Parse { field: String, source: ParseError },
    #[error("invalid model document: {0}")]
    Schema(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("generic field `{0}` needs a scan horizon")]
    MissingScanHorizon(String),
    #[error("scan horizons of the generic fields do not overlap")]
    EmptyHorizon,
    #[error("periods {0:?} have no common period; declare one explicitly")]
    IncommensuratePeriods(Vec<f64>),
    #[error("field `{0}` is not periodic")]
    NotPeriodic(String),
    #[error("model is not in factored (beta) form")]
    NotBetaForm,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One nonlinear term `p x(t − τ) exp(−a x(t − σ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub p: ScalarField,
    pub a: ScalarField,
    pub tau: ScalarField,
    pub sigma: ScalarField,
}

impl Term {
    pub fn new(p: ScalarField, a: ScalarField, tau: ScalarField, sigma: ScalarField) -> Self {
        Term { p, a, tau, sigma }
    }

    /// All four entries constant.
    pub fn constant(p: f64, a: f64, tau: f64, sigma: f64) -> Self {
        Term::new(
            ScalarField::constant(p),
            ScalarField::constant(a),
            ScalarField::constant(tau),
            ScalarField::constant(sigma),
        )
    }

    pub fn fields(&self) -> [&ScalarField; 4] {
        [&self.p, &self.a, &self.tau, &self.sigma]
    }
}

/// Scalar constants of the factored form; `beta` multiplies the whole
/// right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaForm {
    pub beta: ScalarField,
    pub delta: f64,
    pub p: Vec<f64>,
    pub a: Vec<f64>,
}

impl BetaForm {
    pub fn p_total(&self) -> f64 {
        self.p.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NicholsonModel {
    terms: Vec<Term>,
    delta: ScalarField,
    t0: f64,
    beta_form: Option<BetaForm>,
    tau_bound: f64,
}

impl NicholsonModel {
    /// Assembles a model and computes its delay bound. Only structural
    /// checks happen here; sampled positivity is checked by [`load_model`]
    /// and [`NicholsonModel::validate`].
    pub fn new(
        terms: Vec<Term>,
        delta: ScalarField,
        t0: f64,
        beta_form: Option<BetaForm>,
    ) -> Result<Self, ModelError> {
        if terms.is_empty() {
            return Err(ModelError::Schema("at least one term is required".into()));
        }
        if let Some(beta) = &beta_form {
            if beta.p.len() != terms.len() || beta.a.len() != terms.len() {
                return Err(ModelError::Schema(format!(
                    "beta_form has {} p and {} a entries for {} terms",
                    beta.p.len(),
                    beta.a.len(),
                    terms.len()
                )));
            }
        }
        let mut tau_bound: f64 = 0.0;
        for term in &terms {
            for delay in [&term.tau, &term.sigma] {
                tau_bound = tau_bound.max(delay_sup(delay, t0)?);
            }
        }
        Ok(NicholsonModel {
            terms,
            delta,
            t0,
            beta_form,
            tau_bound,
        })
    }

    /// Constant-coefficient model; each term is `(p, a, tau, sigma)`.
    pub fn autonomous(delta: f64, terms: &[(f64, f64, f64, f64)]) -> Result<Self, ModelError> {
        let terms = terms
            .iter()
            .map(|&(p, a, tau, sigma)| Term::constant(p, a, tau, sigma))
            .collect();
        NicholsonModel::new(terms, ScalarField::constant(delta), 0.0, None)
    }

    /// Factored form with constant `δ, p_j, a_j` scaled by `beta`; delays per
    /// term are `(tau, sigma)`.
    pub fn beta_factored(
        beta: ScalarField,
        delta: f64,
        p: &[f64],
        a: &[f64],
        delays: Vec<(ScalarField, ScalarField)>,
        t0: f64,
    ) -> Result<Self, ModelError> {
        if p.len() != delays.len() || a.len() != delays.len() {
            return Err(ModelError::Schema("p, a and delays differ in length".into()));
        }
        let terms = delays
            .into_iter()
            .enumerate()
            .map(|(j, (tau, sigma))| {
                Term::new(beta.scaled(p[j]), ScalarField::constant(a[j]), tau, sigma)
            })
            .collect();
        let delta_field = beta.scaled(delta);
        NicholsonModel::new(
            terms,
            delta_field,
            t0,
            Some(BetaForm {
                beta,
                delta,
                p: p.to_vec(),
                a: a.to_vec(),
            }),
        )
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn delta(&self) -> &ScalarField {
        &self.delta
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn beta_form(&self) -> Option<&BetaForm> {
        self.beta_form.as_ref()
    }

    /// The global delay bound τ: the largest value any `τ_j` or `σ_j` takes.
    pub fn tau_bound(&self) -> f64 {
        self.tau_bound
    }

    /// Every field of the model, δ first.
    pub fn fields(&self) -> Vec<&ScalarField> {
        let mut out = vec![&self.delta];
        for term in &self.terms {
            out.extend(term.fields());
        }
        out
    }

    /// `p(t) = Σ_j p_j(t)`.
    pub fn p_total(&self) -> Result<ScalarField, ModelError> {
        let ps: Vec<&ScalarField> = self.terms.iter().map(|t| &t.p).collect();
        ScalarField::sum(&ps)
    }

    pub fn is_autonomous(&self) -> bool {
        self.fields().iter().all(|f| f.is_constant())
    }

    /// True when every field is constant or periodic with a period dividing
    /// `omega`.
    pub fn is_periodic_with(&self, omega: f64) -> bool {
        EvalDomain::with_period(&self.fields(), self.t0, omega).is_ok()
    }

    /// Sampled-value validation: nonnegative delays, positive `p_j, a_j, δ`,
    /// periodic fields repeating and declared bounds respected.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fallback = Horizon::new(self.t0, self.t0 + DEFAULT_SAMPLE_SPAN);
        let check = |name: String, field: &ScalarField, positive: bool| -> Result<(), ModelError> {
            check_periodicity(&name, field)?;
            for t in field.sample_times(self.t0, VALIDATION_GRID, fallback) {
                let v = field.eval(t).map_err(|e| {
                    ModelError::Validation(format!("{name} cannot be evaluated at t={t}: {e}"))
                })?;
                if positive && v <= 0.0 {
                    return Err(ModelError::Validation(format!(
                        "{name} must be positive, found {v} at t={t}"
                    )));
                }
                if !positive && v < 0.0 {
                    return Err(ModelError::Validation(format!(
                        "{name} must be nonnegative, found {v} at t={t}"
                    )));
                }
                if field.lower.is_some_and(|lo| v < lo) || field.upper.is_some_and(|hi| v > hi) {
                    return Err(ModelError::Validation(format!(
                        "{name} = {v} at t={t} violates its declared bounds"
                    )));
                }
            }
            Ok(())
        };
        check("delta".into(), &self.delta, true)?;
        for (j, term) in self.terms.iter().enumerate() {
            let j = j + 1;
            check(format!("p_{j}"), &term.p, true)?;
            check(format!("a_{j}"), &term.a, true)?;
            check(format!("tau_{j}"), &term.tau, false)?;
            check(format!("sigma_{j}"), &term.sigma, false)?;
        }
        if let Some(beta) = &self.beta_form {
            check("beta".into(), &beta.beta, true)?;
            if beta.delta <= 0.0
                || beta.p.iter().any(|&v| v <= 0.0)
                || beta.a.iter().any(|&v| v <= 0.0)
            {
                return Err(ModelError::Validation(
                    "beta_form constants must be positive".into(),
                ));
            }
            self.check_beta_consistency(beta, fallback)?;
        }
        Ok(())
    }

    fn check_beta_consistency(&self, beta: &BetaForm, fallback: Horizon) -> Result<(), ModelError> {
        let times = beta.beta.sample_times(self.t0, VALIDATION_GRID, fallback);
        for t in times {
            let b = beta.beta.eval(t)?;
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300);
            if !close(self.delta.eval(t)?, b * beta.delta) {
                return Err(ModelError::Validation(format!(
                    "delta(t) differs from beta(t)*{} at t={t}",
                    beta.delta
                )));
            }
            for (j, term) in self.terms.iter().enumerate() {
                if !close(term.p.eval(t)?, b * beta.p[j]) || !close(term.a.eval(t)?, beta.a[j]) {
                    return Err(ModelError::Validation(format!(
                        "term {} is inconsistent with beta_form at t={t}",
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Supremum of a delay field as used for the global bound τ.
fn delay_sup(field: &ScalarField, t0: f64) -> Result<f64, ModelError> {
    if let (FieldClass::Generic, Some(upper)) = (field.class, field.upper) {
        return Ok(upper);
    }
    Ok(field.extremum(t0, Extremum::Sup)?.value)
}

const PERIODICITY_GRID: usize = 64;

fn check_periodicity(name: &str, field: &ScalarField) -> Result<(), ModelError> {
    let Some(w) = field.period() else {
        return Ok(());
    };
    if !(w.is_finite() && w > 0.0) {
        return Err(ModelError::Validation(format!("{name}: period must be positive")));
    }
    let samples: Vec<(f64, f64)> = (0..PERIODICITY_GRID)
        .map(|i| {
            let t = w * i as f64 / PERIODICITY_GRID as f64;
            Ok((field.eval(t)?, field.eval(t + w)?))
        })
        .collect::<Result<_, EvalError>>()?;
    let scale = samples
        .iter()
        .map(|(a, _)| a.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for (i, (a, b)) in samples.iter().enumerate() {
        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(scale) {
            return Err(ModelError::Validation(format!(
                "{name} is not {w}-periodic: f({t}) = {a} but f({t}+{w}) = {b}",
                t = w * i as f64 / PERIODICITY_GRID as f64
            )));
        }
    }
    Ok(())
}
