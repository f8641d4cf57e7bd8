use serde::Serialize;

use crate::numerics::Extremum;

use super::{EvalDomain, FieldClass, Horizon, NicholsonModel, ScalarField, DEFAULT_SAMPLE_SPAN};

/// Where a numeric bound came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundSource {
    Exact,
    PeriodScan,
    Declared,
    HorizonScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatedBound {
    pub value: f64,
    pub source: BoundSource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClauseResult {
    pub clause: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Numeric check of the standing hypotheses: positive continuous
/// coefficients, bounded nonnegative delays and `a_j` pinched between
/// positive constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A0Report {
    pub a_minus: Option<EstimatedBound>,
    pub a_plus: Option<EstimatedBound>,
    pub sigma_plus: Option<EstimatedBound>,
    pub tau_plus: Option<EstimatedBound>,
    pub clauses: Vec<ClauseResult>,
    pub pass: bool,
}

impl A0Report {
    pub fn failures(&self) -> impl Iterator<Item = &ClauseResult> {
        self.clauses.iter().filter(|c| !c.pass)
    }
}

/// Runs the hypothesis checks on `grid_points` samples of one period, or of
/// the declared scan horizon for generic fields.
///
/// # Panics
///
/// If `grid_points < 64`.
pub fn validate_a0(model: &NicholsonModel, grid_points: usize) -> A0Report {
    assert!(grid_points >= 64, "validate_a0 needs at least 64 grid points");
    let t0 = model.t0();
    let fallback = Horizon::new(t0, t0 + DEFAULT_SAMPLE_SPAN);
    let mut clauses = Vec::new();

    let mut positive = |name: String, field: &ScalarField| {
        let outcome = sampled_min(field, t0, grid_points, fallback);
        let (pass, message) = match outcome {
            Ok(v) if v > 0.0 => (true, None),
            Ok(v) => (false, Some(format!("{name} reaches {v}"))),
            Err(e) => (false, Some(e)),
        };
        clauses.push(ClauseResult {
            clause: format!("{name} > 0"),
            pass,
            message,
        });
    };
    positive("delta".into(), model.delta());
    for (j, term) in model.terms().iter().enumerate() {
        positive(format!("p_{}", j + 1), &term.p);
    }

    let mut delay_bound = |label: &str, pick: fn(&super::Term) -> &ScalarField| {
        let mut lowest = f64::INFINITY;
        let mut best: Option<EstimatedBound> = None;
        let mut errors = Vec::new();
        for (j, term) in model.terms().iter().enumerate() {
            let field = pick(term);
            match sampled_min(field, t0, grid_points, fallback) {
                Ok(v) => lowest = lowest.min(v),
                Err(e) => errors.push(e),
            }
            match upper_bound(field, t0) {
                Ok(b) => {
                    best = Some(match best {
                        Some(prev) if prev.value >= b.value => prev,
                        _ => b,
                    })
                }
                Err(e) => errors.push(format!("{label}_{}: {e}", j + 1)),
            }
        }
        let nonneg = lowest >= 0.0 && errors.is_empty();
        clauses.push(ClauseResult {
            clause: format!("{label}_j >= 0 and bounded"),
            pass: nonneg && best.is_some_and(|b| b.value.is_finite()),
            message: if nonneg {
                None
            } else if errors.is_empty() {
                Some(format!("{label}_j reaches {lowest}"))
            } else {
                Some(errors.join("; "))
            },
        });
        best
    };
    let tau_plus = delay_bound("tau", |t| &t.tau);
    let sigma_plus = delay_bound("sigma", |t| &t.sigma);

    let mut a_minus: Option<EstimatedBound> = Some(EstimatedBound {
        value: f64::INFINITY,
        source: BoundSource::Exact,
    });
    let mut a_plus: Option<EstimatedBound> = Some(EstimatedBound {
        value: 0.0,
        source: BoundSource::Exact,
    });
    for term in model.terms() {
        let lo = a_bound(&term.a, t0, Extremum::Inf);
        let hi = a_bound(&term.a, t0, Extremum::Sup);
        a_minus = match (a_minus, lo) {
            (Some(acc), Some(b)) => Some(merge(acc, b, b.value < acc.value)),
            _ => None,
        };
        a_plus = match (a_plus, hi) {
            (Some(acc), Some(b)) => Some(merge(acc, b, b.value > acc.value)),
            _ => None,
        };
    }
    clauses.push(match a_minus {
        Some(b) if b.value > 0.0 => ClauseResult {
            clause: "a_j bounded below by a positive constant".into(),
            pass: true,
            message: None,
        },
        Some(b) => ClauseResult {
            clause: "a_j bounded below by a positive constant".into(),
            pass: false,
            message: Some(format!("a^- = {}", b.value)),
        },
        None => ClauseResult {
            clause: "a_j bounded below by a positive constant".into(),
            pass: false,
            message: Some("positive lower bound for a_j not established".into()),
        },
    });
    clauses.push(match a_plus {
        Some(b) if b.value.is_finite() => ClauseResult {
            clause: "a_j bounded above".into(),
            pass: true,
            message: None,
        },
        _ => ClauseResult {
            clause: "a_j bounded above".into(),
            pass: false,
            message: Some("finite upper bound for a_j not established".into()),
        },
    });

    let pass = clauses.iter().all(|c| c.pass);
    A0Report {
        a_minus,
        a_plus,
        sigma_plus,
        tau_plus,
        clauses,
        pass,
    }
}

/// Keeps the extreme value; an approximate source wins over an exact one.
fn merge(acc: EstimatedBound, new: EstimatedBound, replace: bool) -> EstimatedBound {
    let value = if replace { new.value } else { acc.value };
    let rank = |s: BoundSource| match s {
        BoundSource::Exact => 0,
        BoundSource::PeriodScan => 1,
        BoundSource::Declared => 2,
        BoundSource::HorizonScan => 3,
    };
    let source = if rank(new.source) > rank(acc.source) {
        new.source
    } else {
        acc.source
    };
    EstimatedBound { value, source }
}

fn scan_source(field: &ScalarField) -> BoundSource {
    match field.class {
        FieldClass::Constant => BoundSource::Exact,
        FieldClass::Periodic(_) => BoundSource::PeriodScan,
        FieldClass::Generic => BoundSource::HorizonScan,
    }
}

/// Bound on `a_j`; generic fields must declare it since a finite scan cannot
/// establish it.
fn a_bound(field: &ScalarField, t0: f64, mode: Extremum) -> Option<EstimatedBound> {
    if field.class == FieldClass::Generic {
        let declared = match mode {
            Extremum::Inf => field.lower,
            Extremum::Sup => field.upper,
        };
        return declared.map(|value| EstimatedBound {
            value,
            source: BoundSource::Declared,
        });
    }
    let value = field.extremum(t0, mode).ok()?.value;
    Some(EstimatedBound {
        value,
        source: scan_source(field),
    })
}

fn upper_bound(field: &ScalarField, t0: f64) -> Result<EstimatedBound, String> {
    if let (FieldClass::Generic, Some(value)) = (field.class, field.upper) {
        return Ok(EstimatedBound {
            value,
            source: BoundSource::Declared,
        });
    }
    let value = field
        .extremum(t0, Extremum::Sup)
        .map_err(|e| e.to_string())?
        .value;
    Ok(EstimatedBound {
        value,
        source: scan_source(field),
    })
}

fn sampled_min(field: &ScalarField, t0: f64, n: usize, fallback: Horizon) -> Result<f64, String> {
    let times = match field.class {
        FieldClass::Generic if field.scan.is_none() => field.sample_times(t0, n, fallback),
        FieldClass::Constant => vec![t0],
        _ => {
            let domain = EvalDomain::common(&[field], t0).map_err(|e| e.to_string())?;
            let (lo, hi) = domain.interval();
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        }
    };
    let mut lowest = f64::INFINITY;
    for t in times {
        let v = field
            .eval(t)
            .map_err(|e| format!("{} at t={t}: {e}", field.expr))?;
        lowest = lowest.min(v);
    }
    Ok(lowest)
}
