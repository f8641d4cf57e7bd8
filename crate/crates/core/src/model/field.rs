use serde::Serialize;

use crate::expr::{BinaryOp, EvalError, Expression, Node};
use crate::numerics::{grid_extremum, Extremum};

use super::ModelError;

/// Largest multiple of the longest period tried when looking for a common
/// period of several periodic fields.
const MAX_PERIOD_MULTIPLE: u32 = 64;
const PERIOD_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "class", content = "period")]
pub enum FieldClass {
    Constant,
    Periodic(f64),
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Horizon {
    pub start: f64,
    pub end: f64,
}

impl Horizon {
    pub fn new(start: f64, end: f64) -> Self {
        Horizon { start, end }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// A nonnegative coefficient or delay as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub expr: Expression,
    pub class: FieldClass,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub scan: Option<Horizon>,
}

impl ScalarField {
    pub fn new(expr: Expression, class: FieldClass) -> Self {
        ScalarField {
            expr,
            class,
            lower: None,
            upper: None,
            scan: None,
        }
    }

    pub fn constant(value: f64) -> Self {
        ScalarField::new(Expression::constant(value), FieldClass::Constant)
    }

    pub fn periodic(source: &str, period: f64) -> Result<Self, ModelError> {
        Ok(ScalarField::new(parse(source)?, FieldClass::Periodic(period)))
    }

    pub fn generic(source: &str, scan: Horizon) -> Result<Self, ModelError> {
        let mut field = ScalarField::new(parse(source)?, FieldClass::Generic);
        field.scan = Some(scan);
        Ok(field)
    }

    pub fn with_bounds(mut self, lower: Option<f64>, upper: Option<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    #[inline]
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        self.expr.eval(t)
    }

    pub fn is_constant(&self) -> bool {
        self.class == FieldClass::Constant
    }

    pub fn period(&self) -> Option<f64> {
        match self.class {
            FieldClass::Periodic(w) => Some(w),
            _ => None,
        }
    }

    /// Sum of several fields, classified by the common evaluation domain.
    pub fn sum(fields: &[&ScalarField]) -> Result<ScalarField, ModelError> {
        let mut iter = fields.iter();
        let first = iter
            .next()
            .ok_or_else(|| ModelError::Schema("empty field sum".into()))?;
        let node = iter.fold(first.expr.node().clone(), |acc, f| {
            Node::binary(BinaryOp::Add, acc, f.expr.node().clone())
        });
        ScalarField::combined(node, fields)
    }

    /// Pointwise product with a constant.
    pub fn scaled(&self, factor: f64) -> ScalarField {
        let node = Node::binary(BinaryOp::Mul, self.expr.node().clone(), Node::Number(factor));
        ScalarField {
            expr: Expression::from_node(node),
            class: self.class,
            lower: None,
            upper: None,
            scan: self.scan,
        }
    }

    /// A field with the given tree whose class is the common domain of
    /// `parts`.
    pub fn combined(node: Node, parts: &[&ScalarField]) -> Result<ScalarField, ModelError> {
        let (class, scan) = match EvalDomain::common(parts, 0.0)? {
            EvalDomain::Point(_) => (FieldClass::Constant, None),
            EvalDomain::Period { length, .. } => (FieldClass::Periodic(length), None),
            EvalDomain::Horizon(h) => (FieldClass::Generic, Some(h)),
        };
        Ok(ScalarField {
            expr: Expression::from_node(node),
            class,
            lower: None,
            upper: None,
            scan,
        })
    }

    /// Sampling grid used by validation: one period, the scan horizon, or
    /// `fallback` when a generic field declares no horizon.
    pub fn sample_times(&self, t0: f64, n: usize, fallback: Horizon) -> Vec<f64> {
        match self.class {
            FieldClass::Constant => vec![t0],
            FieldClass::Periodic(w) => (0..n).map(|i| t0 + w * i as f64 / n as f64).collect(),
            FieldClass::Generic => {
                let h = self.scan.unwrap_or(fallback);
                let n = n.max(2);
                (0..n)
                    .map(|i| h.start + h.len() * i as f64 / (n - 1) as f64)
                    .collect()
            }
        }
    }

    /// Supremum (or infimum) of the field over its evaluation domain.
    pub fn extremum(&self, t0: f64, mode: Extremum) -> Result<Bound, ModelError> {
        let domain = EvalDomain::common(&[self], t0)?;
        let (_, value) = domain.extremum(&|t| self.eval(t), mode)?;
        Ok(Bound {
            value,
            horizon_limited: domain.is_horizon_limited(),
        })
    }
}

fn parse(source: &str) -> Result<Expression, ModelError> {
    Expression::parse(source).map_err(|e| ModelError::Parse {
        field: source.to_string(),
        source: e,
    })
}

/// A numeric bound together with whether it only covers a finite horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub value: f64,
    pub horizon_limited: bool,
}

/// Where the asymptotic extrema of a set of fields are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalDomain {
    /// All fields constant.
    Point(f64),
    /// Periodic (or constant) fields sharing a common period.
    Period { start: f64, length: f64 },
    /// At least one generic field: the intersection of declared horizons.
    Horizon(Horizon),
}

impl EvalDomain {
    pub fn common(fields: &[&ScalarField], t0: f64) -> Result<EvalDomain, ModelError> {
        let mut periods = Vec::new();
        let mut horizon: Option<Horizon> = None;
        let mut any_generic = false;
        for field in fields {
            match field.class {
                FieldClass::Constant => {}
                FieldClass::Periodic(w) => periods.push(w),
                FieldClass::Generic => {
                    any_generic = true;
                    let scan = field
                        .scan
                        .ok_or_else(|| ModelError::MissingScanHorizon(field.expr.to_string()))?;
                    horizon = Some(match horizon {
                        None => scan,
                        Some(h) => Horizon::new(h.start.max(scan.start), h.end.min(scan.end)),
                    });
                }
            }
        }
        if any_generic {
            let h = horizon.expect("generic field implies a horizon");
            if h.is_empty() {
                return Err(ModelError::EmptyHorizon);
            }
            return Ok(EvalDomain::Horizon(h));
        }
        if periods.is_empty() {
            return Ok(EvalDomain::Point(t0));
        }
        Ok(EvalDomain::Period {
            start: t0,
            length: common_period(&periods)?,
        })
    }

    /// Like [`EvalDomain::common`] but forcing a declared period for
    /// periodic and constant fields.
    pub fn with_period(fields: &[&ScalarField], t0: f64, omega: f64) -> Result<EvalDomain, ModelError> {
        for field in fields {
            match field.class {
                FieldClass::Constant => {}
                FieldClass::Periodic(w) => {
                    let ratio = omega / w;
                    if (ratio - ratio.round()).abs() > PERIOD_MATCH_TOL * ratio.max(1.0)
                        || ratio.round() < 1.0
                    {
                        return Err(ModelError::IncommensuratePeriods(vec![w, omega]));
                    }
                }
                FieldClass::Generic => {
                    return Err(ModelError::NotPeriodic(field.expr.to_string()));
                }
            }
        }
        Ok(EvalDomain::Period {
            start: t0,
            length: omega,
        })
    }

    pub fn is_horizon_limited(&self) -> bool {
        matches!(self, EvalDomain::Horizon(_))
    }

    /// Interval scanned for extrema.
    pub fn interval(&self) -> (f64, f64) {
        match *self {
            EvalDomain::Point(t) => (t, t),
            EvalDomain::Period { start, length } => (start, start + length),
            EvalDomain::Horizon(h) => (h.start, h.end),
        }
    }

    pub fn extremum<E>(
        &self,
        f: &impl Fn(f64) -> Result<f64, E>,
        mode: Extremum,
    ) -> Result<(f64, f64), E> {
        match *self {
            EvalDomain::Point(t) => Ok((t, f(t)?)),
            _ => {
                let (lo, hi) = self.interval();
                grid_extremum(f, lo, hi, mode)
            }
        }
    }
}

/// Smallest common multiple of the given periods, searched among the first
/// integer multiples of the longest one.
pub fn common_period(periods: &[f64]) -> Result<f64, ModelError> {
    let longest = periods.iter().copied().fold(0.0, f64::max);
    if longest <= 0.0 || periods.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(ModelError::Schema("periods must be positive".into()));
    }
    for k in 1..=MAX_PERIOD_MULTIPLE {
        let candidate = longest * k as f64;
        let fits = periods.iter().all(|w| {
            let ratio = candidate / w;
            (ratio - ratio.round()).abs() <= PERIOD_MATCH_TOL * ratio
        });
        if fits {
            return Ok(candidate);
        }
    }
    Err(ModelError::IncommensuratePeriods(periods.to_vec()))
}
