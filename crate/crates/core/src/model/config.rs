//! JSON model documents.
//!
//! ```json
//! {
//!   "t0": 0.0,
//!   "delta": {"expr": "1", "class": "constant"},
//!   "terms": [
//!     {"p": {"expr": "e", "class": "constant"},
//!      "a": {"expr": "1", "class": "constant"},
//!      "tau": {"expr": "1", "class": "constant"},
//!      "sigma": {"expr": "0.5", "class": "constant"}}
//!   ],
//!   "beta_form": {"beta": {...}, "delta": 1.0, "p": [0.6], "a": [1.0]}
//! }
//! ```
//!
//! With `beta_form` present, `delta` and the `p`/`a` entries of each term may
//! be omitted and are then derived from the factored constants.

use serde::{Deserialize, Serialize};

use crate::expr::Expression;

use super::{BetaForm, FieldClass, Horizon, ModelError, NicholsonModel, ScalarField, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassName {
    Constant,
    Periodic,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDocument {
    pub expr: String,
    pub class: ClassName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<FieldDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<FieldDocument>,
    pub tau: FieldDocument,
    pub sigma: FieldDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaDocument {
    pub beta: FieldDocument,
    pub delta: f64,
    pub p: Vec<f64>,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default)]
    pub t0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<FieldDocument>,
    pub terms: Vec<TermDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_form: Option<BetaDocument>,
}

impl FieldDocument {
    pub fn constant(expr: impl Into<String>) -> Self {
        FieldDocument {
            expr: expr.into(),
            class: ClassName::Constant,
            period: None,
            lower: None,
            upper: None,
            scan: None,
        }
    }

    pub fn periodic(expr: impl Into<String>, period: f64) -> Self {
        FieldDocument {
            period: Some(period),
            class: ClassName::Periodic,
            ..FieldDocument::constant(expr)
        }
    }

    fn to_field(&self, name: &str) -> Result<ScalarField, ModelError> {
        let expr = Expression::parse(&self.expr).map_err(|e| ModelError::Parse {
            field: format!("{name} = `{}`", self.expr),
            source: e,
        })?;
        let class = match (self.class, self.period) {
            (ClassName::Periodic, Some(w)) if w.is_finite() && w > 0.0 => FieldClass::Periodic(w),
            (ClassName::Periodic, _) => {
                return Err(ModelError::Schema(format!(
                    "{name}: periodic field needs a positive `period`"
                )))
            }
            (_, Some(_)) => {
                return Err(ModelError::Schema(format!(
                    "{name}: `period` is only allowed for periodic fields"
                )))
            }
            (ClassName::Constant, None) => FieldClass::Constant,
            (ClassName::Generic, None) => FieldClass::Generic,
        };
        if class == FieldClass::Constant && !expr.is_time_independent() {
            return Err(ModelError::Schema(format!(
                "{name}: constant field `{}` depends on t",
                self.expr
            )));
        }
        let scan = match self.scan {
            Some([a, b]) if a.is_finite() && b.is_finite() && a < b => Some(Horizon::new(a, b)),
            Some(_) => {
                return Err(ModelError::Schema(format!(
                    "{name}: `scan` must be an increasing pair [T0, T1]"
                )))
            }
            None => None,
        };
        if let (Some(lo), Some(hi)) = (self.lower, self.upper) {
            if lo > hi {
                return Err(ModelError::Schema(format!("{name}: lower exceeds upper")));
            }
        }
        Ok(ScalarField {
            expr,
            class,
            lower: self.lower,
            upper: self.upper,
            scan,
        })
    }

    pub fn from_field(field: &ScalarField) -> Self {
        let (class, period) = match field.class {
            FieldClass::Constant => (ClassName::Constant, None),
            FieldClass::Periodic(w) => (ClassName::Periodic, Some(w)),
            FieldClass::Generic => (ClassName::Generic, None),
        };
        FieldDocument {
            expr: field.expr.source().to_string(),
            class,
            period,
            lower: field.lower,
            upper: field.upper,
            scan: field.scan.map(|h| [h.start, h.end]),
        }
    }
}

impl ModelDocument {
    pub fn into_model(self) -> Result<NicholsonModel, ModelError> {
        let beta = self
            .beta_form
            .as_ref()
            .map(|b| -> Result<BetaForm, ModelError> {
                Ok(BetaForm {
                    beta: b.beta.to_field("beta_form.beta")?,
                    delta: b.delta,
                    p: b.p.clone(),
                    a: b.a.clone(),
                })
            })
            .transpose()?;
        if let Some(b) = &beta {
            if b.p.len() != self.terms.len() || b.a.len() != self.terms.len() {
                return Err(ModelError::Schema(format!(
                    "beta_form lists {} p and {} a values for {} terms",
                    b.p.len(),
                    b.a.len(),
                    self.terms.len()
                )));
            }
        }
        let delta = match (&self.delta, &beta) {
            (Some(doc), _) => doc.to_field("delta")?,
            (None, Some(b)) => b.beta.scaled(b.delta),
            (None, None) => return Err(ModelError::Schema("missing key `delta`".into())),
        };
        let mut terms = Vec::with_capacity(self.terms.len());
        for (j, doc) in self.terms.iter().enumerate() {
            let name = |key: &str| format!("terms[{j}].{key}");
            let p = match (&doc.p, &beta) {
                (Some(f), _) => f.to_field(&name("p"))?,
                (None, Some(b)) => b.beta.scaled(b.p[j]),
                (None, None) => {
                    return Err(ModelError::Schema(format!("missing key `{}`", name("p"))))
                }
            };
            let a = match (&doc.a, &beta) {
                (Some(f), _) => f.to_field(&name("a"))?,
                (None, Some(b)) => ScalarField::constant(b.a[j]),
                (None, None) => {
                    return Err(ModelError::Schema(format!("missing key `{}`", name("a"))))
                }
            };
            terms.push(Term::new(
                p,
                a,
                doc.tau.to_field(&name("tau"))?,
                doc.sigma.to_field(&name("sigma"))?,
            ));
        }
        NicholsonModel::new(terms, delta, self.t0, beta)
    }

    pub fn from_model(model: &NicholsonModel) -> Self {
        ModelDocument {
            t0: model.t0(),
            delta: Some(FieldDocument::from_field(model.delta())),
            terms: model
                .terms()
                .iter()
                .map(|t| TermDocument {
                    p: Some(FieldDocument::from_field(&t.p)),
                    a: Some(FieldDocument::from_field(&t.a)),
                    tau: FieldDocument::from_field(&t.tau),
                    sigma: FieldDocument::from_field(&t.sigma),
                })
                .collect(),
            beta_form: model.beta_form().map(|b| BetaDocument {
                beta: FieldDocument::from_field(&b.beta),
                delta: b.delta,
                p: b.p.clone(),
                a: b.a.clone(),
            }),
        }
    }
}

/// Parses, builds and validates a model from its JSON document.
pub fn load_model(document: &str) -> Result<NicholsonModel, ModelError> {
    let doc: ModelDocument =
        serde_json::from_str(document).map_err(|e| ModelError::Schema(e.to_string()))?;
    let model = doc.into_model()?;
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLASSIC: &str = r#"{
        "t0": 0,
        "delta": {"expr": "1", "class": "constant"},
        "terms": [{
            "p": {"expr": "e", "class": "constant"},
            "a": {"expr": "1", "class": "constant"},
            "tau": {"expr": "1", "class": "constant"},
            "sigma": {"expr": "1", "class": "constant"}
        }]
    }"#;

    const EXAMPLE_43: &str = r#"{
        "delta": {"expr": "1*(1+0.5*cos(2*pi*t))", "class": "periodic", "period": 1},
        "terms": [
          {"p": {"expr": "2*(1+0.5*cos(2*pi*t))", "class": "periodic", "period": 1},
           "a": {"expr": "1", "class": "constant"},
           "tau": {"expr": "0.1*(1+cos(2*pi*t))", "class": "periodic", "period": 1},
           "sigma": {"expr": "0.2", "class": "constant"}},
          {"p": {"expr": "1*(1+0.5*sin(2*pi*t))", "class": "periodic", "period": 1},
           "a": {"expr": "1", "class": "constant"},
           "tau": {"expr": "0.2", "class": "constant"},
           "sigma": {"expr": "0.1*(1+sin(2*pi*t))", "class": "periodic", "period": 1}}
        ]
    }"#;

    #[test]
    fn loads_classic_model() {
        let m = load_model(CLASSIC).unwrap();
        assert_eq!(m.term_count(), 1);
        assert_eq!(m.tau_bound(), 1.0);
        assert_eq!(m.t0(), 0.0);
    }

    #[test]
    fn loads_periodic_two_term_model() {
        let m = load_model(EXAMPLE_43).unwrap();
        assert_eq!(m.term_count(), 2);
        assert!((m.tau_bound() - 0.2).abs() < 1e-15, "{}", m.tau_bound());
    }

    #[test]
    fn negative_delay_is_a_validation_error() {
        let doc = CLASSIC.replace(r#""sigma": {"expr": "1""#, r#""sigma": {"expr": "-0.1""#);
        assert!(matches!(load_model(&doc), Err(ModelError::Validation(_))));
    }

    #[test]
    fn nonpositive_coefficient_is_a_validation_error() {
        let doc = CLASSIC.replace(r#""p": {"expr": "e""#, r#""p": {"expr": "0""#);
        assert!(matches!(load_model(&doc), Err(ModelError::Validation(_))));
    }

    #[test]
    fn schema_errors() {
        let extra = CLASSIC.replace(r#""t0": 0,"#, r#""t0": 0, "bogus": 1,"#);
        assert!(matches!(load_model(&extra), Err(ModelError::Schema(_))));
        let missing = r#"{"terms": [{"tau": {"expr":"1","class":"constant"},
                                     "sigma": {"expr":"1","class":"constant"}}]}"#;
        assert!(matches!(load_model(missing), Err(ModelError::Schema(_))));
        let no_period = CLASSIC.replace(r#""class": "constant"}"#, r#""class": "periodic"}"#);
        assert!(matches!(load_model(&no_period), Err(ModelError::Schema(_))));
        let time_in_constant = CLASSIC.replace(r#""expr": "e""#, r#""expr": "e+t""#);
        assert!(matches!(load_model(&time_in_constant), Err(ModelError::Schema(_))));
    }

    #[test]
    fn parse_errors_name_the_field() {
        let doc = CLASSIC.replace(r#""expr": "e""#, r#""expr": "2*^3""#);
        match load_model(&doc) {
            Err(ModelError::Parse { field, source }) => {
                assert!(field.contains("terms[0].p"), "{field}");
                assert_eq!(source.offset, 2);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn beta_form_derives_missing_coefficients() {
        let doc = r#"{
            "terms": [
              {"tau": {"expr": "1", "class": "constant"}, "sigma": {"expr": "1", "class": "constant"}},
              {"tau": {"expr": "1", "class": "constant"}, "sigma": {"expr": "1", "class": "constant"}}
            ],
            "beta_form": {"beta": {"expr": "1", "class": "constant"},
                          "delta": 1.0, "p": [0.6, 0.5], "a": [0.5, 1.0]}
        }"#;
        let m = load_model(doc).unwrap();
        assert_eq!(m.terms()[1].p.eval(0.0).unwrap(), 0.5);
        assert_eq!(m.terms()[0].a.eval(0.0).unwrap(), 0.5);
        assert_eq!(m.delta().eval(3.0).unwrap(), 1.0);
        let inconsistent = r#"{
            "terms": [
              {"p": {"expr": "0.7", "class": "constant"},
               "tau": {"expr": "1", "class": "constant"}, "sigma": {"expr": "1", "class": "constant"}}
            ],
            "beta_form": {"beta": {"expr": "1", "class": "constant"},
                          "delta": 1.0, "p": [0.6], "a": [0.5]}
        }"#;
        assert!(matches!(load_model(inconsistent), Err(ModelError::Validation(_))));
    }

    #[test]
    fn document_roundtrip() {
        let m = load_model(EXAMPLE_43).unwrap();
        let text = serde_json::to_string(&ModelDocument::from_model(&m)).unwrap();
        let back = load_model(&text).unwrap();
        assert_eq!(back, m);
    }
}
