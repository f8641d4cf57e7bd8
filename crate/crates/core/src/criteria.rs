//! Asymptotic statistics of a model, permanence bounds, the positive
//! equilibrium and the sufficient conditions for permanence, extinction and
//! global attractivity.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::expr::{BinaryOp, Node};
use crate::model::{
    validate_a0, A0Report, EvalDomain, FieldClass, Horizon, ModelError, NicholsonModel,
    ScalarField,
};
use crate::numerics::{adaptive_simpson, bisect, golden_section, grid_extremum, Extremum, EXTREMUM_GRID};

/// Absolute tolerance of every inner window integral.
pub const WINDOW_TOL: f64 = 1e-10;
/// Relative residual below which a time-varying equilibrium is accepted.
pub const K1_TOLERANCE: f64 = 1e-8;
/// Grid points of the hypothesis checks run by [`evaluate`].
pub const A0_GRID: usize = 256;
/// Slack of the pointwise inequality `p ≥ e^D δ`.
pub const PERIODIC1_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error("alpha = {0} <= 1: permanence is not certified")]
    AlphaNotAboveOne(f64),
    #[error("model is not in factored (beta) form")]
    NotBetaForm,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `sup` (or `inf`) over `t` of `∫_{t−w(t)}^t f(s) ds`.
///
/// `t` ranges over one common period, or over the common scan horizon when a
/// generic field is present; the result is then flagged horizon-limited.
pub fn sliding_window_integral(
    f: &ScalarField,
    w: &ScalarField,
    mode: Extremum,
    t0: f64,
) -> Result<crate::model::Bound, ModelError> {
    let domain = EvalDomain::common(&[f, w], t0)?;
    let window = |t: f64| -> Result<f64, ModelError> {
        let width = w.eval(t)?;
        Ok(adaptive_simpson(&|s| f.eval(s), t - width, t, WINDOW_TOL)?)
    };
    let (_, value) = domain.extremum(&window, mode)?;
    Ok(crate::model::Bound {
        value,
        horizon_limited: domain.is_horizon_limited(),
    })
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticStats {
    pub alpha: f64,
    pub gamma: f64,
    /// `limsup ∫_{t−τ}^t δ`.
    pub D: f64,
    /// `limsup ∫_{t−τ}^t p`.
    pub P: f64,
    pub zeta_plus: f64,
    pub per_j_zeta: Vec<f64>,
    /// `limsup ∫_{t−τ}^t β` for factored models.
    pub beta_C: Option<f64>,
    pub beta_zeta_plus: Option<f64>,
    pub horizon_limited: bool,
}

/// The ratio field `p(t)/δ(t)`.
pub fn ratio_field(model: &NicholsonModel) -> Result<ScalarField, ModelError> {
    let p = model.p_total()?;
    let node = Node::binary(BinaryOp::Div, p.expr.node().clone(), model.delta().expr.node().clone());
    ScalarField::combined(node, &[&p, model.delta()])
}

pub fn compute_stats(model: &NicholsonModel) -> Result<AsymptoticStats, ModelError> {
    let t0 = model.t0();
    let ratio = ratio_field(model)?;
    let domain = EvalDomain::common(&model.fields(), t0)?;
    let (_, alpha) = domain.extremum(&|t| ratio.eval(t), Extremum::Inf)?;
    let (_, gamma) = domain.extremum(&|t| ratio.eval(t), Extremum::Sup)?;
    let mut limited = domain.is_horizon_limited();

    let tau = ScalarField::constant(model.tau_bound());
    let p = model.p_total()?;
    let d = sliding_window_integral(model.delta(), &tau, Extremum::Sup, t0)?;
    let big_p = sliding_window_integral(&p, &tau, Extremum::Sup, t0)?;
    limited |= d.horizon_limited || big_p.horizon_limited;

    let mut per_j_zeta = Vec::with_capacity(model.term_count());
    for term in model.terms() {
        let z = sliding_window_integral(model.delta(), &term.sigma, Extremum::Sup, t0)?;
        limited |= z.horizon_limited;
        per_j_zeta.push(z.value);
    }
    let zeta_plus = per_j_zeta.iter().copied().fold(0.0, f64::max);

    let (beta_c, beta_zeta) = match model.beta_form() {
        Some(form) => {
            let c = sliding_window_integral(&form.beta, &tau, Extremum::Sup, t0)?;
            let mut z = 0.0f64;
            for term in model.terms() {
                let zj = sliding_window_integral(&form.beta, &term.sigma, Extremum::Sup, t0)?;
                limited |= zj.horizon_limited;
                z = z.max(zj.value);
            }
            limited |= c.horizon_limited;
            (Some(c.value), Some(z))
        }
        None => (None, None),
    };

    Ok(AsymptoticStats {
        alpha,
        gamma,
        D: d.value,
        P: big_p.value,
        zeta_plus,
        per_j_zeta,
        beta_C: beta_c,
        beta_zeta_plus: beta_zeta,
        horizon_limited: limited,
    })
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    pub K: f64,
    /// `sup_t |δ(t) − Σ p_j(t) e^{−a_j(t) K}|`; zero when the identity holds
    /// exactly.
    pub residual: f64,
    pub exact: bool,
}

/// Root of `F(K) = Σ p_j e^{−a_j K} − δ` for constant coefficients, `None`
/// when `p ≤ δ`.
pub fn solve_constant_equilibrium(delta: f64, p: &[f64], a: &[f64]) -> Option<f64> {
    let total: f64 = p.iter().sum();
    if !(total > delta) {
        return None;
    }
    let (lo, hi) = equilibrium_bracket(delta, p, a);
    let f = |k: f64| p.iter().zip(a).map(|(p, a)| p * (-a * k).exp()).sum::<f64>() - delta;
    if lo == hi {
        return Some(lo);
    }
    bisect(f, lo, hi, 1e-12 * delta)
}

/// `[log(p/δ)/a⁺, log(p/δ)/a⁻]`, on which `F` changes sign.
pub fn equilibrium_bracket(delta: f64, p: &[f64], a: &[f64]) -> (f64, f64) {
    let total: f64 = p.iter().sum();
    let a_plus = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a_minus = a.iter().copied().fold(f64::INFINITY, f64::min);
    let l = (total / delta).ln();
    (l / a_plus, l / a_minus)
}

/// The positive equilibrium, if one exists.
///
/// Constant coefficients and factored models are solved by bisection. For
/// other time-varying models the `K` minimizing the sup-grid residual is
/// returned together with that residual.
pub fn solve_equilibrium(model: &NicholsonModel) -> Result<Option<Equilibrium>, ModelError> {
    if let Some(form) = model.beta_form() {
        return Ok(solve_constant_equilibrium(form.delta, &form.p, &form.a).map(|k| Equilibrium {
            K: k,
            residual: 0.0,
            exact: true,
        }));
    }
    let t0 = model.t0();
    if model.is_autonomous() {
        let delta = model.delta().eval(t0)?;
        let mut p = Vec::new();
        let mut a = Vec::new();
        for term in model.terms() {
            p.push(term.p.eval(t0)?);
            a.push(term.a.eval(t0)?);
        }
        return Ok(solve_constant_equilibrium(delta, &p, &a).map(|k| Equilibrium {
            K: k,
            residual: 0.0,
            exact: true,
        }));
    }

    let ratio = ratio_field(model)?;
    let domain = EvalDomain::common(&model.fields(), t0)?;
    let (_, gamma) = domain.extremum(&|t| ratio.eval(t), Extremum::Sup)?;
    let (_, alpha) = domain.extremum(&|t| ratio.eval(t), Extremum::Inf)?;
    if !(gamma > 1.0) {
        return Ok(None);
    }
    let (mut a_lo, mut a_hi) = (f64::INFINITY, 0.0f64);
    for term in model.terms() {
        a_lo = a_lo.min(term.a.extremum(t0, Extremum::Inf)?.value);
        a_hi = a_hi.max(term.a.extremum(t0, Extremum::Sup)?.value);
    }
    if !(a_lo > 0.0) {
        return Ok(None);
    }
    let lo = if alpha > 1.0 { alpha.ln() / a_hi } else { 0.0 };
    let hi = gamma.ln() / a_lo;

    let (tl, th) = domain.interval();
    let times: Vec<f64> = (0..=EXTREMUM_GRID)
        .map(|i| tl + (th - tl) * i as f64 / EXTREMUM_GRID as f64)
        .collect();
    let mut coeffs = Vec::with_capacity(times.len());
    for &t in &times {
        let mut row = Vec::with_capacity(model.term_count());
        for term in model.terms() {
            row.push((term.p.eval(t)?, term.a.eval(t)?));
        }
        coeffs.push((model.delta().eval(t)?, row));
    }
    let grid_residual = |k: f64| -> Result<f64, ModelError> {
        Ok(coeffs
            .iter()
            .map(|(d, row)| (d - row.iter().map(|(p, a)| p * (-a * k).exp()).sum::<f64>()).abs())
            .fold(0.0, f64::max))
    };
    const SCAN: usize = 256;
    let mut best = (lo, grid_residual(lo)?);
    let mut best_i = 0;
    for i in 1..=SCAN {
        let k = lo + (hi - lo) * i as f64 / SCAN as f64;
        let r = grid_residual(k)?;
        if r < best.1 {
            best = (k, r);
            best_i = i;
        }
    }
    let step = (hi - lo) / SCAN as f64;
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    let (k, _) = golden_section(&grid_residual, a, b, Extremum::Inf, 1e-12 * hi.max(1e-300))?;
    let k = if grid_residual(k)? <= best.1 { k } else { best.0 };
    if !(k > 0.0) {
        return Ok(None);
    }
    let residual_at = |t: f64| -> Result<f64, ModelError> {
        let mut s = 0.0;
        for term in model.terms() {
            s += term.p.eval(t)? * (-term.a.eval(t)? * k).exp();
        }
        Ok((model.delta().eval(t)? - s).abs())
    };
    let (_, residual) = domain.extremum(&residual_at, Extremum::Sup)?;
    Ok(Some(Equilibrium {
        K: k,
        residual,
        exact: false,
    }))
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermanenceBounds {
    pub m: f64,
    pub M: f64,
}

/// `m = log(α) e^{−(2D+P)}/a⁺`, `M = log(γ) e^{2(D+P)}/a⁻`.
pub fn permanence_bounds(
    stats: &AsymptoticStats,
    a_minus: f64,
    a_plus: f64,
) -> Result<PermanenceBounds, CriteriaError> {
    if !(stats.alpha > 1.0) {
        return Err(CriteriaError::AlphaNotAboveOne(stats.alpha));
    }
    Ok(PermanenceBounds {
        m: stats.alpha.ln() * (-(2.0 * stats.D + stats.P)).exp() / a_plus,
        M: stats.gamma.ln() * (2.0 * (stats.D + stats.P)).exp() / a_minus,
    })
}

/// Bounds `K e^{−(2δ+p)C}` and `K e^{2(δ+p)C}` of the factored form.
pub fn beta_form_bounds(
    model: &NicholsonModel,
    stats: &AsymptoticStats,
    k: f64,
) -> Result<PermanenceBounds, CriteriaError> {
    let form = model.beta_form().ok_or(CriteriaError::NotBetaForm)?;
    let c = stats.beta_C.ok_or(CriteriaError::NotBetaForm)?;
    let p = form.p_total();
    Ok(PermanenceBounds {
        m: k * (-(2.0 * form.delta + p) * c).exp(),
        M: k * (2.0 * (form.delta + p) * c).exp(),
    })
}

/// How a margin decides a verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Comparison {
    AtMost(f64),
    Below(f64),
    Above(f64),
    AtLeast(f64),
    Finite,
}

impl Comparison {
    pub fn holds(&self, margin: f64) -> bool {
        match *self {
            Comparison::AtMost(c) => margin <= c,
            Comparison::Below(c) => margin < c,
            Comparison::Above(c) => margin > c,
            Comparison::AtLeast(c) => margin >= c,
            Comparison::Finite => margin.is_finite(),
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Comparison::AtMost(c) => write!(f, "<= {c:?}"),
            Comparison::Below(c) => write!(f, "< {c:?}"),
            Comparison::Above(c) => write!(f, "> {c:?}"),
            Comparison::AtLeast(c) => write!(f, ">= {c:?}"),
            Comparison::Finite => f.write_str("finite"),
        }
    }
}

impl Serialize for Comparison {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub margin: f64,
    pub comparison: Comparison,
    pub horizon_limited: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    /// A verdict decided by its margin alone.
    pub fn from_margin(margin: f64, comparison: Comparison) -> Self {
        Verdict {
            pass: comparison.holds(margin),
            margin,
            comparison,
            horizon_limited: false,
            note: None,
        }
    }

    pub fn limited(mut self, horizon_limited: bool) -> Self {
        self.horizon_limited = horizon_limited;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

pub fn check_k2(k: f64, a_plus: f64, zeta_plus: f64) -> Verdict {
    Verdict::from_margin(a_plus * k * zeta_plus.exp_m1(), Comparison::AtMost(1.0))
}

pub fn check_k2_star(a_minus: f64, a_plus: f64, gamma: f64, zeta_plus: f64) -> Verdict {
    Verdict::from_margin(
        a_plus / a_minus * zeta_plus.exp_m1() * gamma.ln(),
        Comparison::AtMost(1.0),
    )
}

pub fn check_h3(k: f64, a_plus: f64, delta: f64, beta_zeta_plus: f64) -> Verdict {
    Verdict::from_margin(
        a_plus * k * (delta * beta_zeta_plus).exp_m1(),
        Comparison::AtMost(1.0),
    )
}

pub fn check_a4(m_star: f64, big_m_star: f64, a_plus: f64, zeta_plus: f64) -> Verdict {
    Verdict::from_margin(
        a_plus * big_m_star * (big_m_star / m_star * zeta_plus.exp() - 1.0),
        Comparison::AtMost(1.0),
    )
}

pub fn check_a5(stats: &AsymptoticStats, a_minus: f64, a_plus: f64) -> Verdict {
    a5_verdict(
        a_minus,
        a_plus,
        stats.alpha,
        stats.gamma,
        stats.D,
        stats.P,
        stats.zeta_plus,
    )
    .limited(stats.horizon_limited)
}

/// The (A5) left-hand side from explicit statistics.
#[allow(non_snake_case)]
pub fn a5_verdict(
    a_minus: f64,
    a_plus: f64,
    alpha: f64,
    gamma: f64,
    D: f64,
    P: f64,
    zeta_plus: f64,
) -> Verdict {
    let lg = gamma.ln();
    let inner = a_plus * lg / (a_minus * alpha.ln()) * (4.0 * D + 3.0 * P + zeta_plus).exp() - 1.0;
    let margin = a_plus / a_minus * lg * (2.0 * (D + P)).exp() * inner;
    Verdict::from_margin(margin, Comparison::Below(1.0))
}

/// Passes iff `sup p/δ ≤ 1`.
pub fn check_extinction(model: &NicholsonModel) -> Result<Verdict, ModelError> {
    let ratio = ratio_field(model)?;
    let domain = EvalDomain::common(&model.fields(), model.t0())?;
    let (_, gamma) = domain.extremum(&|t| ratio.eval(t), Extremum::Sup)?;
    Ok(Verdict::from_margin(gamma, Comparison::AtMost(1.0)).limited(domain.is_horizon_limited()))
}

/// Quarter-rate test for `∫ f = ∞` on a finite horizon: the mean growth rate
/// over the last quarter must be at least half the overall mean rate.
fn divergence_test(f: &ScalarField, h: Horizon) -> Result<Verdict, ModelError> {
    let q = h.len() / 4.0;
    let mut parts = [0.0; 4];
    for (k, part) in parts.iter_mut().enumerate() {
        let a = h.start + q * k as f64;
        *part = adaptive_simpson(&|s| f.eval(s), a, a + q, WINDOW_TOL)?;
    }
    let mean = parts.iter().sum::<f64>() / h.len();
    let last = parts[3] / q;
    let ratio = if mean > 0.0 { last / mean } else { 0.0 };
    Ok(Verdict::from_margin(ratio, Comparison::AtLeast(0.5))
        .limited(true)
        .with_note(format!(
            "last-quarter mean rate {last:.6e} against overall mean rate {mean:.6e} on [{}, {}]",
            h.start, h.end
        )))
}

/// `∫_{t0}^∞ f = ∞` for a positive field: exact for constant or periodic
/// classes through the mean over one period.
fn check_divergent_integral(f: &ScalarField, t0: f64) -> Result<Verdict, ModelError> {
    match f.class {
        FieldClass::Constant => {
            let v = f.eval(t0)?;
            Ok(Verdict::from_margin(v, Comparison::Above(0.0)))
        }
        FieldClass::Periodic(w) => {
            let mean = adaptive_simpson(&|s| f.eval(s), t0, t0 + w, WINDOW_TOL)? / w;
            Ok(Verdict::from_margin(mean, Comparison::Above(0.0)))
        }
        FieldClass::Generic => {
            let h = f
                .scan
                .ok_or_else(|| ModelError::MissingScanHorizon(f.expr.to_string()))?;
            divergence_test(f, h)
        }
    }
}

/// (A1), (A2), (A3) from precomputed statistics.
pub fn check_a1_a2_a3(
    model: &NicholsonModel,
    stats: &AsymptoticStats,
) -> Result<[Verdict; 3], ModelError> {
    let a1 = Verdict {
        pass: stats.alpha > 1.0 && stats.gamma.is_finite(),
        margin: stats.alpha,
        comparison: Comparison::Above(1.0),
        horizon_limited: stats.horizon_limited,
        note: None,
    };

    let t0 = model.t0();
    let p = model.p_total()?;
    let a2 = match EvalDomain::common(&[&p], t0)? {
        EvalDomain::Horizon(h) => {
            // growth of the window integral across quarters of the horizon
            let tau = ScalarField::constant(model.tau_bound());
            let q = h.len() / 4.0;
            let mut sups = [0.0; 4];
            for (k, s) in sups.iter_mut().enumerate() {
                let mut part = p.clone();
                part.scan = Some(Horizon::new(h.start + q * k as f64, h.start + q * (k + 1) as f64));
                *s = sliding_window_integral(&part, &tau, Extremum::Sup, t0)?.value;
            }
            let growing = sups.windows(2).all(|w| w[0] < w[1]) && sups[3] > 2.0 * sups[0];
            let mut v = Verdict::from_margin(stats.P, Comparison::Finite).limited(true);
            if growing {
                v.pass = false;
                v.note = Some(format!("window integral of p grows across the horizon: {sups:?}"));
            }
            v
        }
        _ => Verdict::from_margin(stats.P, Comparison::Finite),
    };

    let a3 = check_divergent_integral(model.delta(), t0)?;
    Ok([a1, a2, a3])
}

/// Verdicts specific to periodic models.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicVerdicts {
    pub omega: f64,
    /// `∫_0^ω δ`.
    pub D: f64,
    /// `max p/δ` over one period.
    pub gamma: f64,
    pub integral_p: f64,
    pub periodic1: Verdict,
    pub periodic2: Verdict,
    pub alternative: Verdict,
}

/// Existence and attractivity conditions for an `omega`-periodic model.
pub fn check_periodic_conditions(
    model: &NicholsonModel,
    omega: f64,
    a_minus: f64,
    a_plus: f64,
    zeta_plus: f64,
) -> Result<PeriodicVerdicts, ModelError> {
    let t0 = model.t0();
    EvalDomain::with_period(&model.fields(), t0, omega)?;
    let delta = model.delta();
    let p = model.p_total()?;
    let d = adaptive_simpson(&|s| delta.eval(s), t0, t0 + omega, WINDOW_TOL)?;
    let integral_p = adaptive_simpson(&|s| p.eval(s), t0, t0 + omega, WINDOW_TOL)?;
    let ed = d.exp();

    let mut lowest = f64::INFINITY;
    let mut highest = f64::NEG_INFINITY;
    for i in 0..EXTREMUM_GRID {
        let t = t0 + omega * i as f64 / EXTREMUM_GRID as f64;
        let diff = p.eval(t)? - ed * delta.eval(t)?;
        lowest = lowest.min(diff);
        highest = highest.max(diff);
    }
    let mut periodic1 = Verdict::from_margin(lowest, Comparison::AtLeast(-PERIODIC1_SLACK));
    periodic1.pass &= highest > PERIODIC1_SLACK;
    periodic1.note = Some(format!(
        "min of p - e^D delta is {lowest:.6e}, max is {highest:.6e}"
    ));

    let ratio = ratio_field(model)?;
    let (_, gamma) = grid_extremum(&|t| ratio.eval(t), t0, t0 + omega, Extremum::Sup)?;
    let periodic2 = Verdict::from_margin(
        a_plus / a_minus * ed * gamma.ln() * (d + zeta_plus).exp_m1(),
        Comparison::AtMost(1.0),
    )
    .with_note("gamma taken over one period");
    let alternative = Verdict::from_margin(integral_p, Comparison::AtLeast(ed * (ed - 1.0)));
    Ok(PeriodicVerdicts {
        omega,
        D: d,
        gamma,
        integral_p,
        periodic1,
        periodic2,
        alternative,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CriteriaOptions {
    /// Period for the periodic conditions; inferred when all fields are
    /// periodic or constant with at least one periodic field.
    pub omega: Option<f64>,
    /// Bounds `(m*, M*)` of a known solution, enabling (A4).
    pub solution_bounds: Option<(f64, f64)>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBounds {
    pub m: Option<f64>,
    pub M: Option<f64>,
    pub beta_form: Option<PermanenceBounds>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriteriaReport {
    pub stats: AsymptoticStats,
    pub K: Option<Equilibrium>,
    pub bounds: ReportBounds,
    pub a_minus: Option<f64>,
    pub a_plus: Option<f64>,
    pub a0: A0Report,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periodic: Option<PeriodicVerdicts>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub notes: Vec<String>,
}

impl CriteriaReport {
    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.get(name)
    }

    pub fn passes(&self, name: &str) -> bool {
        self.verdict(name).is_some_and(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Evaluates every applicable criterion.
pub fn evaluate(model: &NicholsonModel, opts: &CriteriaOptions) -> Result<CriteriaReport, ModelError> {
    let t0 = model.t0();
    let a0 = validate_a0(model, A0_GRID);
    let stats = compute_stats(model)?;
    let a_minus = a0.a_minus.map(|b| b.value).filter(|v| *v > 0.0);
    let a_plus = a0.a_plus.map(|b| b.value).filter(|v| v.is_finite());
    let equilibrium = solve_equilibrium(model)?;
    let mut verdicts = BTreeMap::new();
    let mut notes = Vec::new();
    let limited = stats.horizon_limited;

    verdicts.insert(
        "A0".to_string(),
        Verdict {
            pass: a0.pass,
            margin: a0.failures().count() as f64,
            comparison: Comparison::AtMost(0.0),
            horizon_limited: limited,
            note: (!a0.pass).then(|| {
                a0.failures()
                    .filter_map(|c| c.message.clone())
                    .collect::<Vec<_>>()
                    .join("; ")
            }),
        },
    );
    let [a1, a2, a3] = check_a1_a2_a3(model, &stats)?;
    let a3_pass = a3.pass;
    let mut extinction = check_extinction(model)?;
    if !a3_pass {
        extinction.note = Some("divergence of the integral of delta not certified".into());
    }
    verdicts.insert("extinction".into(), extinction);
    let permanent = a1.pass && a2.pass && a3.pass;
    verdicts.insert("A1".into(), a1);
    verdicts.insert("A2".into(), a2);
    verdicts.insert("A3".into(), a3);

    let mut bounds = ReportBounds {
        m: None,
        M: None,
        beta_form: None,
    };
    match (a_minus, a_plus) {
        (Some(lo), Some(hi)) => match permanence_bounds(&stats, lo, hi) {
            Ok(b) if permanent => {
                bounds.m = Some(b.m);
                bounds.M = Some(b.M);
            }
            Ok(_) => notes.push("permanence bounds omitted: (A1)-(A3) not all certified".into()),
            Err(e) => notes.push(format!("permanence bounds: {e}")),
        },
        _ => notes.push("a^- or a^+ not established; bounds and attractivity criteria skipped".into()),
    }

    if let Some(eq) = equilibrium {
        let sup_delta = model.delta().extremum(t0, Extremum::Sup)?.value;
        let v = Verdict::from_margin(eq.residual / sup_delta, Comparison::Below(K1_TOLERANCE))
            .limited(limited);
        verdicts.insert("K1".into(), v);
    } else {
        notes.push("no positive equilibrium: K1, K2, K2*, H3 not applicable".into());
    }

    if let (Some(lo), Some(hi)) = (a_minus, a_plus) {
        if let Some(eq) = equilibrium.filter(|e| e.K > 0.0) {
            verdicts.insert("K2".into(), check_k2(eq.K, hi, stats.zeta_plus).limited(limited));
            if stats.gamma > 1.0 {
                verdicts.insert(
                    "K2*".into(),
                    check_k2_star(lo, hi, stats.gamma, stats.zeta_plus).limited(limited),
                );
            }
        }
        if stats.alpha > 1.0 {
            verdicts.insert("A5".into(), check_a5(&stats, lo, hi));
        } else {
            notes.push("A5 not applicable: alpha <= 1".into());
        }
        if let Some((m_star, big_m_star)) = opts.solution_bounds {
            verdicts.insert(
                "A4".into(),
                check_a4(m_star, big_m_star, hi, stats.zeta_plus).limited(limited),
            );
        }
    }

    if let Some(form) = model.beta_form() {
        let beta = &form.beta;
        let inf_beta = beta.extremum(t0, Extremum::Inf)?;
        let constants_positive =
            form.delta > 0.0 && form.p.iter().all(|&v| v > 0.0) && form.a.iter().all(|&v| v > 0.0);
        let delays_ok = a0
            .clauses
            .iter()
            .filter(|c| c.clause.starts_with("tau") || c.clause.starts_with("sigma"))
            .all(|c| c.pass);
        let mut h0 = Verdict::from_margin(inf_beta.value, Comparison::Above(0.0))
            .limited(inf_beta.horizon_limited);
        h0.pass &= constants_positive && delays_ok;
        verdicts.insert("H0".into(), h0);
        verdicts.insert("H1".into(), check_divergent_integral(beta, t0)?);
        let c = stats.beta_C.expect("factored model has C");
        verdicts.insert("H2".into(), Verdict::from_margin(c, Comparison::Finite).limited(limited));
        if let (Some(eq), Some(hi)) = (equilibrium, a_plus) {
            let z = stats.beta_zeta_plus.expect("factored model has beta zeta");
            verdicts.insert("H3".into(), check_h3(eq.K, hi, form.delta, z).limited(limited));
            if let Ok(b) = beta_form_bounds(model, &stats, eq.K) {
                bounds.beta_form = Some(b);
            }
        }
    }

    let omega = match opts.omega {
        Some(w) => Some(w),
        None => match EvalDomain::common(&model.fields(), t0)? {
            EvalDomain::Period { length, .. } => Some(length),
            _ => None,
        },
    };
    let mut periodic = None;
    match (omega, a_minus, a_plus) {
        (Some(w), Some(lo), Some(hi)) => match check_periodic_conditions(model, w, lo, hi, stats.zeta_plus) {
            Ok(pv) => {
                verdicts.insert("periodic1".into(), pv.periodic1.clone());
                verdicts.insert("periodic2".into(), pv.periodic2.clone());
                verdicts.insert("periodic_alt".into(), pv.alternative.clone());
                periodic = Some(pv);
            }
            Err(e) => notes.push(format!("periodic conditions not applicable: {e}")),
        },
        (Some(_), _, _) => notes.push("periodic conditions need a^- and a^+".into()),
        _ => notes.push("periodic conditions not applicable: model has no common period".into()),
    }

    Ok(CriteriaReport {
        stats,
        K: equilibrium,
        bounds,
        a_minus,
        a_plus,
        a0,
        periodic,
        verdicts,
        notes,
    })
}
