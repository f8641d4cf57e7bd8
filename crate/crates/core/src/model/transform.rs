//! The equation satisfied by `y = x / x*` for a fixed positive solution `x*`.

use std::sync::Arc;

use thiserror::Error;

use crate::dde::{DdeError, DelayEquation, TermValues, Trajectory};
use crate::expr::EvalError;
use crate::numerics::adaptive_simpson;

use super::{History, ModelError, NicholsonModel};

/// Upper limit on the number of tail points scanned for `Z⁺`.
const Z_SCAN_POINTS: usize = 4000;
const WINDOW_TOL: f64 = 1e-10;
/// Relative slack when checking `m* ≤ x* ≤ M*`.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("trajectory coverage insufficient: {0}")]
    Coverage(String),
    #[error("bounds violated: {0}")]
    Bounds(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dde(#[from] DdeError),
}

/// Coefficients `P_j = p_j x*(t−τ_j)/x*(t)`, `A_j = a_j x*(t−σ_j)` and
/// `D = Σ_j P_j e^{−A_j}`; the transformed equation has the equilibrium 1.
#[derive(Debug, Clone)]
pub struct TransformedModel {
    model: NicholsonModel,
    xstar: Arc<Trajectory>,
    m_star: f64,
    big_m_star: f64,
    z_plus: f64,
    zeta_plus: f64,
}

impl TransformedModel {
    pub fn base(&self) -> &NicholsonModel {
        &self.model
    }

    pub fn solution(&self) -> &Arc<Trajectory> {
        &self.xstar
    }

    pub fn m_star(&self) -> f64 {
        self.m_star
    }

    #[allow(non_snake_case)]
    pub fn M_star(&self) -> f64 {
        self.big_m_star
    }

    /// `max_j limsup [log(x*(t)/x*(t−σ_j)) + ∫_{t−σ_j}^t δ]` over the
    /// trajectory tail.
    pub fn z_plus(&self) -> f64 {
        self.z_plus
    }

    /// ζ⁺ of the underlying model.
    pub fn zeta_plus(&self) -> f64 {
        self.zeta_plus
    }

    /// `log(M*/m*) + ζ⁺`.
    pub fn z_plus_bound(&self) -> f64 {
        (self.big_m_star / self.m_star).ln() + self.zeta_plus
    }

    pub fn z_bound_holds(&self) -> bool {
        self.z_plus <= self.z_plus_bound() + 1e-9 * self.z_plus_bound().abs().max(1.0)
    }

    /// Transformed coefficients at `t`: `(P_j, A_j)` per term and `D(t)`.
    pub fn transformed_at(&self, t: f64) -> Result<(Vec<(f64, f64)>, f64), DdeError> {
        let mut buf = vec![TermValues::default(); self.model.term_count()];
        let d = self.coefficients(t, &mut buf)?;
        Ok((buf.iter().map(|v| (v.p, v.a)).collect(), d))
    }
}

impl DelayEquation for TransformedModel {
    fn term_count(&self) -> usize {
        self.model.term_count()
    }

    fn start_time(&self) -> f64 {
        self.model.t0()
    }

    fn max_delay(&self) -> f64 {
        self.model.tau_bound()
    }

    fn coefficients(&self, t: f64, out: &mut [TermValues]) -> Result<f64, DdeError> {
        let xs = self.xstar.eval_at(t)?;
        let mut d = 0.0;
        for (slot, term) in out.iter_mut().zip(self.model.terms()) {
            let tau = term.tau.eval(t)?;
            let sigma = term.sigma.eval(t)?;
            let p = term.p.eval(t)? * self.xstar.eval_at(t - tau)? / xs;
            let a = term.a.eval(t)? * self.xstar.eval_at(t - sigma)?;
            d += p * (-a).exp();
            *slot = TermValues { p, a, tau, sigma };
        }
        Ok(d)
    }
}

/// Builds the transformed equation about `xstar`, which must cover
/// `[t0 − τ, T]` and stay within `[m_star, M_star]` there.
#[allow(non_snake_case)]
pub fn transform_about_solution(
    model: &NicholsonModel,
    xstar: Arc<Trajectory>,
    m_star: f64,
    M_star: f64,
) -> Result<TransformedModel, TransformError> {
    let t0 = model.t0();
    let tau = model.tau_bound();
    if !(m_star > 0.0 && m_star <= M_star) {
        return Err(TransformError::Bounds(format!(
            "need 0 < m* <= M*, got m* = {m_star}, M* = {M_star}"
        )));
    }
    if xstar.t0() > t0 || xstar.t0() - xstar.tau() > t0 - tau + 1e-12 {
        return Err(TransformError::Coverage(format!(
            "solution starts at {} but the model needs {}",
            xstar.t0() - xstar.tau(),
            t0 - tau
        )));
    }
    if xstar.end_time() < t0 + tau {
        return Err(TransformError::Coverage(format!(
            "solution ends at {} before t0 + τ = {}",
            xstar.end_time(),
            t0 + tau
        )));
    }
    let lo = m_star * (1.0 - BOUND_SLACK);
    let hi = M_star * (1.0 + BOUND_SLACK);
    let check = |t: f64, v: f64| {
        if v < lo || v > hi {
            Err(TransformError::Bounds(format!(
                "x*({t}) = {v} outside [{m_star}, {M_star}]"
            )))
        } else {
            Ok(())
        }
    };
    for (&t, &v) in xstar.times().iter().zip(xstar.values()) {
        if t >= t0 {
            check(t, v)?;
        }
    }
    for i in 0..=64 {
        let t = t0 - tau + tau * i as f64 / 64.0;
        check(t, xstar.eval_at(t)?)?;
    }
    let zeta_plus = crate::criteria::compute_stats(model)?.zeta_plus;
    let z_plus = tail_z_plus(model, &xstar)?;
    Ok(TransformedModel {
        model: model.clone(),
        xstar,
        m_star,
        big_m_star: M_star,
        z_plus,
        zeta_plus,
    })
}

fn tail_z_plus(model: &NicholsonModel, xstar: &Trajectory) -> Result<f64, TransformError> {
    let t0 = model.t0();
    let end = xstar.end_time();
    let start = (t0 + model.tau_bound()).max(t0 + 0.5 * (end - t0));
    let n = Z_SCAN_POINTS.min(
        xstar
            .times()
            .len()
            .saturating_sub(xstar.times().partition_point(|&s| s < start))
            .max(2),
    );
    let delta = model.delta();
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let t = if n == 1 { end } else { start + (end - start) * i as f64 / (n - 1) as f64 };
        for term in model.terms() {
            let sigma = term.sigma.eval(t).map_err(ModelError::from)?;
            let window = adaptive_simpson(&|s| delta.eval(s), t - sigma, t, WINDOW_TOL)
                .map_err(ModelError::from)?;
            let ratio = xstar.eval_at(t)? / xstar.eval_at(t - sigma)?;
            best = best.max(ratio.ln() + window);
        }
    }
    Ok(best)
}

/// The history `φ / x*` on `[−τ, 0]`.
#[derive(Debug, Clone)]
pub struct RatioHistory {
    phi: Arc<dyn History>,
    xstar: Arc<Trajectory>,
}

impl RatioHistory {
    pub fn new(phi: Arc<dyn History>, xstar: Arc<Trajectory>) -> Self {
        RatioHistory { phi, xstar }
    }

    fn xstar_at(&self, theta: f64) -> Result<(f64, f64), EvalError> {
        let t = self.xstar.t0() + theta;
        let x = self.xstar.eval_at(t).map_err(|_| EvalError::NonFinite)?;
        let dx = self.xstar.derivative_at(t).map_err(|_| EvalError::NonFinite)?;
        Ok((x, dx))
    }
}

impl History for RatioHistory {
    fn value(&self, theta: f64) -> Result<f64, EvalError> {
        let (x, _) = self.xstar_at(theta)?;
        Ok(self.phi.value(theta)? / x)
    }

    fn slope(&self, theta: f64) -> Result<f64, EvalError> {
        let (x, dx) = self.xstar_at(theta)?;
        let v = self.phi.value(theta)?;
        Ok((self.phi.slope(theta)? * x - v * dx) / (x * x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dde::{integrate, IntegrateOptions};
    use crate::model::{ScalarField, Term};

    fn classic() -> NicholsonModel {
        NicholsonModel::autonomous(1.0, &[(std::f64::consts::E, 1.0, 1.0, 1.0)]).unwrap()
    }

    #[test]
    fn constant_solution_leaves_coefficients_unchanged() {
        let m = classic();
        let xstar = Arc::new(
            integrate(&m, Arc::new(1.0), 30.0, 0.01, &IntegrateOptions::default()).unwrap(),
        );
        let tm = transform_about_solution(&m, xstar, 1.0 - 1e-12, 1.0 + 1e-12).unwrap();
        let (coef, d) = tm.transformed_at(12.3).unwrap();
        assert!((coef[0].0 - std::f64::consts::E).abs() < 1e-12);
        assert!((coef[0].1 - 1.0).abs() < 1e-12);
        assert!((d - 1.0).abs() < 1e-12);
        assert!((tm.z_plus() - tm.zeta_plus()).abs() < 1e-9);
        assert!((tm.zeta_plus() - 1.0).abs() < 1e-12);
        assert!(tm.z_bound_holds());
    }

    #[test]
    fn identity_for_nonconstant_solution() {
        let delta = ScalarField::periodic("1+0.5*cos(2*pi*t)", 1.0).unwrap();
        let p = ScalarField::periodic("2*(1+0.5*cos(2*pi*t))", 1.0).unwrap();
        let tau = ScalarField::periodic("0.1*(1+cos(2*pi*t))", 1.0).unwrap();
        let term = Term::new(p, ScalarField::constant(1.0), tau, ScalarField::constant(0.2));
        let m = NicholsonModel::new(vec![term], delta, 0.0, None).unwrap();
        let xstar = Arc::new(
            integrate(&m, Arc::new(0.3), 20.0, 0.01, &IntegrateOptions::default()).unwrap(),
        );
        let (lo, hi) = xstar.tail_extrema(0.0);
        let (lo, hi) = (lo.min(0.3), hi.max(0.3));
        let tm = transform_about_solution(&m, xstar.clone(), lo, hi).unwrap();
        for i in 0..1000 {
            let t = 0.5 + 19.0 * i as f64 / 999.0;
            let (coef, d) = tm.transformed_at(t).unwrap();
            let direct: f64 = coef.iter().map(|(p, a)| p * (-a).exp()).sum();
            assert!((d - direct).abs() <= 1e-12 * d.abs());
            let x = xstar.eval_at(t).unwrap();
            let xt = xstar.eval_at(t - m.terms()[0].tau.eval(t).unwrap()).unwrap();
            let p = m.terms()[0].p.eval(t).unwrap();
            assert!((coef[0].0 - p * xt / x).abs() <= 1e-12 * coef[0].0);
        }
        assert!(tm.z_bound_holds());
    }

    #[test]
    fn rejects_bad_bounds_and_coverage() {
        let m = classic();
        let xstar = Arc::new(
            integrate(&m, Arc::new(0.5), 10.0, 0.01, &IntegrateOptions::default()).unwrap(),
        );
        assert!(matches!(
            transform_about_solution(&m, xstar.clone(), 0.9, 1.1),
            Err(TransformError::Bounds(_))
        ));
        let short = Arc::new(
            integrate(&m, Arc::new(1.0), 0.5, 0.01, &IntegrateOptions::default()).unwrap(),
        );
        assert!(matches!(
            transform_about_solution(&m, short, 0.5, 2.0),
            Err(TransformError::Coverage(_))
        ));
    }
}
