use std::fmt;

use crate::expr::{EvalError, Expression};

/// Initial segment `φ` on `[−τ, 0]`, evaluated at `θ = t − t0`.
pub trait History: Send + Sync + fmt::Debug {
    fn value(&self, theta: f64) -> Result<f64, EvalError>;

    /// Slope of the segment; central differences unless overridden.
    fn slope(&self, theta: f64) -> Result<f64, EvalError> {
        let h = 1e-6 * theta.abs().max(1.0);
        Ok((self.value(theta + h)? - self.value(theta - h)?) / (2.0 * h))
    }
}

impl History for f64 {
    fn value(&self, _theta: f64) -> Result<f64, EvalError> {
        Ok(*self)
    }

    fn slope(&self, _theta: f64) -> Result<f64, EvalError> {
        Ok(0.0)
    }
}

/// A history given by an expression in which `t` stands for `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryFunction {
    pub expr: Expression,
}

impl HistoryFunction {
    pub fn new(expr: Expression) -> Self {
        HistoryFunction { expr }
    }

    pub fn parse(source: &str) -> Result<Self, crate::expr::ParseError> {
        Ok(HistoryFunction::new(Expression::parse(source)?))
    }
}

impl History for HistoryFunction {
    fn value(&self, theta: f64) -> Result<f64, EvalError> {
        self.expr.eval(theta)
    }
}

/// Cubic Hermite interpolant through `(θ_i, x_i, x'_i)` nodes covering
/// `[−τ, 0]`; a single node represents a zero-length segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledHistory {
    thetas: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl SampledHistory {
    pub fn new(thetas: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert!(
            !thetas.is_empty() && thetas.len() == values.len() && thetas.len() == slopes.len(),
            "sampled history needs matching, nonempty node arrays"
        );
        debug_assert!(thetas.windows(2).all(|w| w[0] < w[1]));
        SampledHistory {
            thetas,
            values,
            slopes,
        }
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    fn segment(&self, theta: f64) -> usize {
        let i = self.thetas.partition_point(|&s| s <= theta);
        i.clamp(1, self.thetas.len() - 1) - 1
    }
}

impl History for SampledHistory {
    fn value(&self, theta: f64) -> Result<f64, EvalError> {
        if self.thetas.len() == 1 {
            return Ok(self.values[0]);
        }
        let i = self.segment(theta);
        Ok(crate::dde::hermite_value(
            self.thetas[i],
            self.values[i],
            self.slopes[i],
            self.thetas[i + 1],
            self.values[i + 1],
            self.slopes[i + 1],
            theta,
        ))
    }

    fn slope(&self, theta: f64) -> Result<f64, EvalError> {
        if self.thetas.len() == 1 {
            return Ok(self.slopes[0]);
        }
        let i = self.segment(theta);
        Ok(crate::dde::hermite_slope(
            self.thetas[i],
            self.values[i],
            self.slopes[i],
            self.thetas[i + 1],
            self.values[i + 1],
            self.slopes[i + 1],
            theta,
        ))
    }
}

/// Grid used for admissibility checks of a history.
const ADMISSIBILITY_GRID: usize = 256;

/// Checks `φ ≥ 0` on a grid of `[−τ, 0)` and `φ(0) > 0`.
pub fn check_admissible(history: &dyn History, tau: f64) -> Result<(), String> {
    let at_zero = history
        .value(0.0)
        .map_err(|e| format!("history cannot be evaluated at 0: {e}"))?;
    if !(at_zero > 0.0) {
        return Err(format!("history must be positive at 0, found {at_zero}"));
    }
    if tau > 0.0 {
        for i in 0..ADMISSIBILITY_GRID {
            let theta = -tau + tau * i as f64 / ADMISSIBILITY_GRID as f64;
            let v = history
                .value(theta)
                .map_err(|e| format!("history cannot be evaluated at {theta}: {e}"))?;
            if !(v >= 0.0) {
                return Err(format!("history is negative at {theta}: {v}"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissibility() {
        assert!(check_admissible(&1.0, 1.0).is_ok());
        assert!(check_admissible(&0.0, 1.0).is_err());
        let dips = HistoryFunction::parse("1+2*t").unwrap();
        assert!(check_admissible(&dips, 1.0).is_err());
        let zero_before = HistoryFunction::parse("(t+1)^2").unwrap();
        assert!(check_admissible(&zero_before, 1.0).is_ok());
    }

    #[test]
    fn sampled_history_reproduces_cubics() {
        // exp(θ) sampled at 33 nodes
        let thetas: Vec<f64> = (0..=32).map(|i| -1.0 + i as f64 / 32.0).collect();
        let values: Vec<f64> = thetas.iter().map(|t| t.exp()).collect();
        let h = SampledHistory::new(thetas.clone(), values.clone(), values);
        for k in 0..100 {
            let theta = -1.0 + k as f64 / 99.0;
            assert!((h.value(theta).unwrap() - theta.exp()).abs() < 1e-8);
            assert!((h.slope(theta).unwrap() - theta.exp()).abs() < 1e-5);
        }
        assert_eq!(h.value(thetas[5]).unwrap(), thetas[5].exp());
    }
}
