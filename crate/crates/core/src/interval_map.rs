//! The scalar map `h(x) = θ₀K / (1 − g(x)(1 − θ₀))`, `g(x) = e^{a⁺(K−x)}`,
//! on `I = [θ₀K, ∞)`, whose fixed point `K` attracts every orbit when
//! `a⁺K(θ₀⁻¹ − 1) ≤ 1`.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Default iteration cap of [`MapSpec::iterate`].
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Schwarzian stencil step as a fraction of the local length scale.
const SCHWARZIAN_STEP: f64 = 4e-3;
/// Iterates kept in an [`Orbit`] prefix.
const PREFIX_LEN: usize = 1000;
/// Extra iterations used to confirm a suspected two-cycle.
const CYCLE_CONFIRMATION: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("a+ K (1/theta0 - 1) = {margin} exceeds 1")]
    ConditionViolated { margin: f64 },
    #[error("(1 - theta0) g(theta0 K) = {value} >= 1: h is not finite on its domain")]
    Undefined { value: f64 },
    #[error("invalid map parameter: {0}")]
    InvalidParameter(String),
    #[error("x = {x} lies below the domain bound {lo}")]
    Domain { x: f64, lo: f64 },
    #[error("orbit left the domain at step {step} (x = {x})")]
    DomainEscape { step: usize, x: f64 },
    #[error("h'(x) vanishes numerically at x = {x}")]
    DerivativeVanishes { x: f64 },
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapSpec {
    pub K: f64,
    pub a_plus: f64,
    pub theta0: f64,
    pub domain_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum OrbitVerdict {
    ConvergedToK { steps: usize },
    /// Iteration cap reached while the distance to `K` kept shrinking.
    ConvergingSlowly { distance: f64 },
    TwoCycle { low: f64, high: f64 },
    MaxIterations { distance: f64 },
}

impl OrbitVerdict {
    pub fn is_convergent(&self) -> bool {
        matches!(
            self,
            OrbitVerdict::ConvergedToK { .. } | OrbitVerdict::ConvergingSlowly { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orbit {
    pub x0: f64,
    pub prefix: Vec<f64>,
    pub iterations: usize,
    pub last: f64,
    pub verdict: OrbitVerdict,
}

impl Orbit {
    /// `n,x_n` rows of the stored prefix.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "n,x_n")?;
        for (n, x) in self.prefix.iter().enumerate() {
            writeln!(out, "{n},{x:.16e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: f64,
    pub iterations: usize,
    pub verdict: Option<OrbitVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub spec: MapSpec,
    pub margin: f64,
    pub seeds: Vec<SeedResult>,
    pub converged: usize,
    pub cycles: usize,
    pub pass: bool,
}

/// `h'(K) = −a⁺K(θ₀⁻¹ − 1)`, defined whether or not the map is.
#[allow(non_snake_case)]
pub fn derivative_at_k(K: f64, a_plus: f64, theta0: f64) -> f64 {
    -a_plus * K * (1.0 / theta0 - 1.0)
}

impl MapSpec {
    /// A map satisfying `a⁺K(θ₀⁻¹ − 1) ≤ 1`.
    #[allow(non_snake_case)]
    pub fn new(K: f64, a_plus: f64, theta0: f64) -> Result<Self, MapError> {
        let margin = MapSpec::unchecked(K, a_plus, theta0)?.margin();
        if margin > 1.0 {
            return Err(MapError::ConditionViolated { margin });
        }
        MapSpec::diagnostic(K, a_plus, theta0)
    }

    /// The map with `θ₀ = e^{−ζ⁺}`.
    #[allow(non_snake_case)]
    pub fn from_zeta(K: f64, a_plus: f64, zeta_plus: f64) -> Result<Self, MapError> {
        if !(zeta_plus >= 0.0 && zeta_plus.is_finite()) {
            return Err(MapError::InvalidParameter(format!("zeta+ = {zeta_plus}")));
        }
        MapSpec::unchecked(K, a_plus, 1.0)?;
        let margin = a_plus * K * zeta_plus.exp_m1();
        if margin > 1.0 {
            return Err(MapError::ConditionViolated { margin });
        }
        MapSpec::diagnostic(K, a_plus, (-zeta_plus).exp())
    }

    /// Builds the map without the attractivity condition, for diagnostics.
    /// The map must still be finite on its domain.
    #[allow(non_snake_case)]
    pub fn diagnostic(K: f64, a_plus: f64, theta0: f64) -> Result<Self, MapError> {
        let spec = MapSpec::unchecked(K, a_plus, theta0)?;
        let value = (1.0 - theta0) * spec.g(theta0 * K);
        if value >= 1.0 {
            return Err(MapError::Undefined { value });
        }
        Ok(spec)
    }

    /// Parameters only checked for range; `h` may be unbounded on the
    /// domain. Useful for [`MapSpec::derivative_at_k`] and [`MapSpec::margin`].
    #[allow(non_snake_case)]
    pub fn unchecked(K: f64, a_plus: f64, theta0: f64) -> Result<Self, MapError> {
        if !(K > 0.0 && K.is_finite()) {
            return Err(MapError::InvalidParameter(format!("K = {K}")));
        }
        if !(a_plus > 0.0 && a_plus.is_finite()) {
            return Err(MapError::InvalidParameter(format!("a+ = {a_plus}")));
        }
        if !(theta0 > 0.0 && theta0 <= 1.0) {
            return Err(MapError::InvalidParameter(format!("theta0 = {theta0}")));
        }
        Ok(MapSpec {
            K,
            a_plus,
            theta0,
            domain_hi: 100.0 * K,
        })
    }

    pub fn with_domain_hi(mut self, hi: f64) -> Self {
        self.domain_hi = hi;
        self
    }

    /// `a⁺K(θ₀⁻¹ − 1)`, equal to `|h'(K)|`.
    pub fn margin(&self) -> f64 {
        self.a_plus * self.K * (1.0 / self.theta0 - 1.0)
    }

    pub fn domain_lo(&self) -> f64 {
        self.theta0 * self.K
    }

    pub fn is_degenerate(&self) -> bool {
        self.theta0 == 1.0
    }

    pub fn g(&self, x: f64) -> f64 {
        (self.a_plus * (self.K - x)).exp()
    }

    pub fn h(&self, x: f64) -> Result<f64, MapError> {
        let lo = self.domain_lo();
        if x < lo || x.is_nan() {
            return Err(MapError::Domain { x, lo });
        }
        Ok(self.h_unchecked(x))
    }

    #[inline]
    fn h_unchecked(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            return self.K;
        }
        self.theta0 * self.K / (1.0 - self.g(x) * (1.0 - self.theta0))
    }

    /// `h'(K) = −a⁺K(θ₀⁻¹ − 1)`.
    pub fn derivative_at_k(&self) -> f64 {
        derivative_at_k(self.K, self.a_plus, self.theta0)
    }

    /// Central difference estimate of `h'(K)`.
    pub fn derivative_at_k_numeric(&self) -> f64 {
        let s = 1e-5 * self.K / self.a_plus.max(1.0);
        (self.h_unchecked(self.K + s) - self.h_unchecked(self.K - s)) / (2.0 * s)
    }

    /// Numeric Schwarzian `h‴/h′ − (3/2)(h″/h′)²`.
    ///
    /// Five-point central stencils at steps `s` and `2s` are combined by
    /// Richardson extrapolation. The stencils difference `h − θ₀K`, which has
    /// the same Schwarzian but keeps its digits where `h` flattens out. `s`
    /// is a small fraction of the local length scale: `1/a⁺`, or the
    /// distance to the pole of `h` below the domain when that is shorter.
    /// `x − 4s` stays in the domain.
    pub fn schwarzian(&self, x: f64) -> Result<f64, MapError> {
        let lo = self.domain_lo();
        if !(x > lo) || !x.is_finite() {
            return Err(MapError::Domain { x, lo });
        }
        if self.is_degenerate() {
            return Err(MapError::DerivativeVanishes { x });
        }
        let pole = self.K + (1.0 - self.theta0).ln() / self.a_plus;
        let scale = (1.0 / self.a_plus).min(x - pole);
        let s = (SCHWARZIAN_STEP * scale).min((x - lo) / 4.5);
        let f = |y: f64| {
            let q = self.g(y) * (1.0 - self.theta0);
            self.theta0 * self.K * q / (1.0 - q)
        };
        let stencil = |s: f64| {
            let (f0, p1, m1, p2, m2) = (f(x), f(x + s), f(x - s), f(x + 2.0 * s), f(x - 2.0 * s));
            let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * s);
            let d2 = (-m2 + 16.0 * m1 - 30.0 * f0 + 16.0 * p1 - p2) / (12.0 * s * s);
            let d3 = (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * s * s * s);
            (d1, d2, d3)
        };
        let (a1, a2, a3) = stencil(s);
        let (b1, b2, b3) = stencil(2.0 * s);
        let d1 = a1 + (a1 - b1) / 15.0;
        let d2 = a2 + (a2 - b2) / 15.0;
        let d3 = a3 + (a3 - b3) / 3.0;
        if !(d1.abs() > f64::MIN_POSITIVE) || !d1.is_finite() {
            return Err(MapError::DerivativeVanishes { x });
        }
        let r = d2 / d1;
        Ok(d3 / d1 - 1.5 * r * r)
    }

    /// Iterates `x_{n+1} = h(x_n)` from `x0`.
    pub fn iterate(&self, x0: f64, max_n: usize, tol: f64) -> Result<Orbit, MapError> {
        let lo = self.domain_lo();
        if x0 < lo || !x0.is_finite() {
            return Err(MapError::Domain { x: x0, lo });
        }
        let k = self.K;
        let mut prefix = vec![x0];
        let push = |prefix: &mut Vec<f64>, x: f64| {
            if prefix.len() < PREFIX_LEN {
                prefix.push(x);
            }
        };
        let step = |n: usize, x: f64| -> Result<f64, MapError> {
            let y = self.h_unchecked(x);
            if !(y >= lo && y.is_finite()) {
                return Err(MapError::DomainEscape { step: n, x: y });
            }
            Ok(y)
        };
        let mut quarter_max = [0.0f64; 4];
        let mut prev2 = f64::NAN;
        let mut prev = f64::NAN;
        let mut x = x0;
        let mut next_check = 0usize;
        let mut backoff = CYCLE_CONFIRMATION;
        for n in 0..max_n {
            let distance = (x - k).abs();
            if distance < tol {
                return Ok(Orbit {
                    x0,
                    prefix,
                    iterations: n,
                    last: x,
                    verdict: OrbitVerdict::ConvergedToK { steps: n },
                });
            }
            let q = (n * 4 / max_n).min(3);
            quarter_max[q] = quarter_max[q].max(distance);
            if n >= next_check && (x - prev2).abs() < tol && (prev - prev2).abs() > 10.0 * tol {
                match self.confirm_cycle(x, tol) {
                    Ok(Some(verdict)) => {
                        return Ok(Orbit {
                            x0,
                            prefix,
                            iterations: n,
                            last: x,
                            verdict,
                        })
                    }
                    Ok(None) => {
                        next_check = n + backoff;
                        backoff = backoff.saturating_mul(2);
                    }
                    Err(e) => return Err(e),
                }
            }
            prev2 = prev;
            prev = x;
            x = step(n + 1, x)?;
            push(&mut prefix, x);
        }
        let distance = (x - k).abs();
        if distance < tol {
            return Ok(Orbit {
                x0,
                prefix,
                iterations: max_n,
                last: x,
                verdict: OrbitVerdict::ConvergedToK { steps: max_n },
            });
        }
        let verdict = if max_n >= 4 && quarter_max[3] < quarter_max[2] {
            OrbitVerdict::ConvergingSlowly { distance }
        } else {
            OrbitVerdict::MaxIterations { distance }
        };
        Ok(Orbit {
            x0,
            prefix,
            iterations: max_n,
            last: x,
            verdict,
        })
    }

    /// Follows a suspected two-cycle: it is confirmed when the period-two
    /// difference settles at rounding level while the two branches stay
    /// apart, and rejected when the orbit approaches `K`.
    fn confirm_cycle(&self, start: f64, tol: f64) -> Result<Option<OrbitVerdict>, MapError> {
        let mut a = start;
        let mut b = self.h_unchecked(a);
        let mut separation_at = f64::NAN;
        for i in 0..CYCLE_CONFIRMATION {
            let c = self.h_unchecked(b);
            if !(c >= self.domain_lo() && c.is_finite()) {
                return Err(MapError::DomainEscape { step: i, x: c });
            }
            if (a - self.K).abs() < tol {
                return Ok(None);
            }
            if i == CYCLE_CONFIRMATION - 1000 {
                separation_at = (b - a).abs();
            }
            a = b;
            b = c;
        }
        let settled = (b - self.h_unchecked(self.h_unchecked(b))).abs() <= 1e-13 * b.abs().max(1.0);
        let separation = (b - a).abs();
        let steady = (separation - separation_at).abs() <= 1e-9 * separation;
        if settled && steady && separation > 10.0 * tol {
            Ok(Some(OrbitVerdict::TwoCycle {
                low: a.min(b),
                high: a.max(b),
            }))
        } else {
            Ok(None)
        }
    }

    /// Log-spaced seeds in `[θ₀K(1 + 1e−9), domain_hi]`.
    pub fn seeds(&self, n_seeds: usize) -> Vec<f64> {
        let lo = self.domain_lo() * (1.0 + 1e-9);
        let hi = self.domain_hi.max(lo);
        if n_seeds <= 1 {
            return vec![lo];
        }
        let (llo, lhi) = (lo.ln(), hi.ln());
        (0..n_seeds)
            .map(|i| {
                if i == n_seeds - 1 {
                    hi
                } else {
                    (llo + (lhi - llo) * i as f64 / (n_seeds - 1) as f64).exp()
                }
            })
            .collect()
    }

    /// Iterates from every seed in parallel; passes iff all orbits converge.
    pub fn global_attractor_sweep(&self, n_seeds: usize, max_n: usize, tol: f64) -> SweepReport {
        let seeds: Vec<SeedResult> = self
            .seeds(n_seeds)
            .into_par_iter()
            .map(|seed| match self.iterate(seed, max_n, tol) {
                Ok(orbit) => SeedResult {
                    seed,
                    iterations: orbit.iterations,
                    verdict: Some(orbit.verdict),
                    error: None,
                },
                Err(e) => SeedResult {
                    seed,
                    iterations: 0,
                    verdict: None,
                    error: Some(e.to_string()),
                },
            })
            .collect();
        let converged = seeds
            .iter()
            .filter(|s| s.verdict.is_some_and(|v| v.is_convergent()))
            .count();
        let cycles = seeds
            .iter()
            .filter(|s| matches!(s.verdict, Some(OrbitVerdict::TwoCycle { .. })))
            .count();
        SweepReport {
            spec: *self,
            margin: self.margin(),
            pass: converged == seeds.len(),
            converged,
            cycles,
            seeds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn half() -> MapSpec {
        MapSpec::new(1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn g_and_h_values() {
        let s = half();
        assert_eq!(s.g(1.0), 1.0);
        assert!((s.g(2.0) - (-1.0f64).exp()).abs() < 1e-15);
        let s2 = MapSpec::diagnostic(1.0, 2.0, 0.9).unwrap();
        assert!((s2.g(0.5) - E).abs() < 1e-15);
        assert_eq!(s.h(1.0).unwrap(), 1.0);
        let oracle = 0.5 / (1.0 - 0.5 * (-1.0f64).exp());
        assert!((s.h(2.0).unwrap() - oracle).abs() < 1e-15);
        assert!((s.h(2.0).unwrap() - 0.612700).abs() < 1e-6);
        assert!((s.h(1e3).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(s.h(0.4), Err(MapError::Domain { .. })));
    }

    #[test]
    fn construction_checks() {
        assert!(matches!(
            MapSpec::from_zeta(1.0, 1.0, 1.0),
            Err(MapError::ConditionViolated { .. })
        ));
        let s = MapSpec::from_zeta(1.0, 1.0, 2.0f64.ln()).unwrap();
        assert!((s.theta0 - 0.5).abs() < 1e-15);
        let d = MapSpec::from_zeta(3.0, 2.0, 0.0).unwrap();
        assert!(d.is_degenerate());
        assert_eq!(d.h(17.0).unwrap(), 3.0);
        // h blows up inside the domain: refused even in diagnostic mode
        assert!(matches!(
            MapSpec::diagnostic(1.0, 1.0, 0.25),
            Err(MapError::Undefined { .. })
        ));
    }

    #[test]
    fn derivative_at_fixed_point() {
        let s = half();
        assert_eq!(s.derivative_at_k(), -1.0);
        assert!((s.derivative_at_k_numeric() + 1.0).abs() < 1e-6);
        let k = 1.1f64.ln();
        let s = MapSpec::new(k, 1.0, (-1.0f64).exp()).unwrap();
        assert!((s.derivative_at_k() + k * (E - 1.0)).abs() < 1e-15);
        assert!((s.derivative_at_k() + 0.16377).abs() < 1e-5);
        assert!((s.h(k).unwrap() - k).abs() < 1e-14);
        let diag = MapSpec::unchecked(1.0, 1.0, (-1.0f64).exp()).unwrap();
        assert!((diag.derivative_at_k() + (E - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn schwarzian_is_constant() {
        let s = half();
        assert!((s.schwarzian(1.3).unwrap() + 0.5).abs() < 1e-4);
        let s = MapSpec::new(0.3, 2.0, 0.7).unwrap();
        assert!((s.schwarzian(0.3).unwrap() + 2.0).abs() < 1e-4);
    }

    #[test]
    fn orbits() {
        let s = half();
        let o = s.iterate(1.0, 10, 1e-12).unwrap();
        assert_eq!(o.verdict, OrbitVerdict::ConvergedToK { steps: 0 });
        let o = s.iterate(2.0, 10_000_000, 1e-3).unwrap();
        assert!(matches!(o.verdict, OrbitVerdict::ConvergedToK { .. }));
        assert!((o.prefix[1] - 0.612700).abs() < 1e-6);
        let evens: Vec<f64> = o.prefix.iter().step_by(2).copied().take(50).collect();
        assert!(evens.windows(2).all(|w| w[1] < w[0] && w[1] > 1.0));
        let odds: Vec<f64> = o.prefix.iter().skip(1).step_by(2).copied().take(50).collect();
        assert!(odds.windows(2).all(|w| w[1] > w[0] && w[1] < 1.0));
    }

    #[test]
    fn diagnostic_map_has_two_cycle() {
        let s = MapSpec::diagnostic(1.0, 57.0, 0.95).unwrap();
        assert!((s.margin() - 3.0).abs() < 1e-12);
        let o = s.iterate(1.5, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE).unwrap();
        match o.verdict {
            OrbitVerdict::TwoCycle { low, high } => {
                assert!(low < 1.0 && high > 1.0);
                assert!((s.h(s.h(low).unwrap()).unwrap() - low).abs() < 1e-12);
            }
            v => panic!("expected a two-cycle, got {v:?}"),
        }
        let r = s.global_attractor_sweep(64, 100_000, DEFAULT_TOLERANCE);
        assert!(!r.pass && r.cycles > 0);
    }

    #[test]
    fn sweeps() {
        let r = half().global_attractor_sweep(64, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE);
        assert!(r.pass, "{:?}", r.seeds.iter().find(|s| !s.verdict.is_some_and(|v| v.is_convergent())));
        let d = MapSpec::from_zeta(1.0, 1.0, 0.0).unwrap();
        let r = d.global_attractor_sweep(16, 100, 1e-12);
        assert!(r.pass);
        assert!(r.seeds.iter().all(|s| s.iterations <= 1));
    }

    #[test]
    fn orbit_csv() {
        let o = half().iterate(2.0, 3, 1e-12).unwrap();
        let mut buf = Vec::new();
        o.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,x_n\n0,2.0"));
        assert_eq!(text.lines().count(), 5);
    }
}
