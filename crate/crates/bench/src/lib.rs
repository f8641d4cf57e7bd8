//! Fixtures shared by the benchmarks.

use std::f64::consts::E;

use nicholson_core::experiments::ex43_model;
use nicholson_core::NicholsonModel;

/// The periodic coefficient expression used for parser and evaluator timings.
pub const PERIODIC_EXPR: &str = "0.1*(1+0.5*cos(2*pi*t)) + 0.02*(1+0.5*sin(2*pi*t))^2 / (1 + exp(-t))";

/// `x' = e x(t−1) e^{−x(t−0.5)} − x`.
pub fn classic() -> NicholsonModel {
    NicholsonModel::autonomous(1.0, &[(E, 1.0, 1.0, 0.5)]).expect("valid model")
}

/// The two-pair periodic model with `η = (0.1, 0.1e, 0.02)`.
pub fn periodic() -> NicholsonModel {
    ex43_model(0.1, 0.1 * E, 0.02).expect("valid model")
}
