//! Shared fixtures for the criterion benches.

use kgamma::{GammaSpec, Rational};

/// `γ_s = 1/d` for every `s`.
pub fn constant_spec(d: i64, precision_bits: u32) -> GammaSpec {
    GammaSpec::constant(Rational::from((1, d)), precision_bits).expect("valid constant spec")
}
