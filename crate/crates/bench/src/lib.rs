//! Shared fixtures for the benchmarks.

use num_complex::Complex64;
use solsurf_core::{builtin, GridSpec, ModelDefinition};

/// Kink parameters `(a, d)`.
pub const KINK: [f64; 2] = [1.0, 0.0];

pub fn sine_gordon() -> ModelDefinition {
    builtin("sine-gordon").expect("built-in model")
}

pub fn square(r: f64, n: usize) -> GridSpec {
    GridSpec::new((-r, r), n, (-r, r), n).expect("valid grid")
}

pub fn lambda() -> Complex64 {
    Complex64::new(1.0, 0.0)
}
