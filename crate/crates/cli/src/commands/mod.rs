//! Subcommand implementations.

pub mod dynamics;
pub mod lattice;
pub mod qac;
pub mod rates;
pub mod sim;

use entlab::operator::{pauli, CMat};

use crate::CliError;

/// `|a - b|` relative to `max(|a|, 1e-3)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1e-3)
}

/// Per-instance seed derived from the run seed.
pub fn instance_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(k.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        ^ k
}

pub fn single_site_op(name: &str) -> Result<CMat, CliError> {
    match name {
        "x" | "X" => Ok(pauli::x()),
        "y" | "Y" => Ok(pauli::y()),
        "z" | "Z" => Ok(pauli::z()),
        other => Err(CliError::Usage(format!(
            "unknown single-site operator `{other}` (expected x, y or z)"
        ))),
    }
}

/// Maximum that propagates NaN, so a broken value fails its check.
pub fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| {
        if m.is_nan() || v.is_nan() {
            f64::NAN
        } else {
            m.max(v)
        }
    })
}
