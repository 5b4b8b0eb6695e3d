//! Fronthaul-quantization-aware MU-MIMO downlink precoding.
//!
//! The BBU computes a precoding matrix whose entries must be drawn from a
//! finite alphabet before it crosses the fronthaul to the antenna system.
//! This crate provides:
//!
//! * [`quantizer`]: the symmetric uniform fronthaul quantizer and its
//!   step-size design rule.
//! * [`channel`]: i.i.d. Rayleigh channels, pilot-based MMSE estimates and
//!   per-UE SNR schedules.
//! * [`baseline`]: Wiener-filter precoding, receiver factors and the
//!   quantize-then-scale baseline.
//! * [`sphere`]: MSE-optimal quantized precoding by Schnorr–Euchner sphere
//!   decoding inside a Lagrange-multiplier bisection.
//! * [`heuristic`]: low-complexity greedy refinement of the quantized
//!   baseline.
//! * [`oracle`]: exhaustive-search references and the fronthaul capacity
//!   calculator.
//! * [`metrics`] and [`experiment`]: sum rate, MSE and the Monte-Carlo
//!   harness behind the CLI.

// `!(x <= y)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod channel;
mod error;
pub mod experiment;
pub mod heuristic;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod quantizer;
pub mod rng;
pub mod sphere;

pub use error::{Error, Result};
pub use linalg::CMat;
pub use num_complex::Complex64;

/// Tag identifying which precoding scheme produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Continuous Wiener filter, no fronthaul quantization.
    WfInfinite,
    /// Wiener filter quantized entrywise, then rescaled at the AAS.
    UnawareWf,
    /// Sphere precoding.
    Sphere,
    /// Greedy four-candidate refinement of `UnawareWf`.
    Heuristic,
    /// Exhaustive constrained search (tiny systems only).
    Oracle,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::WfInfinite,
        Scheme::UnawareWf,
        Scheme::Sphere,
        Scheme::Heuristic,
        Scheme::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::WfInfinite => "wf_infinite",
            Scheme::UnawareWf => "unaware_wf",
            Scheme::Sphere => "sphere",
            Scheme::Heuristic => "heuristic",
            Scheme::Oracle => "oracle",
        }
    }

    /// Whether the scheme's precoder entries are restricted to the alphabet.
    pub fn is_quantized(self) -> bool {
        !matches!(self, Scheme::WfInfinite)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sch| sch.name() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}
