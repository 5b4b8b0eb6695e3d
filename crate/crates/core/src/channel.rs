//! Downlink channel realizations and CSI at the BBU.
//!
//! Per-UE SNRs are realized through the channel variances: with power budget
//! `q` and noise power `N₀` held fixed, UE `k` at SNR `ρ_k` gets
//! `γ_k = ρ_k N₀ / q`. This keeps the quantizer's input-variance rule
//! `q / (K M)` independent of the SNR.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CMat;
use crate::rng::{complex_gaussian, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    #[default]
    Perfect,
    Estimated,
}

impl std::str::FromStr for CsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(CsiMode::Perfect),
            "estimated" => Ok(CsiMode::Estimated),
            other => Err(Error::Config(format!("unknown csi mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// True downlink channel, K×M.
    pub h: CMat,
    /// Channel known at the BBU, K×M.
    pub h_hat: CMat,
    /// Per-UE channel variance `γ_k`.
    pub gamma: Vec<f64>,
    pub noise_power: f64,
    pub power_budget: f64,
    /// Uplink pilot power `q̄_k`.
    pub pilot_power: Vec<f64>,
}

impl ChannelState {
    pub fn num_users(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_antennas(&self) -> usize {
        self.h.ncols()
    }
}

/// Parameters of one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub m: usize,
    pub gamma: Vec<f64>,
    pub noise_power: f64,
    pub power_budget: f64,
    /// `None` means `q̄_k = q` for all UEs.
    pub pilot_power: Option<Vec<f64>>,
}

impl ChannelConfig {
    pub fn new(m: usize, gamma: Vec<f64>, noise_power: f64, power_budget: f64) -> Self {
        Self {
            m,
            gamma,
            noise_power,
            power_budget,
            pilot_power: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.gamma.is_empty() {
            return Err(Error::invalid(format!(
                "need K ≥ 1 and M ≥ 1, got K = {}, M = {}",
                self.gamma.len(),
                self.m
            )));
        }
        if self.gamma.iter().any(|&g| !(g.is_finite() && g > 0.0)) {
            return Err(Error::invalid("channel variances must be positive"));
        }
        if !(self.noise_power > 0.0 && self.power_budget > 0.0) {
            return Err(Error::invalid(
                "noise power and power budget must be positive",
            ));
        }
        if let Some(p) = &self.pilot_power {
            if p.len() != self.gamma.len() || p.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::invalid("pilot powers must be K non-negative values"));
            }
        }
        Ok(())
    }
}

/// Draw `h_{k,m} ~ CN(0, γ_k)` i.i.d.; the BBU's CSI is perfect.
pub fn draw_channel(cfg: &ChannelConfig, seed: u64) -> Result<ChannelState> {
    cfg.validate()?;
    let k = cfg.gamma.len();
    let mut rng = rng_from_seed(seed);
    // Row-major fill so that a given seed fixes each UE's row regardless of M.
    let mut h = CMat::zeros(k, cfg.m);
    for row in 0..k {
        for col in 0..cfg.m {
            h[(row, col)] = complex_gaussian(&mut rng, cfg.gamma[row]);
        }
    }
    Ok(ChannelState {
        h_hat: h.clone(),
        h,
        gamma: cfg.gamma.clone(),
        noise_power: cfg.noise_power,
        power_budget: cfg.power_budget,
        pilot_power: cfg
            .pilot_power
            .clone()
            .unwrap_or_else(|| vec![cfg.power_budget; k]),
    })
}

/// Replace the BBU's CSI by the MMSE estimate from one uplink pilot per UE.
///
/// `ȳ = √q̄_k h + n̄` with `n̄ ~ CN(0, N₀)`, then
/// `ĥ = √q̄_k γ_k / (N₀ + q̄_k γ_k) · ȳ`.
pub fn estimate_channel(state: &ChannelState, seed: u64) -> Result<ChannelState> {
    let (k, m) = state.h.shape();
    if state.gamma.len() != k || state.pilot_power.len() != k {
        return Err(Error::DimensionMismatch(
            "gamma and pilot power must have one entry per UE".into(),
        ));
    }
    let n0 = state.noise_power;
    let mut rng = rng_from_seed(seed);
    let mut h_hat = CMat::zeros(k, m);
    for row in 0..k {
        let qbar = state.pilot_power[row];
        let g = state.gamma[row];
        let gain = qbar.sqrt() * g / (n0 + qbar * g);
        for col in 0..m {
            let y = state.h[(row, col)] * qbar.sqrt() + complex_gaussian(&mut rng, n0);
            h_hat[(row, col)] = y * gain;
        }
    }
    Ok(ChannelState {
        h_hat,
        ..state.clone()
    })
}

/// Variance of each entry of the MMSE estimate, `q̄γ² / (N₀ + q̄γ)`.
pub fn estimate_variance(gamma: f64, pilot_power: f64, noise_power: f64) -> f64 {
    pilot_power * gamma * gamma / (noise_power + pilot_power * gamma)
}

/// Per-UE SNRs in dB spread evenly around a median.
///
/// UE `i` (0-based) gets `median + (i − ⌊(K−1)/2⌋)·spread/K`, so K = 4 with a
/// 10 dB spread yields offsets {−2.5, 0, 2.5, 5} dB and K = 1 yields the
/// median.
pub fn snr_schedule(median_snr_db: f64, k: usize, spread_db: f64) -> Vec<f64> {
    let first = -(((k.max(1) - 1) / 2) as f64);
    (0..k)
        .map(|i| median_snr_db + (first + i as f64) * spread_db / k as f64)
        .collect()
}

/// `γ_k = 10^{snr_k/10} · N₀ / q`.
pub fn gamma_from_snr_db(snr_db: &[f64], noise_power: f64, power_budget: f64) -> Vec<f64> {
    snr_db
        .iter()
        .map(|s| 10f64.powf(s / 10.0) * noise_power / power_budget)
        .collect()
}

/// Sample mean of `|h|²` over row `k`; convenience for diagnostics.
pub fn row_power(h: &CMat, k: usize) -> f64 {
    h.row(k).iter().map(Complex64::norm_sqr).sum::<f64>() / h.ncols() as f64
}
