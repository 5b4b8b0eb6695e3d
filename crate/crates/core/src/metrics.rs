//! Link metrics: per-UE SINR, sum rate and MSE.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::CMat;
use crate::rng::rng_from_seed;

/// Per-UE SINR from the K×K product `G = H P̂`:
/// `|G_kk|² / (Σ_{i≠k} |G_ki|² + N₀)`.
pub fn sinr_from_product(g: &CMat, n0: f64) -> Vec<f64> {
    (0..g.nrows())
        .map(|k| {
            let mut interference = 0.0;
            for i in 0..g.ncols() {
                if i != k {
                    interference += g[(k, i)].norm_sqr();
                }
            }
            g[(k, k)].norm_sqr() / (interference + n0)
        })
        .collect()
}

pub fn sum_rate_from_product(g: &CMat, n0: f64) -> f64 {
    sinr_from_product(g, n0)
        .into_iter()
        .map(|s| (1.0 + s).log2())
        .sum()
}

pub fn per_ue_sinr(h: &CMat, p_hat: &CMat, n0: f64) -> Vec<f64> {
    sinr_from_product(&(h * p_hat), n0)
}

/// `Σ_k log₂(1 + SINR_k)` for the effective (scaled) precoder `P̂`.
pub fn sum_rate(h: &CMat, p_hat: &CMat, n0: f64) -> f64 {
    sum_rate_from_product(&(h * p_hat), n0)
}

/// The `P`-dependent part `tr(Pᴴ Hᴴ Bᴴ B H P − B H P − (B H P)ᴴ)`.
pub fn mse_variable_part(h: &CMat, p: &CMat, beta: &[Complex64]) -> f64 {
    let g = h * p;
    let mut total = 0.0;
    for k in 0..g.nrows() {
        let energy: f64 = g.row(k).iter().map(Complex64::norm_sqr).sum();
        total += beta[k].norm_sqr() * energy - 2.0 * (beta[k] * g[(k, k)]).re;
    }
    total
}

/// `E‖s − B(HPs + n)‖²` for unit-power i.i.d. symbols:
/// the variable part plus `K + N₀ Σ|β_k|²`.
pub fn mse_closed_form(h: &CMat, p: &CMat, beta: &[Complex64], n0: f64) -> f64 {
    let k = h.nrows() as f64;
    let noise: f64 = beta.iter().map(Complex64::norm_sqr).sum::<f64>() * n0;
    mse_variable_part(h, p, beta) + k + noise
}

/// Sample average of `‖s − B(HPs + n)‖²` with QPSK symbols and
/// `CN(0, N₀)` noise.
pub fn mse_empirical(
    h: &CMat,
    p: &CMat,
    beta: &[Complex64],
    n0: f64,
    draws: usize,
    seed: u64,
) -> f64 {
    let (k, _) = h.shape();
    let g = h * p;
    let mut rng = rng_from_seed(seed);
    let qpsk = std::f64::consts::FRAC_1_SQRT_2;
    let noise_std = (n0 / 2.0).sqrt();
    let mut s = vec![Complex64::new(0.0, 0.0); k];
    let mut acc = 0.0;
    for _ in 0..draws {
        for sk in s.iter_mut() {
            let re = if rand::Rng::random::<bool>(&mut rng) {
                qpsk
            } else {
                -qpsk
            };
            let im = if rand::Rng::random::<bool>(&mut rng) {
                qpsk
            } else {
                -qpsk
            };
            *sk = Complex64::new(re, im);
        }
        for row in 0..k {
            let mut y = Complex64::new(0.0, 0.0);
            for col in 0..k {
                y += g[(row, col)] * s[col];
            }
            let nr: f64 = StandardNormal.sample(&mut rng);
            let ni: f64 = StandardNormal.sample(&mut rng);
            y += Complex64::new(nr, ni) * noise_std;
            acc += (s[row] - beta[row] * y).norm_sqr();
        }
    }
    acc / draws as f64
}

/// Mean and 95 % normal-approximation half-width `1.96·s/√n`.
pub fn mean_and_half_width(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}
