//! Continuous Wiener-filter precoding and the quantization-unaware baseline.

use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::{self, fro_sq, CMat};
use crate::quantizer::QuantizerSpec;
use crate::sphere::SphereDiagnostics;
use crate::{Error, Result, Scheme};

#[derive(Debug, Clone, Serialize)]
pub struct PrecodingResult {
    /// M×K precoding matrix sent over the fronthaul.
    pub p: CMat,
    /// Receiver factors, the diagonal of `B`.
    pub beta: Vec<Complex64>,
    /// Scaling applied at the AAS; the transmitted matrix is `α P`.
    pub alpha: f64,
    pub scheme: Scheme,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere: Option<SphereDiagnostics>,
}

impl PrecodingResult {
    pub fn new(p: CMat, beta: Vec<Complex64>, alpha: f64, scheme: Scheme) -> Self {
        Self {
            p,
            beta,
            alpha,
            scheme,
            sphere: None,
        }
    }

    /// Effective transmitted precoder `α P`.
    pub fn effective(&self) -> CMat {
        &self.p * Complex64::new(self.alpha, 0.0)
    }

    pub fn transmit_power(&self) -> f64 {
        self.alpha * self.alpha * fro_sq(&self.p)
    }
}

fn check_positive(q: f64, n0: f64) -> Result<()> {
    if !(q > 0.0 && n0 > 0.0) {
        return Err(Error::invalid(format!(
            "power budget and noise power must be positive (q = {q}, N0 = {n0})"
        )));
    }
    Ok(())
}

/// `Ĥᴴ (Ĥ Ĥᴴ + (K N₀/q) I)⁻¹` without power normalization.
pub fn wf_unnormalized(h_hat: &CMat, q: f64, n0: f64) -> Result<CMat> {
    check_positive(q, n0)?;
    let k = h_hat.nrows();
    let gram = linalg::regularized_gram(h_hat, k as f64 * n0 / q);
    // G⁻¹Ĥ, then (G⁻¹Ĥ)ᴴ = Ĥᴴ G⁻¹ because G is Hermitian.
    let chol = linalg::cholesky(gram, 0.0)?;
    Ok(chol.solve(h_hat).adjoint())
}

/// Wiener-filter precoder scaled to `‖W‖²_F = q`.
pub fn wf_precoder(h_hat: &CMat, q: f64, n0: f64) -> Result<CMat> {
    let w = wf_unnormalized(h_hat, q, n0)?;
    let norm = fro_sq(&w);
    if norm == 0.0 {
        return Err(Error::invalid("channel is identically zero"));
    }
    Ok(w * Complex64::new((q / norm).sqrt(), 0.0))
}

/// MSE-optimal receiver factors for a fixed precoder:
/// `β_k = [Pᴴ Hᴴ]_{kk} / ([Pᴴ Hᴴ H P]_{kk} + N₀)`.
pub fn beta_opt(h: &CMat, p: &CMat, n0: f64) -> Result<Vec<Complex64>> {
    if h.ncols() != p.nrows() || h.nrows() != p.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "H is {:?} but P is {:?}",
            h.shape(),
            p.shape()
        )));
    }
    let hp = h * p;
    Ok((0..h.nrows())
        .map(|k| {
            let energy: f64 = hp.column(k).iter().map(Complex64::norm_sqr).sum();
            hp[(k, k)].conj() / (energy + n0)
        })
        .collect())
}

/// Receiver factors matched to infinite-resolution WF precoding: `β_opt`
/// evaluated at the power-normalized Wiener filter. The result is real and
/// non-negative since `[Ĥ W]_{kk} = c (1 − (K N₀/q)[G⁻¹]_{kk}) ≥ 0`.
pub fn beta_wf(h_hat: &CMat, q: f64, n0: f64) -> Result<Vec<f64>> {
    let w = wf_precoder(h_hat, q, n0)?;
    Ok(beta_opt(h_hat, &w, n0)?
        .into_iter()
        .map(|b| b.re.max(0.0))
        .collect())
}

/// Common receiver factor `(1/√q) · tr(Ĥᴴ G⁻² Ĥ)^{1/2} = ‖W_unnorm‖_F / √q`
/// of classical WF precoding. [`beta_wf`] converges to it as `N₀ → 0`.
pub fn beta_wf_common(h_hat: &CMat, q: f64, n0: f64) -> Result<f64> {
    let w = wf_unnormalized(h_hat, q, n0)?;
    Ok((fro_sq(&w) / q).sqrt())
}

/// Real receiver factors as complex values.
pub fn real_to_complex(beta: &[f64]) -> Vec<Complex64> {
    beta.iter().map(|&b| Complex64::new(b, 0.0)).collect()
}

/// Infinite-resolution WF precoding (no fronthaul quantization).
pub fn wf_infinite(h_hat: &CMat, q: f64, n0: f64) -> Result<PrecodingResult> {
    let w = wf_precoder(h_hat, q, n0)?;
    let beta = beta_opt(h_hat, &w, n0)?;
    let beta = beta
        .iter()
        .map(|b| Complex64::new(b.re.max(0.0), 0.0))
        .collect();
    Ok(PrecodingResult::new(w, beta, 1.0, Scheme::WfInfinite))
}

/// `α = √(q / ‖P‖²_F)`; errors when `P` is all zero (possible only for odd L).
pub fn full_power_scale(p: &CMat, q: f64) -> Result<f64> {
    let norm = fro_sq(p);
    if norm == 0.0 {
        return Err(Error::Infeasible(
            "quantized precoder is identically zero".into(),
        ));
    }
    Ok((q / norm).sqrt())
}

/// Quantize the normalized Wiener filter entrywise and let the AAS rescale
/// it to full power.
pub fn unaware_precoder(
    h_hat: &CMat,
    q: f64,
    n0: f64,
    spec: &QuantizerSpec,
) -> Result<PrecodingResult> {
    let w = wf_precoder(h_hat, q, n0)?;
    let p = spec.quantize_matrix(&w);
    let alpha = full_power_scale(&p, q)?;
    let beta = beta_wf(h_hat, q, n0)?;
    Ok(PrecodingResult::new(
        p,
        real_to_complex(&beta),
        alpha,
        Scheme::UnawareWf,
    ))
}

/// Zero-forcing precoder `Ĥᴴ(ĤĤᴴ)⁻¹` normalized to `‖W‖²_F = q`.
/// Requires `K ≤ M` and a full-rank channel.
pub fn zf_precoder(h_hat: &CMat, q: f64) -> Result<CMat> {
    let chol = linalg::cholesky(h_hat * h_hat.adjoint(), 0.0)?;
    let w = chol.solve(h_hat).adjoint();
    Ok(&w * Complex64::new((q / fro_sq(&w)).sqrt(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, ChannelConfig};
    use crate::linalg::from_rows;

    fn random_h(k: usize, m: usize, seed: u64) -> CMat {
        draw_channel(&ChannelConfig::new(m, vec![1.0; k], 1.0, 1.0), seed)
            .unwrap()
            .h
    }

    #[test]
    fn scalar_wf() {
        let h = from_rows(&[&[(1.0, 0.0)]]);
        let w = wf_unnormalized(&h, 1.0, 1.0).unwrap();
        assert!((w[(0, 0)].re - 0.5).abs() < 1e-15);
        let w = wf_precoder(&h, 1.0, 1.0).unwrap();
        assert!((w[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wf_tends_to_zero_forcing() {
        let h = random_h(4, 16, 9);
        let w = wf_precoder(&h, 1.0, 1e-12).unwrap();
        let hw = &h * &w;
        let d = hw[(0, 0)];
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    assert!((hw[(i, j)] - d).norm() < 1e-6);
                } else {
                    assert!(hw[(i, j)].norm() < 1e-6);
                }
            }
        }
    }

    /// Gauss–Jordan with partial pivoting on `[G | Ĥ]`.
    fn naive_solve(mut g: CMat, mut rhs: CMat) -> CMat {
        let n = g.nrows();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&a, &b| g[(a, col)].norm().total_cmp(&g[(b, col)].norm()))
                .unwrap();
            g.swap_rows(col, piv);
            rhs.swap_rows(col, piv);
            let d = g[(col, col)];
            for j in 0..n {
                g[(col, j)] /= d;
            }
            for j in 0..rhs.ncols() {
                rhs[(col, j)] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = g[(r, col)];
                    for j in 0..n {
                        let v = g[(col, j)];
                        g[(r, j)] -= f * v;
                    }
                    for j in 0..rhs.ncols() {
                        let v = rhs[(col, j)];
                        rhs[(r, j)] -= f * v;
                    }
                }
            }
        }
        rhs
    }

    #[test]
    fn wf_matches_direct_solve() {
        let h = random_h(4, 16, 21);
        let (q, n0) = (1.0, 0.3);
        let mut g = &h * h.adjoint();
        for i in 0..4 {
            g[(i, i)] += Complex64::new(4.0 * n0 / q, 0.0);
        }
        let reference = naive_solve(g, h.clone()).adjoint();
        let w = wf_unnormalized(&h, q, n0).unwrap();
        assert!((&w - &reference).norm() < 1e-10);
        let wn = wf_precoder(&h, q, n0).unwrap();
        assert!((fro_sq(&wn) - q).abs() < 1e-12);
    }

    #[test]
    fn beta_examples() {
        let one = from_rows(&[&[(1.0, 0.0)]]);
        let b = beta_opt(&one, &one, 1.0).unwrap();
        assert!((b[0] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        let b = beta_opt(&random_h(3, 5, 1), &CMat::zeros(5, 3), 1.0).unwrap();
        assert!(b.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert!((beta_wf(&one, 1.0, 1.0).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((beta_wf_common(&one, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(beta_opt(&random_h(3, 5, 1), &CMat::zeros(4, 3), 1.0).is_err());
    }

    #[test]
    fn beta_wf_approaches_common_factor_at_high_snr() {
        let h = random_h(4, 16, 77);
        let n0 = 1e-6;
        let per_ue = beta_wf(&h, 1.0, n0).unwrap();
        let common = beta_wf_common(&h, 1.0, n0).unwrap();
        for b in per_ue {
            assert!((b - common).abs() / common < 1e-3, "{b} vs {common}");
        }
    }

    #[test]
    fn beta_wf_scales_inversely_with_channel() {
        let h = random_h(4, 16, 5);
        let n0 = 1e-9;
        let base = beta_wf(&h, 1.0, n0).unwrap();
        let scaled = beta_wf(&(&h * Complex64::new(3.0, 0.0)), 1.0, n0).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            assert!((b * 3.0 - a).abs() / a < 1e-6);
        }
    }

    #[test]
    fn unaware_uses_full_power_on_the_grid() {
        let h = random_h(4, 16, 13);
        let spec = QuantizerSpec::designed(8, 1.0 / 64.0).unwrap();
        let r = unaware_precoder(&h, 1.0, 0.1, &spec).unwrap();
        assert!(r.p.iter().all(|&z| spec.contains(z)));
        assert!((r.transmit_power() - 1.0).abs() < 1e-9);
        assert_eq!(r.scheme, Scheme::UnawareWf);
    }
}
