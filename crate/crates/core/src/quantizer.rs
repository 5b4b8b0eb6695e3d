//! Symmetric uniform fronthaul quantizer.
//!
//! With step `Δ` and `L` levels the labels are `l_z = Δ(z − (L−1)/2)` for
//! `z = 0..L` and the finite thresholds are `τ_z = Δ(z − L/2)` for
//! `z = 1..L`. A real input lands in the half-open cell `[τ_z, τ_{z+1})`, so
//! an input sitting exactly on a threshold is mapped to the upper label.
//! Real and imaginary parts are quantized independently with the same
//! alphabet.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CMat;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct QuantizerSpec {
    step: f64,
    levels: usize,
    labels: Vec<f64>,
    thresholds: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    step: f64,
    levels: usize,
    labels: Vec<f64>,
}

impl From<QuantizerSpec> for SpecRepr {
    fn from(q: QuantizerSpec) -> Self {
        SpecRepr {
            step: q.step,
            levels: q.levels,
            labels: q.labels,
        }
    }
}

impl TryFrom<SpecRepr> for QuantizerSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        QuantizerSpec::uniform(r.levels, r.step)
    }
}

impl QuantizerSpec {
    /// Uniform quantizer with `levels` labels spaced by `step`.
    pub fn uniform(levels: usize, step: f64) -> Result<Self> {
        if levels < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 levels, got {levels}"
            )));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::invalid(format!("step must be positive, got {step}")));
        }
        let half_span = (levels as f64 - 1.0) / 2.0;
        let labels = (0..levels).map(|z| step * (z as f64 - half_span)).collect();
        let half = levels as f64 / 2.0;
        let thresholds = (1..levels).map(|z| step * (z as f64 - half)).collect();
        Ok(Self {
            step,
            levels,
            labels,
            thresholds,
        })
    }

    /// Quantizer whose step minimizes the Gaussian distortion for complex
    /// entries of the given variance (see [`design_step_size`]).
    pub fn designed(levels: usize, per_entry_variance: f64) -> Result<Self> {
        Self::uniform(levels, design_step_size(levels, per_entry_variance)?)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Bits per real dimension, `log2(L)`.
    pub fn bits(&self) -> f64 {
        (self.levels as f64).log2()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// The `L − 1` finite thresholds.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Index of the cell containing `x`, i.e. the number of thresholds `≤ x`.
    pub fn cell_index(&self, x: f64) -> usize {
        self.thresholds.partition_point(|&t| t <= x)
    }

    pub fn quantize_real(&self, x: f64) -> f64 {
        self.labels[self.cell_index(x)]
    }

    pub fn quantize_scalar(&self, value: Complex64) -> Complex64 {
        Complex64::new(self.quantize_real(value.re), self.quantize_real(value.im))
    }

    pub fn quantize_matrix(&self, w: &CMat) -> CMat {
        w.map(|z| self.quantize_scalar(z))
    }

    /// Smallest possible `‖P‖²_F` for an `m × k` matrix over the alphabet.
    pub fn min_power(&self, m: usize, k: usize) -> f64 {
        let smallest = self
            .labels
            .iter()
            .map(|l| l * l)
            .fold(f64::INFINITY, f64::min);
        2.0 * (m * k) as f64 * smallest
    }

    /// Largest possible `‖P‖²_F` for an `m × k` matrix over the alphabet.
    pub fn max_power(&self, m: usize, k: usize) -> f64 {
        let largest = self.labels.iter().map(|l| l * l).fold(0.0, f64::max);
        2.0 * (m * k) as f64 * largest
    }

    /// Whether `x` is (bit-exactly) one of the labels.
    pub fn is_label(&self, x: f64) -> bool {
        self.labels.contains(&x)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.is_label(z.re) && self.is_label(z.im)
    }

    /// Label indices of the nearest and second-nearest label to `x`.
    ///
    /// The nearest label is the one [`Self::quantize_real`] picks. The second is
    /// the neighbour on the side of `x`; at the ends of the label range it is
    /// the adjacent interior label, and when `x` sits exactly on a label the
    /// smaller neighbour is taken.
    pub fn nearest_two(&self, x: f64) -> (usize, usize) {
        let z = self.cell_index(x);
        let last = self.levels - 1;
        let second = if z == 0 {
            1
        } else if z == last {
            last - 1
        } else if x > self.labels[z] {
            z + 1
        } else {
            z - 1
        };
        (z, second)
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[(x − Q(x))²]` for `x ~ N(0, 1)` and a uniform quantizer with the given
/// step, evaluated cell by cell in closed form.
pub fn unit_gaussian_distortion(levels: usize, step: f64) -> f64 {
    let half_span = (levels as f64 - 1.0) / 2.0;
    let half = levels as f64 / 2.0;
    let mut total = 0.0;
    for z in 0..levels {
        let lo = if z == 0 {
            f64::NEG_INFINITY
        } else {
            step * (z as f64 - half)
        };
        let hi = if z + 1 == levels {
            f64::INFINITY
        } else {
            step * (z as f64 + 1.0 - half)
        };
        let c = step * (z as f64 - half_span);
        // ∫_a^b (x − c)² φ(x) dx = (1 + c²)(Φ(b) − Φ(a)) − (b − 2c)φ(b) + (a − 2c)φ(a)
        let mass = std_normal_cdf(hi) - std_normal_cdf(lo);
        let upper = if hi.is_finite() {
            (hi - 2.0 * c) * std_normal_pdf(hi)
        } else {
            0.0
        };
        let lower = if lo.is_finite() {
            (lo - 2.0 * c) * std_normal_pdf(lo)
        } else {
            0.0
        };
        total += (1.0 + c * c) * mass - upper + lower;
    }
    total
}

/// Step size minimizing the mean squared quantization error of one real
/// dimension of a circular complex Gaussian entry with variance
/// `per_entry_variance` (each real dimension carries half of it).
///
/// Golden-section search on `ln Δ` over `[0.02σ/L, 4σ]`.
pub fn design_step_size(levels: usize, per_entry_variance: f64) -> Result<f64> {
    if levels < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 levels, got {levels}"
        )));
    }
    if !(per_entry_variance.is_finite() && per_entry_variance > 0.0) {
        return Err(Error::invalid(format!(
            "variance must be positive, got {per_entry_variance}"
        )));
    }
    let sigma = (per_entry_variance / 2.0).sqrt();
    Ok(sigma * unit_step(levels))
}

fn unit_step(levels: usize) -> f64 {
    let f = |log_step: f64| unit_gaussian_distortion(levels, log_step.exp());
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((0.02 / levels as f64).ln(), 4f64.ln());
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    // 1e-7 in ln Δ is well inside a 1e-6 relative tolerance on Δ.
    while b - a > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    ((a + b) / 2.0).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn labels_and_thresholds_follow_the_uniform_rule() {
        let q = QuantizerSpec::uniform(4, 1.0).unwrap();
        assert_eq!(q.labels(), &[-1.5, -0.5, 0.5, 1.5]);
        assert_eq!(q.thresholds(), &[-1.0, 0.0, 1.0]);
        for levels in [2, 3, 5, 8, 16] {
            let q = QuantizerSpec::uniform(levels, 0.37).unwrap();
            let l = q.labels();
            for z in 0..levels {
                assert_eq!(l[z], -l[levels - 1 - z]);
            }
            for (z, t) in q.thresholds().iter().enumerate() {
                assert!(((l[z] + l[z + 1]) / 2.0 - t).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(QuantizerSpec::uniform(1, 1.0).is_err());
        assert!(QuantizerSpec::uniform(4, 0.0).is_err());
        assert!(design_step_size(4, 0.0).is_err());
        assert!(design_step_size(4, -1.0).is_err());
        assert!(design_step_size(0, 1.0).is_err());
    }

    #[test]
    fn scalar_examples() {
        let q4 = QuantizerSpec::uniform(4, 1.0).unwrap();
        assert_eq!(q4.quantize_scalar(c(0.7, -2.0)), c(0.5, -1.5));
        // zero sits on τ₂ and goes up
        assert_eq!(q4.quantize_scalar(c(0.0, 0.0)), c(0.5, 0.5));
        let q2 = QuantizerSpec::uniform(2, 2.0).unwrap();
        assert_eq!(q2.quantize_scalar(c(-10.0, 10.0)), c(-1.0, 1.0));
    }

    #[test]
    fn zero_matrix_maps_to_half_step() {
        let q = QuantizerSpec::uniform(8, 0.3).unwrap();
        let p = q.quantize_matrix(&CMat::zeros(3, 2));
        assert!(p.iter().all(|&z| z == c(0.15, 0.15)));
    }

    #[test]
    fn serde_round_trip_rebuilds_thresholds() {
        let q = QuantizerSpec::uniform(4, 0.5).unwrap();
        let text = serde_json::to_string(&q).unwrap();
        let back: QuantizerSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, q);
        assert!(
            serde_json::from_str::<QuantizerSpec>(r#"{"step":0.5,"levels":1,"labels":[]}"#)
                .is_err()
        );
    }

    // Unit-variance real Gaussian: per-entry complex variance 2.
    #[test]
    fn designed_steps_match_frozen_values() {
        // Frozen from adaptive quadrature + bounded scalar minimization.
        for (levels, expected) in [
            (2, 1.595_769_12),
            (3, 1.224_006_38),
            (4, 0.995_686_69),
            (5, 0.842_986_25),
            (8, 0.586_019_44),
            (10, 0.490_777_99),
            (16, 0.335_200_61),
        ] {
            let got = design_step_size(levels, 2.0).unwrap();
            assert!(
                (got - expected).abs() / expected < 1e-6,
                "L={levels}: {got}"
            );
        }
    }

    #[test]
    fn step_is_scale_equivariant() {
        for levels in [2, 3, 4, 8] {
            let unit = design_step_size(levels, 2.0).unwrap();
            let quad = design_step_size(levels, 8.0).unwrap();
            assert!((quad - 2.0 * unit).abs() < 1e-12 * quad);
        }
    }

    #[test]
    fn closed_form_distortion_matches_trapezoid() {
        for (levels, step) in [(2, 1.2), (4, 0.9), (8, 0.5), (5, 0.8)] {
            let n = 200_001;
            let (lo, hi) = (-12.0, 12.0);
            let h = (hi - lo) / (n - 1) as f64;
            let q = QuantizerSpec::uniform(levels, step).unwrap();
            let mut acc = 0.0;
            for i in 0..n {
                let x = lo + h * i as f64;
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                acc += w * (x - q.quantize_real(x)).powi(2) * std_normal_pdf(x);
            }
            let trap = acc * h;
            assert!((trap - unit_gaussian_distortion(levels, step)).abs() < 1e-6);
        }
    }

    #[test]
    fn nearest_two_edges_and_ties() {
        let q = QuantizerSpec::uniform(4, 1.0).unwrap();
        assert_eq!(q.nearest_two(0.7), (2, 3));
        assert_eq!(q.nearest_two(0.2), (2, 1));
        assert_eq!(q.nearest_two(-9.0), (0, 1));
        assert_eq!(q.nearest_two(9.0), (3, 2));
        // exactly on a label: smaller neighbour
        assert_eq!(q.nearest_two(0.5), (2, 1));
        let q2 = QuantizerSpec::uniform(2, 1.0).unwrap();
        assert_eq!(q2.nearest_two(0.1), (1, 0));
        assert_eq!(q2.nearest_two(-0.1), (0, 1));
    }

    proptest! {
        #[test]
        fn quantization_is_idempotent(re in -5.0..5.0f64, im in -5.0..5.0f64, levels in 2usize..10, step in 0.05..2.0f64) {
            let q = QuantizerSpec::uniform(levels, step).unwrap();
            let once = q.quantize_scalar(c(re, im));
            prop_assert!(q.contains(once));
            prop_assert_eq!(q.quantize_scalar(once), once);
        }

        #[test]
        fn error_within_half_step_inside_range(x in -4.0..4.0f64, levels in 2usize..10, step in 0.05..2.0f64) {
            let q = QuantizerSpec::uniform(levels, step).unwrap();
            let th = q.thresholds();
            if x >= th[0] && x < th[th.len() - 1] {
                prop_assert!((x - q.quantize_real(x)).abs() <= step / 2.0 + 1e-12);
            }
        }
    }
}
