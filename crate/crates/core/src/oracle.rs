//! Brute-force references and the fronthaul capacity calculator.
//!
//! The exhaustive searches evaluate the quadratic objectives directly from
//! `H`, `β` and `P` (no Cholesky factor, no tree search), so they serve as
//! independent checks on the sphere decoder. Enumeration sizes are capped
//! at `2^20` points; larger requests are hard errors.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{fro_sq, CMat};
use crate::metrics::mse_variable_part;
use crate::quantizer::QuantizerSpec;
use crate::rng::{complex_gaussian, rng_from_seed};
use crate::sphere::{
    babai_point, build_subproblems, regularized_precoder_gram, sesd_solve, solve_fixed_lambda,
    SubproblemInstance,
};
use crate::{Error, Result};

pub const ENUMERATION_LIMIT: u64 = 1 << 20;

/// Fronthaul load parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FronthaulBudget {
    pub m: u64,
    pub k: u64,
    /// Symbol vectors per block.
    pub tau: u64,
    /// Precoder bits per real dimension.
    pub n_precoder: u64,
    /// Bits per data symbol.
    pub se: f64,
    /// Resolution multiplier when sending precoded samples instead.
    pub n_res: f64,
}

impl FronthaulBudget {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.n_precoder == 0 {
            return Err(Error::invalid("M, K and precoder bits must be positive"));
        }
        if !(self.se > 0.0 && self.n_res > 0.0) {
            return Err(Error::invalid(
                "SE and resolution multiplier must be positive",
            ));
        }
        Ok(())
    }
}

/// Bits per block when the precoder and the symbols travel separately:
/// `2 M K N_precoder + τ K SE`.
pub fn capacity_separate(b: &FronthaulBudget) -> Result<f64> {
    b.validate()?;
    Ok((2 * b.m * b.k * b.n_precoder) as f64 + (b.tau * b.k) as f64 * b.se)
}

/// Bits per block when precoded samples are sent: `M τ N_res SE`.
pub fn capacity_joint(b: &FronthaulBudget) -> Result<f64> {
    b.validate()?;
    Ok((b.m * b.tau) as f64 * b.n_res * b.se)
}

fn guard(levels: usize, coords: usize) -> Result<u64> {
    let points = (levels as f64).powi(coords as i32);
    if points > ENUMERATION_LIMIT as f64 {
        return Err(Error::SizeGuard {
            points,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(points as u64)
}

/// Decode enumeration counter `n` into `coords` label indices, most
/// significant first, so increasing `n` is lexicographic order.
fn digits(mut n: u64, levels: usize, coords: usize, out: &mut [usize]) {
    for slot in out[..coords].iter_mut().rev() {
        *slot = (n % levels as u64) as usize;
        n /= levels as u64;
    }
}

fn column_from(labels: &[f64], idx: &[usize]) -> Vec<Complex64> {
    idx.chunks_exact(2)
        .map(|c| Complex64::new(labels[c[0]], labels[c[1]]))
        .collect()
}

/// `aᴴ V a − 2 Re(h_iᵀ a)` with `h_i = β_i · (row i of H)`.
fn column_objective(v: &CMat, h: &CMat, beta: &[Complex64], i: usize, a: &[Complex64]) -> f64 {
    let m = a.len();
    let mut quad = Complex64::new(0.0, 0.0);
    for r in 0..m {
        let mut va = Complex64::new(0.0, 0.0);
        for c in 0..m {
            va += v[(r, c)] * a[c];
        }
        quad += a[r].conj() * va;
    }
    let lin: Complex64 = (0..m).map(|mm| beta[i] * h[(i, mm)] * a[mm]).sum();
    quad.re - 2.0 * lin.re
}

/// Every column candidate with its objective and power, lexicographic order.
struct ColumnTable {
    columns: Vec<Vec<Complex64>>,
    objective: Vec<f64>,
    power: Vec<f64>,
}

fn column_tables(
    h: &CMat,
    beta: &[Complex64],
    lambda: f64,
    spec: &QuantizerSpec,
) -> Result<Vec<ColumnTable>> {
    let (k, m) = h.shape();
    guard(spec.levels(), 2 * m * k)?;
    let n = guard(spec.levels(), 2 * m)?;
    let v = regularized_precoder_gram(h, beta, lambda);
    let mut idx = vec![0usize; 2 * m];
    let columns: Vec<Vec<Complex64>> = (0..n)
        .map(|c| {
            digits(c, spec.levels(), 2 * m, &mut idx);
            column_from(spec.labels(), &idx)
        })
        .collect();
    let power: Vec<f64> = columns
        .iter()
        .map(|a| a.iter().map(Complex64::norm_sqr).sum())
        .collect();
    Ok((0..k)
        .map(|i| ColumnTable {
            objective: columns
                .iter()
                .map(|a| column_objective(&v, h, beta, i, a))
                .collect(),
            power: power.clone(),
            columns: columns.clone(),
        })
        .collect())
}

fn assemble(tables: &[ColumnTable], choice: &[usize]) -> CMat {
    let m = tables[0].columns[0].len();
    CMat::from_fn(m, tables.len(), |r, c| tables[c].columns[choice[c]][r])
}

/// Minimizer of `tr(Pᴴ(HᴴBᴴBH + λI)P − BHP − (BHP)ᴴ)` by enumerating each
/// column's `L^{2M}` candidates. Ties keep the lexicographically first.
pub fn exhaustive_fixed_lambda(
    h: &CMat,
    beta: &[Complex64],
    lambda: f64,
    spec: &QuantizerSpec,
) -> Result<CMat> {
    let tables = column_tables(h, beta, lambda, spec)?;
    let choice: Vec<usize> = tables
        .iter()
        .map(|t| {
            let mut best = 0;
            for (j, &o) in t.objective.iter().enumerate() {
                if o < t.objective[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    Ok(assemble(&tables, &choice))
}

/// Same objective, enumerating all of `𝓟^{M×K}` at once.
pub fn exhaustive_fixed_lambda_joint(
    h: &CMat,
    beta: &[Complex64],
    lambda: f64,
    spec: &QuantizerSpec,
) -> Result<CMat> {
    let (k, m) = h.shape();
    let coords = 2 * m * k;
    let n = guard(spec.levels(), coords)?;
    let mut idx = vec![0usize; coords];
    let mut best: Option<(f64, CMat)> = None;
    for c in 0..n {
        digits(c, spec.levels(), coords, &mut idx);
        let p = CMat::from_fn(m, k, |r, col| {
            let base = 2 * (col * m + r);
            Complex64::new(spec.labels()[idx[base]], spec.labels()[idx[base + 1]])
        });
        let obj = fixed_lambda_objective(h, &p, beta, lambda);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, p));
        }
    }
    Ok(best.expect("at least one grid point").1)
}

/// `tr(Pᴴ V̂ P − BHP − (BHP)ᴴ)` evaluated from the trace form.
pub fn fixed_lambda_objective(h: &CMat, p: &CMat, beta: &[Complex64], lambda: f64) -> f64 {
    mse_variable_part(h, p, beta) + lambda * fro_sq(p)
}

/// Minimizer of the fixed-`β` MSE over `P ∈ 𝓟^{M×K}` with `‖P‖²_F ≤ q`.
pub fn exhaustive_constrained(
    h: &CMat,
    beta: &[Complex64],
    spec: &QuantizerSpec,
    q: f64,
) -> Result<CMat> {
    let tables = column_tables(h, beta, 0.0, spec)?;
    let k = tables.len();
    let n = tables[0].columns.len();
    let mut choice = vec![0usize; k];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let total = (n as u64).pow(k as u32);
    for c in 0..total {
        digits(c, n, k, &mut choice);
        let power: f64 = (0..k).map(|i| tables[i].power[choice[i]]).sum();
        if power > q {
            continue;
        }
        let obj: f64 = (0..k).map(|i| tables[i].objective[choice[i]]).sum();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, choice.clone()));
        }
    }
    match best {
        Some((_, ch)) => Ok(assemble(&tables, &ch)),
        None => Err(Error::Infeasible(format!(
            "no grid matrix meets the power budget {q}"
        ))),
    }
}

/// Exhaustive minimum of `‖e − R a‖²` over the label box.
pub fn exhaustive_subproblem(inst: &SubproblemInstance) -> Result<(Vec<usize>, f64)> {
    let n = inst.dim();
    let levels = inst.labels.len();
    let total = guard(levels, n)?;
    let mut idx = vec![0usize; n];
    let mut a = vec![0.0; n];
    let mut best = (Vec::new(), f64::INFINITY);
    for c in 0..total {
        digits(c, levels, n, &mut idx);
        for (x, &z) in a.iter_mut().zip(&idx) {
            *x = inst.labels[z];
        }
        let obj = inst.residual(&a);
        if obj < best.1 {
            best = (idx.clone(), obj);
        }
    }
    Ok(best)
}

/// A random but realistic subproblem: built from a random channel,
/// receiver factors and multiplier, with `dim/2` antennas.
pub fn random_instance<R: Rng>(rng: &mut R, dim: usize, levels: usize) -> SubproblemInstance {
    assert!(
        dim >= 2 && dim.is_multiple_of(2),
        "instances come in complex pairs"
    );
    let m = dim / 2;
    let k = rng.random_range(1..=m + 1);
    let gain = 10f64.powf(rng.random_range(-1.0..2.0));
    let h = CMat::from_fn(k, m, |_, _| complex_gaussian(rng, gain));
    let beta: Vec<Complex64> = (0..k).map(|_| complex_gaussian(rng, 1.0)).collect();
    let lambda = 10f64.powf(rng.random_range(-2.0..1.0));
    let step = rng.random_range(0.1..1.5);
    let spec = QuantizerSpec::uniform(levels, step).expect("valid spec");
    let mut subs = build_subproblems(&h, &beta, lambda, &spec).expect("λ > 0 keeps V̂ definite");
    let pick = rng.random_range(0..subs.len());
    subs.swap_remove(pick)
}

/// Random `(H, β, spec)` with `β = β^WF` and a designed quantizer.
pub fn random_system(
    seed: u64,
    k: usize,
    m: usize,
    levels: usize,
    snr: f64,
) -> (CMat, Vec<Complex64>, QuantizerSpec) {
    let mut rng = rng_from_seed(seed);
    let h = CMat::from_fn(k, m, |_, _| complex_gaussian(&mut rng, snr));
    let beta = crate::baseline::beta_wf(&h, 1.0, 1.0)
        .expect("regularized WF")
        .into_iter()
        .map(|b| Complex64::new(b, 0.0))
        .collect();
    let spec = QuantizerSpec::designed(levels, 1.0 / (k * m) as f64).expect("valid quantizer");
    (h, beta, spec)
}

/// Pass/fail counts of one agreement check.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AgreementCount {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
}

impl AgreementCount {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    fn record(&mut self, ok: bool) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AgreementReport {
    pub checks: Vec<AgreementCount>,
    /// Relative MSE gap of sphere precoding over the constrained optimum
    /// on tiny systems (duality-gap cases show up as positive values).
    pub constrained_gaps: Vec<f64>,
}

impl AgreementReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.failed == 0)
    }
}

/// Run every oracle comparison; `cases` sets the per-check sample count.
pub fn run_agreement_suite(seed: u64, cases: usize) -> Result<AgreementReport> {
    let mut rng = rng_from_seed(seed);
    let mut exact = AgreementCount::new("sesd_vs_exhaustive");
    let mut babai = AgreementCount::new("babai_first_leaf");
    for c in 0..cases {
        let dim = 2 * (1 + c % 4);
        let levels = if c % 2 == 0 { 2 } else { 4 };
        let inst = random_instance(&mut rng, dim, levels);
        let sol = sesd_solve(&inst, f64::INFINITY);
        let (_, brute) = exhaustive_subproblem(&inst)?;
        exact.record((sol.objective - brute).abs() < 1e-9);
        babai.record(sol.first_leaf == babai_point(&inst));
    }

    let mut fixed = AgreementCount::new("fixed_lambda_vs_joint_exhaustive");
    let mut separable = AgreementCount::new("per_column_vs_joint");
    for s in 0..cases.min(100) as u64 {
        let (h, beta, spec) = random_system(seed ^ (s + 1), 2, 2, 2, 10.0);
        let lambda = 0.5;
        let sd = solve_fixed_lambda(&h, &beta, lambda, &spec)?;
        let brute = exhaustive_fixed_lambda_joint(&h, &beta, lambda, &spec)?;
        let diff = sd.objective - fixed_lambda_objective(&h, &brute, &beta, lambda);
        fixed.record(diff.abs() < 1e-9);

        let (h, beta, spec) = random_system(seed ^ (s + 1000), 2, 1, 2, 10.0);
        let per_col = exhaustive_fixed_lambda(&h, &beta, lambda, &spec)?;
        let joint = exhaustive_fixed_lambda_joint(&h, &beta, lambda, &spec)?;
        separable.record(per_col == joint);
    }

    let mut gaps = Vec::new();
    let mut feasible =
        AgreementCount::new("sphere_feasible_and_not_better_than_constrained_optimum");
    for s in 0..cases.min(100) as u64 {
        let (h, _, spec) = random_system(seed ^ (s + 5000), 1, 2, 2, 10.0);
        let q = 1.0;
        let sp = crate::sphere::sphere_precode(&h, q, 1.0, &spec, &Default::default())?;
        let opt = exhaustive_constrained(&h, &sp.beta, &spec, q)?;
        let mse_sp = mse_variable_part(&h, &sp.p, &sp.beta);
        let mse_opt = mse_variable_part(&h, &opt, &sp.beta);
        feasible.record(fro_sq(&sp.p) <= q * (1.0 + 1e-9) && mse_opt <= mse_sp + 1e-9);
        let scale = mse_opt.abs().max(1e-12);
        gaps.push((mse_sp - mse_opt) / scale);
    }

    Ok(AgreementReport {
        checks: vec![exact, babai, fixed, separable, feasible],
        constrained_gaps: gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_examples() {
        let b = FronthaulBudget {
            m: 16,
            k: 4,
            tau: 200,
            n_precoder: 3,
            se: 4.0,
            n_res: 3.0,
        };
        assert_eq!(capacity_separate(&b).unwrap(), 3584.0);
        assert_eq!(capacity_joint(&b).unwrap(), 38400.0);
        let ratio = capacity_joint(&b).unwrap() / capacity_separate(&b).unwrap();
        assert!((ratio - 10.714).abs() < 1e-3);
        let no_data = FronthaulBudget { tau: 0, ..b };
        assert_eq!(capacity_separate(&no_data).unwrap(), 2.0 * 16.0 * 4.0 * 3.0);
        let double_k = FronthaulBudget { k: 8, ..b };
        assert_eq!(capacity_separate(&double_k).unwrap(), 2.0 * 3584.0);
        assert!(capacity_joint(&FronthaulBudget { n_res: 0.0, ..b }).is_err());
    }

    #[test]
    fn single_entry_reduces_to_nearest_grid_point() {
        // M = K = 1: objective v|a|² − 2Re(βh a) is minimized by the grid
        // point nearest to conj(βh)/v.
        let (h, beta, spec) = random_system(3, 1, 1, 4, 5.0);
        let lambda = 0.2;
        let v = (beta[0] * h[(0, 0)]).norm_sqr() + lambda;
        let target = (beta[0] * h[(0, 0)]).conj() / v;
        let p = exhaustive_fixed_lambda(&h, &beta, lambda, &spec).unwrap();
        let l = spec.labels();
        let nearest = |x: f64| {
            *l.iter()
                .min_by(|a, b| (*a - x).abs().total_cmp(&(*b - x).abs()))
                .unwrap()
        };
        assert_eq!(
            p[(0, 0)],
            Complex64::new(nearest(target.re), nearest(target.im))
        );
    }

    #[test]
    fn constrained_edges() {
        let (h, beta, spec) = random_system(4, 2, 2, 2, 10.0);
        let free = exhaustive_constrained(&h, &beta, &spec, 1e9).unwrap();
        let unconstrained = exhaustive_fixed_lambda(&h, &beta, 0.0, &spec).unwrap();
        assert_eq!(free, unconstrained);
        let floor = spec.min_power(2, 2);
        assert!(matches!(
            exhaustive_constrained(&h, &beta, &spec, floor * 0.999),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn size_guard_is_an_error() {
        let (h, beta, spec) = random_system(1, 4, 4, 4, 1.0);
        assert!(matches!(
            exhaustive_fixed_lambda(&h, &beta, 1.0, &spec),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn small_suite_passes() {
        let report = run_agreement_suite(17, 40).unwrap();
        assert!(report.all_passed(), "{report:?}");
    }
}
