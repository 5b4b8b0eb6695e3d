//! Greedy quantization-aware refinement of the quantized Wiener filter.
//!
//! Starting from `P = 𝒬(W)`, UEs are visited in a chosen order. For every
//! antenna of the visited UE's column, the entry is replaced by whichever of
//! its four nearest grid points (nearest and second-nearest label per real
//! dimension of the unquantized `w`) maximizes the sum rate on the BBU's
//! channel, with the AAS scaling recomputed for every candidate.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::baseline::{beta_wf, full_power_scale, real_to_complex, wf_precoder, PrecodingResult};
use crate::linalg::{fro_sq, CMat};
use crate::metrics::sum_rate_from_product;
use crate::quantizer::QuantizerSpec;
use crate::rng::rng_from_seed;
use crate::{Error, Result, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OrderingRule {
    /// Decreasing interference caused to other UEs.
    #[default]
    GeneratedInterference,
    Random,
    /// Decreasing interference received from other UEs' streams.
    ReceivedInterference,
}

impl OrderingRule {
    pub fn short_name(self) -> &'static str {
        match self {
            OrderingRule::GeneratedInterference => "gi",
            OrderingRule::Random => "random",
            OrderingRule::ReceivedInterference => "ri",
        }
    }
}

impl std::str::FromStr for OrderingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gi" | "generated_interference" => Ok(OrderingRule::GeneratedInterference),
            "random" => Ok(OrderingRule::Random),
            "ri" | "received_interference" => Ok(OrderingRule::ReceivedInterference),
            other => Err(Error::Config(format!("unknown ordering `{other}`"))),
        }
    }
}

/// How many UEs to refine and how to order them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    /// `None` refines every UE.
    pub s_users: Option<usize>,
    pub ordering: OrderingRule,
    /// Seed for [`OrderingRule::Random`].
    pub seed: u64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            s_users: None,
            ordering: OrderingRule::GeneratedInterference,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RefinementPlan {
    /// Permutation of `0..K`; only the first `s_users` entries are refined.
    pub ue_order: Vec<usize>,
    pub s_users: usize,
    pub ordering_rule: OrderingRule,
}

impl RefinementPlan {
    /// Resolve the visiting order from the effective starting precoder.
    pub fn resolve(cfg: &HeuristicConfig, h: &CMat, p_hat: &CMat) -> Result<Self> {
        let k = h.nrows();
        let s_users = cfg.s_users.unwrap_or(k);
        if s_users == 0 || s_users > k {
            return Err(Error::invalid(format!(
                "S must be in 1..={k}, got {s_users}"
            )));
        }
        let mut order: Vec<usize> = (0..k).collect();
        let by_decreasing = |score: Vec<f64>, order: &mut Vec<usize>| {
            // stable sort keeps lower UE index first among equal scores
            order.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
        };
        match cfg.ordering {
            OrderingRule::GeneratedInterference => {
                by_decreasing(generated_interference(h, p_hat), &mut order)
            }
            OrderingRule::ReceivedInterference => {
                by_decreasing(received_interference(h, p_hat), &mut order)
            }
            OrderingRule::Random => order.shuffle(&mut rng_from_seed(cfg.seed)),
        }
        Ok(Self {
            ue_order: order,
            s_users,
            ordering_rule: cfg.ordering,
        })
    }
}

/// `GI_k = Σ_{i≠k} |[H P̂]_{i,k}|²`: power UE `k`'s stream leaks to others.
pub fn generated_interference(h: &CMat, p_hat: &CMat) -> Vec<f64> {
    let g = h * p_hat;
    (0..g.ncols())
        .map(|k| {
            (0..g.nrows())
                .filter(|&i| i != k)
                .map(|i| g[(i, k)].norm_sqr())
                .sum()
        })
        .collect()
}

/// `RI_k = Σ_{i≠k} |[H P̂]_{k,i}|²`: interference power arriving at UE `k`.
pub fn received_interference(h: &CMat, p_hat: &CMat) -> Vec<f64> {
    let g = h * p_hat;
    (0..g.nrows())
        .map(|k| {
            (0..g.ncols())
                .filter(|&i| i != k)
                .map(|i| g[(k, i)].norm_sqr())
                .sum()
        })
        .collect()
}

/// The (up to) four grid points formed by the nearest and second-nearest
/// labels of each real dimension of `w`. The first entry is always
/// `spec.quantize_scalar(w)`.
pub fn four_candidates(spec: &QuantizerSpec, w: Complex64) -> Vec<Complex64> {
    let l = spec.labels();
    let (r1, r2) = spec.nearest_two(w.re);
    let (i1, i2) = spec.nearest_two(w.im);
    let mut out = Vec::with_capacity(4);
    for &(r, i) in &[(r1, i1), (r2, i1), (r1, i2), (r2, i2)] {
        let z = Complex64::new(l[r], l[i]);
        if !out.contains(&z) {
            out.push(z);
        }
    }
    out
}

/// Observer for each element update: `(ue, antenna, sum rate after update)`.
pub type UpdateHook<'a> = &'a mut dyn FnMut(usize, usize, f64);

/// Heuristic precoding with the standard four-candidate rule.
pub fn heuristic_precode(
    h_hat: &CMat,
    q: f64,
    n0: f64,
    spec: &QuantizerSpec,
    cfg: &HeuristicConfig,
) -> Result<(PrecodingResult, RefinementPlan)> {
    refine_with(
        h_hat,
        q,
        n0,
        spec,
        cfg,
        &mut |s, w, _| four_candidates(s, w),
        None,
    )
}

/// Heuristic precoding with a caller-supplied candidate generator
/// `(spec, w, incumbent) -> candidates` and an optional update observer.
pub fn refine_with(
    h_hat: &CMat,
    q: f64,
    n0: f64,
    spec: &QuantizerSpec,
    cfg: &HeuristicConfig,
    candidates: &mut dyn FnMut(&QuantizerSpec, Complex64, Complex64) -> Vec<Complex64>,
    mut on_update: Option<UpdateHook<'_>>,
) -> Result<(PrecodingResult, RefinementPlan)> {
    let w = wf_precoder(h_hat, q, n0)?;
    let mut p = spec.quantize_matrix(&w);
    let alpha0 = full_power_scale(&p, q)?;
    let plan = RefinementPlan::resolve(cfg, h_hat, &(&p * Complex64::new(alpha0, 0.0)))?;

    // HP and ‖P‖² are updated incrementally; the rate of αP is then
    // evaluated from the K×K product alone.
    let mut hp = h_hat * &p;
    let mut norm = fro_sq(&p);
    let k_users = h_hat.nrows();
    let mut scratch = hp.clone();

    let rate_of = |g: &CMat, norm: f64, scratch: &mut CMat| -> f64 {
        if norm == 0.0 {
            return 0.0;
        }
        let alpha = (q / norm).sqrt();
        scratch.copy_from(g);
        *scratch *= Complex64::new(alpha, 0.0);
        sum_rate_from_product(scratch, n0)
    };

    for &k in plan.ue_order.iter().take(plan.s_users) {
        for m in 0..h_hat.ncols() {
            let old = p[(m, k)];
            let mut best = (old, rate_of(&hp, norm, &mut scratch));
            for cand in candidates(spec, w[(m, k)], old) {
                if cand == old {
                    continue;
                }
                let delta = cand - old;
                let cand_norm = norm - old.norm_sqr() + cand.norm_sqr();
                let mut g = hp.clone();
                for i in 0..k_users {
                    g[(i, k)] += h_hat[(i, m)] * delta;
                }
                let rate = rate_of(&g, cand_norm, &mut scratch);
                if rate > best.1 {
                    best = (cand, rate);
                }
            }
            if best.0 != old {
                let delta = best.0 - old;
                for i in 0..k_users {
                    hp[(i, k)] += h_hat[(i, m)] * delta;
                }
                norm += best.0.norm_sqr() - old.norm_sqr();
                p[(m, k)] = best.0;
            }
            if let Some(hook) = on_update.as_mut() {
                hook(k, m, best.1);
            }
        }
    }

    let alpha = full_power_scale(&p, q)?;
    let beta = real_to_complex(&beta_wf(h_hat, q, n0)?);
    Ok((
        PrecodingResult::new(p, beta, alpha, Scheme::Heuristic),
        plan,
    ))
}
