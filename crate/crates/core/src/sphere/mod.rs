//! Quantization-aware precoding by sphere decoding.
//!
//! For fixed receiver factors `B` and multiplier `λ`, the Lagrangian
//! `tr(Pᴴ(HᴴBᴴBH + λI)P − BHP − (BHP)ᴴ) − λq` separates over the columns
//! of `P`. Each column becomes `min ‖e_i − R a_i‖²` over the alphabet, with
//! `R` the Cholesky factor of `HᴴBᴴBH + λI`, and is solved exactly by
//! [`sesd_solve`]. The outer loop searches `λ` by doubling and bisection for
//! the smallest multiplier whose solution meets the power budget.

mod sesd;
mod subproblem;

pub use sesd::{babai_point, sesd_solve, sesd_solve_capped, Capped, SphereSolution};
pub use subproblem::{
    antenna_order, box_aware_order, build_subproblems, build_subproblems_sorted, deinterleave,
    factorize, interleave, real_expand_upper, regularized_precoder_gram, scaled_rows,
    Factorization, SubproblemInstance,
};

use num_complex::Complex64;
use serde::Serialize;
use web_time::Instant;

use crate::baseline::{beta_opt, beta_wf, real_to_complex, PrecodingResult};
use crate::linalg::{fro_sq, CMat};
use crate::quantizer::QuantizerSpec;
use crate::{Error, Result, Scheme};

/// Solution of the fixed-`λ` problem.
#[derive(Debug, Clone)]
pub struct FixedLambdaSolution {
    pub p: CMat,
    /// `‖P‖²_F`.
    pub power: f64,
    /// `tr(Pᴴ V̂ P − BHP − (BHP)ᴴ)`, the sum of per-column objectives.
    pub objective: f64,
    pub nodes_per_column: Vec<u64>,
}

/// One column's subproblem under an antenna ordering: `order[p]` is the
/// antenna at position `p`.
struct Candidate {
    sub: SubproblemInstance,
    order: Vec<usize>,
}

impl Candidate {
    fn residual_of(&self, x: &[Complex64]) -> f64 {
        let a = interleave(self.order.iter().map(|&row| x[row]));
        self.sub.residual(&a)
    }

    fn to_antennas(&self, a: &[f64]) -> Vec<Complex64> {
        let mut x = vec![Complex64::new(0.0, 0.0); self.order.len()];
        for (pos, z) in deinterleave(a).into_iter().enumerate() {
            x[self.order[pos]] = z;
        }
        x
    }
}

/// Initial node budget per ordering; it grows fourfold each round.
const RACE_BUDGET: u64 = 1 << 15;

/// Exact minimizer of one column.
///
/// The sphere decoder's effort depends strongly on the coordinate order and
/// no single order is reliably good, so the column is solved under several
/// orders in rounds with a growing node budget. Incumbents found by an
/// interrupted search tighten the radius of the others. The first search to
/// finish is exact. Returns the solution (in antenna order), its
/// objective relative to `‖e‖²`, and the total nodes spent.
fn solve_column(candidates: &[Candidate], hints: &[Vec<Complex64>]) -> (Vec<Complex64>, f64, u64) {
    let mut incumbents: Vec<Vec<Complex64>> = hints.to_vec();
    let mut nodes = 0u64;
    let mut budget = RACE_BUDGET;
    loop {
        for ord in candidates {
            let sub = &ord.sub;
            let radius = incumbents
                .iter()
                .map(|x| ord.residual_of(x))
                .fold(f64::INFINITY, f64::min)
                // margin so an incumbent survives the strict comparison
                * (1.0 + 1e-9);
            match sesd_solve_capped(sub, radius, budget) {
                Capped::Complete(sol) => {
                    nodes += sol.nodes_visited;
                    return (
                        ord.to_antennas(&sol.a),
                        sol.objective - sub.e_norm_sq(),
                        nodes,
                    );
                }
                Capped::Incomplete { best, nodes: spent } => {
                    nodes += spent;
                    if let Some(idx) = best {
                        let a: Vec<f64> = idx.iter().map(|&z| sub.labels[z]).collect();
                        incumbents.push(ord.to_antennas(&a));
                    }
                }
            }
        }
        budget = budget.saturating_mul(4);
    }
}

/// Minimize the fixed-`λ` objective over `P ∈ 𝓟^{M×K}`, column by column.
pub fn solve_fixed_lambda(
    h: &CMat,
    beta: &[Complex64],
    lambda: f64,
    spec: &QuantizerSpec,
) -> Result<FixedLambdaSolution> {
    solve_fixed_lambda_warm(h, beta, lambda, spec, &[])
}

/// As [`solve_fixed_lambda`], seeding each column's search radius with the
/// best of the given grid matrices. The minimizer returned is the same as
/// without hints; only the amount of enumeration changes.
pub fn solve_fixed_lambda_warm(
    h: &CMat,
    beta: &[Complex64],
    lambda: f64,
    spec: &QuantizerSpec,
    hints: &[&CMat],
) -> Result<FixedLambdaSolution> {
    let (k, m) = h.shape();
    let (sorted, order) = build_subproblems_sorted(h, beta, lambda, spec)?;
    let mut columns: Vec<Vec<Candidate>> = sorted
        .into_iter()
        .map(|sub| {
            vec![Candidate {
                sub,
                order: order.clone(),
            }]
        })
        .collect();
    for (c, list) in columns.iter_mut().enumerate() {
        let boxed = box_aware_order(h, beta, lambda, spec, c)?;
        if boxed != list[0].order {
            let hp = CMat::from_fn(k, m, |r, j| h[(r, boxed[j])]);
            let sub = build_subproblems(&hp, beta, lambda, spec)?.swap_remove(c);
            list.push(Candidate { sub, order: boxed });
        }
    }
    let column_hints = |c: usize| -> Vec<Vec<Complex64>> {
        hints
            .iter()
            .map(|p| p.column(c).iter().copied().collect())
            .collect()
    };
    let solve = |c: usize| solve_column(&columns[c], &column_hints(c));
    let sols: Vec<(Vec<Complex64>, f64, u64)> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..k).into_par_iter().map(solve).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..k).map(solve).collect()
        }
    };
    let mut p = CMat::zeros(m, k);
    for (c, (x, _, _)) in sols.iter().enumerate() {
        for (row, &z) in x.iter().enumerate() {
            p[(row, c)] = z;
        }
    }
    Ok(FixedLambdaSolution {
        power: fro_sq(&p),
        p,
        objective: sols.iter().map(|s| s.1).sum(),
        nodes_per_column: sols.iter().map(|s| s.2).collect(),
    })
}

/// Bracket state of the multiplier search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagrangeState {
    pub lambda: f64,
    /// `‖P‖²_F` at `lambda`.
    pub power: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SphereDiagnostics {
    /// Every `(λ, ‖P(λ)‖²_F)` evaluated, in order. Cholesky failures are
    /// recorded with infinite power.
    pub lambda_trace: Vec<(f64, f64)>,
    pub final_state: Option<LagrangeState>,
    /// Nodes visited per column in the returned solve.
    pub nodes_per_column: Vec<u64>,
    /// Nodes visited across every solve of the search.
    pub total_nodes: u64,
    pub converged: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SphereOptions {
    /// Alternating `β ← β_opt(P)` / re-solve passes after the first solve.
    pub beta_refinements: usize,
    /// Cap on bisection steps after bracketing.
    pub max_bisections: usize,
    /// Stop once the power is within this relative distance below `q`.
    pub power_tolerance: f64,
    /// Stop once the bracket is narrower than this times `max(1, λ)`.
    pub bracket_tolerance: f64,
}

impl Default for SphereOptions {
    fn default() -> Self {
        Self {
            beta_refinements: 0,
            max_bisections: 200,
            power_tolerance: 1e-3,
            bracket_tolerance: 1e-8,
        }
    }
}

const MAX_DOUBLINGS: usize = 60;

struct Search<'a> {
    h: &'a CMat,
    beta: &'a [Complex64],
    spec: &'a QuantizerSpec,
    q: f64,
    diag: SphereDiagnostics,
    recent: Vec<CMat>,
    /// `min(q, largest achievable power)`: reaching it means the budget
    /// cannot bind at any smaller multiplier.
    ceiling: f64,
}

impl Search<'_> {
    /// `Ok(None)` when `V̂` is numerically singular at this `λ`.
    fn eval(&mut self, lambda: f64) -> Result<Option<FixedLambdaSolution>> {
        let hints: Vec<&CMat> = self.recent.iter().collect();
        match solve_fixed_lambda_warm(self.h, self.beta, lambda, self.spec, &hints) {
            Ok(sol) => {
                self.diag.lambda_trace.push((lambda, sol.power));
                self.diag.total_nodes += sol.nodes_per_column.iter().sum::<u64>();
                // the two latest solutions bracket the next midpoint
                if self.recent.len() == 2 {
                    self.recent.remove(0);
                }
                self.recent.push(sol.p.clone());
                Ok(Some(sol))
            }
            Err(Error::CholeskyFailure { .. }) => {
                self.diag.lambda_trace.push((lambda, f64::INFINITY));
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn feasible(&self, sol: &Option<FixedLambdaSolution>) -> bool {
        sol.as_ref().is_some_and(|s| s.power <= self.q)
    }

    fn run(&mut self, opts: &SphereOptions) -> Result<FixedLambdaSolution> {
        let q = self.q;
        let start = self.eval(1.0)?;
        let (mut lo, mut hi, mut at_hi);
        let mut iterations = 0;
        if self.feasible(&start) {
            hi = 1.0;
            at_hi = start.unwrap();
            lo = 0.5;
            // shrink λ until the budget binds
            loop {
                if at_hi.power >= self.ceiling {
                    // every grid matrix meets the budget (e.g. two levels):
                    // smaller multipliers only shift the objective by a constant
                    self.diag.converged = true;
                    self.finish(0.0, hi, &at_hi, iterations);
                    return Ok(at_hi);
                }
                let s = self.eval(lo)?;
                iterations += 1;
                if !self.feasible(&s) {
                    break;
                }
                hi = lo;
                at_hi = s.unwrap();
                if iterations >= MAX_DOUBLINGS {
                    // constraint inactive down to a vanishing multiplier
                    self.diag.converged = true;
                    self.finish(lo, hi, &at_hi, iterations);
                    return Ok(at_hi);
                }
                lo /= 2.0;
            }
        } else {
            lo = 1.0;
            hi = 2.0;
            let mut found = None;
            for _ in 0..MAX_DOUBLINGS {
                let s = self.eval(hi)?;
                iterations += 1;
                if self.feasible(&s) {
                    found = s;
                    break;
                }
                lo = hi;
                hi *= 2.0;
            }
            match found {
                Some(s) => at_hi = s,
                None => {
                    return Err(Error::Infeasible(format!(
                        "no multiplier up to {hi} meets the power budget {q}"
                    )))
                }
            }
        }

        let mut converged = false;
        for _ in 0..opts.max_bisections {
            if at_hi.power >= q * (1.0 - opts.power_tolerance)
                || hi - lo < opts.bracket_tolerance * hi.max(1.0)
            {
                converged = true;
                break;
            }
            let mid = 0.5 * (lo + hi);
            let s = self.eval(mid)?;
            iterations += 1;
            if self.feasible(&s) {
                hi = mid;
                at_hi = s.unwrap();
            } else {
                lo = mid;
            }
        }
        self.diag.converged = converged;
        self.finish(lo, hi, &at_hi, iterations);
        Ok(at_hi)
    }

    fn finish(&mut self, lo: f64, hi: f64, sol: &FixedLambdaSolution, iterations: usize) {
        self.diag.final_state = Some(LagrangeState {
            lambda: hi,
            power: sol.power,
            bracket: (lo, hi),
            iterations,
        });
        self.diag.nodes_per_column = sol.nodes_per_column.clone();
    }
}

/// Multiplier search for fixed receiver factors. Returns the feasible
/// solution at the smallest multiplier found.
pub fn search_lambda(
    h_hat: &CMat,
    beta: &[Complex64],
    q: f64,
    spec: &QuantizerSpec,
    opts: &SphereOptions,
) -> Result<(FixedLambdaSolution, SphereDiagnostics)> {
    let (k, m) = h_hat.shape();
    if spec.min_power(m, k) > q {
        return Err(Error::Infeasible(format!(
            "every {m}×{k} grid matrix exceeds the power budget {q}"
        )));
    }
    let mut search = Search {
        h: h_hat,
        beta,
        spec,
        q,
        diag: SphereDiagnostics::default(),
        recent: Vec::new(),
        ceiling: spec.max_power(m, k).min(q),
    };
    let sol = search.run(opts)?;
    Ok((sol, search.diag))
}

/// Sphere precoding with `β = β^WF` computed from the BBU's CSI.
///
/// The returned `P` satisfies `‖P‖²_F ≤ q` and is transmitted as is (`α = 1`).
pub fn sphere_precode(
    h_hat: &CMat,
    q: f64,
    n0: f64,
    spec: &QuantizerSpec,
    opts: &SphereOptions,
) -> Result<PrecodingResult> {
    let t0 = Instant::now();
    let mut beta = real_to_complex(&beta_wf(h_hat, q, n0)?);
    let (mut sol, mut diag) = search_lambda(h_hat, &beta, q, spec, opts)?;
    for _ in 0..opts.beta_refinements {
        beta = beta_opt(h_hat, &sol.p, n0)?;
        if beta.iter().all(|b| b.norm() == 0.0) {
            break;
        }
        let (s, d) = search_lambda(h_hat, &beta, q, spec, opts)?;
        diag.lambda_trace.extend(d.lambda_trace);
        diag.total_nodes += d.total_nodes;
        diag.final_state = d.final_state;
        diag.nodes_per_column = d.nodes_per_column;
        diag.converged = d.converged;
        sol = s;
    }
    diag.wall_time_s = t0.elapsed().as_secs_f64();
    let mut result = PrecodingResult::new(sol.p, beta, 1.0, Scheme::Sphere);
    result.sphere = Some(diag);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, ChannelConfig};

    fn setup(k: usize, m: usize, seed: u64, snr: f64) -> (CMat, Vec<Complex64>, QuantizerSpec) {
        let h = draw_channel(&ChannelConfig::new(m, vec![snr; k], 1.0, 1.0), seed)
            .unwrap()
            .h;
        let beta = real_to_complex(&beta_wf(&h, 1.0, 1.0).unwrap());
        let spec = QuantizerSpec::designed(4, 1.0 / (k * m) as f64).unwrap();
        (h, beta, spec)
    }

    #[test]
    fn power_is_non_increasing_in_lambda() {
        for seed in 0..20 {
            let (h, beta, spec) = setup(2, 4, seed, 10.0);
            let powers: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0]
                .iter()
                .map(|&l| solve_fixed_lambda(&h, &beta, l, &spec).unwrap().power)
                .collect();
            for w in powers.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{powers:?}");
            }
        }
    }

    #[test]
    fn huge_lambda_collapses_to_smallest_labels() {
        let (h, beta, spec) = setup(2, 3, 1, 10.0);
        let sol = solve_fixed_lambda(&h, &beta, 1e6, &spec).unwrap();
        let half = spec.step() / 2.0;
        assert!(sol
            .p
            .iter()
            .all(|z| z.re.abs() == half && z.im.abs() == half));
        assert!((sol.power - 2.0 * 6.0 * half * half).abs() < 1e-12);
    }

    #[test]
    fn columns_are_separable() {
        for seed in 0..5 {
            let (h, beta, spec) = setup(2, 2, seed, 100.0);
            let sol = solve_fixed_lambda(&h, &beta, 0.3, &spec).unwrap();
            let joint =
                crate::oracle::exhaustive_fixed_lambda_joint(&h, &beta, 0.3, &spec).unwrap();
            let f = |p: &CMat| crate::oracle::fixed_lambda_objective(&h, p, &beta, 0.3);
            assert!((f(&sol.p) - f(&joint)).abs() < 1e-9);
        }
    }

    #[test]
    fn sphere_output_is_feasible_and_on_grid() {
        for seed in 0..10 {
            let (h, _, spec) = setup(4, 8, seed, 100.0);
            let r = sphere_precode(&h, 1.0, 1.0, &spec, &SphereOptions::default()).unwrap();
            assert!(fro_sq(&r.p) <= 1.0 + 1e-9);
            assert!(r.p.iter().all(|&z| spec.contains(z)));
            assert_eq!(r.alpha, 1.0);
            let d = r.sphere.unwrap();
            assert!(d.converged);
            assert!(!d.lambda_trace.is_empty());
        }
    }

    #[test]
    fn infeasible_budget_is_reported() {
        let (h, beta, _) = setup(2, 2, 0, 10.0);
        let spec = QuantizerSpec::uniform(2, 1.0).unwrap();
        // min power 2·4·0.25 = 2 > 1
        let err = search_lambda(&h, &beta, 1.0, &spec, &SphereOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn beta_refinement_runs() {
        let (h, _, spec) = setup(2, 4, 3, 100.0);
        let opts = SphereOptions {
            beta_refinements: 2,
            ..Default::default()
        };
        let r = sphere_precode(&h, 1.0, 1.0, &spec, &opts).unwrap();
        assert!(fro_sq(&r.p) <= 1.0 + 1e-9);
    }
}
