//! Acceptance criteria, one line each. Runs as a plain binary
//! (`harness = false`) and exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use qpl_core::baseline::unaware_precoder;
use qpl_core::channel::{draw_channel, estimate_channel, gamma_from_snr_db, ChannelConfig};
use qpl_core::experiment::{run_experiment, ExperimentKind, ExperimentReport, PartialConfig};
use qpl_core::heuristic::{heuristic_precode, HeuristicConfig, OrderingRule};
use qpl_core::metrics::{mse_closed_form, mse_empirical, sum_rate};
use qpl_core::oracle::{
    capacity_joint, capacity_separate, exhaustive_fixed_lambda_joint, exhaustive_subproblem,
    fixed_lambda_objective, random_instance, random_system, FronthaulBudget,
};
use qpl_core::quantizer::QuantizerSpec;
use qpl_core::rng::{complex_gaussian, derive_seed, rng_from_seed};
use qpl_core::sphere::{babai_point, sesd_solve, solve_fixed_lambda};
use qpl_core::{CMat, Complex64};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn experiment(kind: ExperimentKind, overrides: PartialConfig) -> ExperimentReport {
    let cfg = PartialConfig {
        experiment: Some(kind),
        ..overrides
    }
    .resolve()
    .expect("valid acceptance config");
    run_experiment(&cfg).expect("experiment runs")
}

fn sesd_exactness() -> Verdict {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (
        any::<u64>(),
        1..=4usize,
        prop_oneof![Just(2usize), Just(4usize)],
    );
    let result = runner.run(&strategy, |(seed, m, levels)| {
        let inst = random_instance(&mut rng_from_seed(seed), 2 * m, levels);
        let sol = sesd_solve(&inst, f64::INFINITY);
        let (_, brute) =
            exhaustive_subproblem(&inst).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(
            (sol.objective - brute).abs() < 1e-9,
            "sesd {} vs exhaustive {}",
            sol.objective,
            brute
        );
        Ok(())
    });
    match result {
        Ok(()) => verdict(true, "1000 random instances match exhaustive search".into()),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn fixed_lambda_separability() -> Verdict {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let (h, beta, spec) = random_system(seed, 2, 2, 2, 10.0);
        let lambda = 10f64.powf(rng_from_seed(seed).random_range(-2.0..1.0));
        let sd = solve_fixed_lambda(&h, &beta, lambda, &spec).expect("solvable");
        let brute = exhaustive_fixed_lambda_joint(&h, &beta, lambda, &spec).expect("small enough");
        worst = worst.max((sd.objective - fixed_lambda_objective(&h, &brute, &beta, lambda)).abs());
    }
    verdict(
        worst < 1e-9,
        format!("100 seeds, max |objective difference| {worst:.2e}"),
    )
}

fn babai_first() -> Verdict {
    let mut rng = rng_from_seed(3);
    let mut mismatches = 0;
    for c in 0..1000 {
        let dim = 2 * (1 + c % 4);
        let levels = [2, 4, 8][c % 3];
        let inst = random_instance(&mut rng, dim, levels);
        if sesd_solve(&inst, f64::INFINITY).first_leaf != babai_point(&inst) {
            mismatches += 1;
        }
    }
    verdict(
        mismatches == 0,
        format!("{mismatches} of 1000 first leaves differ from the Babai point"),
    )
}

/// Criteria 4 and 11 share the sum-rate run.
fn sum_rate_shape(report: &ExperimentReport) -> Verdict {
    let row = |s: &str| report.row(s, 30.0).expect("30 dB row");
    let order = ["wf_infinite", "sphere", "heuristic", "unaware_wf"];
    let gaps_ok = order.windows(2).all(|w| {
        let (a, b) = (row(w[0]), row(w[1]));
        a.mean_sum_rate - b.mean_sum_rate > a.ci_half_width + b.ci_half_width
    });
    let ratio = row("sphere").mean_sum_rate / row("unaware_wf").mean_sum_rate;
    let rates: Vec<String> = order
        .iter()
        .map(|s| format!("{s} {:.2}", row(s).mean_sum_rate))
        .collect();
    verdict(
        gaps_ok && ratio >= 1.5,
        format!(
            "at 30 dB: {}; sphere/unaware = {ratio:.3} (need >= 1.5); ordering with CI gaps {}",
            rates.join(", "),
            if gaps_ok { "holds" } else { "fails" }
        ),
    )
}

fn complexity_trend(report: &ExperimentReport) -> Verdict {
    let t = |s: &str| report.row(s, 30.0).expect("30 dB row").mean_wall_time_s;
    let (sp, he) = (t("sphere"), t("heuristic"));
    let ratio = sp / he;
    verdict(
        he < sp && ratio > 10.0,
        format!("at 30 dB: sphere {sp:.3e} s, heuristic {he:.3e} s, ratio {ratio:.0}"),
    )
}

fn heuristic_dominance() -> Verdict {
    let (m, k, levels) = (16, 4, 8);
    let spec = QuantizerSpec::designed(levels, 1.0 / (k * m) as f64).expect("valid quantizer");
    let plans = [
        HeuristicConfig::default(),
        HeuristicConfig {
            s_users: Some(k / 2),
            ordering: OrderingRule::Random,
            seed: 5,
        },
    ];
    let (mut checked, mut violations) = (0, 0);
    for r in 0..1000u64 {
        let snr = [0.0, 10.0, 20.0, 30.0][r as usize % 4];
        let mut cc = ChannelConfig::new(m, gamma_from_snr_db(&vec![snr; k], 1.0, 1.0), 1.0, 1.0);
        cc.pilot_power = Some(vec![1.0; k]);
        let state = draw_channel(&cc, derive_seed(11, &[r, 0])).expect("channel");
        let h_hat = if r % 2 == 0 {
            state.h.clone()
        } else {
            estimate_channel(&state, derive_seed(11, &[r, 1]))
                .expect("estimate")
                .h_hat
        };
        let base = sum_rate(
            &h_hat,
            &unaware_precoder(&h_hat, 1.0, 1.0, &spec)
                .expect("unaware")
                .effective(),
            1.0,
        );
        for plan in &plans {
            let (res, _) = heuristic_precode(&h_hat, 1.0, 1.0, &spec, plan).expect("heuristic");
            checked += 1;
            if sum_rate(&h_hat, &res.effective(), 1.0) < base {
                violations += 1;
            }
        }
    }
    verdict(
        violations == 0 && checked >= 1000,
        format!("{violations} violations in {checked} (realization, plan) pairs"),
    )
}

fn ordering_study() -> Verdict {
    let report = experiment(
        ExperimentKind::HeuristicOrdering,
        PartialConfig {
            snr_db: Some(qpl_core::experiment::OneOrMany::One(30.0)),
            trials: Some(500),
            timing: Some(false),
            ..Default::default()
        },
    );
    let row = |s: &str| report.row(s, 30.0).expect("row");
    let (gi_half, rnd_half) = (row("heuristic_gi_s2"), row("heuristic_random_s2"));
    let half_gap = gi_half.mean_sum_rate - rnd_half.mean_sum_rate;
    let half_ok = half_gap > gi_half.ci_half_width + rnd_half.ci_half_width;
    let (gi_full, rnd_full) = (row("heuristic_gi_s4"), row("heuristic_random_s4"));
    let rel = (gi_full.mean_sum_rate - rnd_full.mean_sum_rate).abs() / rnd_full.mean_sum_rate;
    verdict(
        half_ok && rel < 0.02,
        format!(
            "S = K/2: GI - random = {half_gap:.2} (CI sum {:.2}); S = K: relative difference {:.2}%",
            gi_half.ci_half_width + rnd_half.ci_half_width,
            100.0 * rel
        ),
    )
}

fn kl_crossover() -> Verdict {
    let report = experiment(
        ExperimentKind::KlProduct,
        PartialConfig {
            timing: Some(false),
            ..Default::default()
        },
    );
    let mut best: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for arm in &report.arms {
        for row in report.rows.iter().filter(|r| r.scheme == arm.label) {
            let entry = best
                .entry(row.snr_db as i64)
                .or_insert((f64::NEG_INFINITY, 0));
            if row.mean_sum_rate > entry.0 {
                *entry = (row.mean_sum_rate, arm.k);
            }
        }
    }
    let ks: Vec<usize> = best.values().map(|&(_, k)| k).collect();
    let monotone = ks.windows(2).all(|w| w[1] <= w[0]);
    let (first, last) = (ks[0], ks[ks.len() - 1]);
    let trace: Vec<String> = best
        .iter()
        .map(|(s, (_, k))| format!("{s}dB:K={k}"))
        .collect();
    verdict(
        monotone && first > last,
        format!(
            "argmax K {} (non-increasing: {monotone}, strictly smaller at 40 dB: {})",
            trace.join(" "),
            first > last
        ),
    )
}

fn imperfect_csi() -> Verdict {
    let report = experiment(
        ExperimentKind::ImperfectCsi,
        PartialConfig {
            snr_db: Some(qpl_core::experiment::OneOrMany::Many(vec![0.0, 30.0])),
            schemes: Some(vec![qpl_core::Scheme::Sphere]),
            timing: Some(false),
            ..Default::default()
        },
    );
    let gap = |snr: f64| {
        let p = report
            .row("sphere_perfect", snr)
            .expect("row")
            .mean_sum_rate;
        let e = report
            .row("sphere_estimated", snr)
            .expect("row")
            .mean_sum_rate;
        (p - e) / p
    };
    let (g0, g30) = (gap(0.0), gap(30.0));
    verdict(
        g30 < g0,
        format!(
            "relative gap {:.1}% at 0 dB, {:.1}% at 30 dB",
            100.0 * g0,
            100.0 * g30
        ),
    )
}

fn remark_arithmetic() -> Verdict {
    let b = FronthaulBudget {
        m: 16,
        k: 4,
        tau: 200,
        n_precoder: 3,
        se: 4.0,
        n_res: 3.0,
    };
    let (sep, joint) = (
        capacity_separate(&b).expect("valid"),
        capacity_joint(&b).expect("valid"),
    );
    verdict(
        sep == 3584.0 && joint == 38400.0,
        format!("separate={sep} joint={joint}"),
    )
}

fn mse_algebra() -> Verdict {
    let mut worst = 0.0f64;
    for t in 0..20u64 {
        let mut rng = rng_from_seed(derive_seed(21, &[t]));
        let k = rng.random_range(1..=4);
        let m = rng.random_range(k..=8);
        let h = CMat::from_fn(k, m, |_, _| complex_gaussian(&mut rng, 1.0));
        let p = CMat::from_fn(m, k, |_, _| {
            complex_gaussian(&mut rng, 1.0 / (m * k) as f64)
        });
        let beta: Vec<Complex64> = (0..k).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let n0 = rng.random_range(0.1..1.0);
        let closed = mse_closed_form(&h, &p, &beta, n0);
        let empirical = mse_empirical(&h, &p, &beta, n0, 100_000, derive_seed(21, &[t, 1]));
        worst = worst.max((closed - empirical).abs() / closed);
    }
    verdict(
        worst < 0.01,
        format!("20 triples, max relative deviation {:.3}%", 100.0 * worst),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let t0 = Instant::now();
        let v = f();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n:>2} {status} {name}: {} [{:.1} s]",
            v.detail,
            t0.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed += 1;
        }
    };
    report(1, "sesd exactness", &mut sesd_exactness);
    report(
        2,
        "fixed-lambda separability",
        &mut fixed_lambda_separability,
    );
    report(3, "babai first leaf", &mut babai_first);
    let t0 = Instant::now();
    let sumrate = experiment(ExperimentKind::SumrateVsSnr, PartialConfig::default());
    println!("sum-rate run took {:.1} s", t0.elapsed().as_secs_f64());
    report(4, "sum-rate shape", &mut || sum_rate_shape(&sumrate));
    report(5, "heuristic dominance", &mut heuristic_dominance);
    report(6, "ordering study", &mut ordering_study);
    report(7, "K*L crossover", &mut kl_crossover);
    report(8, "imperfect CSI gap", &mut imperfect_csi);
    report(9, "fronthaul arithmetic", &mut remark_arithmetic);
    report(10, "MSE algebra", &mut mse_algebra);
    report(11, "complexity trend", &mut || complexity_trend(&sumrate));
    if failed > 0 {
        println!("{failed} of 11 criteria failed");
        std::process::exit(1);
    }
    println!("all 11 criteria passed");
}
