//! Monte-Carlo experiment harness.
//!
//! An experiment is a set of *arms* (scheme plus system parameters) run over
//! an SNR grid. For every `(snr, trial)` pair one channel is drawn per
//! distinct UE count and shared by all arms, so arms are compared on common
//! random numbers. Trials run in parallel; outcomes are collected in trial
//! order before reduction, so the report does not depend on scheduling.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::baseline::{beta_wf, real_to_complex, unaware_precoder, wf_infinite, PrecodingResult};
use crate::channel::{
    draw_channel, estimate_channel, gamma_from_snr_db, snr_schedule, ChannelConfig, ChannelState,
    CsiMode,
};
use crate::heuristic::{heuristic_precode, HeuristicConfig, OrderingRule};
use crate::metrics::{mean_and_half_width, mse_closed_form, per_ue_sinr};
use crate::oracle::exhaustive_constrained;
use crate::quantizer::QuantizerSpec;
use crate::rng::{derive_seed, stream};
use crate::sphere::{sphere_precode, SphereOptions};
use crate::{Error, Result, Scheme};

pub const CSV_HEADER: &str =
    "scheme,snr_db,trials,mean_sum_rate,ci_half_width,mean_mse,mean_wall_time_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SumrateVsSnr,
    HeuristicOrdering,
    KlProduct,
    ImperfectCsi,
    Pathloss,
    OracleCheck,
    Capacity,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::SumrateVsSnr,
        ExperimentKind::HeuristicOrdering,
        ExperimentKind::KlProduct,
        ExperimentKind::ImperfectCsi,
        ExperimentKind::Pathloss,
        ExperimentKind::OracleCheck,
        ExperimentKind::Capacity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SumrateVsSnr => "sumrate_vs_snr",
            ExperimentKind::HeuristicOrdering => "heuristic_ordering",
            ExperimentKind::KlProduct => "kl_product",
            ExperimentKind::ImperfectCsi => "imperfect_csi",
            ExperimentKind::Pathloss => "pathloss",
            ExperimentKind::OracleCheck => "oracle_check",
            ExperimentKind::Capacity => "capacity",
        }
    }

    /// Whether the experiment is a Monte-Carlo sweep handled by
    /// [`run_experiment`].
    pub fn is_monte_carlo(self) -> bool {
        !matches!(self, ExperimentKind::OracleCheck | ExperimentKind::Capacity)
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Scalar or list in the flat JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Flat key-value configuration; every key optional so that presets, files
/// and command-line overrides can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<OneOrMany>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_spread_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<Scheme>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_users: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordering: Option<OrderingRule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csi: Option<CsiMode>,
    /// Uplink pilot power; defaults to `q`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Extra per-UE large-scale gain on top of the SNR schedule.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<OneOrMany>,
    /// `(K, L)` pairs for the fixed fronthaul-load study.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl_pairs: Option<Vec<(usize, usize)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_refinements: Option<usize>,
    /// Record precoder wall time; disable for byte-reproducible CSVs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

macro_rules! layer {
    ($self:ident, $other:ident, $($field:ident),*) => {
        $( if $other.$field.is_some() { $self.$field = $other.$field.clone(); } )*
    };
}

impl PartialConfig {
    /// Keys set in `other` win.
    pub fn overlay(mut self, other: &PartialConfig) -> Self {
        layer!(
            self,
            other,
            experiment,
            m,
            k,
            levels,
            snr_db,
            snr_spread_db,
            trials,
            seed,
            schemes,
            s_users,
            ordering,
            csi,
            pilot_power,
            n0,
            q,
            gamma,
            kl_pairs,
            beta_refinements,
            timing,
            jobs,
            out
        );
        self
    }

    /// Parse a flat config, or extract the config from a run manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let inner = match value.get("kind").and_then(|k| k.as_str()) {
            Some(MANIFEST_KIND) => value
                .get("config")
                .cloned()
                .ok_or_else(|| Error::Config("manifest without config".into()))?,
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| Error::Config(e.to_string()))
    }

    /// Defaults for an experiment, matching the corresponding figure setup.
    pub fn preset(kind: ExperimentKind) -> Self {
        let grid = |hi: i32| {
            Some(OneOrMany::Many(
                (0..=hi).step_by(5).map(f64::from).collect(),
            ))
        };
        let base = PartialConfig {
            experiment: Some(kind),
            m: Some(16),
            k: Some(4),
            levels: Some(8),
            snr_db: grid(30),
            snr_spread_db: Some(0.0),
            trials: Some(200),
            seed: Some(1),
            schemes: Some(vec![
                Scheme::WfInfinite,
                Scheme::Sphere,
                Scheme::Heuristic,
                Scheme::UnawareWf,
            ]),
            s_users: None,
            ordering: Some(OrderingRule::GeneratedInterference),
            csi: Some(CsiMode::Perfect),
            pilot_power: None,
            n0: Some(1.0),
            q: Some(1.0),
            gamma: Some(OneOrMany::One(1.0)),
            kl_pairs: Some(vec![(10, 2), (5, 4), (4, 5), (2, 10)]),
            beta_refinements: Some(0),
            timing: Some(true),
            jobs: None,
            out: None,
        };
        match kind {
            ExperimentKind::HeuristicOrdering => PartialConfig {
                schemes: Some(vec![Scheme::Heuristic]),
                ..base
            },
            ExperimentKind::KlProduct => PartialConfig {
                snr_db: grid(40),
                trials: Some(100),
                schemes: Some(vec![Scheme::Sphere]),
                ..base
            },
            ExperimentKind::ImperfectCsi => PartialConfig {
                schemes: Some(vec![Scheme::Sphere, Scheme::Heuristic, Scheme::UnawareWf]),
                ..base
            },
            ExperimentKind::Pathloss => PartialConfig {
                snr_spread_db: Some(10.0),
                ..base
            },
            _ => base,
        }
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let kind = self.experiment.unwrap_or(ExperimentKind::SumrateVsSnr);
        let merged = PartialConfig::preset(kind).overlay(self);
        let req = |name: &str| Error::Config(format!("missing `{name}`"));
        let cfg = RunConfig {
            experiment: kind,
            m: merged.m.ok_or_else(|| req("m"))?,
            k: merged.k.ok_or_else(|| req("k"))?,
            levels: merged.levels.ok_or_else(|| req("levels"))?,
            snr_db: merged.snr_db.ok_or_else(|| req("snr_db"))?.to_vec(),
            snr_spread_db: merged.snr_spread_db.unwrap_or(0.0),
            trials: merged.trials.ok_or_else(|| req("trials"))?,
            seed: merged.seed.unwrap_or(1),
            schemes: merged.schemes.ok_or_else(|| req("schemes"))?,
            s_users: merged.s_users,
            ordering: merged.ordering.unwrap_or_default(),
            csi: merged.csi.unwrap_or_default(),
            pilot_power: merged.pilot_power,
            n0: merged.n0.unwrap_or(1.0),
            q: merged.q.unwrap_or(1.0),
            gamma: merged
                .gamma
                .map(|g| g.to_vec())
                .unwrap_or_else(|| vec![1.0]),
            kl_pairs: merged.kl_pairs.unwrap_or_default(),
            beta_refinements: merged.beta_refinements.unwrap_or(0),
            timing: merged.timing.unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fully resolved run configuration. Serializes to the same flat keys that
/// [`PartialConfig`] reads.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub m: usize,
    pub k: usize,
    pub levels: usize,
    pub snr_db: Vec<f64>,
    pub snr_spread_db: f64,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_users: Option<usize>,
    pub ordering: OrderingRule,
    pub csi: CsiMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_power: Option<f64>,
    pub n0: f64,
    pub q: f64,
    pub gamma: Vec<f64>,
    pub kl_pairs: Vec<(usize, usize)>,
    pub beta_refinements: usize,
    pub timing: bool,
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.m == 0 || self.k == 0 {
            return bad("m and k must be positive".into());
        }
        if self.levels < 2 {
            return bad(format!("levels must be ≥ 2, got {}", self.levels));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db must be a non-empty list of finite values".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if !(self.n0 > 0.0 && self.q > 0.0) {
            return bad("n0 and q must be positive".into());
        }
        if self.snr_spread_db < 0.0 {
            return bad("snr_spread_db must be non-negative".into());
        }
        if self.gamma.is_empty() || self.gamma.iter().any(|g| !(*g > 0.0)) {
            return bad("gamma must be positive".into());
        }
        if self.pilot_power.is_some_and(|p| !(p >= 0.0)) {
            return bad("pilot_power must be non-negative".into());
        }
        if let Some(s) = self.s_users {
            if s == 0 || s > self.k {
                return bad(format!("s_users must be in 1..={}", self.k));
            }
        }
        if self.experiment == ExperimentKind::KlProduct && self.kl_pairs.is_empty() {
            return bad("kl_product needs kl_pairs".into());
        }
        if self.experiment.is_monte_carlo() && self.schemes.is_empty() {
            return bad("schemes must not be empty".into());
        }
        Ok(())
    }

    /// Gain multiplier for UE `i` (a scalar applies to everyone).
    fn gamma_for(&self, i: usize) -> f64 {
        if self.gamma.len() == 1 {
            self.gamma[0]
        } else {
            self.gamma[i % self.gamma.len()]
        }
    }
}

/// One simulated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arm {
    pub label: String,
    pub scheme: Scheme,
    pub k: usize,
    pub levels: usize,
    pub csi: CsiMode,
    pub heuristic: HeuristicConfig,
}

pub fn arms_for(cfg: &RunConfig) -> Vec<Arm> {
    let arm = |label: String,
               scheme: Scheme,
               k: usize,
               levels: usize,
               csi: CsiMode,
               h: HeuristicConfig| Arm {
        label,
        scheme,
        k,
        levels,
        csi,
        heuristic: h,
    };
    let heur = HeuristicConfig {
        s_users: cfg.s_users,
        ordering: cfg.ordering,
        seed: 0,
    };
    match cfg.experiment {
        ExperimentKind::HeuristicOrdering => {
            let half = (cfg.k / 2).max(1);
            let mut out = Vec::new();
            for s in [cfg.k, half] {
                for ordering in [OrderingRule::GeneratedInterference, OrderingRule::Random] {
                    let h = HeuristicConfig {
                        s_users: Some(s),
                        ordering,
                        seed: 0,
                    };
                    let label = format!("heuristic_{}_s{}", ordering.short_name(), s);
                    out.push(arm(label, Scheme::Heuristic, cfg.k, cfg.levels, cfg.csi, h));
                }
            }
            out
        }
        ExperimentKind::KlProduct => {
            let mut out = Vec::new();
            for &scheme in &cfg.schemes {
                for &(k, l) in &cfg.kl_pairs {
                    let label = format!("{}_k{}_l{}", scheme.name(), k, l);
                    out.push(arm(label, scheme, k, l, cfg.csi, heur));
                }
            }
            out
        }
        ExperimentKind::ImperfectCsi => {
            let mut out = Vec::new();
            for &scheme in &cfg.schemes {
                for csi in [CsiMode::Perfect, CsiMode::Estimated] {
                    let tag = match csi {
                        CsiMode::Perfect => "perfect",
                        CsiMode::Estimated => "estimated",
                    };
                    let label = format!("{}_{}", scheme.name(), tag);
                    out.push(arm(label, scheme, cfg.k, cfg.levels, csi, heur));
                }
            }
            out
        }
        _ => cfg
            .schemes
            .iter()
            .map(|&s| arm(s.name().to_string(), s, cfg.k, cfg.levels, cfg.csi, heur))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub arm: usize,
    pub scheme: Scheme,
    pub snr_db: f64,
    pub trial: usize,
    pub sum_rate: f64,
    pub mse: f64,
    pub per_ue_sinr: Vec<f64>,
    /// Channel seed of the realization.
    pub seed: u64,
    pub wall_time_s: f64,
    pub sphere_nodes: Option<u64>,
    pub sphere_converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub scheme: String,
    pub snr_db: f64,
    pub trials: usize,
    pub mean_sum_rate: f64,
    pub ci_half_width: f64,
    pub mean_mse: f64,
    pub mean_wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ArmDiagnostics {
    pub label: String,
    pub mean_sphere_nodes: Option<f64>,
    pub sphere_unconverged: usize,
}

pub const MANIFEST_KIND: &str = "qpl-manifest";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub kind: &'static str,
    pub version: String,
    pub master_seed: u64,
    pub config: RunConfig,
    pub arms: Vec<Arm>,
    pub rows: Vec<ReportRow>,
    pub diagnostics: Vec<ArmDiagnostics>,
    #[serde(skip)]
    pub outcomes: Vec<TrialOutcome>,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.scheme,
                r.snr_db,
                r.trials,
                r.mean_sum_rate,
                r.ci_half_width,
                r.mean_mse,
                r.mean_wall_time_s
            ));
        }
        out
    }

    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn row(&self, label: &str, snr_db: f64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.scheme == label && r.snr_db == snr_db)
    }

    /// Per-trial sum rates of one arm at one SNR, in trial order.
    pub fn samples(&self, label: &str, snr_db: f64) -> Vec<f64> {
        let Some(arm) = self.arms.iter().position(|a| a.label == label) else {
            return Vec::new();
        };
        self.outcomes
            .iter()
            .filter(|o| o.arm == arm && o.snr_db == snr_db)
            .map(|o| o.sum_rate)
            .collect()
    }
}

pub fn version_string() -> String {
    format!("qpl-core {}", env!("CARGO_PKG_VERSION"))
}

fn precode(
    arm: &Arm,
    cfg: &RunConfig,
    h_hat: &crate::CMat,
    spec: &QuantizerSpec,
    ordering_seed: u64,
) -> Result<PrecodingResult> {
    let (q, n0) = (cfg.q, cfg.n0);
    match arm.scheme {
        Scheme::WfInfinite => wf_infinite(h_hat, q, n0),
        Scheme::UnawareWf => unaware_precoder(h_hat, q, n0, spec),
        Scheme::Sphere => {
            let opts = SphereOptions {
                beta_refinements: cfg.beta_refinements,
                ..Default::default()
            };
            sphere_precode(h_hat, q, n0, spec, &opts)
        }
        Scheme::Heuristic => {
            let hc = HeuristicConfig {
                seed: ordering_seed,
                ..arm.heuristic
            };
            heuristic_precode(h_hat, q, n0, spec, &hc).map(|(r, _)| r)
        }
        Scheme::Oracle => {
            let beta = real_to_complex(&beta_wf(h_hat, q, n0)?);
            let p = exhaustive_constrained(h_hat, &beta, spec, q)?;
            Ok(PrecodingResult::new(p, beta, 1.0, Scheme::Oracle))
        }
    }
}

fn run_trial(
    cfg: &RunConfig,
    arms: &[Arm],
    specs: &[QuantizerSpec],
    snr_idx: usize,
    trial: usize,
) -> Result<Vec<TrialOutcome>> {
    let snr = cfg.snr_db[snr_idx];
    let path = [snr_idx as u64, trial as u64];
    let channel_seed = derive_seed(cfg.seed, &[path[0], path[1], stream::CHANNEL]);
    let pilot_seed = derive_seed(cfg.seed, &[path[0], path[1], stream::PILOT_NOISE]);
    let ordering_seed = derive_seed(cfg.seed, &[path[0], path[1], stream::ORDERING]);

    // one realization per (K, CSI mode), shared across arms
    let mut channels: BTreeMap<usize, ChannelState> = BTreeMap::new();
    let mut estimates: BTreeMap<usize, ChannelState> = BTreeMap::new();
    let mut out = Vec::with_capacity(arms.len());
    for (ai, arm) in arms.iter().enumerate() {
        if let Entry::Vacant(slot) = channels.entry(arm.k) {
            let snrs = snr_schedule(snr, arm.k, cfg.snr_spread_db);
            let gamma: Vec<f64> = gamma_from_snr_db(&snrs, cfg.n0, cfg.q)
                .into_iter()
                .enumerate()
                .map(|(i, g)| g * cfg.gamma_for(i))
                .collect();
            let mut cc = ChannelConfig::new(cfg.m, gamma, cfg.n0, cfg.q);
            cc.pilot_power = cfg.pilot_power.map(|p| vec![p; arm.k]);
            slot.insert(draw_channel(&cc, channel_seed)?);
        }
        let state = &channels[&arm.k];
        let h_hat = match arm.csi {
            CsiMode::Perfect => &state.h,
            CsiMode::Estimated => {
                if let Entry::Vacant(slot) = estimates.entry(arm.k) {
                    slot.insert(estimate_channel(state, pilot_seed)?);
                }
                &estimates[&arm.k].h_hat
            }
        };
        let t0 = cfg.timing.then(Instant::now);
        let result = precode(arm, cfg, h_hat, &specs[ai], ordering_seed)?;
        let wall = t0.map_or(0.0, |t| t.elapsed().as_secs_f64());
        let p_hat = result.effective();
        let sinr = per_ue_sinr(&state.h, &p_hat, cfg.n0);
        let sphere = result.sphere.as_ref();
        out.push(TrialOutcome {
            arm: ai,
            scheme: arm.scheme,
            snr_db: snr,
            trial,
            sum_rate: sinr.iter().map(|s| (1.0 + s).log2()).sum(),
            mse: mse_closed_form(&state.h, &p_hat, &result.beta, cfg.n0),
            per_ue_sinr: sinr,
            seed: channel_seed,
            wall_time_s: wall,
            sphere_nodes: sphere.map(|d| d.total_nodes),
            sphere_converged: sphere.map(|d| d.converged),
        });
    }
    Ok(out)
}

/// Run a Monte-Carlo experiment. Identical configs give identical reports
/// (apart from wall times when `timing` is on).
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    if !cfg.experiment.is_monte_carlo() {
        return Err(Error::Config(format!(
            "`{}` is not a Monte-Carlo experiment",
            cfg.experiment.name()
        )));
    }
    let arms = arms_for(cfg);
    let specs = arms
        .iter()
        .map(|a| QuantizerSpec::designed(a.levels, cfg.q / (a.k * cfg.m) as f64))
        .collect::<Result<Vec<_>>>()?;
    for a in &arms {
        if a.scheme == Scheme::Heuristic {
            if let Some(s) = a.heuristic.s_users {
                if s > a.k {
                    return Err(Error::Config(format!("s_users {s} exceeds K = {}", a.k)));
                }
            }
        }
    }

    let jobs: Vec<(usize, usize)> = (0..cfg.snr_db.len())
        .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let per_job: Vec<Vec<TrialOutcome>> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            jobs.par_iter()
                .map(|&(s, t)| run_trial(cfg, &arms, &specs, s, t))
                .collect::<Result<_>>()?
        }
        #[cfg(not(feature = "parallel"))]
        {
            jobs.iter()
                .map(|&(s, t)| run_trial(cfg, &arms, &specs, s, t))
                .collect::<Result<_>>()?
        }
    };
    let outcomes: Vec<TrialOutcome> = per_job.into_iter().flatten().collect();

    let mut rows = Vec::new();
    for (ai, arm) in arms.iter().enumerate() {
        for &snr in &cfg.snr_db {
            let sel: Vec<&TrialOutcome> = outcomes
                .iter()
                .filter(|o| o.arm == ai && o.snr_db == snr)
                .collect();
            let rates: Vec<f64> = sel.iter().map(|o| o.sum_rate).collect();
            let (mean, hw) = mean_and_half_width(&rates);
            let n = sel.len() as f64;
            rows.push(ReportRow {
                scheme: arm.label.clone(),
                snr_db: snr,
                trials: sel.len(),
                mean_sum_rate: mean,
                ci_half_width: hw,
                mean_mse: sel.iter().map(|o| o.mse).sum::<f64>() / n,
                mean_wall_time_s: sel.iter().map(|o| o.wall_time_s).sum::<f64>() / n,
            });
        }
    }
    let diagnostics = arms
        .iter()
        .enumerate()
        .map(|(ai, arm)| {
            let sel: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.arm == ai).collect();
            let nodes: Vec<u64> = sel.iter().filter_map(|o| o.sphere_nodes).collect();
            ArmDiagnostics {
                label: arm.label.clone(),
                mean_sphere_nodes: (!nodes.is_empty())
                    .then(|| nodes.iter().sum::<u64>() as f64 / nodes.len() as f64),
                sphere_unconverged: sel
                    .iter()
                    .filter(|o| o.sphere_converged == Some(false))
                    .count(),
            }
        })
        .collect();

    Ok(ExperimentReport {
        kind: MANIFEST_KIND,
        version: version_string(),
        master_seed: cfg.seed,
        config: cfg.clone(),
        arms,
        rows,
        diagnostics,
        outcomes,
    })
}
