//! Batch experiments: scene corpora, parallel trials and report files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::fit::{fit_time_model, FitError, FitReport, MeanCounts, ReferenceRow};
use crate::metrics::{
    aggregate, write_summary_csv, MetricsError, OptAveraging, SummaryRow, TrialReport,
};
use crate::policy::{run_policy, PolicyKind};
use crate::rng::derive_seed;
use crate::tableware::{SceneError, SceneState, Tier, TierConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub tiers: Vec<Tier>,
    pub scenes_per_tier: usize,
    pub policies: Vec<PolicyKind>,
    pub base_seed: u64,
    pub p_fail: f64,
    /// Extra per-leg bin delays, each producing its own summary.
    pub bin_delays: Vec<f64>,
    pub baseline: PolicyKind,
    pub opt_averaging: OptAveraging,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            tiers: Tier::STANDARD.to_vec(),
            scenes_per_tier: 3,
            policies: PolicyKind::ALL.to_vec(),
            base_seed: 0,
            p_fail: 0.0,
            bin_delays: vec![0.0, 3.0, 5.0],
            baseline: PolicyKind::Random,
            opt_averaging: OptAveraging::Pooled,
        }
    }
}

impl ExperimentPlan {
    pub fn check(&self) -> Result<(), String> {
        if self.tiers.is_empty() {
            return Err("plan lists no tiers".into());
        }
        if self.tiers.contains(&Tier::Custom) {
            return Err("plan tiers must be standard tiers".into());
        }
        if self.policies.is_empty() {
            return Err("plan lists no policies".into());
        }
        if !self.policies.contains(&self.baseline) {
            return Err(format!(
                "baseline policy {} is not in the plan",
                self.baseline
            ));
        }
        if self.scenes_per_tier == 0 {
            return Err("scenes_per_tier must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.p_fail) {
            return Err(format!("p_fail {} outside [0, 1)", self.p_fail));
        }
        if let Some(d) = self
            .bin_delays
            .iter()
            .find(|d| !(d.is_finite() && **d >= 0.0))
        {
            return Err(format!("bin delay {d} must be a non-negative number"));
        }
        Ok(())
    }
}

/// Seed of the `k`-th scene of a tier.
pub fn scene_seed(base_seed: u64, tier: Tier, k: usize) -> u64 {
    derive_seed(base_seed, &[tier.ordinal(), k as u64])
}

/// Seed of one policy's trial on a scene.
pub fn trial_seed(scene_seed: u64, policy: PolicyKind) -> u64 {
    derive_seed(scene_seed, &[policy.ordinal()])
}

/// Generates the `k`-th scene of a tier.
pub fn plan_scene(
    cfg: &Config,
    base_seed: u64,
    tier: Tier,
    k: usize,
) -> Result<SceneState, SceneError> {
    cfg.generator()
        .generate(&TierConfig::standard(tier), scene_seed(base_seed, tier, k))
}

pub fn scene_name(tier: Tier, base_seed: u64, k: usize) -> String {
    format!("scene_{}_{}_{}", tier.as_str(), base_seed, k)
}

/// A trial that produced no report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub tier: Tier,
    pub scene: String,
    pub policy: Option<PolicyKind>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanOutcome {
    /// Successful trials ordered by tier, scene and policy.
    pub reports: Vec<TrialReport>,
    pub failures: Vec<TrialFailure>,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Fit(FitError),
}

fn run_scene(
    cfg: &Config,
    plan: &ExperimentPlan,
    tier: Tier,
    k: usize,
) -> Vec<Result<TrialReport, TrialFailure>> {
    let name = scene_name(tier, plan.base_seed, k);
    let fail = |policy, error: String| TrialFailure {
        tier,
        scene: name.clone(),
        policy,
        error,
    };
    let scene = match plan_scene(cfg, plan.base_seed, tier, k) {
        Ok(s) => s,
        Err(e) => return vec![Err(fail(None, e.to_string()))],
    };
    let model = cfg.model();
    plan.policies
        .iter()
        .map(|&policy| {
            let seed = trial_seed(scene.seed, policy);
            let trace = run_policy(
                &scene,
                &cfg.policy_config(policy),
                &model,
                seed,
                plan.p_fail,
            )
            .map_err(|e| fail(Some(policy), e.to_string()))?;
            TrialReport::new(name.clone(), tier, policy, seed, &trace, &cfg.time_model)
                .map_err(|e| fail(Some(policy), e.to_string()))
        })
        .collect()
}

/// Runs every (tier, scene, policy) trial of the plan in parallel. Output
/// order does not depend on scheduling.
pub fn run_plan(cfg: &Config) -> Result<PlanOutcome, HarnessError> {
    let plan = &cfg.plan;
    plan.check().map_err(HarnessError::Plan)?;
    let work: Vec<(Tier, usize)> = plan
        .tiers
        .iter()
        .flat_map(|&t| (0..plan.scenes_per_tier).map(move |k| (t, k)))
        .collect();
    let results: Vec<_> = work
        .par_iter()
        .map(|&(tier, k)| run_scene(cfg, plan, tier, k))
        .collect();
    let mut out = PlanOutcome::default();
    for r in results.into_iter().flatten() {
        match r {
            Ok(report) => out.reports.push(report),
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}

/// Summary at one bin delay, over scenes whose baseline trial succeeded.
pub fn summarize(
    outcome: &PlanOutcome,
    plan: &ExperimentPlan,
    cfg: &Config,
    bin_delay: f64,
) -> Result<Vec<SummaryRow>, MetricsError> {
    let tm = cfg.time_model.with_delay(bin_delay);
    let with_baseline: BTreeSet<(Tier, &str)> = outcome
        .reports
        .iter()
        .filter(|r| r.policy == plan.baseline)
        .map(|r| (r.tier, r.scene.as_str()))
        .collect();
    let reports: Vec<TrialReport> = outcome
        .reports
        .iter()
        .filter(|r| with_baseline.contains(&(r.tier, r.scene.as_str())))
        .map(|r| r.retimed(&tm))
        .collect();
    aggregate(&reports, plan.baseline, plan.opt_averaging)
}

/// Name of the summary file for a swept delay, e.g. `summary_delay_3s.csv`.
pub fn delay_file_name(delay: f64) -> String {
    format!("summary_delay_{delay}s.csv")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_summary_csv(rows, BufWriter::new(file)).map_err(|source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("reports serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `summary.csv` at the configured delay, one summary per swept
/// delay, `trials.jsonl`, and `failures.jsonl` when any trial failed.
/// Returns the paths written.
pub fn write_outputs(
    outcome: &PlanOutcome,
    cfg: &Config,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let plan = &cfg.plan;
    let mut written = Vec::new();

    let path = out_dir.join("summary.csv");
    write_csv(
        &path,
        &summarize(outcome, plan, cfg, cfg.time_model.bin_delay)?,
    )?;
    written.push(path);
    for &d in &plan.bin_delays {
        let path = out_dir.join(delay_file_name(d));
        write_csv(&path, &summarize(outcome, plan, cfg, d)?)?;
        written.push(path);
    }
    let path = out_dir.join("trials.jsonl");
    write_jsonl(&path, &outcome.reports)?;
    written.push(path);
    if !outcome.failures.is_empty() {
        let path = out_dir.join("failures.jsonl");
        write_jsonl(&path, &outcome.failures)?;
        written.push(path);
    }
    Ok(written)
}

/// Mean primitive counts per (tier, policy) over the plan's trials.
pub fn mean_counts(outcome: &PlanOutcome) -> BTreeMap<(Tier, PolicyKind), MeanCounts> {
    let mut sums: BTreeMap<(Tier, PolicyKind), (MeanCounts, usize)> = BTreeMap::new();
    for r in &outcome.reports {
        let (m, n) = sums.entry((r.tier, r.policy)).or_default();
        m.grasps += r.counts.grasps as f64;
        m.pulls += r.counts.pulls as f64;
        m.stacks += r.counts.stacks as f64;
        m.trips += r.counts.trips as f64;
        *n += 1;
    }
    sums.into_iter()
        .map(|(k, (m, n))| {
            let n = n as f64;
            let mean = MeanCounts {
                grasps: m.grasps / n,
                pulls: m.pulls / n,
                stacks: m.stacks / n,
                trips: m.trips / n,
            };
            (k, mean)
        })
        .collect()
}

/// Fits the time model to `reference` using counts simulated on
/// `scenes_per_tier` scenes of every referenced tier.
pub fn fit_from_simulation(
    cfg: &Config,
    reference: &[ReferenceRow],
    scenes_per_tier: usize,
) -> Result<FitReport, HarnessError> {
    let mut tiers: Vec<Tier> = reference.iter().map(|r| r.tier).collect();
    tiers.sort();
    tiers.dedup();
    let sim = Config {
        plan: ExperimentPlan {
            tiers,
            scenes_per_tier,
            policies: PolicyKind::ALL.to_vec(),
            ..cfg.plan.clone()
        },
        ..cfg.clone()
    };
    let outcome = run_plan(&sim)?;
    if let Some(f) = outcome.failures.first() {
        return Err(HarnessError::Plan(format!(
            "simulation failed on {}: {}",
            f.scene, f.error
        )));
    }
    let counts = mean_counts(&outcome);
    fit_time_model(reference, |t, p| counts.get(&(t, p)).copied()).map_err(HarnessError::Fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan(scenes: usize) -> Config {
        Config {
            plan: ExperimentPlan {
                scenes_per_tier: scenes,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn default_plan_has_forty_five_trials() {
        let cfg = small_plan(3);
        let out = run_plan(&cfg).unwrap();
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        assert_eq!(out.reports.len(), 45);
        let rows = summarize(&out, &cfg.plan, &cfg, 0.0).unwrap();
        assert_eq!(rows.len(), 15);
    }

    #[test]
    fn reports_are_canonically_ordered() {
        let out = run_plan(&small_plan(2)).unwrap();
        let keys: Vec<_> = out
            .reports
            .iter()
            .map(|r| (r.tier, r.scene.clone(), r.policy.ordinal()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn adding_a_policy_leaves_other_trials_alone() {
        let mut cfg = small_plan(2);
        cfg.plan.policies = vec![PolicyKind::Random, PolicyKind::Pull];
        let fewer = run_plan(&cfg).unwrap();
        let all = run_plan(&small_plan(2)).unwrap();
        for r in &fewer.reports {
            assert!(all.reports.contains(r));
        }
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let mut cfg = small_plan(1);
        cfg.plan.policies.clear();
        assert!(matches!(run_plan(&cfg), Err(HarnessError::Plan(_))));
        let mut cfg = small_plan(1);
        cfg.plan.policies = vec![PolicyKind::Stack];
        assert!(matches!(run_plan(&cfg), Err(HarnessError::Plan(_))));
        let mut cfg = small_plan(0);
        cfg.plan.scenes_per_tier = 0;
        assert!(matches!(run_plan(&cfg), Err(HarnessError::Plan(_))));
    }

    #[test]
    fn delay_files_are_named_by_seconds() {
        assert_eq!(delay_file_name(3.0), "summary_delay_3s.csv");
        assert_eq!(delay_file_name(0.0), "summary_delay_0s.csv");
        assert_eq!(delay_file_name(2.5), "summary_delay_2.5s.csv");
    }
}
