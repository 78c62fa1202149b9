//! Objects-per-trip accounting, the clearing-time model and per-policy
//! summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::TraceEvent;
use crate::policy::{ActionCounts, PolicyKind, Trace};
use crate::tableware::Tier;

/// Seconds spent per primitive and per leg of a trip to the bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeModel {
    pub t_grasp: f64,
    pub t_pull: f64,
    pub t_stack: f64,
    /// One-way travel between workspace and bin.
    pub t_travel: f64,
    /// Extra delay added to each leg of a trip.
    pub bin_delay: f64,
}

impl Default for TimeModel {
    /// Parameters fitted to the reference timings with `fit-time`.
    fn default() -> Self {
        Self {
            t_grasp: 0.0,
            t_pull: 12.0778,
            t_stack: 8.9722,
            t_travel: 5.4143,
            bin_delay: 0.0,
        }
    }
}

impl TimeModel {
    pub fn is_valid(&self) -> bool {
        [
            self.t_grasp,
            self.t_pull,
            self.t_stack,
            self.t_travel,
            self.bin_delay,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }

    pub fn with_delay(self, bin_delay: f64) -> Self {
        Self { bin_delay, ..self }
    }

    /// Seconds for one round trip to the bin.
    pub fn round_trip(&self) -> f64 {
        2.0 * (self.t_travel + self.bin_delay)
    }

    /// Time for a trial with the given totals.
    pub fn time_for(&self, counts: &ActionCounts) -> f64 {
        counts.grasps as f64 * self.t_grasp
            + counts.pulls as f64 * self.t_pull
            + counts.stacks as f64 * self.t_stack
            + counts.trips as f64 * self.round_trip()
    }

    fn event_time(&self, e: &TraceEvent) -> f64 {
        let (pulls, stacks) = primitive_counts(e);
        self.t_grasp
            + pulls as f64 * self.t_pull
            + stacks as f64 * self.t_stack
            + if e.trip { self.round_trip() } else { 0.0 }
    }
}

/// Pulls and stacks performed before the final grasp of an event.
fn primitive_counts(e: &TraceEvent) -> (u32, u32) {
    match e.action.as_str() {
        "pull_grasp" => (1, 0),
        "stack_grasp" => {
            let n = e
                .params
                .get("stacks")
                .and_then(serde_json::Value::as_array)
                .map_or(1, Vec::len);
            (0, n as u32)
        }
        _ => (0, 0),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trace has no trips")]
    EmptyTrace,
    #[error("no {baseline} trial for scene {scene} of tier {tier}")]
    MissingBaseline {
        tier: Tier,
        scene: String,
        baseline: PolicyKind,
    },
    #[error("no trials to aggregate")]
    NoTrials,
}

/// Objects deposited in the bin per trip.
pub fn opt(trace: &Trace) -> Result<f64, MetricsError> {
    let trips = trace.events.iter().filter(|e| e.trip).count();
    if trips == 0 {
        return Err(MetricsError::EmptyTrace);
    }
    let objects: usize = trace.events.iter().map(|e| e.moved_to_bin.len()).sum();
    Ok(objects as f64 / trips as f64)
}

/// Modeled seconds to execute a trace.
pub fn model_time(trace: &Trace, tm: &TimeModel) -> f64 {
    trace.events.iter().map(|e| tm.event_time(e)).sum()
}

/// Outcome of one policy on one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub scene: String,
    pub tier: Tier,
    pub policy: PolicyKind,
    pub seed: u64,
    pub trips: u32,
    pub objects_cleared: u32,
    pub opt: f64,
    pub time_s: f64,
    pub failures: u32,
    pub counts: ActionCounts,
}

impl TrialReport {
    pub fn new(
        scene: impl Into<String>,
        tier: Tier,
        policy: PolicyKind,
        seed: u64,
        trace: &Trace,
        tm: &TimeModel,
    ) -> Result<Self, MetricsError> {
        Ok(Self {
            scene: scene.into(),
            tier,
            policy,
            seed,
            trips: trace.counts.trips,
            objects_cleared: trace.counts.objects,
            opt: opt(trace)?,
            time_s: model_time(trace, tm),
            failures: trace.counts.failures,
            counts: trace.counts,
        })
    }

    /// Same trial re-timed under another time model.
    pub fn retimed(&self, tm: &TimeModel) -> Self {
        Self {
            time_s: tm.time_for(&self.counts),
            ..self.clone()
        }
    }
}

/// How per-tier mean OpT is formed from trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptAveraging {
    /// Total objects over total trips.
    #[default]
    Pooled,
    /// Mean of the per-trial values.
    PerTrial,
}

/// One row of the per-tier comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub tier: Tier,
    pub policy: PolicyKind,
    pub trials: usize,
    pub mean_time_s: f64,
    pub mean_opt: f64,
    pub failures: u32,
    /// Baseline time over this policy's time; above 1 favors the policy.
    pub time_ratio: f64,
    /// This policy's OpT over the baseline's.
    pub opt_ratio: f64,
}

fn mean_opt(trials: &[&TrialReport], averaging: OptAveraging) -> f64 {
    match averaging {
        OptAveraging::Pooled => {
            let objects: u64 = trials.iter().map(|t| t.objects_cleared as u64).sum();
            let trips: u64 = trials.iter().map(|t| t.trips as u64).sum();
            objects as f64 / trips as f64
        }
        OptAveraging::PerTrial => trials.iter().map(|t| t.opt).sum::<f64>() / trials.len() as f64,
    }
}

/// Per (tier, policy) means and ratios against `baseline`, ordered by tier
/// then policy.
pub fn aggregate(
    reports: &[TrialReport],
    baseline: PolicyKind,
    averaging: OptAveraging,
) -> Result<Vec<SummaryRow>, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::NoTrials);
    }
    let baseline_scenes: BTreeSet<(u64, &str)> = reports
        .iter()
        .filter(|r| r.policy == baseline)
        .map(|r| (r.tier.ordinal(), r.scene.as_str()))
        .collect();
    if let Some(r) = reports
        .iter()
        .find(|r| !baseline_scenes.contains(&(r.tier.ordinal(), r.scene.as_str())))
    {
        return Err(MetricsError::MissingBaseline {
            tier: r.tier,
            scene: r.scene.clone(),
            baseline,
        });
    }

    let mut groups: BTreeMap<(u64, u64), Vec<&TrialReport>> = BTreeMap::new();
    for r in reports {
        groups
            .entry((r.tier.ordinal(), r.policy.ordinal()))
            .or_default()
            .push(r);
    }
    let stats = |trials: &[&TrialReport]| {
        let time = trials.iter().map(|t| t.time_s).sum::<f64>() / trials.len() as f64;
        (time, mean_opt(trials, averaging))
    };
    let rows = groups
        .iter()
        .map(|((tier, _), trials)| {
            let (time, opt) = stats(trials);
            let base = &groups[&(*tier, baseline.ordinal())];
            let (base_time, base_opt) = stats(base);
            SummaryRow {
                tier: trials[0].tier,
                policy: trials[0].policy,
                trials: trials.len(),
                mean_time_s: time,
                mean_opt: opt,
                failures: trials.iter().map(|t| t.failures).sum(),
                time_ratio: base_time / time,
                opt_ratio: opt / base_opt,
            }
        })
        .collect();
    Ok(rows)
}

/// Writes the summary as CSV with fixed columns and four-decimal floats.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "tier",
        "policy",
        "mean_time_s",
        "mean_opt",
        "failures",
        "time_ratio",
        "opt_ratio",
    ])?;
    for r in rows {
        w.write_record([
            r.tier.as_str().to_string(),
            r.policy.as_str().to_string(),
            format!("{:.4}", r.mean_time_s),
            format!("{:.4}", r.mean_opt),
            r.failures.to_string(),
            format!("{:.4}", r.time_ratio),
            format!("{:.4}", r.opt_ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}
