//! Fitting the time model to reference clearing times.
//!
//! Each reference row gives a measured time for one (tier, policy) pair; the
//! simulator supplies the mean number of grasps, pulls, stacks and trips for
//! the same pair. Non-negative least squares on relative residuals then
//! recovers per-primitive durations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::TimeModel;
use crate::policy::PolicyKind;
use crate::tableware::Tier;

/// Reference timings bundled with the crate.
pub const REFERENCE_TABLE: &str = include_str!("../data/reference_times.csv");

#[derive(Debug, Error)]
pub enum FitError {
    #[error("reading reference table: {0}")]
    Table(#[from] csv::Error),
    #[error("no simulated counts for {tier} / {policy}")]
    MissingCounts { tier: Tier, policy: PolicyKind },
    #[error("reference time for {tier} / {policy} must be positive")]
    NonPositiveTime { tier: Tier, policy: PolicyKind },
    #[error("empty reference table")]
    Empty,
}

/// One measured row: mean clearing time, OpT and failure count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub tier: Tier,
    pub policy: PolicyKind,
    pub time_s: f64,
    pub opt: f64,
    pub failures: u32,
}

pub fn parse_reference_table(text: &str) -> Result<Vec<ReferenceRow>, FitError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let rows = rdr
        .deserialize()
        .collect::<Result<Vec<ReferenceRow>, _>>()?;
    if rows.is_empty() {
        return Err(FitError::Empty);
    }
    Ok(rows)
}

pub fn reference_table() -> Vec<ReferenceRow> {
    parse_reference_table(REFERENCE_TABLE).expect("bundled reference table parses")
}

/// Mean primitive counts per trial.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanCounts {
    pub grasps: f64,
    pub pulls: f64,
    pub stacks: f64,
    pub trips: f64,
}

impl MeanCounts {
    fn design_row(&self) -> [f64; 4] {
        [self.grasps, self.pulls, self.stacks, 2.0 * self.trips]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRow {
    pub tier: Tier,
    pub policy: PolicyKind,
    pub observed_s: f64,
    pub predicted_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: TimeModel,
    /// Root mean square of (predicted - observed) / observed.
    pub relative_rms: f64,
    pub rows: Vec<FittedRow>,
}

/// Fits grasp, pull, stack and one-way travel times with no bin delay.
pub fn fit_time_model(
    reference: &[ReferenceRow],
    counts: impl Fn(Tier, PolicyKind) -> Option<MeanCounts>,
) -> Result<FitReport, FitError> {
    if reference.is_empty() {
        return Err(FitError::Empty);
    }
    let n = reference.len();
    let mut design = DMatrix::zeros(n, 4);
    let mut target = DVector::zeros(n);
    let mut raw = Vec::with_capacity(n);
    for (i, r) in reference.iter().enumerate() {
        let c = counts(r.tier, r.policy).ok_or(FitError::MissingCounts {
            tier: r.tier,
            policy: r.policy,
        })?;
        if r.time_s.is_nan() || r.time_s <= 0.0 {
            return Err(FitError::NonPositiveTime {
                tier: r.tier,
                policy: r.policy,
            });
        }
        let row = c.design_row();
        for (j, v) in row.iter().enumerate() {
            design[(i, j)] = v / r.time_s;
        }
        target[i] = 1.0;
        raw.push(row);
    }
    let p = nnls(&design, &target);
    let model = TimeModel {
        t_grasp: p[0],
        t_pull: p[1],
        t_stack: p[2],
        t_travel: p[3],
        bin_delay: 0.0,
    };
    let rows: Vec<FittedRow> = reference
        .iter()
        .zip(&raw)
        .map(|(r, row)| FittedRow {
            tier: r.tier,
            policy: r.policy,
            observed_s: r.time_s,
            predicted_s: row.iter().zip(p.iter()).map(|(a, b)| a * b).sum(),
        })
        .collect();
    let relative_rms = (rows
        .iter()
        .map(|r| ((r.predicted_s - r.observed_s) / r.observed_s).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(FitReport {
        model,
        relative_rms,
        rows,
    })
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone()
        .svd(true, true)
        .solve(b, 1e-12)
        .expect("both singular vector sets were computed")
}

/// Minimizes `|a x - b|` subject to `x >= 0` (Lawson-Hanson active set).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    if n == 0 || a.nrows() == 0 {
        return x;
    }
    let tol = 10.0 * f64::EPSILON * a.abs().max() * a.nrows().max(n) as f64;
    let mut passive = vec![false; n];
    let mut w = a.transpose() * (b - a * &x);

    for _ in 0..3 * n.max(10) {
        let entering = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = entering else { break };
        passive[j] = true;

        loop {
            let cols: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = a.select_columns(&cols);
            let sol = least_squares(&sub, b);
            let mut z = DVector::zeros(n);
            for (k, &c) in cols.iter().enumerate() {
                z[c] = sol[k];
            }
            if cols.iter().all(|&c| z[c] > tol) {
                x = z;
                break;
            }
            let alpha = cols
                .iter()
                .filter(|&&c| z[c] <= tol)
                .map(|&c| x[c] / (x[c] - z[c]))
                .fold(f64::INFINITY, f64::min);
            x += (z - &x) * alpha;
            for &c in &cols {
                if x[c].abs() <= tol {
                    x[c] = 0.0;
                    passive[c] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        w = a.transpose() * (b - a * &x);
    }
    x.apply(|v| *v = v.max(0.0));
    x
}
