use serde::{Deserialize, Serialize};

use super::ecdf::{ecdf, EcdfCurve};
use super::report::SimReport;
use super::wilcoxon::{wilcoxon_rank_sum, wilcoxon_signed_rank};
use crate::error::{Error, Result};

/// Baseline and treated runs sharing one seed and topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedRun {
    pub seed: u64,
    pub baseline: SimReport,
    pub treated: SimReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Baseline,
    Treated,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Treated => "treated",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SyncTimeS,
    SyncRate,
    MsgsPerSyncBlock,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::SyncTimeS, Metric::SyncRate, Metric::MsgsPerSyncBlock];

    pub fn name(self) -> &'static str {
        match self {
            Metric::SyncTimeS => "sync_time_s",
            Metric::SyncRate => "sync_rate",
            Metric::MsgsPerSyncBlock => "msgs_per_sync_block",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn of(self, r: &SimReport) -> Option<f64> {
        match self {
            Metric::SyncTimeS => r.sync_time_s,
            Metric::SyncRate => Some(r.sync_rate),
            Metric::MsgsPerSyncBlock => r.msgs_per_sync_block,
        }
    }

    /// Whether a smaller value is an improvement.
    pub fn lower_is_better(self) -> bool {
        !matches!(self, Metric::SyncRate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: Metric,
    pub baseline_mean: f64,
    pub treated_mean: f64,
    /// Relative change in percent, or percentage points for the sync rate.
    pub change: Option<f64>,
    pub change_unit: String,
    pub test: String,
    /// U of the baseline sample (rank-sum) or T+ (signed-rank).
    pub statistic: f64,
    pub p_value: f64,
    pub n_used: usize,
    /// Pairs dropped because the metric was undefined in either arm.
    pub excluded_pairs: usize,
    pub baseline_ecdf: EcdfCurve<f64>,
    pub treated_ecdf: EcdfCurve<f64>,
}

impl MetricComparison {
    /// Treated mean strictly better than baseline mean.
    pub fn improved(&self) -> bool {
        if self.metric.lower_is_better() {
            self.treated_mean < self.baseline_mean
        } else {
            self.treated_mean > self.baseline_mean
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub pairs: usize,
    pub note: String,
    pub metrics: Vec<MetricComparison>,
}

impl ComparisonReport {
    pub fn metric(&self, m: Metric) -> &MetricComparison {
        self.metrics
            .iter()
            .find(|c| c.metric == m)
            .expect("every metric is summarized")
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Per-metric means, change, test and ECDFs over the paired runs.
///
/// The default test is the unpaired rank-sum over the pooled arms;
/// `paired_test` switches to the signed-rank test on per-seed differences.
pub fn summarize_experiment(pairs: &[PairedRun], paired_test: bool) -> Result<ComparisonReport> {
    if pairs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    let mut metrics = Vec::with_capacity(3);
    for metric in Metric::ALL {
        let (base, treat): (Vec<f64>, Vec<f64>) = pairs
            .iter()
            .filter_map(|p| Some((metric.of(&p.baseline)?, metric.of(&p.treated)?)))
            .unzip();
        let excluded_pairs = pairs.len() - base.len();
        if base.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "fewer than 2 pairs define {}",
                metric.name()
            )));
        }
        let (bm, tm) = (mean(&base), mean(&treat));
        let (change, change_unit) = match metric {
            Metric::SyncRate => (Some((tm - bm) * 100.0), "percentage_points"),
            _ if bm == 0.0 => (None, "percent"),
            _ => (Some((tm - bm) / bm * 100.0), "percent"),
        };
        let (test, statistic, p_value) = if paired_test {
            let t = wilcoxon_signed_rank(&base, &treat)?;
            ("signed_rank", t.t_plus, t.p_value)
        } else {
            let t = wilcoxon_rank_sum(&base, &treat)?;
            ("rank_sum", t.u, t.p_value)
        };
        metrics.push(MetricComparison {
            metric,
            baseline_mean: bm,
            treated_mean: tm,
            change,
            change_unit: change_unit.into(),
            test: test.into(),
            statistic,
            p_value,
            n_used: base.len(),
            excluded_pairs,
            baseline_ecdf: ecdf(&base)?,
            treated_ecdf: ecdf(&treat)?,
        });
    }
    Ok(ComparisonReport {
        pairs: pairs.len(),
        note: "message counts cover block propagation only; transaction-phase traffic is excluded".into(),
        metrics,
    })
}
