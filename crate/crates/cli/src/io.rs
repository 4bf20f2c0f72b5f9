use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use bcast_core::metrics::{Arm, ComparisonReport, Metric, PairedRun, SimReport};
use bcast_core::protocol::MessageRow;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// One row of the pairs CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub seed: u64,
    pub arm: String,
    pub sync_time_s: Option<f64>,
    pub sync_rate: f64,
    pub msgs_per_sync_block: Option<f64>,
    pub messages: u64,
    pub forged: u32,
    pub synchronized: u32,
}

impl PairRow {
    fn new(seed: u64, arm: Arm, r: &SimReport) -> Self {
        Self {
            seed,
            arm: arm.name().to_string(),
            sync_time_s: r.sync_time_s,
            sync_rate: r.sync_rate,
            msgs_per_sync_block: r.msgs_per_sync_block,
            messages: r.messages,
            forged: r.forged,
            synchronized: r.synchronized,
        }
    }
}

pub fn write_pairs_csv(path: &Path, pairs: &[PairedRun]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in pairs {
        w.serialize(PairRow::new(p.seed, Arm::Baseline, &p.baseline))?;
        w.serialize(PairRow::new(p.seed, Arm::Treated, &p.treated))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs_csv(path: &Path) -> Result<Vec<PairRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<PairRow>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

#[derive(Serialize)]
struct EcdfRow<'a> {
    metric: &'a str,
    arm: &'a str,
    value: f64,
    fraction: f64,
}

pub fn write_ecdf_csv(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for m in Metric::ALL {
        let c = report.metric(m);
        for (arm, curve) in [(Arm::Baseline, &c.baseline_ecdf), (Arm::Treated, &c.treated_ecdf)] {
            for &(value, fraction) in &curve.points {
                w.serialize(EcdfRow {
                    metric: m.name(),
                    arm: arm.name(),
                    value,
                    fraction,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_events_gz(path: &Path, rows: &[MessageRow]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let gz = GzEncoder::new(BufWriter::new(file), Compression::default());
    let mut w = csv::Writer::from_writer(gz);
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| anyhow::anyhow!("{e}"))?
        .finish()?
        .flush()?;
    Ok(())
}
