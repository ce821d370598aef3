//! Per-run metrics tables.
//!
//! Columns: `scenario`, `scenario_hash`, `method`, `seed`, `records`,
//! `mean_ape`, `median_ape`, `recall@1`, `recall@3`, `recall@5`, `dclr@0`,
//! `dclr@5`, `dclr@10`, `distance_to_converge`, `goal_distance`. Distances are
//! meters; empty cells mean "not applicable" (no goal, never converged, or
//! fewer landmarks than K).

use std::io::Write;

use toponav::embedding::Vocabulary;
use toponav::geometry::Point2;
use toponav::metrics::MetricsReport;
use toponav::world_model::Landmark;

use crate::error::{Error, Result};
use crate::run::LogFile;

pub const RECALL_KS: [usize; 3] = [1, 3, 5];
pub const DCLR_RADII: [f64; 3] = [0.0, 5.0, 10.0];

pub fn metrics_header() -> Vec<String> {
    let mut h: Vec<String> = ["scenario", "scenario_hash", "method", "seed", "records", "mean_ape", "median_ape"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(RECALL_KS.iter().map(|k| format!("recall@{k}")));
    h.extend(DCLR_RADII.iter().map(|r| format!("dclr@{r}")));
    h.push("distance_to_converge".into());
    h.push("goal_distance".into());
    h
}

pub fn report(log: &LogFile) -> Result<MetricsReport> {
    let vocab = Vocabulary::default();
    let landmarks = log
        .landmarks
        .iter()
        .map(|&(id, x, y)| Landmark::new(id, Point2::new(x, y), "landmark", &vocab))
        .collect::<toponav::Result<Vec<_>>>()?;
    Ok(MetricsReport::from_log(&log.log, &landmarks, &RECALL_KS, &DCLR_RADII, log.goal)?)
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_metrics_csv<W: Write>(logs: &[LogFile], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(metrics_header())?;
    for log in logs {
        let rep = report(log)?;
        let mut rec = vec![
            log.scenario.clone(),
            log.scenario_hash.clone(),
            log.method.name().to_string(),
            log.seed.to_string(),
            log.log.records.len().to_string(),
            fmt(rep.mean_ape),
            fmt(rep.median_ape),
        ];
        for k in RECALL_KS {
            rec.push(rep.recall.iter().find(|r| r.0 == k).map(|r| fmt(r.1)).unwrap_or_default());
        }
        for r in DCLR_RADII {
            rec.push(rep.dclr.iter().find(|d| d.0 == r).map(|d| fmt(d.1)).unwrap_or_default());
        }
        rec.push(rep.distance_to_converge.map(fmt).unwrap_or_default());
        rec.push(rep.goal_distance.map(fmt).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn save_log(log: &LogFile, path: &std::path::Path) -> Result<()> {
    let text = serde_json::to_string_pretty(log).map_err(|e| Error::config(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_log(path: &std::path::Path) -> Result<LogFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}
