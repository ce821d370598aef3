//! Parameter sweeps over map noise and landmark corruption.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `scenario_hash` | digest of scenario, map and vocabulary sources |
//! | `sweep` | `noise`, `fn` or `fp` |
//! | `value` | swept value |
//! | `method` | localization method |
//! | `seed` | run seed |
//! | `mean_ape`, `median_ape`, `final_ape` | position error over the log (m) |
//! | `mean_spread`, `final_spread` | particle spread (m) |
//! | `distance_to_converge` | empty when the run never converged |
//! | `error` | empty unless the run failed |

use std::io::Write;

use rayon::prelude::*;
use toponav::metrics::{distance_to_converge, mean, median, DEFAULT_CONFIRM_WINDOW, DEFAULT_POS_TOL, DEFAULT_SPREAD_TOL};

use crate::error::{Error, Result};
use crate::run::{run_open_loop, LogFile};
use crate::scenario::{Method, Scenario};

pub const ABLATION_HEADER: [&str; 12] = [
    "scenario_hash",
    "sweep",
    "value",
    "method",
    "seed",
    "mean_ape",
    "median_ape",
    "final_ape",
    "mean_spread",
    "final_spread",
    "distance_to_converge",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Noise,
    FalseNegative,
    FalsePositive,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Noise => "noise",
            SweepKind::FalseNegative => "fn",
            SweepKind::FalsePositive => "fp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub kind: SweepKind,
    pub values: Vec<f64>,
}

impl std::str::FromStr for Sweep {
    type Err = Error;

    /// `noise=0,0.1,0.2`, `fn=0..0.8` (step 0.1) or `fp=0..0.8:0.2`.
    fn from_str(s: &str) -> Result<Self> {
        let (key, rest) = s
            .split_once('=')
            .ok_or_else(|| Error::config(format!("sweep must look like kind=values, got {s:?}")))?;
        let kind = match key.trim() {
            "noise" => SweepKind::Noise,
            "fn" => SweepKind::FalseNegative,
            "fp" => SweepKind::FalsePositive,
            other => return Err(Error::config(format!("unknown sweep kind {other:?}"))),
        };
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("bad sweep value {t:?}")))
        };
        let rest = rest.trim();
        let values = if rest.is_empty() {
            Vec::new()
        } else if let Some((lo, hi)) = rest.split_once("..") {
            let (hi, step) = match hi.split_once(':') {
                Some((h, st)) => (num(h)?, num(st)?),
                None => (num(hi)?, 0.1),
            };
            let lo = num(lo)?;
            if !(step > 0.0) || hi < lo {
                return Err(Error::config(format!("bad sweep range {rest:?}")));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            // round to kill accumulation noise so values print cleanly
            (0..=n).map(|i| ((lo + step * i as f64) * 1e9).round() / 1e9).collect()
        } else {
            rest.split(',').map(num).collect::<Result<Vec<_>>>()?
        };
        Ok(Sweep { kind, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub scenario_hash: String,
    pub sweep: SweepKind,
    pub value: f64,
    pub method: Method,
    pub seed: u64,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub mean_ape: f64,
    pub median_ape: f64,
    pub final_ape: f64,
    pub mean_spread: f64,
    pub final_spread: f64,
    pub distance_to_converge: Option<f64>,
}

impl RunSummary {
    pub fn of(log: &LogFile) -> Self {
        let apes = log.log.apes();
        let spreads: Vec<f64> = log.log.records.iter().map(|r| r.estimate.spread).collect();
        Self {
            mean_ape: mean(&apes),
            median_ape: median(&apes),
            final_ape: apes.last().copied().unwrap_or(f64::NAN),
            mean_spread: mean(&spreads),
            final_spread: spreads.last().copied().unwrap_or(f64::NAN),
            distance_to_converge: distance_to_converge(
                &log.log,
                DEFAULT_POS_TOL,
                DEFAULT_SPREAD_TOL,
                DEFAULT_CONFIRM_WINDOW,
            ),
        }
    }
}

pub fn apply_sweep(base: &Scenario, kind: SweepKind, value: f64) -> Scenario {
    let mut s = base.clone();
    match kind {
        SweepKind::Noise => s.file.map_noise = value,
        SweepKind::FalseNegative => s.file.fn_frac = value,
        SweepKind::FalsePositive => s.file.fp_frac = value,
    }
    s
}

/// Runs every (value, method, seed) cell. Row order is fixed by the sweep,
/// independent of `parallel`.
pub fn run_ablation(
    base: &Scenario,
    sweep: &Sweep,
    methods: &[Method],
    seeds: &[u64],
    parallel: bool,
) -> Vec<AblationRow> {
    let cells: Vec<(f64, Method, u64)> = sweep
        .values
        .iter()
        .flat_map(|&v| methods.iter().flat_map(move |&m| seeds.iter().map(move |&s| (v, m, s))))
        .collect();
    let run_cell = |&(value, method, seed): &(f64, Method, u64)| {
        let scenario = apply_sweep(base, sweep.kind, value);
        let outcome = run_open_loop(&scenario, method, seed);
        let (summary, error) = match outcome {
            Ok(log) => (Some(RunSummary::of(&log)), None),
            Err(e) => (None, Some(e.to_string())),
        };
        AblationRow {
            scenario_hash: base.hash.clone(),
            sweep: sweep.kind,
            value,
            method,
            seed,
            summary,
            error,
        }
    };
    if parallel {
        cells.par_iter().map(run_cell).collect()
    } else {
        cells.iter().map(run_cell).collect()
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ABLATION_HEADER)?;
    for r in rows {
        let mut rec = vec![
            r.scenario_hash.clone(),
            r.sweep.name().to_string(),
            fmt(r.value),
            r.method.name().to_string(),
            r.seed.to_string(),
        ];
        match &r.summary {
            Some(s) => rec.extend([
                fmt(s.mean_ape),
                fmt(s.median_ape),
                fmt(s.final_ape),
                fmt(s.mean_spread),
                fmt(s.final_spread),
                s.distance_to_converge.map(fmt).unwrap_or_default(),
            ]),
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
