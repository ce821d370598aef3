//! Localization and navigation metrics over run logs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Pose2};
use crate::localization::PoseEstimate;
use crate::scalar::Scalar;
use crate::world_model::{Landmark, LandmarkId};

pub const DEFAULT_POS_TOL: f64 = 5.0;
pub const DEFAULT_SPREAD_TOL: f64 = 10.0;
pub const DEFAULT_CONFIRM_WINDOW: usize = 10;

/// Absolute position error.
pub fn ape<T: Scalar>(est: Point2<T>, gt: Point2<T>) -> T {
    est.distance(gt)
}

pub fn goal_distance<T: Scalar>(final_gt: &Pose2<T>, goal: Point2<T>) -> T {
    final_gt.position().distance(goal)
}

fn k_nearest<T: Scalar>(p: Point2<T>, landmarks: &[Landmark<T>], k: usize) -> BTreeSet<LandmarkId> {
    let mut order: Vec<(T, LandmarkId)> = landmarks
        .iter()
        .map(|l| (l.position.distance_squared(p), l.id))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    order.into_iter().take(k).map(|(_, id)| id).collect()
}

/// Jaccard similarity of the `k` nearest landmark ids around each point.
pub fn recall_at_k<T: Scalar>(est: Point2<T>, gt: Point2<T>, landmarks: &[Landmark<T>], k: usize) -> Result<T> {
    if landmarks.is_empty() {
        return Err(Error::NoLandmarks);
    }
    if k == 0 || k > landmarks.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be in 1..={}",
            landmarks.len()
        )));
    }
    let a = k_nearest(est, landmarks, k);
    let b = k_nearest(gt, landmarks, k);
    let inter = a.intersection(&b).count();
    let union = a.union(&b).count();
    Ok(T::c(inter as f64) / T::c(union as f64))
}

/// Distance from `est` to the disc of radius `r` around the nearest landmark.
pub fn dclr<T: Scalar>(est: Point2<T>, landmarks: &[Landmark<T>], r: T) -> Result<T> {
    if !(r >= T::zero()) {
        return Err(Error::InvalidArgument("radius must be >= 0".into()));
    }
    let nearest = landmarks
        .iter()
        .map(|l| l.position.distance(est))
        .fold(None, |acc: Option<T>, d| Some(acc.map_or(d, |a| a.min(d))))
        .ok_or(Error::NoLandmarks)?;
    Ok((nearest - r).max(T::zero()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<T = f64> {
    pub time: T,
    pub gt: Pose2<T>,
    pub estimate: PoseEstimate<T>,
    /// Odometry-integrated distance traveled.
    pub distance: T,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunLog<T = f64> {
    pub metadata: BTreeMap<String, String>,
    pub records: Vec<StepRecord<T>>,
}

impl<T: Scalar> RunLog<T> {
    /// Appends a record; time must increase and distance must not decrease.
    pub fn push(&mut self, record: StepRecord<T>) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(record.time > last.time) || record.distance < last.distance {
                return Err(Error::InvalidArgument(format!(
                    "log record at t={} does not follow t={}",
                    record.time, last.time
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn apes(&self) -> Vec<T> {
        self.records
            .iter()
            .map(|r| ape(r.estimate.position, r.gt.position()))
            .collect()
    }
}

/// Distance traveled when the estimate first settles within `pos_tol` of
/// ground truth with spread at most `spread_tol`, staying there for
/// `window` consecutive records (fewer if the log ends first).
pub fn distance_to_converge<T: Scalar>(log: &RunLog<T>, pos_tol: T, spread_tol: T, window: usize) -> Option<T> {
    let ok: Vec<bool> = log
        .records
        .iter()
        .map(|r| ape(r.estimate.position, r.gt.position()) <= pos_tol && r.estimate.spread <= spread_tol)
        .collect();
    let window = window.max(1);
    (0..ok.len())
        .find(|&i| ok[i..(i + window).min(ok.len())].iter().all(|&b| b))
        .map(|i| log.records[i].distance)
}

pub fn mean<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::nan();
    }
    values.iter().fold(T::zero(), |a, &v| a + v) / T::c(values.len() as f64)
}

pub fn median<T: Scalar>(values: &[T]) -> T {
    let mut v = values.to_vec();
    if v.is_empty() {
        return T::nan();
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * T::c(0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mean_ape: f64,
    pub median_ape: f64,
    /// Mean recall over the log, per K.
    pub recall: Vec<(usize, f64)>,
    /// Mean DCLR over the log, per radius.
    pub dclr: Vec<(f64, f64)>,
    pub distance_to_converge: Option<f64>,
    pub goal_distance: Option<f64>,
}

impl MetricsReport {
    /// Summarizes a log. K values larger than the landmark count are skipped.
    pub fn from_log(
        log: &RunLog<f64>,
        landmarks: &[Landmark<f64>],
        ks: &[usize],
        radii: &[f64],
        goal: Option<Point2<f64>>,
    ) -> Result<Self> {
        let apes = log.apes();
        let mut recall = Vec::new();
        for &k in ks {
            if k == 0 || k > landmarks.len() {
                continue;
            }
            let vals = log
                .records
                .iter()
                .map(|r| recall_at_k(r.estimate.position, r.gt.position(), landmarks, k))
                .collect::<Result<Vec<_>>>()?;
            recall.push((k, mean(&vals)));
        }
        let mut dclrs = Vec::new();
        if !landmarks.is_empty() {
            for &r in radii {
                let vals = log
                    .records
                    .iter()
                    .map(|rec| dclr(rec.estimate.position, landmarks, r))
                    .collect::<Result<Vec<_>>>()?;
                dclrs.push((r, mean(&vals)));
            }
        }
        Ok(Self {
            mean_ape: mean(&apes),
            median_ape: median(&apes),
            recall,
            dclr: dclrs,
            distance_to_converge: distance_to_converge(log, DEFAULT_POS_TOL, DEFAULT_SPREAD_TOL, DEFAULT_CONFIRM_WINDOW),
            goal_distance: match (goal, log.records.last()) {
                (Some(g), Some(last)) => Some(goal_distance(&last.gt, g)),
                _ => None,
            },
        })
    }
}
