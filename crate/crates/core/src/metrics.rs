//! HR error metrics and evaluation reports.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{Level, PredictionRow};

/// Error statistics of `pred - truth`, in bpm (`mer_percent` in %).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub me: f64,
    /// Sample standard deviation (`n - 1` denominator).
    pub sd: f64,
    pub mae: f64,
    pub rmse: f64,
    /// Mean of `|e_i| / truth_i`, times 100.
    pub mer_percent: f64,
    /// `None` when either side is constant.
    pub pearson_r: Option<f64>,
    pub pearson_r_undefined: bool,
}

impl MetricSummary {
    /// `pearson_r`, with NaN for the undefined case.
    pub fn r(&self) -> f64 {
        self.pearson_r.unwrap_or(f64::NAN)
    }
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len() as f64;
    v.sum::<f64>() / n
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let mx = mean(x.iter().copied());
    let my = mean(y.iter().copied());
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn metrics(pred: &[f64], truth: &[f64]) -> Result<MetricSummary> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} ground-truth values",
            pred.len(),
            truth.len()
        )));
    }
    let n = pred.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("metrics need at least 2 pairs, got {n}")));
    }
    if pred.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite HR value".into()));
    }
    if let Some(t) = truth.iter().find(|t| **t <= 0.0) {
        return Err(Error::InvalidInput(format!("ground-truth HR must be positive, got {t}")));
    }
    let e: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| p - t).collect();
    let me = mean(e.iter().copied());
    let var = e.iter().map(|x| (x - me) * (x - me)).sum::<f64>() / (n - 1) as f64;
    let r = pearson(pred, truth);
    Ok(MetricSummary {
        n,
        me,
        sd: var.sqrt(),
        mae: mean(e.iter().map(|x| x.abs())),
        rmse: mean(e.iter().map(|x| x * x)).sqrt(),
        mer_percent: 100.0 * mean(e.iter().zip(truth).map(|(x, t)| x.abs() / t)),
        pearson_r: r,
        pearson_r_undefined: r.is_none(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub video_id: String,
    /// Set in per-clip reports.
    pub clip_index: Option<usize>,
    pub hr_pred: f64,
    pub hr_true: f64,
}

/// Paired predictions plus their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrReport {
    pub rows: Vec<ReportRow>,
    pub summary: MetricSummary,
}

impl HrReport {
    pub fn new(rows: Vec<ReportRow>) -> Result<Self> {
        let pred: Vec<f64> = rows.iter().map(|r| r.hr_pred).collect();
        let truth: Vec<f64> = rows.iter().map(|r| r.hr_true).collect();
        let summary = metrics(&pred, &truth)?;
        Ok(Self { rows, summary })
    }

    /// `video_id,clip_index,hr_pred,hr_true,error`; `clip_index` is empty
    /// for per-video rows.
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("video_id,clip_index,hr_pred,hr_true,error\n");
        for r in &self.rows {
            let clip = r.clip_index.map(|c| c.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.video_id,
                clip,
                r.hr_pred,
                r.hr_true,
                r.hr_pred - r.hr_true
            );
        }
        s
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Matches predictions of one `level` to ground truth. A prediction pairs
/// with the truth row of the same video and clip, or with the video's
/// video-level truth when there is none. Row order follows `pred`.
pub fn pair_rows(
    pred: &[PredictionRow],
    truth: &[PredictionRow],
    level: Level,
) -> Result<Vec<ReportRow>> {
    let mut index = HashMap::new();
    for t in truth {
        if index.insert((t.video_id.as_str(), t.clip_index), t.hr_bpm).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate ground truth for {} {:?}",
                t.video_id, t.clip_index
            )));
        }
    }
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for p in pred.iter().filter(|p| p.level == level) {
        if !seen.insert((p.video_id.as_str(), p.clip_index)) {
            return Err(Error::InvalidInput(format!(
                "duplicate prediction for {} {:?}",
                p.video_id, p.clip_index
            )));
        }
        let t = index
            .get(&(p.video_id.as_str(), p.clip_index))
            .or_else(|| index.get(&(p.video_id.as_str(), None)))
            .ok_or_else(|| Error::InvalidInput(format!("no ground truth for video {}", p.video_id)))?;
        rows.push(ReportRow {
            video_id: p.video_id.clone(),
            clip_index: p.clip_index,
            hr_pred: p.hr_bpm,
            hr_true: *t,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!("no {}-level predictions", level.name())));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let m = metrics(&[72.0, 80.0], &[70.0, 84.0]).unwrap();
        assert!((m.me + 1.0).abs() < 1e-12);
        assert!((m.mae - 3.0).abs() < 1e-12);
        assert!((m.rmse - 10f64.sqrt()).abs() < 1e-12);
        assert!((m.mer_percent - 100.0 * (2.0 / 70.0 + 4.0 / 84.0) / 2.0).abs() < 1e-12);
        assert!((m.sd - 18f64.sqrt()).abs() < 1e-12);
        assert!((m.r() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_offset_predictions() {
        let t = [60.0, 75.0, 90.0];
        let m = metrics(&t, &t).unwrap();
        assert_eq!((m.me, m.sd, m.mae, m.rmse, m.mer_percent), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!((m.r() - 1.0).abs() < 1e-12);
        let p: Vec<f64> = t.iter().map(|x| x + 5.0).collect();
        let m = metrics(&p, &t).unwrap();
        assert!((m.me - 5.0).abs() < 1e-12 && (m.mae - 5.0).abs() < 1e-12);
        assert!((m.rmse - 5.0).abs() < 1e-12 && m.sd < 1e-12);
        assert!((m.r() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_side_flags_r() {
        let m = metrics(&[70.0, 70.0], &[60.0, 80.0]).unwrap();
        assert!(m.pearson_r_undefined && m.r().is_nan());
        let json = HrReport::new(vec![
            ReportRow { video_id: "a".into(), clip_index: None, hr_pred: 70.0, hr_true: 60.0 },
            ReportRow { video_id: "b".into(), clip_index: None, hr_pred: 70.0, hr_true: 80.0 },
        ])
        .unwrap()
        .summary_json();
        assert!(json.contains("\"pearson_r\": null"));
        assert!(json.contains("\"pearson_r_undefined\": true"));
    }

    #[test]
    fn invalid_inputs() {
        assert!(metrics(&[1.0], &[1.0]).is_err());
        assert!(metrics(&[1.0, 2.0], &[1.0]).is_err());
        assert!(metrics(&[1.0, 2.0], &[0.0, 2.0]).is_err());
        assert!(metrics(&[f64::NAN, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rows_csv_layout() {
        let r = HrReport::new(vec![
            ReportRow { video_id: "v".into(), clip_index: Some(0), hr_pred: 72.0, hr_true: 70.0 },
            ReportRow { video_id: "v".into(), clip_index: Some(1), hr_pred: 80.0, hr_true: 84.0 },
        ])
        .unwrap();
        assert_eq!(
            r.rows_csv(),
            "video_id,clip_index,hr_pred,hr_true,error\nv,0,72,70,2\nv,1,80,84,-4\n"
        );
    }

    #[test]
    fn pairing_by_level() {
        let pred = vec![
            PredictionRow::clip("a", 0, 0, 71.0),
            PredictionRow::clip("a", 1, 150, 73.0),
            PredictionRow::video("a", 72.0),
            PredictionRow::video("b", 80.0),
        ];
        let truth = vec![PredictionRow::video("b", 84.0), PredictionRow::video("a", 70.0)];
        let v = pair_rows(&pred, &truth, Level::Video).unwrap();
        assert_eq!(v.iter().map(|r| (r.hr_pred, r.hr_true)).collect::<Vec<_>>(), [(72.0, 70.0), (80.0, 84.0)]);
        let c = pair_rows(&pred, &truth, Level::Clip).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].clip_index, Some(1));
        assert_eq!(c[1].hr_true, 70.0);
        assert!(pair_rows(&pred, &truth[..1], Level::Video).is_err());
        assert!(pair_rows(&pred[2..], &truth, Level::Clip).is_err());
    }

    fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(30.0..200.0f64, n),
                proptest::collection::vec(40.0..180.0f64, n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn rms_mean_inequality_and_variance_identity((p, t) in pairs()) {
            let m = metrics(&p, &t).unwrap();
            prop_assert!(m.rmse >= m.mae - 1e-12 && m.mae >= 0.0);
            let n = m.n as f64;
            let rhs = m.me * m.me + (n - 1.0) / n * m.sd * m.sd;
            prop_assert!((m.rmse * m.rmse - rhs).abs() <= 1e-9 * rhs.max(1e-300));
        }

        #[test]
        fn r_affine_invariant((p, t) in pairs(), a in 0.1..10.0f64, b in -50.0..50.0f64) {
            let m = metrics(&p, &t).unwrap();
            let q: Vec<f64> = p.iter().map(|x| a * x + b).collect();
            let r2 = pearson(&q, &t);
            match (m.pearson_r, r2) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
                (x, y) => prop_assert_eq!(x.is_none(), y.is_none()),
            }
        }
    }
}
