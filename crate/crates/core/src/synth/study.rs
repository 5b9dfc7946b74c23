//! Compression study: HR error of a classical method on a synthetic suite,
//! undegraded ("Source") and after each degradation.

use std::fmt::Write as _;

use serde::Serialize;

use crate::classic::{extract_rgb_trace, ClassicMethod};
use crate::error::{Error, Result};
use crate::signal::BandConfig;
use crate::stmap::StmapOptions;

use super::{degrade_with_landmarks, gen_video_with, DegradeOp, SynthConfig};

pub const SOURCE_LABEL: &str = "Source";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub label: String,
    pub rmse_bpm: f64,
    /// `rmse_bpm` minus the Source RMSE.
    pub delta_bpm: f64,
    /// Per-video estimates, in suite order.
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyTable {
    pub method: String,
    pub truth: Vec<f64>,
    /// Source row first, then one row per operator in the given order.
    pub rows: Vec<StudyRow>,
}

impl StudyTable {
    pub fn source(&self) -> &StudyRow {
        &self.rows[0]
    }

    pub fn row(&self, label: &str) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,op,rmse_bpm,delta_vs_source_bpm\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.6},{:.6}", self.method, r.label, r.rmse_bpm, r.delta_bpm);
        }
        s
    }
}

fn rmse(est: &[f64], truth: &[f64]) -> f64 {
    let ss: f64 = est.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum();
    (ss / est.len() as f64).sqrt()
}

/// Renders every suite video once, estimates HR over the whole trace on the
/// original and on each degraded copy, and tabulates RMSE against the
/// generator's HR.
pub fn compression_study(
    suite: &[SynthConfig],
    ops: &[DegradeOp],
    method: ClassicMethod,
    band: &BandConfig,
    opts: &StmapOptions,
) -> Result<StudyTable> {
    if suite.is_empty() {
        return Err(Error::Config("compression study needs a nonempty suite".into()));
    }
    for op in ops {
        op.validate()?;
    }
    // one video in memory at a time per worker
    let per_video = opts.exec.try_map(suite.len(), |i| -> Result<Vec<f64>> {
        let (seq, track, _) = gen_video_with(&suite[i], crate::par::Exec::Sequential)?;
        let inner = StmapOptions {
            exec: crate::par::Exec::Sequential,
            ..opts.clone()
        };
        let estimate = |seq: &_, track: &_| -> Result<f64> {
            let trace = extract_rgb_trace(seq, track, &inner)?;
            Ok(method.estimate(&trace, band)?.bpm)
        };
        let mut out = vec![estimate(&seq, &track)?];
        for op in ops {
            let (s, t) = degrade_with_landmarks(&seq, &track, op)?;
            out.push(estimate(&s, &t)?);
        }
        Ok(out)
    })?;
    let truth: Vec<f64> = suite.iter().map(|c| c.hr_bpm).collect();
    let labels = std::iter::once(SOURCE_LABEL.to_string()).chain(ops.iter().map(|o| o.label()));
    let mut rows: Vec<StudyRow> = labels
        .enumerate()
        .map(|(k, label)| {
            let estimates: Vec<f64> = per_video.iter().map(|v| v[k]).collect();
            StudyRow {
                label,
                rmse_bpm: rmse(&estimates, &truth),
                delta_bpm: 0.0,
                estimates,
            }
        })
        .collect();
    let source = rows[0].rmse_bpm;
    for r in &mut rows {
        r.delta_bpm = r.rmse_bpm - source;
    }
    Ok(StudyTable {
        method: method.name().to_string(),
        truth,
        rows,
    })
}
