//! Line-delimited JSON records written by `track` and read back by the bench
//! harness. One object per line, fixed field order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracker::{FrameResult, StageTimings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub frame_index: usize,
    pub status: String,
    pub dx: f64,
    pub dy: f64,
    pub dtheta_deg: f64,
    pub du: f64,
    pub dv: f64,
    pub cum_u: f64,
    pub cum_v: f64,
    pub inliers: usize,
    pub matches: usize,
    pub pose_dx: f64,
    pub pose_dy: f64,
    pub pose_dtheta_deg: f64,
    pub discontinuity: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v2: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_refs: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    /// Wall-clock timings break byte-identical output, so they are opt-in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

impl TrackRecord {
    pub fn from_result(r: &FrameResult, with_timings: bool) -> Self {
        let pair = |p: crate::geometry::Point2<f64>| [p.x, p.y];
        Self {
            frame_index: r.frame_index,
            status: r.status.name().to_string(),
            dx: r.transform.dx,
            dy: r.transform.dy,
            dtheta_deg: r.transform.dtheta,
            du: r.thread_delta.du,
            dv: r.thread_delta.dv,
            cum_u: r.cumulative_threads.du,
            cum_v: r.cumulative_threads.dv,
            inliers: r.inlier_count,
            matches: r.matches,
            pose_dx: r.cumulative_pose.dx,
            pose_dy: r.cumulative_pose.dy,
            pose_dtheta_deg: r.cumulative_pose.dtheta,
            discontinuity: r.discontinuity,
            anchor: r.lattice.map(|b| pair(b.anchor)),
            v1: r.lattice.map(|b| pair(b.v1)),
            v2: r.lattice.map(|b| pair(b.v2)),
            theta_refs: r.lattice.map(|b| b.theta_refs),
            failed_stage: r.failed_stage.map(|s| s.name().to_string()),
            timings: with_timings.then_some(r.timings),
        }
    }
}

pub fn write_record<W: Write>(out: &mut W, record: &TrackRecord) -> Result<()> {
    let line = serde_json::to_string(record).map_err(|e| Error::invalid(format!("record: {e}")))?;
    writeln!(out, "{line}").map_err(|e| Error::invalid(format!("record: {e}")))
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<TrackRecord>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::invalid(format!("record line {}: {e}", n + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::invalid(format!("record line {}: {e}", n + 1)))?);
    }
    Ok(out)
}
