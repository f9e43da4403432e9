//! Self-contained benchmark suites on synthetic sweeps. Each suite renders
//! its own frames, tracks them and reports metrics against fixed gates.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::RigidTransform;
use crate::synth::{render_frame, truth_records, Schedule, TruthRecord, WeaveSpec};
use crate::tracker::{FrameResult, TrackStatus, Tracker};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Translation,
    Rotation,
    Thread,
    Speed,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Translation, Suite::Rotation, Suite::Thread, Suite::Speed];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Translation => "translation",
            Suite::Rotation => "rotation",
            Suite::Thread => "thread",
            Suite::Speed => "speed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }
}

/// One measured quantity; `gate` is an upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub gate: Option<f64>,
    pub unit: String,
}

impl Metric {
    fn new(name: &str, value: f64, gate: Option<f64>, unit: &str) -> Self {
        Self { name: name.into(), value, gate, unit: unit.into() }
    }

    pub fn pass(&self) -> bool {
        self.gate.is_none_or(|g| self.value <= g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameError {
    pub frame_index: usize,
    pub status: String,
    pub translation_px: f64,
    pub rotation_deg: f64,
    pub thread: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub suite: Suite,
    pub frames: usize,
    pub lost_frames: usize,
    pub metrics: Vec<Metric>,
    pub per_frame: Vec<FrameError>,
}

impl BenchReport {
    pub fn pass(&self) -> bool {
        self.metrics.iter().all(Metric::pass)
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn table(&self) -> String {
        let mut s = format!("suite {} ({} frames, {} lost)\n", self.suite.name(), self.frames, self.lost_frames);
        s += &format!("{:<24} {:>12} {:>10} {:<6} {}\n", "metric", "value", "gate", "unit", "result");
        for m in &self.metrics {
            let gate = m.gate.map(|g| format!("{g}")).unwrap_or_else(|| "-".into());
            let verdict = match m.gate {
                None => "info",
                Some(_) if m.pass() => "PASS",
                Some(_) => "FAIL",
            };
            s += &format!("{:<24} {:>12.4} {:>10} {:<6} {}\n", m.name, m.value, gate, m.unit, verdict);
        }
        s
    }
}

/// Synthetic spec for the accuracy suites: light noise, no placement jitter.
pub fn accuracy_spec(seed: u64) -> WeaveSpec {
    WeaveSpec { noise_sigma: 0.02, jitter_sigma: 0.0, seed, ..WeaveSpec::default() }
}

/// Sweep run through the tracker, with truth and per-frame timing.
pub struct SweepRun {
    pub truth: Vec<TruthRecord>,
    pub results: Vec<FrameResult>,
    pub elapsed_s: f64,
}

pub fn run_sweep(spec: &WeaveSpec, poses: &[RigidTransform<f64>], config: &Config) -> Result<SweepRun> {
    let truth = truth_records(spec, poses)?;
    let frames = poses
        .iter()
        .enumerate()
        .map(|(k, p)| render_frame(spec, p, k as u64))
        .collect::<Result<Vec<_>>>()?;
    let started = Instant::now();
    let mut it = frames.into_iter();
    let first = it.next().ok_or_else(|| Error::invalid("empty sweep"))?;
    let mut tracker = Tracker::init(first, config.clone())?;
    let results = it.map(|f| tracker.process(f)).collect();
    Ok(SweepRun { truth, results, elapsed_s: started.elapsed().as_secs_f64() })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 }
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn frame_errors(run: &SweepRun) -> Vec<FrameError> {
    run.results
        .iter()
        .map(|r| {
            let t = &run.truth[r.frame_index];
            FrameError {
                frame_index: r.frame_index,
                status: r.status.name().into(),
                translation_px: (r.transform.dx - t.dx).hypot(r.transform.dy - t.dy),
                rotation_deg: (r.transform.dtheta - t.dtheta_deg).abs(),
                thread: (r.thread_delta.du - t.du).hypot(r.thread_delta.dv - t.dv),
                ms: r.timings.total_ms,
            }
        })
        .collect()
}

fn report(suite: Suite, run: &SweepRun, metrics: Vec<Metric>) -> BenchReport {
    BenchReport {
        suite,
        frames: run.results.len() + 1,
        lost_frames: run.results.iter().filter(|r| r.status != TrackStatus::Tracking).count(),
        metrics,
        per_frame: frame_errors(run),
    }
}

pub fn run_suite(suite: Suite, config: &Config) -> Result<BenchReport> {
    let spec = accuracy_spec(config.seed);
    match suite {
        Suite::Translation => {
            let run = run_sweep(&spec, &Schedule::Translation.poses(&spec, None), config)?;
            let e = frame_errors(&run);
            let t: Vec<f64> = e.iter().map(|f| f.translation_px).collect();
            let last = run.results.last().expect("sweep has frames");
            let truth_last = run.truth.last().expect("sweep has frames");
            let drift = (last.cumulative_pose.dx - truth_last.pose_dx).hypot(last.cumulative_pose.dy - truth_last.pose_dy);
            let metrics = vec![
                Metric::new("mean_translation_error", mean(&t), Some(0.15), "px"),
                Metric::new("max_translation_error", max(&t), Some(0.7), "px"),
                Metric::new("cumulative_pose_error", drift, None, "px"),
                Metric::new("runtime", run.elapsed_s, Some(30.0), "s"),
            ];
            Ok(report(suite, &run, metrics))
        }
        Suite::Rotation => {
            let run = run_sweep(&spec, &Schedule::Rotation.poses(&spec, None), config)?;
            let e = frame_errors(&run);
            let r: Vec<f64> = e.iter().map(|f| f.rotation_deg).collect();
            let last = run.results.last().expect("sweep has frames");
            let drift = (last.cumulative_pose.dtheta - run.truth.last().expect("sweep has frames").pose_dtheta_deg).abs();
            let metrics = vec![
                Metric::new("mean_rotation_error", mean(&r), Some(0.05), "deg"),
                Metric::new("max_rotation_error", max(&r), Some(0.15), "deg"),
                Metric::new("cumulative_rotation_error", drift, None, "deg"),
                Metric::new("runtime", run.elapsed_s, Some(90.0), "s"),
            ];
            Ok(report(suite, &run, metrics))
        }
        Suite::Thread => {
            let run = run_sweep(&spec, &Schedule::Translation.poses(&spec, None), config)?;
            let e = frame_errors(&run);
            let d: Vec<f64> = e.iter().map(|f| f.thread).collect();
            let (mut tu, mut tv) = (0.0, 0.0);
            for t in &run.truth[1..] {
                tu += t.du;
                tv += t.dv;
            }
            let last = run.results.last().expect("sweep has frames");
            let drift = (last.cumulative_threads.du - tu).hypot(last.cumulative_threads.dv - tv);
            let metrics = vec![
                Metric::new("mean_thread_error", mean(&d), Some(0.05), "thread"),
                Metric::new("max_thread_error", max(&d), None, "thread"),
                Metric::new("cumulative_thread_error", drift, Some(0.5), "thread"),
            ];
            Ok(report(suite, &run, metrics))
        }
        Suite::Speed => {
            let run = run_sweep(&spec, &Schedule::Translation.poses(&spec, None), config)?;
            let ms: Vec<f64> = run.results.iter().map(|r| r.timings.total_ms).collect();
            let metrics = vec![
                Metric::new("max_frame_time", max(&ms), Some(333.0), "ms"),
                Metric::new("mean_frame_time", mean(&ms), None, "ms"),
            ];
            Ok(report(suite, &run, metrics))
        }
    }
}
