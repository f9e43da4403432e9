//! Synthetic near-regular weave textures with exact ground truth.
//!
//! Each pixel is inverse-mapped through the pose into texture space and the
//! nearby Gaussian bumps are summed analytically, so any real-valued pose
//! renders without resampling error.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, RigidTransform};
use crate::imagecore::{save_pgm, GrayImage};
use crate::lattice::{thread_decompose, LatticeBasis, ThreadDelta};

/// Lattice step of the translation sweep, in pixels.
pub const DEFAULT_PITCH: f64 = 7.53;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlobProfile {
    /// Bump amplitude above the background, in 8-bit units.
    pub peak: f64,
    pub sigma_major: f64,
    pub sigma_minor: f64,
    pub orientation_deg: f64,
}

impl Default for BlobProfile {
    fn default() -> Self {
        Self {
            peak: 170.0,
            sigma_major: 1.7,
            sigma_minor: 1.2,
            orientation_deg: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeaveSpec {
    pub width: usize,
    pub height: usize,
    pub v1: [f64; 2],
    pub v2: [f64; 2],
    /// Texture-space position of lattice node (0, 0); the frame center when absent.
    pub origin: Option<[f64; 2]>,
    pub blob: BlobProfile,
    pub background: f64,
    /// Additive Gaussian noise in real units (1.0 = full 8-bit range).
    pub noise_sigma: f64,
    /// Per-blob placement perturbation, pixels.
    pub jitter_sigma: f64,
    /// Per-blob relative amplitude perturbation.
    pub contrast_jitter: f64,
    pub seed: u64,
}

impl Default for WeaveSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            v1: [DEFAULT_PITCH, 0.0],
            v2: [0.0, DEFAULT_PITCH],
            origin: None,
            blob: BlobProfile::default(),
            background: 40.0,
            noise_sigma: 0.0,
            jitter_sigma: 0.0,
            contrast_jitter: 0.3,
            seed: 1,
        }
    }
}

impl WeaveSpec {
    pub fn basis_vectors(&self) -> (Point2<f64>, Point2<f64>) {
        (Point2::new(self.v1[0], self.v1[1]), Point2::new(self.v2[0], self.v2[1]))
    }

    pub fn origin_point(&self) -> Point2<f64> {
        match self.origin {
            Some([x, y]) => Point2::new(x, y),
            None => self.center(),
        }
    }

    /// Geometric center of the pixel grid.
    pub fn center(&self) -> Point2<f64> {
        Point2::new((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(Error::InvalidDimensions { width: self.width, height: self.height });
        }
        let (v1, v2) = self.basis_vectors();
        if v1.cross(v2).abs() <= 1e-6 {
            return Err(Error::invalid("weave basis vectors are dependent"));
        }
        let b = &self.blob;
        if !(b.sigma_major > 0.0 && b.sigma_minor > 0.0 && b.sigma_minor <= b.sigma_major) {
            return Err(Error::invalid("blob sigmas must satisfy 0 < minor <= major"));
        }
        let pitch = v1.norm().min(v2.norm());
        if b.sigma_major >= pitch / 3.0 {
            return Err(Error::invalid(format!(
                "blob sigma {} too wide for pitch {pitch:.3}",
                b.sigma_major
            )));
        }
        let finite = [b.peak, b.orientation_deg, self.background, self.noise_sigma, self.jitter_sigma, self.contrast_jitter];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("weave parameters must be finite"));
        }
        if self.noise_sigma < 0.0 || self.jitter_sigma < 0.0 || self.contrast_jitter < 0.0 {
            return Err(Error::invalid("noise and jitter must be non-negative"));
        }
        Ok(())
    }

    /// The lattice as it appears in a frame rendered at `pose`.
    pub fn basis_at(&self, pose: &RigidTransform<f64>) -> LatticeBasis<f64> {
        let (v1, v2) = self.basis_vectors();
        LatticeBasis {
            anchor: pose.apply(self.origin_point()),
            v1: pose.rotate(v1),
            v2: pose.rotate(v2),
            theta_refs: [
                crate::scalar::wrap_axis_deg(pose.rotate(v1).angle_deg()),
                crate::scalar::wrap_axis_deg(pose.rotate(v2).angle_deg()),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    offset: Point2<f64>,
    gain: f64,
}

/// Per-cell parameters, hashed from the seed and the cell index so that any
/// sub-rectangle of the texture can be generated independently.
fn cell(spec: &WeaveSpec, i: i64, j: i64) -> Cell {
    if spec.jitter_sigma == 0.0 && spec.contrast_jitter == 0.0 {
        return Cell { offset: Point2::zero(), gain: 1.0 };
    }
    let key = spec.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let zx: f64 = rng.sample(StandardNormal);
    let zy: f64 = rng.sample(StandardNormal);
    let zg: f64 = rng.sample(StandardNormal);
    Cell {
        offset: Point2::new(zx, zy).scale(spec.jitter_sigma),
        gain: (1.0 + spec.contrast_jitter * zg).max(0.0),
    }
}

struct CellTable {
    i0: i64,
    j0: i64,
    cols: usize,
    cells: Vec<Cell>,
}

impl CellTable {
    fn get(&self, i: i64, j: i64) -> Cell {
        self.cells[(j - self.j0) as usize * self.cols + (i - self.i0) as usize]
    }
}

const REACH: i64 = 2;

/// Renders the texture as seen through `pose` (texture point `q` appears at
/// `pose.apply(q)`), with noise seeded by the spec seed alone.
pub fn render(spec: &WeaveSpec, pose: &RigidTransform<f64>) -> Result<GrayImage> {
    render_frame(spec, pose, 0)
}

/// Like [`render`], with the noise stream also keyed by `frame_index`.
pub fn render_frame(spec: &WeaveSpec, pose: &RigidTransform<f64>, frame_index: u64) -> Result<GrayImage> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let (v1, v2) = spec.basis_vectors();
    let origin = spec.origin_point();
    let det = v1.cross(v2);
    let inverse = pose.inverse();
    let to_lattice = |q: Point2<f64>| {
        let d = q.sub(origin);
        ((d.x * v2.y - v2.x * d.y) / det, (v1.x * d.y - d.x * v1.y) / det)
    };

    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (x, y) in [(0.0, 0.0), (w as f64 - 1.0, 0.0), (0.0, h as f64 - 1.0), (w as f64 - 1.0, h as f64 - 1.0)] {
        let (a, b) = to_lattice(inverse.apply(Point2::new(x, y)));
        lo = (lo.0.min(a), lo.1.min(b));
        hi = (hi.0.max(a), hi.1.max(b));
    }
    let (i0, j0) = (lo.0.round() as i64 - REACH, lo.1.round() as i64 - REACH);
    let (i1, j1) = (hi.0.round() as i64 + REACH, hi.1.round() as i64 + REACH);
    let cols = (i1 - i0 + 1) as usize;
    let mut cells = Vec::with_capacity(cols * (j1 - j0 + 1) as usize);
    for j in j0..=j1 {
        for i in i0..=i1 {
            cells.push(cell(spec, i, j));
        }
    }
    let table = CellTable { i0, j0, cols, cells };

    let b = &spec.blob;
    let (s, c) = b.orientation_deg.to_radians().sin_cos();
    let (ia, ib) = (1.0 / (b.sigma_major * b.sigma_major), 1.0 / (b.sigma_minor * b.sigma_minor));
    let bump = |d: Point2<f64>| {
        let u = d.x * c + d.y * s;
        let v = -d.x * s + d.y * c;
        (-0.5 * (u * u * ia + v * v * ib)).exp()
    };

    let mut noise = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ frame_index.wrapping_add(1));
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let q = inverse.apply(Point2::new(x as f64, y as f64));
            let (a, bb) = to_lattice(q);
            let (ci, cj) = (a.round() as i64, bb.round() as i64);
            let mut sum = 0.0;
            for j in cj - REACH..=cj + REACH {
                for i in ci - REACH..=ci + REACH {
                    let cell = table.get(i, j);
                    let node = origin.add(v1.scale(i as f64)).add(v2.scale(j as f64)).add(cell.offset);
                    sum += cell.gain * bump(q.sub(node));
                }
            }
            let mut v = (spec.background + b.peak * sum) / 255.0;
            if spec.noise_sigma > 0.0 {
                let z: f64 = noise.sample(StandardNormal);
                v += spec.noise_sigma * z;
            }
            values.push(v);
        }
    }
    GrayImage::from_real(w, h, &values)
}

/// Ground truth for one generated frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub frame_index: usize,
    /// Motion from the previous frame (identity for the first frame).
    pub dx: f64,
    pub dy: f64,
    pub dtheta_deg: f64,
    /// Pose relative to the first frame.
    pub pose_dx: f64,
    pub pose_dy: f64,
    pub pose_dtheta_deg: f64,
    /// Lattice basis as it appears in this frame.
    pub v1: [f64; 2],
    pub v2: [f64; 2],
    /// Per-frame displacement at the frame center decomposed in this
    /// frame's basis.
    pub du: f64,
    pub dv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TruthHeader {
    schema: String,
    version: u32,
    frames: usize,
    spec: WeaveSpec,
}

pub const TRUTH_SCHEMA: &str = "weavetrack-truth";
pub const TRUTH_VERSION: u32 = 1;
pub const TRUTH_FILE: &str = "truth.jsonl";

/// Truth records for a pose list, without rendering.
pub fn truth_records(spec: &WeaveSpec, poses: &[RigidTransform<f64>]) -> Result<Vec<TruthRecord>> {
    let first = poses.first().ok_or_else(|| Error::invalid("empty pose list"))?;
    let relative = first.inverse();
    let center = spec.center();
    let mut out = Vec::with_capacity(poses.len());
    for (k, pose) in poses.iter().enumerate() {
        let step = if k == 0 {
            RigidTransform::identity()
        } else {
            RigidTransform::compose(&poses[k - 1].inverse(), pose)
        };
        let cumulative = RigidTransform::compose(&relative, pose);
        let basis = spec.basis_at(pose);
        let delta: ThreadDelta<f64> = thread_decompose(step.displacement_at(center), &basis)?;
        out.push(TruthRecord {
            frame_index: k,
            dx: step.dx,
            dy: step.dy,
            dtheta_deg: step.dtheta,
            pose_dx: cumulative.dx,
            pose_dy: cumulative.dy,
            pose_dtheta_deg: cumulative.dtheta,
            v1: [basis.v1.x, basis.v1.y],
            v2: [basis.v2.x, basis.v2.y],
            du: delta.du,
            dv: delta.dv,
        });
    }
    Ok(out)
}

/// Frame file name for index `k`.
pub fn frame_name(k: usize) -> String {
    format!("frame_{k:04}.pgm")
}

/// Output of [`generate_sequence`].
#[derive(Debug, Clone)]
pub struct Sequence {
    pub frames: Vec<PathBuf>,
    pub truth_path: PathBuf,
    pub truth: Vec<TruthRecord>,
}

/// Renders one PGM per pose into `out_dir` plus a truth file.
pub fn generate_sequence(spec: &WeaveSpec, poses: &[RigidTransform<f64>], out_dir: &Path) -> Result<Sequence> {
    spec.validate()?;
    let truth = truth_records(spec, poses)?;
    fs::create_dir_all(out_dir).map_err(|source| Error::Io { path: out_dir.to_path_buf(), source })?;
    let mut frames = Vec::with_capacity(poses.len());
    for (k, pose) in poses.iter().enumerate() {
        let path = out_dir.join(frame_name(k));
        save_pgm(&render_frame(spec, pose, k as u64)?, &path)?;
        frames.push(path);
    }
    let truth_path = out_dir.join(TRUTH_FILE);
    write_truth(&truth_path, spec, &truth)?;
    Ok(Sequence { frames, truth_path, truth })
}

pub fn write_truth(path: &Path, spec: &WeaveSpec, records: &[TruthRecord]) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let header = TruthHeader {
        schema: TRUTH_SCHEMA.into(),
        version: TRUTH_VERSION,
        frames: records.len(),
        spec: spec.clone(),
    };
    writeln!(out, "{}", json_line(&header)).map_err(io)?;
    for r in records {
        writeln!(out, "{}", json_line(r)).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a truth file, returning the spec it was generated from and its records.
pub fn read_truth(path: &Path) -> Result<(WeaveSpec, Vec<TruthRecord>)> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut lines = reader.lines();
    let bad = |m: String| Error::invalid(format!("{}: {m}", path.display()));
    let header: TruthHeader = serde_json::from_str(&lines.next().ok_or_else(|| bad("empty truth file".into()))?.map_err(io)?)
        .map_err(|e| bad(e.to_string()))?;
    if header.schema != TRUTH_SCHEMA || header.version != TRUTH_VERSION {
        return Err(bad(format!("unsupported truth schema {} v{}", header.schema, header.version)));
    }
    let mut records = Vec::with_capacity(header.frames);
    for line in lines {
        let line = line.map_err(io)?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?);
        }
    }
    Ok((header.spec, records))
}

fn json_line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

/// `steps + 1` poses translating by `step` pixels along x per frame.
pub fn translation_schedule(steps: usize, step: f64) -> Vec<RigidTransform<f64>> {
    (0..=steps).map(|k| RigidTransform::translation(k as f64 * step, 0.0)).collect()
}

/// `steps + 1` poses rotating by `step_deg` per frame about `center`.
pub fn rotation_schedule(steps: usize, step_deg: f64, center: Point2<f64>) -> Vec<RigidTransform<f64>> {
    (0..=steps)
        .map(|k| RigidTransform::rotation_about(center, k as f64 * step_deg))
        .collect()
}

/// Built-in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// 21 poses in 7.53 px steps.
    Translation,
    /// 61 poses in 1/6 degree steps about the frame center.
    Rotation,
    /// Identity poses only.
    Static,
}

impl Schedule {
    pub fn poses(self, spec: &WeaveSpec, frames: Option<usize>) -> Vec<RigidTransform<f64>> {
        match self {
            Schedule::Translation => {
                let mut p = translation_schedule(20, DEFAULT_PITCH);
                p.truncate(frames.unwrap_or(p.len()));
                p
            }
            Schedule::Rotation => {
                let mut p = rotation_schedule(60, 1.0 / 6.0, spec.center());
                p.truncate(frames.unwrap_or(p.len()));
                p
            }
            Schedule::Static => vec![RigidTransform::identity(); frames.unwrap_or(1)],
        }
    }
}
