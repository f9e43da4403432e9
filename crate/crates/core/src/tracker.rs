//! Per-frame tracking: detect, describe, match, estimate, re-detect the
//! lattice at the anchor and accumulate thread counts.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::descriptor::{match_features, BinaryDescriptor, Describer, Keypoint, Match};
use crate::error::{Error, Result, Stage};
use crate::features::{classify_blobs, detect_mser, MserParams, MserRegion};
use crate::geometry::{estimate_rigid, Point2, RigidTransform};
use crate::imagecore::GrayImage;
use crate::lattice::{
    learn_template, learn_template_sized, thread_decompose, BlobTemplate, DominantOrientations, LatticeBasis,
    LatticeDetector, LatticeResult, ThreadDelta,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tracking,
    Lost,
    Reacquiring,
}

impl TrackStatus {
    pub fn name(self) -> &'static str {
        match self {
            TrackStatus::Tracking => "tracking",
            TrackStatus::Lost => "lost",
            TrackStatus::Reacquiring => "reacquiring",
        }
    }
}

/// A described MSER centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub point: Point2<f64>,
    pub region: usize,
    pub descriptor: BinaryDescriptor,
}

/// Everything extracted from one frame.
#[derive(Debug, Clone)]
pub struct FrameFeatures {
    pub image: GrayImage,
    pub regions: Vec<MserRegion>,
    pub features: Vec<Feature>,
    /// Indices into `regions` of individual (non-merged) blobs.
    pub individual: Vec<usize>,
}

impl FrameFeatures {
    pub fn extract(image: GrayImage, config: &Config) -> Result<Self> {
        let regions = detect_mser(&image, &config.mser).map_err(|e| Error::stage(Stage::Detect, e.to_string()))?;
        let describer = Describer::new(&image);
        let d = &config.descriptor;
        let mut features = Vec::with_capacity(regions.len());
        for (i, r) in regions.iter().enumerate() {
            let kp = Keypoint::from_region(r, d.scale_factor);
            if describer.fits(&kp) {
                let descriptor = describer.describe(&kp, d.oriented)?;
                features.push(Feature {
                    point: Point2::new(r.centroid.0, r.centroid.1),
                    region: i,
                    descriptor,
                });
            }
        }
        let individual = classify_blobs(&regions).individual;
        Ok(Self {
            image,
            regions,
            features,
            individual,
        })
    }

    pub fn descriptors(&self) -> Vec<BinaryDescriptor> {
        self.features.iter().map(|f| f.descriptor).collect()
    }

    pub fn points(&self) -> Vec<Point2<f64>> {
        self.features.iter().map(|f| f.point).collect()
    }

    fn individual_regions(&self) -> impl Iterator<Item = &MserRegion> {
        self.individual.iter().map(|&i| &self.regions[i])
    }
}

/// Wall time per stage, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub detect_ms: f64,
    pub match_ms: f64,
    pub estimate_ms: f64,
    pub lattice_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame_index: usize,
    pub status: TrackStatus,
    /// Counts skip the motion between this frame and the last tracked one.
    pub discontinuity: bool,
    pub failed_stage: Option<Stage>,
    pub failure: Option<String>,
    /// Motion from the previous frame; identity unless tracking succeeded.
    pub transform: RigidTransform<f64>,
    /// Pose relative to the first frame.
    pub cumulative_pose: RigidTransform<f64>,
    pub thread_delta: ThreadDelta<f64>,
    pub cumulative_threads: ThreadDelta<f64>,
    pub lattice: Option<LatticeBasis<f64>>,
    pub matches: usize,
    pub inlier_count: usize,
    /// Matches used by the estimator and their inlier flags, for diagnostics.
    pub correspondences: Vec<(Point2<f64>, Point2<f64>, bool)>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
struct OrientationCache {
    orientations: DominantOrientations,
    rotation_since: f64,
}

/// Tracker state; one instance per frame stream.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: Config,
    detector: LatticeDetector,
    reference: FrameFeatures,
    previous: FrameFeatures,
    cumulative_pose: RigidTransform<f64>,
    cumulative_threads: ThreadDelta<f64>,
    lattice: LatticeBasis<f64>,
    lattice_detail: LatticeResult,
    template: BlobTemplate,
    status: TrackStatus,
    orientation: OrientationCache,
    frames_since_refresh: usize,
    next_index: usize,
}

struct Acquired {
    features: FrameFeatures,
    template: BlobTemplate,
    orientations: DominantOrientations,
    lattice: LatticeResult,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn within_margin(p: Point2<f64>, img: &GrayImage, margin: f64) -> bool {
    p.x >= margin && p.y >= margin && p.x <= img.width() as f64 - 1.0 - margin && p.y <= img.height() as f64 - 1.0 - margin
}

fn frame_center(img: &GrayImage) -> Point2<f64> {
    Point2::new((img.width() as f64 - 1.0) / 2.0, (img.height() as f64 - 1.0) / 2.0)
}

/// Candidate anchors ordered by distance to the frame center.
fn anchors_by_center(points: impl Iterator<Item = Point2<f64>>, img: &GrayImage, margin: f64) -> Vec<Point2<f64>> {
    let c = frame_center(img);
    let mut v: Vec<Point2<f64>> = points.filter(|p| within_margin(*p, img, margin)).collect();
    v.sort_by(|a, b| a.distance(c).total_cmp(&b.distance(c)).then(a.x.total_cmp(&b.x)).then(a.y.total_cmp(&b.y)));
    v
}

const ANCHOR_ATTEMPTS: usize = 5;

/// Lattice at the first candidate anchor that yields one; the anchor moves
/// onto its own correlation peak.
fn lattice_at(
    detector: &LatticeDetector,
    img: &GrayImage,
    template: &BlobTemplate,
    candidates: &[Point2<f64>],
    orientations: &DominantOrientations,
) -> Result<LatticeResult> {
    let mut first_err = None;
    for &a in candidates.iter().take(ANCHOR_ATTEMPTS) {
        match detector.detect(img, template, a, orientations) {
            Ok(mut r) => {
                if let Some(p) = r.anchor_peak {
                    r.basis.anchor = p.position;
                    r.selected.anchor = p.position;
                }
                return Ok(r);
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.unwrap_or_else(|| Error::stage(Stage::DetectLattice, "no anchor candidate inside the frame margin")))
}

/// Individual blobs for the template and anchor. Tight weaves merge
/// neighbours at the tracking minimum area, so this pass may go lower.
/// Regions cut by the frame edge are partial blobs and are left out before
/// the area split.
fn acquisition_blobs(features: &FrameFeatures, config: &Config) -> Result<Vec<MserRegion>> {
    let min_area = config.lattice.template_min_area;
    let own;
    let regions = if min_area < config.mser.min_area {
        let params = MserParams { min_area, ..config.mser.clone() };
        own = detect_mser(&features.image, &params).map_err(|e| Error::stage(Stage::Detect, e.to_string()))?;
        &own
    } else {
        &features.regions
    };
    let (w, h) = (features.image.width(), features.image.height());
    let inner: Vec<MserRegion> = regions
        .iter()
        .filter(|r| r.pixels.iter().all(|&(x, y)| x > 0 && y > 0 && x + 1 < w && y + 1 < h))
        .cloned()
        .collect();
    let keep = classify_blobs(&inner).individual;
    Ok(keep.into_iter().map(|i| inner[i].clone()).collect())
}

fn acquire(frame: GrayImage, config: &Config, detector: &LatticeDetector) -> Result<Acquired> {
    let orientations = detector.orientations(&frame)?;
    let features = FrameFeatures::extract(frame, config)?;
    let blobs = acquisition_blobs(&features, config)?;
    let template = learn_template(&features.image, &blobs)?;
    let margin = config.tracker.border_margin;
    let candidates = anchors_by_center(
        blobs.iter().map(|r| Point2::new(r.centroid.0, r.centroid.1)),
        &features.image,
        margin,
    );
    let lattice = lattice_at(detector, &features.image, &template, &candidates, &orientations)?;
    Ok(Acquired {
        features,
        template,
        orientations,
        lattice,
    })
}

impl Tracker {
    /// Detects features, learns the template and finds the initial lattice
    /// at the blob nearest the frame center.
    pub fn init(frame: GrayImage, config: Config) -> Result<Self> {
        config.validate()?;
        let detector = LatticeDetector::new(config.lattice.clone());
        let mut a = acquire(frame, &config, &detector)?;
        a.lattice.basis = a.lattice.basis.canonical();
        Ok(Self {
            detector,
            reference: a.features.clone(),
            previous: a.features,
            cumulative_pose: RigidTransform::identity(),
            cumulative_threads: ThreadDelta::default(),
            lattice: a.lattice.basis,
            lattice_detail: a.lattice,
            template: a.template,
            status: TrackStatus::Tracking,
            orientation: OrientationCache {
                orientations: a.orientations,
                rotation_since: 0.0,
            },
            frames_since_refresh: 0,
            next_index: 1,
            config,
        })
    }

    pub fn status(&self) -> TrackStatus {
        self.status
    }

    pub fn lattice(&self) -> &LatticeBasis<f64> {
        &self.lattice
    }

    pub fn lattice_detail(&self) -> &LatticeResult {
        &self.lattice_detail
    }

    pub fn template(&self) -> &BlobTemplate {
        &self.template
    }

    pub fn orientations(&self) -> &DominantOrientations {
        &self.orientation.orientations
    }

    pub fn cumulative_pose(&self) -> RigidTransform<f64> {
        self.cumulative_pose
    }

    pub fn cumulative_threads(&self) -> ThreadDelta<f64> {
        self.cumulative_threads
    }

    pub fn reference(&self) -> &FrameFeatures {
        &self.reference
    }

    pub fn previous(&self) -> &FrameFeatures {
        &self.previous
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    /// Cumulative counts in millimetres.
    pub fn cumulative_mm(&self) -> (f64, f64) {
        let t = self.config.tracker.mm_per_thread;
        (self.cumulative_threads.du * t, self.cumulative_threads.dv * t)
    }

    /// Routes the frame to [`Tracker::track`] or [`Tracker::reacquire`]
    /// depending on the status.
    pub fn process(&mut self, frame: GrayImage) -> FrameResult {
        match self.status {
            TrackStatus::Tracking | TrackStatus::Reacquiring => self.track(frame).expect("status allows tracking"),
            TrackStatus::Lost => {
                let started = Instant::now();
                let index = self.next_index;
                match self.reacquire(frame) {
                    Ok(()) => {
                        let mut r = self.result(index, TrackStatus::Reacquiring);
                        r.discontinuity = true;
                        r.timings.total_ms = ms(started);
                        r
                    }
                    Err(e) => {
                        self.next_index += 1;
                        let mut r = self.result(index, TrackStatus::Lost);
                        r.failed_stage = e.failed_stage();
                        r.failure = Some(e.to_string());
                        r.timings.total_ms = ms(started);
                        r
                    }
                }
            }
        }
    }

    fn result(&self, frame_index: usize, status: TrackStatus) -> FrameResult {
        FrameResult {
            frame_index,
            status,
            discontinuity: false,
            failed_stage: None,
            failure: None,
            transform: RigidTransform::identity(),
            cumulative_pose: self.cumulative_pose,
            thread_delta: ThreadDelta::default(),
            cumulative_threads: self.cumulative_threads,
            lattice: (status != TrackStatus::Lost).then_some(self.lattice),
            matches: 0,
            inlier_count: 0,
            correspondences: Vec::new(),
            timings: StageTimings::default(),
        }
    }

    /// Re-runs initial detection on `frame`, keeping the cumulative counters.
    /// On failure the tracker stays lost.
    pub fn reacquire(&mut self, frame: GrayImage) -> Result<()> {
        if self.status != TrackStatus::Lost {
            return Err(Error::invalid("reacquire needs a lost tracker"));
        }
        let mut a = acquire(frame, &self.config, &self.detector)?;
        // keep the axis labels of the lost track so counts stay comparable
        a.lattice.basis = a.lattice.basis.aligned_to(&self.lattice);
        self.previous = a.features;
        self.template = a.template;
        self.lattice = a.lattice.basis;
        self.lattice_detail = a.lattice;
        self.orientation = OrientationCache {
            orientations: a.orientations,
            rotation_since: 0.0,
        };
        self.frames_since_refresh = 0;
        self.status = TrackStatus::Reacquiring;
        self.next_index += 1;
        Ok(())
    }

    /// Tracks one frame against the previous one. Estimation or lattice
    /// failures mark the tracker lost and leave the rest of the state as is.
    pub fn track(&mut self, frame: GrayImage) -> Result<FrameResult> {
        if self.status == TrackStatus::Lost {
            return Err(Error::invalid("tracker is lost; reacquire first"));
        }
        let index = self.next_index;
        self.next_index += 1;
        let started = Instant::now();
        let mut timings = StageTimings::default();
        let outcome = self.step(frame, index, &mut timings);
        timings.total_ms = ms(started);
        Ok(match outcome {
            Ok(mut r) => {
                r.timings = timings;
                r
            }
            Err((e, matches)) => {
                self.status = TrackStatus::Lost;
                let mut r = self.result(index, TrackStatus::Lost);
                r.failed_stage = e.failed_stage();
                r.failure = Some(e.to_string());
                r.matches = matches;
                r.timings = timings;
                r
            }
        })
    }

    fn step(&mut self, frame: GrayImage, index: usize, timings: &mut StageTimings) -> std::result::Result<FrameResult, (Error, usize)> {
        let cfg = self.config.clone();
        let cfg = &cfg;
        let t = Instant::now();
        let current = FrameFeatures::extract(frame, cfg).map_err(|e| (e, 0))?;
        timings.detect_ms = ms(t);

        let t = Instant::now();
        let matches: Vec<Match> =
            match_features(&self.previous.descriptors(), &current.descriptors(), cfg.descriptor.match_threshold);
        timings.match_ms = ms(t);

        let t = Instant::now();
        let seed = splitmix(cfg.seed ^ splitmix(index as u64));
        let estimate = estimate_rigid(&self.previous.points(), &current.points(), &matches, &cfg.msac, seed)
            .map_err(|e| (e, matches.len()))?;
        timings.estimate_ms = ms(t);
        let transform = estimate.transform;

        let t = Instant::now();
        let rotation_since = self.orientation.rotation_since + transform.dtheta;
        let orientations = if rotation_since.abs() >= cfg.tracker.orientation_cache_deg {
            Some(self.detector.orientations(&current.image).map_err(|e| (e, matches.len()))?)
        } else {
            None
        };
        let cached = orientations.as_ref().unwrap_or(&self.orientation.orientations);

        let old_anchor = self.lattice.anchor;
        let advanced = transform.apply(old_anchor);
        let mut candidates = Vec::new();
        if within_margin(advanced, &current.image, cfg.tracker.border_margin) {
            candidates.push(advanced);
        } else {
            let inliers = matches
                .iter()
                .zip(&estimate.inliers)
                .filter(|(_, &ok)| ok)
                .map(|(m, _)| current.features[m.index_b].point);
            candidates = anchors_by_center(inliers, &current.image, cfg.tracker.border_margin);
        }
        let detail = lattice_at(&self.detector, &current.image, &self.template, &candidates, cached)
            .map_err(|e| (e, matches.len()))?;
        let basis = detail.basis.aligned_to(&self.lattice);
        let delta = thread_decompose(transform.displacement_at(old_anchor), &basis).map_err(|e| (e, matches.len()))?;
        timings.lattice_ms = ms(t);

        // commit
        let correspondences = matches
            .iter()
            .zip(&estimate.inliers)
            .map(|(m, &ok)| (self.previous.features[m.index_a].point, current.features[m.index_b].point, ok))
            .collect();
        let discontinuity = false;
        self.orientation = match orientations {
            Some(o) => OrientationCache { orientations: o, rotation_since: 0.0 },
            None => OrientationCache {
                orientations: self.orientation.orientations.clone(),
                rotation_since,
            },
        };
        self.cumulative_pose = RigidTransform::compose(&self.cumulative_pose, &transform);
        self.cumulative_threads = self.cumulative_threads.add(delta);
        self.lattice = basis;
        self.lattice_detail = LatticeResult { basis, ..detail };
        self.frames_since_refresh += 1;
        if self.frames_since_refresh >= cfg.tracker.refresh_period {
            self.frames_since_refresh = 0;
            let (w, h) = self.template.size();
            if let Ok(fresh) = learn_template_sized(&current.image, current.individual_regions(), w, h) {
                // a failed blend only means the sizes differ, which cannot happen here
                let _ = self.template.blend(&fresh, cfg.tracker.refresh_weight);
            }
        }
        self.previous = current;
        self.status = TrackStatus::Tracking;

        Ok(FrameResult {
            frame_index: index,
            status: TrackStatus::Tracking,
            discontinuity,
            failed_stage: None,
            failure: None,
            transform,
            cumulative_pose: self.cumulative_pose,
            thread_delta: delta,
            cumulative_threads: self.cumulative_threads,
            lattice: Some(basis),
            matches: matches.len(),
            inlier_count: estimate.inlier_count,
            correspondences,
            timings: StageTimings::default(),
        })
    }
}
