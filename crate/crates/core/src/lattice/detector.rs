use serde::{Deserialize, Serialize};

use super::{
    detect_lattice, dominant_orientations, lattice_distance, refine_basis, search_peaks, BlobTemplate, DominantOrientations, LatticeBasis,
    Peak,
};
use crate::error::{Error, Result, Stage};
use crate::geometry::Point2;
use crate::imagecore::GrayImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeParams {
    /// Pixels of cost per degree of angular deviation in the selection cost.
    pub w: f64,
    pub ncc_min: f64,
    pub angular_tolerance_deg: f64,
    pub min_separation_deg: f64,
    /// Radius in frequency bins of the masked low-frequency disc.
    pub mask_radius: f64,
    pub search_radius: f64,
    /// Side of the centered square fed to the spectrum; a power of two.
    pub fft_crop: usize,
    /// Least-squares fit of the basis over all matched peaks.
    pub refine: bool,
    /// MSER minimum area for the template and anchor blobs at acquisition.
    pub template_min_area: usize,
}

impl Default for LatticeParams {
    fn default() -> Self {
        Self {
            w: 0.5,
            ncc_min: 0.6,
            angular_tolerance_deg: 15.0,
            min_separation_deg: 30.0,
            mask_radius: 3.0,
            search_radius: 24.0,
            fft_crop: 256,
            refine: true,
            template_min_area: 12,
        }
    }
}

impl LatticeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("lattice: {m}")));
        if !(self.w >= 0.0) {
            return bad("w must be non-negative");
        }
        if !(-1.0..=1.0).contains(&self.ncc_min) {
            return bad("ncc_min must lie in [-1, 1]");
        }
        if !(self.angular_tolerance_deg > 0.0 && self.angular_tolerance_deg <= 90.0) {
            return bad("angular_tolerance_deg must lie in (0, 90]");
        }
        if !(self.min_separation_deg > 0.0 && self.min_separation_deg <= 90.0) {
            return bad("min_separation_deg must lie in (0, 90]");
        }
        if !(self.mask_radius >= 0.0) {
            return bad("mask_radius must be non-negative");
        }
        if !(self.search_radius > 0.0) {
            return bad("search_radius must be positive");
        }
        if self.template_min_area == 0 {
            return bad("template_min_area must be positive");
        }
        if !self.fft_crop.is_power_of_two() || self.fft_crop < 16 {
            return bad("fft_crop must be a power of two >= 16");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeResult {
    /// Basis used downstream (refined when enabled).
    pub basis: LatticeBasis<f64>,
    /// Basis straight from the per-axis selection.
    pub selected: LatticeBasis<f64>,
    pub anchor_peak: Option<Peak>,
    pub neighbors: Vec<Peak>,
}

/// Lattice detection at an anchor: correlation neighbours, per-axis
/// selection, optional refinement.
#[derive(Debug, Clone, Default)]
pub struct LatticeDetector {
    pub params: LatticeParams,
}

impl LatticeDetector {
    pub fn new(params: LatticeParams) -> Self {
        Self { params }
    }

    /// Dominant orientations of the centered `fft_crop` square.
    pub fn orientations(&self, img: &GrayImage) -> Result<DominantOrientations> {
        let crop = img.center_crop(self.params.fft_crop).map_err(|_| {
            Error::stage(
                Stage::DominantOrientations,
                format!(
                    "frame {}x{} smaller than the {} px spectrum crop",
                    img.width(),
                    img.height(),
                    self.params.fft_crop
                ),
            )
        })?;
        dominant_orientations(&crop, self.params.mask_radius, self.params.min_separation_deg)
    }

    pub fn detect(
        &self,
        img: &GrayImage,
        template: &BlobTemplate,
        anchor: Point2<f64>,
        orientations: &DominantOrientations,
    ) -> Result<LatticeResult> {
        let p = &self.params;
        let peaks = search_peaks(img, template, anchor, p.search_radius, p.ncc_min)?;
        if peaks.neighbors.is_empty() {
            return Err(Error::stage(Stage::FindNeighbors, "no correlation peaks above threshold"));
        }
        let points: Vec<Point2<f64>> = peaks.neighbors.iter().map(|n| n.position).collect();
        let anchor_peak = peaks.anchor_peak.map(|a| a.position);
        let (selected, basis) = self.select_pair(anchor, anchor_peak, &points, orientations)?;
        Ok(LatticeResult {
            basis,
            selected,
            anchor_peak: peaks.anchor_peak,
            neighbors: peaks.neighbors,
        })
    }

    /// Basis from the pair of orientations whose (refined) vectors have the
    /// lowest summed cost. With a third orientation available this prefers
    /// the two nearest neighbours over a diagonal whose spectral peak happens
    /// to be stronger. Returns the selected and the downstream basis.
    fn select_pair(
        &self,
        anchor: Point2<f64>,
        anchor_peak: Option<Point2<f64>>,
        points: &[Point2<f64>],
        orientations: &DominantOrientations,
    ) -> Result<(LatticeBasis<f64>, LatticeBasis<f64>)> {
        let p = &self.params;
        let (r1, r2) = (orientations.theta_ref_1, orientations.theta_ref_2);
        let mut pairs = vec![[r1, r2]];
        if let Some(r3) = orientations.theta_ref_3 {
            pairs.extend([[r1, r3], [r2, r3]]);
        }
        let mut best: Option<(f64, LatticeBasis<f64>, LatticeBasis<f64>)> = None;
        let mut first_err = None;
        for refs in pairs {
            match detect_lattice(anchor, points, refs, p.w, p.angular_tolerance_deg) {
                Ok(selected) => {
                    let b = if p.refine { refine_basis(&selected, anchor_peak, points) } else { selected };
                    let o = b.anchor;
                    let cost = lattice_distance(o, o.add(b.v1), refs[0], p.w) + lattice_distance(o, o.add(b.v2), refs[1], p.w);
                    if best.as_ref().is_none_or(|(c, ..)| cost < *c) {
                        best = Some((cost, selected, b));
                    }
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        match (best, first_err) {
            (Some((_, selected, b)), _) => Ok((selected, b)),
            (None, Some(e)) => Err(e),
            (None, None) => unreachable!("at least one pair is tried"),
        }
    }
}
