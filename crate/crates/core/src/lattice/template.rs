use crate::error::{Error, Result, Stage};
use crate::features::MserRegion;
use crate::imagecore::GrayImage;

/// Mean appearance of the individual blobs, centered on their centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobTemplate {
    pub patch: GrayImage,
    pub support_count: usize,
}

impl BlobTemplate {
    pub const MIN_TRUSTED_SUPPORT: usize = 3;

    pub fn trusted(&self) -> bool {
        self.support_count >= Self::MIN_TRUSTED_SUPPORT
    }

    pub fn size(&self) -> (usize, usize) {
        (self.patch.width(), self.patch.height())
    }

    /// Exponential refresh: `(1 - weight) * self + weight * fresh`.
    pub fn blend(&mut self, fresh: &BlobTemplate, weight: f64) -> Result<()> {
        if fresh.size() != self.size() {
            return Err(Error::invalid("template sizes differ"));
        }
        let data: Vec<f64> = self
            .patch
            .data()
            .iter()
            .zip(fresh.patch.data())
            .map(|(&a, &b)| ((1.0 - weight) * f64::from(a) + weight * f64::from(b)) / 255.0)
            .collect();
        self.patch = GrayImage::from_real(self.patch.width(), self.patch.height(), &data)?;
        self.support_count = self.support_count.max(fresh.support_count);
        Ok(())
    }
}

fn upper_median(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    v[v.len() / 2]
}

fn odd_at_least_three(n: usize) -> usize {
    let n = n.max(3);
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

/// Learns a template whose size is the per-dimension median blob bounding
/// box, rounded up to odd.
pub fn learn_template<'a>(img: &GrayImage, blobs: impl IntoIterator<Item = &'a MserRegion>) -> Result<BlobTemplate> {
    let blobs: Vec<&MserRegion> = blobs.into_iter().collect();
    if blobs.is_empty() {
        return Err(Error::stage(Stage::Template, "no individual blobs"));
    }
    let widths = blobs.iter().map(|b| {
        let (x0, _, x1, _) = b.bounding_box();
        x1 - x0 + 1
    });
    let heights = blobs.iter().map(|b| {
        let (_, y0, _, y1) = b.bounding_box();
        y1 - y0 + 1
    });
    let w = odd_at_least_three(upper_median(widths.collect()));
    let h = odd_at_least_three(upper_median(heights.collect()));
    learn_template_sized(img, blobs, w, h)
}

/// Learns a template of a fixed odd size by averaging bilinear patches
/// centered on each blob centroid. Blobs whose patch leaves the frame are skipped.
pub fn learn_template_sized<'a>(
    img: &GrayImage,
    blobs: impl IntoIterator<Item = &'a MserRegion>,
    width: usize,
    height: usize,
) -> Result<BlobTemplate> {
    if width % 2 == 0 || height % 2 == 0 {
        return Err(Error::invalid("template dimensions must be odd"));
    }
    let (hw, hh) = ((width / 2) as f64, (height / 2) as f64);
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    let mut acc = vec![0.0; width * height];
    let mut count = 0usize;
    for blob in blobs {
        let (cx, cy) = blob.centroid;
        if cx - hw < 0.0 || cy - hh < 0.0 || cx + hw > max_x || cy + hh > max_y {
            continue;
        }
        for j in 0..height {
            for i in 0..width {
                acc[j * width + i] += img.sample_unchecked(cx - hw + i as f64, cy - hh + j as f64);
            }
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::stage(Stage::Template, "every blob patch leaves the frame"));
    }
    let mean: Vec<f64> = acc.iter().map(|v| v / count as f64 / 255.0).collect();
    Ok(BlobTemplate {
        patch: GrayImage::from_real(width, height, &mean)?,
        support_count: count,
    })
}
