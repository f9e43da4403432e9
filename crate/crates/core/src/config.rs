//! Run configuration: one TOML table per module, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::MserParams;
use crate::geometry::MsacParams;
use crate::lattice::LatticeParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescriptorParams {
    /// Keypoint scale as a multiple of the region's mean ellipse axis.
    pub scale_factor: f64,
    pub oriented: bool,
    /// Hamming distance (bits of 512) above which matches are dropped.
    pub match_threshold: u32,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        Self {
            scale_factor: 10.0,
            oriented: false,
            match_threshold: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerParams {
    /// Frames between template refreshes.
    pub refresh_period: usize,
    pub refresh_weight: f64,
    pub mm_per_thread: f64,
    /// The anchor is re-selected once it comes this close to the frame edge.
    pub border_margin: f64,
    /// Rotation (degrees) accumulated before dominant orientations are recomputed.
    pub orientation_cache_deg: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            refresh_period: 10,
            refresh_weight: 0.1,
            mm_per_thread: 0.33,
            border_margin: 16.0,
            orientation_cache_deg: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Seed for the robust estimator.
    pub seed: u64,
    pub mser: MserParams,
    pub descriptor: DescriptorParams,
    pub msac: MsacParams,
    pub lattice: LatticeParams,
    pub tracker: TrackerParams,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let config = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        self.mser.validate().map_err(config)?;
        self.msac.validate().map_err(config)?;
        self.lattice.validate().map_err(config)?;
        let d = &self.descriptor;
        if !(d.scale_factor > 0.0) {
            return Err(Error::Config("descriptor: scale_factor must be positive".into()));
        }
        if d.match_threshold > 512 {
            return Err(Error::Config("descriptor: match_threshold must lie in [0, 512]".into()));
        }
        let t = &self.tracker;
        if t.refresh_period == 0 {
            return Err(Error::Config("tracker: refresh_period must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&t.refresh_weight) {
            return Err(Error::Config("tracker: refresh_weight must lie in [0, 1]".into()));
        }
        if !(t.mm_per_thread > 0.0) {
            return Err(Error::Config("tracker: mm_per_thread must be positive".into()));
        }
        if !(t.border_margin >= 0.0) || !(t.orientation_cache_deg >= 0.0) {
            return Err(Error::Config("tracker: border_margin and orientation_cache_deg must be non-negative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        let text = c.to_toml_string();
        assert_eq!(Config::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = Config::from_toml_str("seed = 9\n[lattice]\nw = 0.25\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.lattice.w, 0.25);
        assert_eq!(c.mser, MserParams::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::from_toml_str("sed = 9\n").is_err());
        assert!(Config::from_toml_str("[lattice]\nweight = 1.0\n").is_err());
        assert!(Config::from_toml_str("[nope]\n").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for bad in [
            "[msac]\nconfidence = 1.0\n",
            "[mser]\ndelta = 0\n",
            "[lattice]\nfft_crop = 100\n",
            "[lattice]\nncc_min = 1.5\n",
            "[descriptor]\nmatch_threshold = 600\n",
            "[tracker]\nmm_per_thread = 0.0\n",
            "[tracker]\nrefresh_period = 0\n",
        ] {
            let e = Config::from_toml_str(bad).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{bad}: {e}");
        }
    }

    #[test]
    fn load_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[tracker]\nrefresh_period = 4\n").unwrap();
        assert_eq!(Config::load(&path).unwrap().tracker.refresh_period, 4);
        assert!(matches!(Config::load(dir.path().join("missing.toml")), Err(Error::Io { .. })));
    }
}
