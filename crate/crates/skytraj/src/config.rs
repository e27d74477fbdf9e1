//! Run configuration: one versioned TOML file covering input paths, camera
//! intrinsics, and every stage's parameters.
//!
//! Defaults exist for all analysis parameters and are materialized on load,
//! so serializing the effective config (`to_toml`) echoes every value that
//! will be used — there are no hidden constants. Relative input paths are
//! resolved against the directory containing the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conflict::ConflictConfig;
use crate::dedup::FilterConfig;
use crate::error::{Error, Result};
use crate::ingest::TracksSchema;
use crate::kinematics::SmootherConfig;
use crate::semantic::SignalConfig;

/// Schema version this build reads and writes.
pub const CONFIG_VERSION: u32 = 1;

/// Input and output locations. `signals` and `flight_log` are optional:
/// scenes without a signal plan skip violation scanning, and the flight log
/// is only needed when the camera block omits the flight altitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub tracks: PathBuf,
    pub gcps: PathBuf,
    pub map: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub signals: Option<PathBuf>,
    #[serde(default)]
    pub flight_log: Option<PathBuf>,
}

/// Camera intrinsics and distortion (Brown–Conrady: k1, k2, p1, p2, k3).
/// When `altitude_m` is absent it is taken from the flight log; when
/// `gsd_m_per_px` is absent it is implied by altitude and focal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub dist: [f64; 5],
    pub image_width_px: f64,
    pub image_height_px: f64,
    #[serde(default)]
    pub gsd_m_per_px: Option<f64>,
    #[serde(default)]
    pub altitude_m: Option<f64>,
}

fn default_scene_id() -> String {
    "scene".to_string()
}

/// Tracking-input description. The frame rate has no safe default and must
/// be stated; column names default to the canonical header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracksConfig {
    pub frame_rate_hz: f64,
    #[serde(default = "default_scene_id")]
    pub scene_id: String,
    #[serde(default)]
    pub schema: TracksSchema,
}

/// Metrics-stage options. Absent values fall back to data-derived choices:
/// duration from the observed time span, heatmap extent from the bounding
/// box of all track centers.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub duration_s: Option<f64>,
    pub heatmap_min_m: Option<[f64; 2]>,
    pub heatmap_max_m: Option<[f64; 2]>,
}

/// The complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub config_version: u32,
    pub paths: PathsConfig,
    pub camera: CameraConfig,
    pub tracks: TracksConfig,
    #[serde(default)]
    pub smoother: SmootherConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub conflict: ConflictConfig,
    #[serde(default)]
    pub signal: SignalConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&p);
    }
}

impl PipelineConfig {
    /// Parse a TOML string. Schema violations surface the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load from a file, resolving relative paths against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.paths.tracks);
        resolve(base, &mut self.paths.gcps);
        resolve(base, &mut self.paths.map);
        resolve(base, &mut self.paths.out_dir);
        if let Some(p) = self.paths.signals.as_mut() {
            resolve(base, p);
        }
        if let Some(p) = self.paths.flight_log.as_mut() {
            resolve(base, p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.config_version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config_version {} unsupported; this build reads version {CONFIG_VERSION}",
                self.config_version
            )));
        }
        let cam = &self.camera;
        for (key, v) in [
            ("camera.fx", cam.fx),
            ("camera.fy", cam.fy),
            ("camera.image_width_px", cam.image_width_px),
            ("camera.image_height_px", cam.image_height_px),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{key} must be positive, got {v}")));
            }
        }
        if !(self.tracks.frame_rate_hz > 0.0 && self.tracks.frame_rate_hz.is_finite()) {
            return Err(Error::Config(format!(
                "tracks.frame_rate_hz must be positive, got {}",
                self.tracks.frame_rate_hz
            )));
        }
        self.smoother.validate()?;
        self.filter.validate()?;
        self.conflict.validate()?;
        self.signal.validate()?;
        let m = &self.metrics;
        if let Some(d) = m.duration_s {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!(
                    "metrics.duration_s must be positive, got {d}"
                )));
            }
        }
        match (m.heatmap_min_m, m.heatmap_max_m) {
            (None, None) => {}
            (Some(lo), Some(hi)) => {
                if !(lo[0] < hi[0] && lo[1] < hi[1]) {
                    return Err(Error::Config(format!(
                        "metrics.heatmap_min_m {lo:?} must be strictly below heatmap_max_m {hi:?}"
                    )));
                }
            }
            _ => {
                return Err(Error::Config(
                    "metrics.heatmap_min_m and heatmap_max_m must be given together".into(),
                ))
            }
        }
        Ok(())
    }

    /// The effective configuration as TOML, every default included.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Digest identifying the analysis parameters and inputs. The output
    /// directory is excluded so re-running into a different location yields
    /// identical artifacts, manifest included.
    pub fn sha256_hex(&self) -> Result<String> {
        let mut hashed = self.clone();
        hashed.paths.out_dir = PathBuf::new();
        let bytes = hashed.to_toml()?;
        let digest = Sha256::digest(bytes.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
