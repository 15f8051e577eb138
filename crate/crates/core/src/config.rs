//! TOML scene and experiment configuration.
//!
//! Files use lm, mm², nA/lux and m; [`SceneConfig::to_scene`] converts to
//! base units. The two bundled presets reproduce the wide (`fig3`) and
//! close (`fig4`) head placements.
//!
//! ```toml
//! [room]
//! x = [0.0, 4.0]
//! y = [0.0, 4.0]
//! z = [0.0, 4.0]
//!
//! [led]
//! height = 4.0
//! normal = [0.0, 0.0, -1.0]
//!
//! [estimators]
//! a1 = [0.0, 2.0, 0.0]
//! a2 = [4.0, 2.0, 0.0]
//! normals = "optimal"        # or four explicit unit rows [[x, y, z], ...]
//!
//! [optics]
//! transmit_power_lm = 5000.0
//! lambertian_order = 1.0
//! pd_area_mm2 = 15.0
//! responsivity_na_per_lux = 22.0
//!
//! [noise]
//! const_coeff_a2 = 8.0185e-18
//! linear_coeff_a = 1.869e-11
//!
//! [channel]
//! mode = "paper-faithful"    # or "physical"
//!
//! [thresholds]
//! degeneracy = 1e-9
//! min_separation_m = 1e-6
//!
//! [experiment]
//! step_m = 0.25
//! trials = 20000
//! seed = 42
//! # x = [0.0, 4.0]           # optional, defaults to the room bounds
//! # y = [0.0, 4.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aoa::optimal_normals;
use crate::channel::{ChannelMode, NoiseModel, OpticalParams};
use crate::error::{Error, Result};
use crate::harness::{ExperimentSpec, Grid};
use crate::linalg::{Mat4x3, Vec3};
use crate::localizer::LocalizerConfig;
use crate::scene::Scene;

const FIG3: &str = include_str!("../presets/fig3.toml");
const FIG4: &str = include_str!("../presets/fig4.toml");

pub const PRESET_NAMES: [&str; 2] = ["fig3", "fig4"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedConfig {
    pub height: f64,
    #[serde(default = "default_led_normal")]
    pub normal: [f64; 3],
}

fn default_led_normal() -> [f64; 3] {
    [0.0, 0.0, -1.0]
}

/// Photodiode normal matrix: the named optimal layout or four explicit rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NormalsSelector {
    Named(String),
    Rows([[f64; 3]; 4]),
}

impl Default for NormalsSelector {
    fn default() -> Self {
        NormalsSelector::Named("optimal".into())
    }
}

impl NormalsSelector {
    pub fn matrix(&self) -> Result<Mat4x3> {
        match self {
            NormalsSelector::Named(name) if name == "optimal" => Ok(optimal_normals()),
            NormalsSelector::Named(name) => Err(Error::validation(
                "estimators.normals",
                format!("unknown normal matrix `{name}` (expected \"optimal\" or four rows)"),
            )),
            NormalsSelector::Rows(rows) => Ok(Mat4x3(*rows)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub a1: [f64; 3],
    pub a2: [f64; 3],
    #[serde(default)]
    pub normals: NormalsSelector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsConfig {
    pub transmit_power_lm: f64,
    pub lambertian_order: f64,
    pub pd_area_mm2: f64,
    pub responsivity_na_per_lux: f64,
}

impl OpticsConfig {
    /// Base units: m² and A/lux.
    pub fn to_params(&self) -> OpticalParams {
        OpticalParams {
            transmit_power: self.transmit_power_lm,
            lambertian_order: self.lambertian_order,
            pd_area: self.pd_area_mm2 * 1e-6,
            responsivity: self.responsivity_na_per_lux * 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub const_coeff_a2: f64,
    pub linear_coeff_a: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub mode: ChannelMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub degeneracy: f64,
    pub min_separation_m: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        let d = LocalizerConfig::default();
        Self {
            degeneracy: d.degeneracy_threshold,
            min_separation_m: d.min_separation,
        }
    }
}

/// Everything needed to build a [`Scene`], in file units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub room: RoomConfig,
    pub led: LedConfig,
    pub estimators: EstimatorConfig,
    pub optics: OpticsConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub step_m: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    room: RoomConfig,
    led: LedConfig,
    estimators: EstimatorConfig,
    optics: OpticsConfig,
    noise: NoiseConfig,
    #[serde(default)]
    channel: ChannelConfig,
    #[serde(default)]
    thresholds: ThresholdConfig,
    experiment: ExperimentConfig,
}

fn finite(key: &str, vals: &[f64]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::validation(key, "values must be finite"))
    }
}

fn within(key: &str, v: f64, range: [f64; 2]) -> Result<()> {
    if v >= range[0] && v <= range[1] {
        Ok(())
    } else {
        Err(Error::validation(
            key,
            format!("{v} lies outside the room range [{}, {}]", range[0], range[1]),
        ))
    }
}

impl SceneConfig {
    /// Checks every invariant, reporting the first offending key.
    pub fn validate(&self) -> Result<()> {
        let room = &self.room;
        for (key, r) in [("room.x", room.x), ("room.y", room.y), ("room.z", room.z)] {
            finite(key, &r)?;
            if !(r[1] > r[0]) {
                return Err(Error::validation(key, "upper bound must exceed lower bound"));
            }
        }
        finite("led.height", &[self.led.height])?;
        within("led.height", self.led.height, room.z)?;
        finite("led.normal", &self.led.normal)?;
        let n = Vec3::from_array(self.led.normal).norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::validation(
                "led.normal",
                format!("must be a unit vector (norm {n})"),
            ));
        }
        for (key, a) in [
            ("estimators.a1", self.estimators.a1),
            ("estimators.a2", self.estimators.a2),
        ] {
            finite(key, &a)?;
            within(key, a[0], room.x)?;
            within(key, a[1], room.y)?;
            within(key, a[2], room.z)?;
        }
        let sep = (Vec3::from_array(self.estimators.a2) - Vec3::from_array(self.estimators.a1)).norm();
        if !(sep >= self.thresholds.min_separation_m) {
            return Err(Error::validation(
                "estimators.a2",
                format!(
                    "estimators are {sep} m apart, below the minimum separation {} m",
                    self.thresholds.min_separation_m
                ),
            ));
        }
        let normals = self.estimators.normals.matrix()?;
        finite("estimators.normals", normals.0.as_flattened())?;
        if !normals.rows_are_unit(1e-12) {
            return Err(Error::validation("estimators.normals", "rows must be unit vectors"));
        }
        let o = &self.optics;
        for (key, v) in [
            ("optics.transmit_power_lm", o.transmit_power_lm),
            ("optics.pd_area_mm2", o.pd_area_mm2),
            ("optics.responsivity_na_per_lux", o.responsivity_na_per_lux),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(key, format!("must be > 0, got {v}")));
            }
        }
        if !(o.lambertian_order.is_finite() && o.lambertian_order >= 0.0) {
            return Err(Error::validation("optics.lambertian_order", "must be >= 0"));
        }
        for (key, v) in [
            ("noise.const_coeff_a2", self.noise.const_coeff_a2),
            ("noise.linear_coeff_a", self.noise.linear_coeff_a),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(key, format!("must be >= 0, got {v}")));
            }
        }
        for (key, v) in [
            ("thresholds.degeneracy", self.thresholds.degeneracy),
            ("thresholds.min_separation_m", self.thresholds.min_separation_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(key, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            const_coeff: self.noise.const_coeff_a2,
            linear_coeff: self.noise.linear_coeff_a,
        }
    }

    /// Validated scene in base units.
    pub fn to_scene(&self) -> Result<Scene> {
        self.validate()?;
        let mut scene = Scene::with_normals(
            Vec3::from_array(self.estimators.a1),
            Vec3::from_array(self.estimators.a2),
            self.estimators.normals.matrix()?,
            self.optics.to_params(),
            self.noise_model(),
        )?;
        scene.led_normal = Vec3::from_array(self.led.normal)
            .normalized()
            .expect("validated unit normal");
        scene.mode = self.channel.mode;
        scene.localizer = LocalizerConfig {
            degeneracy_threshold: self.thresholds.degeneracy,
            min_separation: self.thresholds.min_separation_m,
        };
        Ok(scene)
    }

    pub fn estimator_positions(&self) -> [Vec3; 2] {
        [
            Vec3::from_array(self.estimators.a1),
            Vec3::from_array(self.estimators.a2),
        ]
    }
}

impl ExperimentConfig {
    pub fn validate(&self, scene: &SceneConfig) -> Result<()> {
        if !(self.step_m.is_finite() && self.step_m > 0.0) {
            return Err(Error::validation("experiment.step_m", "must be > 0"));
        }
        if self.trials < 1 {
            return Err(Error::validation("experiment.trials", "must be >= 1"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::validation(
                "experiment.seed",
                "must fit in a signed 64-bit integer",
            ));
        }
        for (key, range, room) in [
            ("experiment.x", self.x, scene.room.x),
            ("experiment.y", self.y, scene.room.y),
        ] {
            if let Some(r) = range {
                finite(key, &r)?;
                if !(r[1] >= r[0]) {
                    return Err(Error::validation(key, "upper bound below lower bound"));
                }
                within(key, r[0], room)?;
                within(key, r[1], room)?;
            }
        }
        Ok(())
    }

    pub fn grid(&self, scene: &SceneConfig) -> Grid {
        let x = self.x.unwrap_or(scene.room.x);
        let y = self.y.unwrap_or(scene.room.y);
        Grid {
            x_min: x[0],
            x_max: x[1],
            y_min: y[0],
            y_max: y[1],
            step: self.step_m,
            height: scene.led.height,
        }
    }

    pub fn to_spec(&self, scene: &SceneConfig) -> Result<ExperimentSpec> {
        self.validate(scene)?;
        Ok(ExperimentSpec {
            scene: scene.to_scene()?,
            grid: self.grid(scene),
            trials_per_point: self.trials,
            seed: self.seed,
        })
    }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<(SceneConfig, ExperimentConfig)> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let scene = SceneConfig {
        room: file.room,
        led: file.led,
        estimators: file.estimators,
        optics: file.optics,
        noise: file.noise,
        channel: file.channel,
        thresholds: file.thresholds,
    };
    scene.validate()?;
    file.experiment.validate(&scene)?;
    Ok((scene, file.experiment))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<(SceneConfig, ExperimentConfig)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Serializes a configuration in the same schema [`parse_config`] reads.
pub fn write_config(scene: &SceneConfig, experiment: &ExperimentConfig) -> Result<String> {
    let file = ConfigFile {
        room: scene.room.clone(),
        led: scene.led.clone(),
        estimators: scene.estimators.clone(),
        optics: scene.optics.clone(),
        noise: scene.noise.clone(),
        channel: scene.channel.clone(),
        thresholds: scene.thresholds.clone(),
        experiment: experiment.clone(),
    };
    toml::to_string(&file).map_err(|e| Error::Parse(e.to_string()))
}

/// A bundled preset by name (`fig3` or `fig4`).
pub fn preset(name: &str) -> Result<(SceneConfig, ExperimentConfig)> {
    match name {
        "fig3" => parse_config(FIG3),
        "fig4" => parse_config(FIG4),
        other => Err(Error::validation(
            "preset",
            format!("unknown preset `{other}` (available: {})", PRESET_NAMES.join(", ")),
        )),
    }
}
