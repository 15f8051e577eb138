//! A fully resolved simulation scene in base units.

use crate::aoa::{optimal_normals, AoaEstimator};
use crate::channel::{ChannelMode, NoiseModel, OpticalParams};
use crate::error::{Error, Result};
use crate::linalg::{Mat4x3, Vec3};
use crate::localizer::LocalizerConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scene {
    pub estimators: [AoaEstimator; 2],
    /// Unit normal of the LED's emitting face.
    pub led_normal: Vec3,
    pub optics: OpticalParams,
    pub noise: NoiseModel,
    pub mode: ChannelMode,
    pub localizer: LocalizerConfig,
}

impl Scene {
    /// Both heads use the optimal normal matrix, LED faces straight down.
    pub fn new(a1: Vec3, a2: Vec3, optics: OpticalParams, noise: NoiseModel) -> Result<Self> {
        Self::with_normals(a1, a2, optimal_normals(), optics, noise)
    }

    pub fn with_normals(a1: Vec3, a2: Vec3, normals: Mat4x3, optics: OpticalParams, noise: NoiseModel) -> Result<Self> {
        optics.validate()?;
        noise.validate()?;
        let localizer = LocalizerConfig::default();
        if !((a2 - a1).norm() > localizer.min_separation) {
            return Err(Error::validation(
                "estimators",
                "a1 and a2 are closer than the minimum separation",
            ));
        }
        Ok(Self {
            estimators: [AoaEstimator::new(a1, normals)?, AoaEstimator::new(a2, normals)?],
            led_normal: Vec3::new(0.0, 0.0, -1.0),
            optics,
            noise,
            mode: ChannelMode::PaperFaithful,
            localizer,
        })
    }

    pub fn a1(&self) -> Vec3 {
        self.estimators[0].position()
    }

    pub fn a2(&self) -> Vec3 {
        self.estimators[1].position()
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_mode(mut self, mode: ChannelMode) -> Self {
        self.mode = mode;
        self
    }
}
