//! Line-of-sight Lambertian channel, flux-to-current conversion and the
//! luminance-dependent photodiode noise model.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current-variance floor of the fitted noise model, in A².
pub const DEFAULT_NOISE_CONST: f64 = 8.0185e-18;
/// Current-variance slope of the fitted noise model, in A (A² per A of mean).
pub const DEFAULT_NOISE_LINEAR: f64 = 1.869e-11;

/// LED and photodiode optical parameters in base units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalParams {
    /// Transmitted luminous flux, lm.
    pub transmit_power: f64,
    /// Lambertian order `m`.
    pub lambertian_order: f64,
    /// Effective photodiode area, m².
    pub pd_area: f64,
    /// Photodiode responsivity, A/lux.
    pub responsivity: f64,
}

impl OpticalParams {
    pub fn new(transmit_power: f64, lambertian_order: f64, pd_area: f64, responsivity: f64) -> Result<Self> {
        let p = Self {
            transmit_power,
            lambertian_order,
            pd_area,
            responsivity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("transmit_power", self.transmit_power),
            ("pd_area", self.pd_area),
            ("responsivity", self.responsivity),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(key, format!("must be > 0, got {v}")));
            }
        }
        if !(self.lambertian_order.is_finite() && self.lambertian_order >= 0.0) {
            return Err(Error::validation(
                "lambertian_order",
                format!("must be >= 0, got {}", self.lambertian_order),
            ));
        }
        Ok(())
    }

    /// Peak photocurrent of a head at distance `d` and radiation cosine
    /// `cos_theta`: `R_p·P_t·(m+1)/(2π d²)·cos^m θ`.
    pub fn peak_current(&self, d: f64, cos_theta: f64) -> f64 {
        self.responsivity * self.transmit_power * (self.lambertian_order + 1.0) / (2.0 * PI * d * d)
            * cos_theta.powf(self.lambertian_order)
    }
}

/// Affine current-variance model `σ² = β₀ + β₁·μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// β₀, A².
    pub const_coeff: f64,
    /// β₁, A.
    pub linear_coeff: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            const_coeff: DEFAULT_NOISE_CONST,
            linear_coeff: DEFAULT_NOISE_LINEAR,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            const_coeff: 0.0,
            linear_coeff: 0.0,
        }
    }

    /// Both coefficients multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            const_coeff: self.const_coeff * factor,
            linear_coeff: self.linear_coeff * factor,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.const_coeff == 0.0 && self.linear_coeff == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("const_coeff", self.const_coeff), ("linear_coeff", self.linear_coeff)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(key, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// How a photodiode facing away from the LED is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    /// Keep the signed `cos φ`, so the received-current model stays linear in
    /// the incidence vector.
    #[default]
    PaperFaithful,
    /// Clamp received power at zero.
    Physical,
}

impl ChannelMode {
    pub fn apply(self, power: f64) -> f64 {
        match self {
            ChannelMode::PaperFaithful => power,
            ChannelMode::Physical => power.max(0.0),
        }
    }
}

/// Received luminous flux `P_t (m+1) s / (2π d²) cos^m θ cos φ`.
///
/// Negative for `cos_phi < 0`; see [`ChannelMode`] for clipping.
pub fn lambertian_power(params: &OpticalParams, d: f64, cos_theta: f64, cos_phi: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidGeometry(format!("distance must be > 0, got {d}")));
    }
    Ok(
        params.transmit_power * (params.lambertian_order + 1.0) * params.pd_area / (2.0 * PI * d * d)
            * cos_theta.powf(params.lambertian_order)
            * cos_phi,
    )
}

/// Mean photocurrent `(R_p / s)·P_r`.
pub fn current_mean(params: &OpticalParams, received_flux: f64) -> f64 {
    params.responsivity / params.pd_area * received_flux
}

/// Current variance at mean `mu`; negative means are evaluated at zero.
pub fn noise_variance(model: &NoiseModel, mu: f64) -> f64 {
    model.const_coeff + model.linear_coeff * mu.max(0.0)
}

/// One noisy current reading: `mu` plus a zero-mean Gaussian draw with the
/// model variance at `mu`. Always consumes exactly one normal deviate.
pub fn sample_noisy_current<R: Rng + ?Sized>(model: &NoiseModel, mu: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let sigma = noise_variance(model, mu).sqrt();
    if sigma == 0.0 {
        mu
    } else {
        mu + sigma * z
    }
}
