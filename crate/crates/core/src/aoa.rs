//! Four-photodiode angle-of-arrival head: simulated currents and the
//! least-squares recovery of the incidence vector.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;

use crate::channel::{noise_variance, sample_noisy_current, ChannelMode, NoiseModel, OpticalParams};
use crate::error::{Error, Result};
use crate::linalg::{pseudo_left_inverse, Mat3, Mat3x4, Mat4x3, Vec3};

/// The optimal normal matrix: rows `√(2/3)·(cos α, sin α, 1/√2)` for
/// `α = π/2, π, 3π/2, 2π`.
pub fn optimal_normals() -> Mat4x3 {
    let s = (2.0f64 / 3.0).sqrt();
    let row = |alpha: f64| Vec3::new(s * alpha.cos(), s * alpha.sin(), s * FRAC_1_SQRT_2);
    Mat4x3::from_rows([row(PI / 2.0), row(PI), row(1.5 * PI), row(2.0 * PI)])
}

/// Distance, direction and radiation cosine from a head to the LED.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadGeometry {
    /// Unit vector from the head toward the LED.
    pub incidence: Vec3,
    pub distance: f64,
    pub cos_theta: f64,
}

/// A noisy incidence estimate together with the covariance of its error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidenceEstimate {
    /// Not re-normalized.
    pub r_hat: Vec3,
    pub mu_max: f64,
    pub covariance: Mat3,
}

/// One receiver head at a known position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoaEstimator {
    position: Vec3,
    normals: Mat4x3,
    left_inverse: Mat3x4,
    optimal: bool,
}

impl AoaEstimator {
    pub fn new(position: Vec3, normals: Mat4x3) -> Result<Self> {
        if !position.is_finite() {
            return Err(Error::validation("position", "must be finite"));
        }
        if !normals.rows_are_unit(1e-12) {
            return Err(Error::validation("normals", "rows must be unit vectors"));
        }
        let left_inverse = pseudo_left_inverse(&normals)?;
        Ok(Self {
            position,
            normals,
            left_inverse,
            optimal: normals == optimal_normals(),
        })
    }

    pub fn with_optimal_normals(position: Vec3) -> Self {
        Self::new(position, optimal_normals()).expect("optimal normals are full rank")
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn normals(&self) -> &Mat4x3 {
        &self.normals
    }

    /// `(VᵀV)⁻¹Vᵀ`
    pub fn left_inverse(&self) -> &Mat3x4 {
        &self.left_inverse
    }

    pub fn true_geometry(&self, led: Vec3, led_normal: Vec3) -> Result<HeadGeometry> {
        let offset = led - self.position;
        let distance = offset.norm();
        if distance == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        let incidence = offset * (1.0 / distance);
        let cos_theta = (-incidence).dot(led_normal).clamp(0.0, 1.0);
        Ok(HeadGeometry {
            incidence,
            distance,
            cos_theta,
        })
    }

    /// Noise-free currents `μ_max · V r`, all four photodiodes sharing one
    /// geometry.
    pub fn mean_currents(&self, params: &OpticalParams, mode: ChannelMode, geom: &HeadGeometry) -> [f64; 4] {
        let mu_max = params.peak_current(geom.distance, geom.cos_theta);
        self.normals
            .mul_vec(geom.incidence)
            .map(|cos_phi| mode.apply(mu_max * cos_phi))
    }

    /// Draws one noisy current vector. Each photodiode gets an independent
    /// deviate whose variance follows its own mean current.
    pub fn simulate_currents<R: Rng + ?Sized>(
        &self,
        params: &OpticalParams,
        model: &NoiseModel,
        mode: ChannelMode,
        led: Vec3,
        led_normal: Vec3,
        rng: &mut R,
    ) -> Result<[f64; 4]> {
        let geom = self.true_geometry(led, led_normal)?;
        Ok(self
            .mean_currents(params, mode, &geom)
            .map(|mu| sample_noisy_current(model, mu, rng)))
    }

    /// Least-squares incidence vector `(1/μ_max)(VᵀV)⁻¹Vᵀ·currents`.
    pub fn estimate_incidence(&self, currents: [f64; 4], mu_max: f64) -> Result<Vec3> {
        if !(mu_max > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "peak current must be > 0, got {mu_max:e}"
            )));
        }
        Ok(self.left_inverse.mul_vec4(currents) * (1.0 / mu_max))
    }

    /// Covariance of the incidence error for independent per-PD current
    /// noise, valid for any full-rank normal matrix.
    pub fn noise_covariance(&self, mu_max: f64, per_pd_variances: [f64; 4]) -> Mat3 {
        if self.optimal {
            return incidence_noise_covariance(mu_max, per_pd_variances);
        }
        self.left_inverse
            .weighted_gram(per_pd_variances)
            .scale(1.0 / (mu_max * mu_max))
    }

    /// Per-PD current variances at the true geometry.
    pub fn pd_variances(
        &self,
        params: &OpticalParams,
        model: &NoiseModel,
        mode: ChannelMode,
        geom: &HeadGeometry,
    ) -> [f64; 4] {
        self.mean_currents(params, mode, geom)
            .map(|mu| noise_variance(model, mu))
    }

    /// Simulates one reading and returns the estimate along with the
    /// analytical covariance at the true geometry.
    pub fn observe<R: Rng + ?Sized>(
        &self,
        params: &OpticalParams,
        model: &NoiseModel,
        mode: ChannelMode,
        led: Vec3,
        led_normal: Vec3,
        rng: &mut R,
    ) -> Result<IncidenceEstimate> {
        let geom = self.true_geometry(led, led_normal)?;
        let mu_max = params.peak_current(geom.distance, geom.cos_theta);
        let currents = self
            .mean_currents(params, mode, &geom)
            .map(|mu| sample_noisy_current(model, mu, rng));
        let r_hat = self.estimate_incidence(currents, mu_max)?;
        let covariance = self.noise_covariance(mu_max, self.pd_variances(params, model, mode, &geom));
        Ok(IncidenceEstimate {
            r_hat,
            mu_max,
            covariance,
        })
    }
}

/// Closed-form incidence-error covariance for the optimal normal matrix.
///
/// With `c = 6 / (16 μ_max²)` the entries are `c(σ₄²+σ₂²)`, `c(σ₁²+σ₃²)`,
/// `(c/2)Σσ²` on the diagonal, `(c/√2)(σ₄²−σ₂²)` at (1,3),
/// `(c/√2)(σ₁²−σ₃²)` at (2,3) and zero at (1,2).
pub fn incidence_noise_covariance(mu_max: f64, per_pd_variances: [f64; 4]) -> Mat3 {
    let [s1, s2, s3, s4] = per_pd_variances;
    let c = 6.0 / (16.0 * mu_max * mu_max);
    let xz = c * FRAC_1_SQRT_2 * (s4 - s2);
    let yz = c * FRAC_1_SQRT_2 * (s1 - s3);
    Mat3([
        [c * (s4 + s2), 0.0, xz],
        [0.0, c * (s1 + s3), yz],
        [xz, yz, 0.5 * c * (s1 + s2 + s3 + s4)],
    ])
}
