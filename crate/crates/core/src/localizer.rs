//! Two-ray least-squares triangulation of the LED position.
//!
//! Each head contributes a ray `a_k + d_k r_k`. The ray parameters solve
//! `(r1, r2)·(d1, −d2)ᵀ = a2 − a1` in the least-squares sense and the
//! estimate is the midpoint of the two resulting points.

use std::fmt::LowerExp;
use std::ops::{Add, Div, Mul, Sub};

use crate::error::{Error, Result};
use crate::linalg::{mat2_inverse, Mat2, Vec3, DEFAULT_SINGULARITY_THRESHOLD};

/// Default lower bound on `c1·c3 − c2²`.
pub const DEFAULT_DEGENERACY_THRESHOLD: f64 = 1e-9;
/// Default minimum distance between the two heads, m.
pub const DEFAULT_MIN_SEPARATION: f64 = 1e-6;

/// Real arithmetic the triangulation is written against. Implemented for
/// `f64`; higher-precision types let test oracles run the identical
/// algorithm with less round-off.
pub trait Scalar:
    Copy + PartialOrd + LowerExp + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

fn dot<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub3<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizerConfig {
    pub degeneracy_threshold: f64,
    pub min_separation: f64,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        Self {
            degeneracy_threshold: DEFAULT_DEGENERACY_THRESHOLD,
            min_separation: DEFAULT_MIN_SEPARATION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangulationInputs {
    pub a1: Vec3,
    pub a2: Vec3,
    /// Possibly non-unit when estimated from noisy currents.
    pub r1: Vec3,
    pub r2: Vec3,
}

impl TriangulationInputs {
    pub fn new(a1: Vec3, a2: Vec3, r1: Vec3, r2: Vec3) -> Self {
        Self { a1, a2, r1, r2 }
    }

    pub fn baseline(&self) -> Vec3 {
        self.a2 - self.a1
    }

    pub fn components<T: Scalar>(&self) -> RayComponents<T> {
        let c = |v: Vec3| v.to_array().map(T::from_f64);
        RayComponents {
            a1: c(self.a1),
            a2: c(self.a2),
            r1: c(self.r1),
            r2: c(self.r2),
        }
    }
}

/// Triangulation inputs as raw components in an arbitrary [`Scalar`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayComponents<T> {
    pub a1: [T; 3],
    pub a2: [T; 3],
    pub r1: [T; 3],
    pub r2: [T; 3],
}

/// Gram entries of `A = (r1, r2)` and the projections of the baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramTerms<T = f64> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub f1: T,
    pub f2: T,
}

impl<T: Scalar> GramTerms<T> {
    pub fn discriminant(&self) -> T {
        self.c1 * self.c3 - self.c2 * self.c2
    }
}

impl GramTerms<f64> {
    pub fn ata(&self) -> Mat2 {
        Mat2([[self.c1, self.c2], [self.c2, self.c3]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangulationResult {
    pub t_hat: Vec3,
    pub d1: f64,
    pub d2: f64,
    pub gram: GramTerms,
    /// Set when either ray parameter is negative, i.e. the closest point lies
    /// behind a head.
    pub behind_estimator: bool,
}

pub fn gram_terms<T: Scalar>(rc: &RayComponents<T>) -> GramTerms<T> {
    let b = sub3(&rc.a2, &rc.a1);
    GramTerms {
        c1: dot(&rc.r1, &rc.r1),
        c2: dot(&rc.r1, &rc.r2),
        c3: dot(&rc.r2, &rc.r2),
        f1: dot(&rc.r1, &b),
        f2: dot(&rc.r2, &b),
    }
}

pub fn gram_and_projections(inp: &TriangulationInputs) -> GramTerms {
    gram_terms(&inp.components::<f64>())
}

/// Ray parameters `(d1, d2)` from the closed-form 2x2 solve.
pub fn solve_distances<T: Scalar>(g: &GramTerms<T>, degeneracy_threshold: f64) -> Result<(T, T)> {
    let det = g.discriminant();
    if !(det > T::from_f64(degeneracy_threshold)) {
        return Err(Error::DegenerateGeometry(format!(
            "c1*c3 - c2^2 = {det:e} <= {degeneracy_threshold:e}"
        )));
    }
    let d1 = (g.c3 * g.f1 - g.c2 * g.f2) / det;
    let d2 = (g.c2 * g.f1 - g.c1 * g.f2) / det;
    Ok((d1, d2))
}

fn check_separation<T: Scalar>(rc: &RayComponents<T>, cfg: &LocalizerConfig) -> Result<()> {
    let b = sub3(&rc.a2, &rc.a1);
    let sep = dot(&b, &b).to_f64().sqrt();
    if !(sep > cfg.min_separation) {
        return Err(Error::DegenerateGeometry(format!(
            "estimator separation {sep:e} m <= {:e} m",
            cfg.min_separation
        )));
    }
    Ok(())
}

/// Midpoint estimate and ray parameters in any [`Scalar`]; [`triangulate`]
/// is this function at `f64`.
pub fn triangulate_components<T: Scalar>(
    rc: &RayComponents<T>,
    cfg: &LocalizerConfig,
) -> Result<([T; 3], T, T, GramTerms<T>)> {
    check_separation(rc, cfg)?;
    let gram = gram_terms(rc);
    let (d1, d2) = solve_distances(&gram, cfg.degeneracy_threshold)?;
    let half = T::from_f64(0.5);
    let t_hat = std::array::from_fn(|i| (rc.a1[i] + rc.r1[i] * d1 + rc.a2[i] + rc.r2[i] * d2) * half);
    Ok((t_hat, d1, d2, gram))
}

pub fn triangulate(inp: &TriangulationInputs, cfg: &LocalizerConfig) -> Result<TriangulationResult> {
    let (t_hat, d1, d2, gram) = triangulate_components(&inp.components::<f64>(), cfg)?;
    Ok(TriangulationResult {
        t_hat: Vec3::from_array(t_hat),
        d1,
        d2,
        gram,
        behind_estimator: d1 < 0.0 || d2 < 0.0,
    })
}

/// The same estimate written as
/// `(a1+a2)/2 + ½·A·diag(1,−1)·(AᵀA)⁻¹Aᵀ(a2−a1)`, going through an explicit
/// 2x2 inverse.
pub fn triangulate_matrix_form(inp: &TriangulationInputs, cfg: &LocalizerConfig) -> Result<Vec3> {
    check_separation(&inp.components::<f64>(), cfg)?;
    let g = gram_and_projections(inp);
    if !(g.discriminant() > cfg.degeneracy_threshold) {
        return Err(Error::DegenerateGeometry(format!(
            "c1*c3 - c2^2 = {:e}",
            g.discriminant()
        )));
    }
    let inv = mat2_inverse(&g.ata(), DEFAULT_SINGULARITY_THRESHOLD)?.0;
    let x1 = inv[0][0] * g.f1 + inv[0][1] * g.f2;
    let x2 = inv[1][0] * g.f1 + inv[1][1] * g.f2;
    // diag(1, -1) flips the second component back to +d2
    let offset = inp.r1 * x1 - inp.r2 * x2;
    Ok((inp.a1 + inp.a2) * 0.5 + offset * 0.5)
}
