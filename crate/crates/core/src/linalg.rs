//! Fixed-size dense linear algebra for the handful of shapes the estimator
//! needs: 3-vectors, 2x2, 3x3, 4x3 and 3x4 matrices.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute threshold on `|det|` below which a 2x2 matrix is singular.
pub const DEFAULT_SINGULARITY_THRESHOLD: f64 = 1e-12;

/// Relative threshold on `det(VᵀV) / ‖VᵀV‖³` used to reject rank-deficient
/// normal matrices.
const RANK_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Builds a direction, rejecting inputs whose norm deviates from one by
    /// more than `1e-12`.
    pub fn unit(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = Self::new(x, y, z);
        if !v.is_finite() || (v.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidGeometry(format!("direction {v:?} is not unit length")));
        }
        Ok(v)
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Outer product `self · otherᵀ`.
    pub fn outer(self, other: Vec3) -> Mat3 {
        let a = self.to_array();
        let b = other.to_array();
        Mat3::from_fn(|i, j| a[i] * b[j])
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::from_array(a)
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn mul_mat(&self, o: &Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

/// Inverts a 2x2 matrix by the adjugate formula.
///
/// Fails with [`Error::SingularMatrix`] when `|det| <= threshold`.
pub fn mat2_inverse(m: &Mat2, threshold: f64) -> Result<Mat2> {
    let det = m.det();
    if !(det.abs() > threshold) {
        return Err(Error::SingularMatrix { det, threshold });
    }
    let [[a, b], [c, d]] = m.0;
    let inv = 1.0 / det;
    Ok(Mat2([[d * inv, -b * inv], [-c * inv, a * inv]]))
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        }
        Mat3(m)
    }

    pub fn diag(d: [f64; 3]) -> Mat3 {
        Mat3::from_fn(|i, j| if i == j { d[i] } else { 0.0 })
    }

    pub fn from_rows(rows: [Vec3; 3]) -> Mat3 {
        Mat3::from_fn(|i, j| rows[i][j])
    }

    pub fn from_cols(cols: [Vec3; 3]) -> Mat3 {
        Mat3::from_fn(|i, j| cols[j][i])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.0[i])
    }

    pub fn transpose(&self) -> Mat3 {
        Mat3::from_fn(|i, j| self.0[j][i])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        Mat3::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        Mat3::from_fn(|i, j| (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum())
    }

    /// Adjugate inverse; `None` when the determinant is exactly zero.
    pub fn inverse(&self) -> Option<Mat3> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let m = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let adj = Mat3([
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ]);
        Some(adj.scale(1.0 / det))
    }

    /// `self · c · selfᵀ`, the congruence used to push covariances through a
    /// linear map.
    pub fn congruence(&self, c: &Mat3) -> Mat3 {
        self.mul_mat(c).mul_mat(&self.transpose())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, o: &Mat3) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(o.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Positive semi-definiteness of a symmetric matrix via Sylvester-style
    /// checks on all principal minors, with absolute slack `tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let m = &self.0;
        let diag_ok = (0..3).all(|i| m[i][i] >= -tol);
        let minors2 = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .all(|&(i, j)| m[i][i] * m[j][j] - m[i][j] * m[j][i] >= -tol);
        diag_ok && minors2 && self.det() >= -tol
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        Mat3::from_fn(|i, j| self.0[i][j] + o.0[i][j])
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        Mat3::from_fn(|i, j| self.0[i][j] - o.0[i][j])
    }
}

/// Four rows of three columns; holds the photodiode normal matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4x3(pub [[f64; 3]; 4]);

impl Mat4x3 {
    pub fn from_rows(rows: [Vec3; 4]) -> Self {
        Mat4x3(rows.map(Vec3::to_array))
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.0[i])
    }

    pub fn rows(&self) -> [Vec3; 4] {
        [self.row(0), self.row(1), self.row(2), self.row(3)]
    }

    pub fn scale(&self, s: f64) -> Mat4x3 {
        Mat4x3(self.0.map(|r| r.map(|v| v * s)))
    }

    pub fn mul_vec(&self, v: Vec3) -> [f64; 4] {
        [0, 1, 2, 3].map(|i| self.row(i).dot(v))
    }

    /// `VᵀV`
    pub fn gram(&self) -> Mat3 {
        Mat3::from_fn(|i, j| self.0.iter().map(|r| r[i] * r[j]).sum())
    }

    pub fn transpose(&self) -> Mat3x4 {
        let mut out = [[0.0; 4]; 3];
        for (q, r) in self.0.iter().enumerate() {
            for (i, v) in r.iter().enumerate() {
                out[i][q] = *v;
            }
        }
        Mat3x4(out)
    }

    pub fn rows_are_unit(&self, tol: f64) -> bool {
        self.rows().iter().all(|r| (r.norm() - 1.0).abs() <= tol)
    }
}

/// Three rows of four columns; the shape of a left inverse of [`Mat4x3`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3x4(pub [[f64; 4]; 3]);

impl Mat3x4 {
    pub fn mul_vec4(&self, v: [f64; 4]) -> Vec3 {
        let r = |i: usize| self.0[i].iter().zip(v).map(|(a, b)| a * b).sum();
        Vec3::new(r(0), r(1), r(2))
    }

    pub fn mul_mat4x3(&self, o: &Mat4x3) -> Mat3 {
        Mat3::from_fn(|i, j| (0..4).map(|k| self.0[i][k] * o.0[k][j]).sum())
    }

    pub fn scale(&self, s: f64) -> Mat3x4 {
        Mat3x4(self.0.map(|r| r.map(|v| v * s)))
    }

    /// `self · diag(d) · selfᵀ`
    pub fn weighted_gram(&self, d: [f64; 4]) -> Mat3 {
        Mat3::from_fn(|i, j| (0..4).map(|k| self.0[i][k] * d[k] * self.0[j][k]).sum())
    }

    pub fn max_abs_diff(&self, o: &Mat3x4) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(o.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Least-squares left inverse `(VᵀV)⁻¹Vᵀ` of a full-column-rank 4x3 matrix.
pub fn pseudo_left_inverse(v: &Mat4x3) -> Result<Mat3x4> {
    let gram = v.gram();
    let scale = gram.frobenius_norm();
    if !(scale > 0.0) || !(gram.det().abs() > RANK_THRESHOLD * scale.powi(3)) {
        return Err(Error::RankDeficient);
    }
    let inv = gram.inverse().ok_or(Error::RankDeficient)?;
    let vt = v.transpose();
    Ok(Mat3x4(std::array::from_fn(|i| {
        std::array::from_fn(|q| (0..3).map(|k| inv.0[i][k] * vt.0[k][q]).sum())
    })))
}
