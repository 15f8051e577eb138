//! Test oracles. Compiled for unit tests and behind the `test-support`
//! feature for downstream test suites.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use crate::error::Result;
use crate::error_analysis::JacobianPair;
use crate::linalg::{Mat3, Vec3};
use crate::localizer::{triangulate_components, LocalizerConfig, RayComponents, Scalar, TriangulationInputs};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, roughly 106 bits of
/// significand.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const fn new(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + DoubleDouble { hi: -o.hi, lo: -o.lo }
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self - o * DoubleDouble::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * DoubleDouble::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo } + DoubleDouble::new(q3)
    }
}

impl fmt::LowerExp for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerExp::fmt(&(self.hi + self.lo), f)
    }
}

impl Scalar for DoubleDouble {
    fn from_f64(v: f64) -> Self {
        DoubleDouble::new(v)
    }
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Central finite differences of the midpoint triangulation with respect to
/// each component of `r1` and `r2`, evaluated in double-double arithmetic.
pub fn finite_difference_jacobians(
    inp: &TriangulationInputs,
    step: f64,
    cfg: &LocalizerConfig,
) -> Result<JacobianPair> {
    let base: RayComponents<DoubleDouble> = inp.components();
    let h = DoubleDouble::new(step);
    let two_h = DoubleDouble::new(2.0 * step);
    let mut out = [Mat3::ZERO; 2];
    for (k, jac) in out.iter_mut().enumerate() {
        for col in 0..3 {
            let (mut plus, mut minus) = (base, base);
            let (p, m) = if k == 0 {
                (&mut plus.r1, &mut minus.r1)
            } else {
                (&mut plus.r2, &mut minus.r2)
            };
            p[col] = p[col] + h;
            m[col] = m[col] - h;
            let (tp, ..) = triangulate_components(&plus, cfg)?;
            let (tm, ..) = triangulate_components(&minus, cfg)?;
            for row in 0..3 {
                jac.0[row][col] = ((tp[row] - tm[row]) / two_h).to_f64();
            }
        }
    }
    Ok(JacobianPair {
        dt_dr1: out[0],
        dt_dr2: out[1],
    })
}

/// Worst relative error between analytical and finite-difference Jacobian
/// entries whose analytical magnitude exceeds `floor`.
pub fn max_relative_jacobian_error(analytical: &JacobianPair, numeric: &JacobianPair, floor: f64) -> f64 {
    let pairs = [(analytical.dt_dr1, numeric.dt_dr1), (analytical.dt_dr2, numeric.dt_dr2)];
    pairs
        .iter()
        .flat_map(|(a, n)| {
            a.0.iter()
                .flatten()
                .zip(n.0.iter().flatten())
                .filter(|(x, _)| x.abs() > floor)
                .map(|(x, y)| (x - y).abs() / x.abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// Unit incidence vectors from both heads to `led`.
pub fn exact_inputs(a1: Vec3, a2: Vec3, led: Vec3) -> TriangulationInputs {
    TriangulationInputs::new(
        a1,
        a2,
        (led - a1).normalized().expect("led differs from a1"),
        (led - a2).normalized().expect("led differs from a2"),
    )
}
