//! First-order propagation of incidence-vector noise into the position
//! estimate.
//!
//! The estimate `t̂(r1, r2)` is linearized at the true incidence vectors:
//! `e_r ≈ Σ_k (∂t̂/∂r_k) n_k`, so with independent heads
//! `E{e_r e_rᵀ} = Σ_k J_k C_k J_kᵀ` and `e_ps = √tr(E{e_r e_rᵀ})`.

use crate::aoa::HeadGeometry;
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::localizer::{gram_and_projections, solve_distances, TriangulationInputs};
use crate::scene::Scene;

/// Row-vector gradients of the ray parameters with respect to each
/// incidence vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceJacobians {
    pub dd1_dr1: Vec3,
    pub dd2_dr1: Vec3,
    pub dd1_dr2: Vec3,
    pub dd2_dr2: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianPair {
    pub dt_dr1: Mat3,
    pub dt_dr2: Mat3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// `E{e_r e_rᵀ}`, m².
    pub covariance: Mat3,
    /// m
    pub e_ps: f64,
}

/// Everything that goes into an [`ErrorReport`] at one LED position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBreakdown {
    pub report: ErrorReport,
    pub heads: [HeadGeometry; 2],
    pub peak_currents: [f64; 2],
    pub incidence_covariances: [Mat3; 2],
    pub jacobians: JacobianPair,
}

pub fn distance_jacobians(inp: &TriangulationInputs, degeneracy_threshold: f64) -> Result<DistanceJacobians> {
    let g = gram_and_projections(inp);
    // validates the discriminant
    solve_distances(&g, degeneracy_threshold)?;
    let (r1, r2, b) = (inp.r1, inp.r2, inp.baseline());
    let den = g.discriminant();
    let den2 = den * den;
    let num1 = g.c3 * g.f1 - g.c2 * g.f2;
    let num2 = g.c2 * g.f1 - g.c1 * g.f2;

    let dden_dr1 = r1 * (2.0 * g.c3) - r2 * (2.0 * g.c2);
    let dden_dr2 = r2 * (2.0 * g.c1) - r1 * (2.0 * g.c2);

    Ok(DistanceJacobians {
        dd1_dr1: dden_dr1 * (-num1 / den2) + (b * g.c3 - r2 * g.f2) * (1.0 / den),
        dd2_dr1: dden_dr1 * (-num2 / den2) + (b * g.c2 + r2 * g.f1 - r1 * (2.0 * g.f2)) * (1.0 / den),
        dd1_dr2: dden_dr2 * (-num1 / den2) + (r2 * (2.0 * g.f1) - b * g.c2 - r1 * g.f2) * (1.0 / den),
        dd2_dr2: dden_dr2 * (-num2 / den2) + (r1 * g.f1 - b * g.c1) * (1.0 / den),
    })
}

/// `∂t̂/∂r_k = ½(r1·∂d1/∂r_k + d_k·I₃ + r2·∂d2/∂r_k)`.
pub fn estimate_jacobians(inp: &TriangulationInputs, degeneracy_threshold: f64) -> Result<JacobianPair> {
    let dj = distance_jacobians(inp, degeneracy_threshold)?;
    let (d1, d2) = solve_distances(&gram_and_projections(inp), degeneracy_threshold)?;
    let half =
        |dd1: Vec3, dd2: Vec3, dk: f64| (inp.r1.outer(dd1) + Mat3::IDENTITY.scale(dk) + inp.r2.outer(dd2)).scale(0.5);
    Ok(JacobianPair {
        dt_dr1: half(dj.dd1_dr1, dj.dd2_dr1, d1),
        dt_dr2: half(dj.dd1_dr2, dj.dd2_dr2, d2),
    })
}

/// `J1 C1 J1ᵀ + J2 C2 J2ᵀ`; the heads' noises are taken as independent.
pub fn error_covariance(jac: &JacobianPair, c1: &Mat3, c2: &Mat3) -> Mat3 {
    let m = jac.dt_dr1.congruence(c1) + jac.dt_dr2.congruence(c2);
    // symmetrize away rounding
    Mat3::from_fn(|i, j| 0.5 * (m.0[i][j] + m.0[j][i]))
}

/// Root of the covariance trace.
pub fn e_ps(cov: &Mat3) -> Result<f64> {
    let tr = cov.trace();
    if tr < -1e-18 || tr.is_nan() {
        return Err(Error::NegativeTrace(tr));
    }
    Ok(tr.max(0.0).sqrt())
}

pub fn theoretical_breakdown(scene: &Scene, led: Vec3) -> Result<ErrorBreakdown> {
    let mut heads = [None; 2];
    let mut peak_currents = [0.0; 2];
    let mut incidence_covariances = [Mat3::ZERO; 2];
    for (k, est) in scene.estimators.iter().enumerate() {
        let geom = est.true_geometry(led, scene.led_normal)?;
        let mu_max = scene.optics.peak_current(geom.distance, geom.cos_theta);
        let vars = est.pd_variances(&scene.optics, &scene.noise, scene.mode, &geom);
        incidence_covariances[k] = if scene.noise.is_noiseless() {
            Mat3::ZERO
        } else {
            if !(mu_max > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "head {} receives no light (peak current {mu_max:e})",
                    k + 1
                )));
            }
            est.noise_covariance(mu_max, vars)
        };
        peak_currents[k] = mu_max;
        heads[k] = Some(geom);
    }
    let heads = heads.map(|h| h.expect("both heads evaluated"));
    let inp = TriangulationInputs::new(scene.a1(), scene.a2(), heads[0].incidence, heads[1].incidence);
    if !(inp.baseline().norm() > scene.localizer.min_separation) {
        return Err(Error::DegenerateGeometry("estimators coincide".into()));
    }
    let jacobians = estimate_jacobians(&inp, scene.localizer.degeneracy_threshold)?;
    let covariance = error_covariance(&jacobians, &incidence_covariances[0], &incidence_covariances[1]);
    let e_ps = e_ps(&covariance)?;
    Ok(ErrorBreakdown {
        report: ErrorReport { covariance, e_ps },
        heads,
        peak_currents,
        incidence_covariances,
        jacobians,
    })
}

/// Predicted error covariance and `e_ps` for an LED at `led`, with Jacobians
/// evaluated at the true incidence vectors.
pub fn theoretical_error_at(scene: &Scene, led: Vec3) -> Result<ErrorReport> {
    theoretical_breakdown(scene, led).map(|b| b.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{NoiseModel, OpticalParams};
    use crate::localizer::{gram_terms, triangulate, LocalizerConfig, Scalar, DEFAULT_DEGENERACY_THRESHOLD};
    use crate::testing::{finite_difference_jacobians, max_relative_jacobian_error, DoubleDouble};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TH: f64 = DEFAULT_DEGENERACY_THRESHOLD;

    fn fig3_scene() -> Scene {
        Scene::new(
            Vec3::new(0.0, 2.0, 0.0),
            Vec3::new(4.0, 2.0, 0.0),
            OpticalParams::new(5000.0, 1.0, 15e-6, 22e-9).unwrap(),
            NoiseModel::default(),
        )
        .unwrap()
    }

    fn fig3_inputs(led: Vec3) -> TriangulationInputs {
        let a1 = Vec3::new(0.0, 2.0, 0.0);
        let a2 = Vec3::new(4.0, 2.0, 0.0);
        TriangulationInputs::new(
            a1,
            a2,
            (led - a1).normalized().unwrap(),
            (led - a2).normalized().unwrap(),
        )
    }

    fn random_inputs(rng: &mut ChaCha8Rng) -> TriangulationInputs {
        loop {
            let a1 = Vec3::new(rng.random_range(0.0..4.0), rng.random_range(0.0..4.0), 0.0);
            let a2 = Vec3::new(rng.random_range(0.0..4.0), rng.random_range(0.0..4.0), 0.0);
            if (a2 - a1).norm() < 0.5 {
                continue;
            }
            let t = Vec3::new(rng.random_range(0.0..4.0), rng.random_range(0.0..4.0), 4.0);
            return TriangulationInputs::new(a1, a2, (t - a1).normalized().unwrap(), (t - a2).normalized().unwrap());
        }
    }

    fn fd_distances(inp: &TriangulationInputs, which: usize, h: f64) -> [Vec3; 2] {
        // [∂d1/∂r_which, ∂d2/∂r_which], differenced in double-double
        let base = inp.components::<DoubleDouble>();
        let step = DoubleDouble::new(h);
        let mut g1 = [0.0; 3];
        let mut g2 = [0.0; 3];
        for i in 0..3 {
            let (mut p, mut m) = (base, base);
            if which == 1 {
                p.r1[i] = p.r1[i] + step;
                m.r1[i] = m.r1[i] - step;
            } else {
                p.r2[i] = p.r2[i] + step;
                m.r2[i] = m.r2[i] - step;
            }
            let (p1, p2) = solve_distances(&gram_terms(&p), TH).unwrap();
            let (m1, m2) = solve_distances(&gram_terms(&m), TH).unwrap();
            let two_h = DoubleDouble::new(2.0 * h);
            g1[i] = ((p1 - m1) / two_h).to_f64();
            g2[i] = ((p2 - m2) / two_h).to_f64();
        }
        [Vec3::from_array(g1), Vec3::from_array(g2)]
    }

    fn assert_rel(a: Vec3, b: Vec3, tol: f64) {
        for i in 0..3 {
            if b[i].abs() > 1e-8 {
                let rel = (a[i] - b[i]).abs() / b[i].abs();
                assert!(rel < tol, "component {i}: {} vs {} (rel {rel})", a[i], b[i]);
            }
        }
    }

    #[test]
    fn distance_jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let inp = random_inputs(&mut rng);
            let dj = distance_jacobians(&inp, TH).unwrap();
            let [f11, f21] = fd_distances(&inp, 1, 1e-7);
            let [f12, f22] = fd_distances(&inp, 2, 1e-7);
            assert_rel(dj.dd1_dr1, f11, 1e-5);
            assert_rel(dj.dd2_dr1, f21, 1e-5);
            assert_rel(dj.dd1_dr2, f12, 1e-5);
            assert_rel(dj.dd2_dr2, f22, 1e-5);
        }
    }

    #[test]
    fn unit_norm_simplification_cross_check() {
        // with c1 = c3 = 1: ∂d1/∂r1 = -d1·2(r1 - c2 r2)/D + (b - f2 r2)/D
        let inp = fig3_inputs(Vec3::new(1.3, 0.7, 4.0));
        let g = gram_and_projections(&inp);
        let (d1, _) = solve_distances(&g, TH).unwrap();
        let den = g.discriminant();
        let simple = (inp.r1 - inp.r2 * g.c2) * (-2.0 * d1 / den) + (inp.baseline() - inp.r2 * g.f2) * (1.0 / den);
        let dj = distance_jacobians(&inp, TH).unwrap();
        assert!((simple - dj.dd1_dr1).norm() < 1e-12);
    }

    #[test]
    fn mirror_symmetry_of_distance_jacobians() {
        // reflection x -> 4 - x swaps the heads
        let inp = fig3_inputs(Vec3::new(2.0, 2.0, 4.0));
        let dj = distance_jacobians(&inp, TH).unwrap();
        let flip = |v: Vec3| Vec3::new(-v.x, v.y, v.z);
        // d1 and d2 swap; the baseline reverses, so ∂d2/∂r2 = mirror(∂d1/∂r1)
        assert!((dj.dd2_dr2 - flip(dj.dd1_dr1)).norm() < 1e-12);
        assert!((dj.dd1_dr2 - flip(dj.dd2_dr1)).norm() < 1e-12);
    }

    #[test]
    fn distance_jacobians_scale_with_baseline() {
        let inp = fig3_inputs(Vec3::new(1.1, 2.9, 4.0));
        let lambda = 2.5;
        let scaled = TriangulationInputs::new(inp.a1, inp.a1 + inp.baseline() * lambda, inp.r1, inp.r2);
        let a = distance_jacobians(&inp, TH).unwrap();
        let b = distance_jacobians(&scaled, TH).unwrap();
        for (x, y) in [
            (a.dd1_dr1, b.dd1_dr1),
            (a.dd2_dr1, b.dd2_dr1),
            (a.dd1_dr2, b.dd1_dr2),
            (a.dd2_dr2, b.dd2_dr2),
        ] {
            assert!((x * lambda - y).norm() <= 1e-13 * y.norm());
        }
    }

    #[test]
    fn estimate_jacobians_match_finite_differences() {
        let cfg = LocalizerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let inp = random_inputs(&mut rng);
            let jac = estimate_jacobians(&inp, TH).unwrap();
            let fd = finite_difference_jacobians(&inp, 1e-7, &cfg).unwrap();
            let worst = max_relative_jacobian_error(&jac, &fd, 1e-8);
            assert!(worst < 1e-5, "worst relative error {worst:e}");
        }
    }

    #[test]
    fn double_precision_fd_agrees_loosely() {
        // plain f64 differencing has a round-off floor near 1e-8 absolute
        let cfg = LocalizerConfig::default();
        let inp = fig3_inputs(Vec3::new(0.7, 3.1, 4.0));
        let jac = estimate_jacobians(&inp, TH).unwrap();
        let h = 1e-6;
        for col in 0..3 {
            let mut e = [0.0; 3];
            e[col] = h;
            let e = Vec3::from_array(e);
            let (mut p, mut m) = (inp, inp);
            p.r1 += e;
            m.r1 = m.r1 - e;
            let fd = (triangulate(&p, &cfg).unwrap().t_hat - triangulate(&m, &cfg).unwrap().t_hat) * (0.5 / h);
            for row in 0..3 {
                assert!((fd[row] - jac.dt_dr1.0[row][col]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn vertical_ray_jacobian_has_dominant_identity_term() {
        // LED straight above head 1, head 2 far away: ∂t̂/∂r1 ≈ ½ d1 I on the
        // components orthogonal to r1
        let inp = fig3_inputs(Vec3::new(0.0, 2.0, 4.0));
        let jac = estimate_jacobians(&inp, TH).unwrap();
        let (d1, _) = solve_distances(&gram_and_projections(&inp), TH).unwrap();
        assert!((d1 - 4.0).abs() < 1e-12);
        // y is orthogonal to both rays, so only the identity term survives
        assert!((jac.dt_dr1.0[1][1] - 0.5 * d1).abs() < 1e-12);
        assert!(jac.dt_dr1.0[1][0].abs() < 1e-12 && jac.dt_dr1.0[1][2].abs() < 1e-12);
    }

    #[test]
    fn zero_perturbation_keeps_estimate() {
        let cfg = LocalizerConfig::default();
        let inp = fig3_inputs(Vec3::new(3.0, 1.0, 4.0));
        let t0 = triangulate(&inp, &cfg).unwrap().t_hat;
        let jac = estimate_jacobians(&inp, TH).unwrap();
        let predicted = t0 + jac.dt_dr1.mul_vec(Vec3::ZERO) + jac.dt_dr2.mul_vec(Vec3::ZERO);
        assert_eq!(predicted, t0);
        assert!((t0 - Vec3::new(3.0, 1.0, 4.0)).norm() < 1e-12);
    }

    #[test]
    fn covariance_examples() {
        let inp = fig3_inputs(Vec3::new(1.0, 3.0, 4.0));
        let jac = estimate_jacobians(&inp, TH).unwrap();
        assert_eq!(error_covariance(&jac, &Mat3::ZERO, &Mat3::ZERO), Mat3::ZERO);
        let s2 = 3e-6;
        let got = error_covariance(&jac, &Mat3::IDENTITY.scale(s2), &Mat3::ZERO);
        let want = jac.dt_dr1.mul_mat(&jac.dt_dr1.transpose()).scale(s2);
        assert!(got.max_abs_diff(&want) < 1e-18);
    }

    #[test]
    fn e_ps_examples() {
        assert!((e_ps(&Mat3::IDENTITY).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!((e_ps(&Mat3::diag([4e-4, 0.0, 0.0])).unwrap() - 0.02).abs() < 1e-15);
        assert!(matches!(
            e_ps(&Mat3::diag([-1e-10, 0.0, 0.0])),
            Err(Error::NegativeTrace(_))
        ));
        // tiny negative rounding is tolerated
        assert_eq!(e_ps(&Mat3::diag([-1e-20, 0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn noiseless_theory_is_zero() {
        let scene = fig3_scene().with_noise(NoiseModel::noiseless());
        for &(x, y) in &[(0.0, 0.0), (2.0, 2.0), (3.5, 1.0)] {
            let rep = theoretical_error_at(&scene, Vec3::new(x, y, 4.0)).unwrap();
            assert_eq!(rep.e_ps, 0.0);
        }
    }

    #[test]
    fn report_invariants_and_mirror_symmetry() {
        let scene = fig3_scene();
        for i in 0..=8 {
            for j in 0..=8 {
                let (x, y) = (0.5 * i as f64, 0.5 * j as f64);
                let a = theoretical_breakdown(&scene, Vec3::new(x, y, 4.0)).unwrap();
                let b = theoretical_error_at(&scene, Vec3::new(4.0 - x, y, 4.0)).unwrap();
                let c = a.report.covariance;
                assert!(c.max_abs_diff(&c.transpose()) <= 1e-12 * c.max_abs());
                assert!(c.is_psd(1e-12 * c.max_abs()));
                assert_eq!(a.report.e_ps, c.trace().sqrt());
                assert!((a.report.e_ps - b.e_ps).abs() < 1e-12, "({x},{y})");
            }
        }
    }
}
