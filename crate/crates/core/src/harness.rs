//! Monte Carlo experiments: end-to-end trials, per-point RMS error and
//! reproducible grid sweeps.
//!
//! Every grid point draws from its own ChaCha8 stream, keyed by the sweep
//! seed with the point index as stream id. Trials within a point consume
//! that stream sequentially, so results do not depend on how points are
//! scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::error_analysis::theoretical_error_at;
use crate::linalg::Vec3;
use crate::localizer::{triangulate, TriangulationInputs};
use crate::scene::Scene;

pub const DEFAULT_TRIALS: usize = 20_000;
pub const DEFAULT_STEP: f64 = 0.25;

/// A regular grid of LED positions at a fixed height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub step: f64,
    pub height: f64,
}

impl Grid {
    fn axis(min: f64, max: f64, step: f64) -> Vec<f64> {
        let n = ((max - min) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| min + step * i as f64).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        Self::axis(self.x_min, self.x_max, self.step)
    }

    pub fn ys(&self) -> Vec<f64> {
        Self::axis(self.y_min, self.y_max, self.step)
    }

    /// Points ordered by y, then x, ascending.
    pub fn points(&self) -> Vec<Vec3> {
        let xs = self.xs();
        self.ys()
            .into_iter()
            .flat_map(|y| xs.iter().map(move |&x| Vec3::new(x, y, self.height)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::validation("experiment.step", "must be > 0"));
        }
        if !(self.x_max >= self.x_min) || !(self.y_max >= self.y_min) {
            return Err(Error::validation("experiment", "grid max must not be below min"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSpec {
    pub scene: Scene,
    pub grid: Grid,
    pub trials_per_point: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalError {
    pub e_ps: f64,
    pub std_err: f64,
    pub valid_trials: usize,
    pub degenerate_trials: usize,
}

/// One grid point of a sweep. Failed computations are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub led: Vec3,
    pub e_ps_theory: f64,
    pub e_ps_mc: f64,
    pub mc_std_err: f64,
    pub valid_trials: usize,
    pub degenerate_trials: usize,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSweepResult {
    pub records: Vec<PointRecord>,
}

impl GridSweepResult {
    pub fn is_complete(&self) -> bool {
        self.records.iter().all(|r| r.errors.is_empty())
    }
}

/// One end-to-end measurement: noisy currents at both heads, LS incidence
/// recovery, triangulation.
pub fn run_trial<R: Rng + ?Sized>(scene: &Scene, led: Vec3, rng: &mut R) -> Result<Vec3> {
    let [h1, h2] = &scene.estimators;
    let o1 = h1.observe(&scene.optics, &scene.noise, scene.mode, led, scene.led_normal, rng)?;
    let o2 = h2.observe(&scene.optics, &scene.noise, scene.mode, led, scene.led_normal, rng)?;
    let inp = TriangulationInputs::new(h1.position(), h2.position(), o1.r_hat, o2.r_hat);
    Ok(triangulate(&inp, &scene.localizer)?.t_hat)
}

/// RMS position error over `n_trials` trials. Degenerate trials are counted
/// and excluded; the standard error follows from the sample variance of the
/// squared error by the delta method.
pub fn empirical_eps<R: Rng + ?Sized>(
    scene: &Scene,
    led: Vec3,
    n_trials: usize,
    rng: &mut R,
) -> Result<EmpiricalError> {
    if n_trials < 2 {
        return Err(Error::validation("trials", "need at least 2 trials"));
    }
    accumulate_trials(scene, led, n_trials, rng)
}

/// Like [`empirical_eps`] but accepts a single trial, in which case the
/// standard error is `NaN` unless the error is exactly zero.
fn accumulate_trials<R: Rng + ?Sized>(
    scene: &Scene,
    led: Vec3,
    n_trials: usize,
    rng: &mut R,
) -> Result<EmpiricalError> {
    let mut degenerate = 0usize;
    // Welford on the squared error
    let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
    for _ in 0..n_trials {
        match run_trial(scene, led, rng) {
            Ok(t_hat) => {
                let sq = (t_hat - led).norm_squared();
                n += 1;
                let delta = sq - mean;
                mean += delta / n as f64;
                m2 += delta * (sq - mean);
            }
            Err(Error::DegenerateGeometry(_)) => degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    if n == 0 {
        return Err(Error::AllTrialsDegenerate(n_trials));
    }
    let e_ps = mean.sqrt();
    let std_err = if e_ps == 0.0 {
        0.0
    } else if n > 1 {
        let var = m2 / (n - 1) as f64;
        (var / n as f64).sqrt() / (2.0 * e_ps)
    } else {
        f64::NAN
    };
    Ok(EmpiricalError {
        e_ps,
        std_err,
        valid_trials: n,
        degenerate_trials: degenerate,
    })
}

/// Random stream for grid point `index` of a sweep seeded with `seed`.
pub fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn evaluate_point(scene: &Scene, led: Vec3, trials: usize, rng: &mut ChaCha8Rng) -> PointRecord {
    let mut errors = Vec::new();
    let e_ps_theory = match theoretical_error_at(scene, led) {
        Ok(rep) => rep.e_ps,
        Err(e) => {
            errors.push(format!("theory: {e}"));
            f64::NAN
        }
    };
    let (e_ps_mc, mc_std_err, valid_trials, degenerate_trials) = match accumulate_trials(scene, led, trials, rng) {
        Ok(mc) => (mc.e_ps, mc.std_err, mc.valid_trials, mc.degenerate_trials),
        Err(e) => {
            let degenerate = match e {
                Error::AllTrialsDegenerate(n) => n,
                _ => 0,
            };
            errors.push(format!("monte carlo: {e}"));
            (f64::NAN, f64::NAN, 0, degenerate)
        }
    };
    PointRecord {
        led,
        e_ps_theory,
        e_ps_mc,
        mc_std_err,
        valid_trials,
        degenerate_trials,
        errors,
    }
}

/// Theory and Monte Carlo error at every grid point, in parallel on the
/// current rayon pool.
pub fn sweep(spec: &ExperimentSpec) -> Result<GridSweepResult> {
    spec.grid.validate()?;
    if spec.trials_per_point < 1 {
        return Err(Error::validation("experiment.trials", "must be >= 1"));
    }
    let trials = spec.trials_per_point;
    let records = spec
        .grid
        .points()
        .into_par_iter()
        .enumerate()
        .map(|(i, led)| {
            let mut rng = point_rng(spec.seed, i as u64);
            evaluate_point(&spec.scene, led, trials, &mut rng)
        })
        .collect();
    Ok(GridSweepResult { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{NoiseModel, OpticalParams};

    fn fig3() -> Scene {
        Scene::new(
            Vec3::new(0.0, 2.0, 0.0),
            Vec3::new(4.0, 2.0, 0.0),
            OpticalParams::new(5000.0, 1.0, 15e-6, 22e-9).unwrap(),
            NoiseModel::default(),
        )
        .unwrap()
    }

    fn grid(step: f64) -> Grid {
        Grid {
            x_min: 0.0,
            x_max: 4.0,
            y_min: 0.0,
            y_max: 4.0,
            step,
            height: 4.0,
        }
    }

    #[test]
    fn grid_layout() {
        let g = grid(0.25);
        assert_eq!(g.xs().len(), 17);
        let pts = g.points();
        assert_eq!(pts.len(), 289);
        assert_eq!(pts[0], Vec3::new(0.0, 0.0, 4.0));
        assert_eq!(pts[1], Vec3::new(0.25, 0.0, 4.0));
        assert_eq!(pts[17], Vec3::new(0.0, 0.25, 4.0));
        assert_eq!(*pts.last().unwrap(), Vec3::new(4.0, 4.0, 4.0));
        let single = Grid {
            x_min: 2.0,
            x_max: 2.0,
            y_min: 2.0,
            y_max: 2.0,
            step: 1.0,
            height: 4.0,
        };
        assert_eq!(single.points(), vec![Vec3::new(2.0, 2.0, 4.0)]);
    }

    #[test]
    fn noiseless_trial_is_exact() {
        let scene = fig3().with_noise(NoiseModel::noiseless());
        let mut rng = point_rng(0, 0);
        let t = run_trial(&scene, Vec3::new(1.3, 0.4, 4.0), &mut rng).unwrap();
        assert!((t - Vec3::new(1.3, 0.4, 4.0)).norm() < 1e-9);
        let mc = empirical_eps(&scene, Vec3::new(1.3, 0.4, 4.0), 10, &mut rng).unwrap();
        assert!(mc.e_ps < 1e-12);
        assert_eq!(mc.std_err, 0.0);
        assert_eq!(mc.degenerate_trials, 0);
    }

    #[test]
    fn trials_are_deterministic() {
        let scene = fig3();
        let led = Vec3::new(2.0, 2.0, 4.0);
        let a = run_trial(&scene, led, &mut point_rng(42, 3)).unwrap();
        let b = run_trial(&scene, led, &mut point_rng(42, 3)).unwrap();
        assert_eq!(a.to_array().map(f64::to_bits), b.to_array().map(f64::to_bits));
        let c = run_trial(&scene, led, &mut point_rng(42, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_needs_two_trials() {
        let mut rng = point_rng(0, 0);
        assert!(empirical_eps(&fig3(), Vec3::new(2.0, 2.0, 4.0), 1, &mut rng).is_err());
    }

    #[test]
    fn std_err_shrinks_with_more_trials() {
        let scene = fig3();
        let led = Vec3::new(1.0, 1.0, 4.0);
        let mut ratios = Vec::new();
        for seed in 0..5 {
            let a = empirical_eps(&scene, led, 2000, &mut point_rng(seed, 0)).unwrap();
            let b = empirical_eps(&scene, led, 4000, &mut point_rng(seed, 1)).unwrap();
            ratios.push(b.std_err / a.std_err);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let want = std::f64::consts::FRAC_1_SQRT_2;
        assert!((mean - want).abs() / want < 0.2, "{ratios:?}");
    }

    #[test]
    fn one_point_noiseless_sweep() {
        let spec = ExperimentSpec {
            scene: fig3().with_noise(NoiseModel::noiseless()),
            grid: Grid {
                x_min: 2.0,
                x_max: 2.0,
                y_min: 1.0,
                y_max: 1.0,
                step: 0.25,
                height: 4.0,
            },
            trials_per_point: 1,
            seed: 1,
        };
        let res = sweep(&spec).unwrap();
        assert_eq!(res.records.len(), 1);
        let r = &res.records[0];
        assert_eq!(r.e_ps_theory, 0.0);
        assert!(r.e_ps_mc < 1e-12);
        assert!(res.is_complete());
    }

    #[test]
    fn sweep_independent_of_thread_count() {
        let spec = ExperimentSpec {
            scene: fig3(),
            grid: grid(1.0),
            trials_per_point: 200,
            seed: 9,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sweep(&spec).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.records.len(), 25);
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.e_ps_mc.to_bits(), y.e_ps_mc.to_bits());
            assert_eq!(x.e_ps_theory.to_bits(), y.e_ps_theory.to_bits());
            assert_eq!(x.mc_std_err.to_bits(), y.mc_std_err.to_bits());
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = ExperimentSpec {
            scene: fig3(),
            grid: grid(0.0),
            trials_per_point: 10,
            seed: 0,
        };
        assert!(sweep(&spec).is_err());
        spec.grid = grid(1.0);
        spec.trials_per_point = 0;
        assert!(sweep(&spec).is_err());
    }
}
