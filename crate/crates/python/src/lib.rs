//! Python bindings: scenes, theory and Monte Carlo at a point, grid sweeps,
//! and the geometric building blocks.

use std::path::PathBuf;

use ledloc_core::channel::noise_variance as core_noise_variance;
use ledloc_core::config::{load_config, parse_config, preset, write_config, ExperimentConfig, SceneConfig};
use ledloc_core::harness::{evaluate_point, point_rng, run_trial, sweep as core_sweep, GridSweepResult};
use ledloc_core::report::{read_csv, render_svg as core_render_svg, sweep_csv};
use ledloc_core::{
    incidence_noise_covariance as core_incidence_cov, optimal_normals as core_optimal_normals, theoretical_breakdown,
    triangulate as core_triangulate, Error, LocalizerConfig, NoiseModel, TriangulationInputs, Vec3,
};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(
    ledloc,
    LedlocError,
    PyValueError,
    "Raised for invalid input or failed computations."
);

type V3 = [f64; 3];
type M3 = [[f64; 3]; 3];

fn err(e: Error) -> PyErr {
    LedlocError::new_err(e.to_string())
}

/// Two receivers, one LED, optics and noise. Build with `Scene.preset`,
/// `Scene.from_file` or `Scene.from_toml`.
#[pyclass(name = "Scene", module = "ledloc", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScene {
    config: SceneConfig,
    experiment: ExperimentConfig,
    scene: ledloc_core::Scene,
}

impl PyScene {
    fn build(config: SceneConfig, experiment: ExperimentConfig) -> PyResult<Self> {
        let scene = config.to_scene().map_err(err)?;
        Ok(Self {
            config,
            experiment,
            scene,
        })
    }

    fn led(&self, x: f64, y: f64) -> Vec3 {
        Vec3::new(x, y, self.config.led.height)
    }
}

/// First-order error prediction at one LED position.
#[pyclass(name = "Theory", module = "ledloc", frozen, get_all)]
struct PyTheory {
    e_ps: f64,
    covariance: M3,
    incidence_covariances: [M3; 2],
    incidence: [V3; 2],
    peak_currents: [f64; 2],
}

#[pymethods]
impl PyTheory {
    fn __repr__(&self) -> String {
        format!("Theory(e_ps={:e})", self.e_ps)
    }
}

/// Monte Carlo RMS error at one LED position. Failed values are NaN.
#[pyclass(name = "MonteCarlo", module = "ledloc", frozen, get_all)]
struct PyMonteCarlo {
    e_ps: f64,
    std_err: f64,
    valid_trials: usize,
    degenerate_trials: usize,
    errors: Vec<String>,
}

#[pymethods]
impl PyMonteCarlo {
    fn __repr__(&self) -> String {
        format!(
            "MonteCarlo(e_ps={:e}, std_err={:e}, valid_trials={})",
            self.e_ps, self.std_err, self.valid_trials
        )
    }
}

#[pyclass(name = "SweepPoint", module = "ledloc", frozen, get_all)]
struct PySweepPoint {
    x: f64,
    y: f64,
    eps_theory: f64,
    eps_mc: f64,
    mc_stderr: f64,
    degenerate_trials: usize,
    errors: Vec<String>,
}

#[pyclass(name = "Sweep", module = "ledloc", frozen)]
struct PySweep {
    result: GridSweepResult,
}

#[pymethods]
impl PySweep {
    #[getter]
    fn points(&self) -> Vec<PySweepPoint> {
        self.result
            .records
            .iter()
            .map(|r| PySweepPoint {
                x: r.led.x,
                y: r.led.y,
                eps_theory: r.e_ps_theory,
                eps_mc: r.e_ps_mc,
                mc_stderr: r.mc_std_err,
                degenerate_trials: r.degenerate_trials,
                errors: r.errors.clone(),
            })
            .collect()
    }

    /// True when every grid point was computed.
    #[getter]
    fn complete(&self) -> bool {
        self.result.is_complete()
    }

    fn to_csv(&self) -> PyResult<String> {
        sweep_csv(&self.result).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.result.records.len()
    }
}

#[pymethods]
impl PyScene {
    /// Bundled configuration, `"fig3"` or `"fig4"`.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let (c, e) = preset(name).map_err(err)?;
        Self::build(c, e)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let (c, e) = load_config(path).map_err(err)?;
        Self::build(c, e)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let (c, e) = parse_config(text).map_err(err)?;
        Self::build(c, e)
    }

    fn to_toml(&self) -> PyResult<String> {
        write_config(&self.config, &self.experiment).map_err(err)
    }

    #[getter]
    fn a1(&self) -> V3 {
        self.scene.a1().to_array()
    }

    #[getter]
    fn a2(&self) -> V3 {
        self.scene.a2().to_array()
    }

    #[getter]
    fn led_height(&self) -> f64 {
        self.config.led.height
    }

    #[getter]
    fn trials(&self) -> usize {
        self.experiment.trials
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.experiment.seed
    }

    /// Copy with both noise coefficients multiplied by `factor` (0 for a
    /// noiseless scene).
    fn scale_noise(&self, factor: f64) -> PyResult<Self> {
        let noise = self.scene.noise.scaled(factor);
        noise.validate().map_err(err)?;
        let mut out = self.clone();
        out.scene.noise = noise;
        out.config.noise.const_coeff_a2 = noise.const_coeff;
        out.config.noise.linear_coeff_a = noise.linear_coeff;
        Ok(out)
    }

    fn theory(&self, x: f64, y: f64) -> PyResult<PyTheory> {
        let b = theoretical_breakdown(&self.scene, self.led(x, y)).map_err(err)?;
        Ok(PyTheory {
            e_ps: b.report.e_ps,
            covariance: b.report.covariance.0,
            incidence_covariances: b.incidence_covariances.map(|m| m.0),
            incidence: b.heads.map(|h| h.incidence.to_array()),
            peak_currents: b.peak_currents,
        })
    }

    /// RMS error over `trials` simulated measurements (defaults from the
    /// configuration).
    #[pyo3(signature = (x, y, trials=None, seed=None))]
    fn monte_carlo(
        &self,
        py: Python<'_>,
        x: f64,
        y: f64,
        trials: Option<usize>,
        seed: Option<u64>,
    ) -> PyResult<PyMonteCarlo> {
        let trials = trials.unwrap_or(self.experiment.trials);
        if trials < 1 {
            return Err(LedlocError::new_err("trials must be >= 1"));
        }
        let mut rng = point_rng(seed.unwrap_or(self.experiment.seed), 0);
        let led = self.led(x, y);
        let scene = self.scene;
        let r = py.detach(move || evaluate_point(&scene, led, trials, &mut rng));
        Ok(PyMonteCarlo {
            e_ps: r.e_ps_mc,
            std_err: r.mc_std_err,
            valid_trials: r.valid_trials,
            degenerate_trials: r.degenerate_trials,
            errors: r.errors,
        })
    }

    /// One simulated estimate of the LED position.
    #[pyo3(signature = (x, y, seed=0))]
    fn trial(&self, x: f64, y: f64, seed: u64) -> PyResult<V3> {
        let mut rng = point_rng(seed, 0);
        run_trial(&self.scene, self.led(x, y), &mut rng)
            .map(Vec3::to_array)
            .map_err(err)
    }

    #[pyo3(signature = (trials=None, seed=None, step=None))]
    fn sweep(&self, py: Python<'_>, trials: Option<usize>, seed: Option<u64>, step: Option<f64>) -> PyResult<PySweep> {
        let mut exp = self.experiment.clone();
        exp.trials = trials.unwrap_or(exp.trials);
        exp.seed = seed.unwrap_or(exp.seed);
        exp.step_m = step.unwrap_or(exp.step_m);
        let mut spec = exp.to_spec(&self.config).map_err(err)?;
        spec.scene = self.scene;
        let result = py.detach(move || core_sweep(&spec)).map_err(err)?;
        Ok(PySweep { result })
    }

    fn __repr__(&self) -> String {
        let [a1, a2] = [self.scene.a1(), self.scene.a2()];
        format!(
            "Scene(a1=({}, {}, {}), a2=({}, {}, {}), led_height={})",
            a1.x, a1.y, a1.z, a2.x, a2.y, a2.z, self.config.led.height
        )
    }
}

/// Rows of the optimal photodiode normal matrix.
#[pyfunction]
fn optimal_normals() -> [[f64; 3]; 4] {
    core_optimal_normals().0
}

/// Midpoint of the closest approach of two rays: returns `(t_hat, d1, d2)`.
#[pyfunction]
fn triangulate(a1: V3, a2: V3, r1: V3, r2: V3) -> PyResult<(V3, f64, f64)> {
    let inp = TriangulationInputs::new(
        Vec3::from_array(a1),
        Vec3::from_array(a2),
        Vec3::from_array(r1),
        Vec3::from_array(r2),
    );
    let r = core_triangulate(&inp, &LocalizerConfig::default()).map_err(err)?;
    Ok((r.t_hat.to_array(), r.d1, r.d2))
}

/// Incidence-error covariance of the optimal head for per-photodiode current
/// variances (A²) and peak current `mu_max` (A).
#[pyfunction]
fn incidence_noise_covariance(mu_max: f64, variances: [f64; 4]) -> M3 {
    core_incidence_cov(mu_max, variances).0
}

/// Current noise variance (A²) at mean current `mu` (A).
#[pyfunction]
#[pyo3(signature = (mu, const_coeff=None, linear_coeff=None))]
fn noise_variance(mu: f64, const_coeff: Option<f64>, linear_coeff: Option<f64>) -> f64 {
    let d = NoiseModel::default();
    let model = NoiseModel {
        const_coeff: const_coeff.unwrap_or(d.const_coeff),
        linear_coeff: linear_coeff.unwrap_or(d.linear_coeff),
    };
    core_noise_variance(&model, mu)
}

/// SVG heatmap of sweep CSV text, with optional `(x, y)` markers.
#[pyfunction]
#[pyo3(signature = (csv_text, markers=Vec::new()))]
fn render_svg(csv_text: &str, markers: Vec<(f64, f64)>) -> PyResult<String> {
    let rows = read_csv(csv_text.as_bytes()).map_err(err)?;
    let markers: Vec<Vec3> = markers.into_iter().map(|(x, y)| Vec3::new(x, y, 0.0)).collect();
    core_render_svg(&rows, &markers).map_err(err)
}

#[pymodule]
fn ledloc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LedlocError", m.py().get_type::<LedlocError>())?;
    m.add_class::<PyScene>()?;
    m.add_class::<PyTheory>()?;
    m.add_class::<PyMonteCarlo>()?;
    m.add_class::<PySweep>()?;
    m.add_class::<PySweepPoint>()?;
    m.add_function(wrap_pyfunction!(optimal_normals, m)?)?;
    m.add_function(wrap_pyfunction!(triangulate, m)?)?;
    m.add_function(wrap_pyfunction!(incidence_noise_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(noise_variance, m)?)?;
    m.add_function(wrap_pyfunction!(render_svg, m)?)?;
    Ok(())
}
