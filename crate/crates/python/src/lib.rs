//! Python bindings for the shear-damping laboratory.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use shear_damping::direct::evolve_direct_with;
use shear_damping::evolution::{build_density, evolve_spectral, DensityOptions, ModeTrajectory};
use shear_damping::greens::GreensKernel;
use shear_damping::grid::ChannelGrid;
use shear_damping::norms::{lemma_ratio, LemmaSweep, LemmaTag};
use shear_damping::profiles::{make_profile, ProfileSpec, ShearProfile};
use shear_damping::resolvent::{self, Iota, SpectralPoint};
use shear_damping::runner::{self, complete_real_pairs, Omega0Spec, RunConfig};
use shear_damping::scan::{self, ScanOptions};
use shear_damping::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::ConfigInvalid(_) | Error::InvalidArgument(_) | Error::OutOfRange { .. } | Error::NonMonotone(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn omega_mode(omega0: &str) -> PyResult<shear_damping::mode::ModeFunction> {
    let spec: Omega0Spec = serde_json::from_str(omega0).map_err(|e| PyValueError::new_err(format!("omega0: {e}")))?;
    spec.mode().map_err(py_err)
}

fn parse_iota(s: &str) -> PyResult<Iota> {
    match s {
        "+" | "plus" => Ok(Iota::Plus),
        "-" | "minus" => Ok(Iota::Minus),
        _ => Err(PyValueError::new_err("iota must be '+' or '-'")),
    }
}

/// A certified monotone shear profile.
#[pyclass(name = "Profile", frozen)]
struct PyProfile {
    inner: ShearProfile,
}

#[pymethods]
impl PyProfile {
    /// `spec` is "couette", "sine-perturbed(a)", "tanh-monotone(s)" or a JSON descriptor.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        let parsed: ProfileSpec = if spec.trim_start().starts_with('{') {
            serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?
        } else {
            spec.parse().map_err(py_err)?
        };
        Ok(PyProfile { inner: make_profile(&parsed).map_err(py_err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }

    #[getter]
    fn sign(&self) -> i32 {
        self.inner.sign_aleph
    }

    fn b(&self, y: f64) -> f64 {
        self.inner.b(y)
    }

    fn db(&self, y: f64) -> f64 {
        self.inner.db(y)
    }

    fn d2b(&self, y: f64) -> f64 {
        self.inner.d2b(y)
    }

    fn range(&self) -> (f64, f64) {
        self.inner.range()
    }

    fn __repr__(&self) -> String {
        format!("Profile({:?})", self.inner.spec.to_string())
    }
}

/// Sampled evolution of one Fourier mode.
#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    inner: ModeTrajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn k(&self) -> i64 {
        self.inner.k
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.clone()
    }

    #[getter]
    fn psi(&self) -> Vec<Vec<Complex64>> {
        self.inner.psi_t.clone()
    }

    #[getter]
    fn dpsi_dy(&self) -> Vec<Vec<Complex64>> {
        self.inner.dpsi_dy_t.clone()
    }

    #[getter]
    fn omega(&self) -> Vec<Vec<Complex64>> {
        self.inner.omega_t.clone()
    }

    fn sup_psi(&self) -> Vec<f64> {
        self.inner.sup_psi()
    }

    fn conjugate(&self) -> Self {
        PyTrajectory { inner: self.inner.conjugate() }
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

/// G_k(y, z).
#[pyfunction]
fn greens(k: i64, y: f64, z: f64) -> f64 {
    GreensKernel::new(k).eval(y, z)
}

/// psi^iota at the nodes of a grid graded about y0; returns (nodes, psi).
#[pyfunction]
#[pyo3(signature = (profile, k, y0, eps, iota, omega0, n=256))]
fn solve_psi(
    py: Python<'_>,
    profile: &PyProfile,
    k: i64,
    y0: f64,
    eps: f64,
    iota: &str,
    omega0: &str,
    n: usize,
) -> PyResult<(Vec<f64>, Vec<Complex64>)> {
    let point = SpectralPoint::new(k, y0, eps, parse_iota(iota)?).map_err(py_err)?;
    let mode = omega_mode(omega0)?;
    let p = &profile.inner;
    py.allow_threads(|| {
        let grid = ChannelGrid::graded(n, 8, y0, (eps / 10.0).max(1e-6));
        let sol = resolvent::solve_psi(p, point, &mode.sample(&grid), &grid)?;
        Ok((grid.nodes.clone(), sol.psi))
    })
    .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (profile, k, omega0, times, n=1024, dt=0.01))]
fn evolve_direct(
    py: Python<'_>,
    profile: &PyProfile,
    k: i64,
    omega0: &str,
    times: Vec<f64>,
    n: usize,
    dt: f64,
) -> PyResult<PyTrajectory> {
    let mode = omega_mode(omega0)?;
    let p = &profile.inner;
    let dt = dt.min(shear_damping::direct::dt_max(p, k));
    let inner = py.allow_threads(|| evolve_direct_with(p, k, &mode, &times, n, dt)).map_err(py_err)?;
    Ok(PyTrajectory { inner })
}

#[pyfunction]
#[pyo3(signature = (profile, k, omega0, times, base_panels=16, resolvent_n=256))]
fn evolve_spectral_mode(
    py: Python<'_>,
    profile: &PyProfile,
    k: i64,
    omega0: &str,
    times: Vec<f64>,
    base_panels: usize,
    resolvent_n: usize,
) -> PyResult<PyTrajectory> {
    let mode = omega_mode(omega0)?;
    let p = &profile.inner;
    let opts = DensityOptions { base_panels, resolvent_n, ..Default::default() };
    let inner = py
        .allow_threads(|| build_density(p, k, &mode, &opts).map(|d| evolve_spectral(&d, &times)))
        .map_err(py_err)?;
    Ok(PyTrajectory { inner })
}

/// Spectrum scan report as JSON.
#[pyfunction]
#[pyo3(signature = (profile, k, n=192))]
fn scan_json(py: Python<'_>, profile: &PyProfile, k: i64, n: usize) -> PyResult<String> {
    let p = &profile.inner;
    py.allow_threads(|| scan::scan(p, k, &ScanOptions { n, ..Default::default() })?.to_json()).map_err(py_err)
}

/// Lemma-ratio report as JSON; `tag` is "bX1", "X11" or "bX17".
#[pyfunction]
#[pyo3(signature = (profile, tag, ks, samples=10, vanishing=false))]
fn lemma_ratio_json(
    py: Python<'_>,
    profile: &PyProfile,
    tag: &str,
    ks: Vec<i64>,
    samples: usize,
    vanishing: bool,
) -> PyResult<String> {
    let tag: LemmaTag =
        serde_json::from_str(&format!("{tag:?}")).map_err(|_| PyValueError::new_err("tag must be bX1, X11 or bX17"))?;
    let sweep = LemmaSweep { ks, samples, vanishing, ..Default::default() };
    let p = &profile.inner;
    py.allow_threads(|| {
        let r = lemma_ratio(p, tag, &sweep)?;
        Ok(serde_json::to_string(&r)?)
    })
    .map_err(py_err)
}

/// Real phi(t, x, y) from mode trajectories (missing -k partners are conjugated in);
/// returns (phi[t][x][y], max discarded imaginary part).
#[pyfunction]
#[pyo3(signature = (profile, trajectories, x_resolution=32))]
fn assemble_physical(
    profile: &PyProfile,
    trajectories: Vec<PyRef<'_, PyTrajectory>>,
    x_resolution: usize,
) -> PyResult<(Vec<Vec<Vec<f64>>>, f64)> {
    let trajs: Vec<ModeTrajectory> = trajectories.iter().map(|t| t.inner.clone()).collect();
    let field = runner::assemble_physical(&profile.inner, &complete_real_pairs(&trajs), x_resolution, &Default::default())
        .map_err(py_err)?;
    Ok((field.phi, field.max_imag))
}

/// Runs a configuration (JSON text); returns (exit code, report JSON).
#[pyfunction]
fn run_config(py: Python<'_>, config: &str) -> PyResult<(i32, String)> {
    let cfg = RunConfig::from_json(config).map_err(py_err)?;
    py.allow_threads(|| {
        let report = runner::run(&cfg)?;
        Ok((report.exit_code(), serde_json::to_string(&report)?))
    })
    .map_err(py_err)
}

#[pymodule]
fn shear_damping_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProfile>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(greens, m)?)?;
    m.add_function(wrap_pyfunction!(solve_psi, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_direct, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_spectral_mode, m)?)?;
    m.add_function(wrap_pyfunction!(scan_json, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_ratio_json, m)?)?;
    m.add_function(wrap_pyfunction!(assemble_physical, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
