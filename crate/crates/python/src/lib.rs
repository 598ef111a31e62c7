//! Python bindings: fields, Brownian paths, the solver, the Malliavin
//! noise-shift check, the product-rule check and the study runner.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyComplex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use secondgrade::harness::{run, RunConfig, Study};
use secondgrade::operators::{apply_b_hat, BMethod, ForceSpec};
use secondgrade::solver::{energy_residual, solve_v, GFunction, InitSpec, SolverConfig, Trajectory};
use secondgrade::spectral::{inner_v, inner_w, norm_v, norm_w, WaveVector};
use secondgrade::stochint::{product_rule_check, ProductPair};
use secondgrade::wiener::{q_of, BrownianPath};
use secondgrade::{fieldio, malliavin, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "SpectralField", module = "secondgrade_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Field {
    inner: secondgrade::SpectralField,
}

impl From<secondgrade::SpectralField> for Field {
    fn from(inner: secondgrade::SpectralField) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl Field {
    #[staticmethod]
    fn zeros(cutoff: usize) -> Self {
        secondgrade::SpectralField::zeros(cutoff).into()
    }

    /// Gaussian coefficients scaled by `(1+|k|²)^{-decay}`.
    #[staticmethod]
    #[pyo3(signature = (cutoff, decay = 1.5, seed = 0))]
    fn random(cutoff: usize, decay: f64, seed: u64) -> Self {
        secondgrade::SpectralField::random(cutoff, decay, &mut ChaCha8Rng::seed_from_u64(seed)).into()
    }

    #[staticmethod]
    #[pyo3(signature = (cutoff, amplitude = 1.0, rate = 1.0, seed = 0))]
    fn analytic(cutoff: usize, amplitude: f64, rate: f64, seed: u64) -> Self {
        secondgrade::SpectralField::analytic(cutoff, amplitude, rate, &mut ChaCha8Rng::seed_from_u64(seed)).into()
    }

    /// Returns `(field, alpha)`.
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<(Self, f64)> {
        let (f, a) = fieldio::from_bytes(data).map_err(err)?;
        Ok((f.into(), a))
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<(Self, f64)> {
        let (f, a) = fieldio::from_csv(text).map_err(err)?;
        Ok((f.into(), a))
    }

    #[getter]
    fn cutoff(&self) -> usize {
        self.inner.cutoff()
    }

    fn mode_count(&self) -> usize {
        self.inner.mode_count()
    }

    fn get<'py>(&self, py: Python<'py>, k1: i32, k2: i32) -> PyResult<Bound<'py, PyComplex>> {
        let c = self.inner.get(WaveVector::new(k1, k2).map_err(err)?);
        Ok(PyComplex::from_doubles(py, c.re, c.im))
    }

    fn norm_v(&self, alpha: f64) -> f64 {
        norm_v(&self.inner, alpha)
    }

    fn norm_w(&self, alpha: f64) -> f64 {
        norm_w(&self.inner, alpha)
    }

    fn inner_v(&self, other: &Field, alpha: f64) -> f64 {
        inner_v(&self.inner, &other.inner, alpha)
    }

    fn inner_w(&self, other: &Field, alpha: f64) -> f64 {
        inner_w(&self.inner, &other.inner, alpha)
    }

    fn with_cutoff(&self, n: usize) -> Self {
        self.inner.with_cutoff(n).into()
    }

    fn __add__(&self, other: &Field) -> Self {
        self.inner.add(&other.inner).into()
    }

    fn __sub__(&self, other: &Field) -> Self {
        self.inner.sub(&other.inner).into()
    }

    fn __mul__(&self, a: f64) -> Self {
        self.inner.scale(a).into()
    }

    fn __rmul__(&self, a: f64) -> Self {
        self.inner.scale(a).into()
    }

    fn __eq__(&self, other: &Field) -> bool {
        self.inner == other.inner
    }

    /// Velocity `(u1, u2)` at a physical point.
    fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        let [a, b] = self.inner.eval([x, y]);
        (a, b)
    }

    fn to_bytes<'py>(&self, py: Python<'py>, alpha: f64) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &fieldio::to_bytes(&self.inner, alpha))
    }

    fn to_csv(&self, alpha: f64) -> String {
        fieldio::to_csv(&self.inner, alpha)
    }

    fn __repr__(&self) -> String {
        format!(
            "SpectralField(cutoff={}, modes={})",
            self.inner.cutoff(),
            self.inner.mode_count()
        )
    }
}

/// `B̂(u, v)` by the dealiased transform method.
#[pyfunction]
fn transport(u: &Field, v: &Field, alpha: f64) -> PyResult<Field> {
    Ok(apply_b_hat(&u.inner, &v.inner, alpha, BMethod::Transform)
        .map_err(err)?
        .into())
}

#[pyclass(name = "BrownianPath", module = "secondgrade_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Path {
    inner: BrownianPath,
}

#[pymethods]
impl Path {
    #[staticmethod]
    #[pyo3(signature = (seed, steps, horizon = 1.0))]
    fn sample(seed: u64, steps: usize, horizon: f64) -> PyResult<Self> {
        Ok(Self {
            inner: BrownianPath::sample(seed, steps, horizon).map_err(err)?,
        })
    }

    /// `W(t) = sin t`.
    #[staticmethod]
    #[pyo3(signature = (steps, horizon = 1.0))]
    fn sine(steps: usize, horizon: f64) -> PyResult<Self> {
        Ok(Self {
            inner: BrownianPath::sine(steps, horizon).map_err(err)?,
        })
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }

    fn terminal(&self) -> f64 {
        self.inner.terminal()
    }

    fn coarsen(&self, factor: usize) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.coarsen(factor).map_err(err)?,
        })
    }

    /// `Q = exp(σ W_N)` on the grid.
    fn q(&self, sigma: f64, level: f64) -> Vec<f64> {
        q_of(&self.inner, sigma, level).values().to_vec()
    }

    /// CSV `t,W,Q`.
    fn to_csv(&self, sigma: f64, level: f64) -> String {
        q_of(&self.inner, sigma, level).to_csv()
    }
}

#[pyclass(name = "Trajectory", module = "secondgrade_py", frozen)]
struct Traj {
    inner: Trajectory,
}

#[pymethods]
impl Traj {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    fn state(&self, j: usize) -> PyResult<Field> {
        self.inner
            .states()
            .get(j)
            .cloned()
            .map(Field::from)
            .ok_or_else(|| PyValueError::new_err(format!("index {j} beyond {} states", self.inner.len())))
    }

    fn last(&self) -> Field {
        self.inner.last().clone().into()
    }

    fn norms_v(&self) -> Vec<f64> {
        let a = self.inner.provenance().alpha;
        self.inner.states().iter().map(|s| norm_v(s, a)).collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

fn force_of(kind: &str, gain: f64) -> PyResult<ForceSpec> {
    match kind {
        "zero" => Ok(ForceSpec::zero()),
        "linear_gain" => Ok(ForceSpec::linear_gain(gain)),
        "saturated" => Ok(ForceSpec::saturated(gain)),
        other => Err(PyValueError::new_err(format!("unknown force `{other}`"))),
    }
}

fn g_of(name: &str) -> PyResult<GFunction> {
    match name {
        "sin" => Ok(GFunction::Sin),
        "tanh" => Ok(GFunction::Tanh),
        "identity_clamped" => Ok(GFunction::IdentityClamped),
        other => Err(PyValueError::new_err(format!("unknown g `{other}`"))),
    }
}

#[pyclass(name = "Solver", module = "secondgrade_py", frozen)]
struct Solver {
    cfg: SolverConfig,
}

#[pymethods]
impl Solver {
    #[new]
    #[pyo3(signature = (alpha = 1.0, nu = 0.5, cutoff = 8, force = "saturated", gain = 0.5, nonlinear = true))]
    fn new(alpha: f64, nu: f64, cutoff: usize, force: &str, gain: f64, nonlinear: bool) -> PyResult<Self> {
        let mut cfg = SolverConfig::new(alpha, nu, cutoff).with_force(force_of(force, gain)?);
        cfg.nonlinear = nonlinear;
        cfg.validate().map_err(err)?;
        Ok(Self { cfg })
    }

    /// Transformed field `v` on the path grid.
    #[pyo3(signature = (f, path, sigma = 0.5, level = 3.0))]
    fn solve(&self, py: Python<'_>, f: &Field, path: &Path, sigma: f64, level: f64) -> PyResult<Traj> {
        let q = q_of(&path.inner, sigma, level);
        let inner = py.detach(|| solve_v(&f.inner, &q, &self.cfg)).map_err(err)?;
        Ok(Traj { inner })
    }

    /// `sup_t` gap between `|v|²_W` and the energy identity.
    #[pyo3(signature = (f, path, sigma = 0.5, level = 3.0))]
    fn energy_residual(&self, f: &Field, path: &Path, sigma: f64, level: f64) -> PyResult<f64> {
        let q = q_of(&path.inner, sigma, level);
        let traj = solve_v(&f.inner, &q, &self.cfg).map_err(err)?;
        energy_residual(&traj, &q, &self.cfg).map_err(err)
    }

    /// Relative gap between the noise-shift difference quotient and the
    /// integrated Malliavin derivative. Passing `f1` makes the initial
    /// datum `f0 + g(W(T)) f1`.
    #[pyo3(signature = (f0, path, r0, eps = 1e-4, sigma = 0.5, level = 3.0, r_stride = 8, f1 = None, g = "sin"))]
    #[allow(clippy::too_many_arguments)]
    fn noise_shift(
        &self,
        py: Python<'_>,
        f0: &Field,
        path: &Path,
        r0: usize,
        eps: f64,
        sigma: f64,
        level: f64,
        r_stride: usize,
        f1: Option<&Field>,
        g: &str,
    ) -> PyResult<f64> {
        let spec = match f1 {
            None => InitSpec::Deterministic(f0.inner.clone()),
            Some(f1) => InitSpec::EndpointFunctional {
                f0: f0.inner.clone(),
                f1: f1.inner.clone(),
                g: g_of(g)?,
            },
        };
        let out = py
            .detach(|| malliavin::noise_shift_check(&spec, &path.inner, sigma, level, &self.cfg, r0, eps, r_stride))
            .map_err(err)?;
        Ok(out.relative_error)
    }
}

/// Product-rule residual at grid index `upto` for a catalog pair
/// (`w_wt`, `q_wt` or `q_q`).
#[pyfunction]
fn product_rule_residual(pair: &str, path: &Path, sigma: f64, upto: usize) -> PyResult<f64> {
    let pair: ProductPair = pair.parse().map_err(err)?;
    product_rule_check(pair, &path.inner, sigma, upto).map_err(err)
}

/// Runs a CLI study in-process; returns `(passed, report_text)`.
#[pyfunction]
#[pyo3(signature = (name, config = ""))]
fn run_study(py: Python<'_>, name: &str, config: &str) -> PyResult<(bool, String)> {
    let study: Study = name.parse().map_err(err)?;
    let cfg = RunConfig::from_toml(config).map_err(err)?;
    let report = py.detach(|| run(study, &cfg)).map_err(err)?;
    Ok((report.passed(), report.to_text()))
}

#[pyfunction]
fn default_config() -> String {
    RunConfig::default().to_toml()
}

#[pymodule]
fn secondgrade_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Field>()?;
    m.add_class::<Path>()?;
    m.add_class::<Traj>()?;
    m.add_class::<Solver>()?;
    m.add_function(wrap_pyfunction!(transport, m)?)?;
    m.add_function(wrap_pyfunction!(product_rule_residual, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
