//! Python bindings. Point clouds are passed as lists of rows (or anything
//! that converts to one, such as a 2D numpy array). Axis indices are 0-based.

use ndarray::{Array1, Array2};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use riswie::align::BoostBase;
use riswie::harness::{self, BiasVarianceSpec, DistanceConfig, StackAssignment};
use riswie::matching::Scaled;
use riswie::{DiffusionParams, EmbeddingKind, GaussianSpec, SoftParams};

create_exception!(riswie_py, RiswieError, PyException, "Invalid input or configuration.");
create_exception!(riswie_py, NoConvergenceError, RiswieError, "The soft matching did not converge.");

fn to_py(e: riswie::RiswieError) -> PyErr {
    let mut root = &e;
    while let riswie::RiswieError::Pair { source, .. } = root {
        root = source;
    }
    match root {
        riswie::RiswieError::NoConvergence { .. } => NoConvergenceError::new_err(e.to_string()),
        _ => RiswieError::new_err(e.to_string()),
    }
}

fn rows_to_array(rows: &[Vec<f64>]) -> PyResult<Array2<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != d) {
        return Err(PyValueError::new_err(format!("row {i} has {} entries, expected {d}", rows[i].len())));
    }
    Ok(Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i][j]))
}

fn array_to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

#[pyclass(module = "riswie_py", frozen)]
#[derive(Clone)]
pub struct PointCloud {
    inner: riswie::PointCloud,
}

#[pymethods]
impl PointCloud {
    #[new]
    #[pyo3(signature = (points, weights=None, id=None))]
    fn new(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>, id: Option<String>) -> PyResult<Self> {
        let pts = rows_to_array(&points)?;
        let mut inner = match weights {
            Some(w) => riswie::PointCloud::with_weights(pts, Array1::from(w)),
            None => riswie::PointCloud::new(pts),
        }
        .map_err(to_py)?;
        if let Some(id) = id {
            inner = inner.with_id(id);
        }
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn id(&self) -> Option<String> {
        self.inner.id().map(str::to_owned)
    }

    fn points(&self) -> Vec<Vec<f64>> {
        array_to_rows(self.inner.points())
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn mean(&self) -> Vec<f64> {
        self.inner.mean().to_vec()
    }

    fn total_variance(&self) -> f64 {
        self.inner.total_variance()
    }

    /// `x -> rotation x + translation` for every point.
    fn transformed(&self, rotation: Vec<Vec<f64>>, translation: Vec<f64>) -> PyResult<Self> {
        let r = rows_to_array(&rotation)?;
        let inner = self.inner.transformed(&r, &Array1::from(translation)).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("PointCloud(n={}, dim={})", self.inner.len(), self.inner.dim())
    }
}

#[pyclass(module = "riswie_py", frozen)]
#[derive(Clone)]
pub struct EmbeddingConfig {
    inner: riswie::EmbeddingConfig,
}

#[pymethods]
impl EmbeddingConfig {
    /// `kind` is "pca", "diffusion" or "coordinate"; `k=None` uses the
    /// smaller ambient dimension.
    #[new]
    #[pyo3(signature = (kind="pca", k=None, neighbors=None, t=1, epsilon=None, scale_by_eigenvalue=true))]
    fn new(
        kind: &str,
        k: Option<usize>,
        neighbors: Option<usize>,
        t: u32,
        epsilon: Option<f64>,
        scale_by_eigenvalue: bool,
    ) -> PyResult<Self> {
        let kind = match kind {
            "pca" => EmbeddingKind::Pca,
            "diffusion" => EmbeddingKind::Diffusion,
            "coordinate" => EmbeddingKind::Coordinate,
            other => return Err(PyValueError::new_err(format!("unknown embedding '{other}'"))),
        };
        Ok(Self {
            inner: riswie::EmbeddingConfig {
                kind,
                k,
                diffusion: DiffusionParams {
                    neighbors,
                    t,
                    epsilon,
                    scale_by_eigenvalue,
                },
            },
        })
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

fn config_or_default(config: Option<&EmbeddingConfig>) -> riswie::EmbeddingConfig {
    config.map_or_else(riswie::EmbeddingConfig::default, |c| c.inner)
}

#[pyclass(module = "riswie_py", frozen, get_all)]
pub struct RiswieResult {
    distance: f64,
    squared: f64,
    k: usize,
    permutation: Vec<usize>,
    signs: Vec<i8>,
    pair_costs: Vec<f64>,
}

impl From<&riswie::RiswieResult> for RiswieResult {
    fn from(r: &riswie::RiswieResult) -> Self {
        Self {
            distance: r.distance,
            squared: r.squared,
            k: r.k,
            permutation: r.matching.permutation.clone(),
            signs: r.matching.signs.clone(),
            pair_costs: r.matching.pair_costs.clone(),
        }
    }
}

#[pymethods]
impl RiswieResult {
    fn __repr__(&self) -> String {
        format!("RiswieResult(distance={}, k={})", self.distance, self.k)
    }
}

#[pyclass(module = "riswie_py", frozen)]
pub struct RigidTransform {
    inner: riswie::RigidTransform,
}

#[pymethods]
impl RigidTransform {
    #[getter]
    fn rotation(&self) -> Vec<Vec<f64>> {
        array_to_rows(&self.inner.rotation)
    }

    #[getter]
    fn translation(&self) -> Vec<f64> {
        self.inner.translation.to_vec()
    }

    fn determinant(&self) -> f64 {
        self.inner.determinant()
    }

    fn apply(&self, cloud: &PointCloud) -> PyResult<PointCloud> {
        let inner = self.inner.apply(&cloud.inner).map_err(to_py)?;
        Ok(PointCloud { inner })
    }
}

#[pyfunction]
#[pyo3(signature = (x, y, config=None))]
fn riswie_distance(py: Python<'_>, x: &PointCloud, y: &PointCloud, config: Option<&EmbeddingConfig>) -> PyResult<RiswieResult> {
    let c = config_or_default(config);
    let r = py.detach(|| riswie::riswie_distance(&x.inner, &y.inner, &c)).map_err(to_py)?;
    Ok((&r).into())
}

fn soft_params(beta: f64, eps: f64, absolute: bool, max_iter: usize, tol: f64) -> SoftParams {
    let wrap = if absolute { Scaled::Absolute } else { Scaled::Relative };
    SoftParams {
        beta: wrap(beta),
        eps: wrap(eps),
        max_iter,
        tol,
    }
}

/// Soft distance and its transport plan. `beta` and `eps` are relative to
/// the data unless `absolute` is set.
#[pyfunction]
#[pyo3(signature = (x, y, config=None, beta=10.0, eps=1e-2, absolute=false, max_iter=10_000, tol=1e-9))]
#[allow(clippy::too_many_arguments)]
fn sriswie_distance(
    py: Python<'_>,
    x: &PointCloud,
    y: &PointCloud,
    config: Option<&EmbeddingConfig>,
    beta: f64,
    eps: f64,
    absolute: bool,
    max_iter: usize,
    tol: f64,
) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let c = config_or_default(config);
    let params = soft_params(beta, eps, absolute, max_iter, tol);
    let (value, soft) = py
        .detach(|| riswie::sriswie_distance(&x.inner, &y.inner, &c, &params))
        .map_err(to_py)?;
    Ok((value, array_to_rows(&soft.plan)))
}

/// Rigid transform taking `y` onto `x`.
#[pyfunction]
#[pyo3(signature = (x, y, config=None))]
fn align(
    py: Python<'_>,
    x: &PointCloud,
    y: &PointCloud,
    config: Option<&EmbeddingConfig>,
) -> PyResult<(RiswieResult, RigidTransform)> {
    let c = config_or_default(config);
    let (r, t) = py.detach(|| riswie::align::align(&x.inner, &y.inner, &c)).map_err(to_py)?;
    Ok(((&r).into(), RigidTransform { inner: t }))
}

fn boost_base(base: &str, directions: usize, seed: u64) -> PyResult<BoostBase> {
    match base {
        "sliced" => Ok(BoostBase::SlicedW2 { directions, seed }),
        "nn" => Ok(BoostBase::MeanNearestNeighbor),
        other => Err(PyValueError::new_err(format!("unknown base distance '{other}'"))),
    }
}

/// Base distance ("sliced" or "nn") after aligning `y` onto `x`.
#[pyfunction]
#[pyo3(signature = (x, y, base="sliced", directions=64, seed=0, config=None))]
fn boosted_distance(
    py: Python<'_>,
    x: &PointCloud,
    y: &PointCloud,
    base: &str,
    directions: usize,
    seed: u64,
    config: Option<&EmbeddingConfig>,
) -> PyResult<f64> {
    let b = boost_base(base, directions, seed)?;
    let c = config_or_default(config);
    let r = py
        .detach(|| riswie::boosted_distance(&x.inner, &y.inner, b, &c))
        .map_err(to_py)?;
    Ok(r.value)
}

fn spectra(a: Vec<f64>, b: Vec<f64>) -> PyResult<(GaussianSpec, GaussianSpec)> {
    Ok((GaussianSpec::new(a).map_err(to_py)?, GaussianSpec::new(b).map_err(to_py)?))
}

/// Closed-form distance between centred Gaussians with the given
/// covariance eigenvalues.
#[pyfunction]
fn gaussian_closed_form(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let (a, b) = spectra(a, b)?;
    riswie::gaussian_closed_form(&a, &b).map_err(to_py)
}

/// GW estimates and both comparison bounds evaluated at `gw2` (default:
/// the upper estimate).
#[pyfunction]
#[pyo3(signature = (a, b, gw2=None))]
fn gw_bounds<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>, gw2: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let (a, b) = spectra(a, b)?;
    let g = riswie::gw_bounds(&a, &b).map_err(to_py)?;
    let at = gw2.unwrap_or(g.ggw2);
    let out = PyDict::new(py);
    out.set_item("d2", g.dg2)?;
    out.set_item("lgw2", g.lgw2)?;
    out.set_item("ggw2", g.ggw2)?;
    out.set_item("alpha", g.alpha)?;
    out.set_item("gw2", at)?;
    out.set_item("bound_i", g.bound_i(at).ok())?;
    let ii = g.bound_ii(at);
    out.set_item("bound_ii", ii.value)?;
    out.set_item("bound_ii_clamped", ii.clamped)?;
    Ok(out)
}

#[pyfunction]
fn stability_bound(lambda_min: f64, e_norm: f64) -> PyResult<f64> {
    riswie::stability_bound(lambda_min, e_norm).map_err(to_py)
}

#[pyclass(module = "riswie_py", frozen)]
pub struct DistanceMatrix {
    inner: harness::DistanceMatrix,
}

#[pymethods]
impl DistanceMatrix {
    /// `ids=None` labels items "0", "1", ...
    #[new]
    #[pyo3(signature = (values, ids=None))]
    fn new(values: Vec<Vec<f64>>, ids: Option<Vec<String>>) -> PyResult<Self> {
        let v = rows_to_array(&values)?;
        let inner = match ids {
            Some(ids) => harness::DistanceMatrix::new(ids, v),
            None => harness::DistanceMatrix::unlabeled(v),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids().to_vec()
    }

    fn values(&self) -> Vec<Vec<f64>> {
        array_to_rows(self.inner.values())
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        let m = self.inner.len();
        if i >= m || j >= m {
            return Err(PyValueError::new_err(format!("index ({i}, {j}) out of range for {m} items")));
        }
        Ok(self.inner.get(i, j))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// All-pairs distance matrix. Ids come from the clouds, or their positions.
#[pyfunction]
#[pyo3(signature = (clouds, config=None, soft=false, beta=10.0, eps=1e-2, absolute=false))]
#[allow(clippy::too_many_arguments)]
fn pairwise_matrix(
    py: Python<'_>,
    clouds: Vec<PyRef<'_, PointCloud>>,
    config: Option<&EmbeddingConfig>,
    soft: bool,
    beta: f64,
    eps: f64,
    absolute: bool,
) -> PyResult<DistanceMatrix> {
    let list: Vec<riswie::PointCloud> = clouds.iter().map(|c| c.inner.clone()).collect();
    let dc = DistanceConfig {
        embedding: config_or_default(config),
        soft: soft.then(|| soft_params(beta, eps, absolute, 10_000, 1e-9)),
    };
    let inner = py.detach(|| harness::pairwise_matrix(&list, &dc)).map_err(to_py)?;
    Ok(DistanceMatrix { inner })
}

#[pyfunction]
fn hybrid_matrix(spatial: &DistanceMatrix, marker: &DistanceMatrix, lam: f64) -> PyResult<DistanceMatrix> {
    let inner = harness::hybrid_matrix(&spatial.inner, &marker.inner, lam).map_err(to_py)?;
    Ok(DistanceMatrix { inner })
}

/// `(fraction, compared, mean_abs_percentile_diff)`.
#[pyfunction]
#[pyo3(signature = (d1, d2, min_sep=None))]
fn ordering_agreement(d1: &DistanceMatrix, d2: &DistanceMatrix, min_sep: Option<f64>) -> PyResult<(f64, usize, f64)> {
    let a = harness::ordering_agreement(&d1.inner, &d2.inner, min_sep).map_err(to_py)?;
    Ok((a.fraction, a.compared, a.mean_abs_percentile_diff))
}

/// Balanced split into `k` stacks: `(stacks as index lists, cost)`.
#[pyfunction]
#[pyo3(signature = (d, k, restarts=10, seed=0))]
fn stack_assign(py: Python<'_>, d: &DistanceMatrix, k: usize, restarts: usize, seed: u64) -> PyResult<(Vec<Vec<usize>>, f64)> {
    let a = py
        .detach(|| harness::stack_assign(&d.inner, k, restarts, seed))
        .map_err(to_py)?;
    Ok((a.stacks, a.cost))
}

#[pyfunction]
fn match_accuracy(stacks: Vec<Vec<usize>>, truth: Vec<String>) -> PyResult<f64> {
    let a = StackAssignment { stacks, cost: 0.0 };
    harness::match_accuracy(&a, &truth).map_err(to_py)
}

/// One dict per (d, n) with truth, mean_d, bias, variance and the fitted
/// exponents for that d.
#[pyfunction]
fn bias_variance_experiment<'py>(
    py: Python<'py>,
    dims: Vec<usize>,
    sample_sizes: Vec<usize>,
    trials: usize,
    spectrum_a: Vec<Vec<f64>>,
    spectrum_b: Vec<Vec<f64>>,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let spec = BiasVarianceSpec {
        dims,
        sample_sizes,
        trials,
        spectrum_a,
        spectrum_b,
        seed,
    };
    let rows = py.detach(|| harness::bias_variance_experiment(&spec)).map_err(to_py)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("d", r.d)?;
            d.set_item("n", r.n)?;
            d.set_item("truth", r.truth)?;
            d.set_item("mean_d", r.mean_d)?;
            d.set_item("bias", r.bias)?;
            d.set_item("variance", r.variance)?;
            d.set_item("alpha_bias", r.alpha_bias)?;
            d.set_item("alpha_var", r.alpha_var)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
pub fn riswie_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RiswieError", m.py().get_type::<RiswieError>())?;
    m.add("NoConvergenceError", m.py().get_type::<NoConvergenceError>())?;
    m.add_class::<PointCloud>()?;
    m.add_class::<EmbeddingConfig>()?;
    m.add_class::<RiswieResult>()?;
    m.add_class::<RigidTransform>()?;
    m.add_class::<DistanceMatrix>()?;
    m.add_function(wrap_pyfunction!(riswie_distance, m)?)?;
    m.add_function(wrap_pyfunction!(sriswie_distance, m)?)?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    m.add_function(wrap_pyfunction!(boosted_distance, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(gw_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(stability_bound, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(hybrid_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(ordering_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(stack_assign, m)?)?;
    m.add_function(wrap_pyfunction!(match_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(bias_variance_experiment, m)?)?;
    Ok(())
}
