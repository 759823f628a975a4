//! Python bindings: copula sampling, the smooth bootstrap, bandwidths,
//! rank correlations, and level-curve utilities, all on plain lists of
//! rows.

use copula_smooth::bootstrap::{self, BootstrapConfig, FunctionalTag, Transform};
use copula_smooth::copulas::{self, CopulaSpec};
use copula_smooth::functionals::{self, PolygonChain};
use copula_smooth::harness;
use copula_smooth::rng;
use copula_smooth::sample::SampleMatrix;
use copula_smooth::smoothing::KernelSpec;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: copula_smooth::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<SampleMatrix> {
    SampleMatrix::from_rows(&rows).map_err(err)
}

fn to_rows(m: &SampleMatrix) -> Vec<Vec<f64>> {
    (0..m.n())
        .map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect())
        .collect()
}

fn to_chain(vertices: Vec<Vec<f64>>, closed: bool) -> PyResult<PolygonChain> {
    let pts: Vec<[f64; 2]> = vertices
        .into_iter()
        .map(|v| {
            if v.len() == 2 {
                Ok([v[0], v[1]])
            } else {
                Err(PyValueError::new_err("vertices must be pairs [x, y]"))
            }
        })
        .collect::<PyResult<_>>()?;
    PolygonChain::new(pts, closed).map_err(err)
}

fn chain_to_rows(chain: &PolygonChain) -> Vec<(f64, f64)> {
    chain.vertices().iter().map(|v| (v[0], v[1])).collect()
}

fn bootstrap_config(
    m: usize,
    b: usize,
    kernel: &str,
    bandwidth: &str,
    seed: u64,
) -> PyResult<BootstrapConfig> {
    Ok(BootstrapConfig {
        m,
        b_reps: b,
        kernel: KernelSpec::parse(kernel).map_err(err)?,
        bandwidth_rule: harness::parse_bandwidth_rule(bandwidth).map_err(err)?,
        transform: Transform::NormalScores,
        seed,
    })
}

/// Rows drawn from a parametric copula, e.g. family "clayton:2" or "t:0.5,4".
#[pyfunction]
#[pyo3(signature = (family, n, dim=2, seed=0))]
fn sample_copula(family: &str, n: usize, dim: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let spec = CopulaSpec::parse(family, dim).map_err(err)?;
    let sample = copulas::sample_copula(&spec, n, &mut rng::stream(seed)).map_err(err)?;
    Ok(to_rows(&sample))
}

/// Copula CDF of a parametric family at a point of the unit cube.
#[pyfunction]
#[pyo3(signature = (family, u))]
fn copula_cdf(family: &str, u: Vec<f64>) -> PyResult<f64> {
    let spec = CopulaSpec::parse(family, u.len()).map_err(err)?;
    copulas::copula_cdf(&spec, &u).map_err(err)
}

/// Population Kendall tau of a parametric family.
#[pyfunction]
#[pyo3(signature = (family, dim=2))]
fn true_tau(family: &str, dim: usize) -> PyResult<f64> {
    let spec = CopulaSpec::parse(family, dim).map_err(err)?;
    copulas::true_tau(&spec).map_err(err)
}

/// Population Spearman rho of a parametric family.
#[pyfunction]
#[pyo3(signature = (family, dim=2))]
fn true_rho_s(family: &str, dim: usize) -> PyResult<f64> {
    let spec = CopulaSpec::parse(family, dim).map_err(err)?;
    copulas::true_rho_s(&spec).map_err(err)
}

/// Rank transform to (0,1): rank / (n + 1), ties averaged.
#[pyfunction]
fn pseudo_observations(data: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(&to_matrix(data)?.pseudo_observations()))
}

/// Silverman reference scale for a d-dimensional sample of size n.
#[pyfunction]
fn silverman_h(dim: usize, n: usize) -> PyResult<f64> {
    copula_smooth::bandwidth::silverman_h(dim, n).map_err(err)
}

/// Sample Kendall tau of a bivariate data set.
#[pyfunction]
fn kendall_tau(data: Vec<Vec<f64>>) -> PyResult<f64> {
    functionals::sample_tau(&to_matrix(data)?).map_err(err)
}

/// Sample Spearman rho of a bivariate data set.
#[pyfunction]
fn spearman_rho(data: Vec<Vec<f64>>) -> PyResult<f64> {
    functionals::sample_rho_s(&to_matrix(data)?).map_err(err)
}

/// One smooth bootstrap sample of m rows with exactly uniform margins.
/// Input rows outside the unit cube are rank-transformed first.
#[pyfunction]
#[pyo3(signature = (data, m, seed=0, bandwidth="silverman", kernel="gauss"))]
fn smooth_bootstrap(
    data: Vec<Vec<f64>>,
    m: usize,
    seed: u64,
    bandwidth: &str,
    kernel: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let data_u = bootstrap::prepare_unit_data(&to_matrix(data)?).map_err(err)?;
    let cfg = bootstrap_config(m, 1, kernel, bandwidth, seed)?;
    let sample = bootstrap::smooth_bootstrap_copula_sample(&data_u, &cfg, &mut rng::stream(seed))
        .map_err(err)?;
    Ok(to_rows(&sample))
}

/// Smooth-bootstrap distribution of a rank statistic ("tau" or "rho"):
/// b replicate values, each from its own size-m sample (m defaults to n).
#[pyfunction]
#[pyo3(signature = (data, stat="tau", b=500, m=None, seed=0, bandwidth="silverman"))]
fn bootstrap_distribution(
    data: Vec<Vec<f64>>,
    stat: &str,
    b: usize,
    m: Option<usize>,
    seed: u64,
    bandwidth: &str,
) -> PyResult<Vec<f64>> {
    let tag = FunctionalTag::parse(stat).map_err(err)?;
    let data_u = bootstrap::prepare_unit_data(&to_matrix(data)?).map_err(err)?;
    let cfg = bootstrap_config(m.unwrap_or(data_u.n()), b, "gauss", bandwidth, seed)?;
    bootstrap::functional_distribution(&data_u, &cfg, tag, &mut rng::stream(seed)).map_err(err)
}

/// Vertices of the empirical copula's t-level curve.
#[pyfunction]
#[pyo3(signature = (data, t, grid_n=200))]
fn level_boundary(data: Vec<Vec<f64>>, t: f64, grid_n: usize) -> PyResult<Vec<(f64, f64)>> {
    let m = to_matrix(data)?;
    let data_u = if m.all_in_closed_unit_cube() {
        m
    } else {
        m.pseudo_observations()
    };
    let chain = functionals::estimate_level_boundary(&data_u, t, grid_n).map_err(err)?;
    Ok(chain_to_rows(&chain))
}

/// Vertices of the exact Clayton t-level curve.
#[pyfunction]
#[pyo3(signature = (theta, t, n_points=200))]
fn clayton_level_boundary(theta: f64, t: f64, n_points: usize) -> PyResult<Vec<(f64, f64)>> {
    let chain = copulas::clayton_level_boundary(theta, t, n_points).map_err(err)?;
    Ok(chain_to_rows(&chain))
}

/// Hausdorff distance between two polygonal chains of [x, y] vertices.
#[pyfunction]
#[pyo3(signature = (a, b, closed=false))]
fn hausdorff(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, closed: bool) -> PyResult<f64> {
    Ok(functionals::hausdorff_distance(
        &to_chain(a, closed)?,
        &to_chain(b, closed)?,
    ))
}

#[pymodule]
fn copula_smooth_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sample_copula, m)?)?;
    m.add_function(wrap_pyfunction!(copula_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(true_tau, m)?)?;
    m.add_function(wrap_pyfunction!(true_rho_s, m)?)?;
    m.add_function(wrap_pyfunction!(pseudo_observations, m)?)?;
    m.add_function(wrap_pyfunction!(silverman_h, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(spearman_rho, m)?)?;
    m.add_function(wrap_pyfunction!(smooth_bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(level_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(clayton_level_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(hausdorff, m)?)?;
    Ok(())
}
