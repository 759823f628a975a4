//! Bandwidth selection for the kernel CDF estimate: Silverman's reference
//! rule, a weighted cross-validation criterion evaluated by tensor
//! Gauss–Hermite quadrature, bootstrap averaging of the criterion, and
//! Monte Carlo MISE machinery for validating the selector.

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::sample::SampleMatrix;
use crate::smoothing::{KernelSpec, SmoothedModel};
use crate::special;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Localizing weight `w(x) = exp(-||x - center||^2)`; integrable with
/// total mass `pi^(d/2)`.
#[derive(Debug, Clone)]
pub struct WeightFunction {
    center: DVector<f64>,
}

impl WeightFunction {
    pub fn new(center: DVector<f64>) -> Self {
        Self { center }
    }

    pub fn at_sample_mean(data: &SampleMatrix) -> Self {
        Self {
            center: data.mean_vector(),
        }
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let s: f64 = x
            .iter()
            .zip(self.center.iter())
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        (-s).exp()
    }

    pub fn total_mass(&self) -> f64 {
        PI.powf(self.center.len() as f64 / 2.0)
    }
}

/// Tensor-product Gauss–Hermite rule: integrates against `exp(-||t||^2)`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    order: usize,
    dim: usize,
}

impl QuadratureRule {
    /// Nodes and weights of the 1-D rule by the Golub–Welsch eigenvalue
    /// method on the Hermite Jacobi matrix.
    fn gauss_hermite_1d(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if order == 0 {
            return Err(Error::invalid("quadrature order must be positive"));
        }
        let mut jacobi = DMatrix::zeros(order, order);
        for k in 1..order {
            let beta = (k as f64 / 2.0).sqrt();
            jacobi[(k, k - 1)] = beta;
            jacobi[(k - 1, k)] = beta;
        }
        let eigen = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|k| {
                let v0 = eigen.eigenvectors[(0, k)];
                (eigen.eigenvalues[k], PI.sqrt() * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(pairs.into_iter().unzip())
    }

    pub fn gauss_hermite_tensor(order: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("quadrature dimension must be positive"));
        }
        let total = (order as f64).powi(dim as i32);
        if !(total <= 1e7) {
            return Err(Error::invalid(format!(
                "tensor rule with {order}^{dim} nodes is too large"
            )));
        }
        let (t, w) = Self::gauss_hermite_1d(order)?;
        let mut nodes: Vec<Vec<f64>> = vec![Vec::new()];
        let mut weights = vec![1.0];
        for _ in 0..dim {
            let mut next_nodes = Vec::with_capacity(nodes.len() * order);
            let mut next_weights = Vec::with_capacity(nodes.len() * order);
            for (node, wt) in nodes.iter().zip(&weights) {
                for (tk, wk) in t.iter().zip(&w) {
                    let mut grown = node.clone();
                    grown.push(*tk);
                    next_nodes.push(grown);
                    next_weights.push(wt * wk);
                }
            }
            nodes = next_nodes;
            weights = next_weights;
        }
        Ok(Self {
            nodes,
            weights,
            order,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int g(x) w(x) dx` with the weight absorbed: evaluates `g` at
    /// `center + t_K` under the raw Gauss–Hermite weights.
    pub fn integrate_weighted<G: Fn(&[f64]) -> f64>(
        &self,
        weight: &WeightFunction,
        g: G,
    ) -> Result<f64> {
        if weight.dim() != self.dim {
            return Err(Error::invalid(
                "weight and quadrature rule have different dimensions",
            ));
        }
        let mut x = vec![0.0; self.dim];
        let mut acc = 0.0;
        for (node, wk) in self.nodes.iter().zip(&self.weights) {
            for j in 0..self.dim {
                x[j] = weight.center[j] + node[j];
            }
            acc += wk * g(&x);
        }
        Ok(acc)
    }
}

/// Reference-rule scalar: `(4 / (n (d+2)))^(2/(d+4))`; the caller forms
/// `H = h * sigma_hat`.
pub fn silverman_h(d: usize, n: usize) -> Result<f64> {
    if d < 1 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if n < 2 {
        return Err(Error::invalid("need at least 2 observations"));
    }
    let d = d as f64;
    Ok((4.0 / (n as f64 * (d + 2.0))).powf(2.0 / (d + 4.0)))
}

/// Weighted leave-one-out cross-validation criterion for the smoothed CDF:
/// `(1/n) sum_i int (1{X_i <= x} - F_loo_i(x))^2 w(x) dx`, integral by the
/// Gauss–Hermite rule with the weight absorbed.
pub fn cv_objective(
    data: &SampleMatrix,
    bandwidth: &DMatrix<f64>,
    weight: &WeightFunction,
    rule: &QuadratureRule,
    kernel: KernelSpec,
) -> Result<f64> {
    let n = data.n();
    let d = data.dim();
    if n < 3 {
        return Err(Error::invalid(
            "cross-validation needs at least 3 observations",
        ));
    }
    if weight.dim() != d || rule.dim() != d {
        return Err(Error::invalid(
            "data, weight, and quadrature dimensions disagree",
        ));
    }
    let model = SmoothedModel::fit(data.clone(), kernel, bandwidth.clone())?;
    let mut x = vec![0.0; d];
    let mut terms = vec![0.0; n];
    let mut total = 0.0;
    for (node, wk) in rule.nodes().iter().zip(rule.weights()) {
        for j in 0..d {
            x[j] = weight.center[j] + node[j];
        }
        let mut sum = 0.0;
        for (i, t) in terms.iter_mut().enumerate() {
            *t = model.cdf_term(i, &x);
            sum += *t;
        }
        if !sum.is_finite() {
            return Err(Error::domain("kernel CDF term is not finite"));
        }
        let mut acc = 0.0;
        for (i, t) in terms.iter().enumerate() {
            let loo = (sum - t) / (n as f64 - 1.0);
            let ind = (0..d).all(|j| data.get(i, j) <= x[j]);
            let diff = if ind { 1.0 - loo } else { -loo };
            acc += diff * diff;
        }
        total += wk * acc / n as f64;
    }
    Ok(total)
}

/// Outcome of grid minimization of the (possibly bootstrap-averaged) CV
/// criterion.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub h_grid: Vec<f64>,
    pub cv_values: Vec<f64>,
    pub h_star: f64,
    pub h_matrix: DMatrix<f64>,
    pub sigma_hat: DMatrix<f64>,
    pub at_grid_edge: bool,
}

/// Minimizes the CV criterion over `h_grid` with `H = h * sigma_hat`.
///
/// With `bootstrap_reps = 0` the criterion is evaluated on the data
/// directly; otherwise it is averaged over that many with-replacement
/// resamples, the same resamples for every grid point so the curves are
/// comparable. The weight centre and `sigma_hat` stay those of the
/// original sample.
pub fn select_bandwidth_cv(
    data: &SampleMatrix,
    h_grid: &[f64],
    weight: &WeightFunction,
    rule: &QuadratureRule,
    kernel: KernelSpec,
    bootstrap_reps: usize,
    rng: &mut Stream,
) -> Result<CvResult> {
    if h_grid.is_empty() {
        return Err(Error::invalid("bandwidth grid is empty"));
    }
    if h_grid.iter().any(|h| !(h > &0.0)) {
        return Err(Error::invalid("bandwidth grid must be positive"));
    }
    if h_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("bandwidth grid must be strictly increasing"));
    }
    let sigma_hat = data.covariance()?;
    let n = data.n();
    let resamples: Vec<SampleMatrix> = (0..bootstrap_reps)
        .map(|_| {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    (0..data.dim()).map(|j| data.get(i, j)).collect()
                })
                .collect();
            SampleMatrix::from_rows(&rows)
        })
        .collect::<Result<_>>()?;
    let cv_values: Vec<f64> = h_grid
        .par_iter()
        .map(|&h| -> Result<f64> {
            let bw = &sigma_hat * h;
            if resamples.is_empty() {
                cv_objective(data, &bw, weight, rule, kernel)
            } else {
                let mut acc = 0.0;
                for r in &resamples {
                    acc += cv_objective(r, &bw, weight, rule, kernel)?;
                }
                Ok(acc / resamples.len() as f64)
            }
        })
        .collect::<Result<_>>()?;
    let best = cv_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("grid is nonempty");
    let h_star = h_grid[best];
    Ok(CvResult {
        h_grid: h_grid.to_vec(),
        cv_values,
        h_star,
        h_matrix: &sigma_hat * h_star,
        sigma_hat,
        at_grid_edge: best == 0 || best == h_grid.len() - 1,
    })
}

/// A sampling model with an exact CDF, used as the ground truth in the
/// Monte Carlo validation of the selector.
pub trait TrueModel: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, n: usize, rng: &mut Stream) -> Result<SampleMatrix>;
    fn cdf(&self, x: &[f64]) -> Result<f64>;
}

/// Bivariate normal with exact CDF via the bivariate normal integral.
#[derive(Debug, Clone)]
pub struct BivariateNormal {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    sd: [f64; 2],
    rho: f64,
}

impl BivariateNormal {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.len() != 2 || cov.nrows() != 2 || cov.ncols() != 2 {
            return Err(Error::invalid("bivariate normal needs dimension 2"));
        }
        crate::linalg::check_spd(&cov, "covariance")?;
        let sd = [cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt()];
        let rho = cov[(0, 1)] / (sd[0] * sd[1]);
        Ok(Self { mean, cov, sd, rho })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

impl TrueModel for BivariateNormal {
    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, n: usize, rng: &mut Stream) -> Result<SampleMatrix> {
        if n == 0 {
            return Err(Error::invalid("cannot sample an empty matrix"));
        }
        let b = (1.0 - self.rho * self.rho).sqrt();
        let mut m = DMatrix::zeros(n, 2);
        for i in 0..n {
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            m[(i, 0)] = self.mean[0] + self.sd[0] * z1;
            m[(i, 1)] = self.mean[1] + self.sd[1] * (self.rho * z1 + b * z2);
        }
        SampleMatrix::new(m)
    }

    fn cdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != 2 {
            return Err(Error::invalid("bivariate normal CDF needs 2 coordinates"));
        }
        special::bvn_cdf(
            (x[0] - self.mean[0]) / self.sd[0],
            (x[1] - self.mean[1]) / self.sd[1],
            self.rho,
        )
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl McEstimate {
    fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("need at least 2 replications"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            mean,
            std_error: (var / n).sqrt(),
        })
    }
}

fn weighted_nodes(weight: &WeightFunction, rule: &QuadratureRule) -> Vec<Vec<f64>> {
    rule.nodes()
        .iter()
        .map(|node| {
            node.iter()
                .zip(weight.center.iter())
                .map(|(t, c)| c + t)
                .collect()
        })
        .collect()
}

/// Monte Carlo estimate of the weighted MISE of the smoothed CDF at sample
/// size `n` and fixed bandwidth: averages `int (F_hat - F)^2 w` over
/// independent samples, one worker stream per replication.
pub fn mise_mc<M: TrueModel>(
    model: &M,
    n: usize,
    bandwidth: &DMatrix<f64>,
    weight: &WeightFunction,
    rule: &QuadratureRule,
    kernel: KernelSpec,
    reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    let nodes = weighted_nodes(weight, rule);
    let truth: Vec<f64> = nodes
        .iter()
        .map(|x| model.cdf(x))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut stream = rng::substream(seed, r as u64);
            let sample = model.sample(n, &mut stream)?;
            let fitted = SmoothedModel::fit(sample, kernel, bandwidth.clone())?;
            let mut acc = 0.0;
            for ((x, wk), f_true) in nodes.iter().zip(rule.weights()).zip(&truth) {
                let f_hat = fitted.cdf(x)?;
                acc += wk * (f_hat - f_true) * (f_hat - f_true);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    McEstimate::from_values(&values)
}

/// Monte Carlo estimate of `E int (1{X <= x} - F(x))^2 w(x) dx`, the
/// bandwidth-free constant relating the CV criterion to the MISE.
pub fn d_constant_mc<M: TrueModel>(
    model: &M,
    weight: &WeightFunction,
    rule: &QuadratureRule,
    reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    let nodes = weighted_nodes(weight, rule);
    let truth: Vec<f64> = nodes
        .iter()
        .map(|x| model.cdf(x))
        .collect::<Result<_>>()?;
    let mut stream = rng::stream(seed);
    let draws = model.sample(reps, &mut stream)?;
    let d = model.dim();
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for ((x, wk), f_true) in nodes.iter().zip(rule.weights()).zip(&truth) {
                let ind = (0..d).all(|j| draws.get(i, j) <= x[j]);
                let diff = if ind { 1.0 - f_true } else { -f_true };
                acc += wk * diff * diff;
            }
            acc
        })
        .collect();
    McEstimate::from_values(&values)
}

/// Monte Carlo estimate of `E[CV]` at sample size `n` and fixed bandwidth.
pub fn cv_expectation_mc<M: TrueModel>(
    model: &M,
    n: usize,
    bandwidth: &DMatrix<f64>,
    weight: &WeightFunction,
    rule: &QuadratureRule,
    kernel: KernelSpec,
    reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut stream = rng::substream(seed, r as u64);
            let sample = model.sample(n, &mut stream)?;
            cv_objective(&sample, bandwidth, weight, rule, kernel)
        })
        .collect::<Result<_>>()?;
    McEstimate::from_values(&values)
}
