//! Gaussian kernel smoothing of a multivariate sample: mixture density,
//! mixture CDF, marginal CDFs/quantiles, and the induced smoothed copula.

use crate::error::{Error, Result};
use crate::linalg;
use crate::sample::SampleMatrix;
use crate::special;
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use std::fmt;

/// Smoothing kernel choice. Only the Gaussian kernel is provided; the enum
/// keeps config strings and signatures stable if more are added.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelSpec {
    Gauss,
}

impl KernelSpec {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "gauss" | "gaussian" => Ok(Self::Gauss),
            other => Err(Error::invalid(format!("unknown kernel '{other}'"))),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gauss => write!(f, "gauss"),
        }
    }
}

/// A fitted kernel mixture: data plus a fixed SPD bandwidth matrix H.
///
/// The model is the equal-weight mixture of Gaussians centred at the rows
/// of `data` with common covariance H.
#[derive(Debug, Clone)]
pub struct SmoothedModel {
    data: SampleMatrix,
    kernel: KernelSpec,
    bandwidth: DMatrix<f64>,
    sqrt_bandwidth: DMatrix<f64>,
    inv_sqrt_bandwidth: DMatrix<f64>,
    det_sqrt: f64,
    diag_sd: Vec<f64>,
}

impl SmoothedModel {
    pub fn fit(data: SampleMatrix, kernel: KernelSpec, bandwidth: DMatrix<f64>) -> Result<Self> {
        let d = data.dim();
        if bandwidth.nrows() != d || bandwidth.ncols() != d {
            return Err(Error::invalid(format!(
                "bandwidth is {}x{}, data has dimension {d}",
                bandwidth.nrows(),
                bandwidth.ncols()
            )));
        }
        linalg::check_spd(&bandwidth, "bandwidth")?;
        let sqrt_bandwidth = linalg::sym_sqrt(&bandwidth)?;
        let recon = &sqrt_bandwidth * &sqrt_bandwidth;
        let scale = bandwidth.norm().max(f64::MIN_POSITIVE);
        if (&recon - &bandwidth).norm() > 1e-10 * scale {
            return Err(Error::NotPositiveDefinite(
                "bandwidth square root does not reproduce the matrix".into(),
            ));
        }
        let inv_sqrt_bandwidth = sqrt_bandwidth.clone().try_inverse().ok_or_else(|| {
            Error::NotPositiveDefinite("bandwidth square root is singular".into())
        })?;
        let det_sqrt = sqrt_bandwidth.determinant();
        if !(det_sqrt > 0.0) {
            return Err(Error::NotPositiveDefinite(
                "bandwidth determinant is not positive".into(),
            ));
        }
        let diag_sd = (0..d).map(|j| bandwidth[(j, j)].sqrt()).collect();
        Ok(Self {
            data,
            kernel,
            bandwidth,
            sqrt_bandwidth,
            inv_sqrt_bandwidth,
            det_sqrt,
            diag_sd,
        })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn data(&self) -> &SampleMatrix {
        &self.data
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn bandwidth(&self) -> &DMatrix<f64> {
        &self.bandwidth
    }

    pub fn sqrt_bandwidth(&self) -> &DMatrix<f64> {
        &self.sqrt_bandwidth
    }

    /// Mixture density at a finite point.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let d = self.check_point(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("density needs a finite point"));
        }
        let norm = (2.0 * PI).powf(-(d as f64) / 2.0) / self.det_sqrt;
        let n = self.data.n();
        let mut acc = 0.0;
        let mut diff = DVector::zeros(d);
        for i in 0..n {
            for j in 0..d {
                diff[j] = x[j] - self.data.get(i, j);
            }
            let y = &self.inv_sqrt_bandwidth * &diff;
            acc += (-0.5 * y.norm_squared()).exp();
        }
        Ok(acc * norm / n as f64)
    }

    /// Mixture CDF at a point; coordinates may be `+inf` (marginalised out)
    /// or `-inf` (the CDF is 0).
    ///
    /// Implemented exactly for dimensions 1 and 2, and for any dimension
    /// when the bandwidth is diagonal; other cases are unsupported.
    pub fn cdf(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::domain("CDF argument is NaN"));
        }
        if x.iter().any(|&v| v == f64::NEG_INFINITY) {
            return Ok(0.0);
        }
        let keep: Vec<usize> = (0..x.len()).filter(|&j| x[j].is_finite()).collect();
        match keep.len() {
            0 => Ok(1.0),
            1 => self.marginal_cdf(keep[0], x[keep[0]]),
            2 => {
                let (a, b) = (keep[0], keep[1]);
                let (sa, sb) = (self.diag_sd[a], self.diag_sd[b]);
                let r = self.bandwidth[(a, b)] / (sa * sb);
                let n = self.data.n();
                let mut acc = 0.0;
                for i in 0..n {
                    let za = (x[a] - self.data.get(i, a)) / sa;
                    let zb = (x[b] - self.data.get(i, b)) / sb;
                    acc += special::bvn_cdf(za, zb, r)?;
                }
                Ok(acc / n as f64)
            }
            _ => {
                let scale = self.bandwidth.norm().max(f64::MIN_POSITIVE);
                let off_diagonal = self
                    .bandwidth
                    .iter()
                    .enumerate()
                    .any(|(k, &v)| k / x.len() != k % x.len() && v.abs() > 1e-14 * scale);
                if off_diagonal {
                    return Err(Error::unsupported(
                        "CDF beyond dimension 2 needs a diagonal bandwidth",
                    ));
                }
                let n = self.data.n();
                let mut acc = 0.0;
                for i in 0..n {
                    let mut term = 1.0;
                    for &j in &keep {
                        term *=
                            special::norm_cdf((x[j] - self.data.get(i, j)) / self.diag_sd[j]);
                    }
                    acc += term;
                }
                Ok(acc / n as f64)
            }
        }
    }

    /// CDF contribution of datum `i` at a finite point; used by the
    /// bandwidth cross-validation, which needs leave-one-out sums.
    pub(crate) fn cdf_term(&self, i: usize, x: &[f64]) -> f64 {
        match x.len() {
            1 => special::norm_cdf((x[0] - self.data.get(i, 0)) / self.diag_sd[0]),
            2 => {
                let r = self.bandwidth[(0, 1)] / (self.diag_sd[0] * self.diag_sd[1]);
                let za = (x[0] - self.data.get(i, 0)) / self.diag_sd[0];
                let zb = (x[1] - self.data.get(i, 1)) / self.diag_sd[1];
                special::bvn_cdf(za, zb, r).unwrap_or(f64::NAN)
            }
            _ => (0..x.len())
                .map(|j| special::norm_cdf((x[j] - self.data.get(i, j)) / self.diag_sd[j]))
                .product(),
        }
    }

    /// Marginal mixture CDF of coordinate `j`.
    pub fn marginal_cdf(&self, j: usize, x: f64) -> Result<f64> {
        if j >= self.data.dim() {
            return Err(Error::invalid(format!(
                "coordinate {j} out of range for dimension {}",
                self.data.dim()
            )));
        }
        if x.is_nan() {
            return Err(Error::domain("CDF argument is NaN"));
        }
        if x == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        if x == f64::INFINITY {
            return Ok(1.0);
        }
        let sd = self.diag_sd[j];
        let n = self.data.n();
        let mut acc = 0.0;
        for i in 0..n {
            acc += special::norm_cdf((x - self.data.get(i, j)) / sd);
        }
        Ok(acc / n as f64)
    }

    fn marginal_pdf(&self, j: usize, x: f64) -> f64 {
        let sd = self.diag_sd[j];
        let n = self.data.n();
        let mut acc = 0.0;
        for i in 0..n {
            acc += special::norm_pdf((x - self.data.get(i, j)) / sd);
        }
        acc / (sd * n as f64)
    }

    /// Marginal quantile by safeguarded Newton iteration; the result `x`
    /// satisfies `|marginal_cdf(j, x) - p| <= 1e-12`.
    pub fn marginal_quantile(&self, j: usize, p: f64) -> Result<f64> {
        if j >= self.data.dim() {
            return Err(Error::invalid(format!(
                "coordinate {j} out of range for dimension {}",
                self.data.dim()
            )));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!(
                "quantile level must lie in (0,1), got {p}"
            )));
        }
        let sd = self.diag_sd[j];
        let (mn, mx) = self.data.column_min_max(j);
        let mut lo = mn - 10.0 * sd;
        let mut hi = mx + 10.0 * sd;
        let mut width = hi - lo;
        for _ in 0..60 {
            if self.marginal_cdf(j, lo)? <= p {
                break;
            }
            lo -= width;
            width *= 2.0;
        }
        let mut width = hi - lo;
        for _ in 0..60 {
            if self.marginal_cdf(j, hi)? >= p {
                break;
            }
            hi += width;
            width *= 2.0;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..300 {
            let fx = self.marginal_cdf(j, x)? - p;
            if fx.abs() <= 1e-12 {
                return Ok(x);
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let slope = self.marginal_pdf(j, x);
            let newton = x - fx / slope;
            x = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Err(Error::NoConvergence(format!(
            "marginal quantile at p = {p} did not converge"
        )))
    }

    /// Smoothed copula CDF: the mixture CDF evaluated at the marginal
    /// quantiles of `u`.
    pub fn copula_cdf(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("copula argument outside the unit cube"));
        }
        if u.iter().any(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let mut x = vec![0.0; u.len()];
        for (j, &uj) in u.iter().enumerate() {
            x[j] = if uj == 1.0 {
                f64::INFINITY
            } else {
                self.marginal_quantile(j, uj)?
            };
        }
        self.cdf(&x)
    }

    fn check_point(&self, x: &[f64]) -> Result<usize> {
        let d = self.data.dim();
        if x.len() != d {
            return Err(Error::invalid(format!(
                "point has {} coordinates, model has dimension {d}",
                x.len()
            )));
        }
        Ok(d)
    }
}
