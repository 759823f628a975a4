//! Diagnostics for the dependence distortion that kernel smoothing
//! induces on elliptical models: relative-error curves of the product
//! generator, the closed-form uniform-distance bound for the Laplace
//! example, and Monte Carlo checks that correlation and Kendall's tau
//! survive smoothing with a proportional bandwidth.

use crate::elliptical::{CharGenerator, EllipticalSpec};
use crate::error::{Error, Result};
use crate::functionals;
use crate::rng::Stream;
use crate::sample::SampleMatrix;
use std::f64::consts::PI;

/// Pointwise distortion summary along a grid of generator arguments.
#[derive(Debug, Clone)]
pub struct DistortionReport {
    pub u_grid: Vec<f64>,
    /// `1 - psi_Y(c * u)`: the relative characteristic-function error.
    pub rel_error: Vec<f64>,
    /// Bound on the absolute characteristic-function gap; equals
    /// `psi_X(u) * rel_error` when the base generator is known, otherwise
    /// falls back to `rel_error` (the base factor is at most 1).
    pub abs_bound: Vec<f64>,
    /// Least-squares slope of `log rel_error` against `log c` at `u = 1`
    /// over `c = 2^-k`, k = 4..=12.
    pub rate_exponent: f64,
}

/// Fitted small-`c` rate of the relative error at `u = 1`.
fn fit_rate_exponent(gy: &CharGenerator) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 4..=12 {
        let c = (2.0f64).powi(-k);
        let rel = 1.0 - gy.eval(c)?;
        if rel <= 0.0 {
            return Err(Error::domain(
                "relative error vanished; cannot fit a log-log rate",
            ));
        }
        xs.push(c.ln());
        ys.push(rel.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Relative-error curve `1 - psi_Y(c u)` of the smoothing generator along
/// `u_grid`, with the fitted small-`c` rate exponent.
pub fn relative_error_curve(
    gy: &CharGenerator,
    c: f64,
    u_grid: &[f64],
) -> Result<DistortionReport> {
    distortion_curves(None, gy, c, u_grid)
}

/// Like [`relative_error_curve`], additionally tightening the absolute
/// bound by the base generator's own factor `psi_X(u)`.
pub fn distortion_curves(
    gx: Option<&CharGenerator>,
    gy: &CharGenerator,
    c: f64,
    u_grid: &[f64],
) -> Result<DistortionReport> {
    if !(c > 0.0) {
        return Err(Error::invalid(format!("scale c must be positive, got {c}")));
    }
    if u_grid.iter().any(|u| !(u >= &0.0)) {
        return Err(Error::domain("generator arguments must be nonnegative"));
    }
    let mut rel_error = Vec::with_capacity(u_grid.len());
    let mut abs_bound = Vec::with_capacity(u_grid.len());
    for &u in u_grid {
        let rel = 1.0 - gy.eval(c * u)?;
        let base = match gx {
            Some(g) => g.eval(u)?,
            None => 1.0,
        };
        rel_error.push(rel);
        abs_bound.push(base * rel);
    }
    Ok(DistortionReport {
        u_grid: u_grid.to_vec(),
        rel_error,
        abs_bound,
        rate_exponent: fit_rate_exponent(gy)?,
    })
}

/// Closed-form minimizer of the uniform-distance bound for the Laplace
/// worked example.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceBound {
    pub t_star: f64,
    pub bound: f64,
}

/// Evaluates the uniform-distance bound at truncation point `t`.
pub fn laplace_bound_at(c: f64, sigma2: f64, m: f64, t: f64) -> Result<f64> {
    if !(c > 0.0 && sigma2 > 0.0 && m > 0.0 && t > 0.0) {
        return Err(Error::domain("all bound inputs must be positive"));
    }
    Ok((c * sigma2 * t * t / 2.0 + 1.0).ln() / PI + m / (PI * t))
}

/// Optimal truncation point and bound value: `T*` is the positive root of
/// `c s T^3 - M c s T^2 / 2 - M = 0` (s = sigma2), written in the
/// closed Cardano form.
pub fn laplace_uniform_bound(c: f64, sigma2: f64, m: f64) -> Result<LaplaceBound> {
    if !(c > 0.0 && sigma2 > 0.0 && m > 0.0) {
        return Err(Error::domain("all bound inputs must be positive"));
    }
    let s = sigma2;
    let a = c.powi(3) * s.powi(3) * m.powi(3)
        + 108.0 * c * c * s * s * m
        + 6.0 * 6.0f64.sqrt() * (c.powi(5) * s.powi(5) * m.powi(4)
            + 54.0 * c.powi(4) * s.powi(4) * m * m)
            .sqrt();
    let a3 = a.cbrt();
    let t_star = (c * s * m * m / a3 + a3 / (c * s) + m) / 6.0;
    let bound = laplace_bound_at(c, sigma2, m, t_star)?;
    Ok(LaplaceBound { t_star, bound })
}

/// Default truncation mass constant for a centred Laplace base density
/// with variance `sigma2`: `24 * sup f = 24 / sqrt(2 sigma2)`.
pub fn laplace_default_m(sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::domain("variance must be positive"));
    }
    Ok(24.0 / (2.0 * sigma2).sqrt())
}

/// Monte Carlo comparison of correlation before and after smoothing.
#[derive(Debug, Clone)]
pub struct PreservationReport {
    /// Max absolute entrywise gap between the two correlation matrices.
    pub corr_gap: f64,
    /// Mean ratio of smoothed to raw variances across coordinates.
    pub inflation_observed: f64,
    /// `1 + c * psi_Y'(0) / psi_X'(0)`.
    pub inflation_theoretical: f64,
}

/// Samples `X` from the elliptical model and `Z = X + Y` with kernel noise
/// `Y` elliptical with scale matrix `c * Sigma`, then compares correlation
/// matrices and variance inflation against the closed form.
pub fn correlation_preservation_check(
    spec: &EllipticalSpec,
    kernel_gen: &CharGenerator,
    c: f64,
    n_mc: usize,
    rng: &mut Stream,
) -> Result<PreservationReport> {
    if c < 0.0 {
        return Err(Error::invalid("scale c must be nonnegative"));
    }
    if n_mc < 3 {
        return Err(Error::invalid("need at least 3 Monte Carlo draws"));
    }
    let dx = spec.generator().deriv_at_zero();
    let dy = kernel_gen.deriv_at_zero();
    if !dx.is_finite() || !dy.is_finite() {
        return Err(Error::unsupported(
            "correlation preservation needs finite second moments on both generators",
        ));
    }
    let x = spec.sample(n_mc, rng)?;
    let z = if c == 0.0 {
        x.clone()
    } else {
        let zero = nalgebra::DVector::zeros(spec.dim());
        let noise_spec = EllipticalSpec::new(zero, spec.sigma() * c, kernel_gen.clone())?;
        let y = noise_spec.sample(n_mc, rng)?;
        SampleMatrix::new(x.matrix() + y.matrix())?
    };
    let cov_x = x.covariance()?;
    let cov_z = z.covariance()?;
    let corr_x = crate::linalg::correlation_from_covariance(&cov_x)?;
    let corr_z = crate::linalg::correlation_from_covariance(&cov_z)?;
    let corr_gap = (&corr_x - &corr_z).abs().max();
    let d = spec.dim();
    let inflation_observed =
        (0..d).map(|j| cov_z[(j, j)] / cov_x[(j, j)]).sum::<f64>() / d as f64;
    Ok(PreservationReport {
        corr_gap,
        inflation_observed,
        inflation_theoretical: 1.0 + c * dy / dx,
    })
}

/// Batched Monte Carlo check that Kendall's tau is unchanged by smoothing.
#[derive(Debug, Clone)]
pub struct TauPreservationReport {
    pub tau_raw: f64,
    pub tau_smoothed: f64,
    /// Mean over batches of the per-batch tau difference.
    pub mean_diff: f64,
    /// Standard error of that mean across batches.
    pub std_error: f64,
}

/// Splits `n_mc` draws into `batches` equal batches, computes per-batch
/// `tau(X) - tau(Z)` with `Z = X + Y` as in
/// [`correlation_preservation_check`], and reports the batched mean and
/// standard error of the difference.
pub fn tau_preservation_check(
    spec: &EllipticalSpec,
    kernel_gen: &CharGenerator,
    c: f64,
    n_mc: usize,
    batches: usize,
    rng: &mut Stream,
) -> Result<TauPreservationReport> {
    if spec.dim() != 2 {
        return Err(Error::unsupported("tau preservation check is bivariate"));
    }
    if batches < 2 || n_mc < 4 * batches {
        return Err(Error::invalid(
            "need at least 2 batches of at least 4 draws each",
        ));
    }
    let per = n_mc / batches;
    let zero = nalgebra::DVector::zeros(2);
    let noise_spec = if c > 0.0 {
        Some(EllipticalSpec::new(zero, spec.sigma() * c, kernel_gen.clone())?)
    } else {
        None
    };
    let mut diffs = Vec::with_capacity(batches);
    let mut tau_x_acc = 0.0;
    let mut tau_z_acc = 0.0;
    for _ in 0..batches {
        let x = spec.sample(per, rng)?;
        let z = match &noise_spec {
            Some(ns) => {
                let y = ns.sample(per, rng)?;
                SampleMatrix::new(x.matrix() + y.matrix())?
            }
            None => x.clone(),
        };
        let tx = functionals::sample_tau(&x)?;
        let tz = functionals::sample_tau(&z)?;
        tau_x_acc += tx;
        tau_z_acc += tz;
        diffs.push(tx - tz);
    }
    let b = batches as f64;
    let mean_diff = diffs.iter().sum::<f64>() / b;
    let var = diffs
        .iter()
        .map(|d| (d - mean_diff) * (d - mean_diff))
        .sum::<f64>()
        / (b - 1.0);
    Ok(TauPreservationReport {
        tau_raw: tau_x_acc / b,
        tau_smoothed: tau_z_acc / b,
        mean_diff,
        std_error: (var / b).sqrt(),
    })
}
