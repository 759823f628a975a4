//! Smooth bootstrap sampling from the kernel estimate of a copula, the
//! plain nonparametric bootstrap, and bootstrap distributions of rank
//! statistics.
//!
//! The smooth draw is: pick a data row uniformly, add kernel noise shaped
//! by the bandwidth, then push each coordinate through its own mixture
//! marginal CDF. The last step makes every output margin exactly uniform.

use crate::bandwidth::{self, QuadratureRule, WeightFunction};
use crate::error::{Error, Result};
use crate::functionals;
use crate::rng::{self, Stream};
use crate::sample::SampleMatrix;
use crate::smoothing::{KernelSpec, SmoothedModel};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Largest pseudo-uniform the sampler will emit; keeps boundary values out
/// of downstream quantile transforms.
const UNIT_OPEN_MAX: f64 = 1.0 - 1e-16;

/// How the bandwidth matrix is chosen from the (transformed) data.
#[derive(Debug, Clone)]
pub enum BandwidthRule {
    /// `H = silverman_h(d, n) * sigma_hat`.
    Silverman,
    /// Grid cross-validation with `H = h * sigma_hat`, optionally averaged
    /// over bootstrap resamples of the criterion.
    Cv {
        h_grid: Vec<f64>,
        bootstrap_reps: usize,
        gh_order: usize,
    },
    /// A caller-supplied SPD matrix.
    Fixed(DMatrix<f64>),
}

/// Optional coordinatewise map applied before smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Smooth the data on its own scale.
    None,
    /// Map unit-cube data to the real line by the standard normal
    /// quantile, smooth there, and let the mixture margins map back.
    NormalScores,
}

/// Rank statistic whose bootstrap distribution is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalTag {
    Tau,
    RhoS,
}

impl FunctionalTag {
    pub fn apply(self, sample: &SampleMatrix) -> Result<f64> {
        match self {
            Self::Tau => functionals::sample_tau(sample),
            Self::RhoS => functionals::sample_rho_s(sample),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "tau" => Ok(Self::Tau),
            "rho" | "rho_s" => Ok(Self::RhoS),
            other => Err(Error::invalid(format!("unknown functional '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    /// Rows per bootstrap sample.
    pub m: usize,
    /// Number of bootstrap replications.
    pub b_reps: usize,
    pub kernel: KernelSpec,
    pub bandwidth_rule: BandwidthRule,
    pub transform: Transform,
    pub seed: u64,
}

impl BootstrapConfig {
    fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::invalid("bootstrap sample size m must be positive"));
        }
        if self.b_reps < 1 {
            return Err(Error::invalid("replication count B must be positive"));
        }
        Ok(())
    }
}

/// Accepts data for the copula pipeline: strictly interior unit-cube data
/// passes through, raw real-valued data is rank-transformed to
/// pseudo-observations, and boundary values (exact 0 or 1) are rejected
/// because their normal scores are infinite.
pub fn prepare_unit_data(data: &SampleMatrix) -> Result<SampleMatrix> {
    if data.all_in_open_unit_cube() {
        return Ok(data.clone());
    }
    if !data.all_in_closed_unit_cube() {
        return Ok(data.pseudo_observations());
    }
    Err(Error::domain(
        "unit-cube data contains exact 0/1 entries; pass raw data or move points inside (0,1)",
    ))
}

/// The data-dependent part of the smooth bootstrap, shared by every
/// replication: transformed data, bandwidth, and fitted mixture margins.
pub(crate) struct PreparedBootstrap {
    model: SmoothedModel,
}

impl PreparedBootstrap {
    pub(crate) fn new(
        data_u: &SampleMatrix,
        cfg: &BootstrapConfig,
        rng: &mut Stream,
    ) -> Result<Self> {
        cfg.validate()?;
        if data_u.n() < 2 {
            return Err(Error::invalid("smooth bootstrap needs at least 2 rows"));
        }
        let base = match cfg.transform {
            Transform::NormalScores => {
                if !data_u.all_in_open_unit_cube() {
                    return Err(Error::domain(
                        "normal-scores transform needs all entries strictly inside (0,1)",
                    ));
                }
                data_u.normal_scores()?
            }
            Transform::None => {
                if data_u.matrix().iter().any(|v| !v.is_finite()) {
                    return Err(Error::domain("data contains non-finite entries"));
                }
                data_u.clone()
            }
        };
        // The covariance that scales the bandwidth is computed after the
        // transform, on the scale actually being smoothed.
        let h = match &cfg.bandwidth_rule {
            BandwidthRule::Silverman => {
                let h = bandwidth::silverman_h(base.dim(), base.n())?;
                let cov = base.covariance()?;
                // With fewer rows than columns the full empirical covariance
                // is singular; drop the off-diagonal and let the marginal
                // variances alone scale the bandwidth.
                if crate::linalg::check_spd(&cov, "bandwidth").is_ok() {
                    cov * h
                } else {
                    DMatrix::from_diagonal(&(cov.diagonal() * h))
                }
            }
            BandwidthRule::Cv {
                h_grid,
                bootstrap_reps,
                gh_order,
            } => {
                let rule = QuadratureRule::gauss_hermite_tensor(*gh_order, base.dim())?;
                let weight = WeightFunction::at_sample_mean(&base);
                let cv = bandwidth::select_bandwidth_cv(
                    &base,
                    h_grid,
                    &weight,
                    &rule,
                    cfg.kernel,
                    *bootstrap_reps,
                    rng,
                )?;
                cv.h_matrix
            }
            BandwidthRule::Fixed(h) => h.clone(),
        };
        let model = SmoothedModel::fit(base, cfg.kernel, h)?;
        Ok(Self { model })
    }

    #[cfg(test)]
    pub(crate) fn model(&self) -> &SmoothedModel {
        &self.model
    }

    /// One smooth draw from data row `i` with standard-normal noise `y`:
    /// `z = x_i + H^{1/2} y`, returned as the marginal CDF values of `z`.
    pub(crate) fn draw_row(&self, i: usize, noise: &[f64]) -> Result<Vec<f64>> {
        let d = self.model.dim();
        let sqrt_h = self.model.sqrt_bandwidth();
        let mut row = vec![0.0; d];
        for j in 0..d {
            let mut z = self.model.data().get(i, j);
            for (k, y) in noise.iter().enumerate() {
                z += sqrt_h[(j, k)] * y;
            }
            row[j] = self
                .model
                .marginal_cdf(j, z)?
                .clamp(f64::MIN_POSITIVE, UNIT_OPEN_MAX);
        }
        Ok(row)
    }

    /// `m` smooth draws; per draw the index is taken from the stream
    /// first, then the noise vector, so outputs are reproducible.
    fn draw_matrix(&self, m: usize, rng: &mut Stream) -> Result<SampleMatrix> {
        let n = self.model.n();
        let d = self.model.dim();
        let mut out = DMatrix::zeros(m, d);
        let mut noise = vec![0.0; d];
        for l in 0..m {
            let i = rng.random_range(0..n);
            for y in noise.iter_mut() {
                *y = StandardNormal.sample(rng);
            }
            let row = self.draw_row(i, &noise)?;
            for j in 0..d {
                out[(l, j)] = row[j];
            }
        }
        SampleMatrix::new(out)
    }
}

/// Smooth bootstrap sample of size `cfg.m` with uniform margins.
///
/// When the bandwidth rule is cross-validation, its resampling indices are
/// drawn from `rng` before any smooth draws, so a fixed seed fixes the
/// whole run.
pub fn smooth_bootstrap_copula_sample(
    data_u: &SampleMatrix,
    cfg: &BootstrapConfig,
    rng: &mut Stream,
) -> Result<SampleMatrix> {
    let prep = PreparedBootstrap::new(data_u, cfg, rng)?;
    prep.draw_matrix(cfg.m, rng)
}

/// `m` rows drawn with replacement from `data`.
pub fn plain_bootstrap(data: &SampleMatrix, m: usize, rng: &mut Stream) -> Result<SampleMatrix> {
    if m < 1 {
        return Err(Error::invalid("bootstrap sample size m must be positive"));
    }
    let n = data.n();
    let d = data.dim();
    let mut out = DMatrix::zeros(m, d);
    for l in 0..m {
        let i = rng.random_range(0..n);
        for j in 0..d {
            out[(l, j)] = data.get(i, j);
        }
    }
    SampleMatrix::new(out)
}

/// Bootstrap distribution of a rank statistic: `cfg.b_reps` values, each
/// computed on an independent smooth bootstrap sample of size `cfg.m`.
///
/// Replications run in parallel; replication `b` uses a stream derived
/// from a base value drawn once from `rng`, so results do not depend on
/// scheduling.
pub fn functional_distribution(
    data_u: &SampleMatrix,
    cfg: &BootstrapConfig,
    functional: FunctionalTag,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    let prep = PreparedBootstrap::new(data_u, cfg, rng)?;
    let base: u64 = rng.random();
    (0..cfg.b_reps)
        .into_par_iter()
        .map(|b| -> Result<f64> {
            let mut stream = rng::substream(base, b as u64);
            let sample = prep.draw_matrix(cfg.m, &mut stream)?;
            functional.apply(&sample)
        })
        .collect()
}
