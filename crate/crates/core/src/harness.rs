//! Config-driven simulation experiments comparing rank-based (raw) and
//! smooth-bootstrap estimates of copula functionals, emitting long-form
//! CSV rows suitable for boxplots and MSE curves.

use crate::bootstrap::{self, BandwidthRule, BootstrapConfig, Transform};
use crate::copulas::{self, CopulaSpec, Family};
use crate::error::{Error, Result};
use crate::functionals::{self, PolygonChain};
use crate::rng;
use crate::sample::SampleMatrix;
use crate::smoothing::KernelSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Which experiment a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Hausdorff distance of estimated copula level curves to the truth.
    LevelsetHausdorff,
    /// Bias and MSE of Kendall's tau and Spearman's rho estimates.
    DepmeasureMse,
    /// Sup-distance of estimated copula diagonals to the truth.
    Diagonal,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ExperimentKind::LevelsetHausdorff => "levelset_hausdorff",
            ExperimentKind::DepmeasureMse => "depmeasure_mse",
            ExperimentKind::Diagonal => "diagonal",
        };
        f.write_str(name)
    }
}

fn default_dim() -> usize {
    2
}
fn default_m() -> usize {
    2_000
}
fn default_reps() -> usize {
    200
}
fn default_bandwidth() -> String {
    "silverman".to_string()
}
fn default_grid_n() -> usize {
    200
}
fn default_diag_points() -> usize {
    99
}

/// Flat experiment configuration, readable from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Model string such as `clayton:2`, `gaussian:0.5`, `t:0.5,4`, `indep`.
    pub copula: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub n_list: Vec<usize>,
    /// Smooth bootstrap sample size.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Contour levels; required for the level-set experiment only.
    #[serde(default)]
    pub t_list: Vec<f64>,
    /// Monte Carlo replications per cell.
    #[serde(default = "default_reps", alias = "M_reps")]
    pub m_reps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Bandwidth rule: `silverman`, `cv`, or `cv:lo:hi:step`.
    #[serde(default = "default_bandwidth")]
    pub bandwidth: String,
    /// Cells per axis of the contour-extraction lattice.
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    /// Interior grid points `k/(p+1)` used for the diagonal experiment.
    #[serde(default = "default_diag_points")]
    pub diagonal_points: usize,
}

impl ExperimentConfig {
    /// Parses and validates a TOML config.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list must be nonempty".into()));
        }
        if self.n_list.iter().any(|&n| n < 5) {
            return Err(Error::Config("every sample size must be at least 5".into()));
        }
        if self.m_reps < 1 {
            return Err(Error::Config("m_reps must be at least 1".into()));
        }
        if self.m < 1 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.t_list.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::Config("contour levels must lie in (0,1)".into()));
        }
        if self.grid_n < 2 {
            return Err(Error::Config("grid_n must be at least 2".into()));
        }
        if self.diagonal_points < 1 {
            return Err(Error::Config("diagonal_points must be at least 1".into()));
        }
        self.copula_spec()?;
        self.bandwidth_rule()?;
        Ok(())
    }

    pub fn copula_spec(&self) -> Result<CopulaSpec> {
        CopulaSpec::parse(&self.copula, self.dim)
    }

    pub fn bandwidth_rule(&self) -> Result<BandwidthRule> {
        parse_bandwidth_rule(&self.bandwidth)
    }
}

/// Parses a bandwidth rule string: `silverman`, `cv`, or `cv:lo:hi:step`.
pub fn parse_bandwidth_rule(text: &str) -> Result<BandwidthRule> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        ["silverman"] => Ok(BandwidthRule::Silverman),
        ["cv"] => default_cv_rule(0.1, 1.5, 0.1),
        ["cv", lo, hi, step] => {
            let parse = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::Config(format!("bad cv grid number '{s}'")))
            };
            default_cv_rule(parse(lo)?, parse(hi)?, parse(step)?)
        }
        _ => Err(Error::Config(format!("unknown bandwidth rule '{text}'"))),
    }
}

fn default_cv_rule(lo: f64, hi: f64, step: f64) -> Result<BandwidthRule> {
    if !(lo > 0.0 && step > 0.0 && hi >= lo) {
        return Err(Error::Config("cv grid needs 0 < lo <= hi and step > 0".into()));
    }
    let mut grid = Vec::new();
    let mut h = lo;
    while h <= hi + 1e-12 {
        grid.push(h);
        h += step;
    }
    Ok(BandwidthRule::Cv {
        h_grid: grid,
        bootstrap_reps: 25,
        gh_order: 15,
    })
}

/// One long-form output row. `rep` is a replicate index for data rows and
/// one of `median`, `q1`, `q3`, `bias`, `mse`, `missing` for summary rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub family: String,
    pub param: String,
    pub stat: String,
    pub n: usize,
    pub t: String,
    pub method: String,
    pub rep: String,
    pub value: f64,
}

/// Serializes rows (header first) to any writer.
pub fn write_table_csv<W: std::io::Write>(rows: &[Row], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn family_param(spec: &CopulaSpec) -> (String, String) {
    match spec.family() {
        Family::Independence => ("indep".into(), String::new()),
        Family::Clayton { theta } => ("clayton".into(), format!("{theta}")),
        Family::Gumbel { theta } => ("gumbel".into(), format!("{theta}")),
        Family::Joe { theta } => ("joe".into(), format!("{theta}")),
        Family::Gaussian { rho } => ("gaussian".into(), format!("{rho}")),
        Family::StudentT { rho, nu } => ("t".into(), format!("{rho},{nu}")),
    }
}

/// Shared fixed columns for one experiment run.
struct RowBuilder {
    experiment: String,
    family: String,
    param: String,
}

impl RowBuilder {
    fn new(kind: ExperimentKind, spec: &CopulaSpec) -> Self {
        let (family, param) = family_param(spec);
        RowBuilder {
            experiment: kind.to_string(),
            family,
            param,
        }
    }

    fn row(&self, stat: &str, n: usize, t: Option<f64>, method: &str, rep: String, value: f64) -> Row {
        Row {
            experiment: self.experiment.clone(),
            family: self.family.clone(),
            param: self.param.clone(),
            stat: stat.to_string(),
            n,
            t: t.map(|x| x.to_string()).unwrap_or_default(),
            method: method.to_string(),
            rep,
            value,
        }
    }
}

/// Linear-interpolation quantile of an ascending-sorted slice (the common
/// spreadsheet/NumPy convention); NaN when empty.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Appends data rows for present replicates plus median/q1/q3 and a
/// missing-count row; bias and MSE rows when a true value is supplied.
#[allow(clippy::too_many_arguments)]
fn push_cell(
    rows: &mut Vec<Row>,
    rb: &RowBuilder,
    stat: &str,
    n: usize,
    t: Option<f64>,
    method: &str,
    values: &[(usize, f64)],
    missing: usize,
    truth: Option<f64>,
) {
    for &(rep, v) in values {
        rows.push(rb.row(stat, n, t, method, rep.to_string(), v));
    }
    let mut sorted: Vec<f64> = values.iter().map(|x| x.1).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    for (label, p) in [("q1", 0.25), ("median", 0.5), ("q3", 0.75)] {
        rows.push(rb.row(stat, n, t, method, label.to_string(), quantile_sorted(&sorted, p)));
    }
    if let Some(truth) = truth {
        let k = sorted.len() as f64;
        let (bias, mse) = if sorted.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (
                sorted.iter().sum::<f64>() / k - truth,
                sorted.iter().map(|v| (v - truth) * (v - truth)).sum::<f64>() / k,
            )
        };
        rows.push(rb.row(stat, n, t, method, "bias".to_string(), bias));
        rows.push(rb.row(stat, n, t, method, "mse".to_string(), mse));
    }
    rows.push(rb.row(stat, n, t, method, "missing".to_string(), missing as f64));
}

fn bootstrap_cfg(cfg: &ExperimentConfig) -> Result<BootstrapConfig> {
    Ok(BootstrapConfig {
        m: cfg.m,
        b_reps: 1,
        kernel: KernelSpec::Gauss,
        bandwidth_rule: cfg.bandwidth_rule()?,
        transform: Transform::NormalScores,
        seed: cfg.seed,
    })
}

/// Splits cell values into present replicates and a missing count.
fn split_present(cell: &[Option<f64>]) -> (Vec<(usize, f64)>, usize) {
    let mut present = Vec::new();
    let mut missing = 0;
    for (rep, v) in cell.iter().enumerate() {
        match v {
            Some(x) => present.push((rep, *x)),
            None => missing += 1,
        }
    }
    (present, missing)
}

/// Hausdorff distances of raw and smooth level-curve estimates to the true
/// Clayton level curve, per (n, t, method), with quartile summaries.
pub fn run_levelset_experiment(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    cfg.validate()?;
    if cfg.experiment != ExperimentKind::LevelsetHausdorff {
        return Err(Error::Config("config is not a levelset_hausdorff experiment".into()));
    }
    let spec = cfg.copula_spec()?;
    let theta = match spec.family() {
        Family::Clayton { theta } if theta > 0.0 && spec.dim() == 2 => theta,
        _ => {
            return Err(Error::unsupported(
                "the level-set experiment needs a bivariate Clayton model with positive parameter",
            ))
        }
    };
    if cfg.t_list.is_empty() {
        return Err(Error::Config("t_list must be nonempty for the level-set experiment".into()));
    }
    let truths: Vec<PolygonChain> = cfg
        .t_list
        .iter()
        .map(|&t| copulas::clayton_level_boundary(theta, t, 2_000))
        .collect::<Result<_>>()?;
    let bcfg = bootstrap_cfg(cfg)?;
    let rb = RowBuilder::new(cfg.experiment, &spec);

    let mut rows = Vec::new();
    for (ni, &n) in cfg.n_list.iter().enumerate() {
        // per rep: for each t, the [raw, smooth] distances (None = no contour)
        let per_rep: Vec<Vec<[Option<f64>; 2]>> = (0..cfg.m_reps)
            .into_par_iter()
            .map(|rep| -> Result<Vec<[Option<f64>; 2]>> {
                let mut stream = rng::substream(cfg.seed, (ni * cfg.m_reps + rep) as u64);
                let data = copulas::sample_copula(&spec, n, &mut stream)?;
                let smooth = bootstrap::smooth_bootstrap_copula_sample(&data, &bcfg, &mut stream)?;
                let data_po = data.pseudo_observations();
                let smooth_po = smooth.pseudo_observations();
                let mut out = Vec::with_capacity(cfg.t_list.len());
                for (ti, &t) in cfg.t_list.iter().enumerate() {
                    let mut pair = [None, None];
                    for (slot, sample) in [&data_po, &smooth_po].into_iter().enumerate() {
                        pair[slot] = match functionals::estimate_level_boundary(sample, t, cfg.grid_n)
                        {
                            Ok(chain) => Some(functionals::hausdorff_distance(&chain, &truths[ti])),
                            Err(Error::EmptyContour { .. }) => None,
                            Err(e) => return Err(e),
                        };
                    }
                    out.push(pair);
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;

        for (ti, &t) in cfg.t_list.iter().enumerate() {
            for (mi, method) in ["raw", "smooth"].into_iter().enumerate() {
                let cell: Vec<Option<f64>> = per_rep.iter().map(|r| r[ti][mi]).collect();
                let (present, missing) = split_present(&cell);
                push_cell(&mut rows, &rb, "hausdorff", n, Some(t), method, &present, missing, None);
            }
        }
    }
    Ok(rows)
}

/// Raw and smooth estimates of Kendall's tau and Spearman's rho per
/// replicate, with quartile, bias and MSE summaries against the model
/// truth.
pub fn run_depmeasure_experiment(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    cfg.validate()?;
    if cfg.experiment != ExperimentKind::DepmeasureMse {
        return Err(Error::Config("config is not a depmeasure_mse experiment".into()));
    }
    let spec = cfg.copula_spec()?;
    if spec.dim() != 2 || spec.family() == Family::Independence {
        return Err(Error::unsupported(
            "the dependence-measure experiment needs a bivariate non-trivial family",
        ));
    }
    let tau_truth = copulas::true_tau(&spec)?;
    let rho_truth = copulas::true_rho_s(&spec)?;
    let bcfg = bootstrap_cfg(cfg)?;
    let rb = RowBuilder::new(cfg.experiment, &spec);

    let mut rows = Vec::new();
    for (ni, &n) in cfg.n_list.iter().enumerate() {
        // per rep: [raw tau, smooth tau, raw rho, smooth rho]
        let per_rep: Vec<[f64; 4]> = (0..cfg.m_reps)
            .into_par_iter()
            .map(|rep| -> Result<[f64; 4]> {
                let mut stream = rng::substream(cfg.seed, (ni * cfg.m_reps + rep) as u64);
                let data = copulas::sample_copula(&spec, n, &mut stream)?;
                let smooth = bootstrap::smooth_bootstrap_copula_sample(&data, &bcfg, &mut stream)?;
                Ok([
                    functionals::sample_tau(&data)?,
                    functionals::sample_tau(&smooth)?,
                    functionals::sample_rho_s(&data)?,
                    functionals::sample_rho_s(&smooth)?,
                ])
            })
            .collect::<Result<_>>()?;

        for (stat, truth, offset) in [("tau", tau_truth, 0), ("rho_s", rho_truth, 2)] {
            for (mi, method) in ["raw", "smooth"].into_iter().enumerate() {
                let present: Vec<(usize, f64)> = per_rep
                    .iter()
                    .enumerate()
                    .map(|(rep, vals)| (rep, vals[offset + mi]))
                    .collect();
                push_cell(&mut rows, &rb, stat, n, None, method, &present, 0, Some(truth));
            }
        }
    }
    Ok(rows)
}

/// True Clayton diagonal `u -> C(u, ..., u)`; independence is the zero-
/// parameter limit `u^d`.
fn clayton_diagonal(theta: f64, d: usize, u: f64) -> f64 {
    if theta == 0.0 {
        return u.powi(d as i32);
    }
    let s = (d as f64) * (u.powf(-theta) - 1.0) + 1.0;
    if s <= 0.0 {
        return 0.0;
    }
    s.powf(-1.0 / theta)
}

/// Sup-distance of raw and smooth empirical copula diagonals to the true
/// diagonal on an interior grid, per (n, method).
pub fn run_diagonal_experiment(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    cfg.validate()?;
    if cfg.experiment != ExperimentKind::Diagonal {
        return Err(Error::Config("config is not a diagonal experiment".into()));
    }
    let spec = cfg.copula_spec()?;
    let theta = match spec.family() {
        Family::Clayton { theta } => theta,
        Family::Independence => 0.0,
        _ => {
            return Err(Error::unsupported(
                "the diagonal experiment needs a Clayton (or independence) model",
            ))
        }
    };
    let d = spec.dim();
    let p = cfg.diagonal_points;
    let u_grid: Vec<f64> = (1..=p).map(|k| k as f64 / (p + 1) as f64).collect();
    let truth: Vec<f64> = u_grid.iter().map(|&u| clayton_diagonal(theta, d, u)).collect();
    let bcfg = bootstrap_cfg(cfg)?;
    let rb = RowBuilder::new(cfg.experiment, &spec);

    let sup_gap = |sample: &SampleMatrix| -> Result<f64> {
        let diag = functionals::empirical_diagonal(sample, &u_grid)?;
        Ok(diag
            .values
            .iter()
            .zip(&truth)
            .map(|(v, t)| (v - t).abs())
            .fold(0.0, f64::max))
    };

    let mut rows = Vec::new();
    for (ni, &n) in cfg.n_list.iter().enumerate() {
        let per_rep: Vec<[f64; 2]> = (0..cfg.m_reps)
            .into_par_iter()
            .map(|rep| -> Result<[f64; 2]> {
                let mut stream = rng::substream(cfg.seed, (ni * cfg.m_reps + rep) as u64);
                let data = copulas::sample_copula(&spec, n, &mut stream)?;
                let smooth = bootstrap::smooth_bootstrap_copula_sample(&data, &bcfg, &mut stream)?;
                Ok([
                    sup_gap(&data.pseudo_observations())?,
                    sup_gap(&smooth.pseudo_observations())?,
                ])
            })
            .collect::<Result<_>>()?;

        for (mi, method) in ["raw", "smooth"].into_iter().enumerate() {
            let present: Vec<(usize, f64)> = per_rep
                .iter()
                .enumerate()
                .map(|(rep, vals)| (rep, vals[mi]))
                .collect();
            push_cell(&mut rows, &rb, "sup_gap", n, None, method, &present, 0, None);
        }
    }
    Ok(rows)
}

/// Dispatches on the configured experiment kind.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    match cfg.experiment {
        ExperimentKind::LevelsetHausdorff => run_levelset_experiment(cfg),
        ExperimentKind::DepmeasureMse => run_depmeasure_experiment(cfg),
        ExperimentKind::Diagonal => run_diagonal_experiment(cfg),
    }
}
