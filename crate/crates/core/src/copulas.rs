//! Parametric copula families and the empirical copula.
//!
//! Provides samplers (Marshall–Olkin frailty constructions for the
//! Archimedean families, elliptical transforms for the Gaussian and
//! Student-t families), closed-form or quadrature CDFs, and the closed-form
//! Kendall/Spearman values used as ground truth by the experiment harness.

use crate::error::{Error, Result};
use crate::functionals::PolygonChain;
use crate::quad;
use crate::rng::Stream;
use crate::sample::SampleMatrix;
use crate::special;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};
use std::f64::consts::PI;
use std::fmt;

/// Largest value strictly below 1 that sampled pseudo-uniforms are clamped
/// to; keeps astronomically rare boundary hits out of downstream quantile
/// transforms.
const UNIT_OPEN_MAX: f64 = 1.0 - 1e-16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Independence,
    Clayton { theta: f64 },
    Gumbel { theta: f64 },
    Joe { theta: f64 },
    Gaussian { rho: f64 },
    StudentT { rho: f64, nu: f64 },
}

/// A validated copula model: family parameters plus dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaSpec {
    family: Family,
    dim: usize,
}

impl CopulaSpec {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("a copula needs dimension at least 2"));
        }
        match family {
            Family::Independence => {}
            Family::Clayton { theta } => {
                if !theta.is_finite() || theta == 0.0 || theta <= -1.0 {
                    return Err(Error::invalid(format!(
                        "Clayton parameter must lie in (-1, inf) \\ {{0}}, got {theta}"
                    )));
                }
                if theta < 0.0 && dim != 2 {
                    return Err(Error::invalid(
                        "negative Clayton dependence is only defined for dimension 2",
                    ));
                }
            }
            Family::Gumbel { theta } | Family::Joe { theta } => {
                if !theta.is_finite() || theta < 1.0 {
                    return Err(Error::invalid(format!(
                        "Gumbel/Joe parameter must be >= 1, got {theta}"
                    )));
                }
            }
            Family::Gaussian { rho } => {
                if !(rho.abs() < 1.0) {
                    return Err(Error::invalid(format!(
                        "Gaussian copula needs |rho| < 1, got {rho}"
                    )));
                }
                if dim != 2 {
                    return Err(Error::unsupported(
                        "elliptical copulas are implemented for dimension 2",
                    ));
                }
            }
            Family::StudentT { rho, nu } => {
                if !(rho.abs() < 1.0) || !(nu > 0.0) {
                    return Err(Error::invalid(format!(
                        "t copula needs |rho| < 1 and nu > 0, got rho={rho}, nu={nu}"
                    )));
                }
                if dim != 2 {
                    return Err(Error::unsupported(
                        "elliptical copulas are implemented for dimension 2",
                    ));
                }
            }
        }
        Ok(Self { family, dim })
    }

    /// Parses the config syntax: `clayton:theta`, `gumbel:theta`,
    /// `joe:theta`, `gaussian:rho`, `t:rho,nu`, `indep`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let text = text.trim();
        let (name, args) = match text.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (text, None),
        };
        let one = |args: Option<&str>| -> Result<f64> {
            args.ok_or_else(|| Error::invalid(format!("family '{name}' needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad parameter in '{text}': {e}")))
        };
        let family = match name {
            "indep" | "independence" => Family::Independence,
            "clayton" => Family::Clayton { theta: one(args)? },
            "gumbel" => Family::Gumbel { theta: one(args)? },
            "joe" => Family::Joe { theta: one(args)? },
            "gaussian" => Family::Gaussian { rho: one(args)? },
            "t" | "student_t" => {
                let a = args.ok_or_else(|| {
                    Error::invalid("t copula needs parameters 'rho,nu'")
                })?;
                let (r, n) = a.split_once(',').ok_or_else(|| {
                    Error::invalid("t copula needs parameters 'rho,nu'")
                })?;
                Family::StudentT {
                    rho: r.trim().parse().map_err(|e| {
                        Error::invalid(format!("bad rho in '{text}': {e}"))
                    })?,
                    nu: n.trim().parse().map_err(|e| {
                        Error::invalid(format!("bad nu in '{text}': {e}"))
                    })?,
                }
            }
            other => {
                return Err(Error::invalid(format!("unknown copula family '{other}'")))
            }
        };
        Self::new(family, dim)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl fmt::Display for CopulaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Independence => write!(f, "indep"),
            Family::Clayton { theta } => write!(f, "clayton:{theta}"),
            Family::Gumbel { theta } => write!(f, "gumbel:{theta}"),
            Family::Joe { theta } => write!(f, "joe:{theta}"),
            Family::Gaussian { rho } => write!(f, "gaussian:{rho}"),
            Family::StudentT { rho, nu } => write!(f, "t:{rho},{nu}"),
        }
    }
}

/// Copula CDF at a point of the closed unit cube.
///
/// Archimedean families use their closed forms; the Gaussian and Student-t
/// copulas reduce to bivariate elliptical CDFs (exact Gauss–Legendre form
/// for the Gaussian, conditional 1-D quadrature for the t).
pub fn copula_cdf(spec: &CopulaSpec, u: &[f64]) -> Result<f64> {
    if u.len() != spec.dim {
        return Err(Error::invalid(format!(
            "point has {} coordinates, copula has {}",
            u.len(),
            spec.dim
        )));
    }
    if u.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::domain("copula argument outside the unit cube"));
    }
    if u.iter().any(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let d = u.len() as f64;
    let value = match spec.family {
        Family::Independence => u.iter().product(),
        Family::Clayton { theta } => {
            let s: f64 = u.iter().map(|x| x.powf(-theta)).sum::<f64>() - d + 1.0;
            s.max(0.0).powf(-1.0 / theta)
        }
        Family::Gumbel { theta } => {
            let s: f64 = u.iter().map(|x| (-x.ln()).powf(theta)).sum();
            (-s.powf(1.0 / theta)).exp()
        }
        Family::Joe { theta } => {
            let p: f64 = u.iter().map(|x| 1.0 - (1.0 - x).powf(theta)).product();
            1.0 - (1.0 - p).powf(1.0 / theta)
        }
        Family::Gaussian { rho } => {
            let (u1, u2) = (u[0], u[1]);
            if u1 == 1.0 && u2 == 1.0 {
                1.0
            } else if u1 == 1.0 {
                u2
            } else if u2 == 1.0 {
                u1
            } else {
                special::bvn_cdf(
                    special::norm_quantile(u1)?,
                    special::norm_quantile(u2)?,
                    rho,
                )?
            }
        }
        Family::StudentT { rho, nu } => {
            let (u1, u2) = (u[0], u[1]);
            if u1 == 1.0 && u2 == 1.0 {
                1.0
            } else if u1 == 1.0 {
                u2
            } else if u2 == 1.0 {
                u1
            } else {
                let x = special::student_t_quantile(u1, nu)?;
                let y = special::student_t_quantile(u2, nu)?;
                t_copula_cdf_z(x, y, rho, nu)?
            }
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Bivariate t copula CDF at quantile-scale arguments: integrates the t
/// density against the conditional t(nu+1) distribution of the second
/// coordinate.
fn t_copula_cdf_z(x: f64, y: f64, rho: f64, nu: f64) -> Result<f64> {
    let marginal = StudentsT::new(0.0, 1.0, nu)
        .map_err(|e| Error::invalid(format!("t copula: {e}")))?;
    let conditional = StudentsT::new(0.0, 1.0, nu + 1.0)
        .map_err(|e| Error::invalid(format!("t copula: {e}")))?;
    let s2 = 1.0 - rho * rho;
    let lower = marginal.inverse_cdf(1e-13).min(x - 10.0);
    quad::integrate(
        |s| {
            let scale = (s2 * (nu + s * s) / (nu + 1.0)).sqrt();
            marginal.pdf(s) * conditional.cdf((y - rho * s) / scale)
        },
        lower,
        x,
        1e-9,
        1e-8,
    )
}

/// Draws `n` iid rows from the copula.
pub fn sample_copula(spec: &CopulaSpec, n: usize, rng: &mut Stream) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::invalid("cannot sample an empty matrix"));
    }
    let d = spec.dim;
    let mut rows = vec![0.0f64; n * d];
    match spec.family {
        Family::Independence => {
            for v in rows.iter_mut() {
                *v = open_unit(rng);
            }
        }
        Family::Clayton { theta } if theta > 0.0 => {
            let gamma = Gamma::new(1.0 / theta, 1.0)
                .map_err(|e| Error::invalid(format!("Clayton frailty: {e}")))?;
            for i in 0..n {
                let w: f64 = gamma.sample(rng);
                for j in 0..d {
                    let e: f64 = Exp1.sample(rng);
                    rows[i * d + j] = (1.0 + e / w).powf(-1.0 / theta);
                }
            }
        }
        Family::Clayton { theta } => {
            // Negative dependence (bivariate): conditional-distribution
            // inversion, since the frailty construction needs theta > 0.
            for i in 0..n {
                let u = open_unit(rng);
                let p = open_unit(rng);
                let base = u.powf(-theta) * (p.powf(-theta / (1.0 + theta)) - 1.0) + 1.0;
                rows[i * d] = u;
                rows[i * d + 1] = base.max(f64::MIN_POSITIVE).powf(-1.0 / theta);
            }
        }
        Family::Gumbel { theta } => {
            if theta == 1.0 {
                for v in rows.iter_mut() {
                    *v = open_unit(rng);
                }
            } else {
                let alpha = 1.0 / theta;
                for i in 0..n {
                    let w = positive_stable(alpha, rng);
                    for j in 0..d {
                        let e: f64 = Exp1.sample(rng);
                        rows[i * d + j] = (-(e / w).powf(alpha)).exp();
                    }
                }
            }
        }
        Family::Joe { theta } => {
            if theta == 1.0 {
                for v in rows.iter_mut() {
                    *v = open_unit(rng);
                }
            } else {
                let alpha = 1.0 / theta;
                for i in 0..n {
                    let w = sibuya(alpha, rng);
                    for j in 0..d {
                        let e: f64 = Exp1.sample(rng);
                        let t = e / w;
                        rows[i * d + j] = 1.0 - (-(-t).exp_m1()).powf(alpha);
                    }
                }
            }
        }
        Family::Gaussian { rho } => {
            let b = (1.0 - rho * rho).sqrt();
            for i in 0..n {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                rows[i * d] = special::norm_cdf(z1);
                rows[i * d + 1] = special::norm_cdf(rho * z1 + b * z2);
            }
        }
        Family::StudentT { rho, nu } => {
            let chi = ChiSquared::new(nu)
                .map_err(|e| Error::invalid(format!("t copula sampling: {e}")))?;
            let tdist = StudentsT::new(0.0, 1.0, nu)
                .map_err(|e| Error::invalid(format!("t copula sampling: {e}")))?;
            let b = (1.0 - rho * rho).sqrt();
            for i in 0..n {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                let s: f64 = chi.sample(rng);
                let r = (nu / s.max(f64::MIN_POSITIVE)).sqrt();
                rows[i * d] = tdist.cdf(r * z1);
                rows[i * d + 1] = tdist.cdf(r * (rho * z1 + b * z2));
            }
        }
    }
    for v in rows.iter_mut() {
        *v = v.clamp(f64::MIN_POSITIVE, UNIT_OPEN_MAX);
    }
    SampleMatrix::new(DMatrix::from_row_slice(n, d, &rows))
}

fn open_unit(rng: &mut Stream) -> f64 {
    loop {
        let v: f64 = rng.random();
        if v > 0.0 {
            return v.min(UNIT_OPEN_MAX);
        }
    }
}

/// One-sided positive stable draw with Laplace transform exp(-t^alpha),
/// via the Kanter representation.
fn positive_stable(alpha: f64, rng: &mut Stream) -> f64 {
    let u = open_unit(rng) * PI;
    let e: f64 = loop {
        let e: f64 = Exp1.sample(rng);
        if e > 0.0 {
            break e;
        }
    };
    let num = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    num * (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha)
}

/// Sibuya(alpha) draw by exact inversion of the survival function
/// S(k) = Gamma(k+1-alpha) / (Gamma(1-alpha) k!), evaluated in log space.
fn sibuya(alpha: f64, rng: &mut Stream) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let q = open_unit(rng);
    let ln_gamma_1ma = ln_gamma(1.0 - alpha);
    let survival = |k: f64| -> f64 {
        (ln_gamma(k + 1.0 - alpha) - ln_gamma_1ma - ln_gamma(k + 1.0)).exp()
    };
    if survival(1.0) <= q {
        return 1.0;
    }
    // S(k) ~ k^{-alpha} / Gamma(1-alpha); bracket the inversion target.
    let guess = (q * ln_gamma_1ma.exp()).powf(-1.0 / alpha);
    let mut hi = (2.0 * guess + 2.0).max(2.0);
    while survival(hi) > q {
        hi *= 2.0;
    }
    let mut lo = 1.0f64;
    // Invariant: S(lo) > q >= S(hi); return the smallest integer k with
    // S(k) <= q.
    while hi - lo > 0.5 {
        let mid = ((lo + hi) / 2.0).floor().max(lo + 1.0).min(hi);
        if survival(mid) <= q {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1.0 {
            break;
        }
    }
    hi
}

/// Population Kendall's tau of the family.
///
/// Closed forms everywhere except Joe, which integrates the Archimedean
/// generator ratio.
pub fn true_tau(spec: &CopulaSpec) -> Result<f64> {
    match spec.family {
        Family::Independence => Ok(0.0),
        Family::Clayton { theta } => Ok(theta / (theta + 2.0)),
        Family::Gumbel { theta } => Ok(1.0 - 1.0 / theta),
        Family::Gaussian { rho } | Family::StudentT { rho, .. } => {
            Ok(2.0 * rho.asin() / PI)
        }
        Family::Joe { theta } => {
            let integrand = |t: f64| -> f64 {
                if t <= 0.0 || t >= 1.0 {
                    return 0.0;
                }
                let omt = 1.0 - t;
                let g = 1.0 - omt.powf(theta);
                if g <= 0.0 {
                    return 0.0;
                }
                let denom = theta * omt.powf(theta - 1.0);
                if denom == 0.0 {
                    return 0.0;
                }
                g.ln() * g / denom
            };
            let integral = quad::integrate(integrand, 0.0, 1.0, 1e-10, 1e-10)?;
            Ok(1.0 + 4.0 * integral)
        }
    }
}

/// Population Spearman's rho (dimension 2).
///
/// Closed form for the Gaussian; for the other families the defining
/// integral `12 * int int C(u,v) du dv - 3` is evaluated by nested adaptive
/// quadrature.
pub fn true_rho_s(spec: &CopulaSpec) -> Result<f64> {
    if spec.dim != 2 {
        return Err(Error::unsupported(
            "Spearman's rho is implemented for dimension 2",
        ));
    }
    match spec.family {
        Family::Independence => Ok(0.0),
        Family::Gaussian { rho } => Ok(6.0 * (rho / 2.0).asin() / PI),
        _ => {
            let integral = quad::integrate_2d(
                |u, v| copula_cdf(spec, &[u, v]).unwrap_or(f64::NAN),
                (0.0, 1.0),
                (0.0, 1.0),
                1e-7,
                1e-7,
            )?;
            Ok(12.0 * integral - 3.0)
        }
    }
}

/// Closed-form boundary of the Clayton sublevel set at level `t`:
/// `v(u) = (t^-theta - u^-theta + 1)^(-1/theta)` for `u` on a uniform grid
/// over `[t, 1]`, anchored exactly at `(t, 1)` and `(1, t)`.
pub fn clayton_level_boundary(theta: f64, t: f64, n_pts: usize) -> Result<PolygonChain> {
    if !(theta > 0.0) {
        return Err(Error::invalid(format!(
            "boundary formula needs theta > 0, got {theta}"
        )));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::domain(format!("level must lie in (0,1), got {t}")));
    }
    if n_pts < 2 {
        return Err(Error::invalid("boundary needs at least 2 points"));
    }
    let tp = t.powf(-theta);
    let mut vertices = Vec::with_capacity(n_pts);
    vertices.push([t, 1.0]);
    for k in 1..n_pts - 1 {
        let u = t + (1.0 - t) * k as f64 / (n_pts - 1) as f64;
        let v = (tp - u.powf(-theta) + 1.0).powf(-1.0 / theta);
        vertices.push([u, v.clamp(0.0, 1.0)]);
    }
    vertices.push([1.0, t]);
    PolygonChain::new(vertices, false)
}

/// Rank-based empirical copula of a sample.
#[derive(Debug, Clone)]
pub struct EmpiricalCopula {
    pseudo_obs: SampleMatrix,
}

impl EmpiricalCopula {
    /// Builds from raw data by the rank transform with denominator n+1.
    pub fn from_data(data: &SampleMatrix) -> Self {
        Self {
            pseudo_obs: data.pseudo_observations(),
        }
    }

    /// Wraps an existing matrix of pseudo-observations in `[0,1]^d`.
    pub fn from_pseudo_obs(pseudo_obs: SampleMatrix) -> Result<Self> {
        if !pseudo_obs.all_in_closed_unit_cube() {
            return Err(Error::invalid(
                "pseudo-observations must lie in the unit cube",
            ));
        }
        Ok(Self { pseudo_obs })
    }

    pub fn n(&self) -> usize {
        self.pseudo_obs.n()
    }

    pub fn dim(&self) -> usize {
        self.pseudo_obs.dim()
    }

    pub fn pseudo_obs(&self) -> &SampleMatrix {
        &self.pseudo_obs
    }

    /// Proportion of pseudo-observations componentwise below `u`.
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        let d = self.pseudo_obs.dim();
        if u.len() != d {
            return Err(Error::invalid(format!(
                "point has {} coordinates, copula has {d}",
                u.len()
            )));
        }
        let n = self.pseudo_obs.n();
        let mut count = 0usize;
        for i in 0..n {
            if (0..d).all(|j| self.pseudo_obs.get(i, j) <= u[j]) {
                count += 1;
            }
        }
        Ok(count as f64 / n as f64)
    }
}
