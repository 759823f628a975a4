//! Acceptance gate: one test per release criterion, each printing a single
//! PASS/FAIL line (visible with `--nocapture`) with its runtime and the
//! measured margins.

use copula_smooth::bandwidth::{
    self, BivariateNormal, QuadratureRule, WeightFunction,
};
use copula_smooth::bootstrap::{
    smooth_bootstrap_copula_sample, BandwidthRule, BootstrapConfig, Transform,
};
use copula_smooth::copulas::{sample_copula, CopulaSpec};
use copula_smooth::distortion::{
    laplace_uniform_bound, relative_error_curve, tau_preservation_check,
};
use copula_smooth::elliptical::{closure_defect, CharGenerator, EllipticalSpec};
use copula_smooth::functionals::{hausdorff_distance, PolygonChain};
use copula_smooth::harness::{
    run_depmeasure_experiment, run_levelset_experiment, ExperimentConfig, Row,
};
use copula_smooth::nalgebra::{DMatrix, DVector};
use copula_smooth::rng::{stream, Stream};
use copula_smooth::sample::SampleMatrix;
use copula_smooth::smoothing::{KernelSpec, SmoothedModel};
use copula_smooth::special::{ks_pvalue, ks_statistic_uniform};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::time::{Duration, Instant};

/// Runs one criterion, prints its PASS/FAIL line, and fails the test on a
/// violated bound or a blown runtime budget.
fn criterion(name: &str, budget: Duration, body: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    match outcome {
        Ok(detail) if elapsed <= budget => {
            println!("ACCEPTANCE PASS [{name}] {elapsed:.2?}: {detail}");
        }
        Ok(detail) => {
            println!(
                "ACCEPTANCE FAIL [{name}] {elapsed:.2?} over budget {budget:.2?}: {detail}"
            );
            panic!("{name}: runtime {elapsed:.2?} exceeded {budget:.2?}");
        }
        Err(detail) => {
            println!("ACCEPTANCE FAIL [{name}] {elapsed:.2?}: {detail}");
            panic!("{name}: {detail}");
        }
    }
}

fn gen(text: &str) -> CharGenerator {
    CharGenerator::parse(text).unwrap()
}

#[test]
fn criterion_01_generator_closure() {
    criterion("generator_closure", Duration::from_secs(1), || {
        let grid: Vec<f64> = (1..=200).map(|k| k as f64 * 0.1).collect();
        let mut closed_max = 0.0f64;
        for c in [0.1, 1.0, 10.0] {
            let mut fams = vec![("gauss".to_string(), gen("gauss"))];
            for alpha in [0.5, 1.0, 1.5, 2.0] {
                fams.push((format!("stable:{alpha}"), gen(&format!("stable:{alpha}"))));
            }
            for (label, g) in &fams {
                let d = closure_defect(g, g, c, &grid)
                    .map_err(|e| format!("{label}, c={c}: {e}"))?
                    .defect;
                closed_max = closed_max.max(d);
                if d > 1e-10 {
                    return Err(format!("{label} at c={c}: defect {d:.3e} > 1e-10"));
                }
            }
        }
        let t3 = gen("student_t:3");
        let t_defect = closure_defect(&t3, &t3, 0.5, &grid)
            .map_err(|e| e.to_string())?
            .defect;
        if t_defect <= 1e-3 {
            return Err(format!(
                "student_t(3) defect {t_defect:.3e} should exceed 1e-3"
            ));
        }
        Ok(format!(
            "closed-family max defect {closed_max:.2e}; student_t(3) defect {t_defect:.3e}"
        ))
    });
}

#[test]
fn criterion_02_cv_identity() {
    criterion("cv_identity", Duration::from_secs(600), || {
        let mean = DVector::from_row_slice(&[-1.0, 1.0]);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.05, 1.05, 1.96]);
        let model = BivariateNormal::new(mean.clone(), cov.clone()).map_err(|e| e.to_string())?;
        let weight = WeightFunction::new(mean);
        let rule = QuadratureRule::gauss_hermite_tensor(25, 2).map_err(|e| e.to_string())?;

        let d_hat = bandwidth::d_constant_mc(&model, &weight, &rule, 40_000, 901)
            .map_err(|e| e.to_string())?;
        if (d_hat.mean - 0.629732).abs() > 0.02 {
            return Err(format!(
                "D-hat {:.6} outside 0.629732 +/- 0.02",
                d_hat.mean
            ));
        }

        let mut worst_ratio = 0.0f64;
        for (k, h) in [0.25, 0.75, 1.5].into_iter().enumerate() {
            let bw = &cov * h;
            let cv = bandwidth::cv_expectation_mc(
                &model, 25, &bw, &weight, &rule, KernelSpec::Gauss, 100, 910 + k as u64,
            )
            .map_err(|e| e.to_string())?;
            let mise = bandwidth::mise_mc(
                &model, 24, &bw, &weight, &rule, KernelSpec::Gauss, 200, 920 + k as u64,
            )
            .map_err(|e| e.to_string())?;
            let gap = cv.mean - (mise.mean + d_hat.mean);
            let se = (cv.std_error.powi(2) + mise.std_error.powi(2) + d_hat.std_error.powi(2))
                .sqrt();
            worst_ratio = worst_ratio.max(gap.abs() / se);
            if gap.abs() > 3.0 * se {
                return Err(format!(
                    "h={h}: |E[CV] - (MISE + D)| = {:.5} > 3 SE = {:.5}",
                    gap.abs(),
                    3.0 * se
                ));
            }
        }
        Ok(format!(
            "D-hat {:.6} (SE {:.4}); worst |gap|/SE {:.2} of 3",
            d_hat.mean, d_hat.std_error, worst_ratio
        ))
    });
}

#[test]
fn criterion_03_silverman_values() {
    criterion("silverman_values", Duration::from_secs(1), || {
        let h25 = bandwidth::silverman_h(2, 25).map_err(|e| e.to_string())?;
        let h100 = bandwidth::silverman_h(2, 100).map_err(|e| e.to_string())?;
        if (h25 - 0.341995).abs() > 1e-6 {
            return Err(format!("silverman_h(2,25) = {h25:.8}, want 0.341995 +/- 1e-6"));
        }
        if (h100 - 0.215443).abs() > 1e-6 {
            return Err(format!("silverman_h(2,100) = {h100:.8}, want 0.215443 +/- 1e-6"));
        }
        Ok(format!("h(2,25) = {h25:.6}, h(2,100) = {h100:.6}"))
    });
}

#[test]
fn criterion_04_bootstrap_margins() {
    criterion("bootstrap_margins", Duration::from_secs(5), || {
        let spec = CopulaSpec::parse("clayton:2", 2).map_err(|e| e.to_string())?;
        let data = sample_copula(&spec, 25, &mut stream(2024)).map_err(|e| e.to_string())?;
        let cfg = BootstrapConfig {
            m: 10_000,
            b_reps: 1,
            kernel: KernelSpec::Gauss,
            bandwidth_rule: BandwidthRule::Silverman,
            transform: Transform::NormalScores,
            seed: 7,
        };
        let sample =
            smooth_bootstrap_copula_sample(&data, &cfg, &mut stream(7)).map_err(|e| e.to_string())?;
        let mut min_p = 1.0f64;
        for j in 0..2 {
            let d = ks_statistic_uniform(&sample.column(j)).map_err(|e| e.to_string())?;
            let p = ks_pvalue(d, sample.n());
            min_p = min_p.min(p);
            if p < 0.01 {
                return Err(format!("column {j}: KS p-value {p:.4} < 0.01 (D = {d:.5})"));
            }
        }
        Ok(format!("both margins uniform; min KS p-value {min_p:.3}"))
    });
}

#[test]
fn criterion_05_tau_preservation() {
    criterion("tau_preservation", Duration::from_secs(60), || {
        let spec = EllipticalSpec::new(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.75, 0.75, 1.0]),
            CharGenerator::Gauss,
        )
        .map_err(|e| e.to_string())?;
        let rep = tau_preservation_check(&spec, &CharGenerator::Gauss, 0.5, 1_000_000, 20, &mut stream(77))
            .map_err(|e| e.to_string())?;
        if rep.mean_diff.abs() > 3.0 * rep.std_error {
            return Err(format!(
                "|tau(X) - tau(Z)| = {:.5} > 3 SE = {:.5}",
                rep.mean_diff.abs(),
                3.0 * rep.std_error
            ));
        }
        Ok(format!(
            "tau(X) {:.4}, tau(Z) {:.4}, |diff| {:.5} <= 3 SE {:.5}",
            rep.tau_raw,
            rep.tau_smoothed,
            rep.mean_diff.abs(),
            3.0 * rep.std_error
        ))
    });
}

/// Independent point-to-segment distance for the brute-force oracle.
fn oracle_seg_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let mut t = 0.0;
    if len2 > 0.0 {
        t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2;
        t = t.clamp(0.0, 1.0);
    }
    let (ex, ey) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (ex * ex + ey * ey).sqrt()
}

fn oracle_hausdorff(a: &PolygonChain, b: &PolygonChain) -> f64 {
    let segs = |c: &PolygonChain| -> Vec<([f64; 2], [f64; 2])> {
        let v = c.vertices();
        let mut out: Vec<_> = v.windows(2).map(|w| (w[0], w[1])).collect();
        if c.is_closed() && v.len() > 2 {
            out.push((v[v.len() - 1], v[0]));
        }
        out
    };
    let directed = |x: &PolygonChain, y: &PolygonChain| -> f64 {
        let ys = segs(y);
        x.vertices()
            .iter()
            .map(|&p| {
                ys.iter()
                    .map(|&(s, e)| oracle_seg_dist(p, s, e))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

#[test]
fn criterion_06_hausdorff_oracle() {
    criterion("hausdorff_oracle", Duration::from_secs(5), || {
        let random_polygon = |rng: &mut Stream| -> PolygonChain {
            let vertices: Vec<[f64; 2]> = (0..20)
                .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
                .collect();
            PolygonChain::new(vertices, true).unwrap()
        };
        let mut worst = 0.0f64;
        for k in 0..100u64 {
            let mut rng = stream(3_000 + k);
            let a = random_polygon(&mut rng);
            let b = random_polygon(&mut rng);
            let fast = hausdorff_distance(&a, &b);
            let slow = oracle_hausdorff(&a, &b);
            let gap = (fast - slow).abs();
            worst = worst.max(gap);
            if gap > 1e-12 {
                return Err(format!("pair {k}: early-break {fast} vs brute {slow}"));
            }
        }
        Ok(format!("100 polygon pairs agree; worst gap {worst:.1e}"))
    });
}

/// Summary-row lookup in a harness table.
fn summary_value(rows: &[Row], stat: &str, n: usize, method: &str, label: &str) -> f64 {
    rows.iter()
        .find(|r| r.stat == stat && r.n == n && r.method == method && r.rep == label)
        .unwrap_or_else(|| panic!("no {label} row for {stat}/{n}/{method}"))
        .value
}

#[test]
fn criterion_07_levelset_improvement() {
    criterion("levelset_improvement", Duration::from_secs(900), || {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment = \"levelset_hausdorff\"\n\
             copula = \"clayton:2\"\n\
             n_list = [25]\n\
             m = 2000\n\
             t_list = [0.3]\n\
             m_reps = 200\n\
             seed = 424242\n",
        )
        .map_err(|e| e.to_string())?;
        let rows = run_levelset_experiment(&cfg).map_err(|e| e.to_string())?;
        let raw = summary_value(&rows, "hausdorff", 25, "raw", "median");
        let smooth = summary_value(&rows, "hausdorff", 25, "smooth", "median");
        if !raw.is_finite() || !smooth.is_finite() {
            return Err(format!("non-finite medians: raw {raw}, smooth {smooth}"));
        }
        if smooth >= raw {
            return Err(format!(
                "median smooth {smooth:.4} not below median raw {raw:.4}"
            ));
        }
        Ok(format!("median Hausdorff raw {raw:.4} > smooth {smooth:.4}"))
    });
}

#[test]
fn criterion_08_depmeasure_mse() {
    criterion("depmeasure_mse", Duration::from_secs(1_200), || {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment = \"depmeasure_mse\"\n\
             copula = \"clayton:4\"\n\
             n_list = [10, 75]\n\
             m = 2000\n\
             m_reps = 200\n\
             seed = 88\n",
        )
        .map_err(|e| e.to_string())?;
        let rows = run_depmeasure_experiment(&cfg).map_err(|e| e.to_string())?;
        let mut details = Vec::new();
        for stat in ["tau", "rho_s"] {
            let raw10 = summary_value(&rows, stat, 10, "raw", "mse");
            let smooth10 = summary_value(&rows, stat, 10, "smooth", "mse");
            if smooth10 > raw10 {
                return Err(format!(
                    "{stat} at n=10: MSE smooth {smooth10:.5} > raw {raw10:.5}"
                ));
            }
            let raw75 = summary_value(&rows, stat, 75, "raw", "mse");
            let smooth75 = summary_value(&rows, stat, 75, "smooth", "mse");
            let ratio = smooth75 / raw75;
            if !(0.8..=1.25).contains(&ratio) {
                return Err(format!(
                    "{stat} at n=75: MSE ratio {ratio:.3} outside [0.8, 1.25]"
                ));
            }
            details.push(format!(
                "{stat}: n=10 smooth/raw {:.3}, n=75 ratio {:.3}",
                smooth10 / raw10,
                ratio
            ));
        }
        Ok(details.join("; "))
    });
}

#[test]
fn criterion_09_distortion_rates() {
    criterion("distortion_rates", Duration::from_secs(1), || {
        for (name, want) in [("gauss", 1.0), ("laplace", 1.0), ("cauchy", 0.5)] {
            let rate = relative_error_curve(&gen(name), 0.1, &[1.0])
                .map_err(|e| e.to_string())?
                .rate_exponent;
            if (rate - want).abs() > 0.05 {
                return Err(format!("{name} rate {rate:.3} not within {want} +/- 0.05"));
            }
        }
        let mut worst_resid = 0.0f64;
        for c in [0.01, 0.1] {
            let opt = laplace_uniform_bound(c, 1.0, 10.0).map_err(|e| e.to_string())?;
            let t = opt.t_star;
            let foc = c * t.powi(3) - 10.0 * c * t * t / 2.0 - 10.0;
            let scale = c * t.powi(3) + 10.0 * c * t * t / 2.0 + 10.0;
            let resid = (foc / scale).abs();
            worst_resid = worst_resid.max(resid);
            if resid >= 1e-8 {
                return Err(format!("c={c}: FOC residual {resid:.2e} >= 1e-8"));
            }
        }
        let mut ratios = Vec::new();
        let mut c = 1e-4;
        while c < 0.1 + 1e-12 {
            let b = laplace_uniform_bound(c, 1.0, 10.0)
                .map_err(|e| e.to_string())?
                .bound;
            ratios.push(b / c.cbrt());
            c *= 10.0;
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
        if hi / lo >= 2.0 {
            return Err(format!("bound/c^(1/3) spread {:.3} not within factor 2", hi / lo));
        }
        Ok(format!(
            "rates ok; worst FOC residual {worst_resid:.1e}; cube-root spread {:.3}",
            hi / lo
        ))
    });
}

#[test]
fn criterion_10_quantile_roundtrip() {
    criterion("quantile_roundtrip", Duration::from_secs(5), || {
        let ps = [0.001, 0.01, 0.5, 0.99, 0.999];
        let mut worst = 0.0f64;
        for k in 0..50u64 {
            let mut rng = stream(5_000 + k);
            let d = 1 + (k as usize % 3);
            let n = 5 + (k as usize % 26);
            let mut data = DMatrix::zeros(n, d);
            let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let scale: Vec<f64> = (0..d).map(|_| 0.5 + 2.0 * rng.random::<f64>()).collect();
            for i in 0..n {
                for j in 0..d {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    data[(i, j)] = shift[j] + scale[j] * z;
                }
            }
            let mut b = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    b[(i, j)] = rng.random::<f64>() - 0.5;
                }
            }
            let h = &b * b.transpose() + DMatrix::identity(d, d) * (0.05 + 0.5 * rng.random::<f64>());
            let model = SmoothedModel::fit(
                SampleMatrix::new(data).map_err(|e| e.to_string())?,
                KernelSpec::Gauss,
                h,
            )
            .map_err(|e| e.to_string())?;
            for j in 0..d {
                for &p in &ps {
                    let q = model.marginal_quantile(j, p).map_err(|e| e.to_string())?;
                    let back = model.marginal_cdf(j, q).map_err(|e| e.to_string())?;
                    let gap = (back - p).abs();
                    worst = worst.max(gap);
                    if gap >= 1e-10 {
                        return Err(format!(
                            "model {k}, coordinate {j}, p={p}: |F(F^-1(p)) - p| = {gap:.2e}"
                        ));
                    }
                }
            }
        }
        Ok(format!("50 models round-trip; worst |F(Q(p)) - p| = {worst:.1e}"))
    });
}
