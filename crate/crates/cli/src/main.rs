//! Command-line front end: bandwidth selection, smooth bootstrap sampling,
//! level-curve extraction, dependence measures, distortion curves, and
//! config-driven simulation experiments.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use copula_smooth::bandwidth::{self, QuadratureRule, WeightFunction};
use copula_smooth::bootstrap::{self, BootstrapConfig, FunctionalTag, Transform};
use copula_smooth::copulas::{self, CopulaSpec, Family};
use copula_smooth::distortion;
use copula_smooth::elliptical::CharGenerator;
use copula_smooth::functionals;
use copula_smooth::harness::{self, ExperimentConfig};
use copula_smooth::linalg;
use copula_smooth::nalgebra::DMatrix;
use copula_smooth::rng;
use copula_smooth::sample::SampleMatrix;
use copula_smooth::smoothing::KernelSpec;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "copula-smooth",
    version,
    about = "Smooth bootstrap for copula functionals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BandwidthMethod {
    Cv,
    Silverman,
}

#[derive(Subcommand)]
enum Command {
    /// Select a bandwidth matrix H = h * sigma_hat for a data file
    Bandwidth {
        /// Selection method
        #[arg(long, value_enum)]
        method: BandwidthMethod,
        /// Scale grid for cross-validation, as lo:hi:step
        #[arg(long, default_value = "0.1:1.5:0.1")]
        grid: String,
        /// Gauss-Hermite order per axis for the CV integral
        #[arg(long, default_value_t = 25)]
        gh_order: usize,
        /// Resamples the CV criterion is averaged over (0 = use data once)
        #[arg(long, default_value_t = 25)]
        bootstrap_reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Input CSV (header row, one column per coordinate)
        #[arg(long)]
        data: PathBuf,
        /// Output JSON path
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw smooth bootstrap samples with uniform margins
    Bootstrap {
        /// Input CSV; rows outside the unit cube are rank-transformed first
        #[arg(long = "in")]
        input: PathBuf,
        /// Rows per bootstrap sample
        #[arg(long, default_value_t = 10_000)]
        m: usize,
        /// Number of replicate samples; with B > 1 the output files are
        /// numbered out.b1.csv, out.b2.csv, ...
        #[arg(long = "B", default_value_t = 1)]
        b_reps: usize,
        #[arg(long, default_value = "gauss")]
        kernel: String,
        /// Bandwidth rule: silverman, cv, or cv:lo:hi:step
        #[arg(long, default_value = "silverman")]
        bandwidth: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the t-level curve of the empirical copula
    Levelset {
        /// Input CSV; rows outside the unit cube are rank-transformed first
        #[arg(long = "in")]
        input: PathBuf,
        /// Contour level in (0,1)
        #[arg(long)]
        t: f64,
        /// Lattice cells per axis
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// Reference model (clayton:theta); prints the Hausdorff distance
        #[arg(long)]
        truth: Option<String>,
        /// Output CSV of curve vertices (columns x,y)
        #[arg(long)]
        out: PathBuf,
    },
    /// Print Kendall's tau or Spearman's rho of a bivariate sample
    Depmeasure {
        #[arg(long = "in")]
        input: PathBuf,
        /// tau or rho
        #[arg(long)]
        stat: String,
    },
    /// Characteristic-generator distortion curves and their small-c rate
    Distortion {
        /// Base generator; tightens the absolute bound when given
        #[arg(long)]
        gx: Option<String>,
        /// Smoothing generator
        #[arg(long)]
        gy: String,
        /// Bandwidth scale multiplying the generator argument
        #[arg(long)]
        c: f64,
        /// Evaluation grid, as lo:hi:step
        #[arg(long, default_value = "0:10:0.1")]
        u_grid: String,
        /// Output CSV (columns u, rel_error, abs_bound)
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a simulation experiment described by a TOML config
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV of long-form results
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = one per core)
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Bandwidth {
            method,
            grid,
            gh_order,
            bootstrap_reps,
            seed,
            data,
            out,
        } => cmd_bandwidth(method, &grid, gh_order, bootstrap_reps, seed, &data, &out),
        Command::Bootstrap {
            input,
            m,
            b_reps,
            kernel,
            bandwidth,
            seed,
            out,
        } => cmd_bootstrap(&input, m, b_reps, &kernel, &bandwidth, seed, &out),
        Command::Levelset {
            input,
            t,
            grid,
            truth,
            out,
        } => cmd_levelset(&input, t, grid, truth.as_deref(), &out),
        Command::Depmeasure { input, stat } => cmd_depmeasure(&input, &stat),
        Command::Distortion {
            gx,
            gy,
            c,
            u_grid,
            out,
        } => cmd_distortion(gx.as_deref(), &gy, c, &u_grid, &out),
        Command::Simulate {
            config,
            out,
            threads,
        } => cmd_simulate(&config, &out, threads),
    }
}

/// Parses `lo:hi:step` into an inclusive ascending grid.
fn parse_grid(text: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        bail!("grid must have the form lo:hi:step, got '{text}'");
    };
    let lo: f64 = lo.parse().context("bad grid lower bound")?;
    let hi: f64 = hi.parse().context("bad grid upper bound")?;
    let step: f64 = step.parse().context("bad grid step")?;
    if !(step > 0.0) || hi < lo {
        bail!("grid needs step > 0 and hi >= lo, got '{text}'");
    }
    let count = ((hi - lo) / step).round() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|k| lo + k as f64 * step).collect();
    if let Some(last) = grid.last_mut() {
        if (*last - hi).abs() < step * 1e-9 {
            *last = hi;
        }
    }
    grid.retain(|&g| g <= hi + step * 1e-9);
    Ok(grid)
}

fn read_sample(path: &Path) -> anyhow::Result<SampleMatrix> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(SampleMatrix::read_csv(file)?)
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
        .collect()
}

fn cmd_bandwidth(
    method: BandwidthMethod,
    grid: &str,
    gh_order: usize,
    bootstrap_reps: usize,
    seed: u64,
    data_path: &Path,
    out: &Path,
) -> anyhow::Result<()> {
    let data = read_sample(data_path)?;
    let json = match method {
        BandwidthMethod::Silverman => {
            let h = bandwidth::silverman_h(data.dim(), data.n())?;
            let sigma = data.covariance()?;
            let h_matrix = if linalg::check_spd(&sigma, "bandwidth").is_ok() {
                &sigma * h
            } else {
                DMatrix::from_diagonal(&(sigma.diagonal() * h))
            };
            serde_json::json!({
                "method": "silverman",
                "dim": data.dim(),
                "h_grid": [],
                "cv_values": [],
                "h_star": h,
                "H_star": row_major(&h_matrix),
                "sigma_hat": row_major(&sigma),
                "at_grid_edge": false,
            })
        }
        BandwidthMethod::Cv => {
            let h_grid = parse_grid(grid)?;
            let rule = QuadratureRule::gauss_hermite_tensor(gh_order, data.dim())?;
            let weight = WeightFunction::at_sample_mean(&data);
            let cv = bandwidth::select_bandwidth_cv(
                &data,
                &h_grid,
                &weight,
                &rule,
                KernelSpec::Gauss,
                bootstrap_reps,
                &mut rng::stream(seed),
            )?;
            if cv.at_grid_edge {
                eprintln!(
                    "warning: minimum at the edge of the scale grid (h* = {}); widen --grid",
                    cv.h_star
                );
            }
            serde_json::json!({
                "method": "cv",
                "dim": data.dim(),
                "h_grid": cv.h_grid,
                "cv_values": cv.cv_values,
                "h_star": cv.h_star,
                "H_star": row_major(&cv.h_matrix),
                "sigma_hat": row_major(&cv.sigma_hat),
                "at_grid_edge": cv.at_grid_edge,
            })
        }
    };
    let mut file =
        File::create(out).with_context(|| format!("cannot create {}", out.display()))?;
    serde_json::to_writer_pretty(&mut file, &json)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Inserts a replicate tag before the extension: out.csv -> out.b3.csv.
fn numbered_path(out: &Path, b: usize) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("sample");
    let name = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.b{b}.{ext}"),
        None => format!("{stem}.b{b}"),
    };
    out.with_file_name(name)
}

fn cmd_bootstrap(
    input: &Path,
    m: usize,
    b_reps: usize,
    kernel: &str,
    bandwidth_rule: &str,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    let raw = read_sample(input)?;
    let data_u = bootstrap::prepare_unit_data(&raw)?;
    let cfg = BootstrapConfig {
        m,
        b_reps,
        kernel: KernelSpec::parse(kernel)?,
        bandwidth_rule: harness::parse_bandwidth_rule(bandwidth_rule)?,
        transform: Transform::NormalScores,
        seed,
    };
    let mut stream = rng::stream(seed);
    for b in 1..=b_reps {
        let sample = bootstrap::smooth_bootstrap_copula_sample(&data_u, &cfg, &mut stream)?;
        let path = if b_reps == 1 {
            out.to_path_buf()
        } else {
            numbered_path(out, b)
        };
        let file =
            File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        sample.write_csv(file)?;
    }
    Ok(())
}

fn cmd_levelset(
    input: &Path,
    t: f64,
    grid: usize,
    truth: Option<&str>,
    out: &Path,
) -> anyhow::Result<()> {
    let raw = read_sample(input)?;
    let data_u = if raw.all_in_closed_unit_cube() {
        raw
    } else {
        raw.pseudo_observations()
    };
    let chain = functionals::estimate_level_boundary(&data_u, t, grid)?;
    let file = File::create(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["x", "y"])?;
    for v in chain.vertices() {
        w.write_record([v[0].to_string(), v[1].to_string()])?;
    }
    w.flush()?;
    if let Some(truth) = truth {
        let spec = CopulaSpec::parse(truth, 2)?;
        let Family::Clayton { theta } = spec.family() else {
            bail!("reference level curves are available for clayton:theta only");
        };
        let reference = copulas::clayton_level_boundary(theta, t, 2_000)?;
        println!("hausdorff {}", functionals::hausdorff_distance(&chain, &reference));
    }
    Ok(())
}

fn cmd_depmeasure(input: &Path, stat: &str) -> anyhow::Result<()> {
    let data = read_sample(input)?;
    let value = FunctionalTag::parse(stat)?.apply(&data)?;
    println!("{value}");
    Ok(())
}

fn cmd_distortion(
    gx: Option<&str>,
    gy: &str,
    c: f64,
    u_grid: &str,
    out: &Path,
) -> anyhow::Result<()> {
    let gx = gx.map(CharGenerator::parse).transpose()?;
    let gy = CharGenerator::parse(gy)?;
    let grid = parse_grid(u_grid)?;
    let report = distortion::distortion_curves(gx.as_ref(), &gy, c, &grid)?;
    let file = File::create(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["u", "rel_error", "abs_bound"])?;
    for i in 0..report.u_grid.len() {
        w.write_record([
            report.u_grid[i].to_string(),
            report.rel_error[i].to_string(),
            report.abs_bound[i].to_string(),
        ])?;
    }
    w.flush()?;
    println!("rate_exponent {}", report.rate_exponent);
    Ok(())
}

fn cmd_simulate(config: &Path, out: &Path, threads: usize) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(config)
        .with_context(|| format!("cannot read {}", config.display()))?;
    let cfg = ExperimentConfig::from_toml_str(&text)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("cannot build thread pool")?;
    let rows = pool.install(|| harness::run_experiment(&cfg))?;
    let file = File::create(out).with_context(|| format!("cannot create {}", out.display()))?;
    harness::write_table_csv(&rows, file)?;
    Ok(())
}
