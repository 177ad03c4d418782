//! Command-line front end.
//!
//! Every flag is validated before any output file is created, so a rejected
//! invocation leaves nothing behind.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::io::{is_supported_output, load_image, save_image};
use crate::metrics::MetricReport;
use crate::model::{RicianModel, RicianParams};
use crate::noise::{add_rician, NoiseSpec};
use crate::phantom::phantom;
use crate::solver::{p_sweep, ppa_denoise_with, trace_row, SolverConfig, TRACE_HEADER};

#[derive(Debug, Parser)]
#[command(
    name = "rician-tv",
    version,
    about = "Total-variation denoising of Rician-corrupted images"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Denoise one image by the proximal point algorithm.
    Denoise(DenoiseArgs),
    /// Corrupt an image with seeded Rician noise.
    Noise(NoiseArgs),
    /// Print PSNR and SSIM of an image against a reference.
    Metrics(MetricsArgs),
    /// Denoise one image for several exponents p.
    Sweep(SweepArgs),
    /// Write a seeded piecewise-constant test image.
    Phantom(PhantomArgs),
}

#[derive(Debug, Args)]
#[group(id = "weight", required = true, multiple = false)]
pub struct WeightArgs {
    /// Fidelity weight λ.
    #[arg(long, group = "weight")]
    pub lambda: Option<f64>,
    /// TV weight γ = 1/λ.
    #[arg(long, group = "weight")]
    pub gamma: Option<f64>,
}

impl WeightArgs {
    pub fn lambda(&self) -> anyhow::Result<f64> {
        let lambda = match (self.lambda, self.gamma) {
            (Some(l), None) => l,
            (None, Some(g)) => {
                if !(g.is_finite() && g > 0.0) {
                    bail!("--gamma must be positive, got {g}");
                }
                1.0 / g
            }
            _ => bail!("exactly one of --lambda and --gamma is required"),
        };
        if !(lambda.is_finite() && lambda > 0.0) {
            bail!("--lambda must be positive, got {lambda}");
        }
        Ok(lambda)
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Noise level σ of the datum (not σ²).
    #[arg(long)]
    pub sigma: f64,
    #[command(flatten)]
    pub weight: WeightArgs,
    /// Proximal step.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_outer: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol_inner: f64,
    #[arg(long, default_value_t = 500)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_inner: usize,
    /// Keep the dual field between outer iterations.
    #[arg(long)]
    pub warm_start_dual: bool,
}

impl SolverArgs {
    fn params(&self) -> anyhow::Result<RicianParams> {
        check_sigma(self.sigma)?;
        Ok(RicianParams::from_sigma(self.weight.lambda()?, self.sigma)?)
    }

    fn config(&self, p: f64) -> anyhow::Result<SolverConfig> {
        let cfg = SolverConfig {
            p,
            c: self.c,
            tol_outer: self.tol_outer,
            tol_inner: self.tol_inner,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            warm_start_dual: self.warm_start_dual,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Exponent of the regulariser, in [1, 2).
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// CSV file receiving one row per outer iteration.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Clean image; prints PSNR/SSIM of the result when given.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 255.0)]
    pub peak: f64,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, default_value_t = 255.0)]
    pub peak: f64,
    /// Also print a one-line JSON record (an infinite PSNR becomes null).
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving `u_p<p>.<ext>`, `trace_p<p>.csv` and `summary.csv`.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Exponents to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.75, 1.5, 1.25, 1.1, 1.0])]
    pub ps: Vec<f64>,
    /// Image format of the per-p outputs.
    #[arg(long, default_value = "pgm", value_parser = ["pgm", "png"])]
    pub format: String,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 255.0)]
    pub peak: f64,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub rows: usize,
    #[arg(long, default_value_t = 128)]
    pub cols: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn check_sigma(sigma: f64) -> anyhow::Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        bail!("--sigma must be positive, got {sigma}");
    }
    Ok(())
}

fn check_peak(peak: f64) -> anyhow::Result<()> {
    if !(peak.is_finite() && peak > 0.0) {
        bail!("--peak must be positive, got {peak}");
    }
    Ok(())
}

fn check_output(path: &Path) -> anyhow::Result<()> {
    if !is_supported_output(path) {
        bail!("{}: output extension must be .pgm or .png", path.display());
    }
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Denoise(a) => denoise(a),
        Command::Noise(a) => noise(a),
        Command::Metrics(a) => metrics(a),
        Command::Sweep(a) => sweep(a),
        Command::Phantom(a) => make_phantom(a),
    }
}

fn denoise(a: DenoiseArgs) -> anyhow::Result<()> {
    let params = a.solver.params()?;
    let cfg = a.solver.config(a.p)?;
    check_output(&a.output)?;
    check_peak(a.peak)?;
    let f = load_image(&a.input)?;
    let reference = a.reference.as_ref().map(load_image).transpose()?;
    let model = RicianModel::new(params, f)?;

    let mut trace = match &a.trace {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("{}: cannot create trace", path.display()))?;
            let mut w = BufWriter::new(file);
            writeln!(w, "{TRACE_HEADER}")?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };
    let mut trace_err = None;
    let report = ppa_denoise_with(&model, &cfg, None, |rec| {
        if let Some(w) = trace.as_mut() {
            if let Err(e) = writeln!(w, "{}", trace_row(rec)).and_then(|_| w.flush()) {
                trace_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = trace_err {
        return Err(e).context("writing trace");
    }
    save_image(&report.result, &a.output)?;

    let e = report.final_energy();
    eprintln!(
        "outer iterations: {}{}  energy: {:.10e} -> {:.10e}",
        report.outer_iterations,
        if report.converged {
            ""
        } else {
            " (not converged)"
        },
        report.initial_energy.total,
        e.total
    );
    if let Some(r) = reference {
        let m = MetricReport::compute(&r, &report.result, a.peak)?;
        println!("PSNR={} SSIM={}", m.psnr, m.ssim);
    }
    Ok(())
}

fn noise(a: NoiseArgs) -> anyhow::Result<()> {
    check_sigma(a.sigma)?;
    check_output(&a.output)?;
    let clean = load_image(&a.input)?;
    let noisy = add_rician(&clean, NoiseSpec::new(a.sigma, a.seed)?)?;
    save_image(&noisy, &a.output)?;
    Ok(())
}

fn metrics(a: MetricsArgs) -> anyhow::Result<()> {
    check_peak(a.peak)?;
    let test = load_image(&a.input)?;
    let reference = load_image(&a.reference)?;
    let m = MetricReport::compute(&reference, &test, a.peak)?;
    println!("PSNR={} SSIM={}", m.psnr, m.ssim);
    if a.json {
        let record = serde_json::json!({
            "input": a.input.display().to_string(),
            "reference": a.reference.display().to_string(),
            "psnr": m.psnr,
            "ssim": m.ssim,
        });
        println!("{record}");
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    let params = a.solver.params()?;
    if a.ps.is_empty() {
        bail!("--ps needs at least one exponent");
    }
    for &p in &a.ps {
        a.solver.config(p)?;
    }
    check_peak(a.peak)?;
    let base = a.solver.config(a.ps[0])?;
    let f = load_image(&a.input)?;
    let reference = a.reference.as_ref().map(load_image).transpose()?;
    let model = RicianModel::new(params, f)?;
    let reports = p_sweep(&model, &base, &a.ps)?;

    fs::create_dir_all(&a.output)
        .with_context(|| format!("{}: cannot create directory", a.output.display()))?;
    let summary_path = a.output.join("summary.csv");
    let mut summary = BufWriter::new(
        File::create(&summary_path)
            .with_context(|| format!("{}: cannot create", summary_path.display()))?,
    );
    writeln!(summary, "p,outer_iters,converged,energy,psnr,ssim")?;
    for r in &reports {
        save_image(&r.result, a.output.join(format!("u_p{}.{}", r.p, a.format)))?;
        let trace_path = a.output.join(format!("trace_p{}.csv", r.p));
        r.write_trace_csv(BufWriter::new(File::create(&trace_path)?))
            .with_context(|| format!("{}: cannot write trace", trace_path.display()))?;
        let (psnr, ssim) = match &reference {
            Some(refimg) => {
                let m = MetricReport::compute(refimg, &r.result, a.peak)?;
                (m.psnr.to_string(), m.ssim.to_string())
            }
            None => (String::new(), String::new()),
        };
        writeln!(
            summary,
            "{},{},{},{:.16e},{},{}",
            r.p,
            r.outer_iterations,
            r.converged,
            r.final_energy().total,
            psnr,
            ssim
        )?;
    }
    summary.flush()?;
    Ok(())
}

fn make_phantom(a: PhantomArgs) -> anyhow::Result<()> {
    if a.rows == 0 || a.cols == 0 {
        bail!("--rows and --cols must be positive");
    }
    check_output(&a.output)?;
    save_image(&phantom(a.rows, a.cols, a.seed), &a.output)?;
    Ok(())
}
