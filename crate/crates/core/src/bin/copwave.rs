use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use copwave::checks::{self, Check};
use copwave::config::ExperimentConfig;
use copwave::copula::CopulaModel;
use copwave::estimator::{
    effective_regularity, pseudo_observations, resolution_rule, scaling_coefficients, DensityEstimate,
    EstimatorConfig, EvalGrid, RankScaling, Sample, TiePolicy,
};
use copwave::harness::{run_experiment, ExperimentKind, H4Diagnostics, RunOptions};
use copwave::wavelet::WaveletKind;
use copwave::{rng, Error, Result};

/// Rank-based linear wavelet estimation of copula densities.
///
/// Exit status: 0 on success, 1 on invalid input or configuration, 2 on
/// runtime failure (including a failed check suite).
#[derive(Parser, Debug)]
#[command(name = "copwave", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a seeded sample from a copula and write it as headerless CSV.
    Simulate(SimulateArgs),
    /// Estimate a copula density from a headerless CSV sample.
    Estimate(EstimateArgs),
    /// Check Gram identity, two-scale relation, integral and partition of unity.
    CheckBasis(CheckArgs),
    /// Check kernel normalization, symmetry, constant reproduction and the range of int K^2.
    CheckKernel(CheckArgs),
    /// Run a Monte Carlo experiment described by a TOML file.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Copula family: independence, fgm, frank, clayton or gaussian.
    #[arg(long)]
    model: String,
    /// Parameter of the fgm, frank or clayton family.
    #[arg(long, conflicts_with = "rho")]
    theta: Option<f64>,
    /// Correlation of the gaussian family.
    #[arg(long)]
    rho: Option<f64>,
    /// Dimension; families other than independence are bivariate.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Number of observations.
    #[arg(long)]
    n: usize,
    /// Seed of the ChaCha8 stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Headerless CSV, one observation per row.
    input: PathBuf,
    /// Scaling function: haar, db2, db3 or db4.
    #[arg(long, default_value = "haar")]
    wavelet: String,
    /// Resolution level j.
    #[arg(long, required_unless_present = "auto_level", conflicts_with = "auto_level")]
    level: Option<u32>,
    /// Choose j from the sample size for density smoothness t.
    #[arg(long, value_name = "T")]
    auto_level: Option<f64>,
    /// Expected number of columns; defaults to the number found in the file.
    #[arg(long)]
    dim: Option<usize>,
    /// Evaluation points per axis, at i/(G+1) for i = 1..G.
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// Rank denominator.
    #[arg(long, value_enum, default_value_t = Scaling::N)]
    scaling: Scaling,
    /// Handling of tied values within a column.
    #[arg(long, value_enum, default_value_t = Ties::Break)]
    ties: Ties,
    /// Clip negative values to 0 and renormalize the grid mean to 1.
    #[arg(long)]
    clip: bool,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Scaling {
    #[value(name = "n")]
    N,
    #[value(name = "n+1")]
    NPlusOne,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Ties {
    Break,
    Reject,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Resolution level of the checks.
    #[arg(long, default_value_t = 3)]
    level: u32,
    /// Wavelets to check; all supported ones when omitted.
    #[arg(long = "wavelet")]
    wavelets: Vec<String>,
    /// Seed for the random evaluation points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: Kind,
    /// TOML experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Allow models with unbounded densities.
    #[arg(long)]
    force: bool,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Kind {
    Prop1,
    Rate,
    Decompose,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::CheckBasis(a) => check(a, false),
        Command::CheckKernel(a) => check(a, true),
        Command::Experiment(a) => experiment(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn simulate(a: SimulateArgs) -> Result<ExitCode> {
    if a.n == 0 {
        return Err(Error::InvalidParameter("--n must be at least 1".into()));
    }
    let model = CopulaModel::from_name(&a.model, a.theta.or(a.rho), a.dim)?;
    let sample = model.sample(a.n, &mut rng::stream(a.seed, 0));
    let mut w = output(a.out.as_deref())?;
    sample.write_csv(&mut w)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn estimate(a: EstimateArgs) -> Result<ExitCode> {
    let file = File::open(&a.input).map_err(|e| Error::Parse(format!("cannot read {}: {e}", a.input.display())))?;
    let sample = Sample::read_csv(file)?;
    let d = sample.dim();
    if let Some(want) = a.dim {
        if want != d {
            return Err(Error::DimensionMismatch { expected: want, got: d });
        }
    }
    if a.grid == 0 {
        return Err(Error::InvalidParameter("--grid must be positive".into()));
    }
    let kind: WaveletKind = a.wavelet.parse()?;
    let wavelet = Arc::new(kind.build()?);
    let level = match (a.level, a.auto_level) {
        (Some(j), _) => j,
        (None, Some(t)) => {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("--auto-level needs t > 0, got {t}")));
            }
            let t_eff = effective_regularity(t, &wavelet);
            let n = sample.n();
            let j = resolution_rule(n, t_eff, d);
            let h4 = H4Diagnostics::compute(&[n], &[j], d);
            eprintln!("level j={j}");
            eprintln!(
                "  rule: j = round(log2((n / ln n)^(1/(2t+d)))) with n={n}, t={t_eff}{}, d={d}, at least 1",
                if t_eff < t { format!(" (t={t} capped by {kind})") } else { String::new() }
            );
            eprintln!("  growth diagnostics: n/(j 2^((d+1)j)) = {}, j/ln ln n = {}", h4.a_n[0], h4.b_n[0]);
            j
        }
        (None, None) => unreachable!("clap requires one of --level and --auto-level"),
    };
    let scaling = match a.scaling {
        Scaling::N => RankScaling::N,
        Scaling::NPlusOne => RankScaling::NPlusOne,
    };
    let ties = match a.ties {
        Ties::Break => TiePolicy::Break,
        Ties::Reject => TiePolicy::Reject,
    };
    let cfg = EstimatorConfig::new(wavelet, level, d)?.with_scaling(scaling);
    let ps = pseudo_observations(&sample, scaling, ties)?;
    let cf = scaling_coefficients(&ps, &cfg)?;
    let mut est = DensityEstimate::evaluate(&cf, EvalGrid::uniform(a.grid, d));
    if a.clip {
        est.clip_and_normalize();
    }
    let mut w = output(a.out.as_deref())?;
    est.write_csv(&mut w)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn check(a: CheckArgs, kernel: bool) -> Result<ExitCode> {
    let kinds = if a.wavelets.is_empty() {
        checks::default_wavelets()
    } else {
        a.wavelets.iter().map(|w| w.parse()).collect::<Result<Vec<WaveletKind>>>()?
    };
    if a.level > 12 {
        return Err(Error::InvalidParameter(format!("--level {} is above 12", a.level)));
    }
    let results: Vec<Check> = if kernel {
        checks::kernel_suite(&kinds, a.level, a.seed)?
    } else {
        checks::basis_suite(&kinds, a.level)?
    };
    for c in &results {
        println!("{c}");
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", results.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn experiment(a: ExperimentArgs) -> Result<ExitCode> {
    let kind = match a.kind {
        Kind::Prop1 => ExperimentKind::Prop1,
        Kind::Rate => ExperimentKind::Rate,
        Kind::Decompose => ExperimentKind::Decompose,
    };
    if a.workers == 0 {
        return Err(Error::InvalidParameter("--workers must be at least 1".into()));
    }
    let cfg = ExperimentConfig::load(&a.config)?;
    let opts = RunOptions { workers: a.workers, force: a.force, seed: a.seed };
    let report = run_experiment(kind, cfg, &opts)?;
    let dir = report.config.output.dir.clone();
    report.write_outputs(&dir)?;
    println!("n        j  median S_n   sup_r       sup_d       sup_b       sup_err     ratio");
    for r in &report.rows {
        println!(
            "{:<8} {:<2} {:<11.5} {:<11.5} {:<11.5} {:<11.5} {:<11.5} {:.4}",
            r.n, r.level, r.s_n.median, r.sup_r.median, r.sup_d.median, r.sup_b.median, r.sup_err.median, r.ratio_r_d
        );
    }
    if let Some(fit) = &report.fit {
        println!(
            "slope of {}: {:.4} +- {:.4} (expected {:.4}, composite theory {:.4})",
            fit.statistic, fit.slope, fit.stderr, fit.expected, fit.theoretical_composite
        );
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    for c in &report.criteria {
        println!("{}  {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {}", dir.display());
    eprintln!("wall time {:.2} s", report.wall_seconds);
    Ok(ExitCode::SUCCESS)
}
