use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ghoststat::config::{apply_overrides, load_config_over, preset, split_list, RunConfig};
use ghoststat::pipeline::{self, IngestOptions};
use ghoststat::verify::{self, VerifyOptions};
use ghoststat::{Error, Result};
use ghoststat_core::{DistributionSpec, Estimator, NoiseModel, TransformSpec};

const DEFAULT_OUT: &str = "ghoststat-out";
const OUT_ENV: &str = "GHOSTSTAT_OUT";

/// Thermal-light ghost imaging: simulate runs, reconstruct, and check the
/// reconstructions against their predicted statistics.
#[derive(Debug, Parser)]
#[command(name = "ghoststat", version)]
struct Cli {
    /// Output or run directory [env GHOSTSTAT_OUT, default ./ghoststat-out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads, 0 = one per CPU
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate bucket signals into a run directory
    Simulate(SimulateArgs),
    /// Reconstruct a run with every requested estimator and transform
    Reconstruct(ReconstructArgs),
    /// Region statistics, theory and linearity for the reconstructions of a run
    Analyze {
        /// Run directory (defaults to the output directory)
        run: Option<PathBuf>,
    },
    /// Turn recorded buckets and patterns into a run directory
    Ingest(IngestArgs),
    /// Run the acceptance matrix
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Config file (key = value lines, or JSON)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a shipped preset: paper-sim or paper-exp
    #[arg(long)]
    preset: Option<String>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override one config key, e.g. --set frames=1000
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Also write the pattern stack
    #[arg(long)]
    save_patterns: bool,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    /// Run directory (defaults to the output directory)
    run: Option<PathBuf>,
    /// Comma list, e.g. "DeltaG2,g2" [default: from the run config, else DeltaG2]
    #[arg(long)]
    estimators: Option<String>,
    /// Comma list, e.g. "identity,power(3)" [default: from the run config, else identity]
    #[arg(long)]
    transforms: Option<String>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Bucket values, one per line (CSV, first column)
    #[arg(long)]
    buckets: PathBuf,
    /// Pattern stack (.gips)
    #[arg(long)]
    patterns: PathBuf,
    /// Object image (PGM); needed by analyze
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Noise model, e.g. "gaussian(2.0985e6, 1.226e10)"
    #[arg(long, default_value = "none")]
    noise: String,
    /// Dark-frame buckets; their moments replace --noise
    #[arg(long)]
    dark: Option<PathBuf>,
    /// Pattern law, when known, e.g. "bernoulli(0.5, 0, 1)"
    #[arg(long)]
    distribution: Option<String>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// T = 10⁴ on 32×32 cards with fewer repetitions
    #[arg(long)]
    quick: bool,
    /// Print the report as JSON
    #[arg(long)]
    json: bool,
    #[arg(long, hide = true)]
    inject_c1_sign_error: bool,
}

fn out_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    split_list(s)
        .into_iter()
        .map(|p| p.trim().parse::<T>().map_err(|e| Error::Usage(format!("{what} '{}': {e}", p.trim()))))
        .collect()
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<ExitCode> {
    let mut cfg = match &args.preset {
        Some(name) => preset(name)?,
        None => RunConfig::default(),
    };
    if let Some(path) = &args.config {
        cfg = load_config_over(cfg, path)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.save_patterns |= args.save_patterns;
    let cfg = apply_overrides(cfg, &args.set)?;
    let dir = out_dir(cli.out.as_deref(), cfg.out.as_deref());
    let outcome = pipeline::simulate(&cfg, &dir, cli.threads)?;
    println!(
        "simulated {} frames of {} pixels (seed {}) into {}",
        outcome.manifest.frames,
        outcome.manifest.pixels,
        cfg.seed,
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn reconstruct(cli: &Cli, args: &ReconstructArgs) -> Result<ExitCode> {
    let dir = args.run.clone().unwrap_or_else(|| out_dir(cli.out.as_deref(), None));
    let stored = ghoststat::runfile::read_manifest(&dir)?.config;
    let estimators = match &args.estimators {
        Some(s) => parse_list::<Estimator>(s, "estimator")?,
        None => stored.as_ref().map_or(vec![Estimator::DeltaG2], |c| c.estimators.clone()),
    };
    let transforms = match &args.transforms {
        Some(s) => parse_list::<TransformSpec>(s, "transform")?,
        None => stored.as_ref().map_or(vec![TransformSpec::Identity], |c| c.transforms.clone()),
    };
    let index = pipeline::reconstruct(&dir, &estimators, &transforms, cli.threads)?;
    for e in &index.entries {
        let check = e.centered_deviation.map_or(String::new(), |d| format!("  centred deviation {d:.1e}"));
        println!("{:<8} {:<10} {}/{}{check}", e.estimator.to_string(), e.transform.to_string(), pipeline::RECON_DIR, e.pgm);
    }
    Ok(ExitCode::SUCCESS)
}

fn analyze(cli: &Cli, run: Option<&Path>) -> Result<ExitCode> {
    let dir = run.map(Path::to_path_buf).unwrap_or_else(|| out_dir(cli.out.as_deref(), None));
    let summary = pipeline::analyze(&dir)?;
    if !summary.with_theory {
        println!("no pattern law recorded: statistics only, no theory overlay");
    }
    for e in &summary.entries {
        let r2 = e.linearity.as_ref().map_or("-".to_string(), |f| format!("{:.6}", f.r_squared()));
        let ks: Vec<String> = e
            .regions
            .iter()
            .filter_map(|r| r.ks.map(|d| format!("{}:{d:.4}/{:.4}", r.level, r.ks_threshold)))
            .collect();
        println!(
            "{:<8} {:<10} R²={r2} KS[{}] {}",
            e.estimator.to_string(),
            e.transform.to_string(),
            ks.join(" "),
            if e.ks_pass && e.linearity_pass { "ok" } else { "FAIL" }
        );
    }
    println!("reports in {}", dir.join(pipeline::ANALYSIS_DIR).display());
    Ok(if summary.pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn ingest(cli: &Cli, args: &IngestArgs) -> Result<ExitCode> {
    let opts = IngestOptions {
        buckets_csv: args.buckets.clone(),
        patterns: args.patterns.clone(),
        image: args.image.clone(),
        gamma: args.gamma,
        noise: args.noise.parse::<NoiseModel>().map_err(|e| Error::Usage(format!("--noise: {e}")))?,
        dark_csv: args.dark.clone(),
        distribution: args
            .distribution
            .as_deref()
            .map(|s| s.parse::<DistributionSpec>().map_err(|e| Error::Usage(format!("--distribution: {e}"))))
            .transpose()?,
    };
    let dir = out_dir(cli.out.as_deref(), None);
    let m = pipeline::ingest(&opts, &dir)?;
    println!("ingested {} frames of {} pixels into {}", m.frames, m.pixels, dir.display());
    Ok(ExitCode::SUCCESS)
}

fn verify(cli: &Cli, args: &VerifyArgs) -> Result<ExitCode> {
    let mut opts = VerifyOptions::new(args.quick, out_dir(cli.out.as_deref(), None).join("verify"));
    opts.threads = cli.threads;
    opts.inject_c1_sign_error = args.inject_c1_sign_error;
    let report = verify::run(&opts)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        println!("{report}");
    }
    Ok(if report.pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(&cli, a),
        Command::Reconstruct(a) => reconstruct(&cli, a),
        Command::Analyze { run } => analyze(&cli, run.as_deref()),
        Command::Ingest(a) => ingest(&cli, a),
        Command::Verify(a) => verify(&cli, a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
