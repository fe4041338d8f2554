use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use otdenoise::datasets::load_pgm;
use otdenoise::harness::{
    create_run_dir, db_cell, format_rows, prepare, run_sweep, run_train, write_divergence, write_inputs,
    write_method_artifacts, write_sweep_report, write_train_report, write_verify_report, TrainConfig, DEFAULT_CONFIG,
};
use otdenoise::image::ImagePatch;
use otdenoise::metrics::{evaluate, format_db};
use otdenoise::noise::{audit, NoiseKind, NoiseSpec};
use otdenoise::theory::{check_noisy_target_ranking, run_verification, VerifyConfig};
use otdenoise::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "otdenoise", version, about = "Optimal-transport denoising experiments at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Brute-force check that relaxed and constrained minimizers coincide.
    Verify(VerifyArgs),
    /// Train and evaluate every configured method.
    Train(TrainArgs),
    /// Train the transport objective over a lambda grid.
    Sweep(SweepArgs),
    /// Moment and autocorrelation audit of the noise models.
    NoiseAudit(AuditArgs),
    /// PSNR, SSIM, patch-set W1 and fidelity of restored PGM images.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 100)]
    instances: usize,
    /// Comma-separated lambda grid.
    #[arg(long, value_delimiter = ',', default_values_t = [1.5, 2.0, 10.0])]
    lambda: Vec<f64>,
    /// Largest support size (at most 4 for exhaustive enumeration).
    #[arg(long, default_value_t = 4)]
    max_n: usize,
    #[arg(long, default_value_t = 2)]
    max_dim: usize,
    #[arg(long, default_value_t = VerifyConfig::default().seed)]
    seed: u64,
    /// Also run the squared-error identity check with this many samples (0 skips it).
    #[arg(long, default_value_t = 0)]
    ranking_samples: usize,
    /// Parent of the run directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Configuration file; see --print-default-config.
    #[arg(required_unless_present = "print_default_config")]
    config: Option<PathBuf>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the default configuration and exit.
    #[arg(long)]
    print_default_config: bool,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    /// Comma-separated lambda grid; defaults to `lambda_grid` of the config.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditKind {
    All,
    Gaussian,
    Poisson,
    BrownGaussian,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, value_enum, default_value_t = AuditKind::All)]
    kind: AuditKind,
    /// Gaussian standard deviation in 8-bit levels.
    #[arg(long, default_value_t = 25.0)]
    sigma_255: f64,
    /// Poisson peak event count.
    #[arg(long, default_value_t = 30.0)]
    lambda_p: f64,
    /// Side of the flat test field.
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Intensity of the flat test field.
    #[arg(long, default_value_t = 0.5)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MetricsArgs {
    /// Clean PGM file or directory of PGM files.
    #[arg(long)]
    clean: PathBuf,
    /// Restored PGM file or directory, matched to `--clean` by sorted name.
    #[arg(long)]
    restored: PathBuf,
    /// Noisy inputs, for the fidelity column.
    #[arg(long)]
    noisy: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    w1_subsample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Verify(a) => verify(a),
        Command::Train(a) => train_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::NoiseAudit(a) => noise_audit(a),
        Command::Metrics(a) => metrics_cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } | Error::InvalidArgument(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            })
        }
    }
}

fn verify(a: VerifyArgs) -> Result<u8, Error> {
    let config = VerifyConfig {
        instances: a.instances,
        lambdas: a.lambda,
        max_n: a.max_n,
        max_dim: a.max_dim,
        seed: a.seed,
        ..VerifyConfig::default()
    };
    config.validate()?;
    let report = run_verification(&config)?;
    let dir = create_run_dir(&a.out, "verify")?;
    write_verify_report(&dir, &report)?;

    println!("{:>8} {:>10} {:>8} {:>10} {:>12}", "lambda", "instances", "hold", "off-target", "applies");
    for &lambda in &config.lambdas {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.lambda == lambda).collect();
        let holds = rows.iter().filter(|r| r.holds).count();
        let off = rows.iter().filter(|r| r.off_target_minimizer).count();
        let applies = if lambda > 1.0 { "applies" } else { "not applicable" };
        println!("{lambda:>8} {:>10} {holds:>8} {off:>10} {applies:>12}", rows.len());
    }
    let mut ok = report.all_hold();
    if a.ranking_samples > 0 {
        let p = check_noisy_target_ranking(0.1, 4, a.ranking_samples, config.seed)?;
        println!(
            "squared-error identity: spearman {:.3}, gaps within 3 SE: {}",
            p.spearman,
            p.passed()
        );
        ok &= p.passed();
    }
    println!("report: {}", dir.display());
    println!("verdict: {}", if ok { "PASS" } else { "FAIL" });
    Ok(if ok { 0 } else { EXIT_FAIL })
}

fn load_config(path: &Path, out: Option<PathBuf>) -> Result<(TrainConfig, String), Error> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = TrainConfig::parse(&text)?;
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    Ok((cfg, text))
}

fn train_cmd(a: TrainArgs) -> Result<u8, Error> {
    if a.print_default_config {
        print!("{DEFAULT_CONFIG}");
        return Ok(0);
    }
    let (cfg, text) = load_config(a.config.as_deref().expect("required by clap"), a.out)?;
    let data = prepare(&cfg)?;
    let dir = create_run_dir(&cfg.output_dir, "train")?;
    write_inputs(&dir, &text, &data)?;
    let report = run_train(&cfg, &text, &data, |run| {
        eprintln!("{:<16} done in {:.1}s", run.result.method.as_str(), run.result.seconds);
        write_method_artifacts(&dir, run, cfg.eval.previews)
    });
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            write_divergence(&dir, &e)?;
            return Err(e);
        }
    };
    write_train_report(&dir, &report, &data)?;
    print!("{}", format_rows(&report.noisy, &report.rows()));
    let a = &report.noise_audit;
    println!(
        "noise audit ({}): mean {:.2e}, variance {:.4e} (model {:.4e}), lag-1 autocorrelation {:.3} (model {:.3}), {}",
        a.kind.as_str(),
        a.mean,
        a.variance,
        a.expected_variance,
        a.lag1_autocorrelation,
        a.expected_lag1_autocorrelation,
        if a.passed() { "pass" } else { "FAIL" }
    );
    println!("run directory: {}", dir.display());
    Ok(0)
}

fn sweep_cmd(a: SweepArgs) -> Result<u8, Error> {
    let (cfg, text) = load_config(&a.config, a.out)?;
    let grid = a.lambdas.unwrap_or_else(|| cfg.eval.lambda_grid.clone());
    if grid.is_empty() || grid.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidArgument("lambda grid must be non-empty and positive".into()));
    }
    let data = prepare(&cfg)?;
    let dir = create_run_dir(&cfg.output_dir, "sweep")?;
    write_inputs(&dir, &text, &data)?;
    let report = match run_sweep(&cfg, &text, &data, &grid) {
        Ok(r) => r,
        Err(e) => {
            write_divergence(&dir, &e)?;
            return Err(e);
        }
    };
    write_sweep_report(&dir, &report)?;
    println!(
        "{:>8} {:>12} {:>12} {:>10} {:>12} {:>12}",
        "lambda", "fidelity", "w1_to_clean", "psnr_db", "train_fid", "train_w1"
    );
    for p in &report.points {
        println!(
            "{:>8} {:>12.4} {:>12.4} {:>10} {:>12.4} {:>12.4}",
            p.lambda,
            p.metrics.fidelity_to_noisy,
            p.metrics.w1_to_clean,
            db_cell(p.metrics.psnr_db),
            p.train_fidelity,
            p.train_w1
        );
    }
    let t = report.tradeoff;
    println!(
        "fidelity monotone: {}, w1 monotone: {}, best psnr at lambda {} (interior: {})",
        t.fidelity_monotone, t.w1_monotone, report.points[t.best_index].lambda, t.best_interior
    );
    println!("run directory: {}", dir.display());
    Ok(0)
}

fn noise_audit(a: AuditArgs) -> Result<u8, Error> {
    let kinds: Vec<NoiseKind> = match a.kind {
        AuditKind::All => vec![NoiseKind::Gaussian, NoiseKind::Poisson, NoiseKind::BrownGaussian],
        AuditKind::Gaussian => vec![NoiseKind::Gaussian],
        AuditKind::Poisson => vec![NoiseKind::Poisson],
        AuditKind::BrownGaussian => vec![NoiseKind::BrownGaussian],
    };
    let sigma = a.sigma_255 / 255.0;
    let mut audits = Vec::new();
    for kind in kinds {
        let spec = match kind {
            NoiseKind::Gaussian => NoiseSpec::gaussian(sigma, a.seed),
            NoiseKind::Poisson => NoiseSpec::poisson(a.lambda_p, a.seed),
            NoiseKind::BrownGaussian => NoiseSpec::brown_gaussian(sigma, a.seed),
        };
        audits.push(audit(&spec, a.size, a.level)?);
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&audits)?);
    } else {
        println!(
            "{:<16} {:>11} {:>11} {:>11} {:>9} {:>9} {:>6}",
            "kind", "mean", "variance", "expected", "lag1", "expected", "pass"
        );
        for r in &audits {
            println!(
                "{:<16} {:>11.3e} {:>11.4e} {:>11.4e} {:>9.4} {:>9.4} {:>6}",
                r.kind.as_str(),
                r.mean,
                r.variance,
                r.expected_variance,
                r.lag1_autocorrelation,
                r.expected_lag1_autocorrelation,
                r.passed()
            );
        }
    }
    Ok(if audits.iter().all(|r| r.passed()) { 0 } else { EXIT_FAIL })
}

fn load_set(path: &Path) -> Result<Vec<ImagePatch<f64>>, Error> {
    if !path.is_dir() {
        return Ok(vec![load_pgm(path)?]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "pgm"));
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!("no .pgm files in {}", path.display())));
    }
    files.iter().map(load_pgm).collect()
}

fn metrics_cmd(a: MetricsArgs) -> Result<u8, Error> {
    let clean = load_set(&a.clean)?;
    let restored = load_set(&a.restored)?;
    if clean.len() != restored.len() {
        return Err(Error::InvalidArgument(format!(
            "{} clean vs {} restored images",
            clean.len(),
            restored.len()
        )));
    }
    let noisy = a.noisy.as_deref().map(load_set).transpose()?;
    let r = evaluate(&restored, noisy.as_deref().unwrap_or(&restored), &clean, a.w1_subsample, a.seed)?;
    println!("images: {}", clean.len());
    println!("psnr_db: {}", format_db(r.psnr_db));
    println!("ssim: {}", r.ssim);
    println!("w1_to_clean: {}", r.w1_to_clean);
    match noisy {
        Some(_) => println!("fidelity_to_noisy: {}", r.fidelity_to_noisy),
        None => println!("fidelity_to_noisy: n/a (no --noisy given)"),
    }
    Ok(0)
}
