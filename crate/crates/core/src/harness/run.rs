//! Experiment orchestration: data, training of every method, evaluation and
//! artifact emission.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{Method, TrainConfig};
use super::report::{
    tradeoff, write_curves_csv, write_report_csv, MethodResult, ReportRow, RunReport, SweepPoint, SweepReport,
};
use crate::baselines::{
    baseline_gaussian_filter, baseline_identity, baseline_median_filter, train_dist_only, train_n2c, train_n2n,
};
use crate::datasets::{build_domains, save_pgm, DatasetManifest, DomainPair};
use crate::denoiser::{forward, save_checkpoint, train, DenoiserParams, TrainOutcome, Validation};
use crate::error::{Error, Result};
use crate::image::ImagePatch;
use crate::metrics::{evaluate, MetricsReport};
use crate::noise::audit;
use crate::rng::derive_named;
use crate::theory::VerifyReport;

/// Side of the flat field used for the noise audit in run reports.
pub const AUDIT_SIZE: usize = 256;

/// Training and validation domains of one configuration.
pub struct Prepared {
    /// Unpaired clean/noisy domains for the transport objectives.
    pub unpaired: DomainPair<f64>,
    /// Paired domain on the same budget for the supervised baselines.
    pub paired: DomainPair<f64>,
    /// Paired held-out set; only its noisy side is ever fed to a model.
    pub val: DomainPair<f64>,
    pub manifests: Vec<(String, DatasetManifest)>,
}

impl Prepared {
    pub fn validation(&self) -> Validation<'_, f64> {
        Validation { noisy: &self.val.noisy_patches, clean: &self.val.noisy_sources }
    }
}

pub fn prepare(cfg: &TrainConfig) -> Result<Prepared> {
    let data_seed = derive_named(cfg.seed, "data");
    let (unpaired, m_unpaired) = build_domains(&cfg.scene, &cfg.noise, false, &cfg.train_counts, data_seed)?;
    let (paired, m_paired) = build_domains(&cfg.scene, &cfg.noise, true, &cfg.train_counts, data_seed)?;
    let val_noise = cfg.noise.with_seed(derive_named(cfg.seed, "val_noise"));
    let (val, m_val) = build_domains(&cfg.scene, &val_noise, true, &cfg.val_counts, derive_named(cfg.seed, "val"))?;
    Ok(Prepared {
        unpaired,
        paired,
        val,
        manifests: vec![
            ("unpaired".to_string(), m_unpaired),
            ("paired".to_string(), m_paired),
            ("val".to_string(), m_val),
        ],
    })
}

fn eval_seed(cfg: &TrainConfig) -> u64 {
    derive_named(cfg.seed, "eval")
}

/// Metrics of a restored validation set.
pub fn score(cfg: &TrainConfig, data: &Prepared, restored: &[ImagePatch<f64>]) -> Result<MetricsReport> {
    evaluate(restored, &data.val.noisy_patches, &data.val.noisy_sources, cfg.eval.w1_subsample, eval_seed(cfg))
}

/// Output of one method on the validation set, with its trained model.
pub struct MethodRun {
    pub result: MethodResult,
    pub params: Option<DenoiserParams<f64>>,
    pub restored: Vec<ImagePatch<f64>>,
}

fn trained(method: Method, lambda: Option<f64>, outcome: TrainOutcome<f64>, cfg: &TrainConfig, data: &Prepared, t: Instant) -> Result<MethodRun> {
    let restored = forward(&outcome.params, &data.val.noisy_patches)?;
    let metrics = score(cfg, data, &restored)?;
    Ok(MethodRun {
        result: MethodResult { method, lambda, metrics, curve: outcome.curve, seconds: t.elapsed().as_secs_f64() },
        params: Some(outcome.params),
        restored,
    })
}

pub fn run_method(cfg: &TrainConfig, data: &Prepared, method: Method) -> Result<MethodRun> {
    let t = Instant::now();
    let val = Some(data.validation());
    let settings = cfg.settings(cfg.loss.lambda);
    let filtered = |f: &dyn Fn(&ImagePatch<f64>) -> Result<ImagePatch<f64>>| -> Result<MethodRun> {
        let restored: Vec<ImagePatch<f64>> = data.val.noisy_patches.iter().map(f).collect::<Result<_>>()?;
        let metrics = score(cfg, data, &restored)?;
        Ok(MethodRun {
            result: MethodResult { method, lambda: None, metrics, curve: Vec::new(), seconds: t.elapsed().as_secs_f64() },
            params: None,
            restored,
        })
    };
    match method {
        Method::Ot => {
            let o = train(&cfg.net, &settings, &data.unpaired.noisy_patches, &data.unpaired.clean_patches, val)?;
            trained(method, Some(cfg.loss.lambda), o, cfg, data, t)
        }
        Method::DistOnly => trained(method, None, train_dist_only(&cfg.net, &settings, &data.unpaired, val)?, cfg, data, t),
        Method::N2c => trained(method, None, train_n2c(&cfg.net, &settings, &data.paired, val)?, cfg, data, t),
        Method::N2n => trained(method, None, train_n2n(&cfg.net, &settings, &data.paired, val)?, cfg, data, t),
        Method::Identity => filtered(&|y| Ok(baseline_identity(y))),
        Method::GaussianFilter => filtered(&|y| baseline_gaussian_filter(y, cfg.eval.gaussian_filter_sigma)),
        Method::MedianFilter => filtered(&|y| baseline_median_filter(y, cfg.eval.median_kernel)),
    }
}

/// Runs every configured method. `on_method` sees each run as it finishes
/// (used to write checkpoints and previews).
pub fn run_train(
    cfg: &TrainConfig,
    config_text: &str,
    data: &Prepared,
    mut on_method: impl FnMut(&MethodRun) -> Result<()>,
) -> Result<RunReport> {
    let t = Instant::now();
    let noisy = score(cfg, data, &data.val.noisy_patches)?;
    let mut methods = Vec::new();
    for &m in &cfg.eval.methods {
        let run = run_method(cfg, data, m)?;
        on_method(&run)?;
        methods.push(run.result);
    }
    Ok(RunReport {
        config: cfg.clone(),
        config_text: config_text.to_string(),
        noisy,
        methods,
        noise_audit: audit(&cfg.noise.with_seed(derive_named(cfg.seed, "audit")), AUDIT_SIZE, 0.5)?,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// One transport-objective run per lambda on shared data and seed. The grid
/// is sorted ascending.
pub fn run_sweep(cfg: &TrainConfig, config_text: &str, data: &Prepared, grid: &[f64]) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("lambda grid must be non-empty".into()));
    }
    if grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument("lambda grid values must be positive".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let t = Instant::now();
    let noisy = score(cfg, data, &data.val.noisy_patches)?;
    let mut points = Vec::new();
    for &lambda in &grid {
        let tl = Instant::now();
        let o = train(
            &cfg.net,
            &cfg.settings(lambda),
            &data.unpaired.noisy_patches,
            &data.unpaired.clean_patches,
            Some(data.validation()),
        )?;
        let restored = forward(&o.params, &data.val.noisy_patches)?;
        let last = o.curve.last().copied().expect("at least one epoch");
        points.push(SweepPoint {
            lambda,
            metrics: score(cfg, data, &restored)?,
            train_fidelity: last.fidelity,
            train_w1: last.w1,
            best_val_psnr_db: o.curve.iter().map(|c| c.val_psnr_db).fold(f64::NEG_INFINITY, f64::max),
            curve: o.curve,
            seconds: tl.elapsed().as_secs_f64(),
        });
    }
    Ok(SweepReport {
        config: cfg.clone(),
        config_text: config_text.to_string(),
        noisy,
        tradeoff: tradeoff(&points),
        points,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// `<base>/<label>-<UTC timestamp>`, created exclusively; a numeric suffix
/// is added when the name is taken.
pub fn create_run_dir(base: impl AsRef<Path>, label: &str) -> Result<PathBuf> {
    let base = base.as_ref();
    fs::create_dir_all(base)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    for k in 0..1000 {
        let name = if k == 0 { format!("{label}-{stamp}") } else { format!("{label}-{stamp}-{k}") };
        let path = base.join(name);
        match fs::create_dir(&path) {
            Ok(()) => return Ok(path),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::InvalidArgument(format!("no free run directory name under {}", base.display())))
}

fn write_json(path: impl AsRef<Path>, value: &impl serde::Serialize) -> Result<()> {
    let f = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

/// Config echo and dataset manifests, written before any training.
pub fn write_inputs(dir: &Path, config_text: &str, data: &Prepared) -> Result<()> {
    fs::write(dir.join("config.toml"), config_text)?;
    for (name, m) in &data.manifests {
        fs::write(dir.join(format!("manifest_{name}.json")), m.to_json()?)?;
    }
    Ok(())
}

/// Checkpoint and PGM previews of one method.
pub fn write_method_artifacts(dir: &Path, run: &MethodRun, previews: usize) -> Result<()> {
    let name = run.result.method.as_str();
    if let Some(p) = &run.params {
        let ckpt = dir.join("checkpoints");
        fs::create_dir_all(&ckpt)?;
        save_checkpoint(p, ckpt.join(format!("{name}.ckpt")))?;
    }
    write_previews(dir, name, &run.restored, previews)
}

fn write_previews(dir: &Path, name: &str, patches: &[ImagePatch<f64>], count: usize) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    let out = dir.join("previews");
    fs::create_dir_all(&out)?;
    for (k, p) in patches.iter().take(count).enumerate() {
        save_pgm(&p.clipped(), out.join(format!("{name}_{k:03}.pgm")))?;
    }
    Ok(())
}

pub fn write_train_report(dir: &Path, report: &RunReport, data: &Prepared) -> Result<()> {
    write_previews(dir, "clean", &data.val.noisy_sources, report.config.eval.previews)?;
    write_previews(dir, "noisy", &data.val.noisy_patches, report.config.eval.previews)?;
    write_report_csv(&report.rows(), fs::File::create(dir.join("metrics.csv"))?)?;
    let curves: Vec<(String, _)> = report
        .methods
        .iter()
        .filter(|r| !r.curve.is_empty())
        .map(|r| (r.method.as_str().to_string(), r.curve.clone()))
        .collect();
    write_curves_csv(&curves, fs::File::create(dir.join("curves.csv"))?)?;
    write_json(dir.join("report.json"), report)
}

pub fn write_sweep_report(dir: &Path, report: &SweepReport) -> Result<()> {
    write_report_csv(&report.rows(), fs::File::create(dir.join("sweep.csv"))?)?;
    let curves: Vec<(String, _)> = report
        .points
        .iter()
        .map(|p| (format!("ot_lambda_{}", p.lambda), p.curve.clone()))
        .collect();
    write_curves_csv(&curves, fs::File::create(dir.join("curves.csv"))?)?;
    write_json(dir.join("report.json"), report)
}

pub fn write_verify_report(dir: &Path, report: &VerifyReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(fs::File::create(dir.join("verify.csv"))?);
    for row in &report.rows {
        out.serialize(row)?;
    }
    out.flush()?;
    write_json(dir.join("report.json"), report)
}

/// Partial curve of a diverged run.
pub fn write_divergence(dir: &Path, err: &Error) -> Result<()> {
    if let Error::Diverged { epoch, loss, curve } = err {
        write_json(
            dir.join("diverged.json"),
            &serde_json::json!({ "epoch": epoch, "loss": loss, "curve": curve }),
        )?;
    }
    Ok(())
}

/// dB value with two decimals, or the `+inf` sentinel.
pub fn db_cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.2}")
    } else {
        crate::metrics::format_db(v)
    }
}

/// Human-readable table of a run's rows.
pub fn format_rows(noisy: &MetricsReport, rows: &[ReportRow]) -> String {
    let mut s = format!(
        "{:<16} {:>8} {:>10} {:>8} {:>12} {:>12}\n",
        "method", "lambda", "psnr_db", "ssim", "w1_to_clean", "fidelity"
    );
    let line = |name: &str, lambda: Option<f64>, m: &MetricsReport| {
        format!(
            "{:<16} {:>8} {:>10} {:>8.4} {:>12.4} {:>12.4}\n",
            name,
            lambda.map(|l| format!("{l}")).unwrap_or_else(|| "-".into()),
            db_cell(m.psnr_db),
            m.ssim,
            m.w1_to_clean,
            m.fidelity_to_noisy
        )
    };
    s.push_str(&line("noisy input", None, noisy));
    for r in rows {
        s.push_str(&line(r.method.as_str(), r.lambda, &r.metrics));
    }
    s
}
