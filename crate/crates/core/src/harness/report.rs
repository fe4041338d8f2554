//! Report rows (CSV) and the structured run report (JSON).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::config::{Method, TrainConfig};
use crate::denoiser::EpochRecord;
use crate::error::{Error, Result};
use crate::metrics::{format_db, parse_db, MetricsReport};
use crate::noise::{NoiseAudit, NoiseKind, NoiseSpec};

pub const REPORT_COLUMNS: [&str; 9] = [
    "method",
    "noise_kind",
    "sigma",
    "lambda",
    "psnr_db",
    "ssim",
    "w1_to_clean",
    "fidelity_to_noisy",
    "seed",
];

/// One CSV row. `sigma` is the noise standard deviation in `[0, 1]` units
/// (empty for Poisson noise), `lambda` is empty for methods without one.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: Method,
    pub noise_kind: NoiseKind,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub metrics: MetricsReport,
    pub seed: u64,
}

impl ReportRow {
    pub fn new(method: Method, noise: &NoiseSpec, lambda: Option<f64>, metrics: MetricsReport, seed: u64) -> Self {
        let sigma = (noise.kind != NoiseKind::Poisson).then_some(noise.sigma);
        Self { method, noise_kind: noise.kind, sigma, lambda, metrics, seed }
    }

    fn fields(&self) -> [String; 9] {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        [
            self.method.as_str().to_string(),
            self.noise_kind.as_str().to_string(),
            opt(self.sigma),
            opt(self.lambda),
            format_db(self.metrics.psnr_db),
            format!("{}", self.metrics.ssim),
            format!("{}", self.metrics.w1_to_clean),
            format!("{}", self.metrics.fidelity_to_noisy),
            self.seed.to_string(),
        ]
    }
}

pub fn write_report_csv(rows: &[ReportRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_COLUMNS)?;
    for r in rows {
        out.write_record(r.fields())?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a report written by [`write_report_csv`], rejecting any deviation
/// from the column set.
pub fn read_report_csv(r: impl Read) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(r);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_COLUMNS {
        return Err(Error::InvalidArgument(format!("unexpected report columns {header:?}")));
    }
    let bad = |line: usize, what: &str| Error::InvalidArgument(format!("report row {line}: bad {what}"));
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |k: usize, what: &str| -> Result<f64> { rec[k].parse().map_err(|_| bad(line, what)) };
        let opt = |k: usize, what: &str| -> Result<Option<f64>> {
            if rec[k].is_empty() {
                Ok(None)
            } else {
                num(k, what).map(Some)
            }
        };
        rows.push(ReportRow {
            method: rec[0].parse().map_err(|_| bad(line, "method"))?,
            noise_kind: rec[1].parse().map_err(|_| bad(line, "noise_kind"))?,
            sigma: opt(2, "sigma")?,
            lambda: opt(3, "lambda")?,
            metrics: MetricsReport {
                psnr_db: parse_db(&rec[4]).ok_or_else(|| bad(line, "psnr_db"))?,
                ssim: num(5, "ssim")?,
                w1_to_clean: num(6, "w1_to_clean")?,
                fidelity_to_noisy: num(7, "fidelity_to_noisy")?,
            },
            seed: rec[8].parse().map_err(|_| bad(line, "seed"))?,
        });
    }
    Ok(rows)
}

/// Per-epoch curves of every trained method, one CSV.
pub fn write_curves_csv(curves: &[(String, Vec<EpochRecord>)], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "epoch", "lr", "loss", "fidelity", "w1", "val_psnr_db", "val_fidelity"])?;
    for (name, curve) in curves {
        for r in curve {
            out.write_record([
                name.clone(),
                r.epoch.to_string(),
                format!("{}", r.lr),
                format!("{}", r.loss),
                format!("{}", r.fidelity),
                format!("{}", r.w1),
                format_db(r.val_psnr_db),
                format!("{}", r.val_fidelity),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub lambda: Option<f64>,
    pub metrics: MetricsReport,
    pub curve: Vec<EpochRecord>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: TrainConfig,
    pub config_text: String,
    /// Metrics of the unprocessed noisy validation set.
    pub noisy: MetricsReport,
    pub methods: Vec<MethodResult>,
    /// Moments of the configured noise model on a flat field.
    pub noise_audit: NoiseAudit,
    pub seconds: f64,
}

impl RunReport {
    pub fn result(&self, method: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == method)
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.methods
            .iter()
            .map(|r| ReportRow::new(r.method, &self.config.noise, r.lambda, r.metrics.clone(), self.config.seed))
            .collect()
    }
}

/// One point of a lambda sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub metrics: MetricsReport,
    /// Final-epoch training terms.
    pub train_fidelity: f64,
    pub train_w1: f64,
    #[serde(with = "crate::metrics::db_serde")]
    pub best_val_psnr_db: f64,
    pub curve: Vec<EpochRecord>,
    pub seconds: f64,
}

/// Shape of the fidelity/W1 trade-off across a sorted lambda grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeOff {
    /// Fidelity non-decreasing in lambda, each step allowed to drop by 10%.
    pub fidelity_monotone: bool,
    /// W1 non-increasing in lambda, each step allowed to rise by 10%.
    pub w1_monotone: bool,
    /// Index of the grid point with the highest validation PSNR.
    pub best_index: usize,
    pub best_interior: bool,
}

/// Relative slack between adjacent grid points.
pub const TRADEOFF_TOLERANCE: f64 = 0.1;

pub fn tradeoff(points: &[SweepPoint]) -> TradeOff {
    let fid: Vec<f64> = points.iter().map(|p| p.metrics.fidelity_to_noisy).collect();
    let w1: Vec<f64> = points.iter().map(|p| p.metrics.w1_to_clean).collect();
    let fidelity_monotone = fid.windows(2).all(|w| w[1] >= w[0] * (1.0 - TRADEOFF_TOLERANCE));
    let w1_monotone = w1.windows(2).all(|w| w[1] <= w[0] * (1.0 + TRADEOFF_TOLERANCE));
    let best_index = points
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if p.metrics.psnr_db > points[best].metrics.psnr_db { i } else { best });
    TradeOff {
        fidelity_monotone,
        w1_monotone,
        best_index,
        best_interior: best_index > 0 && best_index + 1 < points.len(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: TrainConfig,
    pub config_text: String,
    pub noisy: MetricsReport,
    pub points: Vec<SweepPoint>,
    pub tradeoff: TradeOff,
    pub seconds: f64,
}

impl SweepReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.points
            .iter()
            .map(|p| ReportRow::new(Method::Ot, &self.config.noise, Some(p.lambda), p.metrics.clone(), self.config.seed))
            .collect()
    }
}
