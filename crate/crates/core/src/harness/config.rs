//! Flat key-value experiment configuration (TOML syntax, no tables).
//!
//! Every error names the offending key and the line it was set on (line 0
//! for a missing key).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::datasets::{DomainCounts, SceneKind, SceneSpec};
use crate::denoiser::{CriticSpec, LossSpec, NetSpec, Objective, OptimizerSettings, PenaltyMode, TrainSettings};
use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoiseSpec};
use crate::rng::derive_named;

/// Methods evaluated by a training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ot,
    N2c,
    N2n,
    DistOnly,
    Identity,
    GaussianFilter,
    MedianFilter,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ot,
        Method::N2c,
        Method::N2n,
        Method::DistOnly,
        Method::Identity,
        Method::GaussianFilter,
        Method::MedianFilter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ot => "ot",
            Method::N2c => "n2c",
            Method::N2n => "n2n",
            Method::DistOnly => "dist_only",
            Method::Identity => "identity",
            Method::GaussianFilter => "gaussian_filter",
            Method::MedianFilter => "median_filter",
        }
    }

    pub fn is_trained(self) -> bool {
        matches!(self, Method::Ot | Method::N2c | Method::N2n | Method::DistOnly)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub methods: Vec<Method>,
    pub lambda_grid: Vec<f64>,
    /// Patch-set W1 is computed on at most this many patches per side.
    pub w1_subsample: usize,
    pub gaussian_filter_sigma: f64,
    pub median_kernel: usize,
    /// Denoised validation patches written as PGM per method.
    pub previews: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub scene: SceneSpec,
    pub noise: NoiseSpec,
    pub net: NetSpec,
    pub loss: LossSpec,
    pub optimizer: OptimizerSettings,
    pub epochs: usize,
    pub batch_size: usize,
    pub patch_size: usize,
    pub train_counts: DomainCounts,
    pub val_counts: DomainCounts,
    pub eval: EvalSettings,
}

/// Default configuration, also the reference for every accepted key.
pub const DEFAULT_CONFIG: &str = r#"# Experiment configuration: flat `key = value` lines (TOML syntax).
seed = 1
output_dir = "runs"

# clean scenes
scene_kind = "piecewise_constant_shapes"   # piecewise_constant_shapes | smooth_gradient | sinusoid_texture
scene_size = 32
min_shapes = 2
max_shapes = 6
intensity_lo = 0.1
intensity_hi = 0.9

# patches per domain
patch_size = 4
train_scenes = 2048
train_patches = 16384
val_scenes = 256
val_patches = 2048

# degradation; sigma in 8-bit levels (25 means 25/255)
noise_kind = "gaussian"                    # gaussian | poisson | brown_gaussian
sigma_255 = 25.0
lambda_p = 30.0
kernel_size = 5
kernel_sigma = 1.0
clip_noisy = false

# network: two stride-2 convs, two transposed convs, input skip
net_channels = [8, 16]

# objective
beta = 1.0
lambda = 4.0
penalty = "exact_minibatch_w1"             # exact_minibatch_w1 | critic_wgan_gp
critic_hidden = [32]
gp_weight = 10.0
critic_steps = 5
critic_lr_scale = 0.5

# optimizer (RMSProp); decay_epoch defaults to epochs / 2
epochs = 60
batch_size = 256
lr = 3e-3
rho = 0.9
decay_factor = 0.1

# evaluation
methods = ["ot", "n2c", "n2n", "dist_only", "identity", "gaussian_filter", "median_filter"]
lambda_grid = [1.5, 2.0, 3.0, 4.0, 8.0]
w1_subsample = 2048
gaussian_filter_sigma = 1.0
median_kernel = 3
previews = 8
"#;

const KEYS: &[&str] = &[
    "seed",
    "output_dir",
    "scene_kind",
    "scene_size",
    "min_shapes",
    "max_shapes",
    "intensity_lo",
    "intensity_hi",
    "patch_size",
    "train_scenes",
    "train_patches",
    "val_scenes",
    "val_patches",
    "noise_kind",
    "sigma_255",
    "lambda_p",
    "kernel_size",
    "kernel_sigma",
    "clip_noisy",
    "net_channels",
    "beta",
    "lambda",
    "penalty",
    "critic_hidden",
    "gp_weight",
    "critic_steps",
    "critic_lr_scale",
    "critic_weight_clip",
    "epochs",
    "batch_size",
    "lr",
    "rho",
    "decay_epoch",
    "decay_factor",
    "methods",
    "lambda_grid",
    "w1_subsample",
    "gaussian_filter_sigma",
    "median_kernel",
    "previews",
];

fn config_error(field: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Config { field: field.to_string(), line, message: message.into() }
}

/// 1-based line holding the `key =` assignment, 0 when absent.
fn key_line(text: &str, key: &str) -> usize {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_start();
        if let Some(rest) = line.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return i + 1;
            }
        }
    }
    0
}

fn syntax_error(text: &str, err: &toml::de::Error) -> Error {
    let offset = err.span().map(|s| s.start).unwrap_or(0).min(text.len());
    let line = text[..offset].matches('\n').count() + 1;
    let field = text
        .lines()
        .nth(line - 1)
        .and_then(|l| l.split_once('='))
        .map(|(k, _)| k.trim().to_string())
        .filter(|k| !k.is_empty())
        .unwrap_or_else(|| "<syntax>".to_string());
    config_error(&field, line, err.message().trim().to_string())
}

struct Fields<'a> {
    text: &'a str,
    table: Table,
    defaults: Table,
}

impl<'a> Fields<'a> {
    fn err(&self, key: &str, message: impl Into<String>) -> Error {
        config_error(key, key_line(self.text, key), message)
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.table.get(key).or_else(|| self.defaults.get(key))
    }

    fn float_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(v)) if v.is_finite() => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(other) => Err(self.err(key, format!("expected a finite number, found {}", other.type_str()))),
        }
    }

    fn float(&self, key: &str) -> Result<f64> {
        self.float_opt(key)?.ok_or_else(|| self.err(key, "missing"))
    }

    fn int_value(&self, key: &str, v: &Value) -> Result<u64> {
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            Value::Integer(i) => Err(self.err(key, format!("expected a nonnegative integer, found {i}"))),
            other => Err(self.err(key, format!("expected an integer, found {}", other.type_str()))),
        }
    }

    fn uint_opt(&self, key: &str) -> Result<Option<u64>> {
        self.get(key).map(|v| self.int_value(key, v)).transpose()
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.uint_opt(key)?.map(|v| v as usize).ok_or_else(|| self.err(key, "missing"))
    }

    fn boolean(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Err(self.err(key, "missing")),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(other) => Err(self.err(key, format!("expected true or false, found {}", other.type_str()))),
        }
    }

    fn string(&self, key: &str) -> Result<String> {
        match self.get(key) {
            None => Err(self.err(key, "missing")),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(self.err(key, format!("expected a string, found {}", other.type_str()))),
        }
    }

    fn parsed<T: std::str::FromStr<Err = Error>>(&self, key: &str) -> Result<T> {
        let s = self.string(key)?;
        s.parse().map_err(|e: Error| self.err(key, e.to_string()))
    }

    fn array(&self, key: &str) -> Result<&Vec<Value>> {
        match self.get(key) {
            None => Err(self.err(key, "missing")),
            Some(Value::Array(a)) => Ok(a),
            Some(other) => Err(self.err(key, format!("expected an array, found {}", other.type_str()))),
        }
    }

    fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        self.array(key)?.iter().map(|v| self.int_value(key, v).map(|x| x as usize)).collect()
    }

    fn float_list(&self, key: &str) -> Result<Vec<f64>> {
        self.array(key)?
            .iter()
            .map(|v| match v {
                Value::Float(f) if f.is_finite() => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                other => Err(self.err(key, format!("expected numbers, found {}", other.type_str()))),
            })
            .collect()
    }

    fn string_list(&self, key: &str) -> Result<Vec<String>> {
        self.array(key)?
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.clone()),
                other => Err(self.err(key, format!("expected strings, found {}", other.type_str()))),
            })
            .collect()
    }

    fn require(&self, ok: bool, key: &str, message: impl Into<String>) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.err(key, message))
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::parse(DEFAULT_CONFIG).expect("default config is valid")
    }
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e| syntax_error(text, &e))?;
        let defaults: Table = DEFAULT_CONFIG.parse().expect("default config is valid TOML");
        let f = Fields { text, table, defaults };
        for (key, value) in &f.table {
            if !KEYS.contains(&key.as_str()) {
                return Err(f.err(key, "unknown key"));
            }
            if matches!(value, Value::Table(_)) {
                return Err(f.err(key, "tables are not allowed; the configuration is flat"));
            }
        }

        let seed = match f.table.get("seed") {
            Some(v) => f.int_value("seed", v)?,
            None => return Err(f.err("seed", "seed is mandatory")),
        };
        let output_dir = PathBuf::from(f.string("output_dir")?);
        f.require(!output_dir.as_os_str().is_empty(), "output_dir", "must not be empty")?;

        let kind: SceneKind = f.parsed("scene_kind")?;
        let scene_size = f.usize("scene_size")?;
        f.require(scene_size >= 1, "scene_size", "must be positive")?;
        let mut scene = SceneSpec::new(kind, scene_size, derive_named(seed, "scenes"));
        scene.min_shapes = f.usize("min_shapes")?;
        scene.max_shapes = f.usize("max_shapes")?;
        f.require(scene.min_shapes <= scene.max_shapes, "max_shapes", "must be >= min_shapes")?;
        scene.intensity_lo = f.float("intensity_lo")?;
        scene.intensity_hi = f.float("intensity_hi")?;
        f.require((0.0..=1.0).contains(&scene.intensity_lo), "intensity_lo", "must lie in [0, 1]")?;
        f.require(
            (scene.intensity_lo..=1.0).contains(&scene.intensity_hi),
            "intensity_hi",
            "must lie in [intensity_lo, 1]",
        )?;

        let patch_size = f.usize("patch_size")?;
        f.require(patch_size >= 1 && patch_size <= scene_size, "patch_size", format!("must be in 1..={scene_size}"))?;
        let train_counts = DomainCounts {
            scenes: f.usize("train_scenes")?,
            patches: f.usize("train_patches")?,
            patch_size,
        };
        f.require(train_counts.scenes > 0, "train_scenes", "must be positive")?;
        f.require(train_counts.patches > 0, "train_patches", "must be positive")?;
        let val_counts = DomainCounts {
            scenes: f.usize("val_scenes")?,
            patches: f.usize("val_patches")?,
            patch_size,
        };
        f.require(val_counts.scenes > 0, "val_scenes", "must be positive")?;
        f.require(val_counts.patches > 0, "val_patches", "must be positive")?;

        let noise_kind: NoiseKind = f.parsed("noise_kind")?;
        let sigma = f.float("sigma_255")?;
        f.require(sigma >= 0.0, "sigma_255", "must be >= 0")?;
        let mut noise = NoiseSpec::gaussian(sigma / 255.0, derive_named(seed, "noise"));
        noise.kind = noise_kind;
        noise.lambda_p = f.float("lambda_p")?;
        f.require(noise.lambda_p > 0.0, "lambda_p", "must be > 0")?;
        noise.kernel_size = f.usize("kernel_size")?;
        f.require(noise.kernel_size >= 3 && noise.kernel_size % 2 == 1, "kernel_size", "must be odd and >= 3")?;
        noise.kernel_sigma = f.float("kernel_sigma")?;
        f.require(noise.kernel_sigma > 0.0, "kernel_sigma", "must be > 0")?;
        noise.clip = f.boolean("clip_noisy")?;

        let channels = f.usize_list("net_channels")?;
        f.require(
            channels.len() == 2 && channels.iter().all(|c| (1..=16).contains(c)),
            "net_channels",
            "expected two channel counts in 1..=16",
        )?;
        let net = NetSpec::encoder_decoder(channels[0], channels[1]);
        net.validate(patch_size, patch_size)
            .map_err(|e| f.err("patch_size", format!("network does not fit: {e}")))?;

        let beta = f.float("beta")?;
        f.require(beta >= 1.0, "beta", "must be >= 1")?;
        let lambda = f.float("lambda")?;
        f.require(lambda > 0.0, "lambda", "must be > 0")?;
        let penalty = match f.string("penalty")?.as_str() {
            "exact_minibatch_w1" => PenaltyMode::ExactMinibatchW1,
            "critic_wgan_gp" => PenaltyMode::CriticWganGp,
            other => return Err(f.err("penalty", format!("unknown penalty `{other}`"))),
        };
        let critic = CriticSpec {
            hidden: f.usize_list("critic_hidden")?,
            gp_weight: f.float("gp_weight")?,
            steps: f.usize("critic_steps")?,
            lr_scale: f.float("critic_lr_scale")?,
            weight_clip: f.float_opt("critic_weight_clip")?,
        };
        f.require(critic.hidden.iter().all(|&h| h > 0), "critic_hidden", "layer widths must be positive")?;
        f.require(critic.gp_weight > 0.0, "gp_weight", "must be > 0")?;
        f.require(critic.steps > 0, "critic_steps", "must be positive")?;
        f.require(critic.lr_scale > 0.0, "critic_lr_scale", "must be > 0")?;
        f.require(critic.weight_clip.is_none_or(|c| c > 0.0), "critic_weight_clip", "must be > 0")?;
        let loss = LossSpec {
            objective: Objective::Relaxed,
            beta,
            lambda,
            penalty,
            critic: (penalty == PenaltyMode::CriticWganGp).then_some(critic),
        };

        let epochs = f.usize("epochs")?;
        f.require(epochs > 0, "epochs", "must be positive")?;
        let batch_size = f.usize("batch_size")?;
        f.require(batch_size > 0, "batch_size", "must be positive")?;
        f.require(
            train_counts.patches >= 2 * batch_size,
            "batch_size",
            format!("train_patches ({}) must be at least twice the batch size", train_counts.patches),
        )?;
        let optimizer = OptimizerSettings {
            lr: f.float("lr")?,
            rho: f.float("rho")?,
            decay_epoch: Some(f.uint_opt("decay_epoch")?.map_or(epochs / 2, |v| v as usize)),
            decay_factor: f.float("decay_factor")?,
            ..OptimizerSettings::default()
        };
        f.require(optimizer.lr > 0.0, "lr", "must be > 0")?;
        f.require((0.0..1.0).contains(&optimizer.rho), "rho", "must lie in [0, 1)")?;
        f.require(optimizer.decay_factor > 0.0 && optimizer.decay_factor <= 1.0, "decay_factor", "must lie in (0, 1]")?;

        let names = f.string_list("methods")?;
        let mut methods = Vec::new();
        let mut seen = BTreeSet::new();
        for name in &names {
            let m: Method = name.parse().map_err(|e: Error| f.err("methods", e.to_string()))?;
            f.require(seen.insert(m), "methods", format!("`{name}` listed twice"))?;
            methods.push(m);
        }
        f.require(!methods.is_empty(), "methods", "must list at least one method")?;
        let lambda_grid = f.float_list("lambda_grid")?;
        f.require(lambda_grid.iter().all(|&l| l > 0.0), "lambda_grid", "values must be > 0")?;
        let eval = EvalSettings {
            methods,
            lambda_grid,
            w1_subsample: f.usize("w1_subsample")?,
            gaussian_filter_sigma: f.float("gaussian_filter_sigma")?,
            median_kernel: f.usize("median_kernel")?,
            previews: f.usize("previews")?,
        };
        f.require(eval.w1_subsample > 0, "w1_subsample", "must be positive")?;
        f.require(eval.gaussian_filter_sigma > 0.0, "gaussian_filter_sigma", "must be > 0")?;
        let radius = eval.gaussian_filter_sigma * 2.0;
        f.require(
            radius.ceil() < patch_size as f64 || patch_size == 1,
            "gaussian_filter_sigma",
            format!("kernel radius {} exceeds the {patch_size}x{patch_size} patch", radius.ceil()),
        )?;
        f.require(eval.median_kernel % 2 == 1, "median_kernel", "must be odd")?;
        f.require(
            eval.median_kernel / 2 < patch_size,
            "median_kernel",
            format!("exceeds the {patch_size}x{patch_size} patch"),
        )?;

        Ok(TrainConfig {
            seed,
            output_dir,
            scene,
            noise,
            net,
            loss,
            optimizer,
            epochs,
            batch_size,
            patch_size,
            train_counts,
            val_counts,
            eval,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Settings for the transport objective at `lambda`.
    pub fn settings(&self, lambda: f64) -> TrainSettings {
        let mut s = TrainSettings::new(
            LossSpec { lambda, ..self.loss.clone() },
            self.epochs,
            self.batch_size,
            derive_named(self.seed, "train"),
        );
        s.optimizer = self.optimizer.clone();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expect_field(text: &str, field: &str, line: usize) {
        match TrainConfig::parse(text) {
            Err(Error::Config { field: f, line: l, message }) => {
                assert_eq!((f.as_str(), l), (field, line), "{message}");
            }
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn default_parses() {
        let c = TrainConfig::default();
        assert_eq!(c.seed, 1);
        assert_eq!(c.patch_size, 4);
        assert_eq!(c.eval.methods.len(), 7);
        assert_eq!(c.optimizer.decay_epoch, Some(30));
        assert!((c.noise.sigma - 25.0 / 255.0).abs() < 1e-15);
        assert!(c.loss.critic.is_none());
    }

    #[test]
    fn errors_name_field_and_line() {
        expect_field("seed = 1\nepochs = \"ten\"\n", "epochs", 2);
        expect_field("seed = 1\n\nlambda = -2\n", "lambda", 3);
        expect_field("seed = 1\nbogus = 3\n", "bogus", 2);
        expect_field("epochs = 3\n", "seed", 0);
        expect_field("seed = 1\nnoise_kind = \"speckle\"\n", "noise_kind", 2);
        expect_field("seed = 1\nmethods = [\"ot\", \"ot\"]\n", "methods", 2);
        expect_field("seed = 1\nbatch_size = 9000\n", "batch_size", 2);
        expect_field("seed = 1\n[nested]\nx = 1\n", "nested", 0);
    }

    #[test]
    fn syntax_error_reports_line() {
        expect_field("seed = 1\nlr = 0.1\nrho = = 2\n", "rho", 3);
    }

    #[test]
    fn critic_mode_carries_spec() {
        let c = TrainConfig::parse("seed = 3\npenalty = \"critic_wgan_gp\"\ncritic_steps = 2\ncritic_weight_clip = 0.1\n").unwrap();
        let spec = c.loss.critic.unwrap();
        assert_eq!(spec.steps, 2);
        assert_eq!(spec.weight_clip, Some(0.1));
    }
}
