//! Flat JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use tsr_core::anchors::DEFAULT_K;
use tsr_core::augment::AugmentConfig;
use tsr_core::eval::{DEFAULT_CONF_THRESH, DEFAULT_IOU_THRESH};
use tsr_core::gradcheck::DEFAULT_TRIALS;

use crate::CliError;

/// Settings that are not augmentation parameters.
///
/// The training hyperparameters are carried as metadata only; no command
/// consumes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Own {
    anchor_k: usize,
    iou_thresh: f64,
    conf_thresh: f64,
    gradcheck_trials: usize,
    bench_iters: usize,
    bench_warmup: usize,
    bench_channels: usize,
    learning_rate: f64,
    batch_size: usize,
    momentum: f64,
    weight_decay: f64,
}

impl Default for Own {
    fn default() -> Self {
        Self {
            anchor_k: DEFAULT_K,
            iou_thresh: DEFAULT_IOU_THRESH,
            conf_thresh: DEFAULT_CONF_THRESH,
            gradcheck_trials: DEFAULT_TRIALS,
            bench_iters: 20,
            bench_warmup: 3,
            bench_channels: 16,
            learning_rate: 0.0005,
            batch_size: 32,
            momentum: 0.9,
            weight_decay: 0.0001,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub augment: AugmentConfig,
    pub anchor_k: usize,
    pub iou_thresh: f64,
    pub conf_thresh: f64,
    pub gradcheck_trials: usize,
    pub bench_iters: usize,
    pub bench_warmup: usize,
    pub bench_channels: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::assemble(AugmentConfig::default(), Own::default())
    }
}

const OWN_KEYS: [&str; 11] = [
    "anchor_k",
    "iou_thresh",
    "conf_thresh",
    "gradcheck_trials",
    "bench_iters",
    "bench_warmup",
    "bench_channels",
    "learning_rate",
    "batch_size",
    "momentum",
    "weight_decay",
];

impl RunConfig {
    fn assemble(augment: AugmentConfig, own: Own) -> Self {
        Self {
            augment,
            anchor_k: own.anchor_k,
            iou_thresh: own.iou_thresh,
            conf_thresh: own.conf_thresh,
            gradcheck_trials: own.gradcheck_trials,
            bench_iters: own.bench_iters,
            bench_warmup: own.bench_warmup,
            bench_channels: own.bench_channels,
            learning_rate: own.learning_rate,
            batch_size: own.batch_size,
            momentum: own.momentum,
            weight_decay: own.weight_decay,
        }
    }

    fn own(&self) -> Own {
        Own {
            anchor_k: self.anchor_k,
            iou_thresh: self.iou_thresh,
            conf_thresh: self.conf_thresh,
            gradcheck_trials: self.gradcheck_trials,
            bench_iters: self.bench_iters,
            bench_warmup: self.bench_warmup,
            bench_channels: self.bench_channels,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        }
    }

    pub fn seed(&self) -> u64 {
        self.augment.seed
    }

    /// Parses a flat JSON object. Keys missing from the object keep their
    /// defaults; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let bad = |e: serde_json::Error| CliError::Validation(format!("config: {e}"));
        let Value::Object(map) = serde_json::from_str::<Value>(text).map_err(bad)? else {
            return Err(CliError::Validation(
                "config: expected a JSON object".into(),
            ));
        };
        let (own, rest): (Map<String, Value>, Map<String, Value>) = map
            .into_iter()
            .partition(|(k, _)| OWN_KEYS.contains(&k.as_str()));
        let own: Own = serde_json::from_value(Value::Object(own)).map_err(bad)?;
        let augment: AugmentConfig = serde_json::from_value(Value::Object(rest)).map_err(bad)?;
        let cfg = Self::assemble(augment, own);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_json(&crate::io::read_text(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut map = match serde_json::to_value(&self.augment) {
            Ok(Value::Object(m)) => m,
            _ => unreachable!("AugmentConfig serialises to an object"),
        };
        if let Ok(Value::Object(own)) = serde_json::to_value(self.own()) {
            map.extend(own);
        }
        serde_json::to_string_pretty(&Value::Object(map)).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.augment.validate()?;
        let fail = |m: &str| Err(CliError::Validation(format!("config: {m}")));
        if self.anchor_k == 0 {
            return fail("anchor_k must be at least 1");
        }
        if !(self.iou_thresh > 0.0 && self.iou_thresh < 1.0) {
            return fail("iou_thresh must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.conf_thresh) {
            return fail("conf_thresh must lie in [0, 1]");
        }
        if self.gradcheck_trials == 0 || self.bench_iters == 0 || self.bench_channels == 0 {
            return fail("gradcheck_trials, bench_iters and bench_channels must be positive");
        }
        Ok(())
    }
}
