//! Run configuration, read from TOML.
//!
//! Seeds: every per-stage `seed` is offset by the top-level `seed`, so a
//! single `--seed` reseeds the whole run. The `epochs` keys inside
//! `[pretrain]` and `[finetune]` are replaced by `k_pre` and `k`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::CostModelInputs;
use crate::autoencoder::AutoencoderConfig;
use crate::ddpm::DdpmConfig;
use crate::ensemble::VoteMethod;
use crate::error::{BendError, Result};
use crate::nn::{Activation, TrainConfig};

pub const DESK_PRESET: &str = include_str!("../configs/desk.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Blobs {
        n: usize,
        dim: usize,
        classes: usize,
        spread: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Paths are relative to the config file.
    Csv {
        train: PathBuf,
        test: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: String,
    },
}

fn default_label_column() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub widths: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default)]
    pub seed: u64,
}

fn default_activation() -> Activation {
    Activation::Relu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetSpec {
    pub layers: Vec<String>,
    #[serde(default = "default_floor_delta")]
    pub accuracy_floor_delta: f64,
    #[serde(default = "default_true")]
    pub keep_below_floor: bool,
}

fn default_floor_delta() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationSpec {
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    pub method: VoteMethod,
    pub trials: usize,
    pub seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            method: VoteMethod::Sbend,
            trials: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Not part of the config hash: moving outputs does not change results.
    #[serde(default = "default_out_dir", skip_serializing)]
    pub out_dir: PathBuf,
    #[serde(default = "default_k_pre")]
    pub k_pre: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    pub dataset: DatasetSpec,
    pub network: NetworkSpec,
    pub subset: SubsetSpec,
    #[serde(default)]
    pub pretrain: TrainConfig,
    /// Defaults to `[pretrain]` with a tenth of its learning rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finetune: Option<TrainConfig>,
    #[serde(default)]
    pub autoencoder: AutoencoderConfig,
    #[serde(default)]
    pub ddpm: DdpmConfig,
    #[serde(default)]
    pub generation: GenerationSpec,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostModelInputs>,
    /// Directory of the config file; relative dataset paths resolve here.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    "bend-out".into()
}

fn default_k_pre() -> usize {
    100
}

fn default_k() -> usize {
    200
}

fn default_m() -> usize {
    100
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub trials: Option<usize>,
    pub method: Option<VoteMethod>,
}

/// Effective per-stage seeds after offsetting by the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageSeeds {
    pub dataset: u64,
    pub network: u64,
    pub pretrain: u64,
    pub finetune: u64,
    pub autoencoder: u64,
    pub ddpm: u64,
    pub generation: u64,
    pub ensemble: u64,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| BendError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_owned();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BendError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_owned();
        RunConfig::from_toml(&text, &base).map_err(|e| match e {
            BendError::Config(msg) => BendError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => RunConfig::from_toml(DESK_PRESET, Path::new(".")),
            other => Err(BendError::Config(format!("unknown preset '{other}' (available: desk)"))),
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(m) = o.m {
            self.m = m;
        }
        if let Some(k) = o.k {
            self.k = k;
        }
        if let Some(t) = o.trials {
            self.ensemble.trials = t;
        }
        if let Some(method) = o.method {
            self.ensemble.method = method;
        }
        self.validate()
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BendError::Config(msg));
        if self.k == 0 || self.m == 0 {
            return bad("k and m must be ≥ 1".into());
        }
        if self.network.widths.len() < 2 || self.network.widths.contains(&0) {
            return bad(format!(
                "network widths {:?} need ≥2 positive entries",
                self.network.widths
            ));
        }
        if self.subset.layers.is_empty() {
            return bad("subset.layers must name at least one layer".into());
        }
        if !(self.subset.accuracy_floor_delta >= 0.0) {
            return bad("subset.accuracy_floor_delta must be ≥ 0".into());
        }
        if self.ensemble.trials == 0 {
            return bad("ensemble.trials must be ≥ 1".into());
        }
        if self.ddpm.timesteps == 0 {
            return bad("ddpm.timesteps must be ≥ 1".into());
        }
        let pre = self.pretrain_config();
        let fine = self.finetune_config();
        for (name, c) in [
            ("pretrain", &pre),
            ("finetune", &fine),
            ("autoencoder.train", &self.autoencoder.train),
            ("ddpm.train", &self.ddpm.train),
        ] {
            c.validate().map_err(|e| BendError::Config(format!("[{name}] {e}")))?;
        }
        if let DatasetSpec::Blobs {
            n,
            dim,
            classes,
            spread,
            ..
        } = self.dataset
        {
            if classes < 2 || dim == 0 || n < 5 * classes || !(spread >= 0.0) {
                return bad("blobs dataset needs classes ≥ 2, dim ≥ 1, n ≥ 5·classes, spread ≥ 0".into());
            }
            let widths = &self.network.widths;
            if widths[0] != dim || *widths.last().unwrap() != classes {
                return bad(format!(
                    "network widths {widths:?} do not match dataset dim {dim} and {classes} classes"
                ));
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> StageSeeds {
        let s = |x: u64| x.wrapping_add(self.seed);
        StageSeeds {
            dataset: match self.dataset {
                DatasetSpec::Blobs { seed, .. } => s(seed),
                DatasetSpec::Csv { .. } => self.seed,
            },
            network: s(self.network.seed),
            pretrain: s(self.pretrain.seed),
            finetune: s(self
                .finetune
                .as_ref()
                .map_or(self.pretrain.seed.wrapping_add(1), |f| f.seed)),
            autoencoder: s(self.autoencoder.train.seed),
            ddpm: s(self.ddpm.train.seed),
            generation: s(self.generation.seed),
            ensemble: s(self.ensemble.seed),
        }
    }

    pub fn pretrain_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.k_pre,
            seed: self.seeds().pretrain,
            ..self.pretrain.clone()
        }
    }

    pub fn finetune_config(&self) -> TrainConfig {
        let base = self.finetune.clone().unwrap_or_else(|| TrainConfig {
            learning_rate: self.pretrain.learning_rate * 0.1,
            ..self.pretrain.clone()
        });
        TrainConfig {
            epochs: self.k,
            seed: self.seeds().finetune,
            ..base
        }
    }

    pub fn autoencoder_config(&self) -> AutoencoderConfig {
        let mut c = self.autoencoder.clone();
        c.train.seed = self.seeds().autoencoder;
        c
    }

    pub fn ddpm_config(&self) -> DdpmConfig {
        let mut c = self.ddpm.clone();
        c.train.seed = self.seeds().ddpm;
        c
    }

    pub fn cost_inputs(&self) -> CostModelInputs {
        self.cost.unwrap_or(CostModelInputs::REFERENCE)
    }

    /// SHA-256 of the effective configuration, rendered as TOML.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
