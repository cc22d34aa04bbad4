//! Manifest + blob persistence.
//!
//! An artifact at `name.toml` is a human-readable manifest (kind, format
//! version, metadata, tensor table, blob checksum) plus `name.bin`, the
//! concatenated tensors as little-endian `f32`. Values are quantised to
//! 32 bits on save; loading widens them back to `f64` exactly.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autoencoder::{AutoencoderModel, Normalizer};
use crate::ddpm::{DenoiserNet, DiffusionModel, NoiseSchedule};
use crate::error::{BendError, Result};
use crate::nn::{Activation, DenseLayer, Network, Tensor2D};
use crate::subset::{FamilySeeds, LayoutEntry, ParamVector, SnapshotFamily, SnapshotMeta, SubsetLayout};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Network,
    SnapshotFamily,
    Autoencoder,
    Diffusion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        NamedTensor {
            name: name.into(),
            shape,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub kind: ArtifactKind,
    pub metadata: toml::Table,
    pub tensors: Vec<NamedTensor>,
}

impl Artifact {
    pub fn tensor(&self, name: &str) -> Result<&NamedTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| BendError::format("artifact", format!("missing tensor '{name}'")))
    }

    fn tensor_shaped(&self, name: &str, shape: &[usize]) -> Result<&[f64]> {
        let t = self.tensor(name)?;
        if t.shape != shape {
            return Err(BendError::format(
                "artifact",
                format!("tensor '{name}' has shape {:?}, expected {shape:?}", t.shape),
            ));
        }
        Ok(&t.data)
    }

    fn meta<T: DeserializeOwned>(&self) -> Result<T> {
        toml::Value::Table(self.metadata.clone())
            .try_into()
            .map_err(|e| BendError::format("artifact metadata", e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    kind: ArtifactKind,
    blob: String,
    blob_bytes: u64,
    blob_sha256: String,
    metadata: toml::Table,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the blob, in elements.
    offset: usize,
    length: usize,
}

/// Rounds through `f32`, matching what a save/load cycle produces.
pub fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

pub fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn save_artifact(path: &Path, artifact: &Artifact) -> Result<()> {
    let blob_file = blob_path(path);
    if blob_file == path {
        return Err(BendError::input(format!(
            "manifest path {} must not end in .bin",
            path.display()
        )));
    }
    let mut entries = Vec::with_capacity(artifact.tensors.len());
    let mut blob = Vec::new();
    let mut offset = 0;
    for (i, t) in artifact.tensors.iter().enumerate() {
        if artifact.tensors[..i].iter().any(|o| o.name == t.name) {
            return Err(BendError::input(format!("duplicate tensor name '{}'", t.name)));
        }
        if t.shape.iter().product::<usize>() != t.data.len() {
            return Err(BendError::shape(format!(
                "tensor '{}' shape {:?} does not hold {} values",
                t.name,
                t.shape,
                t.data.len()
            )));
        }
        for &v in &t.data {
            let q = v as f32;
            if !q.is_finite() {
                return Err(BendError::numeric(format!(
                    "tensor '{}' holds {v}, not representable as a finite f32",
                    t.name
                )));
            }
            blob.extend_from_slice(&q.to_le_bytes());
        }
        entries.push(TensorEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            offset,
            length: t.data.len(),
        });
        offset += t.data.len();
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        kind: artifact.kind,
        blob: blob_file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| BendError::input(format!("invalid artifact path {}", path.display())))?,
        blob_bytes: blob.len() as u64,
        blob_sha256: sha256_hex(&blob),
        metadata: artifact.metadata.clone(),
        tensors: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| BendError::format(path.display().to_string(), e.to_string()))?;

    // The blob file doubles as the per-artifact lock; truncate only once held.
    let mut file = OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(false)
        .open(&blob_file)
        .map_err(|e| BendError::io(&blob_file, e))?;
    file.lock().map_err(|e| BendError::io(&blob_file, e))?;
    file.set_len(0).map_err(|e| BendError::io(&blob_file, e))?;
    file.write_all(&blob).map_err(|e| BendError::io(&blob_file, e))?;
    file.flush().map_err(|e| BendError::io(&blob_file, e))?;
    fs::write(path, text).map_err(|e| BendError::io(path, e))?;
    Ok(())
}

pub fn load_artifact(path: &Path) -> Result<Artifact> {
    let text = fs::read_to_string(path).map_err(|e| BendError::io(path, e))?;
    let fmt_err = |e: toml::de::Error| BendError::format(path.display().to_string(), e.to_string());
    let raw: toml::Table = toml::from_str(&text).map_err(fmt_err)?;
    let found = raw
        .get("format_version")
        .and_then(toml::Value::as_integer)
        .ok_or_else(|| BendError::format(path.display().to_string(), "missing format_version"))?;
    if found != FORMAT_VERSION as i64 {
        return Err(BendError::Version {
            path: path.to_owned(),
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let manifest: Manifest = toml::from_str(&text).map_err(fmt_err)?;

    let blob_file = path.parent().unwrap_or(Path::new(".")).join(&manifest.blob);
    let blob = fs::read(&blob_file).map_err(|e| BendError::io(&blob_file, e))?;
    let corrupt = |message: String| BendError::Corrupt {
        path: blob_file.clone(),
        message,
    };
    if blob.len() as u64 != manifest.blob_bytes {
        return Err(corrupt(format!(
            "blob has {} bytes, manifest declares {}",
            blob.len(),
            manifest.blob_bytes
        )));
    }
    let digest = sha256_hex(&blob);
    if digest != manifest.blob_sha256 {
        return Err(corrupt(format!(
            "checksum {digest} does not match manifest {}",
            manifest.blob_sha256
        )));
    }
    let values: Vec<f64> = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let tensors = manifest
        .tensors
        .into_iter()
        .map(|e| {
            let end = e.offset.checked_add(e.length).filter(|&end| end <= values.len());
            match end {
                Some(end) if e.shape.iter().product::<usize>() == e.length => {
                    Ok(NamedTensor::new(e.name, e.shape, values[e.offset..end].to_vec()))
                }
                _ => Err(corrupt(format!("tensor '{}' does not fit the blob", e.name))),
            }
        })
        .collect::<Result<_>>()?;
    Ok(Artifact {
        kind: manifest.kind,
        metadata: manifest.metadata,
        tensors,
    })
}

/// Types with a manifest + blob representation.
pub trait Persist: Sized {
    const KIND: ArtifactKind;
    fn to_artifact(&self) -> Result<Artifact>;
    fn from_artifact(artifact: &Artifact) -> Result<Self>;
}

pub fn save<T: Persist>(path: &Path, value: &T) -> Result<()> {
    save_artifact(path, &value.to_artifact()?)
}

pub fn load<T: Persist>(path: &Path) -> Result<T> {
    let a = load_artifact(path)?;
    if a.kind != T::KIND {
        return Err(BendError::format(
            path.display().to_string(),
            format!("artifact kind {:?}, expected {:?}", a.kind, T::KIND),
        ));
    }
    T::from_artifact(&a).map_err(|e| match e {
        BendError::Format { message, .. } => BendError::format(path.display().to_string(), message),
        other => other,
    })
}

fn to_table<T: Serialize>(meta: &T) -> Result<toml::Table> {
    toml::Table::try_from(meta).map_err(|e| BendError::format("artifact metadata", e.to_string()))
}

// TOML integers are signed 64-bit, so seeds travel as decimal strings.
fn seed_str(seed: u64) -> String {
    seed.to_string()
}

fn parse_seed(s: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| BendError::format("artifact metadata", format!("seed '{s}' is not a u64")))
}

#[derive(Serialize, Deserialize)]
struct LayerMeta {
    name: String,
    activation: Activation,
    inputs: usize,
    outputs: usize,
}

#[derive(Serialize, Deserialize)]
struct NetworkMeta {
    layers: Vec<LayerMeta>,
}

fn network_parts(net: &Network, prefix: &str, tensors: &mut Vec<NamedTensor>) -> NetworkMeta {
    let layers = net
        .layers()
        .iter()
        .zip(net.names())
        .map(|(l, name)| {
            tensors.push(NamedTensor::new(
                format!("{prefix}{name}.weights"),
                vec![l.inputs(), l.outputs()],
                l.weights.data().to_vec(),
            ));
            tensors.push(NamedTensor::new(
                format!("{prefix}{name}.bias"),
                vec![l.outputs()],
                l.bias.clone(),
            ));
            LayerMeta {
                name: name.clone(),
                activation: l.activation,
                inputs: l.inputs(),
                outputs: l.outputs(),
            }
        })
        .collect();
    NetworkMeta { layers }
}

fn network_from_parts(a: &Artifact, prefix: &str, meta: &NetworkMeta) -> Result<Network> {
    let mut layers = Vec::with_capacity(meta.layers.len());
    for l in &meta.layers {
        let w = a.tensor_shaped(&format!("{prefix}{}.weights", l.name), &[l.inputs, l.outputs])?;
        let b = a.tensor_shaped(&format!("{prefix}{}.bias", l.name), &[l.outputs])?;
        layers.push(DenseLayer::new(
            Tensor2D::from_vec(l.inputs, l.outputs, w.to_vec())?,
            b.to_vec(),
            l.activation,
        )?);
    }
    Network::with_names(layers, meta.layers.iter().map(|l| l.name.clone()).collect())
}

impl Persist for Network {
    const KIND: ArtifactKind = ArtifactKind::Network;

    fn to_artifact(&self) -> Result<Artifact> {
        let mut tensors = Vec::new();
        let meta = network_parts(self, "", &mut tensors);
        Ok(Artifact {
            kind: Self::KIND,
            metadata: to_table(&meta)?,
            tensors,
        })
    }

    fn from_artifact(a: &Artifact) -> Result<Self> {
        network_from_parts(a, "", &a.meta()?)
    }
}

#[derive(Serialize, Deserialize)]
struct FamilyMeta {
    k: usize,
    dim: usize,
    pretrained_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pretrain_seed: Option<String>,
    finetune_seed: String,
    base: NetworkMeta,
    layout: Vec<LayoutEntry>,
    snapshots: Vec<SnapshotMeta>,
}

impl Persist for SnapshotFamily {
    const KIND: ArtifactKind = ArtifactKind::SnapshotFamily;

    fn to_artifact(&self) -> Result<Artifact> {
        self.validate()?;
        let mut tensors = Vec::new();
        let base = network_parts(&self.base_model, "base/", &mut tensors);
        tensors.push(NamedTensor::new(
            "snapshots",
            vec![self.k(), self.layout.total_dim],
            self.snapshots.iter().flat_map(|s| s.values.iter().copied()).collect(),
        ));
        let meta = FamilyMeta {
            k: self.k(),
            dim: self.layout.total_dim,
            pretrained_accuracy: self.pretrained_accuracy,
            pretrain_seed: self.seeds.pretrain.map(seed_str),
            finetune_seed: seed_str(self.seeds.finetune),
            base,
            layout: self.layout.entries.clone(),
            snapshots: self.meta.clone(),
        };
        Ok(Artifact {
            kind: Self::KIND,
            metadata: to_table(&meta)?,
            tensors,
        })
    }

    fn from_artifact(a: &Artifact) -> Result<Self> {
        let meta: FamilyMeta = a.meta()?;
        let layout = Arc::new(SubsetLayout::from_entries(meta.layout)?);
        let values = a.tensor_shaped("snapshots", &[meta.k, meta.dim])?;
        let snapshots = values
            .chunks(meta.dim.max(1))
            .map(|c| ParamVector::new(Arc::clone(&layout), c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let family = SnapshotFamily {
            layout,
            snapshots,
            meta: meta.snapshots,
            base_model: network_from_parts(a, "base/", &meta.base)?,
            pretrained_accuracy: meta.pretrained_accuracy,
            seeds: FamilySeeds {
                pretrain: meta.pretrain_seed.as_deref().map(parse_seed).transpose()?,
                finetune: parse_seed(&meta.finetune_seed)?,
            },
        };
        family.validate()?;
        Ok(family)
    }
}

#[derive(Serialize, Deserialize)]
struct AutoencoderMeta {
    latent_dim: usize,
    seed: String,
    encoder: NetworkMeta,
    decoder: NetworkMeta,
    layout: Vec<LayoutEntry>,
}

impl Persist for AutoencoderModel {
    const KIND: ArtifactKind = ArtifactKind::Autoencoder;

    fn to_artifact(&self) -> Result<Artifact> {
        let mut tensors = Vec::new();
        let encoder = network_parts(&self.encoder, "encoder/", &mut tensors);
        let decoder = network_parts(&self.decoder, "decoder/", &mut tensors);
        let d = self.normalizer.dim();
        tensors.push(NamedTensor::new(
            "normalizer.mean",
            vec![d],
            self.normalizer.mean.clone(),
        ));
        tensors.push(NamedTensor::new("normalizer.std", vec![d], self.normalizer.std.clone()));
        let meta = AutoencoderMeta {
            latent_dim: self.latent_dim,
            seed: seed_str(self.seed),
            encoder,
            decoder,
            layout: self.layout.entries.clone(),
        };
        Ok(Artifact {
            kind: Self::KIND,
            metadata: to_table(&meta)?,
            tensors,
        })
    }

    fn from_artifact(a: &Artifact) -> Result<Self> {
        let meta: AutoencoderMeta = a.meta()?;
        let layout = Arc::new(SubsetLayout::from_entries(meta.layout)?);
        let d = layout.total_dim;
        let normalizer = Normalizer::from_parts(
            a.tensor_shaped("normalizer.mean", &[d])?.to_vec(),
            a.tensor_shaped("normalizer.std", &[d])?.to_vec(),
        )?;
        let model = AutoencoderModel::from_parts(
            network_from_parts(a, "encoder/", &meta.encoder)?,
            network_from_parts(a, "decoder/", &meta.decoder)?,
            normalizer,
            layout,
            parse_seed(&meta.seed)?,
        )?;
        if model.latent_dim != meta.latent_dim {
            return Err(BendError::format(
                "artifact metadata",
                "latent_dim disagrees with encoder",
            ));
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct DiffusionMeta {
    latent_dim: usize,
    time_embed_dim: usize,
    seed: String,
    /// Kept as exact decimal text so the schedule is not quantised.
    betas: Vec<f64>,
    denoiser: NetworkMeta,
}

impl Persist for DiffusionModel {
    const KIND: ArtifactKind = ArtifactKind::Diffusion;

    fn to_artifact(&self) -> Result<Artifact> {
        let mut tensors = Vec::new();
        let denoiser = network_parts(&self.denoiser.core, "denoiser/", &mut tensors);
        let meta = DiffusionMeta {
            latent_dim: self.latent_dim,
            time_embed_dim: self.denoiser.time_embed_dim,
            seed: seed_str(self.seed),
            betas: self.schedule.beta.clone(),
            denoiser,
        };
        Ok(Artifact {
            kind: Self::KIND,
            metadata: to_table(&meta)?,
            tensors,
        })
    }

    fn from_artifact(a: &Artifact) -> Result<Self> {
        let meta: DiffusionMeta = a.meta()?;
        let core = network_from_parts(a, "denoiser/", &meta.denoiser)?;
        let denoiser = DenoiserNet::new(core, meta.time_embed_dim)?;
        let model = DiffusionModel::new(
            NoiseSchedule::from_betas(meta.betas)?,
            denoiser,
            parse_seed(&meta.seed)?,
        );
        if model.latent_dim != meta.latent_dim {
            return Err(BendError::format(
                "artifact metadata",
                "latent_dim disagrees with denoiser",
            ));
        }
        Ok(model)
    }
}
