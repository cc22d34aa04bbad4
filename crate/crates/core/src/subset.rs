//! Parameter-subset selection, flattening, and snapshot-family construction.
//!
//! A base network is (optionally) trained from scratch, every parameter
//! outside the chosen subset is frozen, and the subset is fine-tuned for
//! `k` epochs. The flattened subset is recorded after each epoch, giving the
//! family of snapshots the autoencoder and diffusion model learn from.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::TrainTest;
use crate::error::{BendError, Result};
use crate::nn::{accuracy, train, train_with_callback, EpochMetrics, Network, ParamKind, TrainConfig, Trainable};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub layer_name: String,
    pub kind: ParamKind,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetLayout {
    pub entries: Vec<LayoutEntry>,
    pub total_dim: usize,
}

impl SubsetLayout {
    /// Rebuilds a layout from entries, checking offsets are contiguous.
    pub fn from_entries(entries: Vec<LayoutEntry>) -> Result<Self> {
        let mut offset = 0;
        for e in &entries {
            if e.offset != offset || e.length != e.rows * e.cols {
                return Err(BendError::shape(format!(
                    "layout entry {}/{:?} has offset {} length {} (expected offset {offset}, length {})",
                    e.layer_name,
                    e.kind,
                    e.offset,
                    e.length,
                    e.rows * e.cols
                )));
            }
            offset += e.length;
        }
        if entries.is_empty() {
            return Err(BendError::input("empty subset layout"));
        }
        Ok(SubsetLayout {
            entries,
            total_dim: offset,
        })
    }

    /// Checks that every entry names a layer of `net` with matching shape.
    pub fn check_against(&self, net: &Network) -> Result<()> {
        for e in &self.entries {
            let li = net
                .layer_index(&e.layer_name)
                .ok_or_else(|| BendError::shape(format!("layout references unknown layer '{}'", e.layer_name)))?;
            let layer = &net.layers()[li];
            let shape = match e.kind {
                ParamKind::Weights => layer.weights.shape(),
                ParamKind::Bias => (1, layer.bias.len()),
            };
            if shape != (e.rows, e.cols) {
                return Err(BendError::shape(format!(
                    "layout entry {}/{:?} is {}x{} but the network block is {}x{}",
                    e.layer_name, e.kind, e.rows, e.cols, shape.0, shape.1
                )));
            }
        }
        Ok(())
    }

    /// The blocks covered by this layout, as optimizer mask entries.
    pub fn trainable(&self, net: &Network) -> Result<Trainable> {
        self.check_against(net)?;
        let set: BTreeSet<(usize, ParamKind)> = self
            .entries
            .iter()
            .map(|e| (net.layer_index(&e.layer_name).expect("checked"), e.kind))
            .collect();
        Ok(Trainable::Only(set))
    }
}

/// Flattened subset values tied to their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub layout: Arc<SubsetLayout>,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(layout: Arc<SubsetLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_dim {
            return Err(BendError::shape(format!(
                "{} values for a layout of dimension {}",
                values.len(),
                layout.total_dim
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BendError::numeric("non-finite parameter value"));
        }
        Ok(ParamVector { layout, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn l2_distance(&self, other: &ParamVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Builds the layout for the named layers: network order, weights before
/// bias within a layer.
pub fn select_subset(net: &Network, layer_names: &[impl AsRef<str>]) -> Result<SubsetLayout> {
    if layer_names.is_empty() {
        return Err(BendError::input("subset must name at least one layer"));
    }
    let mut wanted = BTreeSet::new();
    for name in layer_names {
        let name = name.as_ref();
        let idx = net
            .layer_index(name)
            .ok_or_else(|| BendError::input(format!("unknown subset layer '{name}'")))?;
        wanted.insert(idx);
    }
    let mut entries = Vec::new();
    let mut offset = 0;
    for idx in wanted {
        let layer = &net.layers()[idx];
        for (kind, (rows, cols)) in [
            (ParamKind::Weights, layer.weights.shape()),
            (ParamKind::Bias, (1, layer.bias.len())),
        ] {
            entries.push(LayoutEntry {
                layer_name: net.names()[idx].clone(),
                kind,
                rows,
                cols,
                offset,
                length: rows * cols,
            });
            offset += rows * cols;
        }
    }
    Ok(SubsetLayout {
        entries,
        total_dim: offset,
    })
}

pub fn flatten(net: &Network, layout: &Arc<SubsetLayout>) -> Result<ParamVector> {
    layout.check_against(net)?;
    let mut values = Vec::with_capacity(layout.total_dim);
    for e in &layout.entries {
        let li = net.layer_index(&e.layer_name).expect("checked");
        values.extend_from_slice(net.layers()[li].params(e.kind));
    }
    ParamVector::new(Arc::clone(layout), values)
}

/// Writes the subset into `net` in place; other parameters are untouched.
pub fn inject(net: &mut Network, vec: &ParamVector) -> Result<()> {
    vec.layout.check_against(net)?;
    if vec.values.len() != vec.layout.total_dim {
        return Err(BendError::shape("parameter vector length does not match its layout"));
    }
    for e in &vec.layout.entries {
        let li = net.layer_index(&e.layer_name).expect("checked");
        net.layers_mut()[li]
            .params_mut(e.kind)
            .copy_from_slice(&vec.values[e.offset..e.offset + e.length]);
    }
    Ok(())
}

/// Returns a copy of `net` carrying the subset values from `vec`.
pub fn unflatten(vec: &ParamVector, net: &Network) -> Result<Network> {
    let mut out = net.clone();
    inject(&mut out, vec)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    /// Fine-tuning epoch (1-based) after which the snapshot was taken.
    pub epoch: usize,
    pub test_accuracy: f64,
    pub below_floor: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySeeds {
    pub pretrain: Option<u64>,
    pub finetune: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFamily {
    pub layout: Arc<SubsetLayout>,
    pub snapshots: Vec<ParamVector>,
    pub meta: Vec<SnapshotMeta>,
    /// Network after fine-tuning; its complement is the frozen backbone.
    pub base_model: Network,
    pub pretrained_accuracy: f64,
    pub seeds: FamilySeeds,
}

impl SnapshotFamily {
    pub fn k(&self) -> usize {
        self.snapshots.len()
    }

    pub fn mean_accuracy(&self) -> f64 {
        self.meta.iter().map(|m| m.test_accuracy).sum::<f64>() / self.meta.len().max(1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.snapshots.is_empty() {
            return Err(BendError::input("snapshot family is empty"));
        }
        if self.meta.len() != self.snapshots.len() {
            return Err(BendError::shape("snapshot metadata count mismatch"));
        }
        if self.snapshots.iter().any(|s| *s.layout != *self.layout) {
            return Err(BendError::shape("snapshots do not share the family layout"));
        }
        self.layout.check_against(&self.base_model)
    }
}

#[derive(Debug, Clone)]
pub struct FamilyOptions {
    /// Pretraining from scratch; `None` when `net` is already trained.
    pub pretrain: Option<TrainConfig>,
    /// Fine-tuning config; its `epochs` is replaced by `k`.
    pub finetune: TrainConfig,
    pub k: usize,
    /// Snapshots more than this far below the pretrained accuracy are flagged.
    pub accuracy_floor_delta: f64,
    pub keep_below_floor: bool,
}

#[derive(Debug, Clone)]
pub struct FamilyBuild {
    pub family: SnapshotFamily,
    pub pretrain_history: Vec<EpochMetrics>,
    pub finetune_history: Vec<EpochMetrics>,
}

pub fn build_family(
    mut net: Network,
    layout: &Arc<SubsetLayout>,
    opts: &FamilyOptions,
    data: &TrainTest,
) -> Result<FamilyBuild> {
    if opts.k == 0 {
        return Err(BendError::input("k must be ≥ 1"));
    }
    layout.check_against(&net)?;
    let (x, y) = (&data.train.features, &data.train.labels);
    let (tx, ty) = (&data.test.features, &data.test.labels);

    let pretrain_history = match &opts.pretrain {
        Some(cfg) => train(&mut net, x, y, cfg)?,
        None => Vec::new(),
    };
    let pretrained_accuracy = accuracy(&net, tx, ty)?;
    let floor = pretrained_accuracy - opts.accuracy_floor_delta;

    let trainable = layout.trainable(&net)?;
    let finetune = TrainConfig {
        epochs: opts.k,
        ..opts.finetune.clone()
    };
    let mut snapshots = Vec::with_capacity(opts.k);
    let mut meta = Vec::with_capacity(opts.k);
    let finetune_history = train_with_callback(&mut net, x, y, &finetune, &trainable, |n, m| {
        let acc = accuracy(n, tx, ty)?;
        let below_floor = acc < floor;
        if below_floor {
            log::warn!(
                "snapshot after epoch {} has test accuracy {acc:.4} below floor {floor:.4}",
                m.epoch + 1
            );
        }
        snapshots.push(flatten(n, layout)?);
        meta.push(SnapshotMeta {
            epoch: m.epoch + 1,
            test_accuracy: acc,
            below_floor,
        });
        Ok(())
    })?;

    if !opts.keep_below_floor {
        let mut kept_s = Vec::new();
        let mut kept_m = Vec::new();
        for (s, m) in snapshots.into_iter().zip(meta) {
            if !m.below_floor {
                kept_s.push(s);
                kept_m.push(m);
            }
        }
        if kept_s.is_empty() {
            return Err(BendError::input("every snapshot fell below the accuracy floor"));
        }
        snapshots = kept_s;
        meta = kept_m;
    }

    Ok(FamilyBuild {
        family: SnapshotFamily {
            layout: Arc::clone(layout),
            snapshots,
            meta,
            base_model: net,
            pretrained_accuracy,
            seeds: FamilySeeds {
                pretrain: opts.pretrain.as_ref().map(|c| c.seed),
                finetune: opts.finetune.seed,
            },
        },
        pretrain_history,
        finetune_history,
    })
}
