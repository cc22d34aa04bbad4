//! Command implementations behind the `bend` binary.
//!
//! Each command returns a [`Report`]; commands that take a config also
//! write their artifacts and report into the configured output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::analysis::{
    cost_model, diversity_between, diversity_within, enumerate_scenario, iou_scenarios, ratio_f64, wrong_set_iou,
    CostModelInputs,
};
use crate::autoencoder::{train_autoencoder, AutoencoderModel};
use crate::config::{DatasetSpec, RunConfig};
use crate::data::{self, load_csv_dataset, load_predictions, make_blobs, save_predictions, Split, TrainTest};
use crate::ddpm::{generate_classifiers, train_ddpm, DiffusionModel};
use crate::ensemble::{abend_expected_accuracy, abend_trials, baseline_stats, sbend, PredictionMatrix, VoteMethod};
use crate::error::{BendError, Result};
use crate::nn::{Network, ParamKind};
use crate::report::Report;
use crate::subset::{build_family, inject, select_subset, FamilyOptions, SnapshotFamily, SubsetLayout};

pub const FAMILY_FILE: &str = "family.toml";
pub const AUTOENCODER_FILE: &str = "autoencoder.toml";
pub const DDPM_FILE: &str = "ddpm.toml";
pub const GENERATED_PREDICTIONS: &str = "generated_predictions.csv";
pub const ORIGINAL_PREDICTIONS: &str = "original_predictions.csv";

/// Worker pool for per-classifier evaluation, capped by `BEND_THREADS`.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("BEND_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| BendError::Config(format!("BEND_THREADS='{v}' is not a positive integer")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BendError::Config(format!("cannot start worker pool: {e}")))
}

pub fn load_dataset(cfg: &RunConfig) -> Result<TrainTest> {
    match &cfg.dataset {
        DatasetSpec::Blobs {
            n,
            dim,
            classes,
            spread,
            ..
        } => make_blobs(*n, *dim, *classes, *spread, cfg.seeds().dataset),
        DatasetSpec::Csv {
            train,
            test,
            label_column,
        } => {
            let mut train = load_csv_dataset(&cfg.base_dir.join(train), label_column)?;
            let mut test = load_csv_dataset(&cfg.base_dir.join(test), label_column)?;
            if train.dim() != test.dim() {
                return Err(BendError::input(format!(
                    "train has {} features but test has {}",
                    train.dim(),
                    test.dim()
                )));
            }
            let classes = train.num_classes.max(test.num_classes);
            train.num_classes = classes;
            test.num_classes = classes;
            test.split = Split::Test;
            Ok(TrainTest { train, test })
        }
    }
}

fn header(report: &mut Report, cfg: &RunConfig) {
    let s = cfg.seeds();
    report
        .field("config_hash", cfg.hash())
        .field("seed", cfg.seed)
        .field("seed.dataset", s.dataset)
        .field("seed.network", s.network)
        .field("seed.pretrain", s.pretrain)
        .field("seed.finetune", s.finetune)
        .field("seed.autoencoder", s.autoencoder)
        .field("seed.ddpm", s.ddpm)
        .field("seed.generation", s.generation)
        .field("seed.ensemble", s.ensemble);
}

pub fn write_report(dir: &Path, report: &Report) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| BendError::io(dir, e))?;
    let path = dir.join(format!("{}.report", report.command));
    fs::write(&path, report.render()).map_err(|e| BendError::io(&path, e))?;
    Ok(path)
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| BendError::io(&cfg.out_dir, e))
}

pub fn cmd_train_base(cfg: &RunConfig) -> Result<Report> {
    let data = load_dataset(cfg)?;
    let net = Network::new(&cfg.network.widths, cfg.network.activation, cfg.seeds().network)?;
    let layout = Arc::new(select_subset(&net, &cfg.subset.layers)?);
    let opts = FamilyOptions {
        pretrain: Some(cfg.pretrain_config()),
        finetune: cfg.finetune_config(),
        k: cfg.k,
        accuracy_floor_delta: cfg.subset.accuracy_floor_delta,
        keep_below_floor: cfg.subset.keep_below_floor,
    };
    let build = build_family(net, &layout, &opts, &data)?;
    ensure_out_dir(cfg)?;
    data::save(&cfg.out_dir.join(FAMILY_FILE), &build.family)?;

    let f = &build.family;
    let mut r = Report::new("train-base");
    header(&mut r, cfg);
    r.field("family", FAMILY_FILE)
        .field("k_pre", cfg.k_pre)
        .field("k", f.k())
        .field("subset_layers", cfg.subset.layers.join(" "))
        .field("subset_dim", layout.total_dim)
        .field("train_samples", data.train.len())
        .field("test_samples", data.test.len())
        .field("pretrained_accuracy", f.pretrained_accuracy)
        .field("snapshot_mean_accuracy", f.mean_accuracy())
        .field("snapshots_below_floor", f.meta.iter().filter(|m| m.below_floor).count());
    r.table(
        "snapshots",
        &["epoch", "test_accuracy", "below_floor"],
        f.meta
            .iter()
            .map(|m| {
                vec![
                    m.epoch.to_string(),
                    m.test_accuracy.to_string(),
                    m.below_floor.to_string(),
                ]
            })
            .collect(),
    );
    let history = |h: &[crate::nn::EpochMetrics]| {
        h.iter()
            .map(|m| vec![(m.epoch + 1).to_string(), m.loss.to_string(), m.accuracy.to_string()])
            .collect()
    };
    r.table(
        "pretrain",
        &["epoch", "loss", "train_accuracy"],
        history(&build.pretrain_history),
    );
    r.table(
        "finetune",
        &["epoch", "loss", "train_accuracy"],
        history(&build.finetune_history),
    );
    write_report(&cfg.out_dir, &r)?;
    Ok(r)
}

/// `true` when every parameter outside `layout` is bit-identical in `a` and `b`.
pub fn complement_matches(a: &Network, b: &Network, layout: &SubsetLayout) -> bool {
    if a.names() != b.names() || a.widths() != b.widths() {
        return false;
    }
    a.layers()
        .iter()
        .zip(b.layers())
        .zip(a.names())
        .all(|((la, lb), name)| {
            [ParamKind::Weights, ParamKind::Bias].into_iter().all(|kind| {
                let in_subset = layout.entries.iter().any(|e| e.layer_name == *name && e.kind == kind);
                in_subset
                    || la
                        .params(kind)
                        .iter()
                        .zip(lb.params(kind))
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
        })
        && a.layers()
            .iter()
            .zip(b.layers())
            .all(|(x, y)| x.activation == y.activation)
}

fn predict_all(pool: &rayon::ThreadPool, nets: &[Network], data: &TrainTest) -> Result<PredictionMatrix> {
    let x = &data.test.features;
    let rows: Vec<Vec<usize>> = pool.install(|| nets.par_iter().map(|n| n.classify(x)).collect::<Result<_>>())?;
    PredictionMatrix::from_rows(&rows)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

pub fn cmd_diffuse(cfg: &RunConfig, family_path: &Path) -> Result<Report> {
    let family: SnapshotFamily = data::load(family_path)?;
    let data = load_dataset(cfg)?;
    let target = &data.test.labels;
    ensure_out_dir(cfg)?;

    let ae_train = train_autoencoder(&family, &cfg.autoencoder_config())?;
    let ae_path = cfg.out_dir.join(AUTOENCODER_FILE);
    data::save(&ae_path, &ae_train.model)?;
    let ae: AutoencoderModel = data::load(&ae_path)?;

    let codes = ae.encode_batch(&family.snapshots)?;
    let ddpm_cfg = cfg.ddpm_config();
    let init = DiffusionModel::init(ae.latent_dim, &ddpm_cfg)?;
    let ddpm_train = train_ddpm(&codes, init, &ddpm_cfg.train)?;
    let ddpm_path = cfg.out_dir.join(DDPM_FILE);
    data::save(&ddpm_path, &ddpm_train.model)?;
    let diffusion: DiffusionModel = data::load(&ddpm_path)?;

    let base = &family.base_model;
    let generated = generate_classifiers(&diffusion, &ae, base, cfg.m, cfg.seeds().generation)?;
    let complement_ok = generated
        .iter()
        .filter(|g| complement_matches(g, base, &family.layout))
        .count();

    let originals = family
        .snapshots
        .iter()
        .map(|s| {
            let mut n = base.clone();
            inject(&mut n, s)?;
            Ok(n)
        })
        .collect::<Result<Vec<_>>>()?;

    let pool = worker_pool()?;
    let gen_preds = predict_all(&pool, &generated, &data)?;
    let orig_preds = predict_all(&pool, &originals, &data)?;
    save_predictions(&cfg.out_dir.join(GENERATED_PREDICTIONS), &gen_preds, Some(target))?;
    save_predictions(&cfg.out_dir.join(ORIGINAL_PREDICTIONS), &orig_preds, Some(target))?;

    let gen_acc = baseline_stats(&gen_preds, target)?;
    let orig_acc = baseline_stats(&orig_preds, target)?;
    let recon: Vec<f64> = family
        .snapshots
        .iter()
        .map(|s| {
            let back = ae.decode(&ae.encode(s)?)?;
            let norm = s.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(back.l2_distance(s) / norm.max(f64::MIN_POSITIVE))
        })
        .collect::<Result<_>>()?;

    let mut r = Report::new("diffuse");
    header(&mut r, cfg);
    r.field(
        "family",
        family_path
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
    )
    .field("autoencoder", AUTOENCODER_FILE)
    .field("ddpm", DDPM_FILE)
    .field("generated_predictions", GENERATED_PREDICTIONS)
    .field("original_predictions", ORIGINAL_PREDICTIONS)
    .field("subset_dim", family.layout.total_dim)
    .field("latent_dim", ae.latent_dim)
    .field("timesteps", diffusion.schedule.timesteps())
    .field(
        "autoencoder_final_loss",
        ae_train.epoch_losses.last().copied().unwrap_or(f64::NAN),
    )
    .field(
        "ddpm_final_loss",
        ddpm_train.epoch_losses.last().copied().unwrap_or(f64::NAN),
    )
    .field("reconstruction_rel_l2_mean", mean(&recon))
    .field("m", cfg.m)
    .field("complement_bit_exact", complement_ok == generated.len())
    .field("generated_mean_accuracy", gen_acc.mean)
    .field("original_mean_accuracy", orig_acc.mean);
    r.table(
        "generated",
        &["classifier", "test_accuracy"],
        gen_acc
            .per_classifier
            .iter()
            .enumerate()
            .map(|(i, a)| vec![i.to_string(), a.to_string()])
            .collect(),
    );
    r.table(
        "original",
        &["snapshot", "test_accuracy", "reconstruction_rel_l2"],
        orig_acc
            .per_classifier
            .iter()
            .zip(&recon)
            .enumerate()
            .map(|(i, (a, e))| vec![i.to_string(), a.to_string(), e.to_string()])
            .collect(),
    );
    write_report(&cfg.out_dir, &r)?;
    Ok(r)
}

fn require_target(path: &Path, target: Option<Vec<usize>>) -> Result<Vec<usize>> {
    target.ok_or_else(|| BendError::input(format!("{} has no 'target' row", path.display())))
}

pub fn cmd_ensemble(preds_path: &Path, method: VoteMethod, seed: u64, trials: usize) -> Result<Report> {
    let loaded = load_predictions(preds_path)?;
    let target = require_target(preds_path, loaded.target)?;
    let p = &loaded.matrix;
    let base = baseline_stats(p, &target)?;

    let mut r = Report::new(format!("ensemble-{method}"));
    r.field("method", method).field("m", p.m()).field("n", p.n());
    match method {
        VoteMethod::Sbend => {
            r.field("accuracy", sbend(p, &target)?.accuracy);
        }
        VoteMethod::Abend => {
            let t = abend_trials(p, &target, seed, trials)?;
            r.field("seed", seed)
                .field("trials", trials)
                .field("accuracy", t.mean)
                .field("accuracy_std", t.std)
                .field("expected_accuracy", abend_expected_accuracy(p, &target)?);
        }
    }
    r.field("max", base.max)
        .field("mean", base.mean)
        .field("median", base.median)
        .field("potential", base.potential);
    r.table(
        "per_classifier",
        &["classifier", "accuracy"],
        loaded
            .classifier_ids
            .iter()
            .zip(&base.per_classifier)
            .map(|(id, a)| vec![id.clone(), a.to_string()])
            .collect(),
    );
    Ok(r)
}

pub fn cmd_analyze(gen_path: &Path, orig_path: &Path) -> Result<Report> {
    let gen = load_predictions(gen_path)?;
    let orig = load_predictions(orig_path)?;
    let target = match (gen.target, orig.target) {
        (Some(a), Some(b)) if a != b => {
            return Err(BendError::input("generated and original files carry different targets"))
        }
        (Some(t), _) | (None, Some(t)) => t,
        (None, None) => return Err(BendError::input("neither predictions file has a 'target' row")),
    };
    if gen.matrix.n() != orig.matrix.n() || target.len() != gen.matrix.n() {
        return Err(BendError::input("prediction files cover different sample counts"));
    }

    let mut r = Report::new("analyze");
    r.field("n", target.len());
    let d_o = if gen.matrix.m() == orig.matrix.m() {
        diversity_between(&gen.matrix, &orig.matrix)?.to_string()
    } else {
        log::warn!("d_o needs equal classifier counts; skipped");
        "n/a".to_string()
    };
    r.field("d_o", d_o);
    for (name, p) in [("generated", &gen.matrix), ("original", &orig.matrix)] {
        let w = diversity_within(p)?;
        let iou = wrong_set_iou(p, &target)?;
        let b = baseline_stats(p, &target)?;
        r.field(format!("{name}.m"), p.m())
            .field(format!("{name}.d_i"), w.raw)
            .field(format!("{name}.d_i_rate"), w.rate)
            .field(format!("{name}.iou_allway"), iou.allway)
            .field(format!("{name}.iou_pairwise"), iou.pairwise_mean)
            .field(format!("{name}.mean_accuracy"), b.mean)
            .field(format!("{name}.sbend_accuracy"), sbend(p, &target)?.accuracy)
            .field(
                format!("{name}.abend_expected_accuracy"),
                abend_expected_accuracy(p, &target)?,
            )
            .field(format!("{name}.potential"), b.potential);
    }
    Ok(r)
}

pub fn cmd_cost(inputs: &CostModelInputs, m_max: u64) -> Result<Report> {
    if m_max == 0 {
        return Err(BendError::input("m range must include at least m = 1"));
    }
    let first = cost_model(inputs, 1)?;
    let mut r = Report::new("cost");
    r.field("k_pre", inputs.k_pre)
        .field("k", inputs.k)
        .field("t_orge", inputs.t_orge)
        .field("t_ate", inputs.t_ate)
        .field("t_ddpm", inputs.t_ddpm)
        .field("t_sgen", inputs.t_sgen)
        .field("breakeven_m", format!("{:.4}", first.breakeven_m));
    let rows = (1..=m_max)
        .map(|m| {
            let e = cost_model(inputs, m)?;
            Ok(vec![
                m.to_string(),
                format!("{:.2}", e.t_diff),
                format!("{:.2}", e.t_trad),
                format!("{:.2}", e.t_trad - e.t_diff),
            ])
        })
        .collect::<Result<_>>()?;
    r.table("cost", &["m", "t_diff", "t_trad", "saving"], rows);
    Ok(r)
}

pub fn cmd_table1() -> Result<Report> {
    let mut r = Report::new("table1");
    r.field("classifiers", 3)
        .field("samples", 3)
        .field("individual_accuracy", "2/3");
    let mut rows = Vec::new();
    for s in iou_scenarios() {
        let o = enumerate_scenario(&s.scenario)?;
        r.field(format!("iou_{}.sbend", s.label), o.sbend_accuracy);
        r.field(
            format!("iou_{}.abend_expected", s.label),
            format!("{:.4}", o.abend.expected_accuracy()),
        );
        for (&correct, &p) in o.abend.probabilities.iter().rev() {
            let acc = o.abend.accuracy(correct);
            let reported = s
                .reported_abend
                .iter()
                .find(|(a, _)| (a - ratio_f64(acc)).abs() < 1e-9)
                .map_or_else(|| "-".to_string(), |(_, q)| q.to_string());
            rows.push(vec![
                s.label.to_string(),
                acc.to_string(),
                p.to_string(),
                format!("{:.4}", ratio_f64(p)),
                reported,
            ]);
        }
    }
    r.table(
        "abend",
        &["iou", "accuracy", "probability", "decimal", "reported"],
        rows,
    );
    Ok(r)
}

/// Runs train-base, diffuse, both votes and the diversity analysis.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<Vec<Report>> {
    let train = cmd_train_base(cfg)?;
    let diffuse = cmd_diffuse(cfg, &cfg.out_dir.join(FAMILY_FILE))?;
    let gen = cfg.out_dir.join(GENERATED_PREDICTIONS);
    let orig = cfg.out_dir.join(ORIGINAL_PREDICTIONS);
    let seed = cfg.seeds().ensemble;
    let mut reports = vec![train, diffuse];
    for method in [VoteMethod::Sbend, VoteMethod::Abend] {
        let mut r = cmd_ensemble(&gen, method, seed, cfg.ensemble.trials)?;
        r.fields.insert(0, ("config_hash".into(), cfg.hash()));
        write_report(&cfg.out_dir, &r)?;
        reports.push(r);
    }
    let mut a = cmd_analyze(&gen, &orig)?;
    a.fields.insert(0, ("config_hash".into(), cfg.hash()));
    write_report(&cfg.out_dir, &a)?;
    reports.push(a);
    Ok(reports)
}
