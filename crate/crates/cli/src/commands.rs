//! Subcommand implementations. Every command reads the run configuration and
//! works inside its `workdir`, so the steps can be chained or rerun alone.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use graphxc_core::cluster::{cluster_with_heads, graph_centroids, Clustering};
use graphxc_core::data::{load_dataset, read_feature_file, write_dataset, format_feature_file, Idf, Precision, XcDataset};
use graphxc_core::graph::{read_graph, write_graph, GraphKind, LabelGraph};
use graphxc_core::metrics::{
    bin_contributions, evaluate, format_report, lmi, propensities, rankings_from_scores, MetricLine, PopularityBins, Ranking,
};
use graphxc_core::predict::rankings_to_matrix;
use graphxc_core::synth::SynthConfig;
use graphxc_core::tensor::Checkpoint;
use graphxc_core::train::{format_log, ClassifierStage, MetaStage, ShortlistStage, TrainedModel, Trainer};
use graphxc_core::{CsrMatrix, Error, Result};

use crate::config::RunConfig;

pub const GRAPH_FILE: &str = "graph.txt";
pub const RAW_GRAPH_FILE: &str = "graph_raw.txt";
pub const CLUSTER_FILE: &str = "clusters.txt";
pub const PREDICTION_FILE: &str = "predictions.txt";
pub const METRICS_FILE: &str = "metrics.txt";

pub fn checkpoint_file(module: usize) -> String {
    format!("module{module}.ckpt")
}

fn workdir(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.workdir)?;
    Ok(&cfg.workdir)
}

/// Training set, and the test set when configured, with a shared IDF when
/// `tfidf` is on.
fn load_data(cfg: &RunConfig, with_test: bool) -> Result<(XcDataset, Option<XcDataset>)> {
    let text = cfg.require(&cfg.label_text, "label_text")?;
    let train = load_dataset(cfg.require(&cfg.train, "train")?, text)?;
    let test = if with_test { Some(load_dataset(cfg.require(&cfg.test, "test")?, text)?) } else { None };
    if !cfg.tfidf {
        return Ok((train, test));
    }
    let idf = Idf::fit(&train.docs);
    let weigh = |ds: XcDataset| XcDataset::new(idf.transform(&ds.docs), ds.labels, idf.transform(&ds.label_text));
    Ok((weigh(train)?, test.map(weigh).transpose()?))
}

fn load_graph(cfg: &RunConfig, n_labels: usize) -> Result<CsrMatrix> {
    let path = cfg.workdir.join(GRAPH_FILE);
    if !path.exists() {
        return Err(Error::Data(format!(
            "label graph {} not found; run `graphxc build-graph` with the same config first",
            path.display()
        )));
    }
    let (meta, g) = read_graph(&path)?;
    if g.rows() != n_labels {
        return Err(Error::Dimension(format!("graph {} has {} labels, the dataset {n_labels}", path.display(), g.rows())));
    }
    if meta.seed != cfg.seed || meta.head_threshold != cfg.head_threshold {
        log::warn!("graph {} was built with `{meta}`, which differs from the current config", path.display());
    }
    Ok(g)
}

fn require_file(path: PathBuf, producer: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::Data(format!("{} not found; run `graphxc {producer}` first", path.display())))
    }
}

pub fn build_graph(cfg: &RunConfig) -> Result<String> {
    let (train, _) = load_data(cfg, false)?;
    let kind = if cfg.cooc { GraphKind::Cooccurrence } else { GraphKind::RandomWalk };
    let graph = LabelGraph::build(&train.labels, &cfg.walk(), kind)?;
    let dir = workdir(cfg)?;
    write_graph(&dir.join(GRAPH_FILE), &graph.meta(), &graph.g)?;
    write_graph(&dir.join(RAW_GRAPH_FILE), &graph.meta(), &graph.g_raw)?;
    Ok(format!(
        "graph: {} labels, {} edges, {} head labels, {} isolated\n",
        graph.n_labels(),
        graph.g.nnz(),
        graph.head_labels.len(),
        graph.isolated.len()
    ))
}

/// The Module I clustering: graph-smoothed TF-IDF centroids split by 2-means.
pub fn cluster(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let (train, _) = load_data(cfg, false)?;
    cfg.train_config().validate_for(&train)?;
    let graph = if cfg.no_graph { CsrMatrix::identity(train.n_labels()) } else { load_graph(cfg, train.n_labels())? };
    let centroids = graph_centroids(&train.docs, &train.labels, &graph)?;
    let clustering =
        cluster_with_heads(&centroids, &train.label_frequency(), cfg.head_threshold, cfg.n_clusters, cfg.seed)?;
    clustering.write(&workdir(cfg)?.join(CLUSTER_FILE))?;
    let sizes = clustering.sizes();
    Ok(format!(
        "clusters: {} (sizes {}..{}), LMI {:.6}\n",
        clustering.n_clusters,
        sizes.iter().min().unwrap_or(&0),
        sizes.iter().max().unwrap_or(&0),
        lmi(&clustering, &train.labels)
    ))
}

fn write_log(dir: &Path, module: usize, records: &[graphxc_core::train::LogRecord]) -> Result<()> {
    fs::write(dir.join(format!("module{module}.log")), format_log(records))?;
    Ok(())
}

/// Runs Modules I to IV, or the modules after `resume_from` starting from
/// that module's checkpoint. Writes a checkpoint and log per module.
pub fn train(cfg: &RunConfig, resume_from: Option<usize>) -> Result<String> {
    cfg.validate()?;
    let (train, _) = load_data(cfg, false)?;
    let graph = load_graph(cfg, train.n_labels())?;
    let dir = workdir(cfg)?.to_path_buf();
    let mut trainer = Trainer::new(cfg.train_config(), &train, &graph)?;
    let load = |m: usize| -> Result<Checkpoint> {
        let path = require_file(dir.join(checkpoint_file(m)), "train")?;
        Checkpoint::read(&path)
    };
    let start = resume_from.unwrap_or(0);
    if start > 3 {
        return Err(Error::Config(format!("can resume from module 1, 2 or 3, not {start}")));
    }

    let stage_one = match start {
        0 => {
            let s = trainer.module_one()?;
            s.to_checkpoint().write(&dir.join(checkpoint_file(1)))?;
            write_log(&dir, 1, &trainer.log.module_one)?;
            Some(s)
        }
        1 => Some(MetaStage::from_checkpoint(&load(1)?)?),
        _ => None,
    };
    let stage_two = match stage_one {
        Some(s) => {
            let s = trainer.module_two(s)?;
            s.to_checkpoint().write(&dir.join(checkpoint_file(2)))?;
            write_log(&dir, 2, &trainer.log.module_two)?;
            Some(s)
        }
        None if start == 2 => Some(ShortlistStage::from_checkpoint(&load(2)?)?),
        None => None,
    };
    let stage_three = match stage_two {
        Some(s) => {
            let s = trainer.module_three(s)?;
            s.to_checkpoint().write(&dir.join(checkpoint_file(3)))?;
            s
        }
        None => ClassifierStage::from_checkpoint(&load(3)?)?,
    };
    let model = trainer.module_four(stage_three)?;
    model.save(&dir.join(checkpoint_file(4)))?;
    write_log(&dir, 4, &trainer.log.module_four)?;

    let last = |r: &[graphxc_core::train::LogRecord]| r.last().map_or(String::from("-"), |r| format!("{:.6}", r.loss));
    Ok(format!(
        "trained: final loss module1 {} module2 {} module4 {}, {} points without shortlisted negatives\n",
        last(&trainer.log.module_one),
        last(&trainer.log.module_two),
        last(&trainer.log.module_four),
        trainer.log.skipped_points
    ))
}

pub fn predict(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let (_, test) = load_data(cfg, true)?;
    let test = test.expect("test set requested");
    let dir = workdir(cfg)?;
    let model = TrainedModel::load(&require_file(dir.join(checkpoint_file(4)), "train")?)?;
    let predictor = model.predictor()?;
    if predictor.n_labels() != test.n_labels() {
        return Err(Error::Dimension(format!("model has {} labels, test set {}", predictor.n_labels(), test.n_labels())));
    }
    let preds = predictor.predict_all(&test.docs, cfg.predict_k);
    if preds.iter().flatten().any(|(_, s)| !s.is_finite()) {
        return Err(Error::Numeric("non-finite prediction score".into()));
    }
    let scores = rankings_to_matrix(&preds, test.n_labels());
    fs::write(dir.join(PREDICTION_FILE), format_feature_file(&scores, Precision::Double))?;
    Ok(format!("predictions: {} documents, top {}\n", preds.len(), cfg.predict_k))
}

/// P@k, R@k and PSP@k, the per-bin P@k contributions as `Pbin<b> k value`
/// and, when an assignment is configured, `LMI 0 value`.
pub fn eval(cfg: &RunConfig, predictions: Option<&Path>) -> Result<String> {
    cfg.validate()?;
    let (train, test) = load_data(cfg, true)?;
    let test = test.expect("test set requested");
    let default_path = cfg.workdir.join(PREDICTION_FILE);
    let path = match predictions {
        Some(p) => p.to_path_buf(),
        None => require_file(default_path, "predict")?,
    };
    let scores = read_feature_file(&path, Precision::Double)?;
    if scores.rows() != test.n_docs() || scores.cols() != test.n_labels() {
        return Err(Error::Dimension(format!(
            "{} is {}x{} but the test set has {} documents and {} labels",
            path.display(),
            scores.rows(),
            scores.cols(),
            test.n_docs(),
            test.n_labels()
        )));
    }
    let k_max = cfg.ks.iter().copied().max().unwrap_or(1);
    let preds: Vec<Ranking> = rankings_from_scores(&scores, k_max);
    let freq = train.label_frequency();
    let prop = propensities(&freq, train.n_docs(), cfg.propensity());
    let mut lines = evaluate(&preds, &test.labels, &prop, &cfg.ks);
    let bins = PopularityBins::new(&freq, cfg.bins);
    for &k in &cfg.ks {
        for (b, v) in bin_contributions(&preds, &test.labels, &bins, k).into_iter().enumerate() {
            lines.push(MetricLine { metric: format!("Pbin{b}"), k, value: v });
        }
    }
    if let Some(a) = &cfg.assignment {
        let clustering = Clustering::read(a)?;
        if clustering.n_labels() != train.n_labels() {
            return Err(Error::Dimension(format!(
                "assignment {} covers {} labels, the dataset has {}",
                a.display(),
                clustering.n_labels(),
                train.n_labels()
            )));
        }
        lines.push(MetricLine { metric: "LMI".into(), k: 0, value: lmi(&clustering, &train.labels) });
    }
    let report = format_report(&lines);
    fs::write(workdir(cfg)?.join(METRICS_FILE), &report)?;
    Ok(report)
}

/// Runs the full pipeline once per configured variant under
/// `workdir/ablate/<variant>` and tabulates P@k and PSP@k.
pub fn ablate(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let mut summary = String::new();
    for name in &cfg.ablations {
        let v = cfg.variant(name)?;
        v.validate()?;
        log::info!("ablation {name}");
        build_graph(&v)?;
        train(&v, None)?;
        predict(&v)?;
        let report = eval(&v, None)?;
        for line in report.lines().filter(|l| l.starts_with("P ") || l.starts_with("PSP ")) {
            let _ = writeln!(summary, "{name} {line}");
        }
    }
    fs::write(workdir(cfg)?.join("ablate").join("summary.txt"), &summary)?;
    Ok(summary)
}

/// Writes a synthetic long-tail dataset as `train.txt`, `test.txt` and `label_text.txt`.
pub fn synth(out: &Path, cfg: &SynthConfig) -> Result<String> {
    let data = cfg.generate()?;
    fs::create_dir_all(out)?;
    write_dataset(&data.train, &out.join("train.txt"), &out.join("label_text.txt"))?;
    write_dataset(&data.test, &out.join("test.txt"), &out.join("label_text.txt"))?;
    Ok(format!(
        "synthetic data: {} train, {} test documents, {} labels, {:.2} of labels with fewer than 5 documents\n",
        data.train.n_docs(),
        data.test.n_docs(),
        data.train.n_labels(),
        data.fraction_below(5)
    ))
}
