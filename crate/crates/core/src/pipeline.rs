//! End-to-end run: corpus to model, similarity matrices, trees, typology
//! evaluation and learning curve, all written under one run directory with
//! a checksum manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{PipelineConfig, SimilaritySplit};
use crate::corpus::{parse_corpus, split_corpus, Corpus};
use crate::error::{Error, Result};
use crate::eval::{correlate, learning_curve, run_folds, EvalReport, FoldSpec, PredictMethod, SimilaritySource};
use crate::hierarchy::{ward_cluster, ClusterTree};
use crate::nli::{self, labeled_vectors, NliModel, TrainConfig, TrainOutcome};
use crate::optim::OptConfig;
use crate::similarity::{confusion_similarity, hard_confusion_similarity, symmetrize, SimilarityMatrix};
use crate::wals::{load_wals, preprocess, wals_similarity, PreprocessReport, SharingMode, WalsDatabase};

pub const MANIFEST: &str = "manifest.txt";

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    parse_corpus(BufReader::new(File::open(path)?))
}

/// Loads, restricts to `languages` and preprocesses a long-format WALS CSV.
pub fn read_wals(
    path: &Path,
    languages: Option<&[String]>,
    config: &crate::wals::PreprocessConfig,
) -> Result<(WalsDatabase, PreprocessReport)> {
    let db = load_wals(BufReader::new(File::open(path)?))?;
    let db = match languages {
        Some(langs) => db.restrict_languages(langs)?,
        None => db,
    };
    Ok(preprocess(&db, config))
}

/// Collects artifacts in memory and writes them with a sorted manifest.
#[derive(Debug, Default)]
pub struct RunWriter {
    dir: PathBuf,
    artifacts: BTreeMap<String, Vec<u8>>,
}

impl RunWriter {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        RunWriter {
            dir: dir.into(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.artifacts.insert(name.to_string(), contents.into());
    }

    pub fn manifest(&self) -> String {
        let mut out = String::from("# sha256  artifact\n");
        for (name, bytes) in &self.artifacts {
            let digest = Sha256::digest(bytes);
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            let _ = writeln!(out, "{hex}  {name}");
        }
        out
    }

    /// Writes every artifact and the manifest; returns the manifest path.
    pub fn finish(self) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        for (name, bytes) in &self.artifacts {
            let path = self.dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, bytes)?;
        }
        let manifest = self.dir.join(MANIFEST);
        fs::write(&manifest, self.manifest())?;
        Ok(manifest)
    }
}

pub fn train_config(config: &PipelineConfig, lambda: f64) -> TrainConfig<f64> {
    TrainConfig {
        lambda,
        optimizer: OptConfig {
            method: config.optimizer,
            tolerance: config.tolerance,
            max_iters: config.max_iters,
            ..OptConfig::default()
        },
        allow_unregularized: false,
    }
}

pub fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,objective\n");
    for (i, v) in trace.iter().enumerate() {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub outcome: TrainOutcome<f64>,
    pub train: Corpus,
    pub heldout: Corpus,
    /// Development scores per lambda when a grid was searched.
    pub lambda_scores: Vec<(f64, f64)>,
}

/// Splits the corpus, optionally selects lambda on the development half of
/// the heldout block, and trains on the training split.
pub fn train_from_config(corpus: &Corpus, config: &PipelineConfig) -> Result<TrainedModel> {
    let (train, heldout) = split_corpus(corpus, config.train_fraction, config.split_seed)?;
    let mut lambda = config.lambda;
    let mut lambda_scores = Vec::new();
    if !config.lambda_grid.is_empty() {
        let (dev, _) = split_corpus(&heldout, config.dev_fraction, config.split_seed.wrapping_add(1))?;
        let selection = nli::select_lambda(
            &train,
            &dev,
            &config.extraction,
            &config.lambda_grid,
            &train_config(config, config.lambda),
        )?;
        lambda = selection.best;
        lambda_scores = selection.scores;
    }
    let outcome = nli::train_on_corpus(&train, &config.extraction, &train_config(config, lambda))?;
    Ok(TrainedModel {
        outcome,
        train,
        heldout,
        lambda_scores,
    })
}

/// Symmetrized confusion similarities of `model` on `corpus`.
pub fn esl_similarity(model: &NliModel<f64>, corpus: &Corpus, hard: bool) -> Result<SimilarityMatrix<f64>> {
    let data = labeled_vectors(corpus, &model.languages, &model.feature_index, &model.extraction)?;
    let raw = if hard {
        hard_confusion_similarity(model, &data)?
    } else {
        confusion_similarity(model, &data)?
    };
    symmetrize(&raw)
}

pub fn cluster(matrix: &SimilarityMatrix<f64>) -> Result<ClusterTree<f64>> {
    ward_cluster(&matrix.to_distances())
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub label: String,
    pub mean_accuracy: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub lambda: f64,
    pub optimizer_status: String,
    pub correlations: BTreeMap<String, f64>,
    pub results: Vec<SummaryRow>,
    pub manifest: PathBuf,
}

fn methods(config: &PipelineConfig) -> Vec<PredictMethod> {
    let mut out: Vec<PredictMethod> = config.k_list.iter().map(|&k| PredictMethod::Knn(k)).collect();
    out.push(PredictMethod::Tree);
    out
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn add_tree(run: &mut RunWriter, name: &str, tree: &ClusterTree<f64>) {
    run.add(&format!("trees/{name}.nwk"), tree.to_newick() + "\n");
    run.add(&format!("trees/{name}.json"), tree.to_json() + "\n");
    run.add(&format!("trees/{name}.svg"), tree.to_svg());
}

/// Runs every stage and writes the run directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary> {
    config.validate()?;
    let corpus_path = config
        .corpus
        .as_ref()
        .ok_or_else(|| Error::invalid("pipeline needs a corpus path"))?;
    let wals_path = config
        .wals
        .as_ref()
        .ok_or_else(|| Error::invalid("pipeline needs a WALS path"))?;
    let corpus = read_corpus(corpus_path)?;
    let (db, wals_report) = read_wals(wals_path, Some(corpus.languages()), &config.wals_preprocess)?;

    let mut run = RunWriter::new(&config.out_dir);
    run.add("config.txt", run_config_text(config));

    let trained = train_from_config(&corpus, config)?;
    let model = &trained.outcome.model;
    run.add("model/model.txt", model.to_text());
    run.add("model/trace.csv", trace_csv(&trained.outcome.trace));
    if !trained.lambda_scores.is_empty() {
        let mut text = String::from("lambda,dev_log_likelihood\n");
        for (l, s) in &trained.lambda_scores {
            let _ = writeln!(text, "{l},{s}");
        }
        run.add("model/lambda_selection.csv", text);
    }

    let sim_corpus = match config.similarity_split {
        SimilaritySplit::Train => &trained.train,
        SimilaritySplit::Heldout => &trained.heldout,
    };
    let esl = esl_similarity(model, sim_corpus, config.hard_confusion)?;
    run.add("similarity/esl.csv", esl.to_csv());
    run.add("similarity/esl.json", esl.to_json() + "\n");
    add_tree(&mut run, "esl", &cluster(&esl)?);

    run.add(
        "wals/preprocess.json",
        serde_json::to_string_pretty(&serde_json::json!({
            "stats": db.stats(),
            "removed": wals_report,
        }))? + "\n",
    );
    let mut correlations = BTreeMap::new();
    for mode in [SharingMode::SharedAll, SharingMode::SharedPairwise] {
        let wals = wals_similarity::<f64>(&db, mode)?;
        let name = format!("wals_{}", mode.as_str().replace('-', "_"));
        run.add(&format!("similarity/{name}.csv"), wals.to_csv());
        run.add(&format!("similarity/{name}.json"), wals.to_json() + "\n");
        add_tree(&mut run, &name, &cluster(&wals)?);
        correlations.insert(format!("esl_vs_{name}"), correlate(&esl, &wals)?);
    }
    run.add("correlations.json", serde_json::to_string_pretty(&correlations)? + "\n");

    let spec = FoldSpec {
        folds: config.folds,
        seed: config.fold_seed,
        keep_fraction: config.keep_fraction,
    };
    let sources = [
        SimilaritySource::Esl(esl.clone()),
        SimilaritySource::Wals(SharingMode::SharedAll),
        SimilaritySource::Wals(SharingMode::SharedPairwise),
    ];
    let mut results = Vec::new();
    let mut table = String::from("label\tmean_accuracy\tstddev\n");
    for source in &sources {
        for method in methods(config) {
            let mut report: EvalReport = run_folds(&db, source, method, &spec)?;
            echo_config(&mut report, config);
            let _ = writeln!(table, "{}\t{:.6}\t{:.6}", report.label, report.mean_accuracy, report.stddev());
            run.add(&format!("eval/{}.json", file_stem(&report.label)), report.to_json() + "\n");
            results.push(SummaryRow {
                label: report.label.clone(),
                mean_accuracy: report.mean_accuracy,
                stddev: report.stddev(),
            });
        }
    }
    run.add("eval/summary.tsv", table);

    let curve = learning_curve(
        &db,
        &config.curve_fractions,
        SharingMode::SharedPairwise,
        PredictMethod::Tree,
        &spec,
        Some(&esl),
    )?;
    run.add("eval/curve.csv", curve.to_csv());
    run.add("eval/curve.json", serde_json::to_string_pretty(&curve)? + "\n");

    let manifest = run.finish()?;
    Ok(RunSummary {
        lambda: model.lambda,
        optimizer_status: model.status.as_str().to_string(),
        correlations,
        results,
        manifest,
    })
}

/// The effective configuration minus the output location, so runs into
/// different directories remain comparable.
pub fn run_config_text(config: &PipelineConfig) -> String {
    config
        .to_text()
        .lines()
        .filter(|l| !l.starts_with("out_dir "))
        .map(|l| format!("{l}\n"))
        .collect()
}

pub fn echo_config(report: &mut EvalReport, config: &PipelineConfig) {
    for line in run_config_text(config).lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            report.config.entry(k.to_string()).or_insert_with(|| v.to_string());
        }
    }
}
