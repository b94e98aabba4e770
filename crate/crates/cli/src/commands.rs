use std::fs::{self, File};
use std::io::{BufReader, Write as _};
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};

use esl_typology::config::{PipelineConfig, SimilaritySplit};
use esl_typology::corpus::{split_corpus, Corpus};
use esl_typology::eval::{correlate, learning_curve, run_folds, FoldSpec, PredictMethod, SimilaritySource};
use esl_typology::hierarchy::ClusterTree;
use esl_typology::nli::NliModel;
use esl_typology::pipeline::{self, RunWriter};
use esl_typology::predict::{knn_predict, tree_predict};
use esl_typology::similarity::SimilarityMatrix;
use esl_typology::synth::{synth_esl, synth_wals_on_tree, SynthEslConfig, SynthWalsConfig};
use esl_typology::wals::{wals_similarity, wide_to_long, SharingMode, WalsDatabase};

use crate::Failure;

type Outcome = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "esl-typology", version, about = "Language similarity from learner English and typology prediction")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    SharedAll,
    SharedPairwise,
}

impl From<Mode> for SharingMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::SharedAll => SharingMode::SharedAll,
            Mode::SharedPairwise => SharingMode::SharedPairwise,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Source {
    Esl,
    SharedAll,
    SharedPairwise,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TreeFormat {
    Newick,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Split {
    Train,
    Heldout,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the native-language classifier on the training split.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        /// Comma-separated grid searched on the development split.
        #[arg(long)]
        lambda_grid: Option<String>,
        /// Split seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        train_fraction: Option<f64>,
        /// lbfgs or gradient.
        #[arg(long)]
        optimizer: Option<String>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
        /// Output directory for the model, trace and manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Confusion-based language similarities from a trained model.
    EslSim {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Documents to score; the split is recomputed from the configured seed.
        #[arg(long, value_enum)]
        split: Option<Split>,
        #[arg(long)]
        seed: Option<u64>,
        /// Use smoothed misclassification counts instead of posteriors.
        #[arg(long)]
        hard: bool,
        /// `.json` writes JSON, anything else CSV. Default: stdout CSV.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cosine similarities of binarized WALS vectors.
    WalsSim {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        wals: PathBuf,
        #[arg(long, value_enum, default_value = "shared-pairwise")]
        mode: Mode,
        /// Restrict to the languages of this corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Restrict to these comma-separated languages.
        #[arg(long)]
        languages: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convert a wide per-language WALS export to the long CSV format.
    WalsConvert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "Name")]
        language_column: String,
        /// CSV of `feature_id,category`; unlisted ids use chapter ranges.
        #[arg(long)]
        categories: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Ward clustering of a similarity matrix.
    Cluster {
        #[arg(long)]
        matrix: PathBuf,
        /// Output format.
        #[arg(long, value_enum, default_value = "newick")]
        out: TreeFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Predict a target language's typological features.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        wals: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        /// Tree to use with `--method tree`; built from the matrix if absent.
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long)]
        target: String,
        /// knn or tree.
        #[arg(long, default_value = "knn")]
        method: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Comma-separated feature ids (default: every feature).
        #[arg(long)]
        features: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: TableFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Random-fold typology reconstruction benchmark.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        wals: PathBuf,
        #[arg(long, value_enum)]
        similarity: Source,
        /// ESL similarity matrix, required with `--similarity esl`.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// nn, knn, <k>nn or tree.
        #[arg(long, default_value = "tree")]
        method: String,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        keep_fraction: Option<f64>,
        /// Restrict to the languages of this corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Pearson correlation of two similarity matrices.
    Correlate {
        a: PathBuf,
        b: PathBuf,
        /// Also write a JSON record here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Accuracy against the fraction of WALS features used for construction.
    Curve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        wals: PathBuf,
        /// Comma-separated fractions in (0,1).
        #[arg(long)]
        fractions: Option<String>,
        #[arg(long, value_enum, default_value = "shared-pairwise")]
        mode: Mode,
        #[arg(long, default_value = "tree")]
        method: String,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// ESL matrix for the constant reference line.
        #[arg(long)]
        esl_matrix: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every stage into one run directory with a manifest.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        wals: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write a synthetic corpus and WALS table with known structure.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        blocks: usize,
        #[arg(long, default_value_t = 4)]
        languages_per_block: usize,
        #[arg(long, default_value_t = 100)]
        documents: usize,
        #[arg(long, default_value_t = 15)]
        sentences: usize,
        #[arg(long, default_value_t = 150)]
        wals_features: usize,
    },
}

fn require(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("{what} not found: {}", path.display())))
    }
}

fn load_config(common: &Common) -> Result<PipelineConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => {
            require(path, "config file")?;
            let text = fs::read_to_string(path)?;
            PipelineConfig::from_text(&text)
                .map_err(|e| Failure::Usage(anyhow::Error::from(e).context(format!("config {}", path.display()))))?
        }
        None => PipelineConfig::default(),
    };
    for item in &common.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
        set(&mut config, k.trim(), v.trim())?;
    }
    Ok(config)
}

fn set(config: &mut PipelineConfig, key: &str, value: &str) -> Result<(), Failure> {
    config
        .set(key, value)
        .map_err(|e| Failure::Usage(anyhow::Error::from(e).context(format!("setting {key}"))))
}

fn set_opt<T: ToString>(config: &mut PipelineConfig, key: &str, value: &Option<T>) -> Result<(), Failure> {
    match value {
        Some(v) => set(config, key, &v.to_string()),
        None => Ok(()),
    }
}

fn validated(config: PipelineConfig) -> Result<PipelineConfig, Failure> {
    config
        .validate()
        .map_err(|e| Failure::Usage(anyhow::Error::from(e).context("configuration")))?;
    Ok(config)
}

/// Effective settings of one invocation, written next to each artifact.
struct Echo {
    text: String,
}

impl Echo {
    fn new(command: &str, config: Option<&PipelineConfig>) -> Self {
        let mut text = format!("command = {command}\n");
        if let Some(c) = config {
            text.push_str(&pipeline::run_config_text(c));
        }
        Echo { text }
    }

    fn with(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        self.text.push_str(&format!("{key} = {value}\n"));
        self
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".config.txt");
    PathBuf::from(name)
}

fn emit(output: Option<&Path>, contents: &str, echo: &Echo) -> Outcome {
    match output {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, contents).with_context(|| format!("writing {}", path.display())).map_err(Failure::Usage)?;
            fs::write(sidecar(path), &echo.text)?;
        }
        None => {
            log::info!("effective configuration:\n{}", echo.text);
            std::io::stdout().write_all(contents.as_bytes())?;
        }
    }
    Ok(())
}

fn read_corpus(path: &Path) -> Result<Corpus, Failure> {
    require(path, "corpus")?;
    Ok(pipeline::read_corpus(path)?)
}

fn read_matrix(path: &Path) -> Result<SimilarityMatrix<f64>, Failure> {
    require(path, "matrix")?;
    Ok(SimilarityMatrix::read_auto(BufReader::new(File::open(path)?))?)
}

fn read_model(path: &Path) -> Result<NliModel<f64>, Failure> {
    require(path, "model")?;
    Ok(NliModel::from_text(BufReader::new(File::open(path)?))?)
}

fn read_tree(path: &Path) -> Result<ClusterTree<f64>, Failure> {
    require(path, "tree")?;
    let text = fs::read_to_string(path)?;
    let tree = if text.trim_start().starts_with('{') {
        ClusterTree::from_json(&text)?
    } else {
        ClusterTree::from_newick(&text)?
    };
    Ok(tree)
}

fn read_wals(
    path: &Path,
    languages: Option<&[String]>,
    config: &PipelineConfig,
) -> Result<WalsDatabase, Failure> {
    require(path, "WALS table")?;
    let (db, report) = pipeline::read_wals(path, languages, &config.wals_preprocess)?;
    log::info!(
        "WALS: {} languages, {} features after preprocessing ({} sparse, {} {}, {} single-valued removed)",
        db.n_languages(),
        db.n_features(),
        report.removed_sparse.len(),
        report.removed_category.len(),
        config.wals_preprocess.excluded_category,
        report.removed_degenerate.len()
    );
    Ok(db)
}

fn parse_method(text: &str, k: usize) -> Result<PredictMethod, Failure> {
    if text.eq_ignore_ascii_case("knn") {
        if k == 0 {
            return Err(Failure::usage("--k must be at least 1"));
        }
        return Ok(PredictMethod::Knn(k));
    }
    text.parse().map_err(|e: esl_typology::Error| Failure::usage(e))
}

fn split_list(text: &str) -> Vec<String> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

fn languages_for(corpus: &Option<PathBuf>, explicit: &Option<String>) -> Result<Option<Vec<String>>, Failure> {
    if let Some(list) = explicit {
        return Ok(Some(split_list(list)));
    }
    match corpus {
        Some(path) => Ok(Some(read_corpus(path)?.languages().to_vec())),
        None => Ok(None),
    }
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Train {
            common,
            corpus,
            lambda,
            lambda_grid,
            seed,
            train_fraction,
            optimizer,
            max_iters,
            tolerance,
            out,
        } => {
            let mut config = load_config(&common)?;
            set(&mut config, "corpus", &corpus.display().to_string())?;
            set_opt(&mut config, "lambda", &lambda)?;
            set_opt(&mut config, "lambda_grid", &lambda_grid)?;
            set_opt(&mut config, "split_seed", &seed)?;
            set_opt(&mut config, "train_fraction", &train_fraction)?;
            set_opt(&mut config, "optimizer", &optimizer)?;
            set_opt(&mut config, "max_iters", &max_iters)?;
            set_opt(&mut config, "tolerance", &tolerance)?;
            let out_dir = out.unwrap_or_else(|| config.out_dir.clone());
            let config = validated(config)?;
            let corpus = read_corpus(&corpus)?;
            let trained = pipeline::train_from_config(&corpus, &config)?;
            let model = &trained.outcome.model;
            let mut run = RunWriter::new(&out_dir);
            run.add("config.txt", Echo::new("train", Some(&config)).text);
            run.add("model.txt", model.to_text());
            run.add("trace.csv", pipeline::trace_csv(&trained.outcome.trace));
            let mut split = String::from("doc_id\tsplit\n");
            for d in trained.train.documents() {
                split.push_str(&format!("{}\ttrain\n", d.id));
            }
            for d in trained.heldout.documents() {
                split.push_str(&format!("{}\theldout\n", d.id));
            }
            run.add("split.tsv", split);
            let manifest = run.finish()?;
            eprintln!(
                "trained: lambda={} status={} iterations={} |g|_inf={:e}; manifest {}",
                model.lambda,
                model.status.as_str(),
                trained.outcome.iterations,
                trained.outcome.gradient_norm,
                manifest.display()
            );
            Ok(())
        }
        Command::EslSim {
            common,
            model,
            corpus,
            split,
            seed,
            hard,
            output,
        } => {
            let mut config = load_config(&common)?;
            set_opt(&mut config, "split_seed", &seed)?;
            if let Some(s) = split {
                set(&mut config, "similarity_split", if s == Split::Train { "train" } else { "heldout" })?;
            }
            if hard {
                set(&mut config, "hard_confusion", "true")?;
            }
            set(&mut config, "corpus", &corpus.display().to_string())?;
            let config = validated(config)?;
            let model = read_model(&model)?;
            let corpus = read_corpus(&corpus)?;
            let (train, heldout) = split_corpus(&corpus, config.train_fraction, config.split_seed)?;
            let docs = match config.similarity_split {
                SimilaritySplit::Train => &train,
                SimilaritySplit::Heldout => &heldout,
            };
            let matrix = pipeline::esl_similarity(&model, docs, config.hard_confusion)?;
            let json = output.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
            let text = if json { matrix.to_json() + "\n" } else { matrix.to_csv() };
            emit(output.as_deref(), &text, &Echo::new("esl-sim", Some(&config)))
        }
        Command::WalsSim {
            common,
            wals,
            mode,
            corpus,
            languages,
            output,
        } => {
            let config = validated(load_config(&common)?)?;
            let langs = languages_for(&corpus, &languages)?;
            let db = read_wals(&wals, langs.as_deref(), &config)?;
            let mode = SharingMode::from(mode);
            let matrix = wals_similarity::<f64>(&db, mode)?;
            let json = output.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
            let text = if json { matrix.to_json() + "\n" } else { matrix.to_csv() };
            let echo = Echo::new("wals-sim", Some(&config))
                .with("wals", wals.display())
                .with("mode", mode.as_str());
            emit(output.as_deref(), &text, &echo)
        }
        Command::WalsConvert {
            input,
            language_column,
            categories,
            output,
        } => {
            require(&input, "input table")?;
            let mut map = std::collections::HashMap::new();
            if let Some(path) = &categories {
                require(path, "category table")?;
                let mut rdr = csv::Reader::from_path(path).map_err(|e| Failure::Usage(e.into()))?;
                for record in rdr.records() {
                    let record = record.map_err(|e| Failure::Usage(e.into()))?;
                    if let (Some(id), Some(cat)) = (record.get(0), record.get(1)) {
                        map.insert(id.trim().to_string(), cat.trim().to_string());
                    }
                }
            }
            let long = wide_to_long(File::open(&input)?, &language_column, &map)?;
            let echo = Echo::new("wals-convert", None)
                .with("input", input.display())
                .with("language_column", &language_column)
                .with(
                    "categories",
                    categories.as_ref().map_or("chapter ranges".to_string(), |p| p.display().to_string()),
                );
            emit(output.as_deref(), &long, &echo)
        }
        Command::Cluster { matrix, out, output } => {
            let m = read_matrix(&matrix)?;
            let tree = pipeline::cluster(&m)?;
            let (text, format) = match out {
                TreeFormat::Newick => (tree.to_newick() + "\n", "newick"),
                TreeFormat::Json => (tree.to_json() + "\n", "json"),
                TreeFormat::Svg => (tree.to_svg(), "svg"),
            };
            let echo = Echo::new("cluster", None)
                .with("matrix", matrix.display())
                .with("out", format)
                .with("linkage", "ward");
            emit(output.as_deref(), &text, &echo)
        }
        Command::Predict {
            common,
            wals,
            matrix,
            tree,
            target,
            method,
            k,
            features,
            format,
            output,
        } => {
            let config = validated(load_config(&common)?)?;
            let m = read_matrix(&matrix)?;
            let db = read_wals(&wals, Some(m.languages()), &config)?;
            let feature_idx: Vec<usize> = match &features {
                Some(list) => split_list(list)
                    .iter()
                    .map(|id| {
                        db.feature_index(id)
                            .ok_or_else(|| Failure::Domain(anyhow::anyhow!("unknown feature {id}")))
                    })
                    .collect::<Result<_, _>>()?,
                None => (0..db.n_features()).collect(),
            };
            let t = db
                .language_index(&target)
                .ok_or_else(|| Failure::Domain(anyhow::anyhow!("unknown target language {target}")))?;
            let hidden = db.hide_language(t);
            let result = match parse_method(&method, k)? {
                PredictMethod::Knn(k) => knn_predict(&hidden, &m, &target, &feature_idx, k)?,
                PredictMethod::Tree => {
                    let tree = match &tree {
                        Some(path) => read_tree(path)?,
                        None => pipeline::cluster(&m)?,
                    };
                    tree_predict(&hidden, &tree, &target, &feature_idx)?
                }
            };
            let text = match format {
                TableFormat::Csv => result.to_csv()?,
                TableFormat::Json => result.to_json() + "\n",
            };
            let echo = Echo::new("predict", Some(&config))
                .with("wals", wals.display())
                .with("matrix", matrix.display())
                .with("target", &target)
                .with("method", &method)
                .with("k", k)
                .with("features", features.as_deref().unwrap_or("all"));
            emit(output.as_deref(), &text, &echo)
        }
        Command::Evaluate {
            common,
            wals,
            similarity,
            matrix,
            method,
            k,
            folds,
            seed,
            keep_fraction,
            corpus,
            output,
        } => {
            let mut config = load_config(&common)?;
            set_opt(&mut config, "folds", &folds)?;
            set_opt(&mut config, "fold_seed", &seed)?;
            set_opt(&mut config, "keep_fraction", &keep_fraction)?;
            let config = validated(config)?;
            let method = parse_method(&method, k)?;
            let (source, languages) = match similarity {
                Source::Esl => {
                    let path = matrix
                        .as_ref()
                        .ok_or_else(|| Failure::usage("--similarity esl needs --matrix"))?;
                    let m = read_matrix(path)?;
                    let langs = m.languages().to_vec();
                    (SimilaritySource::Esl(m), Some(langs))
                }
                Source::SharedAll => (SimilaritySource::Wals(SharingMode::SharedAll), languages_for(&corpus, &None)?),
                Source::SharedPairwise => (
                    SimilaritySource::Wals(SharingMode::SharedPairwise),
                    languages_for(&corpus, &None)?,
                ),
            };
            let db = read_wals(&wals, languages.as_deref(), &config)?;
            let spec = FoldSpec {
                folds: config.folds,
                seed: config.fold_seed,
                keep_fraction: config.keep_fraction,
            };
            let mut report = run_folds(&db, &source, method, &spec)?;
            pipeline::echo_config(&mut report, &config);
            report.config.insert("command".into(), "evaluate".into());
            report.config.insert("wals".into(), wals.display().to_string());
            println!("{}\t{:.4}", report.label, report.mean_accuracy);
            let echo = Echo::new("evaluate", Some(&config)).with("method", method.label());
            match output {
                Some(path) => emit(Some(&path), &(report.to_json() + "\n"), &echo),
                None => Ok(()),
            }
        }
        Command::Correlate { a, b, output } => {
            let ma = read_matrix(&a)?;
            let mb = read_matrix(&b)?;
            let r = correlate(&ma, &mb)?;
            println!("{r}");
            if let Some(path) = output {
                let json = serde_json::json!({
                    "a": a.display().to_string(),
                    "b": b.display().to_string(),
                    "languages": ma.len(),
                    "pairs": ma.len() * (ma.len() - 1) / 2,
                    "pearson": r,
                });
                let echo = Echo::new("correlate", None).with("a", a.display()).with("b", b.display());
                emit(Some(&path), &(serde_json::to_string_pretty(&json).expect("json") + "\n"), &echo)?;
            }
            Ok(())
        }
        Command::Curve {
            common,
            wals,
            fractions,
            mode,
            method,
            folds,
            seed,
            esl_matrix,
            corpus,
            output,
        } => {
            let mut config = load_config(&common)?;
            set_opt(&mut config, "curve_fractions", &fractions)?;
            set_opt(&mut config, "folds", &folds)?;
            set_opt(&mut config, "fold_seed", &seed)?;
            let config = validated(config)?;
            let method = parse_method(&method, 3)?;
            let esl = esl_matrix.as_deref().map(read_matrix).transpose()?;
            let languages = match &esl {
                Some(m) => Some(m.languages().to_vec()),
                None => languages_for(&corpus, &None)?,
            };
            let db = read_wals(&wals, languages.as_deref(), &config)?;
            let spec = FoldSpec {
                folds: config.folds,
                seed: config.fold_seed,
                keep_fraction: config.keep_fraction,
            };
            let curve = learning_curve(&db, &config.curve_fractions, mode.into(), method, &spec, esl.as_ref())?;
            let echo = Echo::new("curve", Some(&config))
                .with("mode", SharingMode::from(mode).as_str())
                .with("method", method.label());
            if let Some(r) = curve.esl_reference {
                eprintln!("ESL reference accuracy: {r:.4}");
            }
            emit(output.as_deref(), &curve.to_csv(), &echo)
        }
        Command::Pipeline {
            common,
            corpus,
            wals,
            out_dir,
        } => {
            let mut config = load_config(&common)?;
            set_opt(&mut config, "corpus", &corpus.map(|p| p.display().to_string()))?;
            set_opt(&mut config, "wals", &wals.map(|p| p.display().to_string()))?;
            set_opt(&mut config, "out_dir", &out_dir.map(|p| p.display().to_string()))?;
            let config = validated(config)?;
            let corpus = config
                .corpus
                .clone()
                .ok_or_else(|| Failure::usage("pipeline needs --corpus or corpus = ... in the config"))?;
            let wals = config
                .wals
                .clone()
                .ok_or_else(|| Failure::usage("pipeline needs --wals or wals = ... in the config"))?;
            require(&corpus, "corpus")?;
            require(&wals, "WALS table")?;
            let summary = pipeline::run_pipeline(&config)?;
            println!("lambda\t{}\noptimizer\t{}", summary.lambda, summary.optimizer_status);
            for (k, v) in &summary.correlations {
                println!("{k}\t{v:.4}");
            }
            for row in &summary.results {
                println!("{}\t{:.4}\t{:.4}", row.label, row.mean_accuracy, row.stddev);
            }
            println!("manifest\t{}", summary.manifest.display());
            Ok(())
        }
        Command::Synth {
            out_dir,
            seed,
            blocks,
            languages_per_block,
            documents,
            sentences,
            wals_features,
        } => {
            let esl_cfg = SynthEslConfig {
                blocks,
                languages_per_block,
                documents_per_language: documents,
                sentences_per_document: sentences,
                seed,
                ..SynthEslConfig::default()
            };
            let esl = synth_esl(&esl_cfg)?;
            let wals_cfg = SynthWalsConfig {
                features: wals_features,
                seed: seed.wrapping_add(1),
                ..SynthWalsConfig::default()
            };
            // typology evolves along the Ward tree of the planted similarities
            let planted_tree = pipeline::cluster(&esl.planted)?;
            let wals = synth_wals_on_tree(&planted_tree, &wals_cfg)?;
            let mut run = RunWriter::new(&out_dir);
            run.add("corpus.conll", esl.corpus.to_text());
            run.add("wals.csv", wals.database.to_long_csv());
            run.add("planted_similarity.csv", esl.planted.to_csv());
            run.add("planted_wals_tree.nwk", wals.tree.to_newick() + "\n");
            run.add(
                "config.txt",
                Echo::new("synth", None)
                    .with("seed", seed)
                    .with("blocks", blocks)
                    .with("languages_per_block", languages_per_block)
                    .with("documents", documents)
                    .with("sentences", sentences)
                    .with("wals_features", wals_features)
                    .text,
            );
            let manifest = run.finish()?;
            eprintln!("wrote {}", manifest.display());
            Ok(())
        }
    }
}
