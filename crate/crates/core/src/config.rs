//! Plain `key = value` configuration shared by every pipeline stage.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::features::ExtractionConfig;
use crate::optim::Method;
use crate::wals::PreprocessConfig;

/// Splits `key = value` lines. Blank lines and `#` comments are skipped.
pub fn key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Documents used to estimate the confusion similarities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilaritySplit {
    Train,
    Heldout,
}

impl SimilaritySplit {
    pub fn as_str(self) -> &'static str {
        match self {
            SimilaritySplit::Train => "train",
            SimilaritySplit::Heldout => "heldout",
        }
    }
}

impl std::str::FromStr for SimilaritySplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SimilaritySplit::Train),
            "heldout" => Ok(SimilaritySplit::Heldout),
            other => Err(Error::invalid(format!("unknown similarity split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub wals: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub lambda: f64,
    /// When non-empty, lambda is chosen on the development half of the
    /// heldout split instead of taken from `lambda`.
    pub lambda_grid: Vec<f64>,
    pub extraction: ExtractionConfig,
    pub train_fraction: f64,
    /// Share of the heldout block used for development.
    pub dev_fraction: f64,
    pub split_seed: u64,
    pub fold_seed: u64,
    pub folds: usize,
    pub keep_fraction: f64,
    pub k_list: Vec<usize>,
    pub curve_fractions: Vec<f64>,
    pub optimizer: Method,
    pub tolerance: f64,
    pub max_iters: usize,
    pub similarity_split: SimilaritySplit,
    pub hard_confusion: bool,
    pub wals_preprocess: PreprocessConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: None,
            wals: None,
            out_dir: PathBuf::from("run"),
            lambda: 1.0,
            lambda_grid: Vec::new(),
            extraction: ExtractionConfig::default(),
            train_fraction: 0.7,
            dev_fraction: 0.5,
            split_seed: 7,
            fold_seed: 1,
            folds: 100,
            keep_fraction: 0.9,
            k_list: vec![1, 3],
            curve_fractions: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            optimizer: Method::Lbfgs,
            tolerance: 1e-6,
            max_iters: 500,
            similarity_split: SimilaritySplit::Train,
            hard_confusion: false,
            wals_preprocess: PreprocessConfig::default(),
        }
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::format(format!("{key}: cannot parse {s:?}")))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::format(format!("{key}: cannot parse {value:?}")))
}

impl PipelineConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for (key, value) in key_values(text)? {
            config.set(&key, &value)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(rest) = key.strip_prefix("extraction.") {
            return self.extraction.set(rest, value);
        }
        let path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "corpus" => self.corpus = path(value),
            "wals" => self.wals = path(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "lambda" => self.lambda = parse_one(key, value)?,
            "lambda_grid" => self.lambda_grid = parse_list(key, value)?,
            "train_fraction" => self.train_fraction = parse_one(key, value)?,
            "dev_fraction" => self.dev_fraction = parse_one(key, value)?,
            "split_seed" => self.split_seed = parse_one(key, value)?,
            "fold_seed" => self.fold_seed = parse_one(key, value)?,
            "folds" => self.folds = parse_one(key, value)?,
            "keep_fraction" => self.keep_fraction = parse_one(key, value)?,
            "k_list" => self.k_list = parse_list(key, value)?,
            "curve_fractions" => self.curve_fractions = parse_list(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "tolerance" => self.tolerance = parse_one(key, value)?,
            "max_iters" => self.max_iters = parse_one(key, value)?,
            "similarity_split" => self.similarity_split = value.parse()?,
            "hard_confusion" => self.hard_confusion = parse_one(key, value)?,
            "wals.excluded_category" => self.wals_preprocess.excluded_category = value.to_string(),
            "wals.min_languages" => self.wals_preprocess.min_languages = parse_one(key, value)?,
            other => return Err(Error::format(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let ratio = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} not in (0,1)")))
            }
        };
        ratio("train_fraction", self.train_fraction)?;
        ratio("dev_fraction", self.dev_fraction)?;
        ratio("keep_fraction", self.keep_fraction)?;
        for &f in &self.curve_fractions {
            ratio("curve fraction", f)?;
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda = {} must be non-negative", self.lambda)));
        }
        if self.lambda_grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::invalid("lambda grid entries must be positive"));
        }
        if self.folds == 0 {
            return Err(Error::invalid("folds must be at least 1"));
        }
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(Error::invalid("k_list needs positive entries"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        Ok(())
    }

    /// Every effective setting, in a fixed order.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut out = String::new();
        let _ = writeln!(out, "corpus = {}", path(&self.corpus));
        let _ = writeln!(out, "wals = {}", path(&self.wals));
        let _ = writeln!(out, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(out, "lambda = {}", self.lambda);
        let _ = writeln!(out, "lambda_grid = {}", join(&self.lambda_grid));
        let _ = writeln!(out, "train_fraction = {}", self.train_fraction);
        let _ = writeln!(out, "dev_fraction = {}", self.dev_fraction);
        let _ = writeln!(out, "split_seed = {}", self.split_seed);
        let _ = writeln!(out, "fold_seed = {}", self.fold_seed);
        let _ = writeln!(out, "folds = {}", self.folds);
        let _ = writeln!(out, "keep_fraction = {}", self.keep_fraction);
        let _ = writeln!(out, "k_list = {}", join(&self.k_list));
        let _ = writeln!(out, "curve_fractions = {}", join(&self.curve_fractions));
        let method = match self.optimizer {
            Method::Lbfgs => "lbfgs",
            Method::GradientAscent => "gradient",
        };
        let _ = writeln!(out, "optimizer = {method}");
        let _ = writeln!(out, "tolerance = {}", self.tolerance);
        let _ = writeln!(out, "max_iters = {}", self.max_iters);
        let _ = writeln!(out, "similarity_split = {}", self.similarity_split.as_str());
        let _ = writeln!(out, "hard_confusion = {}", self.hard_confusion);
        let _ = writeln!(out, "wals.excluded_category = {}", self.wals_preprocess.excluded_category);
        let _ = writeln!(out, "wals.min_languages = {}", self.wals_preprocess.min_languages);
        for line in self.extraction.to_text().lines() {
            let _ = writeln!(out, "extraction.{line}");
        }
        out
    }
}
