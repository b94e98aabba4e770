//! Random-fold typology reconstruction benchmark, matrix correlation and
//! the feature-budget learning curve.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::ward_cluster;
use crate::predict::{knn_predict, tree_predict, PredictionResult};
use crate::scalar::{format_significant, Scalar};
use crate::similarity::SimilarityMatrix;
use crate::wals::{mask_features, wals_similarity_on, SharingMode, WalsDatabase};

/// Where language similarities come from during evaluation.
#[derive(Debug, Clone)]
pub enum SimilaritySource<T> {
    /// A fixed matrix, independent of the fold's feature mask.
    Esl(SimilarityMatrix<T>),
    /// Recomputed from each fold's construction features.
    Wals(SharingMode),
}

impl<T> SimilaritySource<T> {
    pub fn label(&self) -> String {
        match self {
            SimilaritySource::Esl(_) => "ESL".into(),
            SimilaritySource::Wals(SharingMode::SharedAll) => "WALS-shared-all".into(),
            SimilaritySource::Wals(SharingMode::SharedPairwise) => "WALS-shared-pairwise".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictMethod {
    Knn(usize),
    Tree,
}

impl PredictMethod {
    pub fn label(self) -> String {
        match self {
            PredictMethod::Knn(1) => "NN".into(),
            PredictMethod::Knn(k) => format!("{k}NN"),
            PredictMethod::Tree => "Tree".into(),
        }
    }
}

impl std::str::FromStr for PredictMethod {
    type Err = Error;

    /// Accepts `nn`, `tree`, or `<k>nn`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "tree" => return Ok(PredictMethod::Tree),
            "nn" => return Ok(PredictMethod::Knn(1)),
            _ => {}
        }
        lower
            .strip_suffix("nn")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k > 0)
            .map(PredictMethod::Knn)
            .ok_or_else(|| Error::invalid(format!("unknown prediction method {s:?}")))
    }
}

/// Fraction of predictions equal to gold.
pub fn accuracy(predicted: &[usize], gold: &[usize]) -> Result<f64> {
    if predicted.len() != gold.len() {
        return Err(Error::invalid("prediction and gold lengths differ"));
    }
    if predicted.is_empty() {
        return Err(Error::EmptyComparison);
    }
    let correct = predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(correct as f64 / predicted.len() as f64)
}

/// Pearson correlation of the upper-triangle entries. `b` is aligned to
/// `a`'s language order first.
pub fn correlate<T: Scalar>(a: &SimilarityMatrix<T>, b: &SimilarityMatrix<T>) -> Result<f64> {
    let b = b.reorder(a.languages())?;
    let n = a.len();
    if n < 3 {
        return Err(Error::invalid(format!("correlation needs at least 3 languages, got {n}")));
    }
    let mut xs = Vec::with_capacity(n * (n - 1) / 2);
    let mut ys = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            xs.push(a.get(i, j).as_f64());
            ys.push(b.get(i, j).as_f64());
        }
    }
    pearson(&xs, &ys)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("pearson needs two equal-length samples of size >= 2"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numeric("zero variance in correlation input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    pub language: String,
    pub evaluated: Vec<String>,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub seed: u64,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub targets: Vec<TargetResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// e.g. `WALS-shared-pairwise/Tree`.
    pub label: String,
    pub source: String,
    pub method: String,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub folds: Vec<FoldResult>,
    pub config: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn stddev(&self) -> f64 {
        stddev(&self.fold_accuracies)
    }
}

/// Population standard deviation.
fn stddev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone)]
pub struct FoldSpec {
    pub folds: usize,
    /// Fold `i` masks with seed `seed + i`.
    pub seed: u64,
    pub keep_fraction: f64,
}

impl Default for FoldSpec {
    fn default() -> Self {
        FoldSpec {
            folds: 100,
            seed: 1,
            keep_fraction: 0.9,
        }
    }
}

/// Features scored for `target` in one fold.
pub fn evaluation_features(
    db: &WalsDatabase,
    target: usize,
    heldout: &[usize],
    kept: &[usize],
    source_mode: Option<SharingMode>,
) -> Vec<usize> {
    let mut set: Vec<usize> = heldout
        .iter()
        .copied()
        .filter(|&f| db.is_documented(target, f))
        .collect();
    if source_mode == Some(SharingMode::SharedAll) {
        let full = db.fully_documented();
        let inventory: Vec<usize> = kept.iter().copied().filter(|f| full.contains(f)).collect();
        set.extend(
            (0..db.n_features())
                .filter(|f| !inventory.contains(f) && !heldout.contains(f))
                .filter(|&f| db.is_documented(target, f)),
        );
        set.sort_unstable();
    }
    set
}

fn predict_with<T: Scalar>(
    db: &WalsDatabase,
    method: PredictMethod,
    matrix: &SimilarityMatrix<T>,
    tree: Option<&crate::hierarchy::ClusterTree<T>>,
    target: &str,
    features: &[usize],
) -> Result<PredictionResult> {
    match method {
        PredictMethod::Knn(k) => knn_predict(db, matrix, target, features, k),
        PredictMethod::Tree => tree_predict(db, tree.expect("tree built"), target, features),
    }
}

fn run_fold<T: Scalar>(
    db: &WalsDatabase,
    source: &SimilaritySource<T>,
    method: PredictMethod,
    seed: u64,
    keep_fraction: f64,
) -> Result<FoldResult> {
    let mask = mask_features(db, keep_fraction, seed)?;
    let (matrix, mode) = match source {
        SimilaritySource::Esl(m) => (m.clone(), None),
        SimilaritySource::Wals(mode) => (wals_similarity_on(db, *mode, &mask.kept)?, Some(*mode)),
    };
    let tree = match method {
        PredictMethod::Tree => Some(ward_cluster(&matrix.to_distances())?),
        PredictMethod::Knn(_) => None,
    };
    let mut targets = Vec::with_capacity(matrix.len());
    for language in matrix.languages() {
        let t = db
            .language_index(language)
            .ok_or_else(|| Error::invalid(format!("language {language} missing from the database")))?;
        let features = evaluation_features(db, t, &mask.heldout, &mask.kept, mode);
        let hidden = db.hide_language(t);
        let result = predict_with(&hidden, method, &matrix, tree.as_ref(), language, &features)?;
        let mut correct = 0;
        let mut total = 0;
        let mut evaluated = Vec::new();
        for p in &result.predictions {
            let Some(v) = p.value else { continue };
            total += 1;
            correct += usize::from(db.value(t, p.feature) == Some(v));
            evaluated.push(p.feature_id.clone());
        }
        targets.push(TargetResult {
            language: language.clone(),
            evaluated,
            correct,
            total,
        });
    }
    let correct: usize = targets.iter().map(|t| t.correct).sum();
    let total: usize = targets.iter().map(|t| t.total).sum();
    if total == 0 {
        return Err(Error::EmptyComparison);
    }
    Ok(FoldResult {
        seed,
        accuracy: correct as f64 / total as f64,
        correct,
        total,
        targets,
    })
}

/// Averages micro-accuracy over independently masked folds.
pub fn run_folds<T: Scalar>(
    db: &WalsDatabase,
    source: &SimilaritySource<T>,
    method: PredictMethod,
    spec: &FoldSpec,
) -> Result<EvalReport> {
    if spec.folds == 0 {
        return Err(Error::invalid("folds must be at least 1"));
    }
    let folds = (0..spec.folds as u64)
        .into_par_iter()
        .map(|i| run_fold(db, source, method, spec.seed + i, spec.keep_fraction))
        .collect::<Result<Vec<_>>>()?;
    let fold_accuracies: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    let mut config = BTreeMap::new();
    config.insert("folds".to_string(), spec.folds.to_string());
    config.insert("seed".to_string(), spec.seed.to_string());
    config.insert("keep_fraction".to_string(), spec.keep_fraction.to_string());
    config.insert("languages".to_string(), db.n_languages().to_string());
    config.insert("features".to_string(), db.n_features().to_string());
    config.insert("scalar".to_string(), T::NAME.to_string());
    Ok(EvalReport {
        label: format!("{}/{}", source.label(), method.label()),
        source: source.label(),
        method: method.label(),
        mean_accuracy,
        fold_accuracies,
        folds,
        config,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub mean_accuracy: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub label: String,
    pub points: Vec<CurvePoint>,
    /// Fraction-independent ESL accuracy for overlay, when available.
    pub esl_reference: Option<f64>,
}

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fraction,mean_accuracy,stddev\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{}",
                p.fraction,
                format_significant(p.mean_accuracy, 9),
                format_significant(p.stddev, 9)
            );
        }
        out
    }
}

/// WALS accuracy as a function of the construction-feature fraction.
/// `esl` adds a constant reference line scored at `spec.keep_fraction`.
pub fn learning_curve<T: Scalar>(
    db: &WalsDatabase,
    fractions: &[f64],
    mode: SharingMode,
    method: PredictMethod,
    spec: &FoldSpec,
    esl: Option<&SimilarityMatrix<T>>,
) -> Result<LearningCurve> {
    if fractions.is_empty() {
        return Err(Error::invalid("no curve fractions"));
    }
    let source = SimilaritySource::<T>::Wals(mode);
    let mut points = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let report = run_folds(
            db,
            &source,
            method,
            &FoldSpec {
                keep_fraction: fraction,
                ..spec.clone()
            },
        )?;
        points.push(CurvePoint {
            fraction,
            mean_accuracy: report.mean_accuracy,
            stddev: report.stddev(),
        });
    }
    let esl_reference = match esl {
        Some(matrix) => Some(run_folds(db, &SimilaritySource::Esl(matrix.clone()), method, spec)?.mean_accuracy),
        None => None,
    };
    Ok(LearningCurve {
        label: format!("{}/{}", source.label(), method.label()),
        points,
        esl_reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wals::WalsFeature;

    fn feature(id: usize) -> WalsFeature {
        WalsFeature {
            id: format!("{}A", id + 1),
            name: format!("f{id}"),
            category: "Syntax".into(),
            values: vec!["x".into(), "y".into(), "z".into()],
        }
    }

    fn uniform_db(n_lang: usize, n_feat: usize) -> WalsDatabase {
        let langs = (0..n_lang).map(|l| format!("L{l}")).collect();
        let feats = (0..n_feat).map(feature).collect();
        let cells = (0..n_lang * n_feat).map(|i| Some((i % n_feat) % 3)).collect();
        WalsDatabase::new(langs, feats, cells).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2, 0], &[0, 1, 2, 1]).unwrap(), 0.75);
        assert_eq!(accuracy(&[1, 1], &[1, 1]).unwrap(), 1.0);
        assert!(matches!(accuracy(&[], &[]), Err(Error::EmptyComparison)));
    }

    #[test]
    fn correlation_examples() {
        let langs: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
        let vals = [[1.0, 0.2, 0.5, 0.1], [0.2, 1.0, 0.3, 0.7], [0.5, 0.3, 1.0, 0.4], [0.1, 0.7, 0.4, 1.0]];
        let a = SimilarityMatrix::new(langs.clone(), vals.iter().map(|r| r.to_vec()).collect()).unwrap();
        assert!((correlate(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = a.map_off_diagonal(|x| 0.5 * x + 0.1).unwrap();
        assert!((correlate(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let flat = a.map_off_diagonal(|_| 0.3).unwrap();
        assert!(correlate(&a, &flat).is_err());
    }

    #[test]
    fn identical_languages_score_perfectly() {
        let db = uniform_db(5, 20);
        let spec = FoldSpec {
            folds: 5,
            seed: 3,
            keep_fraction: 0.9,
        };
        for mode in [SharingMode::SharedAll, SharingMode::SharedPairwise] {
            for method in [PredictMethod::Knn(1), PredictMethod::Knn(3), PredictMethod::Tree] {
                let r = run_folds::<f64>(&db, &SimilaritySource::Wals(mode), method, &spec).unwrap();
                assert_eq!(r.mean_accuracy, 1.0);
                assert_eq!(r.folds.len(), 5);
            }
        }
    }

    #[test]
    fn heldout_sets_and_determinism() {
        let db = uniform_db(4, 20);
        let spec = FoldSpec {
            folds: 3,
            seed: 10,
            keep_fraction: 0.9,
        };
        let src = SimilaritySource::<f64>::Wals(SharingMode::SharedPairwise);
        let r1 = run_folds(&db, &src, PredictMethod::Tree, &spec).unwrap();
        let r2 = run_folds(&db, &src, PredictMethod::Tree, &spec).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.folds[1].seed, 11);
        // two heldout features per target, all documented
        assert!(r1.folds.iter().all(|f| f.total == 4 * 2));
        let mean = r1.fold_accuracies.iter().sum::<f64>() / 3.0;
        assert!((mean - r1.mean_accuracy).abs() < 1e-12);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("nn".parse::<PredictMethod>().unwrap(), PredictMethod::Knn(1));
        assert_eq!("3NN".parse::<PredictMethod>().unwrap(), PredictMethod::Knn(3));
        assert_eq!("tree".parse::<PredictMethod>().unwrap(), PredictMethod::Tree);
        assert!("0nn".parse::<PredictMethod>().is_err());
        assert_eq!(PredictMethod::Knn(3).label(), "3NN");
    }

    #[test]
    fn curve_csv_layout() {
        let db = uniform_db(4, 20);
        let spec = FoldSpec {
            folds: 2,
            seed: 1,
            keep_fraction: 0.9,
        };
        let c = learning_curve::<f64>(&db, &[0.5, 0.9], SharingMode::SharedPairwise, PredictMethod::Tree, &spec, None)
            .unwrap();
        assert_eq!(c.to_csv(), "fraction,mean_accuracy,stddev\n0.5,1,0\n0.9,1,0\n");
    }
}
