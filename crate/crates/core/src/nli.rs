//! Multinomial log-linear native-language classifier.
//!
//! `p(y | x) ∝ exp(Σ_j θ[j, y] · x_j)` with an L2 penalty `λ‖θ‖²` on the
//! log-likelihood. Weights are stored feature-major: `θ[j, y]` lives at
//! `j * |Y| + y`.

use std::io::BufRead;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::{extract_features, ExtractionConfig, FeatureIndex, SparseFeatureVector};
use crate::optim::{maximize, OptConfig, OptStatus};
use crate::scalar::Scalar;

/// One training or evaluation example: language index plus sparse,
/// id-sorted feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVector<T> {
    pub label: usize,
    pub features: Vec<(usize, T)>,
}

/// Scores `θ_y · x` for every language.
pub fn scores<T: Scalar>(theta: &[T], n_languages: usize, features: &[(usize, T)]) -> Vec<T> {
    let mut out = vec![T::zero(); n_languages];
    for &(j, v) in features {
        let row = &theta[j * n_languages..(j + 1) * n_languages];
        for (o, &w) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    out
}

/// In-place softmax with max subtraction; returns the log normalizer.
pub fn softmax_in_place<T: Scalar>(scores: &mut [T]) -> T {
    let max = scores.iter().fold(T::neg_infinity(), |m, &s| m.max(s));
    let mut total = T::zero();
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
    max + total.ln()
}

/// The penalized log-likelihood and its gradient over a fixed dataset.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a, T> {
    pub n_features: usize,
    pub n_languages: usize,
    pub lambda: T,
    pub data: &'a [LabeledVector<T>],
}

impl<'a, T: Scalar> Objective<'a, T> {
    pub fn new(n_features: usize, n_languages: usize, lambda: T, data: &'a [LabeledVector<T>]) -> Self {
        Objective {
            n_features,
            n_languages,
            lambda,
            data,
        }
    }

    pub fn dimension(&self) -> usize {
        self.n_features * self.n_languages
    }

    /// Per-document log-likelihood and posterior, in data order.
    fn document_terms(&self, theta: &[T]) -> Vec<(T, Vec<T>)> {
        self.data
            .par_iter()
            .map(|doc| {
                let mut s = scores(theta, self.n_languages, &doc.features);
                let gold = s[doc.label];
                let log_z = softmax_in_place(&mut s);
                (gold - log_z, s)
            })
            .collect()
    }

    fn penalty(&self, theta: &[T]) -> T {
        self.lambda * theta.iter().fold(T::zero(), |acc, &w| acc + w * w)
    }

    pub fn value(&self, theta: &[T]) -> T {
        let ll = self
            .document_terms(theta)
            .iter()
            .fold(T::zero(), |acc, (l, _)| acc + *l);
        ll - self.penalty(theta)
    }

    pub fn gradient(&self, theta: &[T]) -> Vec<T> {
        self.value_and_gradient(theta).1
    }

    pub fn value_and_gradient(&self, theta: &[T]) -> (T, Vec<T>) {
        let l = self.n_languages;
        let terms = self.document_terms(theta);
        let two_lambda = self.lambda + self.lambda;
        let mut grad: Vec<T> = theta.iter().map(|&w| -two_lambda * w).collect();
        let mut ll = T::zero();
        for (doc, (log_p, post)) in self.data.iter().zip(&terms) {
            ll += *log_p;
            for &(j, v) in &doc.features {
                let row = &mut grad[j * l..(j + 1) * l];
                for (y, g) in row.iter_mut().enumerate() {
                    let indicator = if y == doc.label { T::one() } else { T::zero() };
                    *g += v * (indicator - post[y]);
                }
            }
        }
        (ll - self.penalty(theta), grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<T> {
    pub probs: Vec<T>,
}

impl<T: Scalar> Posterior<T> {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NliModel<T> {
    pub theta: Vec<T>,
    pub lambda: T,
    pub feature_index: FeatureIndex,
    pub languages: Vec<String>,
    pub extraction: ExtractionConfig,
    pub status: OptStatus,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: NliModel<T>,
    /// Objective value per accepted iterate.
    pub trace: Vec<T>,
    pub iterations: usize,
    pub gradient_norm: T,
}

#[derive(Debug, Clone)]
pub struct TrainConfig<T> {
    pub lambda: T,
    pub optimizer: OptConfig<T>,
    /// Permit `lambda = 0`.
    pub allow_unregularized: bool,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        TrainConfig {
            lambda: T::one(),
            optimizer: OptConfig::default(),
            allow_unregularized: false,
        }
    }
}

impl<T: Scalar> NliModel<T> {
    pub fn n_languages(&self) -> usize {
        self.languages.len()
    }

    pub fn weight(&self, feature: usize, language: usize) -> T {
        self.theta[feature * self.languages.len() + language]
    }

    /// Projects raw counts through the frozen index (unseen ids dropped).
    pub fn project(&self, features: &SparseFeatureVector, tokens: usize) -> Vec<(usize, T)> {
        let norm = self.extraction.normalize.then_some(tokens);
        self.feature_index.project(features, norm)
    }

    pub fn posterior_dense(&self, features: &[(usize, T)]) -> Posterior<T> {
        let mut s = scores(&self.theta, self.languages.len(), features);
        softmax_in_place(&mut s);
        Posterior { probs: s }
    }

    pub fn posterior(&self, features: &SparseFeatureVector, tokens: usize) -> Posterior<T> {
        self.posterior_dense(&self.project(features, tokens))
    }

    pub fn objective(&self, data: &[LabeledVector<T>]) -> T {
        Objective::new(self.feature_index.len(), self.languages.len(), self.lambda, data)
            .value(&self.theta)
    }

    pub fn gradient(&self, data: &[LabeledVector<T>]) -> Vec<T> {
        Objective::new(self.feature_index.len(), self.languages.len(), self.lambda, data)
            .gradient(&self.theta)
    }

    pub fn weight_norm(&self) -> T {
        self.theta.iter().fold(T::zero(), |a, &w| a + w * w).sqrt()
    }

    /// Text container: header, languages, extraction config, feature index,
    /// then one weight row per feature. Floats use shortest round-trip
    /// formatting, so reading back is bit-exact.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("esl-typology-nli-model 1\n");
        out.push_str(&format!("scalar {}\n", T::NAME));
        out.push_str(&format!("lambda {}\n", self.lambda));
        out.push_str(&format!("status {}\n", self.status.as_str()));
        out.push_str(&format!("languages {}\n", self.languages.len()));
        for l in &self.languages {
            out.push_str(l);
            out.push('\n');
        }
        let extraction = self.extraction.to_text();
        out.push_str(&format!("extraction {}\n", extraction.lines().count()));
        out.push_str(&extraction);
        out.push_str(&format!("features {}\n", self.feature_index.len()));
        for id in self.feature_index.iter() {
            out.push_str(&format!("{id}\n"));
        }
        out.push_str("theta\n");
        let l = self.languages.len();
        for row in self.theta.chunks(l.max(1)) {
            let cells: Vec<String> = row.iter().map(|w| w.to_string()).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(line))) => Ok((n + 1, line)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::format(format!("model truncated, expected {what}"))),
            }
        };
        let bad = |line: usize, message: String| Error::Parse { line, message };
        let keyed = |line: (usize, String), key: &str| -> Result<(usize, String)> {
            let (n, text) = line;
            let rest = text
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| bad(n, format!("expected `{key} ...`")))?
                .to_string();
            Ok((n, rest))
        };
        let (n, header) = next("header")?;
        if header != "esl-typology-nli-model 1" {
            return Err(bad(n, format!("unsupported model header {header:?}")));
        }
        let (n, scalar) = keyed(next("scalar")?, "scalar")?;
        if scalar != T::NAME {
            return Err(bad(n, format!("model stores {scalar}, reader expects {}", T::NAME)));
        }
        let (n, lambda) = keyed(next("lambda")?, "lambda")?;
        let lambda: T = lambda.parse().map_err(|_| bad(n, "bad lambda".into()))?;
        let (_, status) = keyed(next("status")?, "status")?;
        let status: OptStatus = status.parse()?;
        let count = |(n, s): (usize, String)| -> Result<usize> {
            s.parse().map_err(|_| bad(n, format!("bad count {s:?}")))
        };
        let n_lang = count(keyed(next("languages")?, "languages")?)?;
        let mut languages = Vec::with_capacity(n_lang);
        for _ in 0..n_lang {
            languages.push(next("language")?.1);
        }
        let n_ext = count(keyed(next("extraction")?, "extraction")?)?;
        let mut ext = String::new();
        for _ in 0..n_ext {
            ext.push_str(&next("extraction line")?.1);
            ext.push('\n');
        }
        let extraction = ExtractionConfig::from_text(&ext)?;
        let n_feat = count(keyed(next("features")?, "features")?)?;
        let mut ids = Vec::with_capacity(n_feat);
        for _ in 0..n_feat {
            let (n, s) = next("feature")?;
            ids.push(s.parse().map_err(|e: Error| bad(n, e.to_string()))?);
        }
        let feature_index = FeatureIndex::from_features(ids);
        if feature_index.len() != n_feat {
            return Err(Error::format("feature list has duplicates"));
        }
        let (n, marker) = next("theta")?;
        if marker != "theta" {
            return Err(bad(n, "expected `theta`".into()));
        }
        let mut theta = Vec::with_capacity(n_feat * n_lang);
        for _ in 0..n_feat {
            let (n, row) = next("weight row")?;
            let values: Vec<T> = row
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| bad(n, format!("bad weight {s:?}"))))
                .collect::<Result<_>>()?;
            if values.len() != n_lang {
                return Err(bad(n, format!("expected {n_lang} weights, got {}", values.len())));
            }
            theta.extend(values);
        }
        let (n, end) = next("end")?;
        if end != "end" {
            return Err(bad(n, "expected `end`".into()));
        }
        Ok(NliModel {
            theta,
            lambda,
            feature_index,
            languages,
            extraction,
            status,
        })
    }
}

/// Extracts and projects every document of `corpus` against `index`.
/// Languages are indexed by position in `languages`; documents whose label
/// is not listed are rejected.
pub fn labeled_vectors<T: Scalar>(
    corpus: &Corpus,
    languages: &[String],
    index: &FeatureIndex,
    config: &ExtractionConfig,
) -> Result<Vec<LabeledVector<T>>> {
    corpus
        .documents()
        .par_iter()
        .map(|doc| {
            let label = languages
                .iter()
                .position(|l| *l == doc.native_language)
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "document {} has language {} unknown to the model",
                        doc.id, doc.native_language
                    ))
                })?;
            let counts = extract_features(doc, config);
            let norm = config.normalize.then_some(doc.token_count());
            Ok(LabeledVector {
                label,
                features: index.project(&counts, norm),
            })
        })
        .collect()
}

/// Fits weights from zero by maximizing the penalized log-likelihood.
pub fn train<T: Scalar>(
    data: &[LabeledVector<T>],
    languages: Vec<String>,
    feature_index: FeatureIndex,
    extraction: ExtractionConfig,
    config: &TrainConfig<T>,
) -> Result<TrainOutcome<T>> {
    if config.lambda < T::zero() || !config.lambda.is_finite() {
        return Err(Error::invalid("lambda must be a non-negative finite number"));
    }
    if config.lambda == T::zero() && !config.allow_unregularized {
        return Err(Error::invalid(
            "unregularized training (lambda = 0) is disabled; pass allow_unregularized",
        ));
    }
    if data.is_empty() {
        return Err(Error::invalid("no training documents"));
    }
    let n_lang = languages.len();
    if let Some(doc) = data.iter().find(|d| d.label >= n_lang) {
        return Err(Error::invalid(format!("label {} out of range", doc.label)));
    }
    let mut present = vec![false; n_lang];
    for d in data {
        present[d.label] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::invalid("training data covers fewer than 2 languages"));
    }
    let n_feat = feature_index.len();
    if let Some(bad) = data.iter().flat_map(|d| &d.features).find(|(j, _)| *j >= n_feat) {
        return Err(Error::invalid(format!("feature id {} out of range", bad.0)));
    }
    let objective = Objective::new(n_feat, n_lang, config.lambda, data);
    let result = maximize(
        vec![T::zero(); objective.dimension()],
        |theta| objective.value_and_gradient(theta),
        &config.optimizer,
    )?;
    if result.status == OptStatus::Stalled {
        log::info!(
            "training reached the rounding limit after {} iterations (|g|_inf = {})",
            result.iterations,
            result.gradient_norm
        );
    } else if result.status != OptStatus::Converged {
        log::warn!(
            "training stopped before tolerance: {} after {} iterations (|g|_inf = {})",
            result.status.as_str(),
            result.iterations,
            result.gradient_norm
        );
    }
    Ok(TrainOutcome {
        model: NliModel {
            theta: result.x,
            lambda: config.lambda,
            feature_index,
            languages,
            extraction,
            status: result.status,
        },
        trace: result.trace,
        iterations: result.iterations,
        gradient_norm: result.gradient_norm,
    })
}

/// Trains on `corpus` end to end: index over its features, then fit.
pub fn train_on_corpus<T: Scalar>(
    corpus: &Corpus,
    extraction: &ExtractionConfig,
    config: &TrainConfig<T>,
) -> Result<TrainOutcome<T>> {
    let index = crate::features::build_feature_index(corpus, extraction);
    let languages = corpus.languages().to_vec();
    let data = labeled_vectors(corpus, &languages, &index, extraction)?;
    train(&data, languages, index, extraction.clone(), config)
}

/// Sum of gold-label log posteriors (no penalty).
pub fn log_likelihood<T: Scalar>(model: &NliModel<T>, data: &[LabeledVector<T>]) -> T {
    data.iter()
        .map(|d| model.posterior_dense(&d.features).probs[d.label].ln())
        .fold(T::zero(), |a, b| a + b)
}

#[derive(Debug, Clone)]
pub struct LambdaSelection<T> {
    pub best: T,
    /// `(lambda, development log-likelihood)` per grid point.
    pub scores: Vec<(T, T)>,
}

/// Picks the grid value maximizing development log-likelihood; ties go to
/// the earlier grid entry.
pub fn select_lambda<T: Scalar>(
    train_corpus: &Corpus,
    dev_corpus: &Corpus,
    extraction: &ExtractionConfig,
    grid: &[T],
    config: &TrainConfig<T>,
) -> Result<LambdaSelection<T>> {
    if grid.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    let index = crate::features::build_feature_index(train_corpus, extraction);
    let languages = train_corpus.languages().to_vec();
    let train_data = labeled_vectors(train_corpus, &languages, &index, extraction)?;
    let dev_data = labeled_vectors(dev_corpus, &languages, &index, extraction)?;
    let mut scores = Vec::new();
    let mut best: Option<(T, T)> = None;
    for &lambda in grid {
        let cfg = TrainConfig {
            lambda,
            ..config.clone()
        };
        let outcome = train(&train_data, languages.clone(), index.clone(), extraction.clone(), &cfg)?;
        let ll = log_likelihood(&outcome.model, &dev_data);
        scores.push((lambda, ll));
        if best.is_none_or(|(_, b)| ll > b) {
            best = Some((lambda, ll));
        }
    }
    Ok(LambdaSelection {
        best: best.unwrap().0,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureFamily, FeatureId};

    fn index(n: usize) -> FeatureIndex {
        FeatureIndex::from_features((0..n).map(|i| FeatureId::new(FeatureFamily::PosNgram, format!("T{i:03}"))))
    }

    fn model(theta: Vec<f64>, n_feat: usize, langs: usize, lambda: f64) -> NliModel<f64> {
        NliModel {
            theta,
            lambda,
            feature_index: index(n_feat),
            languages: (0..langs).map(|i| format!("L{i}")).collect(),
            extraction: ExtractionConfig::default(),
            status: OptStatus::Converged,
        }
    }

    #[test]
    fn uniform_posterior_for_zero_weights() {
        let m = model(vec![0.0; 3 * 14], 3, 14, 1.0);
        let p = m.posterior_dense(&[(0, 2.0), (2, 1.0)]);
        for &x in &p.probs {
            assert!((x - 1.0 / 14.0).abs() < 1e-15);
        }
        let empty = m.posterior_dense(&[]);
        assert!((empty.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_class_closed_form() {
        let m = model(vec![1.0, 0.0], 1, 2, 1.0);
        let p = m.posterior_dense(&[(0, 1.0)]);
        let e = std::f64::consts::E;
        assert!((p.probs[0] - e / (1.0 + e)).abs() < 1e-15);
        assert!((p.probs[1] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((p.probs[0] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn shift_invariance_across_languages() {
        let base = vec![0.3, -1.2, 0.7, 2.0, 0.1, -0.4];
        let shifted: Vec<f64> = base
            .chunks(3)
            .zip([5.0, -3.0])
            .flat_map(|(row, c)| row.iter().map(move |w| w + c))
            .collect();
        let x = [(0, 2.0), (1, 1.0)];
        let a = model(base, 2, 3, 1.0).posterior_dense(&x);
        let b = model(shifted, 2, 3, 1.0).posterior_dense(&x);
        for (p, q) in a.probs.iter().zip(&b.probs) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn overflow_safe() {
        let m = model(vec![1000.0, -1000.0], 1, 2, 1.0);
        let p = m.posterior_dense(&[(0, 5.0)]);
        assert!(p.probs.iter().all(|x| x.is_finite()));
        assert_eq!(p.argmax(), 0);
    }

    #[test]
    fn objective_at_zero_and_penalty_difference() {
        let data = vec![
            LabeledVector { label: 0, features: vec![(0, 1.0)] },
            LabeledVector { label: 1, features: vec![(1, 2.0)] },
            LabeledVector { label: 2, features: vec![] },
        ];
        let m = model(vec![0.0; 6], 2, 3, 1.0);
        assert!((m.objective(&data) - 3.0 * (1.0f64 / 3.0).ln()).abs() < 1e-12);

        let theta = vec![0.5, -0.25, 1.0, 0.0, 2.0, -1.0];
        let norm2: f64 = theta.iter().map(|w| w * w).sum();
        let l0 = model(theta.clone(), 2, 3, 0.0).objective(&data);
        let l1 = model(theta, 2, 3, 1.0).objective(&data);
        assert!((l1 - (l0 - norm2)).abs() < 1e-12);
    }

    #[test]
    fn objective_hand_evaluation() {
        // 2 features, 2 languages, theta rows (feature-major):
        // f0: (1, 0), f1: (0, 2); lambda 0.5.
        let theta = vec![1.0, 0.0, 0.0, 2.0];
        let data = vec![
            LabeledVector { label: 0, features: vec![(0, 1.0)] },
            LabeledVector { label: 1, features: vec![(1, 1.0)] },
            LabeledVector { label: 0, features: vec![(0, 1.0), (1, 1.0)] },
        ];
        // doc1 scores (1,0): log p0 = 1 - ln(e+1)
        // doc2 scores (0,2): log p1 = 2 - ln(1+e^2)
        // doc3 scores (1,2): log p0 = 1 - ln(e+e^2)
        let e = std::f64::consts::E;
        let ll = (1.0 - (e + 1.0).ln()) + (2.0 - (1.0 + e * e).ln()) + (1.0 - (e + e * e).ln());
        let expected = ll - 0.5 * 5.0;
        let got = model(theta, 2, 2, 0.5).objective(&data);
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn gradient_symmetry_and_regularizer_term() {
        let data = vec![
            LabeledVector { label: 0, features: vec![(0, 1.0)] },
            LabeledVector { label: 1, features: vec![(0, 1.0)] },
            LabeledVector { label: 0, features: vec![(1, 3.0)] },
        ];
        let g = model(vec![0.0; 4], 2, 2, 1.0).gradient(&data);
        assert!((g[0] + g[1]).abs() < 1e-15);
        assert!((g[2] + g[3]).abs() < 1e-15);

        // regularizer contribution is exactly -2 lambda theta
        let theta = vec![0.1, -0.2, 0.3, 0.4];
        let lam = 7.0;
        let with = model(theta.clone(), 2, 2, lam).gradient(&data);
        let without = model(theta.clone(), 2, 2, 0.0).gradient(&data);
        for i in 0..4 {
            assert!((with[i] - without[i] - (-2.0 * lam * theta[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unregularized_and_single_language() {
        let data = vec![
            LabeledVector { label: 0, features: vec![(0, 1.0)] },
            LabeledVector { label: 1, features: vec![(1, 1.0)] },
        ];
        let langs = vec!["a".to_string(), "b".to_string()];
        let cfg = TrainConfig { lambda: 0.0, ..TrainConfig::default() };
        assert!(train(&data, langs.clone(), index(2), ExtractionConfig::default(), &cfg).is_err());
        let one = vec![data[0].clone()];
        assert!(train(&one, langs, index(2), ExtractionConfig::default(), &TrainConfig::default()).is_err());
    }

    #[test]
    fn disjoint_indicator_features_separate() {
        let data: Vec<LabeledVector<f64>> = (0..10)
            .map(|i| LabeledVector { label: i % 2, features: vec![(i % 2, 1.0)] })
            .collect();
        let cfg = TrainConfig { lambda: 0.1, ..TrainConfig::default() };
        let out = train(&data, vec!["a".into(), "b".into()], index(2), ExtractionConfig::default(), &cfg).unwrap();
        assert_eq!(out.model.status, OptStatus::Converged);
        for d in &data {
            assert_eq!(out.model.posterior_dense(&d.features).argmax(), d.label);
        }
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn huge_lambda_shrinks_weights() {
        let data: Vec<LabeledVector<f64>> = (0..10)
            .map(|i| LabeledVector { label: i % 2, features: vec![(i % 2, 1.0), (2, 2.0)] })
            .collect();
        let cfg = TrainConfig { lambda: 1e6, ..TrainConfig::default() };
        let out = train(&data, vec!["a".into(), "b".into()], index(3), ExtractionConfig::default(), &cfg).unwrap();
        assert!(out.model.weight_norm() < 1e-2);
    }

    #[test]
    fn text_container_round_trips_bitwise() {
        let theta = vec![0.1, -1.0 / 3.0, 1e-300, 2.5e10, -0.0, 7.0];
        let mut m = model(theta, 3, 2, 0.37);
        m.languages = vec!["French".into(), "Chinese (Mandarin)".into()];
        m.status = OptStatus::MaxIterations;
        let text = m.to_text();
        let back = NliModel::<f64>::from_text(text.as_bytes()).unwrap();
        assert_eq!(back.to_text(), text);
        for (a, b) in back.theta.iter().zip(&m.theta) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back, m);
        assert!(NliModel::<f32>::from_text(text.as_bytes()).is_err());
    }
}
