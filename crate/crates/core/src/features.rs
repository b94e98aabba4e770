//! Unlexicalized morpho-syntactic features of an annotated document.
//!
//! Seven families are extracted: labelled dependency triples, head/dependent
//! ordering, head/dependent distance, the POS sequence between head and
//! dependent, POS n-grams (n = 1..4) and inflectional/derivational suffixes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::corpus::{Corpus, Document, Sentence};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureFamily {
    DepTriple,
    Order,
    Distance,
    PosBetween,
    PosNgram,
    Inflection,
    Derivation,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 7] = [
        FeatureFamily::DepTriple,
        FeatureFamily::Order,
        FeatureFamily::Distance,
        FeatureFamily::PosBetween,
        FeatureFamily::PosNgram,
        FeatureFamily::Inflection,
        FeatureFamily::Derivation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureFamily::DepTriple => "DEP_TRIPLE",
            FeatureFamily::Order => "ORDER",
            FeatureFamily::Distance => "DISTANCE",
            FeatureFamily::PosBetween => "POS_BETWEEN",
            FeatureFamily::PosNgram => "POS_NGRAM",
            FeatureFamily::Inflection => "INFLECTION",
            FeatureFamily::Derivation => "DERIVATION",
        }
    }
}

impl FromStr for FeatureFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::format(format!("unknown feature family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId {
    pub family: FeatureFamily,
    pub payload: String,
}

impl FeatureId {
    pub fn new(family: FeatureFamily, payload: impl Into<String>) -> Self {
        FeatureId {
            family,
            payload: payload.into(),
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family.as_str(), self.payload)
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, payload) = s
            .split_once(':')
            .ok_or_else(|| Error::format(format!("feature id without family: {s:?}")))?;
        Ok(FeatureId::new(family.parse()?, payload))
    }
}

/// Occurrence counts; absent keys are zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SparseFeatureVector {
    counts: BTreeMap<FeatureId, u32>,
}

impl SparseFeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, id: FeatureId, n: u32) {
        if n > 0 {
            *self.counts.entry(id).or_insert(0) += n;
        }
    }

    pub fn get(&self, family: FeatureFamily, payload: &str) -> u32 {
        self.counts
            .get(&FeatureId::new(family, payload))
            .copied()
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, u32)> {
        self.counts.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    pub fn merge(&mut self, other: &SparseFeatureVector) {
        for (k, v) in other.iter() {
            self.add(k.clone(), v);
        }
    }
}

pub const DEFAULT_INFLECTIONS: &[&str] = &["s", "es", "ed", "d", "ing", "en", "er", "est"];
pub const DEFAULT_DERIVATIONS: &[&str] = &[
    "ity", "ness", "ment", "tion", "sion", "able", "ible", "ful", "less", "ous", "ive", "al",
    "ic", "ly", "ize", "ise", "ism", "ist", "ance", "ence",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionConfig {
    /// Distances above this collapse into a single `<cap>+` bucket.
    pub distance_cap: usize,
    /// Longest head/dependent gap for which a POS_BETWEEN feature fires.
    pub max_gap: usize,
    pub inflection_suffixes: Vec<String>,
    pub derivation_suffixes: Vec<String>,
    /// Shortest stem left after stripping a suffix.
    pub min_stem: usize,
    /// Divide counts by document token count when building model inputs.
    pub normalize: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            distance_cap: 10,
            max_gap: 4,
            inflection_suffixes: DEFAULT_INFLECTIONS.iter().map(|s| s.to_string()).collect(),
            derivation_suffixes: DEFAULT_DERIVATIONS.iter().map(|s| s.to_string()).collect(),
            min_stem: 3,
            normalize: false,
        }
    }
}

impl ExtractionConfig {
    /// Plain `key = value` text, one setting per line.
    pub fn to_text(&self) -> String {
        format!(
            "distance_cap = {}\nmax_gap = {}\nmin_stem = {}\ninflection_suffixes = {}\nderivation_suffixes = {}\nnormalize = {}\n",
            self.distance_cap,
            self.max_gap,
            self.min_stem,
            self.inflection_suffixes.join(","),
            self.derivation_suffixes.join(","),
            self.normalize
        )
    }

    /// Parses the `key = value` format; omitted keys keep their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = ExtractionConfig::default();
        for (key, value) in crate::config::key_values(text)? {
            config.set(&key, &value)?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let number = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::format(format!("{key}: expected an integer, got {v:?}")))
        };
        let list = |v: &str| -> Vec<String> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        };
        match key {
            "distance_cap" => self.distance_cap = number(value)?.max(1),
            "max_gap" => self.max_gap = number(value)?,
            "min_stem" => self.min_stem = number(value)?,
            "inflection_suffixes" => self.inflection_suffixes = list(value),
            "derivation_suffixes" => self.derivation_suffixes = list(value),
            "normalize" => {
                self.normalize = value
                    .parse()
                    .map_err(|_| Error::format(format!("normalize: expected bool, got {value:?}")))?
            }
            other => return Err(Error::format(format!("unknown extraction key {other:?}"))),
        }
        Ok(())
    }
}

/// Extracts the count vector of one document.
pub fn extract_features(doc: &Document, config: &ExtractionConfig) -> SparseFeatureVector {
    let mut out = SparseFeatureVector::new();
    for sentence in &doc.sentences {
        extract_sentence(sentence, config, &mut out);
    }
    out
}

fn extract_sentence(sentence: &Sentence, config: &ExtractionConfig, out: &mut SparseFeatureVector) {
    for dep in sentence {
        if dep.head == 0 {
            continue;
        }
        let head = &sentence[dep.head - 1];
        let pair = format!("{}|{}", head.pos, dep.pos);
        out.add(
            FeatureId::new(
                FeatureFamily::DepTriple,
                format!("{}|{}", dep.relation, pair),
            ),
            1,
        );
        let side = if dep.index < head.index { "left" } else { "right" };
        out.add(FeatureId::new(FeatureFamily::Order, format!("{side}|{pair}")), 1);

        let distance = dep.index.abs_diff(head.index);
        let bucket = if distance > config.distance_cap {
            format!("{}+", config.distance_cap)
        } else {
            distance.to_string()
        };
        out.add(
            FeatureId::new(FeatureFamily::Distance, format!("{bucket}|{pair}")),
            1,
        );

        let gap = distance - 1;
        if gap <= config.max_gap {
            let (lo, hi) = (dep.index.min(head.index), dep.index.max(head.index));
            let between: Vec<&str> = sentence[lo..hi - 1].iter().map(|t| t.pos.as_str()).collect();
            out.add(
                FeatureId::new(
                    FeatureFamily::PosBetween,
                    format!("{}|{}", dep.relation, between.join(" ")),
                ),
                1,
            );
        }
    }

    let tags: Vec<&str> = sentence.iter().map(|t| t.pos.as_str()).collect();
    for n in 1..=4 {
        for window in tags.windows(n) {
            out.add(FeatureId::new(FeatureFamily::PosNgram, window.join(" ")), 1);
        }
    }

    for token in sentence {
        let form = token.form.to_lowercase();
        if form.is_empty() || !form.chars().all(char::is_alphabetic) {
            continue;
        }
        if let Some(s) = longest_suffix(&form, &config.inflection_suffixes, config.min_stem) {
            out.add(FeatureId::new(FeatureFamily::Inflection, s), 1);
        }
        if let Some(s) = longest_suffix(&form, &config.derivation_suffixes, config.min_stem) {
            out.add(FeatureId::new(FeatureFamily::Derivation, s), 1);
        }
    }
}

fn longest_suffix<'a>(form: &str, suffixes: &'a [String], min_stem: usize) -> Option<&'a str> {
    let len = form.chars().count();
    suffixes
        .iter()
        .filter(|s| form.ends_with(s.as_str()) && len >= s.chars().count() + min_stem)
        .max_by_key(|s| s.chars().count())
        .map(String::as_str)
}

/// Dense ids for the features seen in a corpus, in (family, payload) order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureIndex {
    ids: Vec<FeatureId>,
}

impl FeatureIndex {
    pub fn from_features<I: IntoIterator<Item = FeatureId>>(features: I) -> Self {
        let set: BTreeSet<FeatureId> = features.into_iter().collect();
        FeatureIndex {
            ids: set.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &FeatureId) -> Option<usize> {
        self.ids.binary_search(id).ok()
    }

    pub fn feature(&self, dense: usize) -> &FeatureId {
        &self.ids[dense]
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeatureId> {
        self.ids.iter()
    }

    /// Maps a count vector onto dense ids, dropping unseen features.
    /// The result is sorted by dense id.
    pub fn project<T: Scalar>(
        &self,
        features: &SparseFeatureVector,
        normalize_by: Option<usize>,
    ) -> Vec<(usize, T)> {
        let scale = match normalize_by {
            Some(n) if n > 0 => T::one() / T::of_usize(n),
            _ => T::one(),
        };
        features
            .iter()
            .filter_map(|(id, c)| self.get(id).map(|j| (j, T::of_usize(c as usize) * scale)))
            .collect()
    }

    /// Two-column text: `dense_id<TAB>FAMILY:payload`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(&format!("{i}\t{id}\n"));
        }
        out
    }

    pub fn from_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut ids = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (dense, payload) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: "expected two tab-separated columns".into(),
            })?;
            let dense: usize = dense.parse().map_err(|_| Error::Parse {
                line: n + 1,
                message: format!("bad dense id {dense:?}"),
            })?;
            if dense != ids.len() {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("dense ids must be consecutive, expected {}", ids.len()),
                });
            }
            ids.push(payload.parse().map_err(|e: Error| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })?);
        }
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::format("feature index is not in canonical order"));
        }
        Ok(FeatureIndex { ids })
    }
}

/// Builds the index over every feature extracted from `corpus`.
pub fn build_feature_index(corpus: &Corpus, config: &ExtractionConfig) -> FeatureIndex {
    use rayon::prelude::*;
    let vectors: Vec<SparseFeatureVector> = corpus
        .documents()
        .par_iter()
        .map(|d| extract_features(d, config))
        .collect();
    FeatureIndex::from_features(
        vectors
            .iter()
            .flat_map(|v| v.iter().map(|(k, _)| k.clone())),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;

    fn tok(index: usize, form: &str, pos: &str, head: usize, rel: &str) -> Token {
        Token {
            index,
            form: form.into(),
            pos: pos.into(),
            head,
            relation: rel.into(),
        }
    }

    fn doc(sentences: Vec<Sentence>) -> Document {
        Document {
            id: "d".into(),
            native_language: "X".into(),
            sentences,
        }
    }

    #[test]
    fn dogs_bark_enumeration() {
        let d = doc(vec![vec![
            tok(1, "dogs", "NNS", 2, "nsubj"),
            tok(2, "bark", "VBP", 0, "root"),
        ]]);
        let v = extract_features(&d, &ExtractionConfig::default());
        use FeatureFamily::*;
        let expected = [
            (DepTriple, "nsubj|VBP|NNS"),
            (Order, "left|VBP|NNS"),
            (Distance, "1|VBP|NNS"),
            (PosBetween, "nsubj|"),
            (PosNgram, "NNS"),
            (PosNgram, "VBP"),
            (PosNgram, "NNS VBP"),
            (Inflection, "s"),
        ];
        for (family, payload) in expected {
            assert_eq!(v.get(family, payload), 1, "{family:?} {payload}");
        }
        assert_eq!(v.len(), expected.len());
    }

    #[test]
    fn prep_triple() {
        let d = doc(vec![vec![
            tok(1, "it", "PRP", 3, "nsubjpass"),
            tok(2, "was", "VBD", 3, "auxpass"),
            tok(3, "based", "VBN", 0, "root"),
            tok(4, "on", "IN", 3, "prep"),
        ]]);
        let v = extract_features(&d, &ExtractionConfig::default());
        assert_eq!(v.get(FeatureFamily::DepTriple, "prep|VBN|IN"), 1);
        assert_eq!(v.get(FeatureFamily::Order, "right|VBN|IN"), 1);
        assert_eq!(v.get(FeatureFamily::PosBetween, "nsubjpass|VBD"), 1);
        assert_eq!(v.get(FeatureFamily::Distance, "2|VBN|PRP"), 1);
    }

    #[test]
    fn empty_document() {
        let v = extract_features(&doc(vec![]), &ExtractionConfig::default());
        assert!(v.is_empty());
    }

    #[test]
    fn distance_cap_and_gap_limit() {
        let mut sentence = vec![tok(1, "a", "DT", 13, "det")];
        for i in 2..13 {
            sentence.push(tok(i, "b", "JJ", 13, "amod"));
        }
        sentence.push(tok(13, "c", "NN", 0, "root"));
        let v = extract_features(&doc(vec![sentence]), &ExtractionConfig::default());
        assert_eq!(v.get(FeatureFamily::Distance, "10+|NN|DT"), 1);
        assert_eq!(v.get(FeatureFamily::Distance, "11|NN|JJ"), 0);
        assert_eq!(v.get(FeatureFamily::Distance, "10+|NN|JJ"), 1);
        // det arc spans 11 intermediate tokens, beyond max_gap
        assert!(v.iter().all(|(k, _)| !(k.family == FeatureFamily::PosBetween
            && k.payload.starts_with("det|"))));
        assert_eq!(v.get(FeatureFamily::PosBetween, "amod|JJ JJ JJ JJ"), 1);
    }

    #[test]
    fn suffix_heuristic() {
        let config = ExtractionConfig::default();
        let cases = [
            ("Walking", Some("ing"), None),
            ("happiness", Some("s"), Some("ness")),
            ("goes", Some("s"), None),
            ("nationally", None, Some("ly")),
            ("cat's", None, None),
            ("ability", None, Some("ity")),
            ("tested", Some("ed"), None),
            ("is", None, None),
        ];
        for (form, infl, deriv) in cases {
            let d = doc(vec![vec![tok(1, form, "NN", 0, "root")]]);
            let v = extract_features(&d, &config);
            let fired = |family| {
                v.iter()
                    .filter(|(k, _)| k.family == family)
                    .map(|(k, _)| k.payload.clone())
                    .collect::<Vec<_>>()
            };
            let want = |x: Option<&str>| x.map(|s| vec![s.to_string()]).unwrap_or_default();
            assert_eq!(fired(FeatureFamily::Inflection), want(infl), "{form}");
            assert_eq!(fired(FeatureFamily::Derivation), want(deriv), "{form}");
        }
    }

    #[test]
    fn config_text_round_trip() {
        let mut c = ExtractionConfig::default();
        c.distance_cap = 7;
        c.normalize = true;
        c.derivation_suffixes = vec!["ness".into()];
        assert_eq!(ExtractionConfig::from_text(&c.to_text()).unwrap(), c);
        assert!(ExtractionConfig::from_text("bogus = 1").is_err());
    }

    #[test]
    fn index_text_round_trip_and_lookup() {
        let index = FeatureIndex::from_features([
            FeatureId::new(FeatureFamily::PosNgram, "NN VBZ"),
            FeatureId::new(FeatureFamily::DepTriple, "det|NN|DT"),
            FeatureId::new(FeatureFamily::PosNgram, "NN VBZ"),
        ]);
        assert_eq!(index.len(), 2);
        assert_eq!(index.feature(0).family, FeatureFamily::DepTriple);
        let back = FeatureIndex::from_text(index.to_text().as_bytes()).unwrap();
        assert_eq!(back, index);
    }

    #[test]
    fn unseen_features_dropped_on_projection() {
        let train = doc(vec![vec![tok(1, "x", "NN", 0, "root")]]);
        let config = ExtractionConfig::default();
        let index = FeatureIndex::from_features(
            extract_features(&train, &config).iter().map(|(k, _)| k.clone()),
        );
        let heldout = doc(vec![vec![tok(1, "y", "ZZNOVEL", 0, "root")]]);
        let v = extract_features(&heldout, &config);
        assert_eq!(v.get(FeatureFamily::PosNgram, "ZZNOVEL"), 1);
        let projected: Vec<(usize, f64)> = index.project(&v, None);
        assert!(projected.is_empty());
        let projected: Vec<(usize, f64)> = index.project(&extract_features(&train, &config), Some(2));
        assert_eq!(projected, vec![(0, 0.5)]);
    }
}
