//! Typological feature database: loading, filtering, one-hot encoding and
//! cosine similarity under the two missing-data regimes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::similarity::{SimilarityMatrix, SquareMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalsFeature {
    pub id: String,
    pub name: String,
    pub category: String,
    /// Value names; a cell stores an index into this list.
    pub values: Vec<String>,
}

impl WalsFeature {
    pub fn arity(&self) -> usize {
        self.values.len()
    }
}

/// Orders ids like `26A < 83A < 111A`: numeric prefix, then the rest.
pub fn compare_feature_ids(a: &str, b: &str) -> Ordering {
    fn split(s: &str) -> (Option<u64>, &str) {
        let end = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
        (s[..end].parse().ok(), &s[end..])
    }
    let (na, ra) = split(a);
    let (nb, rb) = split(b);
    match (na, nb) {
        (Some(x), Some(y)) => x.cmp(&y).then_with(|| ra.cmp(rb)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.cmp(b),
    }
    .then_with(|| a.cmp(b))
}

/// Languages × features grid of optional value indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalsDatabase {
    languages: Vec<String>,
    features: Vec<WalsFeature>,
    /// Language-major: `cells[l * |F| + f]`.
    cells: Vec<Option<usize>>,
}

impl WalsDatabase {
    pub fn new(
        languages: Vec<String>,
        features: Vec<WalsFeature>,
        cells: Vec<Option<usize>>,
    ) -> Result<Self> {
        if cells.len() != languages.len() * features.len() {
            return Err(Error::invalid("cell grid does not match languages x features"));
        }
        for (i, cell) in cells.iter().enumerate() {
            if let Some(v) = cell {
                let f = &features[i % features.len()];
                if *v >= f.arity() {
                    return Err(Error::invalid(format!(
                        "value index {v} out of range for feature {}",
                        f.id
                    )));
                }
            }
        }
        Ok(WalsDatabase {
            languages,
            features,
            cells,
        })
    }

    pub fn empty() -> Self {
        WalsDatabase {
            languages: Vec::new(),
            features: Vec::new(),
            cells: Vec::new(),
        }
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn features(&self) -> &[WalsFeature] {
        &self.features
    }

    pub fn n_languages(&self) -> usize {
        self.languages.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn language_index(&self, name: &str) -> Option<usize> {
        self.languages.iter().position(|l| l == name)
    }

    pub fn feature_index(&self, id: &str) -> Option<usize> {
        self.features.iter().position(|f| f.id == id)
    }

    pub fn value(&self, language: usize, feature: usize) -> Option<usize> {
        self.cells[language * self.features.len() + feature]
    }

    pub fn is_documented(&self, language: usize, feature: usize) -> bool {
        self.value(language, feature).is_some()
    }

    pub fn documented_languages(&self, feature: usize) -> usize {
        (0..self.languages.len())
            .filter(|&l| self.is_documented(l, feature))
            .count()
    }

    pub fn documented_features(&self, language: usize) -> usize {
        (0..self.features.len())
            .filter(|&f| self.is_documented(language, f))
            .count()
    }

    /// Features documented in every language.
    pub fn fully_documented(&self) -> Vec<usize> {
        (0..self.features.len())
            .filter(|&f| self.documented_languages(f) == self.languages.len())
            .collect()
    }

    /// Keeps the listed features, in the given order.
    pub fn select_features(&self, keep: &[usize]) -> WalsDatabase {
        let features: Vec<WalsFeature> = keep.iter().map(|&f| self.features[f].clone()).collect();
        let mut cells = Vec::with_capacity(self.languages.len() * keep.len());
        for l in 0..self.languages.len() {
            cells.extend(keep.iter().map(|&f| self.value(l, f)));
        }
        WalsDatabase {
            languages: self.languages.clone(),
            features,
            cells,
        }
    }

    /// Keeps the listed languages (in the order given); value domains are
    /// unchanged.
    pub fn restrict_languages(&self, languages: &[String]) -> Result<WalsDatabase> {
        let idx: Vec<usize> = languages
            .iter()
            .map(|l| {
                self.language_index(l)
                    .ok_or_else(|| Error::invalid(format!("language {l} not in database")))
            })
            .collect::<Result<_>>()?;
        let f = self.features.len();
        let mut cells = Vec::with_capacity(idx.len() * f);
        for &l in &idx {
            cells.extend_from_slice(&self.cells[l * f..(l + 1) * f]);
        }
        Ok(WalsDatabase {
            languages: languages.to_vec(),
            features: self.features.clone(),
            cells,
        })
    }

    /// Copy with every cell of `language` cleared.
    pub fn hide_language(&self, language: usize) -> WalsDatabase {
        let mut out = self.clone();
        let f = self.features.len();
        for c in &mut out.cells[language * f..(language + 1) * f] {
            *c = None;
        }
        out
    }

    pub fn stats(&self) -> WalsStats {
        let nl = self.languages.len().max(1) as f64;
        let nf = self.features.len().max(1) as f64;
        let documented: usize = self.cells.iter().filter(|c| c.is_some()).count();
        let distinct: usize = (0..self.features.len())
            .map(|f| {
                let mut seen: Vec<usize> = (0..self.languages.len())
                    .filter_map(|l| self.value(l, f))
                    .collect();
                seen.sort_unstable();
                seen.dedup();
                seen.len()
            })
            .sum();
        WalsStats {
            languages: self.languages.len(),
            features: self.features.len(),
            fully_documented: self.fully_documented().len(),
            mean_features_per_language: documented as f64 / nl,
            mean_languages_per_feature: documented as f64 / nf,
            mean_distinct_values_per_feature: distinct as f64 / nf,
        }
    }

    /// Long-format CSV accepted by [`load_wals`].
    pub fn to_long_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(LONG_HEADER).expect("in-memory write");
        for (l, language) in self.languages.iter().enumerate() {
            for (f, feature) in self.features.iter().enumerate() {
                if let Some(v) = self.value(l, f) {
                    w.write_record([
                        language.as_str(),
                        &feature.id,
                        &feature.name,
                        &feature.category,
                        &feature.values[v],
                    ])
                    .expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalsStats {
    pub languages: usize,
    pub features: usize,
    pub fully_documented: usize,
    pub mean_features_per_language: f64,
    pub mean_languages_per_feature: f64,
    pub mean_distinct_values_per_feature: f64,
}

pub const LONG_HEADER: [&str; 5] = ["language", "feature_id", "feature_name", "category", "value"];

/// Loads the long-format CSV (`language,feature_id,feature_name,category,value`).
/// Value domains are the distinct names in first-occurrence order.
pub fn load_wals<R: Read>(reader: R) -> Result<WalsDatabase> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = {
        let h = rdr.headers()?;
        h.clone()
    };
    if header.is_empty() {
        return Ok(WalsDatabase::empty());
    }
    let column = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Wals {
            row: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let cols = [
        column("language")?,
        column("feature_id")?,
        column("feature_name")?,
        column("category")?,
        column("value")?,
    ];

    let mut features: HashMap<String, WalsFeature> = HashMap::new();
    let mut raw: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let get = |c: usize| record.get(c).unwrap_or("").to_string();
        let [language, id, name, category, value] = cols.map(get);
        if language.is_empty() || id.is_empty() {
            return Err(Error::Wals {
                row,
                message: "empty language or feature id".into(),
            });
        }
        if value.is_empty() {
            return Err(Error::Wals {
                row,
                message: "empty value name".into(),
            });
        }
        let feature = features.entry(id.clone()).or_insert_with(|| WalsFeature {
            id: id.clone(),
            name: name.clone(),
            category: category.clone(),
            values: Vec::new(),
        });
        if feature.name != name || feature.category != category {
            return Err(Error::Wals {
                row,
                message: format!("feature {id} redefined with a different name or category"),
            });
        }
        let v = match feature.values.iter().position(|x| *x == value) {
            Some(v) => v,
            None => {
                feature.values.push(value);
                feature.values.len() - 1
            }
        };
        if raw.insert((language.clone(), id.clone()), v).is_some() {
            return Err(Error::Wals {
                row,
                message: format!("duplicate cell for language {language}, feature {id}"),
            });
        }
    }

    let mut feature_list: Vec<WalsFeature> = features.into_values().collect();
    feature_list.sort_by(|a, b| compare_feature_ids(&a.id, &b.id));
    let mut languages: Vec<String> = raw.keys().map(|(l, _)| l.clone()).collect();
    languages.dedup();
    let nf = feature_list.len();
    let mut cells = vec![None; languages.len() * nf];
    for (l, language) in languages.iter().enumerate() {
        for (f, feature) in feature_list.iter().enumerate() {
            if let Some(&v) = raw.get(&(language.clone(), feature.id.clone())) {
                cells[l * nf + f] = Some(v);
            }
        }
    }
    WalsDatabase::new(languages, feature_list, cells)
}

/// Area of a WALS chapter number (the numeric part of a feature id).
pub fn wals_area(feature_id: &str) -> &'static str {
    let end = feature_id
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(feature_id.len());
    match feature_id[..end].parse::<u32>() {
        Ok(1..=19) => "Phonology",
        Ok(20..=29) => "Morphology",
        Ok(30..=57) => "Nominal Categories",
        Ok(58..=64) => "Nominal Syntax",
        Ok(65..=80) => "Verbal Categories",
        Ok(81..=97) | Ok(143..=144) => "Word Order",
        Ok(98..=121) => "Simple Clauses",
        Ok(122..=128) => "Complex Sentences",
        Ok(129..=138) => "Lexicon",
        Ok(139..=140) => "Sign Languages",
        Ok(141..=142) => "Other",
        _ => "Unknown",
    }
}

/// Converts a wide per-language export (one row per language, one column per
/// feature headed `<id> <name>`) to the long CSV format. Cells such as
/// `1 OV` lose their numeric code; empty cells are undocumented. Columns
/// whose header does not start with a feature id are ignored, except
/// `language_column`, which names the language.
pub fn wide_to_long<R: Read>(
    reader: R,
    language_column: &str,
    categories: &HashMap<String, String>,
) -> Result<String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let lang_col = header
        .iter()
        .position(|h| h == language_column)
        .ok_or_else(|| Error::Wals {
            row: 1,
            message: format!("missing language column {language_column:?}"),
        })?;
    let mut feature_cols = Vec::new();
    for (c, h) in header.iter().enumerate() {
        let (id, name) = h.split_once(' ').unwrap_or((h, ""));
        let digits = id.chars().take_while(char::is_ascii_digit).count();
        if digits > 0 && digits < id.len() && id[digits..].chars().all(|x| x.is_ascii_uppercase()) {
            let category = categories
                .get(id)
                .cloned()
                .unwrap_or_else(|| wals_area(id).to_string());
            feature_cols.push((c, id.to_string(), name.trim().to_string(), category));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LONG_HEADER)?;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let language = record.get(lang_col).unwrap_or("");
        if language.is_empty() {
            return Err(Error::Wals {
                row: i + 2,
                message: "empty language name".into(),
            });
        }
        for (c, id, name, category) in &feature_cols {
            let cell = record.get(*c).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            let value = match cell.split_once(' ') {
                Some((code, rest)) if code.chars().all(|x| x.is_ascii_digit()) => rest.trim(),
                _ => cell,
            };
            w.write_record([language, id, name, category, value])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::format(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    /// Features whose category equals this string are dropped.
    pub excluded_category: String,
    /// Features documented in fewer languages are dropped.
    pub min_languages: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            excluded_category: "Phonology".into(),
            min_languages: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub removed_sparse: Vec<String>,
    pub removed_category: Vec<String>,
    /// Features whose value domain has fewer than two entries.
    pub removed_degenerate: Vec<String>,
}

/// Drops sparsely documented features, the excluded category and
/// single-valued domains, in that order of attribution.
pub fn preprocess(db: &WalsDatabase, config: &PreprocessConfig) -> (WalsDatabase, PreprocessReport) {
    let mut report = PreprocessReport::default();
    let mut keep = Vec::new();
    for (f, feature) in db.features().iter().enumerate() {
        if db.documented_languages(f) < config.min_languages {
            report.removed_sparse.push(feature.id.clone());
        } else if feature.category == config.excluded_category {
            report.removed_category.push(feature.id.clone());
        } else if feature.arity() < 2 {
            report.removed_degenerate.push(feature.id.clone());
        } else {
            keep.push(f);
        }
    }
    (db.select_features(&keep), report)
}

/// Block layout shared by every language's binary vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    /// Start of each feature's block; the last entry is the total width.
    pub offsets: Vec<usize>,
}

impl Encoding {
    pub fn of(db: &WalsDatabase) -> Self {
        let mut offsets = Vec::with_capacity(db.n_features() + 1);
        let mut at = 0;
        offsets.push(0);
        for f in db.features() {
            at += f.arity();
            offsets.push(at);
        }
        Encoding { offsets }
    }

    pub fn width(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn block(&self, feature: usize) -> std::ops::Range<usize> {
        self.offsets[feature]..self.offsets[feature + 1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryTypologyVector {
    pub bits: Vec<bool>,
    /// Per feature: documented or not.
    pub mask: Vec<bool>,
}

impl BinaryTypologyVector {
    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// One-hot encoding of every language, in database language order.
pub fn binarize(db: &WalsDatabase) -> (Encoding, Vec<BinaryTypologyVector>) {
    let encoding = Encoding::of(db);
    let vectors = (0..db.n_languages())
        .map(|l| {
            let mut bits = vec![false; encoding.width()];
            let mut mask = vec![false; db.n_features()];
            for f in 0..db.n_features() {
                if let Some(v) = db.value(l, f) {
                    bits[encoding.offsets[f] + v] = true;
                    mask[f] = true;
                }
            }
            BinaryTypologyVector { bits, mask }
        })
        .collect();
    (encoding, vectors)
}

/// Argmax decoding of each documented block.
pub fn unbinarize(encoding: &Encoding, vector: &BinaryTypologyVector) -> Vec<Option<usize>> {
    vector
        .mask
        .iter()
        .enumerate()
        .map(|(f, &documented)| {
            if !documented {
                return None;
            }
            vector.bits[encoding.block(f)].iter().position(|&b| b)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SharingMode {
    /// Only features documented in every language.
    SharedAll,
    /// Per pair, features documented in both languages.
    SharedPairwise,
}

impl SharingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SharingMode::SharedAll => "shared-all",
            SharingMode::SharedPairwise => "shared-pairwise",
        }
    }
}

impl std::str::FromStr for SharingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared-all" => Ok(SharingMode::SharedAll),
            "shared-pairwise" => Ok(SharingMode::SharedPairwise),
            other => Err(Error::invalid(format!("unknown sharing mode {other:?}"))),
        }
    }
}

/// Cosine similarity of binarized vectors over all features of `db`.
pub fn wals_similarity<T: Scalar>(db: &WalsDatabase, mode: SharingMode) -> Result<SimilarityMatrix<T>> {
    let all: Vec<usize> = (0..db.n_features()).collect();
    wals_similarity_on(db, mode, &all)
}

/// Cosine similarity restricted to the candidate features `usable`.
pub fn wals_similarity_on<T: Scalar>(
    db: &WalsDatabase,
    mode: SharingMode,
    usable: &[usize],
) -> Result<SimilarityMatrix<T>> {
    let (encoding, vectors) = binarize(db);
    let n = db.n_languages();
    let shared_all: Vec<usize> = usable
        .iter()
        .copied()
        .filter(|&f| vectors.iter().all(|v| v.mask[f]))
        .collect();
    let mut values = vec![T::zero(); n * n];
    for a in 0..n {
        values[a * n + a] = T::one();
        for b in a + 1..n {
            let selected: Vec<usize> = match mode {
                SharingMode::SharedAll => shared_all.clone(),
                SharingMode::SharedPairwise => usable
                    .iter()
                    .copied()
                    .filter(|&f| vectors[a].mask[f] && vectors[b].mask[f])
                    .collect(),
            };
            if selected.is_empty() {
                return Err(Error::EmptyIntersection(
                    db.languages()[a].clone(),
                    db.languages()[b].clone(),
                ));
            }
            let (mut dot, mut na, mut nb) = (0usize, 0usize, 0usize);
            for &f in &selected {
                for i in encoding.block(f) {
                    let (x, y) = (vectors[a].bits[i], vectors[b].bits[i]);
                    dot += (x && y) as usize;
                    na += x as usize;
                    nb += y as usize;
                }
            }
            let cos = T::of_usize(dot) / (T::of_usize(na) * T::of_usize(nb)).sqrt();
            let cos = cos.min(T::one()).max(T::zero());
            values[a * n + b] = cos;
            values[b * n + a] = cos;
        }
    }
    SimilarityMatrix::from_square(SquareMatrix::from_fn(db.languages().to_vec(), |a, b| {
        values[a * n + b]
    }))
}

#[derive(Debug, Clone)]
pub struct FeatureMask {
    pub construction: WalsDatabase,
    /// Indices into the source database.
    pub kept: Vec<usize>,
    pub heldout: Vec<usize>,
    pub heldout_ids: Vec<String>,
}

/// Number of construction features: `⌈keep_fraction · F⌉`.
pub fn kept_count(n_features: usize, keep_fraction: f64) -> usize {
    ((keep_fraction * n_features as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Uniformly samples `⌈keep_fraction · F⌉` features for construction.
pub fn mask_features(db: &WalsDatabase, keep_fraction: f64, seed: u64) -> Result<FeatureMask> {
    if !(keep_fraction > 0.0 && keep_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "keep fraction {keep_fraction} not in (0,1)"
        )));
    }
    let total = db.n_features();
    let n_keep = kept_count(total, keep_fraction).min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = rand::seq::index::sample(&mut rng, total, n_keep).into_vec();
    kept.sort_unstable();
    let mut is_kept = vec![false; total];
    for &f in &kept {
        is_kept[f] = true;
    }
    let heldout: Vec<usize> = (0..total).filter(|&f| !is_kept[f]).collect();
    Ok(FeatureMask {
        construction: db.select_features(&kept),
        heldout_ids: heldout.iter().map(|&f| db.features()[f].id.clone()).collect(),
        kept,
        heldout,
    })
}
