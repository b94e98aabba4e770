//! Synthetic data with known ground truth: learner corpora drawn from
//! languages with a planted similarity structure, and typology databases
//! evolved along a planted tree.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Gamma};

use crate::corpus::{Corpus, Document, Token};
use crate::error::{Error, Result};
use crate::hierarchy::{ClusterTree, Merge};
use crate::similarity::{SimilarityMatrix, SquareMatrix};
use crate::wals::{wals_area, WalsDatabase, WalsFeature};

fn dirichlet(rng: &mut ChaCha8Rng, alpha: f64, n: usize) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
    let mut v: Vec<f64> = (0..n).map(|_| gamma.sample(rng).max(1e-300)).collect();
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}

/// Bhattacharyya coefficient of two distributions.
pub fn overlap(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum::<f64>().min(1.0)
}

#[derive(Debug, Clone)]
pub struct SynthEslConfig {
    pub blocks: usize,
    pub languages_per_block: usize,
    /// Number of structural patterns a sentence can realise.
    pub patterns: usize,
    pub documents_per_language: usize,
    pub sentences_per_document: usize,
    /// Concentration of the shared, block and language components.
    pub alpha: f64,
    /// Mixture weight of the component shared by every language.
    pub global_weight: f64,
    /// Per-language block weights are drawn uniformly from this range.
    pub block_weight: (f64, f64),
    pub seed: u64,
}

impl Default for SynthEslConfig {
    fn default() -> Self {
        SynthEslConfig {
            blocks: 2,
            languages_per_block: 4,
            patterns: 200,
            documents_per_language: 100,
            sentences_per_document: 15,
            alpha: 0.5,
            global_weight: 0.15,
            block_weight: (0.35, 0.65),
            seed: 11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthEsl {
    pub corpus: Corpus,
    /// Pairwise overlap of the pattern distributions.
    pub planted: SimilarityMatrix<f64>,
    /// Block of every language, in corpus language order.
    pub blocks: Vec<usize>,
    pub distributions: Vec<Vec<f64>>,
}

fn block_name(b: usize) -> String {
    let mut name = String::new();
    let mut x = b;
    loop {
        name.insert(0, (b'A' + (x % 26) as u8) as char);
        if x < 26 {
            break;
        }
        x = x / 26 - 1;
    }
    name
}

/// Two-token sentence realising pattern `i`: a dependent attached to a
/// root, with POS tags, relation and direction all determined by `i`.
pub fn pattern_sentence(i: usize) -> Vec<Token> {
    let dep_pos = format!("D{:02}", i % 20);
    let head_pos = format!("H{}", i / 20);
    let relation = format!("r{}", (i * 7) % 5);
    let dep_first = (i / 20 + i % 20).is_multiple_of(2);
    let (dep_index, head_index) = if dep_first { (1, 2) } else { (2, 1) };
    let mut tokens = vec![
        Token {
            index: dep_index,
            form: format!("d{i}"),
            pos: dep_pos,
            head: head_index,
            relation,
        },
        Token {
            index: head_index,
            form: format!("h{i}"),
            pos: head_pos,
            head: 0,
            relation: "root".into(),
        },
    ];
    tokens.sort_by_key(|t| t.index);
    tokens
}

/// Languages named `<block><n>` (A1, A2, ..., B1, ...). Each pattern
/// distribution mixes a shared component, its block prototype and a
/// private component; documents sample patterns independently.
pub fn synth_esl(config: &SynthEslConfig) -> Result<SynthEsl> {
    if config.blocks == 0 || config.languages_per_block == 0 || config.patterns == 0 {
        return Err(Error::invalid("synthetic corpus needs blocks, languages and patterns"));
    }
    if config.documents_per_language < 2 || config.sentences_per_document == 0 {
        return Err(Error::invalid("need at least 2 documents per language and 1 sentence"));
    }
    let (lo, hi) = config.block_weight;
    if !(0.0 <= lo && lo <= hi && config.global_weight >= 0.0 && config.global_weight + hi <= 1.0) {
        return Err(Error::invalid("mixture weights must lie in [0,1] and sum to at most 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = config.patterns;
    let shared = dirichlet(&mut rng, config.alpha, k);
    let prototypes: Vec<Vec<f64>> = (0..config.blocks).map(|_| dirichlet(&mut rng, config.alpha, k)).collect();
    let mut names = Vec::new();
    let mut blocks = Vec::new();
    let mut distributions = Vec::new();
    for (b, proto) in prototypes.iter().enumerate() {
        for m in 0..config.languages_per_block {
            let own = dirichlet(&mut rng, config.alpha, k);
            let w_block = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let w_own = 1.0 - config.global_weight - w_block;
            let p: Vec<f64> = (0..k)
                .map(|i| config.global_weight * shared[i] + w_block * proto[i] + w_own * own[i])
                .collect();
            let width = config.languages_per_block.to_string().len();
            names.push(format!("{}{:0width$}", block_name(b), m + 1));
            blocks.push(b);
            distributions.push(p);
        }
    }
    let patterns: Vec<Vec<Token>> = (0..k).map(pattern_sentence).collect();
    let mut documents = Vec::new();
    for (l, p) in distributions.iter().enumerate() {
        let sampler = WeightedIndex::new(p).map_err(|e| Error::Numeric(e.to_string()))?;
        for d in 0..config.documents_per_language {
            let sentences = (0..config.sentences_per_document)
                .map(|_| patterns[sampler.sample(&mut rng)].clone())
                .collect();
            documents.push(Document {
                id: format!("{}-{:04}", names[l], d),
                native_language: names[l].clone(),
                sentences,
            });
        }
    }
    let corpus = Corpus::new(documents)?;
    // align with the corpus's sorted language order
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by(|&a, &b| names[a].cmp(&names[b]));
    let names: Vec<String> = order.iter().map(|&i| names[i].clone()).collect();
    let blocks: Vec<usize> = order.iter().map(|&i| blocks[i]).collect();
    let distributions: Vec<Vec<f64>> = order.iter().map(|&i| distributions[i].clone()).collect();
    let planted = SimilarityMatrix::from_square(SquareMatrix::from_fn(names, |a, b| {
        if a == b {
            1.0
        } else {
            overlap(&distributions[a], &distributions[b])
        }
    }))?;
    Ok(SynthEsl {
        corpus,
        planted,
        blocks,
        distributions,
    })
}

#[derive(Debug, Clone)]
pub struct SynthWalsConfig {
    pub features: usize,
    /// Value-domain sizes are drawn from `2..=max_values`.
    pub max_values: usize,
    /// Expected value changes per unit branch length.
    pub mutation_rate: f64,
    /// Share of features documented in every language.
    pub full_fraction: f64,
    /// Missingness of the remaining features.
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SynthWalsConfig {
    fn default() -> Self {
        SynthWalsConfig {
            features: 150,
            max_values: 5,
            mutation_rate: 0.8,
            full_fraction: 0.25,
            missing_rate: 0.3,
            seed: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthWals {
    pub database: WalsDatabase,
    pub tree: ClusterTree<f64>,
}

/// Feature ids spread over the usual chapters so category handling is
/// exercised; every 12th feature falls in phonology.
fn synthetic_feature_id(i: usize) -> String {
    const CHAPTERS: [u32; 10] = [1, 20, 30, 58, 65, 81, 98, 122, 129, 143];
    const SPAN: [u32; 10] = [19, 10, 28, 7, 16, 17, 24, 7, 10, 2];
    let c = if i.is_multiple_of(12) { 0 } else { 1 + i % 9 };
    let number = CHAPTERS[c] + (i as u32 / 12) % SPAN[c];
    let letter = (b'A' + ((i / 12) / SPAN[c] as usize % 26) as u8) as char;
    format!("{number}{letter}")
}

/// Random coalescent tree with unit-mean exponential waiting times.
pub fn random_tree(languages: &[String], rng: &mut ChaCha8Rng) -> ClusterTree<f64> {
    let exp = Exp::new(1.0).expect("positive rate");
    let n = languages.len();
    let mut active: Vec<usize> = (0..n).collect();
    let mut height = 0.0;
    let mut merges = Vec::new();
    let mut sizes = vec![1usize; 2 * n];
    while active.len() > 1 {
        let k = active.len() as f64;
        height += exp.sample(rng) / (k * (k - 1.0) / 2.0);
        let i = rng.random_range(0..active.len());
        let a = active.swap_remove(i);
        let j = rng.random_range(0..active.len());
        let b = active.swap_remove(j);
        let node = n + merges.len();
        sizes[node] = sizes[a] + sizes[b];
        merges.push(Merge {
            left: a.min(b),
            right: a.max(b),
            height,
            count: sizes[node],
        });
        active.push(node);
    }
    ClusterTree {
        leaves: languages.to_vec(),
        merges,
    }
}

/// Evolves categorical features down a random tree over `languages`.
pub fn synth_wals(languages: &[String], config: &SynthWalsConfig) -> Result<SynthWals> {
    if languages.len() < 2 {
        return Err(Error::invalid("synthetic typology needs at least 2 languages"));
    }
    let mut sorted = languages.to_vec();
    sorted.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tree = random_tree(&sorted, &mut rng);
    evolve(tree, config, &mut rng)
}

/// Evolves features down a given tree, rescaled so the root sits at
/// height 2 (the expected coalescent depth).
pub fn synth_wals_on_tree(tree: &ClusterTree<f64>, config: &SynthWalsConfig) -> Result<SynthWals> {
    tree.validate()?;
    let top = tree.height(tree.root());
    let scale = if top > 0.0 { 2.0 / top } else { 1.0 };
    let mut scaled = tree.clone();
    for m in &mut scaled.merges {
        m.height *= scale;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    evolve(scaled, config, &mut rng)
}

fn evolve(tree: ClusterTree<f64>, config: &SynthWalsConfig, rng: &mut ChaCha8Rng) -> Result<SynthWals> {
    if config.features == 0 || config.max_values < 2 {
        return Err(Error::invalid("synthetic typology needs features with at least 2 values"));
    }
    let n = tree.n_leaves();
    let root = tree.root();
    let mut features = Vec::with_capacity(config.features);
    let mut grid = vec![None; n * config.features];
    for f in 0..config.features {
        let arity = rng.random_range(2..=config.max_values);
        let id = synthetic_feature_id(f);
        features.push(WalsFeature {
            name: format!("Synthetic feature {id}"),
            category: wals_area(&id).to_string(),
            id,
            values: (0..arity).map(|v| format!("value {}", v + 1)).collect(),
        });
        let mut state = vec![0usize; root + 1];
        state[root] = rng.random_range(0..arity);
        for node in (n..=root).rev() {
            let (l, r) = tree.children(node).expect("internal");
            for child in [l, r] {
                let t = tree.height(node) - tree.height(child);
                let change = 1.0 - (-config.mutation_rate * t).exp();
                state[child] = if rng.random_bool(change.clamp(0.0, 1.0)) {
                    rng.random_range(0..arity)
                } else {
                    state[node]
                };
            }
        }
        let full = rng.random_bool(config.full_fraction.clamp(0.0, 1.0));
        for l in 0..n {
            if full || !rng.random_bool(config.missing_rate.clamp(0.0, 1.0)) {
                grid[l * config.features + f] = Some(state[l]);
            }
        }
    }
    // ids may repeat across chapters' letter wrap; make them unique
    let mut seen = std::collections::HashSet::new();
    for (i, feat) in features.iter_mut().enumerate() {
        if !seen.insert(feat.id.clone()) {
            feat.id = format!("{}{}", feat.id, i);
        }
        seen.insert(feat.id.clone());
    }
    let mut order: Vec<usize> = (0..config.features).collect();
    order.sort_by(|&a, &b| crate::wals::compare_feature_ids(&features[a].id, &features[b].id));
    let db = WalsDatabase::new(tree.leaves.clone(), features, grid)?;
    let mut languages = tree.leaves.clone();
    languages.sort();
    Ok(SynthWals {
        database: db.select_features(&order).restrict_languages(&languages)?,
        tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_features, ExtractionConfig, FeatureFamily};

    #[test]
    fn pattern_sentences_are_valid_and_distinct() {
        let mut triples = std::collections::BTreeSet::new();
        for i in 0..200 {
            let s = pattern_sentence(i);
            let doc = Document {
                id: "x".into(),
                native_language: "A1".into(),
                sentences: vec![s],
            };
            Corpus::new(vec![doc.clone()]).unwrap();
            let f = extract_features(&doc, &ExtractionConfig::default());
            let t: Vec<_> = f.iter().filter(|(id, _)| id.family == FeatureFamily::DepTriple).collect();
            assert_eq!(t.len(), 1);
            triples.insert(t[0].0.payload.clone());
        }
        assert_eq!(triples.len(), 200);
    }

    #[test]
    fn esl_generator_shape() {
        let cfg = SynthEslConfig {
            documents_per_language: 4,
            sentences_per_document: 3,
            ..SynthEslConfig::default()
        };
        let s = synth_esl(&cfg).unwrap();
        assert_eq!(s.corpus.languages(), ["A1", "A2", "A3", "A4", "B1", "B2", "B3", "B4"]);
        assert_eq!(s.corpus.len(), 32);
        assert_eq!(s.blocks, vec![0, 0, 0, 0, 1, 1, 1, 1]);
        // within-block overlap exceeds across-block overlap on average
        let (mut within, mut across) = (Vec::new(), Vec::new());
        for a in 0..8 {
            for b in a + 1..8 {
                let v = s.planted.get(a, b);
                if s.blocks[a] == s.blocks[b] { within.push(v) } else { across.push(v) }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&within) > mean(&across));
        assert_eq!(synth_esl(&cfg).unwrap().corpus, s.corpus);
    }

    #[test]
    fn overlap_bounds() {
        let p = [0.5, 0.5];
        assert!((overlap(&p, &p) - 1.0).abs() < 1e-12);
        assert_eq!(overlap(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
    }

    #[test]
    fn wals_generator_shape() {
        let langs: Vec<String> = (0..14).map(|i| format!("L{i:02}")).collect();
        let s = synth_wals(&langs, &SynthWalsConfig::default()).unwrap();
        let db = &s.database;
        assert_eq!(db.n_languages(), 14);
        assert_eq!(db.n_features(), 150);
        s.tree.validate().unwrap();
        let ids: std::collections::HashSet<_> = db.features().iter().map(|f| f.id.clone()).collect();
        assert_eq!(ids.len(), 150);
        assert!(db.features().iter().any(|f| f.category == "Phonology"));
        assert!(!db.fully_documented().is_empty());
        let again = synth_wals(&langs, &SynthWalsConfig::default()).unwrap();
        assert_eq!(&again.database, db);
    }

    #[test]
    fn wals_on_given_tree_tracks_it() {
        let langs: Vec<String> = ["D", "C", "B", "A"].iter().map(|s| s.to_string()).collect();
        // (D,C) and (B,A) are close pairs
        let tree = ClusterTree {
            leaves: langs,
            merges: vec![
                Merge { left: 0, right: 1, height: 0.05, count: 2 },
                Merge { left: 2, right: 3, height: 0.05, count: 2 },
                Merge { left: 4, right: 5, height: 1.0, count: 4 },
            ],
        };
        let cfg = SynthWalsConfig {
            full_fraction: 1.0,
            ..SynthWalsConfig::default()
        };
        let s = synth_wals_on_tree(&tree, &cfg).unwrap();
        assert_eq!(s.database.languages(), ["A", "B", "C", "D"]);
        let sim = crate::wals::wals_similarity::<f64>(&s.database, crate::wals::SharingMode::SharedAll).unwrap();
        assert!(sim.get(0, 1) > sim.get(0, 2));
        assert!(sim.get(2, 3) > sim.get(1, 3));
        assert_eq!(s.tree.height(s.tree.root()), 2.0);
    }

    #[test]
    fn block_names() {
        assert_eq!(block_name(0), "A");
        assert_eq!(block_name(25), "Z");
        assert_eq!(block_name(26), "AA");
    }
}
