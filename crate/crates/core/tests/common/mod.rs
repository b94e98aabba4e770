//! Independent reference implementations and random generators shared by
//! the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use esl_typology::hierarchy::ClusterTree;
use esl_typology::similarity::{SimilarityMatrix, SquareMatrix};
use esl_typology::wals::{WalsDatabase, WalsFeature};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Step = (BTreeSet<usize>, BTreeSet<usize>, f64);

/// Greedy Ward clustering that recomputes every candidate cost from the
/// original pairwise distances: cost(A, B) = sqrt(2 (E(A∪B) − E(A) − E(B)))
/// with E(C) = (1/|C|) Σ_{i<j ∈ C} d²(i, j).
pub fn ward_oracle(d: &SquareMatrix<f64>) -> Vec<Step> {
    let n = d.len();
    let energy = |c: &BTreeSet<usize>| -> f64 {
        let v: Vec<usize> = c.iter().copied().collect();
        let mut s = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                s += d.get(v[i], v[j]).powi(2);
            }
        }
        s / v.len() as f64
    };
    let mut clusters: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
    let mut steps = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let union: BTreeSet<usize> = clusters[a].union(&clusters[b]).copied().collect();
                let delta = energy(&union) - energy(&clusters[a]) - energy(&clusters[b]);
                let cost = (2.0 * delta).max(0.0).sqrt();
                let la = *clusters[a].iter().next().unwrap();
                let lb = *clusters[b].iter().next().unwrap();
                let key = (la.min(lb), la.max(lb));
                let better = match best {
                    None => true,
                    Some((c, k, _, _)) => cost < c - 1e-12 || ((cost - c).abs() <= 1e-12 && key < k),
                };
                if better {
                    best = Some((cost, key, a, b));
                }
            }
        }
        let (cost, _, a, b) = best.unwrap();
        let (x, y) = (clusters[a].clone(), clusters[b].clone());
        let (left, right) = if x.iter().next() < y.iter().next() { (x, y) } else { (y, x) };
        clusters.remove(b);
        clusters.remove(a);
        clusters.push(left.union(&right).copied().collect());
        steps.push((left, right, cost));
    }
    steps
}

/// Leaf sets of each merge's children, in merge order.
pub fn tree_steps(tree: &ClusterTree<f64>) -> Vec<Step> {
    tree.merges
        .iter()
        .map(|m| {
            (
                tree.members(m.left).into_iter().collect(),
                tree.members(m.right).into_iter().collect(),
                m.height,
            )
        })
        .collect()
}

pub fn random_points_matrix(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> SquareMatrix<f64> {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    SquareMatrix::from_fn(names(n), |a, b| {
        if a == b {
            0.0
        } else {
            pts[a].iter().zip(&pts[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        }
    })
}

pub fn random_dissimilarity(rng: &mut ChaCha8Rng, n: usize) -> SquareMatrix<f64> {
    let mut v = vec![0.0; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let x = rng.random_range(0.01..1.0);
            v[a * n + b] = x;
            v[b * n + a] = x;
        }
    }
    SquareMatrix::from_fn(names(n), |a, b| v[a * n + b])
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("L{i}")).collect()
}

/// Similarities rounded to one decimal so ranking ties occur.
pub fn random_similarity(rng: &mut ChaCha8Rng, n: usize) -> SimilarityMatrix<f64> {
    let mut v = vec![1.0; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let x = (rng.random_range(0.0..1.0f64) * 10.0).floor() / 10.0;
            v[a * n + b] = x;
            v[b * n + a] = x;
        }
    }
    SimilarityMatrix::from_square(SquareMatrix::from_fn(names(n), |a, b| v[a * n + b])).unwrap()
}

pub fn random_db(rng: &mut ChaCha8Rng, n_lang: usize, n_feat: usize, missing: f64) -> WalsDatabase {
    let features: Vec<WalsFeature> = (0..n_feat)
        .map(|f| {
            let k = rng.random_range(2..=4);
            WalsFeature {
                id: format!("{}A", f + 1),
                name: format!("feature {f}"),
                category: "Word Order".into(),
                values: (0..k).map(|v| format!("v{v}")).collect(),
            }
        })
        .collect();
    let mut cells = Vec::with_capacity(n_lang * n_feat);
    for _ in 0..n_lang {
        for f in &features {
            cells.push(if rng.random_bool(missing) {
                None
            } else {
                Some(rng.random_range(0..f.values.len()))
            });
        }
    }
    WalsDatabase::new(names(n_lang), features, cells).unwrap()
}

/// (value, voters, depth, fallback) as produced by the predictors.
pub type Expected = (Option<usize>, Vec<String>, usize, bool);

fn majority(values: &[usize]) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    let top = counts.values().copied().max()?;
    let winners: Vec<usize> = counts.iter().filter(|(_, &c)| c == top).map(|(&v, _)| v).collect();
    (winners.len() == 1).then(|| winners[0])
}

fn fallback(db: &WalsDatabase, target: usize, feature: usize) -> Expected {
    let voters: Vec<usize> = (0..db.n_languages())
        .filter(|&l| l != target && db.value(l, feature).is_some())
        .collect();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in &voters {
        *counts.entry(db.value(l, feature).unwrap()).or_default() += 1;
    }
    // ascending value order, so the first maximum is the lowest index
    let mut best: Option<(usize, usize)> = None;
    for (&v, &c) in &counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    match best {
        Some((v, _)) => (Some(v), voters.iter().map(|&l| db.languages()[l].clone()).collect(), usize::MAX, true),
        None => (None, Vec::new(), usize::MAX, false),
    }
}

/// Tries every prefix of the similarity ranking from `k` upward.
pub fn knn_oracle(db: &WalsDatabase, s: &SimilarityMatrix<f64>, target: usize, feature: usize, k: usize) -> Expected {
    let n = db.n_languages();
    let mut keyed: Vec<(i64, usize)> = (0..n)
        .filter(|&l| l != target)
        .map(|l| (-(s.get(target, l) * 1e12).round() as i64, l))
        .collect();
    keyed.sort();
    let ranking: Vec<usize> = keyed.into_iter().map(|(_, l)| l).collect();
    let first = k.min(ranking.len());
    for (depth, m) in (first..=ranking.len()).enumerate() {
        let voters: Vec<usize> = ranking[..m].iter().copied().filter(|&l| db.value(l, feature).is_some()).collect();
        let values: Vec<usize> = voters.iter().map(|&l| db.value(l, feature).unwrap()).collect();
        if let Some(v) = majority(&values) {
            return (Some(v), voters.iter().map(|&l| db.languages()[l].clone()).collect(), depth, false);
        }
    }
    let (v, voters, _, fb) = fallback(db, target, feature);
    (v, voters, ranking.len() + 1 - first, fb)
}

/// Walks the clusters containing the target from smallest to largest.
pub fn tree_oracle(db: &WalsDatabase, tree: &ClusterTree<f64>, target: usize, feature: usize) -> Expected {
    let n = tree.leaves.len();
    let mut sets: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
    for m in &tree.merges {
        let u: BTreeSet<usize> = sets[m.left].union(&sets[m.right]).copied().collect();
        sets.push(u);
    }
    let mut enclosing: Vec<&BTreeSet<usize>> = sets[n..].iter().filter(|s| s.contains(&target)).collect();
    enclosing.sort_by_key(|s| s.len());
    let depth_count = enclosing.len();
    for (depth, set) in enclosing.into_iter().enumerate() {
        let voters: Vec<usize> = set
            .iter()
            .copied()
            .filter(|&l| l != target && db.value(l, feature).is_some())
            .collect();
        let values: Vec<usize> = voters.iter().map(|&l| db.value(l, feature).unwrap()).collect();
        if let Some(v) = majority(&values) {
            return (Some(v), voters.iter().map(|&l| db.languages()[l].clone()).collect(), depth, false);
        }
    }
    let (v, voters, _, fb) = fallback(db, target, feature);
    (v, voters, depth_count, fb)
}
