//! Typological feature prediction by majority vote over similar languages.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hierarchy::ClusterTree;
use crate::scalar::Scalar;
use crate::similarity::SimilarityMatrix;
use crate::wals::WalsDatabase;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeaturePrediction {
    /// Index into the database's features.
    pub feature: usize,
    pub feature_id: String,
    /// `None` when no non-target language documents the feature.
    pub value: Option<usize>,
    pub value_label: Option<String>,
    /// Languages whose documented values were counted.
    pub voters: Vec<String>,
    /// Expansion steps beyond the initial voter group.
    pub backoff_depth: usize,
    /// The vote stayed tied at full expansion.
    pub global_fallback: bool,
}

impl FeaturePrediction {
    pub fn is_predictable(&self) -> bool {
        self.value.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredictionResult {
    pub target: String,
    pub method: String,
    pub predictions: Vec<FeaturePrediction>,
}

impl PredictionResult {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["target", "feature_id", "predicted_value", "voters", "backoff_depth"])?;
        for p in &self.predictions {
            w.write_record([
                self.target.as_str(),
                p.feature_id.as_str(),
                p.value_label.as_deref().unwrap_or(""),
                p.voters.join(";").as_str(),
                p.backoff_depth.to_string().as_str(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Maps source language positions to database rows and locates the target.
fn align(db: &WalsDatabase, source: &[String], target: &str) -> Result<(Vec<usize>, usize)> {
    let rows = source
        .iter()
        .map(|l| {
            db.language_index(l)
                .ok_or_else(|| Error::invalid(format!("language {l} missing from the database")))
        })
        .collect::<Result<Vec<_>>>()?;
    let t = source
        .iter()
        .position(|l| l == target)
        .ok_or_else(|| Error::invalid(format!("target {target} not among the source languages")))?;
    Ok((rows, t))
}

/// Unique plurality winner among documented voters, if any.
fn vote(values: impl Iterator<Item = usize>, arity: usize) -> Option<usize> {
    let mut counts = vec![0usize; arity];
    for v in values {
        counts[v] += 1;
    }
    let best = *counts.iter().max()?;
    if best == 0 || counts.iter().filter(|&&c| c == best).count() > 1 {
        return None;
    }
    counts.iter().position(|&c| c == best)
}

/// Most frequent value, lowest index on ties.
fn global_majority(values: impl Iterator<Item = usize>, arity: usize) -> Option<usize> {
    let mut counts = vec![0usize; arity];
    for v in values {
        counts[v] += 1;
    }
    let best = *counts.iter().max()?;
    (best > 0).then(|| counts.iter().position(|&c| c == best).unwrap())
}

/// Runs the shared back-off loop over successively larger voter groups.
/// `groups` lists source positions per expansion step; the target is
/// never among them.
fn predict_feature(
    db: &WalsDatabase,
    source: &[String],
    rows: &[usize],
    target: usize,
    feature: usize,
    groups: &[Vec<usize>],
) -> FeaturePrediction {
    let arity = db.features()[feature].arity();
    let value_of = |pos: usize| {
        debug_assert_ne!(pos, target);
        db.value(rows[pos], feature)
    };
    let documented = |group: &[usize]| -> Vec<usize> {
        group.iter().copied().filter(|&p| value_of(p).is_some()).collect()
    };
    let feature_id = db.features()[feature].id.clone();
    let make = |value: Option<usize>, voters: Vec<usize>, depth: usize, fallback: bool| FeaturePrediction {
        feature,
        feature_id: feature_id.clone(),
        value,
        value_label: value.map(|v| db.features()[feature].values[v].clone()),
        voters: voters.iter().map(|&p| source[p].clone()).collect(),
        backoff_depth: depth,
        global_fallback: fallback,
    };
    for (depth, group) in groups.iter().enumerate() {
        let voters = documented(group);
        if let Some(v) = vote(voters.iter().map(|&p| value_of(p).unwrap()), arity) {
            return make(Some(v), voters, depth, false);
        }
    }
    let everyone: Vec<usize> = (0..source.len()).filter(|&p| p != target).collect();
    let voters = documented(&everyone);
    match global_majority(voters.iter().map(|&p| value_of(p).unwrap()), arity) {
        Some(v) => make(Some(v), voters, groups.len(), true),
        None => make(None, Vec::new(), groups.len(), false),
    }
}

/// Non-target languages by descending similarity; ties go to the lower
/// language position.
pub fn neighbour_ranking<T: Scalar>(matrix: &SimilarityMatrix<T>, target: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..matrix.len()).filter(|&l| l != target).collect();
    others.sort_by(|&a, &b| {
        matrix
            .get(target, b)
            .partial_cmp(&matrix.get(target, a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    others
}

/// Majority vote among the `k` nearest languages, expanding one language at
/// a time while the vote is empty or tied.
pub fn knn_predict<T: Scalar>(
    db: &WalsDatabase,
    matrix: &SimilarityMatrix<T>,
    target: &str,
    features: &[usize],
    k: usize,
) -> Result<PredictionResult> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let (rows, t) = align(db, matrix.languages(), target)?;
    let ranking = neighbour_ranking(matrix, t);
    let start = k.min(ranking.len());
    let groups: Vec<Vec<usize>> = (start..=ranking.len()).map(|m| ranking[..m].to_vec()).collect();
    let predictions = features
        .par_iter()
        .map(|&f| predict_feature(db, matrix.languages(), &rows, t, f, &groups))
        .collect();
    Ok(PredictionResult {
        target: target.to_string(),
        method: format!("{k}nn"),
        predictions,
    })
}

/// Majority vote among the other members of the target's parent cluster,
/// backing off one tree level at a time.
pub fn tree_predict<T: Scalar>(
    db: &WalsDatabase,
    tree: &ClusterTree<T>,
    target: &str,
    features: &[usize],
) -> Result<PredictionResult> {
    let (rows, t) = align(db, &tree.leaves, target)?;
    let groups: Vec<Vec<usize>> = tree
        .ancestors(t)
        .into_iter()
        .map(|node| tree.members(node).into_iter().filter(|&l| l != t).collect())
        .collect();
    let predictions = features
        .par_iter()
        .map(|&f| predict_feature(db, &tree.leaves, &rows, t, f, &groups))
        .collect();
    Ok(PredictionResult {
        target: target.to_string(),
        method: "tree".into(),
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{ClusterTree, Merge};
    use crate::similarity::SquareMatrix;
    use crate::wals::WalsFeature;

    const NAMES: [&str; 5] = ["L0", "L1", "L2", "L3", "L4"];

    fn db(cells: &[[Option<usize>; 1]]) -> WalsDatabase {
        let langs: Vec<String> = NAMES[..cells.len()].iter().map(|s| s.to_string()).collect();
        let features = vec![WalsFeature {
            id: "1A".into(),
            name: "f".into(),
            category: "Morphology".into(),
            values: vec!["A".into(), "B".into(), "C".into()],
        }];
        let flat = cells.iter().flat_map(|r| r.iter().copied()).collect();
        WalsDatabase::new(langs, features, flat).unwrap()
    }

    // similarity to L0 decreases with index
    fn matrix(n: usize) -> SimilarityMatrix<f64> {
        let langs: Vec<String> = NAMES[..n].iter().map(|s| s.to_string()).collect();
        SimilarityMatrix::from_square(SquareMatrix::from_fn(langs, |a, b| {
            if a == b {
                1.0
            } else {
                1.0 / (1.0 + (a + b) as f64)
            }
        }))
        .unwrap()
    }

    const A: Option<usize> = Some(0);
    const B: Option<usize> = Some(1);

    #[test]
    fn nearest_value_copied() {
        let d = db(&[[None], [B], [A], [A], [A]]);
        let r = knn_predict(&d, &matrix(5), "L0", &[0], 1).unwrap();
        assert_eq!(r.predictions[0].value, B);
        assert_eq!(r.predictions[0].voters, vec!["L1"]);
    }

    #[test]
    fn strict_majority() {
        let d = db(&[[None], [A], [A], [B], [B]]);
        let r = knn_predict(&d, &matrix(5), "L0", &[0], 3).unwrap();
        assert_eq!(r.predictions[0].value, A);
        assert_eq!(r.predictions[0].backoff_depth, 0);
    }

    #[test]
    fn tie_expands_by_one() {
        // voters (A, B, missing) tie 1-1; the fourth neighbour breaks it
        let d = db(&[[Some(2)], [A], [B], [None], [A]]);
        let r = knn_predict(&d, &matrix(5), "L0", &[0], 3).unwrap();
        let p = &r.predictions[0];
        assert_eq!(p.value, A);
        assert_eq!(p.backoff_depth, 1);
        assert_eq!(p.voters, vec!["L1", "L2", "L4"]);
        assert!(!p.global_fallback);
    }

    #[test]
    fn exhausted_tie_uses_lowest_value() {
        let d = db(&[[None], [B], [A], [None], [None]]);
        let r = knn_predict(&d, &matrix(5), "L0", &[0], 1).unwrap();
        assert_eq!(r.predictions[0].value, B);
        let r = knn_predict(&d, &matrix(5), "L0", &[0], 2).unwrap();
        assert_eq!(r.predictions[0].value, A);
        assert!(r.predictions[0].global_fallback);
    }

    #[test]
    fn unpredictable_when_nobody_documents() {
        let d = db(&[[A], [None], [None]]);
        let r = knn_predict(&d, &matrix(3), "L0", &[0], 1).unwrap();
        assert!(!r.predictions[0].is_predictable());
        assert!(r.predictions[0].voters.is_empty());
    }

    // ((L0,L1),(L2,L3))
    fn tree4() -> ClusterTree<f64> {
        ClusterTree {
            leaves: NAMES[..4].iter().map(|s| s.to_string()).collect(),
            merges: vec![
                Merge { left: 0, right: 1, height: 0.1, count: 2 },
                Merge { left: 2, right: 3, height: 0.2, count: 2 },
                Merge { left: 4, right: 5, height: 0.9, count: 4 },
            ],
        }
    }

    #[test]
    fn tree_parent_then_root() {
        let d = db(&[[None], [B], [A], [A]]);
        let r = tree_predict(&d, &tree4(), "L0", &[0]).unwrap();
        assert_eq!(r.predictions[0].value, B);
        assert_eq!(r.predictions[0].backoff_depth, 0);

        // sibling undocumented: back off to the root, A wins 2-0
        let d = db(&[[B], [None], [A], [A]]);
        let r = tree_predict(&d, &tree4(), "L0", &[0]).unwrap();
        assert_eq!(r.predictions[0].value, A);
        assert_eq!(r.predictions[0].backoff_depth, 1);
        assert_eq!(r.predictions[0].voters, vec!["L2", "L3"]);

        // L2's sibling L3 says B; parent vote wins over the global A majority
        let d = db(&[[A], [A], [None], [B]]);
        let r = tree_predict(&d, &tree4(), "L2", &[0]).unwrap();
        assert_eq!(r.predictions[0].value, B);
    }

    #[test]
    fn target_values_never_read() {
        let d1 = db(&[[A], [B], [A], [None], [B]]);
        let d2 = db(&[[Some(2)], [B], [A], [None], [B]]);
        for k in 1..=4 {
            let r1 = knn_predict(&d1, &matrix(5), "L0", &[0], k).unwrap();
            let r2 = knn_predict(&d2, &matrix(5), "L0", &[0], k).unwrap();
            assert_eq!(r1.predictions, r2.predictions);
        }
    }

    #[test]
    fn csv_output() {
        let d = db(&[[None], [B], [A]]);
        let r = knn_predict(&d, &matrix(3), "L0", &[0], 1).unwrap();
        assert_eq!(
            r.to_csv().unwrap(),
            "target,feature_id,predicted_value,voters,backoff_depth\nL0,1A,B,L1,0\n"
        );
        assert!(r.to_json().contains("\"backoff_depth\": 0"));
    }

    #[test]
    fn rejects_unknown_target_and_zero_k() {
        let d = db(&[[None], [B], [A]]);
        assert!(knn_predict(&d, &matrix(3), "XX", &[0], 1).is_err());
        assert!(knn_predict(&d, &matrix(3), "L0", &[0], 0).is_err());
    }
}
