//! Language × language similarity matrices and the classifier-confusion
//! construction.

use std::io::{BufRead, Read};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nli::{LabeledVector, NliModel};
use crate::scalar::{format_significant, Scalar};

/// Square matrix indexed by an ordered language list.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    pub languages: Vec<String>,
    values: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn from_fn(languages: Vec<String>, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let n = languages.len();
        let mut values = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                values.push(f(a, b));
            }
        }
        SquareMatrix { languages, values }
    }

    pub fn len(&self) -> usize {
        self.languages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty()
    }

    pub fn get(&self, a: usize, b: usize) -> T {
        self.values[a * self.languages.len() + b]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.values
            .chunks(self.languages.len().max(1))
            .map(<[T]>::to_vec)
            .collect()
    }
}

/// Symmetric matrix with unit diagonal and off-diagonals in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    inner: SquareMatrix<T>,
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    languages: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    /// Validates every invariant.
    pub fn new(languages: Vec<String>, rows: Vec<Vec<T>>) -> Result<Self> {
        let n = languages.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!("similarity matrix must be {n}x{n}")));
        }
        let matrix = SquareMatrix::from_fn(languages, |a, b| rows[a][b]);
        Self::from_square(matrix)
    }

    pub fn from_square(matrix: SquareMatrix<T>) -> Result<Self> {
        let n = matrix.len();
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = matrix.languages.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::invalid(format!("duplicate language {dup}")));
        }
        for a in 0..n {
            if matrix.get(a, a) != T::one() {
                return Err(Error::invalid(format!(
                    "diagonal entry for {} is {}, expected 1",
                    matrix.languages[a],
                    matrix.get(a, a)
                )));
            }
            for b in 0..n {
                let v = matrix.get(a, b);
                if !(v >= T::zero() && v <= T::one()) {
                    return Err(Error::invalid(format!(
                        "entry ({}, {}) = {v} outside [0, 1]",
                        matrix.languages[a], matrix.languages[b]
                    )));
                }
                if v != matrix.get(b, a) {
                    return Err(Error::invalid(format!(
                        "asymmetric entries for ({}, {})",
                        matrix.languages[a], matrix.languages[b]
                    )));
                }
            }
        }
        Ok(SimilarityMatrix { inner: matrix })
    }

    pub fn languages(&self) -> &[String] {
        &self.inner.languages
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn get(&self, a: usize, b: usize) -> T {
        self.inner.get(a, b)
    }

    pub fn index_of(&self, language: &str) -> Option<usize> {
        self.inner.languages.iter().position(|l| l == language)
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.inner.rows()
    }

    /// `1 - S`, the distance input to clustering.
    pub fn to_distances(&self) -> SquareMatrix<T> {
        SquareMatrix::from_fn(self.inner.languages.clone(), |a, b| {
            if a == b {
                T::zero()
            } else {
                T::one() - self.get(a, b)
            }
        })
    }

    /// Applies `f` to every off-diagonal entry. `f` must map `[0,1]` into
    /// itself.
    pub fn map_off_diagonal(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::from_square(SquareMatrix::from_fn(self.inner.languages.clone(), |a, b| {
            if a == b {
                T::one()
            } else {
                f(self.get(a, b))
            }
        }))
    }

    /// Reorders rows and columns to follow `languages`.
    pub fn reorder(&self, languages: &[String]) -> Result<Self> {
        let idx: Vec<usize> = languages
            .iter()
            .map(|l| {
                self.index_of(l)
                    .ok_or_else(|| Error::invalid(format!("language {l} missing from matrix")))
            })
            .collect::<Result<_>>()?;
        if idx.len() != self.len() {
            return Err(Error::invalid("language sets differ"));
        }
        Self::from_square(SquareMatrix::from_fn(languages.to_vec(), |a, b| {
            self.get(idx[a], idx[b])
        }))
    }

    /// CSV with a header row and a leading language column, 9 significant
    /// digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("language");
        for l in self.languages() {
            out.push(',');
            out.push_str(&csv_field(l));
        }
        out.push('\n');
        for (a, l) in self.languages().iter().enumerate() {
            out.push_str(&csv_field(l));
            for b in 0..self.len() {
                out.push(',');
                out.push_str(&format_significant(self.get(a, b).as_f64(), 9));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        let languages: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let name = record.get(0).unwrap_or_default();
            if languages.get(i).map(String::as_str) != Some(name) {
                return Err(Error::Parse {
                    line: i + 2,
                    message: format!("row label {name:?} does not match header order"),
                });
            }
            let row: Vec<T> = record
                .iter()
                .skip(1)
                .map(|cell| {
                    cell.trim().parse::<T>().map_err(|_| Error::Parse {
                        line: i + 2,
                        message: format!("bad number {cell:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        Self::new(languages, rows)
    }

    pub fn to_json(&self) -> String {
        let json = MatrixJson {
            languages: self.languages().to_vec(),
            values: self
                .rows()
                .into_iter()
                .map(|r| r.into_iter().map(Scalar::as_f64).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&json).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: MatrixJson = serde_json::from_str(text)?;
        let rows = json
            .values
            .into_iter()
            .map(|r| r.into_iter().map(T::of).collect())
            .collect();
        Self::new(json.languages, rows)
    }

    /// Loads CSV, or JSON when the content starts with `{`.
    pub fn read_auto<R: BufRead>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        if text.trim_start().starts_with('{') {
            Self::from_json(&text)
        } else {
            Self::from_csv(text.as_bytes())
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Row-wise mean posterior of competing languages, unit diagonal:
/// `S'[y, y'] = mean_{x ∈ D_y} p(y' | x)`.
pub fn confusion_similarity<T: Scalar>(
    model: &NliModel<T>,
    data: &[LabeledVector<T>],
) -> Result<SquareMatrix<T>> {
    let n = model.n_languages();
    let mut sums = vec![T::zero(); n * n];
    let mut counts = vec![0usize; n];
    let posteriors: Vec<Vec<T>> = {
        use rayon::prelude::*;
        data.par_iter()
            .map(|d| model.posterior_dense(&d.features).probs)
            .collect()
    };
    for (d, p) in data.iter().zip(&posteriors) {
        counts[d.label] += 1;
        for (b, &pb) in p.iter().enumerate() {
            sums[d.label * n + b] += pb;
        }
    }
    raw_from_sums(&model.languages, &sums, &counts, 0)
}

/// Misclassification-count variant with add-one smoothing:
/// `S'[y, y'] = (#{argmax = y'} + 1) / (|D_y| + |Y|)`.
pub fn hard_confusion_similarity<T: Scalar>(
    model: &NliModel<T>,
    data: &[LabeledVector<T>],
) -> Result<SquareMatrix<T>> {
    let n = model.n_languages();
    let mut sums = vec![T::zero(); n * n];
    let mut counts = vec![0usize; n];
    for d in data {
        let predicted = model.posterior_dense(&d.features).argmax();
        counts[d.label] += 1;
        sums[d.label * n + predicted] += T::one();
    }
    for s in sums.iter_mut() {
        *s += T::one();
    }
    raw_from_sums(&model.languages, &sums, &counts, n)
}

fn raw_from_sums<T: Scalar>(
    languages: &[String],
    sums: &[T],
    counts: &[usize],
    extra: usize,
) -> Result<SquareMatrix<T>> {
    let n = languages.len();
    if let Some(a) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!(
            "language {} has no documents",
            languages[a]
        )));
    }
    Ok(SquareMatrix::from_fn(languages.to_vec(), |a, b| {
        if a == b {
            T::one()
        } else {
            sums[a * n + b] / T::of_usize(counts[a] + extra)
        }
    }))
}

/// `S[y, y'] = (S'[y, y'] + S'[y', y]) / 2` with unit diagonal.
pub fn symmetrize<T: Scalar>(raw: &SquareMatrix<T>) -> Result<SimilarityMatrix<T>> {
    let half = T::of(0.5);
    SimilarityMatrix::from_square(SquareMatrix::from_fn(raw.languages.clone(), |a, b| {
        if a == b {
            T::one()
        } else {
            // same operand order for (a,b) and (b,a) keeps the result bitwise symmetric
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            ((raw.get(lo, hi) + raw.get(hi, lo)) * half).min(T::one()).max(T::zero())
        }
    }))
}
