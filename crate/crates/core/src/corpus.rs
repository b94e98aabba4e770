//! Annotated ESL corpus: parsing, serialization and the stratified
//! train/heldout split.
//!
//! The on-disk format is a CoNLL-like text file. Each document opens with
//! `# doc_id = <id>` and `# native_language = <label>`, followed by sentence
//! blocks of tab-separated `INDEX FORM POS HEAD RELATION` lines. A blank
//! line closes a sentence; a second blank line (or the next `# doc_id`)
//! closes the document.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub pos: String,
    /// Index of the head token, 0 for the root.
    pub head: usize,
    pub relation: String,
}

pub type Sentence = Vec<Token>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub native_language: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

/// An immutable set of labelled documents. Languages are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    languages: Vec<String>,
    documents: Vec<Document>,
}

impl Corpus {
    /// Builds a corpus, validating every document and deriving the language
    /// set from the labels.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut ids = HashSet::new();
        let mut languages = BTreeSet::new();
        for doc in &documents {
            if !ids.insert(doc.id.as_str()) {
                return Err(Error::Corpus(format!("duplicate document id {}", doc.id)));
            }
            if doc.native_language.trim().is_empty() {
                return Err(Error::Corpus(format!(
                    "document {} has an empty native language",
                    doc.id
                )));
            }
            for (s, sentence) in doc.sentences.iter().enumerate() {
                validate_sentence(&doc.id, s + 1, sentence)?;
            }
            languages.insert(doc.native_language.clone());
        }
        Ok(Corpus {
            languages: languages.into_iter().collect(),
            documents,
        })
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn language_index(&self, language: &str) -> Option<usize> {
        self.languages.binary_search_by(|l| l.as_str().cmp(language)).ok()
    }

    /// Document count per language, in language order.
    pub fn documents_per_language(&self) -> Vec<usize> {
        let mut counts = vec![0; self.languages.len()];
        for doc in &self.documents {
            if let Some(i) = self.language_index(&doc.native_language) {
                counts[i] += 1;
            }
        }
        counts
    }

    pub fn mean_documents_per_language(&self) -> f64 {
        if self.languages.is_empty() {
            return 0.0;
        }
        self.documents.len() as f64 / self.languages.len() as f64
    }

    /// Serializes to the text format accepted by [`parse_corpus`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for doc in &self.documents {
            let _ = writeln!(out, "# doc_id = {}", doc.id);
            let _ = writeln!(out, "# native_language = {}", doc.native_language);
            for sentence in &doc.sentences {
                for t in sentence {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}",
                        t.index, t.form, t.pos, t.head, t.relation
                    );
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

fn validate_sentence(doc: &str, sentence: usize, tokens: &[Token]) -> Result<()> {
    let err = |message: String| Error::Sentence {
        document: doc.to_string(),
        sentence,
        message,
    };
    if tokens.is_empty() {
        return Err(err("empty sentence".into()));
    }
    let mut roots = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.index != i + 1 {
            return Err(err(format!(
                "token indices must run 1..n, found {} at position {}",
                t.index,
                i + 1
            )));
        }
        if t.head > tokens.len() {
            return Err(err(format!(
                "head index {} of token {} out of range 0..={}",
                t.head,
                t.index,
                tokens.len()
            )));
        }
        if t.head == t.index {
            return Err(err(format!("token {} is its own head", t.index)));
        }
        if t.pos.is_empty() || t.relation.is_empty() {
            return Err(err(format!("token {} has an empty POS or relation", t.index)));
        }
        if t.head == 0 {
            roots += 1;
        }
    }
    if roots != 1 {
        return Err(err(format!("expected exactly one root, found {roots}")));
    }
    Ok(())
}

#[derive(Default)]
struct PendingDoc {
    id: String,
    language: Option<String>,
    sentences: Vec<Sentence>,
    current: Sentence,
    start_line: usize,
}

impl PendingDoc {
    fn finish(mut self) -> Result<Document> {
        if !self.current.is_empty() {
            self.sentences.push(std::mem::take(&mut self.current));
        }
        let language = self.language.ok_or_else(|| Error::Parse {
            line: self.start_line,
            message: format!("document {} has no native_language line", self.id),
        })?;
        Ok(Document {
            id: self.id,
            native_language: language,
            sentences: self.sentences,
        })
    }
}

/// Parses the corpus text format.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut pending: Option<PendingDoc> = None;
    let mut blank_run = 0usize;

    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');

        if line.trim().is_empty() {
            blank_run += 1;
            if let Some(doc) = pending.as_mut() {
                if !doc.current.is_empty() {
                    let sentence = std::mem::take(&mut doc.current);
                    doc.sentences.push(sentence);
                }
                if blank_run >= 2 {
                    documents.push(pending.take().unwrap().finish()?);
                }
            }
            continue;
        }
        blank_run = 0;

        if let Some(comment) = line.strip_prefix('#') {
            let Some((key, value)) = comment.split_once('=') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "doc_id" => {
                    if let Some(doc) = pending.take() {
                        documents.push(doc.finish()?);
                    }
                    if value.is_empty() {
                        return Err(Error::Parse {
                            line: line_no,
                            message: "empty doc_id".into(),
                        });
                    }
                    pending = Some(PendingDoc {
                        id: value.to_string(),
                        start_line: line_no,
                        ..Default::default()
                    });
                }
                "native_language" => {
                    let doc = pending.as_mut().ok_or_else(|| Error::Parse {
                        line: line_no,
                        message: "native_language outside a document".into(),
                    })?;
                    if value.is_empty() {
                        return Err(Error::Parse {
                            line: line_no,
                            message: "empty native_language".into(),
                        });
                    }
                    doc.language = Some(value.to_string());
                }
                _ => {}
            }
            continue;
        }

        let doc = pending.as_mut().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "token line outside a document".into(),
        })?;
        doc.current.push(parse_token(line, line_no)?);
    }
    if let Some(doc) = pending.take() {
        documents.push(doc.finish()?);
    }
    Corpus::new(documents)
}

fn parse_token(line: &str, line_no: usize) -> Result<Token> {
    let fields: Vec<&str> = line.split('\t').collect();
    let bad = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    if fields.len() != 5 {
        return Err(bad(format!(
            "expected 5 tab-separated fields, found {}",
            fields.len()
        )));
    }
    let index: usize = fields[0]
        .parse()
        .map_err(|_| bad(format!("bad token index {:?}", fields[0])))?;
    if index == 0 {
        return Err(bad("token index must be >= 1".into()));
    }
    let head: usize = fields[3]
        .parse()
        .map_err(|_| bad(format!("bad head index {:?}", fields[3])))?;
    if fields[1].is_empty() || fields[2].is_empty() || fields[4].is_empty() {
        return Err(bad("empty FORM, POS or RELATION".into()));
    }
    Ok(Token {
        index,
        form: fields[1].to_string(),
        pos: fields[2].to_string(),
        head,
        relation: fields[4].to_string(),
    })
}

/// Per-language training count: nearest integer with ties up, clamped so
/// both sides keep at least one document.
pub fn stratified_train_count(n: usize, train_fraction: f64) -> usize {
    let raw = (train_fraction * n as f64 + 0.5 + 1e-9).floor() as usize;
    raw.clamp(1, n.saturating_sub(1).max(1))
}

/// Stratified split by native language. Documents of each language are
/// sorted by id and shuffled with a generator seeded from `seed`, so the
/// result does not depend on input order.
pub fn split_corpus(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} not in (0,1)"
        )));
    }
    let mut by_language: BTreeMap<&str, Vec<&Document>> = BTreeMap::new();
    for doc in corpus.documents() {
        by_language.entry(&doc.native_language).or_default().push(doc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut heldout = Vec::new();
    for (language, mut docs) in by_language {
        if docs.len() < 2 {
            return Err(Error::Stratify(language.to_string()));
        }
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        docs.shuffle(&mut rng);
        let k = stratified_train_count(docs.len(), train_fraction);
        let (a, b) = docs.split_at(k);
        train.extend(a.iter().map(|d| (*d).clone()));
        heldout.extend(b.iter().map(|d| (*d).clone()));
    }
    train.sort_by(|a, b| a.id.cmp(&b.id));
    heldout.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((Corpus::new(train)?, Corpus::new(heldout)?))
}
