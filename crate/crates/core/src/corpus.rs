//! Science texts with target sentences, corpus loading and per-session text
//! selection.
//!
//! A corpus is a directory of JSON documents, one text per file:
//!
//! ```json
//! { "id": "water-ph", "title": "Water Quality",
//!   "sentences": ["...", "...", "..."], "targets": [2, 3] }
//! ```
//!
//! Sentence numbers in `targets` are 1-based. A single `.jsonl` file holding
//! one such document per line is accepted as well.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TextId(String);

impl TextId {
    pub fn new(id: impl Into<String>) -> Self {
        TextId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TextId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextRecord {
    pub id: TextId,
    pub title: String,
    pub sentences: Vec<String>,
    pub targets: Vec<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("text has no sentences")]
    NoSentences,
    #[error("text has no target sentences")]
    NoTargets,
    #[error("field `targets`: target {target} outside 1..={len}")]
    TargetOutOfRange { target: usize, len: usize },
    #[error("field `targets`: not strictly increasing at position {position}")]
    TargetsNotIncreasing { position: usize },
}

impl TextRecord {
    pub fn validate(&self) -> Result<(), RecordError> {
        if self.sentences.is_empty() {
            return Err(RecordError::NoSentences);
        }
        if self.targets.is_empty() {
            return Err(RecordError::NoTargets);
        }
        let len = self.sentences.len();
        for (i, &t) in self.targets.iter().enumerate() {
            if t == 0 || t > len {
                return Err(RecordError::TargetOutOfRange { target: t, len });
            }
            if i > 0 && self.targets[i - 1] >= t {
                return Err(RecordError::TargetsNotIncreasing { position: i });
            }
        }
        Ok(())
    }

    /// The sentence (1-based index) that a reader self-explains on `turn`.
    pub fn target_sentence(&self, turn: usize) -> Option<&str> {
        let idx = *self.targets.get(turn.checked_sub(1)?)?;
        self.sentences.get(idx - 1).map(String::as_str)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("turn {turn} is beyond the last target (text has {targets} targets)")]
pub struct RevealError {
    pub turn: usize,
    pub targets: usize,
}

/// Sentences visible on a given turn of a text: from the first sentence up to
/// and including that turn's target, 1-based and inclusive.
pub fn reveal_window(text: &TextRecord, turn: usize) -> Result<RangeInclusive<usize>, RevealError> {
    match turn.checked_sub(1).and_then(|i| text.targets.get(i)) {
        Some(&upper) => Ok(1..=upper),
        None => Err(RevealError { turn, targets: text.targets.len() }),
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: malformed record: {message}")]
    Malformed { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: text `{id}`: {source}")]
    Invalid { path: PathBuf, id: TextId, source: RecordError },
    #[error("{path}: duplicate text id `{id}`")]
    DuplicateId { path: PathBuf, id: TextId },
    #[error("corpus is empty")]
    Empty,
}

/// Immutable set of validated texts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    texts: Vec<TextRecord>,
}

impl Corpus {
    pub fn from_records(records: Vec<TextRecord>) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::default();
        for r in records {
            corpus.insert(Path::new("<memory>"), r)?;
        }
        if corpus.texts.is_empty() {
            return Err(CorpusError::Empty);
        }
        Ok(corpus)
    }

    /// Loads a directory of `*.json` records, or a single `.json` / `.jsonl` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
        let meta = fs::metadata(path).map_err(io_err)?;
        let mut corpus = Corpus::default();
        if meta.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(path)
                .map_err(io_err)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json" || x == "jsonl"))
                .collect();
            files.sort();
            for f in files {
                corpus.load_file(&f)?;
            }
        } else {
            corpus.load_file(path)?;
        }
        if corpus.texts.is_empty() {
            return Err(CorpusError::Empty);
        }
        Ok(corpus)
    }

    fn load_file(&mut self, path: &Path) -> Result<(), CorpusError> {
        let raw = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        let malformed = |e: serde_json::Error, line_offset: usize| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: e.line() + line_offset,
            column: e.column(),
            message: e.to_string(),
        };
        if path.extension().is_some_and(|x| x == "jsonl") {
            for (i, line) in raw.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let record = serde_json::from_str(line).map_err(|e| malformed(e, i))?;
                self.insert(path, record)?;
            }
        } else {
            let record = serde_json::from_str(&raw).map_err(|e| malformed(e, 0))?;
            self.insert(path, record)?;
        }
        Ok(())
    }

    fn insert(&mut self, path: &Path, record: TextRecord) -> Result<(), CorpusError> {
        record.validate().map_err(|source| CorpusError::Invalid {
            path: path.to_path_buf(),
            id: record.id.clone(),
            source,
        })?;
        if self.get(&record.id).is_some() {
            return Err(CorpusError::DuplicateId { path: path.to_path_buf(), id: record.id });
        }
        self.texts.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn texts(&self) -> &[TextRecord] {
        &self.texts
    }

    pub fn get(&self, id: &TextId) -> Option<&TextRecord> {
        self.texts.iter().find(|t| &t.id == id)
    }
}

/// Tracks which texts a room has already played so texts do not repeat until
/// the corpus is exhausted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusSession {
    available: BTreeSet<TextId>,
    used: BTreeSet<TextId>,
    rng: ChaCha8Rng,
}

impl CorpusSession {
    pub fn new(corpus: &Corpus, seed: u64) -> Self {
        CorpusSession {
            available: corpus.texts.iter().map(|t| t.id.clone()).collect(),
            used: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn available(&self) -> &BTreeSet<TextId> {
        &self.available
    }

    pub fn used(&self) -> &BTreeSet<TextId> {
        &self.used
    }

    /// Draws uniformly among unused texts. Once everything has been used the
    /// used set is recycled.
    pub fn select_text<'c>(&mut self, corpus: &'c Corpus) -> Result<&'c TextRecord, CorpusError> {
        if corpus.is_empty() {
            return Err(CorpusError::Empty);
        }
        self.available.retain(|id| corpus.get(id).is_some());
        if self.available.is_empty() {
            log::info!("all {} texts used; recycling corpus", corpus.len());
            self.used.clear();
            self.available = corpus.texts.iter().map(|t| t.id.clone()).collect();
        }
        let pick = self.rng.gen_range(0..self.available.len());
        let id = self.available.iter().nth(pick).cloned().expect("index in range");
        self.available.remove(&id);
        self.used.insert(id.clone());
        Ok(corpus.get(&id).expect("available ids come from the corpus"))
    }
}
