//! Ten-way multi-label sentiment: label sets, thresholding, the prediction
//! interchange format, per-scope aggregation and a seed-lexicon baseline.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{ParallelCorpus, Translation, VerseRef};
use crate::data;
use crate::error::{Error, Result};
use crate::preprocess::{preprocess_verse, PreprocessConfig, TokenizedVerse};

pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SentimentLabel {
    Optimistic,
    Thankful,
    Empathetic,
    Pessimistic,
    Anxious,
    Sad,
    Annoyed,
    Denial,
    Surprise,
    Joking,
}

impl SentimentLabel {
    /// Frozen index order.
    pub const ALL: [SentimentLabel; 10] = [
        SentimentLabel::Optimistic,
        SentimentLabel::Thankful,
        SentimentLabel::Empathetic,
        SentimentLabel::Pessimistic,
        SentimentLabel::Anxious,
        SentimentLabel::Sad,
        SentimentLabel::Annoyed,
        SentimentLabel::Denial,
        SentimentLabel::Surprise,
        SentimentLabel::Joking,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SentimentLabel::Optimistic => "optimistic",
            SentimentLabel::Thankful => "thankful",
            SentimentLabel::Empathetic => "empathetic",
            SentimentLabel::Pessimistic => "pessimistic",
            SentimentLabel::Anxious => "anxious",
            SentimentLabel::Sad => "sad",
            SentimentLabel::Annoyed => "annoyed",
            SentimentLabel::Denial => "denial",
            SentimentLabel::Surprise => "surprise",
            SentimentLabel::Joking => "joking",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SentimentLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SentimentLabel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown sentiment label {s:?}")))
    }
}

/// Set of labels stored as a 10-bit mask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelSet(u16);

impl LabelSet {
    pub const EMPTY: LabelSet = LabelSet(0);

    pub fn from_bits(bits: u16) -> Result<Self> {
        if bits >> 10 != 0 {
            return Err(Error::Domain(format!("label mask {bits:#x} has bits above 10")));
        }
        Ok(LabelSet(bits))
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn insert(&mut self, label: SentimentLabel) {
        self.0 |= 1 << label.index();
    }

    pub fn contains(self, label: SentimentLabel) -> bool {
        self.0 & (1 << label.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersection(self, other: LabelSet) -> LabelSet {
        LabelSet(self.0 & other.0)
    }

    pub fn union(self, other: LabelSet) -> LabelSet {
        LabelSet(self.0 | other.0)
    }

    pub fn is_subset(self, other: LabelSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = SentimentLabel> {
        SentimentLabel::ALL.into_iter().filter(move |l| self.contains(*l))
    }

    pub fn names(self) -> Vec<&'static str> {
        self.iter().map(SentimentLabel::name).collect()
    }

    pub fn parse_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        names.iter().map(|n| n.as_ref().parse()).collect()
    }
}

impl FromIterator<SentimentLabel> for LabelSet {
    fn from_iter<I: IntoIterator<Item = SentimentLabel>>(iter: I) -> Self {
        let mut set = LabelSet::EMPTY;
        for label in iter {
            set.insert(label);
        }
        set
    }
}

/// `|`-joined names, or the empty string.
impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join("|"))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("tau must lie in (0, 1), got {tau}")))
    }
}

/// Labels whose score is at least `tau`.
pub fn threshold(scores: &[f64; 10], tau: f64) -> Result<LabelSet> {
    check_tau(tau)?;
    let mut set = LabelSet::EMPTY;
    for (label, &score) in SentimentLabel::ALL.iter().zip(scores) {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Domain(format!("score {score} for {label} is outside [0, 1]")));
        }
        if score >= tau {
            set.insert(*label);
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub translation_id: String,
    pub reference: VerseRef,
    pub scores: [f64; 10],
    pub labels: LabelSet,
    pub tau: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    translation: String,
    chapter: u32,
    verse: u32,
    scores: Vec<f64>,
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
}

fn invalid(record: usize, message: impl Into<String>) -> Error {
    Error::Validation {
        record,
        message: message.into(),
    }
}

fn record_to_prediction(index: usize, record: Record) -> Result<Prediction> {
    let reference = VerseRef::new(record.chapter, record.verse)
        .map_err(|e| invalid(index, e.to_string()))?;
    let scores: [f64; 10] = record.scores.as_slice().try_into().map_err(|_| {
        invalid(index, format!("expected 10 scores, found {}", record.scores.len()))
    })?;
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(invalid(index, format!("score {bad} is outside [0, 1]")));
    }
    let labels = LabelSet::parse_names(&record.labels).map_err(|e| invalid(index, e.to_string()))?;
    if let Some(tau) = record.tau {
        let expected = threshold(&scores, tau).map_err(|e| invalid(index, e.to_string()))?;
        if expected != labels {
            return Err(invalid(
                index,
                format!("labels [{labels}] disagree with scores at tau {tau} ([{expected}])"),
            ));
        }
    }
    Ok(Prediction {
        translation_id: record.translation,
        reference,
        scores,
        labels,
        tau: record.tau,
    })
}

/// Reads JSON-lines predictions. Record indices in errors count non-blank
/// lines from 1. When `corpus` is given every record must name one of its
/// translations and verses.
pub fn load_predictions<R: Read>(input: R, corpus: Option<&ParallelCorpus>) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let refs: Option<BTreeMap<&str, BTreeSet<VerseRef>>> =
        corpus.map(|c| c.translations().iter().map(|t| (t.id(), t.refs())).collect());
    let mut index = 0;
    for line in BufReader::new(input).lines() {
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::Validation {
                record: index + 1,
                message: "invalid UTF-8".into(),
            },
            _ => Error::io("<predictions>", e),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        index += 1;
        let record: Record =
            serde_json::from_str(&line).map_err(|e| invalid(index, format!("malformed record: {e}")))?;
        let prediction = record_to_prediction(index, record)?;
        if let Some(refs) = &refs {
            let known = refs.get(prediction.translation_id.as_str()).ok_or_else(|| {
                invalid(index, format!("unknown translation {:?}", prediction.translation_id))
            })?;
            if !known.contains(&prediction.reference) {
                return Err(invalid(
                    index,
                    format!("unknown verse {} in {}", prediction.reference, prediction.translation_id),
                ));
            }
        }
        if !seen.insert((prediction.translation_id.clone(), prediction.reference)) {
            return Err(invalid(
                index,
                format!("duplicate record for {} {}", prediction.translation_id, prediction.reference),
            ));
        }
        out.push(prediction);
    }
    Ok(out)
}

/// JSON lines ordered by (translation, chapter, verse).
pub fn emit_predictions(predictions: &[Prediction]) -> Vec<u8> {
    let mut sorted: Vec<&Prediction> = predictions.iter().collect();
    sorted.sort_by(|a, b| {
        a.translation_id
            .cmp(&b.translation_id)
            .then(a.reference.cmp(&b.reference))
    });
    let mut out = Vec::new();
    for p in sorted {
        let record = Record {
            translation: p.translation_id.clone(),
            chapter: p.reference.chapter(),
            verse: p.reference.verse(),
            scores: p.scores.to_vec(),
            labels: p.labels.names().into_iter().map(String::from).collect(),
            tau: p.tau,
        };
        serde_json::to_writer(&mut out, &record).expect("records serialize");
        out.push(b'\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    All,
    Chapter(u32),
}

impl Scope {
    pub fn contains(self, reference: VerseRef) -> bool {
        match self {
            Scope::All => true,
            Scope::Chapter(c) => reference.chapter() == c,
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::All => f.write_str("all"),
            Scope::Chapter(c) => write!(f, "{c}"),
        }
    }
}

/// Per-translation count of verses carrying each label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentimentMatrix {
    pub scope: Scope,
    rows: Vec<(String, [u64; 10])>,
    verses: Vec<u64>,
}

impl SentimentMatrix {
    /// Translation ids in order of first appearance.
    pub fn rows(&self) -> impl Iterator<Item = (&str, &[u64; 10])> {
        self.rows.iter().map(|(id, cells)| (id.as_str(), cells))
    }

    pub fn get(&self, translation: &str, label: SentimentLabel) -> u64 {
        self.row(translation).map_or(0, |r| r[label.index()])
    }

    pub fn row(&self, translation: &str) -> Option<&[u64; 10]> {
        self.rows.iter().find(|(id, _)| id == translation).map(|(_, r)| r)
    }

    /// Verses of `translation` that fell inside the scope.
    pub fn verses_in_scope(&self, translation: &str) -> u64 {
        self.rows
            .iter()
            .position(|(id, _)| id == translation)
            .map_or(0, |i| self.verses[i])
    }

    pub fn column_total(&self, label: SentimentLabel) -> u64 {
        self.rows.iter().map(|(_, r)| r[label.index()]).sum()
    }
}

pub fn cumulative_counts(predictions: &[Prediction], scope: Scope) -> SentimentMatrix {
    let mut matrix = SentimentMatrix {
        scope,
        rows: Vec::new(),
        verses: Vec::new(),
    };
    for p in predictions.iter().filter(|p| scope.contains(p.reference)) {
        let i = match matrix.rows.iter().position(|(id, _)| *id == p.translation_id) {
            Some(i) => i,
            None => {
                matrix.rows.push((p.translation_id.clone(), [0; 10]));
                matrix.verses.push(0);
                matrix.rows.len() - 1
            }
        };
        matrix.verses[i] += 1;
        for label in p.labels.iter() {
            matrix.rows[i].1[label.index()] += 1;
        }
    }
    matrix
}

/// Hand-curated token sets per label for [`baseline_classify`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SeedLexicons {
    sets: BTreeMap<SentimentLabel, BTreeSet<String>>,
}

impl SeedLexicons {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sets: BTreeMap<SentimentLabel, BTreeSet<String>> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, tokens) = line.split_once('\t').ok_or_else(|| Error::Format {
                line: idx + 1,
                message: "expected `label<TAB>tokens`".into(),
            })?;
            let label: SentimentLabel = name.trim().parse().map_err(|e: Error| Error::Format {
                line: idx + 1,
                message: e.to_string(),
            })?;
            sets.entry(label)
                .or_default()
                .extend(tokens.split_whitespace().map(str::to_lowercase));
        }
        Ok(SeedLexicons { sets })
    }

    pub fn bundled() -> Self {
        Self::parse(data::SEED_LABELS).expect("bundled seed lexicons are valid")
    }

    pub fn from_sets<I, S>(sets: I) -> Self
    where
        I: IntoIterator<Item = (SentimentLabel, Vec<S>)>,
        S: Into<String>,
    {
        let mut out = SeedLexicons::default();
        for (label, tokens) in sets {
            out.sets
                .entry(label)
                .or_default()
                .extend(tokens.into_iter().map(Into::into));
        }
        out
    }

    pub fn tokens(&self, label: SentimentLabel) -> Option<&BTreeSet<String>> {
        self.sets.get(&label)
    }
}

pub fn baseline_classify(verse: &TokenizedVerse, seeds: &SeedLexicons) -> LabelSet {
    seeds
        .sets
        .iter()
        .filter(|(_, set)| verse.tokens.iter().any(|t| set.contains(t)))
        .map(|(label, _)| *label)
        .collect()
}

/// Baseline labels for every verse, as predictions with 0/1 scores.
pub fn baseline_predictions(
    translation: &Translation,
    config: &PreprocessConfig,
    seeds: &SeedLexicons,
) -> Vec<Prediction> {
    translation
        .verses()
        .map(|v| {
            let labels = baseline_classify(&preprocess_verse(v, config), seeds);
            let mut scores = [0.0; 10];
            for label in labels.iter() {
                scores[label.index()] = 1.0;
            }
            Prediction {
                translation_id: translation.id().to_string(),
                reference: v.reference(),
                scores,
                labels,
                tau: Some(DEFAULT_TAU),
            }
        })
        .collect()
}
