//! Data files compiled into the binary.

use std::sync::{Arc, OnceLock};

use crate::corpus::{parse_translation, ParallelCorpus};
use crate::error::Result;
use crate::preprocess::Lemmatizer;

pub const STOPWORDS: &str = include_str!("../data/stopwords_en.txt");
pub const LEMMAS: &str = include_str!("../data/lemmas_en.tsv");
pub const AFINN: &str = include_str!("../data/afinn-111-subset.txt");
pub const SEED_LABELS: &str = include_str!("../data/seed_labels.tsv");
pub const CALIBRATION: &str = include_str!("../data/calibration.json");

/// Translation id and verse-line text, in report order.
pub const CORPORA: [(&str, &str); 5] = [
    ("KJV", include_str!("../data/corpus/kjv.txt")),
    ("ASV", include_str!("../data/corpus/asv.txt")),
    ("WEB", include_str!("../data/corpus/web.txt")),
    ("DRA", include_str!("../data/corpus/dra.txt")),
    ("BBE", include_str!("../data/corpus/bbe.txt")),
];

pub fn bundled_corpus() -> Result<ParallelCorpus> {
    let translations = CORPORA
        .iter()
        .map(|(id, text)| parse_translation(text.as_bytes(), id))
        .collect::<Result<Vec<_>>>()?;
    ParallelCorpus::new(translations)
}

pub fn lemmatizer() -> Arc<Lemmatizer> {
    static CELL: OnceLock<Arc<Lemmatizer>> = OnceLock::new();
    CELL.get_or_init(|| Arc::new(Lemmatizer::bundled())).clone()
}
