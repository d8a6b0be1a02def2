//! Text normalization pipeline: NFC + whitespace collapse, punctuation
//! splitting, lowercasing, stopword removal and lemmatization.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use icu_normalizer::ComposingNormalizerBorrowed;
use serde::Serialize;

use crate::corpus::{Verse, VerseRef};
use crate::data;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenizedVerse {
    pub reference: VerseRef,
    pub tokens: Vec<String>,
}

/// Lowercase stopword set loaded from a one-word-per-line file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    pub fn parse(text: &str) -> Result<Self> {
        let mut words = BTreeSet::new();
        for (idx, line) in text.lines().enumerate() {
            let word = line.trim();
            if word.is_empty() || word.starts_with('#') {
                continue;
            }
            if word.chars().any(char::is_whitespace) || word.to_lowercase() != word {
                return Err(Error::Format {
                    line: idx + 1,
                    message: format!("stopword {word:?} must be a single lowercase word"),
                });
            }
            words.insert(word.to_string());
        }
        Ok(StopwordList { words })
    }

    pub fn bundled() -> Self {
        Self::parse(data::STOPWORDS).expect("bundled stopword list is valid")
    }

    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let joined: Vec<String> = words.into_iter().map(|w| w.as_ref().to_string()).collect();
        Self::parse(&joined.join("\n"))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Table-driven lemmatizer with deterministic English suffix rules.
///
/// A word found in the table maps to its entry. Otherwise one suffix rule is
/// applied and the result is lemmatized again, so every output is a fixed
/// point. Table targets are checked to be fixed points on load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lemmatizer {
    table: HashMap<String, String>,
}

impl Lemmatizer {
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (inflected, lemma) = line.split_once('\t').ok_or_else(|| Error::Format {
                line: idx + 1,
                message: "expected `inflected<TAB>lemma`".into(),
            })?;
            let (inflected, lemma) = (inflected.trim(), lemma.trim());
            if inflected.is_empty() || lemma.is_empty() || lemma.contains(char::is_whitespace) {
                return Err(Error::Format {
                    line: idx + 1,
                    message: "empty or multi-word lemma entry".into(),
                });
            }
            table.insert(inflected.to_lowercase(), lemma.to_lowercase());
        }
        let lemmatizer = Lemmatizer { table };
        let mut targets: Vec<&String> = lemmatizer.table.values().collect();
        targets.sort();
        for target in targets {
            let again = lemmatizer.lemma(target);
            if &again != target {
                return Err(Error::Invalid(format!(
                    "lemma table target {target:?} is not a base form (maps to {again:?})"
                )));
            }
        }
        Ok(lemmatizer)
    }

    pub fn bundled() -> Self {
        Self::parse(data::LEMMAS).expect("bundled lemma table is valid")
    }

    pub fn lemma(&self, word: &str) -> String {
        let mut current = word.to_string();
        loop {
            if let Some(target) = self.table.get(&current) {
                return target.clone();
            }
            match strip_suffix(&current) {
                Some(shorter) if shorter != current => current = shorter,
                _ => return current,
            }
        }
    }

    pub fn lemmatize(&self, tokens: &[String]) -> Vec<String> {
        tokens.iter().map(|t| self.lemma(t)).collect()
    }
}

fn is_vowel_at(chars: &[char], i: usize) -> bool {
    match chars[i] {
        'a' | 'e' | 'i' | 'o' | 'u' => true,
        'y' => i > 0 && !is_vowel_at(chars, i - 1),
        _ => false,
    }
}

fn has_vowel(chars: &[char]) -> bool {
    (0..chars.len()).any(|i| is_vowel_at(chars, i))
}

/// Number of vowel-consonant sequences.
fn measure(chars: &[char]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..chars.len() {
        let v = is_vowel_at(chars, i);
        if prev_vowel && !v {
            m += 1;
        }
        prev_vowel = v;
    }
    m
}

fn consonant(chars: &[char], i: usize) -> bool {
    !is_vowel_at(chars, i)
}

/// Whether a stem left by removing -ed/-ing/-eth/-est needs a final `e`.
fn needs_e(stem: &[char]) -> bool {
    let n = stem.len();
    if n < 2 {
        return false;
    }
    let last = stem[n - 1];
    let prev = stem[n - 2];
    let s: String = stem.iter().collect();
    if last == 'v' || (last == 'c' && prev != 'c') || (last == 'z' && prev != 'z') {
        return true;
    }
    if s.ends_with("dg") || s.ends_with("rg") || s.ends_with("lg") {
        return true;
    }
    if last == 'l' && matches!(prev, 'b' | 'p' | 'd' | 't' | 'g' | 'k' | 'f' | 'z' | 'c') {
        return true;
    }
    if n >= 3 {
        let before = n - 3;
        let cvc_tail = consonant(stem, before) && is_vowel_at(stem, n - 2) && consonant(stem, n - 1);
        if last == 's' && is_vowel_at(stem, n - 2) && is_vowel_at(stem, before) {
            return true;
        }
        if cvc_tail {
            let tail_rule = match (prev, last) {
                ('a' | 'i' | 'o', 's') => true,
                ('a' | 'i', 'r') | ('u', 'r') => true,
                ('i', 'n') => true,
                ('u' | 'o', 't') | ('a' | 'i', 'd') => n >= 5,
                _ => false,
            };
            if tail_rule {
                return true;
            }
            if measure(stem) == 1 && !matches!(last, 'w' | 'x' | 'y') {
                return true;
            }
        }
    }
    false
}

fn restore(stem: &[char]) -> String {
    let n = stem.len();
    let last = stem[n - 1];
    if n >= 2 && last == stem[n - 2] && consonant(stem, n - 1) && !matches!(last, 'l' | 's' | 'z') {
        return stem[..n - 1].iter().collect();
    }
    let mut s: String = stem.iter().collect();
    if needs_e(stem) {
        s.push('e');
    }
    s
}

/// One suffix-rule step; `None` when no rule applies.
fn strip_suffix(word: &str) -> Option<String> {
    if !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return None;
    }
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    if n < 4 {
        return None;
    }
    let ends = |suffix: &str| word.ends_with(suffix);
    let stem = |k: usize| &chars[..n - k];

    if ends("ies") && n > 4 {
        return Some(format!("{}y", &word[..n - 3]));
    }
    if ends("ied") && n > 4 {
        return Some(format!("{}y", &word[..n - 3]));
    }
    if ends("sses") || ends("ches") || ends("shes") || ends("xes") || ends("zes") {
        return Some(word[..n - 2].to_string());
    }
    if ends("s") {
        if ends("ss") || ends("us") || ends("is") || ends("ys") && n < 5 {
            return None;
        }
        return Some(word[..n - 1].to_string());
    }
    if ends("eed") {
        return None;
    }
    if ends("ed") {
        let st = stem(2);
        if st.len() >= 3 && has_vowel(st) {
            return Some(restore(st));
        }
        return None;
    }
    if ends("ing") {
        let st = stem(3);
        if st.len() >= 3 && has_vowel(st) {
            return Some(restore(st));
        }
        return None;
    }
    if ends("eth") {
        let st = stem(3);
        if st.len() >= 3 && has_vowel(st) {
            return Some(restore(st));
        }
        return None;
    }
    if ends("est") {
        let st = stem(3);
        if st.len() >= 4 && has_vowel(st) {
            return Some(restore(st));
        }
        return None;
    }
    None
}

/// Flags and word lists that drive [`preprocess_verse`].
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub remove_stopwords: bool,
    pub lemmatize: bool,
    pub keep_internal_apostrophes: bool,
    pub stopwords: Arc<StopwordList>,
    pub lemmatizer: Arc<Lemmatizer>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            remove_stopwords: true,
            lemmatize: true,
            keep_internal_apostrophes: false,
            stopwords: Arc::new(StopwordList::bundled()),
            lemmatizer: Arc::new(Lemmatizer::bundled()),
        }
    }
}

impl PreprocessConfig {
    /// Lowercasing only; no stopword removal or lemmatization.
    pub fn surface() -> Self {
        PreprocessConfig {
            remove_stopwords: false,
            lemmatize: false,
            ..Self::default()
        }
    }
}

fn nfc(text: &str) -> String {
    ComposingNormalizerBorrowed::new_nfc().normalize(text).into_owned()
}

/// Canonical composition, then every whitespace run becomes one space.
pub fn normalize(text: &str) -> String {
    let composed = nfc(text);
    let mut out = String::with_capacity(composed.len());
    for word in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

pub fn normalize_bytes(bytes: &[u8]) -> Result<String> {
    match std::str::from_utf8(bytes) {
        Ok(s) => Ok(normalize(s)),
        Err(e) => Err(Error::Encoding {
            line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        }),
    }
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

/// Splits at every non-alphanumeric character.
pub fn tokenize(text: &str, config: &PreprocessConfig) -> Vec<String> {
    let text = if config.lowercase {
        nfc(&text.to_lowercase())
    } else {
        text.to_string()
    };
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
            continue;
        }
        let internal = config.keep_internal_apostrophes
            && is_apostrophe(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if internal {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

pub fn remove_stopwords(tokens: &[String], config: &PreprocessConfig) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !config.stopwords.contains(t))
        .cloned()
        .collect()
}

/// Lemmatizes with the bundled table.
pub fn lemmatize(tokens: &[String]) -> Vec<String> {
    data::lemmatizer().lemmatize(tokens)
}

/// Token streams before and after lemmatization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stages {
    pub surface: Vec<String>,
    pub lemmas: Vec<String>,
}

/// Runs the pipeline and keeps the pre-lemmatization tokens as well.
pub fn preprocess_stages(text: &str, config: &PreprocessConfig) -> Stages {
    let mut tokens = tokenize(&normalize(text), config);
    if config.remove_stopwords {
        tokens = remove_stopwords(&tokens, config);
    }
    if !config.lemmatize {
        return Stages {
            lemmas: tokens.clone(),
            surface: tokens,
        };
    }
    let mut lemmas = config.lemmatizer.lemmatize(&tokens);
    if config.remove_stopwords {
        // archaic forms such as "doth" lemmatize onto stopwords
        lemmas = remove_stopwords(&lemmas, config);
    }
    Stages {
        surface: tokens,
        lemmas,
    }
}

pub fn preprocess_text(text: &str, config: &PreprocessConfig) -> Vec<String> {
    preprocess_stages(text, config).lemmas
}

pub fn preprocess_verse(verse: &Verse, config: &PreprocessConfig) -> TokenizedVerse {
    TokenizedVerse {
        reference: verse.reference(),
        tokens: preprocess_text(verse.raw_text(), config),
    }
}
