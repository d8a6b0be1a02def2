//! Verse-aligned corpus: parsing, structural alignment and unit counts.
//!
//! Two input formats are accepted. The canonical one is one verse per line,
//! `<chapter>:<verse>` followed by a single TAB or space and the verse text.
//! Blank lines and lines starting with `#` are skipped. The alternative is a
//! CSV file whose header is `ref,text`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chapter and verse address, ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VerseRef {
    chapter: u32,
    verse: u32,
}

impl VerseRef {
    pub fn new(chapter: u32, verse: u32) -> Result<Self> {
        if chapter == 0 || verse == 0 {
            return Err(Error::Domain(format!(
                "verse reference {chapter}:{verse} must be 1-based"
            )));
        }
        Ok(VerseRef { chapter, verse })
    }

    pub fn chapter(self) -> u32 {
        self.chapter
    }

    pub fn verse(self) -> u32 {
        self.verse
    }
}

impl fmt::Display for VerseRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.chapter, self.verse)
    }
}

impl FromStr for VerseRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("malformed verse reference {s:?}"));
        let (c, v) = s.split_once(':').ok_or_else(bad)?;
        let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        if !digits(c) || !digits(v) {
            return Err(bad());
        }
        let chapter = c.parse().map_err(|_| bad())?;
        let verse = v.parse().map_err(|_| bad())?;
        VerseRef::new(chapter, verse)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verse {
    reference: VerseRef,
    raw_text: String,
}

impl Verse {
    pub fn new(reference: VerseRef, raw_text: impl Into<String>) -> Result<Self> {
        let raw_text = raw_text.into();
        if raw_text.trim().is_empty() {
            return Err(Error::Domain(format!("verse {reference} has no text")));
        }
        Ok(Verse {
            reference,
            raw_text,
        })
    }

    pub fn reference(&self) -> VerseRef {
        self.reference
    }

    pub fn raw_text(&self) -> &str {
        &self.raw_text
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chapter {
    number: u32,
    verses: Vec<Verse>,
}

impl Chapter {
    pub fn number(&self) -> u32 {
        self.number
    }

    pub fn verses(&self) -> &[Verse] {
        &self.verses
    }
}

/// One rendering of the text, verses grouped by chapter in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation {
    id: String,
    chapters: Vec<Chapter>,
}

impl Translation {
    /// Groups `verses` by chapter. References must be strictly increasing.
    pub fn from_verses(id: impl Into<String>, verses: Vec<Verse>) -> Result<Self> {
        let mut chapters: Vec<Chapter> = Vec::new();
        let mut previous: Option<VerseRef> = None;
        for verse in verses {
            let r = verse.reference;
            if let Some(p) = previous {
                if r <= p {
                    return Err(Error::Structure(format!(
                        "verse references must be strictly increasing ({r} after {p})"
                    )));
                }
            }
            previous = Some(r);
            match chapters.last_mut() {
                Some(ch) if ch.number == r.chapter => ch.verses.push(verse),
                _ => chapters.push(Chapter {
                    number: r.chapter,
                    verses: vec![verse],
                }),
            }
        }
        Ok(Translation {
            id: id.into(),
            chapters,
        })
    }

    /// Builds a translation from explicit chapters, which may be empty.
    pub fn from_chapters(id: impl Into<String>, chapters: Vec<(u32, Vec<Verse>)>) -> Result<Self> {
        let mut out = Vec::with_capacity(chapters.len());
        let mut last_chapter = 0;
        for (number, verses) in chapters {
            if number <= last_chapter {
                return Err(Error::Structure(format!(
                    "chapter numbers must be strictly increasing ({number} after {last_chapter})"
                )));
            }
            last_chapter = number;
            let mut last_verse = 0;
            for v in &verses {
                if v.reference.chapter != number || v.reference.verse <= last_verse {
                    return Err(Error::Structure(format!(
                        "verse {} is misplaced in chapter {number}",
                        v.reference
                    )));
                }
                last_verse = v.reference.verse;
            }
            out.push(Chapter { number, verses });
        }
        Ok(Translation {
            id: id.into(),
            chapters: out,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn chapters(&self) -> &[Chapter] {
        &self.chapters
    }

    pub fn chapter(&self, number: u32) -> Option<&Chapter> {
        self.chapters.iter().find(|c| c.number == number)
    }

    /// All verses in corpus order.
    pub fn verses(&self) -> impl Iterator<Item = &Verse> + '_ {
        self.chapters.iter().flat_map(|c| c.verses.iter())
    }

    pub fn verse_count(&self) -> usize {
        self.chapters.iter().map(|c| c.verses.len()).sum()
    }

    pub fn refs(&self) -> BTreeSet<VerseRef> {
        self.verses().map(|v| v.reference).collect()
    }

    /// Serializes to the canonical verse-line format.
    pub fn to_verse_lines(&self) -> String {
        let mut out = String::new();
        for v in self.verses() {
            out.push_str(&format!("{}\t{}\n", v.reference, v.raw_text));
        }
        out
    }
}

/// A non-empty set of translations with distinct ids.
#[derive(Debug, Clone)]
pub struct ParallelCorpus {
    translations: Vec<Translation>,
}

impl ParallelCorpus {
    pub fn new(translations: Vec<Translation>) -> Result<Self> {
        if translations.is_empty() {
            return Err(Error::Structure("corpus has no translations".into()));
        }
        let mut seen = HashSet::new();
        for t in &translations {
            if !seen.insert(t.id.as_str()) {
                return Err(Error::Structure(format!(
                    "translation id {:?} appears twice",
                    t.id
                )));
            }
        }
        Ok(ParallelCorpus { translations })
    }

    pub fn translations(&self) -> &[Translation] {
        &self.translations
    }

    pub fn get(&self, id: &str) -> Option<&Translation> {
        self.translations.iter().find(|t| t.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MismatchKind {
    /// Present in the reference translation, absent here.
    Missing,
    /// Present here, absent from the reference translation.
    Extra,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub translation_id: String,
    pub reference: VerseRef,
    pub kind: MismatchKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentReport {
    mismatches: Vec<Mismatch>,
}

impl AlignmentReport {
    pub fn aligned(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn mismatches(&self) -> &[Mismatch] {
        &self.mismatches
    }
}

/// Parses one translation from UTF-8 verse lines or `ref,text` CSV.
pub fn parse_translation<R: Read>(mut input: R, id: &str) -> Result<Translation> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(format!("<{id}>"), e))?;
    let text = match std::str::from_utf8(&bytes) {
        Ok(t) => t,
        Err(e) => {
            let line = 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
            return Err(Error::Encoding { line });
        }
    };
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    let rows = if header == Some("ref,text") {
        csv_rows(text)?
    } else {
        verse_line_rows(text)?
    };

    let mut verses = Vec::with_capacity(rows.len());
    let mut seen = HashSet::new();
    let mut previous: Option<VerseRef> = None;
    for (line, reference, raw) in rows {
        if !seen.insert(reference) {
            return Err(Error::DuplicateRef { line, reference });
        }
        if let Some(p) = previous {
            if reference < p {
                return Err(Error::OutOfOrder {
                    line,
                    reference,
                    previous: p,
                });
            }
        }
        previous = Some(reference);
        let verse = Verse::new(reference, raw).map_err(|_| Error::Parse {
            line,
            message: format!("verse {reference} has no text"),
        })?;
        verses.push(verse);
    }
    Translation::from_verses(id, verses)
}

fn verse_line_rows(text: &str) -> Result<Vec<(usize, VerseRef, String)>> {
    let mut rows = Vec::new();
    for (idx, line) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let split = line.find(['\t', ' ']);
        let (prefix, rest) = match split {
            Some(i) => (&line[..i], &line[i + 1..]),
            None => (line, ""),
        };
        let reference: VerseRef = prefix.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("expected `<chapter>:<verse>` prefix, found {prefix:?}"),
        })?;
        rows.push((line_no, reference, rest.to_string()));
    }
    Ok(rows)
}

fn csv_rows(text: &str) -> Result<Vec<(usize, VerseRef, String)>> {
    let body: String = text
        .split_inclusive('\n')
        .filter(|l| !l.starts_with('#'))
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let reference: VerseRef = record[0].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("malformed reference {:?}", &record[0]),
        })?;
        rows.push((line, reference, record[1].to_string()));
    }
    Ok(rows)
}

/// Compares every translation's reference set with the first translation's.
pub fn verify_alignment(corpus: &ParallelCorpus) -> AlignmentReport {
    let mut translations = corpus.translations().iter();
    let Some(first) = translations.next() else {
        return AlignmentReport { mismatches: vec![] };
    };
    let base = first.refs();
    let mut mismatches = Vec::new();
    for t in translations {
        let refs = t.refs();
        for r in base.difference(&refs) {
            mismatches.push(Mismatch {
                translation_id: t.id.clone(),
                reference: *r,
                kind: MismatchKind::Missing,
            });
        }
        for r in refs.difference(&base) {
            mismatches.push(Mismatch {
                translation_id: t.id.clone(),
                reference: *r,
                kind: MismatchKind::Extra,
            });
        }
    }
    AlignmentReport { mismatches }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// Whitespace-delimited tokens of the raw text.
    Tokens,
    /// Characters of the raw text, excluding line terminators.
    Characters,
}

pub fn count_units(translation: &Translation, chapter: u32, mode: CountMode) -> Result<usize> {
    let ch = translation
        .chapter(chapter)
        .ok_or_else(|| Error::ChapterNotFound {
            translation: translation.id.clone(),
            chapter,
        })?;
    Ok(ch
        .verses
        .iter()
        .map(|v| count_text(&v.raw_text, mode))
        .sum())
}

pub(crate) fn count_text(text: &str, mode: CountMode) -> usize {
    match mode {
        CountMode::Tokens => text.split_whitespace().count(),
        CountMode::Characters => text.chars().filter(|c| !matches!(c, '\n' | '\r')).count(),
    }
}
