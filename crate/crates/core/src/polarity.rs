//! AFINN-style lexicon loading and integer polarity scoring.

use std::collections::BTreeMap;
use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Translation, VerseRef};
use crate::data;
use crate::error::{Error, Result};
use crate::preprocess::{preprocess_stages, Lemmatizer, PreprocessConfig, StopwordList};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, i32>,
    duplicates: usize,
    skipped_phrases: usize,
}

impl Lexicon {
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, i32)>,
        S: AsRef<str>,
    {
        let mut lexicon = Lexicon::default();
        for (idx, (word, score)) in entries.into_iter().enumerate() {
            lexicon.insert(idx + 1, word.as_ref(), score)?;
        }
        Ok(lexicon)
    }

    pub fn bundled() -> Self {
        parse_lexicon(data::AFINN).expect("bundled lexicon is valid")
    }

    fn insert(&mut self, line: usize, word: &str, score: i32) -> Result<()> {
        if !(-5..=5).contains(&score) {
            return Err(Error::Format {
                line,
                message: format!("score {score} for {word:?} is outside [-5, 5]"),
            });
        }
        if word.contains(char::is_whitespace) {
            self.skipped_phrases += 1;
            return Ok(());
        }
        if self.entries.insert(word.to_lowercase(), score).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    pub fn score(&self, token: &str) -> Option<i32> {
        self.entries.get(token).copied()
    }

    pub fn entries(&self) -> &BTreeMap<String, i32> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lines whose word had already been seen; the later score wins.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    /// Multi-word entries, which single-token matching cannot use.
    pub fn skipped_phrases(&self) -> usize {
        self.skipped_phrases
    }
}

fn parse_lexicon(text: &str) -> Result<Lexicon> {
    let mut lexicon = Lexicon::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, score) = line.rsplit_once('\t').ok_or_else(|| Error::Format {
            line: line_no,
            message: "expected `word<TAB>score`".into(),
        })?;
        let score: i32 = score.trim().parse().map_err(|_| Error::Format {
            line: line_no,
            message: format!("score {:?} is not an integer", score.trim()),
        })?;
        let word = word.trim();
        if word.is_empty() {
            return Err(Error::Format {
                line: line_no,
                message: "empty word".into(),
            });
        }
        lexicon.insert(line_no, word, score)?;
    }
    if lexicon.duplicates > 0 {
        log::warn!("lexicon: {} duplicate entries overridden", lexicon.duplicates);
    }
    Ok(lexicon)
}

pub fn load_lexicon<R: Read>(mut input: R) -> Result<Lexicon> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<lexicon>", e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Encoding {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
    })?;
    parse_lexicon(text.strip_prefix('\u{feff}').unwrap_or(text))
}

pub fn verse_polarity<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> i64 {
    tokens
        .iter()
        .filter_map(|t| lexicon.score(t.as_ref()))
        .map(i64::from)
        .sum()
}

/// Which token stream is looked up in the lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchStage {
    /// Final pipeline output.
    Lemmatized,
    /// Tokens before lemmatization (after stopword removal when enabled).
    Surface,
}

impl std::str::FromStr for MatchStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lemmatized" => Ok(MatchStage::Lemmatized),
            "surface" => Ok(MatchStage::Surface),
            other => Err(Error::Invalid(format!(
                "match stage must be `lemmatized` or `surface`, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for MatchStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatchStage::Lemmatized => "lemmatized",
            MatchStage::Surface => "surface",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolaritySeries {
    pub translation_id: String,
    pub points: Vec<(VerseRef, i64)>,
    pub chapter_totals: BTreeMap<u32, i64>,
}

impl PolaritySeries {
    pub fn from_points(translation_id: impl Into<String>, points: Vec<(VerseRef, i64)>) -> Self {
        let mut chapter_totals = BTreeMap::new();
        for (r, score) in &points {
            *chapter_totals.entry(r.chapter()).or_insert(0) += score;
        }
        PolaritySeries {
            translation_id: translation_id.into(),
            points,
            chapter_totals,
        }
    }
}

pub fn polarity_series(
    translation: &Translation,
    config: &PreprocessConfig,
    lexicon: &Lexicon,
) -> PolaritySeries {
    polarity_series_at(translation, config, lexicon, MatchStage::Lemmatized)
}

pub fn polarity_series_at(
    translation: &Translation,
    config: &PreprocessConfig,
    lexicon: &Lexicon,
    stage: MatchStage,
) -> PolaritySeries {
    let points = translation
        .verses()
        .map(|v| {
            let stages = preprocess_stages(v.raw_text(), config);
            let tokens = match stage {
                MatchStage::Lemmatized => &stages.lemmas,
                MatchStage::Surface => &stages.surface,
            };
            (v.reference(), verse_polarity(tokens, lexicon))
        })
        .collect();
    PolaritySeries::from_points(translation.id(), points)
}

/// Preprocessing switches swept by [`calibrate`]. Lowercasing is always on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub remove_stopwords: bool,
    pub lemmatize: bool,
    pub match_stage: MatchStage,
}

impl ScoringConfig {
    /// All eight combinations in sweep order.
    pub fn all() -> Vec<ScoringConfig> {
        let mut out = Vec::with_capacity(8);
        for remove_stopwords in [true, false] {
            for lemmatize in [true, false] {
                for match_stage in [MatchStage::Lemmatized, MatchStage::Surface] {
                    out.push(ScoringConfig {
                        remove_stopwords,
                        lemmatize,
                        match_stage,
                    });
                }
            }
        }
        out
    }

    pub fn preprocess(&self, stopwords: Arc<StopwordList>, lemmatizer: Arc<Lemmatizer>) -> PreprocessConfig {
        PreprocessConfig {
            lowercase: true,
            remove_stopwords: self.remove_stopwords,
            lemmatize: self.lemmatize,
            keep_internal_apostrophes: false,
            stopwords,
            lemmatizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationCandidate {
    pub config: ScoringConfig,
    pub totals: BTreeMap<u32, i64>,
    pub total_abs_deviation: i64,
    pub max_abs_deviation: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calibration {
    pub translation: String,
    pub targets: BTreeMap<u32, i64>,
    pub chosen: CalibrationCandidate,
    pub candidates: Vec<CalibrationCandidate>,
}

impl Calibration {
    pub fn bundled() -> Result<Self> {
        serde_json::from_str(data::CALIBRATION)
            .map_err(|e| Error::Invalid(format!("calibration file: {e}")))
    }
}

/// Sweeps [`ScoringConfig::all`] and keeps the configuration whose chapter
/// totals are closest to `targets` (sum of absolute deviations, then the
/// largest single deviation, then sweep order).
pub fn calibrate(
    translation: &Translation,
    lexicon: &Lexicon,
    stopwords: Arc<StopwordList>,
    lemmatizer: Arc<Lemmatizer>,
    targets: &BTreeMap<u32, i64>,
) -> Result<Calibration> {
    if targets.is_empty() {
        return Err(Error::Invalid("calibration needs at least one chapter target".into()));
    }
    for &chapter in targets.keys() {
        if translation.chapter(chapter).is_none() {
            return Err(Error::ChapterNotFound {
                translation: translation.id().to_string(),
                chapter,
            });
        }
    }
    let candidates: Vec<CalibrationCandidate> = ScoringConfig::all()
        .into_iter()
        .map(|config| {
            let pre = config.preprocess(stopwords.clone(), lemmatizer.clone());
            let series = polarity_series_at(translation, &pre, lexicon, config.match_stage);
            let totals: BTreeMap<u32, i64> = targets
                .keys()
                .map(|c| (*c, series.chapter_totals.get(c).copied().unwrap_or(0)))
                .collect();
            let deviations: Vec<i64> = targets.iter().map(|(c, t)| (totals[c] - t).abs()).collect();
            CalibrationCandidate {
                config,
                totals,
                total_abs_deviation: deviations.iter().sum(),
                max_abs_deviation: deviations.iter().copied().max().unwrap_or(0),
            }
        })
        .collect();
    let chosen = candidates
        .iter()
        .min_by_key(|c| (c.total_abs_deviation, c.max_abs_deviation))
        .expect("sweep is non-empty")
        .clone();
    Ok(Calibration {
        translation: translation.id().to_string(),
        targets: targets.clone(),
        chosen,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Verse;
    use proptest::prelude::*;

    fn lex(entries: &[(&str, i32)]) -> Lexicon {
        Lexicon::from_entries(entries.iter().copied()).unwrap()
    }

    #[test]
    fn load_examples() {
        let l = load_lexicon("abandon\t-2\n".as_bytes()).unwrap();
        assert_eq!(l.score("abandon"), Some(-2));
        assert!(load_lexicon("".as_bytes()).unwrap().is_empty());
        match load_lexicon("good\t3\nhappy\t9\n".as_bytes()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn load_rejects_non_integer_and_missing_tab() {
        assert!(matches!(load_lexicon("good\t2.5\n".as_bytes()), Err(Error::Format { line: 1, .. })));
        assert!(matches!(load_lexicon("\nbad -3\n".as_bytes()), Err(Error::Format { line: 2, .. })));
        assert!(matches!(load_lexicon(&b"ok\t1\n\xff\t1\n"[..]), Err(Error::Encoding { line: 2 })));
    }

    #[test]
    fn duplicates_override_and_phrases_skip() {
        let l = load_lexicon("good\t3\ncool stuff\t3\ngood\t2\n".as_bytes()).unwrap();
        assert_eq!(l.score("good"), Some(2));
        assert_eq!(l.duplicates(), 1);
        assert_eq!(l.skipped_phrases(), 1);
        assert_eq!(l.len(), 1);
    }

    #[test]
    fn bundled_lexicon_values() {
        let l = Lexicon::bundled();
        assert_eq!(l.score("abandon"), Some(-2));
        assert_eq!(l.score("good"), Some(3));
        assert_eq!(l.score("bad"), Some(-3));
        assert!(l.entries().values().all(|s| (-5..=5).contains(s)));
        assert!(l.entries().keys().all(|k| k.to_lowercase() == *k));
    }

    #[test]
    fn verse_scores() {
        let l = Lexicon::bundled();
        assert_eq!(verse_polarity(&["mountain", "disciple"], &l), 0);
        // good = 3 and bad = -3 in AFINN-111
        assert_eq!(verse_polarity(&["good", "good", "bad"], &l), 2 * 3 - 3);
        assert_eq!(verse_polarity::<&str>(&[], &l), 0);
    }

    #[test]
    fn stop_verse_scores_zero() {
        let t = Translation::from_verses(
            "T",
            vec![
                Verse::new(VerseRef::new(1, 1).unwrap(), "and it was so").unwrap(),
                Verse::new(VerseRef::new(1, 2).unwrap(), "for they are there").unwrap(),
            ],
        )
        .unwrap();
        let s = polarity_series(&t, &PreprocessConfig::default(), &Lexicon::bundled());
        assert!(s.points.iter().all(|(_, p)| *p == 0));
        assert_eq!(s.chapter_totals[&1], 0);
    }

    #[test]
    fn match_stage_changes_lookup() {
        let t = Translation::from_verses(
            "T",
            vec![Verse::new(VerseRef::new(1, 1).unwrap(), "they blessed us").unwrap()],
        )
        .unwrap();
        let l = lex(&[("blessed", 2), ("bless", 1)]);
        let cfg = PreprocessConfig::default();
        assert_eq!(polarity_series_at(&t, &cfg, &l, MatchStage::Lemmatized).chapter_totals[&1], 1);
        assert_eq!(polarity_series_at(&t, &cfg, &l, MatchStage::Surface).chapter_totals[&1], 2);
    }

    #[test]
    fn sweep_covers_eight_configs() {
        let all = ScoringConfig::all();
        assert_eq!(all.len(), 8);
        for (i, a) in all.iter().enumerate() {
            assert!(!all[i + 1..].contains(a));
        }
    }

    #[test]
    fn calibration_picks_smallest_deviation() {
        let t = Translation::from_verses(
            "T",
            vec![Verse::new(VerseRef::new(1, 1).unwrap(), "the blessed").unwrap()],
        )
        .unwrap();
        let l = lex(&[("blessed", 2), ("bless", 1), ("the", 5)]);
        let targets = BTreeMap::from([(1, 7)]);
        let c = calibrate(&t, &l, Arc::new(StopwordList::bundled()), data::lemmatizer(), &targets).unwrap();
        assert_eq!(c.candidates.len(), 8);
        assert_eq!(c.chosen.totals[&1], 7);
        // three configurations hit 7 exactly; the earliest in sweep order wins
        assert_eq!(
            c.chosen.config,
            ScoringConfig {
                remove_stopwords: false,
                lemmatize: true,
                match_stage: MatchStage::Surface
            }
        );
        assert!(calibrate(&t, &l, Arc::new(StopwordList::bundled()), data::lemmatizer(), &BTreeMap::from([(2, 0)])).is_err());
    }

    #[test]
    fn frozen_calibration_matches_a_fresh_sweep() {
        let frozen = Calibration::bundled().unwrap();
        let corpus = data::bundled_corpus().unwrap();
        let kjv = corpus.get(&frozen.translation).unwrap();
        let fresh = calibrate(
            kjv,
            &Lexicon::bundled(),
            Arc::new(StopwordList::bundled()),
            data::lemmatizer(),
            &frozen.targets,
        )
        .unwrap();
        assert_eq!(fresh, frozen);
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<(u32, Vec<String>)>> {
        let word = prop::sample::select(vec!["good", "bad", "love", "hate", "the", "beam", "evil", "blessed"]);
        prop::collection::vec(
            (1u32..4, prop::collection::vec(word.prop_map(String::from), 1..8)),
            1..30,
        )
    }

    fn build(raw: &[(u32, Vec<String>)]) -> Translation {
        let mut per_chapter: BTreeMap<u32, Vec<Verse>> = BTreeMap::new();
        for (chapter, words) in raw {
            let list = per_chapter.entry(*chapter).or_default();
            let r = VerseRef::new(*chapter, list.len() as u32 + 1).unwrap();
            list.push(Verse::new(r, words.join(" ")).unwrap());
        }
        Translation::from_verses("P", per_chapter.into_values().flatten().collect()).unwrap()
    }

    proptest! {
        #[test]
        fn chapter_totals_are_additive(raw in corpus_strategy()) {
            let s = polarity_series(&build(&raw), &PreprocessConfig::default(), &Lexicon::bundled());
            for (chapter, total) in &s.chapter_totals {
                let sum: i64 = s.points.iter().filter(|(r, _)| r.chapter() == *chapter).map(|(_, p)| p).sum();
                prop_assert_eq!(*total, sum);
            }
        }

        #[test]
        fn zero_lexicon_scores_zero(raw in corpus_strategy()) {
            let words = ["good", "bad", "love", "hate", "the", "beam", "evil", "bless"];
            let zero = Lexicon::from_entries(words.iter().map(|w| (*w, 0))).unwrap();
            let s = polarity_series(&build(&raw), &PreprocessConfig::default(), &zero);
            prop_assert!(s.points.iter().all(|(_, p)| *p == 0));
        }

        #[test]
        fn token_order_is_irrelevant(mut tokens in prop::collection::vec(prop::sample::select(vec!["good", "bad", "evil", "x"]), 0..20)) {
            let l = Lexicon::bundled();
            let before = verse_polarity(&tokens, &l);
            tokens.reverse();
            prop_assert_eq!(verse_polarity(&tokens, &l), before);
        }

        #[test]
        fn positive_verse_never_lowers_total(raw in corpus_strategy(), n in 1usize..5) {
            let l = Lexicon::bundled();
            let cfg = PreprocessConfig::default();
            let before = polarity_series(&build(&raw), &cfg, &l);
            let mut grown = raw.clone();
            grown.push((1, vec!["good".to_string(); n]));
            let after = polarity_series(&build(&grown), &cfg, &l);
            prop_assert!(after.chapter_totals[&1] >= before.chapter_totals.get(&1).copied().unwrap_or(0));
        }
    }
}
