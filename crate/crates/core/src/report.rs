//! Full pipeline run and deterministic emission of CSV/JSON artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::compare::{label_agreement, polarity_deviation, vocab_overlap, Agreement};
use crate::corpus::{parse_translation, verify_alignment, AlignmentReport, ParallelCorpus, Translation};
use crate::data;
use crate::error::{Error, Result};
use crate::labels::{
    baseline_predictions, cumulative_counts, load_predictions, Prediction, Scope, SeedLexicons,
    SentimentLabel, SentimentMatrix, DEFAULT_TAU,
};
use crate::ngrams::{extract_ngrams, top_k, Gram, NgramTable};
use crate::polarity::{load_lexicon, polarity_series_at, Calibration, Lexicon, MatchStage, PolaritySeries};
use crate::preprocess::{preprocess_verse, Lemmatizer, PreprocessConfig, StopwordList, TokenizedVerse};

/// Files written by [`run_pipeline`], besides the manifest.
pub const ARTIFACTS: [&str; 8] = [
    "alignment.json",
    "ngrams.csv",
    "polarity.csv",
    "chapter_totals.csv",
    "sentiment_matrix.csv",
    "agreement.csv",
    "overlap.csv",
    "deviation.csv",
];

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Empty means the bundled five-translation corpus.
    pub corpora: Vec<(String, PathBuf)>,
    pub lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub predictions: Vec<(String, PathBuf)>,
    pub out: PathBuf,
    pub lowercase: bool,
    pub remove_stopwords: bool,
    pub lemmatize: bool,
    pub keep_apostrophes: bool,
    pub match_stage: MatchStage,
    pub tau: f64,
    pub top_k: usize,
}

impl Default for RunConfig {
    /// Preprocessing flags follow the frozen calibration.
    fn default() -> Self {
        let chosen = Calibration::bundled()
            .expect("bundled calibration is valid")
            .chosen
            .config;
        RunConfig {
            corpora: Vec::new(),
            lexicon: None,
            stopwords: None,
            lemmas: None,
            seeds: None,
            predictions: Vec::new(),
            out: PathBuf::from("out"),
            lowercase: true,
            remove_stopwords: chosen.remove_stopwords,
            lemmatize: chosen.lemmatize,
            keep_apostrophes: false,
            match_stage: chosen.match_stage,
            tau: DEFAULT_TAU,
            top_k: 10,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Invalid(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn upsert(list: &mut Vec<(String, PathBuf)>, id: &str, path: PathBuf) {
    match list.iter_mut().find(|(k, _)| k == id) {
        Some(entry) => entry.1 = path,
        None => list.push((id.to_string(), path)),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting. Relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || base.join(value);
        if let Some(id) = key.strip_prefix("corpus.") {
            upsert(&mut self.corpora, id, path());
            return Ok(());
        }
        if let Some(id) = key.strip_prefix("predictions.") {
            upsert(&mut self.predictions, id, path());
            return Ok(());
        }
        match key {
            "lexicon" => self.lexicon = Some(path()),
            "stopwords" => self.stopwords = Some(path()),
            "lemmas" => self.lemmas = Some(path()),
            "seeds" => self.seeds = Some(path()),
            "out" => self.out = path(),
            "lowercase" => self.lowercase = parse_bool(key, value)?,
            "remove_stopwords" => self.remove_stopwords = parse_bool(key, value)?,
            "lemmatize" => self.lemmatize = parse_bool(key, value)?,
            "keep_apostrophes" => self.keep_apostrophes = parse_bool(key, value)?,
            "match_stage" => self.match_stage = value.parse()?,
            "tau" => {
                self.tau = value
                    .parse()
                    .map_err(|_| Error::Invalid(format!("tau: not a number: {value:?}")))?
            }
            "top_k" => {
                self.top_k = value
                    .parse()
                    .map_err(|_| Error::Invalid(format!("top_k: not a count: {value:?}")))?
            }
            other => return Err(Error::Invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Reads a config file of `key = value` lines or a JSON object and
    /// applies every setting on top of `self`.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for (key, value) in parse_config_text(&text)? {
            self.set(&key, &value, base)?;
        }
        Ok(())
    }

    pub fn preprocess(&self, stopwords: Arc<StopwordList>, lemmatizer: Arc<Lemmatizer>) -> PreprocessConfig {
        PreprocessConfig {
            lowercase: self.lowercase,
            remove_stopwords: self.remove_stopwords,
            lemmatize: self.lemmatize,
            keep_internal_apostrophes: self.keep_apostrophes,
            stopwords,
            lemmatizer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Domain(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if self.top_k == 0 {
            return Err(Error::Domain("top_k must be positive".into()));
        }
        Ok(())
    }
}

fn scalar(key: &str, value: &serde_json::Value) -> Result<String> {
    match value {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Bool(b) => Ok(b.to_string()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        _ => Err(Error::Invalid(format!("config key {key:?} needs a scalar value"))),
    }
}

/// `(key, value)` pairs from either config syntax; JSON keys come out sorted. Nested JSON
/// objects flatten to dotted keys (`{"corpus": {"KJV": ..}}` is `corpus.KJV`).
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let trimmed = text.trim_start();
    let mut out = Vec::new();
    if trimmed.starts_with('{') {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Invalid(format!("config JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Invalid("config JSON must be an object".into()))?;
        for (key, value) in obj {
            match value {
                serde_json::Value::Object(inner) => {
                    for (id, v) in inner {
                        let full = format!("{key}.{id}");
                        out.push((full.clone(), scalar(&full, v)?));
                    }
                }
                v => out.push((key.clone(), scalar(key, v)?)),
            }
        }
        return Ok(out);
    }
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
            line: idx + 1,
            message: "expected `key = value`".into(),
        })?;
        out.push((key.trim().to_string(), value.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}

/// Error from one named pipeline stage.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn utf8(path: &Path, bytes: Vec<u8>) -> Result<String> {
    String::from_utf8(bytes).map_err(|e| {
        let bytes = e.as_bytes();
        let valid = e.utf8_error().valid_up_to();
        log::error!("{} is not UTF-8", path.display());
        Error::Encoding {
            line: 1 + bytes[..valid].iter().filter(|&&b| b == b'\n').count(),
        }
    })
}

/// Everything a run reads, plus a digest per data file.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub corpus: ParallelCorpus,
    pub lexicon: Lexicon,
    pub stopwords: Arc<StopwordList>,
    pub lemmatizer: Arc<Lemmatizer>,
    pub seeds: SeedLexicons,
    pub predictions: BTreeMap<String, Vec<Prediction>>,
    /// Data-file label (bundled name or file name) to SHA-256.
    pub digests: BTreeMap<String, String>,
}

fn data_source(
    path: &Option<PathBuf>,
    bundled_name: &str,
    bundled: &'static str,
    digests: &mut BTreeMap<String, String>,
    key: &str,
) -> Result<String> {
    let text = match path {
        Some(p) => utf8(p, read(p)?)?,
        None => bundled.to_string(),
    };
    let label = match path {
        Some(p) => format!("{key}:{}", p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())),
        None => format!("{key}:bundled/{bundled_name}"),
    };
    digests.insert(label, sha256_hex(text.as_bytes()));
    Ok(text)
}

pub fn load_inputs(config: &RunConfig) -> std::result::Result<Inputs, StageError> {
    config.validate().stage("config")?;
    let mut digests = BTreeMap::new();

    let sources: Vec<(String, String, Vec<u8>)> = if config.corpora.is_empty() {
        data::CORPORA
            .iter()
            .map(|(id, text)| (id.to_string(), format!("bundled/{}.txt", id.to_lowercase()), text.as_bytes().to_vec()))
            .collect()
    } else {
        config
            .corpora
            .iter()
            .map(|(id, p)| Ok((id.clone(), p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()), read(p)?)))
            .collect::<Result<_>>()
            .stage("corpus")?
    };
    let translations = std::thread::scope(|s| {
        let handles: Vec<_> = sources
            .iter()
            .map(|(id, _, bytes)| s.spawn(move || parse_translation(&bytes[..], id)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("parser thread panicked"))
            .collect::<Result<Vec<Translation>>>()
    })
    .stage("corpus")?;
    for (id, name, bytes) in &sources {
        digests.insert(format!("corpus.{id}:{name}"), sha256_hex(bytes));
    }
    let corpus = ParallelCorpus::new(translations).stage("corpus")?;

    let stop_text = data_source(&config.stopwords, "stopwords_en.txt", data::STOPWORDS, &mut digests, "stopwords")
        .stage("preprocess")?;
    let stopwords = Arc::new(StopwordList::parse(&stop_text).stage("preprocess")?);
    let lemma_text = data_source(&config.lemmas, "lemmas_en.tsv", data::LEMMAS, &mut digests, "lemmas")
        .stage("preprocess")?;
    let lemmatizer = match &config.lemmas {
        None => data::lemmatizer(),
        Some(_) => Arc::new(Lemmatizer::parse(&lemma_text).stage("preprocess")?),
    };
    let lex_text = data_source(&config.lexicon, "afinn-111-subset.txt", data::AFINN, &mut digests, "lexicon")
        .stage("polarity")?;
    let lexicon = load_lexicon(lex_text.as_bytes()).stage("polarity")?;
    let seed_text = data_source(&config.seeds, "seed_labels.tsv", data::SEED_LABELS, &mut digests, "seeds")
        .stage("labels")?;
    let seeds = SeedLexicons::parse(&seed_text).stage("labels")?;

    let mut predictions = BTreeMap::new();
    for (id, path) in &config.predictions {
        if corpus.get(id).is_none() {
            return Err(Error::Invalid(format!("predictions given for unknown translation {id:?}"))).stage("labels");
        }
        let bytes = read(path).stage("labels")?;
        digests.insert(
            format!("predictions.{id}:{}", path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())),
            sha256_hex(&bytes),
        );
        let loaded = load_predictions(&bytes[..], Some(&corpus)).stage("labels")?;
        if let Some((i, p)) = loaded.iter().enumerate().find(|(_, p)| p.translation_id != *id) {
            return Err(Error::Validation {
                record: i + 1,
                message: format!("record for {} in the {id} prediction file", p.translation_id),
            })
            .stage("labels");
        }
        predictions.insert(id.clone(), loaded);
    }

    Ok(Inputs {
        corpus,
        lexicon,
        stopwords,
        lemmatizer,
        seeds,
        predictions,
        digests,
    })
}

/// Per-translation results computed in parallel.
#[derive(Debug, Clone)]
pub struct TranslationAnalysis {
    pub id: String,
    pub tokenized: Vec<TokenizedVerse>,
    pub bigrams: NgramTable,
    pub trigrams: NgramTable,
    pub polarity: PolaritySeries,
    pub predictions: Vec<Prediction>,
    pub labels_from_model: bool,
}

pub fn analyze(inputs: &Inputs, config: &RunConfig) -> std::result::Result<Vec<TranslationAnalysis>, StageError> {
    let pre = config.preprocess(inputs.stopwords.clone(), inputs.lemmatizer.clone());
    std::thread::scope(|s| {
        let handles: Vec<_> = inputs
            .corpus
            .translations()
            .iter()
            .map(|t| {
                let pre = &pre;
                s.spawn(move || -> std::result::Result<TranslationAnalysis, StageError> {
                    let tokenized: Vec<TokenizedVerse> = t.verses().map(|v| preprocess_verse(v, pre)).collect();
                    let bigrams = extract_ngrams(&tokenized, 2).stage("ngrams")?;
                    let trigrams = extract_ngrams(&tokenized, 3).stage("ngrams")?;
                    let polarity = polarity_series_at(t, pre, &inputs.lexicon, config.match_stage);
                    let (predictions, labels_from_model) = match inputs.predictions.get(t.id()) {
                        Some(p) => (p.clone(), true),
                        None => (baseline_predictions(t, pre, &inputs.seeds), false),
                    };
                    Ok(TranslationAnalysis {
                        id: t.id().to_string(),
                        tokenized,
                        bigrams,
                        trigrams,
                        polarity,
                        predictions,
                        labels_from_model,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("analysis thread panicked"))
            .collect()
    })
}

/// Where the label outputs came from.
pub fn labels_source(analyses: &[TranslationAnalysis]) -> &'static str {
    let model = analyses.iter().filter(|a| a.labels_from_model).count();
    match model {
        0 => "baseline",
        n if n == analyses.len() => "predictions",
        _ => "mixed",
    }
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Invalid(format!("csv buffer: {}", e.error())))
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.6}")
}

fn gram_text(g: &Gram) -> String {
    g.join(" ")
}

pub fn alignment_json(corpus: &ParallelCorpus, report: &AlignmentReport) -> Vec<u8> {
    let doc = json!({
        "aligned": report.aligned(),
        "translations": corpus
            .translations()
            .iter()
            .map(|t| {
                json!({
                    "id": t.id(),
                    "verses": t.verse_count(),
                    "chapters": t.chapters().iter().map(|c| json!({"chapter": c.number(), "verses": c.verses().len()})).collect::<Vec<_>>(),
                })
            })
            .collect::<Vec<_>>(),
        "mismatches": report
            .mismatches()
            .iter()
            .map(|m| json!({"translation": m.translation_id, "ref": m.reference.to_string(), "kind": m.kind}))
            .collect::<Vec<_>>(),
    });
    let mut out = serde_json::to_vec_pretty(&doc).expect("alignment serializes");
    out.push(b'\n');
    out
}

pub fn ngrams_csv(analyses: &[TranslationAnalysis], k: usize) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for a in analyses {
        for table in [&a.bigrams, &a.trigrams] {
            for (rank, (g, count)) in top_k(table, k).into_iter().enumerate() {
                rows.push(vec![a.id.clone(), table.n().to_string(), (rank + 1).to_string(), gram_text(&g), count.to_string()]);
            }
        }
    }
    csv_bytes(&["translation", "n", "rank", "gram", "count"], rows)
}

pub fn polarity_csv(series: &[&PolaritySeries]) -> Result<Vec<u8>> {
    let rows = series
        .iter()
        .flat_map(|s| {
            s.points.iter().map(|(r, p)| {
                vec![s.translation_id.clone(), r.chapter().to_string(), r.verse().to_string(), p.to_string()]
            })
        })
        .collect();
    csv_bytes(&["translation", "chapter", "verse", "score"], rows)
}

pub fn chapter_totals_csv(series: &[&PolaritySeries]) -> Result<Vec<u8>> {
    let rows = series
        .iter()
        .flat_map(|s| {
            s.chapter_totals
                .iter()
                .map(|(c, t)| vec![s.translation_id.clone(), c.to_string(), t.to_string()])
        })
        .collect();
    csv_bytes(&["translation", "chapter", "total"], rows)
}

pub fn sentiment_matrix_csv(matrices: &[SentimentMatrix]) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for m in matrices {
        for (id, cells) in m.rows() {
            for label in SentimentLabel::ALL {
                rows.push(vec![m.scope.to_string(), id.to_string(), label.name().to_string(), cells[label.index()].to_string()]);
            }
        }
    }
    csv_bytes(&["scope", "translation", "label", "count"], rows)
}

pub fn agreement_csv(agreement: &Agreement) -> Result<Vec<u8>> {
    let rows = agreement
        .records
        .iter()
        .map(|r| {
            vec![
                r.reference.chapter().to_string(),
                r.reference.verse().to_string(),
                r.intersection.to_string(),
                r.union.to_string(),
                fmt_f64(r.jaccard),
            ]
        })
        .collect();
    csv_bytes(&["chapter", "verse", "intersection", "union", "jaccard"], rows)
}

/// Every unordered pair of translations, in corpus order.
pub fn overlap_rows(corpus: &ParallelCorpus, config: &PreprocessConfig) -> Vec<(String, String, f64)> {
    let ts = corpus.translations();
    let mut out = Vec::new();
    for (i, a) in ts.iter().enumerate() {
        for b in &ts[i + 1..] {
            out.push((a.id().to_string(), b.id().to_string(), vocab_overlap(a, b, config)));
        }
    }
    out
}

pub fn overlap_csv(rows: &[(String, String, f64)]) -> Result<Vec<u8>> {
    csv_bytes(
        &["a", "b", "jaccard"],
        rows.iter().map(|(a, b, j)| vec![a.clone(), b.clone(), fmt_f64(*j)]).collect(),
    )
}

pub fn deviation_csv(deviation: &BTreeMap<u32, i64>) -> Result<Vec<u8>> {
    csv_bytes(
        &["chapter", "deviation"],
        deviation.iter().map(|(c, d)| vec![c.to_string(), d.to_string()]).collect(),
    )
}

/// Matrices for each chapter of the first translation, then the whole corpus.
pub fn sentiment_matrices(corpus: &ParallelCorpus, predictions: &[Prediction]) -> Vec<SentimentMatrix> {
    let mut scopes: Vec<Scope> = corpus.translations()[0]
        .chapters()
        .iter()
        .map(|c| Scope::Chapter(c.number()))
        .collect();
    scopes.push(Scope::All);
    scopes.into_iter().map(|s| cumulative_counts(predictions, s)).collect()
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportBundle {
    pub out_dir: PathBuf,
    /// Artifact name to SHA-256, manifest excluded.
    pub files: BTreeMap<String, String>,
    pub labels_source: &'static str,
    pub config_hash: String,
}

fn config_json(config: &RunConfig, inputs: &Inputs) -> serde_json::Value {
    json!({
        "translations": inputs.corpus.translations().iter().map(|t| t.id()).collect::<Vec<_>>(),
        "lowercase": config.lowercase,
        "remove_stopwords": config.remove_stopwords,
        "lemmatize": config.lemmatize,
        "keep_apostrophes": config.keep_apostrophes,
        "match_stage": config.match_stage,
        "tau": config.tau,
        "top_k": config.top_k,
        "data_files": inputs.digests,
    })
}

pub fn run_pipeline(config: &RunConfig) -> std::result::Result<ReportBundle, StageError> {
    let inputs = load_inputs(config)?;
    let alignment = verify_alignment(&inputs.corpus);
    if !alignment.aligned() {
        for m in alignment.mismatches() {
            log::error!("{} {} {:?}", m.translation_id, m.reference, m.kind);
        }
        return Err(Error::Structure(format!(
            "translations are not aligned ({} mismatches)",
            alignment.mismatches().len()
        )))
        .stage("alignment");
    }
    let analyses = analyze(&inputs, config)?;
    let pre = config.preprocess(inputs.stopwords.clone(), inputs.lemmatizer.clone());

    let series: Vec<&PolaritySeries> = analyses.iter().map(|a| &a.polarity).collect();
    let all_predictions: Vec<Prediction> = analyses.iter().flat_map(|a| a.predictions.iter().cloned()).collect();
    let agreement = label_agreement(&all_predictions, &inputs.corpus).stage("compare")?;
    let deviation = if series.len() >= 2 {
        polarity_deviation(&analyses.iter().map(|a| a.polarity.clone()).collect::<Vec<_>>()).stage("compare")?
    } else {
        log::warn!("one translation only; deviation table left empty");
        BTreeMap::new()
    };
    let overlap = overlap_rows(&inputs.corpus, &pre);

    let mut outputs: Vec<(&str, Vec<u8>)> = vec![
        ("alignment.json", alignment_json(&inputs.corpus, &alignment)),
        ("ngrams.csv", ngrams_csv(&analyses, config.top_k).stage("report")?),
        ("polarity.csv", polarity_csv(&series).stage("report")?),
        ("chapter_totals.csv", chapter_totals_csv(&series).stage("report")?),
        (
            "sentiment_matrix.csv",
            sentiment_matrix_csv(&sentiment_matrices(&inputs.corpus, &all_predictions)).stage("report")?,
        ),
        ("agreement.csv", agreement_csv(&agreement).stage("report")?),
        ("overlap.csv", overlap_csv(&overlap).stage("report")?),
        ("deviation.csv", deviation_csv(&deviation).stage("report")?),
    ];
    debug_assert!(outputs.iter().map(|(n, _)| *n).eq(ARTIFACTS));

    fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e)).stage("report")?;
    let mut files = BTreeMap::new();
    for (name, bytes) in &outputs {
        write_atomic(&config.out, name, bytes).stage("report")?;
        files.insert(name.to_string(), sha256_hex(bytes));
    }

    let cfg = config_json(config, &inputs);
    let config_hash = sha256_hex(&serde_json::to_vec(&cfg).expect("config serializes"));
    let source = labels_source(&analyses);
    let manifest = json!({
        "tool": format!("sermon {}", env!("CARGO_PKG_VERSION")),
        "config_hash": config_hash,
        "config": cfg,
        "labels_source": source,
        "label_sources": analyses.iter().map(|a| (a.id.clone(), if a.labels_from_model { "predictions" } else { "baseline" })).collect::<BTreeMap<_, _>>(),
        "missing_predictions": agreement.missing.len(),
        "outputs": files,
    });
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    outputs.clear();
    write_atomic(&config.out, MANIFEST, &bytes).stage("report")?;

    Ok(ReportBundle {
        out_dir: config.out.clone(),
        files,
        labels_source: source,
        config_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_config() {
        let text = "# comment\ncorpus.KJV = kjv.txt\ntau = 0.4\nlemmatize = false\nmatch_stage = surface\n";
        let mut c = RunConfig::default();
        for (k, v) in parse_config_text(text).unwrap() {
            c.set(&k, &v, Path::new("/cfg")).unwrap();
        }
        assert_eq!(c.corpora, vec![("KJV".to_string(), PathBuf::from("/cfg/kjv.txt"))]);
        assert_eq!(c.tau, 0.4);
        assert!(!c.lemmatize);
        assert_eq!(c.match_stage, MatchStage::Surface);
    }

    #[test]
    fn json_config_flattens() {
        let text = r#"{"corpus": {"A": "a.txt"}, "top_k": 5, "keep_apostrophes": true}"#;
        let pairs = parse_config_text(text).unwrap();
        assert_eq!(
            pairs,
            vec![
                ("corpus.A".to_string(), "a.txt".to_string()),
                ("keep_apostrophes".to_string(), "true".to_string()),
                ("top_k".to_string(), "5".to_string())
            ]
        );
    }

    #[test]
    fn bad_config_values() {
        let mut c = RunConfig::default();
        assert!(c.set("colour", "red", Path::new(".")).is_err());
        assert!(c.set("tau", "half", Path::new(".")).is_err());
        assert!(c.set("lemmatize", "maybe", Path::new(".")).is_err());
        assert!(parse_config_text("no equals sign").is_err());
        c.tau = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn default_flags_follow_calibration() {
        let chosen = Calibration::bundled().unwrap().chosen.config;
        let c = RunConfig::default();
        assert_eq!(c.remove_stopwords, chosen.remove_stopwords);
        assert_eq!(c.lemmatize, chosen.lemmatize);
        assert_eq!(c.match_stage, chosen.match_stage);
    }

    #[test]
    fn csv_numbers_use_fixed_decimals() {
        assert_eq!(fmt_f64(0.5), "0.500000");
        assert_eq!(fmt_f64(1.0 / 3.0), "0.333333");
        let rows = vec![("A".to_string(), "B".to_string(), 0.25)];
        assert_eq!(overlap_csv(&rows).unwrap(), b"a,b,jaccard\nA,B,0.250000\n");
    }

    #[test]
    fn labels_source_values() {
        let mk = |model: bool| TranslationAnalysis {
            id: "T".into(),
            tokenized: vec![],
            bigrams: NgramTable::new(2).unwrap(),
            trigrams: NgramTable::new(3).unwrap(),
            polarity: PolaritySeries::from_points("T", vec![]),
            predictions: vec![],
            labels_from_model: model,
        };
        assert_eq!(labels_source(&[mk(false), mk(false)]), "baseline");
        assert_eq!(labels_source(&[mk(true), mk(true)]), "predictions");
        assert_eq!(labels_source(&[mk(true), mk(false)]), "mixed");
    }
}
