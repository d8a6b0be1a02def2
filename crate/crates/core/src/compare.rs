//! Cross-translation comparisons.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::corpus::{verify_alignment, ParallelCorpus, Translation, VerseRef};
use crate::error::{Error, Result};
use crate::labels::{LabelSet, Prediction};
use crate::polarity::PolaritySeries;
use crate::preprocess::{preprocess_verse, PreprocessConfig};

/// |a ∩ b| / |a ∪ b|, and 1 when both sets are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn label_jaccard(intersection: LabelSet, union: LabelSet) -> f64 {
    if union.is_empty() {
        1.0
    } else {
        intersection.len() as f64 / union.len() as f64
    }
}

/// Distinct preprocessed tokens of a translation.
pub fn vocabulary(translation: &Translation, config: &PreprocessConfig) -> BTreeSet<String> {
    translation
        .verses()
        .flat_map(|v| preprocess_verse(v, config).tokens)
        .collect()
}

pub fn vocab_overlap(a: &Translation, b: &Translation, config: &PreprocessConfig) -> f64 {
    jaccard(&vocabulary(a, config), &vocabulary(b, config))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementRecord {
    pub reference: VerseRef,
    /// Corpus translation order.
    pub per_translation: Vec<(String, LabelSet)>,
    pub intersection: LabelSet,
    pub union: LabelSet,
    pub jaccard: f64,
}

impl AgreementRecord {
    pub fn from_sets(reference: VerseRef, per_translation: Vec<(String, LabelSet)>) -> Self {
        let mut sets = per_translation.iter().map(|(_, s)| *s);
        let first = sets.next().unwrap_or_default();
        let (intersection, union) = sets.fold((first, first), |(i, u), s| (i.intersection(s), u.union(s)));
        AgreementRecord {
            reference,
            jaccard: label_jaccard(intersection, union),
            per_translation,
            intersection,
            union,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agreement {
    pub records: Vec<AgreementRecord>,
    /// Verses without a prediction, scored as an empty label set.
    pub missing: Vec<(String, VerseRef)>,
}

/// One record per verse of the aligned corpus, in corpus order.
pub fn label_agreement(predictions: &[Prediction], corpus: &ParallelCorpus) -> Result<Agreement> {
    let report = verify_alignment(corpus);
    if !report.aligned() {
        return Err(Error::Structure(format!(
            "label agreement needs an aligned corpus ({} mismatches)",
            report.mismatches().len()
        )));
    }
    let refs: BTreeMap<&str, BTreeSet<VerseRef>> =
        corpus.translations().iter().map(|t| (t.id(), t.refs())).collect();
    let mut by_key: HashMap<(&str, VerseRef), LabelSet> = HashMap::new();
    for (i, p) in predictions.iter().enumerate() {
        let known = refs.get(p.translation_id.as_str()).ok_or_else(|| Error::Validation {
            record: i + 1,
            message: format!("unknown translation {:?}", p.translation_id),
        })?;
        if !known.contains(&p.reference) {
            return Err(Error::Validation {
                record: i + 1,
                message: format!("unknown verse {} in {}", p.reference, p.translation_id),
            });
        }
        if by_key.insert((p.translation_id.as_str(), p.reference), p.labels).is_some() {
            return Err(Error::Validation {
                record: i + 1,
                message: format!("duplicate prediction for {} {}", p.translation_id, p.reference),
            });
        }
    }
    let first = &corpus.translations()[0];
    let mut missing = Vec::new();
    let records = first
        .verses()
        .map(|v| {
            let reference = v.reference();
            let sets = corpus
                .translations()
                .iter()
                .map(|t| {
                    let set = by_key.get(&(t.id(), reference)).copied().unwrap_or_else(|| {
                        missing.push((t.id().to_string(), reference));
                        LabelSet::EMPTY
                    });
                    (t.id().to_string(), set)
                })
                .collect();
            AgreementRecord::from_sets(reference, sets)
        })
        .collect();
    if !missing.is_empty() {
        log::warn!("{} verses have no prediction; treated as unlabelled", missing.len());
    }
    Ok(Agreement { records, missing })
}

/// Largest pairwise gap between chapter totals, per chapter.
pub fn polarity_deviation(series: &[PolaritySeries]) -> Result<BTreeMap<u32, i64>> {
    if series.len() < 2 {
        return Err(Error::Invalid(format!(
            "polarity deviation needs at least 2 series, got {}",
            series.len()
        )));
    }
    let refs = |s: &PolaritySeries| s.points.iter().map(|(r, _)| *r).collect::<Vec<_>>();
    let base = refs(&series[0]);
    for s in &series[1..] {
        if refs(s) != base {
            return Err(Error::Structure(format!(
                "polarity series {} is not aligned with {}",
                s.translation_id, series[0].translation_id
            )));
        }
    }
    Ok(series[0]
        .chapter_totals
        .keys()
        .map(|c| {
            let totals = series.iter().map(|s| s.chapter_totals[c]);
            let max = totals.clone().max().unwrap_or(0);
            let min = totals.min().unwrap_or(0);
            (*c, max - min)
        })
        .collect())
}
