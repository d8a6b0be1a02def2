//! Contiguous n-gram counts over preprocessed verses.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::preprocess::TokenizedVerse;

pub type Gram = Vec<String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramTable {
    n: usize,
    counts: BTreeMap<Gram, u64>,
    total: u64,
}

fn check_n(n: usize) -> Result<()> {
    if (1..=3).contains(&n) {
        Ok(())
    } else {
        Err(Error::Domain(format!("n-gram order must be 1, 2 or 3, got {n}")))
    }
}

impl NgramTable {
    pub fn new(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(NgramTable {
            n,
            counts: BTreeMap::new(),
            total: 0,
        })
    }

    /// Builds a table from explicit counts; zero counts are dropped.
    pub fn from_counts<I>(n: usize, counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Gram, u64)>,
    {
        let mut table = Self::new(n)?;
        for (gram, count) in counts {
            if gram.len() != n || gram.iter().any(String::is_empty) {
                return Err(Error::Domain(format!(
                    "n-gram {gram:?} does not have {n} non-empty tokens"
                )));
            }
            if count > 0 {
                *table.counts.entry(gram).or_insert(0) += count;
                table.total += count;
            }
        }
        Ok(table)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<Gram, u64> {
        &self.counts
    }

    pub fn get(&self, gram: &[&str]) -> u64 {
        let key: Gram = gram.iter().map(|s| s.to_string()).collect();
        self.counts.get(&key).copied().unwrap_or(0)
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn max_count(&self) -> u64 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    fn add_tokens(&mut self, tokens: &[String]) {
        for window in tokens.windows(self.n) {
            *self.counts.entry(window.to_vec()).or_insert(0) += 1;
            self.total += 1;
        }
    }

    /// Entrywise sum of two tables of the same order.
    pub fn merge(&mut self, other: &NgramTable) -> Result<()> {
        if other.n != self.n {
            return Err(Error::Domain(format!(
                "cannot merge {}-gram table into {}-gram table",
                other.n, self.n
            )));
        }
        for (gram, count) in &other.counts {
            *self.counts.entry(gram.clone()).or_insert(0) += count;
        }
        self.total += other.total;
        Ok(())
    }
}

/// Counts every window of `n` tokens inside each verse.
pub fn extract_ngrams(verses: &[TokenizedVerse], n: usize) -> Result<NgramTable> {
    let mut table = NgramTable::new(n)?;
    for verse in verses {
        table.add_tokens(&verse.tokens);
    }
    Ok(table)
}

/// Highest counts first; equal counts in ascending gram order.
pub fn top_k(table: &NgramTable, k: usize) -> Vec<(Gram, u64)> {
    let mut entries: Vec<(&Gram, u64)> = table.counts.iter().map(|(g, &c)| (g, c)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entries
        .into_iter()
        .take(k)
        .map(|(g, c)| (g.clone(), c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VerseRef;
    use proptest::prelude::*;

    fn verse(chapter: u32, v: u32, tokens: &[&str]) -> TokenizedVerse {
        TokenizedVerse {
            reference: VerseRef::new(chapter, v).unwrap(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn gram(words: &[&str]) -> Gram {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn window_longer_than_verse() {
        let t = extract_ngrams(&[verse(1, 1, &["a"])], 2).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.total(), 0);
    }

    #[test]
    fn repeated_pairs() {
        let t = extract_ngrams(&[verse(1, 1, &["x", "y", "x", "y"])], 2).unwrap();
        assert_eq!(t.get(&["x", "y"]), 2);
        assert_eq!(t.get(&["y", "x"]), 1);
        assert_eq!(t.distinct(), 2);
        assert_eq!(t.total(), 3);
    }

    #[test]
    fn windows_stop_at_verse_boundaries() {
        let vs = [verse(1, 1, &["a", "b"]), verse(1, 2, &["c", "d"])];
        let t = extract_ngrams(&vs, 2).unwrap();
        assert_eq!(t.get(&["b", "c"]), 0);
        assert_eq!(t.total(), 2);
    }

    #[test]
    fn invalid_order() {
        assert!(matches!(extract_ngrams(&[], 0), Err(Error::Domain(_))));
        assert!(matches!(extract_ngrams(&[], 4), Err(Error::Domain(_))));
    }

    #[test]
    fn top_k_tie_break() {
        let t = NgramTable::from_counts(
            2,
            [
                (gram(&["a", "b"]), 2),
                (gram(&["a", "a"]), 2),
                (gram(&["b", "a"]), 1),
            ],
        )
        .unwrap();
        assert_eq!(
            top_k(&t, 2),
            vec![(gram(&["a", "a"]), 2), (gram(&["a", "b"]), 2)]
        );
        assert_eq!(top_k(&t, 10).len(), 3);
        assert!(top_k(&NgramTable::new(2).unwrap(), 10).is_empty());
    }

    #[test]
    fn from_counts_checks_arity() {
        assert!(NgramTable::from_counts(2, [(gram(&["a"]), 1)]).is_err());
        assert!(NgramTable::from_counts(2, [(gram(&["a", ""]), 1)]).is_err());
    }

    #[test]
    fn merge_rejects_other_order() {
        let mut a = NgramTable::new(2).unwrap();
        assert!(a.merge(&NgramTable::new(3).unwrap()).is_err());
    }

    fn verses_strategy() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(
            prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(String::from), 0..8),
            0..12,
        )
    }

    fn to_verses(raw: &[Vec<String>]) -> Vec<TokenizedVerse> {
        raw.iter()
            .enumerate()
            .map(|(i, t)| TokenizedVerse {
                reference: VerseRef::new(1, i as u32 + 1).unwrap(),
                tokens: t.clone(),
            })
            .collect()
    }

    proptest! {
        #[test]
        fn total_is_conserved(raw in verses_strategy(), n in 1usize..=3) {
            let t = extract_ngrams(&to_verses(&raw), n).unwrap();
            let expected: usize = raw.iter().map(|v| v.len().saturating_sub(n - 1)).sum();
            prop_assert_eq!(t.total(), expected as u64);
            prop_assert_eq!(t.counts().values().sum::<u64>(), t.total());
        }

        #[test]
        fn concatenation_merges_additively(a in verses_strategy(), b in verses_strategy(), n in 1usize..=3) {
            let mut whole = a.clone();
            whole.extend(b.iter().cloned());
            let joined = extract_ngrams(&to_verses(&whole), n).unwrap();
            let mut merged = extract_ngrams(&to_verses(&a), n).unwrap();
            merged.merge(&extract_ngrams(&to_verses(&b), n).unwrap()).unwrap();
            prop_assert_eq!(joined, merged);
        }

        #[test]
        fn top_k_ignores_insertion_order(
            entries in prop::collection::btree_map(
                prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]).prop_map(String::from), 2),
                1u64..4,
                0..9,
            ),
            seed in any::<u64>(),
            k in 1usize..12,
        ) {
            let forward: Vec<(Gram, u64)> = entries.clone().into_iter().collect();
            let mut shuffled = forward.clone();
            let len = shuffled.len();
            if len > 1 {
                let mut s = seed;
                for i in (1..len).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    shuffled.swap(i, (s >> 33) as usize % (i + 1));
                }
            }
            let a = NgramTable::from_counts(2, forward).unwrap();
            let b = NgramTable::from_counts(2, shuffled).unwrap();
            let top = top_k(&a, k);
            prop_assert_eq!(&top, &top_k(&b, k));
            prop_assert_eq!(top.len(), k.min(entries.len()));
            for pair in top.windows(2) {
                prop_assert!(pair[0].1 > pair[1].1 || (pair[0].1 == pair[1].1 && pair[0].0 < pair[1].0));
            }
        }
    }
}
