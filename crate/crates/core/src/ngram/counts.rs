//! Exact n-gram counting with sentence sentinels.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::vocab::{UnitId, UnitVocabulary};

use super::NgramError;

/// Raw n-gram counts for all orders up to `order`, over sentences padded
/// with one begin and one end sentinel each. The count of any n-gram never
/// exceeds the count of its (n-1)-gram prefix.
#[derive(Clone, PartialEq, Debug)]
pub struct NgramCounts {
    order: usize,
    vocab: UnitVocabulary,
    // levels[n-1] holds the n-gram counts.
    levels: Vec<BTreeMap<Vec<UnitId>, u64>>,
    sentences: usize,
}

impl NgramCounts {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &UnitVocabulary {
        &self.vocab
    }

    pub fn sentences(&self) -> usize {
        self.sentences
    }

    pub fn count(&self, gram: &[UnitId]) -> u64 {
        if gram.is_empty() || gram.len() > self.order {
            return 0;
        }
        self.levels[gram.len() - 1].get(gram).copied().unwrap_or(0)
    }

    pub(crate) fn level(&self, n: usize) -> &BTreeMap<Vec<UnitId>, u64> {
        &self.levels[n - 1]
    }

    pub fn distinct(&self, n: usize) -> usize {
        self.levels[n - 1].len()
    }
}

/// Counts all 1..=order grams of every sentence, padded as
/// `<s> tokens </s>`. Errors on an empty sentence list, order 0, or token
/// ids outside the vocabulary.
pub fn count_ngrams(
    corpus: &[Vec<UnitId>],
    order: usize,
    vocab: &UnitVocabulary,
) -> Result<NgramCounts, NgramError> {
    if order < 1 {
        return Err(NgramError::InvalidOrder(order));
    }
    if corpus.is_empty() {
        return Err(NgramError::EmptyCorpus);
    }
    let mut levels: Vec<BTreeMap<Vec<UnitId>, u64>> = (0..order).map(|_| BTreeMap::new()).collect();
    for sentence in corpus {
        for &id in sentence {
            if id.idx() >= vocab.len() {
                return Err(NgramError::InvalidTokenId(id.0));
            }
        }
        let mut padded = Vec::with_capacity(sentence.len() + 2);
        padded.push(vocab.bos());
        padded.extend_from_slice(sentence);
        padded.push(vocab.eos());
        for n in 1..=order {
            for window in padded.windows(n) {
                *levels[n - 1].entry(window.to_vec()).or_insert(0) += 1;
            }
        }
    }
    Ok(NgramCounts {
        order,
        vocab: vocab.clone(),
        levels,
        sentences: corpus.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::VocabKind;
    use alloc::string::ToString;

    pub(crate) fn abc_vocab() -> UnitVocabulary {
        UnitVocabulary::new(
            VocabKind::Word,
            ["a", "b", "c"].map(|s| s.to_string()),
        )
        .unwrap()
    }

    fn ids(vocab: &UnitVocabulary, toks: &[&str]) -> Vec<UnitId> {
        toks.iter().map(|t| vocab.id_of(t).unwrap()).collect()
    }

    #[test]
    fn hand_counted_bigrams() {
        let vocab = abc_vocab();
        let corpus = vec![ids(&vocab, &["a", "b", "a"])];
        let counts = count_ngrams(&corpus, 2, &vocab).unwrap();
        let a = vocab.id_of("a").unwrap();
        let b = vocab.id_of("b").unwrap();
        assert_eq!(counts.count(&[a]), 2);
        assert_eq!(counts.count(&[b]), 1);
        assert_eq!(counts.count(&[a, b]), 1);
        assert_eq!(counts.count(&[b, a]), 1);
        // sentinel grams
        assert_eq!(counts.count(&[vocab.bos()]), 1);
        assert_eq!(counts.count(&[vocab.eos()]), 1);
        assert_eq!(counts.count(&[vocab.bos(), a]), 1);
        assert_eq!(counts.count(&[a, vocab.eos()]), 1);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let vocab = abc_vocab();
        assert!(matches!(
            count_ngrams(&[], 2, &vocab),
            Err(NgramError::EmptyCorpus)
        ));
        assert!(matches!(
            count_ngrams(&[vec![]], 0, &vocab),
            Err(NgramError::InvalidOrder(0))
        ));
    }

    #[test]
    fn single_token_sentence() {
        let vocab = abc_vocab();
        let corpus = vec![ids(&vocab, &["c"])];
        let counts = count_ngrams(&corpus, 1, &vocab).unwrap();
        assert_eq!(counts.count(&[vocab.id_of("c").unwrap()]), 1);
    }

    #[test]
    fn prefix_consistency_holds() {
        let vocab = abc_vocab();
        let corpus = vec![
            ids(&vocab, &["a", "b", "a", "c"]),
            ids(&vocab, &["b", "b"]),
            ids(&vocab, &["a"]),
        ];
        let counts = count_ngrams(&corpus, 3, &vocab).unwrap();
        for n in 2..=3 {
            for (gram, &c) in counts.level(n) {
                let prefix = &gram[..n - 1];
                assert!(
                    c <= counts.count(prefix),
                    "gram {:?} count {} exceeds prefix count {}",
                    gram,
                    c,
                    counts.count(prefix)
                );
            }
        }
    }
}
