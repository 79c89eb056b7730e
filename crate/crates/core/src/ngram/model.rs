//! The backoff model representation and incremental scoring.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::vocab::{UnitId, UnitVocabulary};

use super::{NgramError, LN_10};

/// One stored n-gram: its log10 probability and, for orders below the
/// model order, the log10 backoff weight of the gram used as a context.
#[derive(Copy, Clone, PartialEq, Debug)]
pub struct ArpaEntry {
    pub log10_prob: f64,
    pub log10_backoff: f64,
}

impl ArpaEntry {
    pub fn new(log10_prob: f64) -> ArpaEntry {
        ArpaEntry {
            log10_prob,
            log10_backoff: 0.0,
        }
    }
}

/// A Katz backoff n-gram model. For every context the probabilities of all
/// vocabulary tokens, evaluated through the backoff recursion, sum to one.
#[derive(Clone, PartialEq, Debug)]
pub struct ArpaModel {
    order: usize,
    // levels[n-1]: n-gram -> entry
    levels: Vec<BTreeMap<Vec<UnitId>, ArpaEntry>>,
    vocab: UnitVocabulary,
}

/// Scoring cursor: the most recent context tokens, newest last, never more
/// than order-1 of them.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct NgramState {
    context: Vec<UnitId>,
}

impl NgramState {
    pub fn empty() -> NgramState {
        NgramState {
            context: Vec::new(),
        }
    }

    pub fn context(&self) -> &[UnitId] {
        &self.context
    }
}

impl ArpaModel {
    pub(crate) fn from_levels(
        order: usize,
        levels: Vec<BTreeMap<Vec<UnitId>, ArpaEntry>>,
        vocab: UnitVocabulary,
    ) -> ArpaModel {
        debug_assert_eq!(levels.len(), order);
        ArpaModel {
            order,
            levels,
            vocab,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &UnitVocabulary {
        &self.vocab
    }

    pub fn entry(&self, gram: &[UnitId]) -> Option<&ArpaEntry> {
        if gram.is_empty() || gram.len() > self.order {
            return None;
        }
        self.levels[gram.len() - 1].get(gram)
    }

    pub(crate) fn levels_mut(&mut self) -> &mut Vec<BTreeMap<Vec<UnitId>, ArpaEntry>> {
        &mut self.levels
    }

    pub fn entries(&self, n: usize) -> impl Iterator<Item = (&Vec<UnitId>, &ArpaEntry)> {
        self.levels[n - 1].iter()
    }

    pub fn total_entries(&self) -> usize {
        self.levels.iter().map(BTreeMap::len).sum()
    }

    /// Scoring state at the beginning of a sentence.
    pub fn start_state(&self) -> NgramState {
        NgramState {
            context: alloc::vec![self.vocab.bos()],
        }
    }

    /// Backoff-recursion probability in log10:
    /// `P(t|c) = P(t|c)` if `(c,t)` is stored, otherwise `alpha(c) * P(t|shorten(c))`.
    /// Returns None when the token has no unigram entry.
    pub fn log10_prob(&self, context: &[UnitId], token: UnitId) -> Option<f64> {
        backoff_log10(&self.levels, context, token)
    }

    /// Incremental scoring step: natural-log probability of `token` after
    /// `state`, plus the advanced state.
    pub fn score_incremental(
        &self,
        state: &NgramState,
        token: UnitId,
    ) -> Result<(f64, NgramState), NgramError> {
        if token.idx() >= self.vocab.len() {
            return Err(NgramError::InvalidTokenId(token.0));
        }
        let lp10 = self
            .log10_prob(&state.context, token)
            .ok_or(NgramError::UnknownToken(token.0))?;
        let mut context = state.context.clone();
        context.push(token);
        let keep = self.order.saturating_sub(1);
        if context.len() > keep {
            context.drain(..context.len() - keep);
        }
        Ok((lp10 * LN_10, NgramState { context }))
    }

    /// Natural-log probability of a whole sentence (EOS included), scored
    /// token by token from the start state.
    pub fn sentence_logprob(&self, sentence: &[UnitId]) -> Result<f64, NgramError> {
        let mut state = self.start_state();
        let mut total = 0.0;
        for &t in sentence {
            let (lp, next) = self.score_incremental(&state, t)?;
            total += lp;
            state = next;
        }
        let (lp, _) = self.score_incremental(&state, self.vocab.eos())?;
        Ok(total + lp)
    }
}

/// Shared backoff evaluation over a (possibly partial) stack of levels;
/// `levels` may hold fewer orders than the final model while estimation is
/// still in progress.
pub(crate) fn backoff_log10(
    levels: &[BTreeMap<Vec<UnitId>, ArpaEntry>],
    context: &[UnitId],
    token: UnitId,
) -> Option<f64> {
    let max_ctx = levels.len().saturating_sub(1);
    let context = &context[context.len().saturating_sub(max_ctx)..];
    let mut bow = 0.0;
    for start in 0..=context.len() {
        let ctx = &context[start..];
        let mut key = Vec::with_capacity(ctx.len() + 1);
        key.extend_from_slice(ctx);
        key.push(token);
        if let Some(e) = levels[ctx.len()].get(&key) {
            return Some(bow + e.log10_prob);
        }
        if !ctx.is_empty() {
            if let Some(ce) = levels[ctx.len() - 1].get(ctx) {
                bow += ce.log10_backoff;
            }
        }
    }
    None
}

/// Natural-log probability summed over the vocabulary for a given context;
/// used by tests to brute-force the normalization invariant.
pub fn context_prob_sum(model: &ArpaModel, context: &[UnitId]) -> f64 {
    let mut sum = 0.0;
    for id in 1..model.vocab().len() as u32 {
        // skip <s>: it is a context marker, never predicted
        if let Some(lp10) = model.log10_prob(context, UnitId(id)) {
            sum += (lp10 * LN_10).exp();
        }
    }
    sum
}
