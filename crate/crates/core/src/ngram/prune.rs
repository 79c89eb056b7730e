//! Probability-rank pruning.
//!
//! `max_entries` is a total budget across all orders. Entries are removed
//! from the highest order first, lowest stored log10 probability first
//! (ties broken by token tuple), so surviving higher-order grams always
//! keep their contexts. Unigrams are never pruned. Backoff weights of the
//! affected lower orders are then recomputed bottom-up, which restores the
//! per-context sum-to-one invariant exactly.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::vocab::UnitId;

use super::model::backoff_log10;
use super::{ArpaModel, NgramError, LN_10, MIN_LOG10};

const EPS: f64 = 1e-12;

pub fn prune(model: &ArpaModel, max_entries: usize) -> Result<ArpaModel, NgramError> {
    let unigrams = model.entries(1).count();
    if max_entries < unigrams {
        return Err(NgramError::PruneBudgetTooSmall {
            budget: max_entries,
            unigrams,
        });
    }
    let mut pruned = model.clone();
    let mut total = pruned.total_entries();
    let mut lowest_touched: Option<usize> = None;
    for n in (2..=pruned.order()).rev() {
        if total <= max_entries {
            break;
        }
        let excess = total - max_entries;
        let level = &mut pruned.levels_mut()[n - 1];
        if level.is_empty() {
            continue;
        }
        let remove = excess.min(level.len());
        let mut ranked: Vec<(f64, Vec<UnitId>)> = level
            .iter()
            .map(|(gram, e)| (e.log10_prob, gram.clone()))
            .collect();
        ranked.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then_with(|| a.1.cmp(&b.1))
        });
        for (_, gram) in ranked.into_iter().take(remove) {
            level.remove(&gram);
        }
        total -= remove;
        lowest_touched = Some(n);
    }

    // Backoff weights below any touched level are stale; recompute them
    // bottom-up so each level's denominators already see the refreshed
    // weights of the levels beneath it.
    if let Some(lowest) = lowest_touched {
        for n in lowest..=pruned.order() {
            recompute_backoffs(&mut pruned, n);
        }
    }
    Ok(pruned)
}

/// Recomputes the backoff weights stored on (n-1)-gram entries from the
/// surviving n-gram probabilities.
fn recompute_backoffs(model: &mut ArpaModel, n: usize) {
    let mut by_context: BTreeMap<Vec<UnitId>, Vec<(UnitId, f64)>> = BTreeMap::new();
    for (gram, e) in model.entries(n) {
        by_context
            .entry(gram[..n - 1].to_vec())
            .or_default()
            .push((gram[n - 1], e.log10_prob));
    }
    let levels = model.levels_mut();
    let (lower, _) = levels.split_at(n - 1);
    let mut new_bows: Vec<(Vec<UnitId>, f64)> = Vec::new();
    let mut touched: alloc::collections::BTreeSet<Vec<UnitId>> = by_context.keys().cloned().collect();
    // Contexts that lost every continuation also need their weight reset.
    for gram in levels[n - 2].keys() {
        touched.insert(gram.clone());
    }
    for context in touched {
        let (beta, denom) = match by_context.get(&context) {
            Some(continuations) => {
                let mut seen = 0.0;
                let mut lower_mass = 0.0;
                for &(token, lp10) in continuations {
                    seen += (lp10 * LN_10).exp();
                    let lower_lp =
                        backoff_log10(lower, &context[1..], token).unwrap_or(MIN_LOG10);
                    lower_mass += (lower_lp * LN_10).exp();
                }
                ((1.0 - seen).max(0.0), 1.0 - lower_mass)
            }
            None => (1.0, 1.0),
        };
        let bow = if beta <= EPS && denom <= EPS {
            0.0
        } else if beta <= EPS {
            MIN_LOG10
        } else if denom <= EPS {
            0.0
        } else {
            (beta / denom).log10()
        };
        new_bows.push((context, bow));
    }
    let prev = &mut levels[n - 2];
    for (context, bow) in new_bows {
        if let Some(e) = prev.get_mut(&context) {
            e.log10_backoff = bow;
        }
    }
}
