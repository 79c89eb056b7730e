//! Katz backoff estimation with Good-Turing discounting.
//!
//! For each order the discounted probability of a stored gram is
//! `P(w|c) = d_{r} * r / C(c)` with `r = C(c,w)`, and the mass removed by
//! discounting is redistributed through the backoff weight
//! `alpha(c) = (1 - sum_seen P(w|c)) / (1 - sum_seen P(w|shorten(c)))`.
//!
//! Good-Turing discounts apply to counts `r <= k`:
//! `d_r = (r*/r - A) / (1 - A)` with `r* = (r+1) n_{r+1} / n_r` and
//! `A = (k+1) n_{k+1} / n_1`. When the count-of-counts of an order cannot
//! support that (missing `n_{r+1}`, or a `d_r` outside (0, 1]), the order
//! falls back to absolute discounting `r - D` with Ney's
//! `D = n_1 / (n_1 + 2 n_2)`, signaled in the build report.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::vocab::UnitId;

use super::model::{backoff_log10, ArpaEntry};
use super::{ArpaModel, NgramCounts, NgramError, LN_10, MIN_LOG10};

/// Numerical floor below which leftover or backoff mass counts as zero.
const EPS: f64 = 1e-12;

#[derive(Copy, Clone, PartialEq, Debug)]
pub struct KatzConfig {
    /// Good-Turing discounting applies to counts up to this threshold.
    pub discount_threshold: usize,
    /// Grams of order >= 2 with a count below this are dropped before
    /// estimation; unigrams are always kept.
    pub min_count: u64,
}

impl Default for KatzConfig {
    fn default() -> Self {
        KatzConfig {
            discount_threshold: 5,
            min_count: 1,
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum DiscountMethod {
    /// `discounts[r-1]` is d_r for r = 1..=k.
    GoodTuring { discounts: Vec<f64> },
    Absolute { d: f64 },
    /// The order had no grams at all.
    Empty,
}

#[derive(Clone, PartialEq, Debug)]
pub struct OrderReport {
    pub order: usize,
    pub entries: usize,
    pub dropped_low_count: usize,
    pub method: DiscountMethod,
    pub notes: Vec<String>,
}

/// Line-oriented summary of an estimation run: per-order entry counts,
/// discounting method, and any fallbacks taken.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct BuildReport {
    pub orders: Vec<OrderReport>,
}

impl core::fmt::Display for BuildReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(f, "katz build report")?;
        for o in &self.orders {
            let method = match &o.method {
                DiscountMethod::GoodTuring { discounts } => {
                    let ds: Vec<String> = discounts
                        .iter()
                        .enumerate()
                        .map(|(i, d)| format!("d{}={:.6}", i + 1, d))
                        .collect();
                    format!("good-turing ({})", ds.join(" "))
                }
                DiscountMethod::Absolute { d } => format!("absolute (D={:.6})", d),
                DiscountMethod::Empty => String::from("empty"),
            };
            writeln!(
                f,
                "order {}: entries {} dropped {} method {}",
                o.order, o.entries, o.dropped_low_count, method
            )?;
            for note in &o.notes {
                writeln!(f, "  note: {}", note)?;
            }
        }
        Ok(())
    }
}

fn count_of_counts(counts: impl Iterator<Item = u64>, k: usize) -> Vec<u64> {
    // index r (1-based) up to k+1
    let mut n = vec![0u64; k + 2];
    for c in counts {
        if c >= 1 && (c as usize) <= k + 1 {
            n[c as usize] += 1;
        }
    }
    n
}

/// Discount table for one order, or None when Good-Turing is unusable.
fn good_turing_discounts(n: &[u64], k: usize) -> Option<Vec<f64>> {
    let n1 = n[1];
    let nk1 = n[k + 1];
    let a = if nk1 == 0 {
        0.0
    } else {
        if n1 == 0 {
            return None;
        }
        ((k + 1) as f64) * (nk1 as f64) / (n1 as f64)
    };
    if a >= 1.0 {
        return None;
    }
    let mut discounts = vec![1.0; k];
    for r in 1..=k {
        if n[r] == 0 {
            continue; // d_r unused
        }
        if n[r + 1] == 0 {
            return None;
        }
        let r_star_over_r = ((r + 1) as f64) * (n[r + 1] as f64) / ((r as f64) * (n[r] as f64));
        let d = (r_star_over_r - a) / (1.0 - a);
        if d <= 0.0 || d > 1.0 {
            return None;
        }
        discounts[r - 1] = d;
    }
    Some(discounts)
}

fn ney_absolute_d(n: &[u64]) -> f64 {
    if n[1] > 0 && n[2] > 0 {
        (n[1] as f64) / ((n[1] + 2 * n[2]) as f64)
    } else {
        0.5
    }
}

fn discounted(method: &DiscountMethod, count: u64, k: usize) -> f64 {
    match method {
        DiscountMethod::GoodTuring { discounts } => {
            if (count as usize) <= k {
                discounts[count as usize - 1] * count as f64
            } else {
                count as f64
            }
        }
        DiscountMethod::Absolute { d } => count as f64 - d,
        DiscountMethod::Empty => count as f64,
    }
}

/// Backoff weight for a context whose stored continuations carry total
/// probability `1 - beta`, where the same continuations carry
/// `1 - denom` under the shortened context. Returns the log10 weight and
/// optionally a renormalization factor to apply to the stored
/// probabilities (degenerate case).
fn backoff_weight(beta: f64, denom: f64) -> (f64, Option<f64>, Option<String>) {
    if beta <= EPS && denom <= EPS {
        // Continuations cover everything on both levels: backing off is
        // vacuous.
        (0.0, None, None)
    } else if beta <= EPS {
        (MIN_LOG10, None, None)
    } else if denom <= EPS {
        // All lower-order mass sits on the seen continuations; the
        // discounted leftover has nowhere to go, so fold it back in.
        let scale = 1.0 / (1.0 - beta);
        (
            0.0,
            Some(scale),
            Some(String::from(
                "backoff denominator vanished; renormalized seen probabilities",
            )),
        )
    } else {
        ((beta / denom).log10(), None, None)
    }
}

/// Estimates a Katz backoff model from counts. See the module docs for the
/// discounting rules; fallbacks taken are recorded in the build report.
pub fn estimate_katz(
    counts: &NgramCounts,
    config: &KatzConfig,
) -> Result<(ArpaModel, BuildReport), NgramError> {
    let k = config.discount_threshold;
    if k < 1 {
        return Err(NgramError::InvalidOrder(k));
    }
    let order = counts.order();
    let vocab = counts.vocab().clone();
    let bos = vocab.bos();
    let mut levels: Vec<BTreeMap<Vec<UnitId>, ArpaEntry>> = Vec::with_capacity(order);
    let mut report = BuildReport::default();

    for n in 1..=order {
        let mut notes = Vec::new();
        let full = counts.level(n);
        let kept: Vec<(&Vec<UnitId>, u64)> = full
            .iter()
            .filter(|(_, &c)| n == 1 || c >= config.min_count)
            .map(|(g, &c)| (g, c))
            .collect();
        let dropped = full.len() - kept.len();

        let noc = count_of_counts(
            kept.iter()
                .filter(|(g, _)| !(n == 1 && g[0] == bos))
                .map(|&(_, c)| c),
            k,
        );
        let method = if kept.is_empty() {
            DiscountMethod::Empty
        } else {
            match good_turing_discounts(&noc, k) {
                Some(discounts) => DiscountMethod::GoodTuring { discounts },
                None => {
                    let d = ney_absolute_d(&noc);
                    notes.push(format!(
                        "count-of-counts cannot support Good-Turing; absolute discount D={:.6}",
                        d
                    ));
                    DiscountMethod::Absolute { d }
                }
            }
        };

        let mut level: BTreeMap<Vec<UnitId>, ArpaEntry> = BTreeMap::new();
        if n == 1 {
            let total: u64 = kept
                .iter()
                .filter(|(g, _)| g[0] != bos)
                .map(|&(_, c)| c)
                .sum();
            if total == 0 {
                return Err(NgramError::EmptyCorpus);
            }
            let mut seen_mass = 0.0;
            let mut seen_ids = alloc::collections::BTreeSet::new();
            for (gram, c) in &kept {
                if gram[0] == bos {
                    continue;
                }
                let p = discounted(&method, *c, k) / total as f64;
                seen_mass += p;
                seen_ids.insert(gram[0]);
                level.insert((*gram).clone(), ArpaEntry::new(p.log10()));
            }
            // <s> is a context marker, never predicted. An unobserved <unk>
            // is excluded from the distribution the same way (it only earns
            // mass when the corpus actually contains unknown tokens), so the
            // model stays normalized over the reachable inventory.
            let unk = vocab.unknown();
            let beta = (1.0 - seen_mass).max(0.0);
            let unseen: Vec<UnitId> = (1..vocab.len() as u32)
                .map(UnitId)
                .filter(|id| !seen_ids.contains(id) && *id != unk)
                .collect();
            if !unseen.is_empty() {
                let p = beta / unseen.len() as f64;
                let lp = if p > 0.0 { p.log10().max(MIN_LOG10) } else { MIN_LOG10 };
                for id in unseen {
                    level.insert(vec![id], ArpaEntry::new(lp));
                }
            } else if beta > EPS {
                // Everything observed: scale the seen mass back up to one.
                let scale = (1.0 / seen_mass).log10();
                for e in level.values_mut() {
                    if e.log10_prob > MIN_LOG10 {
                        e.log10_prob += scale;
                    }
                }
                notes.push(String::from(
                    "no unseen unigrams; renormalized seen probabilities",
                ));
            }
            level.insert(vec![bos], ArpaEntry::new(MIN_LOG10));
            level
                .entry(vec![unk])
                .or_insert_with(|| ArpaEntry::new(MIN_LOG10));
        } else {
            // Group kept grams by context.
            let mut by_context: BTreeMap<&[UnitId], Vec<(UnitId, u64)>> = BTreeMap::new();
            for (gram, c) in &kept {
                by_context
                    .entry(&gram[..n - 1])
                    .or_default()
                    .push((gram[n - 1], *c));
            }
            let mut pending_bows: Vec<(Vec<UnitId>, f64)> = Vec::new();
            for (context, continuations) in by_context {
                let ctx_count = counts.count(context);
                debug_assert!(ctx_count > 0);
                let mut seen_mass = 0.0;
                let mut lower_mass = 0.0;
                let mut entries = Vec::with_capacity(continuations.len());
                for (token, c) in continuations {
                    let p = discounted(&method, c, k) / ctx_count as f64;
                    seen_mass += p;
                    let lower =
                        backoff_log10(&levels, &context[1..], token).unwrap_or(MIN_LOG10);
                    lower_mass += (lower * LN_10).exp();
                    entries.push((token, p));
                }
                let beta = (1.0 - seen_mass).max(0.0);
                let denom = 1.0 - lower_mass;
                let (bow, rescale, note) = backoff_weight(beta, denom);
                if let Some(note) = note {
                    notes.push(format!("context {:?}: {}", context, note));
                }
                for (token, p) in entries {
                    let p = p * rescale.unwrap_or(1.0);
                    let mut key = context.to_vec();
                    key.push(token);
                    level.insert(key, ArpaEntry::new(p.log10().max(MIN_LOG10)));
                }
                pending_bows.push((context.to_vec(), bow));
            }
            // Attach the backoff weights to the (n-1)-gram entries.
            let (lower_levels, _) = levels.split_at_mut(n - 1);
            let prev = &mut lower_levels[n - 2];
            for (context, bow) in pending_bows {
                if let Some(e) = prev.get_mut(&context) {
                    e.log10_backoff = bow;
                }
            }
        }
        report.orders.push(OrderReport {
            order: n,
            entries: level.len(),
            dropped_low_count: dropped,
            method,
            notes,
        });
        levels.push(level);
    }

    Ok((ArpaModel::from_levels(order, levels, vocab), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngram::count_ngrams;
    use crate::ngram::model::context_prob_sum;
    use crate::vocab::{UnitVocabulary, VocabKind};
    use alloc::string::ToString;

    fn vocab_abc() -> UnitVocabulary {
        UnitVocabulary::new(VocabKind::Word, ["a", "b", "c"].map(|s| s.to_string())).unwrap()
    }

    fn ids(vocab: &UnitVocabulary, toks: &[&str]) -> Vec<UnitId> {
        toks.iter().map(|t| vocab.id_of(t).unwrap()).collect()
    }

    /// Three-sentence toy corpus used throughout: the independently derived
    /// Katz table below was computed by hand from the padded counts.
    ///
    /// Sentences: `a b a` / `a b c` / `b a`, order 2, k = 5.
    /// Unigram counts (excl. <s>): a=4 b=3 c=1 </s>=3, total 11, with
    /// count-of-counts n1=1 n2=0, so Good-Turing is unusable and the order
    /// falls back to an absolute discount D=0.5 (n2=0). Discounted mass:
    /// a 3.5/11, b 2.5/11, c 0.5/11, </s> 2.5/11; with no unseen unigrams
    /// (an unobserved <unk> earns nothing) the seen mass 9/11 renormalizes
    /// to a 3.5/9, b 2.5/9, c 0.5/9, </s> 2.5/9. Bigram counts:
    /// (<s>,a)=2 (a,b)=2 (b,a)=2 (a,</s>)=2 (<s>,b)=1 (b,c)=1 (c,</s>)=1,
    /// n1=3 n2=4 => d1 = 2*4/(1*3) > 1, also unusable, absolute
    /// D = 3/(3+2*4) = 3/11.
    fn toy() -> (ArpaModel, BuildReport, UnitVocabulary) {
        let vocab = vocab_abc();
        let corpus = vec![
            ids(&vocab, &["a", "b", "a"]),
            ids(&vocab, &["a", "b", "c"]),
            ids(&vocab, &["b", "a"]),
        ];
        let counts = count_ngrams(&corpus, 2, &vocab).unwrap();
        let (model, report) = estimate_katz(&counts, &KatzConfig::default()).unwrap();
        (model, report, vocab)
    }

    fn assert_close(actual: f64, expected: f64) {
        assert!(
            (actual - expected).abs() < 1e-12,
            "expected {} got {}",
            expected,
            actual
        );
    }

    #[test]
    fn toy_corpus_matches_hand_computed_table() {
        let (model, report, vocab) = toy();
        let a = vocab.id_of("a").unwrap();
        let b = vocab.id_of("b").unwrap();
        let c = vocab.id_of("c").unwrap();
        let eos = vocab.eos();
        let bos = vocab.bos();

        // Both orders fall back to absolute discounting on this corpus.
        assert!(matches!(
            report.orders[0].method,
            DiscountMethod::Absolute { .. }
        ));
        assert_eq!(
            report.orders[1].method,
            DiscountMethod::Absolute { d: 3.0 / 11.0 }
        );

        // Unigrams: P(w) = (c - 0.5)/11 renormalized by 9/11; <unk> stays
        // out of the distribution because the corpus never produced it.
        assert_close(model.entry(&[a]).unwrap().log10_prob, (3.5f64 / 9.0).log10());
        assert_close(model.entry(&[b]).unwrap().log10_prob, (2.5f64 / 9.0).log10());
        assert_close(model.entry(&[c]).unwrap().log10_prob, (0.5f64 / 9.0).log10());
        assert_close(model.entry(&[eos]).unwrap().log10_prob, (2.5f64 / 9.0).log10());
        assert_close(model.entry(&[vocab.unknown()]).unwrap().log10_prob, MIN_LOG10);
        assert!(report.orders[0]
            .notes
            .iter()
            .any(|n| n.contains("renormalized")));

        // Bigrams: P(w|c) = (count - 3/11) / C(context).
        let d = 3.0 / 11.0;
        assert_close(
            model.entry(&[bos, a]).unwrap().log10_prob,
            ((2.0f64 - d) / 3.0).log10(),
        );
        assert_close(
            model.entry(&[bos, b]).unwrap().log10_prob,
            ((1.0f64 - d) / 3.0).log10(),
        );
        assert_close(
            model.entry(&[a, b]).unwrap().log10_prob,
            ((2.0f64 - d) / 4.0).log10(),
        );
        assert_close(
            model.entry(&[a, eos]).unwrap().log10_prob,
            ((2.0f64 - d) / 4.0).log10(),
        );
        assert_close(
            model.entry(&[b, a]).unwrap().log10_prob,
            ((2.0f64 - d) / 3.0).log10(),
        );
        assert_close(
            model.entry(&[b, c]).unwrap().log10_prob,
            ((1.0f64 - d) / 3.0).log10(),
        );
        assert_close(
            model.entry(&[c, eos]).unwrap().log10_prob,
            ((1.0f64 - d) / 1.0).log10(),
        );

        // Backoff weights: alpha = beta / (1 - sum of lower-order probs of
        // the seen continuations), all derived by hand.
        assert_close(
            model.entry(&[bos]).unwrap().log10_backoff,
            ((2.0f64 / 11.0) / (3.0 / 9.0)).log10(),
        );
        assert_close(
            model.entry(&[a]).unwrap().log10_backoff,
            ((3.0f64 / 22.0) / (4.0 / 9.0)).log10(),
        );
        assert_close(
            model.entry(&[b]).unwrap().log10_backoff,
            ((2.0f64 / 11.0) / (5.0 / 9.0)).log10(),
        );
        assert_close(
            model.entry(&[c]).unwrap().log10_backoff,
            ((3.0f64 / 11.0) / (6.5 / 9.0)).log10(),
        );
        // </s> and <unk> have no continuations: weight 1.
        assert_close(model.entry(&[eos]).unwrap().log10_backoff, 0.0);
    }

    #[test]
    fn unseen_context_backs_off_to_unigram() {
        let (model, _, vocab) = toy();
        let a = vocab.id_of("a").unwrap();
        let c = vocab.id_of("c").unwrap();
        // (c, a) is unseen: P(a|c) = alpha(c) * P1(a), both hand-derived.
        let expected = (((3.0f64 / 11.0) / (6.5 / 9.0)) * (3.5 / 9.0)).log10();
        assert_close(model.log10_prob(&[c], a).unwrap(), expected);
        // Matches the incremental natural-log scorer.
        let state = model.score_incremental(&model.start_state(), c).unwrap().1;
        let (lp, _) = model.score_incremental(&state, a).unwrap();
        assert_close(lp, expected * LN_10);
    }

    #[test]
    fn uniform_corpus_is_uniform() {
        // Every observed token (including </s>) appears 10 times; no
        // discounting applies since nothing has a small count, so
        // P(t) = 1/4 for the four observed tokens.
        let vocab = vocab_abc();
        let corpus: Vec<Vec<UnitId>> = (0..10).map(|_| ids(&vocab, &["a", "b", "c"])).collect();
        let counts = count_ngrams(&corpus, 1, &vocab).unwrap();
        let (model, _) = estimate_katz(&counts, &KatzConfig::default()).unwrap();
        for t in ["a", "b", "c"] {
            let id = vocab.id_of(t).unwrap();
            assert_close(model.entry(&[id]).unwrap().log10_prob, -(4.0f64).log10());
        }
        assert_close(
            model.entry(&[vocab.eos()]).unwrap().log10_prob,
            -(4.0f64).log10(),
        );
    }

    #[test]
    fn per_context_normalization_brute_force() {
        let (model, _, vocab) = toy();
        let contexts: Vec<Vec<UnitId>> = [
            vec![],
            vec![vocab.bos()],
            vec![vocab.id_of("a").unwrap()],
            vec![vocab.id_of("b").unwrap()],
            vec![vocab.id_of("c").unwrap()],
            vec![vocab.eos()],
            vec![vocab.unknown()],
        ]
        .to_vec();
        for ctx in contexts {
            let sum = context_prob_sum(&model, &ctx);
            assert!(
                (sum - 1.0).abs() < 1e-6,
                "context {:?} sums to {}",
                ctx,
                sum
            );
        }
    }

    #[test]
    fn estimation_is_deterministic() {
        let (a, _, _) = toy();
        let (b, _, _) = toy();
        assert_eq!(a, b);
    }
}
