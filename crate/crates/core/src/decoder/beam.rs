//! The fused beam search and n-best rescoring.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::vocab::UnitId;

use super::lm::LmScorer;
use super::scorer::AcousticScorer;
use super::{coverage_penalty, partial_coverage, weighted, DecodeConfig, DecodeError, Hypothesis};

struct Entry<AS, LS> {
    tokens: Vec<UnitId>,
    acoustic: f64,
    lm: f64,
    mass: Vec<f64>,
    ac_state: AS,
    lm_state: Option<LS>,
}

struct Candidate<AS> {
    parent: usize,
    tokens: Vec<UnitId>,
    acoustic: f64,
    lm: f64,
    mass: Vec<f64>,
    ac_state: AS,
    fused: f64,
}

fn sort_hypotheses(pool: &mut [Hypothesis]) {
    pool.sort_by(|x, y| {
        y.fused_score
            .partial_cmp(&x.fused_score)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| x.tokens.cmp(&y.tokens))
    });
}

/// Label-synchronous beam search over the fused objective. Hypotheses that
/// emit EOS move to a completed pool and stop holding beam slots; the
/// search stops once no active hypothesis can still beat the pool, or at
/// `max_steps`. Ties break toward the lexicographically smaller token
/// sequence. Returns up to `nbest` complete hypotheses sorted by fused
/// score; if nothing completed, the best incomplete hypotheses are
/// returned flagged as such.
pub fn beam_search<A, L>(
    acoustic: &A,
    lm: Option<&L>,
    eos: UnitId,
    config: &DecodeConfig,
) -> Result<Vec<Hypothesis>, DecodeError>
where
    A: AcousticScorer,
    L: LmScorer,
{
    config.validate()?;
    if let Some(lm) = lm {
        if lm.vocab_size() != acoustic.vocab_size() {
            return Err(DecodeError::VocabMismatch(alloc::format!(
                "LM covers {} units, acoustic scorer {}",
                lm.vocab_size(),
                acoustic.vocab_size()
            )));
        }
    }
    let vocab = acoustic.vocab_size();
    let frames = acoustic.num_frames();
    if eos.idx() >= vocab {
        return Err(DecodeError::VocabMismatch(alloc::format!(
            "EOS id {} outside the {}-unit inventory",
            eos.0,
            vocab
        )));
    }

    let mut active: Vec<Entry<A::State, L::State>> = alloc::vec![Entry {
        tokens: Vec::new(),
        acoustic: 0.0,
        lm: 0.0,
        mass: alloc::vec![0.0; frames],
        ac_state: acoustic.start_state(),
        lm_state: lm.map(|l| l.start_state()),
    }];
    let mut pool: Vec<Hypothesis> = Vec::new();
    let coverage_best = frames as f64 * config.coverage_clamp.ln();

    for _ in 0..config.max_steps {
        let mut candidates: Vec<Candidate<A::State>> = Vec::new();
        for (pi, entry) in active.iter().enumerate() {
            let lm_dist = match (lm, &entry.lm_state) {
                (Some(l), Some(s)) => Some(l.score_dist(s)),
                _ => None,
            };
            for unit in 0..vocab as u32 {
                let unit = UnitId(unit);
                let Some(step) = acoustic.step(&entry.ac_state, unit) else {
                    break; // scorer exhausted: no expansions from this state
                };
                let acoustic_total = entry.acoustic + step.log_prob;
                let lm_total = entry.lm + lm_dist.as_ref().map_or(0.0, |d| d[unit.idx()]);
                let mut mass = entry.mass.clone();
                for (m, a) in mass.iter_mut().zip(&step.attention) {
                    *m += a;
                }
                let mut tokens = entry.tokens.clone();
                tokens.push(unit);
                if unit == eos {
                    let coverage =
                        coverage_penalty(&mass, config.coverage_clamp, config.coverage_floor)?;
                    let fused = acoustic_total
                        + weighted(config.lambda, lm_total)
                        + weighted(config.gamma, coverage);
                    // An impossible completion is no completion at all.
                    if fused > f64::NEG_INFINITY {
                        pool.push(Hypothesis {
                            tokens,
                            acoustic_logprob: acoustic_total,
                            lm_logprob: lm_total,
                            coverage,
                            fused_score: fused,
                            frame_attention_mass: mass,
                            complete: true,
                        });
                    }
                } else {
                    let pcov =
                        partial_coverage(&mass, config.coverage_clamp, config.coverage_floor);
                    let fused = acoustic_total
                        + weighted(config.lambda, lm_total)
                        + weighted(config.gamma, pcov);
                    if fused > f64::NEG_INFINITY {
                        candidates.push(Candidate {
                            parent: pi,
                            tokens,
                            acoustic: acoustic_total,
                            lm: lm_total,
                            mass,
                            ac_state: step.state,
                            fused,
                        });
                    }
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|x, y| {
            y.fused
                .partial_cmp(&x.fused)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then_with(|| x.tokens.cmp(&y.tokens))
        });
        candidates.truncate(config.beam_width);
        let next: Vec<Entry<A::State, L::State>> = candidates
            .into_iter()
            .map(|c| {
                let lm_state = match (lm, &active[c.parent].lm_state) {
                    (Some(l), Some(s)) => Some(l.score(s, *c.tokens.last().unwrap()).1),
                    _ => None,
                };
                Entry {
                    tokens: c.tokens,
                    acoustic: c.acoustic,
                    lm: c.lm,
                    mass: c.mass,
                    ac_state: c.ac_state,
                    lm_state,
                }
            })
            .collect();
        active = next;

        if pool.len() >= config.nbest {
            sort_hypotheses(&mut pool);
            let kth = pool[config.nbest - 1].fused_score;
            let best_bound = active
                .iter()
                .map(|e| {
                    e.acoustic
                        + weighted(config.lambda, e.lm)
                        + weighted(config.gamma, coverage_best)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if kth > best_bound {
                break;
            }
        }
    }

    if pool.is_empty() {
        // Nothing completed within the step budget: surface the best
        // partial transcripts, flagged.
        let mut partials: Vec<Hypothesis> = active
            .into_iter()
            .map(|e| {
                let pcov =
                    partial_coverage(&e.mass, config.coverage_clamp, config.coverage_floor);
                Hypothesis {
                    fused_score: e.acoustic
                        + weighted(config.lambda, e.lm)
                        + weighted(config.gamma, pcov),
                    tokens: e.tokens,
                    acoustic_logprob: e.acoustic,
                    lm_logprob: e.lm,
                    coverage: pcov,
                    frame_attention_mass: e.mass,
                    complete: false,
                }
            })
            .collect();
        sort_hypotheses(&mut partials);
        partials.truncate(config.nbest);
        return Ok(partials);
    }
    sort_hypotheses(&mut pool);
    pool.truncate(config.nbest);
    Ok(pool)
}

/// Re-ranks complete hypotheses by the fused objective with the LM applied
/// to each full token sequence from scratch; the stored coverage term is
/// reused. The input list is left untouched.
pub fn rescore_nbest<L: LmScorer>(
    hypotheses: &[Hypothesis],
    lm: &L,
    lambda: f64,
    gamma: f64,
) -> Result<Vec<Hypothesis>, DecodeError> {
    let mut out = Vec::with_capacity(hypotheses.len());
    for hyp in hypotheses {
        if !hyp.complete {
            return Err(DecodeError::IncompleteHypothesis);
        }
        let mut state = lm.start_state();
        let mut lm_total = 0.0;
        for &u in &hyp.tokens {
            if u.idx() >= lm.vocab_size() {
                return Err(DecodeError::UnitNotInLm(alloc::format!("id {}", u.0)));
            }
            let (lp, next) = lm.score(&state, u);
            lm_total += lp;
            state = next;
        }
        let mut rescored = hyp.clone();
        rescored.lm_logprob = lm_total;
        rescored.fused_score =
            hyp.acoustic_logprob + weighted(lambda, lm_total) + weighted(gamma, hyp.coverage);
        out.push(rescored);
    }
    sort_hypotheses(&mut out);
    Ok(out)
}
