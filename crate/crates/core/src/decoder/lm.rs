//! Uniform LM scorer interface over the decoder's unit space, with
//! adapters for the backoff n-gram model, the speller composition, and the
//! recurrent LM.
//!
//! Adapters are constructed against the decode inventory (the lattice's
//! unit strings) and translate unit ids by string lookup, so the LM's own
//! id layout never leaks into the search. Scores are natural logs;
//! negative infinity is legal (the speller's dictionary constraint).

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::ngram::{ArpaModel, NgramState};
use crate::rnnlm::{forward_step, RnnLmParams, RnnState};
use crate::speller::{SpellerScorer, SpellerState};
use crate::vocab::{UnitId, BOS_TOKEN, EOS_TOKEN};

use super::DecodeError;

/// Incremental unit-level language model over the decoder's inventory.
pub trait LmScorer {
    type State: Clone;
    /// Size of the decode unit space the scorer was wired to.
    fn vocab_size(&self) -> usize;
    fn start_state(&self) -> Self::State;
    /// Natural-log probability of `unit` after `state`, plus the advanced
    /// state.
    fn score(&self, state: &Self::State, unit: UnitId) -> (f64, Self::State);
    /// Log probabilities of every unit at `state`; the default loops over
    /// `score`, implementations with a cached distribution override it.
    fn score_dist(&self, state: &Self::State) -> Vec<f64> {
        (0..self.vocab_size() as u32)
            .map(|u| self.score(state, UnitId(u)).0)
            .collect()
    }
}

/// Backoff n-gram LM over decode units. Scores are the model's native
/// backoff probabilities; the model vocabulary must cover every unit.
pub struct NgramLm<'a> {
    model: &'a ArpaModel,
    map: Vec<UnitId>,
}

impl<'a> NgramLm<'a> {
    pub fn new(model: &'a ArpaModel, units: &[String]) -> Result<NgramLm<'a>, DecodeError> {
        let mut map = Vec::with_capacity(units.len());
        for unit in units {
            let id = model
                .vocab()
                .id_of(unit)
                .ok_or_else(|| DecodeError::UnitNotInLm(unit.clone()))?;
            if model.log10_prob(&[], id).is_none() {
                return Err(DecodeError::UnitNotInLm(unit.clone()));
            }
            map.push(id);
        }
        Ok(NgramLm { model, map })
    }
}

impl LmScorer for NgramLm<'_> {
    type State = NgramState;

    fn vocab_size(&self) -> usize {
        self.map.len()
    }

    fn start_state(&self) -> NgramState {
        self.model.start_state()
    }

    fn score(&self, state: &NgramState, unit: UnitId) -> (f64, NgramState) {
        let token = self.map[unit.idx()];
        self.model
            .score_incremental(state, token)
            .expect("mapped tokens are scoreable")
    }
}

/// Speller-composed word LM. The trie is already built over decode unit
/// ids, so only EOS needs translating.
pub struct SpellerLm<'a> {
    scorer: SpellerScorer<'a>,
    eos: UnitId,
    vocab_size: usize,
}

impl<'a> SpellerLm<'a> {
    pub fn new(scorer: SpellerScorer<'a>, units: &[String]) -> Result<SpellerLm<'a>, DecodeError> {
        let eos = units
            .iter()
            .position(|u| u == EOS_TOKEN)
            .ok_or_else(|| DecodeError::UnitNotInLm(EOS_TOKEN.into()))?;
        Ok(SpellerLm {
            scorer,
            eos: UnitId(eos as u32),
            vocab_size: units.len(),
        })
    }
}

impl LmScorer for SpellerLm<'_> {
    type State = SpellerState;

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn start_state(&self) -> SpellerState {
        self.scorer.start_state()
    }

    fn score(&self, state: &SpellerState, unit: UnitId) -> (f64, SpellerState) {
        let result = if unit == self.eos {
            self.scorer.score_eos(state)
        } else {
            self.scorer.score_unit(state, unit)
        };
        result.expect("states produced by this adapter are valid")
    }
}

/// Recurrent LM over decode units. The network distributes over its full
/// training inventory (sentinels included), so the adapter renormalizes
/// the mapped slice: scores are conditioned on the decode alphabet.
pub struct NeuralLm<'a> {
    params: &'a RnnLmParams,
    map: Vec<UnitId>,
    bos: UnitId,
}

/// Carried RNN state plus the cached decode-space distribution at that
/// state, so ranking all units costs one forward pass per hypothesis.
#[derive(Clone, PartialEq, Debug)]
pub struct NeuralLmState {
    rnn: RnnState,
    dist: Vec<f64>,
}

impl<'a> NeuralLm<'a> {
    pub fn new(
        params: &'a RnnLmParams,
        model_units: &[String],
        units: &[String],
    ) -> Result<NeuralLm<'a>, DecodeError> {
        if model_units.len() != params.vocab_size {
            return Err(DecodeError::VocabMismatch(alloc::format!(
                "{} unit strings for a network over {} tokens",
                model_units.len(),
                params.vocab_size
            )));
        }
        let lookup = |name: &str| -> Option<UnitId> {
            model_units
                .iter()
                .position(|u| u == name)
                .map(|i| UnitId(i as u32))
        };
        let bos =
            lookup(BOS_TOKEN).ok_or_else(|| DecodeError::UnitNotInLm(BOS_TOKEN.into()))?;
        let mut map = Vec::with_capacity(units.len());
        for unit in units {
            map.push(lookup(unit).ok_or_else(|| DecodeError::UnitNotInLm(unit.clone()))?);
        }
        Ok(NeuralLm { params, map, bos })
    }

    fn mapped_dist(&self, full: &[f64]) -> Vec<f64> {
        let mapped: Vec<f64> = self.map.iter().map(|t| full[t.idx()]).collect();
        let max = mapped.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = mapped.iter().map(|lp| (lp - max).exp()).sum::<f64>().ln() + max;
        mapped.iter().map(|lp| lp - log_z).collect()
    }

    fn advance(&self, rnn: &RnnState, token: UnitId) -> NeuralLmState {
        let (full, next) =
            forward_step(self.params, rnn, token).expect("mapped tokens are in range");
        NeuralLmState {
            dist: self.mapped_dist(&full),
            rnn: next,
        }
    }
}

impl LmScorer for NeuralLm<'_> {
    type State = NeuralLmState;

    fn vocab_size(&self) -> usize {
        self.map.len()
    }

    fn start_state(&self) -> NeuralLmState {
        self.advance(&RnnState::zeros(self.params), self.bos)
    }

    fn score(&self, state: &NeuralLmState, unit: UnitId) -> (f64, NeuralLmState) {
        let lp = state.dist[unit.idx()];
        (lp, self.advance(&state.rnn, self.map[unit.idx()]))
    }

    fn score_dist(&self, state: &NeuralLmState) -> Vec<f64> {
        state.dist.clone()
    }
}

/// Runtime-selected LM kind; what the command-line tools decode with.
pub enum AnyLm<'a> {
    Ngram(NgramLm<'a>),
    Speller(SpellerLm<'a>),
    Neural(NeuralLm<'a>),
}

#[derive(Clone, Debug)]
pub enum AnyLmState {
    Ngram(NgramState),
    Speller(SpellerState),
    Neural(NeuralLmState),
}

impl LmScorer for AnyLm<'_> {
    type State = AnyLmState;

    fn vocab_size(&self) -> usize {
        match self {
            AnyLm::Ngram(lm) => lm.vocab_size(),
            AnyLm::Speller(lm) => lm.vocab_size(),
            AnyLm::Neural(lm) => lm.vocab_size(),
        }
    }

    fn start_state(&self) -> AnyLmState {
        match self {
            AnyLm::Ngram(lm) => AnyLmState::Ngram(lm.start_state()),
            AnyLm::Speller(lm) => AnyLmState::Speller(lm.start_state()),
            AnyLm::Neural(lm) => AnyLmState::Neural(lm.start_state()),
        }
    }

    fn score(&self, state: &AnyLmState, unit: UnitId) -> (f64, AnyLmState) {
        match (self, state) {
            (AnyLm::Ngram(lm), AnyLmState::Ngram(s)) => {
                let (lp, next) = lm.score(s, unit);
                (lp, AnyLmState::Ngram(next))
            }
            (AnyLm::Speller(lm), AnyLmState::Speller(s)) => {
                let (lp, next) = lm.score(s, unit);
                (lp, AnyLmState::Speller(next))
            }
            (AnyLm::Neural(lm), AnyLmState::Neural(s)) => {
                let (lp, next) = lm.score(s, unit);
                (lp, AnyLmState::Neural(next))
            }
            _ => unreachable!("state kind always matches the scorer kind"),
        }
    }

    fn score_dist(&self, state: &AnyLmState) -> Vec<f64> {
        match (self, state) {
            (AnyLm::Neural(lm), AnyLmState::Neural(s)) => lm.score_dist(s),
            _ => (0..self.vocab_size() as u32)
                .map(|u| self.score(state, UnitId(u)).0)
                .collect(),
        }
    }
}
