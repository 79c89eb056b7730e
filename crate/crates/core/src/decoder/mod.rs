//! Label-synchronous beam search with shallow fusion.
//!
//! The decode objective is the log-linear interpolation
//! `log p(y|x) + lambda * log p_LM(y) + gamma * c(x, y)` where `c` is the
//! attention-coverage penalty; `lambda = gamma = 0` reduces the search to
//! plain maximum-posterior decoding. Acoustic evidence comes through the
//! [`AcousticScorer`] interface, the external LM through [`LmScorer`], so
//! n-gram, speller-composed, and recurrent LMs all plug into one search.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

mod beam;
mod lm;
mod scorer;

pub use beam::{beam_search, rescore_nbest};
pub use lm::{AnyLm, LmScorer, NeuralLm, NeuralLmState, NgramLm, SpellerLm};
pub use scorer::{
    read_lattice, write_lattice, AcousticScorer, AcousticStep, Lattice, NoisyReferenceScorer,
    TableScorer,
};

use crate::vocab::UnitId;

#[derive(Clone, PartialEq, Debug)]
pub enum DecodeError {
    InvalidConfig(String),
    VocabMismatch(String),
    NegativeAttentionMass,
    UnnormalizedRow { step: usize, sum: f64 },
    IncompleteHypothesis,
    UnitNotInLm(String),
    Lm(String),
    Parse { line: usize, message: String },
}

impl core::fmt::Display for DecodeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DecodeError::InvalidConfig(m) => write!(f, "invalid decode configuration: {}", m),
            DecodeError::VocabMismatch(m) => write!(f, "scorer vocabularies disagree: {}", m),
            DecodeError::NegativeAttentionMass => write!(f, "negative attention mass"),
            DecodeError::UnnormalizedRow { step, sum } => {
                write!(f, "scorer row at step {} sums to {}, expected 1", step, sum)
            }
            DecodeError::IncompleteHypothesis => {
                write!(f, "operation requires complete hypotheses")
            }
            DecodeError::UnitNotInLm(u) => {
                write!(f, "unit {:?} outside the LM scorer vocabulary", u)
            }
            DecodeError::Lm(m) => write!(f, "LM scorer failure: {}", m),
            DecodeError::Parse { line, message } => {
                write!(f, "lattice parse error at line {}: {}", line, message)
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DecodeError {}

/// Search parameters. `lambda` weights the LM, `gamma` the coverage
/// penalty; both are tuned on a dev set and must be nonnegative.
#[derive(Clone, PartialEq, Debug)]
pub struct DecodeConfig {
    pub beam_width: usize,
    pub nbest: usize,
    pub max_steps: usize,
    pub lambda: f64,
    pub gamma: f64,
    /// Per-frame attention mass above this value earns no further credit.
    pub coverage_clamp: f64,
    /// Floor for the per-frame log term, keeping scores finite while
    /// frames are uncovered.
    pub coverage_floor: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_width: 8,
            nbest: 1,
            max_steps: 200,
            lambda: 0.0,
            gamma: 0.0,
            coverage_clamp: 0.5,
            coverage_floor: -20.0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam_width < 1 {
            return Err(DecodeError::InvalidConfig("beam width must be >= 1".into()));
        }
        if self.nbest < 1 {
            return Err(DecodeError::InvalidConfig("nbest must be >= 1".into()));
        }
        if self.max_steps < 1 {
            return Err(DecodeError::InvalidConfig("max steps must be >= 1".into()));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(DecodeError::InvalidConfig(
                "lambda must be finite and nonnegative".into(),
            ));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(DecodeError::InvalidConfig(
                "gamma must be finite and nonnegative".into(),
            ));
        }
        if !(self.coverage_clamp > 0.0 && self.coverage_clamp <= 1.0) {
            return Err(DecodeError::InvalidConfig(
                "coverage clamp must be in (0, 1]".into(),
            ));
        }
        if !self.coverage_floor.is_finite() {
            return Err(DecodeError::InvalidConfig(
                "coverage floor must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// A decoded transcript with its score decomposition:
/// `fused_score = acoustic_logprob + lambda*lm_logprob + gamma*coverage`
/// under the decode's weights. `tokens` includes the final EOS when the
/// hypothesis is complete.
#[derive(Clone, PartialEq, Debug)]
pub struct Hypothesis {
    pub tokens: Vec<UnitId>,
    pub acoustic_logprob: f64,
    pub lm_logprob: f64,
    pub coverage: f64,
    pub fused_score: f64,
    /// Attention mass accumulated per input frame over the emitted steps.
    pub frame_attention_mass: Vec<f64>,
    pub complete: bool,
}

/// `sum_i max(ln(min(mass_i, clamp)), floor)` over all input frames;
/// uncovered frames sit at the floor. Penalizes transcripts whose
/// attention leaves input frames unread.
pub fn coverage_penalty(
    frame_attention_mass: &[f64],
    clamp: f64,
    floor: f64,
) -> Result<f64, DecodeError> {
    let mut total = 0.0;
    for &m in frame_attention_mass {
        if m < 0.0 {
            return Err(DecodeError::NegativeAttentionMass);
        }
        total += m.min(clamp).ln().max(floor);
    }
    Ok(total)
}

/// Coverage over the frames touched so far only; used to compare partial
/// hypotheses without penalizing short prefixes for frames they have not
/// reached yet.
pub(crate) fn partial_coverage(frame_attention_mass: &[f64], clamp: f64, floor: f64) -> f64 {
    frame_attention_mass
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|&m| m.min(clamp).ln().max(floor))
        .sum()
}

/// `w * x` with the convention that a zero weight contributes exactly
/// nothing, even against an infinite term.
pub(crate) fn weighted(w: f64, x: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * x
    }
}
