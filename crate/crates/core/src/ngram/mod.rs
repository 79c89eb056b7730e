//! Backoff n-gram language models: exact counting, Katz estimation with
//! Good-Turing discounting, probability-rank pruning, ARPA text
//! serialization, and incremental scoring over any unit inventory.
//!
//! Probabilities are stored as log10 (the ARPA convention) and exposed as
//! natural logs at the scoring API; the conversion happens in exactly one
//! place.

use alloc::string::String;

mod arpa;
mod counts;
mod katz;
mod model;
mod prune;

pub use arpa::{read_arpa, write_arpa};
pub use counts::{count_ngrams, NgramCounts};
pub use katz::{estimate_katz, BuildReport, DiscountMethod, KatzConfig, OrderReport};
pub use model::{context_prob_sum, ArpaEntry, ArpaModel, NgramState};
pub use prune::prune;

/// Floor for log10 values standing in for probability zero (the ARPA `-99`
/// convention).
pub const MIN_LOG10: f64 = -99.0;

pub(crate) const LN_10: f64 = core::f64::consts::LN_10;

#[derive(Clone, PartialEq, Debug)]
pub enum NgramError {
    InvalidOrder(usize),
    EmptyCorpus,
    UnknownToken(u32),
    InvalidTokenId(u32),
    PruneBudgetTooSmall { budget: usize, unigrams: usize },
    Parse { line: usize, message: String },
}

impl core::fmt::Display for NgramError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            NgramError::InvalidOrder(n) => write!(f, "invalid n-gram order {}", n),
            NgramError::EmptyCorpus => write!(f, "corpus is empty"),
            NgramError::UnknownToken(id) => write!(f, "token id {} cannot be scored", id),
            NgramError::InvalidTokenId(id) => write!(f, "token id {} outside the vocabulary", id),
            NgramError::PruneBudgetTooSmall { budget, unigrams } => write!(
                f,
                "prune budget {} is below the unigram entry count {}",
                budget, unigrams
            ),
            NgramError::Parse { line, message } => {
                write!(f, "ARPA parse error at line {}: {}", line, message)
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for NgramError {}
