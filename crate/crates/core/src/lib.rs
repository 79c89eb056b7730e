//! Shallow-fusion decoding toolkit: label-synchronous beam search over a
//! pluggable acoustic scorer, with log-linear interpolation of an external
//! language model and an attention-coverage penalty.
//!
//! The crate is split along the moving parts of such a system:
//!
//! * [`vocab`] — unit inventories (graphemes, wordpieces), wordpiece
//!   induction and greedy tokenization;
//! * [`ngram`] — backoff n-gram LMs: counting, Katz estimation, pruning,
//!   ARPA text serialization, incremental scoring;
//! * [`speller`] — composition of a word-level LM with a speller that
//!   breaks words into units, giving a unit-level scorer with an implicit
//!   dictionary;
//! * [`rnnlm`] — a small trainable LSTM language model over units;
//! * [`decoder`] — the fused beam search, coverage penalty, n-best
//!   rescoring, and the acoustic/LM scorer interfaces;
//! * [`eval`] — word error rate, relative WERR, and grid tuning of the
//!   fusion weights.
//!
//! Everything here is deterministic given its inputs and seeds, and all
//! model types are immutable after construction so concurrent scoring is
//! safe. The crate is `no_std`-compatible (with `alloc`); file handling
//! and the CLI live in the companion `shallowfuse-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod decoder;
pub mod eval;
pub mod ngram;
pub mod rnnlm;
pub mod speller;
pub mod vocab;
