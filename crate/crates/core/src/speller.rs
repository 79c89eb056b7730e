//! Word-level LM composed with a speller that breaks words into units.
//!
//! The composition is realized as a prefix trie over unit-tokenized words
//! with on-the-fly sum-marginalization: the probability of a unit at a trie
//! node is the word-LM probability mass of the node's subtree divided by
//! the mass of the node itself (sum-pushed weights, so the scorer stays a
//! true distribution at every state). Units that extend no vocabulary word
//! score negative infinity — the implicit dictionary.
//!
//! Two path styles cover both unit kinds with one code path:
//!
//! * grapheme vocabularies store `_` + graphemes(word); the `_` unit is an
//!   explicit boundary edge, and the sentence-initial word (which carries
//!   no marker in grapheme streams) enters through a fused root descent;
//! * wordpiece vocabularies store the marked tokenization produced by
//!   `tokenize`, so the boundary is folded into word-initial pieces.
//!
//! Committing a word multiplies in `P(word|ctx)` and the dividing masses
//! telescope away, so the unit-level score of a full sentence (EOS
//! included) equals the word-LM sentence score exactly.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::ngram::{ArpaModel, NgramState};
use crate::vocab::UnitId;

/// Index of a word in the speller's vocabulary list.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct WordId(pub u32);

impl WordId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum SpellerError {
    EmptyVocabulary,
    EmptyTokenization(String),
    WordNotInLm(String),
    InvalidState,
}

impl core::fmt::Display for SpellerError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SpellerError::EmptyVocabulary => write!(f, "speller vocabulary is empty"),
            SpellerError::EmptyTokenization(w) => {
                write!(f, "word {:?} tokenizes to an empty unit sequence", w)
            }
            SpellerError::WordNotInLm(w) => {
                write!(f, "word {:?} is missing from the word LM vocabulary", w)
            }
            SpellerError::InvalidState => write!(f, "invalid speller state"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SpellerError {}

/// How word paths are laid out in the trie.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum TrieStyle {
    /// Paths are the boundary unit followed by the word's units
    /// (grapheme vocabularies).
    BoundaryEdge { boundary: UnitId },
    /// Paths are the word's marked tokenization (wordpiece vocabularies).
    MarkedPieces,
}

#[derive(Clone, PartialEq, Debug)]
struct Node {
    children: BTreeMap<UnitId, u32>,
    /// Word completing exactly at this node.
    word: Option<WordId>,
    /// Every word whose path passes through or ends at this node.
    subtree_words: Vec<WordId>,
}

impl Node {
    fn new() -> Node {
        Node {
            children: BTreeMap::new(),
            word: None,
            subtree_words: Vec::new(),
        }
    }
}

const ROOT: u32 = 0;

/// Prefix trie over unit-tokenized words, carrying per-node subtree word
/// sets for mass marginalization.
#[derive(Clone, PartialEq, Debug)]
pub struct PrefixTrie {
    nodes: Vec<Node>,
    style: TrieStyle,
    words: Vec<String>,
    /// Words dropped because they appeared twice in the input vocabulary.
    pub duplicate_words: Vec<String>,
}

impl PrefixTrie {
    pub fn style(&self) -> TrieStyle {
        self.style
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id.idx()]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn child(&self, node: u32, unit: UnitId) -> Option<u32> {
        self.nodes[node as usize].children.get(&unit).copied()
    }

    /// Walks a unit path from the root; None as soon as it leaves the trie.
    pub fn walk(&self, path: &[UnitId]) -> Option<u32> {
        let mut node = ROOT;
        for &u in path {
            node = self.child(node, u)?;
        }
        Some(node)
    }

    pub fn completes(&self, node: u32) -> Option<WordId> {
        self.nodes.get(node as usize)?.word
    }
}

/// Builds the trie from a word list and a per-word unit tokenizer. The
/// tokenizer must yield the path for the chosen style: bare units for
/// `BoundaryEdge` (the boundary edge is added here), marked pieces for
/// `MarkedPieces`. Duplicate words are dropped and recorded.
pub fn build_trie<F>(
    words: &[String],
    style: TrieStyle,
    mut tokenize_word: F,
) -> Result<PrefixTrie, SpellerError>
where
    F: FnMut(&str) -> Vec<UnitId>,
{
    if words.is_empty() {
        return Err(SpellerError::EmptyVocabulary);
    }
    let mut trie = PrefixTrie {
        nodes: alloc::vec![Node::new()],
        style,
        words: Vec::new(),
        duplicate_words: Vec::new(),
    };
    let mut seen: BTreeMap<String, ()> = BTreeMap::new();
    for word in words {
        if seen.insert(word.clone(), ()).is_some() {
            trie.duplicate_words.push(word.clone());
            continue;
        }
        let mut path = tokenize_word(word);
        if path.is_empty() {
            return Err(SpellerError::EmptyTokenization(word.clone()));
        }
        if let TrieStyle::BoundaryEdge { boundary } = style {
            path.insert(0, boundary);
        }
        let wid = WordId(trie.words.len() as u32);
        trie.words.push(word.clone());
        let mut node = ROOT;
        trie.nodes[node as usize].subtree_words.push(wid);
        for u in path {
            let next = match trie.nodes[node as usize].children.get(&u) {
                Some(&n) => n,
                None => {
                    let n = trie.nodes.len() as u32;
                    trie.nodes.push(Node::new());
                    trie.nodes[node as usize].children.insert(u, n);
                    n
                }
            };
            node = next;
            trie.nodes[node as usize].subtree_words.push(wid);
        }
        debug_assert!(trie.nodes[node as usize].word.is_none());
        trie.nodes[node as usize].word = Some(wid);
    }
    Ok(trie)
}

/// Incremental cursor over the composition: the word-LM context, the trie
/// position, and the cached log of the state's outgoing probability mass.
#[derive(Clone, PartialEq, Debug)]
pub struct SpellerState {
    pub word_state: NgramState,
    node: u32,
    pub pending_logmass: f64,
}

impl SpellerState {
    pub fn node(&self) -> u32 {
        self.node
    }
}

/// Unit-level scorer over a word LM and a prefix trie.
pub struct SpellerScorer<'a> {
    word_lm: &'a ArpaModel,
    trie: &'a PrefixTrie,
    /// WordId -> token id in the word LM's vocabulary.
    word_tokens: Vec<UnitId>,
}

impl<'a> SpellerScorer<'a> {
    pub fn new(word_lm: &'a ArpaModel, trie: &'a PrefixTrie) -> Result<Self, SpellerError> {
        let mut word_tokens = Vec::with_capacity(trie.words.len());
        for w in &trie.words {
            let id = word_lm
                .vocab()
                .id_of(w)
                .ok_or_else(|| SpellerError::WordNotInLm(w.clone()))?;
            word_tokens.push(id);
        }
        Ok(SpellerScorer {
            word_lm,
            trie,
            word_tokens,
        })
    }

    pub fn trie(&self) -> &PrefixTrie {
        self.trie
    }

    /// Natural-log word probability under the current word context.
    fn word_logprob(&self, ctx: &NgramState, wid: WordId) -> f64 {
        let token = self.word_tokens[wid.idx()];
        match self.word_lm.score_incremental(ctx, token) {
            Ok((lp, _)) => lp,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn advance_word(&self, ctx: &NgramState, wid: WordId) -> NgramState {
        let token = self.word_tokens[wid.idx()];
        self.word_lm
            .score_incremental(ctx, token)
            .map(|(_, s)| s)
            .unwrap_or_else(|_| ctx.clone())
    }

    fn eos_logprob(&self, ctx: &NgramState) -> f64 {
        match self
            .word_lm
            .score_incremental(ctx, self.word_lm.vocab().eos())
        {
            Ok((lp, _)) => lp,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// log sum of word-LM probabilities over a node's subtree.
    pub fn node_logmass(&self, node: u32, ctx: &NgramState) -> f64 {
        let mut sum = 0.0;
        for &wid in &self.trie.nodes[node as usize].subtree_words {
            sum += self.word_logprob(ctx, wid).exp();
        }
        sum.ln()
    }

    /// log of `1 - P(</s>|ctx)`: the mass of "another word follows".
    fn continuation_logmass(&self, ctx: &NgramState) -> f64 {
        let p_eos = self.eos_logprob(ctx).exp();
        (1.0 - p_eos).max(0.0).ln()
    }

    /// State before any unit: trie root, begin-of-sentence word context,
    /// unit probability mass 1.
    pub fn start_state(&self) -> SpellerState {
        SpellerState {
            word_state: self.word_lm.start_state(),
            node: ROOT,
            pending_logmass: 0.0,
        }
    }

    /// Scores one unit event; end-of-sentence goes through
    /// [`SpellerScorer::score_eos`]. Negative infinity is a legal score
    /// (dictionary constraint), not an error.
    pub fn score_unit(
        &self,
        state: &SpellerState,
        unit: UnitId,
    ) -> Result<(f64, SpellerState), SpellerError> {
        if state.node as usize >= self.trie.nodes.len() {
            return Err(SpellerError::InvalidState);
        }
        let dead = |state: &SpellerState| (f64::NEG_INFINITY, state.clone());

        // Direct trie descent. At the root of a boundary-edge trie the only
        // child is the boundary itself, which a sentence can never start
        // with; the fused descent below handles that style instead.
        let root_fused =
            matches!(self.trie.style, TrieStyle::BoundaryEdge { .. }) && state.node == ROOT;
        if !root_fused {
            if let Some(child) = self.trie.child(state.node, unit) {
                let mass = self.node_logmass(child, &state.word_state);
                return Ok((
                    mass - state.pending_logmass,
                    SpellerState {
                        word_state: state.word_state.clone(),
                        node: child,
                        pending_logmass: mass,
                    },
                ));
            }
        }

        if root_fused {
            // Sentence-initial word of a grapheme stream: skip the implicit
            // boundary edge.
            let TrieStyle::BoundaryEdge { boundary } = self.trie.style else {
                unreachable!()
            };
            let Some(bnode) = self.trie.child(ROOT, boundary) else {
                return Ok(dead(state));
            };
            let Some(child) = self.trie.child(bnode, unit) else {
                return Ok(dead(state));
            };
            let mass = self.node_logmass(child, &state.word_state);
            return Ok((
                mass - state.pending_logmass,
                SpellerState {
                    word_state: state.word_state.clone(),
                    node: child,
                    pending_logmass: mass,
                },
            ));
        }

        // No continuation of the current prefix: the unit can only be legal
        // as the start of the next word, after committing the word that
        // completes here.
        let Some(wid) = self.trie.completes(state.node) else {
            return Ok(dead(state));
        };
        let word_lp = self.word_logprob(&state.word_state, wid);
        let next_ctx = self.advance_word(&state.word_state, wid);
        let (landing, landing_mass) = match self.trie.style {
            TrieStyle::BoundaryEdge { boundary } => {
                if unit != boundary {
                    return Ok(dead(state));
                }
                // Explicit boundary: land on the boundary node, whose mass
                // is the continuation mass 1 - P(</s>|ctx').
                let Some(b) = self.trie.child(ROOT, boundary) else {
                    return Ok(dead(state));
                };
                (b, self.continuation_logmass(&next_ctx))
            }
            TrieStyle::MarkedPieces => {
                let Some(c) = self.trie.child(ROOT, unit) else {
                    return Ok(dead(state));
                };
                (c, self.node_logmass(c, &next_ctx))
            }
        };
        Ok((
            word_lp + landing_mass - state.pending_logmass,
            SpellerState {
                word_state: next_ctx,
                node: landing,
                pending_logmass: landing_mass,
            },
        ))
    }

    /// Scores end-of-sentence: legal at the start state (empty sentence)
    /// and at any word-completing node.
    pub fn score_eos(&self, state: &SpellerState) -> Result<(f64, SpellerState), SpellerError> {
        if state.node as usize >= self.trie.nodes.len() {
            return Err(SpellerError::InvalidState);
        }
        if state.node == ROOT {
            let lp = self.eos_logprob(&state.word_state) - state.pending_logmass;
            return Ok((lp, state.clone()));
        }
        let Some(wid) = self.trie.completes(state.node) else {
            return Ok((f64::NEG_INFINITY, state.clone()));
        };
        let word_lp = self.word_logprob(&state.word_state, wid);
        let next_ctx = self.advance_word(&state.word_state, wid);
        let lp = word_lp + self.eos_logprob(&next_ctx) - state.pending_logmass;
        Ok((
            lp,
            SpellerState {
                word_state: next_ctx,
                node: ROOT,
                pending_logmass: 0.0,
            },
        ))
    }
}
