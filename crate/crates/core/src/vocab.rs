//! Unit inventories and tokenization.
//!
//! Two unit kinds are used for decoding: graphemes (one unit per character,
//! spaces mapped to the boundary marker `_`) and wordpieces (sub-word units
//! induced from word frequencies, word-initial pieces carrying a `_` prefix).
//! Word inventories also reuse [`UnitVocabulary`] so word-level LMs share the
//! same id machinery.
//!
//! Wordpiece induction is an iterative pair-merge over the corpus seeded with
//! the individual graphemes, so every grapheme stays in the inventory and any
//! word can be tokenized; tokenization is greedy longest-match with a
//! per-grapheme fallback.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use unicode_normalization::UnicodeNormalization;

/// Dense id of a unit (grapheme, wordpiece, or word) within a vocabulary.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct UnitId(pub u32);

impl UnitId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// What the units of a vocabulary are.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum VocabKind {
    Grapheme,
    Wordpiece,
    Word,
}

impl VocabKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VocabKind::Grapheme => "grapheme",
            VocabKind::Wordpiece => "wordpiece",
            VocabKind::Word => "word",
        }
    }

    pub fn parse(s: &str) -> Option<VocabKind> {
        match s {
            "grapheme" => Some(VocabKind::Grapheme),
            "wordpiece" => Some(VocabKind::Wordpiece),
            "word" => Some(VocabKind::Word),
            _ => None,
        }
    }
}

/// Marker prefix carried by word-initial pieces; spaces map to it in
/// grapheme mode.
pub const BOUNDARY_MARKER: &str = "_";

pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum VocabError {
    EmptyCorpus,
    TargetSizeTooSmall { target: usize, graphemes: usize },
    DuplicateUnit(String),
    EmptyUnit,
    InvalidUnitId(u32),
    WrongKind { expected: &'static str },
    Parse { line: usize, message: String },
}

impl core::fmt::Display for VocabError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            VocabError::EmptyCorpus => write!(f, "corpus is empty"),
            VocabError::TargetSizeTooSmall { target, graphemes } => write!(
                f,
                "target size {} is below the corpus grapheme count {}",
                target, graphemes
            ),
            VocabError::DuplicateUnit(u) => write!(f, "duplicate unit {:?}", u),
            VocabError::EmptyUnit => write!(f, "empty unit string"),
            VocabError::InvalidUnitId(id) => write!(f, "invalid unit id {}", id),
            VocabError::WrongKind { expected } => {
                write!(f, "operation requires a {} vocabulary", expected)
            }
            VocabError::Parse { line, message } => {
                write!(f, "wordpiece model parse error at line {}: {}", line, message)
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for VocabError {}

/// An ordered unit inventory with dense ids.
///
/// Ids 0..3 are always the specials `<s>`, `</s>`, `<unk>`; real units
/// follow. Ids are stable across save/load.
#[derive(Clone, PartialEq, Debug)]
pub struct UnitVocabulary {
    units: Vec<String>,
    index: BTreeMap<String, UnitId>,
    kind: VocabKind,
}

pub const BOS_ID: UnitId = UnitId(0);
pub const EOS_ID: UnitId = UnitId(1);
pub const UNK_ID: UnitId = UnitId(2);

impl UnitVocabulary {
    /// Builds a vocabulary from the given real units (specials are prepended
    /// automatically and must not appear in `units`).
    pub fn new<I, S>(kind: VocabKind, units: I) -> Result<UnitVocabulary, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = vec![
            BOS_TOKEN.to_string(),
            EOS_TOKEN.to_string(),
            UNK_TOKEN.to_string(),
        ];
        all.extend(units.into_iter().map(Into::into));
        let mut index = BTreeMap::new();
        for (i, u) in all.iter().enumerate() {
            if u.is_empty() {
                return Err(VocabError::EmptyUnit);
            }
            if index.insert(u.clone(), UnitId(i as u32)).is_some() {
                return Err(VocabError::DuplicateUnit(u.clone()));
            }
        }
        Ok(UnitVocabulary {
            units: all,
            index,
            kind,
        })
    }

    pub fn kind(&self) -> VocabKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn bos(&self) -> UnitId {
        BOS_ID
    }

    pub fn eos(&self) -> UnitId {
        EOS_ID
    }

    pub fn unknown(&self) -> UnitId {
        UNK_ID
    }

    pub fn is_special(&self, id: UnitId) -> bool {
        id.0 < 3
    }

    pub fn unit(&self, id: UnitId) -> Result<&str, VocabError> {
        self.units
            .get(id.idx())
            .map(String::as_str)
            .ok_or(VocabError::InvalidUnitId(id.0))
    }

    pub fn id_of(&self, unit: &str) -> Option<UnitId> {
        self.index.get(unit).copied()
    }

    /// All unit strings in id order, including the specials.
    pub fn units(&self) -> &[String] {
        &self.units
    }

    /// Ids of the non-special units.
    pub fn real_ids(&self) -> impl Iterator<Item = UnitId> + '_ {
        (3..self.units.len() as u32).map(UnitId)
    }
}

/// Canonical text form used throughout: NFC, lowercased, `_` treated as
/// whitespace, runs of whitespace collapsed to single spaces, trimmed.
pub fn normalize(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let lowered = nfc.to_lowercase();
    let spaced: String = lowered
        .chars()
        .map(|c| if c == '_' { ' ' } else { c })
        .collect();
    let mut out = String::with_capacity(spaced.len());
    for word in spaced.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Result of tokenizing a text: unit ids plus the positions (indices into
/// `ids`) where an unknown grapheme had to be emitted.
#[derive(Clone, PartialEq, Debug)]
pub struct Tokenization {
    pub ids: Vec<UnitId>,
    pub unknown_positions: Vec<usize>,
}

impl Tokenization {
    pub fn fully_known(&self) -> bool {
        self.unknown_positions.is_empty()
    }
}

/// One unit per grapheme of the normalized text, spaces mapped to the
/// boundary marker. Unknown graphemes map to the unknown id and are
/// reported in the metadata.
pub fn graphemize(text: &str, vocab: &UnitVocabulary) -> Result<Tokenization, VocabError> {
    if vocab.kind() == VocabKind::Word {
        return Err(VocabError::WrongKind {
            expected: "grapheme or wordpiece",
        });
    }
    let normalized = normalize(text);
    let mut ids = Vec::new();
    let mut unknown_positions = Vec::new();
    let mut buf = [0u8; 4];
    for c in normalized.chars() {
        let s: &str = if c == ' ' {
            BOUNDARY_MARKER
        } else {
            c.encode_utf8(&mut buf)
        };
        match vocab.id_of(s) {
            Some(id) if !vocab.is_special(id) => ids.push(id),
            _ => {
                unknown_positions.push(ids.len());
                ids.push(vocab.unknown());
            }
        }
    }
    Ok(Tokenization {
        ids,
        unknown_positions,
    })
}

/// Inverse of tokenization: concatenates unit strings, turns boundary
/// markers back into spaces. Sentence sentinels are skipped; the unknown
/// unit renders as its literal token.
pub fn detokenize(ids: &[UnitId], vocab: &UnitVocabulary) -> Result<String, VocabError> {
    let mut joined = String::new();
    for &id in ids {
        let unit = vocab.unit(id)?;
        if id == BOS_ID || id == EOS_ID {
            continue;
        }
        joined.push_str(unit);
    }
    let replaced: String = joined
        .chars()
        .map(|c| if c == '_' { ' ' } else { c })
        .collect();
    Ok(replaced.trim().to_string())
}

/// A wordpiece inventory together with the merge history and corpus
/// statistics that produced it; replaying the merges from the corpus
/// graphemes reproduces the unit list exactly.
#[derive(Clone, PartialEq, Debug)]
pub struct WordPieceModel {
    pub vocabulary: UnitVocabulary,
    pub merge_history: Vec<(String, String)>,
    pub corpus_stats: BTreeMap<String, u64>,
}

/// Splits normalized text into marker-prefixed word strings ("_the").
fn marked_words(normalized: &str) -> Vec<String> {
    normalized
        .split_whitespace()
        .map(|w| format!("{}{}", BOUNDARY_MARKER, w))
        .collect()
}

/// Learns a wordpiece inventory of `target_size` units (specials excluded
/// from the count) by iterative pair merging, most frequent pair first,
/// frequency ties broken by the lexicographically greatest merged string.
/// Words contribute with a leading boundary marker so word-initial pieces
/// come out `_`-prefixed. Saturates early when no pair is left to merge.
pub fn induce_wordpieces(
    word_counts: &BTreeMap<String, u64>,
    target_size: usize,
) -> Result<WordPieceModel, VocabError> {
    // Normalize the incoming words; normalization can split a raw key into
    // several words, each of which counts separately.
    let mut stats: BTreeMap<String, u64> = BTreeMap::new();
    for (word, &count) in word_counts {
        if count == 0 {
            continue;
        }
        for piece in normalize(word).split_whitespace() {
            *stats.entry(piece.to_string()).or_insert(0) += count;
        }
    }
    if stats.is_empty() {
        return Err(VocabError::EmptyCorpus);
    }

    // Seed symbols: the graphemes of every marked word.
    let mut units: BTreeSet<String> = BTreeSet::new();
    let mut sequences: Vec<(Vec<String>, u64)> = Vec::new();
    for (word, &count) in &stats {
        let marked = format!("{}{}", BOUNDARY_MARKER, word);
        let symbols: Vec<String> = marked.chars().map(|c| c.to_string()).collect();
        for s in &symbols {
            units.insert(s.clone());
        }
        sequences.push((symbols, count));
    }
    let grapheme_count = units.len();
    if target_size < grapheme_count {
        return Err(VocabError::TargetSizeTooSmall {
            target: target_size,
            graphemes: grapheme_count,
        });
    }

    let graphemes: Vec<String> = units.iter().cloned().collect();
    let mut merges: Vec<(String, String)> = Vec::new();
    while units.len() < target_size {
        let mut pair_counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (symbols, count) in &sequences {
            for pair in symbols.windows(2) {
                *pair_counts
                    .entry((pair[0].clone(), pair[1].clone()))
                    .or_insert(0) += count;
            }
        }
        let best = pair_counts
            .iter()
            .map(|((l, r), &c)| (c, format!("{}{}", l, r), l.clone(), r.clone()))
            .max();
        let (_, merged, left, right) = match best {
            Some(b) => b,
            None => break, // nothing left to merge
        };
        // The same merged string can already exist via a different split.
        if !units.insert(merged.clone()) {
            // Still rewrite the sequences so the pair stops dominating.
        }
        merges.push((left.clone(), right.clone()));
        for (symbols, _) in sequences.iter_mut() {
            let mut rewritten = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
                    rewritten.push(merged.clone());
                    i += 2;
                } else {
                    rewritten.push(symbols[i].clone());
                    i += 1;
                }
            }
            *symbols = rewritten;
        }
    }

    // Id order: graphemes in lexicographic order, then merges in creation
    // order, so replaying the merge history reproduces the layout.
    let mut ordered: Vec<String> = graphemes;
    for (l, r) in &merges {
        let merged = format!("{}{}", l, r);
        if !ordered.contains(&merged) {
            ordered.push(merged);
        }
    }
    let vocabulary = UnitVocabulary::new(VocabKind::Wordpiece, ordered)?;
    Ok(WordPieceModel {
        vocabulary,
        merge_history: merges,
        corpus_stats: stats,
    })
}

/// Greedy longest-match tokenization: each word is marked with the boundary
/// prefix and consumed left to right, always taking the longest vocabulary
/// unit that matches. Unknown graphemes fall back to the unknown id.
pub fn tokenize(text: &str, model: &WordPieceModel) -> Result<Tokenization, VocabError> {
    let vocab = &model.vocabulary;
    if vocab.kind() != VocabKind::Wordpiece {
        return Err(VocabError::WrongKind {
            expected: "wordpiece",
        });
    }
    let normalized = normalize(text);
    let mut ids = Vec::new();
    let mut unknown_positions = Vec::new();
    for word in marked_words(&normalized) {
        let chars: Vec<char> = word.chars().collect();
        let mut pos = 0;
        while pos < chars.len() {
            let mut matched: Option<(usize, UnitId)> = None;
            // Longest match first; unit lengths are in characters.
            let max_len = chars.len() - pos;
            for len in (1..=max_len).rev() {
                let candidate: String = chars[pos..pos + len].iter().collect();
                if let Some(id) = vocab.id_of(&candidate) {
                    if !vocab.is_special(id) {
                        matched = Some((len, id));
                        break;
                    }
                }
            }
            match matched {
                Some((len, id)) => {
                    ids.push(id);
                    pos += len;
                }
                None => {
                    unknown_positions.push(ids.len());
                    ids.push(vocab.unknown());
                    pos += 1;
                }
            }
        }
    }
    Ok(Tokenization {
        ids,
        unknown_positions,
    })
}

/// Serializes a wordpiece model as UTF-8 text. Sections are length-prefixed
/// so unit strings never collide with the grammar; the layout is fixed so
/// the round-trip is byte-exact.
pub fn write_wordpiece_model(model: &WordPieceModel) -> String {
    let mut out = String::new();
    out.push_str("wordpiece-model v1\n");
    out.push_str(&format!(
        "kind {} units {}\n",
        model.vocabulary.kind().as_str(),
        model.vocabulary.len()
    ));
    for unit in model.vocabulary.units() {
        out.push_str(unit);
        out.push('\n');
    }
    out.push_str(&format!("merges {}\n", model.merge_history.len()));
    for (l, r) in &model.merge_history {
        out.push_str(&format!("{}\t{}\n", l, r));
    }
    out.push_str(&format!("stats {}\n", model.corpus_stats.len()));
    for (w, c) in &model.corpus_stats {
        out.push_str(&format!("{}\t{}\n", w, c));
    }
    out.push_str("end\n");
    out
}

pub fn read_wordpiece_model(text: &str) -> Result<WordPieceModel, VocabError> {
    let mut lines = text.lines().enumerate();
    let mut next = |expect: &str| -> Result<(usize, String), VocabError> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l.to_string()))
            .ok_or_else(|| VocabError::Parse {
                line: 0,
                message: format!("unexpected end of input, expected {}", expect),
            })
    };
    let (line_no, header) = next("header")?;
    if header != "wordpiece-model v1" {
        return Err(VocabError::Parse {
            line: line_no,
            message: "expected header 'wordpiece-model v1'".to_string(),
        });
    }
    let (line_no, meta) = next("kind line")?;
    let fields: Vec<&str> = meta.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "kind" || fields[2] != "units" {
        return Err(VocabError::Parse {
            line: line_no,
            message: "expected 'kind <kind> units <n>'".to_string(),
        });
    }
    let kind = VocabKind::parse(fields[1]).ok_or_else(|| VocabError::Parse {
        line: line_no,
        message: format!("unknown kind {:?}", fields[1]),
    })?;
    let unit_count: usize = fields[3].parse().map_err(|_| VocabError::Parse {
        line: line_no,
        message: "bad unit count".to_string(),
    })?;
    if unit_count < 3 {
        return Err(VocabError::Parse {
            line: line_no,
            message: "unit count must include the specials".to_string(),
        });
    }
    let mut units = Vec::with_capacity(unit_count);
    for i in 0..unit_count {
        let (line_no, unit) = next("unit")?;
        if i < 3 {
            let expected = [BOS_TOKEN, EOS_TOKEN, UNK_TOKEN][i];
            if unit != expected {
                return Err(VocabError::Parse {
                    line: line_no,
                    message: format!("expected special {:?}", expected),
                });
            }
        } else {
            units.push(unit);
        }
    }
    let (line_no, merges_header) = next("merges header")?;
    let merge_count: usize = merges_header
        .strip_prefix("merges ")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| VocabError::Parse {
            line: line_no,
            message: "expected 'merges <n>'".to_string(),
        })?;
    let mut merge_history = Vec::with_capacity(merge_count);
    for _ in 0..merge_count {
        let (line_no, merge) = next("merge")?;
        let (l, r) = merge.split_once('\t').ok_or_else(|| VocabError::Parse {
            line: line_no,
            message: "merge line must be 'left<TAB>right'".to_string(),
        })?;
        merge_history.push((l.to_string(), r.to_string()));
    }
    let (line_no, stats_header) = next("stats header")?;
    let stat_count: usize = stats_header
        .strip_prefix("stats ")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| VocabError::Parse {
            line: line_no,
            message: "expected 'stats <n>'".to_string(),
        })?;
    let mut corpus_stats = BTreeMap::new();
    for _ in 0..stat_count {
        let (line_no, stat) = next("stat")?;
        let (w, c) = stat.split_once('\t').ok_or_else(|| VocabError::Parse {
            line: line_no,
            message: "stat line must be 'word<TAB>count'".to_string(),
        })?;
        let count: u64 = c.parse().map_err(|_| VocabError::Parse {
            line: line_no,
            message: "bad count".to_string(),
        })?;
        corpus_stats.insert(w.to_string(), count);
    }
    let (line_no, end) = next("end")?;
    if end != "end" {
        return Err(VocabError::Parse {
            line: line_no,
            message: "expected 'end'".to_string(),
        });
    }
    let vocabulary = UnitVocabulary::new(kind, units)?;
    Ok(WordPieceModel {
        vocabulary,
        merge_history,
        corpus_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grapheme_vocab(chars: &str) -> UnitVocabulary {
        let mut units: Vec<String> = chars.chars().map(|c| c.to_string()).collect();
        units.push(BOUNDARY_MARKER.to_string());
        UnitVocabulary::new(VocabKind::Grapheme, units).unwrap()
    }

    #[test]
    fn normalize_canonicalizes() {
        assert_eq!(normalize("  The   COMPANY\tannounced "), "the company announced");
        assert_eq!(normalize("a_b"), "a b");
        assert_eq!(normalize(""), "");
    }

    #[test]
    fn graphemize_phrase_has_27_units() {
        let vocab = grapheme_vocab("abcdefghijklmnopqrstuvwxyz");
        let tok = graphemize("the company announced today", &vocab).unwrap();
        assert_eq!(tok.ids.len(), 27);
        assert!(tok.fully_known());
    }

    #[test]
    fn graphemize_empty_is_empty() {
        let vocab = grapheme_vocab("ab");
        let tok = graphemize("", &vocab).unwrap();
        assert!(tok.ids.is_empty());
    }

    #[test]
    fn graphemize_unknown_marks_position() {
        let vocab = grapheme_vocab("ab");
        let tok = graphemize("axb", &vocab).unwrap();
        assert_eq!(tok.unknown_positions, vec![1]);
        assert_eq!(tok.ids[1], vocab.unknown());
    }

    #[test]
    fn grapheme_round_trip_random_ascii() {
        let vocab = grapheme_vocab("abcdefghijklmnopqrstuvwxyz");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let len = rng.gen_range(0..30);
            let text: String = (0..len)
                .map(|_| {
                    let c = rng.gen_range(0..27u32);
                    if c == 26 {
                        ' '
                    } else {
                        char::from(b'a' + c as u8)
                    }
                })
                .collect();
            let normalized = normalize(&text);
            let tok = graphemize(&text, &vocab).unwrap();
            assert!(tok.fully_known());
            assert_eq!(detokenize(&tok.ids, &vocab).unwrap(), normalized);
        }
    }

    #[test]
    fn detokenize_empty() {
        let vocab = grapheme_vocab("ab");
        assert_eq!(detokenize(&[], &vocab).unwrap(), "");
    }

    #[test]
    fn detokenize_rejects_bad_id() {
        let vocab = grapheme_vocab("ab");
        assert!(matches!(
            detokenize(&[UnitId(999)], &vocab),
            Err(VocabError::InvalidUnitId(999))
        ));
    }

    #[test]
    fn induce_single_merge_covers_aa() {
        let mut counts = BTreeMap::new();
        counts.insert("aa".to_string(), 10u64);
        let model = induce_wordpieces(&counts, 3).unwrap();
        // graphemes {_, a} plus one merge; the content merge wins the tie.
        let units: Vec<&str> = model
            .vocabulary
            .real_ids()
            .map(|id| model.vocabulary.unit(id).unwrap())
            .collect();
        assert_eq!(units.len(), 3);
        assert!(units.contains(&"aa"), "units: {:?}", units);
        assert_eq!(model.merge_history.len(), 1);
    }

    #[test]
    fn induce_no_merge_needed() {
        let mut counts = BTreeMap::new();
        counts.insert("a".to_string(), 5u64);
        counts.insert("b".to_string(), 3u64);
        // graphemes: _, a, b
        let model = induce_wordpieces(&counts, 3).unwrap();
        assert!(model.merge_history.is_empty());
        assert_eq!(model.vocabulary.len(), 3 + 3);
    }

    #[test]
    fn induce_rejects_empty_and_small_target() {
        let empty = BTreeMap::new();
        assert!(matches!(
            induce_wordpieces(&empty, 10),
            Err(VocabError::EmptyCorpus)
        ));
        let mut counts = BTreeMap::new();
        counts.insert("abc".to_string(), 1u64);
        assert!(matches!(
            induce_wordpieces(&counts, 2),
            Err(VocabError::TargetSizeTooSmall { .. })
        ));
    }

    fn random_corpus(seed: u64, words: usize) -> BTreeMap<String, u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = BTreeMap::new();
        for _ in 0..words {
            let len = rng.gen_range(1..8);
            let word: String = (0..len)
                .map(|_| char::from(b'a' + rng.gen_range(0..6u32) as u8))
                .collect();
            *counts.entry(word).or_insert(0) += rng.gen_range(1..20u64);
        }
        counts
    }

    #[test]
    fn induction_is_deterministic_and_replayable() {
        let counts = random_corpus(11, 300);
        let a = induce_wordpieces(&counts, 60).unwrap();
        let b = induce_wordpieces(&counts, 60).unwrap();
        assert_eq!(a, b);
        // Replaying the merge history from the corpus graphemes reproduces
        // the unit list exactly.
        let mut units: BTreeSet<String> = BTreeSet::new();
        for word in a.corpus_stats.keys() {
            for c in format!("{}{}", BOUNDARY_MARKER, word).chars() {
                units.insert(c.to_string());
            }
        }
        let mut ordered: Vec<String> = units.iter().cloned().collect();
        for (l, r) in &a.merge_history {
            let merged = format!("{}{}", l, r);
            if !ordered.contains(&merged) {
                ordered.push(merged);
            }
        }
        let replayed: Vec<&str> = ordered.iter().map(String::as_str).collect();
        let stored: Vec<&str> = a
            .vocabulary
            .real_ids()
            .map(|id| a.vocabulary.unit(id).unwrap())
            .collect();
        assert_eq!(replayed, stored);
    }

    /// All decompositions of `text` into vocabulary units, as unit-string
    /// sequences. Independent of the tokenizer's greedy scan.
    fn all_tokenizations(text: &str, vocab: &UnitVocabulary) -> Vec<Vec<String>> {
        if text.is_empty() {
            return vec![Vec::new()];
        }
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        for len in 1..=chars.len() {
            let head: String = chars[..len].iter().collect();
            if let Some(id) = vocab.id_of(&head) {
                if vocab.is_special(id) {
                    continue;
                }
                let tail: String = chars[len..].iter().collect();
                for mut rest in all_tokenizations(&tail, vocab) {
                    let mut seq = vec![head.clone()];
                    seq.append(&mut rest);
                    out.push(seq);
                }
            }
        }
        out
    }

    #[test]
    fn greedy_takes_longest_match() {
        // Vocabulary {a, b, ab, aba} over the word "abab": greedy takes
        // "aba" at position 0 even though [ab, ab] would also tokenize it.
        let vocab = UnitVocabulary::new(
            VocabKind::Wordpiece,
            ["_", "a", "b", "ab", "aba"].map(String::from),
        )
        .unwrap();
        let model = WordPieceModel {
            vocabulary: vocab,
            merge_history: Vec::new(),
            corpus_stats: BTreeMap::new(),
        };
        let tok = tokenize("abab", &model).unwrap();
        let units: Vec<&str> = tok
            .ids
            .iter()
            .map(|&id| model.vocabulary.unit(id).unwrap())
            .collect();
        assert_eq!(units, vec!["_", "aba", "b"]);

        // Oracle: enumerate every decomposition of the marked word. Greedy
        // longest-match is exactly the decomposition whose unit-length
        // sequence is lexicographically greatest.
        let all = all_tokenizations("_abab", &model.vocabulary);
        assert!(all.iter().any(|seq| seq == &units));
        let greedy_pick = all
            .iter()
            .max_by_key(|seq| seq.iter().map(|u| u.chars().count()).collect::<Vec<_>>())
            .unwrap();
        assert_eq!(greedy_pick, &units);
    }

    #[test]
    fn tokenize_empty_text() {
        let counts: BTreeMap<String, u64> = [("ab".to_string(), 2u64)].into_iter().collect();
        let model = induce_wordpieces(&counts, 5).unwrap();
        assert!(tokenize("", &model).unwrap().ids.is_empty());
    }

    #[test]
    fn wordpiece_round_trip_and_detokenize_markers() {
        let counts: BTreeMap<String, u64> = [
            ("the".to_string(), 50u64),
            ("company".to_string(), 20),
            ("announced".to_string(), 10),
            ("today".to_string(), 10),
        ]
        .into_iter()
        .collect();
        let model = induce_wordpieces(&counts, 30).unwrap();
        let text = "the company announced today";
        let tok = tokenize(text, &model).unwrap();
        assert!(tok.fully_known());
        assert_eq!(detokenize(&tok.ids, &model.vocabulary).unwrap(), text);
        // Word-initial pieces carry the marker.
        let first = model.vocabulary.unit(tok.ids[0]).unwrap();
        assert!(first.starts_with(BOUNDARY_MARKER));
    }

    #[test]
    fn tokenize_unseen_word_falls_back_to_graphemes() {
        let counts: BTreeMap<String, u64> = [("aa".to_string(), 10u64)].into_iter().collect();
        let model = induce_wordpieces(&counts, 4).unwrap();
        // "q" was never seen: its grapheme is absent, so unknown id.
        let tok = tokenize("aq", &model).unwrap();
        assert_eq!(tok.unknown_positions.len(), 1);
        // but "aaa" decomposes with no unknowns even though unseen as a word.
        let tok = tokenize("aaa", &model).unwrap();
        assert!(tok.fully_known());
        assert_eq!(detokenize(&tok.ids, &model.vocabulary).unwrap(), "aaa");
    }

    #[test]
    fn wordpiece_model_text_round_trip_is_byte_exact() {
        let counts = random_corpus(3, 120);
        let model = induce_wordpieces(&counts, 40).unwrap();
        let text = write_wordpiece_model(&model);
        let reread = read_wordpiece_model(&text).unwrap();
        assert_eq!(reread, model);
        assert_eq!(write_wordpiece_model(&reread), text);
    }

    #[test]
    fn wordpiece_model_parse_errors_carry_line() {
        let err = read_wordpiece_model("bogus\n").unwrap_err();
        assert!(matches!(err, VocabError::Parse { line: 1, .. }));
    }

    #[test]
    fn round_trip_property_random_wordpiece_corpora() {
        for seed in 0..5u64 {
            let counts = random_corpus(seed, 200);
            let model = induce_wordpieces(&counts, 50).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbeef);
            let words: Vec<&String> = counts.keys().collect();
            for _ in 0..50 {
                let n = rng.gen_range(1..6);
                let sentence: Vec<&str> = (0..n)
                    .map(|_| words[rng.gen_range(0..words.len())].as_str())
                    .collect();
                let text = sentence.join(" ");
                let tok = tokenize(&text, &model).unwrap();
                assert!(tok.fully_known());
                assert_eq!(
                    detokenize(&tok.ids, &model.vocabulary).unwrap(),
                    normalize(&text)
                );
            }
        }
    }
}
