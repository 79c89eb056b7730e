//! ARPA text serialization.
//!
//! The writer emits a canonical layout (entries sorted by token ids,
//! floats printed with Rust's shortest round-trip formatting, TAB-separated
//! fields) so write -> read -> write is byte-identical. The reader accepts
//! the usual whitespace-separated variants produced by other tools.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::vocab::{UnitId, UnitVocabulary, VocabKind, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN};

use super::model::ArpaEntry;
use super::{ArpaModel, NgramError};

pub fn write_arpa(model: &ArpaModel) -> String {
    let vocab = model.vocab();
    let mut out = String::new();
    out.push_str("\\data\\\n");
    for n in 1..=model.order() {
        out.push_str(&format!("ngram {}={}\n", n, model.entries(n).count()));
    }
    for n in 1..=model.order() {
        out.push_str(&format!("\n\\{}-grams:\n", n));
        for (gram, entry) in model.entries(n) {
            let tokens: Vec<&str> = gram.iter().map(|&id| vocab.unit(id).unwrap()).collect();
            if n < model.order() {
                out.push_str(&format!(
                    "{}\t{}\t{}\n",
                    entry.log10_prob,
                    tokens.join(" "),
                    entry.log10_backoff
                ));
            } else {
                out.push_str(&format!("{}\t{}\n", entry.log10_prob, tokens.join(" ")));
            }
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> NgramError {
    NgramError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses ARPA text into a model. Unigram ids are assigned in file order
/// (specials pinned to their fixed slots); malformed input is rejected with
/// the offending line number.
pub fn read_arpa(text: &str) -> Result<ArpaModel, NgramError> {
    fn next_nonempty<'a>(
        lines: &mut core::iter::Enumerate<core::str::Lines<'a>>,
    ) -> Option<(usize, &'a str)> {
        for (i, l) in lines.by_ref() {
            if !l.trim().is_empty() {
                return Some((i + 1, l));
            }
        }
        None
    }
    let mut lines = text.lines().enumerate();

    let (line_no, header) =
        next_nonempty(&mut lines).ok_or_else(|| parse_err(0, "empty input"))?;
    if header.trim() != "\\data\\" {
        return Err(parse_err(line_no, "expected \\data\\"));
    }

    // Declared entry counts per order.
    let mut declared: Vec<usize> = Vec::new();
    loop {
        let (line_no, line) =
            next_nonempty(&mut lines).ok_or_else(|| parse_err(0, "unexpected end of header"))?;
        let line = line.trim();
        if line.starts_with('\\') {
            // first n-grams section
            let expected = format!("\\{}-grams:", 1);
            if line != expected {
                return Err(parse_err(line_no, format!("expected {}", expected)));
            }
            break;
        }
        let rest = line
            .strip_prefix("ngram ")
            .ok_or_else(|| parse_err(line_no, "expected 'ngram N=count'"))?;
        let (n, count) = rest
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, "expected 'ngram N=count'"))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, "bad order"))?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, "bad count"))?;
        if n != declared.len() + 1 {
            return Err(parse_err(line_no, "orders must be declared consecutively"));
        }
        declared.push(count);
    }
    if declared.is_empty() {
        return Err(parse_err(line_no, "no orders declared"));
    }
    let order = declared.len();

    let mut unit_names: Vec<String> = Vec::new();
    let mut unit_ids: BTreeMap<String, UnitId> = BTreeMap::new();
    for (i, special) in [BOS_TOKEN, EOS_TOKEN, UNK_TOKEN].iter().enumerate() {
        unit_ids.insert(special.to_string(), UnitId(i as u32));
    }

    let mut levels: Vec<BTreeMap<Vec<UnitId>, ArpaEntry>> =
        (0..order).map(|_| BTreeMap::new()).collect();
    let mut current = 1usize;
    loop {
        let (line_no, line) =
            next_nonempty(&mut lines).ok_or_else(|| parse_err(0, "missing \\end\\"))?;
        let line = line.trim();
        if line == "\\end\\" {
            if current != order {
                return Err(parse_err(
                    line_no,
                    format!("missing \\{}-grams: section", current + 1),
                ));
            }
            break;
        }
        if line.starts_with('\\') {
            let expected = format!("\\{}-grams:", current + 1);
            if line != expected {
                return Err(parse_err(line_no, format!("expected {}", expected)));
            }
            if levels[current - 1].len() != declared[current - 1] {
                return Err(parse_err(
                    line_no,
                    format!(
                        "order {}: declared {} entries, found {}",
                        current,
                        declared[current - 1],
                        levels[current - 1].len()
                    ),
                ));
            }
            current += 1;
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let n = current;
        if fields.len() != n + 1 && fields.len() != n + 2 {
            return Err(parse_err(
                line_no,
                format!("expected {} or {} fields for a {}-gram", n + 1, n + 2, n),
            ));
        }
        let log10_prob: f64 = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, "non-numeric log probability"))?;
        if log10_prob > 0.0 {
            return Err(parse_err(line_no, "log10 probability above zero"));
        }
        let log10_backoff: f64 = if fields.len() == n + 2 {
            fields[n + 1]
                .parse()
                .map_err(|_| parse_err(line_no, "non-numeric backoff weight"))?
        } else {
            0.0
        };
        if !log10_backoff.is_finite() {
            return Err(parse_err(line_no, "backoff weight must be finite"));
        }
        let mut gram = Vec::with_capacity(n);
        for &tok in &fields[1..=n] {
            let id = match unit_ids.get(tok) {
                Some(&id) => id,
                None => {
                    if n != 1 {
                        return Err(parse_err(
                            line_no,
                            format!("token {:?} missing from the unigram section", tok),
                        ));
                    }
                    let id = UnitId((unit_names.len() + 3) as u32);
                    unit_ids.insert(tok.to_string(), id);
                    unit_names.push(tok.to_string());
                    id
                }
            };
            gram.push(id);
        }
        if levels[n - 1]
            .insert(
                gram,
                ArpaEntry {
                    log10_prob,
                    log10_backoff,
                },
            )
            .is_some()
        {
            return Err(parse_err(line_no, "duplicate n-gram"));
        }
    }
    if levels[order - 1].len() != declared[order - 1] {
        return Err(parse_err(
            0,
            format!(
                "order {}: declared {} entries, found {}",
                order,
                declared[order - 1],
                levels[order - 1].len()
            ),
        ));
    }
    let vocab = UnitVocabulary::new(VocabKind::Word, unit_names)
        .map_err(|e| parse_err(0, format!("bad vocabulary: {}", e)))?;
    Ok(ArpaModel::from_levels(order, levels, vocab))
}
