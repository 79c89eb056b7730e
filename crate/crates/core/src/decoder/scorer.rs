//! Acoustic scorer interface and its two deterministic table-backed
//! implementations.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::vocab::{UnitId, VocabKind};

use super::DecodeError;

/// Per-step acoustic evidence: unit posteriors plus an attention row over
/// the input frames. Posterior rows (including EOS) and attention rows
/// each normalize to one.
pub trait AcousticScorer {
    type State: Clone;
    fn vocab_size(&self) -> usize;
    fn num_frames(&self) -> usize;
    fn start_state(&self) -> Self::State;
    /// None once the scorer has no further output steps from this state.
    fn step(&self, state: &Self::State, unit: UnitId) -> Option<AcousticStep<Self::State>>;
}

pub struct AcousticStep<S> {
    pub log_prob: f64,
    pub attention: Vec<f64>,
    pub state: S,
}

const ROW_TOLERANCE: f64 = 1e-6;

/// Context-independent per-step log-posteriors plus per-step attention
/// rows; the workhorse for exhaustive-search oracles and file-backed
/// decoding.
#[derive(Clone, PartialEq, Debug)]
pub struct TableScorer {
    /// steps x vocab, natural log.
    log_posteriors: Vec<Vec<f64>>,
    /// steps x frames, each row nonnegative and summing to one.
    attention: Vec<Vec<f64>>,
    num_frames: usize,
}

impl TableScorer {
    pub fn new(
        log_posteriors: Vec<Vec<f64>>,
        attention: Vec<Vec<f64>>,
    ) -> Result<TableScorer, DecodeError> {
        if log_posteriors.len() != attention.len() {
            return Err(DecodeError::VocabMismatch(
                "posterior and attention step counts differ".into(),
            ));
        }
        if log_posteriors.is_empty() {
            return Err(DecodeError::InvalidConfig("table has no steps".into()));
        }
        let vocab = log_posteriors[0].len();
        let frames = attention[0].len();
        for (i, row) in log_posteriors.iter().enumerate() {
            if row.len() != vocab {
                return Err(DecodeError::VocabMismatch(format!(
                    "posterior row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    vocab
                )));
            }
            let sum: f64 = row.iter().map(|lp| lp.exp()).sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(DecodeError::UnnormalizedRow { step: i, sum });
            }
        }
        for (i, row) in attention.iter().enumerate() {
            if row.len() != frames {
                return Err(DecodeError::VocabMismatch(format!(
                    "attention row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    frames
                )));
            }
            if row.iter().any(|&a| a < 0.0) {
                return Err(DecodeError::NegativeAttentionMass);
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(DecodeError::UnnormalizedRow { step: i, sum });
            }
        }
        Ok(TableScorer {
            log_posteriors,
            attention,
            num_frames: frames,
        })
    }

    pub fn num_steps(&self) -> usize {
        self.log_posteriors.len()
    }

    pub fn log_posterior(&self, step: usize, unit: UnitId) -> f64 {
        self.log_posteriors[step][unit.idx()]
    }

    pub fn attention_row(&self, step: usize) -> &[f64] {
        &self.attention[step]
    }
}

impl AcousticScorer for TableScorer {
    type State = usize;

    fn vocab_size(&self) -> usize {
        self.log_posteriors[0].len()
    }

    fn num_frames(&self) -> usize {
        self.num_frames
    }

    fn start_state(&self) -> usize {
        0
    }

    fn step(&self, state: &usize, unit: UnitId) -> Option<AcousticStep<usize>> {
        let row = self.log_posteriors.get(*state)?;
        Some(AcousticStep {
            log_prob: row[unit.idx()],
            attention: self.attention[*state].clone(),
            state: state + 1,
        })
    }
}

/// Synthetic acoustic evidence built around a reference transcript: the
/// reference unit of each step gets a sharp logit, every unit gets
/// seeded Gaussian noise scaled by the temperature, and attention is a
/// monotonically advancing normalized window. The final step points at
/// EOS. Deterministic given the seed.
#[derive(Clone, PartialEq, Debug)]
pub struct NoisyReferenceScorer {
    table: TableScorer,
    reference: Vec<UnitId>,
}

const CLEAN_LOGIT: f64 = 4.0;

impl NoisyReferenceScorer {
    pub fn new(
        reference: &[UnitId],
        vocab_size: usize,
        eos: UnitId,
        temperature: f64,
        attention_width: usize,
        seed: u64,
    ) -> Result<NoisyReferenceScorer, DecodeError> {
        if temperature < 0.0 || !temperature.is_finite() {
            return Err(DecodeError::InvalidConfig(
                "noise temperature must be finite and nonnegative".into(),
            ));
        }
        if attention_width == 0 {
            return Err(DecodeError::InvalidConfig(
                "attention width must be >= 1".into(),
            ));
        }
        if reference.iter().any(|u| u.idx() >= vocab_size) || eos.idx() >= vocab_size {
            return Err(DecodeError::VocabMismatch(
                "reference unit outside the vocabulary".into(),
            ));
        }
        let steps = reference.len() + 1;
        let frames = steps;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut log_posteriors = Vec::with_capacity(steps);
        let mut attention = Vec::with_capacity(steps);
        for step in 0..steps {
            let expected = if step < reference.len() {
                reference[step]
            } else {
                eos
            };
            let mut logits = Vec::with_capacity(vocab_size);
            for unit in 0..vocab_size {
                let clean = if unit == expected.idx() { CLEAN_LOGIT } else { 0.0 };
                let noise: f64 = StandardNormal.sample(&mut rng);
                logits.push(clean + temperature * noise);
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_z = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
            log_posteriors.push(logits.iter().map(|l| l - log_z).collect());

            let lo = step;
            let hi = (step + attention_width).min(frames);
            let weight = 1.0 / (hi - lo) as f64;
            let mut row = alloc::vec![0.0; frames];
            for a in row.iter_mut().take(hi).skip(lo) {
                *a = weight;
            }
            attention.push(row);
        }
        Ok(NoisyReferenceScorer {
            table: TableScorer::new(log_posteriors, attention)?,
            reference: reference.to_vec(),
        })
    }

    pub fn reference(&self) -> &[UnitId] {
        &self.reference
    }

    pub fn table(&self) -> &TableScorer {
        &self.table
    }

    pub fn into_table(self) -> TableScorer {
        self.table
    }
}

impl AcousticScorer for NoisyReferenceScorer {
    type State = usize;

    fn vocab_size(&self) -> usize {
        self.table.vocab_size()
    }

    fn num_frames(&self) -> usize {
        self.table.num_frames()
    }

    fn start_state(&self) -> usize {
        0
    }

    fn step(&self, state: &usize, unit: UnitId) -> Option<AcousticStep<usize>> {
        self.table.step(state, unit)
    }
}

/// A table scorer bundled with its unit inventory: what a lattice file
/// holds. `units` are the emittable unit strings and must include `</s>`.
#[derive(Clone, PartialEq, Debug)]
pub struct Lattice {
    pub units: Vec<String>,
    pub kind: VocabKind,
    pub eos: UnitId,
    pub scorer: TableScorer,
}

impl Lattice {
    pub fn new(
        units: Vec<String>,
        kind: VocabKind,
        scorer: TableScorer,
    ) -> Result<Lattice, DecodeError> {
        if units.len() != scorer.vocab_size() {
            return Err(DecodeError::VocabMismatch(format!(
                "{} units for a table over {} columns",
                units.len(),
                scorer.vocab_size()
            )));
        }
        let eos = units
            .iter()
            .position(|u| u == crate::vocab::EOS_TOKEN)
            .ok_or_else(|| DecodeError::VocabMismatch("units must include </s>".into()))?;
        Ok(Lattice {
            units,
            kind,
            eos: UnitId(eos as u32),
            scorer,
        })
    }

    pub fn unit_index(&self, unit: &str) -> Option<UnitId> {
        self.units
            .iter()
            .position(|u| u == unit)
            .map(|i| UnitId(i as u32))
    }

    /// Plain-text rendering of a unit sequence: boundary markers become
    /// spaces, the EOS unit is dropped.
    pub fn text_of(&self, tokens: &[UnitId]) -> String {
        let mut joined = String::new();
        for &t in tokens {
            if t == self.eos {
                continue;
            }
            joined.push_str(&self.units[t.idx()]);
        }
        let spaced: String = joined
            .chars()
            .map(|c| if c == '_' { ' ' } else { c })
            .collect();
        spaced.trim().to_string()
    }
}

/// Canonical lattice text: header with step/frame/unit counts and the
/// unit inventory, then one `post` and one `attn` line per step, floats
/// in shortest round-trip form.
pub fn write_lattice(lattice: &Lattice) -> String {
    let scorer = &lattice.scorer;
    let mut out = String::new();
    out.push_str("lattice v1\n");
    out.push_str(&format!("kind {}\n", lattice.kind.as_str()));
    out.push_str(&format!(
        "steps {} frames {} units {}\n",
        scorer.num_steps(),
        scorer.num_frames(),
        lattice.units.len()
    ));
    for u in &lattice.units {
        out.push_str(u);
        out.push('\n');
    }
    for step in 0..scorer.num_steps() {
        out.push_str(&format!("step {}\n", step));
        let post: Vec<String> = (0..lattice.units.len())
            .map(|u| format!("{}", scorer.log_posterior(step, UnitId(u as u32))))
            .collect();
        out.push_str(&format!("post {}\n", post.join(" ")));
        let attn: Vec<String> = scorer
            .attention_row(step)
            .iter()
            .map(|a| format!("{}", a))
            .collect();
        out.push_str(&format!("attn {}\n", attn.join(" ")));
    }
    out.push_str("end\n");
    out
}

pub fn read_lattice(text: &str) -> Result<Lattice, DecodeError> {
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, &str), DecodeError> {
        lines.next().map(|(i, l)| (i + 1, l)).ok_or(DecodeError::Parse {
            line: 0,
            message: format!("unexpected end of lattice, expected {}", what),
        })
    };
    let (line, header) = next("header")?;
    if header != "lattice v1" {
        return Err(DecodeError::Parse {
            line,
            message: "expected 'lattice v1'".to_string(),
        });
    }
    let (line, kind_line) = next("kind")?;
    let kind = kind_line
        .strip_prefix("kind ")
        .and_then(VocabKind::parse)
        .ok_or(DecodeError::Parse {
            line,
            message: "expected 'kind grapheme|wordpiece|word'".to_string(),
        })?;
    let (line, counts) = next("counts")?;
    let f: Vec<&str> = counts.split_whitespace().collect();
    if f.len() != 6 || f[0] != "steps" || f[2] != "frames" || f[4] != "units" {
        return Err(DecodeError::Parse {
            line,
            message: "expected 'steps U frames T units V'".to_string(),
        });
    }
    let parse = |s: &str, line: usize| -> Result<usize, DecodeError> {
        s.parse().map_err(|_| DecodeError::Parse {
            line,
            message: format!("bad integer {:?}", s),
        })
    };
    let steps = parse(f[1], line)?;
    let frames = parse(f[3], line)?;
    let unit_count = parse(f[5], line)?;
    let mut units = Vec::with_capacity(unit_count);
    for _ in 0..unit_count {
        let (_, u) = next("unit")?;
        units.push(u.to_string());
    }
    let mut log_posteriors = Vec::with_capacity(steps);
    let mut attention = Vec::with_capacity(steps);
    for expect in 0..steps {
        let (line, step_line) = next("step header")?;
        if step_line != format!("step {}", expect) {
            return Err(DecodeError::Parse {
                line,
                message: format!("expected 'step {}'", expect),
            });
        }
        let (line, post) = next("post")?;
        let post = post.strip_prefix("post ").ok_or(DecodeError::Parse {
            line,
            message: "expected 'post ...'".to_string(),
        })?;
        let row: Result<Vec<f64>, _> = post.split_whitespace().map(str::parse).collect();
        let row = row.map_err(|_| DecodeError::Parse {
            line,
            message: "non-numeric posterior".to_string(),
        })?;
        if row.len() != unit_count {
            return Err(DecodeError::Parse {
                line,
                message: format!("expected {} posteriors, found {}", unit_count, row.len()),
            });
        }
        log_posteriors.push(row);
        let (line, attn) = next("attn")?;
        let attn = attn.strip_prefix("attn ").ok_or(DecodeError::Parse {
            line,
            message: "expected 'attn ...'".to_string(),
        })?;
        let row: Result<Vec<f64>, _> = attn.split_whitespace().map(str::parse).collect();
        let row = row.map_err(|_| DecodeError::Parse {
            line,
            message: "non-numeric attention weight".to_string(),
        })?;
        if row.len() != frames {
            return Err(DecodeError::Parse {
                line,
                message: format!("expected {} weights, found {}", frames, row.len()),
            });
        }
        attention.push(row);
    }
    let (line, end) = next("end")?;
    if end != "end" {
        return Err(DecodeError::Parse {
            line,
            message: "expected 'end'".to_string(),
        });
    }
    Lattice::new(units, kind, TableScorer::new(log_posteriors, attention)?)
}
