//! Word error rate, relative WERR, and grid tuning of the fusion weights.
//!
//! WER comes from a minimum-edit alignment with unit costs; ties in the
//! alignment prefer substitution over deletion over insertion. Corpus
//! numbers aggregate as total errors over total reference words, never as
//! a mean of per-utterance rates.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::decoder::{beam_search, DecodeConfig, DecodeError, Lattice, LmScorer};

#[derive(Clone, PartialEq, Debug)]
pub enum EvalError {
    EmptyReference,
    ZeroBaseline,
    EmptyGrid,
    EmptyDevSet,
    Decode { lambda: f64, gamma: f64, source: DecodeError },
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::EmptyReference => write!(f, "reference is empty"),
            EvalError::ZeroBaseline => write!(f, "baseline WER must be positive"),
            EvalError::EmptyGrid => write!(f, "tuning grids must be non-empty"),
            EvalError::EmptyDevSet => write!(f, "dev set is empty"),
            EvalError::Decode {
                lambda,
                gamma,
                source,
            } => write!(
                f,
                "decode failed at lambda={} gamma={}: {}",
                lambda, gamma, source
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EvalError {}

/// Edit counts of one alignment; `wer = (S+I+D) / reference_words`.
#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_words: usize,
    pub wer: f64,
}

impl WerBreakdown {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    fn from_counts(substitutions: usize, insertions: usize, deletions: usize, words: usize) -> Self {
        WerBreakdown {
            substitutions,
            insertions,
            deletions,
            reference_words: words,
            wer: (substitutions + insertions + deletions) as f64 / words as f64,
        }
    }

    /// Corpus-level accumulation: errors and reference words add up, the
    /// rate is recomputed from the totals.
    pub fn accumulate(&mut self, other: &WerBreakdown) {
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.reference_words += other.reference_words;
        self.wer = self.errors() as f64 / self.reference_words as f64;
    }
}

/// Minimum-edit alignment with unit costs and deterministic tie-breaking
/// (substitution preferred over deletion over insertion).
pub fn wer(reference: &[&str], hypothesis: &[&str]) -> Result<WerBreakdown, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let m = reference.len();
    let n = hypothesis.len();
    let mut cost = vec![vec![0usize; n + 1]; m + 1];
    for (i, row) in cost.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=n {
        cost[0][j] = j;
    }
    for i in 1..=m {
        for j in 1..=n {
            let sub = cost[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = cost[i - 1][j] + 1;
            let ins = cost[i][j - 1] + 1;
            cost[i][j] = sub.min(del).min(ins);
        }
    }
    // Backtrace with the fixed preference order.
    let (mut i, mut j) = (m, n);
    let (mut subs, mut ins, mut dels) = (0, 0, 0);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let here = cost[i][j];
            let matched = reference[i - 1] == hypothesis[j - 1];
            if cost[i - 1][j - 1] + usize::from(!matched) == here {
                if !matched {
                    subs += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
            if cost[i - 1][j] + 1 == here {
                dels += 1;
                i -= 1;
                continue;
            }
            ins += 1;
            j -= 1;
        } else if i > 0 {
            dels += 1;
            i -= 1;
        } else {
            ins += 1;
            j -= 1;
        }
    }
    Ok(WerBreakdown::from_counts(subs, ins, dels, m))
}

/// Convenience wrapper over whitespace-split strings.
pub fn wer_str(reference: &str, hypothesis: &str) -> Result<WerBreakdown, EvalError> {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    wer(&r, &h)
}

/// `(baseline - new) / baseline`: the relative word error rate reduction.
pub fn relative_werr(baseline_wer: f64, new_wer: f64) -> Result<f64, EvalError> {
    if baseline_wer <= 0.0 {
        return Err(EvalError::ZeroBaseline);
    }
    Ok((baseline_wer - new_wer) / baseline_wer)
}

#[derive(Clone, PartialEq, Debug)]
pub struct TunePoint {
    pub lambda: f64,
    pub gamma: f64,
    pub breakdown: WerBreakdown,
}

/// Grid of (lambda, gamma, dev WER) with the argmin; ties go to the
/// smaller lambda, then the smaller gamma.
#[derive(Clone, PartialEq, Debug)]
pub struct TuneResult {
    pub grid: Vec<TunePoint>,
    pub best_lambda: f64,
    pub best_gamma: f64,
    pub best_wer: f64,
}

/// One corpus-level decode-and-score pass at fixed weights.
pub fn evaluate_point<L: LmScorer>(
    dev: &[(Lattice, String)],
    template: &DecodeConfig,
    lm: Option<&L>,
    lambda: f64,
    gamma: f64,
) -> Result<WerBreakdown, EvalError> {
    let mut total = WerBreakdown::default();
    for (lattice, reference) in dev {
        let config = DecodeConfig {
            lambda,
            gamma,
            nbest: 1,
            max_steps: lattice.scorer.num_steps(),
            ..template.clone()
        };
        let hyps = beam_search(&lattice.scorer, lm, lattice.eos, &config)
            .map_err(|source| EvalError::Decode {
                lambda,
                gamma,
                source,
            })?;
        let hyp_text = hyps
            .first()
            .map(|h| lattice.text_of(&h.tokens))
            .unwrap_or_default();
        let r: Vec<&str> = reference.split_whitespace().collect();
        let h: Vec<&str> = hyp_text.split_whitespace().collect();
        total.accumulate(&wer(&r, &h)?);
    }
    Ok(total)
}

/// Decodes the dev set at every (lambda, gamma) pair and returns the grid
/// with its argmin. Grids are swept in ascending order so the tie-break
/// falls out of strict improvement.
pub fn tune_grid<L: LmScorer>(
    dev: &[(Lattice, String)],
    template: &DecodeConfig,
    lambda_grid: &[f64],
    gamma_grid: &[f64],
    lm: Option<&L>,
) -> Result<TuneResult, EvalError> {
    if lambda_grid.is_empty() || gamma_grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if dev.is_empty() {
        return Err(EvalError::EmptyDevSet);
    }
    let mut lambdas = lambda_grid.to_vec();
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut gammas = gamma_grid.to_vec();
    gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut grid = Vec::with_capacity(lambdas.len() * gammas.len());
    let mut best: Option<(f64, f64, f64)> = None;
    for &lambda in &lambdas {
        for &gamma in &gammas {
            let breakdown = evaluate_point(dev, template, lm, lambda, gamma)?;
            let is_better = match best {
                None => true,
                Some((_, _, best_wer)) => breakdown.wer < best_wer,
            };
            if is_better {
                best = Some((lambda, gamma, breakdown.wer));
            }
            grid.push(TunePoint {
                lambda,
                gamma,
                breakdown,
            });
        }
    }
    let (best_lambda, best_gamma, best_wer) = best.expect("grids are non-empty");
    Ok(TuneResult {
        grid,
        best_lambda,
        best_gamma,
        best_wer,
    })
}

/// Line-oriented tuning report: one grid row per line, then the argmin.
pub fn format_tune_report(result: &TuneResult) -> String {
    let mut out = String::from("tune-report v1\n");
    out.push_str("lambda\tgamma\twer\tsub\tins\tdel\tref_words\n");
    for p in &result.grid {
        out.push_str(&alloc::format!(
            "{}\t{}\t{:.6}\t{}\t{}\t{}\t{}\n",
            p.lambda,
            p.gamma,
            p.breakdown.wer,
            p.breakdown.substitutions,
            p.breakdown.insertions,
            p.breakdown.deletions,
            p.breakdown.reference_words
        ));
    }
    out.push_str(&alloc::format!(
        "best lambda {} gamma {} wer {:.6}\n",
        result.best_lambda,
        result.best_gamma,
        result.best_wer
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{NgramLm, TableScorer};
    use crate::ngram::{count_ngrams, estimate_katz, KatzConfig};
    use crate::vocab::{UnitId, UnitVocabulary, VocabKind};

    #[test]
    fn single_substitution() {
        let b = wer(&["a", "b", "c"], &["a", "x", "c"]).unwrap();
        assert_eq!(
            (b.substitutions, b.insertions, b.deletions),
            (1, 0, 0)
        );
        assert!((b.wer - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_sequences_have_zero_wer() {
        let b = wer(&["x", "y"], &["x", "y"]).unwrap();
        assert_eq!(b.errors(), 0);
        assert_eq!(b.wer, 0.0);
    }

    /// Oracle for the insertion example: enumerate every monotone
    /// alignment of ref "a b" against hyp "a b b" and take the cheapest.
    fn exhaustive_edit(reference: &[&str], hypothesis: &[&str]) -> usize {
        fn go(r: &[&str], h: &[&str]) -> usize {
            match (r.is_empty(), h.is_empty()) {
                (true, _) => h.len(),
                (_, true) => r.len(),
                _ => {
                    let sub = go(&r[1..], &h[1..]) + usize::from(r[0] != h[0]);
                    let del = go(&r[1..], h) + 1;
                    let ins = go(r, &h[1..]) + 1;
                    sub.min(del).min(ins)
                }
            }
        }
        go(reference, hypothesis)
    }

    #[test]
    fn single_insertion_matches_the_exhaustive_alignment() {
        let r = ["a", "b"];
        let h = ["a", "b", "b"];
        let b = wer(&r, &h).unwrap();
        assert_eq!(b.errors(), exhaustive_edit(&r, &h));
        assert_eq!(
            (b.substitutions, b.insertions, b.deletions),
            (0, 1, 0)
        );
        assert!((b.wer - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_reference_is_an_error() {
        assert!(matches!(wer(&[], &["a"]), Err(EvalError::EmptyReference)));
    }

    #[test]
    fn wer_upper_bound_property() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let words = ["a", "b", "c", "d"];
        for _ in 0..300 {
            let rl = rng.gen_range(1..8);
            let hl = rng.gen_range(0..8);
            let r: Vec<&str> = (0..rl).map(|_| words[rng.gen_range(0..4)]).collect();
            let h: Vec<&str> = (0..hl).map(|_| words[rng.gen_range(0..4)]).collect();
            let b = wer(&r, &h).unwrap();
            assert!(b.wer <= rl.max(hl) as f64 / rl as f64 + 1e-12);
            assert_eq!(b.errors(), exhaustive_edit(&r, &h));
            // appending one word to the hypothesis changes the error count
            // by at most one
            let mut h2 = h.clone();
            h2.push(words[0]);
            let b2 = wer(&r, &h2).unwrap();
            assert!(b2.errors() <= b.errors() + 1);
            assert!(b.errors() <= b2.errors() + 1);
        }
    }

    #[test]
    fn corpus_accumulation_is_errors_over_words() {
        let mut total = WerBreakdown::default();
        total.accumulate(&wer(&["a", "b"], &["a", "x"]).unwrap()); // 1/2
        total.accumulate(&wer(&["c"], &["c"]).unwrap()); // 0/1
        total.accumulate(&wer(&["d", "e", "f"], &["d"]).unwrap()); // 2/3
        assert_eq!(total.errors(), 3);
        assert_eq!(total.reference_words, 6);
        assert!((total.wer - 0.5).abs() < 1e-12);
        // not the mean of per-utterance rates (which would be 0.3888...)
    }

    #[test]
    fn werr_arithmetic() {
        let w = relative_werr(7.7, 7.0).unwrap();
        assert!((w * 100.0 - 9.1).abs() < 0.05);
        let w = relative_werr(10.3, 6.9).unwrap();
        assert!((w * 100.0 - 33.0).abs() < 0.1);
        assert_eq!(relative_werr(5.0, 5.0).unwrap(), 0.0);
        assert!(matches!(
            relative_werr(0.0, 1.0),
            Err(EvalError::ZeroBaseline)
        ));
    }

    fn normalized(row: &[f64]) -> Vec<f64> {
        let z: f64 = row.iter().sum();
        row.iter().map(|p| (p / z).ln()).collect()
    }

    /// One-utterance dev set where the acoustics slightly prefer the wrong
    /// unit but the LM knows better.
    fn tiny_dev() -> (Vec<(Lattice, String)>, crate::ngram::ArpaModel) {
        let posts = vec![
            normalized(&[0.4, 0.45, 0.15]),
            normalized(&[0.1, 0.1, 0.8]),
        ];
        let attn = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let lattice = Lattice::new(
            vec!["a".into(), "b".into(), "</s>".into()],
            VocabKind::Grapheme,
            TableScorer::new(posts, attn).unwrap(),
        )
        .unwrap();
        let vocab = UnitVocabulary::new(
            VocabKind::Grapheme,
            ["a", "b"].map(|s| s.to_string()),
        )
        .unwrap();
        let a = vocab.id_of("a").unwrap();
        let corpus: Vec<Vec<UnitId>> = (0..20).map(|_| vec![a]).collect();
        let counts = count_ngrams(&corpus, 2, &vocab).unwrap();
        let model = estimate_katz(&counts, &KatzConfig::default()).unwrap().0;
        (vec![(lattice, "a".to_string())], model)
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let (dev, model) = tiny_dev();
        let lm = NgramLm::new(&model, &dev[0].0.units).unwrap();
        let result =
            tune_grid(&dev, &DecodeConfig::default(), &[0.5], &[0.0], Some(&lm)).unwrap();
        assert_eq!(result.grid.len(), 1);
        assert_eq!(result.best_lambda, 0.5);
        assert_eq!(result.best_gamma, 0.0);
    }

    #[test]
    fn tuning_picks_the_lambda_that_helps() {
        let (dev, model) = tiny_dev();
        let lm = NgramLm::new(&model, &dev[0].0.units).unwrap();
        let result = tune_grid(
            &dev,
            &DecodeConfig::default(),
            &[0.0, 1.0],
            &[0.0],
            Some(&lm),
        )
        .unwrap();
        // lambda 0 decodes "b" (acoustics), lambda 1 decodes "a" (LM fixes it)
        assert_eq!(result.best_lambda, 1.0);
        assert_eq!(result.best_wer, 0.0);
        let zero = result
            .grid
            .iter()
            .find(|p| p.lambda == 0.0)
            .unwrap();
        assert!(zero.breakdown.wer > 0.0);
    }

    #[test]
    fn grid_entries_match_independent_single_point_decodes() {
        let (dev, model) = tiny_dev();
        let lm = NgramLm::new(&model, &dev[0].0.units).unwrap();
        let template = DecodeConfig::default();
        let result =
            tune_grid(&dev, &template, &[0.0, 0.7], &[0.0, 0.5], Some(&lm)).unwrap();
        for p in &result.grid {
            let direct = evaluate_point(&dev, &template, Some(&lm), p.lambda, p.gamma).unwrap();
            assert_eq!(p.breakdown, direct);
        }
        assert_eq!(result.grid.len(), 4);
    }

    #[test]
    fn tie_break_prefers_smaller_lambda_then_gamma() {
        // A dev set the LM cannot improve: every grid point scores the
        // same, so the smallest lambda and gamma win.
        let (dev, model) = tiny_dev();
        let lm = NgramLm::new(&model, &dev[0].0.units).unwrap();
        let result = tune_grid(
            &dev,
            &DecodeConfig::default(),
            &[1.0, 0.5],
            &[0.5, 0.0],
            Some(&lm),
        )
        .unwrap();
        // both lambdas decode "a" here, so the tie-break picks 0.5 / 0.0
        assert_eq!(result.best_lambda, 0.5);
        assert_eq!(result.best_gamma, 0.0);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let (dev, model) = tiny_dev();
        let lm = NgramLm::new(&model, &dev[0].0.units).unwrap();
        assert!(matches!(
            tune_grid(&dev, &DecodeConfig::default(), &[], &[0.0], Some(&lm)),
            Err(EvalError::EmptyGrid)
        ));
        let empty: Vec<(Lattice, String)> = Vec::new();
        assert!(matches!(
            tune_grid(&empty, &DecodeConfig::default(), &[0.0], &[0.0], Some(&lm)),
            Err(EvalError::EmptyDevSet)
        ));
    }
}
