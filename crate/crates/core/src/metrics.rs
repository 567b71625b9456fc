//! Translation scoring (WER, BLEU-4) and token-stream entropy/redundancy.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("empty reference")]
    EmptyReference,
    #[error("empty token stream")]
    EmptyStream,
    #[error("single-token stream: redundancy undefined for V = 1")]
    SingleToken,
}

/// Edit-distance breakdown behind a WER score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    /// Reference length N.
    pub reference_len: usize,
    /// (S + I + D) / N; may exceed 1 for long candidates.
    pub wer: f64,
}

/// Minimum-edit-distance alignment with unit costs. Among minimum-cost
/// alignments, substitutions are preferred over insert+delete pairs.
pub fn wer<T: AsRef<str>>(reference: &[T], candidate: &[T]) -> Result<WerBreakdown, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let n = reference.len();
    let m = candidate.len();
    // dp[i][j]: edit distance between reference[..i] and candidate[..j].
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in 0..=n {
        dp[i][0] = i;
    }
    for j in 0..=m {
        dp[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub_cost = usize::from(reference[i - 1].as_ref() != candidate[j - 1].as_ref());
            dp[i][j] = (dp[i - 1][j - 1] + sub_cost)
                .min(dp[i - 1][j] + 1)
                .min(dp[i][j - 1] + 1);
        }
    }

    // Backtrace, preferring the diagonal (match/substitution) on ties.
    let (mut i, mut j) = (n, m);
    let (mut s, mut ins, mut del) = (0usize, 0usize, 0usize);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let sub_cost = usize::from(reference[i - 1].as_ref() != candidate[j - 1].as_ref());
            if dp[i][j] == dp[i - 1][j - 1] + sub_cost {
                s += sub_cost;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[i][j] == dp[i - 1][j] + 1 {
            del += 1;
            i -= 1;
        } else {
            ins += 1;
            j -= 1;
        }
    }

    Ok(WerBreakdown {
        substitutions: s,
        insertions: ins,
        deletions: del,
        reference_len: n,
        wer: (s + ins + del) as f64 / n as f64,
    })
}

/// BLEU-4 components for one candidate/reference pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuBreakdown {
    /// Modified n-gram precisions, n = 1..4.
    pub precisions: [f64; 4],
    pub brevity_penalty: f64,
    pub bleu: f64,
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_default() += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and candidate n-gram total for one order.
fn clipped_matches<T: AsRef<str>>(reference: &[T], candidate: &[T], n: usize) -> (usize, usize) {
    let ref_counts = ngram_counts(reference, n);
    let cand_counts = ngram_counts(candidate, n);
    let total: usize = cand_counts.values().sum();
    let matched: usize = cand_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    (matched, total)
}

fn bleu_from_components(
    matches: [usize; 4],
    totals: [usize; 4],
    ref_len: usize,
    cand_len: usize,
) -> BleuBreakdown {
    let mut precisions = [0.0f64; 4];
    for k in 0..4 {
        precisions[k] = if totals[k] == 0 { 0.0 } else { matches[k] as f64 / totals[k] as f64 };
    }
    let brevity_penalty = if cand_len == 0 {
        0.0
    } else if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };
    // No smoothing: any zero precision zeroes the geometric mean.
    let bleu = if precisions.iter().any(|&p| p == 0.0) {
        0.0
    } else {
        let log_mean: f64 = precisions.iter().map(|p| p.ln()).sum::<f64>() / 4.0;
        brevity_penalty * log_mean.exp()
    };
    BleuBreakdown { precisions, brevity_penalty, bleu }
}

/// Single-reference sentence BLEU-4, uniform weights, no smoothing.
pub fn bleu4<T: AsRef<str>>(reference: &[T], candidate: &[T]) -> BleuBreakdown {
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    for k in 0..4 {
        let (m, t) = clipped_matches(reference, candidate, k + 1);
        matches[k] = m;
        totals[k] = t;
    }
    bleu_from_components(matches, totals, reference.len(), candidate.len())
}

/// Corpus-level aggregate: pooled n-gram counts and lengths for BLEU,
/// pooled edit counts for WER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusScores {
    pub bleu: BleuBreakdown,
    /// (sum S + sum I + sum D) / (sum N).
    pub wer: f64,
    pub pairs: usize,
}

pub fn corpus_scores<T: AsRef<str>>(
    pairs: &[(Vec<T>, Vec<T>)],
) -> Result<CorpusScores, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut ref_len, mut cand_len) = (0usize, 0usize);
    let (mut edits, mut n_total) = (0usize, 0usize);
    for (reference, candidate) in pairs {
        let w = wer(reference, candidate)?;
        edits += w.substitutions + w.insertions + w.deletions;
        n_total += w.reference_len;
        ref_len += reference.len();
        cand_len += candidate.len();
        for k in 0..4 {
            let (m, t) = clipped_matches(reference, candidate, k + 1);
            matches[k] += m;
            totals[k] += t;
        }
    }
    Ok(CorpusScores {
        bleu: bleu_from_components(matches, totals, ref_len, cand_len),
        wer: edits as f64 / n_total as f64,
        pairs: pairs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport {
    /// Token-level unigram entropy, bits.
    pub entropy_bits: f64,
    pub vocab_size: usize,
    pub max_entropy: f64,
    /// 1 - H / log2(V).
    pub redundancy: f64,
}

/// Empirical unigram entropy and redundancy of a token stream.
pub fn entropy_redundancy<T: AsRef<str>>(stream: &[T]) -> Result<EntropyReport, MetricsError> {
    if stream.is_empty() {
        return Err(MetricsError::EmptyStream);
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for t in stream {
        *freq.entry(t.as_ref()).or_default() += 1;
    }
    let vocab_size = freq.len();
    if vocab_size == 1 {
        return Err(MetricsError::SingleToken);
    }
    let n = stream.len() as f64;
    let entropy_bits: f64 = freq
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    let max_entropy = (vocab_size as f64).log2();
    Ok(EntropyReport {
        entropy_bits,
        vocab_size,
        max_entropy,
        redundancy: 1.0 - entropy_bits / max_entropy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn identical_pair_scores_zero_wer() {
        let r = toks("a b c");
        let w = wer(&r, &r).unwrap();
        assert_eq!((w.substitutions, w.insertions, w.deletions), (0, 0, 0));
        assert_eq!(w.wer, 0.0);
    }

    #[test]
    fn single_substitution() {
        let w = wer(&toks("a b c"), &toks("a x c")).unwrap();
        assert_eq!(w.substitutions, 1);
        assert_eq!(w.insertions, 0);
        assert_eq!(w.deletions, 0);
        assert!((w.wer - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn method_name_swap_is_one_substitution() {
        let r = toks("obj getHeight .");
        let c = toks("obj getGraphic .");
        let w = wer(&r, &c).unwrap();
        assert_eq!((w.substitutions, w.insertions, w.deletions), (1, 0, 0));
    }

    #[test]
    fn tie_break_prefers_substitutions() {
        // ref "a b", cand "b a": cost 2 either as two substitutions or as
        // delete-a + insert-a around the matching b.
        let w = wer(&toks("a b"), &toks("b a")).unwrap();
        assert_eq!(w.substitutions + w.insertions + w.deletions, 2);
        assert_eq!(w.substitutions, 2);
    }

    #[test]
    fn empty_reference_rejected() {
        let empty: Vec<String> = vec![];
        assert_eq!(wer(&empty, &toks("a")).unwrap_err(), MetricsError::EmptyReference);
    }

    #[test]
    fn perfect_match_bleu_one() {
        let r = toks("a b c d e");
        let b = bleu4(&r, &r);
        assert_eq!(b.precisions, [1.0; 4]);
        assert_eq!(b.brevity_penalty, 1.0);
        assert!((b.bleu - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_candidate_bleu_zero() {
        let r = toks("a b c d");
        let empty: Vec<String> = vec![];
        assert_eq!(bleu4(&r, &empty).bleu, 0.0);
    }

    #[test]
    fn brevity_penalty_case() {
        // All precisions 1, penalty exp(1 - 5/4).
        let b = bleu4(&toks("a b c d e"), &toks("a b c d"));
        assert_eq!(b.precisions, [1.0; 4]);
        assert!((b.brevity_penalty - (-0.25f64).exp()).abs() < 1e-12);
        assert!((b.bleu - (-0.25f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn short_candidate_scores_zero_without_smoothing() {
        let b = bleu4(&toks("a b c d e"), &toks("a b c"));
        assert_eq!(b.bleu, 0.0);
    }

    #[test]
    fn clipping_caps_repeated_grams() {
        // candidate repeats "a" seven times; reference has two.
        let b = bleu4(&toks("a a b c d"), &toks("a a a a a a a"));
        assert!((b.precisions[0] - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn corpus_scores_degenerate_single_pair() {
        let pairs = vec![(toks("a b c d e"), toks("a b c d"))];
        let c = corpus_scores(&pairs).unwrap();
        let s = bleu4(&pairs[0].0, &pairs[0].1);
        assert!((c.bleu.bleu - s.bleu).abs() < 1e-15);
        assert!((c.wer - 0.2).abs() < 1e-15);
    }

    #[test]
    fn corpus_identical_pairs() {
        let pairs: Vec<(Vec<String>, Vec<String>)> =
            (0..5).map(|_| (toks("x y z w"), toks("x y z w"))).collect();
        let c = corpus_scores(&pairs).unwrap();
        assert!((c.bleu.bleu - 1.0).abs() < 1e-15);
        assert_eq!(c.wer, 0.0);
    }

    #[test]
    fn uniform_eight_symbols_entropy_three_bits() {
        let stream: Vec<String> = (0..8).map(|i| format!("t{i}")).collect();
        let e = entropy_redundancy(&stream).unwrap();
        assert!((e.entropy_bits - 3.0).abs() < 1e-12);
        assert!(e.redundancy.abs() < 1e-12);
    }

    #[test]
    fn skewed_stream_entropy() {
        // p = (3/4, 1/4): H = 0.811278..., redundancy = 1 - H.
        let e = entropy_redundancy(&toks("a a a b")).unwrap();
        assert!((e.entropy_bits - 0.8112781244591328).abs() < 1e-12);
        assert!((e.redundancy - (1.0 - 0.8112781244591328)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_streams_are_errors() {
        let empty: Vec<String> = vec![];
        assert_eq!(entropy_redundancy(&empty).unwrap_err(), MetricsError::EmptyStream);
        assert_eq!(entropy_redundancy(&toks("a a a")).unwrap_err(), MetricsError::SingleToken);
    }
}
