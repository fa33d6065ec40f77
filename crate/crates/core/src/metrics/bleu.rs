//! Corpus BLEU with 13a tokenisation, no smoothing.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

use super::MetricError;

pub const MAX_ORDER: usize = 4;

fn rules() -> &'static [(Regex, &'static str); 4] {
    static R: OnceLock<[(Regex, &'static str); 4]> = OnceLock::new();
    R.get_or_init(|| {
        [
            (Regex::new(r"([\{-~\[-` -&\(-\+:-@/])").unwrap(), " $1 "),
            (Regex::new(r"([^0-9])([\.,])").unwrap(), "$1 $2 "),
            (Regex::new(r"([\.,])([^0-9])").unwrap(), " $1 $2"),
            (Regex::new(r"([0-9])(-)").unwrap(), "$1 $2 "),
        ]
    })
}

/// The 13a tokenizer: unescape a few entities, split punctuation except
/// periods and commas inside numbers, and dashes after digits.
pub fn tokenize_13a(text: &str) -> Vec<String> {
    let mut line = text
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let mut line = format!(" {line} ");
    for (re, rep) in rules() {
        line = re.replace_all(&line, *rep).into_owned();
    }
    line.split_whitespace().map(str::to_string).collect()
}

/// Sufficient statistics of a corpus BLEU computation.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuStats {
    pub correct: [usize; MAX_ORDER],
    pub total: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len >= self.ref_len {
            1.0
        } else if self.hyp_len == 0 {
            0.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        }
    }

    /// BLEU on the 0..=100 scale. Any order with no matches (or no
    /// candidates) gives 0.
    pub fn score(&self) -> f64 {
        if (0..MAX_ORDER).any(|n| self.correct[n] == 0 || self.total[n] == 0) {
            return 0.0;
        }
        let log_mean = (0..MAX_ORDER)
            .map(|n| (self.correct[n] as f64 / self.total[n] as f64).ln())
            .sum::<f64>()
            / MAX_ORDER as f64;
        100.0 * self.brevity_penalty() * log_mean.exp()
    }
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

pub fn corpus_bleu_stats<H: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[H],
    references: &[Vec<R>],
) -> Result<BleuStats, MetricError> {
    if hypotheses.is_empty() {
        return Err(MetricError::Domain("empty hypothesis list".into()));
    }
    if hypotheses.len() != references.len() {
        return Err(MetricError::LengthMismatch(
            hypotheses.len(),
            references.len(),
        ));
    }
    let mut stats = BleuStats {
        correct: [0; MAX_ORDER],
        total: [0; MAX_ORDER],
        hyp_len: 0,
        ref_len: 0,
    };
    for (h, refs) in hypotheses.iter().zip(references) {
        if refs.is_empty() {
            return Err(MetricError::Domain("hypothesis without references".into()));
        }
        let hyp = tokenize_13a(h.as_ref());
        let refs: Vec<Vec<String>> = refs.iter().map(|r| tokenize_13a(r.as_ref())).collect();
        stats.hyp_len += hyp.len();
        let closest = refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| (l.abs_diff(hyp.len()), l))
            .expect("non-empty references");
        stats.ref_len += closest;
        for n in 1..=MAX_ORDER {
            let hyp_counts = ngrams(&hyp, n);
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for r in &refs {
                for (g, c) in ngrams(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            stats.total[n - 1] += hyp.len().saturating_sub(n - 1);
            stats.correct[n - 1] += hyp_counts
                .iter()
                .map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }
    Ok(stats)
}

/// Corpus BLEU over multi-reference pairs, 0..=100.
pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[H],
    references: &[Vec<R>],
) -> Result<f64, MetricError> {
    corpus_bleu_stats(hypotheses, references).map(|s| s.score())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_13a_cases() {
        assert_eq!(tokenize_13a("Hello, world."), ["Hello", ",", "world", "."]);
        assert_eq!(
            tokenize_13a("It costs $3,000.50 today!"),
            ["It", "costs", "$", "3,000.50", "today", "!"]
        );
        assert_eq!(
            tokenize_13a("Dan's 5-year plan (draft)"),
            ["Dan's", "5", "-", "year", "plan", "(", "draft", ")"]
        );
        assert_eq!(
            tokenize_13a("a >Causes/Enables> b"),
            ["a", ">", "Causes", "/", "Enables", ">", "b"]
        );
        assert_eq!(tokenize_13a("x &amp; y"), ["x", "&", "y"]);
        assert_eq!(tokenize_13a("well-known"), ["well-known"]);
    }

    #[test]
    fn identical_corpus_is_exactly_100() {
        let h = [
            "the cat sat on the mat",
            "Dan missed the bus to school today",
        ];
        let r = vec![
            vec!["the cat sat on the mat"],
            vec!["Dan missed the bus to school today"],
        ];
        assert_eq!(corpus_bleu(&h, &r).unwrap(), 100.0);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(corpus_bleu(&["a b c d"], &[vec!["e f g h"]]).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let empty: [&str; 0] = [];
        let no_refs: [Vec<&str>; 0] = [];
        assert!(corpus_bleu(&empty, &no_refs).is_err());
        assert!(corpus_bleu(&["a"], &[vec!["a"], vec!["b"]]).is_err());
    }

    #[test]
    fn brevity_penalty_and_closest_reference() {
        let s = corpus_bleu_stats(&["a b c"], &[vec!["a b c d e f", "a b"]]).unwrap();
        assert_eq!(s.ref_len, 2);
        let s = corpus_bleu_stats(&["a b c"], &[vec!["a b c d", "a b"]]).unwrap();
        assert_eq!(s.ref_len, 2, "ties go to the shorter reference");
        let s = BleuStats {
            correct: [1; 4],
            total: [1; 4],
            hyp_len: 4,
            ref_len: 8,
        };
        assert!((s.brevity_penalty() - (-1.0f64).exp()).abs() < 1e-15);
    }
}
