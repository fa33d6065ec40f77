//! Embedding-based similarity scores over a pluggable provider.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::MetricError;

pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn sentence_embed(&self, text: &str) -> Result<Vec<f64>, MetricError>;
    fn token_embed(&self, text: &str) -> Result<Vec<(String, Vec<f64>)>, MetricError>;
}

/// Hermetic provider: each lower-cased token maps to a unit vector seeded by
/// its hash; a sentence is the normalised sum of its token vectors.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim }
    }

    pub fn tokens(text: &str) -> Vec<String> {
        text.to_lowercase()
            .split(|c: char| !(c.is_alphanumeric() || c == '\''))
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    }

    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::from_seed(Sha256::digest(token.as_bytes()).into());
        let v: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        normalise(v)
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(64)
    }
}

fn normalise(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v
    } else {
        v.into_iter().map(|x| x / n).collect()
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn sentence_embed(&self, text: &str) -> Result<Vec<f64>, MetricError> {
        let mut acc = vec![0.0; self.dim];
        for t in Self::tokens(text) {
            for (a, b) in acc.iter_mut().zip(self.token_vector(&t)) {
                *a += b;
            }
        }
        Ok(normalise(acc))
    }

    fn token_embed(&self, text: &str) -> Result<Vec<(String, Vec<f64>)>, MetricError> {
        Ok(Self::tokens(text)
            .into_iter()
            .map(|t| {
                let v = self.token_vector(&t);
                (t, v)
            })
            .collect())
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::Domain("zero-norm vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn greedy_f1(
    hyp: &[(String, Vec<f64>)],
    reference: &[(String, Vec<f64>)],
) -> Result<f64, MetricError> {
    if hyp.is_empty() || reference.is_empty() {
        return Ok(0.0);
    }
    let mut sims = vec![vec![0.0; reference.len()]; hyp.len()];
    for (i, (_, h)) in hyp.iter().enumerate() {
        for (j, (_, r)) in reference.iter().enumerate() {
            sims[i][j] = cosine(h, r)?;
        }
    }
    let precision = sims
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / hyp.len() as f64;
    let recall = (0..reference.len())
        .map(|j| {
            sims.iter()
                .map(|row| row[j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / reference.len() as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Greedy token-matching F1 (no IDF weighting, no rescaling), best over the
/// references.
pub fn embedding_match_score<R: AsRef<str>>(
    hypothesis: &str,
    references: &[R],
    provider: &dyn EmbeddingProvider,
) -> Result<f64, MetricError> {
    if references.is_empty() {
        return Err(MetricError::Domain("no references".into()));
    }
    let h = provider.token_embed(hypothesis)?;
    let mut best = f64::NEG_INFINITY;
    for r in references {
        best = best.max(greedy_f1(&h, &provider.token_embed(r.as_ref())?)?);
    }
    Ok(best)
}

/// Best cosine between sentence embeddings.
pub fn sentence_similarity<R: AsRef<str>>(
    hypothesis: &str,
    references: &[R],
    provider: &dyn EmbeddingProvider,
) -> Result<f64, MetricError> {
    if references.is_empty() {
        return Err(MetricError::Domain("no references".into()));
    }
    let h = provider.sentence_embed(hypothesis)?;
    let mut best = f64::NEG_INFINITY;
    for r in references {
        best = best.max(cosine(&h, &provider.sentence_embed(r.as_ref())?)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fixed lookup table; unknown tokens are an error.
    struct Table(Vec<(&'static str, Vec<f64>)>);

    impl EmbeddingProvider for Table {
        fn dimension(&self) -> usize {
            2
        }
        fn sentence_embed(&self, text: &str) -> Result<Vec<f64>, MetricError> {
            let mut acc = vec![0.0; 2];
            for (_, v) in self.token_embed(text)? {
                acc[0] += v[0];
                acc[1] += v[1];
            }
            Ok(acc)
        }
        fn token_embed(&self, text: &str) -> Result<Vec<(String, Vec<f64>)>, MetricError> {
            text.split_whitespace()
                .map(|t| {
                    self.0
                        .iter()
                        .find(|(k, _)| *k == t)
                        .map(|(k, v)| (k.to_string(), v.clone()))
                        .ok_or_else(|| MetricError::Provider(format!("unknown token {t}")))
                })
                .collect()
        }
    }

    fn table() -> Table {
        Table(vec![
            ("a", vec![1.0, 0.0]),
            ("b", vec![0.0, 1.0]),
            ("c", vec![1.0, 1.0]),
            ("d", vec![3.0, 4.0]),
        ])
    }

    #[test]
    fn identical_text_scores_one() {
        let e = HashingEmbedder::default();
        let s = "Dan missed the bus >Causes/Enables> Dan calls Pete";
        assert!((embedding_match_score(s, &[s], &e).unwrap() - 1.0).abs() < 1e-12);
        assert!((sentence_similarity(s, &[s], &e).unwrap() - 1.0).abs() < 1e-12);
        assert!((embedding_match_score(s, &["other words", s], &e).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_tokens_reduce_to_cosine() {
        let t = table();
        let got = embedding_match_score("a", &["c"], &t).unwrap();
        assert!((got - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_sentences() {
        assert_eq!(sentence_similarity("a", &["b"], &table()).unwrap(), 0.0);
    }

    #[test]
    fn three_by_two_against_exhaustive_oracle() {
        let t = table();
        let (h, r) = (["a", "b", "d"], ["c", "a"]);
        let vec_of = |k: &str| t.0.iter().find(|(n, _)| *n == k).unwrap().1.clone();
        let cos = |x: &str, y: &str| {
            let (u, v) = (vec_of(x), vec_of(y));
            (u[0] * v[0] + u[1] * v[1])
                / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt())
        };
        let mut p = 0.0;
        for x in h {
            p += r.iter().map(|y| cos(x, y)).fold(f64::MIN, f64::max);
        }
        p /= 3.0;
        let mut rc = 0.0;
        for y in r {
            rc += h.iter().map(|x| cos(x, y)).fold(f64::MIN, f64::max);
        }
        rc /= 2.0;
        let oracle = 2.0 * p * rc / (p + rc);
        let got = embedding_match_score("a b d", &["c a"], &t).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn max_over_three_references() {
        let t = table();
        let refs = ["b", "c", "d"];
        let got = sentence_similarity("a", &refs, &t).unwrap();
        let oracle = [0.0, 1.0 / 2f64.sqrt(), 0.6]
            .into_iter()
            .fold(f64::MIN, f64::max);
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        let e = HashingEmbedder::default();
        let none: [&str; 0] = [];
        assert!(sentence_similarity("x", &none, &e).is_err());
        assert!(sentence_similarity("", &["x"], &e).is_err());
        assert!(embedding_match_score("zz", &["a"], &table()).is_err());
    }

    #[test]
    fn hashing_embedder_is_deterministic() {
        let e = HashingEmbedder::new(16);
        assert_eq!(
            e.sentence_embed("A b").unwrap(),
            e.sentence_embed("a B").unwrap()
        );
        assert_eq!(e.token_vector("x").len(), 16);
    }
}
