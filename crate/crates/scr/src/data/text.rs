//! Item-text processing and the deterministic hashing embedder used in place
//! of externally trained word vectors.

use crate::Real;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Fixed built-in stopword list; deliberately small, item titles are short.
const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "has", "have", "in", "is",
    "it", "its", "of", "on", "or", "over", "that", "the", "this", "to", "was", "were", "will",
    "with",
];

/// Per-token vector source.
pub trait EmbeddingLookup {
    fn dim(&self) -> usize;
    fn lookup(&self, token: &str) -> Option<Vec<Real>>;
}

/// Lowercase, strip punctuation, split on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Strips one of the suffixes "ing", "ed", "s" (longest first), keeping at
/// least two characters of stem.
pub fn stem(token: &str) -> &str {
    for suffix in ["ing", "ed", "s"] {
        if let Some(base) = token.strip_suffix(suffix) {
            if base.len() >= 2 {
                return base;
            }
        }
    }
    token
}

/// Averages the found token vectors of the item text. Returns the vector and
/// the number of tokens that resolved; zero resolved tokens yields the zero
/// vector (callers surface that as a warning).
pub fn item_vector(text: &str, lookup: &impl EmbeddingLookup) -> (Vec<Real>, usize) {
    let mut acc = vec![0.0; lookup.dim()];
    let mut found = 0usize;
    for token in tokenize(text) {
        if STOPWORDS.contains(&token.as_str()) {
            continue;
        }
        if let Some(v) = lookup.lookup(stem(&token)) {
            for (a, b) in acc.iter_mut().zip(&v) {
                *a += b;
            }
            found += 1;
        }
    }
    if found > 0 {
        let inv = 1.0 / found as Real;
        for a in &mut acc {
            *a *= inv;
        }
    }
    (acc, found)
}

/// Test substitute for a trained word2vec model: token → FNV-1a 64 hash →
/// seeded Gaussian D-vector, unit-normalized. Bit-exact across runs.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl EmbeddingLookup for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lookup(&self, token: &str) -> Option<Vec<Real>> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(token.as_bytes()));
        let mut v: Vec<Real> = (0..self.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<Real>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        Some(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_token_is_its_embedding() {
        let emb = HashingEmbedder::new(16);
        let (v, found) = item_vector("sofa", &emb);
        assert_eq!(found, 1);
        assert_eq!(v, emb.lookup("sofa").unwrap());
    }

    #[test]
    fn two_tokens_average() {
        let emb = HashingEmbedder::new(8);
        let (v, found) = item_vector("oak table", &emb);
        assert_eq!(found, 2);
        let a = emb.lookup("oak").unwrap();
        let b = emb.lookup("table").unwrap();
        for i in 0..8 {
            assert!((v[i] - 0.5 * (a[i] + b[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn stopword_only_text_is_zero() {
        let emb = HashingEmbedder::new(4);
        let (v, found) = item_vector("the and of", &emb);
        assert_eq!(found, 0);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn empty_text_is_zero() {
        let emb = HashingEmbedder::new(4);
        let (v, found) = item_vector("", &emb);
        assert_eq!(found, 0);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stemming_strips_suffixes() {
        assert_eq!(stem("chairs"), "chair");
        assert_eq!(stem("matching"), "match");
        assert_eq!(stem("carved"), "carv");
        // too short to strip
        assert_eq!(stem("as"), "as");
        assert_eq!(stem("red"), "red");
    }

    #[test]
    fn punctuation_and_case_normalized() {
        assert_eq!(tokenize("Mid-Century, MODERN!"), vec!["mid", "century", "modern"]);
    }

    #[test]
    fn hashing_embedder_is_unit_norm_and_stable() {
        let emb = HashingEmbedder::new(32);
        let v1 = emb.lookup("rustic").unwrap();
        let v2 = emb.lookup("rustic").unwrap();
        assert_eq!(v1, v2);
        let norm: Real = v1.iter().map(|x| x * x).sum::<Real>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_ne!(v1, emb.lookup("glam").unwrap());
    }
}
