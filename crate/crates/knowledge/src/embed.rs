use serde::{Deserialize, Serialize};

pub const REFERENCE_DIMS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn zeros(dims: usize) -> Self {
        Self { values: vec![0.0; dims] }
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| f64::from(*v) * f64::from(*v)).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Scales to unit length in f64 before rounding to f32. Zero stays zero.
    pub fn from_f64(values: &[f64]) -> Self {
        let n = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Self::zeros(values.len());
        }
        Self { values: values.iter().map(|v| (v / n) as f32).collect() }
    }

    /// Cosine similarity in f64, clamped to [-1, 1]. Zero vectors score 0.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum();
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub trait Embedder: Send + Sync {
    fn dims(&self) -> usize;
    fn embed(&self, text: &str) -> EmbeddingVector;
    /// Recorded in store metadata so mismatched stores are detected.
    fn name(&self) -> String;
}

/// Hashed bag of words: lowercase alphanumeric tokens, FNV-1a into `dims`
/// buckets, counts, L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    dims: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dims: REFERENCE_DIMS }
    }
}

impl HashEmbedder {
    pub fn new(dims: usize) -> Self {
        Self { dims: dims.max(1) }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_')).filter(|w| !w.is_empty()).map(|w| w.to_lowercase())
}

impl Embedder for HashEmbedder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        let mut counts = vec![0f64; self.dims];
        for w in words(text) {
            counts[(fnv1a(w.as_bytes()) % self.dims as u64) as usize] += 1.0;
        }
        EmbeddingVector::from_f64(&counts)
    }

    fn name(&self) -> String {
        format!("hashed-bow-fnv1a-{}", self.dims)
    }
}
