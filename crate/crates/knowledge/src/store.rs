use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use serde::{Deserialize, Serialize};

use crate::chunk::KnowledgeChunk;
use crate::embed::{Embedder, EmbeddingVector};
use crate::error::KnowledgeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub chunk_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub store_id: String,
    pub domain_label: String,
    pub dims: usize,
    pub count: usize,
    pub embedder: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    pub store_id: String,
    pub domain_label: String,
    pub embedder: String,
    dims: usize,
    chunks: Vec<KnowledgeChunk>,
    vectors: Vec<EmbeddingVector>,
}

/// Heap entry ordered so that the *worst* hit is the greatest.
struct Ranked<'a> {
    score: f64,
    chunk_id: &'a str,
}

impl PartialEq for Ranked<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked<'_> {}

impl PartialOrd for Ranked<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other.score.total_cmp(&self.score).then_with(|| self.chunk_id.cmp(other.chunk_id))
    }
}

impl VectorStore {
    pub fn new(
        store_id: impl Into<String>,
        domain_label: impl Into<String>,
        dims: usize,
        embedder: impl Into<String>,
    ) -> Self {
        Self {
            store_id: store_id.into(),
            domain_label: domain_label.into(),
            embedder: embedder.into(),
            dims,
            chunks: Vec::new(),
            vectors: Vec::new(),
        }
    }

    pub fn build(
        store_id: impl Into<String>,
        domain_label: impl Into<String>,
        chunks: Vec<KnowledgeChunk>,
        embedder: &dyn Embedder,
    ) -> Result<Self, KnowledgeError> {
        let mut s = Self::new(store_id, domain_label, embedder.dims(), embedder.name());
        for c in chunks {
            let v = embedder.embed(&c.text);
            s.insert(c, v)?;
        }
        Ok(s)
    }

    pub fn insert(&mut self, chunk: KnowledgeChunk, vector: EmbeddingVector) -> Result<(), KnowledgeError> {
        if vector.dims() != self.dims {
            return Err(KnowledgeError::DimensionMismatch { expected: self.dims, got: vector.dims() });
        }
        if self.chunks.iter().any(|c| c.chunk_id == chunk.chunk_id) {
            return Err(KnowledgeError::Parameter(format!("duplicate chunk_id {}", chunk.chunk_id)));
        }
        self.chunks.push(chunk);
        self.vectors.push(vector);
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[KnowledgeChunk] {
        &self.chunks
    }

    pub fn entries(&self) -> impl Iterator<Item = (&KnowledgeChunk, &EmbeddingVector)> {
        self.chunks.iter().zip(&self.vectors)
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&KnowledgeChunk> {
        self.chunks.iter().find(|c| c.chunk_id == chunk_id)
    }

    /// Exact top-k by cosine, ties by chunk_id ascending. Zero vectors are
    /// not retrievable.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<SearchHit>, KnowledgeError> {
        if k == 0 {
            return Err(KnowledgeError::Parameter("k must be at least 1".into()));
        }
        if query.dims() != self.dims {
            return Err(KnowledgeError::DimensionMismatch { expected: self.dims, got: query.dims() });
        }
        let mut heap: BinaryHeap<Ranked<'_>> = BinaryHeap::with_capacity(k + 1);
        for (c, v) in self.entries() {
            if v.is_zero() {
                continue;
            }
            heap.push(Ranked { score: query.cosine(v), chunk_id: &c.chunk_id });
            if heap.len() > k {
                heap.pop();
            }
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|r| SearchHit { chunk_id: r.chunk_id.to_string(), score: r.score })
            .collect())
    }

    /// Normalized mean of the non-zero entries, summed in chunk_id order so
    /// the result does not depend on insertion order.
    pub fn centroid(&self) -> EmbeddingVector {
        let mut order: Vec<usize> = (0..self.chunks.len()).collect();
        order.sort_by(|a, b| self.chunks[*a].chunk_id.cmp(&self.chunks[*b].chunk_id));
        let mut sum = vec![0f64; self.dims];
        for i in order {
            for (s, v) in sum.iter_mut().zip(&self.vectors[i].values) {
                *s += f64::from(*v);
            }
        }
        EmbeddingVector::from_f64(&sum)
    }

    pub fn meta(&self) -> StoreMeta {
        StoreMeta {
            store_id: self.store_id.clone(),
            domain_label: self.domain_label.clone(),
            dims: self.dims,
            count: self.chunks.len(),
            embedder: self.embedder.clone(),
        }
    }

    /// Writes `<parent>/<store_id>/` atomically: build in a temporary
    /// sibling, then swap by rename.
    pub fn save(&self, parent: &Path) -> Result<PathBuf, KnowledgeError> {
        static SEQ: AtomicU64 = AtomicU64::new(0);
        fs::create_dir_all(parent).map_err(|e| KnowledgeError::io(parent, e))?;
        let nonce = format!("{}-{}", std::process::id(), SEQ.fetch_add(1, AtomicOrdering::Relaxed));
        let tmp = parent.join(format!(".{}.tmp-{nonce}", self.store_id));
        fs::create_dir_all(&tmp).map_err(|e| KnowledgeError::io(&tmp, e))?;

        let mut chunks = Vec::new();
        for c in &self.chunks {
            serde_json::to_writer(&mut chunks, c).expect("chunk serializes");
            chunks.push(b'\n');
        }
        write_file(&tmp.join("chunks.ndjson"), &chunks)?;
        let mut vecs = Vec::with_capacity(self.vectors.len() * self.dims * 4);
        for v in &self.vectors {
            for x in &v.values {
                vecs.extend_from_slice(&x.to_le_bytes());
            }
        }
        write_file(&tmp.join("vectors.f32"), &vecs)?;
        let meta = serde_json::to_vec_pretty(&self.meta()).expect("meta serializes");
        write_file(&tmp.join("meta.json"), &meta)?;

        let target = parent.join(&self.store_id);
        let old = parent.join(format!(".{}.old-{nonce}", self.store_id));
        if target.exists() {
            fs::rename(&target, &old).map_err(|e| KnowledgeError::io(&target, e))?;
        }
        fs::rename(&tmp, &target).map_err(|e| KnowledgeError::io(&target, e))?;
        if old.exists() {
            fs::remove_dir_all(&old).map_err(|e| KnowledgeError::io(&old, e))?;
        }
        Ok(target)
    }

    pub fn load(dir: &Path) -> Result<Self, KnowledgeError> {
        let meta_path = dir.join("meta.json");
        let meta: StoreMeta =
            serde_json::from_slice(&fs::read(&meta_path).map_err(|e| KnowledgeError::io(&meta_path, e))?)
                .map_err(|e| KnowledgeError::corrupt(&meta_path, e.to_string()))?;
        let cpath = dir.join("chunks.ndjson");
        let text = fs::read_to_string(&cpath).map_err(|e| KnowledgeError::io(&cpath, e))?;
        let chunks: Vec<KnowledgeChunk> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| KnowledgeError::corrupt(&cpath, e.to_string())))
            .collect::<Result<_, _>>()?;
        let vpath = dir.join("vectors.f32");
        let raw = fs::read(&vpath).map_err(|e| KnowledgeError::io(&vpath, e))?;
        if chunks.len() != meta.count || raw.len() != meta.count * meta.dims * 4 {
            return Err(KnowledgeError::corrupt(dir, "chunk/vector counts disagree with meta.json"));
        }
        let mut store = Self::new(meta.store_id, meta.domain_label, meta.dims, meta.embedder);
        let row = meta.dims * 4;
        for (i, c) in chunks.into_iter().enumerate() {
            let values = raw[i * row..(i + 1) * row]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            store.insert(c, EmbeddingVector { values })?;
        }
        Ok(store)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), KnowledgeError> {
    let mut f = fs::File::create(path).map_err(|e| KnowledgeError::io(path, e))?;
    f.write_all(bytes).map_err(|e| KnowledgeError::io(path, e))?;
    f.sync_all().map_err(|e| KnowledgeError::io(path, e))
}

/// Store whose centroid is closest to the query; ties by store_id ascending.
pub fn route_domain<'a>(
    query: &str,
    stores: &'a [VectorStore],
    embedder: &dyn Embedder,
) -> Result<&'a VectorStore, KnowledgeError> {
    let q = embedder.embed(query);
    let mut best: Option<(&VectorStore, f64)> = None;
    for s in stores {
        let score = q.cosine(&s.centroid());
        best = match best {
            Some((b, bs)) if bs > score || (bs == score && b.store_id <= s.store_id) => Some((b, bs)),
            _ => Some((s, score)),
        };
    }
    best.map(|(s, _)| s).ok_or(KnowledgeError::NoStores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::ingest;
    use crate::embed::HashEmbedder;

    fn store(id: &str, text: &str) -> VectorStore {
        let e = HashEmbedder::default();
        VectorStore::build(id, id, ingest(text, id, 8, 2).unwrap(), &e).unwrap()
    }

    #[test]
    fn self_similarity_first() {
        let s = store("a", "uart baud rate divider configuration and parity bits for serial lines");
        let e = HashEmbedder::default();
        let v = e.embed(&s.chunks()[1].text);
        let hits = s.search(&v, 1).unwrap();
        assert_eq!(hits[0].chunk_id, s.chunks()[1].chunk_id);
        assert!((hits[0].score - 1.0).abs() < 1e-9);
        assert_eq!(s.search(&v, 100).unwrap().len(), s.len());
        assert!(s.search(&v, 0).is_err());
        assert!(s.search(&EmbeddingVector::zeros(3), 1).is_err());
    }

    #[test]
    fn routing_rules() {
        let a = store("b_store", "fuzzing processors with coverage feedback");
        let b = store("a_store", "fuzzing processors with coverage feedback");
        let c = store("c_store", "pasta tomato basil recipe");
        let e = HashEmbedder::default();
        let all = [a, b, c];
        assert_eq!(route_domain("fuzzing processors", &all, &e).unwrap().store_id, "a_store");
        assert_eq!(route_domain("tomato recipe", &all, &e).unwrap().store_id, "c_store");
        assert!(route_domain("x", &[], &e).is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = store("docs", "one two three four five six seven eight nine ten eleven");
        let path = s.save(dir.path()).unwrap();
        assert_eq!(VectorStore::load(&path).unwrap(), s);
        // Saving again swaps in place.
        s.save(dir.path()).unwrap();
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, ["docs"]);
    }
}
