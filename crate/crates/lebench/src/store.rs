//! Embedding store: N×d float32 features in V augmentation views, plus
//! ground-truth labels and split tags, in a seekable little-endian binary
//! layout with a structured-text manifest sidecar.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic   4 bytes  "LEBM"
//! version u32      1
//! n       u64      example count
//! d       u32      embedding dimension
//! v       u32      view count (>= 1)
//! k       u32      class count
//! labels  n × u32
//! splits  n × u8   0 = pool, 1 = val, 2 = test
//! views   v blocks of n×d f32, row-major
//! ```
//!
//! The manifest lives next to the store as `<file>.manifest.toml` and must
//! agree with the binary header exactly.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"LEBM";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 4 + 4;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("bad magic bytes (not an embedding store)")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("payload size mismatch: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u128, found: usize },
    #[error("manifest disagrees with binary payload: {0}")]
    ManifestMismatch(String),
    #[error("manifest parse error: {0}")]
    ManifestParse(String),
    #[error("label {label} out of range for {k} classes (example {index})")]
    LabelOutOfRange { index: usize, label: u32, k: u32 },
    #[error("invalid split tag {tag} at example {index}")]
    InvalidSplitTag { index: usize, tag: u8 },
    #[error("non-finite feature value at view {view}, example {index}")]
    NonFinite { view: usize, index: usize },
    #[error("class {0} has no examples in pool or val")]
    MissingClass(usize),
    #[error("invalid header field: {0}")]
    InvalidHeader(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-example split assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Pool = 0,
    Val = 1,
    Test = 2,
}

impl Split {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Split::Pool),
            1 => Some(Split::Val),
            2 => Some(Split::Test),
            _ => None,
        }
    }
}

/// Sidecar manifest; counts must match the binary payload exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub format_version: u32,
    pub n: u64,
    pub d: u32,
    pub v: u32,
    pub k: u32,
    pub pool_size: u64,
    pub val_size: u64,
    pub test_size: u64,
    pub class_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_seed: Option<u64>,
}

impl Manifest {
    pub fn from_toml_str(s: &str) -> Result<Self, StoreError> {
        toml::from_str(s).map_err(|e| StoreError::ManifestParse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

/// Frozen-encoder output the whole system consumes: immutable after load,
/// safe for concurrent readers.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    n: usize,
    d: usize,
    v: usize,
    k: usize,
    /// One n×d block per view; view 0 is the canonical (unaugmented) view.
    features: Vec<Array2<f32>>,
    labels: Vec<u32>,
    split: Vec<Split>,
    name: String,
    generator_seed: Option<u64>,
}

impl EmbeddingStore {
    pub fn new(
        name: String,
        features: Vec<Array2<f32>>,
        labels: Vec<u32>,
        split: Vec<Split>,
        k: usize,
        generator_seed: Option<u64>,
    ) -> Result<Self, StoreError> {
        let v = features.len();
        if v == 0 {
            return Err(StoreError::InvalidHeader("view count must be >= 1".into()));
        }
        let n = features[0].nrows();
        let d = features[0].ncols();
        for view in &features {
            if view.nrows() != n || view.ncols() != d {
                return Err(StoreError::InvalidHeader("views must share the same shape".into()));
            }
        }
        if labels.len() != n || split.len() != n {
            return Err(StoreError::InvalidHeader("labels/splits must cover every example".into()));
        }
        let store = Self { n, d, v, k, features, labels, split, name, generator_seed };
        store.validate()?;
        Ok(store)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn views(&self) -> usize {
        self.v
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn generator_seed(&self) -> Option<u64> {
        self.generator_seed
    }

    pub fn label(&self, index: usize) -> usize {
        self.labels[index] as usize
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn split(&self, index: usize) -> Split {
        self.split[index]
    }

    pub fn splits(&self) -> &[Split] {
        &self.split
    }

    /// Feature row of `index` in the given view.
    pub fn feature(&self, view: usize, index: usize) -> ArrayView1<'_, f32> {
        self.features[view].row(index)
    }

    /// Feature row converted to f64 (all internal math runs in f64).
    pub fn feature_f64(&self, view: usize, index: usize) -> Vec<f64> {
        self.features[view].row(index).iter().map(|&x| x as f64).collect()
    }

    /// Allocation-free variant for hot loops.
    pub fn fill_feature_f64(&self, view: usize, index: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.features[view].row(index).iter().map(|&x| x as f64));
    }

    pub fn view(&self, view: usize) -> &Array2<f32> {
        &self.features[view]
    }

    /// Indices of examples with the given split tag, ascending.
    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        (0..self.n).filter(|&i| self.split[i] == split).collect()
    }

    pub fn split_sizes(&self) -> (usize, usize, usize) {
        let mut sizes = (0usize, 0usize, 0usize);
        for s in &self.split {
            match s {
                Split::Pool => sizes.0 += 1,
                Split::Val => sizes.1 += 1,
                Split::Test => sizes.2 += 1,
            }
        }
        sizes
    }

    /// Replaces the split tags (used by the stratified splitter).
    pub(crate) fn with_splits(mut self, split: Vec<Split>) -> Result<Self, StoreError> {
        assert_eq!(split.len(), self.n);
        self.split = split;
        self.validate()?;
        Ok(self)
    }

    /// Checks the store invariants: labels in range, every class present in
    /// pool or val, all features finite.
    pub fn validate(&self) -> Result<(), StoreError> {
        for (i, &label) in self.labels.iter().enumerate() {
            if label as usize >= self.k {
                return Err(StoreError::LabelOutOfRange { index: i, label, k: self.k as u32 });
            }
        }
        let mut seen = vec![false; self.k];
        for i in 0..self.n {
            if matches!(self.split[i], Split::Pool | Split::Val) {
                seen[self.labels[i] as usize] = true;
            }
        }
        if let Some(c) = seen.iter().position(|&s| !s) {
            return Err(StoreError::MissingClass(c));
        }
        for (view, block) in self.features.iter().enumerate() {
            for (row, x) in block.rows().into_iter().enumerate() {
                if x.iter().any(|f| !f.is_finite()) {
                    return Err(StoreError::NonFinite { view, index: row });
                }
            }
        }
        Ok(())
    }

    pub fn manifest(&self) -> Manifest {
        let (pool, val, test) = self.split_sizes();
        Manifest {
            name: self.name.clone(),
            format_version: FORMAT_VERSION,
            n: self.n as u64,
            d: self.d as u32,
            v: self.v as u32,
            k: self.k as u32,
            pool_size: pool as u64,
            val_size: val as u64,
            test_size: test as u64,
            class_names: (0..self.k).map(|c| format!("class_{c}")).collect(),
            generator_seed: self.generator_seed,
        }
    }

    /// Serializes to the binary layout. Round-trips bit-exactly.
    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = self.n * 4 + self.n + self.v * self.n * self.d * 4;
        let mut out = Vec::with_capacity(HEADER_LEN + payload);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&(self.d as u32).to_le_bytes());
        out.extend_from_slice(&(self.v as u32).to_le_bytes());
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        for &label in &self.labels {
            out.extend_from_slice(&label.to_le_bytes());
        }
        for &s in &self.split {
            out.push(s as u8);
        }
        for block in &self.features {
            for &x in block.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    /// Parses the binary layout. Every size is checked against the actual
    /// buffer before anything is allocated, so corrupt or hostile headers
    /// cannot trigger huge allocations; any single-byte corruption of the
    /// header is rejected by the magic, version, length, or invariant checks.
    pub fn from_bytes(data: &[u8]) -> Result<Self, StoreError> {
        Self::from_bytes_named(data, "unnamed", None)
    }

    pub fn from_bytes_named(
        data: &[u8],
        name: &str,
        generator_seed: Option<u64>,
    ) -> Result<Self, StoreError> {
        if data.len() < HEADER_LEN {
            return Err(if data.len() >= 4 && data[..4] != MAGIC {
                StoreError::BadMagic
            } else if data.len() < 4 {
                StoreError::BadMagic
            } else {
                StoreError::TruncatedPayload { expected: HEADER_LEN as u128, found: data.len() }
            });
        }
        if data[..4] != MAGIC {
            return Err(StoreError::BadMagic);
        }
        let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(StoreError::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        let n = u64::from_le_bytes(data[8..16].try_into().unwrap());
        let d = u32::from_le_bytes(data[16..20].try_into().unwrap());
        let v = u32::from_le_bytes(data[20..24].try_into().unwrap());
        let k = u32::from_le_bytes(data[24..28].try_into().unwrap());
        if v == 0 {
            return Err(StoreError::InvalidHeader("view count must be >= 1".into()));
        }
        if d == 0 {
            return Err(StoreError::InvalidHeader("dimension must be >= 1".into()));
        }

        // Exact-size check in u128 so hostile headers cannot overflow.
        let n128 = n as u128;
        let expected: u128 = HEADER_LEN as u128
            + n128 * 4
            + n128
            + (v as u128) * n128 * (d as u128) * 4;
        if expected != data.len() as u128 {
            return Err(StoreError::TruncatedPayload { expected, found: data.len() });
        }
        let n = n as usize;
        let d = d as usize;
        let v = v as usize;

        let mut offset = HEADER_LEN;
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            labels.push(u32::from_le_bytes(data[offset..offset + 4].try_into().unwrap()));
            offset += 4;
        }
        let mut split = Vec::with_capacity(n);
        for i in 0..n {
            let tag = data[offset + i];
            split.push(Split::from_byte(tag).ok_or(StoreError::InvalidSplitTag { index: i, tag })?);
        }
        offset += n;
        let mut features = Vec::with_capacity(v);
        for _ in 0..v {
            let mut block = Vec::with_capacity(n * d);
            for _ in 0..n * d {
                block.push(f32::from_le_bytes(data[offset..offset + 4].try_into().unwrap()));
                offset += 4;
            }
            features.push(Array2::from_shape_vec((n, d), block).expect("shape checked"));
        }

        Self::new(name.to_string(), features, labels, split, k as usize, generator_seed)
    }
}

fn manifest_path(store_path: &Path) -> PathBuf {
    let mut os = store_path.as_os_str().to_os_string();
    os.push(".manifest.toml");
    PathBuf::from(os)
}

/// Writes the store and its manifest sidecar. Writers require exclusive
/// access to the path; readers of a completed file are always safe.
pub fn write_store(store: &EmbeddingStore, path: &Path) -> Result<(), StoreError> {
    store.validate()?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&store.to_bytes())?;
    f.flush()?;
    std::fs::write(manifest_path(path), store.manifest().to_toml_string())?;
    Ok(())
}

/// Reads a store, cross-checking the manifest sidecar when present.
pub fn read_store(path: &Path) -> Result<EmbeddingStore, StoreError> {
    let data = std::fs::read(path)?;
    let sidecar = manifest_path(path);
    let (name, gen_seed, manifest) = if sidecar.exists() {
        let m = Manifest::from_toml_str(&std::fs::read_to_string(&sidecar)?)?;
        (m.name.clone(), m.generator_seed, Some(m))
    } else {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        (stem.unwrap_or_else(|| "unnamed".into()), None, None)
    };
    let store = EmbeddingStore::from_bytes_named(&data, &name, gen_seed)?;
    if let Some(m) = manifest {
        let got = store.manifest();
        if (m.n, m.d, m.v, m.k) != (got.n, got.d, got.v, got.k) {
            return Err(StoreError::ManifestMismatch(format!(
                "manifest claims n={} d={} v={} k={}, payload has n={} d={} v={} k={}",
                m.n, m.d, m.v, m.k, got.n, got.d, got.v, got.k
            )));
        }
        if m.format_version != FORMAT_VERSION {
            return Err(StoreError::VersionMismatch { found: m.format_version, expected: FORMAT_VERSION });
        }
        if (m.pool_size, m.val_size, m.test_size) != (got.pool_size, got.val_size, got.test_size) {
            return Err(StoreError::ManifestMismatch(format!(
                "manifest split sizes ({}, {}, {}) != payload ({}, {}, {})",
                m.pool_size, m.val_size, m.test_size, got.pool_size, got.val_size, got.test_size
            )));
        }
    }
    Ok(store)
}
