//! Dense sentence-embedding matrices and the hashing baseline embedder.
//!
//! On disk a matrix is two files sharing a base path:
//!
//! * `<base>.f32`: 16-byte little-endian header (`VADE`, u16 version = 1,
//!   u16 reserved = 0, u32 n, u32 dim) followed by `n * dim` f32 values, row-major.
//! * `<base>.ids`: one UTF-8 id per line, line i naming row i.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lexicon::{tokenize, VadLexicon};

pub const MAGIC: &[u8; 4] = b"VADE";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    /// Checks the matrix invariants: `data.len() == ids.len() * dim`, unique ids,
    /// finite values.
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("dim must be positive".to_string()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::Format(format!(
                "{} values do not fill {} rows of width {dim}",
                data.len(),
                ids.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(ids.len());
        for id in &ids {
            if id.contains('\n') || id.contains('\r') {
                return Err(Error::Format(format!("id {id:?} contains a line break")));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::Format(format!("duplicate id {id:?}")));
            }
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            let row = pos / dim;
            return Err(Error::NonFinite {
                row,
                id: ids[row].clone(),
            });
        }
        Ok(EmbeddingMatrix { ids, dim, data })
    }

    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f32>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(1);
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::Format(format!("row {i} has a different width than row 0")));
        }
        Self::new(ids, dim, rows.into_iter().flatten().collect())
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Map from id to row index.
    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    /// Serializes the binary `.f32` payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    /// Parses a `.f32` payload together with its ids.
    pub fn from_bytes(bytes: &[u8], ids: Vec<String>) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("header truncated ({} bytes)", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic".to_string()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let reserved = u16::from_le_bytes([bytes[6], bytes[7]]);
        if reserved != 0 {
            return Err(Error::Format("reserved header bytes are not zero".to_string()));
        }
        let n = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let dim = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let expected = n
            .checked_mul(dim)
            .and_then(|c| c.checked_mul(4))
            .ok_or_else(|| Error::Format("header sizes overflow".to_string()))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "payload holds {} bytes, header promises {expected} ({n} x {dim})",
                payload.len()
            )));
        }
        if ids.len() != n {
            return Err(Error::Format(format!("ids file lists {} ids, header says {n}", ids.len())));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Self::new(ids, dim, data)
    }
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn matrix_path(base: &Path) -> PathBuf {
    with_ext(base, "f32")
}

pub fn ids_path(base: &Path) -> PathBuf {
    with_ext(base, "ids")
}

/// Writes `<base>.f32` and `<base>.ids`.
pub fn write_embeddings(matrix: &EmbeddingMatrix, base: &Path) -> Result<()> {
    let f32_path = matrix_path(base);
    fs::write(&f32_path, matrix.to_bytes()).map_err(|e| Error::io(&f32_path, e))?;
    let ids = ids_path(base);
    let mut file = std::io::BufWriter::new(fs::File::create(&ids).map_err(|e| Error::io(&ids, e))?);
    for id in &matrix.ids {
        writeln!(file, "{id}").map_err(|e| Error::io(&ids, e))?;
    }
    file.flush().map_err(|e| Error::io(&ids, e))?;
    Ok(())
}

pub fn read_embeddings(base: &Path) -> Result<EmbeddingMatrix> {
    let f32_path = matrix_path(base);
    let bytes = fs::read(&f32_path).map_err(|e| Error::io(&f32_path, e))?;
    let ids_file = ids_path(base);
    let reader = BufReader::new(fs::File::open(&ids_file).map_err(|e| Error::io(&ids_file, e))?);
    let ids = reader
        .lines()
        .collect::<std::io::Result<Vec<String>>>()
        .map_err(|e| Error::io(&ids_file, e))?;
    EmbeddingMatrix::from_bytes(&bytes, ids)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Bag-of-words feature hashing with an optional lexicon-derived VAD suffix.
#[derive(Debug, Clone)]
pub struct BaselineEmbedder<'a> {
    dim: usize,
    seed: u64,
    lexicon: Option<&'a VadLexicon>,
}

pub const MIN_BASELINE_DIM: usize = 8;

impl<'a> BaselineEmbedder<'a> {
    pub fn new(dim: usize, seed: u64, lexicon: Option<&'a VadLexicon>) -> Result<Self> {
        if dim < MIN_BASELINE_DIM {
            return Err(Error::InvalidInput(format!(
                "baseline embedding dim must be at least {MIN_BASELINE_DIM}, got {dim}"
            )));
        }
        Ok(BaselineEmbedder { dim, seed, lexicon })
    }

    /// Output width: `dim`, plus 3 when a lexicon is attached.
    pub fn width(&self) -> usize {
        self.dim + if self.lexicon.is_some() { 3 } else { 0 }
    }

    pub fn embed(&self, text: &str) -> Vec<f32> {
        baseline_embed(text, self.dim, self.seed, self.lexicon)
    }

    /// Embeds texts in parallel; row i is `texts[i]`.
    pub fn embed_all<S: AsRef<str> + Sync>(&self, ids: Vec<String>, texts: &[S]) -> Result<EmbeddingMatrix> {
        let rows: Vec<Vec<f32>> = texts.par_iter().map(|t| self.embed(t.as_ref())).collect();
        let width = self.width();
        EmbeddingMatrix::new(ids, width, rows.into_iter().flatten().collect())
    }
}

/// Hashes each token into one of `dim` buckets, L2-normalizes the counts and,
/// if a lexicon is given, appends the mean V/A/D of the tokens it knows
/// (0.5 for every dimension when none match).
pub fn baseline_embed(text: &str, dim: usize, seed: u64, lexicon: Option<&VadLexicon>) -> Vec<f32> {
    let tokens = tokenize(text);
    let mut counts = vec![0.0f64; dim];
    for tok in &tokens {
        let bucket = ((fnv1a(tok.as_bytes()) ^ seed) % dim as u64) as usize;
        counts[bucket] += 1.0;
    }
    let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut out: Vec<f32> = if norm > 0.0 {
        counts.iter().map(|c| (c / norm) as f32).collect()
    } else {
        vec![0.0; dim]
    };
    if let Some(lex) = lexicon {
        let mut sum = [0.0f64; 3];
        let mut hits = 0usize;
        for tok in &tokens {
            if let Some(vad) = lex.lookup_normalized(tok) {
                for (s, x) in sum.iter_mut().zip(vad.as_array()) {
                    *s += x;
                }
                hits += 1;
            }
        }
        if hits == 0 {
            out.extend([0.5f32; 3]);
        } else {
            out.extend(sum.iter().map(|s| (s / hits as f64) as f32));
        }
    }
    out
}
