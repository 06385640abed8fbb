//! Dense embedding matrices and their on-disk format.
//!
//! A matrix is stored as two files. The vector file holds an 8-byte ASCII
//! magic `COIREMB1`, the row count and dimension as little-endian `u32`, then
//! `rows * dim` little-endian `f32` values in row-major order. The sidecar ids
//! file is UTF-8 text with one row id per line, line `i` naming row `i`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"COIREMB1";
const HEADER_LEN: u64 = 16;

/// Row-labelled `f32` matrix. Immutable once built; every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDim);
        }
        if data.len() != ids.len() * dim {
            return Err(Error::ShapeMismatch {
                len: data.len(),
                rows: ids.len(),
                dim,
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            let row = pos / dim;
            return Err(Error::NonFinite {
                row,
                id: ids[row].clone(),
                col: pos % dim,
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateRowId(id.clone()));
            }
        }
        Ok(Self { ids, dim, data, index })
    }

    /// Builds a matrix from `(id, vector)` rows; all vectors must share one length.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (id, v) in rows {
            let d = *dim.get_or_insert(v.len());
            if v.len() != d {
                return Err(Error::DimMismatch {
                    expected: d,
                    actual: v.len(),
                });
            }
            ids.push(id.into());
            data.extend_from_slice(&v);
        }
        Self::new(ids, dim.unwrap_or(0), data)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.position(id).map(|i| self.row(i))
    }

    pub fn require(&self, id: &str) -> Result<&[f32]> {
        self.get(id).ok_or_else(|| Error::MissingVector(id.to_string()))
    }

    /// New matrix holding the rows for `ids`, in that order.
    pub fn select<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            data.extend_from_slice(self.require(id.as_ref())?);
        }
        Self::new(ids.iter().map(|s| s.as_ref().to_string()).collect(), self.dim, data)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> + '_ {
        self.ids
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(id, row)| (id.as_str(), row))
    }

    /// Serializes the vector file payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN as usize + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn save(&self, vec_path: &Path, ids_path: &Path) -> Result<()> {
        std::fs::write(vec_path, self.to_bytes()).map_err(|e| Error::io(vec_path, e))?;
        let file = File::create(ids_path).map_err(|e| Error::io(ids_path, e))?;
        let mut w = BufWriter::new(file);
        for id in &self.ids {
            writeln!(w, "{id}").map_err(|e| Error::io(ids_path, e))?;
        }
        w.flush().map_err(|e| Error::io(ids_path, e))
    }

    pub fn load(vec_path: &Path, ids_path: &Path) -> Result<Self> {
        let ids = read_ids(ids_path)?;
        let mut bytes = Vec::new();
        File::open(vec_path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(vec_path, e))?;
        Self::from_bytes(&bytes, ids)
    }

    /// Parses a vector file payload against the ids from its sidecar.
    pub fn from_bytes(bytes: &[u8], ids: Vec<String>) -> Result<Self> {
        if bytes.len() < HEADER_LEN as usize {
            if bytes.len() >= 8 && &bytes[..8] != MAGIC {
                return Err(Error::BadMagic);
            }
            return Err(Error::Truncated {
                offset: bytes.len() as u64,
                expected: HEADER_LEN,
            });
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::BadMagic);
        }
        let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        if dim == 0 {
            return Err(Error::ZeroDim);
        }
        if rows != ids.len() {
            return Err(Error::CountMismatch {
                header: rows,
                ids: ids.len(),
            });
        }
        let expected = HEADER_LEN + (rows as u64) * (dim as u64) * 4;
        if (bytes.len() as u64) < expected {
            return Err(Error::Truncated {
                offset: bytes.len() as u64,
                expected,
            });
        }
        let data: Vec<f32> = bytes[HEADER_LEN as usize..expected as usize]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(ids, dim, data)
    }
}

/// Reads a sidecar ids file. Every line is one id; only a final newline is dropped.
pub fn read_ids(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect())
}

/// Default sidecar location for a vector file: same stem, `.ids` extension.
pub fn default_ids_path(vec_path: &Path) -> PathBuf {
    vec_path.with_extension("ids")
}

pub fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum()
}

pub fn norm(u: &[f32]) -> f64 {
    dot(u, u).sqrt()
}

fn check_dims(u: &[f32], v: &[f32]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(())
}

/// Cosine similarity, accumulated in `f64`.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    check_dims(u, v)?;
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn euclidean(u: &[f32], v: &[f32]) -> Result<f64> {
    check_dims(u, v)?;
    Ok(squared_euclidean(u, v).sqrt())
}

pub(crate) fn squared_euclidean(u: &[f32], v: &[f32]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum()
}
