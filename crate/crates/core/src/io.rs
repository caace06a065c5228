//! Matrix files for embeddings and references.
//!
//! Layout, all little-endian: the magic `WEGLMAT1`, `u32` rows, `u32` cols,
//! `rows * cols` `f64` values in row-major order, then a `u64` byte length
//! followed by that many bytes of UTF-8 JSON metadata.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::EmbeddedDataset;
use crate::reference::Reference;

pub const MAGIC: &[u8; 8] = b"WEGLMAT1";

pub fn encode_matrix(m: ArrayView2<f64>, metadata: &serde_json::Value) -> Result<Vec<u8>> {
    let (rows, cols) = m.dim();
    let rows32 = u32::try_from(rows).map_err(|_| Error::Format(format!("{rows} rows exceed u32")))?;
    let cols32 = u32::try_from(cols).map_err(|_| Error::Format(format!("{cols} cols exceed u32")))?;
    let meta = serde_json::to_vec(metadata)?;
    let mut out = Vec::with_capacity(24 + 8 * m.len() + meta.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rows32.to_le_bytes());
    out.extend_from_slice(&cols32.to_le_bytes());
    for x in m.iter() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("truncated: wanted {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

pub fn decode_matrix(bytes: &[u8]) -> Result<(Array2<f64>, serde_json::Value)> {
    let mut c = Cursor { bytes, pos: 0 };
    if &c.array::<8>().map_err(|_| Error::Format("missing magic".into()))? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let rows = u32::from_le_bytes(c.array()?) as usize;
    let cols = u32::from_le_bytes(c.array()?) as usize;
    let count = rows
        .checked_mul(cols)
        .filter(|n| n.checked_mul(8).is_some())
        .ok_or_else(|| Error::Format("matrix too large".into()))?;
    let data = c.take(count * 8)?;
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    let meta_len = u64::from_le_bytes(c.array()?);
    let meta_len = usize::try_from(meta_len).map_err(|_| Error::Format("metadata too large".into()))?;
    let meta = c.take(meta_len)?;
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    let meta = std::str::from_utf8(meta).map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
    let metadata = serde_json::from_str(meta)?;
    let m = Array2::from_shape_vec((rows, cols), values).expect("length matches shape");
    Ok((m, metadata))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Metadata {
    Embedding {
        name: String,
        labels: Option<Vec<usize>>,
        num_classes: usize,
        config_digest: String,
        ot_solves: usize,
        reference: Reference,
    },
    Reference {
        provenance: crate::reference::Provenance,
        seed: u64,
    },
}

pub fn encode_embedded(ed: &EmbeddedDataset) -> Result<Vec<u8>> {
    let meta = Metadata::Embedding {
        name: ed.name.clone(),
        labels: ed.labels.clone(),
        num_classes: ed.num_classes,
        config_digest: ed.config_digest.clone(),
        ot_solves: ed.ot_solves,
        reference: ed.reference.clone(),
    };
    encode_matrix(ed.vectors.view(), &serde_json::to_value(meta)?)
}

pub fn decode_embedded(bytes: &[u8]) -> Result<EmbeddedDataset> {
    let (vectors, meta) = decode_matrix(bytes)?;
    match serde_json::from_value(meta)? {
        Metadata::Embedding {
            name,
            labels,
            num_classes,
            config_digest,
            ot_solves,
            reference,
        } => {
            if vectors.ncols() != reference.size() * reference.dim() {
                return Err(Error::Format("vector width does not match the reference".into()));
            }
            if labels.as_ref().is_some_and(|l| l.len() != vectors.nrows()) {
                return Err(Error::Format("label count does not match the rows".into()));
            }
            Ok(EmbeddedDataset {
                name,
                vectors,
                labels,
                num_classes,
                reference,
                config_digest,
                ot_solves,
            })
        }
        Metadata::Reference { .. } => Err(Error::Format("file holds a reference, not an embedding".into())),
    }
}

pub fn write_embedded(path: &Path, ed: &EmbeddedDataset) -> Result<()> {
    write_bytes(path, &encode_embedded(ed)?)
}

pub fn read_embedded(path: &Path) -> Result<EmbeddedDataset> {
    decode_embedded(&read_bytes(path)?)
}

pub fn write_reference(path: &Path, r: &Reference) -> Result<()> {
    let meta = Metadata::Reference {
        provenance: r.provenance,
        seed: r.seed,
    };
    write_bytes(path, &encode_matrix(r.points.view(), &serde_json::to_value(meta)?)?)
}

pub fn read_reference(path: &Path) -> Result<Reference> {
    let (points, meta) = decode_matrix(&read_bytes(path)?)?;
    match serde_json::from_value(meta)? {
        Metadata::Reference { provenance, seed } => Reference::new(points, provenance, seed),
        Metadata::Embedding { .. } => Err(Error::Format("file holds an embedding, not a reference".into())),
    }
}

/// Header `f0,...,f{D-1}[,label]`, one row per graph.
pub fn write_csv(path: &Path, vectors: ArrayView2<f64>, labels: Option<&[usize]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != vectors.nrows() {
            return Err(Error::DimensionMismatch {
                expected: vectors.nrows(),
                got: l.len(),
            });
        }
    }
    let mut out = String::new();
    let mut header: Vec<String> = (0..vectors.ncols()).map(|i| format!("f{i}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in vectors.outer_iter().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        if let Some(l) = labels {
            cells.push(l[i].to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{normal_reference, Provenance};
    use ndarray::array;

    fn sample() -> EmbeddedDataset {
        let reference = normal_reference(2, 2, 5).unwrap();
        EmbeddedDataset {
            name: "toy".into(),
            vectors: array![[0.1, -2.5, 1e-300, f64::MAX], [0.0, -0.0, 3.0, 1.0 / 3.0]],
            labels: Some(vec![1, 0]),
            num_classes: 2,
            reference,
            config_digest: "abc".into(),
            ot_solves: 2,
        }
    }

    #[test]
    fn embedded_round_trip_is_bit_exact() {
        let ed = sample();
        let back = decode_embedded(&encode_embedded(&ed).unwrap()).unwrap();
        assert_eq!(back, ed);
        for (a, b) in back.vectors.iter().zip(ed.vectors.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.reference.id(), ed.reference.id());
    }

    #[test]
    fn header_layout() {
        let bytes = encode_matrix(array![[1.0, 2.0]].view(), &serde_json::json!({})).unwrap();
        assert_eq!(&bytes[..8], b"WEGLMAT1");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[32..40], &2u64.to_le_bytes());
        assert_eq!(&bytes[40..], b"{}");
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = encode_embedded(&sample()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_embedded(&bad), Err(Error::Format(_))));
        for cut in [0, 5, 20, 60, bytes.len() - 1] {
            assert!(matches!(decode_embedded(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_embedded(&extra).is_err());
    }

    #[test]
    fn reference_and_csv_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = Reference::new(array![[1.0, 2.0], [3.0, 4.5]], Provenance::Kmeans, 9).unwrap();
        let p = dir.path().join("ref.bin");
        write_reference(&p, &r).unwrap();
        assert_eq!(read_reference(&p).unwrap(), r);
        assert!(read_embedded(&p).is_err());
        assert!(matches!(read_reference(&dir.path().join("none")), Err(Error::MissingFile(_))));

        let c = dir.path().join("x.csv");
        write_csv(&c, array![[0.5, 1.0]].view(), Some(&[3])).unwrap();
        assert_eq!(fs::read_to_string(&c).unwrap(), "f0,f1,label\n0.5,1.0,3\n");
    }
}
