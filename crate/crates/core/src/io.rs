//! File formats for latent sets, fitted models and scatter data.
//!
//! Binary latent files are a 24-byte little-endian header followed by the
//! row-major binary64 payload:
//!
//! | offset | size | field                 |
//! |--------|------|-----------------------|
//! | 0      | 4    | magic `LATV`          |
//! | 4      | 4    | version (u32) = 1     |
//! | 8      | 8    | n, row count (u64)    |
//! | 16     | 8    | d, dimension (u64)    |
//! | 24     | n*d*8| values (f64)          |
//!
//! CSV latent files hold one comma-separated row per vector; a single
//! non-numeric first line is taken as a header and skipped.
//!
//! Models are JSON documents tagged by `kind`. PMFS models store integer
//! counts per occupied partition together with `n`, so reloading is exact.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::GmmModel;
use crate::latent::LatentSet;
use crate::linalg::SquareMatrix;
use crate::pmfs::PmfsModel;
use crate::quantizer::{PartitionKey, QuantizationGrid};
use crate::scalar::Scalar;

pub const LATENT_MAGIC: [u8; 4] = *b"LATV";
pub const LATENT_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentFormat {
    Csv,
    Binary,
}

impl LatentFormat {
    /// `.csv` (any case) selects CSV; everything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::Binary,
        }
    }
}

pub fn load_latents<T: Scalar>(path: impl AsRef<Path>, format: LatentFormat) -> Result<LatentSet<T>> {
    let mut bytes = Vec::new();
    File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    match format {
        LatentFormat::Binary => decode_binary(&bytes),
        LatentFormat::Csv => decode_csv(&bytes),
    }
}

pub fn save_latents<T: Scalar>(set: &LatentSet<T>, path: impl AsRef<Path>, format: LatentFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    match format {
        LatentFormat::Binary => out.write_all(&encode_binary(set))?,
        LatentFormat::Csv => {
            for row in set.rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn encode_binary<T: Scalar>(set: &LatentSet<T>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + set.as_slice().len() * 8);
    buf.extend_from_slice(&LATENT_MAGIC);
    buf.extend_from_slice(&LATENT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(set.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(set.dim() as u64).to_le_bytes());
    for v in set.as_slice() {
        buf.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    buf
}

pub fn decode_binary<T: Scalar>(bytes: &[u8]) -> Result<LatentSet<T>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "latent file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if bytes[0..4] != LATENT_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}, expected \"LATV\"", &bytes[0..4])));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8-byte slice"));
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4-byte slice"));
    if version != LATENT_VERSION {
        return Err(Error::Format(format!("unsupported latent file version {version}")));
    }
    let (n, d) = (u64_at(8), u64_at(16));
    if d == 0 {
        return Err(Error::Format("latent dimension is 0".into()));
    }
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .filter(|&len| len == (bytes.len() - HEADER_LEN) as u64)
        .ok_or_else(|| {
            Error::Format(format!(
                "payload is {} bytes, header declares {n} x {d} binary64 values",
                bytes.len() - HEADER_LEN
            ))
        })?;
    let d = d as usize;
    let mut data = Vec::with_capacity(expected as usize / 8);
    for (idx, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        if !v.is_finite() {
            return Err(Error::NonFinite { row: idx / d, col: idx % d });
        }
        data.push(T::from_f64_lossy(v));
    }
    LatentSet::new(data, d)
}

fn decode_csv<T: Scalar>(bytes: &[u8]) -> Result<LatentSet<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut data: Vec<T> = Vec::new();
    let mut d: Option<usize> = None;
    let mut row = 0usize;
    for (record_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let line = record.position().map_or(record_idx as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if record_idx == 0 => continue,
            Err(e) => return Err(Error::Format(format!("line {line}: {e}"))),
        };
        match d {
            None => d = Some(values.len()),
            Some(width) if width != values.len() => {
                return Err(Error::Format(format!(
                    "line {line}: expected {width} fields, found {}",
                    values.len()
                )))
            }
            Some(_) => {}
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        data.extend(values.into_iter().map(T::from_f64_lossy));
        row += 1;
    }
    let d = d.ok_or_else(|| Error::Format("CSV latent file holds no data rows".into()))?;
    LatentSet::new(data, d)
}

/// A model read back from disk.
#[derive(Debug, Clone)]
pub enum SavedModel<T> {
    Pmfs(PmfsModel<T>),
    Gmm(GmmModel<T>),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelDoc {
    Pmfs(PmfsDoc),
    Gmm(GmmDoc),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PmfsDoc {
    version: u32,
    k: usize,
    mins: Vec<f64>,
    maxes: Vec<f64>,
    n: u64,
    partitions: Vec<PartitionDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionDoc {
    key: Vec<u32>,
    count: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GmmDoc {
    version: u32,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<Vec<f64>>>,
}

fn to_f64s<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn from_f64s<T: Scalar>(v: Vec<f64>) -> Vec<T> {
    v.into_iter().map(T::from_f64_lossy).collect()
}

impl<T: Scalar> From<&PmfsModel<T>> for ModelDoc {
    fn from(m: &PmfsModel<T>) -> Self {
        ModelDoc::Pmfs(PmfsDoc {
            version: MODEL_VERSION,
            k: m.grid().k(),
            mins: to_f64s(m.grid().mins()),
            maxes: to_f64s(m.grid().maxes()),
            n: m.n(),
            partitions: m
                .counts()
                .map(|(key, count)| PartitionDoc {
                    key: key.indices().to_vec(),
                    count,
                })
                .collect(),
        })
    }
}

impl<T: Scalar> From<&GmmModel<T>> for ModelDoc {
    fn from(m: &GmmModel<T>) -> Self {
        ModelDoc::Gmm(GmmDoc {
            version: MODEL_VERSION,
            weights: to_f64s(m.weights()),
            means: m.means().iter().map(|mu| to_f64s(mu)).collect(),
            covariances: m
                .covariances()
                .iter()
                .map(|c| c.to_rows().iter().map(|r| to_f64s(r)).collect())
                .collect(),
        })
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {v}")));
    }
    Ok(())
}

impl ModelDoc {
    fn into_model<T: Scalar>(self) -> Result<SavedModel<T>> {
        match self {
            ModelDoc::Pmfs(doc) => {
                check_version(doc.version)?;
                let grid = QuantizationGrid::new(from_f64s(doc.mins), from_f64s(doc.maxes), doc.k)?;
                let entries = doc
                    .partitions
                    .into_iter()
                    .map(|p| (PartitionKey::new(p.key), p.count))
                    .collect();
                Ok(SavedModel::Pmfs(PmfsModel::from_counts(grid, entries, doc.n)?))
            }
            ModelDoc::Gmm(doc) => {
                check_version(doc.version)?;
                let covariances = doc
                    .covariances
                    .into_iter()
                    .map(|rows| SquareMatrix::from_rows(&rows.into_iter().map(from_f64s).collect::<Vec<_>>()))
                    .collect::<Result<Vec<_>>>()?;
                let means = doc.means.into_iter().map(from_f64s).collect();
                Ok(SavedModel::Gmm(GmmModel::new(from_f64s(doc.weights), means, covariances)?))
            }
        }
    }
}

fn write_doc(doc: &ModelDoc, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(doc).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn save_pmfs<T: Scalar>(model: &PmfsModel<T>, path: impl AsRef<Path>) -> Result<()> {
    write_doc(&model.into(), path.as_ref())
}

pub fn save_gmm<T: Scalar>(model: &GmmModel<T>, path: impl AsRef<Path>) -> Result<()> {
    write_doc(&model.into(), path.as_ref())
}

pub fn save_model<T: Scalar>(model: &SavedModel<T>, path: impl AsRef<Path>) -> Result<()> {
    match model {
        SavedModel::Pmfs(m) => save_pmfs(m, path),
        SavedModel::Gmm(m) => save_gmm(m, path),
    }
}

/// Parses a model document; never returns a partially built model.
pub fn parse_model<T: Scalar>(text: &str) -> Result<SavedModel<T>> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
    doc.into_model()
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<SavedModel<T>> {
    parse_model(&std::fs::read_to_string(path.as_ref())?)
}

/// Writes `label,x,y` rows for each named 2D set, in input order.
pub fn write_scatter<T: Scalar, S: AsRef<str>>(sets: &[(S, LatentSet<T>)], path: impl AsRef<Path>) -> Result<()> {
    for (name, set) in sets {
        if set.dim() != 2 {
            return Err(Error::InvalidArgument(format!(
                "scatter set '{}' has dimension {}, expected 2",
                name.as_ref(),
                set.dim()
            )));
        }
    }
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| Error::Format(e.to_string()))?;
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["label", "x", "y"]).map_err(csv_err)?;
    for (name, set) in sets {
        for row in set.rows() {
            w.write_record([name.as_ref(), &row[0].as_f64().to_string(), &row[1].as_f64().to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_set(n: usize, d: usize, seed: u64) -> LatentSet<f64> {
        let mut r = rng::seeded(seed);
        LatentSet::new((0..n * d).map(|_| r.random_range(-1e3..1e3)).collect(), d).unwrap()
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.bin");
        let set = random_set(100, 8, 1);
        save_latents(&set, &path, LatentFormat::Binary).unwrap();
        let back: LatentSet<f64> = load_latents(&path, LatentFormat::Binary).unwrap();
        assert!(set.as_slice().iter().zip(back.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.dim(), 8);
    }

    #[test]
    fn zero_row_binary_is_header_only() {
        let set = LatentSet::<f64>::empty(3).unwrap();
        let bytes = encode_binary(&set);
        assert_eq!(bytes.len(), 24);
        let back: LatentSet<f64> = decode_binary(&bytes).unwrap();
        assert_eq!((back.len(), back.dim()), (0, 3));
    }

    #[test]
    fn binary_rejects_corruption() {
        let mut bytes = encode_binary(&random_set(2, 2, 2));
        assert!(decode_binary::<f64>(&bytes[..30]).is_err());
        assert!(decode_binary::<f64>(&[]).is_err());
        bytes[4] = 2;
        assert!(decode_binary::<f64>(&bytes).unwrap_err().to_string().contains("version"));
        bytes[0] = b'X';
        assert!(decode_binary::<f64>(&bytes).unwrap_err().to_string().contains("magic"));

        let mut bytes = encode_binary(&random_set(2, 2, 2));
        bytes[24 + 3 * 8..24 + 4 * 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_binary::<f64>(&bytes), Err(Error::NonFinite { row: 1, col: 1 })));
    }

    #[test]
    fn csv_single_line() {
        let s: LatentSet<f64> = decode_csv(b"1.5,2.6,8").unwrap();
        assert_eq!(s.as_slice(), &[1.5, 2.6, 8.0]);
    }

    #[test]
    fn csv_header_detection_and_errors() {
        let s: LatentSet<f64> = decode_csv(b"a,b\n1,2\n3,4\n").unwrap();
        assert_eq!((s.len(), s.dim()), (2, 2));
        let err = decode_csv::<f64>(b"1,2\n3\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = decode_csv::<f64>(b"1,2\n3,x\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(matches!(decode_csv::<f64>(b"1,2\n3,inf\n"), Err(Error::NonFinite { row: 1, col: 1 })));
        assert!(decode_csv::<f64>(b"").is_err());
        assert!(decode_csv::<f64>(b"x,y\n").is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.csv");
        let set = random_set(50, 4, 3);
        save_latents(&set, &path, LatentFormat::Csv).unwrap();
        let back: LatentSet<f64> = load_latents(&path, LatentFormat::Csv).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.bin");
        std::fs::write(&path, b"").unwrap();
        assert!(load_latents::<f64>(&path, LatentFormat::Binary).is_err());
        assert!(load_latents::<f64>(&path, LatentFormat::Csv).is_err());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(LatentFormat::from_path(Path::new("a/b.CSV")), LatentFormat::Csv);
        assert_eq!(LatentFormat::from_path(Path::new("a/b.latv")), LatentFormat::Binary);
    }

    #[test]
    fn pmfs_round_trip_preserves_counts_and_samples() {
        let set = random_set(300, 3, 4);
        let model = PmfsModel::fit(&set, 5).unwrap();
        let text = serde_json::to_string(&ModelDoc::from(&model)).unwrap();
        let SavedModel::Pmfs(back) = parse_model::<f64>(&text).unwrap() else {
            panic!("wrong kind")
        };
        assert_eq!(model.counts().collect::<Vec<_>>(), back.counts().collect::<Vec<_>>());
        assert_eq!(model.weights_map(), back.weights_map());
        assert_eq!(model.sample(500, 8), back.sample(500, 8));
    }

    #[test]
    fn gmm_round_trip_preserves_likelihood() {
        let set = random_set(200, 2, 5);
        let fit = crate::gmm::fit_gmm(&set, 3, &crate::gmm::EmConfig::default()).unwrap();
        let text = serde_json::to_string(&ModelDoc::from(&fit.model)).unwrap();
        let SavedModel::Gmm(back) = parse_model::<f64>(&text).unwrap() else {
            panic!("wrong kind")
        };
        let before = fit.model.log_likelihood(&set).unwrap();
        let after = back.log_likelihood(&set).unwrap();
        assert!((before - after).abs() <= 1e-12 * before.abs().max(1.0));
    }

    #[test]
    fn malformed_models_are_rejected() {
        let set = random_set(30, 2, 6);
        let model = PmfsModel::fit(&set, 3).unwrap();
        let text = serde_json::to_string(&ModelDoc::from(&model)).unwrap();
        assert!(parse_model::<f64>(&text[..text.len() / 2]).is_err());
        assert!(parse_model::<f64>(&text.replace("\"pmfs\"", "\"flow\"")).is_err());
        // Counts no longer sum to n.
        assert!(parse_model::<f64>(&text.replace("\"n\":30", "\"n\":31")).is_err());
        assert!(parse_model::<f64>("").is_err());
    }

    #[test]
    fn scatter_rows_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_scatter::<f64, &str>(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "label,x,y\n");

        let one = LatentSet::from_rows(&[[1.0, 2.0]]).unwrap();
        write_scatter(&[("a", one)], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);

        let sets = vec![("x", random_set(17, 2, 1)), ("y", random_set(5, 2, 2))];
        write_scatter(&sets, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1 + 22);

        assert!(write_scatter(&[("bad", random_set(3, 3, 1))], &path).is_err());
    }
}
