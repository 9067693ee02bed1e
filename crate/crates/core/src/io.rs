//! File formats: the `raw_f64` binary layout, Matrix Market text files and
//! the on-disk layout of a factorization.
//!
//! `raw_f64` is a 16-byte header (`b"RMAP"`, `u32` rows, `u32` cols, `u32`
//! reserved, all little-endian) followed by `rows·cols` little-endian `f64`
//! values in column-major order.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cssd::Factorization;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseColMatrix};

pub const RAW_MAGIC: &[u8; 4] = b"RMAP";
pub const RAW_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    MatrixMarket,
    RawF64,
}

impl MatrixFormat {
    /// `.mtx` means Matrix Market; anything else is read as `raw_f64`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("mtx") => MatrixFormat::MatrixMarket,
            _ => MatrixFormat::RawF64,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix_market" | "mtx" => Ok(MatrixFormat::MatrixMarket),
            "raw_f64" | "raw" => Ok(MatrixFormat::RawF64),
            _ => Err(Error::InvalidArgument(format!("unknown matrix format {s:?}"))),
        }
    }
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset: offset as u64,
        message: message.into(),
    }
}

pub fn encode_raw(a: &DenseMatrix) -> Result<Vec<u8>> {
    let m = u32::try_from(a.rows())
        .map_err(|_| Error::InvalidArgument("row count does not fit in u32".into()))?;
    let n = u32::try_from(a.cols())
        .map_err(|_| Error::InvalidArgument("column count does not fit in u32".into()))?;
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + 8 * a.as_slice().len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&m.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in a.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_raw(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < RAW_HEADER_LEN {
        return Err(parse_err(bytes.len(), format!("truncated header: {} of {RAW_HEADER_LEN} bytes", bytes.len())));
    }
    if &bytes[..4] != RAW_MAGIC {
        return Err(parse_err(0, "bad magic, expected \"RMAP\""));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (m, n) = (word(4), word(8));
    if word(12) != 0 {
        return Err(parse_err(12, "reserved header word must be zero"));
    }
    let payload = m
        .checked_mul(n)
        .and_then(|k| k.checked_mul(8))
        .ok_or_else(|| parse_err(4, format!("dimensions {m}×{n} overflow")))?;
    let expected = RAW_HEADER_LEN + payload;
    if bytes.len() < expected {
        let at = RAW_HEADER_LEN + (bytes.len() - RAW_HEADER_LEN) / 8 * 8;
        return Err(parse_err(at, format!("truncated data: expected {expected} bytes, found {}", bytes.len())));
    }
    if bytes.len() > expected {
        return Err(parse_err(expected, "trailing bytes after matrix data"));
    }
    let data = bytes[RAW_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseMatrix::new(m, n, data)
}

pub fn write_raw(path: &Path, a: &DenseMatrix) -> Result<()> {
    fs::write(path, encode_raw(a)?)?;
    Ok(())
}

pub fn read_raw(path: &Path) -> Result<DenseMatrix> {
    decode_raw(&fs::read(path)?)
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Parsed Matrix Market content as `(rows, cols, triplets)`.
struct MmData {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

fn parse_mm(text: &str) -> Result<MmData> {
    let mut lines = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        lines.push((offset, line.trim_end_matches(['\n', '\r'])));
        offset += line.len();
    }
    let mut it = lines.into_iter();
    let (_, banner) = it.next().ok_or_else(|| parse_err(0, "empty Matrix Market file"))?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(0, "missing %%MatrixMarket matrix banner"));
    }
    let coordinate = match words[2].as_str() {
        "coordinate" => true,
        "array" => false,
        f => return Err(parse_err(0, format!("unsupported layout {f:?}"))),
    };
    if !matches!(words[3].as_str(), "real" | "integer" | "double") {
        return Err(parse_err(0, format!("unsupported field {:?}", words[3])));
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        s => return Err(parse_err(0, format!("unsupported symmetry {s:?}"))),
    };

    let mut body = it.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_at, size_line) = body.next().ok_or_else(|| parse_err(offset, "missing size line"))?;
    let size: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(size_at, format!("bad size token {t:?}"))))
        .collect::<Result<_>>()?;
    let (rows, cols) = match (coordinate, size.as_slice()) {
        (true, [r, c, _]) | (false, [r, c]) => (*r, *c),
        _ => return Err(parse_err(size_at, "wrong number of size fields")),
    };
    if symmetry != Symmetry::General && rows != cols {
        return Err(parse_err(size_at, "symmetric storage needs a square matrix"));
    }
    rows.checked_mul(cols)
        .ok_or_else(|| parse_err(size_at, format!("dimensions {rows}×{cols} overflow")))?;

    let value = |at: usize, t: &str| -> Result<f64> {
        let v: f64 = t.parse().map_err(|_| parse_err(at, format!("bad value {t:?}")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(parse_err(at, "non-finite value"))
        }
    };
    let mut entries = Vec::new();
    let mut push = |i: usize, j: usize, v: f64| {
        entries.push((i, j, v));
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => entries.push((j, i, v)),
                Symmetry::SkewSymmetric => entries.push((j, i, -v)),
            }
        }
    };
    if coordinate {
        let nnz = size[2];
        let mut seen = 0;
        for (at, line) in body {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(parse_err(at, "coordinate entry needs row, column and value"));
            }
            let idx = |s: &str, lim: usize| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(k) if (1..=lim).contains(&k) => Ok(k - 1),
                    _ => Err(parse_err(at, format!("index {s:?} out of range 1..={lim}"))),
                }
            };
            let (i, j) = (idx(t[0], rows)?, idx(t[1], cols)?);
            push(i, j, value(at, t[2])?);
            seen += 1;
        }
        if seen != nnz {
            return Err(parse_err(offset, format!("expected {nnz} entries, found {seen}")));
        }
    } else {
        // Column-major; symmetric storage lists the lower triangle only.
        let mut slots = Vec::new();
        for j in 0..cols {
            let first = if symmetry == Symmetry::General {
                0
            } else if symmetry == Symmetry::Symmetric {
                j
            } else {
                j + 1
            };
            for i in first..rows {
                slots.push((i, j));
            }
        }
        let mut tokens = body.flat_map(|(at, l)| l.split_whitespace().map(move |t| (at, t)));
        for &(i, j) in &slots {
            let (at, t) = tokens
                .next()
                .ok_or_else(|| parse_err(offset, format!("expected {} values", slots.len())))?;
            push(i, j, value(at, t)?);
        }
        if let Some((at, _)) = tokens.next() {
            return Err(parse_err(at, "extra values after array data"));
        }
    }
    Ok(MmData { rows, cols, entries })
}

/// Reads either Matrix Market layout into a dense matrix. Repeated
/// coordinate entries are summed.
pub fn read_matrix_market_str(text: &str) -> Result<DenseMatrix> {
    let mm = parse_mm(text)?;
    let mut a = vec![0.0; mm.rows * mm.cols];
    for (i, j, v) in mm.entries {
        a[j * mm.rows + i] += v;
    }
    DenseMatrix::new(mm.rows, mm.cols, a)
}

/// Reads a Matrix Market file as a sparse matrix, dropping explicit zeros.
pub fn read_sparse_matrix_market_str(text: &str) -> Result<SparseColMatrix> {
    let mm = parse_mm(text)?;
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mm.cols];
    for (i, j, v) in mm.entries {
        match cols[j].iter_mut().find(|(r, _)| *r == i) {
            Some(e) => e.1 += v,
            None => cols[j].push((i, v)),
        }
    }
    SparseColMatrix::from_columns(mm.rows, cols)
}

pub fn matrix_market_array(a: &DenseMatrix) -> String {
    let mut s = String::with_capacity(24 * a.as_slice().len() + 64);
    s.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", a.rows(), a.cols());
    for v in a.as_slice() {
        let _ = writeln!(s, "{v:e}");
    }
    s
}

pub fn matrix_market_coordinate(v: &SparseColMatrix) -> String {
    let mut s = String::with_capacity(32 * v.nnz() + 64);
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", v.rows(), v.cols(), v.nnz());
    for j in 0..v.cols() {
        let (rows, vals) = v.col(j);
        for (r, x) in rows.iter().zip(vals) {
            let _ = writeln!(s, "{} {} {x:e}", r + 1, j + 1);
        }
    }
    s
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DenseMatrix> {
    match format {
        MatrixFormat::RawF64 => read_raw(path),
        MatrixFormat::MatrixMarket => read_matrix_market_str(&fs::read_to_string(path)?),
    }
}

pub fn save_matrix(path: &Path, a: &DenseMatrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::RawF64 => write_raw(path, a),
        MatrixFormat::MatrixMarket => {
            fs::write(path, matrix_market_array(a))?;
            Ok(())
        }
    }
}

pub const BASIS_FILE: &str = "basis.rmap";
pub const COEFFS_FILE: &str = "coeffs.mtx";
pub const SIDECAR_FILE: &str = "factorization.json";

/// Metadata stored next to the factor files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSidecar {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub nnz: usize,
    pub selected: Vec<usize>,
    pub delta_d: f64,
    pub achieved_delta: f64,
    pub seed: u64,
    pub zero_columns: Vec<usize>,
}

/// Writes `basis.rmap`, `coeffs.mtx` and `factorization.json` into `dir`,
/// creating it if needed. Returns the three paths.
pub fn save_factorization(dir: &Path, f: &Factorization) -> Result<[PathBuf; 3]> {
    fs::create_dir_all(dir)?;
    let paths = [dir.join(BASIS_FILE), dir.join(COEFFS_FILE), dir.join(SIDECAR_FILE)];
    write_raw(&paths[0], &f.basis)?;
    fs::write(&paths[1], matrix_market_coordinate(&f.coeffs))?;
    let sidecar = FactorSidecar {
        rows: f.rows(),
        cols: f.cols(),
        rank: f.rank(),
        nnz: f.nnz(),
        selected: f.selected.clone(),
        delta_d: f.delta_d,
        achieved_delta: f.achieved_delta,
        seed: f.seed,
        zero_columns: f.zero_columns.clone(),
    };
    let mut file = fs::File::create(&paths[2])?;
    serde_json::to_writer_pretty(&mut file, &sidecar)?;
    file.write_all(b"\n")?;
    Ok(paths)
}

pub fn load_factorization(dir: &Path) -> Result<Factorization> {
    let basis = read_raw(&dir.join(BASIS_FILE))?;
    let coeffs = read_sparse_matrix_market_str(&fs::read_to_string(dir.join(COEFFS_FILE))?)?;
    let sidecar: FactorSidecar = serde_json::from_slice(&fs::read(dir.join(SIDECAR_FILE))?)?;
    if sidecar.rows != basis.rows() || sidecar.cols != coeffs.cols() || sidecar.rank != basis.cols() {
        return Err(Error::DimensionMismatch(format!(
            "sidecar describes {}×{} rank {}, files hold {}×{} rank {}",
            sidecar.rows,
            sidecar.cols,
            sidecar.rank,
            basis.rows(),
            coeffs.cols(),
            basis.cols()
        )));
    }
    let mut f = Factorization::new(
        basis,
        coeffs,
        sidecar.selected,
        sidecar.delta_d,
        sidecar.achieved_delta,
        sidecar.seed,
    )?;
    f.zero_columns = sidecar.zero_columns;
    Ok(f)
}
