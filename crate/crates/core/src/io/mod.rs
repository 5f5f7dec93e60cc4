//! On-disk formats.
//!
//! * FMAT: dense feature or weight matrices. `b"FMAT"`, version `u8` (= 1),
//!   rows `u32`, cols `u32`, then `rows * cols` row-major `f64`, all little-endian.
//! * Feature CSV: header of column labels, one row per sample.
//! * GPRM: model parameters. `b"GPRM"`, version `u8` (= 1), tensor count `u32`,
//!   then per tensor: name length `u16`, UTF-8 name, rank `u32`, dims `u32 * rank`,
//!   row-major `f64` data. Tensor order is fixed by each model type.
//! * PGM: binary greyscale (`P5`, maxval 255).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const FMAT_MAGIC: &[u8; 4] = b"FMAT";
pub const GPRM_MAGIC: &[u8; 4] = b"GPRM";
pub const FORMAT_VERSION: u8 = 1;

pub fn write_fmat<T: Scalar, W: Write>(mut w: W, m: &Matrix<T>) -> Result<()> {
    w.write_all(FMAT_MAGIC)?;
    w.write_all(&[FORMAT_VERSION])?;
    w.write_all(&dim_u32(m.rows())?.to_le_bytes())?;
    w.write_all(&dim_u32(m.cols())?.to_le_bytes())?;
    for &x in m.as_slice() {
        w.write_all(&x.as_f64().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fmat<T: Scalar, R: Read>(mut r: R) -> Result<Matrix<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FMAT_MAGIC {
        return Err(Error::Format("not an FMAT file".into()));
    }
    check_version(&mut r, "FMAT")?;
    let rows = read_u32(&mut r)? as usize;
    let cols = read_u32(&mut r)? as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(T::of(read_f64(&mut r)?));
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after FMAT payload".into()));
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn save_fmat<T: Scalar>(path: &Path, m: &Matrix<T>) -> Result<()> {
    write_fmat(BufWriter::new(File::create(path)?), m)
}

pub fn load_fmat<T: Scalar>(path: &Path) -> Result<Matrix<T>> {
    read_fmat(BufReader::new(File::open(path)?))
}

/// Feature CSV: header row of labels, then one row per sample.
pub fn write_feature_csv<T: Scalar, W: Write>(
    w: W,
    labels: &[String],
    m: &Matrix<T>,
) -> Result<()> {
    if labels.len() != m.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} columns",
            labels.len(),
            m.cols()
        )));
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(labels)?;
    for i in 0..m.rows() {
        wtr.write_record(m.row(i).iter().map(|x| format!("{:e}", x.as_f64())))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_feature_csv<T: Scalar, R: Read>(r: R) -> Result<(Vec<String>, Matrix<T>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let labels: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        for field in rec.iter() {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad number {field:?}")))?;
            data.push(T::of(x));
        }
        rows += 1;
    }
    let m = Matrix::from_vec(rows, labels.len(), data)?;
    Ok((labels, m))
}

/// A named parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self {
            name: name.into(),
            dims,
            data,
        }
    }
}

pub fn write_gprm<W: Write>(mut w: W, tensors: &[Tensor]) -> Result<()> {
    w.write_all(GPRM_MAGIC)?;
    w.write_all(&[FORMAT_VERSION])?;
    w.write_all(&dim_u32(tensors.len())?.to_le_bytes())?;
    for t in tensors {
        let name = t.name.as_bytes();
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Format(format!("tensor name too long: {}", t.name)))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&dim_u32(t.dims.len())?.to_le_bytes())?;
        for &d in &t.dims {
            w.write_all(&dim_u32(d)?.to_le_bytes())?;
        }
        for &x in &t.data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_gprm<R: Read>(mut r: R) -> Result<Vec<Tensor>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != GPRM_MAGIC {
        return Err(Error::Format("not a GPRM file".into()));
    }
    check_version(&mut r, "GPRM")?;
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut len = [0u8; 2];
        r.read_exact(&mut len)?;
        let mut name = vec![0u8; usize::from(u16::from_le_bytes(len))];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let rank = read_u32(&mut r)? as usize;
        let dims = (0..rank)
            .map(|_| read_u32(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let size: usize = dims.iter().product();
        let data = (0..size)
            .map(|_| read_f64(&mut r))
            .collect::<Result<Vec<_>>>()?;
        out.push(Tensor { name, dims, data });
    }
    Ok(out)
}

/// Writes a square or rectangular greyscale image with values in `[0, 1]`.
pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, pixels: &[f64]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::ShapeMismatch(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    write!(w, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = pixels
        .iter()
        .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Reads a binary PGM with maxval 255; returns `(width, height, pixels)`.
pub fn read_pgm<R: Read>(mut r: R) -> Result<(usize, usize, Vec<f64>)> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < buf.len() && (buf[pos].is_ascii_whitespace() || buf[pos] == b'#') {
            if buf[pos] == b'#' {
                while pos < buf.len() && buf[pos] != b'\n' {
                    pos += 1;
                }
            }
            pos += 1;
        }
        let start = pos;
        while pos < buf.len() && !buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&buf[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(Error::Format("only P5 with maxval 255 is supported".into()));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM dimension {s:?}")))
    };
    let (width, height) = (parse(&fields[1])?, parse(&fields[2])?);
    let body = buf
        .get(pos..pos + width * height)
        .ok_or_else(|| Error::Format("truncated PGM data".into()))?;
    Ok((
        width,
        height,
        body.iter().map(|&b| f64::from(b) / 255.0).collect(),
    ))
}

fn dim_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("dimension {n} exceeds u32")))
}

fn check_version<R: Read>(r: &mut R, what: &str) -> Result<()> {
    let mut v = [0u8; 1];
    r.read_exact(&mut v)?;
    if v[0] != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported {what} version {}",
            v[0]
        )));
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
