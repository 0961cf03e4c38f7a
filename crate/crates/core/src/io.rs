//! Cube files, CSV traces and network checkpoints.
//!
//! Cube file layout, all integers little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `HSCUBE\0\1` (32-bit payload) or `HSCUBE\0\2` (64-bit payload) |
//! | 4 × 3 | rows, cols, bands as `u32` |
//! | 1     | scale tag: 0 unit range, 1 byte range |
//! | rest  | `rows·cols·bands` IEEE floats, band-sequential, row-major per band |
//!
//! The 32-bit form is the exchange format. The 64-bit form stores
//! intermediate tensors bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::spl::{SplArch, SplNetwork, SplParams, TENSOR_NAMES};
use crate::tensor::{Cube, Mat, ValueScale};

pub const MAGIC_F32: [u8; 8] = *b"HSCUBE\0\x01";
pub const MAGIC_F64: [u8; 8] = *b"HSCUBE\0\x02";
const HEADER_LEN: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

fn format_err(path: &Path, offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    }
}

pub fn encode_cube(c: &Cube, precision: Precision) -> Result<Vec<u8>> {
    let dims = [c.rows(), c.cols(), c.bands()];
    if dims.iter().any(|&d| d > u32::MAX as usize) {
        return Err(Error::shape(format!("{:?} exceeds the u32 header range", c.dims())));
    }
    let width = match precision {
        Precision::F32 => 4,
        Precision::F64 => 8,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + width * c.data().len());
    out.extend_from_slice(match precision {
        Precision::F32 => &MAGIC_F32,
        Precision::F64 => &MAGIC_F64,
    });
    for d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.push(match c.scale() {
        ValueScale::Unit => 0,
        ValueScale::Byte => 1,
    });
    match precision {
        Precision::F32 => c.data().iter().for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        Precision::F64 => c.data().iter().for_each(|&v| out.extend_from_slice(&v.to_le_bytes())),
    }
    Ok(out)
}

/// Parses a cube file image. `path` is only used for error context.
pub fn decode_cube(bytes: &[u8], path: &Path) -> Result<Cube> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(path, bytes.len(), "truncated header"));
    }
    let width = match &bytes[..8] {
        m if m == MAGIC_F32 => 4,
        m if m == MAGIC_F64 => 8,
        _ => return Err(format_err(path, 0, "bad magic")),
    };
    let dim = |k: usize| u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().unwrap()) as usize;
    let (rows, cols, bands) = (dim(0), dim(1), dim(2));
    if rows == 0 || cols == 0 || bands == 0 {
        return Err(format_err(path, 8, format!("zero dimension {rows}x{cols}x{bands}")));
    }
    let scale = match bytes[20] {
        0 => ValueScale::Unit,
        1 => ValueScale::Byte,
        t => return Err(format_err(path, 20, format!("unknown scale tag {t}"))),
    };
    let count = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(bands))
        .ok_or_else(|| format_err(path, 8, "dimensions overflow"))?;
    let expected = count
        .checked_mul(width)
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| format_err(path, 8, "dimensions overflow"))?;
    if bytes.len() < expected {
        return Err(format_err(
            path,
            bytes.len(),
            format!("payload truncated: expected {expected} bytes"),
        ));
    }
    if bytes.len() > expected {
        return Err(format_err(path, expected, "trailing bytes after payload"));
    }
    let payload = &bytes[HEADER_LEN..];
    let data: Vec<f64> = if width == 4 {
        payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect()
    } else {
        payload.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect()
    };
    if let Some(k) = data.iter().position(|v| !v.is_finite()) {
        return Err(format_err(path, HEADER_LEN + k * width, "non-finite sample"));
    }
    Ok(Cube::new(rows, cols, bands, data)?.with_scale(scale))
}

pub fn write_cube(path: &Path, c: &Cube, precision: Precision) -> Result<()> {
    let bytes = encode_cube(c, precision)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_cube(path: &Path) -> Result<Cube> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes, path)
}

/// Writes a header row and numeric rows, comma-separated with LF endings.
/// Numbers use the shortest representation that parses back exactly.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            write!(s, "{v}").unwrap();
        }
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads a numeric CSV written by [`write_csv`]: `(header, rows)`.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| format_err(path, 0, "empty CSV"))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut offset = header.iter().map(|h| h.len() + 1).sum::<usize>();
    let mut rows = Vec::new();
    for line in lines {
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format_err(path, offset, format!("bad number: {e}")))?;
        if row.len() != header.len() {
            return Err(format_err(
                path,
                offset,
                format!("{} fields, header has {}", row.len(), header.len()),
            ));
        }
        rows.push(row);
        offset += line.len() + 1;
    }
    Ok((header, rows))
}

/// A matrix as CSV with columns `c0, c1, …`.
pub fn write_matrix_csv(path: &Path, m: &Mat) -> Result<()> {
    let header: Vec<String> = (0..m.n_cols()).map(|j| format!("c{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = (0..m.n_rows()).map(|i| m.row(i).to_vec()).collect();
    write_csv(path, &header, &rows)
}

pub fn read_matrix_csv(path: &Path) -> Result<Mat> {
    let (_, rows) = read_csv(path)?;
    if rows.is_empty() {
        return Err(format_err(path, 0, "matrix CSV has no rows"));
    }
    Mat::from_rows(&rows)
}

/// Writes the network as `manifest.txt` plus one 64-bit cube file per
/// parameter tensor.
pub fn write_checkpoint(dir: &Path, net: &SplNetwork) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let a = net.arch();
    let mut manifest = format!(
        "in_bands={}\nhidden={}\nout_bands={}\nkernel_size={}\nomega={}\n",
        a.in_bands, a.hidden, a.out_bands, a.kernel_size, a.omega
    );
    for (name, t) in TENSOR_NAMES.iter().zip(net.params().tensors()) {
        let file = format!("{name}.cube");
        writeln!(manifest, "tensor={name}:{}:{file}", t.len()).unwrap();
        let cube = Cube::new(1, t.len(), 1, t.to_vec())?;
        write_cube(&dir.join(file), &cube, Precision::F64)?;
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(dir: &Path) -> Result<SplNetwork> {
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut fields = std::collections::BTreeMap::new();
    let mut files = Vec::new();
    let mut offset = 0;
    for line in text.lines() {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format_err(&path, offset, "expected key=value"))?;
        if key == "tensor" {
            files.push(value.to_string());
        } else {
            fields.insert(key.to_string(), (value.to_string(), offset));
        }
        offset += line.len() + 1;
    }
    let get = |k: &str| -> Result<&str> {
        fields
            .get(k)
            .map(|(v, _)| v.as_str())
            .ok_or_else(|| format_err(&path, 0, format!("missing key {k}")))
    };
    let usize_of = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| format_err(&path, fields[k].1, format!("bad value for {k}")))
    };
    let arch = SplArch {
        in_bands: usize_of("in_bands")?,
        hidden: usize_of("hidden")?,
        out_bands: usize_of("out_bands")?,
        kernel_size: usize_of("kernel_size")?,
        omega: get("omega")?
            .parse()
            .map_err(|_| format_err(&path, fields["omega"].1, "bad value for omega"))?,
    };
    arch.validate()?;
    if files.len() != TENSOR_NAMES.len() {
        return Err(format_err(&path, 0, format!("expected {} tensors", TENSOR_NAMES.len())));
    }
    let mut params = SplParams::zeros(&arch);
    for ((entry, name), slot) in files.iter().zip(TENSOR_NAMES).zip(params.tensors_mut()) {
        let mut parts = entry.splitn(3, ':');
        let (n, len, file) = (parts.next(), parts.next(), parts.next());
        if n != Some(name) || file.is_none() {
            return Err(format_err(&path, 0, format!("malformed tensor entry {entry}")));
        }
        let tensor_path: PathBuf = dir.join(file.unwrap());
        let cube = read_cube(&tensor_path)?;
        if len.and_then(|l| l.parse::<usize>().ok()) != Some(cube.data().len())
            || cube.data().len() != slot.len()
        {
            return Err(format_err(&tensor_path, 0, format!("tensor {name} has the wrong length")));
        }
        *slot = cube.into_data();
    }
    SplNetwork::from_params(arch, params)
}
