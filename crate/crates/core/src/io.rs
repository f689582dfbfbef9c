//! Files: the AFLD binary field format, greyscale/colour pixmaps, CSV tables
//! and atomic writes.
//!
//! AFLD layout (little endian): magic `AFLD`, `u16` version (1), `u16` dim,
//! `dim` x `u64` point counts, `f64` extent, `f64` time, then the row-major
//! `f64` payload and a CRC-32 of the payload bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const AFLD_MAGIC: &[u8; 4] = b"AFLD";
pub const AFLD_VERSION: u16 = 1;

/// Serialise a field to AFLD bytes.
pub fn encode_field(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(4 + 4 + 8 * g.dim() + 16 + 8 * g.len() + 4);
    out.extend_from_slice(AFLD_MAGIC);
    out.extend_from_slice(&AFLD_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.dim() as u16).to_le_bytes());
    for _ in 0..g.dim() {
        out.extend_from_slice(&(g.points_per_axis() as u64).to_le_bytes());
    }
    out.extend_from_slice(&g.extent().to_le_bytes());
    out.extend_from_slice(&f.time().to_le_bytes());
    let start = out.len();
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// Parse AFLD bytes.
pub fn decode_field(buf: &[u8]) -> Result<Field> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4, "magic")? != AFLD_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = c.u16("version")?;
    if version != AFLD_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = c.u16("dim")? as usize;
    if dim == 0 {
        return Err(Error::Format("dim is zero".into()));
    }
    let counts: Vec<u64> = (0..dim).map(|_| c.u64("point counts")).collect::<Result<_>>()?;
    if counts.iter().any(|&n| n != counts[0]) {
        return Err(Error::Format("unequal point counts per axis are not supported".into()));
    }
    let extent = c.f64("extent")?;
    let time = c.f64("time")?;
    let n = usize::try_from(counts[0]).map_err(|_| Error::Format("point count overflows".into()))?;
    let len = n
        .checked_pow(dim as u32)
        .and_then(|l| l.checked_mul(8))
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let payload = c.take(len, "payload")?;
    let crc = u32::from_le_bytes(c.take(4, "checksum")?.try_into().expect("4 bytes"));
    if crc != crc32fast::hash(payload) {
        return Err(Error::Format("checksum mismatch".into()));
    }
    if c.pos != buf.len() {
        return Err(Error::Format("trailing bytes after checksum".into()));
    }
    let grid = Grid::new(dim, n, extent).map_err(|e| Error::Format(e.to_string()))?;
    let values = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    Field::new(grid, values, time).map_err(|e| Error::Format(e.to_string()))
}

/// Write `bytes` to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::other(format!("not a file path: {}", path.display()))))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn write_field(f: &Field, path: &Path) -> Result<()> {
    write_atomic(path, &encode_field(f))
}

pub fn read_field(path: &Path) -> Result<Field> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_field(&buf)
}

/// Display range of [`render_pgm`].
pub const RENDER_RANGE: (f64, f64) = (-1.2, 1.2);

fn grey(v: f64) -> u8 {
    let (lo, hi) = RENDER_RANGE;
    let s = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    (s * 255.0).round() as u8
}

/// 2-d field as a binary PGM. Rows follow the first axis.
pub fn render_pgm(f: &Field) -> Result<Vec<u8>> {
    let g = f.grid();
    if g.dim() != 2 {
        return Err(crate::error::invalid("field", "rendering needs d = 2"));
    }
    let n = g.points_per_axis();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.extend(f.values().iter().map(|&v| grey(v)));
    Ok(out)
}

/// 2-d field as a binary PPM, blue for negative and red for positive values,
/// with `mask` points (if any) drawn in green.
pub fn render_ppm(f: &Field, mask: Option<&[bool]>) -> Result<Vec<u8>> {
    let g = f.grid();
    if g.dim() != 2 {
        return Err(crate::error::invalid("field", "rendering needs d = 2"));
    }
    let n = g.points_per_axis();
    let mut out = format!("P6\n{n} {n}\n255\n").into_bytes();
    for (p, &v) in f.values().iter().enumerate() {
        if mask.is_some_and(|m| m[p]) {
            out.extend_from_slice(&[40, 200, 60]);
            continue;
        }
        let s = (v / RENDER_RANGE.1).clamp(-1.0, 1.0);
        let a = (255.0 * (1.0 - s.abs())).round() as u8;
        if s >= 0.0 {
            out.extend_from_slice(&[255, a, a]);
        } else {
            out.extend_from_slice(&[a, a, 255]);
        }
    }
    Ok(out)
}

/// A named CSV table with a header row.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Append a row; panics if the width is wrong (a programming error).
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record(&self.columns).map_err(crate::mcf::csv_err)?;
        for r in &self.rows {
            wr.write_record(r).map_err(crate::mcf::csv_err)?;
        }
        wr.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

/// Shorthand for table cells.
#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::sample_white_noise;

    #[test]
    fn round_trip_is_bitwise() {
        let g = Grid::new(2, 16, 3.7).unwrap();
        let f = sample_white_noise(&g, 9).with_time(1.25);
        let bytes = encode_field(&f);
        let back = decode_field(&bytes).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.time().to_bits(), f.time().to_bits());
        assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.afld");
        write_field(&f, &p).unwrap();
        assert_eq!(fs::read(&p).unwrap(), bytes);
        assert_eq!(read_field(&p).unwrap().values(), f.values());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn header_size() {
        let g = Grid::new(2, 256, 1.0).unwrap();
        let bytes = encode_field(&Field::zeros(&g, 0.0));
        let header = 4 + 2 + 2 + 2 * 8 + 8 + 8;
        assert_eq!(bytes.len() - header - 4, 524_288);
    }

    #[test]
    fn corruption_is_detected() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let bytes = encode_field(&sample_white_noise(&g, 1));
        let mut bad = bytes.clone();
        let k = bad.len() - 1;
        bad[k] ^= 1;
        assert!(matches!(decode_field(&bad), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[40] ^= 0x10;
        assert!(matches!(decode_field(&bad), Err(Error::Format(_))));
        assert!(decode_field(&bytes[..bytes.len() - 5]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_field(&bad).is_err());
    }

    #[test]
    fn pgm_levels() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let img = render_pgm(&Field::constant(&g, 0.0, 0.0)).unwrap();
        let header = b"P5\n8 8\n255\n".len();
        assert!(img[header..].iter().all(|&p| p == 128));
        assert_eq!(grey(-5.0), 0);
        assert_eq!(grey(1.2), 255);
        assert!(render_ppm(&Field::constant(&g, 1.0, 0.0), None).unwrap().len() == b"P6\n8 8\n255\n".len() + 192);
    }

    #[test]
    fn table_csv() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(row![1, "x,y"]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "a,b\n1,\"x,y\"\n");
    }
}
