//! Field exchange and record formats.
//!
//! A field file is one JSON header line
//! `{"dim":2,"counts":[..],"extents":[..],"space":"position"}` followed by
//! the samples as little-endian interleaved `(re, im)` f64 pairs in storage
//! order.

use crate::em_born::EmOnShellRecord;
use crate::gridfft::{Grid, SampledField, Space};
use crate::scalar_born::OnShellRecord;
use crate::{Complex64, Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    dim: usize,
    counts: Vec<usize>,
    extents: Vec<f64>,
    space: Space,
}

pub fn write_field<W: Write>(mut w: W, field: &SampledField) -> Result<()> {
    let g = field.grid();
    let header = FieldHeader {
        dim: g.dim(),
        counts: g.counts().to_vec(),
        extents: g.extents().to_vec(),
        space: field.space(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(16 * field.values().len());
    for z in field.values() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: BufRead>(mut r: R) -> Result<SampledField> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("missing header line".into()));
    }
    let header: FieldHeader =
        serde_json::from_slice(&line).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.counts.len() != header.dim {
        return Err(Error::Format("header dim does not match counts".into()));
    }
    let grid = Grid::new(&header.extents, &header.counts)?;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() != 16 * grid.len() {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            16 * grid.len(),
            raw.len()
        )));
    }
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    SampledField::new(grid, header.space, values)
}

pub fn save_field(path: &Path, field: &SampledField) -> Result<()> {
    let mut buf = Vec::new();
    write_field(&mut buf, field)?;
    write_atomic(path, &buf)
}

pub fn load_field(path: &Path) -> Result<SampledField> {
    read_field(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub const ON_SHELL_HEADER: &str = "order,dx,dy,dz,re,im";

pub fn on_shell_csv(records: &[OnShellRecord]) -> String {
    let mut s = String::from(ON_SHELL_HEADER);
    s.push('\n');
    for r in records {
        for (d, z) in r.directions.iter().zip(&r.values) {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.order,
                fmt_f64(d[0]),
                fmt_f64(d[1]),
                fmt_f64(d[2]),
                fmt_f64(z.re),
                fmt_f64(z.im)
            );
        }
    }
    s
}

pub const EM_ON_SHELL_HEADER: &str = "order,dx,dy,dz,ex_re,ex_im,ey_re,ey_im,ez_re,ez_im,hx_re,hx_im,hy_re,hy_im,hz_re,hz_im";

pub fn em_on_shell_csv(records: &[EmOnShellRecord]) -> String {
    let mut s = String::from(EM_ON_SHELL_HEADER);
    s.push('\n');
    for r in records {
        for (d, v) in r.directions.iter().zip(&r.values) {
            let _ = write!(s, "{},{},{},{}", r.order, fmt_f64(d[0]), fmt_f64(d[1]), fmt_f64(d[2]));
            for [re, im] in v {
                let _ = write!(s, ",{},{}", fmt_f64(*re), fmt_f64(*im));
            }
            s.push('\n');
        }
    }
    s
}
