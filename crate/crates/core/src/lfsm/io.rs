//! CSV and binary storage of paths and increment panels.
//!
//! Binary layout (all integers and floats little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `MIXLFSM\0` |
//! | 1 | format version (1) |
//! | 1 | kind: 1 = path, 2 = panel |
//! | 6 | reserved, zero |
//! | 8 | rows (u64) |
//! | 8 | columns (u64) |
//! | 8 | Δ (f64) |
//! | 8 | k (u64, 0 for paths) |
//! | 8 | first row index l (u64, 1 for paths) |
//! | 8·cols | lags γ (u64, panels only) |
//! | 8·rows·cols | values (f64, row-major) |

use std::io::{Read, Write};

use super::increments::IncrementPanel;
use super::simulate::Path;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"MIXLFSM\0";
pub const FORMAT_VERSION: u8 = 1;
const KIND_PATH: u8 = 1;
const KIND_PANEL: u8 = 2;

fn header(kind: u8, rows: usize, cols: usize, delta: f64, k: usize, first: usize) -> Vec<u8> {
    let mut h = Vec::with_capacity(56);
    h.extend_from_slice(&MAGIC);
    h.push(FORMAT_VERSION);
    h.push(kind);
    h.extend_from_slice(&[0u8; 6]);
    h.extend_from_slice(&(rows as u64).to_le_bytes());
    h.extend_from_slice(&(cols as u64).to_le_bytes());
    h.extend_from_slice(&delta.to_le_bytes());
    h.extend_from_slice(&(k as u64).to_le_bytes());
    h.extend_from_slice(&(first as u64).to_le_bytes());
    h
}

pub fn path_to_bytes(path: &Path) -> Vec<u8> {
    let mut b = header(KIND_PATH, path.values.len(), 1, path.delta, 0, 1);
    for v in &path.values {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b
}

pub fn panel_to_bytes(panel: &IncrementPanel) -> Vec<u8> {
    let rows = panel.rows();
    let cols = panel.columns.len();
    let mut b = header(KIND_PANEL, rows, cols, panel.delta, panel.k, panel.first_l);
    for g in &panel.gammas {
        b.extend_from_slice(&(*g as u64).to_le_bytes());
    }
    for i in 0..rows {
        for c in &panel.columns {
            b.extend_from_slice(&c[i].to_le_bytes());
        }
    }
    b
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::input("binary file is truncated"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

struct Header {
    kind: u8,
    rows: usize,
    cols: usize,
    delta: f64,
    k: usize,
    first: usize,
}

fn read_header(c: &mut Cursor) -> Result<Header> {
    if c.take(8)? != MAGIC {
        return Err(Error::input("not a mixlfsm binary file (bad magic)"));
    }
    let v = c.take(1)?[0];
    if v != FORMAT_VERSION {
        return Err(Error::input(format!(
            "unsupported binary format version {v}, expected {FORMAT_VERSION}"
        )));
    }
    let kind = c.take(1)?[0];
    c.take(6)?;
    let rows = c.u64()? as usize;
    let cols = c.u64()? as usize;
    let delta = c.f64()?;
    let k = c.u64()? as usize;
    let first = c.u64()? as usize;
    let need = rows.checked_mul(cols).and_then(|x| x.checked_mul(8));
    match need {
        Some(b) if b <= c.data.len() => {}
        _ => return Err(Error::input("binary header declares more data than present")),
    }
    Ok(Header {
        kind,
        rows,
        cols,
        delta,
        k,
        first,
    })
}

pub fn path_from_bytes(data: &[u8]) -> Result<Path> {
    let mut c = Cursor { data, pos: 0 };
    let h = read_header(&mut c)?;
    if h.kind != KIND_PATH || h.cols != 1 {
        return Err(Error::input("binary file does not hold a path"));
    }
    let values = (0..h.rows).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    Ok(Path { delta: h.delta, values })
}

pub fn panel_from_bytes(data: &[u8]) -> Result<IncrementPanel> {
    let mut c = Cursor { data, pos: 0 };
    let h = read_header(&mut c)?;
    if h.kind != KIND_PANEL {
        return Err(Error::input("binary file does not hold an increment panel"));
    }
    let gammas = (0..h.cols)
        .map(|_| c.u64().map(|g| g as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec![Vec::with_capacity(h.rows); h.cols];
    for _ in 0..h.rows {
        for col in columns.iter_mut() {
            col.push(c.f64()?);
        }
    }
    Ok(IncrementPanel {
        k: h.k,
        gammas,
        delta: h.delta,
        first_l: h.first,
        columns,
    })
}

pub fn write_path_csv<W: Write>(path: &Path, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["l", "t", "x"]).map_err(csv_err)?;
    for (i, v) in path.values.iter().enumerate() {
        let l = i + 1;
        wr.write_record([l.to_string(), format!("{:e}", l as f64 * path.delta), format!("{v:e}")])
            .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a path CSV with columns `l,t,x`, or a single headerless value
/// column (then `delta` must be supplied).
pub fn read_path_csv<R: Read>(r: R, delta: Option<f64>) -> Result<Path> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut values = Vec::new();
    let mut d = delta;
    let mut xcol = 0;
    let mut tcol = None;
    let mut lcol = None;
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if i == 0 && rec.iter().any(|f| f.trim().parse::<f64>().is_err()) {
            for (j, f) in rec.iter().enumerate() {
                match f.trim() {
                    "x" => xcol = j,
                    "t" => tcol = Some(j),
                    "l" => lcol = Some(j),
                    _ => {}
                }
            }
            continue;
        }
        let get = |j: usize| -> Result<f64> {
            rec.get(j)
                .ok_or_else(|| Error::input(format!("row {} has no column {j}", i + 1)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::input(format!("row {}: {e}", i + 1)))
        };
        let x = get(xcol)?;
        if !x.is_finite() {
            return Err(Error::input(format!("row {}: non-finite value", i + 1)));
        }
        if d.is_none() {
            if let (Some(tc), Some(lc)) = (tcol, lcol) {
                d = Some(get(tc)? / get(lc)?);
            }
        }
        values.push(x);
    }
    if values.is_empty() {
        return Err(Error::input("path file holds no observations"));
    }
    let delta = d.ok_or_else(|| Error::input("sampling step Δ is neither in the file nor supplied"))?;
    Ok(Path { delta, values })
}

pub fn write_panel_csv<W: Write>(panel: &IncrementPanel, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut head = vec!["l".to_string()];
    head.extend(panel.gammas.iter().map(|g| format!("gamma_{g}")));
    wr.write_record(&head).map_err(csv_err)?;
    for i in 0..panel.rows() {
        let mut row = vec![(panel.first_l + i).to_string()];
        row.extend(panel.columns.iter().map(|c| format!("{:e}", c[i])));
        wr.write_record(&row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::input(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lfsm::k_order_increments;

    fn sample() -> Path {
        Path {
            delta: 0.01,
            values: (1..=50).map(|i| (i as f64 * 0.37).sin() * 1e-3).collect(),
        }
    }

    #[test]
    fn binary_roundtrip_is_bitwise() {
        let p = sample();
        let b = path_to_bytes(&p);
        assert_eq!(&b[..8], b"MIXLFSM\0");
        assert_eq!(b[8], 1);
        assert_eq!(path_from_bytes(&b).unwrap(), p);
        let panel = k_order_increments(&p, 2, &[1, 2, 4]).unwrap();
        assert_eq!(panel_from_bytes(&panel_to_bytes(&panel)).unwrap(), panel);
    }

    #[test]
    fn binary_errors() {
        let mut b = path_to_bytes(&sample());
        b[8] = 9;
        assert!(matches!(path_from_bytes(&b), Err(Error::Input(m)) if m.contains("version")));
        assert!(path_from_bytes(&b"garbage!garbage!"[..]).is_err());
        let b = path_to_bytes(&sample());
        assert!(path_from_bytes(&b[..b.len() - 3]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let p = sample();
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf).unwrap();
        let q = read_path_csv(&buf[..], None).unwrap();
        assert!((q.delta - p.delta).abs() < 1e-15);
        for (a, b) in p.values.iter().zip(&q.values) {
            assert_eq!(a, b);
        }
        let raw = b"1.0\n2.5\n";
        assert!(read_path_csv(&raw[..], None).is_err());
        assert_eq!(read_path_csv(&raw[..], Some(0.5)).unwrap().values, vec![1.0, 2.5]);
    }
}
