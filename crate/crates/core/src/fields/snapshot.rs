//! Binary field snapshots: magic `WPLB1`, then little-endian `u64` dimension,
//! component count and per-axis point counts, `f64` per-axis half-widths,
//! `eps` and `t`, followed by interleaved `(re, im)` `f64` samples,
//! component-contiguous, axis 0 outermost.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::grid::GridSpec;
use super::ComplexField;
use crate::error::{Result, WpError};

pub const SNAPSHOT_MAGIC: &[u8; 5] = b"WPLB1";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: ComplexField,
    pub eps: f64,
    pub t: f64,
}

pub fn write_snapshot<W: Write>(mut w: W, field: &ComplexField, eps: f64, t: f64) -> Result<()> {
    let g = &field.grid;
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(g.dim as u64).to_le_bytes())?;
    w.write_all(&(field.components as u64).to_le_bytes())?;
    for a in 0..g.dim {
        w.write_all(&(g.points[a] as u64).to_le_bytes())?;
    }
    for a in 0..g.dim {
        w.write_all(&g.half_width[a].to_le_bytes())?;
    }
    w.write_all(&eps.to_le_bytes())?;
    w.write_all(&t.to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * field.data.len());
    for v in &field.data {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(WpError::Field(format!("bad snapshot magic {magic:?}")));
    }
    let dim = read_u64(&mut r)? as usize;
    let components = read_u64(&mut r)? as usize;
    if !(1..=3).contains(&dim) || !(1..=2).contains(&components) {
        return Err(WpError::Field(format!("bad snapshot header: d = {dim}, components = {components}")));
    }
    let points = (0..dim).map(|_| read_u64(&mut r).map(|n| n as usize)).collect::<Result<Vec<_>>>()?;
    let half = (0..dim).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let eps = read_f64(&mut r)?;
    let t = read_f64(&mut r)?;
    let grid = GridSpec::new(dim, &half, &points)?;
    let n = components * grid.len();
    let mut raw = vec![0u8; 16 * n];
    r.read_exact(&mut raw)?;
    let data = raw
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    Ok(Snapshot {
        field: ComplexField::from_data(&grid, components, data)?,
        eps,
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = GridSpec::new(2, &[1.5, 2.0], &[16, 32]).unwrap();
        let mut f = ComplexField::zeros(&g, 2);
        for (i, v) in f.data.iter_mut().enumerate() {
            *v = Complex64::new((i as f64).sqrt(), -(i as f64) / 7.0);
        }
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f, 0.125, 0.75).unwrap();
        assert_eq!(&buf[..5], b"WPLB1");
        assert_eq!(buf.len(), 5 + 8 * 4 + 8 * 2 + 16 + 16 * f.data.len());
        let s = read_snapshot(&buf[..]).unwrap();
        assert_eq!(s.field, f);
        assert_eq!((s.eps, s.t), (0.125, 0.75));
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_snapshot(&b"WPLB2xxxxxxxx"[..]).is_err());
        let g = GridSpec::cubic(1, 1.0, 16).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &ComplexField::zeros(&g, 1), 1.0, 0.0).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_snapshot(&buf[..]), Err(WpError::Io(_))));
    }
}
