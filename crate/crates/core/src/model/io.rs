//! Snapshot formats: CSV (`x-index…, s, rho`) and a little-endian binary dump.

use super::density::DensityField;
use super::grid::{ActivityGrid, SpatialGrid};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"NFSF";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

/// Write `contents` to `path` via a temporary sibling and rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn index_header(d: usize) -> &'static str {
    if d == 1 {
        "ix"
    } else {
        "ix0,ix1"
    }
}

/// CSV body for one or more populations; `beta` column added when more than one.
pub fn snapshot_csv(fields: &[DensityField]) -> String {
    let mut out = String::new();
    let multi = fields.len() > 1;
    let d = fields[0].spatial.d;
    if multi {
        out.push_str("beta,");
    }
    let _ = writeln!(out, "{},s,rho", index_header(d));
    for (b, rho) in fields.iter().enumerate() {
        let centers = rho.activity.centers();
        for x in 0..rho.spatial.cells() {
            let idx = rho.spatial.index_of(x);
            let prefix: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            let prefix = prefix.join(",");
            for (v, s) in rho.row(x).iter().zip(&centers) {
                if multi {
                    let _ = write!(out, "{b},");
                }
                let _ = writeln!(out, "{prefix},{s:.17e},{v:.17e}");
            }
        }
    }
    out
}

pub fn encode_binary(fields: &[DensityField]) -> Vec<u8> {
    let rho = &fields[0];
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * rho.values.len() * fields.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(rho.spatial.d as u32).to_le_bytes());
    buf.extend_from_slice(&(rho.spatial.n as u32).to_le_bytes());
    buf.extend_from_slice(&(rho.activity.n_s as u32).to_le_bytes());
    buf.extend_from_slice(&(fields.len() as u32).to_le_bytes());
    buf.extend_from_slice(&rho.t.to_le_bytes());
    buf.extend_from_slice(&rho.spatial.length.to_le_bytes());
    buf.extend_from_slice(&rho.activity.s_max.to_le_bytes());
    buf.resize(HEADER_LEN, 0);
    for f in fields {
        for v in &f.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn decode_binary(bytes: &[u8]) -> Result<Vec<DensityField>> {
    let bad = |m: &str| Error::InvalidConfig(format!("bad snapshot: {m}"));
    if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
        return Err(bad("missing magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != FORMAT_VERSION as usize {
        return Err(bad("unsupported version"));
    }
    let (d, n, n_s, pops) = (u32_at(8), u32_at(12), u32_at(16), u32_at(20));
    let (t, length, s_max) = (f64_at(24), f64_at(32), f64_at(40));
    let spatial = SpatialGrid::new(d, length, n)?;
    let activity = ActivityGrid::new(s_max, n_s)?;
    let per = spatial.cells() * n_s;
    if bytes.len() != HEADER_LEN + 8 * per * pops {
        return Err(bad("payload length does not match header"));
    }
    let mut out = Vec::with_capacity(pops);
    for b in 0..pops {
        let start = HEADER_LEN + 8 * per * b;
        let values = bytes[start..start + 8 * per]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(DensityField {
            spatial: spatial.clone(),
            activity: activity.clone(),
            values,
            t,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_layout() {
        let g = SpatialGrid::new(2, 1.5, 4).unwrap();
        let a = ActivityGrid::new(5.0, 32).unwrap();
        let mut rho = DensityField::from_fn(&g, &a, |x, s| (-(s - x[1]).powi(2)).exp()).unwrap();
        rho.t = 0.25;
        let bytes = encode_binary(&[rho.clone()]);
        assert_eq!(&bytes[..4], b"NFSF");
        assert_eq!(bytes.len(), 64 + 8 * 16 * 32);
        // row-major: the value of cell (ix0=0, ix1=1, j=2) sits at offset 64 + 8 * (1*32 + 2)
        let off = 64 + 8 * (32 + 2);
        let v = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        assert_eq!(v, rho.row(1)[2]);
        let back = decode_binary(&bytes).unwrap();
        assert_eq!(back[0], rho);
        assert!(decode_binary(&bytes[..100]).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let g = SpatialGrid::new(1, 1.0, 2).unwrap();
        let a = ActivityGrid::new(4.0, 32).unwrap();
        let rho = DensityField::from_fn(&g, &a, |_, _| 1.0).unwrap();
        let text = snapshot_csv(&[rho.clone()]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("ix,s,rho"));
        assert_eq!(text.lines().count(), 1 + 64);
        let multi = snapshot_csv(&[rho.clone(), rho]);
        assert!(multi.starts_with("beta,ix,s,rho"));
    }
}
