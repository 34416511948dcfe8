//! Binary field files.
//!
//! `VSWM1` macroscopic snapshot (all little-endian):
//! magic, `u32 nx`, `u32 ny`, `f64 dx`, `f64 t`, then the row-major planes
//! rho, u_x, u_y, omega_z, optionally followed by a polyline
//! (`u32 count`, `count` pairs of `f64`).
//!
//! `VSWF1` population dump used for warm starts:
//! magic, `u32 nx`, `u32 ny`, `u64 tick`, `f64 tau`, then `nx * ny * 9` `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::field::{vorticity, DistributionField, MacroField};
use super::lattice::Q;
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 5] = b"VSWM1";
pub const POPULATION_MAGIC: &[u8; 5] = b"VSWF1";

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub nx: u32,
    pub ny: u32,
    pub dx: f64,
    pub t: f64,
    pub rho: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub vorticity: Vec<f64>,
    pub polyline: Option<Vec<[f64; 2]>>,
}

impl Snapshot {
    pub fn from_macros(m: &MacroField, dx: f64, t: f64) -> Self {
        Snapshot {
            nx: m.nx as u32,
            ny: m.ny as u32,
            dx,
            t,
            rho: m.rho.clone(),
            ux: m.ux.clone(),
            uy: m.uy.clone(),
            vorticity: vorticity(m),
            polyline: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = (self.nx * self.ny) as usize;
        let mut out = Vec::with_capacity(5 + 24 + 32 * n);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&self.nx.to_le_bytes());
        out.extend_from_slice(&self.ny.to_le_bytes());
        out.extend_from_slice(&self.dx.to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        for plane in [&self.rho, &self.ux, &self.uy, &self.vorticity] {
            for v in plane.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        if let Some(line) = &self.polyline {
            out.extend_from_slice(&(line.len() as u32).to_le_bytes());
            for [x, y] in line {
                out.extend_from_slice(&x.to_le_bytes());
                out.extend_from_slice(&y.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::new(bytes, path);
        r.magic(SNAPSHOT_MAGIC)?;
        let nx = r.u32()?;
        let ny = r.u32()?;
        let dx = r.f64()?;
        let t = r.f64()?;
        let n = nx as usize * ny as usize;
        let rho = r.f64s(n)?;
        let ux = r.f64s(n)?;
        let uy = r.f64s(n)?;
        let vorticity = r.f64s(n)?;
        let polyline = if r.remaining() == 0 {
            None
        } else {
            let count = r.u32()? as usize;
            let flat = r.f64s(2 * count)?;
            Some(flat.chunks_exact(2).map(|p| [p[0], p[1]]).collect())
        };
        if r.remaining() != 0 {
            return Err(Error::format(path, "trailing bytes after snapshot"));
        }
        Ok(Snapshot {
            nx,
            ny,
            dx,
            t,
            rho,
            ux,
            uy,
            vorticity,
            polyline,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Snapshot::from_bytes(&bytes, path)
    }
}

pub fn write_populations(field: &DistributionField, path: &Path) -> Result<()> {
    let f = field.populations();
    let mut out = Vec::with_capacity(5 + 24 + 8 * f.len());
    out.extend_from_slice(POPULATION_MAGIC);
    out.extend_from_slice(&(field.nx as u32).to_le_bytes());
    out.extend_from_slice(&(field.ny as u32).to_le_bytes());
    out.extend_from_slice(&field.tick.to_le_bytes());
    out.extend_from_slice(&field.tau.to_le_bytes());
    for v in f {
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &out)
}

pub fn read_populations(path: &Path) -> Result<DistributionField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&bytes, path);
    r.magic(POPULATION_MAGIC)?;
    let nx = r.u32()? as usize;
    let ny = r.u32()? as usize;
    let tick = r.u64()?;
    let tau = r.f64()?;
    let f = r.f64s(nx * ny * Q)?;
    if r.remaining() != 0 {
        return Err(Error::format(path, "trailing bytes after populations"));
    }
    DistributionField::from_raw(nx, ny, tau, tick, f)
}

/// Writes to a sibling temporary file and renames it into place; the
/// temporary is removed if the write fails.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    let result = fs::File::create(&tmp)
        .and_then(|mut file| {
            file.write_all(bytes)?;
            file.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Reader { bytes, pos: 0, path }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format(self.path, "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn magic(&mut self, magic: &[u8; 5]) -> Result<()> {
        let got = self.take(5)?;
        if got != magic {
            return Err(Error::format(
                self.path,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::format(self.path, "size overflow"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        Snapshot {
            nx: 3,
            ny: 2,
            dx: 0.025,
            t: 1234.0,
            rho: vec![1.0, 1.01, 0.99, 1.0, 1.0, 1.02],
            ux: vec![0.05; 6],
            uy: vec![-0.01, 0.0, 0.01, 0.02, 0.0, 0.0],
            vorticity: vec![0.0, 1e-3, -1e-3, 0.0, 2e-3, 0.0],
            polyline: None,
        }
    }

    #[test]
    fn header_layout_is_exact() {
        let b = sample().to_bytes();
        assert_eq!(&b[..5], b"VSWM1");
        assert_eq!(u32::from_le_bytes(b[5..9].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[9..13].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(b[13..21].try_into().unwrap()), 0.025);
        assert_eq!(f64::from_le_bytes(b[21..29].try_into().unwrap()), 1234.0);
        assert_eq!(b.len(), 29 + 4 * 6 * 8);
        // first u_x value starts after the full rho plane
        let off = 29 + 6 * 8;
        assert_eq!(f64::from_le_bytes(b[off..off + 8].try_into().unwrap()), 0.05);
    }

    #[test]
    fn round_trip_with_polyline() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.bin");
        let mut s = sample();
        s.polyline = Some(vec![[1.0, 2.0], [3.5, -4.25]]);
        s.write(&path).unwrap();
        assert_eq!(Snapshot::read(&path).unwrap(), s);
        assert!(!dir.path().join("snap.bin.partial").exists());
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut b = sample().to_bytes();
        b[4] = b'2';
        let err = Snapshot::from_bytes(&b, Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("bad magic"));
        assert!(Snapshot::from_bytes(&b[..20], Path::new("x")).is_err());
    }

    #[test]
    fn populations_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("warm.bin");
        let mut f = DistributionField::uniform(4, 3, 0.55, 1.0, [0.02, 0.01]);
        f.tick = 77;
        write_populations(&f, &path).unwrap();
        let g = read_populations(&path).unwrap();
        assert_eq!(g.populations(), f.populations());
        assert_eq!((g.nx, g.ny, g.tick, g.tau), (4, 3, 77, 0.55));
    }
}
