//! Octahedral irradiance atlas.
//!
//! Probes are stored in id order, each as an `(R + 2)²` RGB tile: an `R × R`
//! interior plus a one-texel border copied across the octahedral seams so a
//! bilinear tap never has to wrap.

use std::io::{self, Read, Write};

use glam::{DVec2, DVec3};

use crate::oct::{oct_decode, oct_encode};
use crate::probe::ProbeId;

pub const ATLAS_MAGIC: &[u8; 4] = b"SDFA";
pub const ATLAS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeAtlas {
    resolution: usize,
    probe_count: usize,
    texels: Vec<[f32; 3]>,
}

impl ProbeAtlas {
    pub fn new(resolution: usize, probe_count: usize) -> Self {
        assert!(resolution >= 1);
        let side = resolution + 2;
        ProbeAtlas {
            resolution,
            probe_count,
            texels: vec![[0.0; 3]; side * side * probe_count],
        }
    }

    /// Interior texels per side.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn probe_count(&self) -> usize {
        self.probe_count
    }

    pub fn tile_side(&self) -> usize {
        self.resolution + 2
    }

    fn tile_len(&self) -> usize {
        self.tile_side() * self.tile_side()
    }

    pub fn tile(&self, probe: ProbeId) -> &[[f32; 3]] {
        let n = self.tile_len();
        &self.texels[probe.index() * n..(probe.index() + 1) * n]
    }

    pub fn tile_mut(&mut self, probe: ProbeId) -> &mut [[f32; 3]] {
        let n = self.tile_len();
        &mut self.texels[probe.index() * n..(probe.index() + 1) * n]
    }

    /// Direction at the centre of interior texel `(i, j)`.
    pub fn texel_direction(&self, i: usize, j: usize) -> DVec3 {
        let r = self.resolution as f64;
        oct_decode(DVec2::new((i as f64 + 0.5) / r, (j as f64 + 0.5) / r))
    }

    pub fn texel_directions(&self) -> Vec<DVec3> {
        let r = self.resolution;
        (0..r)
            .flat_map(|j| (0..r).map(move |i| (i, j)))
            .map(|(i, j)| self.texel_direction(i, j))
            .collect()
    }

    pub fn interior(&self, probe: ProbeId, i: usize, j: usize) -> DVec3 {
        let side = self.tile_side();
        let t = self.tile(probe)[(j + 1) * side + i + 1];
        DVec3::new(t[0] as f64, t[1] as f64, t[2] as f64)
    }

    /// Writes interior texels (row-major, `R²` values) and refreshes the border.
    pub fn write_interior(&mut self, probe: ProbeId, values: &[DVec3]) {
        let r = self.resolution;
        assert_eq!(values.len(), r * r);
        let side = self.tile_side();
        let tile = self.tile_mut(probe);
        for j in 0..r {
            for i in 0..r {
                let v = values[j * r + i];
                tile[(j + 1) * side + i + 1] = [v.x as f32, v.y as f32, v.z as f32];
            }
        }
        fill_border(tile, r);
    }

    /// Bilinear irradiance lookup in `probe`'s tile.
    pub fn sample(&self, probe: ProbeId, dir: DVec3) -> DVec3 {
        let r = self.resolution as f64;
        let side = self.tile_side();
        let uv = oct_encode(dir);
        let x = (uv.x * r + 0.5).clamp(0.0, r + 1.0);
        let y = (uv.y * r + 0.5).clamp(0.0, r + 1.0);
        let x0 = (x.floor() as usize).min(side - 2);
        let y0 = (y.floor() as usize).min(side - 2);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let tile = self.tile(probe);
        let at = |xx: usize, yy: usize| {
            let t = tile[yy * side + xx];
            DVec3::new(t[0] as f64, t[1] as f64, t[2] as f64)
        };
        let top = at(x0, y0).lerp(at(x0 + 1, y0), fx);
        let bottom = at(x0, y0 + 1).lerp(at(x0 + 1, y0 + 1), fx);
        top.lerp(bottom, fy)
    }

    /// Flat binary dump: 16-byte header (magic, version, R, probe count as
    /// little-endian u32) followed by every bordered tile as f32 RGB.
    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        w.write_all(ATLAS_MAGIC)?;
        w.write_all(&ATLAS_VERSION.to_le_bytes())?;
        w.write_all(&(self.resolution as u32).to_le_bytes())?;
        w.write_all(&(self.probe_count as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.texels.len() * 12);
        for t in &self.texels {
            for c in t {
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
        w.write_all(&buf)
    }

    pub fn read_from(mut r: impl Read) -> io::Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[0..4] != ATLAS_MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "bad atlas magic"));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        if word(4) != ATLAS_VERSION {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "unsupported atlas version"));
        }
        let mut atlas = ProbeAtlas::new(word(8) as usize, word(12) as usize);
        let mut buf = vec![0u8; atlas.texels.len() * 12];
        r.read_exact(&mut buf)?;
        for (t, chunk) in atlas.texels.iter_mut().zip(buf.chunks_exact(12)) {
            for (c, b) in t.iter_mut().zip(chunk.chunks_exact(4)) {
                *c = f32::from_le_bytes(b.try_into().unwrap());
            }
        }
        Ok(atlas)
    }
}

/// Copies interior texels into the one-texel border following the
/// octahedral seams: edges mirror, corners take the opposite corner.
fn fill_border(tile: &mut [[f32; 3]], r: usize) {
    let side = r + 2;
    let idx = |x: usize, y: usize| y * side + x;
    for x in 1..=r {
        tile[idx(x, 0)] = tile[idx(r + 1 - x, 1)];
        tile[idx(x, r + 1)] = tile[idx(r + 1 - x, r)];
    }
    for y in 1..=r {
        tile[idx(0, y)] = tile[idx(1, r + 1 - y)];
        tile[idx(r + 1, y)] = tile[idx(r, r + 1 - y)];
    }
    tile[idx(0, 0)] = tile[idx(r, r)];
    tile[idx(r + 1, 0)] = tile[idx(1, r)];
    tile[idx(0, r + 1)] = tile[idx(r, 1)];
    tile[idx(r + 1, r + 1)] = tile[idx(1, 1)];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_tile_samples_constant() {
        let mut a = ProbeAtlas::new(8, 2);
        a.write_interior(ProbeId(1), &vec![DVec3::new(1.0, 2.0, 3.0); 64]);
        for d in [DVec3::Z, DVec3::NEG_Z, DVec3::new(0.3, -0.9, 0.1).normalize()] {
            let s = a.sample(ProbeId(1), d);
            assert!((s - DVec3::new(1.0, 2.0, 3.0)).length() < 1e-6);
            assert_eq!(a.sample(ProbeId(0), d), DVec3::ZERO);
        }
    }

    #[test]
    fn dump_round_trips() {
        let mut a = ProbeAtlas::new(4, 3);
        let vals: Vec<DVec3> = (0..16).map(|i| DVec3::splat(i as f64 * 0.25)).collect();
        a.write_interior(ProbeId(2), &vals);
        let mut bytes = Vec::new();
        a.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"SDFA");
        assert_eq!(bytes.len(), 16 + 3 * 36 * 12);
        let b = ProbeAtlas::read_from(bytes.as_slice()).unwrap();
        assert_eq!(a, b);
    }
}
