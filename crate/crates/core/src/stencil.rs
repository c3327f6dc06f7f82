//! Eight-probe interpolation stencils.
//!
//! Regular cells use trilinear weights on the resting grid. Cells distorted by
//! relocation, and cells that reach out of a cascade into the next coarser
//! one, use mean value coordinates of the actual corner positions.

use glam::{DVec3, IVec3};

use crate::probe::{ProbeId, ProbeVolume};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationStencil {
    pub probes: [ProbeId; 8],
    pub weights: [f64; 8],
    /// Corners were taken from two cascades.
    pub cross_cascade: bool,
    /// Point is outside every cascade; only the sky applies.
    pub sky_fallback: bool,
    pub used_mvc: bool,
    /// Finest cascade containing the point.
    pub cascade: usize,
}

impl InterpolationStencil {
    fn sky() -> Self {
        InterpolationStencil {
            probes: [ProbeId(0); 8],
            weights: [0.0; 8],
            cross_cascade: true,
            sky_fallback: true,
            used_mvc: false,
            cascade: usize::MAX,
        }
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_alive(&self) -> bool {
        !self.sky_fallback && self.weight_sum() > 0.0
    }

    /// Non-zero (probe, weight) pairs.
    pub fn entries(&self) -> impl Iterator<Item = (ProbeId, f64)> + '_ {
        self.probes
            .iter()
            .zip(self.weights.iter())
            .filter(|(_, &w)| w > 0.0)
            .map(|(&p, &w)| (p, w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilParams {
    /// Relocation (fraction of spacing) above which a cell switches to MVC.
    pub mvc_displacement: f64,
    /// Minimum cell volume (fraction of spacing³) for MVC on relocated cells.
    pub min_cell_volume: f64,
}

impl Default for StencilParams {
    fn default() -> Self {
        StencilParams {
            mvc_displacement: 0.25,
            min_cell_volume: 0.05,
        }
    }
}

/// Corner `c` has offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner_offset(c: usize) -> IVec3 {
    IVec3::new((c & 1) as i32, ((c >> 1) & 1) as i32, ((c >> 2) & 1) as i32)
}

pub fn trilinear_weights(frac: DVec3) -> [f64; 8] {
    let mut w = [0.0; 8];
    for (c, wc) in w.iter_mut().enumerate() {
        let o = corner_offset(c);
        let fx = if o.x == 1 { frac.x } else { 1.0 - frac.x };
        let fy = if o.y == 1 { frac.y } else { 1.0 - frac.y };
        let fz = if o.z == 1 { frac.z } else { 1.0 - frac.z };
        *wc = fx * fy * fz;
    }
    w
}

/// Outward-oriented triangles of a hexahedron with corners indexed as in
/// [`trilinear_weights`].
pub const HEX_TRIANGLES: [[usize; 3]; 12] = [
    [0, 4, 6],
    [0, 6, 2],
    [1, 3, 7],
    [1, 7, 5],
    [0, 1, 5],
    [0, 5, 4],
    [2, 6, 7],
    [2, 7, 3],
    [0, 2, 3],
    [0, 3, 1],
    [4, 5, 7],
    [4, 7, 6],
];

/// Signed volume of a hexahedron given as 12 outward triangles.
pub fn hex_volume(corners: &[DVec3; 8]) -> f64 {
    HEX_TRIANGLES
        .iter()
        .map(|t| corners[t[0]].dot(corners[t[1]].cross(corners[t[2]])))
        .sum::<f64>()
        / 6.0
}

/// Mean value coordinates of `x` with respect to a closed, consistently
/// oriented triangle mesh. Reproduces affine functions exactly; weights are
/// positive inside convex meshes and may be negative elsewhere. Returns
/// `None` if the weights cannot be normalised (degenerate mesh).
pub fn mean_value_coordinates(vertices: &[DVec3], triangles: &[[usize; 3]], x: DVec3) -> Option<Vec<f64>> {
    const EPS: f64 = 1e-10;
    let n = vertices.len();
    let mut d = vec![0.0; n];
    let mut u = vec![DVec3::ZERO; n];
    for j in 0..n {
        let v = vertices[j] - x;
        d[j] = v.length();
        if d[j] < EPS {
            let mut w = vec![0.0; n];
            w[j] = 1.0;
            return Some(w);
        }
        u[j] = v / d[j];
    }

    let mut w = vec![0.0; n];
    for tri in triangles {
        let p = [tri[0], tri[1], tri[2]];
        let mut theta = [0.0; 3];
        for i in 0..3 {
            let l = (u[p[(i + 1) % 3]] - u[p[(i + 2) % 3]]).length();
            theta[i] = 2.0 * (l / 2.0).min(1.0).asin();
        }
        let h = (theta[0] + theta[1] + theta[2]) / 2.0;
        if std::f64::consts::PI - h < EPS {
            // x lies inside this triangle: planar barycentric coordinates.
            let mut out = vec![0.0; n];
            for i in 0..3 {
                out[p[i]] = theta[i].sin() * d[p[(i + 2) % 3]] * d[p[(i + 1) % 3]];
            }
            let s: f64 = out.iter().sum();
            if s <= 0.0 {
                return None;
            }
            out.iter_mut().for_each(|v| *v /= s);
            return Some(out);
        }
        let det = u[p[0]].dot(u[p[1]].cross(u[p[2]]));
        let sign = if det < 0.0 { -1.0 } else { 1.0 };
        let mut c = [0.0; 3];
        let mut s = [0.0; 3];
        let mut coplanar = false;
        for i in 0..3 {
            let s_next = theta[(i + 1) % 3].sin();
            let s_prev = theta[(i + 2) % 3].sin();
            c[i] = (2.0 * h.sin() * (h - theta[i]).sin()) / (s_next * s_prev) - 1.0;
            s[i] = sign * (1.0 - c[i] * c[i]).max(0.0).sqrt();
            if s[i].abs() <= EPS {
                coplanar = true;
            }
        }
        if coplanar {
            // x is in the triangle's plane but outside it: no contribution.
            continue;
        }
        for i in 0..3 {
            let next = (i + 1) % 3;
            let prev = (i + 2) % 3;
            let num = theta[i] - c[next] * theta[prev] - c[prev] * theta[next];
            let den = d[p[i]] * theta[next].sin() * s[prev];
            w[p[i]] += num / den;
        }
    }
    let total: f64 = w.iter().sum();
    if !total.is_finite() || total.abs() < EPS {
        return None;
    }
    w.iter_mut().for_each(|v| *v /= total);
    Some(w)
}

/// MVC over the 8 corners of a (possibly distorted) hexahedral cell.
pub fn hex_mean_value_coordinates(corners: &[DVec3; 8], x: DVec3) -> Option<[f64; 8]> {
    let w = mean_value_coordinates(corners, &HEX_TRIANGLES, x)?;
    let mut out = [0.0; 8];
    out.copy_from_slice(&w);
    Some(out)
}

/// Interpolation stencil for `point`, taken from the finest cascade whose
/// half-cell-expanded hull contains it.
pub fn interpolation_stencil(volume: &ProbeVolume, point: DVec3, params: StencilParams) -> InterpolationStencil {
    let Some(ci) = volume.cascades.iter().position(|c| c.covers(point)) else {
        return InterpolationStencil::sky();
    };
    let cascade = &volume.cascades[ci];
    let res = cascade.resolution.as_ivec3();
    let g = cascade.grid_position(point);
    let floor = g.floor().as_ivec3();
    let outside = floor.cmplt(IVec3::ZERO).any() || (floor + IVec3::ONE).cmpge(res).any();

    if outside && ci + 1 < volume.cascades.len() {
        if let Some(s) = cross_cascade_stencil(volume, ci, point, floor) {
            return s;
        }
    }

    let base = floor.clamp(IVec3::ZERO, res - IVec3::splat(2));
    let frac = (g - base.as_dvec3()).clamp(DVec3::ZERO, DVec3::ONE);
    let mut probes = [ProbeId(0); 8];
    let mut corners = [DVec3::ZERO; 8];
    let mut max_shift: f64 = 0.0;
    for c in 0..8 {
        let coord = base + corner_offset(c);
        let li = cascade.local_index(coord).expect("clamped corner in range");
        probes[c] = volume.id(ci, li);
        let probe = &cascade.probes[li];
        corners[c] = probe.pos;
        max_shift = max_shift.max(probe.pos.distance(probe.resting_pos));
    }
    let mut weights = trilinear_weights(frac);
    let mut used_mvc = false;
    if !outside && max_shift > params.mvc_displacement * cascade.spacing {
        let volume_ok = hex_volume(&corners) > params.min_cell_volume * cascade.spacing.powi(3);
        if volume_ok {
            if let Some(w) = hex_mean_value_coordinates(&corners, point) {
                if w.iter().all(|&v| v >= 0.0) {
                    weights = w;
                    used_mvc = true;
                }
            }
        }
    }
    let mut s = InterpolationStencil {
        probes,
        weights,
        cross_cascade: false,
        sky_fallback: false,
        used_mvc,
        cascade: ci,
    };
    zero_dead_and_normalize(volume, &mut s);
    s
}

/// Cell hanging off the edge of cascade `ci`: corners outside it are
/// replaced by probes of the next coarser cascade lying beyond them.
fn cross_cascade_stencil(volume: &ProbeVolume, ci: usize, point: DVec3, floor: IVec3) -> Option<InterpolationStencil> {
    let fine = &volume.cascades[ci];
    let coarse = &volume.cascades[ci + 1];
    let coarse_res = coarse.resolution.as_ivec3();
    let mut probes = [ProbeId(0); 8];
    let mut corners = [DVec3::ZERO; 8];
    for c in 0..8 {
        let o = corner_offset(c);
        let coord = floor + o;
        if let Some(li) = fine.local_index(coord) {
            probes[c] = volume.id(ci, li);
            corners[c] = fine.probes[li].pos;
            continue;
        }
        // Round the missing corner away from the cell along each axis so the
        // substituted hexahedron still encloses the point.
        let target = fine.resting_position(coord);
        let gc = coarse.grid_position(target);
        let mut cc = IVec3::ZERO;
        for a in 0..3 {
            let v = if o[a] == 1 { gc[a].ceil() } else { gc[a].floor() };
            cc[a] = v as i32;
        }
        if cc.cmplt(IVec3::ZERO).any() || cc.cmpge(coarse_res).any() {
            return None;
        }
        let li = coarse.local_index(cc)?;
        probes[c] = volume.id(ci + 1, li);
        corners[c] = coarse.probes[li].pos;
    }
    if hex_volume(&corners) <= 0.0 {
        return None;
    }
    let w = hex_mean_value_coordinates(&corners, point)?;
    if w.iter().any(|&v| v < 0.0) {
        return None;
    }
    let mut s = InterpolationStencil {
        probes,
        weights: w,
        cross_cascade: true,
        sky_fallback: false,
        used_mvc: true,
        cascade: ci,
    };
    zero_dead_and_normalize(volume, &mut s);
    Some(s)
}

fn zero_dead_and_normalize(volume: &ProbeVolume, s: &mut InterpolationStencil) {
    for (p, w) in s.probes.iter().zip(s.weights.iter_mut()) {
        if volume.probe(*p).dead || *w < 0.0 {
            *w = 0.0;
        }
    }
    let total: f64 = s.weights.iter().sum();
    if total > 0.0 {
        s.weights.iter_mut().for_each(|w| *w /= total);
    }
}
