//! Octahedral mapping between unit directions and the unit square.
//!
//! +Z folds onto the inner diamond with `(0,0,1) ↦ (0.5, 0.5)`; the −Z
//! hemisphere unfolds onto the four corner triangles.

use glam::{DVec2, DVec3};

fn sign_not_zero(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn oct_encode(dir: DVec3) -> DVec2 {
    let l1 = dir.x.abs() + dir.y.abs() + dir.z.abs();
    let p = DVec2::new(dir.x, dir.y) / l1;
    let folded = if dir.z < 0.0 {
        DVec2::new(
            (1.0 - p.y.abs()) * sign_not_zero(p.x),
            (1.0 - p.x.abs()) * sign_not_zero(p.y),
        )
    } else {
        p
    };
    folded * 0.5 + DVec2::splat(0.5)
}

pub fn oct_decode(uv: DVec2) -> DVec3 {
    let f = uv * 2.0 - DVec2::ONE;
    let z = 1.0 - f.x.abs() - f.y.abs();
    let (x, y) = if z < 0.0 {
        (
            (1.0 - f.y.abs()) * sign_not_zero(f.x),
            (1.0 - f.x.abs()) * sign_not_zero(f.y),
        )
    } else {
        (f.x, f.y)
    };
    DVec3::new(x, y, z).normalize()
}
