use glam::{DVec2, DVec3};

use crate::probe::Viewpoint;

/// Pinhole camera. Pixel `(x, y)` has its centre at `(x + 0.5, y + 0.5)` in
/// continuous pixel coordinates, with `y` growing downwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: DVec3,
    pub forward: DVec3,
    pub up: DVec3,
    pub right: DVec3,
    pub vfov_degrees: f64,
}

impl Camera {
    pub fn look_at(position: DVec3, target: DVec3, up: DVec3, vfov_degrees: f64) -> Self {
        let forward = (target - position).normalize();
        let right = forward.cross(up).normalize();
        let up = right.cross(forward);
        Camera {
            position,
            forward,
            up,
            right,
            vfov_degrees,
        }
    }

    fn tan_half(&self) -> f64 {
        (self.vfov_degrees.to_radians() * 0.5).tan()
    }

    /// Unit view-ray direction through the centre of pixel `(x, y)`.
    pub fn ray_dir(&self, x: usize, y: usize, width: usize, height: usize) -> DVec3 {
        let aspect = width as f64 / height as f64;
        let t = self.tan_half();
        let sx = (2.0 * (x as f64 + 0.5) / width as f64 - 1.0) * aspect * t;
        let sy = (1.0 - 2.0 * (y as f64 + 0.5) / height as f64) * t;
        (self.forward + self.right * sx + self.up * sy).normalize()
    }

    /// Continuous pixel coordinates of a world point, if in front of the camera.
    pub fn project(&self, p: DVec3, width: usize, height: usize) -> Option<DVec2> {
        let v = p - self.position;
        let z = v.dot(self.forward);
        if z <= 1e-9 {
            return None;
        }
        let aspect = width as f64 / height as f64;
        let t = self.tan_half();
        let sx = v.dot(self.right) / (z * aspect * t);
        let sy = v.dot(self.up) / (z * t);
        Some(DVec2::new(
            (sx + 1.0) * 0.5 * width as f64,
            (1.0 - sy) * 0.5 * height as f64,
        ))
    }

    pub fn viewpoint(&self) -> Viewpoint {
        Viewpoint {
            position: self.position,
            forward: self.forward,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_inverts_ray_generation() {
        let cam = Camera::look_at(DVec3::new(1.0, 2.0, 3.0), DVec3::ZERO, DVec3::Y, 50.0);
        let (w, h) = (64, 36);
        for (x, y) in [(0, 0), (10, 20), (63, 35), (32, 18)] {
            let p = cam.position + cam.ray_dir(x, y, w, h) * 4.2;
            let px = cam.project(p, w, h).unwrap();
            assert!((px - DVec2::new(x as f64 + 0.5, y as f64 + 0.5)).length() < 1e-9);
        }
    }
}
