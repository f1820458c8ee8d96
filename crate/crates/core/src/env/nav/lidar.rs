use alloc::vec::Vec;

use super::geometry::Shape;
use super::scene::{Pose, Scene};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarConfig {
    pub beams: usize,
    /// Total field of view in degrees, centred on the heading.
    pub fov_deg: f64,
    pub max_range: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            beams: 35,
            fov_deg: 240.0,
            max_range: 3.5,
        }
    }
}

impl LidarConfig {
    /// Bearing of beam `k` relative to the heading, in radians. Beams are
    /// evenly spaced from `-fov/2` to `+fov/2`.
    pub fn bearing(&self, k: usize) -> f64 {
        let half = self.fov_deg / 2.0;
        let deg = if self.beams == 1 {
            0.0
        } else {
            -half + self.fov_deg * k as f64 / (self.beams - 1) as f64
        };
        deg.to_radians()
    }
}

/// Ranges from the pose centre to the nearest wall, obstacle or other robot
/// disc along each beam, clamped to the maximum range.
pub fn scan(scene: &Scene, pose: Pose, others: &[[f64; 2]], robot_radius: f64, cfg: &LidarConfig) -> Vec<f64> {
    let origin = pose.position();
    (0..cfg.beams)
        .map(|k| {
            let a = pose.heading + cfg.bearing(k);
            let dir = [libm::cos(a), libm::sin(a)];
            let mut best = scene.arena.ray_exit(origin, dir).unwrap_or(0.0);
            for o in &scene.obstacles {
                if let Some(t) = o.ray_entry(origin, dir) {
                    best = best.min(t);
                }
            }
            for &c in others {
                let disc = Shape::Circle {
                    center: c,
                    radius: robot_radius,
                };
                if let Some(t) = disc.ray_entry(origin, dir) {
                    best = best.min(t);
                }
            }
            best.min(cfg.max_range)
        })
        .collect()
}
