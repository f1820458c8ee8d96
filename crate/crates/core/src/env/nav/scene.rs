use alloc::string::String;
use alloc::vec::Vec;

use super::geometry::{distance, Shape};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Radians, counter-clockwise from +x.
    pub heading: f64,
}

impl Pose {
    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Static layout: arena boundary, obstacles and robot start poses.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub arena: Shape,
    pub obstacles: Vec<Shape>,
    pub starts: Vec<Pose>,
}

impl Scene {
    /// Longest distance between two points of the arena.
    pub fn diagonal(&self) -> f64 {
        match self.arena {
            Shape::Rect { min, max } => distance(min, max),
            Shape::Circle { radius, .. } => 2.0 * radius,
        }
    }

    /// `p` is at least `margin` inside the arena and away from obstacles.
    pub fn is_free(&self, p: [f64; 2], margin: f64) -> bool {
        let inside = match self.arena {
            Shape::Rect { min, max } => {
                p[0] >= min[0] + margin && p[0] <= max[0] - margin && p[1] >= min[1] + margin && p[1] <= max[1] - margin
            }
            Shape::Circle { center, radius } => distance(p, center) <= radius - margin,
        };
        inside && self.obstacles.iter().all(|o| !o.hits_disc(p, margin) && !o.contains(p))
    }

    /// Whether a disc at `p` touches a wall or an obstacle.
    pub fn disc_collides(&self, p: [f64; 2], r: f64) -> bool {
        let outside = match self.arena {
            Shape::Rect { min, max } => p[0] - r < min[0] || p[0] + r > max[0] || p[1] - r < min[1] || p[1] + r > max[1],
            Shape::Circle { center, radius } => distance(p, center) + r > radius,
        };
        outside || self.obstacles.iter().any(|o| o.hits_disc(p, r))
    }

    /// Checks that `n` start poses exist and are collision-free and apart.
    pub fn validate(&self, n_robots: usize, robot_radius: f64) -> Result<()> {
        if self.starts.len() < n_robots {
            return Err(Error::Config(alloc::format!(
                "scene '{}' has {} start poses, {} robots requested",
                self.name,
                self.starts.len(),
                n_robots
            )));
        }
        let starts = &self.starts[..n_robots];
        for (i, s) in starts.iter().enumerate() {
            if self.disc_collides(s.position(), robot_radius) {
                return Err(Error::Config(alloc::format!("scene '{}': start {i} collides", self.name)));
            }
            if starts[..i].iter().any(|o| distance(o.position(), s.position()) < 2.0 * robot_radius) {
                return Err(Error::Config(alloc::format!("scene '{}': start {i} overlaps another", self.name)));
            }
        }
        Ok(())
    }
}
