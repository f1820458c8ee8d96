//! 2D primitives for ray casting and disc collision.

/// Axis-aligned rectangle or circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rect { min: [f64; 2], max: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut x = libm::fmod(a, two_pi);
    if x <= -core::f64::consts::PI {
        x += two_pi;
    } else if x > core::f64::consts::PI {
        x -= two_pi;
    }
    x
}

impl Shape {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Shape::Rect { min, max } => p[0] >= min[0] && p[0] <= max[0] && p[1] >= min[1] && p[1] <= max[1],
            Shape::Circle { center, radius } => distance(p, center) <= radius,
        }
    }

    /// Distance from `p` to the shape (0 inside).
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        match *self {
            Shape::Rect { min, max } => {
                let cx = p[0].clamp(min[0], max[0]);
                let cy = p[1].clamp(min[1], max[1]);
                distance(p, [cx, cy])
            }
            Shape::Circle { center, radius } => (distance(p, center) - radius).max(0.0),
        }
    }

    /// Whether a disc of radius `r` at `p` overlaps the shape.
    pub fn hits_disc(&self, p: [f64; 2], r: f64) -> bool {
        self.distance_to(p) < r
    }

    /// Smallest `t >= 0` with `origin + t dir` on the boundary while entering
    /// from outside; `None` if the ray misses. `dir` must be unit length.
    pub fn ray_entry(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
        match *self {
            Shape::Rect { min, max } => {
                let (near, far) = slab(origin, dir, min, max)?;
                if far < 0.0 || near > far {
                    None
                } else {
                    Some(near.max(0.0))
                }
            }
            Shape::Circle { center, radius } => {
                let (t0, t1) = circle_roots(origin, dir, center, radius)?;
                if t1 < 0.0 {
                    None
                } else {
                    Some(t0.max(0.0))
                }
            }
        }
    }

    /// Exit distance of a ray starting inside the shape.
    pub fn ray_exit(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
        match *self {
            Shape::Rect { min, max } => {
                let (near, far) = slab(origin, dir, min, max)?;
                (near <= far && far >= 0.0).then_some(far)
            }
            Shape::Circle { center, radius } => {
                let (_, t1) = circle_roots(origin, dir, center, radius)?;
                (t1 >= 0.0).then_some(t1)
            }
        }
    }
}

fn slab(origin: [f64; 2], dir: [f64; 2], min: [f64; 2], max: [f64; 2]) -> Option<(f64, f64)> {
    let mut near = f64::NEG_INFINITY;
    let mut far = f64::INFINITY;
    for k in 0..2 {
        if dir[k] == 0.0 {
            if origin[k] < min[k] || origin[k] > max[k] {
                return None;
            }
        } else {
            let a = (min[k] - origin[k]) / dir[k];
            let b = (max[k] - origin[k]) / dir[k];
            near = near.max(a.min(b));
            far = far.min(a.max(b));
        }
    }
    Some((near, far))
}

fn circle_roots(origin: [f64; 2], dir: [f64; 2], center: [f64; 2], radius: f64) -> Option<(f64, f64)> {
    let ox = origin[0] - center[0];
    let oy = origin[1] - center[1];
    let b = ox * dir[0] + oy * dir[1];
    let c = ox * ox + oy * oy - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = libm::sqrt(disc);
    Some((-b - s, -b + s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_entry_and_exit() {
        let r = Shape::Rect {
            min: [1.0, -1.0],
            max: [2.0, 1.0],
        };
        assert_eq!(r.ray_entry([0.0, 0.0], [1.0, 0.0]), Some(1.0));
        assert_eq!(r.ray_entry([0.0, 0.0], [-1.0, 0.0]), None);
        assert_eq!(r.ray_entry([0.0, 5.0], [1.0, 0.0]), None);
        let arena = Shape::Rect {
            min: [0.0, 0.0],
            max: [4.0, 4.0],
        };
        assert_eq!(arena.ray_exit([1.0, 2.0], [1.0, 0.0]), Some(3.0));
        assert_eq!(arena.ray_exit([1.0, 2.0], [0.0, -1.0]), Some(2.0));
    }

    #[test]
    fn circle_entry_and_exit() {
        let c = Shape::Circle {
            center: [3.0, 0.0],
            radius: 1.0,
        };
        assert!((c.ray_entry([0.0, 0.0], [1.0, 0.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!((c.ray_exit([3.0, 0.0], [0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(c.ray_entry([0.0, 2.0], [1.0, 0.0]), None);
    }

    #[test]
    fn disc_overlap() {
        let r = Shape::Rect {
            min: [0.0, 0.0],
            max: [1.0, 1.0],
        };
        assert!(r.hits_disc([1.1, 0.5], 0.105));
        assert!(!r.hits_disc([1.2, 0.5], 0.105));
        assert!(r.hits_disc([0.5, 0.5], 0.1));
    }

    #[test]
    fn angle_wrapping() {
        use core::f64::consts::PI;
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert_eq!(wrap_angle(0.5), 0.5);
    }
}
