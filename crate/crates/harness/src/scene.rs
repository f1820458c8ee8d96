//! Scene files: arena bounds, obstacles and start poses in TOML.

use std::path::Path;

use gdq_core::env::nav::geometry::Shape;
use gdq_core::env::nav::{Pose, Scene};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeSpec {
    Rect { min: [f64; 2], max: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
}

impl From<&ShapeSpec> for Shape {
    fn from(s: &ShapeSpec) -> Self {
        match *s {
            ShapeSpec::Rect { min, max } => Shape::Rect { min, max },
            ShapeSpec::Circle { center, radius } => Shape::Circle { center, radius },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub heading_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub name: String,
    pub arena: ShapeSpec,
    #[serde(default)]
    pub obstacles: Vec<ShapeSpec>,
    pub starts: Vec<StartSpec>,
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let s: SceneFile = toml::from_str(text).map_err(|e| HarnessError::Config(format!("scene: {e}")))?;
        for (i, o) in s.obstacles.iter().enumerate() {
            let ok = match o {
                ShapeSpec::Rect { min, max } => min[0] < max[0] && min[1] < max[1],
                ShapeSpec::Circle { radius, .. } => *radius > 0.0,
            };
            if !ok {
                return Err(HarnessError::Config(format!("scene '{}': obstacle {i} is degenerate", s.name)));
            }
        }
        Ok(s)
    }

    pub fn to_scene(&self) -> Scene {
        Scene {
            name: self.name.clone(),
            arena: (&self.arena).into(),
            obstacles: self.obstacles.iter().map(Shape::from).collect(),
            starts: self
                .starts
                .iter()
                .map(|s| Pose {
                    x: s.x,
                    y: s.y,
                    heading: s.heading_deg.to_radians(),
                })
                .collect(),
        }
    }

    /// Stable text form used for hashing.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }
}

pub fn load_scene(path: &Path) -> Result<SceneFile, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("env.scene: {}: {e}", path.display())))?;
    SceneFile::parse(&text)
}
