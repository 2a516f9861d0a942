//! Parametric parallel-jaw grippers.
//!
//! Gripper frame: +z is the approach direction, x is the closing axis and
//! the fingertips lie in the plane z = 0, with finger bodies extending
//! toward −z and the palm behind them.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};
use crate::se3::RigidTransform;

type V3 = Vector3<f64>;

pub const DEFAULT_FRICTION: f64 = 0.5;

const DEFAULT_REGISTRY: &str = include_str!("../../../configs/grippers.cfg");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GripperModel {
    pub name: String,
    pub max_opening: f64,
    pub min_opening: f64,
    /// Half extents of one finger box: (thickness, width, depth) / 2.
    pub finger_halfextents: V3,
    pub palm_halfextents: V3,
    /// Distance from the finger base (z = −depth) back to the palm center.
    pub palm_offset: f64,
    pub finger_friction: f64,
}

/// A box given by its center pose and half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub pose: RigidTransform,
    pub half: V3,
}

impl OrientedBox {
    pub fn transformed(&self, t: &RigidTransform) -> OrientedBox {
        OrientedBox {
            pose: t.compose(&self.pose),
            half: self.half,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperPose {
    pub t_w2g: RigidTransform,
    pub opening: f64,
}

/// Finger boxes (`fingers[0]` on +x, `fingers[1]` on −x) and the palm box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperBoxes {
    pub fingers: [OrientedBox; 2],
    pub palm: OrientedBox,
}

/// Sign of the closing-axis side for finger `i`.
pub const FINGER_SIDES: [f64; 2] = [1.0, -1.0];

impl GripperModel {
    /// Build from full box sizes; `palm_offset` defaults to half the palm depth.
    pub fn new(
        name: impl Into<String>,
        max_opening: f64,
        min_opening: f64,
        finger_size: V3,
        palm_size: V3,
        palm_offset: Option<f64>,
        finger_friction: f64,
    ) -> Result<Self> {
        let g = GripperModel {
            name: name.into(),
            max_opening,
            min_opening,
            finger_halfextents: finger_size / 2.0,
            palm_halfextents: palm_size / 2.0,
            palm_offset: palm_offset.unwrap_or(palm_size.z / 2.0),
            finger_friction,
        };
        g.validate().map_err(|(_, m)| Error::Parameter(m))?;
        Ok(g)
    }

    /// Offending field name and message on failure.
    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.name.trim().is_empty() {
            return Err(("name", "gripper name is empty".into()));
        }
        if !(self.min_opening >= 0.0 && self.min_opening.is_finite()) {
            return Err(("min_opening", format!("min_opening must be >= 0, got {}", self.min_opening)));
        }
        if !(self.max_opening > self.min_opening && self.max_opening.is_finite()) {
            return Err((
                "min_opening",
                format!(
                    "min_opening {} must be below max_opening {}",
                    self.min_opening, self.max_opening
                ),
            ));
        }
        if !self.finger_halfextents.iter().all(|&h| h > 0.0 && h.is_finite()) {
            return Err(("finger_size", "finger extents must be > 0".into()));
        }
        if !self.palm_halfextents.iter().all(|&h| h > 0.0 && h.is_finite()) {
            return Err(("palm_size", "palm extents must be > 0".into()));
        }
        if !(self.palm_offset.is_finite() && self.palm_offset >= 0.0) {
            return Err(("palm_offset", "palm_offset must be >= 0".into()));
        }
        if !(self.finger_friction > 0.0 && self.finger_friction.is_finite()) {
            return Err(("friction", "friction must be > 0".into()));
        }
        Ok(())
    }

    pub fn finger_thickness(&self) -> f64 {
        2.0 * self.finger_halfextents.x
    }

    pub fn finger_depth(&self) -> f64 {
        2.0 * self.finger_halfextents.z
    }

    pub fn check_opening(&self, opening: f64) -> Result<()> {
        if !(opening >= self.min_opening && opening <= self.max_opening) {
            return Err(Error::Parameter(format!(
                "opening {opening} mm outside the stroke [{}, {}] of {}",
                self.min_opening, self.max_opening, self.name
            )));
        }
        Ok(())
    }

    /// Finger `side` (+1 or −1) with its inner face at `x = side·inner_x` in the gripper frame.
    pub fn finger_box(&self, t_w2g: &RigidTransform, side: f64, inner_x: f64) -> OrientedBox {
        let h = self.finger_halfextents;
        let center = V3::new(side * (inner_x + h.x), 0.0, -h.z);
        OrientedBox {
            pose: t_w2g.compose(&RigidTransform::from_translation(center)),
            half: h,
        }
    }

    pub fn palm_box(&self, t_w2g: &RigidTransform) -> OrientedBox {
        let center = V3::new(0.0, 0.0, -(self.finger_depth() + self.palm_offset));
        OrientedBox {
            pose: t_w2g.compose(&RigidTransform::from_translation(center)),
            half: self.palm_halfextents,
        }
    }
}

/// Place both fingers (inner faces `opening` apart) and the palm at `pose`.
pub fn finger_boxes(g: &GripperModel, pose: &GripperPose) -> Result<GripperBoxes> {
    g.check_opening(pose.opening)?;
    let inner = pose.opening / 2.0;
    Ok(GripperBoxes {
        fingers: FINGER_SIDES.map(|s| g.finger_box(&pose.t_w2g, s, inner)),
        palm: g.palm_box(&pose.t_w2g),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    #[serde(default)]
    gripper: Vec<GripperEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GripperEntry {
    name: String,
    max_opening: f64,
    min_opening: f64,
    finger_size: [f64; 3],
    palm_size: [f64; 3],
    palm_offset: Option<f64>,
    friction: Option<f64>,
}

pub fn load_gripper_registry(path: &Path) -> Result<Vec<GripperModel>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gripper_registry(&text, &path.display().to_string())
}

/// Parse a registry of `[[gripper]]` tables.
pub fn parse_gripper_registry(text: &str, source_name: &str) -> Result<Vec<GripperModel>> {
    let file: RegistryFile = toml::from_str(text).map_err(|e| {
        let location = e
            .span()
            .map_or(Location::Unknown, |s| Location::Byte(s.start as u64));
        Error::format(source_name, location, e.message().to_string())
    })?;
    if file.gripper.is_empty() {
        return Err(Error::format(
            source_name,
            Location::Key("gripper".into()),
            "registry defines no grippers",
        ));
    }
    let mut out: Vec<GripperModel> = Vec::with_capacity(file.gripper.len());
    for (i, e) in file.gripper.into_iter().enumerate() {
        let palm = V3::from(e.palm_size);
        let g = GripperModel {
            name: e.name,
            max_opening: e.max_opening,
            min_opening: e.min_opening,
            finger_halfextents: V3::from(e.finger_size) / 2.0,
            palm_halfextents: palm / 2.0,
            palm_offset: e.palm_offset.unwrap_or(palm.z / 2.0),
            finger_friction: e.friction.unwrap_or(DEFAULT_FRICTION),
        };
        if let Err((key, message)) = g.validate() {
            return Err(Error::format(
                source_name,
                Location::Key(format!("gripper[{i}].{key}")),
                message,
            ));
        }
        if out.iter().any(|o| o.name == g.name) {
            return Err(Error::format(
                source_name,
                Location::Key(format!("gripper[{i}].name")),
                format!("duplicate gripper name `{}`", g.name),
            ));
        }
        out.push(g);
    }
    Ok(out)
}

/// The shipped registry of nine grippers.
pub fn default_registry() -> Vec<GripperModel> {
    parse_gripper_registry(DEFAULT_REGISTRY, "configs/grippers.cfg")
        .expect("shipped gripper registry is valid")
}

pub fn find_gripper<'a>(registry: &'a [GripperModel], name: &str) -> Result<&'a GripperModel> {
    registry
        .iter()
        .find(|g| g.name == name)
        .ok_or_else(|| Error::Config(format!("unknown gripper `{name}`")))
}
