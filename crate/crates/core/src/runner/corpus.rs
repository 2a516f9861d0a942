use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::mesh::degrade::degrade_mesh;
use crate::mesh::io::load_mesh_with_units;
use crate::mesh::{primitives, TriMesh};
use crate::pose_metrics::SymmetrySet;
use crate::se3::RigidTransform;
use crate::seed;

use super::config::ObjectSpec;

type V3 = Vector3<f64>;

/// Built-in shapes with their default dimensions, mm.
pub const PRIMITIVES: [(&str, &[f64]); 6] = [
    ("cube", &[40.0]),
    ("box", &[30.0, 60.0, 90.0]),
    ("cylinder", &[25.0, 80.0]),
    ("icosphere", &[30.0]),
    ("l_bracket", &[60.0, 15.0, 30.0]),
    ("wedge", &[40.0, 60.0, 30.0]),
];

/// The five desk-scale objects and three grippers of the standard corpus.
pub const DESK_OBJECTS: [&str; 5] = ["cube", "box", "cylinder", "icosphere", "l_bracket"];
pub const DESK_GRIPPERS: [&str; 3] = ["Robotiq 2F-85", "Franka Hand", "WSG 50"];

fn dims<const N: usize>(name: &str, size: &[f64]) -> Result<[f64; N]> {
    let v: [f64; N] = size
        .try_into()
        .map_err(|_| Error::Config(format!("primitive `{name}` takes {N} size values, got {}", size.len())))?;
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::Config(format!("primitive `{name}` sizes must be > 0")));
    }
    Ok(v)
}

/// Tessellated built-in shape; flat faces are subdivided so degradation
/// and the point metrics have vertices to work with.
pub fn primitive_mesh(name: &str, size: Option<&[f64]>) -> Result<TriMesh> {
    let default = PRIMITIVES
        .iter()
        .find(|p| p.0 == name)
        .ok_or_else(|| Error::Config(format!("unknown primitive `{name}`")))?
        .1;
    let size = size.unwrap_or(default);
    Ok(match name {
        "cube" => {
            let [e] = dims(name, size)?;
            primitives::subdivided_cube(e, 8)
        }
        "box" => {
            let [x, y, z] = dims(name, size)?;
            primitives::subdivided_cuboid(V3::new(x, y, z), 8)
        }
        "cylinder" => {
            let [r, h] = dims(name, size)?;
            primitives::cylinder(r, h, 48)
        }
        "icosphere" => {
            let [r] = dims(name, size)?;
            primitives::icosphere(r, 3)
        }
        "l_bracket" => {
            let [leg, th, depth] = dims(name, size)?;
            primitives::l_bracket(leg, th, depth)
        }
        "wedge" => {
            let [base, apex, depth] = dims(name, size)?;
            if apex >= 180.0 {
                return Err(Error::Config("wedge apex angle must be below 180°".into()));
            }
            primitives::wedge(base, apex, depth)
        }
        _ => unreachable!("checked against PRIMITIVES"),
    })
}

fn half_turns(axes: &[V3]) -> Vec<RigidTransform> {
    axes.iter()
        .map(|a| RigidTransform::from_axis_angle(a, std::f64::consts::PI))
        .collect()
}

/// Named symmetry group, a JSON sidecar path, or `none`.
pub fn symmetry_from_spec(spec: &str) -> Result<SymmetrySet> {
    Ok(match spec {
        "none" => SymmetrySet::identity(),
        "cube" => SymmetrySet::cube_group(),
        // a box with three distinct edge lengths
        "box" => SymmetrySet::new(half_turns(&[V3::x(), V3::y(), V3::z()]), Vec::new())?,
        "cylinder" => SymmetrySet::new(
            half_turns(&[V3::x()]),
            vec![crate::pose_metrics::ContinuousAxis {
                axis: V3::z(),
                offset: V3::zeros(),
                steps: crate::pose_metrics::DEFAULT_AXIS_STEPS,
            }],
        )?,
        "sphere" => SymmetrySet::new(
            half_turns(&[V3::x()]),
            vec![crate::pose_metrics::ContinuousAxis {
                axis: V3::z(),
                offset: V3::zeros(),
                steps: crate::pose_metrics::DEFAULT_AXIS_STEPS,
            }],
        )?,
        path => SymmetrySet::load(Path::new(path))?,
    })
}

fn default_symmetry(primitive: &str, size: Option<&[f64]>) -> &'static str {
    match primitive {
        "cube" => "cube",
        "box" => match size {
            Some([x, y, z]) if x == y || y == z || x == z => "none",
            _ => "box",
        },
        "cylinder" => "cylinder",
        "icosphere" => "sphere",
        _ => "none",
    }
}

/// One corpus object ready for an experiment.
#[derive(Debug, Clone)]
pub struct ObjectData {
    pub id: String,
    pub gt_mesh: TriMesh,
    pub recon_mesh: Option<TriMesh>,
    pub symmetry: SymmetrySet,
}

pub fn load_object(spec: &ObjectSpec, root_seed: u64) -> Result<ObjectData> {
    let gt_mesh = match (&spec.primitive, &spec.mesh) {
        (Some(p), None) => primitive_mesh(p, spec.size.as_deref())?,
        (None, Some(path)) => load_mesh_with_units(path, spec.units)?,
        _ => return Err(Error::Config(format!("object `{}` needs exactly one of primitive or mesh", spec.id))),
    };
    let recon_mesh = match (&spec.recon_mesh, &spec.degrade) {
        (Some(path), _) => Some(load_mesh_with_units(path, spec.units)?),
        (None, Some(d)) => Some(degrade_mesh(&gt_mesh, d, seed::derive(root_seed, "degrade", &[&spec.id]))?),
        (None, None) => None,
    };
    let sym_name = match (&spec.symmetry, &spec.primitive) {
        (Some(s), _) => s.as_str(),
        (None, Some(p)) => default_symmetry(p, spec.size.as_deref()),
        (None, None) => "none",
    };
    Ok(ObjectData {
        id: spec.id.clone(),
        gt_mesh,
        recon_mesh,
        symmetry: symmetry_from_spec(sym_name)?,
    })
}
