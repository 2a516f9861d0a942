use std::collections::HashMap;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

type V3 = Vector3<f64>;

pub const DEFAULT_DENSITY: f64 = 500.0;

const MM3_TO_M3: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassProperties {
    pub mass_kg: f64,
    pub volume_mm3: f64,
    /// Center of mass in the mesh frame, mm.
    pub centroid: V3,
    /// Set when the mesh is not closed and the volume is only approximate.
    pub open_mesh_warning: bool,
}

/// Mass and center of mass of a uniform solid bounded by `mesh`, via signed
/// tetrahedra against the bounding-box center.
pub fn object_mass_properties(mesh: &TriMesh, density: f64) -> Result<MassProperties> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(Error::Parameter(format!("density must be > 0, got {density}")));
    }
    let origin = mesh.bounds().center();
    let mut volume = 0.0;
    let mut moment = V3::zeros();
    for f in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle(f).map(|v| v - origin);
        let v = a.dot(&b.cross(&c)) / 6.0;
        volume += v;
        moment += (a + b + c) * (v / 4.0);
    }
    if volume.abs() < 1.0 {
        return Err(Error::Content(format!(
            "enclosed volume {volume:.3e} mm³ is below 1 mm³"
        )));
    }
    Ok(MassProperties {
        mass_kg: volume.abs() * MM3_TO_M3 * density,
        volume_mm3: volume.abs(),
        centroid: origin + moment / volume,
        open_mesh_warning: !is_closed(mesh),
    })
}

/// Every directed edge has exactly one opposite twin.
pub fn is_closed(mesh: &TriMesh) -> bool {
    let mut edges: HashMap<(u32, u32), u32> = HashMap::new();
    for t in mesh.triangles() {
        for k in 0..3 {
            *edges.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
        }
    }
    edges
        .iter()
        .all(|(&(a, b), &n)| n == 1 && edges.get(&(b, a)) == Some(&1))
}
