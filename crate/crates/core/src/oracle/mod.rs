//! Quasi-static grasp classifier.
//!
//! A grasp attempt is judged in three stages against the object at its true
//! pose: approach collision of the open gripper, closing of each finger
//! until first contact, and a stability check of the resulting two-patch
//! hold (friction-cone alignment and a lift-load feasibility problem).

pub mod lp;
pub mod mass;

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gripper::{finger_boxes, GripperModel, GripperPose, OrientedBox, FINGER_SIDES};
use crate::mesh::TriMesh;
use crate::pose_metrics::PoseErrorVector;
use crate::runner::ExperimentCondition;
use crate::se3::RigidTransform;

pub use lp::{resists_wrench, Contact, LoadCheck, LP_TOL};
pub use mass::{object_mass_properties, MassProperties, DEFAULT_DENSITY};

type V3 = Vector3<f64>;

const MM_TO_M: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Object friction coefficient; the effective contact coefficient is the
    /// smaller of this and the gripper's.
    pub friction: f64,
    /// m/s², world frame.
    pub gravity: V3,
    /// Finger-travel search tolerance, mm.
    pub close_resolution: f64,
    /// Probe points per finger pad (rounded to a square grid).
    pub contact_patch_samples: usize,
    pub lift_load_factor: f64,
    /// kg/m³.
    pub density: f64,
    /// Upper bound on the normal force of each finger, N.
    pub grip_force_n: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            friction: 0.5,
            gravity: V3::new(0.0, 0.0, -9.81),
            close_resolution: 0.05,
            contact_patch_samples: 64,
            lift_load_factor: 2.0,
            density: DEFAULT_DENSITY,
            grip_force_n: 40.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Parameter(format!("sim params: {what}")))
            }
        };
        check(self.friction > 0.0 && self.friction.is_finite(), "friction must be > 0")?;
        check(self.gravity.iter().all(|g| g.is_finite()), "gravity must be finite")?;
        check(
            self.close_resolution > 0.0 && self.close_resolution.is_finite(),
            "close_resolution must be > 0",
        )?;
        check(self.contact_patch_samples >= 4, "contact_patch_samples must be >= 4")?;
        check(
            self.lift_load_factor >= 1.0 && self.lift_load_factor.is_finite(),
            "lift_load_factor must be >= 1",
        )?;
        check(self.density > 0.0 && self.density.is_finite(), "density must be > 0")?;
        check(self.grip_force_n > 0.0 && self.grip_force_n.is_finite(), "grip_force_n must be > 0")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Success,
    Slipped,
    NoContact,
    Collision,
}

impl OutcomeKind {
    pub const ALL: [OutcomeKind; 4] = [
        OutcomeKind::Success,
        OutcomeKind::Slipped,
        OutcomeKind::NoContact,
        OutcomeKind::Collision,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Success => "success",
            OutcomeKind::Slipped => "slipped",
            OutcomeKind::NoContact => "no_contact",
            OutcomeKind::Collision => "collision",
        }
    }
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspOutcome {
    pub outcome: OutcomeKind,
    /// Patch centroids in the object frame, mm (empty before contact).
    pub contact_points: Vec<V3>,
    /// Inward travel of the +x and −x finger, mm.
    pub closing_travel_mm: [f64; 2],
    pub failure_detail: String,
}

impl GraspOutcome {
    fn new(outcome: OutcomeKind, detail: impl Into<String>) -> Self {
        Self {
            outcome,
            contact_points: Vec::new(),
            closing_travel_mm: [0.0; 2],
            failure_detail: detail.into(),
        }
    }

    pub fn is_success(&self) -> bool {
        self.outcome == OutcomeKind::Success
    }
}

/// One evaluated grasp under one pose pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub object_id: String,
    pub gripper: String,
    pub grasp_index: usize,
    pub condition: ExperimentCondition,
    /// Identifies the pose pair, e.g. `level2/draw17` or `scene/image`.
    pub pose_id: String,
    pub pose_gt: RigidTransform,
    pub pose_est: RigidTransform,
    pub errors: PoseErrorVector,
    #[serde(flatten)]
    pub outcome: GraspOutcome,
}

/// Evaluator bound to one true mesh; mass properties are computed once.
#[derive(Debug, Clone)]
pub struct GraspOracle<'a> {
    mesh: &'a TriMesh,
    mass: MassProperties,
    params: SimParams,
}

struct Pad {
    centroid: V3,
    normal: V3,
    radius: f64,
}

impl<'a> GraspOracle<'a> {
    pub fn new(mesh: &'a TriMesh, params: SimParams) -> Result<Self> {
        params.validate()?;
        let mass = object_mass_properties(mesh, params.density)?;
        Ok(Self { mesh, mass, params })
    }

    pub fn mass(&self) -> &MassProperties {
        &self.mass
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    fn touches(&self, b: &OrientedBox) -> bool {
        self.mesh
            .box_overlap(&RigidTransform::identity(), &b.half, &b.pose)
    }

    /// Classify one attempt with the object at `t_obj_true` and the gripper
    /// commanded to `target`.
    pub fn evaluate(
        &self,
        t_obj_true: &RigidTransform,
        gripper: &GripperModel,
        target: &GripperPose,
    ) -> Result<GraspOutcome> {
        gripper.check_opening(target.opening)?;
        // everything below happens in the object frame
        let rel = t_obj_true.inverse().compose(&target.t_w2g);
        let boxes = finger_boxes(
            gripper,
            &GripperPose {
                t_w2g: rel,
                opening: target.opening,
            },
        )?;
        if self.touches(&boxes.palm) {
            return Ok(GraspOutcome::new(OutcomeKind::Collision, "palm overlaps object on approach"));
        }
        for (i, f) in boxes.fingers.iter().enumerate() {
            if self.touches(f) {
                return Ok(GraspOutcome::new(
                    OutcomeKind::Collision,
                    format!("finger {i} overlaps object on approach"),
                ));
            }
        }

        let max_travel = (target.opening - gripper.min_opening) / 2.0;
        let travel = FINGER_SIDES.map(|s| self.first_contact(gripper, &rel, s, target.opening, max_travel));
        let closing_travel_mm = [0, 1].map(|i| travel[i].unwrap_or(max_travel));
        let with_travel = |mut o: GraspOutcome| {
            o.closing_travel_mm = closing_travel_mm;
            o
        };
        let (t0, t1) = match travel {
            [None, None] => {
                return Ok(with_travel(GraspOutcome::new(
                    OutcomeKind::NoContact,
                    "fingers closed fully without contact",
                )))
            }
            [Some(_), None] | [None, Some(_)] => {
                return Ok(with_travel(GraspOutcome::new(
                    OutcomeKind::Slipped,
                    "only one finger made contact",
                )))
            }
            [Some(a), Some(b)] => (a, b),
        };

        let closing_axis = rel.rotation().column(0).into_owned();
        let mu = self.params.friction.min(gripper.finger_friction);
        let cone = mu.atan();
        let mut pads = Vec::with_capacity(2);
        for (i, t) in [t0, t1].into_iter().enumerate() {
            let side = FINGER_SIDES[i];
            let inner = target.opening / 2.0 - t;
            let outward = closing_axis * side;
            match self.pad(gripper, &rel, side, inner, &outward) {
                Ok(pad) => pads.push(pad),
                Err(detail) => {
                    return Ok(with_travel(GraspOutcome::new(OutcomeKind::Slipped, detail)))
                }
            }
        }
        let contact_points: Vec<V3> = pads.iter().map(|p| p.centroid).collect();
        let slipped = |detail: String| {
            let mut o = with_travel(GraspOutcome::new(OutcomeKind::Slipped, detail));
            o.contact_points = contact_points.clone();
            o
        };

        for (i, pad) in pads.iter().enumerate() {
            let outward = closing_axis * FINGER_SIDES[i];
            let angle = pad.normal.dot(&outward).clamp(-1.0, 1.0).acos();
            if angle > cone {
                return Ok(slipped(format!(
                    "finger {i} contact normal {:.2}° off the closing axis exceeds cone {:.2}°",
                    angle.to_degrees(),
                    cone.to_degrees()
                )));
            }
        }

        let g_obj = t_obj_true.rotation().transpose() * self.params.gravity;
        let load = g_obj * (self.mass.mass_kg * self.params.lift_load_factor);
        let contacts: Vec<Contact> = pads
            .iter()
            .map(|p| Contact {
                position: (p.centroid - self.mass.centroid) * MM_TO_M,
                force_dir: -p.normal,
                torsion_radius: p.radius * MM_TO_M,
            })
            .collect();
        let check = resists_wrench(
            &contacts,
            mu,
            self.params.grip_force_n,
            [load.x, load.y, load.z, 0.0, 0.0, 0.0],
        );
        if !check.feasible {
            return Ok(slipped(format!(
                "contacts cannot carry the lift load (residual {:.3e})",
                check.residual
            )));
        }
        let mut o = with_travel(GraspOutcome::new(OutcomeKind::Success, ""));
        o.contact_points = contact_points;
        Ok(o)
    }

    /// Travel (mm) at which finger `side` first touches the object, bracketed
    /// to `close_resolution`; `None` if it closes fully.
    fn first_contact(
        &self,
        gripper: &GripperModel,
        rel: &RigidTransform,
        side: f64,
        opening: f64,
        max_travel: f64,
    ) -> Option<f64> {
        let inner0 = opening / 2.0;
        let overlaps = |t: f64| self.touches(&gripper.finger_box(rel, side, inner0 - t));
        // consecutive boxes one thickness apart tile the swept volume
        let step = gripper.finger_thickness();
        let mut lo = 0.0;
        let mut hi = None;
        let mut k = 1u32;
        while lo < max_travel {
            let t = (f64::from(k) * step).min(max_travel);
            if overlaps(t) {
                hi = Some(t);
                break;
            }
            lo = t;
            k += 1;
        }
        let mut hi = hi?;
        while hi - lo > self.params.close_resolution {
            let mid = 0.5 * (lo + hi);
            if overlaps(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(lo)
    }

    /// Probe the inner face of a finger for the contact patch.
    fn pad(
        &self,
        gripper: &GripperModel,
        rel: &RigidTransform,
        side: f64,
        inner: f64,
        outward: &V3,
    ) -> std::result::Result<Pad, String> {
        let n = ((self.params.contact_patch_samples as f64).sqrt().round() as usize).max(2);
        let h = gripper.finger_halfextents;
        let mut probes = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let y = -h.y + 2.0 * h.y * a as f64 / (n - 1) as f64;
                let z = -2.0 * h.z * b as f64 / (n - 1) as f64;
                let p = rel.transform_point(&V3::new(side * inner, y, z));
                probes.push(self.mesh.closest_point(&p));
            }
        }
        let d_min = probes.iter().map(|c| c.distance).fold(f64::INFINITY, f64::min);
        let spacing = (2.0 * h.y).max(2.0 * h.z) / (n - 1) as f64;
        if d_min > 2.0 * self.params.close_resolution + spacing {
            return Err(format!("contact is off the finger pad ({d_min:.3} mm away)"));
        }
        let patch: Vec<_> = probes
            .iter()
            .filter(|c| c.distance <= d_min + self.params.close_resolution)
            .collect();
        let mut normal = V3::zeros();
        let mut centroid = V3::zeros();
        for c in &patch {
            let mut nf = self.mesh.face_normals()[c.face_index];
            if nf.dot(outward) < 0.0 {
                nf = -nf;
            }
            normal += nf;
            centroid += c.point;
        }
        centroid /= patch.len() as f64;
        let norm = normal.norm();
        if norm < 1e-9 {
            return Err("contact normals cancel out".into());
        }
        let radius =
            patch.iter().map(|c| (c.point - centroid).norm()).sum::<f64>() / patch.len() as f64;
        Ok(Pad {
            centroid,
            normal: normal / norm,
            radius,
        })
    }
}

/// One-shot form of [`GraspOracle::evaluate`].
pub fn evaluate_grasp(
    mesh_true: &TriMesh,
    t_obj_true: &RigidTransform,
    gripper: &GripperModel,
    target: &GripperPose,
    params: &SimParams,
) -> Result<GraspOutcome> {
    GraspOracle::new(mesh_true, *params)?.evaluate(t_obj_true, gripper, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gripper::default_registry;
    use crate::mesh::primitives;

    fn robotiq85() -> GripperModel {
        default_registry()
            .into_iter()
            .find(|g| g.name == "Robotiq 2F-85")
            .unwrap()
    }

    /// Approach along −z of the object (from above is +z world), closing along x.
    fn face_grasp(offset: V3, opening: f64) -> GripperPose {
        // gripper +z points down onto the object: rotate 180° about x
        let r = RigidTransform::rot_x(180.0).with_translation(offset);
        GripperPose { t_w2g: r, opening }
    }

    #[test]
    fn centered_cube_grasp_succeeds() {
        let cube = primitives::cube(40.0);
        let g = robotiq85();
        let o = evaluate_grasp(
            &cube,
            &RigidTransform::identity(),
            &g,
            &face_grasp(V3::zeros(), 50.0),
            &SimParams::default(),
        )
        .unwrap();
        assert_eq!(o.outcome, OutcomeKind::Success, "{}", o.failure_detail);
        for t in o.closing_travel_mm {
            assert!((t - 5.0).abs() <= 0.05 + 1e-12, "{t}");
        }
        assert_eq!(o.contact_points.len(), 2);
    }

    #[test]
    fn retreated_grasp_has_no_contact() {
        let cube = primitives::cube(40.0);
        // gripper +z is world −z here, so retreating means moving up in world
        let o = evaluate_grasp(
            &cube,
            &RigidTransform::identity(),
            &robotiq85(),
            &face_grasp(V3::new(0.0, 0.0, 50.0), 50.0),
            &SimParams::default(),
        )
        .unwrap();
        assert_eq!(o.outcome, OutcomeKind::NoContact, "{}", o.failure_detail);
    }

    #[test]
    fn closing_axis_offset_thresholds() {
        // inner faces at ±25, thickness 10, cube half-width 20: the −x finger
        // sweeps into the cube for offsets in [5, 55]
        let cube = primitives::cube(40.0);
        let g = robotiq85();
        let oracle = GraspOracle::new(&cube, SimParams::default()).unwrap();
        for (dx, expected) in [
            (0.0, OutcomeKind::Success),
            (4.5, OutcomeKind::Success),
            (5.5, OutcomeKind::Collision),
            (30.0, OutcomeKind::Collision),
            (54.5, OutcomeKind::Collision),
            (55.5, OutcomeKind::NoContact),
            (70.0, OutcomeKind::NoContact),
        ] {
            let o = oracle
                .evaluate(&RigidTransform::identity(), &g, &face_grasp(V3::new(dx, 0.0, 0.0), 50.0))
                .unwrap();
            assert_eq!(o.outcome, expected, "offset {dx}: {}", o.failure_detail);
        }
    }

    #[test]
    fn steep_wedge_slips() {
        // slanted faces have normals 30° off the horizontal closing axis
        let wedge = primitives::wedge(40.0, 60.0, 30.0);
        let g = robotiq85();
        let pose = GripperPose {
            t_w2g: RigidTransform::rot_x(180.0).with_translation(V3::new(0.0, 0.0, 5.0)),
            opening: 60.0,
        };
        let o = evaluate_grasp(&wedge, &RigidTransform::identity(), &g, &pose, &SimParams::default())
            .unwrap();
        assert_eq!(o.outcome, OutcomeKind::Slipped, "{}", o.failure_detail);
        assert!(o.failure_detail.contains("cone"), "{}", o.failure_detail);
    }

    #[test]
    fn one_sided_contact_slips() {
        // the +x finger starts at x = 10 and reaches the cube; the −x finger
        // sweeps from −70 to −30 through empty space
        let cube = primitives::cube(10.0);
        let g = robotiq85();
        let o = evaluate_grasp(
            &cube,
            &RigidTransform::identity(),
            &g,
            &face_grasp(V3::new(-30.0, 0.0, 0.0), 80.0),
            &SimParams::default(),
        )
        .unwrap();
        assert_eq!(o.outcome, OutcomeKind::Slipped, "{}", o.failure_detail);
        assert!(o.failure_detail.contains("one finger"));
    }

    #[test]
    fn heavy_object_slips_under_lift_load() {
        let cube = primitives::cube(40.0);
        let params = SimParams {
            density: 2e6,
            ..Default::default()
        };
        let o = evaluate_grasp(
            &cube,
            &RigidTransform::identity(),
            &robotiq85(),
            &face_grasp(V3::zeros(), 50.0),
            &params,
        )
        .unwrap();
        assert_eq!(o.outcome, OutcomeKind::Slipped);
        assert!(o.failure_detail.contains("lift load"));
    }

    #[test]
    fn opening_outside_stroke_is_a_parameter_error() {
        let cube = primitives::cube(40.0);
        assert!(matches!(
            evaluate_grasp(
                &cube,
                &RigidTransform::identity(),
                &robotiq85(),
                &face_grasp(V3::zeros(), 90.0),
                &SimParams::default()
            ),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn outcome_strings() {
        let s: Vec<String> = OutcomeKind::ALL
            .iter()
            .map(|k| serde_json::to_string(k).unwrap())
            .collect();
        assert_eq!(s, ["\"success\"", "\"slipped\"", "\"no_contact\"", "\"collision\""]);
    }
}
