//! Antipodal grasp sampling and canonical grasp libraries.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};
use crate::gripper::{GripperModel, GripperPose};
use crate::mesh::{SurfaceSample, SurfaceSampler, TriMesh};
use crate::oracle::lp::tangent_basis;
use crate::oracle::{GraspOracle, OutcomeKind, SimParams};
use crate::se3::{PoseJson, RigidTransform};
use crate::seed;

type V3 = Vector3<f64>;

/// Inset of the ray origin below the sampled surface point, mm.
const RAY_INSET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerParams {
    /// Friction coefficient of the antipodal cone test.
    pub friction: f64,
    /// Largest accepted contact distance as a fraction of the gripper stroke.
    pub width_factor: f64,
    /// Added to the contact distance to get the commanded opening, mm.
    pub clearance: f64,
    /// Attempts allowed per requested candidate.
    pub attempts_per_sample: usize,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            friction: 0.5,
            width_factor: 0.95,
            clearance: 10.0,
            attempts_per_sample: 50,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.friction > 0.0 && self.friction.is_finite()) {
            return Err(Error::Parameter("sampler friction must be > 0".into()));
        }
        if !(self.width_factor > 0.0 && self.width_factor <= 1.0) {
            return Err(Error::Parameter("width_factor must be in (0, 1]".into()));
        }
        if !(self.clearance >= 0.0 && self.clearance.is_finite()) {
            return Err(Error::Parameter("clearance must be ≥ 0".into()));
        }
        if self.attempts_per_sample == 0 {
            return Err(Error::Parameter("attempts_per_sample must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspCandidate {
    /// Gripper pose in the object frame.
    pub t_o2g: RigidTransform,
    pub opening: f64,
    pub contact_a: SurfaceSample,
    pub contact_b: SurfaceSample,
    /// Distance between the contacts, mm.
    pub grasp_width: f64,
    /// Roll about the closing axis, radians.
    pub roll_angle: f64,
}

impl GraspCandidate {
    pub fn closing_axis(&self) -> V3 {
        self.t_o2g.rotation().column(0).into_owned()
    }

    /// Both contact normals lie within the friction cone of the contact line.
    pub fn is_antipodal(&self, mu: f64) -> bool {
        antipodal(&self.contact_a, &self.contact_b, mu)
    }
}

fn antipodal(a: &SurfaceSample, b: &SurfaceSample, mu: f64) -> bool {
    let line = b.point - a.point;
    let len = line.norm();
    if len <= 0.0 {
        return false;
    }
    let d = line / len;
    let cos_max = mu.atan().cos();
    a.normal.dot(&-d) >= cos_max && b.normal.dot(&d) >= cos_max
}

/// Gripper frame with closing axis `x`, rolled by `roll` about it.
fn grasp_frame(x: &V3, center: &V3, roll: f64) -> RigidTransform {
    let (y0, z0) = tangent_basis(x);
    let y = y0 * roll.cos() + z0 * roll.sin();
    let z = x.cross(&y);
    let r = Matrix3::from_columns(&[*x, y, z]);
    RigidTransform::new_projected(r, *center).expect("orthonormal frame")
}

pub fn sample_antipodal(mesh: &TriMesh, gripper: &GripperModel, n: usize, seed: u64) -> Result<Vec<GraspCandidate>> {
    sample_antipodal_with(mesh, gripper, n, seed, &SamplerParams::default())
}

/// Draw up to `n` antipodal candidates. A surface point is paired with the
/// point where an inward ray along its normal leaves the body; the pair is
/// kept when both normals pass the friction-cone test and the gripper can
/// span it.
pub fn sample_antipodal_with(
    mesh: &TriMesh,
    gripper: &GripperModel,
    n: usize,
    seed: u64,
    params: &SamplerParams,
) -> Result<Vec<GraspCandidate>> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be > 0".into()));
    }
    params.validate()?;
    let max_width = params.width_factor * gripper.max_opening;
    let sampler = SurfaceSampler::new(mesh);
    let mut rng = seed::rng(seed);
    let budget = params.attempts_per_sample.saturating_mul(n);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < budget {
        attempts += 1;
        let a = sampler.sample(&mut rng);
        let roll = rng.random::<f64>() * std::f64::consts::TAU;
        let dir = -a.normal;
        let Some(hit) = mesh.ray_cast(&(a.point + dir * RAY_INSET), &dir)? else {
            continue;
        };
        let b = SurfaceSample {
            point: a.point + dir * (RAY_INSET + hit.distance),
            normal: hit.normal,
            face_index: hit.face_index,
        };
        let width = (b.point - a.point).norm();
        if width > max_width || width < gripper.min_opening || !antipodal(&a, &b, params.friction) {
            continue;
        }
        let axis = (b.point - a.point) / width;
        let center = (a.point + b.point) / 2.0;
        out.push(GraspCandidate {
            t_o2g: grasp_frame(&axis, &center, roll),
            opening: (width + params.clearance).min(gripper.max_opening),
            contact_a: a,
            contact_b: b,
            grasp_width: width,
            roll_angle: roll,
        });
    }
    if out.is_empty() {
        return Err(Error::Sampling {
            attempts,
            rate: 0.0,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspLibrary {
    pub object_id: String,
    pub gripper_name: String,
    pub candidates: Vec<GraspCandidate>,
    /// Outcome of every candidate with the object at identity.
    pub identity_outcomes: Vec<OutcomeKind>,
    /// Indices of candidates that succeed at identity.
    pub successful_at_identity: BTreeSet<usize>,
    pub n_total_sampled: usize,
}

impl GraspLibrary {
    pub fn n_gt(&self) -> usize {
        self.successful_at_identity.len()
    }

    pub fn successful(&self) -> impl Iterator<Item = (usize, &GraspCandidate)> {
        self.successful_at_identity.iter().map(|&i| (i, &self.candidates[i]))
    }

    /// Candidate outcomes at identity, one count per category.
    pub fn identity_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for o in &self.identity_outcomes {
            c[OutcomeKind::ALL.iter().position(|k| k == o).expect("known kind")] += 1;
        }
        c
    }
}

/// Sample `n` candidates and classify each at identity with `evaluate`.
pub fn build_library<F>(
    object_id: &str,
    mesh: &TriMesh,
    gripper: &GripperModel,
    n: usize,
    seed: u64,
    params: &SamplerParams,
    evaluate: F,
) -> Result<GraspLibrary>
where
    F: Fn(&GraspCandidate) -> Result<OutcomeKind> + Sync,
{
    let candidates = sample_antipodal_with(mesh, gripper, n, seed, params)?;
    let identity_outcomes = candidates
        .par_iter()
        .map(&evaluate)
        .collect::<Result<Vec<_>>>()?;
    let successful_at_identity = identity_outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| **o == OutcomeKind::Success)
        .map(|(i, _)| i)
        .collect();
    Ok(GraspLibrary {
        object_id: object_id.to_string(),
        gripper_name: gripper.name.clone(),
        candidates,
        identity_outcomes,
        successful_at_identity,
        n_total_sampled: n,
    })
}

/// Library sampled on `grasp_mesh` and filtered by the contact oracle on
/// `eval_mesh` at identity.
pub fn build_library_with_oracle(
    object_id: &str,
    grasp_mesh: &TriMesh,
    eval_mesh: &TriMesh,
    gripper: &GripperModel,
    n: usize,
    seed: u64,
    sampler: &SamplerParams,
    sim: &SimParams,
) -> Result<GraspLibrary> {
    let oracle = GraspOracle::new(eval_mesh, *sim)?;
    let identity = RigidTransform::identity();
    build_library(object_id, grasp_mesh, gripper, n, seed, sampler, |c| {
        let target = GripperPose {
            t_w2g: c.t_o2g,
            opening: c.opening,
        };
        Ok(oracle.evaluate(&identity, gripper, &target)?.outcome)
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CandidateLine {
    object_id: String,
    gripper: String,
    #[serde(rename = "R")]
    r: Vec<f64>,
    t: Vec<f64>,
    opening_mm: f64,
    width_mm: f64,
    success_at_identity: bool,
    outcome_at_identity: OutcomeKind,
    roll_rad: f64,
    contact_a: [f64; 3],
    normal_a: [f64; 3],
    face_a: usize,
    contact_b: [f64; 3],
    normal_b: [f64; 3],
    face_b: usize,
    n_total_sampled: usize,
}

pub fn write_library_jsonl(lib: &GraspLibrary, out: &mut impl Write) -> Result<()> {
    for (i, c) in lib.candidates.iter().enumerate() {
        let pose = PoseJson::from(&c.t_o2g);
        let line = CandidateLine {
            object_id: lib.object_id.clone(),
            gripper: lib.gripper_name.clone(),
            r: pose.r,
            t: pose.t,
            opening_mm: c.opening,
            width_mm: c.grasp_width,
            success_at_identity: lib.successful_at_identity.contains(&i),
            outcome_at_identity: lib.identity_outcomes[i],
            roll_rad: c.roll_angle,
            contact_a: c.contact_a.point.into(),
            normal_a: c.contact_a.normal.into(),
            face_a: c.contact_a.face_index,
            contact_b: c.contact_b.point.into(),
            normal_b: c.contact_b.normal.into(),
            face_b: c.contact_b.face_index,
            n_total_sampled: lib.n_total_sampled,
        };
        let text = serde_json::to_string(&line).expect("plain data serializes");
        writeln!(out, "{text}").map_err(|e| Error::io("<library output>", e))?;
    }
    Ok(())
}

pub fn save_library(lib: &GraspLibrary, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_library_jsonl(lib, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_library_jsonl(input: impl BufRead, source_name: &str) -> Result<GraspLibrary> {
    let mut lib = GraspLibrary {
        object_id: String::new(),
        gripper_name: String::new(),
        candidates: Vec::new(),
        identity_outcomes: Vec::new(),
        successful_at_identity: BTreeSet::new(),
        n_total_sampled: 0,
    };
    for (no, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = Location::Line(no + 1);
        let c: CandidateLine =
            serde_json::from_str(&line).map_err(|e| Error::format(source_name, at.clone(), e.to_string()))?;
        if lib.candidates.is_empty() {
            lib.object_id = c.object_id.clone();
            lib.gripper_name = c.gripper.clone();
        } else if c.object_id != lib.object_id || c.gripper != lib.gripper_name {
            return Err(Error::format(source_name, at, "library mixes object or gripper ids"));
        }
        let t_o2g = RigidTransform::from_row_major(&c.r, &c.t)
            .map_err(|e| Error::format(source_name, at.clone(), e.to_string()))?;
        if c.success_at_identity != (c.outcome_at_identity == OutcomeKind::Success) {
            return Err(Error::format(source_name, at, "success flag contradicts outcome"));
        }
        if c.success_at_identity {
            lib.successful_at_identity.insert(lib.candidates.len());
        }
        lib.identity_outcomes.push(c.outcome_at_identity);
        lib.n_total_sampled = lib.n_total_sampled.max(c.n_total_sampled);
        lib.candidates.push(GraspCandidate {
            t_o2g,
            opening: c.opening_mm,
            contact_a: SurfaceSample {
                point: c.contact_a.into(),
                normal: c.normal_a.into(),
                face_index: c.face_a,
            },
            contact_b: SurfaceSample {
                point: c.contact_b.into(),
                normal: c.normal_b.into(),
                face_index: c.face_b,
            },
            grasp_width: c.width_mm,
            roll_angle: c.roll_rad,
        });
    }
    if lib.n_total_sampled < lib.candidates.len() {
        return Err(Error::format(source_name, Location::Unknown, "n_total_sampled below candidate count"));
    }
    Ok(lib)
}

pub fn load_library(path: &Path) -> Result<GraspLibrary> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_library_jsonl(std::io::BufReader::new(file), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gripper::{default_registry, find_gripper};
    use crate::mesh::primitives;

    fn robotiq85() -> GripperModel {
        find_gripper(&default_registry(), "Robotiq 2F-85").unwrap().clone()
    }

    #[test]
    fn cube_grasps_span_opposite_faces() {
        let cube = primitives::cube(40.0);
        let g = robotiq85();
        let cands = sample_antipodal(&cube, &g, 300, 7).unwrap();
        assert_eq!(cands.len(), 300);
        for c in &cands {
            assert!((c.grasp_width - 40.0).abs() < 1e-6, "{}", c.grasp_width);
            let (a, b) = (c.contact_a.point, c.contact_b.point);
            let axis = (0..3).find(|&k| (a[k].abs() - 20.0).abs() < 1e-6).unwrap();
            assert!((a[axis] + b[axis]).abs() < 1e-6);
            assert!(c.grasp_width <= c.opening && c.opening <= g.max_opening);
            let line = (b - a).normalize();
            assert!((c.closing_axis() - line).norm() < 1e-6);
            assert!(c.is_antipodal(0.5));
            assert!(cube.closest_point(&a).distance < 1e-6);
            assert!(cube.closest_point(&b).distance < 1e-6);
            assert!(c.t_o2g.is_valid());
        }
    }

    #[test]
    fn oversized_sphere_yields_sampling_error() {
        let sphere = primitives::icosphere(60.0, 2);
        match sample_antipodal(&sphere, &robotiq85(), 20, 1) {
            Err(Error::Sampling { attempts, rate }) => {
                assert_eq!(attempts, 1000);
                assert_eq!(rate, 0.0);
            }
            other => panic!("expected sampling error, got {other:?}"),
        }
    }

    #[test]
    fn same_seed_same_candidates() {
        let mesh = primitives::l_bracket(60.0, 15.0, 30.0);
        let g = robotiq85();
        let a = sample_antipodal(&mesh, &g, 200, 99).unwrap();
        let b = sample_antipodal(&mesh, &g, 200, 99).unwrap();
        let c = sample_antipodal(&mesh, &g, 200, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn failing_oracle_leaves_empty_library() {
        let cube = primitives::cube(40.0);
        let lib = build_library("cube", &cube, &robotiq85(), 50, 3, &SamplerParams::default(), |_| {
            Ok(OutcomeKind::Collision)
        })
        .unwrap();
        assert_eq!(lib.n_gt(), 0);
        assert_eq!(lib.n_total_sampled, 50);
        assert_eq!(lib.candidates.len(), 50);
    }

    #[test]
    fn jsonl_round_trip() {
        let cube = primitives::cube(40.0);
        let g = robotiq85();
        let lib = build_library_with_oracle(
            "cube",
            &cube,
            &cube,
            &g,
            40,
            5,
            &SamplerParams::default(),
            &SimParams::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_library_jsonl(&lib, &mut buf).unwrap();
        let back = read_library_jsonl(&buf[..], "mem").unwrap();
        assert_eq!(back.successful_at_identity, lib.successful_at_identity);
        assert_eq!(back.identity_outcomes, lib.identity_outcomes);
        assert_eq!(back.n_total_sampled, 40);
        for (x, y) in back.candidates.iter().zip(&lib.candidates) {
            assert!(x.t_o2g.max_abs_diff(&y.t_o2g) < 1e-12);
            assert_eq!(x.opening, y.opening);
        }
        let text = String::from_utf8(buf).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["object_id", "gripper", "R", "t", "opening_mm", "width_mm", "success_at_identity"] {
            assert!(first.get(key).is_some(), "{key}");
        }
        let broken = text.replacen("\"R\"", "\"Q\"", 1);
        match read_library_jsonl(broken.as_bytes(), "mem") {
            Err(Error::Format { location, .. }) => assert_eq!(location, Location::Line(1)),
            other => panic!("{other:?}"),
        }
    }
}
