//! Pose estimates and ground truth in the BOP challenge file layout.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};
use crate::mesh::io::Units;
use crate::se3::{orthonormality_drift, PosePair, RigidTransform};

/// Rotations read from text are projected onto SO(3) when this close to it.
const TEXT_ROTATION_TOL: f64 = 1e-3;

/// `(scene_id, im_id, obj_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BopKey {
    pub scene_id: u32,
    pub im_id: u32,
    pub obj_id: u32,
}

impl std::fmt::Display for BopKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.scene_id, self.im_id, self.obj_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BopEstimate {
    pub key: BopKey,
    pub score: f64,
    pub pose: RigidTransform,
}

#[derive(Debug, Deserialize)]
struct EstimateRow {
    scene_id: u32,
    im_id: u32,
    obj_id: u32,
    score: f64,
    #[serde(rename = "R")]
    r: String,
    t: String,
}

fn floats(text: &str) -> Option<Vec<f64>> {
    text.split_whitespace().map(|s| s.parse().ok()).collect()
}

fn pose_from_text(r: &[f64], t: &[f64], scale: f64) -> std::result::Result<RigidTransform, String> {
    if r.len() != 9 || t.len() != 3 {
        return Err(format!("expected 9 rotation and 3 translation values, got {} and {}", r.len(), t.len()));
    }
    let m = Matrix3::from_row_slice(r);
    let drift = orthonormality_drift(&m);
    if !(drift < TEXT_ROTATION_TOL) || m.determinant() <= 0.0 {
        return Err(format!("R is not a rotation (max |RᵀR − I| = {drift:.3e})"));
    }
    let t = Vector3::new(t[0], t[1], t[2]) * scale;
    // exact values pass through untouched; rounded text is projected
    RigidTransform::new(m, t)
        .or_else(|_| RigidTransform::new_projected(m, t))
        .map_err(|e| e.to_string())
}

/// Rows `scene_id,im_id,obj_id,score,R,t[,time]` with `R` and `t` as
/// space-separated numbers. Translations are converted to mm.
pub fn read_bop_estimates(input: impl Read, source_name: &str, units: Units) -> Result<Vec<BopEstimate>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<EstimateRow>().enumerate() {
        // the header is row 1
        let at = Location::Row(i + 2);
        let row = row.map_err(|e| Error::format(source_name, at.clone(), e.to_string()))?;
        let (Some(r), Some(t)) = (floats(&row.r), floats(&row.t)) else {
            return Err(Error::format(source_name, at, "R and t must be space-separated numbers"));
        };
        let pose = pose_from_text(&r, &t, units.to_mm()).map_err(|m| Error::format(source_name, at, m))?;
        out.push(BopEstimate {
            key: BopKey {
                scene_id: row.scene_id,
                im_id: row.im_id,
                obj_id: row.obj_id,
            },
            score: row.score,
            pose,
        });
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct GtEntry {
    #[serde(rename = "cam_R_m2c")]
    cam_r_m2c: Vec<f64>,
    cam_t_m2c: Vec<f64>,
    obj_id: u32,
}

/// A `scene_gt.json` document (image id to object instances, mm) for one scene.
pub fn parse_scene_gt(text: &str, source_name: &str, scene_id: u32) -> Result<BTreeMap<BopKey, Vec<RigidTransform>>> {
    let doc: BTreeMap<String, Vec<GtEntry>> = serde_json::from_str(text)
        .map_err(|e| Error::format(source_name, Location::Line(e.line()), e.to_string()))?;
    let mut out: BTreeMap<BopKey, Vec<RigidTransform>> = BTreeMap::new();
    for (im, entries) in doc {
        let im_id: u32 = im
            .parse()
            .map_err(|_| Error::format(source_name, Location::Key(im.clone()), "image id is not an integer"))?;
        for (k, e) in entries.iter().enumerate() {
            let pose = pose_from_text(&e.cam_r_m2c, &e.cam_t_m2c, 1.0)
                .map_err(|m| Error::format(source_name, Location::Key(format!("{im}[{k}]")), m))?;
            out.entry(BopKey {
                scene_id,
                im_id,
                obj_id: e.obj_id,
            })
            .or_default()
            .push(pose);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BopIngest {
    pub pairs: BTreeMap<BopKey, PosePair>,
    /// Estimates with no ground-truth instance.
    pub unmatched: Vec<BopKey>,
}

/// Keep the best-scoring estimate per key and pair it with the nearest
/// ground-truth instance of that object in that image.
pub fn pair_bop(estimates: &[BopEstimate], gt: &BTreeMap<BopKey, Vec<RigidTransform>>) -> BopIngest {
    let mut best: BTreeMap<BopKey, &BopEstimate> = BTreeMap::new();
    for e in estimates {
        best.entry(e.key)
            .and_modify(|b| {
                if e.score > b.score {
                    *b = e;
                }
            })
            .or_insert(e);
    }
    let mut out = BopIngest::default();
    for (key, e) in best {
        let nearest = gt.get(&key).and_then(|instances| {
            instances.iter().min_by(|a, b| {
                let da = (a.translation() - e.pose.translation()).norm();
                let db = (b.translation() - e.pose.translation()).norm();
                da.total_cmp(&db)
            })
        });
        match nearest {
            Some(g) => {
                out.pairs.insert(key, PosePair { gt: *g, est: e.pose });
            }
            None => out.unmatched.push(key),
        }
    }
    out
}

pub fn ingest_bop_poses(estimates: &Path, scene_gt: &Path, scene_id: u32, units: Units) -> Result<BopIngest> {
    let file = std::fs::File::open(estimates).map_err(|e| Error::io(estimates, e))?;
    let est = read_bop_estimates(file, &estimates.display().to_string(), units)?;
    let text = std::fs::read_to_string(scene_gt).map_err(|e| Error::io(scene_gt, e))?;
    let gt = parse_scene_gt(&text, &scene_gt.display().to_string(), scene_id)?;
    Ok(pair_bop(&est, &gt))
}
