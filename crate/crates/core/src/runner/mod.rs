//! Experiment orchestration: libraries, pose pairs, trials and reports.

pub mod bop;
pub mod condition;
pub mod config;
pub mod corpus;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::bench_metrics::{
    aggregate, default_bin_edges, success_curve, write_curves_csv, write_summary_csv, Aggregate,
    OutcomeTally, PairSummary, SuccessCurve,
};
use crate::error::{Error, Result};
use crate::gripper::{default_registry, find_gripper, load_gripper_registry, GripperModel, GripperPose};
use crate::mesh::TriMesh;
use crate::oracle::{GraspOracle, SimParams, TrialRecord};
use crate::pose_metrics::{CameraIntrinsics, ErrorMetric, MetricModel, PoseErrorVector, SymmetrySet, DEFAULT_SUBSAMPLE_CAP};
use crate::sampler::{build_library_with_oracle, save_library, GraspLibrary};
use crate::se3::{gripper_target_est, perturb_about_axis, perturb_pose, PoseJson, PosePair, RigidTransform};
use crate::seed;

pub use condition::ExperimentCondition;
pub use config::{ExperimentConfig, ObjectSpec, PoseSource};
pub use corpus::{load_object, ObjectData};

/// Everything needed to execute library grasps under one pose pair.
pub struct TrialContext<'a> {
    pub oracle: &'a GraspOracle<'a>,
    pub gripper: &'a GripperModel,
    pub condition: ExperimentCondition,
    /// World from camera.
    pub t_w2c: RigidTransform,
    pub pose_id: &'a str,
    pub errors: PoseErrorVector,
}

/// Execute every grasp of the library's successful set under `pair`.
pub fn execute_library(library: &GraspLibrary, pair: &PosePair, ctx: &TrialContext) -> Result<Vec<TrialRecord>> {
    let t_obj_true = ctx.t_w2c.compose(&pair.gt);
    library
        .successful()
        .map(|(i, c)| {
            let target = GripperPose {
                t_w2g: gripper_target_est(&ctx.t_w2c, &pair.est, &c.t_o2g),
                opening: c.opening,
            };
            Ok(TrialRecord {
                object_id: library.object_id.clone(),
                gripper: ctx.gripper.name.clone(),
                grasp_index: i,
                condition: ctx.condition,
                pose_id: ctx.pose_id.to_string(),
                pose_gt: pair.gt,
                pose_est: pair.est,
                errors: ctx.errors,
                outcome: ctx.oracle.evaluate(&t_obj_true, ctx.gripper, &target)?,
            })
        })
        .collect()
}

/// One trial per successful library grasp with the camera at the world
/// origin; errors use the true mesh without symmetries.
pub fn run_trial(
    library: &GraspLibrary,
    pair: &PosePair,
    mesh_true: &TriMesh,
    gripper: &GripperModel,
    params: &SimParams,
) -> Result<Vec<TrialRecord>> {
    if library.n_gt() == 0 {
        return Ok(Vec::new());
    }
    let oracle = GraspOracle::new(mesh_true, *params)?;
    let errors = MetricModel::new(mesh_true, &SymmetrySet::identity(), DEFAULT_SUBSAMPLE_CAP)
        .errors(pair, &CameraIntrinsics::default())?;
    let ctx = TrialContext {
        oracle: &oracle,
        gripper,
        condition: ExperimentCondition::GtGraspGtRefPose,
        t_w2c: RigidTransform::identity(),
        pose_id: "",
        errors,
    };
    execute_library(library, pair, &ctx)
}

/// A pose pair with its place in the experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseDraw {
    pub id: String,
    /// Noise level index for synthetic sweeps.
    pub level: Option<usize>,
    pub pair: PosePair,
}

/// Synthetic estimates around `gt`. Draw `d` uses the same random stream at
/// every level, so levels differ only in the noise scale.
pub fn synthetic_draws(
    root_seed: u64,
    object_id: &str,
    gt: &RigidTransform,
    levels: &[[f64; 2]],
    trials_per_level: usize,
    rotation_axis: Option<[f64; 3]>,
) -> Result<Vec<PoseDraw>> {
    let mut out = Vec::with_capacity(levels.len() * trials_per_level);
    for (l, &[sigma_t, sigma_r]) in levels.iter().enumerate() {
        for d in 0..trials_per_level {
            let draw = d.to_string();
            let s = seed::derive(root_seed, "perturb", &[object_id, &draw]);
            let est = match rotation_axis {
                None => perturb_pose(gt, sigma_t, sigma_r, s)?,
                Some(axis) => {
                    let rotated = perturb_about_axis(gt, &axis.into(), sigma_r, seed::derive(s, "axis", &[]))?;
                    let shifted = perturb_pose(gt, sigma_t, 0.0, s)?;
                    rotated.with_translation(*shifted.translation())
                }
            };
            out.push(PoseDraw {
                id: format!("level{l}/draw{d}"),
                level: Some(l),
                pair: PosePair { gt: *gt, est },
            });
        }
    }
    Ok(out)
}

/// Per-pose aggregate over one object–gripper pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoseStat {
    pub object_id: String,
    pub gripper: String,
    pub pose_id: String,
    pub level: Option<usize>,
    pub trials: usize,
    pub successes: usize,
    pub errors: PoseErrorVector,
}

/// Flat CSV form of [`PoseStat`]; the csv writer cannot flatten nested structs.
#[derive(Serialize)]
struct PoseRow<'a> {
    object_id: &'a str,
    gripper: &'a str,
    pose_id: &'a str,
    level: Option<usize>,
    trials: usize,
    successes: usize,
    add: f64,
    adi: f64,
    mssd: f64,
    mspd: f64,
    translation: f64,
    rotation: f64,
}

impl<'a> From<&'a PoseStat> for PoseRow<'a> {
    fn from(s: &'a PoseStat) -> Self {
        let e = &s.errors;
        PoseRow {
            object_id: &s.object_id,
            gripper: &s.gripper,
            pose_id: &s.pose_id,
            level: s.level,
            trials: s.trials,
            successes: s.successes,
            add: e.add,
            adi: e.adi,
            mssd: e.mssd,
            mspd: e.mspd,
            translation: e.translation,
            rotation: e.rotation,
        }
    }
}

/// Pooled result of one noise level across all pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelStat {
    pub level: usize,
    pub sigma_t_mm: f64,
    pub sigma_r_deg: f64,
    pub trials: usize,
    pub successes: usize,
    pub s_est: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSeed {
    pub object_id: String,
    pub gripper: String,
    pub sampler_seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceDynamics {
    pub friction: f64,
    pub gravity_m_s2: [f64; 3],
    /// Timestep rate and solver iterations of the dynamic reference setup;
    /// recorded only, nothing is time-stepped.
    pub rate_hz: u32,
    pub solver_iterations: u32,
}

impl Default for ReferenceDynamics {
    fn default() -> Self {
        Self {
            friction: 0.5,
            gravity_m_s2: [0.0, 0.0, -9.81],
            rate_hz: 240,
            solver_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub condition: ExperimentCondition,
    pub n_samples: usize,
    pub sim: SimParams,
    pub reference_dynamics: ReferenceDynamics,
    pub seeds: Vec<PairSeed>,
    /// Pairs whose library has no successful grasp; excluded from aggregates.
    pub pairs_without_library: Vec<String>,
    /// BOP estimates without ground truth.
    pub unmatched_estimates: Vec<String>,
    pub records: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub libraries: Vec<GraspLibrary>,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<PairSummary>,
    pub aggregate: Aggregate,
    pub curves: Vec<SuccessCurve>,
    pub pose_stats: Vec<PoseStat>,
    pub level_stats: Vec<LevelStat>,
    pub manifest: Manifest,
}

fn pair_err(object: &str, gripper: &str) -> impl Fn(Error) -> Error {
    let (object, gripper) = (object.to_string(), gripper.to_string());
    move |e| Error::Pair {
        object: object.clone(),
        gripper: gripper.clone(),
        source: Box::new(e),
    }
}

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))
}

/// Run a configured experiment end to end on `cfg.jobs` workers.
pub fn run_condition(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    thread_pool(cfg.jobs)?.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let registry = match &cfg.gripper_registry {
        Some(p) => load_gripper_registry(p)?,
        None => default_registry(),
    };
    let grippers: Vec<GripperModel> = cfg
        .grippers
        .iter()
        .map(|n| find_gripper(&registry, n).cloned())
        .collect::<Result<_>>()?;
    let camera = match &cfg.camera {
        Some(p) => CameraIntrinsics::load(p)?,
        None => CameraIntrinsics::default(),
    };
    let t_w2c = match &cfg.world_pose {
        Some(p) => load_pose_json(p)?,
        None => RigidTransform::identity(),
    };
    let objects: Vec<ObjectData> = cfg
        .objects
        .par_iter()
        .map(|o| load_object(o, cfg.seed).map_err(pair_err(&o.id, "*")))
        .collect::<Result<_>>()?;

    let (draws, unmatched) = pose_draws(cfg, &objects)?;

    let mut libraries = Vec::new();
    let mut seeds = Vec::new();
    for obj in &objects {
        let grasp_mesh = mesh_for(obj, cfg.condition.grasps_from_recon());
        for g in &grippers {
            let s = seed::derive(cfg.seed, "sampler", &[&obj.id, &g.name]);
            seeds.push(PairSeed {
                object_id: obj.id.clone(),
                gripper: g.name.clone(),
                sampler_seed: s,
            });
            // grasps are always executed on the true object
            let lib = build_library_with_oracle(
                &obj.id,
                grasp_mesh,
                &obj.gt_mesh,
                g,
                cfg.n_samples,
                s,
                &cfg.sampler,
                &cfg.sim,
            )
            .map_err(pair_err(&obj.id, &g.name))?;
            libraries.push(lib);
        }
    }

    let oracles: Vec<GraspOracle> = objects
        .iter()
        .map(|o| GraspOracle::new(&o.gt_mesh, cfg.sim).map_err(pair_err(&o.id, "*")))
        .collect::<Result<_>>()?;

    // pose errors depend on the object only
    let errors: Vec<Vec<PoseErrorVector>> = objects
        .iter()
        .zip(&draws)
        .map(|(o, ds)| {
            let model = MetricModel::new(mesh_for(o, cfg.condition.pose_from_recon()), &o.symmetry, DEFAULT_SUBSAMPLE_CAP);
            ds.par_iter()
                .map(|d| model.errors(&d.pair, &camera))
                .collect::<Result<Vec<_>>>()
                .map_err(pair_err(&o.id, "*"))
        })
        .collect::<Result<_>>()?;

    let units: Vec<(usize, usize, usize)> = (0..objects.len())
        .flat_map(|o| (0..grippers.len()).map(move |g| (o, g)))
        .flat_map(|(o, g)| (0..draws[o].len()).map(move |d| (o, g, d)))
        .collect();
    let per_unit: Vec<Vec<TrialRecord>> = units
        .par_iter()
        .map(|&(o, g, d)| {
            let lib = &libraries[o * grippers.len() + g];
            let draw = &draws[o][d];
            let ctx = TrialContext {
                oracle: &oracles[o],
                gripper: &grippers[g],
                condition: cfg.condition,
                t_w2c,
                pose_id: &draw.id,
                errors: errors[o][d],
            };
            execute_library(lib, &draw.pair, &ctx).map_err(pair_err(&objects[o].id, &grippers[g].name))
        })
        .collect::<Result<_>>()?;

    let mut pose_stats = Vec::with_capacity(units.len());
    let mut tallies: BTreeMap<(usize, usize), OutcomeTally> = BTreeMap::new();
    for (&(o, g, d), recs) in units.iter().zip(&per_unit) {
        let t = OutcomeTally::from_kinds(recs.iter().map(|r| &r.outcome.outcome));
        pose_stats.push(PoseStat {
            object_id: objects[o].id.clone(),
            gripper: grippers[g].name.clone(),
            pose_id: draws[o][d].id.clone(),
            level: draws[o][d].level,
            trials: t.total,
            successes: t.success,
            errors: errors[o][d],
        });
        let e = tallies.entry((o, g)).or_default();
        *e = e.merge(t);
    }

    let mut summary = Vec::new();
    let mut pairs_without_library = Vec::new();
    for (o, obj) in objects.iter().enumerate() {
        for (g, gr) in grippers.iter().enumerate() {
            let lib = &libraries[o * grippers.len() + g];
            if lib.n_gt() == 0 {
                pairs_without_library.push(format!("{} / {}", obj.id, gr.name));
            }
            let t = tallies.get(&(o, g)).copied().unwrap_or_default();
            summary.push(
                PairSummary::new(&obj.id, &gr.name, cfg.condition, lib.n_total_sampled, lib.n_gt(), &t)
                    .map_err(pair_err(&obj.id, &gr.name))?,
            );
        }
    }

    let records: Vec<TrialRecord> = per_unit.into_iter().flatten().collect();
    let curves = if records.is_empty() {
        Vec::new()
    } else {
        ErrorMetric::ALL
            .iter()
            .map(|&m| {
                let values: Vec<f64> = records.iter().map(|r| m.get(&r.errors)).collect();
                success_curve(&records, m, &default_bin_edges(&values))
            })
            .collect::<Result<_>>()?
    };
    let level_stats = level_stats(cfg, &pose_stats);
    let manifest = Manifest {
        tool: "graspgauge",
        version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        condition: cfg.condition,
        n_samples: cfg.n_samples,
        sim: cfg.sim,
        reference_dynamics: ReferenceDynamics::default(),
        seeds,
        pairs_without_library,
        unmatched_estimates: unmatched.iter().map(|k| k.to_string()).collect(),
        records: records.len(),
    };
    Ok(RunOutput {
        aggregate: aggregate(&summary),
        libraries,
        records,
        summary,
        curves,
        pose_stats,
        level_stats,
        manifest,
    })
}

fn mesh_for(obj: &ObjectData, recon: bool) -> &TriMesh {
    if recon {
        obj.recon_mesh.as_ref().expect("validated: condition has a reconstruction")
    } else {
        &obj.gt_mesh
    }
}

fn pose_draws(cfg: &ExperimentConfig, objects: &[ObjectData]) -> Result<(Vec<Vec<PoseDraw>>, Vec<bop::BopKey>)> {
    match &cfg.poses {
        PoseSource::Synthetic {
            levels,
            trials_per_level,
            rotation_axis,
            gt_translation,
        } => {
            let gt = RigidTransform::from_translation((*gt_translation).into());
            let draws = objects
                .iter()
                .map(|o| synthetic_draws(cfg.seed, &o.id, &gt, levels, *trials_per_level, *rotation_axis))
                .collect::<Result<_>>()?;
            Ok((draws, Vec::new()))
        }
        PoseSource::Bop {
            estimates,
            ground_truth,
            scene_id,
            units,
            objects: mapping,
        } => {
            let ingest = bop::ingest_bop_poses(estimates, ground_truth, *scene_id, *units)?;
            let mut draws = vec![Vec::new(); objects.len()];
            for (key, pair) in &ingest.pairs {
                let Some(id) = mapping.get(&key.obj_id.to_string()) else {
                    continue;
                };
                let o = objects.iter().position(|o| &o.id == id).expect("validated mapping");
                draws[o].push(PoseDraw {
                    id: format!("{}/{}", key.scene_id, key.im_id),
                    level: None,
                    pair: *pair,
                });
            }
            Ok((draws, ingest.unmatched))
        }
    }
}

fn level_stats(cfg: &ExperimentConfig, stats: &[PoseStat]) -> Vec<LevelStat> {
    let PoseSource::Synthetic { levels, .. } = &cfg.poses else {
        return Vec::new();
    };
    levels
        .iter()
        .enumerate()
        .map(|(l, &[sigma_t_mm, sigma_r_deg])| {
            let (trials, successes) = stats
                .iter()
                .filter(|s| s.level == Some(l))
                .fold((0, 0), |(t, w), s| (t + s.trials, w + s.successes));
            LevelStat {
                level: l,
                sigma_t_mm,
                sigma_r_deg,
                trials,
                successes,
                s_est: (trials > 0).then(|| successes as f64 * 100.0 / trials as f64),
            }
        })
        .collect()
}

pub fn load_pose_json(path: &Path) -> Result<RigidTransform> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let p: PoseJson = serde_json::from_str(&text).map_err(|e| {
        Error::format(path.display().to_string(), crate::error::Location::Line(e.line()), e.to_string())
    })?;
    RigidTransform::try_from(&p)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_records_jsonl(records: &[TrialRecord], out: &mut impl Write) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(out, "{line}").map_err(|e| Error::io("<records output>", e))?;
    }
    Ok(())
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Content(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect()
}

/// Write all artifacts of a run into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    let lib_dir = dir.join("libraries");
    std::fs::create_dir_all(&lib_dir).map_err(|e| Error::io(&lib_dir, e))?;
    for lib in &out.libraries {
        save_library(lib, &lib_dir.join(format!("{}__{}.jsonl", slug(&lib.object_id), slug(&lib.gripper_name))))?;
    }
    let records = dir.join("records.jsonl");
    let mut w = create(&records)?;
    write_records_jsonl(&out.records, &mut w)?;
    w.flush().map_err(|e| Error::io(&records, e))?;
    write_summary_csv(&out.summary, create(&dir.join("summary.csv"))?)?;
    write_curves_csv(&out.curves, create(&dir.join("curves.csv"))?)?;
    let pose_rows: Vec<PoseRow> = out.pose_stats.iter().map(PoseRow::from).collect();
    write_rows(&pose_rows, &dir.join("poses.csv"))?;
    if !out.level_stats.is_empty() {
        write_rows(&out.level_stats, &dir.join("levels.csv"))?;
    }
    let manifest = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&ManifestFile {
        manifest: &out.manifest,
        aggregate: &out.aggregate,
    })
    .expect("manifest serializes");
    std::fs::write(&manifest, text + "\n").map_err(|e| Error::io(&manifest, e))
}

#[derive(Serialize)]
struct ManifestFile<'a> {
    #[serde(flatten)]
    manifest: &'a Manifest,
    aggregate: &'a Aggregate,
}
