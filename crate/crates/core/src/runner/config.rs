use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Location, Result};
use crate::mesh::degrade::DegradeParams;
use crate::mesh::io::Units;
use crate::oracle::SimParams;
use crate::sampler::SamplerParams;

use super::ExperimentCondition;

fn default_seed() -> u64 {
    42
}

fn default_n_samples() -> usize {
    5000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_gt_translation() -> [f64; 3] {
    [0.0, 0.0, 600.0]
}

fn default_trials_per_level() -> usize {
    1
}

fn default_levels() -> Vec<[f64; 2]> {
    vec![[0.0, 0.0]]
}

/// A full experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub condition: ExperimentCondition,
    /// Candidates sampled per object and gripper.
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    pub grippers: Vec<String>,
    /// Registry file; the built-in registry when absent.
    #[serde(default)]
    pub gripper_registry: Option<PathBuf>,
    /// Camera intrinsics JSON; the YCB-Video camera when absent.
    #[serde(default)]
    pub camera: Option<PathBuf>,
    /// World-from-camera pose JSON; identity when absent.
    #[serde(default)]
    pub world_pose: Option<PathBuf>,
    /// Worker threads, 0 for one per core. Does not affect results.
    #[serde(default, skip_serializing)]
    pub jobs: usize,
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(rename = "object")]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub poses: PoseSource,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub sampler: SamplerParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    /// Built-in shape: cube, box, cylinder, icosphere, l_bracket or wedge.
    #[serde(default)]
    pub primitive: Option<String>,
    /// Shape dimensions overriding the built-in defaults, mm.
    #[serde(default)]
    pub size: Option<Vec<f64>>,
    /// OBJ or PLY ground-truth mesh.
    #[serde(default)]
    pub mesh: Option<PathBuf>,
    #[serde(default)]
    pub units: Units,
    /// Reconstructed mesh file.
    #[serde(default)]
    pub recon_mesh: Option<PathBuf>,
    /// Synthesize the reconstruction by degrading the ground truth.
    #[serde(default)]
    pub degrade: Option<DegradeParams>,
    /// `none`, a built-in group name, or a symmetry JSON file.
    #[serde(default)]
    pub symmetry: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum PoseSource {
    /// Estimates drawn around a fixed ground-truth pose.
    Synthetic {
        /// `(sigma_t mm, sigma_r deg)` per level.
        #[serde(default = "default_levels")]
        levels: Vec<[f64; 2]>,
        #[serde(default = "default_trials_per_level")]
        trials_per_level: usize,
        /// Rotate only about this object-frame axis.
        #[serde(default)]
        rotation_axis: Option<[f64; 3]>,
        /// Ground-truth object position in the camera frame, mm.
        #[serde(default = "default_gt_translation")]
        gt_translation: [f64; 3],
    },
    /// Estimates and ground truth in BOP layout.
    Bop {
        estimates: PathBuf,
        ground_truth: PathBuf,
        scene_id: u32,
        #[serde(default)]
        units: Units,
        /// BOP object id to corpus object id.
        objects: BTreeMap<String, String>,
    },
}

impl Default for PoseSource {
    fn default() -> Self {
        PoseSource::Synthetic {
            levels: default_levels(),
            trials_per_level: default_trials_per_level(),
            rotation_axis: None,
            gt_translation: default_gt_translation(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, source_name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map_or(Location::Unknown, |s| Location::Line(text[..s.start].lines().count().max(1)));
            Error::Config(Error::format(source_name, at, e.message().to_string()).to_string())
        })
    }

    /// Read a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.gripper_registry.as_mut().map(fix);
        self.camera.as_mut().map(fix);
        self.world_pose.as_mut().map(fix);
        for o in &mut self.objects {
            o.mesh.as_mut().map(fix);
            o.recon_mesh.as_mut().map(fix);
            if let Some(s) = o.symmetry.as_mut() {
                if s.ends_with(".json") && Path::new(s.as_str()).is_relative() {
                    *s = base.join(&*s).display().to_string();
                }
            }
        }
        if let PoseSource::Bop {
            estimates,
            ground_truth,
            ..
        } = &mut self.poses
        {
            fix(estimates);
            fix(ground_truth);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.n_samples == 0 {
            return cfg("n_samples must be > 0".into());
        }
        if self.objects.is_empty() {
            return cfg("no objects configured".into());
        }
        if self.grippers.is_empty() {
            return cfg("no grippers configured".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(&o.id) {
                return cfg(format!("duplicate object id `{}`", o.id));
            }
            match (&o.primitive, &o.mesh) {
                (Some(_), Some(_)) | (None, None) => {
                    return cfg(format!("object `{}` needs exactly one of primitive or mesh", o.id))
                }
                _ => {}
            }
            if o.recon_mesh.is_some() && o.degrade.is_some() {
                return cfg(format!("object `{}` sets both recon_mesh and degrade", o.id));
            }
            if let Some(d) = &o.degrade {
                d.validate().map_err(|e| Error::Config(format!("object `{}`: {e}", o.id)))?;
            }
            for p in o.mesh.iter().chain(&o.recon_mesh) {
                exists(p)?;
            }
            if let Some(s) = &o.symmetry {
                if s.ends_with(".json") {
                    exists(Path::new(s))?;
                }
            }
            if self.condition.pose_from_recon() && o.recon_mesh.is_none() && o.degrade.is_none() {
                return cfg(format!(
                    "condition {} needs a reconstruction for object `{}`",
                    self.condition, o.id
                ));
            }
        }
        for p in self.gripper_registry.iter().chain(&self.camera).chain(&self.world_pose) {
            exists(p)?;
        }
        match &self.poses {
            PoseSource::Synthetic {
                levels,
                trials_per_level,
                rotation_axis,
                ..
            } => {
                if levels.is_empty() || *trials_per_level == 0 {
                    return cfg("synthetic poses need at least one level and one trial".into());
                }
                if levels.iter().flatten().any(|s| !(*s >= 0.0 && s.is_finite())) {
                    return cfg("noise levels must be finite and ≥ 0".into());
                }
                if rotation_axis.is_some_and(|a| a.iter().all(|c| *c == 0.0)) {
                    return cfg("rotation_axis must be nonzero".into());
                }
            }
            PoseSource::Bop {
                estimates,
                ground_truth,
                objects,
                ..
            } => {
                exists(estimates)?;
                exists(ground_truth)?;
                for id in objects.values() {
                    if !self.objects.iter().any(|o| &o.id == id) {
                        return cfg(format!("BOP mapping names unknown object `{id}`"));
                    }
                }
            }
        }
        self.sim.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.sampler.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring `jobs` and `output_dir`.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn exists(p: &Path) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("file not found: {}", p.display())))
    }
}
