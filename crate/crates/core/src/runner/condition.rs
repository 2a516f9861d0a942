use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Which mesh supplies the grasp library and which is the pose reference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentCondition {
    /// Ground-truth model for both grasps and pose.
    #[default]
    #[serde(rename = "gt-gt")]
    GtGraspGtRefPose,
    /// Ground-truth model for grasps, reconstructed model for pose.
    #[serde(rename = "gt-recon")]
    GtGraspReconRefPose,
    /// Reconstructed model for grasps and pose.
    #[serde(rename = "recon-recon")]
    ReconGraspReconRefPose,
}

impl ExperimentCondition {
    pub const ALL: [ExperimentCondition; 3] = [
        ExperimentCondition::GtGraspGtRefPose,
        ExperimentCondition::GtGraspReconRefPose,
        ExperimentCondition::ReconGraspReconRefPose,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentCondition::GtGraspGtRefPose => "gt-gt",
            ExperimentCondition::GtGraspReconRefPose => "gt-recon",
            ExperimentCondition::ReconGraspReconRefPose => "recon-recon",
        }
    }

    pub fn grasps_from_recon(self) -> bool {
        self == ExperimentCondition::ReconGraspReconRefPose
    }

    pub fn pose_from_recon(self) -> bool {
        self != ExperimentCondition::GtGraspGtRefPose
    }
}

impl fmt::Display for ExperimentCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown condition `{s}` (gt-gt, gt-recon, recon-recon)")))
    }
}
