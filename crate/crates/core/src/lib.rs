//! Benchmark harness relating 6D object-pose error and mesh fidelity to
//! parallel-jaw grasp success.
//!
//! Units: millimeters for lengths, degrees at API boundaries, radians inside.

pub mod error;
pub mod bench_metrics;
pub mod gripper;
pub mod mesh;
pub mod oracle;
pub mod pose_metrics;
pub mod runner;
pub mod sampler;
pub mod se3;
pub mod seed;

pub use error::{Error, Result};
pub use mesh::TriMesh;
pub use se3::{PosePair, RigidTransform};
