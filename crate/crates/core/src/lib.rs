//! Newtonian scenario engine: simulates the twelve canonical scenarios across
//! the 66 scenario x viewpoint catalog, builds per-state descriptor banks,
//! matches query descriptors to (scenario view, state) pairs and evaluates the
//! predicted motion against ground truth.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bank;
pub mod camera;
pub mod catalog;
pub mod dynamics;
pub mod error;
pub mod matching;
pub mod metrics;
pub mod store;

pub use camera::{Camera, ImagePoint};
pub use catalog::{build_catalog, lookup, CatalogEntry, ScenarioSpec, ViewpointSpec};
pub use dynamics::{simulate, SimParams, Trajectory, TrajectoryState, Vec3};
pub use error::{Error, Result};
pub use matching::{
    Descriptor, EncoderParams, FusionConfig, MatchResult, ScenarioBank, StateDescriptorMatrix, TrainConfig,
};
pub use metrics::{Curve3D, FMeasureResult};
pub use store::{BankFile, QueryRecord, QuerySet};
