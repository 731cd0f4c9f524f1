//! Decentralized multiagent rendezvous.
//!
//! A planar simulation stack in which unicycle agents carrying a 2D
//! rangefinder learn to predict their own and each other's goal-conditioned
//! motion, then use those predictors inside a sampling-based planner to agree
//! on a meeting point without communicating.
//!
//! Everything is generic over the scalar type via [`num::Real`]; the `*64`
//! aliases below fix `f64` for ordinary use.

pub mod baselines;
pub mod control;
pub mod geometry;
pub mod num;
pub mod plan;
pub mod predict;
pub mod sim;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("spawn failed: {0}")]
    SpawnFailed(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("planning failed: {0}")]
    PlanFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Point64 = geometry::Point2<f64>;
pub type Pose64 = geometry::Pose<f64>;
pub type World64 = geometry::World<f64>;
pub type LidarScan64 = geometry::LidarScan<f64>;
pub type LidarConfig64 = geometry::LidarConfig<f64>;

pub type Point32 = geometry::Point2<f32>;
pub type Pose32 = geometry::Pose<f32>;
pub type World32 = geometry::World<f32>;
