//! Generalized distillation: train a teacher on privileged features, soften
//! its predictions with a temperature, and distill them into a student that
//! only sees regular features.

pub mod datasets;
pub mod distill;
pub mod experiments;
pub mod math;
pub mod model;
pub mod rng;
pub mod synthetic;
pub mod triplet;

pub use distill::{DistillConfig, DistillError, LearnerConfig, SoftLabel};
pub use math::{MathError, SimplexVector};
pub use model::{Architecture, Model, ModelError, Task, TrainConfig};
pub use rng::RngStream;
pub use triplet::{clean_subset, Dataset, Fields, Header, Triplet};
