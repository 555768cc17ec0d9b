//! Learning which solution constraints to try first on a new planning
//! problem. Past planner scores under a library of constraints define a
//! Gaussian prior; an upper-confidence-bound policy then picks constraints
//! one at a time, conditioning on every observed score.

pub mod bench;
pub mod domains;
pub mod error;
pub mod experience;
pub mod gaussian;
pub mod golden;
pub mod linalg;
pub mod minset;
pub mod policy;
pub mod regret;
pub mod rng;
pub mod score_matrix;

pub use error::{Error, Result};
pub use experience::{ConstraintSet, ExperienceBundle};
pub use gaussian::GaussianBelief;
pub use score_matrix::ScoreMatrix;
