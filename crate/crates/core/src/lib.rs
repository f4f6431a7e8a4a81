//! Core analytics for call-detail-record pipelines: domain model,
//! windowed communication graphs, ego-network and mobility features,
//! cohort labeling, and the supervised learners used by the experiment
//! harness.

pub mod cohort;
pub mod error;
pub mod geofeat;
pub mod graph;
pub mod learner;
pub mod model;
pub mod netfeat;

pub use error::CoreError;
pub use model::{CallRecord, CohortLabel, Location, TimeWindow, UserId, UserProfile};
