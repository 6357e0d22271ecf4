#![allow(clippy::excessive_precision)]

pub mod distributions;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod inference;
pub mod pc_prior;
pub mod quad;
pub mod reference;
pub mod special;

pub use distributions::{Angle, Dataset, DistributionSpec, Family};
pub use divergence::{BaseModel, Direction, DistanceProfile};
pub use error::{Error, Result};
pub use harness::{PriorGrid, SimStudyConfig, SimStudyResult, TailFromData};
pub use inference::{Chain, ConcentrationPrior, McmcConfig, ModelSpec, PosteriorSummary};
pub use pc_prior::{Normalization, PcPrior, TailSpec};
pub use reference::{AuditReport, ParamDensity, ReferencePrior};
