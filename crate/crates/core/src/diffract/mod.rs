//! Diffractive cross sections and the decoherence-factor fits.
//!
//! Single-diffractive data are stored in the doubled convention 2σ_SD and
//! modelled as
//!
//! ```text
//! 2σ_SD = σ₀ φ^{2k} (s/s₀)^ε,     σ_DD = σ₂ φ^{4k} (s/s₀)^{ε₂},     s₀ = 1 GeV²
//! ```
//!
//! where k counts antiparticle-side insertions of the reaction class. Every
//! model except SDCln is linear in log space, so fits are weighted linear
//! least squares on ln σ with weights w = (σ/δσ)².

pub mod dataset;
pub mod fit;
pub mod model;
pub mod report;
pub mod stats;

pub use dataset::{load_dataset, shipped_dd, shipped_sd, CrossSectionPoint, DiffractionKind, ReactionClass};
pub use fit::{fit, fit_dd, FitOptions, FitResult, ParamEstimate, WeightMode};
pub use model::{model_predict, FitModel};
pub use stats::{e710_direct_phi, significance, significance_of_fit, E710Estimate, NullHypothesis, Significance};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffractError {
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("row {row}: cross section must be positive (got {value})")]
    NonPositiveValue { row: usize, value: f64 },
    #[error("unknown reaction class {0:?}")]
    UnknownClass(String),
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("class {class:?} does not belong to {kind:?} data")]
    ClassKindMismatch { class: ReactionClass, kind: DiffractionKind },
    #[error("need more than {n_f} included points, got {n}")]
    TooFewPoints { n: usize, n_f: usize },
    #[error("rank-deficient design matrix for {0}")]
    RankDeficient(String),
    #[error("model {0} has no single decoherence factor to freeze")]
    CannotFreeze(String),
    #[error("model {0} requires a frozen decoherence factor")]
    MissingFrozenPhi(String),
    #[error("frozen decoherence factor must be positive (got {0})")]
    BadFrozenPhi(f64),
    #[error("wrong parameter count for {model}: expected {expected}, got {found}")]
    ParameterCount { model: String, expected: usize, found: usize },
    #[error("fit {0} has no decoherence factor")]
    MissingPhi(String),
    #[error("counts must be positive")]
    NonPositiveCounts,
    #[error("uncertainty must be positive (got {0})")]
    BadUncertainty(f64),
    #[error("report needs at least one fit")]
    EmptyReport,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
