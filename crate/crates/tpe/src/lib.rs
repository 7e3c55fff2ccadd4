//! Tree-structured Parzen estimator search over independent numeric dimensions.

mod error;
mod optimizer;
mod parzen;
mod space;

pub use error::{Result, TpeError};
pub use optimizer::{
    optimize, random_search, suggest, write_history_csv, OptimizeResult, TpeConfig, Trial,
};
pub use parzen::{parzen_pdf, ParzenEstimator};
pub use space::{validate_space, ParamKind, ParamSpec, Params};
