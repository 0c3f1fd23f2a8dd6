//! Survival-driven clustering.
//!
//! Neural networks are trained, without labels, to split subjects into k
//! groups whose survival curves differ as much as possible. The training
//! signal is a soft (partial) version of the multivariate logrank statistic
//! in which hard group indicators are replaced by predicted membership
//! probabilities, plus a barrier that keeps the groups balanced.
//!
//! | module | contents |
//! |---|---|
//! | [`survival`] | event tables, Kaplan–Meier, hard logrank test, c-index |
//! | [`loss`] | partial logrank statistic, balance penalty, exact gradients |
//! | [`neural`] | feedforward clusterer, AdamW, training loop, checkpoints |
//! | [`simulate`] | Weibull cohorts with Gaussian features, digit groupings |
//! | [`evaluate`] | cluster matching, ROC AUC, confusion, cross-validation |
//! | [`report`] | CSV / text / SVG outputs |
//! | [`config`] | run configuration shared by the CLI |
//!
//! ```
//! use survclust::loss::{total_objective, LossConfig, SoftAssignment};
//! use survclust::survival::records_from;
//!
//! let records = records_from(&[2.0, 5.0, 7.0, 9.0], &[true, true, false, true]).unwrap();
//! let soft = SoftAssignment::from_rows(&[
//!     vec![0.9, 0.1],
//!     vec![0.7, 0.3],
//!     vec![0.2, 0.8],
//!     vec![0.1, 0.9],
//! ])
//! .unwrap();
//! let value = total_objective(&soft, &records, &LossConfig::default()).unwrap();
//! assert!(value.statistic > 0.0);
//! ```

pub mod config;
pub mod data;
pub mod error;
pub mod evaluate;
mod linalg;
pub mod loss;
pub mod neural;
pub mod report;
pub mod simulate;
pub mod survival;

pub use data::{Cohort, FeatureMatrix, Standardizer};
pub use error::{Error, Result};
pub use loss::{LossConfig, LossValue, SoftAssignment};
pub use neural::{NetworkParams, NetworkSpec, TrainConfig};
pub use survival::SurvivalRecord;
