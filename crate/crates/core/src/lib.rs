//! Random survival forests over factor-coded covariates.
//!
//! Every covariate is a factor; splits are complementary pairs of label
//! subsets chosen by the log-rank statistic. Trees carry Kaplan-Meier and
//! Nelson-Aalen estimators in their terminal nodes and forests average them.

pub mod data;
pub mod error;
pub mod estimators;
pub mod factorsplit;
pub mod forest;
pub mod lab;
pub mod rng;
pub mod tree;
pub mod vimp;

pub use data::{CsvOptions, Dataset, FactorSchema, FactorVariable, RawTable, SurvivalRecord};
pub use error::{Error, Result};
pub use estimators::{kaplan_meier, logrank_statistic, nelson_aalen, RiskTable, StepFunction};
pub use factorsplit::{ComplementaryPair, Daughter};
pub use forest::{fit, oob_error, predict_ensemble, predict_oob, Forest, ForestParams};
pub use tree::{grow_tree, SurvivalTree, TreeParams};
