//! Classical regressors: PLSR, the M5 rule tree and linear LS-SVM.

pub mod cubist;
pub mod lssvm;
pub mod plsr;

pub use cubist::{cubist_fit, cubist_fit_with, CubistModel, CubistOptions, Rule, SplitCriterion};
pub use lssvm::{lssvm_fit, LssvmModel, MinMaxScaler, DEFAULT_GAMMA};
pub use plsr::{plsr_fit, plsr_fit_with, PlsrModel, PlsrOptions, DEFAULT_COMPONENTS};
