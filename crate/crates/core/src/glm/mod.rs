//! Binomial (logit) regression for VAD prediction and OLS for the confound
//! analysis.

pub mod binomial;
pub mod crossval;
pub mod ols;

pub use binomial::{binomial_deviance, fit_binomial, predict_binomial, sigmoid, FittedGlm, GlmOptions};
pub use crossval::{assign_folds, crossval_pearson, holdout_pearson, CrossValResult, FoldResult, Labeled};
pub use ols::{
    build_base_category_design, build_interaction_design, fit_interaction, fit_ols, InteractionDesign,
    InteractionRow, OlsFit, VarianceMode,
};
