//! Linear-model numerics: OLS, PCA, cross-validated ridge and a random-intercept mixed model.

pub mod lmm;
pub mod ols;
pub mod pca;
pub mod ridge;

pub use lmm::{conditional_r2, lmm_fit, LmmFit, RemlPoint, RemlProfile};
pub use ols::{adjusted_r2, ols_fit, OlsFit};
pub use pca::{pca_scores, PcaBasis};
pub use ridge::{
    default_lambda_grid, fold_assignment, lambda_max, ridge_cv, ridge_cv_with_grid, RidgeFit, RidgePath, Standardizer,
};
