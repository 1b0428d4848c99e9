//! Shared numerical substrate: special functions, log-space reductions,
//! convex minimization, PCA, Gaussian mixtures and rank correlation.

pub mod gmm;
pub mod kendall;
pub mod lbfgs;
pub mod pca;
pub mod reduce;
pub mod softmax_reg;
pub mod special;

pub use gmm::{gmm_fit, gmm_fit_with, gmm_posterior, GmmConfig, GmmModel};
pub use kendall::kendall_tau;
pub use lbfgs::{minimize_convex, Minimum, OptimizerConfig};
pub use pca::{pca_fit, PcaModel};
pub use reduce::{log_sum_exp, softmax_in_place};
pub use softmax_reg::{cross_entropy, fit_l2_softmax, fit_l2_softmax_with, predict, regularized_objective, softmax_probs, SoftmaxFit};
pub use special::{digamma, log_gamma};
