//! Closed-form marginal likelihoods, the marginal maximum likelihood
//! estimator of the prior mean, and classical graph scores.

pub mod marginal;
pub mod mmle;
pub mod scores;
pub mod stirling;

pub use marginal::{
    bayes_factor, bayes_factor_with_budget, exact_cost, exact_log_marginal, exact_log_marginal_dag,
    exact_log_marginal_with_budget, BayesFactor, ExactPrior, DEFAULT_EXACT_BUDGET,
};
pub use mmle::{mmle_solve, project_simplex, shrinkage_predictive, BetaRule, MmleConfig, MmleResult};
pub use scores::{score, score_aic, score_bd, score_bde, score_bic, ScoreKind};
pub use stirling::{stirling_table, StirlingTable};
