//! Multi-environment linear regression: data generation, Lasso, oracle
//! least squares, the invariance-penalised ℓ₀ estimator and the simulation
//! studies comparing them.

mod data;
mod eills;
mod experiments;
mod lasso;
mod ols;

pub use data::{gen_multi_env, EnvConfig, EnvDataset, SPURIOUS_NOISE};
pub use eills::{eills_fit_smallp, eills_objective, eills_parts, EillsFit, EillsParts, EILLS_MAX_P};
pub use experiments::{
    convergence_experiment, gamma_sweep, log_log_slope, nonlinear_csv, rate_curves_nonlinear,
    selection_experiment, spurious_experiment, ConvergenceConfig, ConvergenceTable,
    NonlinearRateRow, RateRow, SelectionConfig, SelectionReport, SpuriousReport, C_GRID,
};
pub use lasso::{
    lambda_max, lasso_fit, lasso_fit_traced, standardize, LassoFit, LASSO_MAX_SWEEPS, LASSO_TOL,
    SUPPORT_TOL,
};
pub use ols::{oracle_ols_fit, restricted_ols, single_env_ols_fit, EstimateReport, Method, T_CRIT};
