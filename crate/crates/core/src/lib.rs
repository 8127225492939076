//! Portfolio selection with mean-variance, absolute-deviation and
//! worst-day models, solved by in-crate LP, MILP and QP routines.

pub mod analytics;
pub mod estimation;
pub mod lp;
pub mod milp;
pub mod models;
pub mod qp;
pub mod types;

pub use estimation::{asset_stats, compute_simple_returns, perturb_returns, PerturbationConfig};
pub use models::{solve_model, ModelError};
pub use types::{
    Allocation, AssetStats, DataError, ModelConfig, ModelKind, PriceMatrix, ReturnMatrix,
    SolveReport, SolveStatus,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/returns.md")]
    mod returns {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/analytics.md")]
    mod analytics {}
}
