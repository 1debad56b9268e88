pub mod basis;
pub mod campaign;
pub mod dataset;
pub mod dgp;
pub mod error;
pub mod eval;
pub mod glasso;
mod linalg;
pub mod ocmt;
pub mod regress;

pub use error::{Category, Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    struct Overview;
    #[doc = include_str!("../../../book/src/basis.md")]
    struct Basis;
    #[doc = include_str!("../../../book/src/statistics.md")]
    struct Statistics;
    #[doc = include_str!("../../../book/src/screening.md")]
    struct Screening;
    #[doc = include_str!("../../../book/src/group_lasso.md")]
    struct GroupLasso;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
}
