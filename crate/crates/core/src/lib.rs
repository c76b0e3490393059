//! Capital computation and allocation for the FRTB internal model approach.
//!
//! The crate turns scenario-level 10-day losses into the IMCC capital charge
//! and allocates it to positions and to (risk class, liquidity horizon)
//! buckets with Euler and constrained Aumann-Shapley schemes, optionally
//! accounting for the stress-period scaling.
//!
//! * [`profile`]: raw scenario cubes, liquidity-horizon adjustment, reduced-set masks
//! * [`es`]: empirical ES, FRTB class ES, stress scaling, IMCC
//! * [`allocation`]: the four allocation schemes and the second-step split
//! * [`oracle`]: finite-difference, quadrature and counterexample oracles
//! * [`sim`]: seeded correlated-normal studies and their analytic references
//! * [`io`] and [`cli`]: file formats and the command front end

pub mod allocation;
pub mod cli;
pub mod error;
pub mod es;
pub mod io;
pub mod normal;
pub mod oracle;
pub mod profile;
pub mod sim;

pub use allocation::{allocate, AllocationTable, PermutationTable, Scheme};
pub use error::{FrtbError, Result};
pub use es::{imcc, EsConfig, EsReport, ScalingContext};
pub use profile::{
    adjust, apply_mask, BucketConvention, LiquidityLadder, ReducedSetMask, RiskClass, RiskProfile,
    ScenarioCube,
};
