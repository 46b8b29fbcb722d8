//! Exponential-cost reference computations used to check the approximate
//! methods at small size.

mod classical;
mod ed;

pub use classical::{
    classical_exact_expectations, classical_ising_mc, classical_ising_mc_chains,
    classical_ising_mc_with, ClassicalExact, McConfig, McResult, McStart,
    MAX_ENUMERATION_VERTICES,
};
pub use ed::{
    ed_observables, exact_diagonalize, fidelity, ground_space_overlap, lanczos_lowest, vector_fidelity,
    vector_ground_space_overlap, EdObservables, EdResult, EdSummary, DENSE_DIM_LIMIT, MAX_ED_VERTICES,
    RESIDUAL_TOL,
};
