//! Exact tensor-product operator algebra and exact diagonalization.
//!
//! Basis labels are bit strings with site 0 as the most significant bit;
//! bit value 0 is spin up (σ³ = +1).

mod model;
mod operator;
mod state;

pub use model::{build_spin_hamiltonian, build_spin_hamiltonian_capped, local_density, Boundary, ChainModel, Family};
pub use operator::{
    pauli_sum, product_operator, product_operator_capped, site_operator, translation_operator, CsrMatrix, Local2,
    ManyBodyOperator, SiteOp, Support, DEFAULT_MAX_SITES,
};
pub use state::{
    evolve_vector, expectation, ground_state, ground_state_with, heisenberg_evolve, thermal_density_matrix,
    GroundStateOptions, StatePayload, StateRecord, MAX_DENSE_SITES,
};
