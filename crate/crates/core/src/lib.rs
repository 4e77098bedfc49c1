//! Twist fields on quantum spin chains and free-fermion models.
//!
//! The crate is organised bottom-up:
//!
//! * [`edcore`]: exact operator algebra on 2^L spaces, ground and thermal states
//! * [`twist`]: twist strings, exchange relations, topological locality
//! * [`jordanwigner`]: spin/fermion dictionary and parity sectors
//! * [`gaussian`]: quadratic forms, Majorana covariances, Pfaffians
//! * [`correlators`]: order/disorder two-point functions, counting statistics, VEVs
//! * [`entanglement`]: Rényi entropies three ways, CFT exponent fits
//! * [`formfactor`]: Ising two-particle form factor and its spectral series
//! * [`toda`]: Toda stretch generating function, Monte Carlo and closed form
//! * [`cli`]: configuration, orchestration and output used by the `twistlab` binary

pub mod cli;
pub mod correlators;
pub mod edcore;
pub mod entanglement;
mod error;
pub mod formfactor;
pub mod gaussian;
pub mod jordanwigner;
pub mod linalg;
pub mod quad;
pub mod toda;
pub mod twist;

pub use error::{Error, Result};
