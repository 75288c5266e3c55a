//! Close-coupled time-dependent wavepacket scattering for diatomic collisions.

pub mod cc_oracle;
pub mod cli;
pub mod diabatization;
pub mod error;
pub mod models;
pub mod molecular_data;
pub mod propagation;
pub mod rotational_basis;
pub mod smatrix;
pub mod units;

pub use error::{Error, Result};
