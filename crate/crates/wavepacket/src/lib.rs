//! Numerical laboratory for NLS-modulated wave packets on deep water.

mod par;

pub mod curveops;
pub mod evolve;
pub mod jet;
pub mod nls;
pub mod packet;
pub mod quantities;
pub mod residual;
pub mod spectral;

pub use par::map_jobs;
