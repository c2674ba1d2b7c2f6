//! Truncated multimode Fock-space linear algebra.
//!
//! A [`ModeLayout`] fixes the per-mode Fock cutoffs and the bijection
//! between multi-indices and flat basis indices (mode 0 varies slowest,
//! i.e. standard Kronecker order). [`Operator`] is a general dense matrix
//! on such a space, [`Observable`] a Hermitian one with a lazily cached
//! spectral decomposition, and [`JointDistribution`] the outcome table of
//! a tuple of commuting observables.

mod dist;
mod layout;
mod op;
mod state;

pub use dist::{joint_distribution_mixed, joint_distribution_pure, Axis, JointDistribution};
pub use layout::{ModeLayout, Odometer};
pub use op::{
    annihilation, annihilation_matrix, number_matrix, quadrature, quadrature_matrix,
    schwinger_spin, site_number, Observable, Operator, SpinComponent, Spectrum,
};
pub use state::{expectation, variance, DensityOperator, StateVector};

pub(crate) use op::{apply_local_left_with, apply_local_to_vec, apply_local_to_vec_with};
pub(crate) use state::{product_expectation_mixed, product_expectation_pure};
