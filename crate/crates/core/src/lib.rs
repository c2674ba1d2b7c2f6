//! Truncated Fock-space engine for quantum-correlation criteria.
//!
//! The crate builds multimode bosonic states on a truncated Fock basis and
//! evaluates three families of correlation witnesses on them:
//!
//! * EPR-steering criteria built from inference variances (quadrature
//!   product form and the Schwinger-spin product/sum forms), together with
//!   detection-efficiency threshold scans,
//! * Bell-type variance inequalities: the recursive n-site MABK functional
//!   and a continuous-variable inequality on quadrature products,
//! * binned and non-locatable witnesses for superpositions that span a
//!   prescribed outcome range S, including a constructive coherence
//!   decomposition for density operators without a given off-diagonal
//!   element.
//!
//! A separate [`lhv`] module carries the constructive side: deterministic
//! and locally-deterministic hidden-variable ensembles reproducing given
//! frequency tables, and an exact first-moment model showing that
//! first-order correlations alone can never witness nonlocality.
//!
//! Everything numeric is generic over the real scalar type through
//! [`scalar::Scalar`] (implemented for `f32` and `f64`); the exact-arithmetic
//! path in [`lhv`] additionally accepts rational scalars. Concrete aliases
//! for the common `f64` instantiations are exported at the crate root.
//!
//! Global quadrature convention: `x = a + a†`, `p = -i(a - a†)`, so that
//! `[x, p] = 2i` and the vacuum has unit variance in every quadrature.

pub mod bell;
pub mod channels;
pub mod epr_steering;
pub mod error;
pub mod hilbert;
pub mod lhv;
pub mod macro_super;
pub mod report;
pub mod scalar;
pub mod states;

pub use error::{Error, Result};
pub use report::{CriterionReport, Direction};
pub use scalar::{Scalar, C, CMat, CVec};

/// `f64` state vector.
pub type State64 = hilbert::StateVector<f64>;
/// `f64` density operator.
pub type Density64 = hilbert::DensityOperator<f64>;
/// `f64` Hermitian observable.
pub type Observable64 = hilbert::Observable<f64>;
/// `f64` general (not necessarily Hermitian) operator.
pub type Operator64 = hilbert::Operator<f64>;
/// `f64` joint outcome distribution.
pub type JointDistribution64 = hilbert::JointDistribution<f64>;
/// `f64` criterion report.
pub type CriterionReport64 = report::CriterionReport<f64>;

/// `f32` state vector.
pub type State32 = hilbert::StateVector<f32>;
/// `f32` density operator.
pub type Density32 = hilbert::DensityOperator<f32>;
/// `f32` Hermitian observable.
pub type Observable32 = hilbert::Observable<f32>;
