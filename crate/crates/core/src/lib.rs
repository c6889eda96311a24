//! Exact real- and imaginary-time dynamics of small spin-1/2 registers:
//! Heisenberg central systems coupled to spin environments, reduced
//! density matrices, coherence measures, structure factors and repeated
//! projective measurement.
//!
//! The numerical core is generic over the real scalar ([`Real`], `f32` or
//! `f64`); the aliases below fix it to `f64` (and `f32` with an `F32`
//! suffix). The experiment harness runs in `f64`.

pub mod error;
pub mod hamiltonians;
pub mod harness;
pub mod hilbert;
pub mod linalg;
pub mod observables;
pub mod propagation;
pub mod scalar;
pub mod stateprep;
pub mod streams;
pub mod zeno;

pub use error::{Error, Result};
pub use hilbert::Axis;
pub use scalar::Real;

pub type Complex = scalar::Cplx<f64>;
pub type StateVector = hilbert::StateVector<f64>;
pub type TermList = hilbert::TermList<f64>;
pub type CompiledOperator = hilbert::CompiledOperator<f64>;
pub type DenseMatrix = linalg::DenseMatrix<f64>;
pub type DensityMatrix = observables::DensityMatrix<f64>;
pub type Propagator = propagation::Propagator<f64>;
pub type PreparedState = stateprep::PreparedState<f64>;
pub type CouplingDraw = hamiltonians::CouplingDraw<f64>;

pub type ComplexF32 = scalar::Cplx<f32>;
pub type StateVectorF32 = hilbert::StateVector<f32>;
pub type TermListF32 = hilbert::TermList<f32>;
pub type DenseMatrixF32 = linalg::DenseMatrix<f32>;
pub type DensityMatrixF32 = observables::DensityMatrix<f32>;
pub type PropagatorF32 = propagation::Propagator<f32>;
