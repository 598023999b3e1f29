//! Exact quantum dynamics of small matter systems coupled to quantized
//! field modes.
//!
//! Two simulators share one density-matrix core:
//!
//! * [`vsystem`] propagates a three-level V-type system coupled to one
//!   or two field modes (thermal, coherent, Fock, or cat states) by
//!   exact eigendecomposition of the composite Hamiltonian.
//! * [`molecular`] propagates a two-surface Born-Oppenheimer molecule on
//!   a coordinate grid coupled to one mode with a symmetrized
//!   split-operator scheme, either as a mixture of pure components or as
//!   a dense density matrix.
//!
//! [`analytic`] holds closed-form results for the fully resonant V
//! system used to verify the numerics, and [`observables`] the derived
//! quantities (purity, vibrational projections, correlation function,
//! spectrum). All quantities are in Hartree atomic units; see [`units`].

pub mod analytic;
pub mod error;
pub mod field;
pub mod grid;
pub mod hilbert;
pub mod molecular;
pub mod morse;
pub mod observables;
pub mod units;
pub mod vsystem;

pub use error::{Error, Result};
pub use field::{FieldKind, FieldState};
pub use grid::Grid;
pub use hilbert::{
    diagonalize, kron, kron_with_cap, partial_trace, DensityMatrix, HilbertLayout, Propagator,
};
pub use molecular::{
    build_mol_stepper, propagate_dense, propagate_mixture, FieldTuning, MolConfig, MolSnapshot,
    MolSystem, MolTrajectory, SplitStepper,
};
pub use morse::{vibrational_eigensolve, MorseSurface, VibrationalBasis};
pub use observables::{spectrum, vibrational_projection, Spectrum, Window};
pub use vsystem::{build_v_hamiltonian, run_v, run_v_two_mode, VConfig, VMode, VTrajectory};
