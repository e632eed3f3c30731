//! Register layouts, state vectors, matrix-free operators and distances.
//!
//! All arithmetic is `f64`; comparisons default to [`DEFAULT_TOL`].

pub mod ensemble;
pub mod layout;
pub mod operator;

pub use ensemble::{trace_distance, ClassicalQuantumEnsemble};
pub use layout::{apply, inner, norm_sqr, project_basis, uniform_state, Register, RegisterLayout, StateVector};
pub use operator::{
    haar_unitary, operator_norm, power_iteration, probe_isometry, BasisPermutation, Commutator, DenseOperator,
    Diagonal, FnOperator, LinearOperator, NormConfig, NormEstimate, NormMethod, Product, DENSE_CAP,
};

pub use num_complex::Complex64 as C64;

pub const DEFAULT_TOL: f64 = 1e-9;
