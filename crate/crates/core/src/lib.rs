//! Numerical verification toolkit for pseudo-Hermitian and weakly
//! pseudo-Hermitian position-dependent-mass (PDM) Hamiltonians.
//!
//! The crate builds finite-difference realizations of the operators that
//! appear in the pseudo-Hermitian treatment of BenDaniel–Duke PDM systems —
//! the modified Hamiltonian `H = (p − A/U) U² (p − A/U) + V`, the first-order
//! factors `ζ` and `η₋`, the second-order metric `η₊`, the gauge operators
//! `e^{−iα}P` and `τ` — and then measures every operator identity those
//! constructions are supposed to satisfy: intertwining relations, spectral
//! reality and conjugation pairing, a conserved two-field pairing under
//! Crank–Nicolson evolution, factorization/decomposition/similarity
//! identities for the metric, a coordinate-map closure, and the closure of a
//! Bäcklund-type transformation acting on the associated ODE families.
//!
//! Module layout:
//!
//! * [`exprlang`] — a tiny arithmetic expression language used by config
//!   files to specify the scalar model data (`U`, `a`, `G`, `g`, …).
//! * [`grid`] — uniform 1-D grids, sampled functions, dense operator
//!   matrices, finite-difference stencils, quadrature, parity.
//! * [`linalg`] — banded complex LU solves and eigendecomposition helpers.
//! * [`model`] — scalar model data: potentials, gauge phase, generating
//!   functions, the kernel eigenfunction.
//! * [`operators`] — assembly of all operator matrices and their adjoints.
//! * [`verify`] — residual reports, spectra, orthogonality, conservation,
//!   and the factorization/decomposition/similarity checks.
//! * [`coordmap`] — the `R`/`S`/`ξ`/`σ` coordinate-transformation machinery
//!   and the modified mass.
//! * [`backlund`] — the `Ŝ`/`B̂` transformations on ODE families and their
//!   closure and commutation checks.

// The BLAS/LAPACK backend is selected by linking openblas; the import has no
// API surface but is required so the backend object files are pulled in.
use openblas_src as _;

pub mod backlund;
pub mod coordmap;
pub mod exprlang;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod verify;
