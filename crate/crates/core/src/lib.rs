//! Numerical laboratory for parabolic quasi-variational inequalities (QVIs)
//! of obstacle type on a 1-D interval.
//!
//! The building blocks, bottom to top:
//!
//! - [`grid`]: tensor time x space grids, grid functions, interpolants in
//!   time, and source averaging.
//! - [`operator`]: 3-point finite-difference elliptic operators with exact
//!   coercivity/boundedness constants, tridiagonal linear algebra.
//! - [`norms`]: discrete Bochner norms (`L2(0,T;H)`, `L2(0,T;V)`, ...) whose
//!   time quadrature follows each function's declared interpolation kind.
//! - [`lcp`]: the single-time-step upper-obstacle problem as a linear
//!   complementarity problem — projected SOR, primal-dual active set, and a
//!   brute-force active-set enumeration oracle.
//! - [`elliptic`]: one elliptic QVI step solved by monotone fixed-point
//!   iteration over obstacle-problem solves.
//! - [`parabolic`]: Rothe time discretisation of the parabolic QVI, the
//!   parabolic VI solver, VI iteration to extremal QVI solutions, and the
//!   zero-obstacle transformation.
//! - [`obstacle`]: concrete obstacle maps (constant, superposition,
//!   inverse-parabolic) with directional derivatives.
//! - [`green`]: Green's-function series for the Dirichlet heat operator,
//!   used as an independent oracle for the inverse-parabolic map.
//! - [`diagnostics`]: empirical smallness constants gating the sensitivity
//!   expansion.
//! - [`sensitivity`]: multiplier/cone extraction, the derivative VI, the
//!   alpha iteration, and Taylor-remainder verification.

pub mod csv;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod green;
pub mod grid;
pub mod lcp;
pub mod norms;
pub mod obstacle;
pub mod operator;
pub mod parabolic;
pub mod problem;
pub mod sensitivity;

pub use error::SolverError;
pub use grid::{GridFunction, InterpolationKind, SpaceGrid, SpaceTimeFunction, TimeGrid};
pub use operator::DiscreteOperator;
