//! Finite-volume solver and verification harness for strongly degenerate
//! parabolic–hyperbolic conservation laws
//!
//! ```text
//!     ∂ₜu + ∇·f(u) = ΔB(u)      on a bounded open rectangle Ω ⊂ ℝᴺ, N ∈ {1, 2},
//!     (f(u) − ∇B(u))·n = 0      on ∂Ω  (zero total flux),
//!     u(·, 0) = u₀ ∈ [0, M],
//! ```
//!
//! where `B` is nondecreasing and may be *strongly* degenerate (`B′ ≡ 0` on a
//! whole interval of states), so the equation changes type between hyperbolic
//! and parabolic across the state space. Solutions develop shocks and must be
//! interpreted in the Kruzhkov entropy sense; the zero-flux boundary condition
//! only holds in a weak, boundary-layer sense.
//!
//! The crate has two halves:
//!
//! * a monotone finite-volume solver ([`solver`]) on uniform Cartesian grids
//!   ([`grid`]) for a small catalogue of degenerate models ([`model`]), and
//! * a verification harness ([`entropy`], [`verify`]) that numerically
//!   certifies the structural properties the continuous theory guarantees:
//!   L∞ bounds, exact mass conservation, L1 contraction, interior Kruzhkov
//!   entropy inequalities, boundary entropy functionals built from
//!   boundary-layer cutoffs, strong boundary traces, and the vanishing
//!   viscosity limit.
//!
//! The `zeroflux` binary exposes the same machinery as a CLI
//! (`models | run | verify | converge | entropy`); see the crate README.

pub mod config;
pub mod entropy;
pub mod grid;
pub mod io;
pub mod model;
pub mod solver;
pub mod verify;
