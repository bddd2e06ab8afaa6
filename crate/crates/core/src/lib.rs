//! Laboratory for radially symmetric isentropic gas flow.
//!
//! The crate studies the compressible Euler equations with cylindrical or
//! spherical symmetry,
//!
//! ```text
//!   (r^m rho)_t   + (r^m rho u)_r   = 0
//!   (r^m rho u)_t + (r^m rho u^2)_r + r^m p_r = 0,     p = K rho^gamma,
//! ```
//!
//! with symmetry index `m = 1` (cylindrical) or `m = 2` (spherical) and
//! adiabatic exponent `1 < gamma < 3`. Everything here is organized around
//! supersonic expanding flows: exact affine reference solutions, the
//! rarefaction/compression character fields `alpha` and `beta` together with
//! their Riccati dynamics along characteristics, a finite-volume solver, and
//! a ledger of a-priori bounds (invariant regions, density floors, blow-up
//! times) that runs are checked against.

pub mod affine;
pub mod characters;
pub mod gas;
pub mod ode;
pub mod presets;
pub mod solver;
pub mod steady;
pub mod stencil;
pub mod verify;

pub use affine::AffineMotion;
pub use characters::{CharacterField, CharacterState, RiccatiCoeffs};
pub use gas::{CellState, FlowField, GasParams, Scenario, Symmetry};
pub use solver::{RunRecord, SolverConfig};
pub use verify::BoundLedger;
