//! Time-optimal control of the heat equation on the unit square.
//!
//! The free horizon T is mapped to the reference interval (0, 1) and becomes
//! a scalar unknown ν next to the control q. States are discretized with P1
//! finite elements in space and piecewise constants in time (dG(0)), and the
//! discrete problem is solved by an augmented Lagrangian method with a
//! trust-region semismooth Newton inner solver. Second-order sufficient
//! conditions are checked through a scalar curvature quantity γ̄.

pub mod controldisc;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod optimizer;
pub mod pde;
pub mod quadrature;
pub mod reduced;
pub mod selfcheck;
pub mod ssc;

pub use error::{Error, Result};
