//! Darboux-Crum and integral transformations of Heun's equation in elliptic form.

pub mod elliptic;
pub mod cli;
pub mod darboux;
pub mod difffield;
pub mod error;
pub mod finitegap;
pub mod integraltransform;
pub mod jet;
pub mod monodromy;
pub mod ode;
pub mod operators;
pub mod quasisolvable;
pub mod verify;

pub use difffield::{FieldExpr, RatFn};
pub use elliptic::{lattice_from_half_periods, BranchSigns, Lattice, LatticeRef, C64};
pub use error::{Error, Result};
