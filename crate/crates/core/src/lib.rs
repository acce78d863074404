//! Interior penalty DG solutions of parametric diffusion problems, lowest-order
//! Raviart-Thomas flux reconstruction, and reduced-basis models whose
//! reconstructed fluxes are locally conservative on every grid element.

pub mod bench;
pub mod dg;
pub mod error;
pub mod flux;
pub mod ipdg;
pub mod mesh;
pub mod numerics;
pub mod problem;
pub mod quadrature;
pub mod rb;
pub mod rt0;
pub mod vtk;

pub use error::{Error, Result};
