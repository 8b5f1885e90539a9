//! Photographic light-field transforms: forward and dual operators, spectral
//! filters, analytic inversion and a verification suite.

pub mod error;
pub mod grid;
pub mod inversion;
pub mod io;
pub mod phantoms;
pub mod spectral;
pub mod transforms;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{AlphaSchedule, BarStack, Field, FocalStack, Grid};
