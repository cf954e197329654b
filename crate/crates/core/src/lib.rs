//! Contact property and dynamics of magnetic flows on surfaces of
//! revolution diffeomorphic to the sphere.

pub mod error;
pub mod numerics;
pub mod profile;
pub mod contact;
pub mod reduced;
pub mod flow;
pub mod cz;
pub mod hopf;
pub mod io;
pub mod repro;

pub use error::{Error, Result};
