pub mod bvp;
pub mod error;
pub mod harness;
pub mod model;
pub mod nash;
pub mod moments;
pub mod nce;
pub mod ode;
pub mod population;
pub mod riccati;
pub mod rng;

pub use error::{Error, Result};
