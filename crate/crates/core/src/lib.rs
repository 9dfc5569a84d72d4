//! Core types for open quantum system simulation: a multi-format complex matrix
//! layer, quantum objects, time-dependent operators, an adaptive ODE integrator
//! and excitation-number-restricted spaces.

pub mod data;
pub mod enr;
pub mod error;
pub mod linalg;
pub mod odeint;
pub mod qobj;
pub mod tdep;

pub use data::{Data, Format};
pub use error::{Error, Result};
pub use qobj::{Dims, Kind, Qobj};
pub use tdep::{Args, Coefficient, QobjEvo};

pub type C64 = num_complex::Complex<f64>;
