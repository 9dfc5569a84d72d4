//! Solvers for closed and open quantum systems built on `openq-core`.

pub mod bloch_redfield;
pub mod evolution;
pub mod floquet;
pub mod heom;
pub mod mcsolve;
pub mod multitraj;
pub mod nm_mcsolve;
pub mod result;
pub mod smesolve;
pub mod steadystate;

pub use bloch_redfield::{br_tensor, brmesolve, BrCoupling, BrTensor};
pub use evolution::{mesolve, sesolve, Evolution, Solver};
pub use result::{SolveResult, SolverOptions, Stats};
pub use steadystate::{steadystate, SteadyMethod, SteadyOptions, SteadyState};
pub use floquet::{fsesolve, FloquetBasis};
pub use heom::{heomsolve, BosonicEnvironment, ExponentSet, HeomBath, HeomResult};
pub use mcsolve::{mcsolve, InitialState};
pub use multitraj::{MapKind, McOptions, MultiTrajResult, TargetTol};
pub use nm_mcsolve::{nm_mcsolve, nm_prepare, NmPrepared};
pub use smesolve::{smesolve, SmeOptions};
