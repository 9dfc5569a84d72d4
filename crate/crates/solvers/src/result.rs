use std::time::Duration;

use openq_core::odeint::IntegratorOptions;
use openq_core::{Qobj, C64};

#[derive(Clone, Debug, Default)]
pub struct SolverOptions {
    /// `None` stores states only when there are no expectation operators.
    pub store_states: Option<bool>,
    pub store_final_state: bool,
    pub integrator: IntegratorOptions,
    pub progress: bool,
}

impl SolverOptions {
    pub fn with_integrator(integrator: IntegratorOptions) -> SolverOptions {
        SolverOptions {
            integrator,
            ..Default::default()
        }
    }

    pub(crate) fn stores_states(&self, n_e_ops: usize) -> bool {
        n_e_ops == 0 || self.store_states.unwrap_or(false)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Stats {
    pub nfev: usize,
    pub steps: usize,
    pub runtime: Duration,
    /// Free-form flags raised during the run (degenerate spectra and similar).
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct SolveResult {
    pub times: Vec<f64>,
    /// One time series per expectation operator.
    pub expect: Vec<Vec<C64>>,
    pub states: Option<Vec<Qobj>>,
    pub final_state: Option<Qobj>,
    pub stats: Stats,
}

impl SolveResult {
    /// Real parts of the `k`-th expectation series.
    pub fn expect_re(&self, k: usize) -> Vec<f64> {
        self.expect[k].iter().map(|z| z.re).collect()
    }
}
