//! Hierarchical equations of motion for bosonic environments.

mod environment;
mod exponents;
mod hierarchy;
mod quad;

use std::sync::Arc;
use std::time::Instant;

use openq_core::data::{Data, Dense, Format};
use openq_core::qobj::expect_vec_dm;
use openq_core::tdep::{Args, QobjEvo};
use openq_core::{Dims, Error, Qobj, Result, C64};

pub use environment::{BosonicEnvironment, SpectralFn, SpectralKind, CORRELATION_RTOL};
pub use exponents::{
    heom_cutoff_hint, matsubara_decompose, Exponent, ExponentKind, ExponentSet, MergedExponent, MERGE_TOL,
};
pub use hierarchy::{binomial, hierarchy_build, AdoIndexSet, HierarchyExponent};

use crate::evolution::{check_tlist, evolve_vector};
use crate::result::{SolveResult, SolverOptions};

/// A bath as seen by the hierarchy: an environment expanded into `n_k`
/// Matsubara terms, or an explicit exponent set.
#[derive(Clone, Debug)]
pub enum HeomBath {
    Matsubara { env: BosonicEnvironment, n_k: usize },
    Exponents(ExponentSet),
}

impl HeomBath {
    pub fn exponents(&self) -> Result<ExponentSet> {
        match self {
            HeomBath::Matsubara { env, n_k } => matsubara_decompose(env, *n_k),
            HeomBath::Exponents(set) => {
                set.validate()?;
                Ok(set.clone())
            }
        }
    }
}

impl From<ExponentSet> for HeomBath {
    fn from(set: ExponentSet) -> Self {
        HeomBath::Exponents(set)
    }
}

#[derive(Clone, Debug)]
pub struct HeomResult {
    pub result: SolveResult,
    pub ados: AdoIndexSet,
    /// Stacked `vec(ρ^n)` at the last output time, in `ados` order.
    pub final_ados: Vec<C64>,
    op_dims: Dims,
}

impl HeomResult {
    /// ADO with multi-index `label` at the final time.
    pub fn ado(&self, label: &[u32]) -> Option<Qobj> {
        let i = self.ados.index_of(label)?;
        let n = self.op_dims.rows.size();
        let block = self.final_ados[i * n * n..(i + 1) * n * n].to_vec();
        Qobj::new(Data::Dense(Dense::from_col_major(n, n, block)), Some(self.op_dims.clone())).ok()
    }

    pub fn final_state(&self) -> Qobj {
        self.ado(&vec![0; self.ados.n_exponents()]).expect("level 0 is always present")
    }
}

/// Integrates the hierarchy truncated at depth `n_c`. Each bath couples
/// through its Hermitian operator `Q`; exponents sharing a rate are merged.
pub fn heomsolve(
    h: &Qobj,
    baths: &[(HeomBath, Qobj)],
    rho0: &Qobj,
    tlist: &[f64],
    n_c: usize,
    e_ops: &[Qobj],
    opts: &SolverOptions,
) -> Result<HeomResult> {
    check_tlist(tlist)?;
    let start = Instant::now();
    let op_dims = h.dims().clone();
    let mut exps = Vec::new();
    let mut couplings = Vec::with_capacity(baths.len());
    for (b, (bath, q)) in baths.iter().enumerate() {
        couplings.push(q.clone());
        exps.extend(
            bath.exponents()?
                .merged()
                .into_iter()
                .map(|exp| HierarchyExponent { exp, coupling: b }),
        );
    }
    let (gen, ados) = hierarchy_build(h, &couplings, &exps, n_c)?;
    let rho = if rho0.is_ket() { rho0.proj()? } else { rho0.clone() };
    if rho.dims() != &op_dims {
        return Err(Error::Dimension(format!(
            "initial state dims {} do not match {op_dims}",
            rho.dims()
        )));
    }
    let e_data = e_ops
        .iter()
        .map(|op| {
            if op.dims() != &op_dims {
                return Err(Error::Dimension(format!(
                    "expectation operator dims {} do not match {op_dims}",
                    op.dims()
                )));
            }
            Ok(op.data().convert(Format::Csr))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = op_dims.rows.size();
    let d2 = n * n;
    let mut y0 = vec![C64::new(0.0, 0.0); gen.nrows()];
    y0[..d2].copy_from_slice(rho.full().as_slice());
    let gen = Arc::new(QobjEvo::constant(hierarchy::as_qobj(gen)?));
    let store = opts.stores_states(e_ops.len());
    let mut expect = vec![Vec::with_capacity(tlist.len()); e_ops.len()];
    let mut states = Vec::new();
    let mut last = Vec::new();
    let mut stats = evolve_vector(&gen, &Args::new(), y0, tlist, &opts.integrator, |k, _, y| {
        let rho = &y[..d2];
        for (s, op) in expect.iter_mut().zip(&e_data) {
            s.push(expect_vec_dm(op, rho));
        }
        if store {
            states.push(Qobj::new(
                Data::Dense(Dense::from_col_major(n, n, rho.to_vec())),
                Some(op_dims.clone()),
            )?);
        }
        if k + 1 == tlist.len() {
            last = y.to_vec();
        }
        Ok(())
    })?;
    stats.runtime = start.elapsed();
    let mut out = HeomResult {
        result: SolveResult {
            times: tlist.to_vec(),
            expect,
            states: store.then_some(states),
            final_state: None,
            stats,
        },
        ados,
        final_ados: last,
        op_dims,
    };
    if opts.store_final_state {
        out.result.final_state = Some(out.final_state());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use openq_core::odeint::IntegratorOptions;
    use openq_core::qobj::{basis, sigmax, sigmaz};

    #[test]
    fn empty_cutoff_is_unitary() {
        let h = sigmax().scale_real(0.5);
        let env = BosonicEnvironment::drude_lorentz(1.0, 0.1, 0.5).unwrap();
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.3).collect();
        let r = heomsolve(
            &h,
            &[(HeomBath::Matsubara { env, n_k: 1 }, sigmaz())],
            &basis(2, 0).unwrap(),
            &t,
            0,
            &[sigmaz()],
            &SolverOptions::with_integrator(IntegratorOptions {
                atol: 1e-12,
                rtol: 1e-10,
                ..Default::default()
            }),
        )
        .unwrap();
        for (k, &tk) in t.iter().enumerate() {
            assert!((r.result.expect[0][k].re - tk.cos()).abs() < 1e-8);
        }
        assert_eq!(r.final_state().dims(), h.dims());
    }
}
