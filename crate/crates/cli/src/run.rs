//! Dispatch from a checked model to the solvers.

use num_complex::Complex64 as C64;
use openq_core::tdep::{Args, QobjEvo, Term};
use openq_core::{Coefficient, Qobj};
use openq_solvers::heom::HeomBath;
use openq_solvers::{
    brmesolve, fsesolve, heomsolve, mcsolve, mesolve, nm_mcsolve, sesolve, smesolve, steadystate, BrCoupling,
    FloquetBasis, McOptions, MultiTrajResult, SmeOptions, SolveResult, SolverOptions, SteadyOptions,
};

use crate::model::{BathSpec, ModelSpec, SolverKind};
use crate::table::ResultTable;
use crate::CliError;

fn solver_err(kind: SolverKind) -> impl Fn(openq_core::Error) -> CliError {
    move |e| CliError::Solver(format!("{kind}: {e}"))
}

fn evo(terms: &[(Qobj, Option<Coefficient>)]) -> openq_core::Result<QobjEvo> {
    QobjEvo::from_list(terms.iter().map(|(q, c)| match c {
        None => Term::Const(q.clone()),
        Some(c) => Term::Td(q.clone(), c.clone()),
    }))
}

fn static_sum(terms: &[(Qobj, Option<Coefficient>)]) -> openq_core::Result<Qobj> {
    let mut it = terms.iter().map(|(q, _)| q);
    let first = it.next().expect("validated non-empty").clone();
    it.try_fold(first, |acc, q| acc.try_add(q))
}

fn is_hermitian(q: &Qobj) -> bool {
    q.data().hermitian_defect() <= 1e-14 * q.data().max_abs().max(1.0)
}

struct Columns {
    labels: Vec<String>,
    /// `(e_op index, take imaginary part, std column)`
    cells: Vec<(usize, bool, bool)>,
}

fn columns(spec: &ModelSpec, with_std: bool) -> Columns {
    let mut labels = vec!["time".to_string()];
    let mut cells = Vec::new();
    for (k, (label, op)) in spec.e_ops.iter().enumerate() {
        if is_hermitian(op) {
            labels.push(label.clone());
            cells.push((k, false, false));
        } else {
            labels.push(format!("{label}_re"));
            labels.push(format!("{label}_im"));
            cells.push((k, false, false));
            cells.push((k, true, false));
        }
    }
    if with_std {
        for (k, (label, op)) in spec.e_ops.iter().enumerate() {
            if is_hermitian(op) {
                labels.push(format!("{label}_std"));
                cells.push((k, false, true));
            } else {
                labels.push(format!("{label}_std_re"));
                labels.push(format!("{label}_std_im"));
                cells.push((k, false, true));
                cells.push((k, true, true));
            }
        }
    }
    Columns { labels, cells }
}

fn part(z: C64, imag: bool) -> f64 {
    if imag {
        z.im
    } else {
        z.re
    }
}

fn deterministic_table(spec: &ModelSpec, r: &SolveResult) -> ResultTable {
    let cols = columns(spec, false);
    let rows = r
        .times
        .iter()
        .enumerate()
        .map(|(t, &time)| {
            std::iter::once(time)
                .chain(cols.cells.iter().map(|&(k, im, _)| part(r.expect[k][t], im)))
                .collect()
        })
        .collect();
    ResultTable { labels: cols.labels, rows }
}

fn trajectory_table(spec: &ModelSpec, r: &MultiTrajResult) -> ResultTable {
    let cols = columns(spec, true);
    let rows = r
        .times
        .iter()
        .enumerate()
        .map(|(t, &time)| {
            std::iter::once(time)
                .chain(cols.cells.iter().map(|&(k, im, std)| {
                    let src = if std { &r.std_expect } else { &r.average_expect };
                    part(src[k][t], im)
                }))
                .collect()
        })
        .collect();
    ResultTable { labels: cols.labels, rows }
}

fn mc_options(spec: &ModelSpec, default_ntraj: usize) -> McOptions {
    McOptions {
        ntraj: spec.ntraj.unwrap_or(default_ntraj),
        improved_sampling: spec.improved_sampling,
        seed: spec.seed,
        map: spec.map,
        integrator: spec.integrator.clone(),
        ..Default::default()
    }
}

pub fn run_model(spec: &ModelSpec) -> Result<ResultTable, CliError> {
    let kind = spec.solver;
    let err = solver_err(kind);
    let e_ops: Vec<Qobj> = spec.e_ops.iter().map(|(_, q)| q.clone()).collect();
    let opts = SolverOptions::with_integrator(spec.integrator.clone());
    let h = evo(&spec.hamiltonian).map_err(&err)?;
    let c_ops = spec
        .c_ops
        .iter()
        .map(|t| evo(std::slice::from_ref(t)))
        .collect::<openq_core::Result<Vec<_>>>()
        .map_err(&err)?;
    let tlist = &spec.tlist;
    let state = spec.initial_state.as_ref();
    let det = |r: openq_core::Result<SolveResult>| r.map(|r| deterministic_table(spec, &r)).map_err(&err);
    let traj = |r: openq_core::Result<MultiTrajResult>| r.map(|r| trajectory_table(spec, &r)).map_err(&err);
    match kind {
        SolverKind::Sesolve => det(sesolve(h, state.expect("validated"), tlist, &e_ops, opts)),
        SolverKind::Mesolve => det(mesolve(h, state.expect("validated"), tlist, &c_ops, &e_ops, opts)),
        SolverKind::Brmesolve => {
            let couplings = spec
                .baths
                .iter()
                .map(|(q, b)| match b {
                    BathSpec::Flat { gamma } => BrCoupling::flat(q.clone(), *gamma),
                    BathSpec::Env(env) => {
                        let env = env.clone();
                        BrCoupling::new(q.clone(), move |w| env.power_spectrum(w))
                    }
                })
                .collect::<openq_core::Result<Vec<_>>>()
                .map_err(&err)?;
            det(brmesolve(h, &couplings, state.expect("validated"), tlist, &e_ops, spec.sec_cutoff, opts))
        }
        SolverKind::Steadystate => {
            let hs = static_sum(&spec.hamiltonian).map_err(&err)?;
            let cs: Vec<Qobj> = spec.c_ops.iter().map(|(q, _)| q.clone()).collect();
            let ss = steadystate(&hs, &cs, &SteadyOptions::method(spec.steady_method)).map_err(&err)?;
            let cols = columns(spec, false);
            let row = std::iter::once(f64::INFINITY)
                .chain(cols.cells.iter().map(|&(k, im, _)| {
                    let v = e_ops[k].matmul(&ss.rho).map(|m| m.tr()).unwrap_or(C64::new(f64::NAN, 0.0));
                    part(v, im)
                }))
                .collect();
            Ok(ResultTable { labels: cols.labels, rows: vec![row] })
        }
        SolverKind::Mcsolve => traj(mcsolve(h, state.expect("validated"), tlist, &c_ops, &e_ops, &mc_options(spec, 500))),
        SolverKind::NmMcsolve => {
            let pairs: Vec<(Qobj, Coefficient)> = spec
                .c_ops
                .iter()
                .map(|(q, c)| (q.clone(), c.clone().unwrap_or_else(|| Coefficient::constant(C64::new(1.0, 0.0)))))
                .collect();
            traj(nm_mcsolve(h, state.expect("validated"), tlist, &pairs, &e_ops, &mc_options(spec, 500)))
        }
        SolverKind::Smesolve => {
            let o = SmeOptions {
                mc: mc_options(spec, 50),
                dt_sub: spec.dt_sub,
            };
            traj(smesolve(h, state.expect("validated"), tlist, &c_ops, &spec.sc_ops, &e_ops, &o))
        }
        SolverKind::Heomsolve => {
            let hs = static_sum(&spec.hamiltonian).map_err(&err)?;
            let baths: Vec<(HeomBath, Qobj)> = spec
                .baths
                .iter()
                .map(|(q, b)| match b {
                    BathSpec::Env(env) => (HeomBath::Matsubara { env: env.clone(), n_k: spec.n_k }, q.clone()),
                    BathSpec::Flat { .. } => unreachable!("rejected during validation"),
                })
                .collect();
            heomsolve(&hs, &baths, state.expect("validated"), tlist, spec.n_c, &e_ops, &opts)
                .map(|r| deterministic_table(spec, &r.result))
                .map_err(&err)
        }
        SolverKind::Fsesolve => {
            let period = spec.period.expect("validated");
            let fb = FloquetBasis::new(&h, period, spec.n_t, &Args::new(), &spec.integrator).map_err(&err)?;
            det(fsesolve(&fb, state.expect("validated"), tlist, &e_ops))
        }
    }
}
