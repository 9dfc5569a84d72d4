//! Steady states of Liouvillians: `L ρ = 0`, `tr ρ = 1`.

use openq_core::data::{Csr, Data, Dense};
use openq_core::linalg::{gmres, solve_linear, svd_right, GmresOptions, LinearSolver, Lu};
use openq_core::qobj::{liouvillian, Space};
use openq_core::{Error, Qobj, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SteadyMethod {
    /// One linear solve with a trace row replacing a population row of `L`.
    #[default]
    Direct,
    /// Inverse power iteration on `L - σ`.
    Power,
    /// Right singular vector of the smallest singular value.
    Svd,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyOptions {
    pub method: SteadyMethod,
    pub solver: LinearSolver,
    /// Shift used by the power method.
    pub power_shift: f64,
    pub power_maxiter: usize,
    /// Residual target `‖L x‖` for the power method, relative to `max(1, ‖L‖_F)`.
    pub power_tol: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            method: SteadyMethod::Direct,
            solver: LinearSolver::DirectLu,
            power_shift: 1e-10,
            power_maxiter: 50,
            power_tol: 1e-12,
        }
    }
}

impl SteadyOptions {
    pub fn method(method: SteadyMethod) -> SteadyOptions {
        SteadyOptions {
            method,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: Qobj,
    /// `‖L vec(ρ)‖₂`
    pub residual: f64,
    /// Set when the null space looks more than one-dimensional (svd method only).
    pub degenerate: bool,
}

/// Relative residual accepted before a result is reported.
const RESIDUAL_TOL: f64 = 1e-10;

pub fn steadystate(h_or_l: &Qobj, c_ops: &[Qobj], opts: &SteadyOptions) -> Result<SteadyState> {
    let l = liouvillian(Some(h_or_l), c_ops)?;
    let Space::Super(op_dims) = &l.dims().rows else {
        return Err(Error::InvalidArgument("steady state needs an operator space".into()));
    };
    let op_dims = (**op_dims).clone();
    let d = op_dims.rows.size();
    let n = d * d;
    if l.shape() != (n, n) {
        return Err(Error::Dimension(format!("Liouvillian shape {:?}", l.shape())));
    }
    let l_norm = l.data().frobenius();
    let (mut x, degenerate) = match opts.method {
        SteadyMethod::Direct => (direct(l.data(), d, opts.solver)?, false),
        SteadyMethod::Power => (power(l.data(), d, l_norm, opts)?, false),
        SteadyMethod::Svd => svd(l.data())?,
    };
    let tr: C64 = (0..d).map(|a| x[a + a * d]).sum();
    if tr.norm() < 1e-300 {
        return Err(Error::Numerical("steady state has zero trace".into()));
    }
    for v in x.iter_mut() {
        *v /= tr;
    }
    let rho = Dense::from_fn(d, d, |i, j| 0.5 * (x[i + j * d] + x[j + i * d].conj()));
    let mut lx = vec![C64::new(0.0, 0.0); n];
    l.data().gemv_add(C64::new(1.0, 0.0), rho.as_slice(), &mut lx);
    let residual = lx.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if residual > RESIDUAL_TOL * l_norm.max(1.0) {
        return Err(Error::Convergence(format!(
            "steady-state residual {residual:.3e} exceeds {:.3e}",
            RESIDUAL_TOL * l_norm.max(1.0)
        )));
    }
    Ok(SteadyState {
        rho: Qobj::new(Data::Dense(rho), Some(op_dims))?,
        residual,
        degenerate,
    })
}

fn direct(l: &Data, d: usize, solver: LinearSolver) -> Result<Vec<C64>> {
    let n = d * d;
    let csr = l.to_csr();
    // Only population rows are linearly dependent (trace preservation), so the
    // replaced row is the population row with the largest diagonal.
    let k = (0..d)
        .map(|a| a + a * d)
        .max_by(|&i, &j| csr.get(i, i).norm().total_cmp(&csr.get(j, j).norm()))
        .unwrap_or(0);
    let mut trip: Vec<(usize, usize, C64)> = csr.iter().filter(|&(i, _, _)| i != k).collect();
    trip.extend((0..d).map(|a| (k, a + a * d, C64::new(1.0, 0.0))));
    let a = Data::Csr(Csr::from_triplets(n, n, trip));
    let mut rhs = Dense::zeros(n, 1);
    rhs.set(k, 0, C64::new(1.0, 0.0));
    let x = solve_linear(&a, &Data::Dense(rhs), solver)?;
    Ok(x.to_dense().into_vec())
}

fn power(l: &Data, d: usize, l_norm: f64, opts: &SteadyOptions) -> Result<Vec<C64>> {
    let n = d * d;
    let shifted = l.add(&Data::identity(n, l.format()), C64::new(-opts.power_shift, 0.0))?;
    let lu = match opts.solver {
        LinearSolver::DirectLu => Some(Lu::factor(&shifted.dense())?),
        LinearSolver::IterativeGmres(_) => None,
    };
    // start from the maximally mixed state
    let mut x = vec![C64::new(0.0, 0.0); n];
    for a in 0..d {
        x[a + a * d] = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    }
    let target = opts.power_tol * l_norm.max(1.0);
    let mut last = f64::INFINITY;
    for _ in 0..opts.power_maxiter {
        match (&lu, opts.solver) {
            (Some(lu), _) => lu.solve_in_place(&mut x),
            (None, LinearSolver::IterativeGmres(g)) => {
                // L - σ is nearly singular; inverse iteration tolerates inexact
                // inner solves, the outer residual decides convergence
                let inner = GmresOptions {
                    tol: g.tol.max(1e-6),
                    ..g
                };
                x = gmres(&shifted, &x, None, &inner)?
            }
            (None, LinearSolver::DirectLu) => unreachable!(),
        }
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Numerical("power iteration produced a non-finite vector".into()));
        }
        for v in x.iter_mut() {
            *v /= norm;
        }
        let mut lx = vec![C64::new(0.0, 0.0); n];
        l.gemv_add(C64::new(1.0, 0.0), &x, &mut lx);
        last = lx.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if last < target {
            return Ok(x);
        }
    }
    Err(Error::Convergence(format!(
        "power iteration stopped after {} sweeps with residual {last:.3e}",
        opts.power_maxiter
    )))
}

fn svd(l: &Data) -> Result<(Vec<C64>, bool)> {
    let (s, v) = svd_right(&l.dense())?;
    let n = s.len();
    let smax = s.first().copied().unwrap_or(0.0).max(1.0);
    let degenerate = n >= 2 && s[n - 2] <= 1e-10 * smax;
    Ok((v.column(n - 1).to_vec(), degenerate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use openq_core::qobj::{basis, destroy, sigmam, sigmax, sigmaz};

    fn qubit() -> (Qobj, Vec<Qobj>) {
        (sigmaz().scale_real(0.5), vec![sigmam().scale_real(0.3)])
    }

    #[test]
    fn decaying_qubit_ends_in_ground_state() {
        let (h, c) = qubit();
        let g = basis(2, 1).unwrap().proj().unwrap();
        for m in [SteadyMethod::Direct, SteadyMethod::Power, SteadyMethod::Svd] {
            let ss = steadystate(&h, &c, &SteadyOptions::method(m)).unwrap();
            assert!(ss.rho.data().max_abs_diff(g.data()).unwrap() < 1e-12, "{m:?}");
            assert!(!ss.degenerate);
        }
    }

    #[test]
    fn gmres_backend_agrees() {
        let a = destroy(6).unwrap();
        let c = vec![a.scale_real(0.5), a.dag().scale_real(0.3)];
        let h = a.dag().matmul(&a).unwrap().try_add(&a.try_add(&a.dag()).unwrap().scale_real(0.2)).unwrap();
        let lu = steadystate(&h, &c, &SteadyOptions::default()).unwrap();
        for method in [SteadyMethod::Direct, SteadyMethod::Power] {
            let opts = SteadyOptions {
                method,
                solver: LinearSolver::IterativeGmres(GmresOptions::default()),
                ..Default::default()
            };
            let it = steadystate(&h, &c, &opts).unwrap();
            assert!(it.rho.data().max_abs_diff(lu.rho.data()).unwrap() < 1e-8, "{method:?}");
        }
    }

    #[test]
    fn unitary_qubit_is_degenerate() {
        let ss = steadystate(&sigmax(), &[], &SteadyOptions::method(SteadyMethod::Svd)).unwrap();
        assert!(ss.degenerate);
    }
}
