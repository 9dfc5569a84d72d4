//! Floquet modes and quasienergies of periodically driven Hamiltonians.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use openq_core::data::{Data, Dense};
use openq_core::linalg::{eig_general, Lu};
use openq_core::odeint::{Dopri5, IntegratorOptions};
use openq_core::qobj::expect_ket_vec;
use openq_core::tdep::{Args, QobjEvo};
use openq_core::{Dims, Error, Qobj, Result, C64};

use crate::evolution::{check_tlist, prepare_generator};
use crate::result::{SolveResult, Stats};

/// Floquet decomposition of `H(t + T) = H(t)` on a grid of `n_t` intervals.
#[derive(Clone, Debug)]
pub struct FloquetBasis {
    period: f64,
    n_t: usize,
    /// Ascending, in `(-π/T, π/T]`.
    quasienergies: Vec<f64>,
    /// `modes[j]` holds `Φ_α(t_j)` as columns, `t_j = jT/n_t`, `j = 0..=n_t`.
    modes: Vec<Dense>,
    /// `U(T, 0)`
    propagator: Dense,
    ket_dims: Dims,
}

fn fold(e: f64, period: f64) -> f64 {
    let w = 2.0 * PI / period;
    let mut e = e - w * (e / w).round();
    if e <= -PI / period {
        e += w;
    }
    if e > PI / period {
        e -= w;
    }
    e
}

impl FloquetBasis {
    pub fn new(
        h: &QobjEvo,
        period: f64,
        n_t: usize,
        args: &Args,
        opts: &IntegratorOptions,
    ) -> Result<FloquetBasis> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
        }
        if n_t < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 grid points, got {n_t}")));
        }
        if h.is_super() || h.dims().rows != h.dims().cols {
            return Err(Error::InvalidArgument("Floquet analysis needs a square Hamiltonian".into()));
        }
        let d = h.shape().0;
        let gen = Arc::new(prepare_generator(&h.scale(C64::new(0.0, -1.0))));
        let args = args.clone();
        // all columns of U are integrated together so they share one step sequence
        let rhs = {
            let gen = gen.clone();
            move |t: f64, y: &[C64], dy: &mut [C64]| {
                dy.fill(C64::new(0.0, 0.0));
                for (yc, dc) in y.chunks(d).zip(dy.chunks_mut(d)) {
                    gen.apply(t, &args, C64::new(1.0, 0.0), yc, dc)?;
                }
                Ok(())
            }
        };
        let mut solver = Dopri5::new(rhs, 0.0, Dense::identity(d).into_vec(), opts)?;
        solver.set_bound(Some(period));
        let mut props = Vec::with_capacity(n_t + 1);
        props.push(Dense::identity(d));
        for j in 1..=n_t {
            let t = if j == n_t { period } else { period * j as f64 / n_t as f64 };
            props.push(Dense::from_col_major(d, d, solver.integrate_to(t)?));
        }
        let u_t = props[n_t].clone();
        let (lambda, vecs) = eig_general(&u_t)?;
        let mut order: Vec<usize> = (0..d).collect();
        let eps: Vec<f64> = lambda.iter().map(|l| fold(-l.arg() / period, period)).collect();
        order.sort_by(|&a, &b| eps[a].total_cmp(&eps[b]));
        let quasienergies: Vec<f64> = order.iter().map(|&k| eps[k]).collect();
        let phi0 = Dense::from_fn(d, d, |i, j| vecs.get(i, order[j]));
        let phi0 = normalize_columns(phi0);
        let modes = props
            .iter()
            .enumerate()
            .map(|(j, u)| {
                let t = period * j as f64 / n_t as f64;
                let mut m = u.matmul(&phi0);
                for (a, &e) in quasienergies.iter().enumerate() {
                    let ph = C64::from_polar(1.0, e * t);
                    for x in m.column_mut(a) {
                        *x *= ph;
                    }
                }
                m
            })
            .collect();
        Ok(FloquetBasis {
            period,
            n_t,
            quasienergies,
            modes,
            propagator: u_t,
            ket_dims: Dims::ket_of(&h.dims().rows),
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn quasienergies(&self) -> &[f64] {
        &self.quasienergies
    }

    pub fn propagator(&self) -> &Dense {
        &self.propagator
    }

    /// Mode matrix at grid point `j` (columns are `Φ_α(t_j)`).
    pub fn grid_modes(&self, j: usize) -> &Dense {
        &self.modes[j]
    }

    /// `Φ_α(t)` for any `t`, linearly interpolated within the period grid.
    pub fn modes_at(&self, t: f64) -> Dense {
        let tau = t.rem_euclid(self.period);
        let x = tau / self.period * self.n_t as f64;
        let j = (x.floor() as usize).min(self.n_t - 1);
        let f = x - j as f64;
        if f == 0.0 {
            return self.modes[j].clone();
        }
        self.modes[j].scale(C64::new(1.0 - f, 0.0)).add_scaled(&self.modes[j + 1], C64::new(f, 0.0))
    }

    pub fn mode_kets(&self, t: f64) -> Vec<Qobj> {
        let m = self.modes_at(t);
        (0..m.ncols())
            .map(|a| {
                Qobj::new(Data::Dense(Dense::column_vector(m.column(a))), Some(self.ket_dims.clone()))
                    .expect("mode matches the Hamiltonian dims")
            })
            .collect()
    }

    /// Expansion coefficients of `psi0` in the modes at `t = 0`.
    pub fn coefficients(&self, psi0: &Qobj) -> Result<Vec<C64>> {
        if !psi0.is_ket() || psi0.dims() != &self.ket_dims {
            return Err(Error::Dimension(format!(
                "initial state dims {} do not match {}",
                psi0.dims(),
                self.ket_dims
            )));
        }
        let lu = Lu::factor(&self.modes[0])?;
        let mut c = psi0.full().into_vec();
        lu.solve_in_place(&mut c);
        Ok(c)
    }

    /// `ψ(t) = Σ_α c_α e^{-iε_α t} Φ_α(t)`
    pub fn state_vector(&self, c: &[C64], t: f64) -> Vec<C64> {
        let m = self.modes_at(t);
        let mut psi = vec![C64::new(0.0, 0.0); m.nrows()];
        for (a, (&ca, &e)) in c.iter().zip(&self.quasienergies).enumerate() {
            let w = ca * C64::from_polar(1.0, -e * t);
            for (p, &x) in psi.iter_mut().zip(m.column(a)) {
                *p += w * x;
            }
        }
        psi
    }
}

fn normalize_columns(mut m: Dense) -> Dense {
    for j in 0..m.ncols() {
        let col = m.column_mut(j);
        let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            for x in col.iter_mut() {
                *x /= n;
            }
        }
    }
    m
}

/// Schrödinger evolution expanded in a precomputed Floquet basis.
pub fn fsesolve(fb: &FloquetBasis, psi0: &Qobj, tlist: &[f64], e_ops: &[Qobj]) -> Result<SolveResult> {
    check_tlist(tlist)?;
    let start = Instant::now();
    let op_dims = fb.ket_dims.ket_to_oper();
    for op in e_ops {
        if op.dims() != &op_dims {
            return Err(Error::Dimension(format!(
                "expectation operator dims {} do not match {}",
                op.dims(),
                op_dims
            )));
        }
    }
    let c = fb.coefficients(psi0)?;
    let store = e_ops.is_empty();
    let mut expect = vec![Vec::with_capacity(tlist.len()); e_ops.len()];
    let mut states = Vec::new();
    let mut last = Vec::new();
    for &t in tlist {
        let psi = fb.state_vector(&c, t);
        for (series, op) in expect.iter_mut().zip(e_ops) {
            series.push(expect_ket_vec(op.data(), &psi));
        }
        if store {
            states.push(Qobj::new(Data::Dense(Dense::column_vector(&psi)), Some(fb.ket_dims.clone()))?);
        }
        last = psi;
    }
    Ok(SolveResult {
        times: tlist.to_vec(),
        expect,
        states: store.then_some(states),
        final_state: Some(Qobj::new(Data::Dense(Dense::column_vector(&last)), Some(fb.ket_dims.clone()))?),
        stats: Stats {
            runtime: start.elapsed(),
            ..Default::default()
        },
    })
}
