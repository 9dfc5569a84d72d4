//! Schrödinger and Lindblad evolution with a reusable solver object.

use std::sync::Arc;
use std::time::Instant;

use openq_core::data::{Data, Dense, Format};
use openq_core::odeint::{check_targets, DiagPropagator, Dopri5, IntegratorOptions, Method};
use openq_core::qobj::{expect_ket_vec, expect_vec_dm, Space};
use openq_core::tdep::{self, Args, QobjEvo};
use openq_core::{Dims, Error, Kind, Qobj, Result, C64};

use crate::result::{SolveResult, SolverOptions, Stats};

pub(crate) type Rhs = Box<dyn FnMut(f64, &[C64], &mut [C64]) -> Result<()> + Send>;

pub(crate) fn rhs_of(gen: Arc<QobjEvo>, args: Args) -> Rhs {
    Box::new(move |t, y, dy| gen.apply(t, &args, C64::new(1.0, 0.0), y, dy))
}

pub(crate) fn check_tlist(tlist: &[f64]) -> Result<()> {
    if tlist.is_empty() {
        return Err(Error::InvalidArgument("tlist is empty".into()));
    }
    if tlist.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("tlist contains non-finite times".into()));
    }
    check_targets(tlist[0], tlist)
}

/// Converts every term to CSR, which is what the matvec loop wants.
pub(crate) fn prepare_generator(gen: &QobjEvo) -> QobjEvo {
    gen.to(Format::Csr).compress()
}

/// Integrates `dy/dt = G(t) y` and calls `observe(k, t_k, y_k)` at every output time.
pub fn evolve_vector(
    gen: &Arc<QobjEvo>,
    args: &Args,
    y0: Vec<C64>,
    tlist: &[f64],
    opts: &IntegratorOptions,
    mut observe: impl FnMut(usize, f64, &[C64]) -> Result<()>,
) -> Result<Stats> {
    check_tlist(tlist)?;
    let start = Instant::now();
    let t0 = tlist[0];
    let mut stats = Stats::default();
    match opts.method {
        Method::DiagExpm => {
            let Some(c) = gen.constant_part().filter(|_| gen.is_constant()) else {
                return Err(Error::Method(
                    "the diag method needs a time-independent generator".into(),
                ));
            };
            let prop = DiagPropagator::new(&c.full())?;
            let coords = prop.coords(&y0);
            for (k, &t) in tlist.iter().enumerate() {
                if t == t0 {
                    observe(k, t, &y0)?;
                } else {
                    observe(k, t, &prop.evolve_coords(&coords, t - t0))?;
                }
            }
        }
        Method::Rk45 => {
            let mut solver = Dopri5::new(rhs_of(gen.clone(), args.clone()), t0, y0, opts)?;
            solver.set_bound(tlist.last().copied());
            let mut y = vec![C64::new(0.0, 0.0); solver.y().len()];
            for (k, &t) in tlist.iter().enumerate() {
                solver.integrate_to_into(t, &mut y)?;
                observe(k, t, &y)?;
            }
            stats.nfev = solver.nfev();
            stats.steps = solver.steps();
        }
    }
    stats.runtime = start.elapsed();
    Ok(stats)
}

/// What the state vector represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evolution {
    Schrodinger,
    Master,
}

enum Session {
    Rk(Box<Dopri5<Rhs>>),
    Diag {
        prop: Arc<DiagPropagator>,
        coords: Vec<C64>,
        y0: Vec<C64>,
        t0: f64,
        t: f64,
    },
}

/// Built once from a Hamiltonian or Liouvillian; evolves any number of initial states.
pub struct Solver {
    gen: Arc<QobjEvo>,
    kind: Evolution,
    /// Operator dims of the physical system.
    op_dims: Dims,
    opts: SolverOptions,
    args: Args,
    diag: Option<Arc<DiagPropagator>>,
    session: Option<Session>,
}

fn square_oper_dims(h: &QobjEvo) -> Result<Dims> {
    let dims = h.dims().clone();
    if dims.rows != dims.cols {
        return Err(Error::Dimension(format!("Hamiltonian is not square: dims {dims}")));
    }
    Ok(dims)
}

impl Solver {
    /// `dψ/dt = -i H(t) ψ`
    pub fn sesolve(h: impl Into<QobjEvo>, opts: SolverOptions) -> Result<Solver> {
        let h = h.into();
        if h.is_super() {
            return Err(Error::InvalidArgument(
                "sesolve needs a Hamiltonian, got a superoperator".into(),
            ));
        }
        let op_dims = square_oper_dims(&h)?;
        let gen = prepare_generator(&h.scale(C64::new(0.0, -1.0)));
        Solver::build(gen, Evolution::Schrodinger, op_dims, opts)
    }

    /// `dρ/dt = L(t) ρ` with `L` built from `h` and `c_ops`; a superoperator `h`
    /// is taken as the Liouvillian.
    pub fn mesolve(h: impl Into<QobjEvo>, c_ops: &[QobjEvo], opts: SolverOptions) -> Result<Solver> {
        let h = h.into();
        let l = tdep::liouvillian(Some(&h), c_ops)?;
        Solver::from_liouvillian(l, opts)
    }

    pub fn from_liouvillian(l: QobjEvo, opts: SolverOptions) -> Result<Solver> {
        let Space::Super(inner) = &l.dims().rows else {
            return Err(Error::InvalidArgument("expected a superoperator generator".into()));
        };
        let op_dims = (**inner).clone();
        Solver::build(prepare_generator(&l), Evolution::Master, op_dims, opts)
    }

    fn build(gen: QobjEvo, kind: Evolution, op_dims: Dims, opts: SolverOptions) -> Result<Solver> {
        opts.integrator.validate()?;
        let diag = if opts.integrator.method == Method::DiagExpm {
            let Some(c) = gen.constant_part().filter(|_| gen.is_constant()) else {
                return Err(Error::Method(
                    "the diag method needs a time-independent generator".into(),
                ));
            };
            Some(Arc::new(DiagPropagator::new(&c.full())?))
        } else {
            None
        };
        Ok(Solver {
            gen: Arc::new(gen),
            kind,
            op_dims,
            opts,
            args: Args::new(),
            diag,
            session: None,
        })
    }

    pub fn with_args(mut self, args: Args) -> Solver {
        self.args = args;
        self
    }

    pub fn generator(&self) -> &QobjEvo {
        &self.gen
    }

    pub fn kind(&self) -> Evolution {
        self.kind
    }

    fn state_vector(&self, state: &Qobj) -> Result<Vec<C64>> {
        let mismatch = || {
            Error::Dimension(format!(
                "initial state dims {} do not match the system dims {}",
                state.dims(),
                self.op_dims
            ))
        };
        match self.kind {
            Evolution::Schrodinger => {
                if !state.is_ket() {
                    return Err(Error::InvalidArgument(format!(
                        "sesolve needs a ket, got {}",
                        state.kind()
                    )));
                }
                if state.dims().rows != self.op_dims.cols {
                    return Err(mismatch());
                }
                Ok(state.full().into_vec())
            }
            Evolution::Master => {
                let rho = match state.kind() {
                    Kind::Ket => state.proj()?,
                    Kind::Oper => state.clone(),
                    Kind::OperatorKet => {
                        if state.dims() != &Dims::operator_ket_of(&self.op_dims) {
                            return Err(mismatch());
                        }
                        return Ok(state.full().into_vec());
                    }
                    k => {
                        return Err(Error::InvalidArgument(format!(
                            "initial state must be a ket or density operator, got {k}"
                        )))
                    }
                };
                if rho.dims() != &self.op_dims {
                    return Err(mismatch());
                }
                Ok(rho.full().into_vec())
            }
        }
    }

    fn vector_state(&self, y: &[C64]) -> Qobj {
        state_from_vector(self.kind, &self.op_dims, y)
    }

    fn check_e_ops(&self, e_ops: &[Qobj]) -> Result<Vec<Data>> {
        e_ops
            .iter()
            .map(|op| {
                if op.dims() != &self.op_dims {
                    return Err(Error::Dimension(format!(
                        "expectation operator dims {} do not match the system dims {}",
                        op.dims(),
                        self.op_dims
                    )));
                }
                Ok(match op.data() {
                    Data::Dia(_) => op.data().convert(Format::Csr),
                    d => d.clone(),
                })
            })
            .collect()
    }

    pub fn run(&self, state0: &Qobj, tlist: &[f64], e_ops: &[Qobj]) -> Result<SolveResult> {
        let y0 = self.state_vector(state0)?;
        let ops = self.check_e_ops(e_ops)?;
        let store = self.opts.stores_states(e_ops.len());
        let n = tlist.len();
        let mut expect = vec![Vec::with_capacity(n); ops.len()];
        let mut states = Vec::new();
        let mut last = Vec::new();
        let kind = self.kind;
        let observe = |k: usize, _t: f64, y: &[C64]| {
            for (series, op) in expect.iter_mut().zip(&ops) {
                series.push(expectation(kind, op, y));
            }
            if store {
                states.push(self.vector_state(y));
            }
            if k + 1 == n {
                last = y.to_vec();
            }
            Ok(())
        };
        let stats = match &self.diag {
            Some(prop) => {
                check_tlist(tlist)?;
                let start = Instant::now();
                let mut observe = observe;
                let coords = prop.coords(&y0);
                for (k, &t) in tlist.iter().enumerate() {
                    if t == tlist[0] {
                        observe(k, t, &y0)?;
                    } else {
                        observe(k, t, &prop.evolve_coords(&coords, t - tlist[0]))?;
                    }
                }
                Stats {
                    runtime: start.elapsed(),
                    ..Default::default()
                }
            }
            None => evolve_vector(&self.gen, &self.args, y0, tlist, &self.opts.integrator, observe)?,
        };
        let final_state = (self.opts.store_final_state || store).then(|| self.vector_state(&last));
        Ok(SolveResult {
            times: tlist.to_vec(),
            expect,
            states: store.then_some(states),
            final_state,
            stats,
        })
    }

    /// Begins a stepping session at `t0`.
    pub fn start(&mut self, state0: &Qobj, t0: f64) -> Result<()> {
        let y0 = self.state_vector(state0)?;
        self.session = Some(match &self.diag {
            Some(prop) => Session::Diag {
                prop: prop.clone(),
                coords: prop.coords(&y0),
                y0,
                t0,
                t: t0,
            },
            None => Session::Rk(Box::new(Dopri5::new(
                rhs_of(self.gen.clone(), self.args.clone()),
                t0,
                y0,
                &self.opts.integrator,
            )?)),
        });
        Ok(())
    }

    /// Advances the session to `t`, optionally replacing the coefficient arguments.
    pub fn step(&mut self, t: f64, args: Option<Args>) -> Result<Qobj> {
        let Some(session) = self.session.as_mut() else {
            return Err(Error::InvalidArgument("call start before step".into()));
        };
        let current = match session {
            Session::Rk(s) => s.t(),
            Session::Diag { t, .. } => *t,
        };
        if t < current {
            return Err(Error::InvalidArgument(format!(
                "step times must not decrease (at t = {current}, asked for t = {t})"
            )));
        }
        let y = match session {
            Session::Rk(s) => {
                if let Some(a) = args {
                    let y = s.integrate_to(t)?;
                    self.args = a;
                    let mut fresh = Dopri5::new(
                        rhs_of(self.gen.clone(), self.args.clone()),
                        t,
                        y.clone(),
                        &self.opts.integrator,
                    )?;
                    std::mem::swap(s.as_mut(), &mut fresh);
                    y
                } else {
                    s.integrate_to(t)?
                }
            }
            Session::Diag {
                prop,
                coords,
                y0,
                t0,
                t: now,
            } => {
                *now = t;
                if t == *t0 {
                    y0.clone()
                } else {
                    prop.evolve_coords(coords, t - *t0)
                }
            }
        };
        Ok(self.vector_state(&y))
    }
}

pub(crate) fn expectation(kind: Evolution, op: &Data, y: &[C64]) -> C64 {
    match kind {
        Evolution::Schrodinger => expect_ket_vec(op, y),
        Evolution::Master => expect_vec_dm(op, y),
    }
}

pub(crate) fn state_from_vector(kind: Evolution, op_dims: &Dims, y: &[C64]) -> Qobj {
    match kind {
        Evolution::Schrodinger => {
            let dims = Dims::ket_of(&op_dims.rows);
            Qobj::new(Data::Dense(Dense::from_col_major(y.len(), 1, y.to_vec())), Some(dims))
                .expect("vector matches the system dims")
        }
        Evolution::Master => {
            let n = op_dims.rows.size();
            Qobj::new(
                Data::Dense(Dense::from_col_major(n, n, y.to_vec())),
                Some(op_dims.clone()),
            )
            .expect("vector matches the system dims")
        }
    }
}

/// Schrödinger equation solver.
pub fn sesolve(
    h: impl Into<QobjEvo>,
    psi0: &Qobj,
    tlist: &[f64],
    e_ops: &[Qobj],
    opts: SolverOptions,
) -> Result<SolveResult> {
    Solver::sesolve(h, opts)?.run(psi0, tlist, e_ops)
}

/// Lindblad master equation solver. With no collapse operators, a ket initial
/// state and a Hamiltonian (not a Liouvillian), this runs `sesolve`.
pub fn mesolve(
    h: impl Into<QobjEvo>,
    rho0: &Qobj,
    tlist: &[f64],
    c_ops: &[QobjEvo],
    e_ops: &[Qobj],
    opts: SolverOptions,
) -> Result<SolveResult> {
    let h = h.into();
    if c_ops.is_empty() && rho0.is_ket() && !h.is_super() {
        return sesolve(h, rho0, tlist, e_ops, opts);
    }
    Solver::mesolve(h, c_ops, opts)?.run(rho0, tlist, e_ops)
}
