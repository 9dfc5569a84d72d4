//! Monte Carlo wave-function trajectories.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use openq_core::data::{Data, Format};
use openq_core::odeint::Dopri5;
use openq_core::qobj::expect_ket_vec;
use openq_core::tdep::{Args, QobjEvo};
use openq_core::{Dims, Error, Qobj, Result, C64};

use crate::evolution::{check_tlist, prepare_generator, rhs_of, sesolve, Rhs};
use crate::multitraj::{
    average_states, map_trajectories, photocurrent, trajectory_rng, trajectory_seed,
    weighted_expect, within_target, McOptions, MultiTrajResult, TrajRecord, TrajState,
};
use crate::result::SolverOptions;

/// Initial condition: a pure state or a statistical mixture of pure states.
#[derive(Clone, Debug)]
pub enum InitialState {
    Ket(Qobj),
    /// `(probability, ket)` pairs; probabilities are normalized internally.
    Mixture(Vec<(f64, Qobj)>),
}

impl From<Qobj> for InitialState {
    fn from(q: Qobj) -> Self {
        InitialState::Ket(q)
    }
}

impl From<&Qobj> for InitialState {
    fn from(q: &Qobj) -> Self {
        InitialState::Ket(q.clone())
    }
}

impl InitialState {
    fn components(&self) -> Result<Vec<(f64, Qobj)>> {
        let list = match self {
            InitialState::Ket(k) => vec![(1.0, k.clone())],
            InitialState::Mixture(v) => v.clone(),
        };
        if list.is_empty() {
            return Err(Error::InvalidArgument("empty mixture".into()));
        }
        let total: f64 = list.iter().map(|(p, _)| *p).sum();
        if list.iter().any(|(p, _)| !(*p >= 0.0)) || !(total > 0.0) {
            return Err(Error::InvalidArgument("mixture probabilities must be non-negative".into()));
        }
        list.into_iter()
            .map(|(p, k)| {
                if !k.is_ket() {
                    return Err(Error::InvalidArgument(format!(
                        "trajectory initial states must be kets, got {}",
                        k.kind()
                    )));
                }
                Ok((p / total, k.unit()?))
            })
            .collect()
    }
}

/// Non-Hermitian drift plus jump operators, shared read-only by all trajectories.
pub(crate) struct JumpProblem {
    pub gen: Arc<QobjEvo>,
    pub c_ops: Vec<QobjEvo>,
    pub args: Args,
    pub e_ops: Vec<Data>,
    pub store: bool,
    pub ket_dims: Dims,
    pub op_dims: Dims,
}

impl JumpProblem {
    pub fn new(h: &QobjEvo, c_ops: &[QobjEvo], e_ops: &[Qobj], store: bool) -> Result<JumpProblem> {
        if h.is_super() {
            return Err(Error::InvalidArgument("trajectory solvers need a Hamiltonian".into()));
        }
        let op_dims = h.dims().clone();
        if op_dims.rows != op_dims.cols {
            return Err(Error::Dimension(format!("Hamiltonian is not square: dims {op_dims}")));
        }
        // H_eff = H - i/2 Σ C†C, and the generator is -i H_eff
        let mut heff = h.clone();
        for c in c_ops {
            if c.dims() != &op_dims {
                return Err(Error::Dimension(format!(
                    "collapse operator dims {} do not match the Hamiltonian dims {op_dims}",
                    c.dims()
                )));
            }
            heff = heff.add(&c.dag().matmul(c)?.scale(C64::new(0.0, -0.5)))?;
        }
        let gen = prepare_generator(&heff.scale(C64::new(0.0, -1.0)));
        let e_ops = e_ops
            .iter()
            .map(|op| {
                if op.dims() != &op_dims {
                    return Err(Error::Dimension(format!(
                        "expectation operator dims {} do not match the Hamiltonian dims {op_dims}",
                        op.dims()
                    )));
                }
                Ok(op.data().convert(Format::Csr))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(JumpProblem {
            gen: Arc::new(gen),
            c_ops: c_ops.iter().map(prepare_generator).collect(),
            args: Args::new(),
            e_ops,
            store,
            ket_dims: Dims::ket_of(&op_dims.rows),
            op_dims,
        })
    }
}

/// How the first jump threshold is drawn.
#[derive(Clone, Copy, Debug)]
pub(crate) enum FirstDraw {
    Uniform,
    /// `r ~ U[p0, 1)`: conditioned on at least one jump before the final time.
    Above(f64),
    NoJump,
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

struct Recorder<'a> {
    p: &'a JumpProblem,
    rec: TrajRecord,
}

impl Recorder<'_> {
    fn observe(&mut self, y: &[C64]) {
        let n2 = norm_sqr(y);
        let inv = 1.0 / n2.sqrt();
        for (series, op) in self.rec.expect.iter_mut().zip(&self.p.e_ops) {
            series.push(expect_ket_vec(op, y) / n2);
        }
        if let Some(states) = self.rec.states.as_mut() {
            states.push(TrajState::Ket(y.iter().map(|z| z * inv).collect()));
        }
        if let Some(norms) = self.rec.norms.as_mut() {
            norms.push(n2);
        }
    }
}

/// One trajectory. `rng` is only touched when a threshold or channel is drawn.
pub(crate) fn run_trajectory(
    p: &JumpProblem,
    psi0: &[C64],
    tlist: &[f64],
    opts: &McOptions,
    rng: &mut ChaCha8Rng,
    first: FirstDraw,
) -> Result<TrajRecord> {
    let n_t = tlist.len();
    let mut out = Recorder {
        p,
        rec: TrajRecord {
            expect: vec![Vec::with_capacity(n_t); p.e_ops.len()],
            states: p.store.then(|| Vec::with_capacity(n_t)),
            norms: matches!(first, FirstDraw::NoJump).then(|| Vec::with_capacity(n_t)),
            ..Default::default()
        },
    };
    let t0 = tlist[0];
    let tf = tlist[n_t - 1];
    out.observe(psi0);
    if n_t == 1 {
        return Ok(out.rec);
    }
    let rhs: Rhs = rhs_of(p.gen.clone(), p.args.clone());
    let mut solver = Dopri5::new(rhs, t0, psi0.to_vec(), &opts.integrator)?;
    solver.set_bound(Some(tf));
    let mut r = match first {
        FirstDraw::Uniform => rng.random::<f64>(),
        FirstDraw::Above(p0) => p0 + (1.0 - p0) * rng.random::<f64>(),
        FirstDraw::NoJump => -1.0,
    };
    let mut next = 1;
    let mut steps = 0;
    let mut y = vec![C64::new(0.0, 0.0); psi0.len()];
    let mut cbuf = vec![C64::new(0.0, 0.0); psi0.len()];
    while next < n_t {
        if steps >= opts.integrator.nsteps {
            return Err(Error::StepLimit {
                nsteps: opts.integrator.nsteps,
                from: tlist[next - 1],
                to: tlist[next],
            });
        }
        let seg = solver.step()?.clone();
        steps += 1;
        seg.eval_into(seg.t1(), &mut y);
        let jump_at = if norm_sqr(&y) <= r {
            Some(locate_jump(&seg, r, opts, &mut y))
        } else {
            None
        };
        let limit = jump_at.unwrap_or(seg.t1());
        while next < n_t && tlist[next] <= limit {
            let mut s = vec![C64::new(0.0, 0.0); psi0.len()];
            seg.eval_into(tlist[next], &mut s);
            out.observe(&s);
            next += 1;
            steps = 0;
        }
        if let Some(tj) = jump_at {
            seg.eval_into(tj, &mut y);
            let ch = apply_jump(p, tj, &mut y, &mut cbuf, rng)?;
            out.rec.jumps.push((tj, ch));
            solver.restart(tj, y.clone())?;
            r = rng.random::<f64>();
        }
    }
    Ok(out.rec)
}

/// Bisection on the interpolant for `‖ψ(t)‖² = r`; returns the upper end of the
/// final bracket, where the norm is already below the threshold.
fn locate_jump(seg: &openq_core::odeint::DenseSegment, r: f64, opts: &McOptions, y: &mut [C64]) -> f64 {
    let (mut lo, mut hi) = (seg.t0(), seg.t1());
    let scale = hi.abs().max(hi - lo);
    for _ in 0..opts.norm_steps {
        if hi - lo <= opts.norm_t_tol * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        seg.eval_into(mid, y);
        if norm_sqr(y) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn apply_jump(
    p: &JumpProblem,
    t: f64,
    y: &mut [C64],
    buf: &mut [C64],
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    let mut weights = Vec::with_capacity(p.c_ops.len());
    for c in &p.c_ops {
        buf.fill(C64::new(0.0, 0.0));
        c.apply(t, &p.args, C64::new(1.0, 0.0), y, buf)?;
        weights.push(norm_sqr(buf));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical(format!("no jump channel has weight at t = {t}")));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut ch = weights.len() - 1;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc && *w > 0.0 {
            ch = k;
            break;
        }
    }
    buf.fill(C64::new(0.0, 0.0));
    p.c_ops[ch].apply(t, &p.args, C64::new(1.0, 0.0), y, buf)?;
    let n = norm_sqr(buf).sqrt();
    if !(n > 0.0) {
        return Err(Error::Numerical(format!("state vanished after a jump at t = {t}")));
    }
    for (o, b) in y.iter_mut().zip(buf.iter()) {
        *o = b / n;
    }
    Ok(ch)
}

/// Assigns trajectory indices to mixture components so that every prefix is
/// as close to proportional as possible.
pub(crate) fn allot(probs: &[f64], ntraj: usize) -> Vec<usize> {
    let mut counts = vec![0usize; probs.len()];
    (0..ntraj)
        .map(|i| {
            let k = (0..probs.len())
                .max_by(|&a, &b| {
                    let da = probs[a] * (i + 1) as f64 - counts[a] as f64;
                    let db = probs[b] * (i + 1) as f64 - counts[b] as f64;
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("at least one component");
            counts[k] += 1;
            k
        })
        .collect()
}

/// Raw output of the trajectory map before weighting.
pub(crate) struct McRun {
    pub records: Vec<TrajRecord>,
    pub weights: Vec<f64>,
    pub seed: u64,
    pub note: Option<String>,
    pub no_jump_norm: Option<Vec<f64>>,
    pub start: Instant,
}

pub(crate) type Multiplier<'a> = &'a (dyn Fn(&TrajRecord, usize) -> f64 + Sync);

fn compute_weights(
    comp_of: &[usize],
    probs: &[f64],
    p0: Option<&[f64]>,
    n_used: usize,
) -> Vec<f64> {
    let mut counts = vec![0usize; probs.len()];
    for &k in &comp_of[..n_used] {
        counts[k] += 1;
    }
    let mut seen = vec![false; probs.len()];
    comp_of[..n_used]
        .iter()
        .map(|&k| {
            let first = !seen[k];
            seen[k] = true;
            match p0 {
                Some(p0) if counts[k] >= 2 => {
                    if first {
                        probs[k] * p0[k]
                    } else {
                        probs[k] * (1.0 - p0[k]) / (counts[k] - 1) as f64
                    }
                }
                _ => probs[k] / counts[k] as f64,
            }
        })
        .collect()
}

pub(crate) fn run_mc(
    p: &JumpProblem,
    init: &InitialState,
    tlist: &[f64],
    opts: &McOptions,
    multiplier: Multiplier<'_>,
) -> Result<McRun> {
    opts.validate()?;
    check_tlist(tlist)?;
    let start = Instant::now();
    let comps = init.components()?;
    for (_, k) in &comps {
        if k.dims() != &p.ket_dims {
            return Err(Error::Dimension(format!(
                "initial state dims {} do not match {}",
                k.dims(),
                p.ket_dims
            )));
        }
    }
    let probs: Vec<f64> = comps.iter().map(|(q, _)| *q).collect();
    let kets: Vec<Vec<C64>> = comps.iter().map(|(_, k)| k.full().into_vec()).collect();
    let comp_of = allot(&probs, opts.ntraj);
    let seed = opts.master_seed();

    // deterministic no-jump runs, one per component
    let no_jump: Option<Vec<TrajRecord>> = if opts.improved_sampling {
        let mut dummy = trajectory_rng(seed);
        Some(
            kets.iter()
                .map(|k| run_trajectory(p, k, tlist, opts, &mut dummy, FirstDraw::NoJump))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let p0: Option<Vec<f64>> = no_jump.as_ref().map(|runs| {
        runs.iter()
            .map(|r| *r.norms.as_ref().and_then(|n| n.last()).expect("no-jump run records norms"))
            .collect()
    });
    let first_of: Vec<usize> = (0..comps.len())
        .map(|k| comp_of.iter().position(|&c| c == k).unwrap_or(usize::MAX))
        .collect();

    let run = |i: usize| -> Result<TrajRecord> {
        let k = comp_of[i];
        let s = trajectory_seed(seed, i);
        let mut rec = match (&no_jump, &p0) {
            (Some(nj), _) if first_of[k] == i => nj[k].clone(),
            (Some(_), Some(p0)) => {
                let mut rng = trajectory_rng(s);
                run_trajectory(p, &kets[k], tlist, opts, &mut rng, FirstDraw::Above(p0[k]))?
            }
            _ => {
                let mut rng = trajectory_rng(s);
                run_trajectory(p, &kets[k], tlist, opts, &mut rng, FirstDraw::Uniform)?
            }
        };
        rec.seed = s;
        Ok(rec)
    };
    let n_t = tlist.len();
    let n_ops = p.e_ops.len();
    let (records, note) = map_trajectories(opts.ntraj, 0, opts, start, run, |done| {
        let w = compute_weights(&comp_of, &probs, p0.as_deref(), done.len());
        let st = weighted_expect(done, &w, multiplier, n_ops, n_t);
        within_target(&st, done.len(), opts.target_tol.expect("checked by the map"))
    })?;
    let weights = compute_weights(&comp_of, &probs, p0.as_deref(), records.len());
    Ok(McRun {
        records,
        weights,
        seed,
        note,
        no_jump_norm: no_jump.and_then(|mut v| v.swap_remove(0).norms),
        start,
    })
}

pub(crate) fn finish(
    run: McRun,
    p: &JumpProblem,
    tlist: &[f64],
    opts: &McOptions,
    multiplier: Multiplier<'_>,
    trace: Option<Vec<f64>>,
) -> Result<MultiTrajResult> {
    let n_t = tlist.len();
    let st = weighted_expect(&run.records, &run.weights, multiplier, p.e_ops.len(), n_t);
    let states = average_states(&run.records, &run.weights, multiplier, &p.op_dims, n_t)?;
    let pc = photocurrent(&run.records, &run.weights, tlist, p.c_ops.len());
    let runs_expect = opts
        .keep_runs_results
        .then(|| run.records.iter().map(|r| r.expect.clone()).collect());
    Ok(MultiTrajResult {
        times: tlist.to_vec(),
        average_expect: st.mean,
        std_expect: st.std,
        runs_expect,
        average_states: states,
        photocurrent: pc,
        measurement: None,
        runs_measurement: None,
        ntraj: run.records.len(),
        seed: run.seed,
        seeds: run.records.iter().map(|r| r.seed).collect(),
        weights: run.weights,
        trace,
        no_jump_norm: run.no_jump_norm,
        runtime: run.start.elapsed(),
        notes: run.note.into_iter().collect(),
    })
}

fn unit_multiplier(_: &TrajRecord, _: usize) -> f64 {
    1.0
}

/// Monte Carlo wave-function solver. Without collapse operators this is a
/// single deterministic `sesolve` run (per mixture component).
pub fn mcsolve(
    h: impl Into<QobjEvo>,
    psi0: impl Into<InitialState>,
    tlist: &[f64],
    c_ops: &[QobjEvo],
    e_ops: &[Qobj],
    opts: &McOptions,
) -> Result<MultiTrajResult> {
    let h = h.into();
    let init = psi0.into();
    if c_ops.is_empty() {
        return closed_system(&h, &init, tlist, e_ops, opts);
    }
    let p = JumpProblem::new(&h, c_ops, e_ops, opts.stores_states(e_ops.len()))?;
    let run = run_mc(&p, &init, tlist, opts, &unit_multiplier)?;
    finish(run, &p, tlist, opts, &unit_multiplier, None)
}

fn closed_system(
    h: &QobjEvo,
    init: &InitialState,
    tlist: &[f64],
    e_ops: &[Qobj],
    opts: &McOptions,
) -> Result<MultiTrajResult> {
    let start = Instant::now();
    let store = opts.stores_states(e_ops.len());
    let so = SolverOptions {
        store_states: Some(store),
        integrator: opts.integrator.clone(),
        ..Default::default()
    };
    let comps = init.components()?;
    let mut records = Vec::new();
    let mut weights = Vec::new();
    for (prob, ket) in &comps {
        let r = sesolve(h.clone(), ket, tlist, e_ops, so.clone())?;
        records.push(TrajRecord {
            expect: r.expect,
            states: r.states.map(|s| s.iter().map(|q| TrajState::Ket(q.full().into_vec())).collect()),
            ..Default::default()
        });
        weights.push(*prob);
    }
    let op_dims = h.dims().clone();
    // the spread across mixture components is not trajectory noise
    let st = weighted_expect(&records, &weights, &unit_multiplier, e_ops.len(), tlist.len());
    let zero = vec![vec![C64::new(0.0, 0.0); tlist.len()]; e_ops.len()];
    Ok(MultiTrajResult {
        times: tlist.to_vec(),
        average_expect: st.mean,
        std_expect: zero,
        runs_expect: opts.keep_runs_results.then(|| records.iter().map(|r| r.expect.clone()).collect()),
        average_states: average_states(&records, &weights, &unit_multiplier, &op_dims, tlist.len())?,
        photocurrent: Vec::new(),
        ntraj: records.len(),
        seed: opts.seed.unwrap_or(0),
        seeds: vec![0; records.len()],
        weights,
        runtime: start.elapsed(),
        notes: vec!["no collapse operators: deterministic Schrödinger evolution".into()],
        ..Default::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multitraj::MapKind;
    use openq_core::odeint::IntegratorOptions;
    use openq_core::qobj::{basis, sigmam, sigmax, sigmaz};

    fn qubit_opts(ntraj: usize) -> McOptions {
        McOptions {
            ntraj,
            seed: Some(11),
            integrator: IntegratorOptions {
                atol: 1e-10,
                rtol: 1e-8,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn allotment_is_proportional() {
        let a = allot(&[0.25, 0.75], 8);
        assert_eq!(a.iter().filter(|&&k| k == 0).count(), 2);
        assert_eq!(allot(&[1.0], 3), vec![0, 0, 0]);
    }

    #[test]
    fn vanishing_rate_matches_sesolve() {
        let h = sigmax().scale_real(0.8);
        let c = sigmam().scale_real(1e-6);
        let t: Vec<f64> = (0..21).map(|k| k as f64 * 0.25).collect();
        let psi0 = basis(2, 0).unwrap();
        let mc = mcsolve(&h, &psi0, &t, &[c.into()], &[sigmaz()], &McOptions { keep_runs_results: true, ..qubit_opts(20) }).unwrap();
        let so = SolverOptions::with_integrator(qubit_opts(1).integrator);
        let se = sesolve(&h, &psi0, &t, &[sigmaz()], so).unwrap();
        for run in mc.runs_expect.unwrap() {
            for k in 0..t.len() {
                assert!((run[0][k] - se.expect[0][k]).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn no_jump_norm_is_survival_probability() {
        let g = 0.4;
        let c = sigmam().scale_real(f64::sqrt(g));
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.5).collect();
        let opts = McOptions {
            improved_sampling: true,
            integrator: IntegratorOptions {
                atol: 1e-12,
                rtol: 1e-10,
                ..Default::default()
            },
            ..qubit_opts(20)
        };
        let r = mcsolve(&sigmaz().scale_real(0.5), &basis(2, 0).unwrap(), &t, &[c.into()], &[], &opts).unwrap();
        for (k, n) in r.no_jump_norm.unwrap().iter().enumerate() {
            assert!((n - (-g * t[k]).exp()).abs() < 1e-8);
        }
        let wsum: f64 = r.weights.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let c = sigmam().scale_real(0.5);
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.5).collect();
        let mk = |map| McOptions { map, ..qubit_opts(120) };
        let a = mcsolve(&sigmax(), &basis(2, 0).unwrap(), &t, &[c.clone().into()], &[sigmaz()], &mk(MapKind::Serial)).unwrap();
        let b = mcsolve(&sigmax(), &basis(2, 0).unwrap(), &t, &[c.into()], &[sigmaz()], &mk(MapKind::Parallel)).unwrap();
        assert_eq!(a.average_expect, b.average_expect);
        assert_eq!(a.photocurrent, b.photocurrent);
        assert_eq!(a.seeds, b.seeds);
    }

    #[test]
    fn mixture_weights() {
        let c = sigmam().scale_real(0.5);
        let mix = InitialState::Mixture(vec![(0.5, basis(2, 0).unwrap()), (0.5, basis(2, 1).unwrap())]);
        let r = mcsolve(&sigmaz(), mix, &[0.0, 1.0], &[c.into()], &[sigmaz()], &qubit_opts(10)).unwrap();
        assert!(r.average_expect[0][0].norm() < 1e-12);
    }
}
