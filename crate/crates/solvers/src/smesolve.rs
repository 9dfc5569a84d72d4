//! Homodyne stochastic master equation.

use std::time::Instant;

use rand_distr::{Distribution, Normal};

use openq_core::data::{Data, Format};
use openq_core::qobj::{expect_vec_dm, spost, spre};
use openq_core::tdep::{self, Args, QobjEvo};
use openq_core::{Error, Qobj, Result, C64};

use crate::evolution::{check_tlist, prepare_generator};
use crate::multitraj::{
    average_states, map_trajectories, trajectory_rng, trajectory_seed, weighted_expect,
    within_target, McOptions, MultiTrajResult, TrajRecord, TrajState,
};

#[derive(Clone, Debug)]
pub struct SmeOptions {
    pub mc: McOptions,
    /// Substep length; defaults to the output spacing divided by 100.
    pub dt_sub: Option<f64>,
}

impl Default for SmeOptions {
    fn default() -> Self {
        SmeOptions {
            mc: McOptions {
                ntraj: 50,
                ..Default::default()
            },
            dt_sub: None,
        }
    }
}

const DEFAULT_SUBSTEPS: usize = 100;

fn substeps(tlist: &[f64], dt_sub: Option<f64>) -> Result<(f64, usize)> {
    if tlist.len() < 2 {
        return Ok((0.0, DEFAULT_SUBSTEPS));
    }
    let dt = tlist[1] - tlist[0];
    for w in tlist.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-10 * dt.abs().max(1e-300) {
            return Err(Error::InvalidArgument("smesolve needs a uniform tlist".into()));
        }
    }
    let n = match dt_sub {
        None => DEFAULT_SUBSTEPS,
        Some(h) => {
            if !(h > 0.0) {
                return Err(Error::InvalidArgument(format!("dt_sub must be positive, got {h}")));
            }
            let n = (dt / h).round();
            if n < 1.0 || (n * h - dt).abs() > 1e-9 * dt {
                return Err(Error::InvalidArgument(format!(
                    "dt_sub = {h} does not divide the output spacing {dt}"
                )));
            }
            n as usize
        }
    };
    Ok((dt, n))
}

struct SmeProblem {
    l: QobjEvo,
    /// `spre(s) + spost(s†)` per homodyne channel.
    s_super: Vec<Data>,
    /// `s + s†` per channel.
    x_ops: Vec<Data>,
    e_ops: Vec<Data>,
    d: usize,
    store: bool,
}

fn zeros(n: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); n]
}

impl SmeProblem {
    fn drift(&self, t: f64, rho: &[C64], out: &mut [C64]) -> Result<()> {
        out.fill(C64::new(0.0, 0.0));
        self.l.apply(t, &Args::new(), C64::new(1.0, 0.0), rho, out)
    }

    /// Classical RK4 increment of the deterministic part over `h`.
    fn rk4(&self, t: f64, h: f64, rho: &[C64], k: &mut [Vec<C64>; 5]) -> Result<()> {
        let n = rho.len();
        let [k1, k2, k3, k4, tmp] = k;
        self.drift(t, rho, k1)?;
        for i in 0..n {
            tmp[i] = rho[i] + k1[i] * (0.5 * h);
        }
        self.drift(t + 0.5 * h, tmp, k2)?;
        for i in 0..n {
            tmp[i] = rho[i] + k2[i] * (0.5 * h);
        }
        self.drift(t + 0.5 * h, tmp, k3)?;
        for i in 0..n {
            tmp[i] = rho[i] + k3[i] * h;
        }
        self.drift(t + h, tmp, k4)?;
        for i in 0..n {
            tmp[i] = (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        Ok(())
    }

    fn normalize(&self, rho: &mut [C64]) {
        let d = self.d;
        let tr: f64 = (0..d).map(|a| rho[a + a * d].re).sum();
        for a in 0..d {
            rho[a + a * d] = C64::new(rho[a + a * d].re, 0.0);
            for b in a + 1..d {
                let m = 0.5 * (rho[a + b * d] + rho[b + a * d].conj());
                rho[a + b * d] = m;
                rho[b + a * d] = m.conj();
            }
        }
        for x in rho.iter_mut() {
            *x /= tr;
        }
    }

    fn run(
        &self,
        rho0: &[C64],
        tlist: &[f64],
        dt: f64,
        nsub: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<TrajRecord> {
        let n_t = tlist.len();
        let mut rec = TrajRecord {
            expect: vec![Vec::with_capacity(n_t); self.e_ops.len()],
            states: self.store.then(|| Vec::with_capacity(n_t)),
            measurement: Some(vec![Vec::with_capacity(n_t.saturating_sub(1)); self.x_ops.len()]),
            ..Default::default()
        };
        let mut rho = rho0.to_vec();
        let observe = |rec: &mut TrajRecord, rho: &[C64]| {
            for (s, op) in rec.expect.iter_mut().zip(&self.e_ops) {
                s.push(expect_vec_dm(op, rho));
            }
            if let Some(states) = rec.states.as_mut() {
                states.push(TrajState::Dm(rho.to_vec()));
            }
        };
        observe(&mut rec, &rho);
        let h = dt / nsub as f64;
        let normal = Normal::new(0.0, h.sqrt()).map_err(|e| Error::Numerical(e.to_string()))?;
        let n = rho.len();
        let mut k: [Vec<C64>; 5] = std::array::from_fn(|_| zeros(n));
        let mut diff = zeros(n);
        let mut sr = zeros(n);
        for j in 1..n_t {
            let t0 = tlist[j - 1];
            let mut xsum = vec![0.0; self.x_ops.len()];
            let mut wsum = vec![0.0; self.x_ops.len()];
            for m in 0..nsub {
                let t = t0 + h * m as f64;
                // Itô: the noise term uses the state at the start of the substep
                diff.fill(C64::new(0.0, 0.0));
                for (c, (s, x)) in self.s_super.iter().zip(&self.x_ops).enumerate() {
                    let xv = expect_vec_dm(x, &rho).re;
                    let dw = normal.sample(rng);
                    xsum[c] += xv;
                    wsum[c] += dw;
                    sr.fill(C64::new(0.0, 0.0));
                    s.gemv_add(C64::new(1.0, 0.0), &rho, &mut sr);
                    for i in 0..n {
                        diff[i] += (sr[i] - rho[i] * xv) * dw;
                    }
                }
                self.rk4(t, h, &rho, &mut k)?;
                for i in 0..n {
                    rho[i] += k[4][i] + diff[i];
                }
                self.normalize(&mut rho);
            }
            if let Some(meas) = rec.measurement.as_mut() {
                for c in 0..meas.len() {
                    meas[c].push(xsum[c] / nsub as f64 + wsum[c] / dt);
                }
            }
            observe(&mut rec, &rho);
        }
        Ok(rec)
    }
}

/// Euler–Maruyama noise on top of an RK4 deterministic step, `dt_sub` per substep.
/// `sc_ops` are monitored homodyne channels; they also dissipate.
pub fn smesolve(
    h: impl Into<QobjEvo>,
    rho0: &Qobj,
    tlist: &[f64],
    c_ops: &[QobjEvo],
    sc_ops: &[Qobj],
    e_ops: &[Qobj],
    opts: &SmeOptions,
) -> Result<MultiTrajResult> {
    let mc = &opts.mc;
    mc.validate()?;
    check_tlist(tlist)?;
    let (dt, nsub) = substeps(tlist, opts.dt_sub)?;
    let start = Instant::now();
    let h = h.into();
    let op_dims = h.dims().clone();
    let mut all_c: Vec<QobjEvo> = c_ops.to_vec();
    all_c.extend(sc_ops.iter().map(QobjEvo::from));
    let l = prepare_generator(&tdep::liouvillian(Some(&h), &all_c)?);
    let mut s_super = Vec::new();
    let mut x_ops = Vec::new();
    for s in sc_ops {
        if s.dims() != &op_dims {
            return Err(Error::Dimension(format!(
                "stochastic operator dims {} do not match {op_dims}",
                s.dims()
            )));
        }
        s_super.push(spre(s)?.try_add(&spost(&s.dag())?)?.data().convert(Format::Csr));
        x_ops.push(s.try_add(&s.dag())?.data().convert(Format::Csr));
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
    let rho = if rho0.is_ket() { rho0.proj()? } else { rho0.clone() };
    if rho.dims() != &op_dims {
        return Err(Error::Dimension(format!(
            "initial state dims {} do not match {op_dims}",
            rho.dims()
        )));
    }
    let d = op_dims.rows.size();
    let prob = SmeProblem {
        l,
        s_super,
        x_ops,
        e_ops: e_data,
        d,
        store: mc.stores_states(e_ops.len()),
    };
    let mut rho_vec = rho.full().into_vec();
    prob.normalize(&mut rho_vec);
    let seed = mc.master_seed();
    let n_t = tlist.len();
    let unit = |_: &TrajRecord, _: usize| 1.0;
    let run = |i: usize| -> Result<TrajRecord> {
        let s = trajectory_seed(seed, i);
        let mut rng = trajectory_rng(s);
        let mut rec = prob.run(&rho_vec, tlist, dt, nsub, &mut rng)?;
        rec.seed = s;
        Ok(rec)
    };
    let (records, note) = map_trajectories(mc.ntraj, 0, mc, start, run, |done| {
        let w = vec![1.0; done.len()];
        let st = weighted_expect(done, &w, &unit, e_ops.len(), n_t);
        within_target(&st, done.len(), mc.target_tol.expect("checked by the map"))
    })?;
    let n = records.len();
    let weights = vec![1.0 / n as f64; n];
    let st = weighted_expect(&records, &weights, &unit, e_ops.len(), n_t);
    let states = average_states(&records, &weights, &unit, &op_dims, n_t)?;
    let n_ch = sc_ops.len();
    let n_int = n_t.saturating_sub(1);
    let mut meas = vec![vec![0.0; n_int]; n_ch];
    for r in &records {
        let m = r.measurement.as_ref().expect("recorded by every run");
        for c in 0..n_ch {
            for k in 0..n_int {
                meas[c][k] += m[c][k] / n as f64;
            }
        }
    }
    Ok(MultiTrajResult {
        times: tlist.to_vec(),
        average_expect: st.mean,
        std_expect: st.std,
        runs_expect: mc.keep_runs_results.then(|| records.iter().map(|r| r.expect.clone()).collect()),
        average_states: states,
        photocurrent: Vec::new(),
        measurement: Some(meas),
        runs_measurement: mc
            .keep_runs_results
            .then(|| records.iter().map(|r| r.measurement.clone().unwrap_or_default()).collect()),
        ntraj: n,
        seed,
        seeds: records.iter().map(|r| r.seed).collect(),
        weights,
        trace: None,
        no_jump_norm: None,
        runtime: start.elapsed(),
        notes: note.into_iter().collect(),
    })
}
