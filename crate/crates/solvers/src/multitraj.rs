//! Shared machinery for trajectory solvers: options, seeding, the map layer and
//! weighted statistics.

use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use openq_core::data::{Data, Dense};
use openq_core::odeint::IntegratorOptions;
use openq_core::{Dims, Error, Qobj, Result, C64};

/// Trajectories are processed in batches of this size; early-stop checks run
/// between batches.
pub const BATCH: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MapKind {
    Serial,
    #[default]
    Parallel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetTol {
    pub atol: f64,
    pub rtol: f64,
}

#[derive(Clone, Debug)]
pub struct McOptions {
    pub ntraj: usize,
    pub improved_sampling: bool,
    /// Stop once `stderr ≤ atol + rtol·|mean|` for every e_op and time.
    pub target_tol: Option<TargetTol>,
    pub timeout: Option<Duration>,
    /// `None` draws a master seed from the OS; it is reported in the result.
    pub seed: Option<u64>,
    pub map: MapKind,
    /// Bisection cap when locating a jump time.
    pub norm_steps: usize,
    /// Relative time tolerance of the jump-time bisection.
    pub norm_t_tol: f64,
    pub keep_runs_results: bool,
    /// `None` stores averaged states only when there are no e_ops.
    pub store_states: Option<bool>,
    pub integrator: IntegratorOptions,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            ntraj: 500,
            improved_sampling: false,
            target_tol: None,
            timeout: None,
            seed: None,
            map: MapKind::Parallel,
            norm_steps: 60,
            norm_t_tol: 1e-8,
            keep_runs_results: false,
            store_states: None,
            integrator: IntegratorOptions::default(),
        }
    }
}

impl McOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.ntraj == 0 {
            return Err(Error::InvalidArgument("ntraj must be at least 1".into()));
        }
        if !(self.norm_t_tol > 0.0) || self.norm_steps == 0 {
            return Err(Error::InvalidArgument("jump-time tolerance must be positive".into()));
        }
        self.integrator.validate()
    }

    pub(crate) fn stores_states(&self, n_e_ops: usize) -> bool {
        n_e_ops == 0 || self.store_states.unwrap_or(false)
    }

    pub(crate) fn master_seed(&self) -> u64 {
        self.seed.unwrap_or_else(|| rand::rng().random())
    }
}

/// Seed of trajectory `i`: the first word of stream `i` of the master generator.
pub fn trajectory_seed(master: u64, i: usize) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(master);
    r.set_stream(i as u64);
    r.next_u64()
}

pub fn trajectory_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, Default)]
pub struct MultiTrajResult {
    pub times: Vec<f64>,
    pub average_expect: Vec<Vec<C64>>,
    /// Weighted standard deviation of the real and imaginary parts, stored as
    /// `std_re + i std_im`.
    pub std_expect: Vec<Vec<C64>>,
    /// `runs_expect[traj][op][t]`
    pub runs_expect: Option<Vec<Vec<Vec<C64>>>>,
    pub average_states: Option<Vec<Qobj>>,
    /// Per collapse channel, weighted jump counts per output interval divided
    /// by the interval length (length `times.len() - 1`).
    pub photocurrent: Vec<Vec<f64>>,
    /// Per homodyne channel, the averaged measurement record per output interval.
    pub measurement: Option<Vec<Vec<f64>>>,
    /// `runs_measurement[traj][channel][interval]`
    pub runs_measurement: Option<Vec<Vec<Vec<f64>>>>,
    pub ntraj: usize,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub weights: Vec<f64>,
    /// Martingale average `E[μ(t)]` (non-Markovian solver only).
    pub trace: Option<Vec<f64>>,
    /// Squared norm of the no-jump trajectory at every output time (improved sampling only).
    pub no_jump_norm: Option<Vec<f64>>,
    pub runtime: Duration,
    pub notes: Vec<String>,
}

impl MultiTrajResult {
    pub fn expect_re(&self, k: usize) -> Vec<f64> {
        self.average_expect[k].iter().map(|z| z.re).collect()
    }

    /// Standard error of the real part, `σ/√N`.
    pub fn stderr_re(&self, k: usize) -> Vec<f64> {
        let n = (self.ntraj as f64).sqrt();
        self.std_expect[k].iter().map(|z| z.re / n).collect()
    }
}

/// A trajectory state at one output time.
#[derive(Clone, Debug)]
pub(crate) enum TrajState {
    Ket(Vec<C64>),
    Dm(Vec<C64>),
}

/// What one trajectory hands back to the merge step.
#[derive(Clone, Debug, Default)]
pub(crate) struct TrajRecord {
    pub seed: u64,
    /// `expect[op][t]`, computed on normalized states.
    pub expect: Vec<Vec<C64>>,
    pub states: Option<Vec<TrajState>>,
    /// `(time, channel)`
    pub jumps: Vec<(f64, usize)>,
    /// `measurement[channel][interval]`
    pub measurement: Option<Vec<Vec<f64>>>,
    /// Squared norms of the unnormalized state at output times (no-jump runs only).
    pub norms: Option<Vec<f64>>,
}

/// Runs `run(i)` for `i in 0..ntraj` in index-ordered batches and stops early
/// when `done` says so, or on timeout. Returns the records and a stop note.
pub(crate) fn map_trajectories<T: Send>(
    ntraj: usize,
    first: usize,
    opts: &McOptions,
    start: Instant,
    run: impl Fn(usize) -> Result<T> + Sync,
    mut done: impl FnMut(&[T]) -> bool,
) -> Result<(Vec<T>, Option<String>)> {
    let mut out: Vec<T> = Vec::with_capacity(ntraj);
    let mut i = first;
    while i < ntraj {
        let end = (i + BATCH).min(ntraj);
        let batch: Result<Vec<T>> = match opts.map {
            MapKind::Serial => (i..end).map(&run).collect(),
            MapKind::Parallel => (i..end).into_par_iter().map(&run).collect(),
        };
        out.extend(batch?);
        i = end;
        if i >= ntraj {
            break;
        }
        if let Some(limit) = opts.timeout {
            if start.elapsed() >= limit {
                return Ok((out, Some(format!("timeout after {i} trajectories"))));
            }
        }
        if opts.target_tol.is_some() && done(&out) {
            return Ok((out, Some(format!("target tolerance reached after {i} trajectories"))));
        }
    }
    Ok((out, None))
}

/// Weighted mean and spread of `multiplier(record, t) * value(t)`.
pub(crate) struct WeightedStats {
    pub mean: Vec<Vec<C64>>,
    pub std: Vec<Vec<C64>>,
}

pub(crate) fn weighted_expect(
    records: &[TrajRecord],
    weights: &[f64],
    multiplier: &dyn Fn(&TrajRecord, usize) -> f64,
    n_ops: usize,
    n_t: usize,
) -> WeightedStats {
    let wsum: f64 = weights.iter().sum();
    let mut mean = vec![vec![C64::new(0.0, 0.0); n_t]; n_ops];
    let mut std = vec![vec![C64::new(0.0, 0.0); n_t]; n_ops];
    for op in 0..n_ops {
        for t in 0..n_t {
            let val = |i: usize| records[i].expect[op][t] * multiplier(&records[i], t);
            let m: C64 = (0..records.len()).map(|i| weights[i] * val(i)).sum::<C64>() / wsum;
            let (mut vr, mut vi) = (0.0, 0.0);
            for (i, &w) in weights.iter().enumerate() {
                let d = val(i) - m;
                vr += w * d.re * d.re;
                vi += w * d.im * d.im;
            }
            mean[op][t] = m;
            std[op][t] = C64::new((vr / wsum).max(0.0).sqrt(), (vi / wsum).max(0.0).sqrt());
        }
    }
    WeightedStats { mean, std }
}

pub(crate) fn within_target(stats: &WeightedStats, n: usize, tol: TargetTol) -> bool {
    let sq = (n as f64).sqrt();
    stats.mean.iter().zip(&stats.std).all(|(m, s)| {
        m.iter()
            .zip(s)
            .all(|(m, s)| s.norm() / sq <= tol.atol + tol.rtol * m.norm())
    })
}

pub(crate) fn average_states(
    records: &[TrajRecord],
    weights: &[f64],
    multiplier: &dyn Fn(&TrajRecord, usize) -> f64,
    op_dims: &Dims,
    n_t: usize,
) -> Result<Option<Vec<Qobj>>> {
    if records.iter().any(|r| r.states.is_none()) || records.is_empty() {
        return Ok(None);
    }
    let d = op_dims.rows.size();
    let wsum: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let mut acc = Dense::zeros(d, d);
        for (i, r) in records.iter().enumerate() {
            let w = weights[i] * multiplier(r, t) / wsum;
            if w == 0.0 {
                continue;
            }
            match &r.states.as_ref().expect("checked above")[t] {
                TrajState::Ket(psi) => {
                    for b in 0..d {
                        let cb = psi[b].conj() * w;
                        let col = acc.column_mut(b);
                        for (x, &pa) in col.iter_mut().zip(psi) {
                            *x += pa * cb;
                        }
                    }
                }
                TrajState::Dm(rho) => {
                    for (x, &v) in acc.as_mut_slice().iter_mut().zip(rho) {
                        *x += w * v;
                    }
                }
            }
        }
        out.push(Qobj::new(Data::Dense(acc), Some(op_dims.clone()))?);
    }
    Ok(Some(out))
}

/// Weighted jump counts per output interval divided by its length.
pub(crate) fn photocurrent(
    records: &[TrajRecord],
    weights: &[f64],
    times: &[f64],
    n_channels: usize,
) -> Vec<Vec<f64>> {
    let wsum: f64 = weights.iter().sum();
    let n_int = times.len().saturating_sub(1);
    let mut out = vec![vec![0.0; n_int]; n_channels];
    for (r, &w) in records.iter().zip(weights) {
        for &(t, ch) in &r.jumps {
            // interval k holds (t_k, t_{k+1}]
            let k = times.partition_point(|&x| x < t).saturating_sub(1).min(n_int.saturating_sub(1));
            if n_int > 0 && ch < n_channels {
                out[ch][k] += w / wsum;
            }
        }
    }
    for ch in out.iter_mut() {
        for (k, v) in ch.iter_mut().enumerate() {
            *v /= times[k + 1] - times[k];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_distinct() {
        let a: Vec<u64> = (0..100).map(|i| trajectory_seed(7, i)).collect();
        let b: Vec<u64> = (0..100).map(|i| trajectory_seed(7, i)).collect();
        assert_eq!(a, b);
        let mut s = a.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 100);
        assert_ne!(trajectory_seed(8, 0), a[0]);
    }

    #[test]
    fn map_order_is_schedule_independent() {
        let opts = McOptions {
            map: MapKind::Parallel,
            ..Default::default()
        };
        let run = |i: usize| -> Result<u64> { Ok(trajectory_rng(trajectory_seed(1, i)).next_u64()) };
        let (par, _) = map_trajectories(173, 0, &opts, Instant::now(), run, |_| false).unwrap();
        let serial = McOptions {
            map: MapKind::Serial,
            ..opts
        };
        let (ser, _) = map_trajectories(173, 0, &serial, Instant::now(), run, |_| false).unwrap();
        assert_eq!(par, ser);
    }

    #[test]
    fn photocurrent_bins() {
        let rec = TrajRecord {
            jumps: vec![(0.5, 0), (1.5, 0), (1.6, 1)],
            ..Default::default()
        };
        let pc = photocurrent(&[rec], &[1.0], &[0.0, 1.0, 2.0], 2);
        assert_eq!(pc, vec![vec![1.0, 1.0], vec![0.0, 1.0]]);
    }
}
