//! Adaptive Dormand–Prince 5(4) integration of complex vectors with dense output,
//! plus an eigendecomposition propagator for constant generators.

use crate::data::Dense;
use crate::error::{Error, Result};
use crate::linalg::{eig_general, Lu};
use crate::C64;

/// Integration method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rk45,
    DiagExpm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Maximum number of accepted steps between two consecutive output times.
    pub nsteps: usize,
    pub max_step: Option<f64>,
    pub first_step: Option<f64>,
    pub method: Method,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            atol: 1e-8,
            rtol: 1e-6,
            nsteps: 2048,
            max_step: None,
            first_step: None,
            method: Method::Rk45,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0) || !(self.rtol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must be positive (atol = {}, rtol = {})",
                self.atol, self.rtol
            )));
        }
        if self.nsteps == 0 {
            return Err(Error::InvalidArgument("nsteps must be at least 1".into()));
        }
        if let Some(m) = self.max_step {
            if !(m > 0.0) {
                return Err(Error::InvalidArgument(format!("max_step must be positive, got {m}")));
            }
        }
        if let Some(h) = self.first_step {
            if !(h > 0.0) {
                return Err(Error::InvalidArgument(format!("first_step must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const BETA: f64 = 0.04;

/// Quartic interpolant over one accepted step.
#[derive(Clone, Debug)]
pub struct DenseSegment {
    t0: f64,
    t1: f64,
    r: [Vec<C64>; 5],
}

impl DenseSegment {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.t1
    }

    pub fn eval_into(&self, t: f64, out: &mut [C64]) {
        if t == self.t1 {
            for (o, (a, b)) in out.iter_mut().zip(self.r[0].iter().zip(&self.r[1])) {
                *o = a + b;
            }
            return;
        }
        let s = (t - self.t0) / (self.t1 - self.t0);
        let s1 = 1.0 - s;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i]
                + (self.r[1][i] + (self.r[2][i] + (self.r[3][i] + self.r[4][i] * s1) * s) * s1) * s;
        }
    }

    pub fn eval(&self, t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.r[0].len()];
        self.eval_into(t, &mut out);
        out
    }
}

/// Step-by-step Dormand–Prince integrator over `dy/dt = f(t, y)`.
pub struct Dopri5<F> {
    f: F,
    opts: IntegratorOptions,
    t: f64,
    y: Vec<C64>,
    k: [Vec<C64>; 7],
    ytmp: Vec<C64>,
    ynew: Vec<C64>,
    h: f64,
    err_prev: f64,
    t_bound: Option<f64>,
    segment: Option<DenseSegment>,
    nfev: usize,
    nsteps_total: usize,
}

fn scaled_max(y: &[C64], v: &[C64], atol: f64, rtol: f64) -> f64 {
    y.iter()
        .zip(v)
        .map(|(yi, vi)| vi.norm() / (atol + rtol * yi.norm()))
        .fold(0.0, f64::max)
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    pub fn new(f: F, t0: f64, y0: Vec<C64>, opts: &IntegratorOptions) -> Result<Self> {
        opts.validate()?;
        let n = y0.len();
        let zero = || vec![C64::new(0.0, 0.0); n];
        let mut s = Dopri5 {
            f,
            opts: opts.clone(),
            t: t0,
            y: y0,
            k: [zero(), zero(), zero(), zero(), zero(), zero(), zero()],
            ytmp: zero(),
            ynew: zero(),
            h: 0.0,
            err_prev: 1e-4,
            t_bound: None,
            segment: None,
            nfev: 0,
            nsteps_total: 0,
        };
        s.eval_k1()?;
        Ok(s)
    }

    fn eval_k1(&mut self) -> Result<()> {
        let mut k1 = std::mem::take(&mut self.k[0]);
        k1.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        (self.f)(self.t, &self.y, &mut k1)?;
        self.nfev += 1;
        self.k[0] = k1;
        Ok(())
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[C64] {
        &self.y
    }

    pub fn nfev(&self) -> usize {
        self.nfev
    }

    pub fn steps(&self) -> usize {
        self.nsteps_total
    }

    /// Last accepted step's interpolant.
    pub fn segment(&self) -> Option<&DenseSegment> {
        self.segment.as_ref()
    }

    /// Steps never pass `t_bound` when set.
    pub fn set_bound(&mut self, t_bound: Option<f64>) {
        self.t_bound = t_bound;
    }

    /// Restarts from a new state, e.g. after a discontinuous jump. The step size
    /// is kept as the initial guess.
    pub fn restart(&mut self, t: f64, y: Vec<C64>) -> Result<()> {
        if y.len() != self.y.len() {
            return Err(Error::Dimension(format!(
                "restart state has length {}, expected {}",
                y.len(),
                self.y.len()
            )));
        }
        self.t = t;
        self.y = y;
        self.segment = None;
        self.err_prev = 1e-4;
        self.eval_k1()
    }

    fn initial_step(&mut self) -> Result<f64> {
        if let Some(h) = self.opts.first_step {
            return Ok(h);
        }
        let (atol, rtol) = (self.opts.atol, self.opts.rtol);
        let d0 = scaled_max(&self.y, &self.y, atol, rtol);
        let d1 = scaled_max(&self.y, &self.k[0], atol, rtol);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..self.y.len() {
            self.ytmp[i] = self.y[i] + self.k[0][i] * h0;
        }
        let mut f1 = std::mem::take(&mut self.k[1]);
        f1.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        (self.f)(self.t + h0, &self.ytmp, &mut f1)?;
        self.nfev += 1;
        for i in 0..f1.len() {
            self.ynew[i] = f1[i] - self.k[0][i];
        }
        self.k[1] = f1;
        let d2 = scaled_max(&self.y, &self.ynew, atol, rtol) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1))
    }

    fn stage(&mut self, idx: usize, c: f64, h: f64, coeffs: &[(usize, f64)]) -> Result<()> {
        for i in 0..self.y.len() {
            let mut acc = self.y[i];
            for &(j, a) in coeffs {
                acc += self.k[j][i] * (a * h);
            }
            self.ytmp[i] = acc;
        }
        let mut out = std::mem::take(&mut self.k[idx]);
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let r = (self.f)(self.t + c * h, &self.ytmp, &mut out);
        self.k[idx] = out;
        self.nfev += 1;
        r
    }

    /// Takes one accepted step and returns its interpolant.
    pub fn step(&mut self) -> Result<&DenseSegment> {
        if self.h == 0.0 {
            self.h = self.initial_step()?;
        }
        if let Some(m) = self.opts.max_step {
            self.h = self.h.min(m);
        }
        let mut rejected = false;
        loop {
            let mut h = self.h;
            let mut t_new = self.t + h;
            if let Some(tb) = self.t_bound {
                if t_new >= tb {
                    h = tb - self.t;
                    t_new = tb;
                }
                if h <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "cannot step past the bound t = {tb}"
                    )));
                }
            }
            let tiny = 16.0 * f64::EPSILON * self.t.abs().max(h.abs());
            if h < tiny {
                return Err(Error::Stiffness { t: self.t, h });
            }

            self.stage(1, C2, h, &[(0, A21)])?;
            self.stage(2, C3, h, &[(0, A31), (1, A32)])?;
            self.stage(3, C4, h, &[(0, A41), (1, A42), (2, A43)])?;
            self.stage(4, C5, h, &[(0, A51), (1, A52), (2, A53), (3, A54)])?;
            self.stage(5, 1.0, h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)])?;
            self.stage(6, 1.0, h, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)])?;
            // stage 7 was evaluated at the fifth-order solution
            std::mem::swap(&mut self.ynew, &mut self.ytmp);

            let (atol, rtol) = (self.opts.atol, self.opts.rtol);
            let mut err = 0.0f64;
            for i in 0..self.y.len() {
                let e = (self.k[0][i] * E1
                    + self.k[2][i] * E3
                    + self.k[3][i] * E4
                    + self.k[4][i] * E5
                    + self.k[5][i] * E6
                    + self.k[6][i] * E7)
                    * h;
                let sc = atol + rtol * self.y[i].norm().max(self.ynew[i].norm());
                err = err.max(e.norm() / sc);
            }
            if !err.is_finite() {
                self.h = h * MIN_FACTOR;
                rejected = true;
                continue;
            }

            if err <= 1.0 {
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    SAFETY * err.powf(-0.2 + 0.75 * BETA) * self.err_prev.powf(BETA)
                };
                let mut factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
                if rejected {
                    factor = factor.min(1.0);
                }
                self.err_prev = err.max(1e-4);

                let n = self.y.len();
                let mut r = [
                    self.y.clone(),
                    vec![C64::new(0.0, 0.0); n],
                    vec![C64::new(0.0, 0.0); n],
                    vec![C64::new(0.0, 0.0); n],
                    vec![C64::new(0.0, 0.0); n],
                ];
                for i in 0..n {
                    let ydiff = self.ynew[i] - self.y[i];
                    let bspl = self.k[0][i] * h - ydiff;
                    r[1][i] = ydiff;
                    r[2][i] = bspl;
                    r[3][i] = ydiff - self.k[6][i] * h - bspl;
                    r[4][i] = (self.k[0][i] * D1
                        + self.k[2][i] * D3
                        + self.k[3][i] * D4
                        + self.k[4][i] * D5
                        + self.k[5][i] * D6
                        + self.k[6][i] * D7)
                        * h;
                }
                self.segment = Some(DenseSegment {
                    t0: self.t,
                    t1: t_new,
                    r,
                });
                std::mem::swap(&mut self.y, &mut self.ynew);
                self.k.swap(0, 6);
                self.t = t_new;
                self.h = h * factor;
                if let Some(m) = self.opts.max_step {
                    self.h = self.h.min(m);
                }
                self.nsteps_total += 1;
                return Ok(self.segment.as_ref().unwrap());
            }
            let factor = (SAFETY * err.powf(-0.2)).max(MIN_FACTOR);
            self.h = h * factor;
            rejected = true;
        }
    }

    /// Advances until `t` is covered and returns the interpolated state there.
    pub fn integrate_to(&mut self, t: f64) -> Result<Vec<C64>> {
        let mut out = vec![C64::new(0.0, 0.0); self.y.len()];
        self.integrate_to_into(t, &mut out)?;
        Ok(out)
    }

    pub fn integrate_to_into(&mut self, t: f64, out: &mut [C64]) -> Result<()> {
        if t == self.t {
            out.copy_from_slice(&self.y);
            return Ok(());
        }
        if t < self.t {
            match &self.segment {
                Some(seg) if seg.contains(t) => {
                    seg.eval_into(t, out);
                    return Ok(());
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "cannot integrate backwards from t = {} to t = {t}",
                        self.t
                    )))
                }
            }
        }
        let from = self.t;
        let mut count = 0;
        while self.t < t {
            if count >= self.opts.nsteps {
                return Err(Error::StepLimit {
                    nsteps: self.opts.nsteps,
                    from,
                    to: t,
                });
            }
            self.step()?;
            count += 1;
        }
        if t == self.t {
            out.copy_from_slice(&self.y);
        } else {
            self.segment.as_ref().expect("a step was taken").eval_into(t, out);
        }
        Ok(())
    }
}

/// Integrates `dy/dt = f(t, y)` from `t0` and returns the states at `targets`.
/// The final step ends exactly on the last target.
pub fn integrate<F>(
    f: F,
    y0: Vec<C64>,
    t0: f64,
    targets: &[f64],
    opts: &IntegratorOptions,
) -> Result<Vec<Vec<C64>>>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    check_targets(t0, targets)?;
    let mut solver = Dopri5::new(f, t0, y0, opts)?;
    solver.set_bound(targets.last().copied());
    targets.iter().map(|&t| solver.integrate_to(t)).collect()
}

pub fn check_targets(t0: f64, targets: &[f64]) -> Result<()> {
    if let Some(&first) = targets.first() {
        if first < t0 {
            return Err(Error::InvalidArgument(format!(
                "first output time {first} precedes the initial time {t0}"
            )));
        }
    }
    if targets.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidArgument("output times must be ascending".into()));
    }
    Ok(())
}

/// Propagator `y(t) = V e^{Λ(t - t0)} V⁻¹ y0` for a constant generator.
#[derive(Clone, Debug)]
pub struct DiagPropagator {
    vals: Vec<C64>,
    vecs: Dense,
    lu: Lu,
}

impl DiagPropagator {
    pub fn new(l: &Dense) -> Result<DiagPropagator> {
        let (vals, vecs) = eig_general(l)?;
        let lu = Lu::factor(&vecs).map_err(|_| {
            Error::Method("eigenvector matrix is singular; use the rk45 method instead".into())
        })?;
        Ok(DiagPropagator { vals, vecs, lu })
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.vals
    }

    /// Coordinates of `y` in the eigenbasis.
    pub fn coords(&self, y: &[C64]) -> Vec<C64> {
        let mut c = y.to_vec();
        self.lu.solve_in_place(&mut c);
        c
    }

    pub fn evolve_coords(&self, c: &[C64], dt: f64) -> Vec<C64> {
        let w: Vec<C64> = c
            .iter()
            .zip(&self.vals)
            .map(|(ci, l)| ci * (l * dt).exp())
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); w.len()];
        self.vecs.gemv_add(C64::new(1.0, 0.0), &w, &mut out);
        out
    }

    pub fn propagate(&self, y0: &[C64], dt: f64) -> Vec<C64> {
        if dt == 0.0 {
            return y0.to_vec();
        }
        self.evolve_coords(&self.coords(y0), dt)
    }
}

pub fn propagate_diag(l: &Dense, y0: &[C64], t0: f64, targets: &[f64]) -> Result<Vec<Vec<C64>>> {
    check_targets(t0, targets)?;
    if l.nrows() != l.ncols() || l.nrows() != y0.len() {
        return Err(Error::Dimension(format!(
            "generator is {}x{} but the state has length {}",
            l.nrows(),
            l.ncols(),
            y0.len()
        )));
    }
    let p = DiagPropagator::new(l)?;
    let c = p.coords(y0);
    Ok(targets
        .iter()
        .map(|&t| {
            if t == t0 {
                y0.to_vec()
            } else {
                p.evolve_coords(&c, t - t0)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn decay(_t: f64, y: &[C64], dy: &mut [C64]) -> Result<()> {
        dy[0] = -y[0];
        Ok(())
    }

    #[test]
    fn exponential_decay() {
        let out = integrate(decay, vec![c(1.0)], 0.0, &[0.0, 0.5, 1.0], &Default::default()).unwrap();
        assert_eq!(out[0][0], c(1.0));
        assert!((out[2][0].re - (-1f64).exp()).abs() < 1e-7);
        assert!((out[1][0].re - (-0.5f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn rotation_keeps_modulus() {
        let w = 2.0 * std::f64::consts::PI;
        let f = move |_t: f64, y: &[C64], dy: &mut [C64]| {
            dy[0] = C64::new(0.0, w) * y[0];
            Ok(())
        };
        let targets: Vec<f64> = (0..=100).map(|k| k as f64).collect();
        let opts = IntegratorOptions {
            atol: 1e-12,
            rtol: 1e-10,
            nsteps: 100_000,
            ..Default::default()
        };
        let out = integrate(f, vec![c(1.0)], 0.0, &targets, &opts).unwrap();
        for y in out {
            assert!((y[0].norm() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn halving_tolerances_halves_error() {
        let err = |scale: f64| {
            let opts = IntegratorOptions {
                atol: 1e-8 * scale,
                rtol: 1e-6 * scale,
                ..Default::default()
            };
            let out = integrate(decay, vec![c(1.0)], 0.0, &[5.0], &opts).unwrap();
            (out[0][0].re - (-5f64).exp()).abs()
        };
        assert!(err(1.0) >= 2.0 * err(0.5));
    }

    #[test]
    fn short_pulse_needs_max_step() {
        let pulse = |t: f64, _y: &[C64], dy: &mut [C64]| {
            let x = (t - 1.5) / 1e-3;
            dy[0] = c((-0.5 * x * x).exp() / (1e-3 * (2.0 * std::f64::consts::PI).sqrt()));
            Ok(())
        };
        let targets = [0.0, 1.0, 2.0];
        let coarse = integrate(pulse, vec![c(0.0)], 0.0, &targets, &Default::default()).unwrap();
        let opts = IntegratorOptions {
            max_step: Some(1e-4),
            nsteps: 100_000,
            ..Default::default()
        };
        let fine = integrate(pulse, vec![c(0.0)], 0.0, &targets, &opts).unwrap();
        assert!((fine[2][0].re - 1.0).abs() < 1e-6);
        assert!((fine[2][0] - coarse[2][0]).norm() > 1e-3);
    }

    #[test]
    fn deterministic() {
        let f = |t: f64, y: &[C64], dy: &mut [C64]| {
            dy[0] = C64::new(0.0, t.cos()) * y[0] - y[1] * 0.3;
            dy[1] = y[0] * 0.3;
            Ok(())
        };
        let t: Vec<f64> = (0..20).map(|k| k as f64 * 0.37).collect();
        let a = integrate(f, vec![c(1.0), c(0.0)], 0.0, &t, &Default::default()).unwrap();
        let b = integrate(f, vec![c(1.0), c(0.0)], 0.0, &t, &Default::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dense_output_hits_endpoints() {
        let mut s = Dopri5::new(decay, 0.0, vec![c(1.0)], &Default::default()).unwrap();
        let seg = s.step().unwrap().clone();
        assert_eq!(seg.eval(seg.t0())[0], c(1.0));
        let y1 = s.y()[0];
        assert!((seg.eval(seg.t1())[0] - y1).norm() <= 1e-12 * y1.norm());
    }

    #[test]
    fn step_limit_names_interval() {
        let opts = IntegratorOptions {
            nsteps: 3,
            max_step: Some(0.01),
            ..Default::default()
        };
        let err = integrate(decay, vec![c(1.0)], 0.0, &[0.0, 1.0], &opts).unwrap_err();
        assert!(matches!(err, Error::StepLimit { nsteps: 3, from, to } if from == 0.0 && to == 1.0));
    }

    #[test]
    fn bound_is_respected() {
        let mut s = Dopri5::new(decay, 0.0, vec![c(1.0)], &Default::default()).unwrap();
        s.set_bound(Some(0.3));
        while s.t() < 0.3 {
            s.step().unwrap();
        }
        assert_eq!(s.t(), 0.3);
    }

    #[test]
    fn diag_decay_rates() {
        let l = Dense::from_rows(&[vec![c(-1.0), c(0.0)], vec![c(0.0), c(-2.0)]]);
        let y0 = vec![c(1.0), c(1.0)];
        let out = propagate_diag(&l, &y0, 0.0, &[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(out[0], y0);
        for (k, t) in [(1, 1.0f64), (2, 3.0)] {
            assert!((out[k][0].re - (-t).exp()).abs() < 1e-10);
            assert!((out[k][1].re - (-2.0 * t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn defective_generator_rejected() {
        let l = Dense::from_rows(&[vec![c(0.0), c(1.0)], vec![c(0.0), c(0.0)]]);
        let e = propagate_diag(&l, &[c(1.0), c(0.0)], 0.0, &[1.0]).unwrap_err();
        assert!(matches!(e, Error::Method(_)));
    }
}
