//! Trajectories for master equations with rates that may turn negative, using
//! the influence martingale.

use std::sync::Arc;

use openq_core::data::{Data, Dense};
use openq_core::linalg::{eig_herm_dense, sqrtm_psd};
use openq_core::tdep::{Args, QobjEvo, Term};
use openq_core::{Coefficient, Error, Qobj, Result, C64};

use crate::mcsolve::{finish, run_mc, InitialState, JumpProblem};
use crate::multitraj::{McOptions, MultiTrajResult, TrajRecord};

/// Jump operators padded to a completeness relation `Σ A†A = αI`, with their
/// original rates (zero for the padding operator).
#[derive(Clone, Debug)]
pub struct NmPrepared {
    pub ops: Vec<Qobj>,
    pub rates: Vec<Coefficient>,
    pub alpha: f64,
    /// Whether a padding operator was appended.
    pub padded: bool,
}

const COMPLETENESS_TOL: f64 = 1e-10;

pub fn nm_prepare(ops_and_rates: &[(Qobj, Coefficient)]) -> Result<NmPrepared> {
    let Some((first, _)) = ops_and_rates.first() else {
        return Err(Error::InvalidArgument("need at least one jump operator".into()));
    };
    let dims = first.dims().clone();
    let n = first.shape().0;
    let mut sum = Dense::zeros(n, n);
    for (a, _) in ops_and_rates {
        if !a.is_oper() || !a.is_square() || a.dims() != &dims {
            return Err(Error::Dimension(format!(
                "jump operators must be square operators with equal dims, got {}",
                a.dims()
            )));
        }
        let ad = a.full();
        sum = sum.add_scaled(&ad.adjoint().matmul(&ad), C64::new(1.0, 0.0));
    }
    let (vals, _) = eig_herm_dense(&sum)?;
    let alpha = vals.last().copied().unwrap_or(0.0);
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("jump operators are all zero".into()));
    }
    let rest = Dense::identity(n).scale(C64::new(alpha, 0.0)).add_scaled(&sum, C64::new(-1.0, 0.0));
    let mut ops: Vec<Qobj> = ops_and_rates.iter().map(|(a, _)| a.clone()).collect();
    let mut rates: Vec<Coefficient> = ops_and_rates.iter().map(|(_, g)| g.clone()).collect();
    let padded = rest.max_abs() > COMPLETENESS_TOL;
    if padded {
        let b = sqrtm_psd(&rest, 1e-10 * alpha.max(1.0)).map_err(|e| {
            Error::Numerical(format!("padding operator: {e}"))
        })?;
        ops.push(Qobj::new(Data::Dense(b), Some(dims))?);
        rates.push(Coefficient::constant(C64::new(0.0, 0.0)));
    }
    Ok(NmPrepared {
        ops,
        rates,
        alpha,
        padded,
    })
}

impl NmPrepared {
    fn rate(&self, n: usize, t: f64, args: &Args) -> Result<f64> {
        Ok(self.rates[n].eval(t, args)?.re)
    }

    /// `s(t) = 2 |min(0, γ_1(t), …)|`
    pub fn shift(&self, t: f64, args: &Args) -> Result<f64> {
        let mut m = 0.0f64;
        for k in 0..self.rates.len() {
            m = m.min(self.rate(k, t, args)?);
        }
        Ok(2.0 * m.abs())
    }

    /// `Γ_n(t) = γ_n(t) + s(t)`
    pub fn shifted_rate(&self, n: usize, t: f64, args: &Args) -> Result<f64> {
        Ok(self.rate(n, t, args)? + self.shift(t, args)?)
    }

    /// Completeness defect `max |Σ A†A - αI|`.
    pub fn completeness_defect(&self) -> f64 {
        let n = self.ops[0].shape().0;
        let mut sum = Dense::identity(n).scale(C64::new(-self.alpha, 0.0));
        for a in &self.ops {
            let ad = a.full();
            sum = sum.add_scaled(&ad.adjoint().matmul(&ad), C64::new(1.0, 0.0));
        }
        sum.max_abs()
    }
}

/// Subintervals per output interval for the integral of the shift.
const SHIFT_SUBSTEPS: usize = 2000;

/// `exp(α ∫_{t0}^{t_k} s)` at every output time, trapezoid rule.
fn continuous_factor(prep: &NmPrepared, tlist: &[f64]) -> Result<Vec<f64>> {
    let args = Args::new();
    let mut out = Vec::with_capacity(tlist.len());
    let mut integral = 0.0;
    out.push(1.0);
    for w in tlist.windows(2) {
        let h = (w[1] - w[0]) / SHIFT_SUBSTEPS as f64;
        let mut prev = prep.shift(w[0], &args)?;
        for j in 1..=SHIFT_SUBSTEPS {
            let t = if j == SHIFT_SUBSTEPS { w[1] } else { w[0] + h * j as f64 };
            let cur = prep.shift(t, &args)?;
            integral += 0.5 * h * (prev + cur);
            prev = cur;
        }
        out.push((prep.alpha * integral).exp());
    }
    Ok(out)
}

/// Non-Markovian Monte Carlo. Each `(A_n, γ_n(t))` pair contributes
/// `γ_n(t) D[A_n]` to the master equation; `γ_n` may be negative.
pub fn nm_mcsolve(
    h: impl Into<QobjEvo>,
    psi0: impl Into<InitialState>,
    tlist: &[f64],
    ops_and_rates: &[(Qobj, Coefficient)],
    e_ops: &[Qobj],
    opts: &McOptions,
) -> Result<MultiTrajResult> {
    let h = h.into();
    let prep = Arc::new(nm_prepare(ops_and_rates)?);
    if let (Some(&t0), Some(&tf)) = (tlist.first(), tlist.last()) {
        for g in &prep.rates {
            if let Some((a, b)) = g.domain() {
                if t0 < a || tf > b {
                    return Err(Error::Range(format!(
                        "rate is defined on [{a}, {b}], the output times span [{t0}, {tf}]"
                    )));
                }
            }
        }
    }
    let c_ops = (0..prep.ops.len())
        .map(|n| {
            let p = prep.clone();
            let sqrt_rate = Coefficient::function(move |t, args| {
                let g = p.shifted_rate(n, t, args).unwrap_or(f64::NAN);
                C64::new(g.max(0.0).sqrt(), 0.0)
            });
            QobjEvo::from_list([Term::Td(prep.ops[n].clone(), sqrt_rate)])
        })
        .collect::<Result<Vec<_>>>()?;
    let p = JumpProblem::new(&h, &c_ops, e_ops, opts.stores_states(e_ops.len()))?;
    let factor = continuous_factor(&prep, tlist)?;
    let times = tlist.to_vec();
    let jump_ratio = {
        let prep = prep.clone();
        move |t: f64, ch: usize| -> f64 {
            let args = Args::new();
            let big = prep.shifted_rate(ch, t, &args).unwrap_or(f64::NAN);
            if big.abs() < 1e-14 {
                return 1.0;
            }
            prep.rate(ch, t, &args).unwrap_or(f64::NAN) / big
        }
    };
    let mu = move |rec: &TrajRecord, k: usize| -> f64 {
        let tk = times[k];
        rec.jumps
            .iter()
            .take_while(|(t, _)| *t <= tk)
            .fold(factor[k], |acc, &(t, ch)| acc * jump_ratio(t, ch))
    };
    let run = run_mc(&p, &psi0.into(), tlist, opts, &mu)?;
    let wsum: f64 = run.weights.iter().sum();
    let trace = (0..tlist.len())
        .map(|k| {
            run.records
                .iter()
                .zip(&run.weights)
                .map(|(r, w)| w * mu(r, k))
                .sum::<f64>()
                / wsum
        })
        .collect();
    let mut res = finish(run, &p, tlist, opts, &mu, Some(trace))?;
    if prep.padded {
        res.notes.push("padding jump operator added for completeness".into());
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcsolve::mcsolve;
    use openq_core::qobj::{basis, sigmam, sigmax, sigmaz};

    #[test]
    fn sigma_minus_gets_ground_projector_padding() {
        let p = nm_prepare(&[(sigmam(), Coefficient::constant(C64::new(1.0, 0.0)))]).unwrap();
        assert!(p.padded);
        assert!((p.alpha - 1.0).abs() < 1e-14);
        let b = p.ops[1].full();
        let want = basis(2, 1).unwrap().proj().unwrap().full();
        assert!(b.add_scaled(&want, C64::new(-1.0, 0.0)).max_abs() < 1e-12);
        assert!(p.completeness_defect() < 1e-10);
    }

    #[test]
    fn unitary_jump_needs_no_padding() {
        let p = nm_prepare(&[(sigmax(), Coefficient::constant(C64::new(0.5, 0.0)))]).unwrap();
        assert!(!p.padded);
        assert_eq!(p.shift(0.3, &Args::new()).unwrap(), 0.0);
    }

    #[test]
    fn shift_follows_negative_rate() {
        let p = nm_prepare(&[(sigmax(), Coefficient::real_fn(f64::cos))]).unwrap();
        for k in 0..50 {
            let t = k as f64 * 0.2;
            let s = p.shift(t, &Args::new()).unwrap();
            assert!((s - 2.0 * t.cos().min(0.0).abs()).abs() < 1e-15);
            assert!(p.shifted_rate(0, t, &Args::new()).unwrap() >= 0.0);
        }
    }

    #[test]
    fn positive_rates_reproduce_mcsolve_exactly() {
        let g: f64 = 0.5;
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.5).collect();
        let opts = McOptions {
            ntraj: 60,
            seed: Some(3),
            ..Default::default()
        };
        let psi0 = basis(2, 0).unwrap();
        let h = sigmax().scale_real(0.3);
        let nm = nm_mcsolve(&h, &psi0, &t, &[(sigmam(), Coefficient::constant(C64::new(g, 0.0)))], &[sigmaz()], &opts).unwrap();
        // same seeds, and the padding channel has rate s = 0 so it never fires
        let pad = nm_prepare(&[(sigmam(), Coefficient::constant(C64::new(g, 0.0)))]).unwrap().ops[1].clone();
        let c = vec![sigmam().scale_real(g.sqrt()).into(), pad.scale_real(0.0).into()];
        let mc = mcsolve(&h, &psi0, &t, &c, &[sigmaz()], &opts).unwrap();
        for k in 0..t.len() {
            assert!((nm.average_expect[0][k] - mc.average_expect[0][k]).norm() < 1e-6);
            assert!((nm.trace.as_ref().unwrap()[k] - 1.0).abs() < 1e-12);
        }
    }
}
