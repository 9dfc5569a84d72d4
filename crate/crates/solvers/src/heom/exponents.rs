//! Exponential decompositions of bath correlation functions.

use std::f64::consts::PI;

use openq_core::{Error, Result, C64};

use super::environment::{BosonicEnvironment, SpectralKind};

/// `c · e^{−ν t}`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent {
    pub coeff: C64,
    pub rate: C64,
}

impl Exponent {
    pub fn new(coeff: C64, rate: C64) -> Exponent {
        Exponent { coeff, rate }
    }

    pub fn real(coeff: f64, rate: f64) -> Exponent {
        Exponent::new(C64::new(coeff, 0.0), C64::new(rate, 0.0))
    }

    fn at(&self, t: f64) -> C64 {
        self.coeff * (-self.rate * t).exp()
    }
}

/// `C(t) = Σ c_k^R e^{−ν_k^R t} + i Σ c_k^I e^{−ν_k^I t}` for `t ≥ 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExponentSet {
    pub real: Vec<Exponent>,
    pub imag: Vec<Exponent>,
}

/// Which parts of the correlation function an exponent carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExponentKind {
    Real,
    Imag,
    /// Real and imaginary parts sharing one rate.
    Both,
}

/// An exponent after rate merging. `coeff_re` multiplies the commutator
/// coupling, `coeff_im` the anticommutator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergedExponent {
    pub kind: ExponentKind,
    pub coeff_re: C64,
    pub coeff_im: C64,
    pub rate: C64,
}

/// Rates closer than this (relative to `max(1, |ν|)`) are merged.
pub const MERGE_TOL: f64 = 1e-10;

fn same_rate(a: C64, b: C64) -> bool {
    (a - b).norm() <= MERGE_TOL * a.norm().max(b.norm()).max(1.0)
}

fn merge_within(list: &[Exponent]) -> Vec<Exponent> {
    let mut out: Vec<Exponent> = Vec::new();
    for e in list {
        match out.iter_mut().find(|o| same_rate(o.rate, e.rate)) {
            Some(o) => o.coeff += e.coeff,
            None => out.push(*e),
        }
    }
    out
}

impl ExponentSet {
    pub fn new(real: Vec<Exponent>, imag: Vec<Exponent>) -> Result<ExponentSet> {
        let set = ExponentSet { real, imag };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        for e in self.real.iter().chain(&self.imag) {
            if !(e.rate.re > 0.0) || !e.coeff.re.is_finite() || !e.coeff.im.is_finite() || !e.rate.im.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "exponent c = {}, ν = {} does not decay",
                    e.coeff, e.rate
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.real.len() + self.imag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn correlation(&self, t: f64) -> C64 {
        let r: C64 = self.real.iter().map(|e| e.at(t)).sum();
        let i: C64 = self.imag.iter().map(|e| e.at(t)).sum();
        r + C64::new(0.0, 1.0) * i
    }

    /// `∫_0^t dτ ∫_0^τ ds C(s)`
    pub fn double_integral(&self, t: f64) -> C64 {
        let f = |e: &Exponent| {
            let v = e.rate;
            e.coeff * (t / v - (1.0 - (-v * t).exp()) / (v * v))
        };
        let r: C64 = self.real.iter().map(f).sum();
        let i: C64 = self.imag.iter().map(f).sum();
        r + C64::new(0.0, 1.0) * i
    }

    /// Sums coefficients of equal rates within each part, then pairs real and
    /// imaginary exponents that share a rate.
    pub fn merged(&self) -> Vec<MergedExponent> {
        let real = merge_within(&self.real);
        let mut imag: Vec<Option<Exponent>> = merge_within(&self.imag).into_iter().map(Some).collect();
        let zero = C64::new(0.0, 0.0);
        let mut out = Vec::with_capacity(real.len() + imag.len());
        for r in real {
            let partner = imag.iter_mut().find(|i| i.is_some_and(|i| same_rate(i.rate, r.rate)));
            match partner.and_then(Option::take) {
                Some(i) => out.push(MergedExponent {
                    kind: ExponentKind::Both,
                    coeff_re: r.coeff,
                    coeff_im: i.coeff,
                    rate: r.rate,
                }),
                None => out.push(MergedExponent {
                    kind: ExponentKind::Real,
                    coeff_re: r.coeff,
                    coeff_im: zero,
                    rate: r.rate,
                }),
            }
        }
        out.extend(imag.into_iter().flatten().map(|i| MergedExponent {
            kind: ExponentKind::Imag,
            coeff_re: zero,
            coeff_im: i.coeff,
            rate: i.rate,
        }));
        out
    }
}

fn coth(z: C64) -> C64 {
    C64::new(1.0, 0.0) / z.tanh()
}

/// Matsubara series with `n_k` thermal exponents at `ν_k = 2πkT`.
pub fn matsubara_decompose(env: &BosonicEnvironment, n_k: usize) -> Result<ExponentSet> {
    let temp = env.temperature;
    if temp == 0.0 {
        return Err(Error::Unsupported(
            "the Matsubara series needs T > 0; supply a custom exponent set instead".into(),
        ));
    }
    let beta = 1.0 / temp;
    let nu = |k: usize| 2.0 * PI * k as f64 * temp;
    let set = match env.kind {
        SpectralKind::DrudeLorentz { lambda, gamma } => {
            let mut real = vec![Exponent::real(lambda * gamma / (beta * gamma / 2.0).tan(), gamma)];
            for k in 1..=n_k {
                let v = nu(k);
                let den = v * v - gamma * gamma;
                if den.abs() <= 1e-12 * v * v {
                    return Err(Error::Numerical(format!(
                        "γ = {gamma} coincides with Matsubara frequency {k}"
                    )));
                }
                real.push(Exponent::real(4.0 * lambda * gamma * v / (beta * den), v));
            }
            ExponentSet {
                real,
                imag: vec![Exponent::real(-lambda * gamma, gamma)],
            }
        }
        SpectralKind::Underdamped { lambda, gamma, w0 } => {
            let om = C64::new(w0 * w0 - gamma * gamma / 4.0, 0.0).sqrt();
            if om.norm() <= 1e-12 * w0 {
                return Err(Error::Numerical("critically damped oscillator has a double pole".into()));
            }
            let i = C64::new(0.0, 1.0);
            let half = C64::new(gamma / 2.0, 0.0);
            let a = lambda * lambda / (om * 4.0);
            // poles of J at ω = ±Ω − iΓ/2
            let plus = om + i * half;
            let minus = om - i * half;
            let r_plus = half - i * om;
            let r_minus = half + i * om;
            let mut real = vec![
                Exponent::new(a * coth(plus * (beta / 2.0)), r_plus),
                Exponent::new(a * coth(minus * (beta / 2.0)), r_minus),
            ];
            for k in 1..=n_k {
                let v = nu(k);
                let den = (plus * plus + v * v) * (minus * minus + v * v);
                if den.norm() <= 1e-12 * v.powi(4) {
                    return Err(Error::Numerical(format!(
                        "a pole of J coincides with Matsubara frequency {k}"
                    )));
                }
                let c = C64::new(-2.0 * lambda * lambda * gamma * v / beta, 0.0) / den;
                real.push(Exponent::new(c, C64::new(v, 0.0)));
            }
            ExponentSet {
                real,
                imag: vec![Exponent::new(i * a, r_plus), Exponent::new(-i * a, r_minus)],
            }
        }
        SpectralKind::Ohmic { .. } | SpectralKind::Custom { .. } => {
            return Err(Error::Unsupported(format!(
                "no Matsubara series for {:?}; supply a custom exponent set",
                env.kind
            )))
        }
    };
    set.validate()?;
    Ok(set)
}

/// Lower bound on the hierarchy depth, `⌈ω_S / min Re ν⌉`.
pub fn heom_cutoff_hint(exps: &ExponentSet, omega_s: f64) -> Result<usize> {
    if !(omega_s > 0.0) {
        return Err(Error::InvalidArgument(format!("ω_S must be positive, got {omega_s}")));
    }
    let slowest = exps
        .real
        .iter()
        .chain(&exps.imag)
        .map(|e| e.rate.re)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::InvalidArgument("empty exponent set".into()))?;
    Ok((omega_s / slowest).ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_decay() {
        let dl = BosonicEnvironment::drude_lorentz(1.0, 0.1, 0.5).unwrap();
        let ud = BosonicEnvironment::underdamped(0.5, 0.5, 0.1, 1.5).unwrap();
        for n_k in 0..4 {
            let s = matsubara_decompose(&dl, n_k).unwrap();
            assert_eq!((s.real.len(), s.imag.len()), (n_k + 1, 1));
            let s = matsubara_decompose(&ud, n_k).unwrap();
            assert_eq!((s.real.len(), s.imag.len()), (n_k + 2, 2));
            assert!(s.real.iter().chain(&s.imag).all(|e| e.rate.re > 0.0));
        }
    }

    #[test]
    fn zero_temperature_is_unsupported() {
        let dl = BosonicEnvironment::drude_lorentz(0.0, 0.1, 0.5).unwrap();
        assert!(matches!(matsubara_decompose(&dl, 2), Err(Error::Unsupported(_))));
    }

    #[test]
    fn merging_pairs_shared_rates() {
        let dl = BosonicEnvironment::drude_lorentz(1.0, 0.1, 0.5).unwrap();
        let m = matsubara_decompose(&dl, 2).unwrap().merged();
        assert_eq!(m.len(), 3);
        assert_eq!(m[0].kind, ExponentKind::Both);
        let dup = ExponentSet::new(vec![Exponent::real(1.0, 2.0), Exponent::real(0.5, 2.0)], vec![]).unwrap();
        let m = dup.merged();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].coeff_re, C64::new(1.5, 0.0));
    }

    #[test]
    fn cutoff_hint() {
        let one = ExponentSet::new(vec![Exponent::real(1.0, 1.0)], vec![]).unwrap();
        assert_eq!(heom_cutoff_hint(&one, 3.2).unwrap(), 4);
        let mixed = ExponentSet::new(vec![Exponent::real(1.0, 2.0)], vec![Exponent::real(1.0, 0.5)]).unwrap();
        assert_eq!(heom_cutoff_hint(&mixed, 3.2).unwrap(), 7);
        let slower = ExponentSet::new(vec![Exponent::real(1.0, 2.0)], vec![Exponent::real(1.0, 0.25)]).unwrap();
        assert!(heom_cutoff_hint(&slower, 3.2).unwrap() > 7);
        assert!(heom_cutoff_hint(&ExponentSet::default(), 1.0).is_err());
    }
}
