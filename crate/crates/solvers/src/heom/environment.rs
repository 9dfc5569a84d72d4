//! Bosonic environments: spectral density, power spectrum and correlation function.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use openq_core::{Error, Result, C64};

use super::quad::{integrate, wynn_epsilon};

pub type SpectralFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum SpectralKind {
    /// `J(ω) = 2λγω / (γ² + ω²)`
    DrudeLorentz { lambda: f64, gamma: f64 },
    /// `J(ω) = λ²Γω / ((ω0² − ω²)² + Γ²ω²)`
    Underdamped { lambda: f64, gamma: f64, w0: f64 },
    /// `J(ω) = α ω^s / ω_c^(s−1) · exp(−ω/ω_c)`
    Ohmic { alpha: f64, wc: f64, s: f64 },
    /// User spectral density with a characteristic frequency used to split the
    /// correlation integral.
    Custom { j: SpectralFn, scale: f64 },
}

impl fmt::Debug for SpectralKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralKind::DrudeLorentz { lambda, gamma } => write!(f, "DrudeLorentz(λ={lambda}, γ={gamma})"),
            SpectralKind::Underdamped { lambda, gamma, w0 } => {
                write!(f, "Underdamped(λ={lambda}, Γ={gamma}, ω0={w0})")
            }
            SpectralKind::Ohmic { alpha, wc, s } => write!(f, "Ohmic(α={alpha}, ω_c={wc}, s={s})"),
            SpectralKind::Custom { scale, .. } => write!(f, "Custom(scale={scale})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BosonicEnvironment {
    pub kind: SpectralKind,
    pub temperature: f64,
}

/// Relative tolerance of the correlation-function quadrature.
pub const CORRELATION_RTOL: f64 = 1e-8;

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {x}")))
    }
}

impl BosonicEnvironment {
    pub fn new(kind: SpectralKind, temperature: f64) -> Result<BosonicEnvironment> {
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be non-negative, got {temperature}"
            )));
        }
        match &kind {
            SpectralKind::DrudeLorentz { lambda, gamma } => {
                positive("λ", *lambda)?;
                positive("γ", *gamma)?;
            }
            SpectralKind::Underdamped { lambda, gamma, w0 } => {
                positive("λ", *lambda)?;
                positive("Γ", *gamma)?;
                positive("ω0", *w0)?;
            }
            SpectralKind::Ohmic { alpha, wc, s } => {
                positive("α", *alpha)?;
                positive("ω_c", *wc)?;
                positive("s", *s)?;
            }
            SpectralKind::Custom { scale, .. } => positive("scale", *scale)?,
        }
        Ok(BosonicEnvironment { kind, temperature })
    }

    pub fn drude_lorentz(temperature: f64, lambda: f64, gamma: f64) -> Result<BosonicEnvironment> {
        Self::new(SpectralKind::DrudeLorentz { lambda, gamma }, temperature)
    }

    pub fn underdamped(temperature: f64, lambda: f64, gamma: f64, w0: f64) -> Result<BosonicEnvironment> {
        Self::new(SpectralKind::Underdamped { lambda, gamma, w0 }, temperature)
    }

    pub fn ohmic(temperature: f64, alpha: f64, wc: f64, s: f64) -> Result<BosonicEnvironment> {
        Self::new(SpectralKind::Ohmic { alpha, wc, s }, temperature)
    }

    pub fn custom(
        temperature: f64,
        j: impl Fn(f64) -> f64 + Send + Sync + 'static,
        scale: f64,
    ) -> Result<BosonicEnvironment> {
        Self::new(SpectralKind::Custom { j: Arc::new(j), scale }, temperature)
    }

    /// `J(ω)` for `ω ≥ 0`; zero for negative frequencies.
    pub fn spectral_density(&self, w: f64) -> f64 {
        if w < 0.0 {
            return 0.0;
        }
        match &self.kind {
            SpectralKind::DrudeLorentz { lambda, gamma } => 2.0 * lambda * gamma * w / (gamma * gamma + w * w),
            SpectralKind::Underdamped { lambda, gamma, w0 } => {
                lambda * lambda * gamma * w / ((w0 * w0 - w * w).powi(2) + gamma * gamma * w * w)
            }
            SpectralKind::Ohmic { alpha, wc, s } => alpha * w.powf(*s) / wc.powf(s - 1.0) * (-w / wc).exp(),
            SpectralKind::Custom { j, .. } => j(w),
        }
    }

    fn scale(&self) -> f64 {
        match &self.kind {
            SpectralKind::DrudeLorentz { gamma, .. } => *gamma,
            SpectralKind::Underdamped { gamma, w0, .. } => w0 + gamma,
            SpectralKind::Ohmic { wc, s, .. } => wc * (1.0 + s),
            SpectralKind::Custom { scale, .. } => *scale,
        }
    }

    /// Bose–Einstein occupation `1/(e^{ω/T} − 1)` for `ω > 0`.
    pub fn n_th(&self, w: f64) -> f64 {
        if self.temperature == 0.0 {
            0.0
        } else {
            1.0 / (w / self.temperature).exp_m1()
        }
    }

    /// `S(ω) = 2J(ω)(n(ω)+1)` for `ω > 0`, `2J(−ω)n(−ω)` for `ω < 0`.
    /// At `ω = 0` this is `2T·lim J(ω)/ω`, or `J(0)` at zero temperature.
    pub fn power_spectrum(&self, w: f64) -> f64 {
        if w > 0.0 {
            2.0 * self.spectral_density(w) * (self.n_th(w) + 1.0)
        } else if w < 0.0 {
            2.0 * self.spectral_density(-w) * self.n_th(-w)
        } else if self.temperature == 0.0 {
            self.spectral_density(0.0)
        } else {
            let eps = 1e-8 * self.scale().min(self.temperature);
            2.0 * self.temperature * self.spectral_density(eps) / eps
        }
    }

    /// `J(ω)/π · (coth(ω/2T) cos ωt − i sin ωt)`
    fn integrand(&self, w: f64, t: f64) -> C64 {
        if w <= 0.0 {
            return C64::new(0.0, 0.0);
        }
        let j = self.spectral_density(w) / PI;
        let coth = if self.temperature == 0.0 {
            1.0
        } else {
            1.0 / (w / (2.0 * self.temperature)).tanh()
        };
        let (s, c) = (w * t).sin_cos();
        C64::new(j * coth * c, -j * s)
    }

    /// `C(t) = ∫_0^∞ dω J(ω)/π (coth(ω/2T) cos ωt − i sin ωt)` by adaptive
    /// quadrature. Beyond a multiple of the environment scale the oscillatory
    /// tail is summed in half periods and extrapolated.
    pub fn correlation(&self, t: f64) -> Result<C64> {
        if !t.is_finite() {
            return Err(Error::InvalidArgument(format!("time must be finite, got {t}")));
        }
        if t < 0.0 {
            return Ok(self.correlation(-t)?.conj());
        }
        let cut = 60.0 * self.scale().max(self.temperature);
        let head = integrate(|w| self.integrand(w, t), 0.0, cut, 1e-14, 1e-11, 4000)?;
        let epsabs = 1e-3 * CORRELATION_RTOL * head.norm().max(1e-300);
        if t == 0.0 {
            // ω = cut/u maps the tail onto (0, 1]
            let tail = integrate(
                |u| {
                    if u <= 0.0 {
                        return C64::new(0.0, 0.0);
                    }
                    self.integrand(cut / u, 0.0) * (cut / (u * u))
                },
                0.0,
                1.0,
                epsabs,
                1e-11,
                4000,
            )?;
            return Ok(head + tail);
        }
        let half = PI / t;
        let mut re = Vec::new();
        let mut im = Vec::new();
        let mut acc = head;
        let mut a = cut;
        let mut last = None::<C64>;
        for k in 0..200 {
            let b = a + half;
            acc += integrate(|w| self.integrand(w, t), a, b, epsabs, 1e-11, 400)?;
            a = b;
            re.push(acc.re);
            im.push(acc.im);
            if k >= 6 {
                let (r1, r2) = wynn_epsilon(&re);
                let (i1, i2) = wynn_epsilon(&im);
                let est = C64::new(r1, i1);
                let spread = (r1 - r2).abs() + (i1 - i2).abs();
                let tol = CORRELATION_RTOL * 1e-2 * est.norm().max(head.norm() * 1e-6);
                if let Some(prev) = last {
                    if spread <= tol && (est - prev).norm() <= tol {
                        return Ok(est);
                    }
                }
                last = Some(est);
            }
        }
        Err(Error::Convergence(format!("correlation tail at t = {t} did not converge")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn underdamped_peak_value() {
        let (l, g, w0) = (0.5, 0.1, 1.5);
        let env = BosonicEnvironment::underdamped(0.5, l, g, w0).unwrap();
        let want = l * l / (g * w0);
        assert!((env.spectral_density(w0) - want).abs() < 1e-14 * want);
    }

    #[test]
    fn flat_zero_temperature_spectrum_is_a_step() {
        let g = 0.3;
        let env = BosonicEnvironment::custom(0.0, move |_| g / 2.0, 1.0).unwrap();
        assert_eq!(env.power_spectrum(1.2), g);
        assert_eq!(env.power_spectrum(-1.2), 0.0);
    }

    #[test]
    fn kms_ratio() {
        let envs = [
            BosonicEnvironment::drude_lorentz(0.7, 0.1, 0.5).unwrap(),
            BosonicEnvironment::underdamped(0.7, 0.5, 0.1, 1.5).unwrap(),
            BosonicEnvironment::ohmic(0.7, 0.05, 3.0, 1.0).unwrap(),
        ];
        for env in &envs {
            for w in [0.05, 0.4, 1.5, 6.0] {
                let r = env.power_spectrum(w) / env.power_spectrum(-w);
                assert!((r / (w / 0.7).exp() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ohmic_zero_temperature_correlation_closed_form() {
        // s = 1, T = 0: C(t) = α ω_c² / (π (1 + i ω_c t)²)
        let (a, wc) = (0.1, 2.0);
        let env = BosonicEnvironment::ohmic(0.0, a, wc, 1.0).unwrap();
        for t in [0.0, 0.3, 1.0, 4.0] {
            let want = C64::new(a * wc * wc / PI, 0.0) / C64::new(1.0, wc * t).powi(2);
            let got = env.correlation(t).unwrap();
            assert!((got - want).norm() < 1e-8 * want.norm(), "{t}: {got} vs {want}");
        }
    }

    #[test]
    fn drude_lorentz_diverges_at_zero_time() {
        let env = BosonicEnvironment::drude_lorentz(1.0, 0.1, 0.5).unwrap();
        assert!(env.correlation(0.0).is_err());
    }

    #[test]
    fn rejects_negative_temperature() {
        assert!(BosonicEnvironment::drude_lorentz(-1.0, 0.1, 0.5).is_err());
    }
}
