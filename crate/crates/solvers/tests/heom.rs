use num_complex::Complex64 as C64;
use openq_core::odeint::IntegratorOptions;
use openq_core::qobj::{basis, sigmam, sigmap, sigmax, sigmaz};
use openq_core::Qobj;
use openq_solvers::heom::{matsubara_decompose, BosonicEnvironment, Exponent, ExponentSet, HeomBath};
use openq_solvers::{heomsolve, mesolve, SolverOptions};

fn tight() -> SolverOptions {
    SolverOptions::with_integrator(IntegratorOptions {
        atol: 1e-10,
        rtol: 1e-8,
        ..Default::default()
    })
}

#[test]
fn drude_lorentz_series_converges_to_quadrature() {
    let (lam, gam, temp) = (0.1, 0.5, 1.0);
    let env = BosonicEnvironment::drude_lorentz(temp, lam, gam).unwrap();
    let ts: Vec<f64> = (0..40).map(|k| (0.1 + 4.9 * k as f64 / 39.0) / gam).collect();
    let exact: Vec<C64> = ts.iter().map(|&t| env.correlation(t).unwrap()).collect();
    let mut prev = f64::INFINITY;
    for n_k in 0..=5 {
        let set = matsubara_decompose(&env, n_k).unwrap();
        let err = ts
            .iter()
            .zip(&exact)
            .map(|(&t, c)| (set.correlation(t) - c).norm())
            .fold(0.0, f64::max);
        assert!(err < prev, "N_k = {n_k}: {err} not below {prev}");
        prev = err;
    }
    // the imaginary part is exact with any number of terms
    let set = matsubara_decompose(&env, 0).unwrap();
    for (&t, c) in ts.iter().zip(&exact) {
        assert!((set.correlation(t).im - c.im).abs() < 1e-7 * lam * gam);
    }
}

#[test]
fn underdamped_series_matches_quadrature() {
    let env = BosonicEnvironment::underdamped(0.5, 0.5, 0.1, 1.5).unwrap();
    let set = matsubara_decompose(&env, 40).unwrap();
    for k in 0..25 {
        let t = 0.05 + 0.8 * k as f64;
        let c = env.correlation(t).unwrap();
        let scale = env.correlation(0.0).unwrap().norm();
        assert!((set.correlation(t) - c).norm() < 1e-5 * scale, "t = {t}");
    }
}

/// Coherence of `(ω0/2)σz` with `Q = σz`: `ρ01(t) = ρ01(0) e^{−iω0 t} e^{−4 Re Φ(t)}`
/// with `Φ(t) = ∫∫ C`, evaluated in closed form for each exponent.
fn dephasing_oracle(set: &ExponentSet, w0: f64, t: f64) -> C64 {
    let mut phi = 0.0;
    for (e, unit) in set.real.iter().map(|e| (e, C64::new(1.0, 0.0))).chain(set.imag.iter().map(|e| (e, C64::new(0.0, 1.0)))) {
        let g = e.rate;
        let integral = e.coeff * unit * (C64::new(t, 0.0) / g + ((-g * t).exp() - 1.0) / (g * g));
        phi += integral.re;
    }
    C64::from_polar(0.5, -w0 * t) * (-4.0 * phi).exp()
}

#[test]
fn pure_dephasing_matches_analytic_coherence() {
    let env = BosonicEnvironment::drude_lorentz(1.0, 0.05, 0.5).unwrap();
    let set = matsubara_decompose(&env, 0).unwrap();
    assert_eq!(set.len(), 2);
    let w0 = 1.0;
    let h = sigmaz().scale_real(w0 / 2.0);
    let plus = basis(2, 0).unwrap().try_add(&basis(2, 1).unwrap()).unwrap().unit().unwrap();
    let t: Vec<f64> = (0..41).map(|k| k as f64 * 0.25).collect();
    // ρ01 = ⟨0|ρ|1⟩ = tr(ρ |1⟩⟨0|) = ⟨σ−⟩ with σ− = |1⟩⟨0|
    let r = heomsolve(&h, &[(set.clone().into(), sigmaz())], &plus, &t, 8, &[sigmam()], &tight()).unwrap();
    for (k, &tk) in t.iter().enumerate() {
        let want = dephasing_oracle(&set, w0, tk);
        let got = r.result.expect[0][k];
        assert!((got - want).norm() < 1e-4, "t = {tk}: {got} vs {want}");
    }
}

#[test]
fn weak_coupling_matches_lindblad_rates() {
    let delta = 1.0;
    let temp = 10.0 * delta;
    // a fast bath (γ = 5Δ) keeps the memory time well below the relaxation time
    let env = BosonicEnvironment::drude_lorentz(temp, 0.005 * delta, 5.0 * delta).unwrap();
    let h = sigmaz().scale_real(delta / 2.0);
    let t: Vec<f64> = (0..61).map(|k| k as f64).collect();
    let psi0 = basis(2, 0).unwrap();
    let heom = heomsolve(
        &h,
        &[(HeomBath::Matsubara { env: env.clone(), n_k: 3 }, sigmax())],
        &psi0,
        &t,
        4,
        &[sigmaz()],
        &tight(),
    )
    .unwrap();
    let down = env.power_spectrum(delta);
    let up = env.power_spectrum(-delta);
    let c_ops = [sigmam().scale_real(down.sqrt()).into(), sigmap().scale_real(up.sqrt()).into()];
    let me = mesolve(&h, &psi0, &t, &c_ops, &[sigmaz()], tight()).unwrap();
    let worst = (0..t.len())
        .map(|k| (heom.result.expect[0][k].re - me.expect[0][k].re).abs())
        .fold(0.0, f64::max);
    println!("max |Δ⟨σz⟩| = {worst:.3e}");
    assert!(worst < 0.02, "{worst}");
    // relaxation has happened, so the comparison covers the thermal tail
    assert!(me.expect[0].last().unwrap().re < 0.0);
}

#[test]
fn level_zero_is_hermitian_with_unit_trace() {
    let env = BosonicEnvironment::underdamped(0.5, 0.5, 0.1, 1.5).unwrap();
    let h = sigmax().scale_real(0.5);
    let t: Vec<f64> = (0..21).map(|k| k as f64).collect();
    let r = heomsolve(
        &h,
        &[(HeomBath::Matsubara { env, n_k: 2 }, sigmaz())],
        &basis(2, 0).unwrap(),
        &t,
        3,
        &[],
        &SolverOptions::default(),
    )
    .unwrap();
    for s in r.result.states.unwrap() {
        assert!(s.data().hermitian_defect() < 1e-8);
        assert!((s.tr().re - 1.0).abs() < 1e-6);
    }
}

#[test]
fn deeper_hierarchies_converge() {
    let env = BosonicEnvironment::underdamped(0.5, 0.5, 0.1, 1.5).unwrap();
    let h = sigmax().scale_real(0.5);
    let t: Vec<f64> = (0..31).map(|k| k as f64 * 0.5).collect();
    let run = |n_c| {
        heomsolve(
            &h,
            &[(HeomBath::Matsubara { env: env.clone(), n_k: 2 }, sigmaz())],
            &basis(2, 0).unwrap(),
            &t,
            n_c,
            &[sigmaz()],
            &tight(),
        )
        .unwrap()
        .result
        .expect_re(0)
    };
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let (r2, r4, r8) = (run(2), run(4), run(8));
    assert!(diff(&r4, &r8) < diff(&r2, &r4));
}

#[test]
fn custom_exponents_are_validated() {
    let bad = ExponentSet { real: vec![Exponent::real(1.0, -1.0)], imag: vec![] };
    let q: Qobj = sigmaz();
    let r = heomsolve(&sigmax(), &[(bad.into(), q)], &basis(2, 0).unwrap(), &[0.0, 1.0], 1, &[], &SolverOptions::default());
    assert!(r.is_err());
}
