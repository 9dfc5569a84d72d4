use openq_core::odeint::IntegratorOptions;
use openq_core::qobj::{basis, sigmam, sigmax, sigmaz};
use openq_core::{Qobj, QobjEvo};
use openq_solvers::{mesolve, steadystate, SolverOptions, SteadyMethod, SteadyOptions};
use proptest::prelude::*;

fn driven_qubit(delta: f64, omega: f64) -> Qobj {
    sigmaz().scale_real(delta / 2.0).try_add(&sigmax().scale_real(omega / 2.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mesolve_states_stay_physical(
        delta in -1.0f64..1.0,
        omega in 0.1f64..2.0,
        gamma in 0.05f64..1.0,
    ) {
        let h = driven_qubit(delta, omega);
        let c = [QobjEvo::from(sigmam().scale_real(gamma.sqrt()))];
        let tlist: Vec<f64> = (0..11).map(|k| 0.5 * k as f64).collect();
        let opts = SolverOptions {
            store_states: Some(true),
            ..SolverOptions::with_integrator(IntegratorOptions { atol: 1e-10, rtol: 1e-8, ..Default::default() })
        };
        let res = mesolve(h, &basis(2, 0).unwrap().to_dm().unwrap(), &tlist, &c, &[], opts).unwrap();
        for rho in res.states.unwrap() {
            prop_assert!((rho.tr() - 1.0).norm() < 1e-8);
            let skew = rho.try_sub(&rho.dag()).unwrap().full();
            prop_assert!(skew.max_abs() < 1e-10);
            let herm = rho.try_add(&rho.dag()).unwrap().scale_real(0.5);
            for e in herm.eigenenergies().unwrap() {
                prop_assert!(e > -1e-8, "eigenvalue {e}");
            }
        }
    }

    #[test]
    fn driven_damped_qubit_steady_inversion(
        delta in -1.0f64..1.0,
        omega in 0.1f64..2.0,
        gamma in 0.05f64..1.0,
    ) {
        // optical Bloch equations: w = -(γ² + 4Δ²) / (γ² + 4Δ² + 2Ω²)
        let d = gamma * gamma + 4.0 * delta * delta;
        let want = -d / (d + 2.0 * omega * omega);
        let c = [sigmam().scale_real(gamma.sqrt())];
        for method in [SteadyMethod::Direct, SteadyMethod::Svd] {
            let opts = SteadyOptions { method, ..Default::default() };
            let ss = steadystate(&driven_qubit(delta, omega), &c, &opts).unwrap();
            let w = sigmaz().expect(&ss.rho).unwrap().re;
            prop_assert!((w - want).abs() < 1e-10, "{method:?}: {w} vs {want}");
        }
    }
}
