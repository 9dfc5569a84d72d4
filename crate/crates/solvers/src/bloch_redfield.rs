//! Bloch-Redfield tensor and master equation for time-independent Hamiltonians.

use std::fmt;
use std::sync::Arc;

use openq_core::data::{Csr, Data, Dense, Format};
use openq_core::linalg::eig_herm;
use openq_core::tdep::QobjEvo;
use openq_core::{Dims, Error, Qobj, Result, C64};

use crate::evolution::Solver;
use crate::result::{SolveResult, SolverOptions};

const HERM_TOL: f64 = 1e-12;

pub type Spectrum = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A Hermitian system operator coupled to a bath with power spectrum `S(ω)`.
/// Positive frequencies correspond to emission into the bath.
#[derive(Clone)]
pub struct BrCoupling {
    pub a: Qobj,
    pub spectrum: Spectrum,
}

impl fmt::Debug for BrCoupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BrCoupling").field("a", &self.a).finish_non_exhaustive()
    }
}

fn check_herm(q: &Qobj, what: &str) -> Result<()> {
    let defect = q.data().hermitian_defect();
    if !q.is_oper() || defect > HERM_TOL {
        return Err(Error::Precondition(format!(
            "{what} must be a Hermitian operator (max |A - A^dag| = {defect:.3e})"
        )));
    }
    Ok(())
}

impl BrCoupling {
    pub fn new(a: Qobj, spectrum: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<BrCoupling> {
        check_herm(&a, "coupling operator")?;
        Ok(BrCoupling {
            a,
            spectrum: Arc::new(spectrum),
        })
    }

    /// `S(ω) = γ θ(ω)` with `θ(0) = 1/2`: a zero-temperature bath with a flat
    /// emission spectrum.
    pub fn flat(a: Qobj, gamma: f64) -> Result<BrCoupling> {
        BrCoupling::new(a, move |w| gamma * step(w))
    }
}

pub(crate) fn step(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w == 0.0 {
        0.5
    } else {
        0.0
    }
}

/// The tensor in the eigenbasis of `H` together with that basis.
#[derive(Clone, Debug)]
pub struct BrTensor {
    /// Superoperator acting on column-stacked density matrices expressed in the eigenbasis.
    pub r: Qobj,
    pub energies: Vec<f64>,
    /// Columns are the eigenvectors.
    pub basis: Dense,
    /// Set when two eigenvalues coincide within `1e-10` (relative); the basis
    /// inside a degenerate block is whatever the eigensolver returned.
    pub degenerate: bool,
    op_dims: Dims,
}

impl BrTensor {
    pub fn ekets(&self) -> Vec<Qobj> {
        let n = self.basis.nrows();
        let dims = Dims::ket_of(&self.op_dims.rows);
        (0..n)
            .map(|j| {
                Qobj::new(
                    Data::Dense(Dense::column_vector(self.basis.column(j))),
                    Some(dims.clone()),
                )
                .expect("eigenvector matches the Hamiltonian dims")
            })
            .collect()
    }

    /// `V† X V`
    pub fn to_eigbasis(&self, x: &Dense) -> Dense {
        self.basis.adjoint().matmul(x).matmul(&self.basis)
    }

    /// `V X V†`
    pub fn from_eigbasis(&self, x: &Dense) -> Dense {
        self.basis.matmul(x).matmul(&self.basis.adjoint())
    }
}

/// Builds `R` so that `dρ_ab/dt = -iω_ab ρ_ab + Σ_cd R_abcd ρ_cd` in the eigenbasis.
/// Terms with `|ω_ab - ω_cd| > sec_cutoff` are dropped; a negative cutoff keeps all.
pub fn br_tensor(h: &Qobj, couplings: &[BrCoupling], sec_cutoff: f64) -> Result<BrTensor> {
    check_herm(h, "Hamiltonian")?;
    for c in couplings {
        check_herm(&c.a, "coupling operator")?;
        if c.a.dims() != h.dims() {
            return Err(Error::Dimension(format!(
                "coupling operator dims {} do not match the Hamiltonian dims {}",
                c.a.dims(),
                h.dims()
            )));
        }
    }
    let (energies, vecs) = eig_herm(h.data())?;
    let basis = vecs.to_dense();
    let n = energies.len();
    let scale = energies.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let degenerate = energies.windows(2).any(|w| (w[1] - w[0]).abs() <= 1e-10 * scale);
    let w = |a: usize, b: usize| energies[a] - energies[b];
    let keep = |a: usize, b: usize, c: usize, d: usize| {
        sec_cutoff < 0.0 || (w(a, b) - w(c, d)).abs() <= sec_cutoff
    };
    let idx = |a: usize, b: usize| a + b * n;

    let mut r = Dense::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            r.set(idx(a, b), idx(a, b), C64::new(0.0, -w(a, b)));
        }
    }
    for c in couplings {
        let am = basis.adjoint().matmul(&c.a.full()).matmul(&basis);
        let s = &c.spectrum;
        let spec: Vec<f64> = (0..n * n).map(|k| s(w(k % n, k / n))).collect();
        let sp = |a: usize, b: usize| spec[idx(a, b)];
        // x[a, c] = Σ_n A_an A_nc S(ω_cn)
        let x = Dense::from_fn(n, n, |a, c| {
            (0..n).map(|m| am.get(a, m) * am.get(m, c) * sp(c, m)).sum()
        });
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    for d in 0..n {
                        if !keep(a, b, cc, d) {
                            continue;
                        }
                        let mut v = am.get(a, cc) * am.get(d, b) * (sp(cc, a) + sp(d, b));
                        if b == d {
                            v -= x.get(a, cc);
                        }
                        if a == cc {
                            // Σ_n A_dn A_nb S(ω_dn) = conj(x[b, d]) for Hermitian A
                            v -= x.get(b, d).conj();
                        }
                        if v != C64::new(0.0, 0.0) {
                            *r.get_mut(idx(a, b), idx(cc, d)) += 0.5 * v;
                        }
                    }
                }
            }
        }
    }
    let r = Qobj::new(
        Data::Csr(Csr::from_dense(&r)),
        Some(Dims::super_of(h.dims())),
    )?;
    Ok(BrTensor {
        r,
        energies,
        basis,
        degenerate,
        op_dims: h.dims().clone(),
    })
}

/// Evolves `rho0` under the Bloch-Redfield tensor; states and expectations are
/// reported in the original basis.
pub fn brmesolve(
    h: impl Into<QobjEvo>,
    couplings: &[BrCoupling],
    rho0: &Qobj,
    tlist: &[f64],
    e_ops: &[Qobj],
    sec_cutoff: f64,
    opts: SolverOptions,
) -> Result<SolveResult> {
    let h = h.into();
    let Some(h) = h.constant_part().filter(|_| h.is_constant()) else {
        return Err(Error::Unsupported(
            "Bloch-Redfield evolution needs a time-independent Hamiltonian".into(),
        ));
    };
    let br = br_tensor(h, couplings, sec_cutoff)?;
    let op_dims = h.dims().clone();
    let rho = if rho0.is_ket() { rho0.proj()? } else { rho0.clone() };
    if rho.dims() != &op_dims {
        return Err(Error::Dimension(format!(
            "initial state dims {} do not match the Hamiltonian dims {}",
            rho.dims(),
            op_dims
        )));
    }
    let in_eig = |q: &Qobj| -> Result<Qobj> {
        if q.dims() != &op_dims {
            return Err(Error::Dimension(format!(
                "expectation operator dims {} do not match the Hamiltonian dims {}",
                q.dims(),
                op_dims
            )));
        }
        Qobj::new(Data::Dense(br.to_eigbasis(&q.full())), Some(op_dims.clone()))
    };
    let rho_eig = in_eig(&rho)?;
    let e_eig = e_ops.iter().map(in_eig).collect::<Result<Vec<_>>>()?;
    let solver = Solver::from_liouvillian(QobjEvo::constant(br.r.clone()), opts)?;
    let mut res = solver.run(&rho_eig, tlist, &e_eig)?;
    let back = |q: &Qobj| {
        Qobj::new(Data::Dense(br.from_eigbasis(&q.full())), Some(op_dims.clone()))
            .map(|q| q.to(Format::Dense))
    };
    if let Some(states) = res.states.as_mut() {
        for s in states.iter_mut() {
            *s = back(s)?;
        }
    }
    if let Some(f) = res.final_state.as_mut() {
        *f = back(f)?;
    }
    if br.degenerate {
        res.stats.notes.push("degenerate Hamiltonian spectrum".into());
    }
    Ok(res)
}
