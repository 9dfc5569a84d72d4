//! State metrics: fidelity, trace distance, entropies and entanglement measures.

use super::{sigmay, tensor, Dims, Kind, Qobj};
use crate::data::{Data, Dense};
use crate::error::{Error, Result};
use crate::linalg::{eig_herm_dense, spectral_apply, sqrtm_psd};
use crate::C64;

const EIG_TOL: f64 = 1e-10;

/// Promotes kets to projectors and validates a density operator.
fn density(q: &Qobj) -> Result<Qobj> {
    let rho = match q.kind() {
        Kind::Ket | Kind::Bra => {
            let k = if q.is_bra() { q.dag() } else { q.clone() };
            k.proj()?
        }
        Kind::Oper => q.clone(),
        k => {
            return Err(Error::InvalidArgument(format!(
                "expected a state (ket or density operator), got {k}"
            )))
        }
    };
    if !rho.isherm() {
        return Err(Error::Precondition("density operator is not Hermitian".into()));
    }
    Ok(rho)
}

fn checked_spectrum(rho: &Dense) -> Result<(Vec<f64>, Dense)> {
    let (vals, vecs) = eig_herm_dense(rho)?;
    if let Some(&lo) = vals.first() {
        if lo < -EIG_TOL {
            return Err(Error::Precondition(format!(
                "density operator has negative eigenvalue {lo:.3e}"
            )));
        }
    }
    Ok((vals, vecs))
}

fn same_dims(a: &Qobj, b: &Qobj) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Dimension(format!(
            "states have dims {} and {}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Root fidelity `tr √(√ρ σ √ρ)`, with small negative eigenvalues clipped at zero.
pub fn fidelity(a: &Qobj, b: &Qobj) -> Result<f64> {
    let (rho, sigma) = (density(a)?, density(b)?);
    same_dims(&rho, &sigma)?;
    let (vals, vecs) = checked_spectrum(&rho.full())?;
    let sq: Vec<C64> = vals.iter().map(|&l| C64::new(l.max(0.0).sqrt(), 0.0)).collect();
    let sqrt_rho = spectral_apply(&vecs, &sq);
    let inner = sqrt_rho.matmul(&sigma.full()).matmul(&sqrt_rho);
    let herm = Dense::from_fn(inner.nrows(), inner.ncols(), |i, j| {
        0.5 * (inner.get(i, j) + inner.get(j, i).conj())
    });
    let (ev, _) = eig_herm_dense(&herm)?;
    Ok(ev.iter().map(|&l| l.max(0.0).sqrt()).sum::<f64>().min(1.0))
}

/// `½ tr|ρ - σ|`
pub fn tracedist(a: &Qobj, b: &Qobj) -> Result<f64> {
    let (rho, sigma) = (density(a)?, density(b)?);
    same_dims(&rho, &sigma)?;
    checked_spectrum(&rho.full())?;
    checked_spectrum(&sigma.full())?;
    let diff = rho.try_sub(&sigma)?;
    let (ev, _) = eig_herm_dense(&diff.full())?;
    Ok((0.5 * ev.iter().map(|l| l.abs()).sum::<f64>()).min(1.0))
}

/// Von Neumann entropy in the given logarithm base (`std::f64::consts::E` for nats).
pub fn entropy_vn(q: &Qobj, base: f64) -> Result<f64> {
    let rho = density(q)?;
    let (vals, _) = checked_spectrum(&rho.full())?;
    let s: f64 = vals
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.ln())
        .sum();
    Ok((s / base.ln()).max(0.0))
}

/// `1 - tr ρ²`
pub fn entropy_linear(q: &Qobj) -> Result<f64> {
    let rho = density(q)?;
    let d = rho.full();
    let purity: f64 = d.as_slice().iter().map(|z| z.norm_sqr()).sum();
    Ok(1.0 - purity)
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(q: &Qobj) -> Result<f64> {
    let rho = density(q)?;
    if rho.dims() != &Dims::oper(&[2, 2]) {
        return Err(Error::Dimension(format!(
            "concurrence needs a two-qubit state, got dims {}",
            rho.dims()
        )));
    }
    let yy = tensor(&[sigmay(), sigmay()])?;
    let flipped = yy.matmul(&rho.conj())?.matmul(&yy)?;
    // eigenvalues of ρ ρ̃ equal those of the Hermitian √ρ ρ̃ √ρ
    let sr = sqrtm_psd(&rho.full(), EIG_TOL)?;
    let m = sr.matmul(&flipped.full()).matmul(&sr);
    let herm = Dense::from_fn(4, 4, |i, j| 0.5 * (m.get(i, j) + m.get(j, i).conj()));
    let (ev, _) = eig_herm_dense(&herm)?;
    let mut l: Vec<f64> = ev.iter().map(|&x| x.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// Partial transpose over the subsystems flagged in `mask`.
pub fn partial_transpose(q: &Qobj, mask: &[bool]) -> Result<Qobj> {
    let rho = density(q)?;
    let Some(dims) = rho.dims().rows.subsystems() else {
        return Err(Error::Unsupported(
            "partial transpose on excitation-restricted spaces".into(),
        ));
    };
    if mask.len() != dims.len() {
        return Err(Error::Dimension(format!(
            "mask has {} entries for {} subsystems",
            mask.len(),
            dims.len()
        )));
    }
    let dims = dims.to_vec();
    let n: usize = dims.iter().product();
    let split = |mut idx: usize| -> Vec<usize> {
        let mut out = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            out[k] = idx % dims[k];
            idx /= dims[k];
        }
        out
    };
    let join = |parts: &[usize]| parts.iter().zip(&dims).fold(0, |acc, (&p, &d)| acc * d + p);
    let full = rho.full();
    let mut out = Dense::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (mut a, mut b) = (split(i), split(j));
            for k in 0..dims.len() {
                if mask[k] {
                    std::mem::swap(&mut a[k], &mut b[k]);
                }
            }
            out.set(join(&a), join(&b), full.get(i, j));
        }
    }
    Qobj::new(Data::Dense(out), Some(rho.dims().clone()))
}

/// Negativity `(‖ρ^{T_k}‖₁ - 1)/2` with respect to subsystem `subsys`, or its
/// logarithmic form `log₂ ‖ρ^{T_k}‖₁`.
pub fn negativity(q: &Qobj, subsys: usize, logarithmic: bool) -> Result<f64> {
    let rho = density(q)?;
    let n_sub = rho.dims().rows.subsystems().map_or(0, |d| d.len());
    if subsys >= n_sub {
        return Err(Error::Range(format!(
            "subsystem {subsys} out of range for {n_sub} subsystems"
        )));
    }
    let mask: Vec<bool> = (0..n_sub).map(|k| k == subsys).collect();
    let pt = partial_transpose(&rho, &mask)?;
    let (ev, _) = eig_herm_dense(&pt.full())?;
    let norm1: f64 = ev.iter().map(|l| l.abs()).sum();
    Ok(if logarithmic {
        norm1.log2()
    } else {
        (norm1 - 1.0) / 2.0
    })
}

/// Metric selector for [`metric`].
#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    Fidelity,
    TraceDist,
    EntropyVn { base: f64 },
    EntropyLinear,
    Concurrence,
    Negativity { subsys: usize, logarithmic: bool },
}

/// Evaluates a metric on one state (`b = None`) or a pair of states.
pub fn metric(kind: &Metric, a: &Qobj, b: Option<&Qobj>) -> Result<f64> {
    let need_b = || {
        b.ok_or_else(|| Error::InvalidArgument("this metric compares two states".into()))
    };
    match kind {
        Metric::Fidelity => fidelity(a, need_b()?),
        Metric::TraceDist => tracedist(a, need_b()?),
        Metric::EntropyVn { base } => entropy_vn(a, *base),
        Metric::EntropyLinear => entropy_linear(a),
        Metric::Concurrence => concurrence(a),
        Metric::Negativity {
            subsys,
            logarithmic,
        } => negativity(a, *subsys, *logarithmic),
    }
}
