//! State factories. Kets and density operators default to Dense storage.

use std::f64::consts::FRAC_1_SQRT_2;

use super::{default_state_format, tensor, Dims, Qobj};
use crate::data::{Data, Dense, Format};
use crate::error::{Error, Result};
use crate::C64;

fn ket_from(amps: Vec<C64>, dims: &[usize]) -> Qobj {
    let n = amps.len();
    let data = Data::Dense(Dense::from_col_major(n, 1, amps)).into_format(default_state_format());
    Qobj::from_parts(data, Dims::ket(dims))
}

fn dm_from_diag(diag: &[f64]) -> Qobj {
    let n = diag.len();
    let d = Dense::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(diag[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Qobj::from_parts(Data::Dense(d).into_format(default_state_format()), Dims::oper(&[n]))
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("Hilbert space dimension must be positive".into()));
    }
    Ok(())
}

/// `|n⟩` in an `dim`-dimensional space.
pub fn basis(dim: usize, n: usize) -> Result<Qobj> {
    check_dim(dim)?;
    if n >= dim {
        return Err(Error::Range(format!("basis index {n} out of range for dimension {dim}")));
    }
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[n] = C64::new(1.0, 0.0);
    Ok(ket_from(v, &[dim]))
}

/// Product basis state `|n_1, n_2, ...⟩`.
pub fn basis_multi(dims: &[usize], ns: &[usize]) -> Result<Qobj> {
    if dims.len() != ns.len() || dims.is_empty() {
        return Err(Error::Dimension(format!(
            "{} indices given for {} subsystems",
            ns.len(),
            dims.len()
        )));
    }
    let parts = dims
        .iter()
        .zip(ns)
        .map(|(&d, &n)| basis(d, n))
        .collect::<Result<Vec<_>>>()?;
    tensor(&parts)
}

pub fn fock(dim: usize, n: usize) -> Result<Qobj> {
    basis(dim, n)
}

pub fn fock_dm(dim: usize, n: usize) -> Result<Qobj> {
    basis(dim, n)?.proj()
}

/// Coherent state `D(α)|0⟩` built with the truncated displacement operator.
pub fn coherent(dim: usize, alpha: C64) -> Result<Qobj> {
    let d = super::displace(dim, alpha)?;
    let v = d.matmul(&basis(dim, 0)?)?;
    Ok(Qobj::from_parts(
        v.into_data().into_format(default_state_format()),
        Dims::ket(&[dim]),
    ))
}

pub fn coherent_dm(dim: usize, alpha: C64) -> Result<Qobj> {
    coherent(dim, alpha)?.proj()
}

/// Truncated thermal state with mean occupation `n_mean` before truncation; the
/// geometric weights are renormalized on the `dim` retained levels.
pub fn thermal_dm(dim: usize, n_mean: f64) -> Result<Qobj> {
    check_dim(dim)?;
    if !(n_mean >= 0.0) {
        return Err(Error::InvalidArgument(format!("thermal occupation {n_mean} is negative")));
    }
    if n_mean == 0.0 {
        return fock_dm(dim, 0);
    }
    let ratio = n_mean / (1.0 + n_mean);
    let w: Vec<f64> = (0..dim).map(|k| ratio.powi(k as i32)).collect();
    let z: f64 = w.iter().sum();
    Ok(dm_from_diag(&w.iter().map(|x| x / z).collect::<Vec<_>>()))
}

pub fn maximally_mixed_dm(dim: usize) -> Result<Qobj> {
    check_dim(dim)?;
    Ok(dm_from_diag(&vec![1.0 / dim as f64; dim]))
}

/// `|n⟩⟨m|`
pub fn projection(dim: usize, n: usize, m: usize) -> Result<Qobj> {
    basis(dim, n)?.matmul(&basis(dim, m)?.dag())
}

/// Bell states labelled "00", "01", "10", "11":
/// `(|00⟩ ± |11⟩)/√2` for "00"/"01" and `(|01⟩ ± |10⟩)/√2` for "10"/"11".
pub fn bell_state(label: &str) -> Result<Qobj> {
    let s = FRAC_1_SQRT_2;
    let z = 0.0;
    let amps = match label {
        "00" => [s, z, z, s],
        "01" => [s, z, z, -s],
        "10" => [z, s, s, z],
        "11" => [z, s, -s, z],
        other => return Err(Error::UnknownKind(format!("bell state '{other}'"))),
    };
    Ok(ket_from(amps.iter().map(|&a| C64::new(a, 0.0)).collect(), &[2, 2]))
}

pub fn singlet_state() -> Qobj {
    bell_state("11").expect("static label")
}

/// The three triplet states `|11⟩`, `(|10⟩+|01⟩)/√2`, `|00⟩`.
pub fn triplet_states() -> Vec<Qobj> {
    let s = FRAC_1_SQRT_2;
    let mk = |a: [f64; 4]| ket_from(a.iter().map(|&x| C64::new(x, 0.0)).collect(), &[2, 2]);
    vec![
        mk([0.0, 0.0, 0.0, 1.0]),
        mk([0.0, s, s, 0.0]),
        mk([1.0, 0.0, 0.0, 0.0]),
    ]
}

/// `(|0…0⟩ + |1…1⟩)/√2` on `n` qubits.
pub fn ghz_state(n: usize) -> Result<Qobj> {
    if n == 0 {
        return Err(Error::InvalidArgument("GHZ state needs at least one qubit".into()));
    }
    let dim = 1usize << n;
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[0] = C64::new(FRAC_1_SQRT_2, 0.0);
    v[dim - 1] = C64::new(FRAC_1_SQRT_2, 0.0);
    Ok(ket_from(v, &vec![2; n]))
}

/// Equal superposition of the `n` single-excitation states `|10…0⟩, |01…0⟩, …`.
pub fn w_state(n: usize) -> Result<Qobj> {
    if n == 0 {
        return Err(Error::InvalidArgument("W state needs at least one qubit".into()));
    }
    let dim = 1usize << n;
    let mut v = vec![C64::new(0.0, 0.0); dim];
    let a = 1.0 / (n as f64).sqrt();
    for k in 0..n {
        v[1 << k] = C64::new(a, 0.0);
    }
    Ok(ket_from(v, &vec![2; n]))
}

pub(crate) fn spin_dim(j: f64) -> Result<usize> {
    let two_j = 2.0 * j;
    if !(j >= 0.0) || (two_j - two_j.round()).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("spin {j} is not a non-negative half-integer")));
    }
    Ok(two_j.round() as usize + 1)
}

/// `|j, m⟩` with basis ordering `m = j, j-1, …, -j`.
pub fn spin_state(j: f64, m: f64) -> Result<Qobj> {
    let dim = spin_dim(j)?;
    let idx = j - m;
    if idx < -1e-12 || idx > 2.0 * j + 1e-12 || (idx - idx.round()).abs() > 1e-12 {
        return Err(Error::Range(format!("m = {m} is not a valid projection for spin {j}")));
    }
    basis(dim, idx.round() as usize)
}

/// Spin coherent state obtained by rotating `|j, j⟩` to polar angle `theta` and azimuth `phi`.
pub fn spin_coherent(j: f64, theta: f64, phi: f64) -> Result<Qobj> {
    let jp = super::jmat(j, "+")?;
    let jm = super::jmat(j, "-")?;
    let gen = jm
        .scale(C64::from_polar(0.5 * theta, phi))
        .add_scaled(&jp, -C64::from_polar(0.5 * theta, -phi))?;
    let u = gen.expm()?;
    let v = u.matmul(&spin_state(j, j)?)?;
    Ok(Qobj::from_parts(
        v.into_data().into_format(default_state_format()),
        Dims::ket(&[spin_dim(j)?]),
    ))
}

/// Parameters accepted by [`make_state`].
#[derive(Clone, Debug, PartialEq)]
pub enum StateParams {
    None,
    Dim(usize),
    DimIndex(usize, usize),
    DimIndexPair(usize, usize, usize),
    DimAlpha(usize, C64),
    DimReal(usize, f64),
    Label(String),
    Spin(f64, f64),
    SpinAngles(f64, f64, f64),
}

/// String-keyed state factory. `format` overrides the default storage.
pub fn make_state(kind: &str, params: &StateParams, format: Option<Format>) -> Result<Qobj> {
    use StateParams as P;
    let bad = || {
        Error::InvalidArgument(format!("parameters {params:?} do not fit state kind '{kind}'"))
    };
    let q = match (kind, params) {
        ("basis", P::DimIndex(d, n)) | ("fock", P::DimIndex(d, n)) => basis(*d, *n)?,
        ("fock_dm", P::DimIndex(d, n)) => fock_dm(*d, *n)?,
        ("coherent", P::DimAlpha(d, a)) => coherent(*d, *a)?,
        ("coherent_dm", P::DimAlpha(d, a)) => coherent_dm(*d, *a)?,
        ("thermal_dm", P::DimReal(d, n)) => thermal_dm(*d, *n)?,
        ("maximally_mixed_dm", P::Dim(d)) => maximally_mixed_dm(*d)?,
        ("projection", P::DimIndexPair(d, n, m)) => projection(*d, *n, *m)?,
        ("bell_state", P::Label(l)) => bell_state(l)?,
        ("singlet_state", P::None) => singlet_state(),
        ("ghz_state", P::Dim(n)) => ghz_state(*n)?,
        ("w_state", P::Dim(n)) => w_state(*n)?,
        ("spin_state", P::Spin(j, m)) => spin_state(*j, *m)?,
        ("spin_coherent", P::SpinAngles(j, t, p)) => spin_coherent(*j, *t, *p)?,
        (
            "basis" | "fock" | "fock_dm" | "coherent" | "coherent_dm" | "thermal_dm"
            | "maximally_mixed_dm" | "projection" | "bell_state" | "singlet_state" | "ghz_state"
            | "w_state" | "spin_state" | "spin_coherent",
            _,
        ) => return Err(bad()),
        _ => return Err(Error::UnknownKind(kind.to_string())),
    };
    Ok(match format {
        Some(f) => q.to(f),
        None => q,
    })
}
