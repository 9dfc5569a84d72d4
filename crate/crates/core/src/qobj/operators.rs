//! Operator factories. Operators default to CSR storage.
//!
//! Qubit convention: `basis(2, 0)` is the excited (σz = +1) state, so `sigmam`
//! maps `|0⟩` to `|1⟩`.

use super::{default_operator_format, states::spin_dim, Dims, Qobj};
use crate::data::{Csr, Data, Format};
use crate::error::{Error, Result};
use crate::C64;

fn op_from(trip: Vec<(usize, usize, C64)>, n: usize) -> Qobj {
    let data = Data::Csr(Csr::from_triplets(n, n, trip)).into_format(default_operator_format());
    Qobj::from_parts(data, Dims::oper(&[n]))
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("Hilbert space dimension must be positive".into()));
    }
    Ok(())
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Identity on a (possibly composite) space.
pub fn qeye(dims: &[usize]) -> Result<Qobj> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("invalid dimensions {dims:?}")));
    }
    let n: usize = dims.iter().product();
    let data = Data::identity(n, default_operator_format());
    Ok(Qobj::from_parts(data, Dims::oper(dims)))
}

pub fn identity(n: usize) -> Result<Qobj> {
    qeye(&[n])
}

/// Zero operator on a (possibly composite) space.
pub fn qzero(dims: &[usize]) -> Result<Qobj> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("invalid dimensions {dims:?}")));
    }
    let n: usize = dims.iter().product();
    Ok(Qobj::from_parts(Data::zeros(n, n, default_operator_format()), Dims::oper(dims)))
}

/// Annihilation operator: superdiagonal `(1, √2, …, √(n-1))`.
pub fn destroy(n: usize) -> Result<Qobj> {
    check_dim(n)?;
    Ok(op_from((1..n).map(|k| (k - 1, k, re((k as f64).sqrt()))).collect(), n))
}

pub fn create(n: usize) -> Result<Qobj> {
    check_dim(n)?;
    Ok(op_from((1..n).map(|k| (k, k - 1, re((k as f64).sqrt()))).collect(), n))
}

pub fn num(n: usize) -> Result<Qobj> {
    check_dim(n)?;
    Ok(op_from((1..n).map(|k| (k, k, re(k as f64))).collect(), n))
}

/// `x = (a + a†)/√2`
pub fn position(n: usize) -> Result<Qobj> {
    let a = destroy(n)?;
    Ok(a.try_add(&a.dag())?.scale_real(std::f64::consts::FRAC_1_SQRT_2))
}

/// `p = i(a - a†)/√2`. Note the sign: with this definition `[x, p] = -i` on the
/// untruncated space.
pub fn momentum(n: usize) -> Result<Qobj> {
    let a = destroy(n)?;
    Ok(a
        .try_sub(&a.dag())?
        .scale(C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2)))
}

/// Displacement `exp(α a† - α* a)` computed in the truncated space.
pub fn displace(n: usize, alpha: C64) -> Result<Qobj> {
    let a = destroy(n)?;
    let gen = a.dag().scale(alpha).add_scaled(&a, -alpha.conj())?;
    Ok(gen.expm()?.to(default_operator_format()))
}

/// Squeezing `exp((z* a² - z a†²)/2)`.
pub fn squeeze(n: usize, z: C64) -> Result<Qobj> {
    let a = destroy(n)?;
    let a2 = a.matmul(&a)?;
    let ad2 = a2.dag();
    let gen = a2.scale(0.5 * z.conj()).add_scaled(&ad2, -0.5 * z)?;
    Ok(gen.expm()?.to(default_operator_format()))
}

pub fn sigmax() -> Qobj {
    op_from(vec![(0, 1, re(1.0)), (1, 0, re(1.0))], 2)
}

pub fn sigmay() -> Qobj {
    op_from(vec![(0, 1, C64::new(0.0, -1.0)), (1, 0, C64::new(0.0, 1.0))], 2)
}

pub fn sigmaz() -> Qobj {
    op_from(vec![(0, 0, re(1.0)), (1, 1, re(-1.0))], 2)
}

/// `|0⟩⟨1|`, raising ground to excited.
pub fn sigmap() -> Qobj {
    op_from(vec![(0, 1, re(1.0))], 2)
}

/// `|1⟩⟨0|`, lowering excited to ground.
pub fn sigmam() -> Qobj {
    op_from(vec![(1, 0, re(1.0))], 2)
}

/// Spin-`j` angular momentum operator; `which` is one of "x", "y", "z", "+", "-".
/// Basis ordering is `m = j, j-1, …, -j`.
pub fn jmat(j: f64, which: &str) -> Result<Qobj> {
    let n = spin_dim(j)?;
    let m_of = |k: usize| j - k as f64;
    let plus = || -> Vec<(usize, usize, C64)> {
        (1..n)
            .map(|k| {
                let m = m_of(k);
                (k - 1, k, re((j * (j + 1.0) - m * (m + 1.0)).sqrt()))
            })
            .collect()
    };
    let jp = op_from(plus(), n);
    Ok(match which {
        "+" => jp,
        "-" => jp.dag(),
        "x" => jp.try_add(&jp.dag())?.scale_real(0.5),
        "y" => jp.try_sub(&jp.dag())?.scale(C64::new(0.0, -0.5)),
        "z" => op_from((0..n).map(|k| (k, k, re(m_of(k)))).collect(), n),
        other => return Err(Error::UnknownKind(format!("jmat component '{other}'"))),
    })
}

pub fn spin_jx(j: f64) -> Result<Qobj> {
    jmat(j, "x")
}

pub fn spin_jy(j: f64) -> Result<Qobj> {
    jmat(j, "y")
}

pub fn spin_jz(j: f64) -> Result<Qobj> {
    jmat(j, "z")
}

pub fn spin_jp(j: f64) -> Result<Qobj> {
    jmat(j, "+")
}

pub fn spin_jm(j: f64) -> Result<Qobj> {
    jmat(j, "-")
}

/// `[A, B]` or, with `anti`, `{A, B}`.
pub fn commutator(a: &Qobj, b: &Qobj, anti: bool) -> Result<Qobj> {
    let ab = a.matmul(b)?;
    let ba = b.matmul(a)?;
    ab.add_scaled(&ba, re(if anti { 1.0 } else { -1.0 }))
}

/// Parameters accepted by [`make_operator`].
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorParams {
    None,
    Dim(usize),
    Dims(Vec<usize>),
    DimComplex(usize, C64),
    Spin(f64),
    SpinComponent(f64, String),
}

/// String-keyed operator factory. `format` overrides the default storage.
pub fn make_operator(kind: &str, params: &OperatorParams, format: Option<Format>) -> Result<Qobj> {
    use OperatorParams as P;
    let bad = || {
        Error::InvalidArgument(format!("parameters {params:?} do not fit operator kind '{kind}'"))
    };
    let q = match (kind, params) {
        ("identity" | "qeye", P::Dim(n)) => qeye(&[*n])?,
        ("identity" | "qeye", P::Dims(d)) => qeye(d)?,
        ("qzero", P::Dim(n)) => qzero(&[*n])?,
        ("qzero", P::Dims(d)) => qzero(d)?,
        ("create", P::Dim(n)) => create(*n)?,
        ("destroy", P::Dim(n)) => destroy(*n)?,
        ("num", P::Dim(n)) => num(*n)?,
        ("position", P::Dim(n)) => position(*n)?,
        ("momentum", P::Dim(n)) => momentum(*n)?,
        ("displace", P::DimComplex(n, a)) => displace(*n, *a)?,
        ("squeeze", P::DimComplex(n, z)) => squeeze(*n, *z)?,
        ("sigmax", P::None) => sigmax(),
        ("sigmay", P::None) => sigmay(),
        ("sigmaz", P::None) => sigmaz(),
        ("sigmap", P::None) => sigmap(),
        ("sigmam", P::None) => sigmam(),
        ("jmat", P::SpinComponent(j, w)) => jmat(*j, w)?,
        ("spin_Jx", P::Spin(j)) => spin_jx(*j)?,
        ("spin_Jy", P::Spin(j)) => spin_jy(*j)?,
        ("spin_Jz", P::Spin(j)) => spin_jz(*j)?,
        ("spin_Jp", P::Spin(j)) => spin_jp(*j)?,
        ("spin_Jm", P::Spin(j)) => spin_jm(*j)?,
        (
            "identity" | "qeye" | "qzero" | "create" | "destroy" | "num" | "position"
            | "momentum" | "displace" | "squeeze" | "sigmax" | "sigmay" | "sigmaz" | "sigmap"
            | "sigmam" | "jmat" | "spin_Jx" | "spin_Jy" | "spin_Jz" | "spin_Jp" | "spin_Jm",
            _,
        ) => return Err(bad()),
        _ => return Err(Error::UnknownKind(kind.to_string())),
    };
    Ok(match format {
        Some(f) => q.to(f),
        None => q,
    })
}
