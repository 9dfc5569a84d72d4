//! Superoperators under the column-stacking convention
//! `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.
//!
//! This is the component-level form. Written on basis kets the same map reads
//! `B† ⊗ A` with a conjugated bra index; the matrices agree, only the bookkeeping
//! differs.

use super::{Dims, Kind, Qobj, Space};
use crate::data::{Csr, Data, Dense, Format};
use crate::error::{Error, Result};
use crate::C64;

fn square_dims(q: &Qobj, what: &str) -> Result<Dims> {
    if q.kind() != Kind::Oper || q.dims().rows != q.dims().cols {
        return Err(Error::Dimension(format!(
            "{what} needs a square operator, got a {} with dims {}",
            q.kind(),
            q.dims()
        )));
    }
    Ok(q.dims().clone())
}

/// Superoperator `ρ ↦ A ρ B`; a missing side is the identity.
pub fn super_lr(a: Option<&Qobj>, b: Option<&Qobj>) -> Result<Qobj> {
    let dims = match (a, b) {
        (Some(a), Some(b)) => {
            let (da, db) = (square_dims(a, "super_lr")?, square_dims(b, "super_lr")?);
            if da != db {
                return Err(Error::Dimension(format!(
                    "left and right operators have dims {da} and {db}"
                )));
            }
            da
        }
        (Some(a), None) => square_dims(a, "spre")?,
        (None, Some(b)) => square_dims(b, "spost")?,
        (None, None) => {
            return Err(Error::InvalidArgument("super_lr needs at least one operator".into()))
        }
    };
    let n = dims.rows.size();
    let fmt_of = |q: Option<&Qobj>| q.map_or(Format::Dia, |q| q.format());
    let id = || Data::identity(n, Format::Csr);
    let left = a.map_or_else(id, |q| q.data().clone());
    let right_t = b.map_or_else(id, |q| q.data().transpose());
    let mut data = right_t.kron(&left);
    // identities were built sparse; keep the operands' promotion
    let target = fmt_of(a).promote(fmt_of(b)).promote(Format::Csr);
    if data.format() != target {
        data = data.convert(target);
    }
    Ok(Qobj::from_parts(data, Dims::super_of(&dims)))
}

pub fn spre(a: &Qobj) -> Result<Qobj> {
    super_lr(Some(a), None)
}

pub fn spost(b: &Qobj) -> Result<Qobj> {
    super_lr(None, Some(b))
}

pub fn sprepost(a: &Qobj, b: &Qobj) -> Result<Qobj> {
    super_lr(Some(a), Some(b))
}

/// `D[a, b] ρ = a ρ b† - ½ a†b ρ - ½ ρ a†b`; `b` defaults to `a`.
pub fn lindblad_dissipator(a: &Qobj, b: Option<&Qobj>) -> Result<Qobj> {
    let b = b.unwrap_or(a);
    let adb = a.dag().matmul(b)?;
    let half = C64::new(-0.5, 0.0);
    sprepost(a, &b.dag())?
        .add_scaled(&spre(&adb)?, half)?
        .add_scaled(&spost(&adb)?, half)
}

/// `L = -i(spre(H) - spost(H)) + Σ D[c]`. A superoperator `H` is used as is, and
/// superoperator entries of `c_ops` are added without forming a dissipator.
pub fn liouvillian(h: Option<&Qobj>, c_ops: &[Qobj]) -> Result<Qobj> {
    let mut l: Option<Qobj> = match h {
        Some(h) if h.is_super() => Some(h.clone()),
        Some(h) => {
            let pre = spre(h)?;
            let post = spost(h)?;
            Some(pre.try_sub(&post)?.scale(C64::new(0.0, -1.0)))
        }
        None => None,
    };
    for c in c_ops {
        let d = if c.is_super() {
            c.clone()
        } else {
            lindblad_dissipator(c, None)?
        };
        l = Some(match l {
            None => d,
            Some(acc) => acc.try_add(&d).map_err(|_| {
                Error::Dimension(format!(
                    "collapse operator with dims {} does not match the system",
                    c.dims()
                ))
            })?,
        });
    }
    l.ok_or_else(|| {
        Error::InvalidArgument("liouvillian needs a Hamiltonian or collapse operators".into())
    })
}

/// Column-stacks an operator into an operator-ket.
pub fn operator_to_vector(q: &Qobj) -> Result<Qobj> {
    if q.kind() != Kind::Oper {
        return Err(Error::InvalidArgument(format!(
            "operator_to_vector needs an operator, got {}",
            q.kind()
        )));
    }
    let (m, n) = q.shape();
    let data = match q.data() {
        Data::Dense(d) => Data::Dense(Dense::from_col_major(m * n, 1, d.as_slice().to_vec())),
        other => {
            let trip = other.csr().iter().map(|(i, j, v)| (i + j * m, 0, v)).collect();
            Data::Csr(Csr::from_triplets(m * n, 1, trip))
        }
    };
    Ok(Qobj::from_parts(data, Dims::operator_ket_of(q.dims())))
}

/// Inverse of [`operator_to_vector`].
pub fn vector_to_operator(v: &Qobj) -> Result<Qobj> {
    let Space::Super(inner) = &v.dims().rows else {
        return Err(Error::InvalidArgument(format!(
            "vector_to_operator needs an operator-ket, got {}",
            v.kind()
        )));
    };
    if v.kind() != Kind::OperatorKet {
        return Err(Error::InvalidArgument(format!(
            "vector_to_operator needs an operator-ket, got {}",
            v.kind()
        )));
    }
    let (m, n) = inner.shape();
    let data = match v.data() {
        Data::Dense(d) => Data::Dense(Dense::from_col_major(m, n, d.as_slice().to_vec())),
        other => {
            let trip = other.csr().iter().map(|(k, _, val)| (k % m, k / m, val)).collect();
            Data::Csr(Csr::from_triplets(m, n, trip))
        }
    };
    Ok(Qobj::from_parts(data, (**inner).clone()))
}

/// Applies a superoperator to an operator.
pub fn apply_super(s: &Qobj, rho: &Qobj) -> Result<Qobj> {
    if !s.is_super() {
        return Err(Error::InvalidArgument("apply_super needs a superoperator".into()));
    }
    let v = operator_to_vector(rho)?;
    let out = s.matmul(&v)?;
    vector_to_operator(&out)
}
