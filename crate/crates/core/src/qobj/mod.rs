//! Quantum objects: data plus subsystem dimensions.

mod metrics;
mod operators;
mod states;
mod superop;

pub use metrics::{
    concurrence, entropy_linear, entropy_vn, fidelity, metric, negativity, partial_transpose,
    tracedist, Metric,
};
pub use operators::*;
pub use states::*;
pub use superop::*;

use std::fmt;
use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::{Arc, OnceLock};

use crate::data::{Data, Dense, Format, Unary};
use crate::enr::EnrSpace;
use crate::error::{Error, Result};
use crate::linalg::{self, HERM_TOL};
use crate::C64;

// ---------------------------------------------------------------------------
// Global default format

static DEFAULT_FORMAT: AtomicU8 = AtomicU8::new(0);

/// Overrides the format used by every factory function; `None` restores the
/// defaults (CSR for operators, Dense for states).
pub fn set_default_format(format: Option<Format>) {
    let code = match format {
        None => 0,
        Some(Format::Dense) => 1,
        Some(Format::Csr) => 2,
        Some(Format::Dia) => 3,
    };
    DEFAULT_FORMAT.store(code, Ordering::Relaxed);
}

fn format_override() -> Option<Format> {
    match DEFAULT_FORMAT.load(Ordering::Relaxed) {
        1 => Some(Format::Dense),
        2 => Some(Format::Csr),
        3 => Some(Format::Dia),
        _ => None,
    }
}

pub fn default_operator_format() -> Format {
    format_override().unwrap_or(Format::Csr)
}

pub fn default_state_format() -> Format {
    format_override().unwrap_or(Format::Dense)
}

// ---------------------------------------------------------------------------
// Dimensions

/// One side (rows or columns) of a quantum object's dimensions.
#[derive(Clone, Debug, PartialEq)]
pub enum Space {
    /// Tensor product of plain subsystems.
    Hilbert(Vec<usize>),
    /// Excitation-number-restricted composite space.
    Enr(Arc<EnrSpace>),
    /// Vectorized operators with the given operator dimensions.
    Super(Box<Dims>),
}

impl Space {
    pub fn scalar() -> Space {
        Space::Hilbert(vec![1])
    }

    pub fn size(&self) -> usize {
        match self {
            Space::Hilbert(d) => d.iter().product(),
            Space::Enr(s) => s.size(),
            Space::Super(d) => d.rows.size() * d.cols.size(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Space::Hilbert(d) if d.iter().all(|&x| x == 1))
    }

    pub fn is_super(&self) -> bool {
        matches!(self, Space::Super(_))
    }

    /// Plain subsystem dimensions, if this is an ordinary tensor-product space.
    pub fn subsystems(&self) -> Option<&[usize]> {
        match self {
            Space::Hilbert(d) => Some(d),
            _ => None,
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Space::Hilbert(d) => write!(f, "{d:?}"),
            Space::Enr(s) => write!(f, "Enr({:?}, n_exc={})", s.dims(), s.n_exc()),
            Space::Super(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dims {
    pub rows: Space,
    pub cols: Space,
}

impl Dims {
    pub fn new(rows: Space, cols: Space) -> Dims {
        Dims { rows, cols }
    }

    pub fn oper(dims: &[usize]) -> Dims {
        Dims::new(Space::Hilbert(dims.to_vec()), Space::Hilbert(dims.to_vec()))
    }

    pub fn ket(dims: &[usize]) -> Dims {
        Dims::new(Space::Hilbert(dims.to_vec()), Space::Hilbert(vec![1; dims.len()]))
    }

    pub fn bra(dims: &[usize]) -> Dims {
        Dims::new(Space::Hilbert(vec![1; dims.len()]), Space::Hilbert(dims.to_vec()))
    }

    /// Superoperator dims acting on operators with dims `op`.
    pub fn super_of(op: &Dims) -> Dims {
        let s = Space::Super(Box::new(op.clone()));
        Dims::new(s.clone(), s)
    }

    /// Ket dims living on `space`.
    pub fn ket_of(space: &Space) -> Dims {
        let cols = match space {
            Space::Hilbert(d) => Space::Hilbert(vec![1; d.len()]),
            _ => Space::scalar(),
        };
        Dims::new(space.clone(), cols)
    }

    pub fn operator_ket_of(op: &Dims) -> Dims {
        Dims::new(Space::Super(Box::new(op.clone())), Space::scalar())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.size(), self.cols.size())
    }

    /// Operator dims on the ket side's space (`|ψ⟩⟨ψ|`).
    pub fn ket_to_oper(&self) -> Dims {
        Dims::new(self.rows.clone(), self.rows.clone())
    }

    pub fn transposed(&self) -> Dims {
        Dims::new(self.cols.clone(), self.rows.clone())
    }

    pub fn is_enr(&self) -> bool {
        matches!(self.rows, Space::Enr(_)) || matches!(self.cols, Space::Enr(_))
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.rows, self.cols)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Ket,
    Bra,
    Oper,
    Super,
    OperatorKet,
    OperatorBra,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Ket => "ket",
            Kind::Bra => "bra",
            Kind::Oper => "oper",
            Kind::Super => "super",
            Kind::OperatorKet => "operator-ket",
            Kind::OperatorBra => "operator-bra",
        })
    }
}

fn infer_kind(dims: &Dims) -> Kind {
    match (dims.rows.is_super(), dims.cols.is_super()) {
        (true, true) => Kind::Super,
        (true, false) => Kind::OperatorKet,
        (false, true) => Kind::OperatorBra,
        (false, false) => {
            if dims.cols.is_scalar() && dims.cols.size() == 1 {
                Kind::Ket
            } else if dims.rows.is_scalar() && dims.rows.size() == 1 {
                Kind::Bra
            } else {
                Kind::Oper
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Qobj

/// A quantum object: ket, bra, operator or superoperator.
#[derive(Clone, Debug)]
pub struct Qobj {
    data: Data,
    dims: Dims,
    kind: Kind,
    herm: OnceLock<bool>,
}

impl PartialEq for Qobj {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.data.shape() == other.data.shape()
            && self.data.max_abs_diff(&other.data).is_ok_and(|d| d == 0.0)
    }
}

impl Qobj {
    /// Wraps `data`; without `dims` the object is a single subsystem of the full shape.
    pub fn new(data: Data, dims: Option<Dims>) -> Result<Qobj> {
        let dims = match dims {
            Some(d) => {
                if d.shape() != data.shape() {
                    return Err(Error::Dimension(format!(
                        "dims {d} describe a {:?} object but the data is {:?}",
                        d.shape(),
                        data.shape()
                    )));
                }
                d
            }
            None => Dims::new(
                Space::Hilbert(vec![data.nrows()]),
                Space::Hilbert(vec![data.ncols()]),
            ),
        };
        Ok(Qobj::from_parts(data, dims))
    }

    /// Internal constructor for callers that already guarantee consistency.
    pub(crate) fn from_parts(data: Data, dims: Dims) -> Qobj {
        debug_assert_eq!(dims.shape(), data.shape());
        let kind = infer_kind(&dims);
        Qobj {
            data,
            dims,
            kind,
            herm: OnceLock::new(),
        }
    }

    pub fn from_dense(m: Dense) -> Qobj {
        let dims = Dims::new(
            Space::Hilbert(vec![m.nrows()]),
            Space::Hilbert(vec![m.ncols()]),
        );
        Qobj::from_parts(Data::Dense(m), dims)
    }

    /// Builds an operator from row literals.
    pub fn from_rows(rows: &[Vec<C64>]) -> Qobj {
        Qobj::from_dense(Dense::from_rows(rows))
    }

    /// Builds a ket from its amplitudes.
    pub fn ket(amplitudes: &[C64]) -> Qobj {
        Qobj::from_dense(Dense::column_vector(amplitudes))
    }

    /// Builds a ket with explicit subsystem dims from a flat amplitude vector.
    pub fn ket_with_dims(amplitudes: Vec<C64>, dims: &Dims) -> Result<Qobj> {
        let n = amplitudes.len();
        Qobj::new(Data::Dense(Dense::from_col_major(n, 1, amplitudes)), Some(dims.clone()))
    }

    pub fn data(&self) -> &Data {
        &self.data
    }

    pub fn into_data(self) -> Data {
        self.data
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn format(&self) -> Format {
        self.data.format()
    }

    pub fn is_ket(&self) -> bool {
        self.kind == Kind::Ket
    }

    pub fn is_bra(&self) -> bool {
        self.kind == Kind::Bra
    }

    pub fn is_oper(&self) -> bool {
        self.kind == Kind::Oper
    }

    pub fn is_super(&self) -> bool {
        self.kind == Kind::Super
    }

    pub fn is_operator_ket(&self) -> bool {
        self.kind == Kind::OperatorKet
    }

    pub fn is_square(&self) -> bool {
        self.data.nrows() == self.data.ncols()
    }

    /// Hermiticity within `1e-12`, computed once and cached.
    pub fn isherm(&self) -> bool {
        *self.herm.get_or_init(|| {
            matches!(self.kind, Kind::Oper | Kind::Super)
                && self.data.hermitian_defect() <= HERM_TOL
        })
    }

    /// Dense copy of the matrix.
    pub fn full(&self) -> Dense {
        self.data.to_dense()
    }

    pub fn to(&self, format: Format) -> Qobj {
        Qobj::from_parts(self.data.convert(format), self.dims.clone())
    }

    pub fn tidyup(&self, atol: f64) -> Qobj {
        Qobj::from_parts(self.data.tidyup(atol), self.dims.clone())
    }

    fn with_data(&self, data: Data) -> Qobj {
        Qobj::from_parts(data, self.dims.clone())
    }

    pub fn dag(&self) -> Qobj {
        let q = Qobj::from_parts(self.data.unary(Unary::Adjoint), self.dims.transposed());
        if let Some(&h) = self.herm.get() {
            let _ = q.herm.set(h);
        }
        q
    }

    pub fn trans(&self) -> Qobj {
        Qobj::from_parts(self.data.unary(Unary::Transpose), self.dims.transposed())
    }

    pub fn conj(&self) -> Qobj {
        self.with_data(self.data.unary(Unary::Conjugate))
    }

    /// Trace (sum of the leading diagonal).
    pub fn tr(&self) -> C64 {
        let n = self.data.nrows().min(self.data.ncols());
        match &self.data {
            Data::Dense(m) => (0..n).map(|i| m.get(i, i)).sum(),
            d => (0..n).map(|i| d.get(i, i)).sum(),
        }
    }

    pub fn scale(&self, s: C64) -> Qobj {
        self.with_data(self.data.scale(s))
    }

    pub fn scale_real(&self, s: f64) -> Qobj {
        self.scale(C64::new(s, 0.0))
    }

    fn check_same_dims(&self, other: &Qobj, what: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Dimension(format!(
                "cannot {what} objects with dims {} and {}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &Qobj, s: C64) -> Result<Qobj> {
        self.check_same_dims(other, "add")?;
        Ok(self.with_data(self.data.add(&other.data, s)?))
    }

    pub fn try_add(&self, other: &Qobj) -> Result<Qobj> {
        self.add_scaled(other, C64::new(1.0, 0.0))
    }

    pub fn try_sub(&self, other: &Qobj) -> Result<Qobj> {
        self.add_scaled(other, C64::new(-1.0, 0.0))
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Qobj) -> Result<Qobj> {
        if self.dims.cols != other.dims.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply objects with dims {} and {}",
                self.dims, other.dims
            )));
        }
        let data = self.data.matmul(&other.data)?;
        Ok(Qobj::from_parts(
            data,
            Dims::new(self.dims.rows.clone(), other.dims.cols.clone()),
        ))
    }

    /// 2-norm for kets and bras, trace norm for operators, Frobenius norm otherwise.
    pub fn norm(&self) -> f64 {
        match self.kind {
            Kind::Ket | Kind::Bra | Kind::OperatorKet | Kind::OperatorBra => self.data.frobenius(),
            Kind::Oper => {
                if self.isherm() {
                    match linalg::eig_herm_dense(&self.full()) {
                        Ok((vals, _)) => vals.iter().map(|v| v.abs()).sum(),
                        Err(_) => f64::NAN,
                    }
                } else {
                    match linalg::svd_right(&self.full()) {
                        Ok((s, _)) => s.iter().sum(),
                        Err(_) => f64::NAN,
                    }
                }
            }
            Kind::Super => self.data.frobenius(),
        }
    }

    /// Normalized copy (see [`Qobj::norm`]).
    pub fn unit(&self) -> Result<Qobj> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Numerical(format!("cannot normalize object with norm {n}")));
        }
        Ok(self.scale_real(1.0 / n))
    }

    /// `|ψ⟩⟨ψ|` for a ket, `|ψ⟩⟨ψ|` for the ket of a bra.
    pub fn proj(&self) -> Result<Qobj> {
        match self.kind {
            Kind::Ket => self.matmul(&self.dag()),
            Kind::Bra => self.dag().matmul(self),
            k => Err(Error::InvalidArgument(format!("proj needs a ket or bra, got {k}"))),
        }
    }

    /// Promotes kets to density operators; operators are returned unchanged.
    pub fn to_dm(&self) -> Result<Qobj> {
        match self.kind {
            Kind::Ket => self.proj(),
            Kind::Oper => Ok(self.clone()),
            k => Err(Error::InvalidArgument(format!(
                "expected a ket or density operator, got {k}"
            ))),
        }
    }

    /// `⟨self|other⟩` for kets (or bras).
    pub fn overlap(&self, other: &Qobj) -> Result<C64> {
        let a = if self.is_bra() { self.dag() } else { self.clone() };
        let b = if other.is_bra() { other.dag() } else { other.clone() };
        if !a.is_ket() || !b.is_ket() || a.dims != b.dims {
            return Err(Error::Dimension("overlap needs two states with equal dims".into()));
        }
        let (x, y) = (a.full(), b.full());
        Ok(x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| p.conj() * q).sum())
    }

    /// `⟨bra|self|ket⟩`
    pub fn matrix_element(&self, bra: &Qobj, ket: &Qobj) -> Result<C64> {
        let k = self.matmul(ket)?;
        bra.overlap(&k)
    }

    pub fn expm(&self) -> Result<Qobj> {
        if !self.is_square() {
            return Err(Error::Dimension("expm needs a square object".into()));
        }
        Ok(self.with_data(linalg::expm(&self.data)?))
    }

    /// Square root of a positive semidefinite Hermitian operator.
    pub fn sqrtm(&self) -> Result<Qobj> {
        if !self.isherm() {
            return Err(Error::Precondition("sqrtm needs a Hermitian operator".into()));
        }
        Ok(self.with_data(Data::Dense(linalg::sqrtm_psd(&self.full(), 1e-10)?)))
    }

    /// Ascending eigenvalues of a Hermitian operator.
    pub fn eigenenergies(&self) -> Result<Vec<f64>> {
        Ok(linalg::eig_herm(&self.data)?.0)
    }

    /// Ascending eigenvalues and normalized eigenkets of a Hermitian operator.
    pub fn eigenstates(&self) -> Result<(Vec<f64>, Vec<Qobj>)> {
        let (vals, vecs) = linalg::eig_herm(&self.data)?;
        let v = vecs.to_dense();
        let kdims = Dims::ket_of(&self.dims.rows);
        let kets = (0..v.ncols())
            .map(|j| {
                Qobj::from_parts(Data::Dense(Dense::column_vector(v.column(j))), kdims.clone())
            })
            .collect();
        Ok((vals, kets))
    }

    /// `⟨ψ|op|ψ⟩` or `tr(op ρ)`; see [`expect`].
    pub fn expect(&self, state: &Qobj) -> Result<C64> {
        expect(self, state)
    }

    /// Partial trace keeping the listed subsystems (in ascending order).
    pub fn ptrace(&self, keep: &[usize]) -> Result<Qobj> {
        ptrace(self, keep)
    }
}

impl fmt::Display for Qobj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "Quantum object: dims={}, shape={:?}, type={}, format={}",
            self.dims,
            self.shape(),
            self.kind,
            self.format()
        )?;
        let d = self.full();
        if d.nrows() * d.ncols() <= 256 {
            for i in 0..d.nrows() {
                let row: Vec<String> = (0..d.ncols())
                    .map(|j| {
                        let z = d.get(i, j);
                        format!("{:+.4}{:+.4}i", z.re, z.im)
                    })
                    .collect();
                writeln!(f, "[{}]", row.join(", "))?;
            }
        }
        Ok(())
    }
}

// Operator sugar. These panic on dimension mismatch; use the `try_*` methods to
// get an error value instead.

impl std::ops::Add for &Qobj {
    type Output = Qobj;
    fn add(self, rhs: &Qobj) -> Qobj {
        self.try_add(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl std::ops::Sub for &Qobj {
    type Output = Qobj;
    fn sub(self, rhs: &Qobj) -> Qobj {
        self.try_sub(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl std::ops::Mul for &Qobj {
    type Output = Qobj;
    fn mul(self, rhs: &Qobj) -> Qobj {
        self.matmul(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl std::ops::Mul<C64> for &Qobj {
    type Output = Qobj;
    fn mul(self, rhs: C64) -> Qobj {
        self.scale(rhs)
    }
}

impl std::ops::Mul<f64> for &Qobj {
    type Output = Qobj;
    fn mul(self, rhs: f64) -> Qobj {
        self.scale_real(rhs)
    }
}

impl std::ops::Mul<&Qobj> for f64 {
    type Output = Qobj;
    fn mul(self, rhs: &Qobj) -> Qobj {
        rhs.scale_real(self)
    }
}

impl std::ops::Mul<&Qobj> for C64 {
    type Output = Qobj;
    fn mul(self, rhs: &Qobj) -> Qobj {
        rhs.scale(self)
    }
}

impl std::ops::Neg for &Qobj {
    type Output = Qobj;
    fn neg(self) -> Qobj {
        self.scale_real(-1.0)
    }
}

// ---------------------------------------------------------------------------
// Free functions

/// Tensor product of kets, bras or operators.
pub fn tensor(objs: &[Qobj]) -> Result<Qobj> {
    let first = objs
        .first()
        .ok_or_else(|| Error::InvalidArgument("tensor of an empty list".into()))?;
    let kind = first.kind();
    if !matches!(kind, Kind::Ket | Kind::Bra | Kind::Oper) {
        return Err(Error::InvalidArgument(format!("cannot tensor objects of kind {kind}")));
    }
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut data: Option<Data> = None;
    for q in objs {
        if q.kind() != kind {
            return Err(Error::InvalidArgument(format!(
                "cannot tensor a {} with a {}",
                kind,
                q.kind()
            )));
        }
        let (Some(r), Some(c)) = (q.dims.rows.subsystems(), q.dims.cols.subsystems()) else {
            return Err(Error::Unsupported(
                "tensor products of excitation-restricted objects".into(),
            ));
        };
        rows.extend_from_slice(r);
        cols.extend_from_slice(c);
        data = Some(match data {
            None => q.data.clone(),
            Some(d) => d.kron(&q.data),
        });
    }
    Ok(Qobj::from_parts(
        data.unwrap(),
        Dims::new(Space::Hilbert(rows), Space::Hilbert(cols)),
    ))
}

fn expect_ket_data(op: &Data, psi: &[C64]) -> C64 {
    let mut tmp = vec![C64::new(0.0, 0.0); psi.len()];
    op.gemv_add(C64::new(1.0, 0.0), psi, &mut tmp);
    psi.iter().zip(&tmp).map(|(a, b)| a.conj() * b).sum()
}

/// `tr(op ρ)` with `ρ` given as its column-stacked vector.
pub fn expect_vec_dm(op: &Data, rho_vec: &[C64]) -> C64 {
    let d = op.nrows();
    let mut acc = C64::new(0.0, 0.0);
    match op {
        Data::Dense(m) => {
            for j in 0..d {
                let col = m.column(j);
                for i in 0..d {
                    // op_ij * rho_ji, rho_ji sits at j + i*d
                    acc += col[i] * rho_vec[j + i * d];
                }
            }
        }
        _ => {
            for (i, j, v) in op.csr().iter() {
                acc += v * rho_vec[j + i * d];
            }
        }
    }
    acc
}

/// `⟨ψ|op|ψ⟩` with `ψ` a plain amplitude vector.
pub fn expect_ket_vec(op: &Data, psi: &[C64]) -> C64 {
    expect_ket_data(op, psi)
}

/// Expectation value of `op` in `state` (ket or density operator).
pub fn expect(op: &Qobj, state: &Qobj) -> Result<C64> {
    if !op.is_oper() {
        return Err(Error::InvalidArgument(format!(
            "expectation needs an operator, got {}",
            op.kind()
        )));
    }
    match state.kind() {
        Kind::Ket => {
            if op.dims.cols != state.dims.rows {
                return Err(Error::Dimension(format!(
                    "operator dims {} do not match state dims {}",
                    op.dims, state.dims
                )));
            }
            let psi = state.full();
            Ok(expect_ket_data(&op.data, psi.as_slice()))
        }
        Kind::Oper => {
            if op.dims.cols != state.dims.rows || op.dims.rows != state.dims.cols {
                return Err(Error::Dimension(format!(
                    "operator dims {} do not match state dims {}",
                    op.dims, state.dims
                )));
            }
            let rho = state.full();
            Ok(expect_vec_dm(&op.data, rho.as_slice()))
        }
        Kind::OperatorKet => {
            let Space::Super(inner) = &state.dims.rows else {
                unreachable!()
            };
            if **inner != op.dims {
                return Err(Error::Dimension(format!(
                    "operator dims {} do not match vectorized state dims {}",
                    op.dims, inner
                )));
            }
            let v = state.full();
            Ok(expect_vec_dm(&op.data, v.as_slice()))
        }
        k => Err(Error::InvalidArgument(format!("cannot take an expectation in a {k}"))),
    }
}

/// Partial trace over every subsystem not listed in `keep`.
pub fn ptrace(q: &Qobj, keep: &[usize]) -> Result<Qobj> {
    let rho = match q.kind() {
        Kind::Ket => q.proj()?,
        Kind::Oper => q.clone(),
        k => {
            return Err(Error::InvalidArgument(format!("ptrace needs a ket or operator, got {k}")))
        }
    };
    let (Some(dims), Some(cdims)) = (rho.dims.rows.subsystems(), rho.dims.cols.subsystems()) else {
        return Err(Error::Unsupported(
            "partial trace on excitation-restricted spaces".into(),
        ));
    };
    if dims != cdims {
        return Err(Error::Dimension("ptrace needs matching row and column dims".into()));
    }
    let mut sel: Vec<usize> = keep.to_vec();
    sel.sort_unstable();
    sel.dedup();
    if let Some(&bad) = sel.iter().find(|&&i| i >= dims.len()) {
        return Err(Error::Range(format!(
            "subsystem index {bad} out of range for {} subsystems",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !sel.contains(i)).collect();
    let kdims: Vec<usize> = sel.iter().map(|&i| dims[i]).collect();
    let tdims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let nk: usize = kdims.iter().product();
    let nt: usize = tdims.iter().product();

    // strides of each subsystem in the full index (row-major over subsystems)
    let mut stride = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * dims[i + 1];
    }
    let compose = |idx: usize, which: &[usize], sizes: &[usize]| -> usize {
        let mut rem = idx;
        let mut full = 0;
        for (pos, &sub) in which.iter().enumerate().rev() {
            let d = sizes[pos];
            full += (rem % d) * stride[sub];
            rem /= d;
        }
        full
    };
    let koff: Vec<usize> = (0..nk).map(|i| compose(i, &sel, &kdims)).collect();
    let toff: Vec<usize> = (0..nt).map(|i| compose(i, &traced, &tdims)).collect();
    let full = rho.full();
    let out = Dense::from_fn(nk, nk, |i, j| {
        toff.iter().map(|&t| full.get(koff[i] + t, koff[j] + t)).sum()
    });
    let kd = if kdims.is_empty() { vec![1] } else { kdims };
    Ok(Qobj::from_parts(Data::Dense(out), Dims::oper(&kd)))
}
