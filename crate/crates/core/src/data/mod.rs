//! Matrix storage formats and format-dispatched arithmetic.
//!
//! Mixed-format binary operations return the denser operand's format
//! (Dense > CSR > Dia).

mod csr;
mod dense;
mod dia;

pub use csr::Csr;
pub use dense::Dense;
pub use dia::Dia;

use std::borrow::Cow;
use std::fmt;

use crate::error::{Error, Result};
use crate::C64;

/// Default absolute drop tolerance for [`Data::tidyup`].
pub const TIDYUP_ATOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Format {
    Dia,
    Csr,
    Dense,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Dense, Format::Csr, Format::Dia];

    /// Result format of a binary operation on these two formats.
    pub fn promote(self, other: Format) -> Format {
        self.max(other)
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Dense => "Dense",
            Format::Csr => "CSR",
            Format::Dia => "Dia",
        })
    }
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" => Ok(Format::Dense),
            "csr" => Ok(Format::Csr),
            "dia" => Ok(Format::Dia),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Adjoint,
    Transpose,
    Conjugate,
}

/// A complex matrix tagged with its storage format.
#[derive(Clone, Debug, PartialEq)]
pub enum Data {
    Dense(Dense),
    Csr(Csr),
    Dia(Dia),
}

impl From<Dense> for Data {
    fn from(d: Dense) -> Self {
        Data::Dense(d)
    }
}

impl From<Csr> for Data {
    fn from(d: Csr) -> Self {
        Data::Csr(d)
    }
}

impl From<Dia> for Data {
    fn from(d: Dia) -> Self {
        Data::Dia(d)
    }
}

fn csr_from_dia(d: &Dia) -> Csr {
    let mut trip = Vec::new();
    for &k in d.offsets() {
        let diag = d.diagonal(k).unwrap();
        let r0 = (-k).max(0) as usize;
        for (p, &v) in diag.iter().enumerate() {
            let r = r0 + p;
            let c = r as isize + k;
            if r < d.nrows() && c >= 0 && (c as usize) < d.ncols() && v != C64::new(0.0, 0.0) {
                trip.push((r, c as usize, v));
            }
        }
    }
    Csr::from_triplets(d.nrows(), d.ncols(), trip)
}

fn dia_from_csr(c: &Csr) -> Dia {
    let w = c.nrows().min(c.ncols());
    let mut acc: std::collections::BTreeMap<isize, Vec<C64>> = Default::default();
    for (r, col, v) in c.iter() {
        let k = col as isize - r as isize;
        let row = acc.entry(k).or_insert_with(|| vec![C64::new(0.0, 0.0); w]);
        row[r - (-k).max(0) as usize] = v;
    }
    Dia::from_diagonals(c.nrows(), c.ncols(), acc.into_iter().collect())
}

impl Data {
    pub fn zeros(nrows: usize, ncols: usize, format: Format) -> Data {
        match format {
            Format::Dense => Dense::zeros(nrows, ncols).into(),
            Format::Csr => Csr::zeros(nrows, ncols).into(),
            Format::Dia => Dia::zeros(nrows, ncols).into(),
        }
    }

    pub fn identity(n: usize, format: Format) -> Data {
        match format {
            Format::Dense => Dense::identity(n).into(),
            Format::Csr => Csr::identity(n).into(),
            Format::Dia => Dia::identity(n).into(),
        }
    }

    pub fn format(&self) -> Format {
        match self {
            Data::Dense(_) => Format::Dense,
            Data::Csr(_) => Format::Csr,
            Data::Dia(_) => Format::Dia,
        }
    }

    pub fn nrows(&self) -> usize {
        match self {
            Data::Dense(m) => m.nrows(),
            Data::Csr(m) => m.nrows(),
            Data::Dia(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Data::Dense(m) => m.ncols(),
            Data::Csr(m) => m.ncols(),
            Data::Dia(m) => m.ncols(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    /// Number of stored entries (all entries for Dense).
    pub fn nnz(&self) -> usize {
        match self {
            Data::Dense(m) => m.nrows() * m.ncols(),
            Data::Csr(m) => m.nnz(),
            Data::Dia(m) => m.num_diags() * m.nrows().min(m.ncols()),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match self {
            Data::Dense(m) => m.get(i, j),
            Data::Csr(m) => m.get(i, j),
            Data::Dia(m) => m.get(i, j),
        }
    }

    /// Borrowed dense view, converting only when needed.
    pub fn dense(&self) -> Cow<'_, Dense> {
        match self {
            Data::Dense(m) => Cow::Borrowed(m),
            Data::Csr(m) => Cow::Owned(m.to_dense()),
            Data::Dia(m) => Cow::Owned(m.to_dense()),
        }
    }

    pub fn to_dense(&self) -> Dense {
        self.dense().into_owned()
    }

    pub fn csr(&self) -> Cow<'_, Csr> {
        match self {
            Data::Csr(m) => Cow::Borrowed(m),
            Data::Dense(m) => Cow::Owned(Csr::from_dense(m)),
            Data::Dia(m) => Cow::Owned(csr_from_dia(m)),
        }
    }

    pub fn to_csr(&self) -> Csr {
        self.csr().into_owned()
    }

    pub fn to_dia(&self) -> Dia {
        match self {
            Data::Dia(m) => m.clone(),
            Data::Dense(m) => Dia::from_dense(m),
            Data::Csr(m) => dia_from_csr(m),
        }
    }

    pub fn convert(&self, target: Format) -> Data {
        match target {
            Format::Dense => Data::Dense(self.to_dense()),
            Format::Csr => Data::Csr(self.to_csr()),
            Format::Dia => Data::Dia(self.to_dia()),
        }
    }

    pub fn into_format(self, target: Format) -> Data {
        if self.format() == target {
            self
        } else {
            self.convert(target)
        }
    }

    /// `self + scale * other`
    pub fn add(&self, other: &Data, scale: C64) -> Result<Data> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "cannot add {:?} and {:?} matrices",
                self.shape(),
                other.shape()
            )));
        }
        Ok(match self.format().promote(other.format()) {
            Format::Dense => Data::Dense(self.dense().add_scaled(&other.dense(), scale)),
            Format::Csr => Data::Csr(self.csr().add_scaled(&other.csr(), scale)),
            Format::Dia => match (self, other) {
                (Data::Dia(a), Data::Dia(b)) => Data::Dia(a.add_scaled(b, scale)),
                _ => unreachable!(),
            },
        })
    }

    pub fn sub(&self, other: &Data) -> Result<Data> {
        self.add(other, C64::new(-1.0, 0.0))
    }

    pub fn matmul(&self, other: &Data) -> Result<Data> {
        if self.ncols() != other.nrows() {
            return Err(Error::Dimension(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(match (self, other) {
            (Data::Dense(a), Data::Dense(b)) => Data::Dense(a.matmul(b)),
            (Data::Csr(a), Data::Dense(b)) => Data::Dense(a.matmul_dense(b)),
            (Data::Dense(a), Data::Csr(b)) => Data::Dense(Csr::dense_matmul(a, b)),
            (Data::Dia(a), Data::Dense(b)) => {
                let mut out = Dense::zeros(a.nrows(), b.ncols());
                for j in 0..b.ncols() {
                    a.gemv_add(C64::new(1.0, 0.0), b.column(j), out.column_mut(j));
                }
                Data::Dense(out)
            }
            (Data::Dense(a), Data::Dia(b)) => Data::Dense(Csr::dense_matmul(a, &csr_from_dia(b))),
            (Data::Dia(a), Data::Dia(b)) => Data::Dia(a.matmul(b)),
            _ => Data::Csr(self.csr().matmul(&other.csr())),
        })
    }

    pub fn kron(&self, other: &Data) -> Data {
        match self.format().promote(other.format()) {
            Format::Dense => Data::Dense(self.dense().kron(&other.dense())),
            Format::Csr => Data::Csr(self.csr().kron(&other.csr())),
            Format::Dia => match (self, other) {
                (Data::Dia(a), Data::Dia(b)) => Data::Dia(a.kron(b)),
                _ => unreachable!(),
            },
        }
    }

    pub fn unary(&self, kind: Unary) -> Data {
        match kind {
            Unary::Adjoint => self.adjoint(),
            Unary::Transpose => self.transpose(),
            Unary::Conjugate => self.conjugate(),
        }
    }

    pub fn adjoint(&self) -> Data {
        match self {
            Data::Dense(m) => m.adjoint().into(),
            Data::Csr(m) => m.adjoint().into(),
            Data::Dia(m) => m.adjoint().into(),
        }
    }

    pub fn transpose(&self) -> Data {
        match self {
            Data::Dense(m) => m.transpose().into(),
            Data::Csr(m) => m.transpose().into(),
            Data::Dia(m) => m.transpose().into(),
        }
    }

    pub fn conjugate(&self) -> Data {
        match self {
            Data::Dense(m) => m.conjugate().into(),
            Data::Csr(m) => m.conjugate().into(),
            Data::Dia(m) => m.conjugate().into(),
        }
    }

    pub fn scale(&self, s: C64) -> Data {
        match self {
            Data::Dense(m) => m.scale(s).into(),
            Data::Csr(m) => m.scale(s).into(),
            Data::Dia(m) => m.scale(s).into(),
        }
    }

    pub fn trace(&self) -> Result<C64> {
        if self.nrows() != self.ncols() {
            return Err(Error::Dimension(format!(
                "trace of non-square {:?} matrix",
                self.shape()
            )));
        }
        Ok(match self {
            Data::Dense(m) => m.trace(),
            Data::Csr(m) => m.trace(),
            Data::Dia(m) => m.trace(),
        })
    }

    /// `y += alpha * A x` with `x`, `y` plain slices.
    #[inline]
    pub fn gemv_add(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols());
        debug_assert_eq!(y.len(), self.nrows());
        match self {
            Data::Dense(m) => m.gemv_add(alpha, x, y),
            Data::Csr(m) => m.gemv_add(alpha, x, y),
            Data::Dia(m) => m.gemv_add(alpha, x, y),
        }
    }

    pub fn tidyup(&self, atol: f64) -> Data {
        match self {
            Data::Dense(m) => {
                let mut out = m.clone();
                for z in out.as_mut_slice() {
                    if z.re.abs() <= atol {
                        z.re = 0.0;
                    }
                    if z.im.abs() <= atol {
                        z.im = 0.0;
                    }
                }
                out.into()
            }
            Data::Csr(m) => m.tidyup(atol).into(),
            Data::Dia(m) => m.tidyup(atol).into(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Data::Dense(m) => m.max_abs(),
            Data::Csr(m) => m.max_abs(),
            Data::Dia(m) => m.max_abs(),
        }
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Data) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// Induced 1-norm (maximum column sum).
    pub fn norm1(&self) -> f64 {
        match self {
            Data::Dense(m) => m.norm1(),
            _ => {
                let mut sums = vec![0.0; self.ncols()];
                for (_, c, v) in self.csr().iter() {
                    sums[c] += v.norm();
                }
                sums.into_iter().fold(0.0, f64::max)
            }
        }
    }

    pub fn frobenius(&self) -> f64 {
        match self {
            Data::Dense(m) => m.frobenius(),
            _ => self
                .csr()
                .values()
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Largest modulus of `A - A†`; infinite for non-square input.
    pub fn hermitian_defect(&self) -> f64 {
        if self.nrows() != self.ncols() {
            return f64::INFINITY;
        }
        match self {
            Data::Dense(m) => {
                let n = m.nrows();
                let mut worst: f64 = 0.0;
                for j in 0..n {
                    for i in 0..=j {
                        worst = worst.max((m.get(i, j) - m.get(j, i).conj()).norm());
                    }
                }
                worst
            }
            _ => {
                let c = self.csr();
                c.add_scaled(&c.adjoint(), C64::new(-1.0, 0.0)).max_abs()
            }
        }
    }
}

/// Free-function forms of the core operations.
pub fn convert(m: &Data, target: Format) -> Data {
    m.convert(target)
}

pub fn add(a: &Data, b: &Data, scale: C64) -> Result<Data> {
    a.add(b, scale)
}

pub fn matmul(a: &Data, b: &Data) -> Result<Data> {
    a.matmul(b)
}

pub fn kron(a: &Data, b: &Data) -> Data {
    a.kron(b)
}

pub fn unary(m: &Data, kind: Unary) -> Data {
    m.unary(kind)
}

pub fn trace(m: &Data) -> Result<C64> {
    m.trace()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sz() -> Dense {
        Dense::from_rows(&[vec![c(1., 0.), c(0., 0.)], vec![c(0., 0.), c(-1., 0.)]])
    }

    fn sx() -> Dense {
        Dense::from_rows(&[vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]])
    }

    fn sy() -> Dense {
        Dense::from_rows(&[vec![c(0., 0.), c(0., -1.)], vec![c(0., 1.), c(0., 0.)]])
    }

    #[test]
    fn sigmaz_to_csr_has_two_entries() {
        let m = Data::from(sz()).convert(Format::Csr);
        let Data::Csr(csr) = &m else { panic!() };
        assert_eq!(csr.nnz(), 2);
        assert_eq!(csr.get(0, 0), c(1., 0.));
        assert_eq!(csr.get(1, 1), c(-1., 0.));
    }

    #[test]
    fn tridiagonal_to_dia_offsets() {
        let t = Dense::from_fn(4, 4, |i, j| {
            if i.abs_diff(j) <= 1 {
                c(1.0 + i as f64, j as f64)
            } else {
                c(0., 0.)
            }
        });
        let d = Data::from(t.clone()).to_dia();
        assert_eq!(d.offsets(), &[-1, 0, 1]);
        assert_eq!(d.to_dense(), t);
    }

    #[test]
    fn mixed_add_matches_dense() {
        let a = Data::from(sz()).convert(Format::Csr);
        let b = Data::from(sz());
        let s = a.add(&b, c(1., 0.)).unwrap();
        assert_eq!(s.format(), Format::Dense);
        assert_eq!(s.to_dense(), sz().scale(c(2., 0.)));

        let x = Data::from(sx()).convert(Format::Dia);
        let y = Data::from(sy()).convert(Format::Csr);
        let s = x.add(&y, c(1., 0.)).unwrap();
        assert_eq!(s.format(), Format::Csr);
        assert_eq!(s.to_dense(), sx().add_scaled(&sy(), c(1., 0.)));
    }

    #[test]
    fn add_shape_mismatch() {
        let a = Data::identity(2, Format::Csr);
        let b = Data::identity(3, Format::Csr);
        assert!(matches!(a.add(&b, c(1., 0.)), Err(Error::Dimension(_))));
    }

    #[test]
    fn pauli_products() {
        for f in Format::ALL {
            let x = Data::from(sx()).convert(f);
            let y = Data::from(sy()).convert(f);
            assert_eq!(x.matmul(&x).unwrap().to_dense(), Dense::identity(2));
            assert_eq!(
                x.matmul(&y).unwrap().to_dense(),
                sz().scale(c(0., 1.))
            );
        }
    }

    #[test]
    fn kron_sigmaz() {
        for f in Format::ALL {
            let z = Data::from(sz()).convert(f);
            let k = z.kron(&z).to_dense();
            let diag: Vec<C64> = (0..4).map(|i| k.get(i, i)).collect();
            assert_eq!(diag, vec![c(1., 0.), c(-1., 0.), c(-1., 0.), c(1., 0.)]);
            assert_eq!(k.frobenius(), 2.0);
        }
    }

    #[test]
    fn trace_non_square() {
        let m = Data::zeros(2, 3, Format::Dense);
        assert!(matches!(m.trace(), Err(Error::Dimension(_))));
        assert_eq!(Data::identity(5, Format::Dia).trace().unwrap(), c(5., 0.));
    }

    #[test]
    fn rectangular_dia_roundtrip() {
        let m = Dense::from_fn(3, 5, |i, j| c((i * 5 + j) as f64, -(j as f64)));
        let d = Dia::from_dense(&m);
        assert_eq!(d.to_dense(), m);
        assert_eq!(d.transpose().to_dense(), m.transpose());
        let m2 = m.transpose();
        assert_eq!(Dia::from_dense(&m2).to_dense(), m2);
    }
}
