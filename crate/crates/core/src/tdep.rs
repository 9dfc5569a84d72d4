//! Time-dependent operators: coefficients and `QobjEvo`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::data::{Data, Format};
use crate::error::{Error, Result};
use crate::qobj::{self, Dims, Qobj};
use crate::C64;

/// Named real parameters handed to function coefficients.
pub type Args = BTreeMap<String, f64>;

type CoeffFn = dyn Fn(f64, &Args) -> C64 + Send + Sync;

/// Natural cubic spline through complex samples.
#[derive(Clone, Debug)]
pub struct Spline {
    times: Vec<f64>,
    values: Vec<C64>,
    second: Vec<C64>,
}

impl Spline {
    pub fn new(times: &[f64], values: &[C64]) -> Result<Spline> {
        let n = times.len();
        if n < 2 || values.len() != n {
            return Err(Error::InvalidArgument(format!(
                "spline needs at least two knots and matching values (got {} times, {} values)",
                n,
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("spline knot times must be strictly increasing".into()));
        }
        // tridiagonal system for the second derivatives, natural ends
        let mut m = vec![C64::new(0.0, 0.0); n];
        if n > 2 {
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![C64::new(0.0, 0.0); k];
            for i in 1..n - 1 {
                let h0 = times[i] - times[i - 1];
                let h1 = times[i + 1] - times[i];
                diag[i - 1] = (h0 + h1) / 3.0;
                upper[i - 1] = h1 / 6.0;
                rhs[i - 1] =
                    (values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0;
            }
            // Thomas algorithm; sub-diagonal entry of row r is h_r / 6 = upper[r - 1]
            for r in 1..k {
                let w = upper[r - 1] / diag[r - 1];
                diag[r] -= w * upper[r - 1];
                let prev = rhs[r - 1];
                rhs[r] -= prev * w;
            }
            let mut sol = vec![C64::new(0.0, 0.0); k];
            sol[k - 1] = rhs[k - 1] / diag[k - 1];
            for r in (0..k - 1).rev() {
                sol[r] = (rhs[r] - sol[r + 1] * upper[r]) / diag[r];
            }
            m[1..n - 1].copy_from_slice(&sol);
        }
        Ok(Spline {
            times: times.to_vec(),
            values: values.to_vec(),
            second: m,
        })
    }

    pub fn from_real(times: &[f64], values: &[f64]) -> Result<Spline> {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Spline::new(times, &v)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    /// Second derivative at knot `i` (zero at both ends).
    pub fn second_derivative(&self, i: usize) -> C64 {
        self.second[i]
    }

    pub fn eval(&self, t: f64) -> Result<C64> {
        let (a, b) = self.domain();
        // integrators may land a rounding error outside the last knot
        let slack = 1e-12 * (b - a).abs().max(1.0);
        if t < a - slack || t > b + slack || t.is_nan() {
            return Err(Error::Range(format!(
                "t = {t} is outside the interpolation range [{a}, {b}]"
            )));
        }
        let t = t.clamp(a, b);
        let i = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return Ok(self.values[i]),
            Err(i) => i - 1,
        };
        let h = self.times[i + 1] - self.times[i];
        let p = (self.times[i + 1] - t) / h;
        let q = (t - self.times[i]) / h;
        Ok(self.values[i] * p
            + self.values[i + 1] * q
            + (self.second[i] * (p * p * p - p) + self.second[i + 1] * (q * q * q - q))
                * (h * h / 6.0))
    }
}

/// Scalar function of time multiplying an operator.
#[derive(Clone)]
pub enum Coefficient {
    Function(Arc<CoeffFn>),
    Spline(Arc<Spline>),
    Constant(C64),
    Product(Box<Coefficient>, Box<Coefficient>),
    Sum(Box<Coefficient>, Box<Coefficient>),
    Conj(Box<Coefficient>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Function(_) => f.write_str("Function(..)"),
            Coefficient::Spline(s) => write!(f, "Spline({:?})", s.domain()),
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Product(a, b) => write!(f, "Product({a:?}, {b:?})"),
            Coefficient::Sum(a, b) => write!(f, "Sum({a:?}, {b:?})"),
            Coefficient::Conj(a) => write!(f, "Conj({a:?})"),
        }
    }
}

impl Coefficient {
    pub fn function(f: impl Fn(f64, &Args) -> C64 + Send + Sync + 'static) -> Coefficient {
        Coefficient::Function(Arc::new(f))
    }

    /// Real-valued function of time only.
    pub fn real_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Coefficient {
        Coefficient::Function(Arc::new(move |t, _| C64::new(f(t), 0.0)))
    }

    pub fn constant(c: C64) -> Coefficient {
        Coefficient::Constant(c)
    }

    pub fn spline(times: &[f64], values: &[C64]) -> Result<Coefficient> {
        Ok(Coefficient::Spline(Arc::new(Spline::new(times, values)?)))
    }

    pub fn eval(&self, t: f64, args: &Args) -> Result<C64> {
        Ok(match self {
            Coefficient::Function(f) => f(t, args),
            Coefficient::Spline(s) => s.eval(t)?,
            Coefficient::Constant(c) => *c,
            Coefficient::Product(a, b) => a.eval(t, args)? * b.eval(t, args)?,
            Coefficient::Sum(a, b) => a.eval(t, args)? + b.eval(t, args)?,
            Coefficient::Conj(a) => a.eval(t, args)?.conj(),
        })
    }

    pub fn as_constant(&self) -> Option<C64> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            _ => None,
        }
    }

    pub fn conj(&self) -> Coefficient {
        match self {
            Coefficient::Constant(c) => Coefficient::Constant(c.conj()),
            Coefficient::Conj(a) => (**a).clone(),
            other => Coefficient::Conj(Box::new(other.clone())),
        }
    }

    pub fn times(&self, other: &Coefficient) -> Coefficient {
        match (self.as_constant(), other.as_constant()) {
            (Some(a), Some(b)) => Coefficient::Constant(a * b),
            _ => Coefficient::Product(Box::new(self.clone()), Box::new(other.clone())),
        }
    }

    pub fn plus(&self, other: &Coefficient) -> Coefficient {
        match (self.as_constant(), other.as_constant()) {
            (Some(a), Some(b)) => Coefficient::Constant(a + b),
            _ => Coefficient::Sum(Box::new(self.clone()), Box::new(other.clone())),
        }
    }

    /// Intersection of the domains of all splines involved, if any.
    pub fn domain(&self) -> Option<(f64, f64)> {
        let merge = |a: Option<(f64, f64)>, b: Option<(f64, f64)>| match (a, b) {
            (Some(x), Some(y)) => Some((x.0.max(y.0), x.1.min(y.1))),
            (x, None) => x,
            (None, y) => y,
        };
        match self {
            Coefficient::Spline(s) => Some(s.domain()),
            Coefficient::Product(a, b) | Coefficient::Sum(a, b) => merge(a.domain(), b.domain()),
            Coefficient::Conj(a) => a.domain(),
            _ => None,
        }
    }
}

/// Element of the list form accepted by [`QobjEvo::from_list`].
#[derive(Clone, Debug)]
pub enum Term {
    Const(Qobj),
    Td(Qobj, Coefficient),
}

impl From<Qobj> for Term {
    fn from(q: Qobj) -> Self {
        Term::Const(q)
    }
}

impl From<(Qobj, Coefficient)> for Term {
    fn from((q, c): (Qobj, Coefficient)) -> Self {
        Term::Td(q, c)
    }
}

/// `A(t) = A_0 + Σ_k c_k(t) A_k`
#[derive(Clone, Debug)]
pub struct QobjEvo {
    dims: Dims,
    constant: Option<Qobj>,
    terms: Vec<(Qobj, Coefficient)>,
}

impl From<Qobj> for QobjEvo {
    fn from(q: Qobj) -> Self {
        QobjEvo::constant(q)
    }
}

impl From<&Qobj> for QobjEvo {
    fn from(q: &Qobj) -> Self {
        QobjEvo::constant(q.clone())
    }
}

impl QobjEvo {
    pub fn constant(q: Qobj) -> QobjEvo {
        QobjEvo {
            dims: q.dims().clone(),
            constant: Some(q),
            terms: Vec::new(),
        }
    }

    /// Builds from a list of constant operators and `(operator, coefficient)` pairs.
    pub fn from_list<T: Into<Term>>(items: impl IntoIterator<Item = T>) -> Result<QobjEvo> {
        let mut out: Option<QobjEvo> = None;
        for item in items {
            let piece = match item.into() {
                Term::Const(q) => QobjEvo::constant(q),
                Term::Td(q, c) => match c.as_constant() {
                    Some(v) => QobjEvo::constant(q.scale(v)),
                    None => QobjEvo {
                        dims: q.dims().clone(),
                        constant: None,
                        terms: vec![(q, c)],
                    },
                },
            };
            out = Some(match out {
                None => piece,
                Some(acc) => acc.add(&piece)?,
            });
        }
        out.ok_or_else(|| Error::InvalidArgument("QobjEvo needs at least one term".into()))
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn shape(&self) -> (usize, usize) {
        self.dims.shape()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_super(&self) -> bool {
        self.dims.rows.is_super() && self.dims.cols.is_super()
    }

    pub fn constant_part(&self) -> Option<&Qobj> {
        self.constant.as_ref()
    }

    pub fn td_terms(&self) -> &[(Qobj, Coefficient)] {
        &self.terms
    }

    /// Common domain of the spline coefficients, if any.
    pub fn domain(&self) -> Option<(f64, f64)> {
        self.terms
            .iter()
            .filter_map(|(_, c)| c.domain())
            .reduce(|a, b| (a.0.max(b.0), a.1.min(b.1)))
    }

    fn zero_like(&self) -> Qobj {
        let (m, n) = self.shape();
        Qobj::new(Data::zeros(m, n, Format::Csr), Some(self.dims.clone())).expect("dims match")
    }

    pub fn eval(&self, t: f64, args: &Args) -> Result<Qobj> {
        let mut acc = self.constant.clone().unwrap_or_else(|| self.zero_like());
        for (q, c) in &self.terms {
            acc = acc.add_scaled(q, c.eval(t, args)?)?;
        }
        Ok(acc)
    }

    /// `out += alpha · A(t) x`
    pub fn apply(&self, t: f64, args: &Args, alpha: C64, x: &[C64], out: &mut [C64]) -> Result<()> {
        if let Some(q) = &self.constant {
            q.data().gemv_add(alpha, x, out);
        }
        for (q, c) in &self.terms {
            let s = alpha * c.eval(t, args)?;
            if s != C64::new(0.0, 0.0) {
                q.data().gemv_add(s, x, out);
            }
        }
        Ok(())
    }

    fn check_dims(&self, other: &Dims, what: &str) -> Result<()> {
        if &self.dims != other {
            return Err(Error::Dimension(format!(
                "cannot {what} time-dependent objects with dims {} and {}",
                self.dims, other
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &QobjEvo) -> Result<QobjEvo> {
        self.check_dims(&other.dims, "add")?;
        let constant = match (&self.constant, &other.constant) {
            (Some(a), Some(b)) => Some(a.try_add(b)?),
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (None, None) => None,
        };
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(QobjEvo {
            dims: self.dims.clone(),
            constant,
            terms,
        })
    }

    pub fn add_qobj(&self, q: &Qobj) -> Result<QobjEvo> {
        self.add(&QobjEvo::constant(q.clone()))
    }

    pub fn scale(&self, s: C64) -> QobjEvo {
        QobjEvo {
            dims: self.dims.clone(),
            constant: self.constant.as_ref().map(|q| q.scale(s)),
            terms: self.terms.iter().map(|(q, c)| (q.scale(s), c.clone())).collect(),
        }
    }

    /// Multiplies every term by a time-dependent coefficient.
    pub fn times_coefficient(&self, f: &Coefficient) -> QobjEvo {
        if let Some(v) = f.as_constant() {
            return self.scale(v);
        }
        let mut terms: Vec<(Qobj, Coefficient)> = Vec::new();
        if let Some(q) = &self.constant {
            terms.push((q.clone(), f.clone()));
        }
        terms.extend(self.terms.iter().map(|(q, c)| (q.clone(), c.times(f))));
        QobjEvo {
            dims: self.dims.clone(),
            constant: None,
            terms,
        }
    }

    fn pieces(&self) -> Vec<(Qobj, Option<Coefficient>)> {
        let mut out = Vec::with_capacity(self.terms.len() + 1);
        if let Some(q) = &self.constant {
            out.push((q.clone(), None));
        }
        out.extend(self.terms.iter().map(|(q, c)| (q.clone(), Some(c.clone()))));
        out
    }

    fn from_pieces(dims: Dims, pieces: Vec<(Qobj, Option<Coefficient>)>) -> Result<QobjEvo> {
        let mut constant: Option<Qobj> = None;
        let mut terms = Vec::new();
        for (q, c) in pieces {
            let q = match c {
                Some(c) => match c.as_constant() {
                    Some(v) => q.scale(v),
                    None => {
                        terms.push((q, c));
                        continue;
                    }
                },
                None => q,
            };
            constant = Some(match constant {
                None => q,
                Some(acc) => acc.try_add(&q)?,
            });
        }
        Ok(QobjEvo {
            dims,
            constant,
            terms,
        })
    }

    /// Pointwise product `(A·B)(t) = A(t) B(t)`.
    pub fn matmul(&self, other: &QobjEvo) -> Result<QobjEvo> {
        if self.dims.cols != other.dims.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply time-dependent objects with dims {} and {}",
                self.dims, other.dims
            )));
        }
        let dims = Dims::new(self.dims.rows.clone(), other.dims.cols.clone());
        let mut pieces = Vec::new();
        for (qa, ca) in self.pieces() {
            for (qb, cb) in other.pieces() {
                let q = qa.matmul(&qb)?;
                let c = match (&ca, &cb) {
                    (None, None) => None,
                    (Some(a), None) => Some(a.clone()),
                    (None, Some(b)) => Some(b.clone()),
                    (Some(a), Some(b)) => Some(a.times(b)),
                };
                pieces.push((q, c));
            }
        }
        QobjEvo::from_pieces(dims, pieces)
    }

    /// `A(t)†`
    pub fn dag(&self) -> QobjEvo {
        QobjEvo {
            dims: self.dims.transposed(),
            constant: self.constant.as_ref().map(|q| q.dag()),
            terms: self.terms.iter().map(|(q, c)| (q.dag(), c.conj())).collect(),
        }
    }

    /// Applies a linear map to every operator, keeping the coefficients.
    pub fn map_linear(&self, f: impl Fn(&Qobj) -> Result<Qobj>) -> Result<QobjEvo> {
        let constant = self.constant.as_ref().map(&f).transpose()?;
        let terms = self
            .terms
            .iter()
            .map(|(q, c)| Ok((f(q)?, c.clone())))
            .collect::<Result<Vec<_>>>()?;
        let dims = match (&constant, terms.first()) {
            (Some(q), _) => q.dims().clone(),
            (None, Some((q, _))) => q.dims().clone(),
            (None, None) => unreachable!("QobjEvo always has a term"),
        };
        Ok(QobjEvo {
            dims,
            constant,
            terms,
        })
    }

    /// Converts every operator to the given format.
    pub fn to(&self, format: Format) -> QobjEvo {
        QobjEvo {
            dims: self.dims.clone(),
            constant: self.constant.as_ref().map(|q| q.to(format)),
            terms: self.terms.iter().map(|(q, c)| (q.to(format), c.clone())).collect(),
        }
    }

    /// Merges all constant-coefficient data into one matrix and sums terms that share
    /// the same coefficient object. Purely a performance step.
    pub fn compress(&self) -> QobjEvo {
        let mut terms: Vec<(Qobj, Coefficient)> = Vec::new();
        for (q, c) in &self.terms {
            let shared = terms.iter_mut().find(|(_, c2)| same_coefficient(c, c2));
            match shared {
                Some((acc, _)) => *acc = acc.try_add(q).expect("same dims"),
                None => terms.push((q.clone(), c.clone())),
            }
        }
        QobjEvo {
            dims: self.dims.clone(),
            constant: self.constant.clone(),
            terms,
        }
    }
}

fn same_coefficient(a: &Coefficient, b: &Coefficient) -> bool {
    match (a, b) {
        (Coefficient::Function(x), Coefficient::Function(y)) => Arc::ptr_eq(x, y),
        (Coefficient::Spline(x), Coefficient::Spline(y)) => Arc::ptr_eq(x, y),
        (Coefficient::Constant(x), Coefficient::Constant(y)) => x == y,
        (Coefficient::Conj(x), Coefficient::Conj(y)) => same_coefficient(x, y),
        (Coefficient::Product(a1, b1), Coefficient::Product(a2, b2))
        | (Coefficient::Sum(a1, b1), Coefficient::Sum(a2, b2)) => {
            same_coefficient(a1, a2) && same_coefficient(b1, b2)
        }
        _ => false,
    }
}

/// Dissipator cross term `ρ ↦ a ρ b† - ½ b†a ρ - ½ ρ b†a`.
fn dissipator_cross(a: &Qobj, b: &Qobj) -> Result<Qobj> {
    let bda = b.dag().matmul(a)?;
    let half = C64::new(-0.5, 0.0);
    qobj::sprepost(a, &b.dag())?
        .add_scaled(&qobj::spre(&bda)?, half)?
        .add_scaled(&qobj::spost(&bda)?, half)
}

/// Time-dependent Liouvillian with `L(t) = liouvillian(H(t), [c(t)])`.
///
/// A collapse operator `c(t) = Σ_a g_a(t) C_a` contributes
/// `Σ_{a,b} g_a(t) g_b(t)* D[C_a, C_b]`, so a single coefficient enters as `|g(t)|²`.
pub fn liouvillian(h: Option<&QobjEvo>, c_ops: &[QobjEvo]) -> Result<QobjEvo> {
    let mut l: Option<QobjEvo> = match h {
        Some(h) if h.is_super() => Some(h.clone()),
        Some(h) => Some(h.map_linear(|q| {
            let pre = qobj::spre(q)?;
            let post = qobj::spost(q)?;
            Ok(pre.try_sub(&post)?.scale(C64::new(0.0, -1.0)))
        })?),
        None => None,
    };
    for c in c_ops {
        let d = if c.is_super() {
            c.clone()
        } else {
            let pieces = c.pieces();
            let mut out = Vec::new();
            for (qa, ga) in &pieces {
                for (qb, gb) in &pieces {
                    let s = dissipator_cross(qa, qb)?;
                    let coeff = match (ga, gb) {
                        (None, None) => None,
                        (Some(a), None) => Some(a.clone()),
                        (None, Some(b)) => Some(b.conj()),
                        (Some(a), Some(b)) => Some(a.times(&b.conj())),
                    };
                    out.push((s, coeff));
                }
            }
            let dims = out[0].0.dims().clone();
            QobjEvo::from_pieces(dims, out)?
        };
        l = Some(match l {
            None => d,
            Some(acc) => acc.add(&d)?,
        });
    }
    l.ok_or_else(|| {
        Error::InvalidArgument("liouvillian needs a Hamiltonian or collapse operators".into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qobj::{sigmam, sigmax, sigmaz};

    fn args() -> Args {
        Args::new()
    }

    #[test]
    fn spline_reproduces_knots() {
        let t: Vec<f64> = (0..101).map(|k| k as f64 * 2.0 * std::f64::consts::PI / 100.0).collect();
        let v: Vec<f64> = t.iter().map(|x| x.sin()).collect();
        let s = Spline::from_real(&t, &v).unwrap();
        for (ti, vi) in t.iter().zip(&v) {
            assert_eq!(s.eval(*ti).unwrap().re, *vi);
        }
        assert!(s.eval(-0.1).is_err());
        assert!(s.eval(7.0).is_err());
    }

    #[test]
    fn spline_rejects_bad_knots() {
        assert!(Spline::from_real(&[0.0], &[1.0]).is_err());
        assert!(Spline::from_real(&[0.0, 0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cosine_drive_at_pi() {
        let h0 = sigmaz();
        let h1 = sigmax();
        let cos = Coefficient::real_fn(f64::cos);
        let h = QobjEvo::from_list(vec![Term::from(h0.clone()), Term::from((h1.clone(), cos))])
            .unwrap();
        let at_pi = h.eval(std::f64::consts::PI, &args()).unwrap();
        let expect = h0.try_sub(&h1).unwrap();
        assert!(at_pi.data().max_abs_diff(expect.data()).unwrap() < 1e-15);
    }

    #[test]
    fn dag_twice() {
        let f = Coefficient::function(|t, _| C64::new(t, t * t));
        let a = QobjEvo::from_list(vec![Term::from((sigmam(), f))]).unwrap();
        let b = a.dag().dag();
        let t = 0.7;
        let d = a
            .eval(t, &args())
            .unwrap()
            .data()
            .max_abs_diff(b.eval(t, &args()).unwrap().data())
            .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn td_collapse_rate_is_modulus_squared() {
        let g = Coefficient::function(|t, _| C64::new(t.cos(), t.sin()) * 0.5);
        let c = QobjEvo::from_list(vec![Term::from((sigmam(), g))]).unwrap();
        let l = liouvillian(None, &[c]).unwrap();
        let t = 1.3;
        let got = l.eval(t, &args()).unwrap();
        let want = qobj::lindblad_dissipator(&sigmam(), None).unwrap().scale_real(0.25);
        assert!(got.data().max_abs_diff(want.data()).unwrap() < 1e-15);
    }
}
