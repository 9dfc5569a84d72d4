//! Dense linear algebra kernels: matrix exponential, Hermitian eigensolver,
//! LU / GMRES linear solvers and a few helpers built on top of them.

use nalgebra::DMatrix;

use crate::data::{Data, Dense, Format};
use crate::error::{Error, Result};
use crate::C64;

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Tolerance used to decide whether an input is Hermitian.
pub const HERM_TOL: f64 = 1e-12;

fn require_square(m: &Data, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} requires a square matrix, got {:?}",
            m.shape()
        )));
    }
    Ok(m.nrows())
}

// ---------------------------------------------------------------------------
// Matrix exponential

fn pade6_coefficients() -> [f64; 7] {
    // c_k = (2p-k)! p! / ((2p)! k! (p-k)!)
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let p = 6;
    let mut c = [0.0; 7];
    for (k, ck) in c.iter_mut().enumerate() {
        let k = k as u32;
        *ck = fact(2 * p - k) * fact(p) / (fact(2 * p) * fact(k) * fact(p - k));
    }
    c
}

/// Matrix exponential.
///
/// Hermitian inputs use the spectral decomposition. Everything else goes through
/// scaling and squaring around a [6/6] Padé approximant, with the number of squarings
/// chosen from the 1-norm.
pub fn expm(m: &Data) -> Result<Data> {
    let n = require_square(m, "expm")?;
    if n == 0 {
        return Ok(m.clone());
    }
    if m.hermitian_defect() <= HERM_TOL {
        let (vals, vecs) = eig_herm_dense(&m.dense())?;
        let f: Vec<C64> = vals.iter().map(|&l| C64::new(l.exp(), 0.0)).collect();
        return Ok(Data::Dense(spectral_apply(&vecs, &f)));
    }
    Ok(Data::Dense(expm_pade(&m.dense())?))
}

/// `V diag(f) V†`
pub fn spectral_apply(vecs: &Dense, f: &[C64]) -> Dense {
    let n = vecs.nrows();
    let scaled = Dense::from_fn(n, f.len(), |i, j| vecs.get(i, j) * f[j]);
    scaled.matmul(&vecs.adjoint())
}

pub fn expm_pade(a: &Dense) -> Result<Dense> {
    let n = a.nrows();
    let norm = a.norm1();
    if !norm.is_finite() {
        return Err(Error::Numerical("expm of a matrix with non-finite entries".into()));
    }
    let mut s = 0i32;
    if norm > 0.5 {
        s = (norm / 0.5).log2().ceil() as i32;
    }
    let scaled = a.scale(C64::new(0.5f64.powi(s), 0.0));
    let c = pade6_coefficients();
    let id = Dense::identity(n);
    let a2 = scaled.matmul(&scaled);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    // even and odd parts: P = U + V, Q = U - V with V odd
    let u = id
        .scale(C64::new(c[0], 0.0))
        .add_scaled(&a2, C64::new(c[2], 0.0))
        .add_scaled(&a4, C64::new(c[4], 0.0))
        .add_scaled(&a6, C64::new(c[6], 0.0));
    let inner = id
        .scale(C64::new(c[1], 0.0))
        .add_scaled(&a2, C64::new(c[3], 0.0))
        .add_scaled(&a4, C64::new(c[5], 0.0));
    let v = scaled.matmul(&inner);
    let p = u.add_scaled(&v, ONE);
    let q = u.add_scaled(&v, -ONE);
    let lu = Lu::factor(&q)?;
    let mut r = lu.solve_matrix(&p);
    for _ in 0..s {
        r = r.matmul(&r);
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Hermitian eigensolver

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and orthonormal
/// eigenvectors as the columns of a dense matrix.
pub fn eig_herm(m: &Data) -> Result<(Vec<f64>, Data)> {
    require_square(m, "eig_herm")?;
    let defect = m.hermitian_defect();
    if defect > HERM_TOL {
        return Err(Error::Precondition(format!(
            "matrix is not Hermitian (max |A - A^dag| = {defect:.3e})"
        )));
    }
    let (vals, vecs) = eig_herm_dense(&m.dense())?;
    Ok((vals, Data::Dense(vecs)))
}

/// Householder reduction to real tridiagonal form followed by implicit QL.
/// The Hermiticity check is the caller's job.
pub fn eig_herm_dense(m: &Dense) -> Result<(Vec<f64>, Dense)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Dense::zeros(0, 0)));
    }
    // symmetrize so the reduction sees an exactly Hermitian input
    let mut a = Dense::from_fn(n, n, |i, j| 0.5 * (m.get(i, j) + m.get(j, i).conj()));
    let mut q = Dense::identity(n);

    for k in 0..n.saturating_sub(2) {
        let alpha = (k + 1..n).map(|i| a.get(i, k).norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = a.get(k + 1, k);
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let mut v = vec![ZERO; n - k - 1];
        for (idx, i) in (k + 1..n).enumerate() {
            v[idx] = a.get(i, k);
        }
        v[0] += phase * alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;
        let m_sub = n - k - 1;
        // p = tau * B v on the trailing block
        let mut p = vec![ZERO; m_sub];
        for (jj, &vj) in v.iter().enumerate() {
            let col = a.column(k + 1 + jj);
            for (ii, pi) in p.iter_mut().enumerate() {
                *pi += col[k + 1 + ii] * vj;
            }
        }
        p.iter_mut().for_each(|z| *z *= tau);
        let kk: C64 = v.iter().zip(&p).map(|(vi, pi)| vi.conj() * pi).sum::<C64>() * (tau / 2.0);
        let w: Vec<C64> = p.iter().zip(&v).map(|(&pi, &vi)| pi - kk * vi).collect();
        for jj in 0..m_sub {
            let (vj, wj) = (v[jj].conj(), w[jj].conj());
            let col = a.column_mut(k + 1 + jj);
            for ii in 0..m_sub {
                col[k + 1 + ii] -= v[ii] * wj + w[ii] * vj;
            }
        }
        let sub = -phase * alpha;
        a.set(k + 1, k, sub);
        a.set(k, k + 1, sub.conj());
        for i in k + 2..n {
            a.set(i, k, ZERO);
            a.set(k, i, ZERO);
        }
        // Q <- Q H
        for r in 0..n {
            let qv: C64 = (0..m_sub).map(|jj| q.get(r, k + 1 + jj) * v[jj]).sum();
            let s = qv * tau;
            for jj in 0..m_sub {
                *q.get_mut(r, k + 1 + jj) -= s * v[jj].conj();
            }
        }
    }

    let mut d: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    let mut e = vec![0.0; n];
    let mut delta = vec![ONE; n];
    for i in 0..n - 1 {
        let ei = a.get(i + 1, i);
        let mag = ei.norm();
        e[i + 1] = mag;
        delta[i + 1] = if mag > 0.0 { delta[i] * (ei / mag) } else { delta[i] };
    }
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i + i * n] = 1.0;
    }
    tql2(&mut d, &mut e, &mut z, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let vals: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    // eigenvectors = Q D Z
    let qd = Dense::from_fn(n, n, |i, j| q.get(i, j) * delta[j]);
    let zc = Dense::from_fn(n, n, |i, j| C64::new(z[i + order[j] * n], 0.0));
    Ok((vals, qd.matmul(&zc)))
}

/// Implicit QL on a real symmetric tridiagonal matrix; `e[1..]` holds the
/// subdiagonal. `z` (column-major) accumulates the rotations.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Convergence(
                        "tridiagonal QL iteration did not converge".into(),
                    ));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (ci, ci1) = (i * n, (i + 1) * n);
                    for k in 0..n {
                        let h = z[ci1 + k];
                        z[ci1 + k] = s * z[ci + k] + c * h;
                        z[ci + k] = c * z[ci + k] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Principal square root of a positive semidefinite Hermitian matrix; eigenvalues
/// below `-tol` are rejected, the rest are clipped at zero.
pub fn sqrtm_psd(m: &Dense, tol: f64) -> Result<Dense> {
    let (vals, vecs) = eig_herm_dense(m)?;
    if let Some(&worst) = vals.first() {
        if worst < -tol {
            return Err(Error::Precondition(format!(
                "matrix is not positive semidefinite (eigenvalue {worst:.3e})"
            )));
        }
    }
    let f: Vec<C64> = vals.iter().map(|&l| C64::new(l.max(0.0).sqrt(), 0.0)).collect();
    Ok(spectral_apply(&vecs, &f))
}

// ---------------------------------------------------------------------------
// Linear solvers

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Dense,
    piv: Vec<usize>,
}

impl Lu {
    /// Fails with [`Error::Singular`] when a pivot drops below `1e-14 * max|A|`.
    pub fn factor(a: &Dense) -> Result<Lu> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Dimension(format!(
                "LU of non-square {}x{} matrix",
                n,
                a.ncols()
            )));
        }
        let threshold = 1e-14 * a.max_abs();
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut p, mut best) = (k, 0.0);
            for i in k..n {
                let v = lu.get(i, k).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= threshold || best == 0.0 {
                return Err(Error::Singular {
                    pivot: best,
                    threshold,
                });
            }
            if p != k {
                piv.swap(p, k);
                for j in 0..n {
                    let col = lu.column_mut(j);
                    col.swap(p, k);
                }
            }
            let pivot = lu.get(k, k);
            let inv = ONE / pivot;
            {
                let col = lu.column_mut(k);
                for x in col.iter_mut().skip(k + 1) {
                    *x *= inv;
                }
            }
            let lcol: Vec<C64> = lu.column(k)[k + 1..].to_vec();
            for j in k + 1..n {
                let ukj = lu.get(k, j);
                if ukj == ZERO {
                    continue;
                }
                let col = lu.column_mut(j);
                for (x, &l) in col[k + 1..].iter_mut().zip(&lcol) {
                    *x -= l * ukj;
                }
            }
        }
        Ok(Lu { lu, piv })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.dim();
        let mut x: Vec<C64> = self.piv.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj == ZERO {
                continue;
            }
            let col = self.lu.column(j);
            for i in j + 1..n {
                x[i] -= col[i] * xj;
            }
        }
        for j in (0..n).rev() {
            let col = self.lu.column(j);
            x[j] /= col[j];
            let xj = x[j];
            for i in 0..j {
                x[i] -= col[i] * xj;
            }
        }
        b.copy_from_slice(&x);
    }

    pub fn solve_matrix(&self, b: &Dense) -> Dense {
        let mut out = b.clone();
        for j in 0..b.ncols() {
            self.solve_in_place(out.column_mut(j));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresOptions {
    /// Relative residual target `‖Ax - b‖ / ‖b‖`.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-12,
            restart: 100,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinearSolver {
    DirectLu,
    IterativeGmres(GmresOptions),
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations.
pub fn gmres(a: &Data, b: &[C64], x0: Option<&[C64]>, opts: &GmresOptions) -> Result<Vec<C64>> {
    let n = require_square(a, "gmres")?;
    if b.len() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has length {}, expected {n}",
            b.len()
        )));
    }
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![ZERO; n], |v| v.to_vec());
    if bnorm == 0.0 {
        return Ok(vec![ZERO; n]);
    }
    let m = opts.restart.max(1).min(n.max(1));
    let mut total = 0;
    loop {
        let mut r = b.to_vec();
        a.gemv_add(-ONE, &x, &mut r);
        let beta = norm2(&r);
        if beta / bnorm <= opts.tol {
            return Ok(x);
        }
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|&z| z / beta).collect());
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_used = 0;
        for j in 0..m {
            total += 1;
            let mut w = vec![ZERO; n];
            a.gemv_add(ONE, &basis[j], &mut w);
            for (i, vi) in basis.iter().enumerate() {
                let hij = dot(vi, &w);
                h[i][j] = hij;
                for (wk, &vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let wn = norm2(&w);
            h[j + 1][j] = C64::new(wn, 0.0);
            for i in 0..j {
                let (hi, hi1) = (h[i][j], h[i + 1][j]);
                h[i][j] = cs[i] * hi + sn[i] * hi1;
                h[i + 1][j] = -sn[i].conj() * hi + cs[i] * hi1;
            }
            let (p, q) = (h[j][j], h[j + 1][j]);
            let denom = (p.norm_sqr() + q.norm_sqr()).sqrt();
            if denom == 0.0 {
                k_used = j;
                break;
            }
            if p.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = q.conj() / q.norm();
            } else {
                cs[j] = p.norm() / denom;
                sn[j] = (p / p.norm()) * q.conj() / denom;
            }
            h[j][j] = cs[j] * p + sn[j] * q;
            h[j + 1][j] = ZERO;
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] *= cs[j];
            k_used = j + 1;
            if g[j + 1].norm() / bnorm <= opts.tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|&z| z / wn).collect());
            if total >= opts.max_iter {
                break;
            }
        }
        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in i + 1..k_used {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        for (l, &yl) in y.iter().enumerate() {
            for (xk, &vk) in x.iter_mut().zip(&basis[l]) {
                *xk += yl * vk;
            }
        }
        if total >= opts.max_iter {
            let mut r = b.to_vec();
            a.gemv_add(-ONE, &x, &mut r);
            let rel = norm2(&r) / bnorm;
            if rel <= opts.tol {
                return Ok(x);
            }
            return Err(Error::Convergence(format!(
                "GMRES reached {total} iterations with relative residual {rel:.3e}"
            )));
        }
    }
}

/// Solves `A X = B`. The result is Dense.
pub fn solve_linear(a: &Data, b: &Data, method: LinearSolver) -> Result<Data> {
    let n = require_square(a, "solve_linear")?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, expected {n}",
            b.nrows()
        )));
    }
    let bd = b.to_dense();
    match method {
        LinearSolver::DirectLu => {
            let lu = Lu::factor(&a.dense())?;
            Ok(Data::Dense(lu.solve_matrix(&bd)))
        }
        LinearSolver::IterativeGmres(opts) => {
            let mut out = Dense::zeros(n, bd.ncols());
            for j in 0..bd.ncols() {
                let x = gmres(a, bd.column(j), None, &opts)?;
                out.column_mut(j).copy_from_slice(&x);
            }
            Ok(Data::Dense(out))
        }
    }
}

// ---------------------------------------------------------------------------
// General (non-Hermitian) eigenproblems and SVD, backed by nalgebra

pub fn to_nalgebra(m: &Dense) -> DMatrix<C64> {
    DMatrix::from_column_slice(m.nrows(), m.ncols(), m.as_slice())
}

pub fn from_nalgebra(m: &DMatrix<C64>) -> Dense {
    Dense::from_col_major(m.nrows(), m.ncols(), m.as_slice().to_vec())
}

/// Eigenvalues and (unit-norm, right) eigenvectors of a general square matrix via the
/// complex Schur form. Fails with [`Error::Method`] when the eigenvector matrix is
/// numerically singular (defective input).
pub fn eig_general(m: &Dense) -> Result<(Vec<C64>, Dense)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension("eig_general requires a square matrix".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), Dense::zeros(0, 0)));
    }
    let schur = nalgebra::linalg::Schur::try_new(to_nalgebra(m), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Convergence("Schur decomposition did not converge".into()))?;
    let (qm, tm) = schur.unpack();
    let scale = tm.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;
    let vals: Vec<C64> = (0..n).map(|i| tm[(i, i)]).collect();
    let mut y = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        let lam = vals[i];
        y[(i, i)] = ONE;
        for j in (0..i).rev() {
            let mut s = ZERO;
            for k in j + 1..=i {
                s += tm[(j, k)] * y[(k, i)];
            }
            let mut den = tm[(j, j)] - lam;
            if den.norm() < small {
                den = C64::new(small, 0.0);
            }
            y[(j, i)] = -s / den;
        }
    }
    let v = qm * y;
    let mut vd = from_nalgebra(&v);
    for j in 0..n {
        let nrm = norm2(vd.column(j));
        vd.column_mut(j).iter_mut().for_each(|z| *z /= nrm);
    }
    // reject defective bases
    let svd = nalgebra::linalg::SVD::new(to_nalgebra(&vd), false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Method(format!(
            "eigenvector matrix is ill-conditioned (condition ~ {:.1e}); the matrix is \
             defective or nearly so, use the adaptive integrator instead",
            smax / smin
        )));
    }
    Ok((vals, vd))
}

/// Singular values (descending) and right singular vectors as columns of `V`,
/// so that `A = U Σ V†`.
pub fn svd_right(m: &Dense) -> Result<(Vec<f64>, Dense)> {
    let svd = nalgebra::linalg::SVD::try_new(to_nalgebra(m), false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Convergence("SVD did not converge".into()))?;
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let vals = order.iter().map(|&i| svd.singular_values[i]).collect();
    let ncols = m.ncols();
    let v = Dense::from_fn(ncols, order.len(), |i, j| vt[(order[j], i)].conj());
    Ok((vals, v))
}

/// Convenience constructor used by tests and solvers.
pub fn dense_identity(n: usize) -> Data {
    Data::identity(n, Format::Dense)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn max_diff(a: &Dense, b: &Dense) -> f64 {
        a.add_scaled(b, -ONE).max_abs()
    }

    #[test]
    fn pade_coefficients_match_closed_form() {
        let c = pade6_coefficients();
        assert_eq!(c[0], 1.0);
        assert!((c[1] - 0.5).abs() < 1e-15);
        assert!((c[2] - 5.0 / 44.0).abs() < 1e-15);
        assert!((c[6] - 1.0 / 665_280.0).abs() < 1e-20);
    }

    #[test]
    fn expm_rotation() {
        let x = Dense::from_rows(&[vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]]);
        let a = Data::Dense(x.scale(c(0., -std::f64::consts::FRAC_PI_2)));
        let e = expm(&a).unwrap().to_dense();
        assert!(max_diff(&e, &x.scale(c(0., -1.))) < 1e-13);
    }

    #[test]
    fn expm_diagonal_and_zero() {
        let z = Data::zeros(3, 3, Format::Csr);
        assert!(max_diff(&expm(&z).unwrap().to_dense(), &Dense::identity(3)) < 1e-15);
        let d = Dense::from_rows(&[vec![c(1.5, 0.3), c(0., 0.)], vec![c(0., 0.), c(-2., 0.)]]);
        let e = expm(&Data::Dense(d)).unwrap().to_dense();
        assert!((e.get(0, 0) - c(1.5, 0.3).exp()).norm() < 1e-13);
        assert!((e.get(1, 1) - (-2.0f64).exp()).norm() < 1e-13);
        assert!(e.get(0, 1).norm() < 1e-15);
    }

    #[test]
    fn eig_herm_pauli_x() {
        let x = Data::Dense(Dense::from_rows(&[
            vec![c(0., 0.), c(1., 0.)],
            vec![c(1., 0.), c(0., 0.)],
        ]));
        let (vals, vecs) = eig_herm(&x).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let v = vecs.to_dense();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // eigenvector of -1 is (|0> - |1>)/sqrt2 up to phase
        let ratio = v.get(1, 0) / v.get(0, 0);
        assert!((ratio + 1.0).norm() < 1e-13);
        assert!((v.get(0, 0).norm() - s).abs() < 1e-13);
    }

    #[test]
    fn eig_herm_rejects_non_hermitian() {
        let m = Data::Dense(Dense::from_rows(&[
            vec![c(0., 0.), c(1., 0.)],
            vec![c(0., 0.), c(0., 0.)],
        ]));
        assert!(matches!(eig_herm(&m), Err(Error::Precondition(_))));
    }

    #[test]
    fn lu_singular_and_identity() {
        assert!(matches!(
            Lu::factor(&Dense::zeros(3, 3)),
            Err(Error::Singular { .. })
        ));
        let b = Data::Dense(Dense::column_vector(&[c(1., 2.), c(3., -1.)]));
        let x = solve_linear(&Data::identity(2, Format::Csr), &b, LinearSolver::DirectLu).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn sqrtm_of_projector_complement() {
        let m = Dense::from_rows(&[vec![c(0., 0.), c(0., 0.)], vec![c(0., 0.), c(1., 0.)]]);
        let r = sqrtm_psd(&m, 1e-12).unwrap();
        assert!(max_diff(&r, &m) < 1e-14);
    }
}
