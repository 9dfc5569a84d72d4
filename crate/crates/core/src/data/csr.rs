use crate::C64;

use super::dense::Dense;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Compressed sparse row storage.
///
/// Column indices are strictly increasing inside each row and no explicit zeros are
/// stored by any of the constructors in this module.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Csr {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    /// Builds from raw arrays after validating the structural invariants.
    pub fn try_from_parts(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<C64>,
    ) -> Result<Self, String> {
        if indptr.len() != nrows + 1 {
            return Err(format!("indptr has length {}, expected {}", indptr.len(), nrows + 1));
        }
        if indptr[0] != 0 || *indptr.last().unwrap() != values.len() || indices.len() != values.len()
        {
            return Err("indptr does not bracket the value array".into());
        }
        for r in 0..nrows {
            if indptr[r] > indptr[r + 1] {
                return Err(format!("indptr decreases at row {r}"));
            }
            let cols = &indices[indptr[r]..indptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("column indices of row {r} are not strictly increasing"));
            }
            if cols.last().is_some_and(|&c| c >= ncols) {
                return Err(format!("column index out of range in row {r}"));
            }
        }
        Ok(Csr {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds from unordered `(row, col, value)` triplets. Duplicates are summed and exact
    /// zeros are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<C64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                rows.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(values) {
            if v != ZERO {
                indptr[r + 1] += 1;
                keep_idx.push(c);
                keep_val.push(v);
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices: keep_idx,
            values: keep_val,
        }
    }

    pub fn from_dense(d: &Dense) -> Self {
        let mut indptr = Vec::with_capacity(d.nrows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                let v = d.get(i, j);
                if v != ZERO {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr {
            nrows: d.nrows(),
            ncols: d.ncols(),
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Dense {
        let mut d = Dense::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            d.set(r, c, v);
        }
        d
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Iterates stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let cols = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.indptr[i] + k],
            Err(_) => ZERO,
        }
    }

    /// `y += alpha * A x`
    #[inline]
    pub fn gemv_add(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let (s, e) = (self.indptr[r], self.indptr[r + 1]);
            let mut acc = ZERO;
            for k in s..e {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yr += alpha * acc;
        }
    }

    pub fn scale(&self, s: C64) -> Csr {
        let mut out = self.clone();
        if s == ZERO {
            return Csr::zeros(self.nrows, self.ncols);
        }
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn conjugate(&self) -> Csr {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![ZERO; self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let dst = next[c];
                indices[dst] = r;
                values[dst] = self.values[k];
                next[c] += 1;
            }
        }
        Csr {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    pub fn adjoint(&self) -> Csr {
        self.transpose().conjugate()
    }

    /// `self + s * other`, merging row by row.
    pub fn add_scaled(&self, other: &Csr, s: C64) -> Csr {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        indptr.push(0);
        for r in 0..self.nrows {
            let (mut a, ae) = (self.indptr[r], self.indptr[r + 1]);
            let (mut b, be) = (other.indptr[r], other.indptr[r + 1]);
            let mut push = |c: usize, v: C64| {
                if v != ZERO {
                    indices.push(c);
                    values.push(v);
                }
            };
            while a < ae || b < be {
                let ca = if a < ae { self.indices[a] } else { usize::MAX };
                let cb = if b < be { other.indices[b] } else { usize::MAX };
                if ca == cb {
                    push(ca, self.values[a] + s * other.values[b]);
                    a += 1;
                    b += 1;
                } else if ca < cb {
                    push(ca, self.values[a]);
                    a += 1;
                } else {
                    push(cb, s * other.values[b]);
                    b += 1;
                }
            }
            indptr.push(indices.len());
        }
        Csr {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Sparse-sparse product using a dense row accumulator.
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.ncols, other.nrows);
        let n = other.ncols;
        let mut acc = vec![ZERO; n];
        let mut mark = vec![usize::MAX; n];
        let mut cols: Vec<usize> = Vec::new();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..self.nrows {
            cols.clear();
            for k in self.indptr[r]..self.indptr[r + 1] {
                let a = self.values[k];
                let mid = self.indices[k];
                for l in other.indptr[mid]..other.indptr[mid + 1] {
                    let c = other.indices[l];
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = ZERO;
                        cols.push(c);
                    }
                    acc[c] += a * other.values[l];
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                if acc[c] != ZERO {
                    indices.push(c);
                    values.push(acc[c]);
                }
            }
            indptr.push(indices.len());
        }
        Csr {
            nrows: self.nrows,
            ncols: n,
            indptr,
            indices,
            values,
        }
    }

    pub fn matmul_dense(&self, other: &Dense) -> Dense {
        assert_eq!(self.ncols, other.nrows());
        let mut out = Dense::zeros(self.nrows, other.ncols());
        for j in 0..other.ncols() {
            self.gemv_add(C64::new(1.0, 0.0), other.column(j), out.column_mut(j));
        }
        out
    }

    /// Dense times sparse.
    pub fn dense_matmul(lhs: &Dense, rhs: &Csr) -> Dense {
        assert_eq!(lhs.ncols(), rhs.nrows);
        let mut out = Dense::zeros(lhs.nrows(), rhs.ncols);
        for (k, c, v) in rhs.iter() {
            let src = lhs.column(k).to_vec();
            for (o, a) in out.column_mut(c).iter_mut().zip(src) {
                *o += a * v;
            }
        }
        out
    }

    pub fn kron(&self, other: &Csr) -> Csr {
        let (p, q) = (other.nrows, other.ncols);
        let mut indptr = Vec::with_capacity(self.nrows * p + 1);
        let mut indices = Vec::with_capacity(self.nnz() * other.nnz());
        let mut values = Vec::with_capacity(self.nnz() * other.nnz());
        indptr.push(0);
        for i in 0..self.nrows {
            for k in 0..p {
                for a in self.indptr[i]..self.indptr[i + 1] {
                    let (j, va) = (self.indices[a], self.values[a]);
                    for b in other.indptr[k]..other.indptr[k + 1] {
                        indices.push(j * q + other.indices[b]);
                        values.push(va * other.values[b]);
                    }
                }
                indptr.push(indices.len());
            }
        }
        Csr {
            nrows: self.nrows * p,
            ncols: self.ncols * q,
            indptr,
            indices,
            values,
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).sum()
    }

    /// Drops stored entries with modulus at or below `atol`.
    pub fn tidyup(&self, atol: f64) -> Csr {
        let trip = self.iter().filter(|&(_, _, v)| v.norm() > atol).collect();
        Csr::from_triplets(self.nrows, self.ncols, trip)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}
