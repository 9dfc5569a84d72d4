use crate::C64;

/// Dense matrix in column-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    nrows: usize,
    ncols: usize,
    data: Vec<C64>,
}

impl Dense {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Dense {
            nrows,
            ncols,
            data: vec![C64::new(0.0, 0.0); nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i + i * n] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Wraps a column-major buffer. Panics if the length does not match.
    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), nrows * ncols, "buffer length does not match shape");
        Dense { nrows, ncols, data }
    }

    /// Builds from nested rows, the natural way to write small literals.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.data[i + j * nrows] = v;
            }
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                data.push(f(i, j));
            }
        }
        Dense { nrows, ncols, data }
    }

    pub fn column_vector(v: &[C64]) -> Self {
        Dense {
            nrows: v.len(),
            ncols: 1,
            data: v.to_vec(),
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i + j * self.nrows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i + j * self.nrows] = v;
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        &mut self.data[i + j * self.nrows]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[C64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [C64] {
        let n = self.nrows;
        &mut self.data[j * n..(j + 1) * n]
    }

    pub fn matmul(&self, other: &Dense) -> Dense {
        assert_eq!(self.ncols, other.nrows);
        let mut out = Dense::zeros(self.nrows, other.ncols);
        for j in 0..other.ncols {
            let dst = j * self.nrows;
            for k in 0..self.ncols {
                let b = other.data[k + j * other.nrows];
                if b == C64::new(0.0, 0.0) {
                    continue;
                }
                let col = &self.data[k * self.nrows..(k + 1) * self.nrows];
                for (o, &a) in out.data[dst..dst + self.nrows].iter_mut().zip(col) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `y += alpha * A x`
    pub fn gemv_add(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        for (k, &xk) in x.iter().enumerate() {
            let s = alpha * xk;
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            let col = &self.data[k * self.nrows..(k + 1) * self.nrows];
            for (yi, &a) in y.iter_mut().zip(col) {
                *yi += a * s;
            }
        }
    }

    pub fn adjoint(&self) -> Dense {
        Dense::from_fn(self.ncols, self.nrows, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> Dense {
        Dense::from_fn(self.ncols, self.nrows, |i, j| self.get(j, i))
    }

    pub fn conjugate(&self) -> Dense {
        Dense {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Dense {
        Dense {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &Dense, s: C64) -> Dense {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Dense {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        }
    }

    pub fn kron(&self, other: &Dense) -> Dense {
        let (m, n) = (self.nrows, self.ncols);
        let (p, q) = (other.nrows, other.ncols);
        let mut out = Dense::zeros(m * p, n * q);
        for j in 0..n {
            for i in 0..m {
                let a = self.get(i, j);
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for l in 0..q {
                    for k in 0..p {
                        out.set(i * p + k, j * q + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm1(&self) -> f64 {
        (0..self.ncols)
            .map(|j| self.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}
