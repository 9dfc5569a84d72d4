use crate::C64;

use super::dense::Dense;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Diagonal storage.
///
/// Diagonal `k` (column minus row) is stored as a row of length `min(nrows, ncols)`;
/// position `p` holds the entry at row `p + max(0, -k)`, column `row + k`. Slots that
/// fall outside the matrix are kept at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Dia {
    nrows: usize,
    ncols: usize,
    offsets: Vec<isize>,
    diags: Vec<Vec<C64>>,
}

impl Dia {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Dia {
            nrows,
            ncols,
            offsets: Vec::new(),
            diags: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Dia {
            nrows: n,
            ncols: n,
            offsets: vec![0],
            diags: vec![vec![C64::new(1.0, 0.0); n]],
        }
    }

    #[inline]
    fn width(&self) -> usize {
        self.nrows.min(self.ncols)
    }

    #[inline]
    fn pos_to_rc(&self, k: isize, p: usize) -> Option<(usize, usize)> {
        let r = p as isize + (-k).max(0);
        let c = r + k;
        if r < 0 || c < 0 || r as usize >= self.nrows || c as usize >= self.ncols {
            None
        } else {
            Some((r as usize, c as usize))
        }
    }

    /// Builds from `(offset, values)` pairs; offsets must be unique. Values beyond the
    /// matrix boundary are ignored.
    pub fn from_diagonals(nrows: usize, ncols: usize, mut diags: Vec<(isize, Vec<C64>)>) -> Self {
        diags.sort_by_key(|d| d.0);
        let w = nrows.min(ncols);
        let mut out = Dia::zeros(nrows, ncols);
        for (k, mut v) in diags {
            assert!(
                out.offsets.last() != Some(&k),
                "duplicate diagonal offset {k}"
            );
            v.resize(w, ZERO);
            out.offsets.push(k);
            out.diags.push(v);
        }
        for i in 0..out.offsets.len() {
            let k = out.offsets[i];
            for p in 0..w {
                if out.pos_to_rc(k, p).is_none() {
                    out.diags[i][p] = ZERO;
                }
            }
        }
        out
    }

    pub fn from_dense(d: &Dense) -> Self {
        let (m, n) = (d.nrows(), d.ncols());
        let w = m.min(n);
        let mut out = Dia::zeros(m, n);
        if w == 0 {
            return out;
        }
        for k in -(m as isize - 1)..=(n as isize - 1) {
            let mut row = vec![ZERO; w];
            let mut any = false;
            for (p, slot) in row.iter_mut().enumerate() {
                if let Some((r, c)) = out.pos_to_rc(k, p) {
                    let v = d.get(r, c);
                    if v != ZERO {
                        *slot = v;
                        any = true;
                    }
                }
            }
            if any {
                out.offsets.push(k);
                out.diags.push(row);
            }
        }
        out
    }

    pub fn to_dense(&self) -> Dense {
        let mut d = Dense::zeros(self.nrows, self.ncols);
        for (i, &k) in self.offsets.iter().enumerate() {
            for (p, &v) in self.diags[i].iter().enumerate() {
                if let Some((r, c)) = self.pos_to_rc(k, p) {
                    d.set(r, c, v);
                }
            }
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

    pub fn offsets(&self) -> &[isize] {
        &self.offsets
    }

    pub fn diagonal(&self, k: isize) -> Option<&[C64]> {
        self.offsets
            .binary_search(&k)
            .ok()
            .map(|i| self.diags[i].as_slice())
    }

    pub fn num_diags(&self) -> usize {
        self.offsets.len()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let k = j as isize - i as isize;
        match self.offsets.binary_search(&k) {
            Ok(idx) => self.diags[idx][i - (-k).max(0) as usize],
            Err(_) => ZERO,
        }
    }

    /// `y += alpha * A x`
    pub fn gemv_add(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        for (idx, &k) in self.offsets.iter().enumerate() {
            let d = &self.diags[idx];
            let r0 = (-k).max(0) as usize;
            let c0 = k.max(0) as usize;
            let len = (self.nrows - r0).min(self.ncols - c0).min(d.len());
            for p in 0..len {
                y[r0 + p] += alpha * d[p] * x[c0 + p];
            }
        }
    }

    fn map_values(&self, f: impl Fn(C64) -> C64) -> Dia {
        Dia {
            nrows: self.nrows,
            ncols: self.ncols,
            offsets: self.offsets.clone(),
            diags: self
                .diags
                .iter()
                .map(|d| d.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Dia {
        self.map_values(|v| v * s)
    }

    pub fn conjugate(&self) -> Dia {
        self.map_values(|v| v.conj())
    }

    pub fn transpose(&self) -> Dia {
        let w = self.width();
        let mut diags = Vec::with_capacity(self.offsets.len());
        for (idx, &k) in self.offsets.iter().enumerate() {
            let mut row = vec![ZERO; w];
            for p in 0..w {
                // entry (r, c) moves to (c, r) on diagonal -k
                if let Some((_, c)) = self.pos_to_rc(k, p) {
                    row[c - k.max(0) as usize] = self.diags[idx][p];
                }
            }
            diags.push((-k, row));
        }
        Dia::from_diagonals(self.ncols, self.nrows, diags)
    }

    pub fn adjoint(&self) -> Dia {
        self.transpose().conjugate()
    }

    /// `self + s * other`, merging offsets.
    pub fn add_scaled(&self, other: &Dia, s: C64) -> Dia {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out: Vec<(isize, Vec<C64>)> = Vec::new();
        let (mut a, mut b) = (0, 0);
        while a < self.offsets.len() || b < other.offsets.len() {
            let ka = self.offsets.get(a).copied().unwrap_or(isize::MAX);
            let kb = other.offsets.get(b).copied().unwrap_or(isize::MAX);
            if ka == kb {
                let row = self.diags[a]
                    .iter()
                    .zip(&other.diags[b])
                    .map(|(&x, &y)| x + s * y)
                    .collect();
                out.push((ka, row));
                a += 1;
                b += 1;
            } else if ka < kb {
                out.push((ka, self.diags[a].clone()));
                a += 1;
            } else {
                out.push((kb, other.diags[b].iter().map(|&y| s * y).collect()));
                b += 1;
            }
        }
        out.retain(|(_, d)| d.iter().any(|&v| v != ZERO));
        Dia::from_diagonals(self.nrows, self.ncols, out)
    }

    /// Diagonal-by-diagonal product: offsets combine additively.
    pub fn matmul(&self, other: &Dia) -> Dia {
        assert_eq!(self.ncols, other.nrows);
        let (m, n) = (self.nrows, other.ncols);
        let w = m.min(n);
        let mut acc: std::collections::BTreeMap<isize, Vec<C64>> = Default::default();
        for (ia, &ka) in self.offsets.iter().enumerate() {
            for (ib, &kb) in other.offsets.iter().enumerate() {
                let k = ka + kb;
                if k <= -(m as isize) || k >= n as isize {
                    continue;
                }
                let row = acc.entry(k).or_insert_with(|| vec![ZERO; w]);
                for (p, &va) in self.diags[ia].iter().enumerate() {
                    if va == ZERO {
                        continue;
                    }
                    let Some((r, mid)) = self.pos_to_rc(ka, p) else {
                        continue;
                    };
                    let c = mid as isize + kb;
                    if c < 0 || c as usize >= n {
                        continue;
                    }
                    let q = mid - (-kb).max(0) as usize;
                    let vb = other.diags[ib][q];
                    let dst = r - (-k).max(0) as usize;
                    row[dst] += va * vb;
                }
            }
        }
        let diags = acc
            .into_iter()
            .filter(|(_, d)| d.iter().any(|&v| v != ZERO))
            .collect();
        Dia::from_diagonals(m, n, diags)
    }

    pub fn kron(&self, other: &Dia) -> Dia {
        // Kronecker products scatter diagonals; go through dense-free triplet assembly.
        let (p, q) = (other.nrows, other.ncols);
        let (m, n) = (self.nrows * p, self.ncols * q);
        let w = m.min(n);
        let mut acc: std::collections::BTreeMap<isize, Vec<C64>> = Default::default();
        for (ia, &ka) in self.offsets.iter().enumerate() {
            for (pa, &va) in self.diags[ia].iter().enumerate() {
                if va == ZERO {
                    continue;
                }
                let Some((i, j)) = self.pos_to_rc(ka, pa) else {
                    continue;
                };
                for (ib, &kb) in other.offsets.iter().enumerate() {
                    for (pb, &vb) in other.diags[ib].iter().enumerate() {
                        if vb == ZERO {
                            continue;
                        }
                        let Some((k, l)) = other.pos_to_rc(kb, pb) else {
                            continue;
                        };
                        let (r, c) = (i * p + k, j * q + l);
                        let off = c as isize - r as isize;
                        let row = acc.entry(off).or_insert_with(|| vec![ZERO; w]);
                        row[r - (-off).max(0) as usize] = va * vb;
                    }
                }
            }
        }
        Dia::from_diagonals(m, n, acc.into_iter().collect())
    }

    pub fn trace(&self) -> C64 {
        self.diagonal(0)
            .map(|d| d.iter().sum())
            .unwrap_or(ZERO)
    }

    pub fn tidyup(&self, atol: f64) -> Dia {
        let diags = self
            .offsets
            .iter()
            .zip(&self.diags)
            .filter_map(|(&k, d)| {
                let row: Vec<C64> = d
                    .iter()
                    .map(|&v| if v.norm() > atol { v } else { ZERO })
                    .collect();
                row.iter().any(|&v| v != ZERO).then_some((k, row))
            })
            .collect();
        Dia::from_diagonals(self.nrows, self.ncols, diags)
    }

    pub fn max_abs(&self) -> f64 {
        self.diags
            .iter()
            .flatten()
            .fold(0.0, |m, z| m.max(z.norm()))
    }
}
