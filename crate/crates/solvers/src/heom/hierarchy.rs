//! Auxiliary density operator indexing and the hierarchy generator.

use std::collections::HashMap;

use openq_core::data::{Csr, Data, Format};
use openq_core::qobj::{spost, spre};
use openq_core::{Error, Qobj, Result, C64};

use super::exponents::MergedExponent;

/// Multi-indices `n` with `Σ n_k ≤ N_c` in graded lexicographic order.
#[derive(Clone, Debug)]
pub struct AdoIndexSet {
    cutoff: usize,
    n_exp: usize,
    labels: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    /// `up[i][k]`: index of `n + e_k`, if within the cutoff.
    up: Vec<Vec<Option<usize>>>,
    /// `down[i][k]`: index of `n − e_k`, if `n_k > 0`.
    down: Vec<Vec<Option<usize>>>,
}

/// Guards against hierarchies that could not be stored anyway.
const MAX_ADOS: u128 = 50_000_000;

/// `C(n, k)` for `k ≤ n`, saturating on overflow.
pub fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.checked_mul(n - i).map_or(u128::MAX, |x| x / (i + 1)))
}

fn compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in 0..=total {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

impl AdoIndexSet {
    pub fn new(n_exp: usize, cutoff: usize) -> Result<AdoIndexSet> {
        let count = binomial((cutoff + n_exp) as u128, cutoff as u128);
        if count > MAX_ADOS {
            return Err(Error::InvalidArgument(format!(
                "hierarchy with {n_exp} exponents and cutoff {cutoff} has {count} ADOs"
            )));
        }
        let mut labels = Vec::with_capacity(count as usize);
        if n_exp == 0 {
            labels.push(Vec::new());
        } else {
            for level in 0..=cutoff as u32 {
                compositions(level, n_exp, &mut Vec::with_capacity(n_exp), &mut labels);
            }
        }
        let index: HashMap<Vec<u32>, usize> = labels.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
        let mut up = Vec::with_capacity(labels.len());
        let mut down = Vec::with_capacity(labels.len());
        for l in &labels {
            let level: u32 = l.iter().sum();
            let mut u = Vec::with_capacity(n_exp);
            let mut d = Vec::with_capacity(n_exp);
            let mut m = l.clone();
            for k in 0..n_exp {
                u.push(if (level as usize) < cutoff {
                    m[k] += 1;
                    let j = index[&m];
                    m[k] -= 1;
                    Some(j)
                } else {
                    None
                });
                d.push(if m[k] > 0 {
                    m[k] -= 1;
                    let j = index[&m];
                    m[k] += 1;
                    Some(j)
                } else {
                    None
                });
            }
            up.push(u);
            down.push(d);
        }
        Ok(AdoIndexSet {
            cutoff,
            n_exp,
            labels,
            index,
            up,
            down,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn n_exponents(&self) -> usize {
        self.n_exp
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> &[u32] {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &[u32]) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn up(&self, i: usize, k: usize) -> Option<usize> {
        self.up[i][k]
    }

    pub fn down(&self, i: usize, k: usize) -> Option<usize> {
        self.down[i][k]
    }
}

/// One exponent of the hierarchy together with the index of its coupling operator.
#[derive(Clone, Copy, Debug)]
pub struct HierarchyExponent {
    pub exp: MergedExponent,
    pub coupling: usize,
}

fn push_block(trip: &mut Vec<(usize, usize, C64)>, m: &Csr, row: usize, col: usize, s: C64) {
    if s == C64::new(0.0, 0.0) {
        return;
    }
    for (i, j, v) in m.iter() {
        trip.push((row + i, col + j, v * s));
    }
}

/// Generator over the stacked ADO vector (block `i` holds `vec(ρ^{n_i})`):
///
/// `dρ^n/dt = −i[H, ρ^n] − Σ n_k ν_k ρ^n − i Σ_k [Q_k, ρ^{n+e_k}]
///            − i Σ_k n_k c_k^R [Q_k, ρ^{n−e_k}] + Σ_k n_k c_k^I {Q_k, ρ^{n−e_k}}`
pub fn hierarchy_build(
    h: &Qobj,
    couplings: &[Qobj],
    exps: &[HierarchyExponent],
    cutoff: usize,
) -> Result<(Csr, AdoIndexSet)> {
    if !h.is_oper() || !h.is_square() {
        return Err(Error::Dimension(format!("Hamiltonian must be a square operator, got {}", h.dims())));
    }
    for q in couplings {
        if q.dims() != h.dims() {
            return Err(Error::Dimension(format!(
                "coupling operator dims {} do not match {}",
                q.dims(),
                h.dims()
            )));
        }
        let scale = q.data().max_abs().max(1.0);
        if q.data().hermitian_defect() > 1e-12 * scale {
            return Err(Error::Precondition("coupling operator must be Hermitian".into()));
        }
    }
    for e in exps {
        if e.coupling >= couplings.len() {
            return Err(Error::InvalidArgument(format!("no coupling operator {}", e.coupling)));
        }
    }
    let ados = AdoIndexSet::new(exps.len(), cutoff)?;
    let d2 = h.shape().0 * h.shape().0;
    let i = C64::new(0.0, 1.0);
    let csr = |q: Qobj| q.data().convert(Format::Csr).to_csr();
    let lh = csr(spre(h)?.try_sub(&spost(h)?)?.scale(-i));
    let mut comm = Vec::with_capacity(couplings.len());
    let mut anti = Vec::with_capacity(couplings.len());
    for q in couplings {
        let (pre, post) = (spre(q)?, spost(q)?);
        comm.push(csr(pre.try_sub(&post)?));
        anti.push(csr(pre.try_add(&post)?));
    }
    let mut trip = Vec::new();
    for a in 0..ados.len() {
        let n = ados.label(a);
        let row = a * d2;
        push_block(&mut trip, &lh, row, row, C64::new(1.0, 0.0));
        let damp: C64 = n.iter().zip(exps).map(|(&nk, e)| e.exp.rate * nk as f64).sum();
        if damp != C64::new(0.0, 0.0) {
            for r in 0..d2 {
                trip.push((row + r, row + r, -damp));
            }
        }
        for (k, e) in exps.iter().enumerate() {
            let q = e.coupling;
            if let Some(b) = ados.down(a, k) {
                let nk = n[k] as f64;
                push_block(&mut trip, &comm[q], row, b * d2, -i * e.exp.coeff_re * nk);
                push_block(&mut trip, &anti[q], row, b * d2, e.exp.coeff_im * nk);
            }
            if let Some(b) = ados.up(a, k) {
                push_block(&mut trip, &comm[q], row, b * d2, -i);
            }
        }
    }
    let dim = ados.len() * d2;
    Ok((Csr::from_triplets(dim, dim, trip), ados))
}

/// Wraps the generator as a flat operator for the integrators.
pub(crate) fn as_qobj(gen: Csr) -> Result<Qobj> {
    Qobj::new(Data::Csr(gen), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heom::exponents::{Exponent, ExponentSet};
    use openq_core::qobj::{sigmax, sigmaz};
    use proptest::prelude::*;

    #[test]
    fn graded_order_and_count() {
        let s = AdoIndexSet::new(2, 2).unwrap();
        let labels: Vec<&[u32]> = (0..s.len()).map(|i| s.label(i)).collect();
        assert_eq!(labels, vec![&[0, 0][..], &[0, 1], &[1, 0], &[0, 2], &[1, 1], &[2, 0]]);
        assert_eq!(AdoIndexSet::new(0, 5).unwrap().len(), 1);
    }

    proptest! {
        #[test]
        fn neighbor_maps_are_inverse(n in 0usize..5, cut in 0usize..5) {
            let s = AdoIndexSet::new(n, cut).unwrap();
            prop_assert_eq!(s.len() as u128, binomial((n + cut) as u128, cut as u128));
            prop_assert!(s.label(0).iter().all(|&x| x == 0));
            for i in 0..s.len() {
                for k in 0..n {
                    if let Some(j) = s.up(i, k) {
                        prop_assert_eq!(s.down(j, k), Some(i));
                    }
                    if let Some(j) = s.down(i, k) {
                        prop_assert_eq!(s.up(j, k), Some(i));
                    }
                }
            }
        }
    }

    fn one_exp() -> Vec<HierarchyExponent> {
        let set = ExponentSet::new(vec![Exponent::real(0.3, 1.0)], vec![Exponent::real(-0.1, 1.0)]).unwrap();
        set.merged().into_iter().map(|exp| HierarchyExponent { exp, coupling: 0 }).collect()
    }

    #[test]
    fn zero_cutoff_is_the_bare_commutator() {
        let h = sigmax().scale_real(0.5);
        let (g, ados) = hierarchy_build(&h, &[sigmaz()], &one_exp(), 0).unwrap();
        assert_eq!(ados.len(), 1);
        let want = spre(&h).unwrap().try_sub(&spost(&h).unwrap()).unwrap().scale(C64::new(0.0, -1.0));
        assert!(g.to_dense().add_scaled(&want.full(), C64::new(-1.0, 0.0)).max_abs() < 1e-15);
    }

    #[test]
    fn stack_dimension() {
        let exps: Vec<HierarchyExponent> = one_exp().into_iter().cycle().take(3).collect();
        let (g, ados) = hierarchy_build(&sigmax(), &[sigmaz()], &exps, 4).unwrap();
        assert_eq!(ados.len(), 35);
        assert_eq!(g.nrows(), 4 * 35);
    }

    #[test]
    fn no_level_zero_dissipation_from_a_product_state() {
        // only the up-coupling reaches level 0, and it acts on empty ADOs
        let h = sigmax().scale_real(0.5);
        let (g, ados) = hierarchy_build(&h, &[sigmaz()], &one_exp(), 3).unwrap();
        let mut y = vec![C64::new(0.0, 0.0); g.nrows()];
        y[0] = C64::new(0.7, 0.0);
        y[3] = C64::new(0.3, 0.0);
        y[1] = C64::new(0.1, 0.2);
        y[2] = C64::new(0.1, -0.2);
        let mut dy = vec![C64::new(0.0, 0.0); g.nrows()];
        g.gemv_add(C64::new(1.0, 0.0), &y, &mut dy);
        let mut bare = vec![C64::new(0.0, 0.0); 4];
        let (g0, _) = hierarchy_build(&h, &[sigmaz()], &one_exp(), 0).unwrap();
        g0.gemv_add(C64::new(1.0, 0.0), &y[..4], &mut bare);
        for r in 0..4 {
            assert!((dy[r] - bare[r]).norm() < 1e-15);
        }
        assert!(ados.len() > 1);
    }

    #[test]
    fn rejects_non_hermitian_coupling() {
        let q = openq_core::qobj::sigmam();
        assert!(hierarchy_build(&sigmax(), &[q], &one_exp(), 1).is_err());
    }
}
