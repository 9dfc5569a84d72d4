//! Excitation-number-restricted composite spaces.

use std::collections::HashMap;
use std::sync::Arc;

use crate::data::{Csr, Data, Dense};
use crate::error::{Error, Result};
use crate::qobj::{Dims, Qobj, Space};
use crate::C64;

/// Composite space restricted to states with at most `n_exc` total excitations.
///
/// States are enumerated in graded lexicographic order: by total excitation number,
/// then lexicographically, so index 0 is always the all-zero tuple.
#[derive(Clone, Debug)]
pub struct EnrSpace {
    dims: Vec<usize>,
    n_exc: usize,
    states: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl PartialEq for EnrSpace {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.n_exc == other.n_exc
    }
}

impl Eq for EnrSpace {}

fn enumerate(dims: &[usize], budget: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() == dims.len() {
        out.push(prefix.clone());
        return;
    }
    let d = dims[prefix.len()];
    for n in 0..d.min(budget + 1) {
        prefix.push(n);
        enumerate(dims, budget - n, prefix, out);
        prefix.pop();
    }
}

impl EnrSpace {
    pub fn new(dims: &[usize], n_exc: usize) -> Result<EnrSpace> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "subsystem dimensions must be positive, got {dims:?}"
            )));
        }
        let mut states = Vec::new();
        enumerate(dims, n_exc, &mut Vec::with_capacity(dims.len()), &mut states);
        states.sort_by(|a, b| {
            let (sa, sb): (usize, usize) = (a.iter().sum(), b.iter().sum());
            sa.cmp(&sb).then_with(|| a.cmp(b))
        });
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(EnrSpace {
            dims: dims.to_vec(),
            n_exc,
            states,
            index,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_exc(&self) -> usize {
        self.n_exc
    }

    pub fn size(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &[usize] {
        &self.states[idx]
    }

    pub fn index_of(&self, occupations: &[usize]) -> Option<usize> {
        self.index.get(occupations).copied()
    }
}

fn enr_dims(space: &Arc<EnrSpace>, ket: bool) -> Dims {
    let s = Space::Enr(space.clone());
    if ket {
        Dims::new(s, Space::scalar())
    } else {
        Dims::new(s.clone(), s)
    }
}

/// Builds the restricted space; a thin wrapper kept for symmetry with the factories.
pub fn enr_space(dims: &[usize], n_exc: usize) -> Result<Arc<EnrSpace>> {
    Ok(Arc::new(EnrSpace::new(dims, n_exc)?))
}

/// Annihilation operators for every subsystem on the restricted space.
pub fn enr_destroy(dims: &[usize], n_exc: usize) -> Result<Vec<Qobj>> {
    let space = enr_space(dims, n_exc)?;
    let n = space.size();
    let mut ops = Vec::with_capacity(dims.len());
    for sub in 0..dims.len() {
        let mut trip = Vec::new();
        for (col, st) in space.states().iter().enumerate() {
            let k = st[sub];
            if k == 0 {
                continue;
            }
            let mut lowered = st.clone();
            lowered[sub] -= 1;
            if let Some(row) = space.index_of(&lowered) {
                trip.push((row, col, C64::new((k as f64).sqrt(), 0.0)));
            }
        }
        let data = Data::Csr(Csr::from_triplets(n, n, trip));
        ops.push(Qobj::new(data, Some(enr_dims(&space, false)))?);
    }
    Ok(ops)
}

/// Fock state of the restricted space with the given occupations.
pub fn enr_fock(dims: &[usize], n_exc: usize, occupations: &[usize]) -> Result<Qobj> {
    let space = enr_space(dims, n_exc)?;
    if occupations.len() != dims.len() {
        return Err(Error::Dimension(format!(
            "{} occupations given for {} subsystems",
            occupations.len(),
            dims.len()
        )));
    }
    let idx = space.index_of(occupations).ok_or_else(|| {
        Error::Range(format!(
            "occupations {occupations:?} are outside the space with dims {dims:?} and at most \
             {n_exc} excitations"
        ))
    })?;
    let mut v = vec![C64::new(0.0, 0.0); space.size()];
    v[idx] = C64::new(1.0, 0.0);
    Qobj::new(Data::Dense(Dense::column_vector(&v)), Some(enr_dims(&space, true)))
}

pub fn enr_identity(dims: &[usize], n_exc: usize) -> Result<Qobj> {
    let space = enr_space(dims, n_exc)?;
    let n = space.size();
    Qobj::new(Data::Csr(Csr::identity(n)), Some(enr_dims(&space, false)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_qubits_one_excitation() {
        let s = EnrSpace::new(&[2, 2], 1).unwrap();
        assert_eq!(s.states(), &[vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(EnrSpace::new(&[4], 3).unwrap().size(), 4);
    }

    #[test]
    fn first_destroy_is_single_transition() {
        let a = enr_destroy(&[2, 2], 1).unwrap();
        let d = a[0].data().to_dense();
        // |0,0><1,0| : row 0, column 2
        for i in 0..3 {
            for j in 0..3 {
                let expect = if (i, j) == (0, 2) { 1.0 } else { 0.0 };
                assert_eq!(d.get(i, j), C64::new(expect, 0.0));
            }
        }
    }

    #[test]
    fn fock_out_of_range() {
        assert!(matches!(enr_fock(&[2, 2], 1, &[1, 1]), Err(Error::Range(_))));
        let k = enr_fock(&[2, 2], 1, &[0, 1]).unwrap();
        assert_eq!(k.data().get(1, 0), C64::new(1.0, 0.0));
        assert_eq!(enr_identity(&[3, 3], 2).unwrap().tr().re, 6.0);
    }
}
