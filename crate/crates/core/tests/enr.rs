use openq_core::enr::{enr_destroy, enr_fock, enr_identity, EnrSpace};
use openq_core::qobj::{tensor, Dims};
use openq_core::C64;
use proptest::prelude::*;

fn brute_force(dims: &[usize], n_exc: usize) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    let mut out = Vec::new();
    for mut code in 0..total {
        let mut occ = vec![0; dims.len()];
        for (k, &d) in dims.iter().enumerate().rev() {
            occ[k] = code % d;
            code /= d;
        }
        if occ.iter().sum::<usize>() <= n_exc {
            out.push(occ);
        }
    }
    out
}

#[test]
fn three_qutrits_two_excitations() {
    let s = EnrSpace::new(&[3, 3, 3], 2).unwrap();
    let mut want = brute_force(&[3, 3, 3], 2);
    assert_eq!(s.size(), want.len());
    let mut got = s.states().to_vec();
    got.sort();
    want.sort();
    assert_eq!(got, want);
}

proptest! {
    #[test]
    fn enumeration_is_a_graded_bijection(dims in proptest::collection::vec(1usize..5, 1..4), n_exc in 0usize..6) {
        let s = EnrSpace::new(&dims, n_exc).unwrap();
        prop_assert_eq!(s.size(), brute_force(&dims, n_exc).len());
        prop_assert!(s.state(0).iter().all(|&x| x == 0));
        for (i, st) in s.states().iter().enumerate() {
            prop_assert_eq!(s.index_of(st), Some(i));
            prop_assert!(st.iter().sum::<usize>() <= n_exc);
            prop_assert!(st.iter().zip(&dims).all(|(n, d)| n < d));
        }
        let levels: Vec<usize> = s.states().iter().map(|st| st.iter().sum()).collect();
        prop_assert!(levels.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn number_operators_are_diagonal_occupations() {
    let dims = [3, 4];
    let s = EnrSpace::new(&dims, 3).unwrap();
    for (k, a) in enr_destroy(&dims, 3).unwrap().iter().enumerate() {
        let n = a.dag().matmul(a).unwrap().full();
        for i in 0..s.size() {
            for j in 0..s.size() {
                let want = if i == j { s.state(i)[k] as f64 } else { 0.0 };
                assert!((n.get(i, j) - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }
}

#[test]
fn vacuum_is_annihilated() {
    let dims = [2, 3, 2];
    let vac = enr_fock(&dims, 2, &[0, 0, 0]).unwrap();
    for a in enr_destroy(&dims, 2).unwrap() {
        assert!(a.matmul(&vac).unwrap().norm() < 1e-15);
    }
}

#[test]
fn ladder_operators_of_different_modes_do_not_commute() {
    // on span{|00>, |01>, |10>}: [a1, a2†] = -|01><10|
    let a = enr_destroy(&[2, 2], 1).unwrap();
    let lhs = a[0].matmul(&a[1].dag()).unwrap();
    let rhs = a[1].dag().matmul(&a[0]).unwrap();
    let comm = lhs.try_sub(&rhs).unwrap().full();
    let mut want = [[0.0; 3]; 3];
    want[1][2] = -1.0;
    for i in 0..3 {
        for j in 0..3 {
            assert!((comm.get(i, j) - C64::new(want[i][j], 0.0)).norm() < 1e-15, "{i}{j}");
        }
    }
}

#[test]
fn identity_and_dims() {
    let id = enr_identity(&[2, 5], 2).unwrap();
    assert_eq!(id.tr().re, EnrSpace::new(&[2, 5], 2).unwrap().size() as f64);
    assert!(id.dims().is_enr());
    assert_ne!(id.dims(), &Dims::oper(&[2, 5]));
}

#[test]
fn tensor_and_ptrace_reject_restricted_spaces() {
    let a = enr_destroy(&[2, 2], 1).unwrap();
    assert!(tensor(&[a[0].clone(), a[1].clone()]).is_err());
    let psi = enr_fock(&[2, 2], 1, &[0, 1]).unwrap();
    assert!(psi.proj().unwrap().ptrace(&[0]).is_err());
}
