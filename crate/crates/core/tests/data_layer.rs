use openq_core::data::{Data, Dense, Format};
use openq_core::C64;
use proptest::prelude::*;

type Mat = Vec<Vec<C64>>;

fn to_rows(d: &Dense) -> Mat {
    (0..d.nrows()).map(|i| (0..d.ncols()).map(|j| d.get(i, j)).collect()).collect()
}

fn ref_add(a: &Mat, b: &Mat, s: C64) -> Mat {
    a.iter().zip(b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + s * y).collect()).collect()
}

fn ref_matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..m).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect())
        .collect()
}

fn ref_kron(a: &Mat, b: &Mat) -> Mat {
    let (p, q) = (b.len(), b[0].len());
    (0..a.len() * p)
        .map(|i| (0..a[0].len() * q).map(|j| a[i / p][j / q] * b[i % p][j % q]).collect())
        .collect()
}

fn max_diff(a: &Mat, d: &Dense) -> f64 {
    let b = to_rows(d);
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn format() -> impl Strategy<Value = Format> {
    prop_oneof![Just(Format::Dense), Just(Format::Csr), Just(Format::Dia)]
}

/// Sparse-ish random matrix: each entry is zero with probability one half.
fn matrix(r: usize, c: usize) -> impl Strategy<Value = Dense> {
    proptest::collection::vec((any::<bool>(), -1.0f64..1.0, -1.0f64..1.0), r * c).prop_map(move |v| {
        let data = v
            .into_iter()
            .map(|(keep, re, im)| if keep { C64::new(re, im) } else { C64::new(0.0, 0.0) })
            .collect();
        Dense::from_col_major(r, c, data)
    })
}

fn pair_same_shape() -> impl Strategy<Value = (Dense, Dense)> {
    (1usize..=16, 1usize..=16).prop_flat_map(|(r, c)| (matrix(r, c), matrix(r, c)))
}

fn pair_chain() -> impl Strategy<Value = (Dense, Dense)> {
    (1usize..=16, 1usize..=16, 1usize..=16).prop_flat_map(|(r, k, c)| (matrix(r, k), matrix(k, c)))
}

fn pair_small() -> impl Strategy<Value = (Dense, Dense)> {
    (1usize..=4, 1usize..=4, 1usize..=4, 1usize..=4).prop_flat_map(|(a, b, c, d)| (matrix(a, b), matrix(c, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn add_matches_reference((a, b) in pair_same_shape(), fa in format(), fb in format(), s in -2.0f64..2.0) {
        let x = Data::Dense(a.clone()).convert(fa);
        let y = Data::Dense(b.clone()).convert(fb);
        let z = x.add(&y, C64::new(s, 0.5)).unwrap();
        prop_assert_eq!(z.format(), fa.promote(fb));
        prop_assert!(max_diff(&ref_add(&to_rows(&a), &to_rows(&b), C64::new(s, 0.5)), &z.to_dense()) < 1e-13);
    }

    #[test]
    fn matmul_matches_reference((a, b) in pair_chain(), fa in format(), fb in format()) {
        let z = Data::Dense(a.clone()).convert(fa).matmul(&Data::Dense(b.clone()).convert(fb)).unwrap();
        prop_assert!(max_diff(&ref_matmul(&to_rows(&a), &to_rows(&b)), &z.to_dense()) < 1e-13);
    }

    #[test]
    fn kron_matches_reference((a, b) in pair_small(), fa in format(), fb in format()) {
        let z = Data::Dense(a.clone()).convert(fa).kron(&Data::Dense(b.clone()).convert(fb));
        prop_assert!(max_diff(&ref_kron(&to_rows(&a), &to_rows(&b)), &z.to_dense()) < 1e-13);
    }

    #[test]
    fn conversions_round_trip(a in (1usize..=16, 1usize..=16).prop_flat_map(|(r, c)| matrix(r, c)), f in format(), g in format()) {
        let d = Data::Dense(a.clone()).convert(f).convert(g);
        prop_assert_eq!(d.format(), g);
        prop_assert_eq!(d.to_dense(), a);
    }

    #[test]
    fn adjoint_is_an_involution(a in (1usize..=16, 1usize..=16).prop_flat_map(|(r, c)| matrix(r, c)), f in format()) {
        let d = Data::Dense(a.clone()).convert(f);
        prop_assert_eq!(d.adjoint().adjoint().to_dense(), a.clone());
        prop_assert_eq!(d.transpose().to_dense(), a.transpose());
    }

    #[test]
    fn gemv_matches_matmul((a, b) in (1usize..=16, 1usize..=16).prop_flat_map(|(r, c)| (matrix(r, c), matrix(c, 1))), f in format()) {
        let mut y = vec![C64::new(0.0, 0.0); a.nrows()];
        Data::Dense(a.clone()).convert(f).gemv_add(C64::new(1.0, 0.0), b.as_slice(), &mut y);
        let want = ref_matmul(&to_rows(&a), &to_rows(&b));
        for (i, yi) in y.iter().enumerate() {
            prop_assert!((yi - want[i][0]).norm() < 1e-13);
        }
    }
}

#[test]
fn shape_mismatch_is_an_error() {
    let a = Data::zeros(2, 3, Format::Csr);
    let b = Data::zeros(2, 3, Format::Dia);
    assert!(a.matmul(&b).is_err());
    assert!(a.add(&Data::zeros(3, 2, Format::Dense), C64::new(1.0, 0.0)).is_err());
}
