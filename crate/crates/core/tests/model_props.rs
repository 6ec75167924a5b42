//! Subspace structure, coefficient matrices and block decomposition.

mod common;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, Matrix2};
use proptest::prelude::*;
use qspe_learn::model::*;
use qspe_learn::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn kron_all(ms: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    ms.iter().skip(1).fold(ms[0].clone(), |acc, m| acc.kronecker(m))
}

fn paulis() -> [DMatrix<Complex64>; 4] {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    [
        DMatrix::identity(2, 2),
        DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        DMatrix::from_row_slice(2, 2, &[o, c(0.0, -1.0), c(0.0, 1.0), o]),
        DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
    ]
}

proptest! {
    #[test]
    fn subspaces_partition_hilbert_space(n in 2usize..9, drive_seed in any::<usize>()) {
        let drive = drive_seed % n;
        let spec = HamiltonianSpec::from_upper(n, 1.0, &vec![0.5; n * (n - 1) / 2]).unwrap();
        let subs = enumerate_subspaces(&spec, drive).unwrap();
        prop_assert_eq!(subs.len(), 1 << (n - 1));
        let mut seen = BTreeSet::new();
        for p in &subs {
            prop_assert_eq!(p.v_m ^ p.v_n, unit(n, drive));
            prop_assert!(!bit(p.v_m, n, drive));
            prop_assert!(seen.insert(p.v_m));
            prop_assert!(seen.insert(p.v_n));
        }
        prop_assert_eq!(seen.len(), 1 << n);
    }

    #[test]
    fn lambda_is_parity_of_bits(n in 2usize..9, state_seed in any::<u64>(), drive_seed in any::<usize>()) {
        let drive = drive_seed % n;
        let v_m = (state_seed % (1 << n)) & !unit(n, drive);
        let p = SubspacePair::new(n, drive, v_m).unwrap();
        for (k, (a, b)) in pairs(n).into_iter().enumerate() {
            let same = bit(v_m, n, a) == bit(v_m, n, b);
            prop_assert_eq!(p.lambda[k], if same { 1 } else { -1 });
            // Flipping the drive bit negates exactly the drive-touching terms.
            let flipped = zz_eigenvalue(p.v_n, n, a, b);
            let touches = a == drive || b == drive;
            prop_assert_eq!(flipped, if touches { -p.lambda[k] } else { p.lambda[k] });
        }
    }

    #[test]
    fn block_integrals_reassemble_diagonal(seed in any::<u64>(), n in 2usize..6) {
        let mut r = common::rng(seed);
        let spec = common::random_spec(&mut r, n, (0.5, 2.0), (-3.0, 3.0));
        let drive = (seed as usize) % n;
        for p in enumerate_subspaces(&spec, drive).unwrap() {
            let b = project_block(&spec, &p, 0.3).unwrap();
            let energy = |s: u64| -> f64 {
                pairs(n).into_iter().map(|(x, y)| f64::from(zz_eigenvalue(s, n, x, y)) * spec.c[x][y]).sum::<f64>() * 0.3
            };
            prop_assert!((b.c + b.b - energy(p.v_m)).abs() < 1e-12);
            prop_assert!((b.c - b.b - energy(p.v_n)).abs() < 1e-12);
        }
    }
}

#[test]
fn canonical_selection_determinant() {
    for n in 3..=8 {
        let sel = select_subspaces(n, 0, n - 1).unwrap();
        let m = coefficient_matrix(&sel, 0).unwrap();
        assert_eq!(m.rank(), n - 1);
        assert_eq!(m.determinant().unwrap().abs(), 1i128 << (n - 2), "n = {n}");
    }
}

#[test]
fn selection_independent_on_later_partners() {
    for n in 3..=8 {
        for drive in 0..n - 1 {
            let sel = select_subspaces(n, drive, n - 1 - drive).unwrap();
            let later: Vec<usize> = (drive + 1..n).collect();
            let m = coefficient_matrix(&sel, drive).unwrap().restrict(&later).unwrap();
            assert_eq!(m.rank(), later.len(), "n = {n}, drive = {drive}");
        }
    }
}

#[test]
fn repeated_subspace_is_singular() {
    let p = SubspacePair::new(4, 0, 0).unwrap();
    let err = coefficient_matrix(&[p.clone(), p.clone(), p], 0).unwrap_err();
    assert!(matches!(err, qspe_learn::Error::SingularSelection { rank: 1, required: 3 }));
}

#[test]
fn decompose_round_trip() {
    let mut r = common::rng(7);
    let blocks: Vec<Matrix2<Complex64>> = (0..4)
        .map(|_| {
            use rand::Rng;
            let d0 = r.gen_range(-1.0..1.0);
            let d1 = r.gen_range(-1.0..1.0);
            let off = c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
            Matrix2::new(c(d0, 0.0), off, off.conj(), c(d1, 0.0))
        })
        .collect();
    let h = direct_sum(&blocks);
    let id = DMatrix::<Complex64>::identity(8, 8);
    let back = block_decompose(&h, &id).unwrap();
    for (x, y) in back.iter().zip(&blocks) {
        assert!((x - y).norm() < 1e-14);
    }
}

#[test]
fn decompose_rejects_bad_inputs() {
    let [_, x, _, z] = paulis();
    let xx = x.kronecker(&x);
    let id = DMatrix::<Complex64>::identity(4, 4);
    assert!(matches!(block_decompose(&xx, &id), Err(qspe_learn::Error::NotBlockDiagonal { .. })));
    let scaled = &id * c(2.0, 0.0);
    assert!(matches!(block_decompose(&z.kronecker(&z), &scaled), Err(qspe_learn::Error::NotUnitary(_))));
    let mut nh = z.kronecker(&z);
    nh[(0, 1)] = c(1.0, 0.0);
    assert!(matches!(block_decompose(&nh, &id), Err(qspe_learn::Error::NotHermitian(_))));
}

#[test]
fn hadamard_frame_example() {
    let (a, b, cc, d) = (0.7, -0.4, 1.3, 0.25);
    let h2 = {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)])
    };
    let u = h2.kronecker(&h2);
    let blocks = [
        Matrix2::new(c(a, 0.0), c(cc, 0.0), c(cc, 0.0), c(b, 0.0)),
        Matrix2::new(c(a, 0.0), c(d, 0.0), c(d, 0.0), c(b, 0.0)),
    ];
    let h = &u * direct_sum(&blocks) * u.adjoint();
    let want = DMatrix::from_row_slice(
        4,
        4,
        &[
            2.0 * (a + b + cc + d), 2.0 * (a - b), 2.0 * (cc - d), 0.0,
            2.0 * (a - b), 2.0 * (a + b - cc - d), 0.0, 2.0 * (d - cc),
            2.0 * (cc - d), 0.0, 2.0 * (a + b + cc + d), 2.0 * (a - b),
            0.0, 2.0 * (d - cc), 2.0 * (a - b), 2.0 * (a + b - cc - d),
        ],
    )
    .map(|x| c(x / 4.0, 0.0));
    assert!((&h - &want).norm() < 1e-12);
    let back = block_decompose(&h, &u).unwrap();
    for (x, y) in back.iter().zip(&blocks) {
        assert!((x - y).norm() < 1e-12);
    }
}

#[test]
fn xy_model_example() {
    let (g1, g2, gx, gy) = (0.3, -1.1, 0.8, 0.25);
    let [i, x, y, z] = paulis();
    let h = kron_all(&[z.clone(), i.clone()]) * c(g1, 0.0)
        + kron_all(&[i.clone(), z.clone()]) * c(g2, 0.0)
        + kron_all(&[x.clone(), x.clone()]) * c(gx, 0.0)
        + kron_all(&[y.clone(), y.clone()]) * c(gy, 0.0);
    assert!((h[(0, 3)].re - (gx - gy)).abs() < 1e-14);
    assert!((h[(1, 2)].re - (gx + gy)).abs() < 1e-14);

    let mut u = DMatrix::<Complex64>::zeros(4, 4);
    for (col, basis) in [0usize, 3, 1, 2].into_iter().enumerate() {
        u[(basis, col)] = c(1.0, 0.0);
    }
    let blocks = block_decompose(&h, &u).unwrap();
    let want = [
        Matrix2::new(c(g1 + g2, 0.0), c(gx - gy, 0.0), c(gx - gy, 0.0), c(-g1 - g2, 0.0)),
        Matrix2::new(c(g1 - g2, 0.0), c(gx + gy, 0.0), c(gx + gy, 0.0), c(-g1 + g2, 0.0)),
    ];
    for (b, w) in blocks.iter().zip(&want) {
        assert!((b - w).norm() < 1e-14);
    }

    // The permutation is realised by two CNOTs.
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let p0 = DMatrix::from_row_slice(2, 2, &[l, o, o, o]);
    let p1 = DMatrix::from_row_slice(2, 2, &[o, o, o, l]);
    let cnot01 = p0.kronecker(&i) + p1.kronecker(&x);
    let cnot10 = i.kronecker(&p0) + x.kronecker(&p1);
    assert!((&cnot10 * &cnot01 - &u).norm() < 1e-14);
}
