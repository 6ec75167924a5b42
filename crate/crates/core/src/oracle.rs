//! Dense `2^n x 2^n` reference implementation for small registers.
//!
//! Built from Kronecker products and Hermitian eigendecomposition only, so it
//! shares no code with the block simulator it checks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{HamiltonianSpec, SubspacePair};
use crate::sim::{Distribution, ExperimentConfig, InitialKind};

/// Largest register the dense oracle accepts.
pub const MAX_ORACLE_QUBITS: usize = 10;

pub type DenseOperator = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli(label: char) -> DenseOperator {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    match label {
        'X' => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        'Y' => DMatrix::from_row_slice(2, 2, &[o, c(0.0, -1.0), c(0.0, 1.0), o]),
        'Z' => DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        _ => DMatrix::identity(2, 2),
    }
}

/// Tensor product with qubit 0 as the leftmost factor.
fn pauli_string(n: usize, ops: &[(usize, char)]) -> DenseOperator {
    let mut m = DMatrix::<Complex64>::identity(1, 1);
    for q in 0..n {
        let label = ops.iter().find(|(k, _)| *k == q).map_or('I', |(_, l)| *l);
        m = m.kronecker(&pauli(label));
    }
    m
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_ORACLE_QUBITS {
        return Err(Error::SizeLimit {
            n,
            max: MAX_ORACLE_QUBITS,
        });
    }
    Ok(())
}

/// `a_i (cos(phi) X_i - sin(phi) Y_i) + sum_{p<q} c_pq Z_p Z_q`.
pub fn dense_hamiltonian(spec: &HamiltonianSpec, drive: usize) -> Result<DenseOperator> {
    check_size(spec.n)?;
    if drive >= spec.n {
        return Err(Error::InvalidRequest(format!("drive {drive} out of range")));
    }
    let n = spec.n;
    let a = spec.a[drive];
    let mut h = pauli_string(n, &[(drive, 'X')]) * c(a * spec.phi.cos(), 0.0)
        - pauli_string(n, &[(drive, 'Y')]) * c(a * spec.phi.sin(), 0.0);
    for p in 0..n {
        for q in p + 1..n {
            if spec.c[p][q] != 0.0 {
                h += pauli_string(n, &[(p, 'Z'), (q, 'Z')]) * c(spec.c[p][q], 0.0);
            }
        }
    }
    Ok(h)
}

/// `exp(-i H t)` through a Hermitian eigendecomposition.
///
/// `H = R + iS` is diagonalized through its real symmetric embedding
/// `[[R, -S], [S, R]]`; `cos(Ht)` and `sin(Ht)` are read back from the
/// corresponding functions of the embedding.
pub fn dense_propagator(h: &DenseOperator, t: f64) -> Result<DenseOperator> {
    let dev = (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > 1e-10 {
        return Err(Error::NotHermitian(dev));
    }
    let dim = h.nrows();
    let embed = DMatrix::<f64>::from_fn(2 * dim, 2 * dim, |r, col| {
        let z = h[(r % dim, col % dim)];
        match (r < dim, col < dim) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let eig = faer::Mat::<f64>::from_fn(2 * dim, 2 * dim, |r, col| embed[(r, col)])
        .selfadjoint_eigendecomposition(faer::Side::Lower);
    let (s, u) = (eig.s().column_vector(), eig.u());
    let v = DMatrix::<f64>::from_fn(2 * dim, 2 * dim, |r, col| u.read(r, col));
    let evals = DVector::<f64>::from_fn(2 * dim, |k, _| s.read(k));
    let cos = &v * DMatrix::from_diagonal(&evals.map(|e| (e * t).cos())) * v.transpose();
    let sin = &v * DMatrix::from_diagonal(&evals.map(|e| (e * t).sin())) * v.transpose();
    // cos(Ht) - i sin(Ht), each read from the first block column.
    Ok(DMatrix::from_fn(dim, dim, |r, col| {
        Complex64::new(cos[(r, col)] + sin[(r + dim, col)], cos[(r + dim, col)] - sin[(r, col)])
    }))
}

/// Largest element of `u` connecting two different subspaces. Basis states
/// outside `pairs` count as their own one-dimensional blocks.
pub fn verify_block_structure(u: &DenseOperator, pairs: &[SubspacePair]) -> f64 {
    let dim = u.nrows();
    let mut group: Vec<usize> = (0..dim).map(|s| pairs.len() + s).collect();
    for (k, p) in pairs.iter().enumerate() {
        group[p.v_m as usize] = k;
        group[p.v_n as usize] = k;
    }
    let mut worst: f64 = 0.0;
    for r in 0..dim {
        for col in 0..dim {
            if group[r] != group[col] {
                worst = worst.max(u[(r, col)].norm());
            }
        }
    }
    worst
}

/// Full-statevector QSPE circuit: prepare, then `d` cycles of
/// `exp(-i H T)` followed by `exp(i omega Z_drive)`, then Born rule.
pub fn dense_circuit(
    spec: &HamiltonianSpec,
    pairs: &[SubspacePair],
    config: &ExperimentConfig,
    omega: f64,
    kind: InitialKind,
) -> Result<Distribution> {
    let drive = pairs
        .first()
        .ok_or_else(|| Error::InvalidSelection("no subspaces".into()))?
        .drive;
    let n = spec.n;
    let u = dense_propagator(&dense_hamiltonian(spec, drive)?, config.t)?;
    let z = pauli_string(n, &[(drive, 'Z')]);
    let rot = DMatrix::from_fn(1 << n, 1 << n, |r, col| {
        if r == col {
            Complex64::from_polar(1.0, omega * z[(r, r)].re)
        } else {
            c(0.0, 0.0)
        }
    });
    let norm = 1.0 / (2.0 * pairs.len() as f64).sqrt();
    let one = match kind {
        InitialKind::Plus => c(norm, 0.0),
        InitialKind::I => c(0.0, norm),
    };
    let mut psi = DVector::<Complex64>::zeros(1 << n);
    for p in pairs {
        psi[p.v_m as usize] += c(norm, 0.0);
        psi[p.v_n as usize] += one;
    }
    let step = &rot * &u;
    for _ in 0..config.d {
        psi = &step * psi;
    }
    Ok(Distribution {
        n,
        probs: psi
            .iter()
            .enumerate()
            .map(|(k, a)| (k as u64, a.norm_sqr()))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::enumerate_subspaces;

    #[test]
    fn two_qubit_hamiltonians() {
        let spec = HamiltonianSpec::new(vec![1.0, 0.0], vec![vec![0.0, 0.0], vec![0.0, 0.0]], 0.0).unwrap();
        let h = dense_hamiltonian(&spec, 0).unwrap();
        assert_eq!(h, pauli('X').kronecker(&pauli('I')));

        let spec = HamiltonianSpec::new(vec![0.0, 0.0], vec![vec![0.0, 1.0], vec![1.0, 0.0]], 0.0).unwrap();
        let h = dense_hamiltonian(&spec, 0).unwrap();
        let diag: Vec<f64> = (0..4).map(|k| h[(k, k)].re).collect();
        assert_eq!(diag, [1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn propagator_trivial_cases() {
        let x = pauli('X');
        let u = dense_propagator(&x, 0.0).unwrap();
        assert!((u - DMatrix::identity(2, 2)).norm() < 1e-14);
        let u = dense_propagator(&x, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((u - x * c(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(dense_propagator(&m, 1.0), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn swap_breaks_block_structure() {
        let spec = HamiltonianSpec::from_upper(2, 1.0, &[1.0]).unwrap();
        let pairs = enumerate_subspaces(&spec, 0).unwrap();
        let o = c(0.0, 0.0);
        let l = c(1.0, 0.0);
        let swap = DMatrix::from_row_slice(4, 4, &[l, o, o, o, o, o, l, o, o, l, o, o, o, o, o, l]);
        assert_eq!(verify_block_structure(&swap, &pairs), 1.0);
        let diag = DMatrix::from_diagonal(&DVector::from_element(4, c(0.0, 1.0)));
        assert_eq!(verify_block_structure(&diag, &pairs), 0.0);
    }

    #[test]
    fn size_cap() {
        let spec = HamiltonianSpec::from_upper(11, 1.0, &[0.0; 55]).unwrap();
        assert!(matches!(dense_hamiltonian(&spec, 0), Err(Error::SizeLimit { .. })));
    }
}
