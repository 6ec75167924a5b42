//! Parallel-learnable Hamiltonians, invariant subspaces and the linear
//! recovery matrices.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register handled by the bitstring helpers.
pub const MAX_QUBITS: usize = 62;

/// ZZ-coupled register with per-qubit X drives.
///
/// The full Hamiltonian for drive `i` is
/// `a_i (cos(phi) X_i - sin(phi) Y_i) + sum_{p<q} c_pq Z_p Z_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    /// Number of qubits.
    pub n: usize,
    /// X-drive coefficient per qubit (rad/us).
    pub a: Vec<f64>,
    /// Symmetric coupling matrix with zero diagonal (rad/us).
    pub c: Vec<Vec<f64>>,
    /// Drive phase (rad).
    #[serde(default)]
    pub phi: f64,
}

impl HamiltonianSpec {
    pub fn new(a: Vec<f64>, c: Vec<Vec<f64>>, phi: f64) -> Result<Self> {
        let spec = Self {
            n: a.len(),
            a,
            c,
            phi,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a spec with the same drive on every qubit from the upper
    /// triangle of the coupling matrix, listed in `pairs(n)` order.
    pub fn from_upper(n: usize, a: f64, upper: &[f64]) -> Result<Self> {
        let list = pairs(n);
        if upper.len() != list.len() {
            return Err(Error::WrongLength {
                expected: list.len(),
                got: upper.len(),
            });
        }
        let mut c = vec![vec![0.0; n]; n];
        for (&(p, q), &v) in list.iter().zip(upper) {
            c[p][q] = v;
            c[q][p] = v;
        }
        Self::new(vec![a; n], c, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidSpec(format!("need n >= 2, got {}", self.n)));
        }
        if self.n > MAX_QUBITS {
            return Err(Error::SizeLimit {
                n: self.n,
                max: MAX_QUBITS,
            });
        }
        if self.a.len() != self.n {
            return Err(Error::InvalidSpec(format!(
                "a has length {}, expected {}",
                self.a.len(),
                self.n
            )));
        }
        if self.c.len() != self.n || self.c.iter().any(|row| row.len() != self.n) {
            return Err(Error::InvalidSpec(format!("c must be {0}x{0}", self.n)));
        }
        if !self.phi.is_finite() || self.a.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("non-finite drive".into()));
        }
        for p in 0..self.n {
            if self.c[p][p] != 0.0 {
                return Err(Error::InvalidSpec(format!("c[{p}][{p}] must be zero")));
            }
            for q in 0..self.n {
                if !self.c[p][q].is_finite() {
                    return Err(Error::InvalidSpec(format!("c[{p}][{q}] is not finite")));
                }
                if self.c[p][q] != self.c[q][p] {
                    return Err(Error::InvalidSpec(format!("c[{p}][{q}] != c[{q}][{p}]")));
                }
            }
        }
        Ok(())
    }

    /// Checks that qubit `drive` can be used as a drive (`a > 0`).
    pub fn check_drive(&self, drive: usize) -> Result<()> {
        if drive >= self.n {
            return Err(Error::InvalidRequest(format!(
                "drive {drive} out of range for n = {}",
                self.n
            )));
        }
        if self.a[drive] <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "drive coefficient a[{drive}] = {} must be positive",
                self.a[drive]
            )));
        }
        Ok(())
    }

    /// Couplings in `pairs(n)` order.
    pub fn upper(&self) -> Vec<f64> {
        pairs(self.n).iter().map(|&(p, q)| self.c[p][q]).collect()
    }
}

/// Unordered qubit pairs `(p, q)` with `p < q`, in lexicographic order.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for p in 0..n {
        for q in p + 1..n {
            out.push((p, q));
        }
    }
    out
}

/// Position of the unordered pair `{p, q}` in `pairs(n)`.
pub fn pair_index(n: usize, p: usize, q: usize) -> usize {
    let (p, q) = if p < q { (p, q) } else { (q, p) };
    debug_assert!(p != q && q < n);
    p * (2 * n - p - 1) / 2 + (q - p - 1)
}

/// Mask selecting qubit `q` in an `n`-qubit basis index.
pub fn unit(n: usize, q: usize) -> u64 {
    1u64 << (n - 1 - q)
}

/// Value of qubit `q` in basis state `state`.
pub fn bit(state: u64, n: usize, q: usize) -> bool {
    state & unit(n, q) != 0
}

/// Eigenvalue of `Z_p Z_q` on a basis state.
pub fn zz_eigenvalue(state: u64, n: usize, p: usize, q: usize) -> i8 {
    if bit(state, n, p) == bit(state, n, q) {
        1
    } else {
        -1
    }
}

pub fn format_bits(state: u64, n: usize) -> String {
    (0..n)
        .map(|q| if bit(state, n, q) { '1' } else { '0' })
        .collect()
}

pub fn parse_bits(s: &str) -> Result<u64> {
    if s.is_empty() || s.len() > MAX_QUBITS {
        return Err(Error::InvalidRequest(format!("bad bitstring {s:?}")));
    }
    s.chars().try_fold(0u64, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        _ => Err(Error::InvalidRequest(format!("bad bitstring {s:?}"))),
    })
}

/// One invariant subspace of the full Hamiltonian driven on `drive`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspacePair {
    pub n: usize,
    pub drive: usize,
    /// Logical zero; bit `drive` is 0.
    pub v_m: u64,
    /// Logical one, `v_m ^ e_drive`.
    pub v_n: u64,
    /// `Z_p Z_q` eigenvalues on `v_m`, in `pairs(n)` order.
    pub lambda: Vec<i8>,
}

impl SubspacePair {
    pub fn new(n: usize, drive: usize, v_m: u64) -> Result<Self> {
        if n < 2 || n > MAX_QUBITS || drive >= n {
            return Err(Error::InvalidSelection(format!(
                "drive {drive} invalid for n = {n}"
            )));
        }
        if v_m >> n != 0 {
            return Err(Error::InvalidSelection(format!(
                "state {v_m} does not fit in {n} qubits"
            )));
        }
        if bit(v_m, n, drive) {
            return Err(Error::InvalidSelection(format!(
                "logical zero {} has drive bit set",
                format_bits(v_m, n)
            )));
        }
        let lambda = pairs(n)
            .into_iter()
            .map(|(p, q)| zz_eigenvalue(v_m, n, p, q))
            .collect();
        Ok(Self {
            n,
            drive,
            v_m,
            v_n: v_m ^ unit(n, drive),
            lambda,
        })
    }

    pub fn lambda_of(&self, p: usize, q: usize) -> i8 {
        self.lambda[pair_index(self.n, p, q)]
    }
}

/// Time-integrated content of one 2x2 block for a square pulse.
///
/// The block Hamiltonian is `[[C + B, A e^{i phi}], [A e^{-i phi}, C - B]] / T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockIntegrals {
    /// Drive integral `a_i T` (rad).
    pub a: f64,
    /// Drive-touching couplings, `sum_{E_D} lambda c T` (rad).
    pub b: f64,
    /// Remaining couplings, `sum_{E_S} lambda c T` (rad).
    pub c: f64,
    /// Evolution time (us).
    pub t: f64,
    /// Drive phase (rad).
    pub phi: f64,
}

/// All `2^(n-1)` invariant subspaces for `drive`, by ascending `v_m`.
pub fn enumerate_subspaces(spec: &HamiltonianSpec, drive: usize) -> Result<Vec<SubspacePair>> {
    let n = spec.n;
    if drive >= n {
        return Err(Error::InvalidRequest(format!(
            "drive {drive} out of range for n = {n}"
        )));
    }
    if n > 20 {
        return Err(Error::SizeLimit { n, max: 20 });
    }
    (0..1u64 << n)
        .filter(|&s| !bit(s, n, drive))
        .map(|s| SubspacePair::new(n, drive, s))
        .collect()
}

pub fn project_block(spec: &HamiltonianSpec, pair: &SubspacePair, t: f64) -> Result<BlockIntegrals> {
    if pair.n != spec.n {
        return Err(Error::InvalidSelection(format!(
            "pair built for n = {}, spec has n = {}",
            pair.n, spec.n
        )));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidRequest(format!("evolution time {t} must be positive")));
    }
    let mut b = 0.0;
    let mut c = 0.0;
    for (k, (p, q)) in pairs(spec.n).into_iter().enumerate() {
        let term = f64::from(pair.lambda[k]) * spec.c[p][q];
        if p == pair.drive || q == pair.drive {
            b += term;
        } else {
            c += term;
        }
    }
    Ok(BlockIntegrals {
        a: spec.a[pair.drive] * t,
        b: b * t,
        c: c * t,
        t,
        phi: spec.phi,
    })
}

/// Canonical independent subspaces: the all-zero logical state, then single
/// ones at positions `k > drive + 1` (ascending), then `k < drive`.
///
/// With `count = n - 1 - drive` the selection stays independent on the
/// couplings `c_{drive, j}` with `j > drive`.
pub fn select_subspaces(n: usize, drive: usize, count: usize) -> Result<Vec<SubspacePair>> {
    if n < 2 || drive >= n {
        return Err(Error::InvalidRequest(format!("drive {drive} invalid for n = {n}")));
    }
    if count == 0 || count > n - 1 {
        return Err(Error::InvalidRequest(format!(
            "count {count} must lie in 1..={}",
            n - 1
        )));
    }
    let singles = (drive + 2..n).chain(0..drive).map(|k| unit(n, k));
    std::iter::once(0)
        .chain(singles)
        .take(count)
        .map(|s| SubspacePair::new(n, drive, s))
        .collect()
}

/// `+-1` matrix linking per-subspace `B_k` to the couplings `c_{drive, j}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientMatrix {
    pub n: usize,
    pub drive: usize,
    /// Partner qubit `j` of each column.
    pub columns: Vec<usize>,
    pub entries: Vec<Vec<i8>>,
}

impl CoefficientMatrix {
    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn rank(&self) -> usize {
        integer_rank(&self.entries)
    }

    /// Exact determinant; `None` unless square.
    pub fn determinant(&self) -> Option<i128> {
        integer_determinant(&self.entries)
    }

    /// Restriction to the given partner qubits, in the given order.
    pub fn restrict(&self, partners: &[usize]) -> Result<CoefficientMatrix> {
        let idx: Vec<usize> = partners
            .iter()
            .map(|j| {
                self.columns.iter().position(|c| c == j).ok_or_else(|| {
                    Error::InvalidRequest(format!("qubit {j} is not a column"))
                })
            })
            .collect::<Result<_>>()?;
        Ok(CoefficientMatrix {
            n: self.n,
            drive: self.drive,
            columns: partners.to_vec(),
            entries: self
                .entries
                .iter()
                .map(|row| idx.iter().map(|&k| row[k]).collect())
                .collect(),
        })
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows(), self.columns.len(), |r, k| {
            f64::from(self.entries[r][k])
        })
    }
}

/// Builds the coefficient matrix over all partners `j != drive` and checks
/// that its rank equals `min(rows, n - 1)`.
pub fn coefficient_matrix(pairs_sel: &[SubspacePair], drive: usize) -> Result<CoefficientMatrix> {
    let first = pairs_sel
        .first()
        .ok_or_else(|| Error::InvalidSelection("no subspaces given".into()))?;
    let n = first.n;
    if pairs_sel.iter().any(|p| p.drive != drive || p.n != n) {
        return Err(Error::InvalidSelection(
            "all pairs must share the same drive and size".into(),
        ));
    }
    let columns: Vec<usize> = (0..n).filter(|&j| j != drive).collect();
    let entries: Vec<Vec<i8>> = pairs_sel
        .iter()
        .map(|p| columns.iter().map(|&j| p.lambda_of(drive, j)).collect())
        .collect();
    let m = CoefficientMatrix {
        n,
        drive,
        columns,
        entries,
    };
    let required = m.rows().min(n - 1);
    let rank = m.rank();
    if rank < required {
        return Err(Error::SingularSelection { rank, required });
    }
    Ok(m)
}

/// Rank by fraction-free elimination over the integers.
pub fn integer_rank(rows: &[Vec<i8>]) -> usize {
    let mut m: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| i128::from(x)).collect())
        .collect();
    let nrows = m.len();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(piv) = (rank..nrows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, piv);
        for r in rank + 1..nrows {
            let f = m[r][col];
            let p = m[rank][col];
            if f == 0 {
                continue;
            }
            for k in col..ncols {
                m[r][k] = m[r][k] * p - m[rank][k] * f;
            }
            let g = m[r].iter().fold(0i128, |g, &x| gcd(g, x.abs()));
            if g > 1 {
                m[r].iter_mut().for_each(|x| *x /= g);
            }
        }
        rank += 1;
    }
    rank
}

/// Bareiss determinant; exact for integer entries.
pub fn integer_determinant(rows: &[Vec<i8>]) -> Option<i128> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return None;
    }
    if n == 0 {
        return Some(1);
    }
    let mut m: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| i128::from(x)).collect())
        .collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if m[k][k] == 0 {
            let Some(piv) = (k + 1..n).find(|&r| m[r][k] != 0) else {
                return Some(0);
            };
            m.swap(k, piv);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    Some(sign * m[n - 1][n - 1])
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Tolerance used for Hermiticity, unitarity and block checks.
pub const BLOCK_TOL: f64 = 1e-10;

/// Splits `U^dagger H U` into consecutive 2x2 diagonal blocks.
pub fn block_decompose(h: &DMatrix<Complex64>, u: &DMatrix<Complex64>) -> Result<Vec<Matrix2<Complex64>>> {
    let dim = h.nrows();
    if h.ncols() != dim || u.nrows() != dim || u.ncols() != dim {
        return Err(Error::InvalidRequest("H and U must be square and equal size".into()));
    }
    if dim % 2 != 0 {
        return Err(Error::InvalidRequest(format!("dimension {dim} is odd")));
    }
    let herm = (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > BLOCK_TOL {
        return Err(Error::NotHermitian(herm));
    }
    let unit_dev = (u.adjoint() * u - DMatrix::<Complex64>::identity(dim, dim))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if unit_dev > BLOCK_TOL {
        return Err(Error::NotUnitary(unit_dev));
    }
    let m = u.adjoint() * h * u;
    let mut worst = (0, 0, 0.0);
    for r in 0..dim {
        for c in 0..dim {
            if r / 2 != c / 2 && m[(r, c)].norm() > worst.2 {
                worst = (r, c, m[(r, c)].norm());
            }
        }
    }
    if worst.2 > BLOCK_TOL {
        return Err(Error::NotBlockDiagonal {
            row: worst.0,
            col: worst.1,
            magnitude: worst.2,
        });
    }
    Ok((0..dim / 2)
        .map(|b| m.fixed_view::<2, 2>(2 * b, 2 * b).into_owned())
        .collect())
}

/// Direct sum of 2x2 blocks.
pub fn direct_sum(blocks: &[Matrix2<Complex64>]) -> DMatrix<Complex64> {
    let dim = 2 * blocks.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (b, blk) in blocks.iter().enumerate() {
        m.fixed_view_mut::<2, 2>(2 * b, 2 * b).copy_from(blk);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec3() -> HamiltonianSpec {
        HamiltonianSpec::new(
            vec![1.5, 0.7, 0.3],
            vec![
                vec![0.0, 2.0, 3.0],
                vec![2.0, 0.0, 5.0],
                vec![3.0, 5.0, 0.0],
            ],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn pair_index_matches_list() {
        for n in 2..7 {
            for (k, (p, q)) in pairs(n).into_iter().enumerate() {
                assert_eq!(pair_index(n, p, q), k);
                assert_eq!(pair_index(n, q, p), k);
            }
        }
    }

    #[test]
    fn bits_round_trip() {
        assert_eq!(parse_bits("0100").unwrap(), 4);
        assert_eq!(format_bits(4, 4), "0100");
        assert!(bit(parse_bits("100").unwrap(), 3, 0));
        assert!(parse_bits("01a").is_err());
    }

    #[test]
    fn rejects_asymmetric_couplings() {
        let err = HamiltonianSpec::new(vec![1.0, 1.0], vec![vec![0.0, 1.0], vec![2.0, 0.0]], 0.0);
        assert!(matches!(err, Err(Error::InvalidSpec(_))));
        let err = HamiltonianSpec::new(vec![1.0, 1.0], vec![vec![1.0, 1.0], vec![1.0, 0.0]], 0.0);
        assert!(matches!(err, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn enumerate_small_cases() {
        let spec = HamiltonianSpec::from_upper(2, 1.0, &[1.0]).unwrap();
        let p = enumerate_subspaces(&spec, 0).unwrap();
        let got: Vec<_> = p.iter().map(|x| (format_bits(x.v_m, 2), format_bits(x.v_n, 2))).collect();
        assert_eq!(got, [("00".into(), "10".into()), ("01".into(), "11".into())]);

        let zeros: Vec<_> = enumerate_subspaces(&spec3(), 0)
            .unwrap()
            .iter()
            .map(|x| format_bits(x.v_m, 3))
            .collect();
        assert_eq!(zeros, ["000", "001", "010", "011"]);
    }

    #[test]
    fn enumerate_n4_xor() {
        let spec = HamiltonianSpec::from_upper(4, 1.0, &[1.0; 6]).unwrap();
        let p = enumerate_subspaces(&spec, 1).unwrap();
        assert_eq!(p.len(), 8);
        assert!(p.iter().all(|x| x.v_m ^ x.v_n == parse_bits("0100").unwrap()));
    }

    #[test]
    fn project_block_examples() {
        let spec = spec3();
        let all_zero = SubspacePair::new(3, 0, 0).unwrap();
        let b = project_block(&spec, &all_zero, 1.0).unwrap();
        assert_eq!((b.a, b.b, b.c), (1.5, 5.0, 5.0));

        let p = SubspacePair::new(3, 0, parse_bits("001").unwrap()).unwrap();
        let b = project_block(&spec, &p, 1.0).unwrap();
        assert_eq!((b.b, b.c), (2.0 - 3.0, -5.0));

        let two = HamiltonianSpec::from_upper(2, 0.4, &[7.0]).unwrap();
        let b = project_block(&two, &SubspacePair::new(2, 0, 0).unwrap(), 1.0).unwrap();
        assert_eq!((b.a, b.b, b.c), (0.4, 7.0, 0.0));
    }

    #[test]
    fn select_examples() {
        let z = |n, d, c| -> Vec<String> {
            select_subspaces(n, d, c)
                .unwrap()
                .iter()
                .map(|p| format_bits(p.v_m, n))
                .collect()
        };
        assert_eq!(z(3, 0, 2), ["000", "001"]);
        assert_eq!(z(5, 0, 4), ["00000", "00100", "00010", "00001"]);
        assert_eq!(z(2, 0, 1), ["00"]);
        assert!(select_subspaces(3, 0, 3).is_err());
    }

    #[test]
    fn coefficient_matrix_examples() {
        let sel = select_subspaces(3, 0, 2).unwrap();
        let m = coefficient_matrix(&sel, 0).unwrap();
        assert_eq!(m.entries, vec![vec![1, 1], vec![1, -1]]);
        assert_eq!(m.determinant(), Some(-2));

        let m = coefficient_matrix(&select_subspaces(2, 0, 1).unwrap(), 0).unwrap();
        assert_eq!(m.entries, vec![vec![1]]);

        let m = coefficient_matrix(&select_subspaces(4, 0, 3).unwrap(), 0).unwrap();
        assert_eq!(m.determinant().unwrap().abs(), 4);
    }

    #[test]
    fn duplicate_rows_are_singular() {
        let a = SubspacePair::new(3, 0, 0).unwrap();
        let err = coefficient_matrix(&[a.clone(), a], 0);
        assert_eq!(err, Err(Error::SingularSelection { rank: 1, required: 2 }));
    }

    #[test]
    fn determinant_matches_float() {
        let rows = vec![vec![1, 1, -1], vec![1, -1, 1], vec![-1, 1, 1]];
        let m = DMatrix::from_fn(3, 3, |r, c| f64::from(rows[r][c]));
        assert_eq!(integer_determinant(&rows).unwrap() as f64, m.determinant().round());
    }

    #[test]
    fn block_decompose_identity() {
        let h = DMatrix::from_fn(4, 4, |r, c| {
            if r / 2 == c / 2 {
                Complex64::new((r + c) as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let blocks = block_decompose(&h, &DMatrix::identity(4, 4)).unwrap();
        assert_eq!(direct_sum(&blocks), h);
    }
}
