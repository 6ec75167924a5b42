//! Error channels and their mitigations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HamiltonianSpec, SubspacePair};
use crate::sim::{Distribution, InitialKind};

/// Single-qubit readout error probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutError {
    /// `P(1 | 0)`.
    pub p_loss: f64,
    /// `P(0 | 1)`.
    pub p_anti: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Depolarizing fidelity in `[0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depol_alpha: Option<f64>,
    /// Coherent over-rotation of the state-preparation pulse (rad).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prep_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<ReadoutError>,
    /// Relative shift of the X drive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_gamma: Option<f64>,
    /// Per-signal-angle drift, indexed by the omega-grid index `j`.
    /// Overrides `drift_gamma` where present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_schedule: Option<Vec<f64>>,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidRequest(format!("noise: {what}")));
        if let Some(a) = self.depol_alpha {
            if !(0.0..=1.0).contains(&a) {
                return bad("depol_alpha must lie in [0, 1]");
            }
        }
        if let Some(a) = self.prep_alpha {
            if !a.is_finite() || (2.0 * a).abs() >= std::f64::consts::FRAC_PI_2 {
                return bad("|2 prep_alpha| must be below pi/2");
            }
        }
        if let Some(r) = self.readout {
            if !(0.0..=1.0).contains(&r.p_loss) || !(0.0..=1.0).contains(&r.p_anti) {
                return bad("readout probabilities must lie in [0, 1]");
            }
        }
        let drifts = self.drift_gamma.iter().chain(self.drift_schedule.iter().flatten());
        for &g in drifts {
            if !g.is_finite() || g <= -1.0 {
                return bad("drift must be finite and above -1");
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        *self == NoiseConfig::default()
    }

    /// Drift applied to circuits at omega-grid index `j`.
    pub fn drift_at(&self, j: usize) -> f64 {
        self.drift_schedule
            .as_ref()
            .and_then(|s| s.get(j).copied())
            .or(self.drift_gamma)
            .unwrap_or(0.0)
    }
}

/// `alpha p + (1 - alpha) / 4`.
pub fn depolarize(p: f64, alpha: f64) -> f64 {
    alpha * p + (1.0 - alpha) / 4.0
}

/// Distribution-level depolarization relative to the active subspaces.
///
/// Mixes `dist` with a reference that puts `1/(4k)` on each of the `k`
/// logical zeros and spreads the remaining mass evenly over the other basis
/// states, so every rescaled transition probability obeys [`depolarize`].
pub fn depolarize_distribution(dist: &Distribution, alpha: f64, pairs: &[SubspacePair]) -> Distribution {
    let n = dist.n;
    let k = pairs.len() as f64;
    let others = (1u64 << n) as f64 - k;
    let rest = 0.75 / others;
    let mut out = vec![(1.0 - alpha) * rest; 1 << n];
    for p in pairs {
        out[p.v_m as usize] = (1.0 - alpha) / (4.0 * k);
    }
    for (&s, &p) in &dist.probs {
        out[s as usize] += alpha * p;
    }
    Distribution::from_dense(n, &out)
}

/// Per-subspace amplitudes prepared with an over-rotated pulse.
///
/// The `Plus` state comes from a Y rotation by `theta_p + alpha`. The `I`
/// state comes from an X rotation with the opposite sense, which the same
/// miscalibration turns into `theta_p - alpha`.
pub fn coherent_prep(theta_p: f64, alpha: f64, kind: InitialKind) -> [Complex64; 2] {
    match kind {
        InitialKind::Plus => {
            let t = theta_p + alpha;
            [Complex64::new(t.cos(), 0.0), Complex64::new(t.sin(), 0.0)]
        }
        InitialKind::I => {
            let t = theta_p - alpha;
            [Complex64::new(t.cos(), 0.0), Complex64::new(0.0, t.sin())]
        }
    }
}

/// Tensor-product confusion matrix `R[i][j] = P(observe j | true i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionMatrix {
    pub n: usize,
    pub single: [[f64; 2]; 2],
}

impl ConfusionMatrix {
    /// Dense `2^n x 2^n` matrix.
    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        let s = nalgebra::DMatrix::from_row_slice(
            2,
            2,
            &[self.single[0][0], self.single[0][1], self.single[1][0], self.single[1][1]],
        );
        (0..self.n).fold(nalgebra::DMatrix::identity(1, 1), |m, _| m.kronecker(&s))
    }
}

pub fn confusion_matrix(n: usize, p_loss: f64, p_anti: f64) -> Result<ConfusionMatrix> {
    if (p_loss + p_anti - 1.0).abs() < 1e-12 {
        return Err(Error::NonInvertible(format!(
            "P_loss + P_anti = 1 (P_loss = {p_loss}, P_anti = {p_anti})"
        )));
    }
    Ok(ConfusionMatrix {
        n,
        single: [[1.0 - p_loss, p_loss], [p_anti, 1.0 - p_anti]],
    })
}

/// Applies the transpose of a 2x2 matrix to every qubit in turn.
fn apply_per_qubit(v: &[f64], n: usize, m: [[f64; 2]; 2]) -> Vec<f64> {
    let mut out = v.to_vec();
    for q in 0..n {
        let mask = 1usize << (n - 1 - q);
        for s in 0..out.len() {
            if s & mask == 0 {
                let (p0, p1) = (out[s], out[s | mask]);
                out[s] = m[0][0] * p0 + m[1][0] * p1;
                out[s | mask] = m[0][1] * p0 + m[1][1] * p1;
            }
        }
    }
    out
}

/// Observed distribution `q = R^T p` for a dense true distribution.
pub fn apply_readout(p: &[f64], r: &ConfusionMatrix) -> Result<Vec<f64>> {
    check_len(p, r)?;
    Ok(apply_per_qubit(p, r.n, r.single))
}

/// Exact inverse of [`apply_readout`].
pub fn mitigate(q: &[f64], r: &ConfusionMatrix) -> Result<Vec<f64>> {
    check_len(q, r)?;
    let [[a, b], [c, d]] = r.single;
    let det = a * d - b * c;
    if det.abs() < 1e-12 {
        return Err(Error::NonInvertible("singular single-qubit confusion matrix".into()));
    }
    let inv = [[d / det, -b / det], [-c / det, a / det]];
    Ok(apply_per_qubit(q, r.n, inv))
}

fn check_len(v: &[f64], r: &ConfusionMatrix) -> Result<()> {
    if v.len() != 1 << r.n {
        return Err(Error::WrongLength {
            expected: 1 << r.n,
            got: v.len(),
        });
    }
    Ok(())
}

/// Clips negative entries to zero and renormalizes. Returns whether any
/// entry was clipped.
pub fn clip_renormalize(p: &mut [f64]) -> bool {
    let mut clipped = false;
    for x in p.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
            clipped = true;
        }
    }
    let s: f64 = p.iter().sum();
    if clipped && s > 0.0 {
        p.iter_mut().for_each(|x| *x /= s);
    }
    clipped
}

/// Scales every X drive by `1 + gamma`; couplings are untouched.
pub fn drift(spec: &HamiltonianSpec, gamma: f64) -> HamiltonianSpec {
    let mut out = spec.clone();
    out.a.iter_mut().for_each(|a| *a *= 1.0 + gamma);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depolarize_examples() {
        assert_eq!(depolarize(0.3, 1.0), 0.3);
        assert!((depolarize(0.5, 0.8) - 0.45).abs() < 1e-15);
        assert_eq!(depolarize(0.0, 0.0), 0.25);
    }

    #[test]
    fn coherent_prep_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let q = std::f64::consts::FRAC_PI_4;
        let s = coherent_prep(q, 0.0, InitialKind::Plus);
        assert!((s[0].re - h).abs() < 1e-15 && (s[1].re - h).abs() < 1e-15);
        let s = coherent_prep(q, 0.01, InitialKind::Plus);
        assert_eq!(s[0].re, (q + 0.01).cos());
        assert_eq!(s[1].re, (q + 0.01).sin());
        let s = coherent_prep(q, q, InitialKind::Plus);
        assert!(s[0].norm() < 1e-15 && (s[1].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_qubit_readout() {
        let r = confusion_matrix(1, 0.01, 0.08).unwrap();
        let q = apply_readout(&[1.0, 0.0], &r).unwrap();
        assert!((q[0] - 0.99).abs() < 1e-15 && (q[1] - 0.01).abs() < 1e-15);
        let id = confusion_matrix(3, 0.0, 0.0).unwrap();
        let p = [0.1, 0.2, 0.0, 0.3, 0.1, 0.1, 0.15, 0.05];
        assert_eq!(apply_readout(&p, &id).unwrap(), p);
        assert!(matches!(confusion_matrix(2, 0.4, 0.6), Err(Error::NonInvertible(_))));
    }

    #[test]
    fn per_qubit_matches_dense_transpose() {
        let r = confusion_matrix(3, 0.03, 0.11).unwrap();
        let p = [0.1, 0.2, 0.0, 0.3, 0.1, 0.1, 0.15, 0.05];
        let dense = r.dense().transpose() * nalgebra::DVector::from_row_slice(&p);
        let fast = apply_readout(&p, &r).unwrap();
        for (a, b) in dense.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn clip_renormalize_counts() {
        let mut p = vec![0.6, -0.1, 0.5];
        assert!(clip_renormalize(&mut p));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let mut p = vec![0.5, 0.5];
        assert!(!clip_renormalize(&mut p));
    }

    #[test]
    fn drift_examples() {
        let spec = HamiltonianSpec::from_upper(2, 0.01, &[1.0]).unwrap();
        assert_eq!(drift(&spec, 0.0), spec);
        assert!((drift(&spec, 0.1).a[0] - 0.011).abs() < 1e-15);
        assert_eq!(drift(&spec, -1.0).a[0], 0.0);
        assert!(drift(&spec, -1.0).check_drive(0).is_err());
    }

    #[test]
    fn depolarized_distribution_matches_formula() {
        let pairs = crate::model::select_subspaces(4, 0, 3).unwrap();
        let mut probs = std::collections::BTreeMap::new();
        for (k, p) in pairs.iter().enumerate() {
            probs.insert(p.v_m, 0.1 * (k + 1) as f64);
            probs.insert(p.v_n, 1.0 / 3.0 - 0.1 * (k + 1) as f64);
        }
        let dist = Distribution { n: 4, probs };
        let noisy = depolarize_distribution(&dist, 0.7, &pairs);
        assert!((noisy.total() - 1.0).abs() < 1e-14);
        for p in &pairs {
            let rescaled = 3.0 * noisy.get(p.v_m);
            assert!((rescaled - depolarize(3.0 * dist.get(p.v_m), 0.7)).abs() < 1e-14);
        }
    }
}
