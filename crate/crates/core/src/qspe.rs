//! QSPE inference: reconstruction series, Fourier coefficients, angle
//! estimators, mapping inversion and variance predictions.
//!
//! For a block gate
//! `U = [[cos t e^{-i z}, -i sin t e^{i x}], [-i sin t e^{-i x}, cos t e^{i z}]]`
//! the positive-index coefficients are `c_k ~ i t e^{-i x} e^{-i (2k+1) z}`
//! to leading order in `d t`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// `|Delta_k|` above this triggers a phase-wrap warning.
pub const PHASE_WRAP_WARN: f64 = 0.75 * PI;

/// `d theta` above this leaves the small-angle regime of the variance
/// formulas.
pub const REGIME_LIMIT: f64 = 0.2;

/// Fidelity below which the rescaled estimators switch on automatically.
pub const AUTO_RESCALE_BELOW: f64 = 0.98;

/// Signal angles `omega_j = j pi / (2d - 1)`.
pub fn omega_grid(d: usize) -> Vec<f64> {
    let m = 2 * d - 1;
    (0..m).map(|j| j as f64 * PI / m as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSeries {
    pub omegas: Vec<f64>,
    pub h: Vec<Complex64>,
}

impl ReconstructionSeries {
    pub fn new(d: usize, h: Vec<Complex64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidRequest(format!("d = {d} must be >= 2")));
        }
        if h.len() != 2 * d - 1 {
            return Err(Error::WrongLength {
                expected: 2 * d - 1,
                got: h.len(),
            });
        }
        Ok(Self {
            omegas: omega_grid(d),
            h,
        })
    }

    /// `h_j = p_X - 1/2 + i (p_Y - 1/2)`.
    pub fn from_probabilities(p_x: &[f64], p_y: &[f64]) -> Result<Self> {
        if p_x.len() != p_y.len() {
            return Err(Error::WrongLength {
                expected: p_x.len(),
                got: p_y.len(),
            });
        }
        if p_x.len() % 2 == 0 {
            return Err(Error::InvalidRequest(format!(
                "series length {} must be odd",
                p_x.len()
            )));
        }
        let h = p_x
            .iter()
            .zip(p_y)
            .map(|(&x, &y)| Complex64::new(x - 0.5, y - 0.5))
            .collect();
        Self::new((p_x.len() + 1) / 2, h)
    }

    pub fn d(&self) -> usize {
        (self.h.len() + 1) / 2
    }
}

/// DFT coefficients stored as `k = 0..d-1` followed by `k = -d+1..-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCoeffs {
    pub d: usize,
    pub c: Vec<Complex64>,
}

impl FourierCoeffs {
    pub fn new(d: usize, c: Vec<Complex64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidRequest(format!("d = {d} must be >= 2")));
        }
        if c.len() != 2 * d - 1 {
            return Err(Error::WrongLength {
                expected: 2 * d - 1,
                got: c.len(),
            });
        }
        Ok(Self { d, c })
    }

    /// Coefficient `c_k` for `-d < k < d`.
    pub fn get(&self, k: isize) -> Complex64 {
        let m = self.c.len() as isize;
        self.c[k.rem_euclid(m) as usize]
    }

    /// Positive-index coefficients `c_0..c_{d-1}`.
    pub fn positive(&self) -> &[Complex64] {
        &self.c[..self.d]
    }

    /// Negative-index coefficients `c_{-d+1}..c_{-1}`.
    pub fn negative(&self) -> &[Complex64] {
        &self.c[self.d..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    pub theta_hat: f64,
    pub zeta_hat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_hat: Option<f64>,
}

/// `c_k = (1/(2d-1)) sum_j e^{-2 pi i j k / (2d-1)} h_j`.
pub fn fourier(series: &ReconstructionSeries) -> Result<FourierCoeffs> {
    let m = series.h.len();
    if m % 2 == 0 || m < 3 || series.omegas.len() != m {
        return Err(Error::WrongLength {
            expected: 2 * series.d() - 1,
            got: m,
        });
    }
    let c = (0..m)
        .map(|k| {
            series
                .h
                .iter()
                .enumerate()
                .map(|(j, &h)| h * Complex64::from_polar(1.0, -2.0 * PI * ((j * k) % m) as f64 / m as f64))
                .sum::<Complex64>()
                / m as f64
        })
        .collect();
    FourierCoeffs::new((m + 1) / 2, c)
}

/// `h_j = sum_k c_k e^{2 i k omega_j}`.
pub fn inverse(coeffs: &FourierCoeffs) -> Vec<Complex64> {
    let m = coeffs.c.len();
    (0..m)
        .map(|j| {
            coeffs
                .c
                .iter()
                .enumerate()
                .map(|(k, &c)| c * Complex64::from_polar(1.0, 2.0 * PI * ((j * k) % m) as f64 / m as f64))
                .sum()
        })
        .collect()
}

/// Mean of `|c_0|..|c_{d-1}|`.
pub fn estimate_theta(coeffs: &FourierCoeffs) -> f64 {
    coeffs.positive().iter().map(|c| c.norm()).sum::<f64>() / coeffs.d as f64
}

/// `Delta_k = arg(c_k conj(c_{k+1}))` for `k = 0..d-2`.
pub fn phase_differences(coeffs: &FourierCoeffs) -> Result<Vec<f64>> {
    let pos = coeffs.positive();
    if let Some(index) = pos.iter().position(|c| c.norm() == 0.0) {
        return Err(Error::UndefinedPhase { index });
    }
    Ok(pos.windows(2).map(|w| (w[0] * w[1].conj()).arg()).collect())
}

/// Solves the `(2, -1)` tridiagonal system of size `rhs.len()`.
fn solve_laplacian(rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    for i in 0..n {
        let denom = 2.0 + if i > 0 { cp[i - 1] } else { 0.0 };
        cp[i] = -1.0 / denom;
        dp[i] = (rhs[i] + if i > 0 { dp[i - 1] } else { 0.0 }) / denom;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = dp[i] - if i + 1 < n { cp[i] * x[i + 1] } else { 0.0 };
    }
    x
}

/// Half the Laplacian-weighted mean of the phase differences.
pub fn estimate_zeta(coeffs: &FourierCoeffs) -> Result<f64> {
    let delta = phase_differences(coeffs)?;
    if let Some(k) = delta.iter().position(|x| x.abs() > PHASE_WRAP_WARN) {
        log::warn!(
            "phase difference {k} is {:.3} rad, close to the wrap at pi; shorten T",
            delta[k]
        );
    }
    let w = solve_laplacian(&vec![1.0; delta.len()]);
    let num: f64 = w.iter().zip(&delta).map(|(a, b)| a * b).sum();
    let den: f64 = w.iter().sum();
    Ok(0.5 * num / den)
}

/// Drive phase from `arg(c_0) = pi/2 - chi - zeta`.
pub fn estimate_chi(coeffs: &FourierCoeffs, zeta_hat: f64) -> f64 {
    let x = FRAC_PI_2 - zeta_hat - coeffs.get(0).arg();
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Paper-literal fidelity estimate `1 - 2 sqrt(2) (|c_0| - mean_{k>=1} |c_k|)`.
///
/// Biased by roughly `4.8 alpha theta` because the depolarizing offset of
/// `c_0` is not parallel to `c_0`; kept for comparison.
pub fn fidelity_from_magnitudes(coeffs: &FourierCoeffs) -> f64 {
    let m = mean_tail(coeffs);
    1.0 - 2.0 * 2f64.sqrt() * (coeffs.get(0).norm() - m)
}

fn mean_tail(coeffs: &FourierCoeffs) -> f64 {
    coeffs.positive()[1..].iter().map(|c| c.norm()).sum::<f64>() / (coeffs.d - 1) as f64
}

/// Removes the depolarizing offset `-(1 - alpha)(1 + i)/4` from `c_0`.
///
/// The offset lies along `u = (1 + i)/sqrt(2)`. The component of `c_0` along
/// `v = i u` is kept, and the `u` component is rebuilt so that `|c_0|` matches
/// the mean magnitude of `c_1..c_{d-1}`. Returns the corrected coefficients
/// and the fidelity implied by the removed offset.
pub fn remove_depolarizing_offset(coeffs: &FourierCoeffs) -> Result<(FourierCoeffs, f64)> {
    if coeffs.d < 3 {
        return Err(Error::InvalidRequest(format!(
            "rescaled estimators need d >= 3, got {}",
            coeffs.d
        )));
    }
    let u = Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
    let v = Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2);
    let c0 = coeffs.get(0);
    let m = mean_tail(coeffs);
    let y = (v.conj() * c0).re;
    let x_obs = (u.conj() * c0).re;
    let x = (m * m - y * y).max(0.0).sqrt();
    let alpha = 1.0 - 2.0 * 2f64.sqrt() * (x - x_obs);
    let mut out = coeffs.clone();
    out.c[0] = u * x + v * y;
    Ok((out, alpha))
}

/// Depolarizing fidelity and the rescaled swap angle.
pub fn rescaled_estimators(coeffs: &FourierCoeffs) -> Result<(f64, f64)> {
    let (_, alpha) = remove_depolarizing_offset(coeffs)?;
    if !(alpha > 0.0) {
        return Err(Error::UnusableFidelity(alpha));
    }
    Ok((alpha, mean_tail(coeffs) / alpha))
}

fn check_prep_alpha(alpha: f64) -> Result<f64> {
    let c2 = (2.0 * alpha).cos();
    if !(c2 > 0.0) {
        return Err(Error::InvalidRequest(format!(
            "cos(2 alpha) = {c2} must be positive"
        )));
    }
    Ok(c2)
}

/// `estimate_theta / cos(2 alpha)`.
pub fn scaled_prep_estimator(coeffs: &FourierCoeffs, prep_alpha: f64) -> Result<f64> {
    Ok(estimate_theta(coeffs) / check_prep_alpha(prep_alpha)?)
}

/// `sqrt(2) (d + 1)^2 tan(2 alpha) sin^2(theta)`.
pub fn prep_bound(d: usize, alpha: f64, theta: f64) -> f64 {
    let d1 = (d + 1) as f64;
    2f64.sqrt() * d1 * d1 * (2.0 * alpha).tan() * theta.sin().powi(2)
}

/// Whether a measured discrepancy respects [`prep_bound`].
pub fn prep_bound_holds(discrepancy: f64, d: usize, alpha: f64, theta: f64) -> bool {
    discrepancy.abs() <= prep_bound(d, alpha, theta)
}

/// Undoes a known preparation over-rotation: removes the
/// `(sin 2a / 2)(-1 + i)` offset from `c_0` and rescales by `1/cos 2a`.
pub fn mitigate_prep_error(coeffs: &FourierCoeffs, prep_alpha: f64) -> Result<FourierCoeffs> {
    let c2 = check_prep_alpha(prep_alpha)?;
    let mut out = coeffs.clone();
    out.c[0] -= Complex64::new(-1.0, 1.0) * (0.5 * (2.0 * prep_alpha).sin());
    out.c.iter_mut().for_each(|c| *c /= c2);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepolarizingMode {
    Off,
    /// Rescale when the estimated fidelity drops below
    /// [`AUTO_RESCALE_BELOW`].
    #[default]
    Auto,
    On,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub depolarizing: DepolarizingMode,
    /// Known preparation over-rotation to undo.
    pub prep_alpha: Option<f64>,
}

/// Estimates `(theta, zeta)` with the configured mitigations.
pub fn estimate_angles(coeffs: &FourierCoeffs, options: &EstimatorOptions) -> Result<AngleEstimate> {
    let base = match options.prep_alpha {
        Some(a) => mitigate_prep_error(coeffs, a)?,
        None => coeffs.clone(),
    };
    let mut alpha_hat = None;
    let mut used = base.clone();
    let mut theta_hat = estimate_theta(&base);
    if base.d >= 3 && options.depolarizing != DepolarizingMode::Off {
        let (corrected, alpha) = remove_depolarizing_offset(&base)?;
        alpha_hat = Some(alpha);
        if options.depolarizing == DepolarizingMode::On || alpha < AUTO_RESCALE_BELOW {
            if !(alpha > 0.0) {
                return Err(Error::UnusableFidelity(alpha));
            }
            theta_hat = estimate_theta(&corrected) / alpha;
            used = corrected;
        }
    } else if options.depolarizing == DepolarizingMode::On {
        return Err(Error::InvalidRequest("rescaled estimators need d >= 3".into()));
    }
    let zeta_hat = estimate_zeta(&used)?;
    Ok(AngleEstimate {
        theta_hat,
        zeta_hat,
        alpha_hat,
        chi_hat: Some(estimate_chi(&used, zeta_hat)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inversion {
    SmallAngle,
    #[default]
    Newton,
}

/// `sin(x)/x` with its series near zero.
fn sinc(w: f64) -> f64 {
    if w < 1e-4 {
        1.0 - w * w / 6.0
    } else {
        w.sin() / w
    }
}

/// `tan(x)/x` with its series near zero.
fn tanc(w: f64) -> f64 {
    if w < 1e-4 {
        1.0 + w * w / 3.0
    } else {
        w.tan() / w
    }
}

/// `sinc'(w)/w`.
fn dsinc_over_w(w: f64) -> f64 {
    if w < 1e-4 {
        -1.0 / 3.0 + w * w / 30.0
    } else {
        (w * w.cos() - w.sin()) / (w * w * w)
    }
}

/// `tanc'(w)/w`.
fn dtanc_over_w(w: f64) -> f64 {
    if w < 1e-4 {
        2.0 / 3.0 + 8.0 * w * w / 15.0
    } else {
        let c = w.cos();
        (w / (c * c) - w.tan()) / (w * w * w)
    }
}

/// Gate angles of a block: `sin(theta) = A sin(w)/w`,
/// `tan(zeta) = B tan(w)/w`, `w = sqrt(A^2 + B^2)`.
pub fn forward_map(a: f64, b: f64) -> (f64, f64) {
    let w = a.hypot(b);
    ((a * sinc(w)).asin(), (b * tanc(w)).atan())
}

/// Recovers `(A, B)` from `(theta, zeta)` on the branch `A >= 0`,
/// `sign(B) = sign(zeta)`, `sqrt(A^2 + B^2) < pi/2`.
pub fn invert_mapping(theta: f64, zeta: f64, method: Inversion) -> Result<(f64, f64)> {
    if !(theta.is_finite() && zeta.is_finite()) || theta < 0.0 || theta >= FRAC_PI_2 || zeta.abs() >= FRAC_PI_2 {
        return Err(Error::OutOfBranch(format!("theta = {theta}, zeta = {zeta}")));
    }
    let (mut a, mut b) = (theta, zeta.tan());
    if method == Inversion::SmallAngle {
        return Ok((a, b));
    }
    let (st, tz) = (theta.sin(), zeta.tan());
    let mut residual = f64::INFINITY;
    for _ in 0..50 {
        let w = a.hypot(b);
        if w >= FRAC_PI_2 {
            return Err(Error::OutOfBranch(format!("Newton step left the branch at w = {w}")));
        }
        let (s, t) = (sinc(w), tanc(w));
        let f1 = a * s - st;
        let f2 = b * t - tz;
        residual = f1.abs().max(f2.abs());
        if residual <= 1e-12 {
            return Ok((a, b));
        }
        let (gs, gt) = (dsinc_over_w(w), dtanc_over_w(w));
        let j11 = s + a * a * gs;
        let j12 = a * b * gs;
        let j21 = a * b * gt;
        let j22 = t + b * b * gt;
        let det = j11 * j22 - j12 * j21;
        a -= (j22 * f1 - j12 * f2) / det;
        b -= (j11 * f2 - j21 * f1) / det;
    }
    let w = a.hypot(b);
    let f = (a * sinc(w) - st).abs().max((b * tanc(w) - tz).abs());
    if f <= 1e-12 {
        return Ok((a, b));
    }
    Err(Error::NonConvergence {
        iterations: 50,
        residual: residual.min(f),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum VarianceMode {
    Analog,
    /// Parallel mode on an `n`-qubit register.
    Hybrid { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleVariance {
    pub theta: f64,
    pub zeta: f64,
}

fn check_variance_inputs(shots: u64, d: usize, theta: f64, mode: VarianceMode) -> Result<()> {
    if shots == 0 || d < 2 {
        return Err(Error::InvalidRequest(format!("need N >= 1 and d >= 2, got N = {shots}, d = {d}")));
    }
    if let VarianceMode::Hybrid { n } = mode {
        if n < 2 {
            return Err(Error::InvalidRequest(format!("hybrid variance needs n >= 2, got {n}")));
        }
    }
    if theta == 0.0 || !theta.is_finite() {
        return Err(Error::Undefined(format!("zeta variance at theta = {theta}")));
    }
    if d as f64 * theta.abs() > REGIME_LIMIT {
        log::warn!("d * theta = {:.3} exceeds {REGIME_LIMIT}; variance formulas lose accuracy", d as f64 * theta);
    }
    Ok(())
}

/// Leading-order estimator variances:
/// analog `1/(8Nd^2)`, `3/(8Nd^4 theta^2)`;
/// hybrid `n/(4Nd^2)`, `3n/(4Nd^4 theta^2)`.
pub fn analytic_variance(shots: u64, d: usize, theta: f64, mode: VarianceMode) -> Result<AngleVariance> {
    check_variance_inputs(shots, d, theta, mode)?;
    let (nn, dd, t2) = (shots as f64, d as f64, theta * theta);
    Ok(match mode {
        VarianceMode::Analog => AngleVariance {
            theta: 1.0 / (8.0 * nn * dd * dd),
            zeta: 3.0 / (8.0 * nn * dd.powi(4) * t2),
        },
        VarianceMode::Hybrid { n } => {
            let n = n as f64;
            AngleVariance {
                theta: n / (4.0 * nn * dd * dd),
                zeta: 3.0 * n / (4.0 * nn * dd.powi(4) * t2),
            }
        }
    })
}

/// Optimal Cramer-Rao values: the large-`d` limit of the inverse Fisher
/// information of [`fisher_information`], with the hybrid count factor
/// `2K - 1` taken at its large-`n` value `2n`.
pub fn cr_bound(shots: u64, d: usize, theta: f64, mode: VarianceMode) -> Result<AngleVariance> {
    check_variance_inputs(shots, d, theta, mode)?;
    let weight = match mode {
        VarianceMode::Analog => 1.0,
        VarianceMode::Hybrid { n } => 2.0 * n as f64,
    };
    // Per-coefficient variance of a radial or tangential component.
    let nn = shots as f64;
    let dd = d as f64;
    let radial = weight / (8.0 * nn * dd);
    Ok(AngleVariance {
        theta: radial / dd,
        zeta: 3.0 * radial / (dd.powi(3) * theta * theta),
    })
}

/// Number of outcomes sharing the shot budget: 1 (analog) or `n - 1`.
fn active_pairs(mode: VarianceMode) -> f64 {
    match mode {
        VarianceMode::Analog => 1.0,
        VarianceMode::Hybrid { n } => (n - 1) as f64,
    }
}

/// Fisher information of `(theta, zeta, chi)` from the positive Fourier
/// coefficients, each carrying independent Gaussian noise with the
/// variance implied by multinomial shot noise.
pub fn fisher_information(shots: u64, d: usize, theta: f64, mode: VarianceMode) -> Result<[[f64; 3]; 3]> {
    check_variance_inputs(shots, d, theta, mode)?;
    let k = active_pairs(mode);
    let dd = d as f64;
    // Complex variance of each c_k, split evenly over two components.
    let s2 = (2.0 * k - 1.0) / (2.0 * shots as f64 * (2.0 * dd - 1.0));
    let inv = 2.0 / s2;
    let t2 = theta * theta;
    let sum_sq = dd * (4.0 * dd * dd - 1.0) / 3.0;
    Ok([
        [inv * dd, 0.0, 0.0],
        [0.0, inv * sum_sq * t2, inv * dd * dd * t2],
        [0.0, inv * dd * dd * t2, inv * dd * t2],
    ])
}

/// Diagonal of the inverse of [`fisher_information`] for `(theta, zeta)`:
/// `(2K-1)/(4Nd(2d-1))` and `3(2K-1)/(4N(2d-1)(d-1)d(d+1) theta^2)`.
pub fn cr_bound_exact(shots: u64, d: usize, theta: f64, mode: VarianceMode) -> Result<AngleVariance> {
    let f = fisher_information(shots, d, theta, mode)?;
    let det_zc = f[1][1] * f[2][2] - f[1][2] * f[2][1];
    if d < 2 || det_zc <= 0.0 {
        return Err(Error::Undefined("singular Fisher information".into()));
    }
    Ok(AngleVariance {
        theta: 1.0 / f[0][0],
        zeta: f[2][2] / det_zc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal(theta: f64, zeta: f64, d: usize) -> FourierCoeffs {
        let mut c = vec![Complex64::new(0.0, 0.0); 2 * d - 1];
        for k in 0..d {
            c[k] = Complex64::new(0.0, theta) * Complex64::from_polar(1.0, -((2 * k + 1) as f64) * zeta);
        }
        FourierCoeffs::new(d, c).unwrap()
    }

    #[test]
    fn grid_is_increasing_in_range() {
        let g = omega_grid(6);
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]) && *g.last().unwrap() < PI);
    }

    #[test]
    fn constant_and_single_tone() {
        let d = 4;
        let g = Complex64::new(0.3, -0.2);
        let c = fourier(&ReconstructionSeries::new(d, vec![g; 7]).unwrap()).unwrap();
        assert!((c.get(0) - g).norm() < 1e-15);
        assert!(c.c[1..].iter().all(|x| x.norm() < 1e-15));

        let h = omega_grid(d).iter().map(|w| Complex64::from_polar(1.0, 2.0 * w)).collect();
        let c = fourier(&ReconstructionSeries::new(d, h).unwrap()).unwrap();
        assert!((c.get(1) - 1.0).norm() < 1e-14);
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(matches!(
            ReconstructionSeries::new(3, vec![Complex64::new(0.0, 0.0); 4]),
            Err(Error::WrongLength { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn fixed_point() {
        let c = ideal(0.05, 0.02, 8);
        assert!((estimate_theta(&c) - 0.05).abs() < 1e-15);
        assert!((estimate_zeta(&c).unwrap() - 0.02).abs() < 1e-15);
        assert!(phase_differences(&c).unwrap().iter().all(|x| (x - 0.04).abs() < 1e-14));
        let c = ideal(0.05, 0.0, 8);
        assert_eq!(estimate_zeta(&c).unwrap(), 0.0);
    }

    #[test]
    fn zero_coefficient_has_no_phase() {
        let mut c = ideal(0.05, 0.02, 4);
        c.c[2] = Complex64::new(0.0, 0.0);
        assert_eq!(phase_differences(&c), Err(Error::UndefinedPhase { index: 2 }));
    }

    #[test]
    fn laplacian_solve() {
        let x = solve_laplacian(&[1.0, 1.0, 1.0]);
        // D^{-1} 1 for the 3x3 (2, -1) matrix is (1.5, 2, 1.5).
        for (a, b) in x.iter().zip([1.5, 2.0, 1.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn invert_round_trip_and_closed_form() {
        let (t, z) = forward_map(0.01, 0.04);
        let (a, b) = invert_mapping(t, z, Inversion::Newton).unwrap();
        assert!((a - 0.01).abs() < 1e-12 && (b - 0.04).abs() < 1e-12);
        // Closed form: w = acos(cos t cos z).
        let w = (t.cos() * z.cos()).acos();
        assert!((w * t.sin() / w.sin() - a).abs() < 1e-12);
        assert!((w * t.cos() * z.sin() / w.sin() - b).abs() < 1e-12);
        assert_eq!(invert_mapping(0.0, 0.0, Inversion::Newton).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn invert_rejects_out_of_branch() {
        assert!(invert_mapping(-0.1, 0.0, Inversion::Newton).is_err());
        assert!(invert_mapping(0.1, 1.6, Inversion::Newton).is_err());
    }

    #[test]
    fn variance_examples() {
        let v = analytic_variance(100_000, 10, 0.01, VarianceMode::Analog).unwrap();
        assert!((v.zeta - 3.75e-6).abs() < 1e-18);
        let h = analytic_variance(100_000, 10, 0.01, VarianceMode::Hybrid { n: 5 }).unwrap();
        assert!((h.theta / v.theta - 10.0).abs() < 1e-12);
        assert!(matches!(
            analytic_variance(1, 10, 0.0, VarianceMode::Analog),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn exact_bound_approaches_closed_form() {
        let e = cr_bound_exact(1000, 400, 1e-4, VarianceMode::Analog).unwrap();
        let c = cr_bound(1000, 400, 1e-4, VarianceMode::Analog).unwrap();
        assert!((e.theta / c.theta - 1.0).abs() < 2e-3);
        assert!((e.zeta / c.zeta - 1.0).abs() < 2e-3);
        let e = cr_bound_exact(1000, 10, 0.01, VarianceMode::Hybrid { n: 4 }).unwrap();
        let want = 5.0 / (4.0 * 1000.0 * 10.0 * 19.0);
        assert!((e.theta - want).abs() < 1e-15);
        let want = 3.0 * 5.0 / (4.0 * 1000.0 * 19.0 * 990.0 * 1e-4);
        assert!((e.zeta / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prep_bound_value() {
        let want = 2f64.sqrt() * 121.0 * 0.02f64.tan() * 0.01f64.sin().powi(2);
        assert_eq!(prep_bound(10, 0.01, 0.01), want);
    }
}
