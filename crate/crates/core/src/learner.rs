//! Learning rounds: experiment planning, acquisition, per-subspace
//! inference, linear recovery of the couplings, bootstrap and covariance
//! propagation, and resource accounting.
//!
//! Acquisition never depends on earlier estimates, so every circuit of every
//! round is simulated up front and the classical pipeline is a pure
//! function of the recorded observations. Bootstrap replicas resample the
//! observations and rerun only that pipeline.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::model::{
    coefficient_matrix, format_bits, pair_index, pairs, select_subspaces, unit, HamiltonianSpec, SubspacePair,
};
use crate::noise::{apply_readout, clip_renormalize, coherent_prep, confusion_matrix, depolarize_distribution, drift,
    mitigate, ConfusionMatrix, NoiseConfig};
use crate::qspe::{
    analytic_variance, estimate_angles, fourier, invert_mapping, omega_grid, AngleEstimate, AngleVariance,
    DepolarizingMode, EstimatorOptions, Inversion, ReconstructionSeries, VarianceMode,
};
use crate::sim::{
    run_circuit_with, sample_with, stream_rng, CircuitOptions, Distribution, ExperimentConfig, InitialKind, LogicalZ,
    Mode, Observation,
};

/// Step for the numerical Jacobian of the mapping inversion.
const JACOBIAN_STEP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LearnOptions {
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub logical_z: LogicalZ,
    #[serde(default)]
    pub inversion: Inversion,
    /// Bootstrap replicas; 0 skips the bootstrap.
    #[serde(default)]
    pub n_boot: usize,
    /// Feed exact Born probabilities instead of sampled counts.
    #[serde(default)]
    pub exact: bool,
    /// Overrides the estimator choice derived from `noise`.
    #[serde(default)]
    pub depolarizing: Option<DepolarizingMode>,
}

impl LearnOptions {
    pub fn estimator(&self) -> EstimatorOptions {
        EstimatorOptions {
            depolarizing: self.depolarizing.unwrap_or(if self.noise.depol_alpha.is_some() {
                DepolarizingMode::On
            } else {
                DepolarizingMode::Auto
            }),
            prep_alpha: self.noise.prep_alpha,
        }
    }
}

/// One drive round: the active subspaces and how circuits group them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub drive: usize,
    pub pairs: Vec<SubspacePair>,
    /// Qubits `j` whose coupling `c_{drive, j}` is unknown in this round.
    pub partners: Vec<usize>,
    /// Indices into `pairs` measured together in one circuit batch.
    pub batches: Vec<Vec<usize>>,
    pub config: ExperimentConfig,
}

impl RoundPlan {
    pub fn new(drive: usize, pairs: Vec<SubspacePair>, partners: Vec<usize>, config: ExperimentConfig) -> Self {
        let batches = match config.mode {
            Mode::Hybrid => vec![(0..pairs.len()).collect()],
            Mode::Analog => (0..pairs.len()).map(|k| vec![k]).collect(),
        };
        Self {
            drive,
            pairs,
            partners,
            batches,
            config,
        }
    }
}

/// Rounds for learning every coupling: drive `i` with `n - 1 - i` subspaces.
pub fn plan_rounds(n: usize, config: &ExperimentConfig) -> Result<Vec<RoundPlan>> {
    if n < 2 {
        return Err(Error::InvalidRequest(format!("need n >= 2, got {n}")));
    }
    (0..n - 1)
        .map(|drive| {
            let pairs = select_subspaces(n, drive, n - 1 - drive)?;
            Ok(RoundPlan::new(drive, pairs, (drive + 1..n).collect(), *config))
        })
        .collect()
}

/// Observations of one batch, indexed by omega-grid position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchData {
    pub plus: Vec<Observation>,
    pub i: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentData {
    /// `rounds[r][b]` for round `r`, batch `b`.
    pub rounds: Vec<Vec<BatchData>>,
}

impl ExperimentData {
    pub fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.rounds
            .iter()
            .flatten()
            .flat_map(|b| b.plus.iter().chain(b.i.iter()))
    }

    fn observations_mut(&mut self) -> impl Iterator<Item = &mut Observation> {
        self.rounds
            .iter_mut()
            .flatten()
            .flat_map(|b| b.plus.iter_mut().chain(b.i.iter_mut()))
    }
}

fn kind_index(kind: InitialKind) -> u64 {
    match kind {
        InitialKind::Plus => 0,
        InitialKind::I => 1,
    }
}

/// Outcome distribution seen by the detector for one circuit.
fn noisy_distribution(
    spec: &HamiltonianSpec,
    pairs: &[SubspacePair],
    config: &ExperimentConfig,
    j: usize,
    kind: InitialKind,
    options: &LearnOptions,
) -> Result<Distribution> {
    let noise = &options.noise;
    let gamma = noise.drift_at(j);
    let spec = if gamma != 0.0 {
        drift(spec, gamma)
    } else {
        spec.clone()
    };
    let circuit = CircuitOptions {
        logical_z: options.logical_z,
        prep: noise.prep_alpha.map(|a| coherent_prep(FRAC_PI_4, a, kind)),
    };
    let omega = omega_grid(config.d)[j];
    let mut dist = run_circuit_with(&spec, pairs, config, omega, kind, &circuit)?;
    if let Some(alpha) = noise.depol_alpha {
        dist = depolarize_distribution(&dist, alpha, pairs);
    }
    if let Some(r) = noise.readout {
        let cm = confusion_matrix(spec.n, r.p_loss, r.p_anti)?;
        dist = Distribution::from_dense(spec.n, &apply_readout(&dist.to_dense(), &cm)?);
    }
    Ok(dist)
}

/// Runs every circuit of every round. Each circuit draws from its own
/// random stream keyed by `(seed, round, batch, j, kind)`, so the result
/// does not depend on scheduling.
pub fn acquire(spec: &HamiltonianSpec, plans: &[RoundPlan], options: &LearnOptions) -> Result<ExperimentData> {
    options.noise.validate()?;
    let mut jobs = Vec::new();
    for (r, plan) in plans.iter().enumerate() {
        plan.config.validate()?;
        spec.check_drive(plan.drive)?;
        for b in 0..plan.batches.len() {
            for kind in [InitialKind::Plus, InitialKind::I] {
                for j in 0..2 * plan.config.d - 1 {
                    jobs.push((r, b, j, kind));
                }
            }
        }
    }
    let results: Vec<Observation> = jobs
        .par_iter()
        .map(|&(r, b, j, kind)| {
            let plan = &plans[r];
            let pairs: Vec<_> = plan.batches[b].iter().map(|&k| plan.pairs[k].clone()).collect();
            let dist = noisy_distribution(spec, &pairs, &plan.config, j, kind, options)?;
            Ok(if options.exact {
                Observation::Exact(dist)
            } else {
                let mut rng = stream_rng(plan.config.seed, &[r as u64, b as u64, j as u64, kind_index(kind)]);
                Observation::Shots(sample_with(&dist, plan.config.shots, &mut rng))
            })
        })
        .collect::<Result<_>>()?;
    let mut it = results.into_iter();
    let rounds = plans
        .iter()
        .map(|plan| {
            let m = 2 * plan.config.d - 1;
            plan.batches
                .iter()
                .map(|_| BatchData {
                    plus: it.by_ref().take(m).collect(),
                    i: it.by_ref().take(m).collect(),
                })
                .collect()
        })
        .collect();
    Ok(ExperimentData { rounds })
}

/// Inference for one invariant subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceEstimate {
    pub round: usize,
    pub drive: usize,
    /// Logical-zero bitstring.
    pub v_m: String,
    /// Subspaces sharing the circuit batch.
    pub active: usize,
    pub estimate: AngleEstimate,
    /// Recovered drive integral `A` (rad).
    pub a_int: f64,
    /// Recovered coupling integral `B` (rad).
    pub b_int: f64,
    /// Predicted angle variances.
    pub var_angles: AngleVariance,
    pub var_a_int: f64,
    pub var_b_int: f64,
}

/// Variance formula for a batch of `active` subspaces.
pub fn variance_mode(active: usize) -> VarianceMode {
    if active <= 1 {
        VarianceMode::Analog
    } else {
        VarianceMode::Hybrid { n: active + 1 }
    }
}

/// Measured distribution after readout mitigation.
fn mitigated(obs: &Observation, cm: Option<&ConfusionMatrix>, clipped: &mut usize) -> Result<Distribution> {
    let freq = obs.frequencies();
    let Some(cm) = cm else {
        return Ok(freq);
    };
    let mut p = mitigate(&freq.to_dense(), cm)?;
    if clip_renormalize(&mut p) {
        *clipped += 1;
    }
    Ok(Distribution::from_dense(freq.n, &p))
}

/// Rescaled logical-zero probabilities `K p(v_m)` per batch member and
/// omega index.
fn batch_probabilities(
    plan: &RoundPlan,
    batch: &[usize],
    data: &[Observation],
    cm: Option<&ConfusionMatrix>,
    clipped: &mut usize,
) -> Result<Vec<Vec<f64>>> {
    let k = batch.len() as f64;
    let mut out = vec![Vec::with_capacity(data.len()); batch.len()];
    for obs in data {
        let dist = mitigated(obs, cm, clipped)?;
        for (slot, &p) in out.iter_mut().zip(batch) {
            slot.push(k * dist.get(plan.pairs[p].v_m));
        }
    }
    Ok(out)
}

/// Propagates angle variances to `(Var A, Var B)` through the inversion.
fn integral_variances(est: &AngleEstimate, var: &AngleVariance, method: Inversion) -> Result<(f64, f64)> {
    let h = JACOBIAN_STEP;
    let (t, z) = (est.theta_hat.max(h), est.zeta_hat);
    let (ap, bp) = invert_mapping(t + h, z, method)?;
    let (am, bm) = invert_mapping(t - h, z, method)?;
    let (az, bz) = invert_mapping(t, z + h, method)?;
    let (ay, by) = invert_mapping(t, z - h, method)?;
    let (dat, dbt) = ((ap - am) / (2.0 * h), (bp - bm) / (2.0 * h));
    let (daz, dbz) = ((az - ay) / (2.0 * h), (bz - by) / (2.0 * h));
    Ok((
        dat * dat * var.theta + daz * daz * var.zeta,
        dbt * dbt * var.theta + dbz * dbz * var.zeta,
    ))
}

/// Classical inference of every subspace of every round.
pub fn infer_subspaces(
    plans: &[RoundPlan],
    data: &ExperimentData,
    options: &LearnOptions,
    clipped: &mut usize,
) -> Result<Vec<Vec<SubspaceEstimate>>> {
    if data.rounds.len() != plans.len() {
        return Err(Error::WrongLength {
            expected: plans.len(),
            got: data.rounds.len(),
        });
    }
    let est_opts = options.estimator();
    let mut out = Vec::with_capacity(plans.len());
    for (r, (plan, round)) in plans.iter().zip(&data.rounds).enumerate() {
        let n = plan.pairs[0].n;
        let cm = match options.noise.readout {
            Some(e) => Some(confusion_matrix(n, e.p_loss, e.p_anti)?),
            None => None,
        };
        let mut per_pair: Vec<Option<SubspaceEstimate>> = vec![None; plan.pairs.len()];
        for (batch, bd) in plan.batches.iter().zip(round) {
            let px = batch_probabilities(plan, batch, &bd.plus, cm.as_ref(), clipped)?;
            let py = batch_probabilities(plan, batch, &bd.i, cm.as_ref(), clipped)?;
            for (slot, &p) in batch.iter().enumerate() {
                let series = ReconstructionSeries::from_probabilities(&px[slot], &py[slot])?;
                let coeffs = fourier(&series)?;
                let estimate = estimate_angles(&coeffs, &est_opts)?;
                let (a_int, b_int) = invert_mapping(estimate.theta_hat, estimate.zeta_hat, options.inversion)?;
                let var_angles = analytic_variance(
                    plan.config.shots,
                    plan.config.d,
                    estimate.theta_hat,
                    variance_mode(batch.len()),
                )?;
                let (var_a_int, var_b_int) = integral_variances(&estimate, &var_angles, options.inversion)?;
                per_pair[p] = Some(SubspaceEstimate {
                    round: r,
                    drive: plan.drive,
                    v_m: format_bits(plan.pairs[p].v_m, n),
                    active: batch.len(),
                    estimate,
                    a_int,
                    b_int,
                    var_angles,
                    var_a_int,
                    var_b_int,
                });
            }
        }
        out.push(
            per_pair
                .into_iter()
                .map(|s| s.ok_or_else(|| Error::InvalidSelection("subspace missing from batches".into())))
                .collect::<Result<_>>()?,
        );
    }
    Ok(out)
}

/// Recovered parameters with predicted uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub n: usize,
    /// Symmetric coupling estimate (rad/us).
    pub c_hat: Vec<Vec<f64>>,
    /// Drive estimates for qubits used as drives (rad/us).
    pub a_hat: Vec<Option<f64>>,
    pub var_a: Vec<Option<f64>>,
    /// Predicted covariance of the couplings in `pairs(n)` order.
    pub covariance: Vec<Vec<f64>>,
    pub subspaces: Vec<SubspaceEstimate>,
    /// Observations whose mitigated distribution needed clipping.
    pub clipped: usize,
}

impl Reconstruction {
    pub fn upper(&self) -> Vec<f64> {
        pairs(self.n).iter().map(|&(p, q)| self.c_hat[p][q]).collect()
    }

    pub fn var_pred(&self) -> Vec<f64> {
        (0..self.covariance.len()).map(|k| self.covariance[k][k]).collect()
    }
}

/// `Sigma_c = Lambda^{-1} diag(var_m) Lambda^{-T}`.
pub fn propagate_covariance(lambda: &DMatrix<f64>, var_m: &[f64]) -> Result<DMatrix<f64>> {
    if lambda.nrows() != var_m.len() {
        return Err(Error::WrongLength {
            expected: lambda.nrows(),
            got: var_m.len(),
        });
    }
    let inv = lambda
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NonInvertible("recovery matrix is singular".into()))?;
    let s = DMatrix::from_diagonal(&DVector::from_row_slice(var_m));
    Ok(&inv * s * inv.transpose())
}

/// Solves `W x = rhs` by LU and checks the residual.
fn solve_checked(w: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let x = w
        .clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::NonInvertible("per-round system is singular".into()))?;
    let res = (w * &x - rhs).norm();
    if res > 1e-10 * rhs.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NonInvertible(format!("residual {res:e} too large")));
    }
    Ok(x)
}

/// Linear recovery of all couplings from per-subspace estimates.
pub fn recover_couplings(
    n: usize,
    plans: &[RoundPlan],
    subspaces: Vec<Vec<SubspaceEstimate>>,
    clipped: usize,
) -> Result<Reconstruction> {
    let np = n * (n - 1) / 2;
    let mut c_hat = vec![vec![0.0; n]; n];
    let mut a_hat = vec![None; n];
    let mut var_a = vec![None; n];
    let mut cov = DMatrix::<f64>::zeros(np, np);
    for (plan, subs) in plans.iter().zip(&subspaces) {
        let drive = plan.drive;
        let t = plan.config.t;
        let k = plan.pairs.len();
        let full = coefficient_matrix(&plan.pairs, drive)?;
        let w = full.restrict(&plan.partners)?.to_dmatrix();
        if w.nrows() != w.ncols() {
            return Err(Error::InvalidSelection(format!(
                "round {drive} has {} subspaces for {} unknowns",
                w.nrows(),
                w.ncols()
            )));
        }
        let known: Vec<usize> = (0..n).filter(|j| *j != drive && !plan.partners.contains(j)).collect();
        let mut l = DMatrix::<f64>::zeros(k, np);
        let mut rhs = DVector::<f64>::zeros(k);
        for (r, (pair, s)) in plan.pairs.iter().zip(subs).enumerate() {
            rhs[r] = s.b_int / t;
            for &j in &known {
                let lam = f64::from(pair.lambda_of(drive, j));
                rhs[r] -= lam * c_hat[drive][j];
                l[(r, pair_index(n, drive, j))] = lam;
            }
        }
        let x = solve_checked(&w, &rhs)?;
        for (idx, &j) in plan.partners.iter().enumerate() {
            c_hat[drive][j] = x[idx];
            c_hat[j][drive] = x[idx];
        }

        let winv = w
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NonInvertible("per-round system is singular".into()))?;
        let var_b: Vec<f64> = subs.iter().map(|s| s.var_b_int / (t * t)).collect();
        let own = &winv * DMatrix::from_diagonal(&DVector::from_vec(var_b)) * winv.transpose();
        let m = &winv * &l;
        let cross = -(&m * &cov);
        let block = own + &m * &cov * m.transpose();
        let idx: Vec<usize> = plan.partners.iter().map(|&j| pair_index(n, drive, j)).collect();
        for (a, &ia) in idx.iter().enumerate() {
            for col in 0..np {
                cov[(ia, col)] = cross[(a, col)];
                cov[(col, ia)] = cross[(a, col)];
            }
        }
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                cov[(ia, ib)] = block[(a, b)];
            }
        }

        let weights: f64 = subs.iter().map(|s| 1.0 / s.var_a_int).sum();
        let mean: f64 = subs.iter().map(|s| s.a_int / s.var_a_int).sum::<f64>() / weights;
        a_hat[drive] = Some(mean / t);
        var_a[drive] = Some(1.0 / weights / (t * t));
    }
    Ok(Reconstruction {
        n,
        c_hat,
        a_hat,
        var_a,
        covariance: (0..np).map(|r| cov.row(r).iter().copied().collect()).collect(),
        subspaces: subspaces.into_iter().flatten().collect(),
        clipped,
    })
}

/// Full classical pipeline over recorded observations.
pub fn reconstruct(n: usize, plans: &[RoundPlan], data: &ExperimentData, options: &LearnOptions) -> Result<Reconstruction> {
    let mut clipped = 0;
    let subs = infer_subspaces(plans, data, options, &mut clipped)?;
    if clipped > 0 {
        log::warn!("{clipped} mitigated distributions left the simplex and were clipped");
    }
    recover_couplings(n, plans, subs, clipped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub replicas: usize,
    /// Replicas whose pipeline failed and were left out.
    pub failures: usize,
}

/// Multinomial resample of every sampled observation; exact observations
/// are left unchanged.
pub fn resample(data: &ExperimentData, seed: u64, replica: u64) -> ExperimentData {
    let mut out = data.clone();
    for (idx, obs) in out.observations_mut().enumerate() {
        if let Observation::Shots(rec) = obs {
            let mut rng = stream_rng(seed, &[replica, idx as u64]);
            *rec = sample_with(&rec.frequencies(), rec.total, &mut rng);
        }
    }
    out
}

/// Bootstrap variance of every pipeline output.
pub fn bootstrap_variance<F>(data: &ExperimentData, pipeline: F, n_boot: usize, seed: u64) -> Result<BootstrapSummary>
where
    F: Fn(&ExperimentData) -> Result<Vec<f64>> + Sync,
{
    if n_boot < 100 {
        return Err(Error::InvalidRequest(format!("n_boot = {n_boot} must be >= 100")));
    }
    let runs: Vec<Option<Vec<f64>>> = (0..n_boot as u64)
        .into_par_iter()
        .map(|r| pipeline(&resample(data, seed, r)).ok())
        .collect();
    let ok: Vec<Vec<f64>> = runs.iter().flatten().cloned().collect();
    let failures = n_boot - ok.len();
    if failures * 10 > n_boot || ok.len() < 2 {
        return Err(Error::Undefined(format!(
            "{failures} of {n_boot} bootstrap replicas failed"
        )));
    }
    if failures > 0 {
        log::warn!("{failures} of {n_boot} bootstrap replicas failed and were skipped");
    }
    let dim = ok[0].len();
    let m = ok.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|k| ok.iter().map(|v| v[k]).sum::<f64>() / m).collect();
    let covariance: Vec<Vec<f64>> = (0..dim)
        .map(|a| {
            (0..dim)
                .map(|b| ok.iter().map(|v| (v[a] - mean[a]) * (v[b] - mean[b])).sum::<f64>() / (m - 1.0))
                .collect()
        })
        .collect();
    Ok(BootstrapSummary {
        variance: (0..dim).map(|k| covariance[k][k]).collect(),
        mean,
        covariance,
        replicas: ok.len(),
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    /// Experiment rounds: `n - 1` (hybrid) or `n(n-1)/2` batches (analog).
    pub rounds: usize,
    /// Distinct drive qubits used.
    pub drive_rounds: usize,
    pub circuits: usize,
    pub shots: u64,
    /// Total coherent evolution time (us).
    pub evolution_time: f64,
    /// Couplings recovered.
    pub parameters: usize,
}

/// Rounds, circuits, shots and evolution time for learning all couplings.
pub fn resource_accounting(n: usize, d: usize, shots: u64, t_cycle: f64, mode: Mode) -> Resources {
    let parameters = n * (n - 1) / 2;
    let rounds = match mode {
        Mode::Hybrid => n - 1,
        Mode::Analog => parameters,
    };
    let per_round = 2 * (2 * d - 1);
    Resources {
        rounds,
        drive_rounds: n - 1,
        circuits: rounds * per_round,
        shots: (rounds * per_round) as u64 * shots,
        evolution_time: (rounds * per_round) as f64 * d as f64 * shots as f64 * t_cycle,
        parameters,
    }
}

/// Device time for one signal angle: preparation plus `d` cycles of
/// evolution and logical-Z.
pub fn single_omega_time(t_prep: f64, t_evolve: f64, t_z: f64, d: usize) -> f64 {
    t_prep + (t_evolve + t_z) * d as f64
}

/// Device time for all `2(2d - 1)` circuits of one round.
pub fn round_time(d: usize, t_single: f64) -> f64 {
    (2 * (2 * d - 1)) as f64 * t_single
}

/// Result of learning every coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnReport {
    pub n: usize,
    pub mode: Mode,
    pub d: usize,
    pub shots: u64,
    #[serde(rename = "T")]
    pub t: f64,
    pub c_hat: Vec<Vec<f64>>,
    pub a_hat: Vec<Option<f64>>,
    /// Predicted coupling variances (symmetric, zero diagonal).
    pub var_pred: Vec<Vec<f64>>,
    pub var_pred_a: Vec<Option<f64>>,
    pub var_boot: Option<Vec<Vec<f64>>>,
    pub var_boot_a: Option<Vec<Option<f64>>>,
    /// Bootstrap variance of `(theta, zeta, alpha)` per subspace.
    pub var_boot_subspaces: Option<Vec<[f64; 3]>>,
    pub covariance_pred: Vec<Vec<f64>>,
    pub subspaces: Vec<SubspaceEstimate>,
    pub resources: Resources,
    pub readout_clipped: usize,
}

fn symmetric(n: usize, upper: &[f64]) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for (&(p, q), &v) in pairs(n).iter().zip(upper) {
        m[p][q] = v;
        m[q][p] = v;
    }
    m
}

/// Flattened pipeline outputs: couplings, drives of rounds, then
/// `(theta, zeta, alpha)` per subspace.
fn flatten(rec: &Reconstruction) -> Vec<f64> {
    let mut v = rec.upper();
    v.extend(rec.a_hat.iter().flatten());
    for s in &rec.subspaces {
        v.extend([s.estimate.theta_hat, s.estimate.zeta_hat, s.estimate.alpha_hat.unwrap_or(1.0)]);
    }
    v
}

fn run_learning(spec: &HamiltonianSpec, plans: &[RoundPlan], options: &LearnOptions) -> Result<(Reconstruction, Option<BootstrapSummary>)> {
    let data = acquire(spec, plans, options)?;
    let rec = reconstruct(spec.n, plans, &data, options)?;
    let boot = if options.n_boot > 0 {
        let seed = plans.first().map_or(0, |p| p.config.seed) ^ 0xb007_5742_u64;
        Some(bootstrap_variance(
            &data,
            |d| reconstruct(spec.n, plans, d, options).map(|r| flatten(&r)),
            options.n_boot,
            seed,
        )?)
    } else {
        None
    };
    Ok((rec, boot))
}

/// Learns every coupling with the mode given in `config`.
pub fn learn_all(spec: &HamiltonianSpec, config: &ExperimentConfig, options: &LearnOptions) -> Result<LearnReport> {
    spec.validate()?;
    config.validate()?;
    let plans = plan_rounds(spec.n, config)?;
    let (rec, boot) = run_learning(spec, &plans, options)?;
    let n = spec.n;
    let np = n * (n - 1) / 2;
    let drives: Vec<usize> = (0..n).filter(|&q| rec.a_hat[q].is_some()).collect();
    let (var_boot, var_boot_a, var_boot_subspaces) = match &boot {
        Some(b) => {
            let mut a = vec![None; n];
            for (k, &q) in drives.iter().enumerate() {
                a[q] = Some(b.variance[np + k]);
            }
            let off = np + drives.len();
            let subs = (0..rec.subspaces.len())
                .map(|s| [b.variance[off + 3 * s], b.variance[off + 3 * s + 1], b.variance[off + 3 * s + 2]])
                .collect();
            (Some(symmetric(n, &b.variance[..np])), Some(a), Some(subs))
        }
        None => (None, None, None),
    };
    Ok(LearnReport {
        n,
        mode: config.mode,
        d: config.d,
        shots: config.shots,
        t: config.t,
        var_pred: symmetric(n, &rec.var_pred()),
        var_pred_a: rec.var_a.clone(),
        c_hat: rec.c_hat.clone(),
        a_hat: rec.a_hat.clone(),
        var_boot,
        var_boot_a,
        var_boot_subspaces,
        covariance_pred: rec.covariance.clone(),
        subspaces: rec.subspaces.clone(),
        resources: resource_accounting(n, config.d, config.shots, config.t, config.mode),
        readout_clipped: rec.clipped,
    })
}

pub fn learn_all_hybrid(spec: &HamiltonianSpec, config: &ExperimentConfig, options: &LearnOptions) -> Result<LearnReport> {
    learn_all(spec, &ExperimentConfig { mode: Mode::Hybrid, ..*config }, options)
}

pub fn learn_all_analog(spec: &HamiltonianSpec, config: &ExperimentConfig, options: &LearnOptions) -> Result<LearnReport> {
    learn_all(spec, &ExperimentConfig { mode: Mode::Analog, ..*config }, options)
}

/// Two-qubit learning of `(a, c12)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub a_hat: f64,
    pub c_hat: f64,
    pub estimate: AngleEstimate,
    pub var_pred_c: f64,
    pub var_pred_a: f64,
    pub var_pred_angles: AngleVariance,
    /// Bootstrap variances of `c`, `a`, `theta`, `zeta`, `alpha`.
    pub var_boot: Option<PairBootstrap>,
    pub report: LearnReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBootstrap {
    pub c: f64,
    pub a: f64,
    pub theta: f64,
    pub zeta: f64,
    pub alpha: f64,
}

pub fn learn_pair(spec: &HamiltonianSpec, config: &ExperimentConfig, options: &LearnOptions) -> Result<PairReport> {
    if spec.n != 2 {
        return Err(Error::InvalidSpec(format!("learn_pair needs n = 2, got {}", spec.n)));
    }
    let report = learn_all(spec, config, options)?;
    let sub = &report.subspaces[0];
    let var_boot = match (&report.var_boot, &report.var_boot_a, &report.var_boot_subspaces) {
        (Some(c), Some(a), Some(s)) => Some(PairBootstrap {
            c: c[0][1],
            a: a[0].unwrap_or(0.0),
            theta: s[0][0],
            zeta: s[0][1],
            alpha: s[0][2],
        }),
        _ => None,
    };
    Ok(PairReport {
        a_hat: report.a_hat[0].unwrap_or(0.0),
        c_hat: report.c_hat[0][1],
        estimate: sub.estimate,
        var_pred_c: report.var_pred[0][1],
        var_pred_a: report.var_pred_a[0].unwrap_or(0.0),
        var_pred_angles: sub.var_angles,
        var_boot,
        report,
    })
}

/// Single-coupling estimate from two chosen subspaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetedReport {
    pub i: usize,
    pub j: usize,
    pub c_hat: f64,
    pub var_pred: f64,
    pub var_boot: Option<f64>,
    pub a_hat: f64,
    pub subspaces: Vec<SubspaceEstimate>,
}

/// Learns `c_ij` with drive `i` on the all-zero subspace and the one with
/// qubit `j` flipped: `B_0 - B_j = 2 c_ij T`, whatever the other couplings.
pub fn learn_coupling_targeted(
    spec: &HamiltonianSpec,
    i: usize,
    j: usize,
    config: &ExperimentConfig,
    options: &LearnOptions,
) -> Result<TargetedReport> {
    spec.validate()?;
    config.validate()?;
    if i == j || j >= spec.n {
        return Err(Error::InvalidRequest(format!("invalid coupling ({i}, {j})")));
    }
    spec.check_drive(i)?;
    let pairs = vec![
        SubspacePair::new(spec.n, i, 0)?,
        SubspacePair::new(spec.n, i, unit(spec.n, j))?,
    ];
    let plan = RoundPlan::new(i, pairs, vec![j], *config);
    let plans = [plan];
    let data = acquire(spec, &plans, options)?;
    let t = config.t;
    let pipeline = |d: &ExperimentData| -> Result<(f64, Vec<SubspaceEstimate>)> {
        let mut clipped = 0;
        let subs = infer_subspaces(&plans, d, options, &mut clipped)?.remove(0);
        Ok(((subs[0].b_int - subs[1].b_int) / (2.0 * t), subs))
    };
    let (c_hat, subs) = pipeline(&data)?;
    let var_pred = (subs[0].var_b_int + subs[1].var_b_int) / (4.0 * t * t);
    let weights = 1.0 / subs[0].var_a_int + 1.0 / subs[1].var_a_int;
    let a_hat = (subs[0].a_int / subs[0].var_a_int + subs[1].a_int / subs[1].var_a_int) / weights / t;
    let var_boot = if options.n_boot > 0 {
        let b = bootstrap_variance(&data, |d| pipeline(d).map(|(c, _)| vec![c]), options.n_boot, config.seed ^ 0x7a26_e7ed)?;
        Some(b.variance[0])
    } else {
        None
    };
    Ok(TargetedReport {
        i,
        j,
        c_hat,
        var_pred,
        var_boot,
        a_hat,
        subspaces: subs,
    })
}
