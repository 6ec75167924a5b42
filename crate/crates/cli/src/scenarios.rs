//! Scenario runners. Each returns a JSON-ready result and optional CSV table.

use anyhow::{bail, Context, Result};
use qspe_learn::learner::{learn_all, learn_pair, variance_mode, LearnReport, PairReport, SubspaceEstimate};
use qspe_learn::model::{block_decompose, enumerate_subspaces, project_block, HamiltonianSpec, BLOCK_TOL};
use qspe_learn::noise::NoiseConfig;
use qspe_learn::oracle::{dense_hamiltonian, dense_propagator, verify_block_structure, DenseOperator};
use qspe_learn::qspe::{cr_bound, invert_mapping, AngleVariance, Inversion};
use qspe_learn::rydberg::{benchmark, learn_distances, DistanceEstimate};
use qspe_learn::sim::{block_propagator, common_phase};
use qspe_learn::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Scenario};

/// Step of the numerical Jacobian used to propagate the CR bound.
const JACOBIAN_STEP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "kebab-case")]
pub enum Results {
    LearnPair {
        c_true: f64,
        a_true: f64,
        pair: PairReport,
    },
    LearnAll {
        c_true: Vec<Vec<f64>>,
        a_true: Vec<f64>,
        report: LearnReport,
    },
    SweepD(SweepResult),
    Robustness {
        cases: Vec<RobustnessCase>,
    },
    Rydberg {
        estimates: Vec<DistanceEstimate>,
    },
    DecomposeCheck {
        tolerance: f64,
        drives: Vec<DriveCheck>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub d: usize,
    pub seed: u64,
    pub c_hat: f64,
    pub var_boot: Option<f64>,
    /// Predicted `Var(c)` from the analytic angle variances.
    pub var_pred: f64,
    /// Cramer-Rao bound on the angles, propagated to `c`.
    pub cr_bound: f64,
    pub subspace: SubspaceEstimate,
    /// Fitted power law evaluated at `d`.
    pub slope_fit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub c_true: f64,
    pub points: Vec<SweepPoint>,
    /// Log-log slope of the variance column named by `fit_source`.
    pub slope: f64,
    pub intercept: f64,
    pub fit_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCase {
    pub case: String,
    pub noise: NoiseConfig,
    pub sweep: SweepResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveCheck {
    pub drive: usize,
    pub subspaces: usize,
    /// Largest element of `exp(-iHT)` between different subspaces.
    pub max_off_block: f64,
    /// Largest deviation of the projected 2x2 Hamiltonians from `H`.
    pub max_hamiltonian_mismatch: f64,
    /// Largest deviation of the block propagators from `exp(-iHT)`.
    pub max_propagator_mismatch: f64,
}

/// Output table: header and preformatted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// Full-precision float for CSV cells.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Least-squares fit of `ln y = intercept + slope ln x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `Var(B)` from angle variances through the Jacobian of the inversion.
fn propagate_b(sub: &SubspaceEstimate, var: &AngleVariance, method: Inversion) -> Result<f64> {
    let h = JACOBIAN_STEP;
    let (t, z) = (sub.estimate.theta_hat.max(h), sub.estimate.zeta_hat);
    let (_, bp) = invert_mapping(t + h, z, method)?;
    let (_, bm) = invert_mapping(t - h, z, method)?;
    let (_, bz) = invert_mapping(t, z + h, method)?;
    let (_, by) = invert_mapping(t, z - h, method)?;
    let (dbt, dbz) = ((bp - bm) / (2.0 * h), (bz - by) / (2.0 * h));
    Ok(dbt * dbt * var.theta + dbz * dbz * var.zeta)
}

fn sweep(cfg: &RunConfig, spec: &HamiltonianSpec, noise: &NoiseConfig, seed: u64) -> Result<SweepResult> {
    let opts = cfg.learn_options(noise);
    let ds = cfg.sweep_values();
    let mut points = ds
        .par_iter()
        .map(|&d| -> Result<SweepPoint> {
            let point_seed = seed.wrapping_add(d as u64);
            let exp = cfg.experiment_at(Some(spec), d, point_seed);
            let rep = learn_pair(spec, &exp, &opts).with_context(|| format!("sweep point d = {d}"))?;
            let sub = rep.report.subspaces[0].clone();
            let cr = cr_bound(exp.shots, d, sub.estimate.theta_hat, variance_mode(sub.active))?;
            let cr_c = propagate_b(&sub, &cr, opts.inversion)? / (exp.t * exp.t);
            Ok(SweepPoint {
                d,
                seed: point_seed,
                c_hat: rep.c_hat,
                var_boot: rep.var_boot.map(|b| b.c),
                var_pred: rep.var_pred_c,
                cr_bound: cr_c,
                subspace: sub,
                slope_fit: f64::NAN,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let boot = points.iter().all(|p| p.var_boot.is_some());
    let x: Vec<f64> = points.iter().map(|p| p.d as f64).collect();
    let y: Vec<f64> = points
        .iter()
        .map(|p| if boot { p.var_boot.unwrap_or(p.var_pred) } else { p.var_pred })
        .collect();
    let (slope, intercept) = loglog_fit(&x, &y);
    for p in &mut points {
        p.slope_fit = (intercept + slope * (p.d as f64).ln()).exp();
    }
    Ok(SweepResult {
        c_true: spec.c[0][1],
        points,
        slope,
        intercept,
        fit_source: if boot { "var_boot" } else { "var_pred" }.into(),
    })
}

fn sweep_rows(prefix: Option<&str>, s: &SweepResult) -> Vec<Vec<String>> {
    s.points
        .iter()
        .map(|p| {
            let mut row: Vec<String> = prefix.into_iter().map(str::to_string).collect();
            row.extend([
                p.d.to_string(),
                fmt_opt(p.var_boot),
                fmt_f64(p.var_pred),
                fmt_f64(p.cr_bound),
                fmt_f64(p.slope_fit),
            ]);
            row
        })
        .collect()
}

/// Single-component noise cases in a fixed order, then the joint case when
/// more than one component is configured.
pub fn robustness_cases(noise: &NoiseConfig) -> Vec<(String, NoiseConfig)> {
    let none = NoiseConfig::default;
    let mut cases = Vec::new();
    if noise.readout.is_some() {
        cases.push(("readout".to_string(), NoiseConfig { readout: noise.readout, ..none() }));
    }
    if noise.depol_alpha.is_some() {
        cases.push(("depolarizing".to_string(), NoiseConfig { depol_alpha: noise.depol_alpha, ..none() }));
    }
    if noise.prep_alpha.is_some() {
        cases.push(("prep".to_string(), NoiseConfig { prep_alpha: noise.prep_alpha, ..none() }));
    }
    if noise.drift_gamma.is_some() || noise.drift_schedule.is_some() {
        cases.push((
            "drift".to_string(),
            NoiseConfig {
                drift_gamma: noise.drift_gamma,
                drift_schedule: noise.drift_schedule.clone(),
                ..none()
            },
        ));
    }
    if cases.len() > 1 {
        cases.push(("joint".to_string(), noise.clone()));
    }
    cases
}

fn decompose_check(spec: &HamiltonianSpec, t: f64) -> Result<Vec<DriveCheck>> {
    (0..spec.n)
        .filter(|&q| spec.check_drive(q).is_ok())
        .map(|drive| {
            let pairs = enumerate_subspaces(spec, drive)?;
            let h = dense_hamiltonian(spec, drive)?;
            let dim = h.nrows();
            let mut perm = DenseOperator::zeros(dim, dim);
            for (k, p) in pairs.iter().enumerate() {
                perm[(p.v_m as usize, 2 * k)] = Complex64::new(1.0, 0.0);
                perm[(p.v_n as usize, 2 * k + 1)] = Complex64::new(1.0, 0.0);
            }
            let blocks = block_decompose(&h, &perm)?;
            let u = dense_propagator(&h, t)?;
            let mut ham: f64 = 0.0;
            let mut prop: f64 = 0.0;
            for (p, blk) in pairs.iter().zip(&blocks) {
                let b = project_block(spec, p, t)?;
                let e = Complex64::from_polar(b.a / t, spec.phi);
                let expected = [
                    [Complex64::new((b.c + b.b) / t, 0.0), e],
                    [e.conj(), Complex64::new((b.c - b.b) / t, 0.0)],
                ];
                let g = block_propagator(&b) * common_phase(&b);
                let idx = [p.v_m as usize, p.v_n as usize];
                for r in 0..2 {
                    for c in 0..2 {
                        ham = ham.max((blk[(r, c)] - expected[r][c]).norm());
                        prop = prop.max((u[(idx[r], idx[c])] - g[(r, c)]).norm());
                    }
                }
            }
            Ok(DriveCheck {
                drive,
                subspaces: pairs.len(),
                max_off_block: verify_block_structure(&u, &pairs),
                max_hamiltonian_mismatch: ham,
                max_propagator_mismatch: prop,
            })
        })
        .collect()
}

/// Runs the configured scenario. The config must already be validated.
pub fn execute(cfg: &RunConfig) -> Result<(Option<HamiltonianSpec>, Results, Option<Table>)> {
    let spec = match cfg.scenario {
        Scenario::Rydberg => None,
        _ => Some(cfg.spec()?),
    };
    let sweep_header = vec!["d", "var_boot", "var_pred", "cr_bound", "slope_fit"];
    let (results, table) = match (cfg.scenario, &spec) {
        (Scenario::LearnPair, Some(spec)) => {
            let exp = cfg.experiment_at(Some(spec), cfg.experiment.d.unwrap_or(0), cfg.seed);
            let pair = learn_pair(spec, &exp, &cfg.learn_options(&cfg.noise))?;
            let results = Results::LearnPair {
                c_true: spec.c[0][1],
                a_true: spec.a[0],
                pair,
            };
            (results, None)
        }
        (Scenario::LearnAll, Some(spec)) => {
            let exp = cfg.experiment_at(Some(spec), cfg.experiment.d.unwrap_or(0), cfg.seed);
            let report = learn_all(spec, &exp, &cfg.learn_options(&cfg.noise))?;
            let rows = qspe_learn::model::pairs(spec.n)
                .into_iter()
                .map(|(i, j)| {
                    vec![
                        i.to_string(),
                        j.to_string(),
                        fmt_f64(spec.c[i][j]),
                        fmt_f64(report.c_hat[i][j]),
                        fmt_f64(report.var_pred[i][j]),
                        fmt_opt(report.var_boot.as_ref().map(|v| v[i][j])),
                    ]
                })
                .collect();
            let table = Table {
                header: vec!["i", "j", "c_true", "c_hat", "var_pred", "var_boot"],
                rows,
            };
            let results = Results::LearnAll {
                c_true: spec.c.clone(),
                a_true: spec.a.clone(),
                report,
            };
            (results, Some(table))
        }
        (Scenario::SweepD, Some(spec)) => {
            let s = sweep(cfg, spec, &cfg.noise, cfg.seed)?;
            let table = Table {
                header: sweep_header,
                rows: sweep_rows(None, &s),
            };
            (Results::SweepD(s), Some(table))
        }
        (Scenario::Robustness, Some(spec)) => {
            let cases = robustness_cases(&cfg.noise);
            if cases.is_empty() {
                bail!("robustness needs at least one noise component");
            }
            let cases = cases
                .into_par_iter()
                .enumerate()
                .map(|(k, (case, noise))| {
                    let seed = cfg.seed.wrapping_add(1000 * k as u64);
                    let sweep = sweep(cfg, spec, &noise, seed).with_context(|| format!("case {case}"))?;
                    Ok(RobustnessCase { case, noise, sweep })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut header = vec!["case"];
            header.extend(sweep_header);
            let rows = cases.iter().flat_map(|c| sweep_rows(Some(&c.case), &c.sweep)).collect();
            (Results::Robustness { cases }, Some(Table { header, rows }))
        }
        (Scenario::Rydberg, _) => {
            let exp = cfg.experiment_at(None, cfg.experiment.d.unwrap_or(0), cfg.seed);
            let estimates = learn_distances(&benchmark(), &exp, &cfg.learn_options(&cfg.noise))?;
            let rows = estimates
                .iter()
                .map(|e| {
                    vec![
                        e.i.to_string(),
                        e.j.to_string(),
                        fmt_f64(e.r),
                        fmt_f64(e.r_hat),
                        fmt_f64(e.var_r),
                        fmt_f64(e.rel_err),
                        fmt_f64(e.c_hat),
                        fmt_f64(e.var_c),
                    ]
                })
                .collect();
            let table = Table {
                header: vec!["i", "j", "R", "R_hat", "var_R", "rel_err", "c_hat", "var_c"],
                rows,
            };
            (Results::Rydberg { estimates }, Some(table))
        }
        (Scenario::DecomposeCheck, Some(spec)) => {
            let t = cfg.time(Some(spec)).unwrap_or(0.0);
            let drives = decompose_check(spec, t)?;
            if drives.is_empty() {
                bail!("no qubit has a positive drive");
            }
            let worst = drives
                .iter()
                .map(|c| c.max_off_block.max(c.max_hamiltonian_mismatch).max(c.max_propagator_mismatch))
                .fold(0.0, f64::max);
            if worst > BLOCK_TOL {
                bail!("block structure violated: deviation {worst:e} exceeds {BLOCK_TOL:e}");
            }
            let rows = drives
                .iter()
                .map(|c| {
                    vec![
                        c.drive.to_string(),
                        c.subspaces.to_string(),
                        fmt_f64(c.max_off_block),
                        fmt_f64(c.max_hamiltonian_mismatch),
                        fmt_f64(c.max_propagator_mismatch),
                    ]
                })
                .collect();
            let table = Table {
                header: vec!["drive", "subspaces", "max_off_block", "max_hamiltonian_mismatch", "max_propagator_mismatch"],
                rows,
            };
            (
                Results::DecomposeCheck {
                    tolerance: BLOCK_TOL,
                    drives,
                },
                Some(table),
            )
        }
        (_, None) => bail!("scenario {} needs a spec", cfg.scenario.name()),
    };
    Ok((spec, results, table))
}
