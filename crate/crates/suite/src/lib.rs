//! Acceptance criteria for the learning toolkit.
//!
//! Each criterion returns an [`Outcome`]; the `acceptance` test target runs
//! them all and prints one line per criterion.

use std::fmt;

use qspe_learn::learner::*;
use qspe_learn::model::*;
use qspe_learn::noise::*;
use qspe_learn::oracle::*;
use qspe_learn::qspe::*;
use qspe_learn::rydberg;
use qspe_learn::sim::*;
use qspe_learn::{Complex64, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Drive strength shared by the benchmark setups (rad/us).
pub const DRIVE: f64 = 10.0;
/// Evolution time per cycle (us), giving `aT = 0.01`.
pub const T: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    /// Extra diagnostic lines, printed after the verdict.
    pub notes: Vec<String>,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} [{verdict}] {}: {}", self.id, self.name, self.detail)?;
        for n in &self.notes {
            write!(f, "\n    {n}")?;
        }
        Ok(())
    }
}

fn outcome(id: u32, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        pass,
        detail,
        notes: Vec::new(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn config(d: usize, shots: u64, mode: Mode, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        d,
        shots,
        t: T,
        mode,
        seed,
    }
}

fn random_spec(r: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Result<HamiltonianSpec> {
    let upper: Vec<f64> = (0..n * (n - 1) / 2).map(|_| r.gen_range(lo..hi)).collect();
    HamiltonianSpec::from_upper(n, DRIVE, &upper)
}

fn pair_spec() -> Result<HamiltonianSpec> {
    HamiltonianSpec::from_upper(2, DRIVE, &[40.0])
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Bootstrap `Var(c12)` of a two-qubit run for every `d`, with the largest
/// deviation from truth in bootstrap sigmas.
fn sweep_d(ds: &[usize], shots: u64, n_boot: usize, noise: &NoiseConfig, seed: u64) -> Result<(Vec<f64>, f64)> {
    let spec = pair_spec()?;
    let opts = LearnOptions {
        noise: noise.clone(),
        n_boot,
        ..Default::default()
    };
    let mut var = Vec::new();
    let mut worst: f64 = 0.0;
    for &d in ds {
        let r = learn_pair(&spec, &config(d, shots, Mode::Analog, seed + d as u64), &opts)?;
        let v = r.var_boot.map(|b| b.c).unwrap_or(r.var_pred_c);
        worst = worst.max((r.c_hat - spec.c[0][1]).abs() / v.sqrt());
        var.push(v);
    }
    Ok((var, worst))
}

fn as_f64(ds: &[usize]) -> Vec<f64> {
    ds.iter().map(|&d| d as f64).collect()
}

pub fn criterion_1() -> Result<Outcome> {
    let ds: Vec<usize> = (2..=12).collect();
    let (var, _) = sweep_d(&ds, 100_000, 1000, &NoiseConfig::default(), 100)?;
    let slope = loglog_slope(&as_f64(&ds), &var);
    Ok(outcome(
        1,
        "Heisenberg scaling",
        (slope + 4.0).abs() <= 0.3,
        format!("slope of bootstrap Var(c12) vs d = {slope:.3} (target -4 +- 0.3)"),
    ))
}

/// Empirical over predicted variance of `(theta, zeta)` for subspace 0 of a
/// single drive round.
fn variance_ratio(n: usize, mode: Mode, c_range: (f64, f64), reps: u64) -> Result<(f64, f64)> {
    let (d, shots) = (10, 100_000);
    let spec = random_spec(&mut rng(200 + n as u64), n, c_range.0, c_range.1)?;
    let pairs = select_subspaces(n, 0, if mode == Mode::Analog { 1 } else { n - 1 })?;
    let vmode = variance_mode(pairs.len());
    let runs: Vec<AngleEstimate> = (0..reps)
        .into_par_iter()
        .map(|seed| {
            let plan = RoundPlan::new(0, pairs.clone(), (1..n).collect(), config(d, shots, mode, seed));
            let plans = [plan];
            let opts = LearnOptions::default();
            let data = acquire(&spec, &plans, &opts)?;
            let mut clipped = 0;
            let subs = infer_subspaces(&plans, &data, &opts, &mut clipped)?;
            Ok(subs[0][0].estimate)
        })
        .collect::<Result<_>>()?;
    let theta: Vec<f64> = runs.iter().map(|e| e.theta_hat).collect();
    let zeta: Vec<f64> = runs.iter().map(|e| e.zeta_hat).collect();
    let mean_theta = theta.iter().sum::<f64>() / theta.len() as f64;
    let pred = analytic_variance(shots, d, mean_theta, vmode)?;
    Ok((sample_variance(&theta) / pred.theta, sample_variance(&zeta) / pred.zeta))
}

pub fn criterion_2() -> Result<Outcome> {
    let cases = [
        ("analog", 2, Mode::Analog, (40.0, 40.0 + 1e-9)),
        ("hybrid n=4", 4, Mode::Hybrid, (10.0, 20.0)),
        ("hybrid n=10", 10, Mode::Hybrid, (3.0, 5.0)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, n, mode, range) in cases {
        let (rt, rz) = variance_ratio(n, mode, range, 200)?;
        let ok = |r: f64| (0.5..=2.0).contains(&r);
        pass &= ok(rt) && ok(rz);
        parts.push(format!("{label}: theta {rt:.2}, zeta {rz:.2}"));
    }
    Ok(outcome(
        2,
        "variance formulas",
        pass,
        format!("empirical/predicted over 200 runs: {}", parts.join("; ")),
    ))
}

pub fn criterion_3() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let modes = [
        VarianceMode::Analog,
        VarianceMode::Hybrid { n: 3 },
        VarianceMode::Hybrid { n: 4 },
        VarianceMode::Hybrid { n: 10 },
    ];
    for mode in modes {
        for d in 2..=20 {
            for &theta in &[1e-3, 5e-3, 0.01, 0.02, 0.05] {
                for &shots in &[1_000u64, 100_000] {
                    let a = analytic_variance(shots, d, theta, mode)?;
                    let c = cr_bound(shots, d, theta, mode)?;
                    worst = worst.max((a.theta / c.theta - 1.0).abs());
                    worst = worst.max((a.zeta / c.zeta - 1.0).abs());
                }
            }
        }
    }
    Ok(outcome(
        3,
        "CR saturation",
        worst <= 1e-14,
        format!("max relative gap between cr_bound and analytic_variance = {worst:.1e}"),
    ))
}

pub fn criterion_4() -> Result<Outcome> {
    let reps = 100u64;
    let hits: Vec<bool> = (0..reps)
        .into_par_iter()
        .map(|seed| {
            let spec = random_spec(&mut rng(400 + seed), 5, 10.0, 50.0)?;
            let rep = learn_all(&spec, &config(10, 10_000, Mode::Hybrid, seed), &LearnOptions::default())?;
            Ok(pairs(5)
                .into_iter()
                .all(|(p, q)| (rep.c_hat[p][q] - spec.c[p][q]).abs() <= 5.0 * rep.var_pred[p][q].sqrt()))
        })
        .collect::<Result<_>>()?;
    let good = hits.iter().filter(|&&h| h).count();
    Ok(outcome(
        4,
        "full-graph recovery",
        good * 100 >= 95 * reps as usize,
        format!("{good}/{reps} repetitions with every c_ij within 5 sigma (need 95%)"),
    ))
}

pub fn criterion_5() -> Result<Outcome> {
    let readout = Some(ReadoutError {
        p_loss: 0.01,
        p_anti: 0.08,
    });
    let cases = [
        ("readout", NoiseConfig { readout, ..Default::default() }),
        ("depolarizing", NoiseConfig { depol_alpha: Some(0.8), ..Default::default() }),
        ("prep", NoiseConfig { prep_alpha: Some(0.01), ..Default::default() }),
        ("drift", NoiseConfig { drift_gamma: Some(0.1), ..Default::default() }),
        (
            "joint",
            NoiseConfig {
                readout,
                depol_alpha: Some(0.8),
                prep_alpha: Some(0.01),
                drift_gamma: Some(0.1),
                drift_schedule: None,
            },
        ),
    ];
    let ds: Vec<usize> = (3..=12).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (label, noise)) in cases.iter().enumerate() {
        let (var, worst) = sweep_d(&ds, 100_000, 1000, noise, 500 + 100 * k as u64)?;
        let slope = loglog_slope(&as_f64(&ds), &var);
        pass &= (slope + 4.0).abs() <= 0.4 && worst <= 5.0;
        parts.push(format!("{label}: slope {slope:.2}, max dev {worst:.1} sigma"));
    }
    Ok(outcome(5, "robustness", pass, parts.join("; ")))
}

/// Exact Fourier coefficients of a two-qubit run with block angle `a`
/// (`B = 0`, `T = 1`), optionally with a coherent prep error.
fn exact_coeffs(a: f64, d: usize, prep: Option<f64>) -> Result<FourierCoeffs> {
    let spec = HamiltonianSpec::from_upper(2, a, &[0.0])?;
    let pairs = select_subspaces(2, 0, 1)?;
    let cfg = ExperimentConfig {
        d,
        shots: 1,
        t: 1.0,
        mode: Mode::Analog,
        seed: 0,
    };
    let h = omega_grid(d)
        .iter()
        .map(|&w| {
            let p = |kind| -> Result<f64> {
                let opts = CircuitOptions {
                    prep: prep.map(|al| coherent_prep(std::f64::consts::FRAC_PI_4, al, kind)),
                    ..Default::default()
                };
                Ok(run_circuit_with(&spec, &pairs, &cfg, w, kind, &opts)?.get(pairs[0].v_m))
            };
            Ok(Complex64::new(p(InitialKind::Plus)? - 0.5, p(InitialKind::I)? - 0.5))
        })
        .collect::<Result<Vec<_>>>()?;
    fourier(&ReconstructionSeries::new(d, h)?)
}

pub fn criterion_6() -> Result<Outcome> {
    let mut bound_fail = 0;
    let mut order_fail = 0;
    let mut mitigated_fail = 0;
    let mut points = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_mitigated: f64 = 0.0;
    for d in 3..=12 {
        for &alpha in &[0.005, 0.01, 0.02] {
            for &theta in &[0.005, 0.01, 0.02] {
                points += 1;
                let ideal = estimate_theta(&exact_coeffs(theta, d, None)?);
                let noisy = exact_coeffs(theta, d, Some(alpha))?;
                let scaled = (scaled_prep_estimator(&noisy, alpha)? - ideal).abs();
                let unscaled = (estimate_theta(&noisy) - ideal).abs();
                let bound = prep_bound(d, alpha, theta);
                worst_ratio = worst_ratio.max(scaled / bound);
                if scaled > bound {
                    bound_fail += 1;
                }
                if unscaled <= scaled {
                    order_fail += 1;
                }
                let mitigated = (estimate_theta(&mitigate_prep_error(&noisy, alpha)?) - ideal).abs();
                worst_mitigated = worst_mitigated.max(mitigated / bound);
                if mitigated > bound {
                    mitigated_fail += 1;
                }
            }
        }
    }
    let mut o = outcome(
        6,
        "coherent-prep bound",
        bound_fail == 0 && order_fail == 0,
        format!(
            "scaled estimator exceeds the bound at {bound_fail}/{points} points (worst {worst_ratio:.1}x); \
             unscaled <= scaled at {order_fail}/{points} points"
        ),
    );
    o.notes.push(format!(
        "supplementary: after removing the c_0 offset, {mitigated_fail}/{points} points exceed the bound (worst {worst_mitigated:.2}x)"
    ));
    Ok(o)
}

pub fn criterion_7() -> Result<Outcome> {
    let bench = rydberg::benchmark();
    let opts = LearnOptions {
        n_boot: 1000,
        ..Default::default()
    };
    let est = rydberg::learn_distances(&bench, &config(10, 100_000, Mode::Analog, 700), &opts)?;
    let ordered = est.windows(2).all(|w| w[0].r_hat < w[1].r_hat);
    let precise = est.iter().all(|e| e.rel_err <= 0.02);
    let accurate = est.iter().all(|e| (e.r_hat - e.r).abs() <= 0.02 * e.r);
    let rows: Vec<String> = est
        .iter()
        .map(|e| format!("R{}{} = {:.3} (true {}, dR/R {:.4})", e.i + 1, e.j + 1, e.r_hat, e.r, e.rel_err))
        .collect();
    Ok(outcome(7, "Rydberg distances", ordered && precise && accurate, rows.join("; ")))
}

pub fn criterion_8() -> Result<Outcome> {
    let mut r = rng(800);
    let mut worst_dist: f64 = 0.0;
    let mut worst_block: f64 = 0.0;
    for k in 0..100 {
        let n = 2 + k % 5;
        let mut spec = random_spec(&mut r, n, -50.0, 50.0)?;
        for a in spec.a.iter_mut() {
            *a = r.gen_range(1.0..20.0);
        }
        spec.phi = r.gen_range(-1.0..1.0);
        let drive = r.gen_range(0..n);
        let count = r.gen_range(1..=n - 1);
        let pairs: Vec<SubspacePair> = enumerate_subspaces(&spec, drive)?.into_iter().take(count).collect();
        let mode = if count == 1 { Mode::Analog } else { Mode::Hybrid };
        let cfg = ExperimentConfig {
            d: r.gen_range(2..8),
            shots: 1,
            t: r.gen_range(1e-3..0.05),
            mode,
            seed: 0,
        };
        let omega = r.gen_range(-1.5..1.5);
        for kind in [InitialKind::Plus, InitialKind::I] {
            let a = run_circuit(&spec, &pairs, &cfg, omega, kind)?.to_dense();
            let b = dense_circuit(&spec, &pairs, &cfg, omega, kind)?.to_dense();
            for (x, y) in a.iter().zip(&b) {
                worst_dist = worst_dist.max((x - y).abs());
            }
        }
        let u = dense_propagator(&dense_hamiltonian(&spec, drive)?, cfg.t)?;
        worst_block = worst_block.max(verify_block_structure(&u, &enumerate_subspaces(&spec, drive)?));
    }
    Ok(outcome(
        8,
        "oracle equivalence",
        worst_dist <= 1e-10 && worst_block <= 1e-10,
        format!("100 specs: max outcome deviation {worst_dist:.1e}, max off-block element {worst_block:.1e}"),
    ))
}

pub fn criterion_9() -> Result<Outcome> {
    let mut pass = true;
    let mut dets = Vec::new();
    for n in 3..=8 {
        let m = coefficient_matrix(&select_subspaces(n, 0, n - 1)?, 0)?;
        let det = m.determinant().unwrap_or(0);
        pass &= det.abs() == 1i128 << (n - 2);
        dets.push(det.to_string());
    }
    let mut partitions = true;
    for n in 2..=8 {
        let spec = HamiltonianSpec::from_upper(n, 1.0, &vec![1.0; n * (n - 1) / 2])?;
        for drive in 0..n {
            let mut seen = vec![false; 1 << n];
            for p in enumerate_subspaces(&spec, drive)? {
                for s in [p.v_m, p.v_n] {
                    partitions &= !std::mem::replace(&mut seen[s as usize], true);
                }
            }
            partitions &= seen.iter().all(|&x| x);
        }
    }
    let accounting = (2..=12).all(|n| {
        let r = resource_accounting(n, 10, 1, T, Mode::Hybrid);
        r.rounds == n - 1 && r.parameters == n * (n - 1) / 2
    });
    Ok(outcome(
        9,
        "combinatorics",
        pass && partitions && accounting,
        format!(
            "det W (n=3..8) = [{}]; partition {}; hybrid rounds n-1 for n(n-1)/2 parameters {}",
            dets.join(", "),
            if partitions { "ok" } else { "broken" },
            if accounting { "ok" } else { "broken" }
        ),
    ))
}

pub fn criterion_10() -> Result<Outcome> {
    let mut r = rng(1000);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let n = 1 + k % 6;
        let raw: Vec<f64> = (0..1 << n).map(|_| r.gen_range(0.0..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let cm = confusion_matrix(n, r.gen_range(0.0..0.2), r.gen_range(0.0..0.2))?;
        let back = mitigate(&apply_readout(&p, &cm)?, &cm)?;
        for (x, y) in back.iter().zip(&p) {
            worst = worst.max((x - y).abs());
        }
    }
    let opts = LearnOptions {
        noise: NoiseConfig {
            depol_alpha: Some(0.8),
            ..Default::default()
        },
        n_boot: 1000,
        ..Default::default()
    };
    let rep = learn_pair(&pair_spec()?, &config(10, 100_000, Mode::Analog, 1010), &opts)?;
    let alpha = rep.estimate.alpha_hat.unwrap_or(f64::NAN);
    let sigma = rep.var_boot.map(|b| b.alpha.sqrt()).unwrap_or(f64::NAN);
    let z = (alpha - 0.8).abs() / sigma;
    Ok(outcome(
        10,
        "mitigation identities",
        worst <= 1e-12 && z <= 3.0,
        format!("max |mitigate(apply(p)) - p| = {worst:.1e}; alpha_hat = {alpha:.4} ({z:.2} sigma_boot from 0.8)"),
    ))
}

/// All criteria in order.
pub fn all() -> Vec<(u32, fn() -> Result<Outcome>)> {
    vec![
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ]
}
