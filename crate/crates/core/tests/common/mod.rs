#![allow(dead_code)]

use qspe_learn::model::HamiltonianSpec;
use qspe_learn::qspe::omega_grid;
use qspe_learn::sim::{run_circuit_with, CircuitOptions, ExperimentConfig, InitialKind, Mode};
use qspe_learn::model::select_subspaces;
use qspe_learn::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_spec(rng: &mut impl Rng, n: usize, a: (f64, f64), c: (f64, f64)) -> HamiltonianSpec {
    let upper: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.gen_range(c.0..c.1)).collect();
    let mut spec = HamiltonianSpec::from_upper(n, 1.0, &upper).unwrap();
    for x in spec.a.iter_mut() {
        *x = rng.gen_range(a.0..a.1);
    }
    spec
}

pub fn config(d: usize, shots: u64, t: f64, mode: Mode, seed: u64) -> ExperimentConfig {
    ExperimentConfig { d, shots, t, mode, seed }
}

/// Two-qubit spec with block integrals `(A, B)` at `T = 1`.
pub fn pair_spec(a: f64, b: f64) -> HamiltonianSpec {
    HamiltonianSpec::from_upper(2, a, &[b]).unwrap()
}

/// Exact `h_j` series of a two-qubit circuit.
pub fn exact_series(spec: &HamiltonianSpec, d: usize, t: f64, opts: &CircuitOptions, prep: Option<f64>) -> Vec<Complex64> {
    let pairs = select_subspaces(2, 0, 1).unwrap();
    let cfg = config(d, 1, t, Mode::Analog, 0);
    omega_grid(d)
        .iter()
        .map(|&w| {
            let p = |kind| {
                let o = CircuitOptions {
                    prep: prep.map(|a| qspe_learn::noise::coherent_prep(std::f64::consts::FRAC_PI_4, a, kind)),
                    ..*opts
                };
                run_circuit_with(spec, &pairs, &cfg, w, kind, &o).unwrap().get(pairs[0].v_m)
            };
            Complex64::new(p(InitialKind::Plus) - 0.5, p(InitialKind::I) - 0.5)
        })
        .collect()
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

pub fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}
