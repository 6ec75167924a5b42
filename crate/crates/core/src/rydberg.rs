//! Rydberg-array unit conversions and the benchmark distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{learn_coupling_targeted, LearnOptions};
use crate::model::HamiltonianSpec;
use crate::sim::{ExperimentConfig, Mode};

/// Van der Waals coefficient (um^6 rad/us).
pub const C6: f64 = 5_420_503.0;

const BENCHMARK_JSON: &str = include_str!("../data/rydberg_benchmark.json");

/// One benchmark distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RydbergCase {
    /// Atom distance (um).
    #[serde(rename = "R")]
    pub r: f64,
    /// Coupling `C6 / R^6` as tabulated (rad/us).
    #[serde(rename = "V")]
    pub v: f64,
    /// Evolution time (us).
    #[serde(rename = "T")]
    pub t: f64,
    /// Effective integral `V T` as tabulated (rad).
    pub b: f64,
}

impl RydbergCase {
    /// Coupling computed from the distance.
    pub fn coupling(&self) -> f64 {
        C6 / self.r.powi(6)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub version: u32,
    pub cases: Vec<RydbergCase>,
}

/// Bundled benchmark cases.
pub fn benchmark() -> Benchmark {
    serde_json::from_str(BENCHMARK_JSON).expect("bundled benchmark data is valid")
}

/// `C6 / R^6`.
pub fn coupling_from_distance(r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidRequest(format!("distance {r} must be positive")));
    }
    Ok(C6 / r.powi(6))
}

/// `(C6 / (b / T))^(1/6)`.
pub fn distance_from_coupling(b_hat: f64, t: f64) -> Result<f64> {
    if !(b_hat > 0.0) || !(t > 0.0) {
        return Err(Error::InvalidRequest(format!(
            "need b > 0 and T > 0, got b = {b_hat}, T = {t}"
        )));
    }
    Ok((C6 / (b_hat / t)).powf(1.0 / 6.0))
}

/// `Var(R) = Var(b) (R / (6 b))^2`.
pub fn variance_convert(var_b: f64, b: f64, r: f64) -> f64 {
    let s = r / (6.0 * b);
    var_b * s * s
}

/// Drive strength used for the three-atom benchmark (rad/us).
pub const BENCHMARK_DRIVE: f64 = 10.0;

/// Atom pairs of the benchmark cases, in table order.
pub const BENCHMARK_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Recovered distance for one atom pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub i: usize,
    pub j: usize,
    /// True distance (um).
    pub r: f64,
    pub c_hat: f64,
    pub var_c: f64,
    pub r_hat: f64,
    pub var_r: f64,
    /// `sqrt(Var(R)) / R`.
    pub rel_err: f64,
}

/// Three-atom spec whose couplings follow the benchmark distances.
pub fn benchmark_spec(bench: &Benchmark) -> Result<HamiltonianSpec> {
    if bench.cases.len() != BENCHMARK_PAIRS.len() {
        return Err(Error::InvalidSpec(format!(
            "benchmark needs {} cases, got {}",
            BENCHMARK_PAIRS.len(),
            bench.cases.len()
        )));
    }
    let upper = bench
        .cases
        .iter()
        .map(|c| coupling_from_distance(c.r))
        .collect::<Result<Vec<_>>>()?;
    HamiltonianSpec::from_upper(3, BENCHMARK_DRIVE, &upper)
}

/// Learns every benchmark coupling with a targeted round and converts to
/// distances. Rounds run in analog mode, as on the proposed device; the
/// evolution time of each case overrides `config.t`.
pub fn learn_distances(bench: &Benchmark, config: &ExperimentConfig, options: &LearnOptions) -> Result<Vec<DistanceEstimate>> {
    let spec = benchmark_spec(bench)?;
    BENCHMARK_PAIRS
        .iter()
        .zip(&bench.cases)
        .map(|(&(i, j), case)| {
            let cfg = ExperimentConfig {
                t: case.t,
                mode: Mode::Analog,
                ..*config
            };
            let rep = learn_coupling_targeted(&spec, i, j, &cfg, options)?;
            let var_c = rep.var_boot.unwrap_or(rep.var_pred);
            let r_hat = distance_from_coupling(rep.c_hat * case.t, case.t)?;
            let var_r = variance_convert(var_c, rep.c_hat, r_hat);
            Ok(DistanceEstimate {
                i,
                j,
                r: case.r,
                c_hat: rep.c_hat,
                var_c,
                r_hat,
                var_r,
                rel_err: var_r.sqrt() / r_hat,
            })
        })
        .collect()
}
