//! Run configuration: parsing, resolution and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use qspe_learn::learner::LearnOptions;
use qspe_learn::model::{pairs, HamiltonianSpec};
use qspe_learn::noise::NoiseConfig;
use qspe_learn::qspe::{DepolarizingMode, Inversion, REGIME_LIMIT};
use qspe_learn::sim::{ExperimentConfig, LogicalZ, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Current config and report schema version.
pub const SCHEMA: u32 = 1;

/// Largest `max_k sqrt(A^2 + B_k^2)` targeted by the auto-T heuristic (rad).
pub const AUTO_T_ANGLE: f64 = 0.05;

/// Fraction of `pi/2` at which `|2 zeta|` triggers a phase warning.
pub const ZETA_WARN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    LearnPair,
    LearnAll,
    Robustness,
    Rydberg,
    SweepD,
    DecomposeCheck,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::LearnPair => "learn-pair",
            Scenario::LearnAll => "learn-all",
            Scenario::Robustness => "robustness",
            Scenario::Rydberg => "rydberg",
            Scenario::SweepD => "sweep-d",
            Scenario::DecomposeCheck => "decompose-check",
        }
    }
}

/// Hamiltonian given directly or drawn from a seeded generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpecSource {
    /// Full drive vector and coupling matrix.
    Explicit {
        a: Vec<f64>,
        c: Vec<Vec<f64>>,
        #[serde(default)]
        phi: f64,
    },
    /// Uniform drive and the upper triangle in `(0,1), (0,2), ...` order.
    Upper { n: usize, a: f64, upper: Vec<f64> },
    /// Couplings uniform in `c_range`, drawn with `seed`.
    Random {
        n: usize,
        a: f64,
        c_range: [f64; 2],
        seed: u64,
    },
}

impl SpecSource {
    pub fn build(&self) -> qspe_learn::Result<HamiltonianSpec> {
        match self {
            SpecSource::Explicit { a, c, phi } => HamiltonianSpec::new(a.clone(), c.clone(), *phi),
            SpecSource::Upper { n, a, upper } => HamiltonianSpec::from_upper(*n, *a, upper),
            SpecSource::Random { n, a, c_range, seed } => {
                if !(c_range[0] < c_range[1]) {
                    return Err(qspe_learn::Error::InvalidSpec(format!(
                        "empty coupling range [{}, {}]",
                        c_range[0], c_range[1]
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let upper: Vec<f64> = (0..pairs(*n).len()).map(|_| rng.gen_range(c_range[0]..c_range[1])).collect();
                HamiltonianSpec::from_upper(*n, *a, &upper)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    /// Evolution time per cycle (us).
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Upper bound on `|c_ij|` used to choose `T` when `T` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default)]
    pub n_boot: usize,
    #[serde(default)]
    pub exact: bool,
    #[serde(default)]
    pub logical_z: LogicalZ,
    #[serde(default)]
    pub inversion: Inversion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depolarizing: Option<DepolarizingMode>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Cycle counts; defaults to `2..=12`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub scenario: Scenario,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SpecSource>,
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Replay record written next to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: u32,
    pub scenario: Scenario,
    pub seed: u64,
    /// SHA-256 of the canonical JSON of `config`.
    pub config_sha256: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Dotted field path, empty for document-level problems.
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    fn error(path: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        }
    }

    fn warning(path: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        if self.path.is_empty() {
            write!(f, "{level}: {}", self.message)
        } else {
            write!(f, "{level}: {}: {}", self.path, self.message)
        }
    }
}

/// Parse failure with its location in the source document.
#[derive(Debug)]
pub struct ParseError {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub path: String,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: ", self.file, self.line, self.column)?;
        if !self.path.is_empty() && self.path != "." {
            write!(f, "at `{}`: ", self.path)?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ParseError {}

/// Parsed input: a plain config or a manifest from an earlier run.
#[derive(Debug, Clone)]
pub enum Input {
    Config(RunConfig),
    Manifest(Manifest),
}

impl Input {
    pub fn into_config(self) -> RunConfig {
        match self {
            Input::Config(c) => c,
            Input::Manifest(m) => m.config,
        }
    }
}

fn parse_as<T: serde::de::DeserializeOwned>(text: &str, file: &str) -> Result<T, ParseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ParseError {
            file: file.into(),
            line: inner.line(),
            column: inner.column(),
            path,
            message: strip_location(&inner.to_string()),
        }
    })
}

fn strip_location(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(k) => msg[..k].to_string(),
        None => msg.to_string(),
    }
}

/// Parses a config or manifest. Manifests are recognised by their
/// `config_sha256` field.
pub fn parse(text: &str, file: &str) -> Result<Input, ParseError> {
    let probe: serde_json::Value = parse_as(text, file)?;
    if probe.get("config_sha256").is_some() {
        let m: Manifest = parse_as(text, file)?;
        let expected = config_hash(&m.config);
        if m.config_sha256 != expected {
            return Err(ParseError {
                file: file.into(),
                line: 1,
                column: 1,
                path: "config_sha256".into(),
                message: format!("manifest hash {} does not match its config ({expected})", m.config_sha256),
            });
        }
        Ok(Input::Manifest(m))
    } else {
        Ok(Input::Config(parse_as(text, file)?))
    }
}

pub fn load(path: &Path) -> Result<Input, ParseError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ParseError {
        file: file.clone(),
        line: 0,
        column: 0,
        path: String::new(),
        message: e.to_string(),
    })?;
    parse(&text, &file)
}

pub fn config_hash(config: &RunConfig) -> String {
    use sha2::{Digest, Sha256};
    let canonical = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
}

/// Default sweep grid.
pub fn default_sweep() -> Vec<usize> {
    (2..=12).collect()
}

/// `T` such that `max_k sqrt(A^2 + B_k^2)` stays at [`AUTO_T_ANGLE`], with
/// `B_k` bounded by `(n - 1) * bound * T`.
pub fn auto_t(spec: &HamiltonianSpec, coupling_bound: f64) -> f64 {
    let a = spec.a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let b = (spec.n - 1) as f64 * coupling_bound.abs();
    AUTO_T_ANGLE / a.hypot(b)
}

impl RunConfig {
    pub fn sweep_values(&self) -> Vec<usize> {
        self.sweep.d.clone().unwrap_or_else(default_sweep)
    }

    pub fn spec(&self) -> qspe_learn::Result<HamiltonianSpec> {
        match &self.spec {
            Some(s) => s.build(),
            None => Err(qspe_learn::Error::InvalidSpec("no spec given".into())),
        }
    }

    /// Evolution time, explicit or from the auto-T heuristic.
    pub fn time(&self, spec: Option<&HamiltonianSpec>) -> Option<f64> {
        match (self.experiment.t, self.experiment.coupling_bound, spec) {
            (Some(t), _, _) => Some(t),
            (None, Some(bound), Some(spec)) => Some(auto_t(spec, bound)),
            _ => None,
        }
    }

    /// Experiment settings for cycle count `d`; requires shots and a time.
    pub fn experiment_at(&self, spec: Option<&HamiltonianSpec>, d: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            d,
            shots: self.experiment.shots.unwrap_or(0),
            t: self.time(spec).unwrap_or(0.0),
            mode: self.experiment.mode.unwrap_or(Mode::Hybrid),
            seed,
        }
    }

    pub fn learn_options(&self, noise: &NoiseConfig) -> LearnOptions {
        LearnOptions {
            noise: noise.clone(),
            logical_z: self.options.logical_z,
            inversion: self.options.inversion,
            n_boot: self.options.n_boot,
            exact: self.options.exact,
            depolarizing: self.options.depolarizing,
        }
    }

    /// Schema and consistency checks; no experiment is run.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.schema != SCHEMA {
            out.push(Diagnostic::error(
                "schema",
                format!("unsupported schema {}; expected {SCHEMA}", self.schema),
            ));
        }
        if let Err(e) = self.noise.validate() {
            out.push(Diagnostic::error("noise", e.to_string()));
        }
        let needs_spec = !matches!(self.scenario, Scenario::Rydberg);
        let spec = match (&self.spec, needs_spec) {
            (None, true) => {
                out.push(Diagnostic::error("spec", format!("required by scenario {}", self.scenario.name())));
                None
            }
            (Some(_), false) => {
                out.push(Diagnostic::warning("spec", "ignored; the rydberg scenario uses the bundled benchmark"));
                None
            }
            (Some(s), true) => match s.build() {
                Ok(spec) => Some(spec),
                Err(e) => {
                    out.push(Diagnostic::error("spec", e.to_string()));
                    None
                }
            },
            (None, false) => None,
        };
        if let Some(spec) = &spec {
            let two_qubit = matches!(
                self.scenario,
                Scenario::LearnPair | Scenario::SweepD | Scenario::Robustness
            );
            if two_qubit && spec.n != 2 {
                out.push(Diagnostic::error(
                    "spec",
                    format!("scenario {} needs n = 2, got {}", self.scenario.name(), spec.n),
                ));
            }
            if self.scenario == Scenario::DecomposeCheck && spec.n > qspe_learn::oracle::MAX_ORACLE_QUBITS {
                out.push(Diagnostic::error(
                    "spec",
                    format!("decompose-check is limited to {} qubits", qspe_learn::oracle::MAX_ORACLE_QUBITS),
                ));
            }
        }
        self.check_experiment(spec.as_ref(), &mut out);
        if let (Some(spec), Some(t)) = (&spec, self.time(spec.as_ref())) {
            if t > 0.0 && self.scenario != Scenario::DecomposeCheck {
                let d_max = match self.scenario {
                    Scenario::SweepD | Scenario::Robustness => self.sweep_values().into_iter().max(),
                    _ => self.experiment.d,
                };
                regime_warnings(spec, t, d_max, &mut out);
            }
        }
        out
    }

    fn check_experiment(&self, spec: Option<&HamiltonianSpec>, out: &mut Vec<Diagnostic>) {
        let e = &self.experiment;
        let sweeps = matches!(self.scenario, Scenario::SweepD | Scenario::Robustness);
        let needs_d = matches!(self.scenario, Scenario::LearnPair | Scenario::LearnAll | Scenario::Rydberg);
        let needs_shots = self.scenario != Scenario::DecomposeCheck;
        let needs_t = !matches!(self.scenario, Scenario::Rydberg);
        match e.d {
            None if needs_d => out.push(Diagnostic::error("experiment.d", "required")),
            Some(d) if d < 2 => out.push(Diagnostic::error("experiment.d", format!("must be >= 2, got {d}"))),
            Some(_) if sweeps => out.push(Diagnostic::warning("experiment.d", "ignored; sweep.d sets the cycle counts")),
            _ => {}
        }
        if sweeps {
            let ds = self.sweep_values();
            if ds.len() < 2 {
                out.push(Diagnostic::error("sweep.d", "needs at least two values for a slope fit"));
            }
            if ds.iter().any(|&d| d < 2) {
                out.push(Diagnostic::error("sweep.d", "every value must be >= 2"));
            }
        } else if self.sweep.d.is_some() {
            out.push(Diagnostic::warning("sweep.d", format!("ignored by scenario {}", self.scenario.name())));
        }
        match e.shots {
            None if needs_shots => out.push(Diagnostic::error("experiment.shots", "required")),
            Some(0) => out.push(Diagnostic::error("experiment.shots", "must be >= 1")),
            _ => {}
        }
        match (e.t, e.coupling_bound) {
            (Some(_), Some(_)) => out.push(Diagnostic::error(
                "experiment",
                "give either T or coupling_bound, not both",
            )),
            (Some(t), None) if !(t > 0.0 && t.is_finite()) => {
                out.push(Diagnostic::error("experiment.T", format!("must be positive, got {t}")))
            }
            (None, Some(b)) if !(b > 0.0 && b.is_finite()) => out.push(Diagnostic::error(
                "experiment.coupling_bound",
                format!("must be positive, got {b}"),
            )),
            (None, None) if needs_t => out.push(Diagnostic::error("experiment.T", "required (or give coupling_bound)")),
            (None, Some(_)) if spec.is_none() && needs_t => {
                out.push(Diagnostic::error("experiment.coupling_bound", "auto-T needs a spec"))
            }
            _ if !needs_t && (e.t.is_some() || e.coupling_bound.is_some()) => out.push(Diagnostic::warning(
                "experiment.T",
                "ignored; benchmark cases carry their own evolution times",
            )),
            _ => {}
        }
        if self.scenario == Scenario::Rydberg && e.mode.is_some_and(|m| m != Mode::Analog) {
            out.push(Diagnostic::warning("experiment.mode", "ignored; benchmark rounds run in analog mode"));
        }
        if sweeps && self.options.n_boot == 0 {
            out.push(Diagnostic::warning(
                "options.n_boot",
                "0 leaves the var_boot column empty and the slope fit uses var_pred",
            ));
        }
        if self.options.n_boot > 0 && self.options.n_boot < 100 {
            out.push(Diagnostic::error("options.n_boot", "must be 0 or at least 100"));
        }
    }
}

/// Small-angle regime checks: `d * theta` against the regime limit, with
/// `theta ~ a T`, and `|2 zeta|` against `pi/2`, with `zeta ~ sum_j |c_ij| T`.
fn regime_warnings(spec: &HamiltonianSpec, t: f64, d_max: Option<usize>, out: &mut Vec<Diagnostic>) {
    if let Some(d) = d_max {
        let theta = spec.a.iter().fold(0.0_f64, |m, a| m.max(a.abs())) * t;
        let dtheta = d as f64 * theta;
        if dtheta > REGIME_LIMIT {
            out.push(Diagnostic::warning(
                "experiment",
                format!("d * a * T = {dtheta:.3} exceeds {REGIME_LIMIT}; estimator and variance formulas lose accuracy"),
            ));
        }
    }
    let zeta = (0..spec.n)
        .map(|i| spec.c[i].iter().map(|c| c.abs()).sum::<f64>() * t)
        .fold(0.0, f64::max);
    let limit = ZETA_WARN_FRACTION * std::f64::consts::FRAC_PI_2;
    if 2.0 * zeta > limit {
        out.push(Diagnostic::warning(
            "experiment",
            format!("|2 zeta| may reach {:.3}, close to pi/2; phase differences risk wrapping", 2.0 * zeta),
        ));
    }
}
