//! Block-structured simulation of QSPE circuits and shot sampling.
//!
//! Only the amplitudes on active subspaces are tracked. Each cycle applies
//! the block propagator of every active subspace, then the QSPE phase
//! rotation `exp(i omega Z_L)`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{format_bits, parse_bits, project_block, HamiltonianSpec, SubspacePair};

/// Below this rotation angle the propagator uses the sinc series.
pub const SINC_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Digital logical-Z acting on all active subspaces at once.
    Hybrid,
    /// Analog logical-Z, one subspace per circuit.
    Analog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// QSPE cycle count.
    pub d: usize,
    /// Shots per circuit.
    pub shots: u64,
    /// Evolution time per cycle (us).
    #[serde(rename = "T", alias = "t")]
    pub t: f64,
    pub mode: Mode,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidRequest(format!("d = {} must be >= 2", self.d)));
        }
        if self.shots < 1 {
            return Err(Error::InvalidRequest("shots must be >= 1".into()));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidRequest(format!("T = {} must be positive", self.t)));
        }
        Ok(())
    }
}

/// Initial logical state: `|+_L>` for `p_X`, `|i_L>` for `p_Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Plus,
    I,
}

impl InitialKind {
    /// Ideal per-subspace amplitudes on `(v_m, v_n)`.
    pub fn amplitudes(self) -> [Complex64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            InitialKind::Plus => [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
            InitialKind::I => [Complex64::new(h, 0.0), Complex64::new(0.0, h)],
        }
    }
}

/// Implementation of the logical-Z rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogicalZ {
    /// `diag(e^{-i omega}, e^{i omega})` on every active subspace.
    #[default]
    Ideal,
    /// `b Z_drive + sum c ZZ` for unit time, with `b` set from the true
    /// couplings so the relative phase is exactly `2 omega`.
    Emulated,
    /// As `Emulated` but with `b = omega - Lambda_+`.
    EmulatedLiteral,
}

/// Amplitudes on the active subspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceState {
    pub n: usize,
    /// `(v_m, v_n)` per active subspace.
    pub support: Vec<(u64, u64)>,
    /// `[amp(v_m), amp(v_n)]` per active subspace.
    pub amps: Vec<[Complex64; 2]>,
}

impl SubspaceState {
    pub fn norm_sqr(&self) -> f64 {
        self.amps
            .iter()
            .map(|a| a[0].norm_sqr() + a[1].norm_sqr())
            .sum()
    }

    /// Global amplitude map keyed by basis state.
    pub fn amplitudes(&self) -> BTreeMap<u64, Complex64> {
        let mut out = BTreeMap::new();
        for (&(m, v), a) in self.support.iter().zip(&self.amps) {
            out.insert(m, a[0]);
            out.insert(v, a[1]);
        }
        out
    }

    pub fn probabilities(&self) -> Distribution {
        Distribution {
            n: self.n,
            probs: self
                .amplitudes()
                .into_iter()
                .map(|(k, a)| (k, a.norm_sqr()))
                .collect(),
        }
    }
}

/// Sparse probability distribution over basis states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub n: usize,
    pub probs: BTreeMap<u64, f64>,
}

impl Distribution {
    pub fn get(&self, state: u64) -> f64 {
        self.probs.get(&state).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Dense vector over all `2^n` outcomes.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; 1 << self.n];
        for (&k, &p) in &self.probs {
            v[k as usize] = p;
        }
        v
    }

    pub fn from_dense(n: usize, v: &[f64]) -> Self {
        Self {
            n,
            probs: v
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(k, &p)| (k as u64, p))
                .collect(),
        }
    }
}

/// Measured counts of one circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub n: usize,
    pub counts: BTreeMap<u64, u64>,
    pub total: u64,
}

impl ShotRecord {
    pub fn count(&self, state: u64) -> u64 {
        self.counts.get(&state).copied().unwrap_or(0)
    }

    /// CSV with header `bitstring,count`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bitstring,count\n");
        for (&k, &c) in &self.counts {
            s.push_str(&format!("{},{}\n", format_bits(k, self.n), c));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut counts = BTreeMap::new();
        let mut n = None;
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let (b, c) = line
                .split_once(',')
                .ok_or_else(|| Error::InvalidRequest(format!("bad CSV row {line:?}")))?;
            let b = b.trim();
            if *n.get_or_insert(b.len()) != b.len() {
                return Err(Error::InvalidRequest("inconsistent bitstring length".into()));
            }
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::InvalidRequest(format!("bad count in {line:?}")))?;
            *counts.entry(parse_bits(b)?).or_insert(0) += c;
        }
        let n = n.ok_or_else(|| Error::InvalidRequest("empty shot record".into()))?;
        Ok(Self {
            n,
            total: counts.values().sum(),
            counts,
        })
    }

    pub fn frequencies(&self) -> Distribution {
        let t = self.total as f64;
        Distribution {
            n: self.n,
            probs: self
                .counts
                .iter()
                .map(|(&k, &c)| (k, c as f64 / t))
                .collect(),
        }
    }
}

/// A measured circuit: sampled counts, or exact probabilities standing in
/// for the infinite-shot limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observation {
    Shots(ShotRecord),
    Exact(Distribution),
}

impl Observation {
    pub fn n(&self) -> usize {
        match self {
            Observation::Shots(r) => r.n,
            Observation::Exact(d) => d.n,
        }
    }

    pub fn frequencies(&self) -> Distribution {
        match self {
            Observation::Shots(r) => r.frequencies(),
            Observation::Exact(d) => d.clone(),
        }
    }
}

/// Block propagator `exp(-i (A X' + B Z))` without the common phase
/// `e^{-iC}`; `X'` carries the drive phase.
pub fn block_propagator(block: &BlockIntegrals) -> Matrix2<Complex64> {
    let (a, b) = (block.a, block.b);
    let w = a.hypot(b);
    let (cw, sinc) = if w < SINC_CUTOFF {
        (1.0 - w * w / 2.0, 1.0 - w * w / 6.0)
    } else {
        (w.cos(), w.sin() / w)
    };
    let off = Complex64::new(0.0, -sinc * a);
    let e = Complex64::from_polar(1.0, block.phi);
    Matrix2::new(
        Complex64::new(cw, -sinc * b),
        off * e,
        off * e.conj(),
        Complex64::new(cw, sinc * b),
    )
}

/// Common phase `e^{-iC}` of a block.
pub fn common_phase(block: &BlockIntegrals) -> Complex64 {
    Complex64::from_polar(1.0, -block.c)
}

pub use crate::model::BlockIntegrals;

fn check_disjoint(pairs: &[SubspacePair]) -> Result<()> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::InvalidSelection("no active subspaces".into()))?;
    let mut seen = BTreeSet::new();
    for p in pairs {
        if p.n != first.n || p.drive != first.drive {
            return Err(Error::InvalidSelection(
                "active subspaces must share size and drive".into(),
            ));
        }
        if !seen.insert(p.v_m) || !seen.insert(p.v_n) {
            return Err(Error::InvalidSelection(format!(
                "bitstring {} appears in more than one subspace",
                format_bits(p.v_m, p.n)
            )));
        }
    }
    Ok(())
}

fn check_mode(pairs: &[SubspacePair], mode: Mode) -> Result<()> {
    if mode == Mode::Analog && pairs.len() != 1 {
        return Err(Error::ModeViolation(format!(
            "analog mode needs exactly one subspace, got {}",
            pairs.len()
        )));
    }
    Ok(())
}

pub fn prepare_state(pairs: &[SubspacePair], kind: InitialKind, mode: Mode) -> Result<SubspaceState> {
    prepare_state_with(pairs, kind.amplitudes(), mode)
}

/// Places the same normalized two-amplitude template on every active
/// subspace, scaled by `1/sqrt(k)`.
pub fn prepare_state_with(pairs: &[SubspacePair], template: [Complex64; 2], mode: Mode) -> Result<SubspaceState> {
    check_disjoint(pairs)?;
    check_mode(pairs, mode)?;
    let s = 1.0 / (pairs.len() as f64).sqrt();
    Ok(SubspaceState {
        n: pairs[0].n,
        support: pairs.iter().map(|p| (p.v_m, p.v_n)).collect(),
        amps: vec![[template[0] * s, template[1] * s]; pairs.len()],
    })
}

/// Applies `exp(-i omega Z_L)` to every active subspace.
pub fn apply_logical_z(
    state: &SubspaceState,
    omega: f64,
    pairs: &[SubspacePair],
    mode: Mode,
    variant: LogicalZ,
    spec: &HamiltonianSpec,
) -> Result<SubspaceState> {
    check_mode(pairs, mode)?;
    if pairs.len() != state.amps.len()
        || pairs.iter().zip(&state.support).any(|(p, s)| (p.v_m, p.v_n) != *s)
    {
        return Err(Error::InvalidSelection("state is not supported on pairs".into()));
    }
    let mut out = state.clone();
    for (amp, pair) in out.amps.iter_mut().zip(pairs) {
        let (pm, pn) = match variant {
            LogicalZ::Ideal => (-omega, omega),
            LogicalZ::Emulated | LogicalZ::EmulatedLiteral => {
                let unit = project_block(spec, pair, 1.0)?;
                let b = match variant {
                    LogicalZ::Emulated => omega - unit.b,
                    _ => omega - (unit.c + unit.b),
                };
                // Diagonal of b Z_drive + sum c ZZ on (v_m, v_n).
                (-(b + unit.c + unit.b), -(-b + unit.c - unit.b))
            }
        };
        amp[0] *= Complex64::from_polar(1.0, pm);
        amp[1] *= Complex64::from_polar(1.0, pn);
    }
    Ok(out)
}

/// Per-circuit options beyond the ideal protocol.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CircuitOptions {
    pub logical_z: LogicalZ,
    /// Per-subspace initial amplitudes replacing the ideal ones.
    pub prep: Option<[Complex64; 2]>,
}

/// Exact outcome distribution of one QSPE circuit at signal angle `omega`.
pub fn run_circuit(
    spec: &HamiltonianSpec,
    pairs: &[SubspacePair],
    config: &ExperimentConfig,
    omega: f64,
    kind: InitialKind,
) -> Result<Distribution> {
    run_circuit_with(spec, pairs, config, omega, kind, &CircuitOptions::default())
}

pub fn run_circuit_with(
    spec: &HamiltonianSpec,
    pairs: &[SubspacePair],
    config: &ExperimentConfig,
    omega: f64,
    kind: InitialKind,
    options: &CircuitOptions,
) -> Result<Distribution> {
    config.validate()?;
    let template = options.prep.unwrap_or_else(|| kind.amplitudes());
    let mut state = prepare_state_with(pairs, template, config.mode)?;
    let blocks: Vec<_> = pairs
        .iter()
        .map(|p| project_block(spec, p, config.t))
        .collect::<Result<_>>()?;
    let props: Vec<_> = blocks
        .iter()
        .map(|b| (block_propagator(b), common_phase(b)))
        .collect();
    for _ in 0..config.d {
        for (amp, (u, g)) in state.amps.iter_mut().zip(&props) {
            let (x, y) = (amp[0], amp[1]);
            amp[0] = g * (u[(0, 0)] * x + u[(0, 1)] * y);
            amp[1] = g * (u[(1, 0)] * x + u[(1, 1)] * y);
        }
        state = apply_logical_z(&state, -omega, pairs, config.mode, options.logical_z, spec)?;
    }
    Ok(state.probabilities())
}

/// Independent ChaCha stream keyed by `seed` and a stream path.
pub fn stream_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix(seed ^ 0x5851_f42d_4c95_7f2d);
    for &p in path {
        h = splitmix(h ^ splitmix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        h = splitmix(h.wrapping_add(i as u64));
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Multinomial sample of `shots` outcomes, deterministic in `seed`.
pub fn sample(dist: &Distribution, shots: u64, seed: u64) -> ShotRecord {
    sample_with(dist, shots, &mut stream_rng(seed, &[]))
}

/// Multinomial sample by sequential conditional binomials.
pub fn sample_with<R: Rng + ?Sized>(dist: &Distribution, shots: u64, rng: &mut R) -> ShotRecord {
    let mut counts = BTreeMap::new();
    let mut left = shots;
    let mut mass: f64 = dist.probs.values().map(|p| p.max(0.0)).sum();
    let entries: Vec<_> = dist.probs.iter().filter(|(_, &p)| p > 0.0).collect();
    for (i, (&k, &p)) in entries.iter().enumerate() {
        if left == 0 {
            break;
        }
        let c = if i + 1 == entries.len() {
            left
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        if c > 0 {
            counts.insert(k, c);
        }
        left -= c;
        mass -= p;
    }
    ShotRecord {
        n: dist.n,
        counts,
        total: shots,
    }
}

/// `rescale * count(v_m) / N` per pair.
pub fn transition_probabilities(record: &ShotRecord, pairs: &[SubspacePair], rescale: usize) -> Vec<f64> {
    let t = record.total as f64;
    pairs
        .iter()
        .map(|p| rescale as f64 * record.count(p.v_m) as f64 / t)
        .collect()
}
