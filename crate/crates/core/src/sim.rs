//! Two-qubit statevector simulation of the CHSH circuits and seeded
//! campaign generation.
//!
//! Qubit 0 is Alice (top wire), qubit 1 is Bob; the amplitude of
//! `|q0 q1>` sits at index `2 q0 + q1`. Measurement noise is applied as
//! classical channels on the outcome distribution: depolarizing mixing
//! towards uniform, then input-conditioned outcome flips (cross-talk).
//!
//! Randomness comes from ChaCha20 seeded with the campaign seed. Stream 0
//! draws the shared input sequence, stream `1 + i` drives test `i`, and
//! stream `2^32 + i` draws test `i`'s inputs when inputs are not shared.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Correlation, Dims, Scenario, TrialLog, TrialRecord};

type State = [Complex64; 4];
type Gate = [[Complex64; 2]; 2];

const INDEPENDENT_INPUT_STREAM: u64 = 1 << 32;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn hadamard() -> Gate {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]
}

fn pauli_z() -> Gate {
    [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]
}

/// `Ry(theta) = cos(theta/2) I - i sin(theta/2) Y`.
fn ry(theta: f64) -> Gate {
    let (s, co) = (0.5 * theta).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

/// `T = diag(1, e^{i pi/4})`.
fn t_gate() -> Gate {
    let q = std::f64::consts::FRAC_PI_4;
    [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(q.cos(), q.sin())]]
}

fn apply(state: &mut State, qubit: usize, g: &Gate) {
    let pairs: [(usize, usize); 2] = if qubit == 0 { [(0, 2), (1, 3)] } else { [(0, 1), (2, 3)] };
    for (i0, i1) in pairs {
        let (a0, a1) = (state[i0], state[i1]);
        state[i0] = g[0][0] * a0 + g[0][1] * a1;
        state[i1] = g[1][0] * a0 + g[1][1] * a1;
    }
}

/// CNOT with qubit 0 as control.
fn cnot(state: &mut State) {
    state.swap(2, 3);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Circuit {
    /// `H` on Alice, CNOT, `Z` on Alice, `Ry(pi/4)` on Bob: maximal CHSH violation.
    Nonlocal,
    /// `T` on Alice only: a product state.
    Local,
}

impl Circuit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Circuit::Nonlocal => "cnl",
            Circuit::Local => "cl",
        }
    }

    /// State before the input-dependent basis change.
    pub fn prepared_state(&self) -> State {
        let mut s = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        match self {
            Circuit::Nonlocal => {
                apply(&mut s, 0, &hadamard());
                cnot(&mut s);
                apply(&mut s, 0, &pauli_z());
                apply(&mut s, 1, &ry(std::f64::consts::FRAC_PI_4));
            }
            Circuit::Local => apply(&mut s, 0, &t_gate()),
        }
        s
    }

    /// Born-rule outcome probabilities `P(a,b|x,y)` of the noiseless circuit.
    pub fn ideal_correlation(&self) -> Correlation {
        let dims = Dims::CHSH;
        let prepared = self.prepared_state();
        let mut probs = vec![0.0; dims.cells()];
        for x in 0..2 {
            for y in 0..2 {
                let mut s = prepared;
                if x == 1 {
                    apply(&mut s, 0, &hadamard());
                }
                if y == 1 {
                    apply(&mut s, 1, &hadamard());
                }
                for a in 0..2 {
                    for b in 0..2 {
                        probs[dims.index(a, b, x, y)] = s[2 * a + b].norm_sqr();
                    }
                }
            }
        }
        Correlation::renormalized(dims, probs).expect("unitary evolution preserves normalization")
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnl" | "nonlocal" => Ok(Circuit::Nonlocal),
            "cl" | "local" => Ok(Circuit::Local),
            other => Err(Error::InvalidConfig(format!("unknown circuit '{other}'"))),
        }
    }
}

impl From<Circuit> for String {
    fn from(c: Circuit) -> String {
        c.as_str().to_string()
    }
}

impl TryFrom<String> for Circuit {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

pub fn ideal_correlation(circuit: Circuit) -> Correlation {
    circuit.ideal_correlation()
}

/// Noise strengths in effect for one trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Probability that Alice's outcome is flipped when `y = 1`.
    pub crosstalk_b_to_a: f64,
    /// Probability that Bob's outcome is flipped when `x = 1`.
    pub crosstalk_a_to_b: f64,
    /// Weight of the uniform distribution mixed in before the flips.
    pub depolarizing: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("crosstalk_b_to_a", self.crosstalk_b_to_a),
            ("crosstalk_a_to_b", self.crosstalk_a_to_b),
            ("depolarizing", self.depolarizing),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Composes the channels with a (2,2,2,2) correlation.
    pub fn apply(&self, ideal: &Correlation) -> Correlation {
        let dims = ideal.dims();
        let lambda = self.depolarizing;
        let depolarized: Vec<f64> = ideal.as_slice().iter().map(|p| (1.0 - lambda) * p + lambda * 0.25).collect();
        let mut out = vec![0.0; dims.cells()];
        for (a, b, x, y) in dims.cells_iter() {
            let ga = if y == 1 { self.crosstalk_b_to_a } else { 0.0 };
            let gb = if x == 1 { self.crosstalk_a_to_b } else { 0.0 };
            let mut v = 0.0;
            for (fa, wa) in [(0, 1.0 - ga), (1, ga)] {
                for (fb, wb) in [(0, 1.0 - gb), (1, gb)] {
                    v += wa * wb * depolarized[dims.index(a ^ fa, b ^ fb, x, y)];
                }
            }
            out[dims.index(a, b, x, y)] = v;
        }
        Correlation::renormalized(dims, out).expect("stochastic channels preserve normalization")
    }
}

/// Parameter overrides for trial indices in `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSegment {
    pub start: u64,
    pub end: u64,
    pub params: NoiseParams,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub base: NoiseParams,
    /// Optional schedule; when non-empty the segments must partition `[0, N)`.
    #[serde(default)]
    pub drift: Vec<DriftSegment>,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel::default()
    }

    pub fn constant(params: NoiseParams) -> Self {
        NoiseModel { base: params, drift: vec![] }
    }

    /// A two-phase schedule switching from `before` to `after` at trial `switch_at`.
    pub fn switching(before: NoiseParams, after: NoiseParams, switch_at: u64, n_trials: u64) -> Self {
        NoiseModel {
            base: before,
            drift: vec![
                DriftSegment { start: 0, end: switch_at, params: before },
                DriftSegment { start: switch_at, end: n_trials, params: after },
            ],
        }
    }

    pub fn validate(&self, n_trials: u64) -> Result<()> {
        self.base.validate()?;
        if self.drift.is_empty() {
            return Ok(());
        }
        let mut expected = 0;
        for seg in &self.drift {
            seg.params.validate()?;
            if seg.start != expected || seg.end <= seg.start {
                return Err(Error::InvalidConfig(format!(
                    "drift segment [{}, {}) does not continue the partition at {expected}",
                    seg.start, seg.end
                )));
            }
            expected = seg.end;
        }
        if expected != n_trials {
            return Err(Error::InvalidConfig(format!(
                "drift schedule covers [0, {expected}) but the campaign has {n_trials} trials"
            )));
        }
        Ok(())
    }

    pub fn params_at(&self, trial_index: u64) -> NoiseParams {
        self.drift
            .iter()
            .find(|s| s.start <= trial_index && trial_index < s.end)
            .map(|s| s.params)
            .unwrap_or(self.base)
    }
}

/// Per-trial correlation of `circuit` under `noise`.
pub fn noisy_correlation(circuit: Circuit, noise: &NoiseModel, trial_index: u64) -> Correlation {
    noise.params_at(trial_index).apply(&circuit.ideal_correlation())
}

/// Trial layout of a campaign: `n_tests` Bell tests of `n_trials` trials.
///
/// Task `k` runs input `(x_k, y_k)` for all shots; shot `i` of every task
/// belongs to test `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignPlan {
    pub n_trials: u64,
    pub n_tests: u64,
    pub seed: u64,
    /// Shared input sequence; `None` means each test draws its own inputs.
    pub inputs: Option<Vec<(usize, usize)>>,
    pub scenario: Scenario,
}

impl CampaignPlan {
    pub fn new(n_trials: u64, n_tests: u64, seed: u64, scenario: Scenario) -> Self {
        let mut rng = stream(seed, 0);
        let inputs = draw_inputs(&mut rng, &scenario, n_trials);
        CampaignPlan { n_trials, n_tests, seed, inputs: Some(inputs), scenario }
    }

    pub fn with_independent_inputs(n_trials: u64, n_tests: u64, seed: u64, scenario: Scenario) -> Self {
        CampaignPlan { n_trials, n_tests, seed, inputs: None, scenario }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 || self.n_tests == 0 {
            return Err(Error::InvalidConfig("campaign needs at least one trial and one test".into()));
        }
        if let Some(inputs) = &self.inputs {
            if inputs.len() as u64 != self.n_trials {
                return Err(Error::InvalidConfig(format!(
                    "input sequence has {} entries, campaign has {} trials",
                    inputs.len(),
                    self.n_trials
                )));
            }
            let d = self.scenario.dims();
            if inputs.iter().any(|&(x, y)| x >= d.n_x || y >= d.n_y) {
                return Err(Error::InvalidConfig("input sequence has out-of-range labels".into()));
            }
        }
        Ok(())
    }

    /// Input sequence used by `test_id`.
    pub fn inputs_for(&self, test_id: u64) -> Vec<(usize, usize)> {
        match &self.inputs {
            Some(shared) => shared.clone(),
            None => {
                let mut rng = stream(self.seed, INDEPENDENT_INPUT_STREAM + test_id);
                draw_inputs(&mut rng, &self.scenario, self.n_trials)
            }
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn draw_inputs(rng: &mut ChaCha20Rng, scenario: &Scenario, n: u64) -> Vec<(usize, usize)> {
    let dims = scenario.dims();
    let dist = scenario.input_dist();
    (0..n)
        .map(|_| {
            let s = sample_index(rng, dist);
            (s / dims.n_y, s % dims.n_y)
        })
        .collect()
}

fn sample_index(rng: &mut ChaCha20Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding slack above the last cumulative sum.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Anything that yields the distribution governing one trial.
pub trait TrialSource: Sync {
    fn correlation(&self, test_id: u64, trial_index: u64) -> Correlation;
}

/// A circuit under a (possibly drifting) noise model.
#[derive(Clone, Debug)]
pub struct NoisyCircuit {
    segments: Vec<(u64, u64, Correlation)>,
    base: Correlation,
}

impl NoisyCircuit {
    pub fn new(circuit: Circuit, noise: &NoiseModel) -> Self {
        let ideal = circuit.ideal_correlation();
        NoisyCircuit {
            segments: noise.drift.iter().map(|s| (s.start, s.end, s.params.apply(&ideal))).collect(),
            base: noise.base.apply(&ideal),
        }
    }
}

impl TrialSource for NoisyCircuit {
    fn correlation(&self, _test_id: u64, trial_index: u64) -> Correlation {
        self.segments
            .iter()
            .find(|(s, e, _)| *s <= trial_index && trial_index < *e)
            .map(|(_, _, p)| p.clone())
            .unwrap_or_else(|| self.base.clone())
    }
}

impl<F> TrialSource for F
where
    F: Fn(u64, u64) -> Correlation + Sync,
{
    fn correlation(&self, test_id: u64, trial_index: u64) -> Correlation {
        self(test_id, trial_index)
    }
}

/// Samples a campaign of `circuit` under `noise`.
pub fn sample_campaign(circuit: Circuit, noise: &NoiseModel, plan: &CampaignPlan) -> Result<TrialLog> {
    noise.validate(plan.n_trials)?;
    sample_from_source(&NoisyCircuit::new(circuit, noise), plan)
}

/// Samples every test of `plan` from `source`; records are ordered by
/// `(test_id, trial_index)` regardless of thread scheduling.
pub fn sample_from_source(source: &impl TrialSource, plan: &CampaignPlan) -> Result<TrialLog> {
    plan.validate()?;
    let per_test: Vec<Vec<TrialRecord>> = (0..plan.n_tests)
        .into_par_iter()
        .map(|test_id| sample_test(source, plan, test_id))
        .collect();
    Ok(TrialLog::new(per_test.into_iter().flatten().collect()))
}

fn sample_test(source: &impl TrialSource, plan: &CampaignPlan, test_id: u64) -> Vec<TrialRecord> {
    let dims = plan.scenario.dims();
    let inputs = plan.inputs_for(test_id);
    let mut rng = stream(plan.seed, 1 + test_id);
    inputs
        .iter()
        .enumerate()
        .map(|(k, &(x, y))| {
            let p = source.correlation(test_id, k as u64);
            let cell = sample_index(&mut rng, p.setting(x, y));
            TrialRecord { test_id, trial_index: k as u64, x, y, a: cell / dims.n_b, b: cell % dims.n_b }
        })
        .collect()
}
