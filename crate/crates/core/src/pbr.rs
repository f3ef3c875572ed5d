//! Prediction-based-ratio (PBR) hypothesis test for one Bell test.
//!
//! The first `n_est` trials give frequencies `f`. Their KL projection `P*`
//! onto the hypothesis set yields ratios `R = f / P*`, rescaled so that
//! `sum R P(x,y) P <= 1` holds for every member `P`. Under the null the
//! running product of `R` over the remaining trials is a test
//! supermartingale, so `min(1/t, 1)` bounds the p-value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisId, HypothesisSet};
use crate::kl::{kl_project_with, KlOptions, KlResult, DEFAULT_MAX_ITERATIONS};
use crate::lp::Sense;
use crate::polytope::{PolytopeKind, PolytopeSet};
use crate::scenario::{BellTest, Correlation, CountsTable, Dims, Scenario, TrialRecord};

/// Floor applied to projected probabilities before division.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Whether the estimate is first replaced by its KL projection onto NS.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularize {
    /// Only for the moment relaxations.
    #[default]
    Auto,
    Always,
    Never,
}

impl std::str::FromStr for Regularize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Regularize::Auto),
            "always" | "true" | "on" => Ok(Regularize::Always),
            "never" | "false" | "off" => Ok(Regularize::Never),
            other => Err(Error::InvalidConfig(format!("unknown regularization mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n_est: usize,
    pub alpha: f64,
    pub regularize: Regularize,
    pub hypotheses: Vec<HypothesisId>,
    /// Solver tolerance; `None` picks the per-family default.
    pub tol: Option<f64>,
    pub max_iterations: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_est: 600,
            alpha: 0.05,
            regularize: Regularize::Auto,
            hypotheses: HypothesisId::ALL.to_vec(),
            tol: None,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_est == 0 {
            return Err(Error::InvalidConfig("n_est must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha = {} is outside (0, 1)", self.alpha)));
        }
        if self.hypotheses.is_empty() {
            return Err(Error::InvalidConfig("no hypotheses requested".into()));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidConfig(format!("tol = {t} must be positive")));
            }
        }
        Ok(())
    }

    pub fn regularizes(&self, h: HypothesisId) -> bool {
        match self.regularize {
            Regularize::Auto => h.regularizes_by_default(),
            Regularize::Always => true,
            Regularize::Never => false,
        }
    }

    fn kl_options(&self) -> KlOptions {
        KlOptions { tol: self.tol, max_iterations: self.max_iterations, start_weights: None }
    }
}

/// Splits one test's trials into estimation and testing halves.
pub fn split_trials(trials: &[TrialRecord], n_est: usize) -> Result<(&[TrialRecord], &[TrialRecord])> {
    if n_est == 0 || n_est >= trials.len() {
        return Err(Error::TooFewTrials { required: n_est.max(1) + 1, actual: trials.len() });
    }
    for (i, w) in trials.windows(2).enumerate() {
        if w[1].trial_index <= w[0].trial_index {
            return Err(Error::UnorderedTrials { test_id: w[1].test_id, position: i + 1 });
        }
    }
    Ok(trials.split_at(n_est))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PbrTable {
    pub hypothesis: HypothesisId,
    pub dims: Dims,
    /// Indexed like [`Correlation`] probabilities.
    pub ratios: Vec<f64>,
    /// Excess of the validity bound before rescaling.
    pub epsilon: f64,
}

impl PbrTable {
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.ratios[self.dims.index(a, b, x, y)]
    }

    /// `R` weighted by the input distribution, the linear form of the validity constraint.
    pub fn weighted(&self, scenario: &Scenario) -> Vec<f64> {
        self.ratios.iter().zip(scenario.cell_weights()).map(|(r, w)| r * w).collect()
    }
}

/// Exact maximum of `sum R P(x,y) P` over `set`, or over NS for the moment
/// relaxations (which NS contains).
pub fn validity_bound(ratios_weighted: &[f64], set: &HypothesisSet) -> Result<f64> {
    match set {
        HypothesisSet::Polytope(p) if p.kind() == PolytopeKind::Local => {
            Ok(p.vertex_max(ratios_weighted).expect("local polytope has vertices").0)
        }
        HypothesisSet::Polytope(p) => Ok(p.optimize(ratios_weighted, Sense::Maximize)?.value),
        HypothesisSet::Moment(m) => {
            let ns = PolytopeSet::build(PolytopeKind::NoSignaling, m.scenario());
            Ok(ns.optimize(ratios_weighted, Sense::Maximize)?.value)
        }
    }
}

/// A PBR table with the projection that produced it.
#[derive(Clone, Debug)]
pub struct PbrBuild {
    pub table: PbrTable,
    pub projection: KlResult,
}

/// Builds `R = num / max(P*, floor) / (1 + eps)` where `P*` is the KL
/// projection of `num` onto `set`.
///
/// `num` is the estimation-half frequency table, or its NS projection when
/// regularizing (see [`regularize_to_ns`]).
pub fn build_pbrs(num: &Correlation, set: &HypothesisSet, options: &KlOptions) -> Result<PbrBuild> {
    let solver_failure = |e: Error| Error::SolverFailure { hypothesis: set.id(), source: Box::new(e) };
    let projection = kl_project_with(num, set, options).map_err(solver_failure)?;
    let mut ratios: Vec<f64> = num
        .as_slice()
        .iter()
        .zip(projection.minimizer.as_slice())
        .map(|(f, p)| if *f > 0.0 { f / p.max(DENOMINATOR_FLOOR) } else { 0.0 })
        .collect();
    let weights = set.scenario().cell_weights();
    let weighted: Vec<f64> = ratios.iter().zip(&weights).map(|(r, w)| r * w).collect();
    let bound = validity_bound(&weighted, set).map_err(solver_failure)?;
    let epsilon = (bound - 1.0).max(0.0);
    if epsilon > 0.0 {
        ratios.iter_mut().for_each(|r| *r /= 1.0 + epsilon);
    }
    Ok(PbrBuild {
        table: PbrTable { hypothesis: set.id(), dims: num.dims(), ratios, epsilon },
        projection,
    })
}

/// KL projection of `f` onto NS, used as the numerator and projection input.
pub fn regularize_to_ns(f: &Correlation, scenario: &Scenario, options: &KlOptions) -> Result<Correlation> {
    let ns = HypothesisSet::Polytope(PolytopeSet::build(PolytopeKind::NoSignaling, scenario));
    kl_project_with(f, &ns, options)
        .map(|r| r.minimizer)
        .map_err(|e| Error::SolverFailure { hypothesis: HypothesisId::NoSignaling, source: Box::new(e) })
}

/// `log t = sum N log R`; `-inf` if a cell with `N > 0` has `R = 0`.
pub fn test_statistic(pbrs: &PbrTable, counts: &CountsTable) -> f64 {
    debug_assert_eq!(pbrs.dims, counts.dims());
    let mut log_t = 0.0;
    for (n, r) in counts.counts().iter().zip(&pbrs.ratios) {
        if *n == 0 {
            continue;
        }
        if *r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        log_t += *n as f64 * r.ln();
    }
    log_t
}

/// `min(1/t, 1)` for a statistic given directly as `t`.
pub fn p_value_from_t(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else {
        1.0 / t
    }
}

/// `min(exp(-log t), 1)`.
pub fn p_value_bound(log_t: f64) -> f64 {
    if log_t <= 0.0 {
        1.0
    } else {
        (-log_t).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(with = "extended_float")]
    pub divergence: f64,
    #[serde(with = "extended_float")]
    pub duality_gap: f64,
    pub iterations: usize,
    pub certified: bool,
    pub epsilon: f64,
    pub regularized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOutcome {
    pub hypothesis: HypothesisId,
    #[serde(with = "extended_float")]
    pub log_t: f64,
    pub p_upper: f64,
    pub rejected: bool,
    /// Rejected directly or through a rejected superset.
    pub indirect: bool,
    pub diagnostics: Diagnostics,
    pub pbr: PbrTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PbrReport {
    pub test_id: u64,
    pub n_est: usize,
    pub n_test: usize,
    pub alpha: f64,
    pub outcomes: Vec<HypothesisOutcome>,
}

impl PbrReport {
    pub fn outcome(&self, h: HypothesisId) -> Option<&HypothesisOutcome> {
        self.outcomes.iter().find(|o| o.hypothesis == h)
    }
}

/// `indirect[H]` is true when `H` or any requested superset of `H` is rejected.
pub fn combine_indirect(rejected: &[(HypothesisId, bool)]) -> Vec<bool> {
    rejected
        .iter()
        .map(|(h, _)| rejected.iter().any(|(g, r)| *r && h.is_subset_of(*g)))
        .collect()
}

/// Hypothesis sets built once and shared across tests.
#[derive(Clone, Debug)]
pub struct Protocol {
    scenario: Scenario,
    config: ProtocolConfig,
    sets: BTreeMap<HypothesisId, HypothesisSet>,
}

impl Protocol {
    pub fn new(scenario: Scenario, config: ProtocolConfig) -> Result<Self> {
        config.validate()?;
        let sets = config
            .hypotheses
            .iter()
            .map(|h| Ok((*h, HypothesisSet::build(*h, &scenario)?)))
            .collect::<Result<_>>()?;
        Ok(Protocol { scenario, config, sets })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn set(&self, h: HypothesisId) -> Option<&HypothesisSet> {
        self.sets.get(&h)
    }

    /// Split, project, build PBRs, score, and combine verdicts for one test.
    pub fn run(&self, test: &BellTest) -> Result<PbrReport> {
        let dims = self.scenario.dims();
        let (est, testing) = split_trials(&test.trials, self.config.n_est)?;
        let f = CountsTable::from_trials(dims, est)?.frequencies()?;
        let test_counts = CountsTable::from_trials(dims, testing)?;
        let options = self.config.kl_options();

        let needs_g = self.config.hypotheses.iter().any(|h| self.config.regularizes(*h));
        let g = if needs_g { Some(regularize_to_ns(&f, &self.scenario, &options)?) } else { None };

        let mut partial = Vec::with_capacity(self.config.hypotheses.len());
        for &h in &self.config.hypotheses {
            let regularized = self.config.regularizes(h);
            let num = if regularized { g.as_ref().expect("computed above") } else { &f };
            let build = build_pbrs(num, &self.sets[&h], &options)?;
            let log_t = test_statistic(&build.table, &test_counts);
            let p_upper = p_value_bound(log_t);
            partial.push((h, log_t, p_upper, p_upper < self.config.alpha, build, regularized));
        }
        let verdicts: Vec<(HypothesisId, bool)> = partial.iter().map(|p| (p.0, p.3)).collect();
        let indirect = combine_indirect(&verdicts);
        let outcomes = partial
            .into_iter()
            .zip(indirect)
            .map(|((hypothesis, log_t, p_upper, rejected, build, regularized), indirect)| HypothesisOutcome {
                hypothesis,
                log_t,
                p_upper,
                rejected,
                indirect,
                diagnostics: Diagnostics {
                    divergence: build.projection.divergence,
                    duality_gap: build.projection.duality_gap,
                    iterations: build.projection.iterations,
                    certified: build.projection.certified,
                    epsilon: build.table.epsilon,
                    regularized,
                },
                pbr: build.table,
            })
            .collect();
        Ok(PbrReport {
            test_id: test.test_id,
            n_est: est.len(),
            n_test: testing.len(),
            alpha: self.config.alpha,
            outcomes,
        })
    }
}

/// Runs the protocol on a single Bell test.
pub fn run_protocol(test: &BellTest, scenario: &Scenario, config: &ProtocolConfig) -> Result<PbrReport> {
    Protocol::new(scenario.clone(), config.clone())?.run(test)
}

/// JSON has no infinities: non-finite values travel as the strings
/// `"inf"`, `"-inf"` and `"nan"`.
mod extended_float {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(D::Error::custom(format!("expected a number, got '{other}'"))),
            },
        }
    }
}
