//! Bell-scenario data model.
//!
//! A [`Correlation`] is a dense table `P(a,b|x,y)` laid out setting-major:
//! all outcome pairs of setting `(x,y)` are contiguous. The same type carries
//! ideal correlations, relative frequencies and regularized estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for nonnegativity and per-setting normalization.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Rows off by at most this much are renormalized on ingestion; worse is rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Input and output cardinalities of a bipartite Bell scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub n_x: usize,
    pub n_y: usize,
    pub n_a: usize,
    pub n_b: usize,
}

impl Dims {
    /// The CHSH scenario: two binary measurements per party.
    pub const CHSH: Dims = Dims { n_x: 2, n_y: 2, n_a: 2, n_b: 2 };

    pub fn new(n_x: usize, n_y: usize, n_a: usize, n_b: usize) -> Result<Self> {
        let dims = Dims { n_x, n_y, n_a, n_b };
        if [n_x, n_y, n_a, n_b].iter().any(|&n| n < 2) {
            return Err(Error::InvalidScenario(format!(
                "all cardinalities must be at least 2, got {dims:?}"
            )));
        }
        Ok(dims)
    }

    #[inline]
    pub fn settings(&self) -> usize {
        self.n_x * self.n_y
    }

    #[inline]
    pub fn outcomes(&self) -> usize {
        self.n_a * self.n_b
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.settings() * self.outcomes()
    }

    #[inline]
    pub fn setting_index(&self, x: usize, y: usize) -> usize {
        x * self.n_y + y
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        debug_assert!(a < self.n_a && b < self.n_b && x < self.n_x && y < self.n_y);
        (self.setting_index(x, y) * self.n_a + a) * self.n_b + b
    }

    /// Inverse of [`Dims::index`]: returns `(a, b, x, y)`.
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize, usize) {
        let b = idx % self.n_b;
        let a = (idx / self.n_b) % self.n_a;
        let s = idx / self.outcomes();
        (a, b, s / self.n_y, s % self.n_y)
    }

    /// Iterates over all `(a, b, x, y)` in storage order.
    pub fn cells_iter(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        (0..self.cells()).map(move |i| self.unindex(i))
    }

    pub fn contains(&self, a: usize, b: usize, x: usize, y: usize) -> bool {
        a < self.n_a && b < self.n_b && x < self.n_x && y < self.n_y
    }
}

/// Cardinalities together with the input distribution `P(x,y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    dims: Dims,
    input_dist: Vec<f64>,
}

impl Scenario {
    pub fn new(dims: Dims, input_dist: Vec<f64>) -> Result<Self> {
        let dims = Dims::new(dims.n_x, dims.n_y, dims.n_a, dims.n_b)?;
        if input_dist.len() != dims.settings() {
            return Err(Error::InvalidScenario(format!(
                "input distribution has {} entries, expected {}",
                input_dist.len(),
                dims.settings()
            )));
        }
        if input_dist.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidScenario("input distribution has a negative entry".into()));
        }
        let total: f64 = input_dist.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidScenario(format!(
                "input distribution sums to {total}, expected 1"
            )));
        }
        Ok(Scenario { dims, input_dist })
    }

    pub fn uniform(dims: Dims) -> Result<Self> {
        let n = dims.n_x * dims.n_y;
        Scenario::new(dims, vec![1.0 / n as f64; n])
    }

    /// The (2,2,2,2) scenario with uniformly random inputs.
    pub fn chsh() -> Self {
        Scenario { dims: Dims::CHSH, input_dist: vec![0.25; 4] }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn input_prob(&self, x: usize, y: usize) -> f64 {
        self.input_dist[self.dims.setting_index(x, y)]
    }

    pub fn input_dist(&self) -> &[f64] {
        &self.input_dist
    }

    /// Per-cell weight `P(x,y)` expanded over the dense table layout.
    pub fn cell_weights(&self) -> Vec<f64> {
        let per = self.dims.outcomes();
        self.input_dist
            .iter()
            .flat_map(|&w| std::iter::repeat_n(w, per))
            .collect()
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::chsh()
    }
}

/// A table of conditional probabilities `P(a,b|x,y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    dims: Dims,
    probs: Vec<f64>,
}

impl Correlation {
    /// Validates nonnegativity and per-setting normalization to [`NORMALIZATION_TOL`].
    pub fn new(dims: Dims, probs: Vec<f64>) -> Result<Self> {
        let c = Correlation { dims, probs };
        c.validate(NORMALIZATION_TOL)?;
        Ok(c)
    }

    /// Like [`Correlation::new`] but rescales rows whose sum is off by at most
    /// [`RENORMALIZE_TOL`]. Tiny negative entries (>= -1e-9) are clamped to zero.
    pub fn renormalized(dims: Dims, mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() != dims.cells() {
            return Err(Error::InvalidCorrelation(format!(
                "table has {} entries, expected {}",
                probs.len(),
                dims.cells()
            )));
        }
        for p in probs.iter_mut() {
            if !p.is_finite() || *p < -RENORMALIZE_TOL {
                return Err(Error::InvalidCorrelation(format!("invalid probability {p}")));
            }
            *p = p.max(0.0);
        }
        let per = dims.outcomes();
        for (s, row) in probs.chunks_mut(per).enumerate() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > RENORMALIZE_TOL {
                return Err(Error::InvalidCorrelation(format!(
                    "setting {s} sums to {total}, beyond renormalization tolerance"
                )));
            }
            row.iter_mut().for_each(|p| *p /= total);
        }
        Correlation::new(dims, probs)
    }

    pub(crate) fn from_raw(dims: Dims, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), dims.cells());
        Correlation { dims, probs }
    }

    pub fn from_fn(dims: Dims, f: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let probs = dims.cells_iter().map(|(a, b, x, y)| f(a, b, x, y)).collect();
        Correlation::new(dims, probs)
    }

    pub fn uniform(dims: Dims) -> Self {
        Correlation { dims, probs: vec![1.0 / dims.outcomes() as f64; dims.cells()] }
    }

    /// Local deterministic strategy: Alice answers `alice[x]`, Bob answers `bob[y]`.
    pub fn deterministic(dims: Dims, alice: &[usize], bob: &[usize]) -> Self {
        let probs = dims
            .cells_iter()
            .map(|(a, b, x, y)| if alice[x] == a && bob[y] == b { 1.0 } else { 0.0 })
            .collect();
        Correlation { dims, probs }
    }

    /// The Popescu-Rohrlich box `P(a,b|x,y) = 1/2 [a xor b = x and y]`.
    pub fn pr_box() -> Self {
        let probs = Dims::CHSH
            .cells_iter()
            .map(|(a, b, x, y)| if (a ^ b) == (x & y) { 0.5 } else { 0.0 })
            .collect();
        Correlation { dims: Dims::CHSH, probs }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.probs[self.dims.index(a, b, x, y)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// The outcome distribution of setting `(x,y)`.
    pub fn setting(&self, x: usize, y: usize) -> &[f64] {
        let per = self.dims.outcomes();
        let s = self.dims.setting_index(x, y);
        &self.probs[s * per..(s + 1) * per]
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.probs.len() != self.dims.cells() {
            return Err(Error::InvalidCorrelation(format!(
                "table has {} entries, expected {}",
                self.probs.len(),
                self.dims.cells()
            )));
        }
        if let Some(p) = self.probs.iter().find(|p| !p.is_finite() || **p < -tol) {
            return Err(Error::InvalidCorrelation(format!("invalid probability {p}")));
        }
        for (s, row) in self.probs.chunks(self.dims.outcomes()).enumerate() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > tol {
                return Err(Error::InvalidCorrelation(format!("setting {s} sums to {total}")));
            }
        }
        Ok(())
    }

    /// Convex combination `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &Correlation, weight: f64) -> Correlation {
        assert_eq!(self.dims, other.dims, "mixing correlations of different scenarios");
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| weight * p + (1.0 - weight) * q)
            .collect();
        Correlation { dims: self.dims, probs }
    }

    /// Alice's marginal `sum_b P(a,b|x,y)`.
    pub fn marginal_a(&self, a: usize, x: usize, y: usize) -> f64 {
        (0..self.dims.n_b).map(|b| self.get(a, b, x, y)).sum()
    }

    /// Bob's marginal `sum_a P(a,b|x,y)`.
    pub fn marginal_b(&self, b: usize, x: usize, y: usize) -> f64 {
        (0..self.dims.n_a).map(|a| self.get(a, b, x, y)).sum()
    }

    pub fn signaling_deficit(&self) -> SignalingDeficit {
        let d = self.dims;
        let mut b_to_a: f64 = 0.0;
        for a in 0..d.n_a {
            for x in 0..d.n_x {
                for y in 0..d.n_y {
                    for y2 in (y + 1)..d.n_y {
                        let diff = (self.marginal_a(a, x, y) - self.marginal_a(a, x, y2)).abs();
                        b_to_a = b_to_a.max(diff);
                    }
                }
            }
        }
        let mut a_to_b: f64 = 0.0;
        for b in 0..d.n_b {
            for y in 0..d.n_y {
                for x in 0..d.n_x {
                    for x2 in (x + 1)..d.n_x {
                        let diff = (self.marginal_b(b, x, y) - self.marginal_b(b, x2, y)).abs();
                        a_to_b = a_to_b.max(diff);
                    }
                }
            }
        }
        SignalingDeficit { b_to_a, a_to_b }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Correlation) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    }
}

/// Worst-case marginal dependence on the other party's input.
///
/// `b_to_a` measures how much Alice's marginals move with `y`; it is zero
/// exactly on the one-way no-signaling set from Bob to Alice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalingDeficit {
    pub b_to_a: f64,
    pub a_to_b: f64,
}

/// Coefficient table `R_{abxy}` of a linear Bell functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    dims: Dims,
    coeffs: Vec<f64>,
}

impl BellFunctional {
    pub fn new(dims: Dims, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != dims.cells() {
            return Err(Error::InvalidCorrelation(format!(
                "functional has {} coefficients, expected {}",
                coeffs.len(),
                dims.cells()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidCorrelation("non-finite functional coefficient".into()));
        }
        Ok(BellFunctional { dims, coeffs })
    }

    pub fn ones(dims: Dims) -> Self {
        BellFunctional { dims, coeffs: vec![1.0; dims.cells()] }
    }

    /// Coefficients whose value `sum R P(x,y) P` equals the CHSH correlator
    /// `E00 + E01 + E10 - E11` under the scenario's input distribution.
    pub fn chsh(scenario: &Scenario) -> Self {
        let dims = scenario.dims();
        assert_eq!(dims, Dims::CHSH, "CHSH functional needs the (2,2,2,2) scenario");
        let coeffs = dims
            .cells_iter()
            .map(|(a, b, x, y)| {
                let sign = if (a ^ b ^ (x & y)) == 0 { 1.0 } else { -1.0 };
                sign / scenario.input_prob(x, y)
            })
            .collect();
        BellFunctional { dims, coeffs }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficients multiplied by the input weights, i.e. the linear form acting on the raw table.
    pub fn weighted(&self, scenario: &Scenario) -> Vec<f64> {
        self.coeffs
            .iter()
            .zip(scenario.cell_weights())
            .map(|(c, w)| c * w)
            .collect()
    }
}

/// Evaluates `sum_{a,b,x,y} R_{abxy} P(x,y) P(a,b|x,y)`.
pub fn bell_functional(p: &Correlation, functional: &BellFunctional, scenario: &Scenario) -> f64 {
    debug_assert_eq!(p.dims(), functional.dims());
    p.as_slice()
        .iter()
        .zip(functional.weighted(scenario))
        .map(|(p, c)| p * c)
        .sum()
}

/// One `(a,b,x,y)` event of a Bell test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialRecord {
    pub test_id: u64,
    pub trial_index: u64,
    pub x: usize,
    pub y: usize,
    pub a: usize,
    pub b: usize,
}

/// The trials of a single Bell test, ordered by trial index.
#[derive(Clone, Debug, PartialEq)]
pub struct BellTest {
    pub test_id: u64,
    pub trials: Vec<TrialRecord>,
}

/// All trials of a campaign, in emission order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialLog {
    pub records: Vec<TrialRecord>,
}

impl TrialLog {
    pub fn new(records: Vec<TrialRecord>) -> Self {
        TrialLog { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Groups records by test id (ascending), keeping each test's record order.
    pub fn tests(&self) -> Vec<BellTest> {
        let mut grouped: std::collections::BTreeMap<u64, Vec<TrialRecord>> = Default::default();
        for r in &self.records {
            grouped.entry(r.test_id).or_default().push(*r);
        }
        grouped
            .into_iter()
            .map(|(test_id, trials)| BellTest { test_id, trials })
            .collect()
    }
}

/// Occurrence counts `N_{a,b,x,y}` and their per-setting totals `N_{x,y}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountsTable {
    dims: Dims,
    counts: Vec<u64>,
    per_setting: Vec<u64>,
}

impl CountsTable {
    pub fn zeros(dims: Dims) -> Self {
        CountsTable { dims, counts: vec![0; dims.cells()], per_setting: vec![0; dims.settings()] }
    }

    pub fn from_counts(dims: Dims, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != dims.cells() {
            return Err(Error::InvalidCorrelation(format!(
                "counts table has {} entries, expected {}",
                counts.len(),
                dims.cells()
            )));
        }
        let per_setting = counts.chunks(dims.outcomes()).map(|row| row.iter().sum()).collect();
        Ok(CountsTable { dims, counts, per_setting })
    }

    pub fn from_trials<'a>(
        dims: Dims,
        trials: impl IntoIterator<Item = &'a TrialRecord>,
    ) -> Result<Self> {
        let mut table = CountsTable::zeros(dims);
        for t in trials {
            table.record(t)?;
        }
        Ok(table)
    }

    pub fn record(&mut self, t: &TrialRecord) -> Result<()> {
        if !self.dims.contains(t.a, t.b, t.x, t.y) {
            return Err(Error::InvalidCorrelation(format!(
                "trial {} of test {} has labels outside {:?}",
                t.trial_index, t.test_id, self.dims
            )));
        }
        self.counts[self.dims.index(t.a, t.b, t.x, t.y)] += 1;
        self.per_setting[self.dims.setting_index(t.x, t.y)] += 1;
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> u64 {
        self.counts[self.dims.index(a, b, x, y)]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn per_setting(&self, x: usize, y: usize) -> u64 {
        self.per_setting[self.dims.setting_index(x, y)]
    }

    pub fn total(&self) -> u64 {
        self.per_setting.iter().sum()
    }

    /// Relative frequencies `f(a,b|x,y) = N_{a,b,x,y} / N_{x,y}`.
    pub fn frequencies(&self) -> Result<Correlation> {
        let per = self.dims.outcomes();
        let mut probs = Vec::with_capacity(self.dims.cells());
        for (s, row) in self.counts.chunks(per).enumerate() {
            let n = self.per_setting[s];
            if n == 0 {
                return Err(Error::EmptySetting { x: s / self.dims.n_y, y: s % self.dims.n_y });
            }
            probs.extend(row.iter().map(|&c| c as f64 / n as f64));
        }
        Ok(Correlation::from_raw(self.dims, probs))
    }
}

/// Relative frequencies of a counts table; the scenario must match the table's cardinalities.
pub fn frequencies_from_counts(counts: &CountsTable, scenario: &Scenario) -> Result<Correlation> {
    if counts.dims() != scenario.dims() {
        return Err(Error::InvalidScenario(format!(
            "counts table {:?} does not match scenario {:?}",
            counts.dims(),
            scenario.dims()
        )));
    }
    counts.frequencies()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts_from(f: impl Fn(usize, usize, usize, usize) -> u64) -> CountsTable {
        let d = Dims::CHSH;
        CountsTable::from_counts(d, d.cells_iter().map(|(a, b, x, y)| f(a, b, x, y)).collect())
            .unwrap()
    }

    #[test]
    fn index_roundtrip() {
        let d = Dims::new(2, 3, 3, 2).unwrap();
        for i in 0..d.cells() {
            let (a, b, x, y) = d.unindex(i);
            assert_eq!(d.index(a, b, x, y), i);
        }
    }

    #[test]
    fn rejects_small_cardinalities_and_bad_inputs() {
        assert!(Dims::new(1, 2, 2, 2).is_err());
        assert!(Scenario::new(Dims::CHSH, vec![0.5, 0.5, 0.0, 0.1]).is_err());
        assert!(Scenario::new(Dims::CHSH, vec![0.5, 0.5]).is_err());
        assert!(Scenario::new(Dims::CHSH, vec![1.0, 0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn all_mass_on_one_cell() {
        let counts = counts_from(|a, b, x, y| match (a, b, x, y) {
            (0, 0, 0, 0) => 4,
            (0, 0, _, _) => 1,
            _ => 0,
        });
        let f = frequencies_from_counts(&counts, &Scenario::chsh()).unwrap();
        assert_eq!(f.get(0, 0, 0, 0), 1.0);
        assert_eq!(counts.total(), 7);
    }

    #[test]
    fn uniform_counts_give_quarter() {
        let f = counts_from(|_, _, _, _| 3).frequencies().unwrap();
        assert!(f.as_slice().iter().all(|&p| p == 0.25));
    }

    #[test]
    fn empty_setting_is_reported() {
        let counts = counts_from(|_, _, x, y| if (x, y) == (1, 0) { 0 } else { 1 });
        match counts.frequencies() {
            Err(Error::EmptySetting { x: 1, y: 0 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn doubling_counts_leaves_frequencies_unchanged() {
        let c1 = counts_from(|a, b, x, y| (1 + a + 2 * b + 3 * x + 5 * y) as u64);
        let c2 = counts_from(|a, b, x, y| 2 * (1 + a + 2 * b + 3 * x + 5 * y) as u64);
        assert_eq!(c1.frequencies().unwrap(), c2.frequencies().unwrap());
    }

    #[test]
    fn marginals() {
        let u = Correlation::uniform(Dims::CHSH);
        for (a, _, x, y) in Dims::CHSH.cells_iter() {
            assert_eq!(u.marginal_a(a, x, y), 0.5);
            assert_eq!(u.marginal_b(a, x, y), 0.5);
        }
        let det = Correlation::deterministic(Dims::CHSH, &[0, 0], &[0, 0]);
        assert_eq!(det.marginal_a(0, 1, 1), 1.0);
    }

    #[test]
    fn deficits_of_no_signaling_members_vanish() {
        assert_eq!(
            Correlation::pr_box().signaling_deficit(),
            SignalingDeficit { b_to_a: 0.0, a_to_b: 0.0 }
        );
        let det = Correlation::deterministic(Dims::CHSH, &[1, 0], &[0, 1]);
        assert_eq!(det.signaling_deficit(), SignalingDeficit { b_to_a: 0.0, a_to_b: 0.0 });
    }

    #[test]
    fn one_sided_deficit() {
        // Alice's x=0 outcome flips with probability 0.1 when y=1.
        let p = Correlation::from_fn(Dims::CHSH, |a, b, x, y| {
            let pa = match (x, y) {
                (0, 1) => [0.9, 0.1][a],
                (0, 0) => [1.0, 0.0][a],
                _ => 0.5,
            };
            pa * 0.5 + 0.0 * b as f64
        })
        .unwrap();
        let d = p.signaling_deficit();
        assert!((d.b_to_a - 0.1).abs() < 1e-15);
        assert_eq!(d.a_to_b, 0.0);
    }

    #[test]
    fn functional_values() {
        let s = Scenario::chsh();
        let ones = BellFunctional::ones(Dims::CHSH);
        assert!((bell_functional(&Correlation::pr_box(), &ones, &s) - 1.0).abs() < 1e-15);
        let chsh = BellFunctional::chsh(&s);
        assert!((bell_functional(&Correlation::pr_box(), &chsh, &s) - 4.0).abs() < 1e-12);
        assert!(bell_functional(&Correlation::uniform(Dims::CHSH), &chsh, &s).abs() < 1e-12);
    }

    #[test]
    fn chsh_respects_non_uniform_inputs() {
        let s = Scenario::new(Dims::CHSH, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let v = bell_functional(&Correlation::pr_box(), &BellFunctional::chsh(&s), &s);
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn renormalization_window() {
        let mut probs = Correlation::uniform(Dims::CHSH).into_vec();
        probs[0] += 5e-10;
        let c = Correlation::renormalized(Dims::CHSH, probs.clone()).unwrap();
        assert!(c.validate(1e-15).is_ok());
        probs[0] += 1e-6;
        assert!(Correlation::renormalized(Dims::CHSH, probs).is_err());
    }

    #[test]
    fn log_grouping_preserves_order() {
        let rec = |t, k| TrialRecord { test_id: t, trial_index: k, x: 0, y: 0, a: 0, b: 0 };
        let log = TrialLog::new(vec![rec(1, 0), rec(0, 0), rec(1, 1), rec(0, 1)]);
        let tests = log.tests();
        assert_eq!(tests.len(), 2);
        assert_eq!(tests[0].test_id, 0);
        assert_eq!(tests[1].trials.iter().map(|t| t.trial_index).collect::<Vec<_>>(), vec![0, 1]);
    }
}
