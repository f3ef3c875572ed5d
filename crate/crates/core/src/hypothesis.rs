use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment::{MomentLevel, MomentSet};
use crate::polytope::{PolytopeKind, PolytopeSet};
use crate::scenario::{Correlation, Scenario};

/// Null hypotheses the protocol can test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum HypothesisId {
    /// Bell-local correlations.
    Local,
    /// Moment-matrix relaxation with the `A_x B_y` words added.
    Q1AB,
    /// Level-1 moment-matrix relaxation.
    Q1,
    NoSignaling,
    /// One-way no-signaling from Alice to Bob: Bob's marginals ignore `x`.
    OwnsAnotB,
    /// One-way no-signaling from Bob to Alice: Alice's marginals ignore `y`.
    OwnsBnotA,
}

impl HypothesisId {
    pub const ALL: [HypothesisId; 6] = [
        HypothesisId::Local,
        HypothesisId::Q1AB,
        HypothesisId::Q1,
        HypothesisId::NoSignaling,
        HypothesisId::OwnsAnotB,
        HypothesisId::OwnsBnotA,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            HypothesisId::Local => "l",
            HypothesisId::Q1AB => "q1ab",
            HypothesisId::Q1 => "q1",
            HypothesisId::NoSignaling => "ns",
            HypothesisId::OwnsAnotB => "owns-ab",
            HypothesisId::OwnsBnotA => "owns-ba",
        }
    }

    // Position in the chain L < Q1AB < Q1 < NS < {OWNS_AnotB, OWNS_BnotA}.
    fn rank(&self) -> u8 {
        match self {
            HypothesisId::Local => 0,
            HypothesisId::Q1AB => 1,
            HypothesisId::Q1 => 2,
            HypothesisId::NoSignaling => 3,
            HypothesisId::OwnsAnotB | HypothesisId::OwnsBnotA => 4,
        }
    }

    /// Whether the set of `self` is contained in the set of `other`.
    ///
    /// The two one-way sets are incomparable; everything else is a chain.
    pub fn is_subset_of(&self, other: HypothesisId) -> bool {
        *self == other || self.rank() < other.rank()
    }

    /// Moment relaxations default to NS regularization of the estimate.
    pub fn regularizes_by_default(&self) -> bool {
        matches!(self, HypothesisId::Q1 | HypothesisId::Q1AB)
    }

    pub fn parse_list(s: &str) -> Result<Vec<HypothesisId>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let h: HypothesisId = part.parse()?;
            if !out.contains(&h) {
                out.push(h);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidConfig("empty hypothesis list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for HypothesisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HypothesisId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l" | "local" => Ok(HypothesisId::Local),
            "q1ab" | "q1+ab" => Ok(HypothesisId::Q1AB),
            "q1" => Ok(HypothesisId::Q1),
            "ns" => Ok(HypothesisId::NoSignaling),
            "owns-ab" | "owns_anotb" => Ok(HypothesisId::OwnsAnotB),
            "owns-ba" | "owns_bnota" => Ok(HypothesisId::OwnsBnotA),
            other => Err(Error::InvalidConfig(format!("unknown hypothesis '{other}'"))),
        }
    }
}

impl From<HypothesisId> for String {
    fn from(h: HypothesisId) -> String {
        h.as_str().to_string()
    }
}

impl TryFrom<String> for HypothesisId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// A convex hypothesis set: an exact polytope or a moment-matrix relaxation.
#[derive(Clone, Debug)]
pub enum HypothesisSet {
    Polytope(PolytopeSet),
    Moment(MomentSet),
}

impl HypothesisSet {
    pub fn build(id: HypothesisId, scenario: &Scenario) -> Result<Self> {
        Ok(match id {
            HypothesisId::Local => {
                HypothesisSet::Polytope(PolytopeSet::build(PolytopeKind::Local, scenario))
            }
            HypothesisId::NoSignaling => {
                HypothesisSet::Polytope(PolytopeSet::build(PolytopeKind::NoSignaling, scenario))
            }
            HypothesisId::OwnsAnotB => {
                HypothesisSet::Polytope(PolytopeSet::build(PolytopeKind::OwnsAnotB, scenario))
            }
            HypothesisId::OwnsBnotA => {
                HypothesisSet::Polytope(PolytopeSet::build(PolytopeKind::OwnsBnotA, scenario))
            }
            HypothesisId::Q1 => {
                HypothesisSet::Moment(MomentSet::build(MomentLevel::One, scenario)?)
            }
            HypothesisId::Q1AB => {
                HypothesisSet::Moment(MomentSet::build(MomentLevel::OneAB, scenario)?)
            }
        })
    }

    pub fn id(&self) -> HypothesisId {
        match self {
            HypothesisSet::Polytope(p) => p.kind().into(),
            HypothesisSet::Moment(m) => m.level().into(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        match self {
            HypothesisSet::Polytope(p) => p.scenario(),
            HypothesisSet::Moment(m) => m.scenario(),
        }
    }

    /// Membership within `tol` (sup-norm for polytopes, eigenvalue margin for moment sets).
    pub fn contains(&self, p: &Correlation, tol: f64) -> Result<bool> {
        match self {
            HypothesisSet::Polytope(s) => s.contains(p, tol),
            HypothesisSet::Moment(m) => m.contains(p, tol),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusion_chain() {
        use HypothesisId::*;
        assert!(Local.is_subset_of(Q1AB));
        assert!(Q1AB.is_subset_of(Q1));
        assert!(Q1.is_subset_of(NoSignaling));
        assert!(NoSignaling.is_subset_of(OwnsAnotB));
        assert!(NoSignaling.is_subset_of(OwnsBnotA));
        assert!(!OwnsAnotB.is_subset_of(OwnsBnotA));
        assert!(!OwnsBnotA.is_subset_of(NoSignaling));
        assert!(Local.is_subset_of(Local));
    }

    #[test]
    fn parse_names() {
        let list = HypothesisId::parse_list("ns,owns-ab,owns-ba,l,q1ab").unwrap();
        assert_eq!(
            list,
            vec![
                HypothesisId::NoSignaling,
                HypothesisId::OwnsAnotB,
                HypothesisId::OwnsBnotA,
                HypothesisId::Local,
                HypothesisId::Q1AB
            ]
        );
        assert!(HypothesisId::parse_list("ns,q7").is_err());
        for h in HypothesisId::ALL {
            assert_eq!(h.as_str().parse::<HypothesisId>().unwrap(), h);
        }
    }
}
