//! Cross-talk detection for two-qubit devices from CHSH-type Bell tests.
//!
//! Trial data `(a, b, x, y)` is tested against a chain of convex hypothesis
//! sets (local, moment relaxations of the quantum set, no-signaling and the
//! two one-way no-signaling sets) with the prediction-based-ratio protocol,
//! which yields p-value upper bounds that stay valid for non-i.i.d. trials.

mod barrier;
pub mod error;
pub mod hypothesis;
pub mod io;
pub mod kl;
pub mod lp;
pub mod moment;
pub mod pbr;
pub mod polytope;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use hypothesis::{HypothesisId, HypothesisSet};
pub use kl::{kl_divergence, kl_project, KlOptions, KlResult};
pub use moment::{MomentLevel, MomentSet};
pub use pbr::{p_value_bound, p_value_from_t, run_protocol, PbrReport, PbrTable, Protocol, ProtocolConfig, Regularize};
pub use polytope::{PolytopeKind, PolytopeSet};
pub use scenario::{
    bell_functional, frequencies_from_counts, BellFunctional, BellTest, CountsTable, Correlation, Dims,
    Scenario, SignalingDeficit, TrialLog, TrialRecord,
};
pub use sim::{sample_campaign, CampaignPlan, Circuit, NoiseModel, NoiseParams};
