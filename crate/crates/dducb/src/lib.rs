//! Cooperative multi-armed bandits over gossip networks.
//!
//! A network of agents repeatedly pulls arms of a shared stochastic bandit and
//! communicates only with graph neighbors through a doubly stochastic gossip
//! matrix. The core policy is a delayed UCB scheme that mixes reward and count
//! statistics with Chebyshev-accelerated gossip averaging, so that after a
//! delay of `C` rounds every agent holds near-exact network-wide statistics.
//!
//! The crate is organized as:
//!
//! * [`graph`]: topologies, gossip matrix constructions, spectral summaries.
//! * [`mixing`]: accelerated and plain gossip iterations plus a dense
//!   reference oracle and the delay formula.
//! * [`bandit`]: reward distributions, counter-based deterministic sampling,
//!   gap profiles.
//! * [`policy`]: the decentralized delayed-UCB agent, its variants, and the
//!   centralized / independent / running-consensus baselines.
//! * [`simulator`]: deterministic synchronous-round engine, pseudo-regret
//!   traces, node-count estimation, trace aggregation.
//! * [`analysis`]: finite-time and asymptotic regret bound evaluators and
//!   spectral quantities for comparing algorithm families.
//! * [`cli`]: command line front end, experiment presets, CSV emission.

pub mod analysis;
pub mod bandit;
pub mod cli;
pub mod graph;
pub mod mixing;
pub mod policy;
pub mod simulator;

pub use bandit::{BanditInstance, GapProfile, RewardDistribution, RewardKey};
pub use graph::{GossipMatrix, SpectralInfo, Topology, TopologyKind};
pub use mixing::{MixParams, MixerState};
pub use policy::{AgentState, PolicyConfig, RoundMessage};
pub use simulator::{Algorithm, RegretTrace, SimulationConfig};
