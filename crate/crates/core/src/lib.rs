//! Equilibrium solvers and simulators for two-user Gaussian interference
//! games with incomplete information.
//!
//! * [`model`]: parameters, gains, allocations and Shannon-rate payoffs.
//! * [`dist`]: gain priors, seeded sampling and expectations.
//! * [`numerics`]: bisection, damped fixed points, Gauss–Legendre rules.
//! * [`static_games`]: best responses and Bayes–Nash checks for the
//!   simultaneous-move games.
//! * [`sequential`]: thresholds and equilibria of the leader/follower game
//!   with and without entry.
//! * [`two_sided`]: the entry game when neither user knows the other's gain.
//! * [`repeated`]: the finitely repeated entry game with reputation.
//! * [`cli`]: scenario files and artifact output.

pub mod cli;
pub mod dist;
pub mod error;
pub mod model;
pub mod numerics;
pub mod repeated;
pub mod sequential;
pub mod static_games;
pub mod two_sided;

pub use dist::{ExpectationMethod, GainDistribution, RngSeed};
pub use error::{Error, Result};
pub use model::{ChannelGains, EntryAction, GameParams, Player, PowerAllocation, RestrictedAction, SeqAction};
