//! Exogenous parameters, channel gains, power allocations and the
//! Shannon-rate payoffs every solver is built on.
//!
//! Rates are in bits per channel use (base-2 logarithms), with the factor
//! one half per real subchannel and no normalisation by the number of
//! subchannels. User `i` treats the opponent's power in the same subchannel,
//! scaled by the incident gain `g_{-i,i}`, as additional noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed when checking `sum(P_ik) <= P`.
pub const POWER_TOLERANCE: f64 = 1e-12;

/// Game-wide exogenous scalars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    /// Per-user average power budget `P` (watts).
    pub power: f64,
    /// Noise power spectral density `N0` (watts).
    pub noise: f64,
    /// Number of flat-fading subchannels `K`.
    pub subchannels: usize,
    /// Cost per watt `k` charged to an entering secondary user.
    pub cost: f64,
}

impl GameParams {
    pub fn new(power: f64, noise: f64, subchannels: usize, cost: f64) -> Result<Self> {
        let params = GameParams { power, noise, subchannels, cost };
        params.validate()?;
        Ok(params)
    }

    /// Two subchannels and no power cost.
    pub fn two_channel(power: f64, noise: f64) -> Result<Self> {
        Self::new(power, noise, 2, 0.0)
    }

    pub fn with_cost(mut self, cost: f64) -> Result<Self> {
        self.cost = cost;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::invalid("power", format!("must be finite and > 0, got {}", self.power)));
        }
        if !(self.noise.is_finite() && self.noise > 0.0) {
            return Err(Error::invalid("noise", format!("must be finite and > 0, got {}", self.noise)));
        }
        if self.subchannels == 0 {
            return Err(Error::invalid("subchannels", "must be at least 1"));
        }
        if !(self.cost.is_finite() && self.cost >= 0.0) {
            return Err(Error::invalid("cost", format!("must be finite and >= 0, got {}", self.cost)));
        }
        Ok(())
    }

    pub fn snr(&self) -> f64 {
        self.power / self.noise
    }

    /// Entry cost `kP` paid by the secondary user.
    pub fn entry_cost(&self) -> f64 {
        self.cost * self.power
    }
}

/// Player index. Player 1 is the primary user in the sequential games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

/// Realised power gains `g_ij` from transmitter `i` to receiver `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub g11: f64,
    pub g12: f64,
    pub g21: f64,
    pub g22: f64,
}

impl ChannelGains {
    /// Self gains must be strictly positive; cross gains may be zero
    /// (the interference-free limit).
    pub fn new(g11: f64, g12: f64, g21: f64, g22: f64) -> Result<Self> {
        for (name, g, strict) in [("g11", g11, true), ("g12", g12, false), ("g21", g21, false), ("g22", g22, true)] {
            let ok = g.is_finite() && if strict { g > 0.0 } else { g >= 0.0 };
            if !ok {
                return Err(Error::invalid(name, format!("gain must be finite and positive, got {g}")));
            }
        }
        Ok(ChannelGains { g11, g12, g21, g22 })
    }

    /// Unit self gains with the given cross gains.
    pub fn normalized(g12: f64, g21: f64) -> Result<Self> {
        Self::new(1.0, g12, g21, 1.0)
    }

    pub fn self_gain(&self, player: Player) -> f64 {
        match player {
            Player::One => self.g11,
            Player::Two => self.g22,
        }
    }

    /// Gain from the opponent's transmitter into `player`'s receiver.
    pub fn incident_gain(&self, player: Player) -> f64 {
        match player {
            Player::One => self.g21,
            Player::Two => self.g12,
        }
    }

    /// The same physical channel seen with the players' labels swapped.
    pub fn swapped(&self) -> ChannelGains {
        ChannelGains { g11: self.g22, g12: self.g21, g21: self.g12, g22: self.g11 }
    }
}

/// Per-subchannel transmit powers of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation(Vec<f64>);

impl PowerAllocation {
    pub fn new(per_subchannel: Vec<f64>, params: &GameParams) -> Result<Self> {
        if per_subchannel.len() != params.subchannels {
            return Err(Error::DimensionMismatch { expected: params.subchannels, got: per_subchannel.len() });
        }
        if let Some(bad) = per_subchannel.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::invalid("allocation", format!("powers must be finite and >= 0, got {bad}")));
        }
        let total: f64 = per_subchannel.iter().sum();
        if total > params.power * (1.0 + POWER_TOLERANCE) {
            return Err(Error::PowerConstraint { total, budget: params.power });
        }
        Ok(PowerAllocation(per_subchannel))
    }

    pub fn zeros(params: &GameParams) -> Self {
        PowerAllocation(vec![0.0; params.subchannels])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Two-subchannel allocation `(p, P - p)`.
    pub fn split(first: f64, params: &GameParams) -> Result<Self> {
        let first = first.clamp(0.0, params.power);
        Self::new(vec![first, params.power - first], params)
    }
}

/// The restricted action set: all power in one subchannel, or an even spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RestrictedAction {
    /// All power in the given subchannel (1-based, `1..=K`).
    Concentrate(usize),
    Spread,
}

impl RestrictedAction {
    pub fn validate(&self, params: &GameParams) -> Result<()> {
        match *self {
            RestrictedAction::Concentrate(k) if k == 0 || k > params.subchannels => Err(Error::invalid(
                "action",
                format!("subchannel {k} outside 1..={}", params.subchannels),
            )),
            _ => Ok(()),
        }
    }

    /// Every action available with `K` subchannels, concentrations first.
    pub fn all(params: &GameParams) -> Vec<RestrictedAction> {
        (1..=params.subchannels)
            .map(RestrictedAction::Concentrate)
            .chain(std::iter::once(RestrictedAction::Spread))
            .collect()
    }
}

impl std::fmt::Display for RestrictedAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RestrictedAction::Concentrate(k) => write!(f, "concentrate({k})"),
            RestrictedAction::Spread => write!(f, "spread"),
        }
    }
}

/// Post-entry action in the sequential games: share (one subchannel) or spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeqAction {
    #[serde(rename = "SH")]
    Share,
    #[serde(rename = "SP")]
    Spread,
}

impl SeqAction {
    pub fn code(self) -> &'static str {
        match self {
            SeqAction::Share => "SH",
            SeqAction::Spread => "SP",
        }
    }
}

impl std::fmt::Display for SeqAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Secondary user's entry decision: enter (`N`) or stay out (`X`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntryAction {
    #[serde(rename = "N")]
    Enter,
    #[serde(rename = "X")]
    Exit,
}

impl EntryAction {
    pub fn code(self) -> &'static str {
        match self {
            EntryAction::Enter => "N",
            EntryAction::Exit => "X",
        }
    }
}

impl std::fmt::Display for EntryAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

pub(crate) fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Shannon rate of `player` given both allocations.
pub fn payoff(
    params: &GameParams,
    gains: &ChannelGains,
    own: &PowerAllocation,
    other: &PowerAllocation,
    player: Player,
) -> Result<f64> {
    for alloc in [own, other] {
        // Re-check: allocations may have been built against different params.
        PowerAllocation::new(alloc.0.clone(), params)?;
    }
    Ok(payoff_unchecked(params.noise, gains.self_gain(player), gains.incident_gain(player), own.as_slice(), other.as_slice()))
}

pub(crate) fn payoff_unchecked(noise: f64, self_gain: f64, incident_gain: f64, own: &[f64], other: &[f64]) -> f64 {
    own.iter()
        .zip(other)
        .map(|(&p, &q)| 0.5 * log2_1p(self_gain * p / (noise + incident_gain * q)))
        .sum()
}

pub fn to_allocation(action: RestrictedAction, params: &GameParams) -> Result<PowerAllocation> {
    action.validate(params)?;
    let k = params.subchannels;
    let powers = match action {
        RestrictedAction::Concentrate(c) => {
            let mut v = vec![0.0; k];
            v[c - 1] = params.power;
            v
        }
        RestrictedAction::Spread => vec![params.power / k as f64; k],
    };
    Ok(PowerAllocation(powers))
}

/// Rates of one user when both users share (disjoint subchannels) and when
/// both spread over two subchannels, with unit self gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRates {
    pub share: f64,
    pub spread: f64,
}

pub fn joint_rates(params: &GameParams, gains: &ChannelGains, player: Player) -> JointRates {
    JointRates {
        share: share_rate(params),
        spread: spread_rate(params, gains.incident_gain(player)),
    }
}

/// `½ log2(1 + P/N0)`: one clean subchannel at full power.
pub fn share_rate(params: &GameParams) -> f64 {
    0.5 * log2_1p(params.snr())
}

/// `log2(1 + (P/2) / (N0 + g P/2))`: both users spread, incident gain `g`.
pub fn spread_rate(params: &GameParams, incident_gain: f64) -> f64 {
    let half = params.power / 2.0;
    log2_1p(half / (params.noise + incident_gain * half))
}
