//! Thresholds and sequential equilibria of the primary/secondary game, with
//! and without an entry stage, when only the primary knows `g21`.
//!
//! Self gains are fixed at one. A sharing primary uses subchannel 1 and a
//! sharing secondary subchannel 2. Exact threshold ties resolve toward
//! spreading and toward exit.

use serde::{Deserialize, Serialize};

use crate::dist::GainDistribution;
use crate::error::{Error, Result};
use crate::model::{log2_1p, share_rate, spread_rate, EntryAction, GameParams, SeqAction};

/// Incident gain above which a secondary answers a sharing primary by sharing.
pub const SECONDARY_SHARE_THRESHOLD: f64 = 0.5;

pub(crate) fn require_two_subchannels(params: &GameParams) -> Result<()> {
    params.validate()?;
    if params.subchannels != 2 {
        return Err(Error::invalid(
            "subchannels",
            format!("sequential games are defined on 2 subchannels, got {}", params.subchannels),
        ));
    }
    Ok(())
}

pub(crate) fn require_gain(name: &'static str, g: f64) -> Result<()> {
    if g.is_finite() && g >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("gain must be finite and >= 0, got {g}")))
    }
}

/// Cross gain `g*` above which mutual sharing beats mutual spreading.
///
/// Evaluated as `1 / (1 + sqrt(1 + P/N0))`, which equals
/// `1 / (sqrt(1 + P/N0) - 1) - 2 N0 / P` but does not cancel at low SNR.
pub fn g_star(params: &GameParams) -> f64 {
    1.0 / (1.0 + (1.0 + params.snr()).sqrt())
}

/// Best reply of the secondary to the primary's move.
pub fn secondary_best_response(primary: SeqAction, g12: f64) -> SeqAction {
    match primary {
        SeqAction::Spread => SeqAction::Spread,
        SeqAction::Share if g12 > SECONDARY_SHARE_THRESHOLD => SeqAction::Share,
        SeqAction::Share => SeqAction::Spread,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbgiEquilibrium {
    pub primary_action: SeqAction,
    pub secondary_action: SeqAction,
    pub primary_payoff: f64,
    pub secondary_payoff: f64,
}

/// Equilibrium path of the two-stage game: both share iff `g12 > 1/2` and
/// `g21 > g*`, otherwise both spread.
pub fn sbgi_equilibrium(params: &GameParams, g12: f64, g21: f64) -> Result<SbgiEquilibrium> {
    require_two_subchannels(params)?;
    require_gain("g12", g12)?;
    require_gain("g21", g21)?;
    let primary_action = if g12 > SECONDARY_SHARE_THRESHOLD && g21 > g_star(params) {
        SeqAction::Share
    } else {
        SeqAction::Spread
    };
    let secondary_action = secondary_best_response(primary_action, g12);
    debug_assert_eq!(primary_action, secondary_action);
    let (primary_payoff, secondary_payoff) = match primary_action {
        SeqAction::Share => (share_rate(params), share_rate(params)),
        SeqAction::Spread => (spread_rate(params, g21), spread_rate(params, g12)),
    };
    Ok(SbgiEquilibrium { primary_action, secondary_action, primary_payoff, secondary_payoff })
}

/// Secondary incident gain below which entering pays even against a
/// spreading primary. `+inf` when entry is free.
pub fn g12_tilde(params: &GameParams) -> f64 {
    let kp = params.entry_cost();
    if kp == 0.0 {
        return f64::INFINITY;
    }
    1.0 / (kp * std::f64::consts::LN_2).exp_m1() - 2.0 * params.noise / params.power
}

/// Whether the shared-band rate exceeds the entry cost, `P/N0 > 2^(2kP) - 1`.
pub fn assumption_share_exceeds_cost(params: &GameParams) -> bool {
    share_rate(params) > params.entry_cost()
}

pub(crate) fn require_share_exceeds_cost(params: &GameParams) -> Result<()> {
    if assumption_share_exceeds_cost(params) {
        Ok(())
    } else {
        Err(Error::Assumption(format!(
            "shared-band rate {} does not exceed the entry cost kP = {} (need P/N0 > 2^(2kP) - 1)",
            share_rate(params),
            params.entry_cost()
        )))
    }
}

/// Belief cutoff `d`: the secondary enters iff its probability that the
/// primary spreads is below `d`.
pub fn entry_cutoff_d(params: &GameParams, g12: f64) -> Result<f64> {
    require_two_subchannels(params)?;
    require_gain("g12", g12)?;
    require_share_exceeds_cost(params)?;
    let share = share_rate(params);
    let spread = spread_rate(params, g12);
    if share <= spread {
        return Err(Error::Assumption(format!(
            "g12 = {g12} is not above g* = {}; sharing does not beat spreading",
            g_star(params)
        )));
    }
    Ok((share - params.entry_cost()) / (share - spread))
}

/// Which branch of the entry analysis applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryRegime {
    /// `g12 <= 1/2`: both spread after entry, enter iff spreading covers the cost.
    LowGain,
    /// `1/2 < g12 < g~12`: entry pays whatever the primary does.
    AlwaysEnter,
    /// `g12 >= g~12`: entry pays only if the primary is unlikely to spread.
    BeliefDriven,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbgiEEquilibrium {
    pub regime: EntryRegime,
    pub entry: EntryAction,
    pub post_entry: Option<SbgiEquilibrium>,
    /// Prior probability that the primary spreads, `P(g21 <= g*)`.
    pub rho: f64,
    /// Belief cutoff, when `g12` lies above `g*`.
    pub d: Option<f64>,
    /// Expected net payoff of entering, as seen by the secondary.
    pub entry_value: f64,
    /// Expected payoff of the chosen entry action (0 on exit).
    pub secondary_expected_payoff: f64,
    /// Realised primary rate.
    pub primary_payoff: f64,
    /// Realised secondary payoff net of the entry cost.
    pub secondary_payoff: f64,
}

/// Monopoly rate of the primary when the secondary stays out.
pub fn exit_rate(params: &GameParams) -> f64 {
    log2_1p(params.snr() / 2.0)
}

pub fn sbgie_equilibrium(params: &GameParams, g12: f64, g21: f64, prior_g21: &GainDistribution) -> Result<SbgiEEquilibrium> {
    require_two_subchannels(params)?;
    require_gain("g12", g12)?;
    require_gain("g21", g21)?;
    require_share_exceeds_cost(params)?;
    let kp = params.entry_cost();
    let share = share_rate(params);
    let spread = spread_rate(params, g12);
    let rho = prior_g21.cdf(g_star(params));
    let d = if share > spread { Some((share - kp) / (share - spread)) } else { None };

    let (regime, entry_value, enter) = if g12 <= SECONDARY_SHARE_THRESHOLD {
        (EntryRegime::LowGain, spread - kp, spread > kp)
    } else {
        let value = rho * spread + (1.0 - rho) * share - kp;
        if g12 < g12_tilde(params) {
            (EntryRegime::AlwaysEnter, value, true)
        } else {
            let d = d.expect("g12 > 1/2 > g* implies share > spread");
            (EntryRegime::BeliefDriven, value, rho < d)
        }
    };

    if enter {
        let post = sbgi_equilibrium(params, g12, g21)?;
        Ok(SbgiEEquilibrium {
            regime,
            entry: EntryAction::Enter,
            post_entry: Some(post),
            rho,
            d,
            entry_value,
            secondary_expected_payoff: entry_value,
            primary_payoff: post.primary_payoff,
            secondary_payoff: post.secondary_payoff - kp,
        })
    } else {
        Ok(SbgiEEquilibrium {
            regime,
            entry: EntryAction::Exit,
            post_entry: None,
            rho,
            d,
            entry_value,
            secondary_expected_payoff: 0.0,
            primary_payoff: exit_rate(params),
            secondary_payoff: 0.0,
        })
    }
}
