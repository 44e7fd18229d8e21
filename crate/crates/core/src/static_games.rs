//! Simultaneous-move games.
//!
//! * UC-GI: no player observes any gain; each maximises expected rate under
//!   the common prior. On two subchannels the first-order condition is
//!   evaluated by quadrature and best responses by bisection on it.
//! * BGI: each player knows its own self and incident gains and picks from
//!   the restricted action set {concentrate in k, spread}.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{expectation, ExpectationMethod, GainDistribution, RngSeed};
use crate::error::{Error, Result};
use crate::model::{log2_1p, payoff_unchecked, GameParams, Player, PowerAllocation, RestrictedAction};
use crate::numerics::{bisect, Bracket};

/// Independent priors over the four gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainPriors {
    pub g11: GainDistribution,
    pub g12: GainDistribution,
    pub g21: GainDistribution,
    pub g22: GainDistribution,
}

impl GainPriors {
    /// `(self gain, incident gain)` priors seen by `player`.
    pub fn for_player(&self, player: Player) -> [GainDistribution; 2] {
        match player {
            Player::One => [self.g11.clone(), self.g21.clone()],
            Player::Two => [self.g22.clone(), self.g12.clone()],
        }
    }
}

/// Update order for best-response dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BrUpdate {
    /// Both players respond to the previous profile.
    #[default]
    Simultaneous,
    /// Player 1 moves, then player 2 responds to the new profile.
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrStep {
    pub iteration: usize,
    /// Power of each player in subchannel 1 (subchannel 2 gets `P - p`).
    pub p1: f64,
    pub p2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrTrajectory {
    pub power: f64,
    pub steps: Vec<BrStep>,
    pub converged: bool,
    /// `max |P_ic - P/2|` at the last step.
    pub final_gap: f64,
}

impl BrTrajectory {
    pub fn last(&self) -> &BrStep {
        self.steps.last().expect("trajectory holds the initial point")
    }

    /// `iteration,p11,p12,p21,p22`, one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,p11,p12,p21,p22\n");
        for s in &self.steps {
            let _ = writeln!(out, "{},{},{},{},{}", s.iteration, s.p1, self.power - s.p1, s.p2, self.power - s.p2);
        }
        out
    }
}

/// Two-subchannel UC-GI game under a common prior.
#[derive(Debug, Clone, PartialEq)]
pub struct UcgiGame {
    params: GameParams,
    priors: GainPriors,
    method: ExpectationMethod,
}

impl UcgiGame {
    pub fn new(params: GameParams, priors: GainPriors, method: ExpectationMethod) -> Result<Self> {
        params.validate()?;
        if params.subchannels != 2 {
            return Err(Error::invalid(
                "subchannels",
                format!("the UC-GI first-order analysis needs K = 2, got {}; use ucgi_symmetric_ne", params.subchannels),
            ));
        }
        Ok(UcgiGame { params, priors, method })
    }

    pub fn params(&self) -> &GameParams {
        &self.params
    }

    fn check_power(&self, name: &'static str, p: f64) -> Result<()> {
        if (0.0..=self.params.power).contains(&p) {
            Ok(())
        } else {
            Err(Error::invalid(name, format!("must lie in [0, {}], got {p}", self.params.power)))
        }
    }

    /// Derivative of `player`'s expected rate with respect to its own power
    /// in subchannel 1, given the opponent puts `other_ch1` there.
    pub fn foc_residual(&self, player: Player, own_ch1: f64, other_ch1: f64) -> Result<f64> {
        self.check_power("own_ch1", own_ch1)?;
        self.check_power("other_ch1", other_ch1)?;
        let GameParams { power, noise, .. } = self.params;
        let (p, q) = (own_ch1, other_ch1);
        let integrand = move |g: &[f64]| {
            let (gs, gc) = (g[0], g[1]);
            let num = gs * (power - 2.0 * p) + gc * (power - 2.0 * q);
            let den = (noise + gs * p + gc * q) * (noise + gs * (power - p) + gc * (power - q));
            0.5 * gs * num / den / std::f64::consts::LN_2
        };
        expectation(&self.priors.for_player(player), integrand, self.method)
    }

    pub fn expected_payoff(&self, player: Player, own_ch1: f64, other_ch1: f64) -> Result<f64> {
        self.check_power("own_ch1", own_ch1)?;
        self.check_power("other_ch1", other_ch1)?;
        let own = [own_ch1, self.params.power - own_ch1];
        let other = [other_ch1, self.params.power - other_ch1];
        let noise = self.params.noise;
        expectation(&self.priors.for_player(player), |g| payoff_unchecked(noise, g[0], g[1], &own, &other), self.method)
    }

    /// Maximiser in `[0, P]` of the expected rate against `opponent_ch1`.
    pub fn best_response(&self, player: Player, opponent_ch1: f64) -> Result<f64> {
        let power = self.params.power;
        let r_lo = self.foc_residual(player, 0.0, opponent_ch1)?;
        if r_lo <= 0.0 {
            return Ok(0.0);
        }
        let r_hi = self.foc_residual(player, power, opponent_ch1)?;
        if r_hi >= 0.0 {
            return Ok(power);
        }
        // The residual is strictly decreasing in own power (strict concavity).
        let mut err = None;
        let report = bisect(
            |p| match self.foc_residual(player, p, opponent_ch1) {
                Ok(r) => r,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            },
            Bracket::new(0.0, power)?,
            1e-14 * power,
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(report.value)
    }

    /// Best-response dynamics from `(init1, init2)` (subchannel-1 powers),
    /// stopping once no power moves by more than `tol`.
    pub fn br_dynamics(&self, init1: f64, init2: f64, max_iter: usize, tol: f64, update: BrUpdate) -> Result<BrTrajectory> {
        self.check_power("init1", init1)?;
        self.check_power("init2", init2)?;
        let power = self.params.power;
        let mut steps = vec![BrStep { iteration: 0, p1: init1, p2: init2 }];
        let (mut p1, mut p2) = (init1, init2);
        let mut converged = false;
        for iteration in 1..=max_iter {
            let n1 = self.best_response(Player::One, p2)?;
            let n2 = match update {
                BrUpdate::Simultaneous => self.best_response(Player::Two, p1)?,
                BrUpdate::Sequential => self.best_response(Player::Two, n1)?,
            };
            let change = (n1 - p1).abs().max((n2 - p2).abs());
            p1 = n1;
            p2 = n2;
            steps.push(BrStep { iteration, p1, p2 });
            if change < tol {
                converged = true;
                break;
            }
        }
        let half = power / 2.0;
        let final_gap = (p1 - half).abs().max((p2 - half).abs());
        Ok(BrTrajectory { power, steps, converged, final_gap })
    }
}

/// The unique symmetric equilibrium for any `K`: equal power everywhere.
pub fn ucgi_symmetric_ne(params: &GameParams) -> Result<PowerAllocation> {
    params.validate()?;
    PowerAllocation::new(vec![params.power / params.subchannels as f64; params.subchannels], params)
}

/// Opponent's mixture over the restricted actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedRestrictedStrategy {
    /// Probability of concentrating in subchannel `k` (index `k - 1`).
    pub alpha: Vec<f64>,
    /// Probability of spreading.
    pub gamma: f64,
}

impl MixedRestrictedStrategy {
    pub fn new(alpha: Vec<f64>, gamma: f64) -> Result<Self> {
        if alpha.iter().chain(std::iter::once(&gamma)).any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("strategy", "probabilities must lie in [0, 1]"));
        }
        let total = alpha.iter().sum::<f64>() + gamma;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("strategy", format!("probabilities sum to {total}, not 1")));
        }
        Ok(MixedRestrictedStrategy { alpha, gamma })
    }

    pub fn pure(action: RestrictedAction, params: &GameParams) -> Result<Self> {
        action.validate(params)?;
        let mut alpha = vec![0.0; params.subchannels];
        let gamma = match action {
            RestrictedAction::Concentrate(k) => {
                alpha[k - 1] = 1.0;
                0.0
            }
            RestrictedAction::Spread => 1.0,
        };
        Ok(MixedRestrictedStrategy { alpha, gamma })
    }

    pub fn probability(&self, action: RestrictedAction) -> f64 {
        match action {
            RestrictedAction::Concentrate(k) => self.alpha[k - 1],
            RestrictedAction::Spread => self.gamma,
        }
    }
}

/// Expected rate of each restricted action for a player with self gain
/// `self_gain` and incident gain `incident_gain`, against `opponent`.
pub fn bgi_expected_payoffs(
    params: &GameParams,
    self_gain: f64,
    incident_gain: f64,
    opponent: &MixedRestrictedStrategy,
) -> Result<BTreeMap<RestrictedAction, f64>> {
    params.validate()?;
    if opponent.alpha.len() != params.subchannels {
        return Err(Error::DimensionMismatch { expected: params.subchannels, got: opponent.alpha.len() });
    }
    let GameParams { power, noise, subchannels, .. } = *params;
    let kf = subchannels as f64;
    let (g, c) = (self_gain, incident_gain);
    let half_log = |signal: f64, interference: f64| 0.5 * log2_1p(signal / (noise + interference));

    let gamma = opponent.gamma;
    let mut out = BTreeMap::new();
    for (idx, &a_k) in opponent.alpha.iter().enumerate() {
        let v = a_k * half_log(g * power, c * power)
            + gamma * half_log(g * power, c * power / kf)
            + (1.0 - a_k - gamma) * half_log(g * power, 0.0);
        out.insert(RestrictedAction::Concentrate(idx + 1), v);
    }
    let spread_vs_concentrate = (kf - 1.0) * half_log(g * power / kf, 0.0) + half_log(g * power / kf, c * power);
    let spread_vs_spread = kf * half_log(g * power / kf, c * power / kf);
    out.insert(RestrictedAction::Spread, (1.0 - gamma) * spread_vs_concentrate + gamma * spread_vs_spread);
    Ok(out)
}

/// Payoff loss from sharing a concentrated subchannel with a concentrated
/// opponent, relative to having it alone.
pub fn concentration_penalty(params: &GameParams, self_gain: f64, incident_gain: f64) -> f64 {
    let sp = self_gain * params.power;
    0.5 * log2_1p(sp / params.noise) - 0.5 * log2_1p(sp / (params.noise + incident_gain * params.power))
}

/// Priors over one player's `(self gain, incident gain)` type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypePrior {
    pub self_gain: GainDistribution,
    pub incident_gain: GainDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub self_gain: f64,
    pub incident_gain: f64,
    pub prescribed: RestrictedAction,
    pub better: RestrictedAction,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BneVerdict {
    pub holds: bool,
    pub induced: MixedRestrictedStrategy,
    pub witness: Option<Deviation>,
    pub types_checked: usize,
}

pub const DEFAULT_BNE_CHECKS: usize = 1_000;
const INDUCE_SAMPLES: usize = 20_000;

/// Checks whether both players using `candidate` is a Bayes–Nash
/// equilibrium of the restricted game by sampling types.
///
/// The opponent's action frequencies `(alpha, gamma)` are estimated from
/// `max(n_check, 20000)` sampled types, then `n_check` fresh types are
/// tested for a strictly profitable deviation.
pub fn bgi_verify_symmetric_bne<F>(params: &GameParams, candidate: F, prior: &TypePrior, n_check: usize, seed: RngSeed) -> Result<BneVerdict>
where
    F: Fn(f64, f64) -> RestrictedAction,
{
    params.validate()?;
    if n_check == 0 {
        return Err(Error::invalid("n_check", "must be at least 1"));
    }
    let n_induce = n_check.max(INDUCE_SAMPLES);
    let mut counts = vec![0usize; params.subchannels + 1];
    let mut rng = seed.derive(0).rng();
    for _ in 0..n_induce {
        let (g, c) = draw_type(prior, &mut rng);
        let action = candidate(g, c);
        action.validate(params)?;
        match action {
            RestrictedAction::Concentrate(k) => counts[k - 1] += 1,
            RestrictedAction::Spread => counts[params.subchannels] += 1,
        }
    }
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n_induce as f64).collect();
    let induced = MixedRestrictedStrategy {
        alpha: freq[..params.subchannels].to_vec(),
        gamma: freq[params.subchannels],
    };

    let mut rng = seed.derive(1).rng();
    for _ in 0..n_check {
        let (g, c) = draw_type(prior, &mut rng);
        let prescribed = candidate(g, c);
        let payoffs = bgi_expected_payoffs(params, g, c, &induced)?;
        let own = payoffs[&prescribed];
        let (&better, &best) = payoffs
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("action set is non-empty");
        let gain = best - own;
        if gain > 1e-12 * own.abs().max(1.0) {
            return Ok(BneVerdict {
                holds: false,
                induced,
                witness: Some(Deviation { self_gain: g, incident_gain: c, prescribed, better, gain }),
                types_checked: n_check,
            });
        }
    }
    Ok(BneVerdict { holds: true, induced, witness: None, types_checked: n_check })
}

fn draw_type<R: Rng>(prior: &TypePrior, rng: &mut R) -> (f64, f64) {
    let g = prior.self_gain.sample_with(rng, 1)[0];
    let c = prior.incident_gain.sample_with(rng, 1)[0];
    (g, c)
}
