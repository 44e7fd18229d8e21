//! Finitely repeated entry game with a myopic secondary and a reputation
//! building primary.
//!
//! Periods are numbered in reverse: `T` is played first and `1` last. The
//! secondary's belief `mu = P(g21 <= g* | history)` is the only state.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{GainDistribution, RngSeed};
use crate::error::{Error, Result};
use crate::model::{payoff, share_rate, spread_rate, ChannelGains, EntryAction, GameParams, Player, PowerAllocation, SeqAction};
use crate::numerics::{bisect, Bracket};
use crate::sequential::{
    entry_cutoff_d, exit_rate, g12_tilde, g_star, require_gain, require_share_exceeds_cost, require_two_subchannels,
    sbgi_equilibrium, sbgie_equilibrium, SECONDARY_SHARE_THRESHOLD,
};

/// Primary's rate when the secondary stays out: `log2(1 + P / (2 N0))`.
pub fn pi_zero(params: &GameParams) -> f64 {
    exit_rate(params)
}

/// Entry probability of the secondary when it is exactly indifferent.
///
/// Defined for `g* <= g21 < 1`, where it lies in `(0, 1]`.
pub fn lambda_mix(params: &GameParams, g21: f64) -> Result<f64> {
    require_two_subchannels(params)?;
    require_gain("g21", g21)?;
    if g21 >= 1.0 {
        return Err(Error::invalid(
            "g21",
            format!("must be below 1 (the repeated game assumes P(g21 < 1) = 1), got {g21}"),
        ));
    }
    let gs = g_star(params);
    if g21 < gs {
        return Err(Error::invalid("g21", format!("a low-gain primary ({g21} < g* = {gs}) is never indifferent")));
    }
    let pi0 = pi_zero(params);
    Ok(2.0 - (pi0 - spread_rate(params, g21)) / (pi0 - share_rate(params)))
}

/// Spreading probability of a high-gain primary after entry in period `t`.
///
/// Returns 1 once `mu >= d^(t-1)` and 0 when `mu = 0`.
pub fn gamma_mix(mu: f64, d: f64, t: u32) -> Result<f64> {
    check_cutoff(d)?;
    if t <= 1 {
        return Err(Error::invalid("t", "a high-gain primary never mixes in the last period"));
    }
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::invalid("mu", format!("must lie in [0, 1), got {mu}")));
    }
    let dp = d.powi(t as i32 - 1);
    if mu >= dp {
        return Ok(1.0);
    }
    Ok(mu / (1.0 - mu) * (1.0 - dp) / dp)
}

fn check_cutoff(d: f64) -> Result<()> {
    if d > 0.0 && d < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("d", format!("must lie in (0, 1), got {d}")))
    }
}

/// Outcome of one period as the secondary sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observed {
    Exit,
    Entered(SeqAction),
}

impl Observed {
    pub fn entry(self) -> EntryAction {
        match self {
            Observed::Exit => EntryAction::Exit,
            Observed::Entered(_) => EntryAction::Enter,
        }
    }

    pub fn primary_action(self) -> Option<SeqAction> {
        match self {
            Observed::Exit => None,
            Observed::Entered(a) => Some(a),
        }
    }
}

/// Belief carried into period `t` after observing `outcome` in period `t + 1`.
pub fn belief_update(mu_prev: f64, outcome: Observed, d: f64, t: u32) -> f64 {
    match outcome {
        Observed::Exit => mu_prev,
        Observed::Entered(SeqAction::Spread) if mu_prev > 0.0 => d.powi(t as i32).max(mu_prev),
        Observed::Entered(_) => 0.0,
    }
}

/// Secondary's move in period `t`; `draw` decides the tie `mu = d^t`.
pub fn secondary_entry(mu: f64, d: f64, t: u32, lambda: f64, draw: f64) -> EntryAction {
    let cutoff = d.powi(t as i32);
    if mu < cutoff || (mu == cutoff && draw < lambda) {
        EntryAction::Enter
    } else {
        EntryAction::Exit
    }
}

/// Probability that the primary spreads after entry in period `t`.
pub fn spread_probability(g21: f64, g_star: f64, mu: f64, d: f64, t: u32) -> f64 {
    if g21 <= g_star {
        1.0
    } else if t <= 1 || mu <= 0.0 {
        0.0
    } else {
        gamma_mix(mu.min(1.0 - f64::EPSILON), d, t).unwrap_or(1.0)
    }
}

/// Primary's move after entry in period `t`; spreads iff `draw` falls below
/// its spreading probability.
pub fn primary_response(g21: f64, g_star: f64, mu: f64, d: f64, t: u32, draw: f64) -> SeqAction {
    if draw < spread_probability(g21, g_star, mu, d, t) {
        SeqAction::Spread
    } else {
        SeqAction::Share
    }
}

/// Approximate number of final periods in which entry can happen,
/// `log(rho) / log(d)`.
pub fn deterrence_horizon(rho: f64, d: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid("rho", format!("must lie in (0, 1), got {rho}")));
    }
    check_cutoff(d)?;
    Ok(rho.ln() / d.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedConfig {
    pub horizon: u32,
    pub params: GameParams,
    pub g12: f64,
    pub g21: f64,
    pub prior_g21: GainDistribution,
    pub seed: RngSeed,
}

impl RepeatedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        require_two_subchannels(&self.params)?;
        require_share_exceeds_cost(&self.params)?;
        require_gain("g12", self.g12)?;
        require_gain("g21", self.g21)?;
        if self.g21 >= 1.0 {
            return Err(Error::invalid("g21", format!("must be below 1, got {}", self.g21)));
        }
        let (_, hi) = self.prior_g21.support();
        let atom_at_top = matches!(self.prior_g21, GainDistribution::PointMass(_) | GainDistribution::Discrete { .. });
        if hi > 1.0 || (atom_at_top && hi >= 1.0) {
            return Err(Error::invalid("prior_g21", format!("needs P(g21 < 1) = 1, support reaches {hi}")));
        }
        Ok(())
    }
}

/// How play is determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepeatedRegime {
    /// Entry does not depend on beliefs; every period repeats the one-shot equilibrium.
    Static,
    /// `g12 > g~12` and `g12 > 1/2`: reputation equilibrium.
    Reputation,
}

/// Parameters of the reputation equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReputationStrategy {
    pub d: f64,
    pub lambda: f64,
    /// Gain at which `lambda` makes a high-gain primary indifferent.
    pub lambda_gain: f64,
    pub g_star: f64,
    pub rho: f64,
}

impl ReputationStrategy {
    pub fn entry_cutoff(&self, t: u32) -> f64 {
        self.d.powi(t as i32)
    }

    pub fn gamma(&self, mu: f64, t: u32) -> Result<f64> {
        gamma_mix(mu, self.d, t)
    }

    /// Probability that the secondary enters in period `t` at belief `mu`.
    pub fn entry_probability(&self, mu: f64, t: u32) -> f64 {
        let c = self.entry_cutoff(t);
        if mu < c {
            1.0
        } else if mu == c {
            self.lambda
        } else {
            0.0
        }
    }
}

/// Gain used for the secondary's indifference mixing.
///
/// A high-gain primary's own gain makes it indifferent. For a low-gain
/// primary the mixing is off its path, so the conditional median of the
/// prior over `(g*, 1)` stands in; with no prior mass there `lambda = 1`.
fn lambda_reference_gain(params: &GameParams, g21: f64, prior: &GainDistribution) -> Result<f64> {
    let gs = g_star(params);
    if g21 > gs {
        return Ok(g21);
    }
    let upper = prior.support().1.min(1.0);
    let (c_lo, c_hi) = (prior.cdf(gs), prior.cdf(upper));
    if upper <= gs || c_hi - c_lo <= 0.0 {
        return Ok(gs);
    }
    let half = 0.5 * (c_lo + c_hi);
    let r = bisect(|x| prior.cdf(x) - half, Bracket::new(gs, upper)?, 1e-14)?;
    Ok(r.value.min(upper * (1.0 - 1e-15)).max(gs))
}

pub fn reputation_strategy(config: &RepeatedConfig) -> Result<Option<ReputationStrategy>> {
    config.validate()?;
    if regime_of(config) == RepeatedRegime::Static {
        return Ok(None);
    }
    let params = &config.params;
    let d = entry_cutoff_d(params, config.g12)?;
    check_cutoff(d)?;
    let lambda_gain = lambda_reference_gain(params, config.g21, &config.prior_g21)?;
    Ok(Some(ReputationStrategy {
        d,
        lambda: lambda_mix(params, lambda_gain)?,
        lambda_gain,
        g_star: g_star(params),
        rho: config.prior_g21.cdf(g_star(params)),
    }))
}

fn regime_of(config: &RepeatedConfig) -> RepeatedRegime {
    if config.g12 <= SECONDARY_SHARE_THRESHOLD || config.g12 <= g12_tilde(&config.params) {
        RepeatedRegime::Static
    } else {
        RepeatedRegime::Reputation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodOutcome {
    pub t_reverse: u32,
    pub t_forward: u32,
    pub entry: EntryAction,
    pub primary_action: Option<SeqAction>,
    pub mu_before: f64,
    pub mu_after: f64,
    pub payoff1: f64,
    /// Net of the entry cost.
    pub payoff2: f64,
    pub entry_draw: f64,
    pub primary_draw: f64,
    pub entry_probability: f64,
    /// Spreading probability used by the primary, absent on exit.
    pub spread_probability: Option<f64>,
}

impl PeriodOutcome {
    pub fn observed(&self) -> Observed {
        match self.primary_action {
            Some(a) => Observed::Entered(a),
            None => Observed::Exit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub horizon: u32,
    pub regime: RepeatedRegime,
    pub strategy: Option<ReputationStrategy>,
    pub g_star: f64,
    pub rho: f64,
    pub periods: Vec<PeriodOutcome>,
    pub total1: f64,
    pub total2: f64,
    /// Exit periods before the first entry.
    pub deterred_periods: u32,
    /// Reverse index of the first entry, if any.
    pub first_entry_period: Option<u32>,
    pub t_star: Option<f64>,
    /// Sum of both users' rates, entry cost excluded.
    pub welfare: f64,
    /// Welfare if both users transmit every period under the one-shot equilibrium.
    pub benchmark_welfare: f64,
    pub efficiency_ratio: f64,
}

impl SimulationTrace {
    pub fn welfare_gap(&self) -> f64 {
        self.benchmark_welfare - self.welfare
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t_reverse,t_forward,entry,primary_action,mu_before,mu_after,payoff1,payoff2\n");
        for p in &self.periods {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p.t_reverse,
                p.t_forward,
                p.entry,
                p.primary_action.map_or("", SeqAction::code),
                p.mu_before,
                p.mu_after,
                p.payoff1,
                p.payoff2
            );
        }
        out
    }

    pub fn draws_csv(&self) -> String {
        let mut out = String::from("t_reverse,entry_draw,primary_draw,entry_probability,spread_probability\n");
        for p in &self.periods {
            let spread = p.spread_probability.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", p.t_reverse, p.entry_draw, p.primary_draw, p.entry_probability, spread);
        }
        out
    }
}

/// Per-period rates used by the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
struct StageRates {
    pi0: f64,
    share1: f64,
    spread1: f64,
    share2: f64,
    spread2: f64,
    cost: f64,
}

impl StageRates {
    fn new(params: &GameParams, g12: f64, g21: f64) -> Self {
        StageRates {
            pi0: pi_zero(params),
            share1: share_rate(params),
            spread1: spread_rate(params, g21),
            share2: share_rate(params),
            spread2: spread_rate(params, g12),
            cost: params.entry_cost(),
        }
    }

    fn payoffs(&self, outcome: Observed) -> (f64, f64) {
        match outcome {
            Observed::Exit => (self.pi0, 0.0),
            Observed::Entered(SeqAction::Share) => (self.share1, self.share2 - self.cost),
            Observed::Entered(SeqAction::Spread) => (self.spread1, self.spread2 - self.cost),
        }
    }
}

pub fn simulate(config: &RepeatedConfig) -> Result<SimulationTrace> {
    config.validate()?;
    let params = &config.params;
    let regime = regime_of(config);
    let strategy = reputation_strategy(config)?;
    let gs = g_star(params);
    let rho = config.prior_g21.cdf(gs);
    let rates = StageRates::new(params, config.g12, config.g21);
    let one_shot = sbgie_equilibrium(params, config.g12, config.g21, &config.prior_g21)?;
    let mut rng = config.seed.rng();

    let mut mu = rho;
    let mut periods = Vec::with_capacity(config.horizon as usize);
    for t in (1..=config.horizon).rev() {
        let entry_draw: f64 = rng.gen();
        let primary_draw: f64 = rng.gen();
        let (entry_probability, entry, spread_prob, action, mu_after) = match &strategy {
            Some(s) => {
                let p_enter = s.entry_probability(mu, t);
                let entry = secondary_entry(mu, s.d, t, s.lambda, entry_draw);
                let (sp, action) = match entry {
                    EntryAction::Exit => (None, None),
                    EntryAction::Enter => {
                        let sp = spread_probability(config.g21, gs, mu, s.d, t);
                        (Some(sp), Some(primary_response(config.g21, gs, mu, s.d, t, primary_draw)))
                    }
                };
                let obs = action.map_or(Observed::Exit, Observed::Entered);
                (p_enter, entry, sp, action, belief_update(mu, obs, s.d, t - 1))
            }
            None => {
                let entry = one_shot.entry;
                let action = one_shot.post_entry.map(|e| e.primary_action);
                let sp = action.map(|a| if a == SeqAction::Spread { 1.0 } else { 0.0 });
                let after = match action {
                    // a sharing secondary makes the primary's move informative
                    Some(a) if config.g12 > SECONDARY_SHARE_THRESHOLD => {
                        if a == SeqAction::Share {
                            0.0
                        } else {
                            1.0
                        }
                    }
                    _ => mu,
                };
                let p_enter = if entry == EntryAction::Enter { 1.0 } else { 0.0 };
                (p_enter, entry, sp, action, after)
            }
        };
        let obs = action.map_or(Observed::Exit, Observed::Entered);
        let (payoff1, payoff2) = rates.payoffs(obs);
        periods.push(PeriodOutcome {
            t_reverse: t,
            t_forward: config.horizon - t + 1,
            entry,
            primary_action: action,
            mu_before: mu,
            mu_after,
            payoff1,
            payoff2,
            entry_draw,
            primary_draw,
            entry_probability,
            spread_probability: spread_prob,
        });
        mu = mu_after;
    }

    let total1 = periods.iter().map(|p| p.payoff1).sum();
    let total2 = periods.iter().map(|p| p.payoff2).sum();
    let first_entry_period = periods.iter().find(|p| p.entry == EntryAction::Enter).map(|p| p.t_reverse);
    let deterred_periods = config.horizon - first_entry_period.unwrap_or(0);
    let welfare = periods
        .iter()
        .map(|p| p.payoff1 + p.payoff2 + if p.entry == EntryAction::Enter { rates.cost } else { 0.0 })
        .sum::<f64>();
    let bench = sbgi_equilibrium(params, config.g12, config.g21)?;
    let benchmark_welfare = config.horizon as f64 * (bench.primary_payoff + bench.secondary_payoff);
    let t_star = strategy.and_then(|s| deterrence_horizon(rho, s.d).ok());
    Ok(SimulationTrace {
        horizon: config.horizon,
        regime,
        strategy,
        g_star: gs,
        rho,
        periods,
        total1,
        total2,
        deterred_periods,
        first_entry_period,
        t_star,
        welfare,
        benchmark_welfare,
        efficiency_ratio: welfare / benchmark_welfare,
    })
}

/// Averages over independent runs whose seeds derive from the config seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub runs: usize,
    pub mean_total1: f64,
    pub mean_total2: f64,
    pub mean_welfare: f64,
    pub mean_welfare_gap: f64,
    pub mean_deterred_periods: f64,
    pub mean_efficiency_ratio: f64,
}

pub fn simulate_batch(config: &RepeatedConfig, runs: usize) -> Result<BatchSummary> {
    if runs == 0 {
        return Err(Error::invalid("runs", "must be at least 1"));
    }
    let mut acc = [0.0; 6];
    for i in 0..runs {
        let run = RepeatedConfig { seed: config.seed.derive(i as u64), ..config.clone() };
        let tr = simulate(&run)?;
        for (a, v) in acc.iter_mut().zip([
            tr.total1,
            tr.total2,
            tr.welfare,
            tr.welfare_gap(),
            tr.deterred_periods as f64,
            tr.efficiency_ratio,
        ]) {
            *a += v;
        }
    }
    let n = runs as f64;
    Ok(BatchSummary {
        runs,
        mean_total1: acc[0] / n,
        mean_total2: acc[1] / n,
        mean_welfare: acc[2] / n,
        mean_welfare_gap: acc[3] / n,
        mean_deterred_periods: acc[4] / n,
        mean_efficiency_ratio: acc[5] / n,
    })
}

/// Two-period equilibrium derived by backward induction, independent of the
/// closed forms used by [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPeriodOracle {
    pub rho: f64,
    pub d: f64,
    pub lambda: f64,
    /// High-gain spreading probability in period 2, `None` when `rho >= d`.
    pub gamma: Option<f64>,
    /// Period-1 entry threshold on the belief.
    pub period1_entry_threshold: f64,
    /// Period-2 entry threshold on the prior.
    pub period2_entry_threshold: f64,
    pub period2_secondary_enters: bool,
    /// `rho >= d`: a high-gain primary spreads for sure in period 2.
    pub period2_primary_spreads_surely: bool,
    pub spread_plus_monopoly_exceeds_double_share: bool,
    pub max_primary_deviation_gain: f64,
    pub max_secondary_deviation_gain: f64,
}

/// Rates from explicit allocations rather than the closed forms.
fn oracle_rates(params: &GameParams, g12: f64, g21: f64) -> Result<StageRates> {
    let gains = ChannelGains::new(1.0, g12, g21, 1.0)?;
    let p = params.power;
    let sh1 = PowerAllocation::new(vec![p, 0.0], params)?;
    let sh2 = PowerAllocation::new(vec![0.0, p], params)?;
    let sp = PowerAllocation::new(vec![p / 2.0, p / 2.0], params)?;
    let off = PowerAllocation::zeros(params);
    Ok(StageRates {
        pi0: payoff(params, &gains, &sp, &off, Player::One)?,
        share1: payoff(params, &gains, &sh1, &sh2, Player::One)?,
        spread1: payoff(params, &gains, &sp, &sp, Player::One)?,
        share2: payoff(params, &gains, &sh2, &sh1, Player::Two)?,
        spread2: payoff(params, &gains, &sp, &sp, Player::Two)?,
        cost: params.entry_cost(),
    })
}

const ORACLE_TOL: f64 = 1e-15;

pub fn two_period_oracle(params: &GameParams, g12: f64, g21: f64, prior_g21: &GainDistribution) -> Result<TwoPeriodOracle> {
    let config = RepeatedConfig { horizon: 2, params: *params, g12, g21, prior_g21: prior_g21.clone(), seed: RngSeed(0) };
    config.validate()?;
    if regime_of(&config) != RepeatedRegime::Reputation {
        return Err(Error::Assumption(format!("g12 = {g12} does not exceed max(1/2, g~12 = {})", g12_tilde(params))));
    }
    let gs = g_star(params);
    if g21 <= gs {
        return Err(Error::invalid("g21", format!("the oracle analyses a high-gain primary, need g21 > g* = {gs}")));
    }
    let r = oracle_rates(params, g12, g21)?;
    let rho = prior_g21.cdf(gs);

    // Period 1: enter iff expected net rate is positive.
    let period1_value = |mu: f64| mu * (r.spread2 - r.cost) + (1.0 - mu) * (r.share2 - r.cost);
    let d = bisect(period1_value, Bracket::new(0.0, 1.0)?, ORACLE_TOL)?.value;

    // Secondary mixing that leaves the high-gain primary indifferent.
    let indifference = |l: f64| r.spread1 + l * r.share1 + (1.0 - l) * r.pi0 - 2.0 * r.share1;
    let lambda = bisect(indifference, Bracket::new(0.0, 1.0)?, ORACLE_TOL)?.value;

    // Primary mixing that makes the period-1 posterior exactly d.
    let gamma_for = |mu: f64| -> Result<f64> {
        let posterior = |g: f64| mu / (mu + (1.0 - mu) * g) - d;
        Ok(bisect(posterior, Bracket::new(f64::MIN_POSITIVE, 1.0)?, ORACLE_TOL)?.value)
    };
    let gamma = if rho < d && rho > 0.0 { Some(gamma_for(rho)?) } else { None };

    let period2_value = |mu: f64| -> f64 {
        let g = gamma_for(mu).unwrap_or(f64::NAN);
        let p_spread = mu + (1.0 - mu) * g;
        p_spread * (r.spread2 - r.cost) + (1.0 - p_spread) * (r.share2 - r.cost)
    };
    let period2_entry_threshold = bisect(period2_value, Bracket::new(d * 1e-9, d * (1.0 - 1e-12))?, ORACLE_TOL)?.value;

    let strategy = ReputationStrategy { d, lambda, lambda_gain: g21, g_star: gs, rho };
    let search = one_shot_deviation_search_with(&r, &strategy, g21, 2, rho)?;

    Ok(TwoPeriodOracle {
        rho,
        d,
        lambda,
        gamma,
        period1_entry_threshold: d,
        period2_entry_threshold,
        period2_secondary_enters: rho < period2_entry_threshold,
        period2_primary_spreads_surely: rho >= d,
        spread_plus_monopoly_exceeds_double_share: r.spread1 + r.pi0 > 2.0 * r.share1,
        max_primary_deviation_gain: search.max_primary_gain,
        max_secondary_deviation_gain: search.max_secondary_gain,
    })
}

/// Largest improvement any single deviation offers, over every history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationSearch {
    pub horizon: u32,
    pub nodes_checked: usize,
    pub max_primary_gain: f64,
    pub max_secondary_gain: f64,
}

/// Exhaustive one-shot deviation check of the reputation equilibrium.
///
/// Every history over `{X, (N,SP), (N,SH)}` is visited, including those the
/// equilibrium never reaches. At each primary node the value of a pure
/// deviation followed by equilibrium play is compared with the equilibrium
/// value; at each secondary node the myopic entry payoff is compared with
/// the equilibrium mix.
pub fn one_shot_deviation_search(config: &RepeatedConfig) -> Result<DeviationSearch> {
    let strategy = reputation_strategy(config)?
        .ok_or_else(|| Error::Assumption("the deviation search needs the reputation regime".into()))?;
    let r = StageRates::new(&config.params, config.g12, config.g21);
    one_shot_deviation_search_with(&r, &strategy, config.g21, config.horizon, strategy.rho)
}

fn one_shot_deviation_search_with(
    r: &StageRates,
    s: &ReputationStrategy,
    g21: f64,
    horizon: u32,
    rho: f64,
) -> Result<DeviationSearch> {
    let ctx = ValueCtx { r, s, g21 };
    let mut out = DeviationSearch { horizon, nodes_checked: 0, max_primary_gain: f64::NEG_INFINITY, max_secondary_gain: f64::NEG_INFINITY };
    visit(&ctx, horizon, rho, &mut out);
    Ok(out)
}

struct ValueCtx<'a> {
    r: &'a StageRates,
    s: &'a ReputationStrategy,
    g21: f64,
}

impl ValueCtx<'_> {
    fn sigma(&self, mu: f64, t: u32) -> f64 {
        spread_probability(self.g21, self.s.g_star, mu, self.s.d, t)
    }

    /// Primary's continuation value from the start of period `t`.
    fn value(&self, t: u32, mu: f64) -> f64 {
        if t == 0 {
            return 0.0;
        }
        let e = self.s.entry_probability(mu, t);
        let stay_out = self.r.pi0 + self.value(t - 1, mu);
        if e == 0.0 {
            return stay_out;
        }
        e * self.after_entry(t, mu) + (1.0 - e) * stay_out
    }

    fn after_entry(&self, t: u32, mu: f64) -> f64 {
        let (sp, sh) = self.pure_values(t, mu);
        let sigma = self.sigma(mu, t);
        sigma * sp + (1.0 - sigma) * sh
    }

    fn pure_values(&self, t: u32, mu: f64) -> (f64, f64) {
        let sp = self.r.spread1 + self.value(t - 1, belief_update(mu, Observed::Entered(SeqAction::Spread), self.s.d, t - 1));
        let sh = self.r.share1 + self.value(t - 1, belief_update(mu, Observed::Entered(SeqAction::Share), self.s.d, t - 1));
        (sp, sh)
    }

    /// Myopic secondary's net payoff from entering, given its belief.
    fn entry_payoff(&self, mu: f64, t: u32) -> f64 {
        // probability of spreading averaged over primary types
        let high = if t <= 1 || mu <= 0.0 || mu >= 1.0 {
            0.0
        } else {
            gamma_mix(mu, self.s.d, t).unwrap_or(1.0)
        };
        let p = mu + (1.0 - mu) * high;
        p * (self.r.spread2 - self.r.cost) + (1.0 - p) * (self.r.share2 - self.r.cost)
    }
}

fn visit(ctx: &ValueCtx<'_>, t: u32, mu: f64, out: &mut DeviationSearch) {
    if t == 0 {
        return;
    }
    out.nodes_checked += 1;
    let (sp, sh) = ctx.pure_values(t, mu);
    let eq = ctx.after_entry(t, mu);
    out.max_primary_gain = out.max_primary_gain.max(sp.max(sh) - eq);

    let e = ctx.s.entry_probability(mu, t);
    let enter = ctx.entry_payoff(mu, t);
    let eq2 = e * enter;
    out.max_secondary_gain = out.max_secondary_gain.max(enter.max(0.0) - eq2);

    for obs in [Observed::Exit, Observed::Entered(SeqAction::Spread), Observed::Entered(SeqAction::Share)] {
        visit(ctx, t - 1, belief_update(mu, obs, ctx.s.d, t - 1), out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const D: f64 = 0.6838891353883004;

    fn params() -> GameParams {
        GameParams::two_channel(1.0, 0.01).unwrap().with_cost(2.0).unwrap()
    }

    fn rho_prior(rho: f64) -> GainDistribution {
        // uniform on (0, g*/rho) puts mass rho below g*
        GainDistribution::uniform(0.0, g_star(&params()) / rho).unwrap()
    }

    fn config(horizon: u32, rho: f64, g21: f64, seed: u64) -> RepeatedConfig {
        RepeatedConfig { horizon, params: params(), g12: 0.6, g21, prior_g21: rho_prior(rho), seed: RngSeed(seed) }
    }

    #[test]
    fn pi_zero_value() {
        assert!((pi_zero(&params()) - 5.672425341971496).abs() < 1e-13);
    }

    #[test]
    fn lambda_value_and_indifference() {
        let p = params();
        let l = lambda_mix(&p, 0.5).unwrap();
        assert!((l - 0.2397033910267414).abs() < 1e-12);
        let lhs = spread_rate(&p, 0.5) + l * share_rate(&p) + (1.0 - l) * pi_zero(&p);
        assert!((lhs - 2.0 * share_rate(&p)).abs() < 1e-12);
        assert!(lambda_mix(&p, 1.0 - 1e-9).unwrap() < 1e-7);
        assert!(lambda_mix(&p, 1.0).is_err());
        assert!(lambda_mix(&p, 0.05).is_err());
    }

    #[test]
    fn gamma_values() {
        assert!((gamma_mix(0.2, D, 2).unwrap() - 0.1155563264037735).abs() < 1e-12);
        assert_eq!(gamma_mix(D, D, 2).unwrap(), 1.0);
        assert_eq!(gamma_mix(0.0, D, 3).unwrap(), 0.0);
        assert!(gamma_mix(0.2, D, 1).is_err());
        assert!(gamma_mix(1.0, D, 3).is_err());
    }

    #[test]
    fn belief_update_branches() {
        assert_eq!(belief_update(0.3, Observed::Exit, D, 3), 0.3);
        assert_eq!(belief_update(0.3, Observed::Entered(SeqAction::Share), D, 3), 0.0);
        assert_eq!(belief_update(0.0, Observed::Entered(SeqAction::Spread), D, 3), 0.0);
        let mu = belief_update(0.1, Observed::Entered(SeqAction::Spread), D, 3);
        assert!((mu - 0.3198579231983776).abs() < 1e-13);
        // Bayes with the mixing probability lands on the same belief
        let g = gamma_mix(0.1, D, 4).unwrap();
        assert!((0.1 / (0.1 + 0.9 * g) - mu).abs() < 1e-12);
    }

    #[test]
    fn entry_and_response_rules() {
        assert_eq!(secondary_entry(0.2, D, 1, 0.5, 0.9), EntryAction::Enter);
        assert_eq!(secondary_entry(0.9, D, 2, 0.5, 0.0), EntryAction::Exit);
        let tie = D.powi(3);
        assert_eq!(secondary_entry(tie, D, 3, 0.4, 0.3), EntryAction::Enter);
        assert_eq!(secondary_entry(tie, D, 3, 0.4, 0.5), EntryAction::Exit);
        let gs = g_star(&params());
        assert_eq!(primary_response(0.05, gs, 0.0, D, 1, 0.999), SeqAction::Spread);
        assert_eq!(primary_response(0.5, gs, 0.9, D, 1, 0.0), SeqAction::Share);
        assert_eq!(primary_response(0.5, gs, 0.5, D, 4, 0.999), SeqAction::Spread);
    }

    #[test]
    fn deterrence_horizon_values() {
        assert!((deterrence_horizon(0.2, D).unwrap() - 4.235814852541126).abs() < 1e-9);
        assert!((deterrence_horizon(D, D).unwrap() - 1.0).abs() < 1e-15);
        assert!(deterrence_horizon(1.0 - 1e-12, D).unwrap() < 1e-10);
        assert!(deterrence_horizon(0.0, D).is_err());
        assert!(deterrence_horizon(0.5, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = config(5, 0.2, 0.5, 1);
        assert!(c.validate().is_ok());
        c.horizon = 0;
        assert!(c.validate().is_err());
        let mut c = config(5, 0.2, 1.0, 1);
        assert!(c.validate().is_err());
        c.g21 = 0.5;
        c.prior_g21 = GainDistribution::uniform(0.0, 1.5).unwrap();
        assert!(c.validate().is_err());
        c.prior_g21 = GainDistribution::point(1.0).unwrap();
        assert!(c.validate().is_err());
        c.prior_g21 = GainDistribution::uniform(0.0, 1.0).unwrap();
        assert!(c.validate().is_ok());
    }

    #[test]
    fn deterrence_then_entry() {
        for horizon in [5, 10, 20] {
            let tr = simulate(&config(horizon, 0.2, 0.5, 7)).unwrap();
            assert_eq!(tr.regime, RepeatedRegime::Reputation);
            assert_eq!(tr.first_entry_period, Some(4));
            assert_eq!(tr.deterred_periods, horizon - 4);
            assert!(tr.periods.iter().take((horizon - 4) as usize).all(|p| p.entry == EntryAction::Exit));
        }
    }

    #[test]
    fn complete_information_limit() {
        let mut c = config(10, 0.2, 0.5, 3);
        c.prior_g21 = GainDistribution::uniform(0.2, 0.9).unwrap();
        let tr = simulate(&c).unwrap();
        assert_eq!(tr.rho, 0.0);
        assert!(tr.periods.iter().all(|p| p.primary_action == Some(SeqAction::Share)));
        assert!((tr.efficiency_ratio - 1.0).abs() < 1e-15);
    }

    #[test]
    fn horizon_one_is_the_one_shot_game() {
        for (rho, g21) in [(0.2, 0.5), (0.9, 0.5), (0.2, 0.05), (0.9, 0.05)] {
            let c = config(1, rho, g21, 11);
            let tr = simulate(&c).unwrap();
            let eq = sbgie_equilibrium(&c.params, c.g12, c.g21, &c.prior_g21).unwrap();
            let p = &tr.periods[0];
            assert_eq!(p.entry, eq.entry);
            assert_eq!(p.primary_action, eq.post_entry.map(|e| e.primary_action));
            assert!((p.payoff1 - eq.primary_payoff).abs() < 1e-15);
            assert!((p.payoff2 - eq.secondary_payoff).abs() < 1e-15);
        }
    }

    #[test]
    fn static_regime_repeats_one_shot_play() {
        let mut c = config(6, 0.2, 0.5, 2);
        c.g12 = 0.3;
        c.params = GameParams::two_channel(1.0, 0.01).unwrap().with_cost(0.2).unwrap();
        let tr = simulate(&c).unwrap();
        assert_eq!(tr.regime, RepeatedRegime::Static);
        assert!(tr.periods.iter().all(|p| p.entry == EntryAction::Enter && p.primary_action == Some(SeqAction::Spread)));
        assert!(tr.periods.iter().all(|p| p.mu_after == tr.rho));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = simulate(&config(20, 0.2, 0.5, 99)).unwrap();
        let b = simulate(&config(20, 0.2, 0.5, 99)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace_csv(), b.trace_csv());
    }

    #[test]
    fn totals_are_sums() {
        let tr = simulate(&config(20, 0.2, 0.5, 5)).unwrap();
        let s1: f64 = tr.periods.iter().map(|p| p.payoff1).sum();
        assert_eq!(s1, tr.total1);
    }

    #[test]
    fn oracle_matches_closed_forms() {
        let p = params();
        for rho in [0.2, 0.5, 0.8] {
            let prior = rho_prior(rho);
            let o = two_period_oracle(&p, 0.6, 0.5, &prior).unwrap();
            let s = reputation_strategy(&config(2, rho, 0.5, 0)).unwrap().unwrap();
            assert!((o.d - s.d).abs() < 1e-9);
            assert!((o.lambda - s.lambda).abs() < 1e-9);
            assert!((o.period2_entry_threshold - s.entry_cutoff(2)).abs() < 1e-9);
            if rho < s.d {
                assert!((o.gamma.unwrap() - s.gamma(rho, 2).unwrap()).abs() < 1e-9);
            } else {
                assert!(o.period2_primary_spreads_surely && o.spread_plus_monopoly_exceeds_double_share);
            }
            assert!(o.max_primary_deviation_gain <= 1e-9);
            assert!(o.max_secondary_deviation_gain <= 1e-9);
        }
    }

    #[test]
    fn no_profitable_one_shot_deviation() {
        for horizon in [2, 3, 6] {
            for rho in [0.1, 0.2, 0.45, 0.9] {
                for g21 in [0.05, 0.3, 0.95] {
                    let s = one_shot_deviation_search(&config(horizon, rho, g21, 0)).unwrap();
                    assert!(s.max_primary_gain <= 1e-9, "T={horizon} rho={rho} g21={g21}: {s:?}");
                    assert!(s.max_secondary_gain <= 1e-9, "T={horizon} rho={rho} g21={g21}: {s:?}");
                }
            }
        }
    }
}
