//! Entry game when each user knows only its own incident gain.
//!
//! The primary spreads below a threshold `ĝ21(κ)` that depends on its
//! post-entry belief `κ = P(g12 < 1/2 | entry)`. The secondary enters below
//! `ĝ12(α)`, where `α` is the probability that the primary spreads. Beliefs
//! and thresholds are tied together by a scalar fixed point in `κ`.

use serde::{Deserialize, Serialize};

use crate::dist::GainDistribution;
use crate::error::{Error, Result};
use crate::model::{log2_1p, share_rate, spread_rate, GameParams};
use crate::numerics::{bisect, fixed_point, Bracket, SolveReport};
use crate::sequential::{require_gain, require_two_subchannels, SECONDARY_SHARE_THRESHOLD};

/// Upper limit of the bracket search for `ĝ21` before declaring `+∞`.
pub const G21_BRACKET_LIMIT: f64 = 1e6;
const G12_BRACKET_LIMIT: f64 = 1e12;
/// Residual bound for an accepted fixed point.
pub const CONSISTENCY_TOL: f64 = 1e-8;

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must lie in [0, 1], got {p}")))
    }
}

/// Primary's payoff from spreading and expected payoff from sharing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimaryExpectedPayoffs {
    pub spread_payoff: f64,
    pub share_payoff: f64,
}

pub fn primary_expected_payoffs(params: &GameParams, g21: f64, kappa: f64) -> Result<PrimaryExpectedPayoffs> {
    require_two_subchannels(params)?;
    require_gain("g21", g21)?;
    check_probability("kappa", kappa)?;
    let snr = params.snr();
    let share_payoff = (1.0 - kappa) / 2.0 * log2_1p(snr)
        + kappa / 2.0 * log2_1p(params.power / (params.noise + g21 * params.power / 2.0));
    Ok(PrimaryExpectedPayoffs { spread_payoff: spread_rate(params, g21), share_payoff })
}

/// Spread minus expected share payoff of the primary.
pub fn delta(params: &GameParams, g21: f64, kappa: f64) -> Result<f64> {
    let p = primary_expected_payoffs(params, g21, kappa)?;
    Ok(p.spread_payoff - p.share_payoff)
}

fn delta_unchecked(params: &GameParams, g21: f64, kappa: f64) -> f64 {
    let snr = params.snr();
    spread_rate(params, g21)
        - (1.0 - kappa) / 2.0 * log2_1p(snr)
        - kappa / 2.0 * log2_1p(params.power / (params.noise + g21 * params.power / 2.0))
}

/// Primary's spread/share threshold; `+∞` when it always spreads.
pub fn g21_hat(params: &GameParams, kappa: f64) -> Result<f64> {
    require_two_subchannels(params)?;
    check_probability("kappa", kappa)?;
    if kappa == 1.0 {
        return Ok(f64::INFINITY);
    }
    let f = |g: f64| delta_unchecked(params, g, kappa);
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        if hi >= G21_BRACKET_LIMIT {
            return Ok(f64::INFINITY);
        }
        hi *= 2.0;
    }
    let report = bisect(f, Bracket::new(0.0, hi)?, f64::EPSILON * hi)?;
    Ok(report.value)
}

/// Secondary's rates after entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondaryRates {
    /// Both spread.
    pub spread: f64,
    /// Primary shares, secondary spreads.
    pub share_spread: f64,
    /// Both share.
    pub share_share: f64,
}

pub fn secondary_rates(params: &GameParams, g12: f64) -> Result<SecondaryRates> {
    require_two_subchannels(params)?;
    require_gain("g12", g12)?;
    Ok(secondary_rates_unchecked(params, g12))
}

fn secondary_rates_unchecked(params: &GameParams, g12: f64) -> SecondaryRates {
    let GameParams { power, noise, .. } = *params;
    SecondaryRates {
        spread: spread_rate(params, g12),
        share_spread: 0.5 * log2_1p(power / (2.0 * noise)) + 0.5 * log2_1p((power / 2.0) / (noise + g12 * power)),
        share_share: share_rate(params),
    }
}

/// Secondary's expected rate on entry when the primary spreads with
/// probability `alpha`.
pub fn h(params: &GameParams, g12: f64, alpha: f64) -> Result<f64> {
    require_two_subchannels(params)?;
    require_gain("g12", g12)?;
    check_probability("alpha", alpha)?;
    Ok(h_unchecked(params, g12, alpha))
}

fn h_unchecked(params: &GameParams, g12: f64, alpha: f64) -> f64 {
    let r = secondary_rates_unchecked(params, g12);
    let after_share = if g12 <= SECONDARY_SHARE_THRESHOLD { r.share_spread } else { r.share_share };
    alpha * r.spread + (1.0 - alpha) * after_share
}

/// Secondary's entry threshold: `0` if it never enters, `+∞` if it always
/// does. Requires `alpha > 0`.
pub fn g12_hat(params: &GameParams, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    require_two_subchannels(params)?;
    g12_hat_lenient(params, alpha)
}

// Also accepts alpha = 0. Then h is flat above 1/2 but the threshold is
// still unique whenever it is finite.
fn g12_hat_lenient(params: &GameParams, alpha: f64) -> Result<f64> {
    let cost = params.entry_cost();
    if h_unchecked(params, 0.0, alpha) < cost {
        return Ok(0.0);
    }
    if (1.0 - alpha) * share_rate(params) >= cost {
        return Ok(f64::INFINITY);
    }
    let f = |g: f64| h_unchecked(params, g, alpha) - cost;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        if hi >= G12_BRACKET_LIMIT {
            return Ok(f64::INFINITY);
        }
        hi *= 2.0;
    }
    let report = bisect(f, Bracket::new(0.0, hi)?, f64::EPSILON * hi)?;
    Ok(report.value)
}

/// `P(g12 < 1/2 | g12 < ĝ12)`; `None` when entry has prior probability 0.
pub fn kappa_posterior(prior_g12: &GainDistribution, g12_hat: f64) -> Option<f64> {
    let entry = prior_g12.cdf(g12_hat);
    if entry <= 0.0 {
        return None;
    }
    let low = prior_g12.cdf(SECONDARY_SHARE_THRESHOLD).min(entry);
    Some((low / entry).clamp(0.0, 1.0))
}

/// One pass of the belief map starting from a post-entry belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefMapStep {
    pub kappa: f64,
    pub g21_hat: f64,
    pub alpha: f64,
    pub g12_hat: f64,
    /// Bayes posterior implied by `g12_hat`, `None` off the equilibrium path.
    pub kappa_next: Option<f64>,
}

pub fn belief_map(params: &GameParams, prior_g12: &GainDistribution, prior_g21: &GainDistribution, kappa: f64) -> Result<BeliefMapStep> {
    let g21 = g21_hat(params, kappa)?;
    let alpha = prior_g21.cdf(g21);
    let g12 = g12_hat_lenient(params, alpha)?;
    Ok(BeliefMapStep { kappa, g21_hat: g21, alpha, g12_hat: g12, kappa_next: kappa_posterior(prior_g12, g12) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    /// Damped fixed-point iteration from the prior belief.
    Iteration,
    /// Grid scan of the belief map followed by bisection.
    Scan,
}

/// Absolute residuals of the four equilibrium conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyResiduals {
    /// `|Δ(ĝ21, κ̂)|`, zero when `ĝ21 = ∞`.
    pub delta: f64,
    /// `|α - F21(ĝ21)|`.
    pub alpha: f64,
    /// `|h(ĝ12, α) - kP|`, zero at the `0` / `∞` sentinels.
    pub h: f64,
    /// `|κ̂ - posterior(ĝ12)|`, zero off path.
    pub kappa: f64,
}

impl ConsistencyResiduals {
    pub fn max(&self) -> f64 {
        self.delta.max(self.alpha).max(self.h).max(self.kappa)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedEquilibrium {
    pub kappa_prior: f64,
    pub kappa_hat: f64,
    pub g21_hat: f64,
    pub alpha: f64,
    pub g12_hat: f64,
    /// Prior probability that the secondary enters.
    pub entry_probability: f64,
    /// Entry never happens, so `kappa_hat` keeps the prior belief.
    pub off_path: bool,
    pub method: SolveMethod,
    pub report: SolveReport,
    pub residuals: ConsistencyResiduals,
}

impl TwoSidedEquilibrium {
    pub fn converged(&self) -> bool {
        self.report.converged
    }
}

/// Residuals of a candidate `(κ̂, ĝ21, α, ĝ12)`.
pub fn consistency_residuals(
    params: &GameParams,
    prior_g12: &GainDistribution,
    prior_g21: &GainDistribution,
    kappa_hat: f64,
    g21_hat: f64,
    alpha: f64,
    g12_hat: f64,
) -> Result<ConsistencyResiduals> {
    require_two_subchannels(params)?;
    let delta = if g21_hat.is_finite() { delta(params, g21_hat, kappa_hat)?.abs() } else { 0.0 };
    let alpha_res = (alpha - prior_g21.cdf(g21_hat)).abs();
    let h_res = if g12_hat.is_finite() && g12_hat > 0.0 {
        (h_unchecked(params, g12_hat, alpha) - params.entry_cost()).abs()
    } else {
        0.0
    };
    let kappa = kappa_posterior(prior_g12, g12_hat).map_or(0.0, |k| (k - kappa_hat).abs());
    Ok(ConsistencyResiduals { delta, alpha: alpha_res, h: h_res, kappa })
}

/// Settings for [`solve_two_sided`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedSettings {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Grid size of the fallback scan.
    pub scan_points: usize,
}

impl Default for TwoSidedSettings {
    fn default() -> Self {
        TwoSidedSettings { damping: crate::numerics::DEFAULT_DAMPING, tol: 1e-12, max_iter: 500, scan_points: 200 }
    }
}

/// Solves the belief fixed point. Iteration runs first; if it stalls, a
/// grid scan over `κ` looks for a sign change of `T(κ) - κ`. An unresolved
/// solve comes back with `report.converged = false` and the last iterate.
pub fn solve_two_sided(
    params: &GameParams,
    prior_g12: &GainDistribution,
    prior_g21: &GainDistribution,
    settings: TwoSidedSettings,
) -> Result<TwoSidedEquilibrium> {
    require_two_subchannels(params)?;
    let kappa_prior = prior_g12.cdf(SECONDARY_SHARE_THRESHOLD);
    let mut err = None;
    let mut map = |k: f64| match belief_map(params, prior_g12, prior_g21, k) {
        Ok(step) => step.kappa_next.unwrap_or(kappa_prior),
        Err(e) => {
            err.get_or_insert(e);
            k
        }
    };
    let report = fixed_point(&mut map, kappa_prior, settings.damping, settings.tol, settings.max_iter)?;
    if let Some(e) = err.take() {
        return Err(e);
    }
    let (report, method) = if report.converged {
        (report, SolveMethod::Iteration)
    } else {
        match scan_fixed_points(params, prior_g12, prior_g21, settings.scan_points)?
            .into_iter()
            .min_by(|a, b| a.residual.total_cmp(&b.residual))
        {
            Some(r) if r.residual <= settings.tol.max(CONSISTENCY_TOL) => (r, SolveMethod::Scan),
            _ => (report, SolveMethod::Iteration),
        }
    };
    assemble(params, prior_g12, prior_g21, kappa_prior, report, method)
}

fn assemble(
    params: &GameParams,
    prior_g12: &GainDistribution,
    prior_g21: &GainDistribution,
    kappa_prior: f64,
    report: SolveReport,
    method: SolveMethod,
) -> Result<TwoSidedEquilibrium> {
    let step = belief_map(params, prior_g12, prior_g21, report.value)?;
    let residuals = consistency_residuals(params, prior_g12, prior_g21, step.kappa, step.g21_hat, step.alpha, step.g12_hat)?;
    let off_path = step.kappa_next.is_none();
    let residuals = if off_path {
        ConsistencyResiduals { kappa: (step.kappa - kappa_prior).abs(), ..residuals }
    } else {
        residuals
    };
    Ok(TwoSidedEquilibrium {
        kappa_prior,
        kappa_hat: step.kappa,
        g21_hat: step.g21_hat,
        alpha: step.alpha,
        g12_hat: step.g12_hat,
        entry_probability: prior_g12.cdf(step.g12_hat),
        off_path,
        method,
        report,
        residuals,
    })
}

/// Every sign change of `T(κ) - κ` on an `n`-cell grid over `[0, 1]`,
/// refined by bisection. Jumps of the map show up here too; their
/// `residual` (`|T(κ) - κ|`) stays large.
pub fn scan_fixed_points(
    params: &GameParams,
    prior_g12: &GainDistribution,
    prior_g21: &GainDistribution,
    n: usize,
) -> Result<Vec<SolveReport>> {
    require_two_subchannels(params)?;
    if n == 0 {
        return Err(Error::invalid("scan_points", "must be at least 1"));
    }
    let kappa_prior = prior_g12.cdf(SECONDARY_SHARE_THRESHOLD);
    let map = |k: f64| -> Result<f64> {
        Ok(belief_map(params, prior_g12, prior_g21, k)?.kappa_next.unwrap_or(kappa_prior))
    };
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let values = grid.iter().map(|&k| map(k).map(|t| t - k)).collect::<Result<Vec<f64>>>()?;
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (values[i], values[i + 1]);
        if a == 0.0 {
            out.push(SolveReport { value: grid[i], iterations: 0, residual: 0.0, f_value: 0.0, converged: true });
            continue;
        }
        if a.signum() == b.signum() || b == 0.0 {
            continue;
        }
        let r = bisect(|k| map(k).map(|t| t - k).unwrap_or(f64::NAN), Bracket::new(grid[i], grid[i + 1])?, 1e-15)?;
        let residual = (map(r.value)? - r.value).abs();
        out.push(SolveReport { residual, f_value: residual, converged: residual <= CONSISTENCY_TOL, ..r });
    }
    if values[n] == 0.0 {
        out.push(SolveReport { value: 1.0, iterations: 0, residual: 0.0, f_value: 0.0, converged: true });
    }
    Ok(out)
}
