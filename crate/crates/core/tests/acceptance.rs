//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line each, and exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use bayesgi::cli::{parse_scenario, run};
use bayesgi::dist::{ExpectationMethod, GainDistribution, RngSeed};
use bayesgi::model::{GameParams, Player, RestrictedAction};
use bayesgi::numerics::{bisect, Bracket};
use bayesgi::repeated::{
    belief_update, deterrence_horizon, one_shot_deviation_search, simulate, two_period_oracle, Observed,
    RepeatedConfig,
};
use bayesgi::sequential::{entry_cutoff_d, g12_tilde, g_star, sbgi_equilibrium, sbgie_equilibrium};
use bayesgi::static_games::{
    bgi_expected_payoffs, bgi_verify_symmetric_bne, concentration_penalty, BrUpdate, GainPriors,
    MixedRestrictedStrategy, TypePrior, UcgiGame,
};
use bayesgi::two_sided::{delta, g21_hat, h, solve_two_sided, TwoSidedSettings, CONSISTENCY_TOL};
use bayesgi::{EntryAction, SeqAction};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn base() -> GameParams {
    GameParams::two_channel(1.0, 0.01).unwrap()
}

fn u(lo: f64, hi: f64) -> GainDistribution {
    GainDistribution::uniform(lo, hi).unwrap()
}

fn uniform_cross_game() -> UcgiGame {
    let priors = GainPriors {
        g11: GainDistribution::point(1.0).unwrap(),
        g12: u(0.0, 1.0),
        g21: u(0.0, 1.0),
        g22: GainDistribution::point(1.0).unwrap(),
    };
    UcgiGame::new(base(), priors, ExpectationMethod::default()).unwrap()
}

fn best_response_dynamics() -> Outcome {
    let start = Instant::now();
    let game = uniform_cross_game();
    let a = game.br_dynamics(1.0, 0.0, 100, 1e-12, BrUpdate::Simultaneous).map_err(|e| e.to_string())?;
    let b = game.br_dynamics(0.0, 1.0, 100, 1e-12, BrUpdate::Simultaneous).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let iterations = a.steps.len() - 1;
    let mirrored = a.steps.len() == b.steps.len()
        && a.steps.iter().zip(&b.steps).all(|(x, y)| (x.p1 - (1.0 - y.p1)).abs() < 1e-9 && (x.p2 - (1.0 - y.p2)).abs() < 1e-9);
    check(
        a.final_gap < 1e-6 && b.final_gap < 1e-6 && iterations <= 100 && mirrored && elapsed < 10.0,
        format!("gap {:.2e}, {iterations} iterations, mirrored {mirrored}, {elapsed:.3} s", a.final_gap.max(b.final_gap)),
    )
}

fn foc_condition() -> Outcome {
    let families = [
        u(0.0, 1.0),
        u(0.2, 3.0),
        GainDistribution::truncated_exponential(2.0, 0.0, 4.0).unwrap(),
        GainDistribution::point(0.7).unwrap(),
        GainDistribution::discrete(vec![0.1, 0.5, 2.0], vec![0.2, 0.5, 0.3]).unwrap(),
        GainDistribution::truncated_exponential(0.5, 0.1, 1.0).unwrap(),
    ];
    let params = base();
    let mut worst: f64 = 0.0;
    for (i, f) in families.iter().enumerate() {
        let other = &families[(i + 1) % families.len()];
        let priors = GainPriors { g11: f.clone(), g12: other.clone(), g21: other.clone(), g22: f.clone() };
        let game = UcgiGame::new(params, priors, ExpectationMethod::default()).map_err(|e| e.to_string())?;
        for player in [Player::One, Player::Two] {
            worst = worst.max(game.foc_residual(player, 0.5, 0.5).map_err(|e| e.to_string())?.abs());
        }
    }

    // Both players on the same side of 1/2: the integrand numerator has a
    // fixed sign for every gain draw.
    let game = uniform_cross_game();
    let mut rng = RngSeed(2).rng();
    let mut matched = 0;
    for _ in 0..20 {
        let below = rng.gen_bool(0.5);
        let (p, q): (f64, f64) = if below {
            (rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5))
        } else {
            (rng.gen_range(0.5 + 1e-9..1.0), rng.gen_range(0.5 + 1e-9..1.0))
        };
        let r = game.foc_residual(Player::One, p, q).map_err(|e| e.to_string())?;
        if (r > 0.0) == below && r != 0.0 {
            matched += 1;
        }
    }
    check(worst < 1e-8 && matched == 20, format!("{} families max |r| {worst:.1e}, sign matches {matched}/20", families.len()))
}

fn concentration_identity() -> Outcome {
    let mut rng = RngSeed(3).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.gen_range(2..=5);
        let params = GameParams::new(rng.gen_range(0.1..5.0), rng.gen_range(0.001..0.5), k, 0.0).unwrap();
        let raw: Vec<f64> = (0..=k).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let alpha: Vec<f64> = raw[..k].iter().map(|x| x / total).collect();
        let gamma = 1.0 - alpha.iter().sum::<f64>();
        let s = MixedRestrictedStrategy::new(alpha.clone(), gamma.max(0.0)).map_err(|e| e.to_string())?;
        let (g, c) = (rng.gen_range(0.01..3.0), rng.gen_range(0.0..3.0));
        let v = bgi_expected_payoffs(&params, g, c, &s).map_err(|e| e.to_string())?;
        let pen = concentration_penalty(&params, g, c);
        for i in 1..=k {
            for j in 1..=k {
                let lhs = v[&RestrictedAction::Concentrate(i)] - v[&RestrictedAction::Concentrate(j)];
                worst = worst.max((lhs - pen * (alpha[j - 1] - alpha[i - 1])).abs());
            }
        }
    }
    let params = GameParams::new(1.0, 0.01, 3, 0.0).unwrap();
    let prior = TypePrior { self_gain: u(0.5, 1.5), incident_gain: u(0.0, 1.0) };
    let spread = bgi_verify_symmetric_bne(&params, |_, _| RestrictedAction::Spread, &prior, 1000, RngSeed(4))
        .map_err(|e| e.to_string())?;
    let conc = bgi_verify_symmetric_bne(&params, |_, _| RestrictedAction::Concentrate(1), &prior, 1000, RngSeed(4))
        .map_err(|e| e.to_string())?;
    check(
        worst <= 1e-12 && spread.holds && !conc.holds && conc.witness.is_some(),
        format!(
            "identity max err {worst:.1e}, spread accepted {}, concentrate rejected {} (witness {:?})",
            spread.holds,
            !conc.holds,
            conc.witness.map(|w| w.better)
        ),
    )
}

fn threshold_suite() -> Outcome {
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    for i in 0..=240 {
        let snr = 10f64.powf(-6.0 + 12.0 * i as f64 / 240.0);
        let g = g_star(&GameParams::two_channel(snr, 1.0).unwrap());
        monotone &= g < prev && g < 0.5;
        prev = g;
    }
    let hi = g_star(&GameParams::two_channel(1e6, 1.0).unwrap());
    let lo = g_star(&GameParams::two_channel(1e-6, 1.0).unwrap());

    let tilde = |k: f64| g12_tilde(&GameParams::new(1e-6, 1.0, 2, k).unwrap());
    let below = tilde(0.25); // 2kN0 ln2 < 1
    let above = tilde(1.5); // > 1
    let edge = tilde(0.5 / std::f64::consts::LN_2); // = 1
    check(
        monotone && hi < 1e-3 && (0.5 - lo) < 1e-3 && below > 1e3 && above < -1e3 && (edge + 0.5).abs() < 1e-3,
        format!("g*(1e6) {hi:.2e}, g*(1e-6) {lo:.6}, g~12 limits {below:.3e} / {above:.3e} / {edge:.6}"),
    )
}

fn entry_crossover() -> Outcome {
    let mut rng = RngSeed(5).rng();
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let params = GameParams::two_channel(rng.gen_range(1e-3..100.0), rng.gen_range(1e-3..1.0)).unwrap();
        let eq = sbgi_equilibrium(&params, rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)).map_err(|e| e.to_string())?;
        if eq.primary_action != eq.secondary_action {
            mismatches += 1;
        }
    }

    let params = base().with_cost(2.0).unwrap();
    let gs = g_star(&params);
    let mut worst: f64 = 0.0;
    for g12 in [0.55, 0.6, 0.8, 1.5] {
        let d = entry_cutoff_d(&params, g12).map_err(|e| e.to_string())?;
        // rho = g* / hi for a uniform(0, hi) prior
        let enters = |rho: f64| -> f64 {
            let prior = u(0.0, gs / rho);
            match sbgie_equilibrium(&params, g12, 0.5, &prior).map(|e| e.entry) {
                Ok(EntryAction::Enter) => 1.0,
                _ => -1.0,
            }
        };
        let root = bisect(enters, Bracket::new(0.01, 0.99).unwrap(), 1e-10).map_err(|e| e.to_string())?;
        worst = worst.max((root.value - d).abs());
    }
    check(mismatches == 0 && worst < 1e-6, format!("{mismatches} action mismatches in 10^4 draws, crossover |rho - d| max {worst:.1e}"))
}

fn rho_prior(params: &GameParams, rho: f64) -> GainDistribution {
    u(0.0, g_star(params) / rho)
}

fn config(horizon: u32, rho: f64, g21: f64, seed: u64) -> RepeatedConfig {
    let params = base().with_cost(2.0).unwrap();
    RepeatedConfig { horizon, params, g12: 0.6, g21, prior_g21: rho_prior(&params, rho), seed: RngSeed(seed) }
}

fn two_period_cross_check() -> Outcome {
    let params = base().with_cost(2.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_dev: f64 = f64::NEG_INFINITY;
    for rho in [0.15, 0.2, 0.5, 0.8] {
        let g21 = 0.5;
        let oracle = two_period_oracle(&params, 0.6, g21, &rho_prior(&params, rho)).map_err(|e| e.to_string())?;
        let trace = simulate(&config(2, rho, g21, 11)).map_err(|e| e.to_string())?;
        let s = trace.strategy.ok_or("no reputation strategy")?;
        worst = worst
            .max((s.d - oracle.d).abs())
            .max((s.lambda - oracle.lambda).abs())
            .max((s.entry_cutoff(1) - oracle.period1_entry_threshold).abs())
            .max((s.entry_cutoff(2) - oracle.period2_entry_threshold).abs());
        let first = &trace.periods[0];
        if let (Some(g), Some(sp)) = (oracle.gamma, first.spread_probability) {
            worst = worst.max((g - sp).abs());
        }
        if oracle.gamma.is_none() && !oracle.period2_primary_spreads_surely {
            return Err(format!("rho {rho}: oracle has neither a mix nor sure spreading"));
        }
        for horizon in [2, 3] {
            for g21 in [0.05, 0.5, 0.95] {
                let dev = one_shot_deviation_search(&config(horizon, rho, g21, 0)).map_err(|e| e.to_string())?;
                worst_dev = worst_dev.max(dev.max_primary_gain);
            }
        }
    }
    check(worst <= 1e-9 && worst_dev <= 1e-9, format!("max oracle mismatch {worst:.1e}, best primary deviation {worst_dev:.1e}"))
}

fn reputation_deterrence() -> Outcome {
    let params = base().with_cost(2.0).unwrap();
    let d = entry_cutoff_d(&params, 0.6).map_err(|e| e.to_string())?;
    let t_star = deterrence_horizon(0.2, d).map_err(|e| e.to_string())?;
    let allowed = [t_star.floor() as u32, t_star.ceil() as u32];
    let mut seen = Vec::new();
    for horizon in [5, 10, 20] {
        for seed in 0..5 {
            for g21 in [0.05, 0.3, 0.9] {
                let tr = simulate(&config(horizon, 0.2, g21, seed)).map_err(|e| e.to_string())?;
                let first = tr.first_entry_period.unwrap_or(0);
                if !allowed.contains(&first) {
                    return Err(format!("T={horizon} seed={seed} g21={g21}: entry from period {first}, t* = {t_star}"));
                }
                seen.push((horizon, first, tr.deterred_periods));
            }
        }
    }

    // No prior mass below g*: the secondary always enters and a high-gain
    // primary always shares.
    let gs = g_star(&params);
    let prior = u(gs, 0.99);
    let mut complete = true;
    for g21 in [gs + 1e-3, 0.3, 0.6, 0.99] {
        for horizon in [5, 10, 20] {
            let cfg = RepeatedConfig { horizon, params, g12: 0.6, g21, prior_g21: prior.clone(), seed: RngSeed(1) };
            let tr = simulate(&cfg).map_err(|e| e.to_string())?;
            complete &= tr.rho == 0.0
                && tr.periods.iter().all(|p| p.entry == EntryAction::Enter && p.primary_action == Some(SeqAction::Share));
        }
    }
    check(
        (d - 0.6839).abs() < 1e-4 && (t_star - 4.235).abs() < 1e-3 && complete,
        format!(
            "d {d:.6}, t* {t_star:.6}, entry from period {:?}, deterred {:?} for T = 5/10/20, rho=0 limit {complete}",
            allowed,
            [5, 10, 20].map(|t| seen.iter().find(|s| s.0 == t).map(|s| s.2).unwrap_or(0))
        ),
    )
}

fn belief_chains() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut monotone = true;
    for seed in 0..400 {
        let rho = [0.15, 0.2, 0.35, 0.6][seed as usize % 4];
        let g21 = [0.05, 0.2, 0.5, 0.9][(seed as usize / 4) % 4];
        let tr = simulate(&config(20, rho, g21, seed)).map_err(|e| e.to_string())?;
        let s = tr.strategy.ok_or("no reputation strategy")?;
        let mut chain_mu: Option<f64> = None;
        for p in &tr.periods {
            match p.observed() {
                Observed::Entered(SeqAction::Spread) if p.mu_before > 0.0 => {
                    // explicit posterior that the primary is the low-gain type
                    let gamma = if p.t_reverse >= 2 { s.gamma(p.mu_before, p.t_reverse).map_err(|e| e.to_string())? } else { 0.0 };
                    let bayes = p.mu_before / (p.mu_before + (1.0 - p.mu_before) * gamma);
                    let closed = belief_update(p.mu_before, p.observed(), s.d, p.t_reverse - 1);
                    worst = worst.max((bayes - closed).abs()).max((closed - p.mu_after).abs());
                    if let Some(m) = chain_mu {
                        monotone &= p.mu_before >= m;
                    }
                    monotone &= p.mu_after >= p.mu_before;
                    chain_mu = Some(p.mu_after);
                    checked += 1;
                }
                Observed::Exit => {}
                _ => chain_mu = None,
            }
        }
    }
    check(worst <= 1e-12 && monotone && checked > 0, format!("{checked} spread observations, max Bayes gap {worst:.1e}, monotone {monotone}"))
}

fn two_sided_consistency() -> Outcome {
    let params = base();
    let mut prev = f64::INFINITY;
    let mut decreasing = true;
    for i in 0..=400 {
        let dv = delta(&params, i as f64 * 0.05, 0.4).map_err(|e| e.to_string())?;
        decreasing &= dv < prev;
        prev = dv;
    }
    let sentinel = g21_hat(&params, 1.0).map_err(|e| e.to_string())? == f64::INFINITY;
    let mut jump: f64 = 0.0;
    for alpha in [0.1, 0.5, 1.0] {
        let lo = h(&params, 0.5 - 1e-12, alpha).map_err(|e| e.to_string())?;
        let hi = h(&params, 0.5 + 1e-12, alpha).map_err(|e| e.to_string())?;
        jump = jump.max((lo - hi).abs());
    }

    let mut rng = RngSeed(9).rng();
    let mut worst: f64 = 0.0;
    let mut solved = 0;
    for _ in 0..10 {
        let params = GameParams::two_channel(rng.gen_range(0.5..2.0), rng.gen_range(0.005..0.05)).unwrap();
        let share = bayesgi::model::share_rate(&params);
        let params = params.with_cost(rng.gen_range(0.0..0.95) * share / params.power).unwrap();
        let prior = |rng: &mut rand_chacha::ChaCha20Rng| {
            if rng.gen_bool(0.5) {
                let lo = rng.gen_range(0.0..0.4);
                u(lo, lo + rng.gen_range(0.3..2.0))
            } else {
                GainDistribution::truncated_exponential(rng.gen_range(0.5..4.0), 0.0, rng.gen_range(1.0..5.0)).unwrap()
            }
        };
        let (p12, p21) = (prior(&mut rng), prior(&mut rng));
        let eq = solve_two_sided(&params, &p12, &p21, TwoSidedSettings::default()).map_err(|e| e.to_string())?;
        if eq.converged() {
            solved += 1;
        }
        worst = worst.max(eq.residuals.max());
    }

    // A secondary known to have a low gain: the primary always spreads and
    // entry follows the one-sided rule.
    let params = base().with_cost(2.7).unwrap();
    let low = u(0.05, 0.45);
    let eq = solve_two_sided(&params, &low, &u(0.0, 1.0), TwoSidedSettings::default()).map_err(|e| e.to_string())?;
    let mut one_sided = eq.kappa_hat == 1.0 && eq.g21_hat == f64::INFINITY && eq.alpha == 1.0;
    for i in 0..=40 {
        let g12 = 0.05 + 0.4 * i as f64 / 40.0;
        let single = sbgie_equilibrium(&params, g12, 0.5, &u(0.0, 1.0)).map_err(|e| e.to_string())?;
        one_sided &= (g12 < eq.g12_hat) == (single.entry == EntryAction::Enter);
    }
    check(
        decreasing && sentinel && jump < 1e-9 && solved == 10 && worst <= CONSISTENCY_TOL && one_sided,
        format!("delta decreasing {decreasing}, sentinel {sentinel}, h jump {jump:.1e}, {solved}/10 solved, max residual {worst:.1e}, one-sided match {one_sided}"),
    )
}

fn run_twice(path: &Path, a: &Path, b: &Path) -> Result<Vec<String>, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let scenario = parse_scenario(&text).map_err(|e| format!("{e:?}"))?;
    run(&scenario, a).map_err(|e| format!("{e:?}"))?;
    run(&scenario, b).map_err(|e| format!("{e:?}"))?;
    let mut names: Vec<String> = fs::read_dir(a).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    for name in &names {
        let x = fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join(name)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{}: {name} differs between runs", path.display()));
        }
    }
    Ok(names)
}

fn determinism() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    let mut entries: Vec<_> = fs::read_dir(&dir).map_err(|e| e.to_string())?.map(|e| e.unwrap().path()).collect();
    entries.sort();
    for (i, path) in entries.iter().filter(|p| p.extension().is_some_and(|e| e == "toml")).enumerate() {
        let a = tmp.path().join(format!("{i}a"));
        let b = tmp.path().join(format!("{i}b"));
        files += run_twice(path, &a, &b)?.len();
    }
    check(files > 0, format!("{files} artifacts byte-identical across reruns"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("best-response dynamics", best_response_dynamics),
        ("first-order condition", foc_condition),
        ("concentration identity and BNE check", concentration_identity),
        ("thresholds", threshold_suite),
        ("sequential actions and entry crossover", entry_crossover),
        ("two-period cross-validation", two_period_cross_check),
        ("reputation deterrence", reputation_deterrence),
        ("belief updates", belief_chains),
        ("two-sided consistency", two_sided_consistency),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
