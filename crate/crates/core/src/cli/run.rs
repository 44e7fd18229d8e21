//! Dispatch of a validated scenario to the solvers, and artifact output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::scenario::{BgiCandidate, FieldError, Mode, Scenario, SweepSpec, SweepVariable};
use crate::dist::{GainDistribution, RngSeed};
use crate::error::Error;
use crate::model::{GameParams, Player};
use crate::repeated::{deterrence_horizon, simulate, simulate_batch, RepeatedConfig};
use crate::sequential::{entry_cutoff_d, g12_tilde, g_star, sbgi_equilibrium, sbgie_equilibrium};
use crate::static_games::{bgi_verify_symmetric_bne, GainPriors, TypePrior, UcgiGame};
use crate::two_sided::{scan_fixed_points, solve_two_sided};

/// Exit status of a run, as used by the command-line front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::NotConverged => 3,
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Validation(Vec<FieldError>),
    Solver(Error),
    Io { path: PathBuf, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Solver(Error::NotConverged { .. } | Error::NoSignChange { .. }) => 3,
            RunError::Solver(_) => 2,
            RunError::Io { .. } => 1,
        }
    }

    /// Machine-readable description for stderr.
    pub fn to_json(&self) -> Value {
        match self {
            RunError::Validation(errs) => json!({
                "status": "validation-error",
                "exit_code": self.exit_code(),
                "errors": errs.iter().map(|e| json!({"path": e.path, "message": e.message})).collect::<Vec<_>>(),
            }),
            RunError::Solver(e) => json!({
                "status": if self.exit_code() == 3 { "not-converged" } else { "solver-error" },
                "exit_code": self.exit_code(),
                "message": e.to_string(),
            }),
            RunError::Io { path, message } => json!({
                "status": "io-error",
                "exit_code": self.exit_code(),
                "path": path.display().to_string(),
                "message": message,
            }),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Solver(e)
    }
}

/// A derived threshold together with the inputs it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    pub name: &'static str,
    pub value: Value,
    pub inputs: BTreeMap<&'static str, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: &'static str,
    pub seed: u64,
    pub status: Status,
    pub params: Value,
    pub thresholds: Vec<Threshold>,
    pub result: Map<String, Value>,
    /// File names written into the output directory.
    pub outputs: Vec<String>,
}

/// JSON number, with non-finite values spelled as strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

/// CSV cell: shortest round-trip float, empty when absent.
fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    fn add(&mut self, name: &str, body: String) {
        self.files.push((name.to_owned(), body));
    }
}

fn params_json(p: &GameParams) -> Value {
    json!({"power": num(p.power), "noise": num(p.noise), "subchannels": p.subchannels, "cost": num(p.cost)})
}

fn g_star_threshold(p: &GameParams) -> Threshold {
    Threshold {
        name: "g_star",
        value: num(g_star(p)),
        inputs: BTreeMap::from([("power", num(p.power)), ("noise", num(p.noise))]),
    }
}

fn g12_tilde_threshold(p: &GameParams) -> Threshold {
    Threshold {
        name: "g12_tilde",
        value: num(g12_tilde(p)),
        inputs: BTreeMap::from([("power", num(p.power)), ("noise", num(p.noise)), ("cost", num(p.cost))]),
    }
}

fn d_threshold(p: &GameParams, g12: f64) -> Option<Threshold> {
    entry_cutoff_d(p, g12).ok().map(|d| Threshold {
        name: "d",
        value: num(d),
        inputs: BTreeMap::from([
            ("power", num(p.power)),
            ("noise", num(p.noise)),
            ("cost", num(p.cost)),
            ("g12", num(g12)),
        ]),
    })
}

fn required<T: Clone>(v: &Option<T>, path: &str) -> Result<T, RunError> {
    v.clone().ok_or_else(|| RunError::Validation(vec![FieldError { path: path.into(), message: "required".into() }]))
}

/// Runs `scenario` and writes its artifacts plus `report.json` into `out_dir`.
pub fn run(scenario: &Scenario, out_dir: &Path) -> Result<RunReport, RunError> {
    let (report, artifacts) = evaluate(scenario)?;
    fs::create_dir_all(out_dir).map_err(|e| RunError::Io { path: out_dir.to_owned(), message: e.to_string() })?;
    for (name, body) in &artifacts.files {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| RunError::Io { path: path.clone(), message: e.to_string() })?;
    }
    let path = out_dir.join("report.json");
    let body = serde_json::to_string_pretty(&report).expect("report serialises") + "\n";
    fs::write(&path, body).map_err(|e| RunError::Io { path, message: e.to_string() })?;
    Ok(report)
}

/// Computes the report and artifact contents without touching the disk.
fn evaluate(s: &Scenario) -> Result<(RunReport, Artifacts), RunError> {
    let p = s.params;
    let mut art = Artifacts { files: Vec::new() };
    let mut thresholds = Vec::new();
    let mut result = Map::new();
    let mut status = Status::Ok;

    match s.mode {
        Mode::StaticBr => {
            let priors = GainPriors {
                g11: required(&s.priors.g11, "priors.g11")?,
                g12: required(&s.priors.g12, "priors.g12")?,
                g21: required(&s.priors.g21, "priors.g21")?,
                g22: required(&s.priors.g22, "priors.g22")?,
            };
            let game = UcgiGame::new(p, priors, s.numerics.method(RngSeed(s.seed)))?;
            let init1 = s.br.init1.unwrap_or(p.power);
            let init2 = s.br.init2.unwrap_or(0.0);
            let tr = game.br_dynamics(init1, init2, s.br.max_iter, s.br.tol, s.br.update)?;
            let last = *tr.last();
            if !tr.converged {
                status = Status::NotConverged;
            }
            result.insert("converged".into(), json!(tr.converged));
            result.insert("iterations".into(), json!(last.iteration));
            result.insert("final_gap".into(), num(tr.final_gap));
            result.insert("p11".into(), num(last.p1));
            result.insert("p12".into(), num(p.power - last.p1));
            result.insert("p21".into(), num(last.p2));
            result.insert("p22".into(), num(p.power - last.p2));
            result.insert("foc_residual_1".into(), num(game.foc_residual(Player::One, last.p1, last.p2)?));
            result.insert("foc_residual_2".into(), num(game.foc_residual(Player::Two, last.p2, last.p1)?));
            art.add("trajectory.csv", tr.to_csv());
        }
        Mode::BgiVerify => {
            let prior = TypePrior {
                self_gain: required(&s.priors.g11, "priors.g11")?,
                incident_gain: required(&s.priors.g21, "priors.g21")?,
            };
            let candidate: BgiCandidate = s.bgi.candidate;
            let v = bgi_verify_symmetric_bne(&p, |g, _| candidate.action(g), &prior, s.bgi.n_check, RngSeed(s.seed))?;
            result.insert("candidate".into(), json!(candidate.to_string()));
            result.insert("holds".into(), json!(v.holds));
            result.insert("types_checked".into(), json!(v.types_checked));
            for (k, a) in v.induced.alpha.iter().enumerate() {
                result.insert(format!("alpha_{}", k + 1), num(*a));
            }
            result.insert("gamma".into(), num(v.induced.gamma));
            if let Some(w) = v.witness {
                result.insert("witness_self_gain".into(), num(w.self_gain));
                result.insert("witness_incident_gain".into(), num(w.incident_gain));
                result.insert("witness_prescribed".into(), json!(w.prescribed.to_string()));
                result.insert("witness_better".into(), json!(w.better.to_string()));
                result.insert("witness_gain".into(), num(w.gain));
            }
        }
        Mode::Sbgi => {
            let (g12, g21) = (required(&s.gains.g12, "gains.g12")?, required(&s.gains.g21, "gains.g21")?);
            thresholds.push(g_star_threshold(&p));
            let eq = sbgi_equilibrium(&p, g12, g21)?;
            result.insert("g12".into(), num(g12));
            result.insert("g21".into(), num(g21));
            result.insert("primary_action".into(), json!(eq.primary_action.code()));
            result.insert("secondary_action".into(), json!(eq.secondary_action.code()));
            result.insert("primary_payoff".into(), num(eq.primary_payoff));
            result.insert("secondary_payoff".into(), num(eq.secondary_payoff));
        }
        Mode::Sbgie => {
            let (g12, g21) = (required(&s.gains.g12, "gains.g12")?, required(&s.gains.g21, "gains.g21")?);
            let prior = required(&s.priors.g21, "priors.g21")?;
            thresholds.push(g_star_threshold(&p));
            thresholds.push(g12_tilde_threshold(&p));
            thresholds.extend(d_threshold(&p, g12));
            let eq = sbgie_equilibrium(&p, g12, g21, &prior)?;
            result.insert("g12".into(), num(g12));
            result.insert("g21".into(), num(g21));
            result.insert("regime".into(), serde_json::to_value(eq.regime).expect("enum"));
            result.insert("rho".into(), num(eq.rho));
            result.insert("entry".into(), json!(eq.entry.code()));
            result.insert("primary_action".into(), json!(eq.post_entry.map(|e| e.primary_action.code())));
            result.insert("secondary_action".into(), json!(eq.post_entry.map(|e| e.secondary_action.code())));
            result.insert("entry_value".into(), num(eq.entry_value));
            result.insert("secondary_expected_payoff".into(), num(eq.secondary_expected_payoff));
            result.insert("primary_payoff".into(), num(eq.primary_payoff));
            result.insert("secondary_payoff".into(), num(eq.secondary_payoff));
        }
        Mode::TwoSided => {
            let p12 = required(&s.priors.g12, "priors.g12")?;
            let p21 = required(&s.priors.g21, "priors.g21")?;
            let eq = solve_two_sided(&p, &p12, &p21, s.two_sided)?;
            let candidates = scan_fixed_points(&p, &p12, &p21, s.two_sided.scan_points)?;
            if !eq.converged() {
                status = Status::NotConverged;
            }
            result.insert("converged".into(), json!(eq.converged()));
            result.insert("method".into(), serde_json::to_value(eq.method).expect("enum"));
            result.insert("iterations".into(), json!(eq.report.iterations));
            result.insert("kappa_prior".into(), num(eq.kappa_prior));
            result.insert("kappa_hat".into(), num(eq.kappa_hat));
            result.insert("g21_hat".into(), num(eq.g21_hat));
            result.insert("alpha".into(), num(eq.alpha));
            result.insert("g12_hat".into(), num(eq.g12_hat));
            result.insert("entry_probability".into(), num(eq.entry_probability));
            result.insert("off_path".into(), json!(eq.off_path));
            result.insert("residual_delta".into(), num(eq.residuals.delta));
            result.insert("residual_alpha".into(), num(eq.residuals.alpha));
            result.insert("residual_h".into(), num(eq.residuals.h));
            result.insert("residual_kappa".into(), num(eq.residuals.kappa));
            result.insert(
                "scan_fixed_points".into(),
                Value::Array(candidates.iter().filter(|c| c.converged).map(|c| num(c.value)).collect()),
            );
        }
        Mode::Repeated => {
            let config = RepeatedConfig {
                horizon: required(&s.horizon, "repeated.horizon")?,
                params: p,
                g12: required(&s.gains.g12, "gains.g12")?,
                g21: required(&s.gains.g21, "gains.g21")?,
                prior_g21: required(&s.priors.g21, "priors.g21")?,
                seed: RngSeed(s.seed),
            };
            thresholds.push(g_star_threshold(&p));
            thresholds.push(g12_tilde_threshold(&p));
            thresholds.extend(d_threshold(&p, config.g12));
            let tr = simulate(&config)?;
            if let (Some(t), Some(st)) = (tr.t_star, tr.strategy) {
                thresholds.push(Threshold {
                    name: "t_star",
                    value: num(t),
                    inputs: BTreeMap::from([("rho", num(tr.rho)), ("d", num(st.d))]),
                });
            }
            let mut summary = Map::new();
            summary.insert("horizon".into(), json!(tr.horizon));
            summary.insert("regime".into(), serde_json::to_value(tr.regime).expect("enum"));
            summary.insert("rho".into(), num(tr.rho));
            summary.insert("d".into(), opt_num(tr.strategy.map(|s| s.d)));
            summary.insert("lambda".into(), opt_num(tr.strategy.map(|s| s.lambda)));
            summary.insert("t_star".into(), opt_num(tr.t_star));
            summary.insert("total1".into(), num(tr.total1));
            summary.insert("total2".into(), num(tr.total2));
            summary.insert("deterred_periods".into(), json!(tr.deterred_periods));
            summary.insert("first_entry_period".into(), json!(tr.first_entry_period));
            summary.insert("welfare".into(), num(tr.welfare));
            summary.insert("benchmark_welfare".into(), num(tr.benchmark_welfare));
            summary.insert("efficiency_ratio".into(), num(tr.efficiency_ratio));
            if s.batch_runs > 0 {
                let b = simulate_batch(&config, s.batch_runs)?;
                summary.insert("batch_runs".into(), json!(b.runs));
                summary.insert("batch_mean_total1".into(), num(b.mean_total1));
                summary.insert("batch_mean_total2".into(), num(b.mean_total2));
                summary.insert("batch_mean_welfare_gap".into(), num(b.mean_welfare_gap));
                summary.insert("batch_mean_deterred_periods".into(), num(b.mean_deterred_periods));
                summary.insert("batch_mean_efficiency_ratio".into(), num(b.mean_efficiency_ratio));
            }
            art.add("trace.csv", tr.trace_csv());
            art.add("draws.csv", tr.draws_csv());
            art.add("summary.json", serde_json::to_string_pretty(&summary).expect("map") + "\n");
            result = summary;
        }
        Mode::Sweep => {
            let spec = required(&s.sweep, "sweep")?;
            let (csv, checks) = sweep(s, &spec)?;
            result.insert("variable".into(), json!(spec.variable.name()));
            result.insert("points".into(), json!(spec.points));
            result.insert("monotonicity".into(), Value::Object(checks));
            art.add("sweep.csv", csv);
        }
    }

    if s.mode != Mode::Repeated && s.mode != Mode::Sweep {
        art.add("result.json", serde_json::to_string_pretty(&result).expect("map") + "\n");
    }
    let mut outputs: Vec<String> = art.files.iter().map(|(n, _)| n.clone()).collect();
    outputs.push("report.json".into());
    Ok((
        RunReport { mode: s.mode.name(), seed: s.seed, status, params: params_json(&p), thresholds, result, outputs },
        art,
    ))
}

pub const SWEEP_COLUMNS: [&str; 17] = [
    "index",
    "value",
    "power",
    "noise",
    "cost",
    "g12",
    "g21",
    "g_star",
    "g12_tilde",
    "d",
    "rho",
    "t_star",
    "primary_action",
    "secondary_action",
    "entry",
    "first_entry_period",
    "deterred_periods",
];

const NUMERIC_SWEEP_COLUMNS: [&str; 8] = ["g_star", "g12_tilde", "d", "rho", "t_star", "first_entry_period", "deterred_periods", "value"];

/// One CSV row per grid point plus a monotonicity label for each numeric
/// derived column.
pub fn sweep(s: &Scenario, spec: &SweepSpec) -> Result<(String, Map<String, Value>), RunError> {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    let mut columns: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (i, v) in spec.grid().into_iter().enumerate() {
        let mut p = s.params;
        let mut g12 = s.gains.g12;
        let mut g21 = s.gains.g21;
        let mut horizon = s.horizon;
        match spec.variable {
            SweepVariable::G12 => g12 = Some(v),
            SweepVariable::G21 => g21 = Some(v),
            SweepVariable::Cost => p.cost = v,
            SweepVariable::Snr => p.power = v * p.noise,
            SweepVariable::Horizon => horizon = Some(v.round().max(1.0) as u32),
        }
        p.validate().map_err(|e| RunError::Validation(vec![FieldError { path: "sweep".into(), message: e.to_string() }]))?;
        let prior: Option<&GainDistribution> = s.priors.g21.as_ref();

        let gs = g_star(&p);
        let gt = g12_tilde(&p);
        let d = g12.and_then(|g| entry_cutoff_d(&p, g).ok());
        let rho = prior.map(|pr| pr.cdf(gs));
        let t_star = match (rho, d) {
            (Some(r), Some(d)) => deterrence_horizon(r, d).ok(),
            _ => None,
        };
        let sbgi = match (g12, g21) {
            (Some(a), Some(b)) => sbgi_equilibrium(&p, a, b).ok(),
            _ => None,
        };
        let sbgie = match (g12, g21, prior) {
            (Some(a), Some(b), Some(pr)) => sbgie_equilibrium(&p, a, b, pr).ok(),
            _ => None,
        };
        let trace = match (g12, g21, prior, horizon) {
            (Some(a), Some(b), Some(pr), Some(h)) => {
                let config = RepeatedConfig { horizon: h, params: p, g12: a, g21: b, prior_g21: pr.clone(), seed: RngSeed(s.seed) };
                if config.validate().is_ok() {
                    Some(simulate(&config)?)
                } else {
                    None
                }
            }
            _ => None,
        };
        let first_entry = trace.as_ref().and_then(|t| t.first_entry_period).map(f64::from);
        let deterred = trace.as_ref().map(|t| f64::from(t.deterred_periods));

        let numeric: [(&str, Option<f64>); 8] = [
            ("g_star", Some(gs)),
            ("g12_tilde", Some(gt)),
            ("d", d),
            ("rho", rho),
            ("t_star", t_star),
            ("first_entry_period", first_entry),
            ("deterred_periods", deterred),
            ("value", Some(v)),
        ];
        for (name, x) in numeric {
            if let Some(x) = x {
                columns.entry(name).or_default().push(x);
            }
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            i,
            v,
            p.power,
            p.noise,
            p.cost,
            cell(g12),
            cell(g21),
            gs,
            gt,
            cell(d),
            cell(rho),
            cell(t_star),
            sbgi.map_or("", |e| e.primary_action.code()),
            sbgi.map_or("", |e| e.secondary_action.code()),
            sbgie.map_or("", |e| e.entry.code()),
            trace.as_ref().and_then(|t| t.first_entry_period).map(|x| x.to_string()).unwrap_or_default(),
            trace.as_ref().map(|t| t.deterred_periods.to_string()).unwrap_or_default(),
        );
    }
    let mut checks = Map::new();
    for name in NUMERIC_SWEEP_COLUMNS {
        if let Some(xs) = columns.get(name) {
            checks.insert(name.into(), json!(monotonicity(xs)));
        }
    }
    Ok((out, checks))
}

/// Classifies a sequence as increasing, decreasing, nondecreasing,
/// nonincreasing, constant or mixed.
pub fn monotonicity(xs: &[f64]) -> &'static str {
    let pairs = || xs.windows(2).map(|w| (w[0], w[1]));
    let up = pairs().all(|(a, b)| b > a);
    let down = pairs().all(|(a, b)| b < a);
    let nondec = pairs().all(|(a, b)| b >= a);
    let noninc = pairs().all(|(a, b)| b <= a);
    match (nondec, noninc) {
        (true, true) => "constant",
        _ if up => "increasing",
        _ if down => "decreasing",
        (true, false) => "nondecreasing",
        (false, true) => "nonincreasing",
        _ => "mixed",
    }
}
