//! Scenario files: TOML with flat typed sections.
//!
//! ```toml
//! mode = "repeated"
//! seed = 42
//!
//! [params]
//! power = 1.0
//! noise = 0.01
//! cost = 2.0
//!
//! [gains]
//! g12 = 0.6
//! g21 = 0.5
//!
//! [priors]
//! g21 = "uniform(0,1)"
//!
//! [repeated]
//! horizon = 10
//! ```
//!
//! Parsing collects every problem it finds, each tagged with the dotted path
//! of the offending key.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::dist::{ExpectationMethod, GainDistribution, RngSeed, DEFAULT_MC_SAMPLES, DEFAULT_QUADRATURE_ORDER};
use crate::error::Error;
use crate::model::{GameParams, RestrictedAction};
use crate::repeated::RepeatedConfig;
use crate::sequential::require_share_exceeds_cost;
use crate::static_games::{BrUpdate, DEFAULT_BNE_CHECKS};
use crate::two_sided::TwoSidedSettings;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    StaticBr,
    BgiVerify,
    Sbgi,
    Sbgie,
    TwoSided,
    Repeated,
    Sweep,
}

impl Mode {
    pub const ALL: [Mode; 7] =
        [Mode::StaticBr, Mode::BgiVerify, Mode::Sbgi, Mode::Sbgie, Mode::TwoSided, Mode::Repeated, Mode::Sweep];

    pub fn name(self) -> &'static str {
        match self {
            Mode::StaticBr => "static-br",
            Mode::BgiVerify => "bgi-verify",
            Mode::Sbgi => "sbgi",
            Mode::Sbgie => "sbgie",
            Mode::TwoSided => "two-sided",
            Mode::Repeated => "repeated",
            Mode::Sweep => "sweep",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}`; expected one of {}", Mode::ALL.map(Mode::name).join(", ")))
    }
}

/// Candidate strategy checked by `bgi-verify`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BgiCandidate {
    /// Every type plays the same action.
    Constant(RestrictedAction),
    /// Spread iff the self gain exceeds the value, otherwise concentrate in 1.
    SpreadAbove(f64),
}

impl BgiCandidate {
    pub fn action(&self, self_gain: f64) -> RestrictedAction {
        match *self {
            BgiCandidate::Constant(a) => a,
            BgiCandidate::SpreadAbove(x) if self_gain > x => RestrictedAction::Spread,
            BgiCandidate::SpreadAbove(_) => RestrictedAction::Concentrate(1),
        }
    }
}

impl fmt::Display for BgiCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BgiCandidate::Constant(RestrictedAction::Spread) => f.write_str("spread"),
            BgiCandidate::Constant(RestrictedAction::Concentrate(k)) => write!(f, "concentrate:{k}"),
            BgiCandidate::SpreadAbove(x) => write!(f, "spread-above:{x}"),
        }
    }
}

impl FromStr for BgiCandidate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "spread" {
            return Ok(BgiCandidate::Constant(RestrictedAction::Spread));
        }
        if let Some(k) = s.strip_prefix("concentrate:") {
            let k: usize = k.trim().parse().map_err(|_| format!("`{k}` is not a subchannel index"))?;
            return Ok(BgiCandidate::Constant(RestrictedAction::Concentrate(k)));
        }
        if let Some(x) = s.strip_prefix("spread-above:") {
            let x: f64 = x.trim().parse().map_err(|_| format!("`{x}` is not a number"))?;
            return Ok(BgiCandidate::SpreadAbove(x));
        }
        Err(format!("unknown candidate `{s}`; expected `spread`, `concentrate:K` or `spread-above:X`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    G21,
    G12,
    Cost,
    Snr,
    Horizon,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::G21 => "g21",
            SweepVariable::G12 => "g12",
            SweepVariable::Cost => "cost",
            SweepVariable::Snr => "snr",
            SweepVariable::Horizon => "horizon",
        }
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "g21" => Ok(SweepVariable::G21),
            "g12" => Ok(SweepVariable::G12),
            "cost" | "k" => Ok(SweepVariable::Cost),
            "snr" => Ok(SweepVariable::Snr),
            "horizon" => Ok(SweepVariable::Horizon),
            other => Err(format!("cannot sweep `{other}`; expected one of g21, g12, cost, snr, horizon")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub scale: SweepScale,
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.from];
        }
        let n = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let s = i as f64 / n;
                match self.scale {
                    SweepScale::Linear => self.from + s * (self.to - self.from),
                    SweepScale::Log => (self.from.ln() + s * (self.to.ln() - self.from.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GainValues {
    pub g11: Option<f64>,
    pub g12: Option<f64>,
    pub g21: Option<f64>,
    pub g22: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriorSpec {
    pub g11: Option<GainDistribution>,
    pub g12: Option<GainDistribution>,
    pub g21: Option<GainDistribution>,
    pub g22: Option<GainDistribution>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrSection {
    /// Player 1's initial subchannel-1 power; defaults to `P`.
    pub init1: Option<f64>,
    /// Player 2's initial subchannel-1 power; defaults to `0`.
    pub init2: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    pub update: BrUpdate,
}

impl Default for BrSection {
    fn default() -> Self {
        BrSection { init1: None, init2: None, max_iter: 100, tol: 1e-12, update: BrUpdate::Simultaneous }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BgiSection {
    pub candidate: BgiCandidate,
    pub n_check: usize,
}

impl Default for BgiSection {
    fn default() -> Self {
        BgiSection { candidate: BgiCandidate::Constant(RestrictedAction::Spread), n_check: DEFAULT_BNE_CHECKS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectationKind {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericsSection {
    pub expectation: ExpectationKind,
    pub quadrature_order: usize,
    pub mc_samples: usize,
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection {
            expectation: ExpectationKind::Quadrature,
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }
}

impl NumericsSection {
    pub fn method(&self, seed: RngSeed) -> ExpectationMethod {
        match self.expectation {
            ExpectationKind::Quadrature => ExpectationMethod::Quadrature(self.quadrature_order),
            ExpectationKind::MonteCarlo => ExpectationMethod::MonteCarlo { n: self.mc_samples, seed },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub mode: Mode,
    pub seed: u64,
    pub params: GameParams,
    pub gains: GainValues,
    pub priors: PriorSpec,
    pub horizon: Option<u32>,
    /// Extra Monte Carlo runs averaged into the repeated-game summary.
    pub batch_runs: usize,
    pub br: BrSection,
    pub bgi: BgiSection,
    pub two_sided: TwoSidedSettings,
    pub sweep: Option<SweepSpec>,
    pub numerics: NumericsSection,
    pub output_dir: Option<String>,
}

const TOP_KEYS: &[&str] =
    &["mode", "seed", "params", "gains", "priors", "repeated", "br", "bgi", "two_sided", "sweep", "numerics", "output"];
const GAIN_KEYS: &[&str] = &["g11", "g12", "g21", "g22"];

struct Reader {
    errors: Vec<FieldError>,
}

impl Reader {
    fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError::new(path, message));
    }

    fn section<'t>(&mut self, root: &'t Table, name: &str, allowed: &[&str]) -> Option<&'t Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => {
                for key in t.keys() {
                    if !allowed.contains(&key.as_str()) {
                        self.err(format!("{name}.{key}"), format!("unknown key; expected one of {}", allowed.join(", ")));
                    }
                }
                Some(t)
            }
            Some(_) => {
                self.err(name, "must be a table");
                None
            }
        }
    }

    fn float(&mut self, t: Option<&Table>, section: &str, key: &str) -> Option<f64> {
        let path = format!("{section}.{key}");
        match t?.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            Value::String(s) if s.trim() == "inf" => Some(f64::INFINITY),
            _ => {
                self.err(path, "must be a number");
                None
            }
        }
    }

    fn uint(&mut self, t: Option<&Table>, section: &str, key: &str) -> Option<u64> {
        let path = format!("{section}.{key}");
        match t?.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                self.err(path, "must be a nonnegative integer");
                None
            }
        }
    }

    fn string<'t>(&mut self, t: Option<&'t Table>, section: &str, key: &str) -> Option<&'t str> {
        let path = format!("{section}.{key}");
        match t?.get(key)? {
            Value::String(s) => Some(s.as_str()),
            _ => {
                self.err(path, "must be a string");
                None
            }
        }
    }

    fn parsed<T: FromStr<Err = String>>(&mut self, t: Option<&Table>, section: &str, key: &str) -> Option<T> {
        let s = self.string(t, section, key)?;
        match s.parse() {
            Ok(v) => Some(v),
            Err(e) => {
                self.err(format!("{section}.{key}"), e);
                None
            }
        }
    }

    fn require<T>(&mut self, v: Option<T>, path: &str, why: &str) -> Option<T> {
        // a value that failed to parse is already reported
        if v.is_none() && !self.errors.iter().any(|e| e.path == path) {
            self.err(path, format!("required {why}"));
        }
        v
    }

    /// Records a domain error under the key it names.
    fn domain(&mut self, section: &str, e: Error) {
        match e {
            Error::InvalidParameter { name, reason } => self.err(format!("{section}.{name}"), reason),
            other => self.err(section, other.to_string()),
        }
    }
}

/// Parses and validates a scenario, returning every problem found.
pub fn parse_scenario(text: &str) -> Result<Scenario, Vec<FieldError>> {
    let root: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => return Err(vec![FieldError::new("", format!("not a valid TOML document: {}", e.message()))]),
    };
    let mut r = Reader { errors: Vec::new() };
    for key in root.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            r.err(key.as_str(), format!("unknown key; expected one of {}", TOP_KEYS.join(", ")));
        }
    }

    let mode = match root.get("mode") {
        Some(Value::String(s)) => match s.parse::<Mode>() {
            Ok(m) => Some(m),
            Err(e) => {
                r.err("mode", e);
                None
            }
        },
        Some(_) => {
            r.err("mode", "must be a string");
            None
        }
        None => {
            r.err("mode", "required");
            None
        }
    };
    let seed = match root.get("seed") {
        Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
        Some(Value::String(s)) => match s.trim().parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                r.err("seed", "must be a nonnegative 64-bit integer");
                None
            }
        },
        Some(_) => {
            r.err("seed", "must be a nonnegative 64-bit integer");
            None
        }
        None => {
            r.err("seed", "required");
            None
        }
    };

    let params_t = r.section(&root, "params", &["power", "noise", "subchannels", "cost"]);
    if params_t.is_none() && !root.contains_key("params") {
        r.err("params", "required section");
    }
    let power = r.float(params_t, "params", "power");
    let power = r.require(power, "params.power", "");
    let noise = r.float(params_t, "params", "noise");
    let noise = r.require(noise, "params.noise", "");
    let subchannels = r.uint(params_t, "params", "subchannels").unwrap_or(2) as usize;
    let cost = r.float(params_t, "params", "cost").unwrap_or(0.0);
    let params = match (power, noise) {
        (Some(p), Some(n)) => {
            let params = GameParams { power: p, noise: n, subchannels, cost };
            match params.validate() {
                Ok(()) => Some(params),
                Err(e) => {
                    r.domain("params", e);
                    None
                }
            }
        }
        _ => {
            // still report range problems on what was given
            if subchannels == 0 {
                r.err("params.subchannels", "must be at least 1");
            }
            None
        }
    };

    let gains_t = r.section(&root, "gains", GAIN_KEYS);
    let mut gains = GainValues::default();
    for (slot, key) in [&mut gains.g11, &mut gains.g12, &mut gains.g21, &mut gains.g22].into_iter().zip(GAIN_KEYS) {
        *slot = r.float(gains_t, "gains", key);
        if let Some(g) = *slot {
            if !(g.is_finite() && g >= 0.0) {
                r.err(format!("gains.{key}"), format!("must be finite and >= 0, got {g}"));
            }
        }
    }

    let priors_t = r.section(&root, "priors", GAIN_KEYS);
    let mut priors = PriorSpec::default();
    for (slot, key) in [&mut priors.g11, &mut priors.g12, &mut priors.g21, &mut priors.g22].into_iter().zip(GAIN_KEYS) {
        if let Some(s) = r.string(priors_t, "priors", key) {
            match s.parse::<GainDistribution>() {
                Ok(d) => *slot = Some(d),
                Err(Error::InvalidParameter { reason, .. }) => r.err(format!("priors.{key}"), reason),
                Err(e) => r.err(format!("priors.{key}"), e.to_string()),
            }
        }
    }

    let rep_t = r.section(&root, "repeated", &["horizon", "batch_runs"]);
    let horizon = r.uint(rep_t, "repeated", "horizon").and_then(|h| match u32::try_from(h) {
        Ok(h) if h >= 1 => Some(h),
        _ => {
            r.err("repeated.horizon", format!("must lie in 1..={}", u32::MAX));
            None
        }
    });
    let batch_runs = r.uint(rep_t, "repeated", "batch_runs").unwrap_or(0) as usize;

    let br_t = r.section(&root, "br", &["init1", "init2", "max_iter", "tol", "update"]);
    let mut br = BrSection { init1: r.float(br_t, "br", "init1"), init2: r.float(br_t, "br", "init2"), ..BrSection::default() };
    if let Some(n) = r.uint(br_t, "br", "max_iter") {
        br.max_iter = n as usize;
    }
    if let Some(t) = r.float(br_t, "br", "tol") {
        br.tol = t;
    }
    if let Some(u) = r.string(br_t, "br", "update") {
        match u {
            "simultaneous" => br.update = BrUpdate::Simultaneous,
            "sequential" => br.update = BrUpdate::Sequential,
            other => r.err("br.update", format!("unknown update `{other}`; expected simultaneous or sequential")),
        }
    }
    if br.tol.is_nan() || br.tol <= 0.0 {
        r.err("br.tol", "must be > 0");
    }
    if let Some(p) = params {
        for (key, v) in [("init1", br.init1), ("init2", br.init2)] {
            if let Some(v) = v {
                if !(0.0..=p.power).contains(&v) {
                    r.err(format!("br.{key}"), format!("must lie in [0, {}], got {v}", p.power));
                }
            }
        }
    }

    let bgi_t = r.section(&root, "bgi", &["candidate", "n_check"]);
    let mut bgi = BgiSection::default();
    if let Some(c) = r.parsed::<BgiCandidate>(bgi_t, "bgi", "candidate") {
        bgi.candidate = c;
    }
    if let Some(n) = r.uint(bgi_t, "bgi", "n_check") {
        bgi.n_check = n as usize;
    }
    if bgi.n_check == 0 {
        r.err("bgi.n_check", "must be at least 1");
    }
    if let (Some(p), BgiCandidate::Constant(a)) = (params, bgi.candidate) {
        if let Err(e) = a.validate(&p) {
            r.err("bgi.candidate", e.to_string());
        }
    }

    let ts_t = r.section(&root, "two_sided", &["damping", "tol", "max_iter", "scan_points"]);
    let mut two_sided = TwoSidedSettings::default();
    if let Some(x) = r.float(ts_t, "two_sided", "damping") {
        two_sided.damping = x;
    }
    if let Some(x) = r.float(ts_t, "two_sided", "tol") {
        two_sided.tol = x;
    }
    if let Some(n) = r.uint(ts_t, "two_sided", "max_iter") {
        two_sided.max_iter = n as usize;
    }
    if let Some(n) = r.uint(ts_t, "two_sided", "scan_points") {
        two_sided.scan_points = n as usize;
    }
    if !(two_sided.damping > 0.0 && two_sided.damping <= 1.0) {
        r.err("two_sided.damping", "must lie in (0, 1]");
    }
    if two_sided.tol.is_nan() || two_sided.tol <= 0.0 {
        r.err("two_sided.tol", "must be > 0");
    }
    if two_sided.scan_points == 0 {
        r.err("two_sided.scan_points", "must be at least 1");
    }

    let sweep_t = r.section(&root, "sweep", &["variable", "from", "to", "points", "scale"]);
    let sweep = sweep_t.and_then(|_| {
        if let Some(Value::Array(_)) = sweep_t.and_then(|t| t.get("variable")) {
            r.err("sweep.variable", "only one variable can be swept");
            return None;
        }
        let variable = r.parsed::<SweepVariable>(sweep_t, "sweep", "variable");
        let variable = r.require(variable, "sweep.variable", "");
        let from = r.float(sweep_t, "sweep", "from");
        let from = r.require(from, "sweep.from", "");
        let to = r.float(sweep_t, "sweep", "to");
        let to = r.require(to, "sweep.to", "");
        let points = r.uint(sweep_t, "sweep", "points");
        let points = r.require(points, "sweep.points", "")? as usize;
        let scale = match r.string(sweep_t, "sweep", "scale").unwrap_or("linear") {
            "linear" => SweepScale::Linear,
            "log" => SweepScale::Log,
            other => {
                r.err("sweep.scale", format!("unknown scale `{other}`; expected linear or log"));
                SweepScale::Linear
            }
        };
        let (variable, from, to) = (variable?, from?, to?);
        if points == 0 {
            r.err("sweep.points", "must be at least 1");
        }
        if !(from.is_finite() && to.is_finite()) {
            r.err("sweep", "from and to must be finite");
        } else if scale == SweepScale::Log && !(from > 0.0 && to > 0.0) {
            r.err("sweep", "a log grid needs from > 0 and to > 0");
        }
        let lower = match variable {
            SweepVariable::Snr => Some(0.0),
            SweepVariable::Horizon => Some(1.0),
            _ => None,
        };
        let bad_low = match lower {
            Some(l) if variable == SweepVariable::Horizon => from.min(to) < l,
            Some(l) => from.min(to) <= l,
            None => from.min(to) < 0.0,
        };
        if bad_low {
            r.err("sweep.from", format!("values out of range for `{}`", variable.name()));
        }
        Some(SweepSpec { variable, from, to, points, scale })
    });

    let num_t = r.section(&root, "numerics", &["expectation", "quadrature_order", "mc_samples"]);
    let mut numerics = NumericsSection::default();
    if let Some(s) = r.string(num_t, "numerics", "expectation") {
        match s {
            "quadrature" => numerics.expectation = ExpectationKind::Quadrature,
            "monte-carlo" => numerics.expectation = ExpectationKind::MonteCarlo,
            other => r.err("numerics.expectation", format!("unknown method `{other}`; expected quadrature or monte-carlo")),
        }
    }
    if let Some(n) = r.uint(num_t, "numerics", "quadrature_order") {
        numerics.quadrature_order = n as usize;
    }
    if let Some(n) = r.uint(num_t, "numerics", "mc_samples") {
        numerics.mc_samples = n as usize;
    }
    if numerics.quadrature_order == 0 {
        r.err("numerics.quadrature_order", "must be at least 1");
    }
    if numerics.mc_samples == 0 {
        r.err("numerics.mc_samples", "must be at least 1");
    }

    let out_t = r.section(&root, "output", &["dir"]);
    let output_dir = r.string(out_t, "output", "dir").map(str::to_owned);

    if let (Some(mode), Some(params)) = (mode, params) {
        check_mode(&mut r, mode, &params, &gains, &priors, horizon, sweep.as_ref(), seed.unwrap_or(0));
    }

    if !r.errors.is_empty() {
        return Err(r.errors);
    }
    Ok(Scenario {
        mode: mode.expect("checked"),
        seed: seed.expect("checked"),
        params: params.expect("checked"),
        gains,
        priors,
        horizon,
        batch_runs,
        br,
        bgi,
        two_sided,
        sweep,
        numerics,
        output_dir,
    })
}

#[allow(clippy::too_many_arguments)]
fn check_mode(
    r: &mut Reader,
    mode: Mode,
    params: &GameParams,
    gains: &GainValues,
    priors: &PriorSpec,
    horizon: Option<u32>,
    sweep: Option<&SweepSpec>,
    seed: u64,
) {
    let needs_two = matches!(mode, Mode::StaticBr | Mode::Sbgi | Mode::Sbgie | Mode::TwoSided | Mode::Repeated | Mode::Sweep);
    if needs_two && params.subchannels != 2 {
        r.err("params.subchannels", format!("mode `{}` needs 2 subchannels, got {}", mode.name(), params.subchannels));
    }
    let why = format!("by mode `{}`", mode.name());
    match mode {
        Mode::StaticBr => {
            r.require(priors.g11.as_ref(), "priors.g11", &why);
            r.require(priors.g12.as_ref(), "priors.g12", &why);
            r.require(priors.g21.as_ref(), "priors.g21", &why);
            r.require(priors.g22.as_ref(), "priors.g22", &why);
            for (key, p) in [("g11", &priors.g11), ("g12", &priors.g12), ("g21", &priors.g21), ("g22", &priors.g22)] {
                if let Some(p) = p {
                    if !p.is_bounded() {
                        r.err(format!("priors.{key}"), "quadrature needs a bounded support");
                    }
                }
            }
        }
        Mode::BgiVerify => {
            r.require(priors.g11.as_ref(), "priors.g11", &format!("{why} (self gain)"));
            r.require(priors.g21.as_ref(), "priors.g21", &format!("{why} (incident gain)"));
        }
        Mode::Sbgi => {
            r.require(gains.g12, "gains.g12", &why);
            r.require(gains.g21, "gains.g21", &why);
        }
        Mode::Sbgie => {
            r.require(gains.g12, "gains.g12", &why);
            r.require(gains.g21, "gains.g21", &why);
            r.require(priors.g21.as_ref(), "priors.g21", &why);
            if let Err(e) = require_share_exceeds_cost(params) {
                r.err("params.cost", e.to_string());
            }
        }
        Mode::TwoSided => {
            r.require(priors.g12.as_ref(), "priors.g12", &why);
            r.require(priors.g21.as_ref(), "priors.g21", &why);
        }
        Mode::Repeated => {
            let g12 = r.require(gains.g12, "gains.g12", &why);
            let g21 = r.require(gains.g21, "gains.g21", &why);
            let prior = r.require(priors.g21.as_ref(), "priors.g21", &why);
            let horizon = r.require(horizon, "repeated.horizon", &why);
            if let (Some(g12), Some(g21), Some(prior), Some(horizon)) = (g12, g21, prior, horizon) {
                let config = RepeatedConfig { horizon, params: *params, g12, g21, prior_g21: prior.clone(), seed: RngSeed(seed) };
                if let Err(e) = config.validate() {
                    match e {
                        Error::InvalidParameter { name: "prior_g21", reason } => r.err("priors.g21", reason),
                        Error::InvalidParameter { name: "horizon", reason } => r.err("repeated.horizon", reason),
                        Error::InvalidParameter { name: n @ ("g12" | "g21"), reason } => r.err(format!("gains.{n}"), reason),
                        Error::Assumption(m) => r.err("params.cost", m),
                        other => r.domain("params", other),
                    }
                }
            }
        }
        Mode::Sweep => {
            let Some(spec) = r.require(sweep, "sweep", &why) else { return };
            if spec.variable != SweepVariable::G12 {
                r.require(gains.g12, "gains.g12", &why);
            }
            if spec.variable != SweepVariable::G21 {
                r.require(gains.g21, "gains.g21", &why);
            }
            if spec.variable == SweepVariable::Horizon {
                r.require(priors.g21.as_ref(), "priors.g21", "when sweeping the horizon");
            }
        }
    }
}

impl Scenario {
    /// Canonical TOML text; parsing it gives back an equal scenario.
    pub fn to_toml_string(&self) -> String {
        let mut root = Table::new();
        root.insert("mode".into(), Value::String(self.mode.name().into()));
        root.insert(
            "seed".into(),
            match i64::try_from(self.seed) {
                Ok(s) => Value::Integer(s),
                Err(_) => Value::String(self.seed.to_string()),
            },
        );

        let mut params = Table::new();
        params.insert("power".into(), Value::Float(self.params.power));
        params.insert("noise".into(), Value::Float(self.params.noise));
        params.insert("subchannels".into(), Value::Integer(self.params.subchannels as i64));
        params.insert("cost".into(), Value::Float(self.params.cost));
        root.insert("params".into(), Value::Table(params));

        let mut gains = Table::new();
        for (key, v) in GAIN_KEYS.iter().zip([self.gains.g11, self.gains.g12, self.gains.g21, self.gains.g22]) {
            if let Some(v) = v {
                gains.insert((*key).into(), Value::Float(v));
            }
        }
        if !gains.is_empty() {
            root.insert("gains".into(), Value::Table(gains));
        }

        let mut priors = Table::new();
        for (key, p) in GAIN_KEYS.iter().zip([&self.priors.g11, &self.priors.g12, &self.priors.g21, &self.priors.g22]) {
            if let Some(p) = p {
                priors.insert((*key).into(), Value::String(p.to_string()));
            }
        }
        if !priors.is_empty() {
            root.insert("priors".into(), Value::Table(priors));
        }

        let mut rep = Table::new();
        if let Some(h) = self.horizon {
            rep.insert("horizon".into(), Value::Integer(h as i64));
        }
        rep.insert("batch_runs".into(), Value::Integer(self.batch_runs as i64));
        root.insert("repeated".into(), Value::Table(rep));

        let mut br = Table::new();
        if let Some(v) = self.br.init1 {
            br.insert("init1".into(), Value::Float(v));
        }
        if let Some(v) = self.br.init2 {
            br.insert("init2".into(), Value::Float(v));
        }
        br.insert("max_iter".into(), Value::Integer(self.br.max_iter as i64));
        br.insert("tol".into(), Value::Float(self.br.tol));
        let update = match self.br.update {
            BrUpdate::Simultaneous => "simultaneous",
            BrUpdate::Sequential => "sequential",
        };
        br.insert("update".into(), Value::String(update.into()));
        root.insert("br".into(), Value::Table(br));

        let mut bgi = Table::new();
        bgi.insert("candidate".into(), Value::String(self.bgi.candidate.to_string()));
        bgi.insert("n_check".into(), Value::Integer(self.bgi.n_check as i64));
        root.insert("bgi".into(), Value::Table(bgi));

        let mut ts = Table::new();
        ts.insert("damping".into(), Value::Float(self.two_sided.damping));
        ts.insert("tol".into(), Value::Float(self.two_sided.tol));
        ts.insert("max_iter".into(), Value::Integer(self.two_sided.max_iter as i64));
        ts.insert("scan_points".into(), Value::Integer(self.two_sided.scan_points as i64));
        root.insert("two_sided".into(), Value::Table(ts));

        if let Some(s) = &self.sweep {
            let mut sw = Table::new();
            sw.insert("variable".into(), Value::String(s.variable.name().into()));
            sw.insert("from".into(), Value::Float(s.from));
            sw.insert("to".into(), Value::Float(s.to));
            sw.insert("points".into(), Value::Integer(s.points as i64));
            let scale = match s.scale {
                SweepScale::Linear => "linear",
                SweepScale::Log => "log",
            };
            sw.insert("scale".into(), Value::String(scale.into()));
            root.insert("sweep".into(), Value::Table(sw));
        }

        let mut num = Table::new();
        let kind = match self.numerics.expectation {
            ExpectationKind::Quadrature => "quadrature",
            ExpectationKind::MonteCarlo => "monte-carlo",
        };
        num.insert("expectation".into(), Value::String(kind.into()));
        num.insert("quadrature_order".into(), Value::Integer(self.numerics.quadrature_order as i64));
        num.insert("mc_samples".into(), Value::Integer(self.numerics.mc_samples as i64));
        root.insert("numerics".into(), Value::Table(num));

        if let Some(dir) = &self.output_dir {
            let mut out = Table::new();
            out.insert("dir".into(), Value::String(dir.clone()));
            root.insert("output".into(), Value::Table(out));
        }

        toml::to_string(&root).expect("scenario tables always serialise")
    }
}
