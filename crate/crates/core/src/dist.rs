//! Priors over channel gains: cdf queries, seeded sampling and expectations
//! by tensor Gauss–Legendre quadrature or Monte Carlo.
//!
//! Sampling uses ChaCha20 seeded through `SeedableRng::seed_from_u64`, which
//! is specified bit-for-bit by `rand_core` and therefore portable across
//! platforms. Independent streams are derived from a master seed with
//! [`RngSeed::derive`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::gauss_legendre;

pub const DEFAULT_QUADRATURE_ORDER: usize = 32;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.0)
    }

    /// Child seed for stream `index`: one SplitMix64 step applied to
    /// `seed + (index + 1) * 0x9E3779B97F4A7C15`.
    pub fn derive(self, index: u64) -> RngSeed {
        let mut z = self.0.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

/// Prior over a single (nonnegative) channel gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GainDistribution {
    Uniform { lo: f64, hi: f64 },
    /// Exponential with the given rate, truncated to `[lo, hi]`; `hi` may be infinite.
    TruncatedExponential { rate: f64, lo: f64, hi: f64 },
    PointMass(f64),
    Discrete { values: Vec<f64>, weights: Vec<f64> },
}

fn finite_nonneg(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {x}")))
    }
}

impl GainDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        finite_nonneg("lo", lo)?;
        finite_nonneg("hi", hi)?;
        if lo >= hi {
            return Err(Error::invalid("uniform", format!("lo ({lo}) must be < hi ({hi})")));
        }
        Ok(GainDistribution::Uniform { lo, hi })
    }

    pub fn truncated_exponential(rate: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::invalid("rate", format!("must be finite and > 0, got {rate}")));
        }
        finite_nonneg("lo", lo)?;
        if hi.is_nan() || hi <= lo {
            return Err(Error::invalid("texp", format!("lo ({lo}) must be < hi ({hi})")));
        }
        Ok(GainDistribution::TruncatedExponential { rate, lo, hi })
    }

    pub fn point(value: f64) -> Result<Self> {
        finite_nonneg("point", value)?;
        Ok(GainDistribution::PointMass(value))
    }

    pub fn discrete(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::invalid("discrete", "needs matching, non-empty value and weight lists"));
        }
        for &v in &values {
            finite_nonneg("discrete value", v)?;
        }
        for &w in &weights {
            finite_nonneg("discrete weight", w)?;
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::invalid("discrete", format!("weights sum to {total}, not 1")));
        }
        Ok(GainDistribution::Discrete { values, weights })
    }

    /// Closed support `[lo, hi]` (hi may be infinite).
    pub fn support(&self) -> (f64, f64) {
        match self {
            GainDistribution::Uniform { lo, hi } | GainDistribution::TruncatedExponential { lo, hi, .. } => (*lo, *hi),
            GainDistribution::PointMass(v) => (*v, *v),
            GainDistribution::Discrete { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.support().1.is_finite()
    }

    /// `P(g <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self {
            GainDistribution::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            GainDistribution::TruncatedExponential { rate, lo, hi } => {
                if x <= *lo {
                    0.0
                } else if x >= *hi {
                    1.0
                } else {
                    let mass = -(-rate * (hi - lo)).exp_m1();
                    (-(-rate * (x - lo)).exp_m1() / mass).clamp(0.0, 1.0)
                }
            }
            GainDistribution::PointMass(v) => {
                if x >= *v {
                    1.0
                } else {
                    0.0
                }
            }
            GainDistribution::Discrete { values, weights } => values
                .iter()
                .zip(weights)
                .filter(|(v, _)| **v <= x)
                .map(|(_, w)| w)
                .sum::<f64>()
                .min(1.0),
        }
    }

    /// Density for the continuous families; `None` for atoms.
    pub fn pdf(&self, x: f64) -> Option<f64> {
        match self {
            GainDistribution::Uniform { lo, hi } => Some(if x >= *lo && x <= *hi { 1.0 / (hi - lo) } else { 0.0 }),
            GainDistribution::TruncatedExponential { rate, lo, hi } => {
                if x < *lo || x > *hi {
                    return Some(0.0);
                }
                let mass = -(-rate * (hi - lo)).exp_m1();
                Some(rate * (-rate * (x - lo)).exp() / mass)
            }
            GainDistribution::PointMass(_) | GainDistribution::Discrete { .. } => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            GainDistribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            GainDistribution::TruncatedExponential { rate, lo, hi } => {
                if hi.is_infinite() {
                    lo + 1.0 / rate
                } else {
                    let w = hi - lo;
                    let tail = (-rate * w).exp();
                    lo + 1.0 / rate - w * tail / (1.0 - tail)
                }
            }
            GainDistribution::PointMass(v) => *v,
            GainDistribution::Discrete { values, weights } => values.iter().zip(weights).map(|(v, w)| v * w).sum(),
        }
    }

    /// Inverse cdf at `u` in `[0, 1)`.
    fn quantile(&self, u: f64) -> f64 {
        match self {
            GainDistribution::Uniform { lo, hi } => lo + (hi - lo) * u,
            GainDistribution::TruncatedExponential { rate, lo, hi } => {
                let mass = -(-rate * (hi - lo)).exp_m1();
                lo - (-u * mass).ln_1p() / rate
            }
            GainDistribution::PointMass(v) => *v,
            GainDistribution::Discrete { values, weights } => {
                let mut acc = 0.0;
                for (v, w) in values.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("discrete prior is non-empty")
            }
        }
    }

    pub fn sample(&self, seed: RngSeed, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid("n", "sample size must be at least 1"));
        }
        let mut rng = seed.rng();
        Ok(self.sample_with(&mut rng, n))
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.quantile(rng.gen::<f64>())).collect()
    }

    /// Quadrature nodes and weights (weights sum to 1).
    fn nodes(&self, order: usize) -> Result<Vec<(f64, f64)>> {
        match self {
            GainDistribution::PointMass(v) => Ok(vec![(*v, 1.0)]),
            GainDistribution::Discrete { values, weights } => {
                Ok(values.iter().copied().zip(weights.iter().copied()).collect())
            }
            GainDistribution::Uniform { lo, hi } => Ok(mapped_rule(*lo, *hi, order, |_| 1.0 / (hi - lo))),
            GainDistribution::TruncatedExponential { lo, hi, .. } => {
                if !hi.is_finite() {
                    return Err(Error::UnboundedSupport(self.to_string()));
                }
                let pdf = |x: f64| self.pdf(x).unwrap_or(0.0);
                Ok(mapped_rule(*lo, *hi, order, pdf))
            }
        }
    }
}

fn mapped_rule(lo: f64, hi: f64, order: usize, density: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    x.iter()
        .zip(&w)
        .map(|(&t, &wt)| {
            let g = mid + half * t;
            (g, wt * half * density(g))
        })
        .collect()
}

impl fmt::Display for GainDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GainDistribution::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
            GainDistribution::TruncatedExponential { rate, lo, hi } => write!(f, "texp({rate},{lo},{hi})"),
            GainDistribution::PointMass(v) => write!(f, "point({v})"),
            GainDistribution::Discrete { values, weights } => {
                f.write_str("discrete(")?;
                for (i, (v, w)) in values.iter().zip(weights).enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}:{w}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let t = s.trim();
    match t {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => t.parse::<f64>().map_err(|_| Error::invalid("distribution", format!("`{t}` is not a number"))),
    }
}

/// Literal syntax: `uniform(lo,hi)`, `texp(rate,lo,hi)` (hi may be `inf`),
/// `point(v)`, `discrete(v1:w1,v2:w2,...)`.
impl FromStr for GainDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| Error::invalid("distribution", format!("`{s}` is not `name(args)`")))?;
        if !s.ends_with(')') {
            return Err(Error::invalid("distribution", format!("`{s}` is missing a closing parenthesis")));
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let body = &s[open + 1..s.len() - 1];
        let args: Vec<&str> = body.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::invalid("distribution", format!("`{name}` takes {n} arguments, got {}", args.len())))
            }
        };
        match name.as_str() {
            "uniform" => {
                arity(2)?;
                GainDistribution::uniform(parse_number(args[0])?, parse_number(args[1])?)
            }
            "texp" | "truncexp" => {
                arity(3)?;
                GainDistribution::truncated_exponential(parse_number(args[0])?, parse_number(args[1])?, parse_number(args[2])?)
            }
            "point" => {
                arity(1)?;
                GainDistribution::point(parse_number(args[0])?)
            }
            "discrete" => {
                let mut values = Vec::with_capacity(args.len());
                let mut weights = Vec::with_capacity(args.len());
                for a in &args {
                    let (v, w) = a
                        .split_once(':')
                        .ok_or_else(|| Error::invalid("distribution", format!("discrete atom `{a}` is not value:weight")))?;
                    values.push(parse_number(v)?);
                    weights.push(parse_number(w)?);
                }
                GainDistribution::discrete(values, weights)
            }
            other => Err(Error::invalid("distribution", format!("unknown family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExpectationMethod {
    /// Tensor Gauss–Legendre with `order` nodes per continuous dimension.
    Quadrature(usize),
    MonteCarlo { n: usize, seed: RngSeed },
}

impl Default for ExpectationMethod {
    fn default() -> Self {
        ExpectationMethod::Quadrature(DEFAULT_QUADRATURE_ORDER)
    }
}

/// `E[f(g_1, ..., g_m)]` for independent gains `g_j ~ dists[j]`.
pub fn expectation<F>(dists: &[GainDistribution], f: F, method: ExpectationMethod) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    match method {
        ExpectationMethod::Quadrature(order) => {
            if order == 0 {
                return Err(Error::invalid("order", "quadrature order must be at least 1"));
            }
            let rules = dists.iter().map(|d| d.nodes(order)).collect::<Result<Vec<_>>>()?;
            let mut point = vec![0.0; dists.len()];
            Ok(tensor_sum(&rules, 0, 1.0, &mut point, &f))
        }
        ExpectationMethod::MonteCarlo { n, seed } => {
            if n == 0 {
                return Err(Error::invalid("n", "Monte Carlo sample size must be at least 1"));
            }
            let columns = dists
                .iter()
                .enumerate()
                .map(|(j, d)| d.sample(seed.derive(j as u64), n))
                .collect::<Result<Vec<_>>>()?;
            let mut point = vec![0.0; dists.len()];
            let mut acc = 0.0;
            for i in 0..n {
                for (slot, col) in point.iter_mut().zip(&columns) {
                    *slot = col[i];
                }
                acc += f(&point);
            }
            Ok(acc / n as f64)
        }
    }
}

fn tensor_sum<F: Fn(&[f64]) -> f64>(rules: &[Vec<(f64, f64)>], dim: usize, weight: f64, point: &mut [f64], f: &F) -> f64 {
    if dim == rules.len() {
        return weight * f(point);
    }
    let mut acc = 0.0;
    for &(x, w) in &rules[dim] {
        if w == 0.0 {
            continue;
        }
        point[dim] = x;
        acc += tensor_sum(rules, dim + 1, weight * w, point, f);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_cdf() {
        let u = GainDistribution::uniform(0.0, 1.0).unwrap();
        assert_eq!(u.cdf(0.5), 0.5);
        assert_eq!(u.cdf(-1.0), 0.0);
        assert_eq!(u.cdf(2.0), 1.0);
        let gs = 0.090_498_756_211_208_9;
        assert!((u.cdf(gs) - gs).abs() < 1e-16);
    }

    #[test]
    fn cdf_below_support_is_zero() {
        let ds = [
            GainDistribution::uniform(0.2, 0.9).unwrap(),
            GainDistribution::truncated_exponential(2.0, 0.1, f64::INFINITY).unwrap(),
            GainDistribution::point(0.7).unwrap(),
            GainDistribution::discrete(vec![0.3, 0.6], vec![0.25, 0.75]).unwrap(),
        ];
        for d in &ds {
            let (lo, _) = d.support();
            assert_eq!(d.cdf(lo - 1e-9), 0.0, "{d}");
            assert_eq!(d.cdf(1e9), 1.0, "{d}");
        }
    }

    #[test]
    fn point_mass_samples() {
        let d = GainDistribution::point(0.7).unwrap();
        assert_eq!(d.sample(RngSeed(123), 3).unwrap(), vec![0.7, 0.7, 0.7]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = GainDistribution::uniform(0.0, 1.0).unwrap();
        let a = d.sample(RngSeed(9), 50).unwrap();
        let b = d.sample(RngSeed(9), 50).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d.sample(RngSeed(10), 50).unwrap());
    }

    #[test]
    fn zero_samples_rejected() {
        let d = GainDistribution::uniform(0.0, 1.0).unwrap();
        assert!(d.sample(RngSeed(1), 0).is_err());
    }

    #[test]
    fn uniform_sample_mean() {
        let d = GainDistribution::uniform(0.0, 1.0).unwrap();
        let xs = d.sample(RngSeed(2024), 100_000).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn moments_by_quadrature_and_monte_carlo() {
        let u = [GainDistribution::uniform(0.0, 1.0).unwrap()];
        let m1 = expectation(&u, |g| g[0], ExpectationMethod::Quadrature(16)).unwrap();
        assert!((m1 - 0.5).abs() < 1e-12);
        let m2 = expectation(&u, |g| g[0] * g[0], ExpectationMethod::MonteCarlo { n: 1_000_000, seed: RngSeed(5) }).unwrap();
        assert!((m2 - 1.0 / 3.0).abs() < 0.002);
    }

    #[test]
    fn truncated_exponential_mean_matches_quadrature() {
        let d = GainDistribution::truncated_exponential(3.0, 0.1, 2.0).unwrap();
        let q = expectation(std::slice::from_ref(&d), |g| g[0], ExpectationMethod::Quadrature(32)).unwrap();
        assert!((q - d.mean()).abs() < 1e-12);
        let total = expectation(std::slice::from_ref(&d), |_| 1.0, ExpectationMethod::Quadrature(32)).unwrap();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_quadrature_rejected() {
        let d = GainDistribution::truncated_exponential(1.0, 0.0, f64::INFINITY).unwrap();
        assert!(matches!(
            expectation(&[d], |g| g[0], ExpectationMethod::Quadrature(8)),
            Err(Error::UnboundedSupport(_))
        ));
    }

    #[test]
    fn literals_parse_and_print() {
        for lit in ["uniform(0,1)", "texp(2,0.1,inf)", "point(0.7)", "discrete(0.1:0.25,0.4:0.75)"] {
            let d: GainDistribution = lit.parse().unwrap();
            assert_eq!(d.to_string(), lit);
            assert_eq!(d.to_string().parse::<GainDistribution>().unwrap(), d);
        }
        assert!("uniform(1,0)".parse::<GainDistribution>().is_err());
        assert!("discrete(0.1:0.5,0.2:0.4)".parse::<GainDistribution>().is_err());
        assert!("gamma(1,2)".parse::<GainDistribution>().is_err());
        assert!("uniform(0,1".parse::<GainDistribution>().is_err());
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let s = RngSeed(42);
        assert_ne!(s.derive(0), s.derive(1));
        assert_eq!(s.derive(3), s.derive(3));
    }
}
