//! Bracketing root finder, damped fixed-point iteration and Gauss–Legendre
//! rules shared by the solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid("bracket", format!("need finite lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Bracket { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Outcome of a root or fixed-point solve.
///
/// For bisection `residual` is the width of the final bracket and
/// `f_value` is `f(value)`; for fixed points `residual` is `|g(x) - x|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub f_value: f64,
    pub converged: bool,
}

/// Bisection on a sign-changing bracket, stopping once the bracket is no
/// wider than `tol` (or `f` hits zero exactly).
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, bracket: Bracket, tol: f64) -> Result<SolveReport> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tol", format!("must be > 0, got {tol}")));
    }
    let Bracket { mut lo, mut hi } = bracket;
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    if f_lo == 0.0 {
        return Ok(SolveReport { value: lo, iterations: 0, residual: 0.0, f_value: 0.0, converged: true });
    }
    if f_hi == 0.0 {
        return Ok(SolveReport { value: hi, iterations: 0, residual: 0.0, f_value: 0.0, converged: true });
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }

    let mut iterations = 0;
    while hi - lo > tol {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break; // float spacing reached
        }
        iterations += 1;
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(SolveReport { value: mid, iterations, residual: 0.0, f_value: 0.0, converged: true });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let value = lo + 0.5 * (hi - lo);
    let width = hi - lo;
    Ok(SolveReport { value, iterations, residual: width, f_value: f(value), converged: true })
}

/// Damped iteration `x <- (1 - damping) x + damping g(x)` on `[0, 1]`.
///
/// Non-convergence is reported through `converged = false`, not an error.
pub fn fixed_point<G: FnMut(f64) -> f64>(mut g: G, start: f64, damping: f64, tol: f64, max_iter: usize) -> Result<SolveReport> {
    if !(0.0..=1.0).contains(&start) {
        return Err(Error::invalid("start", format!("must lie in [0, 1], got {start}")));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::invalid("damping", format!("must lie in (0, 1], got {damping}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tol", format!("must be > 0, got {tol}")));
    }
    let mut x = start;
    let mut gx = g(x);
    let mut residual = (gx - x).abs();
    let mut iterations = 0;
    while residual > tol && iterations < max_iter {
        x = ((1.0 - damping) * x + damping * gx).clamp(0.0, 1.0);
        gx = g(x);
        residual = (gx - x).abs();
        iterations += 1;
    }
    Ok(SolveReport { value: x, iterations, residual, f_value: gx - x, converged: residual <= tol })
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_linear() {
        let r = bisect(|x| x - 2.0, Bracket::new(0.0, 5.0).unwrap(), 1e-10).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10);
        assert!(r.converged && r.residual <= 1e-10);
    }

    #[test]
    fn bisect_rejects_same_sign() {
        let err = bisect(|x| x * x + 1.0, Bracket::new(-1.0, 1.0).unwrap(), 1e-10).unwrap_err();
        match err {
            Error::NoSignChange { f_lo, f_hi, .. } => {
                assert_eq!(f_lo, 2.0);
                assert_eq!(f_hi, 2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bisect_iteration_bound() {
        for &(lo, hi, tol) in &[(0.0, 5.0, 1e-10), (-3.0, 10.0, 1e-6), (0.0, 1.0, 1e-14)] {
            let r = bisect(|x| x.powi(3) - 0.3, Bracket::new(lo, hi).unwrap(), tol).unwrap();
            let bound = ((hi - lo) / tol).log2().ceil() as usize + 2;
            assert!(r.iterations <= bound, "{} > {bound}", r.iterations);
        }
    }

    #[test]
    fn bracket_must_be_ordered() {
        assert!(Bracket::new(1.0, 1.0).is_err());
        assert!(Bracket::new(2.0, 1.0).is_err());
    }

    #[test]
    fn fixed_point_examples() {
        let c = fixed_point(|_| 0.5, 0.1, 0.5, 1e-12, 200).unwrap();
        assert!(c.converged && (c.value - 0.5).abs() < 1e-12);

        let id = fixed_point(|x| x, 0.37, 0.5, 1e-12, 10).unwrap();
        assert_eq!(id.value, 0.37);
        assert_eq!(id.residual, 0.0);
        assert_eq!(id.iterations, 0);

        // independent oracle: 200 plain iterations of cos
        let mut x: f64 = 0.5;
        for _ in 0..200 {
            x = x.cos();
        }
        let r = fixed_point(f64::cos, 0.5, 1.0, 1e-12, 1000).unwrap();
        assert!(r.converged);
        assert!((r.value - x).abs() < 1e-11);
        assert!((r.value - 0.739_085_133_215_160_6).abs() < 1e-11);
    }

    #[test]
    fn fixed_point_reports_non_convergence() {
        // 2-cycle under undamped iteration
        let r = fixed_point(|x| 1.0 - x, 0.0, 1.0, 1e-12, 50).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 50);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 32, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            // degree 2n-1 monomial integrals on [-1, 1]
            for deg in 0..(2 * n).min(20) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}: {q} vs {exact}");
            }
        }
    }
}
