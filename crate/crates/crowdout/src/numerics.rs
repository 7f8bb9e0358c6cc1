//! Quadrature and scalar root finding.
//!
//! Two composite rules over equal-width panels: 5-point Gauss-Legendre
//! (exact through degree 9 per panel, the default) and Simpson (each panel
//! split into two subintervals, so the subinterval count is always even).
//! The root finder is a secant method safeguarded by bisection: every step
//! stays inside a sign-change bracket, so convergence is guaranteed for
//! continuous integrands.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadKind {
    GaussLegendre5,
    Simpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureRule {
    pub kind: QuadKind,
    pub panels: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule { kind: QuadKind::GaussLegendre5, panels: 256 }
    }
}

impl QuadratureRule {
    pub fn gauss(panels: usize) -> Self {
        QuadratureRule { kind: QuadKind::GaussLegendre5, panels }
    }

    pub fn simpson(panels: usize) -> Self {
        QuadratureRule { kind: QuadKind::Simpson, panels }
    }

    pub fn with_panels(&self, panels: usize) -> Self {
        QuadratureRule { kind: self.kind, panels }
    }
}

// 5-point Gauss-Legendre abscissae/weights on [-1, 1].
const GL5_NODES: [f64; 5] =
    [-0.906179845938664, -0.5384693101056831, 0.0, 0.5384693101056831, 0.906179845938664];
const GL5_WEIGHTS: [f64; 5] = [
    0.23692688505618908,
    0.47862867049936647,
    0.5688888888888889,
    0.47862867049936647,
    0.23692688505618908,
];

/// Integrate `f` over `[a, b]`. Errors if the interval is degenerate or `f`
/// returns a non-finite value (the error names the abscissa).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::validation(
            "interval",
            format!("quadrature needs finite a < b (got [{a}, {b}])"),
        ));
    }
    if rule.panels == 0 {
        return Err(Error::validation("panels", "quadrature needs at least one panel"));
    }
    let eval = |t: f64| -> Result<f64> {
        let y = f(t);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFiniteEvaluation { at: t })
        }
    };
    let width = (b - a) / rule.panels as f64;
    let mut total = 0.0;
    match rule.kind {
        QuadKind::GaussLegendre5 => {
            let half = width / 2.0;
            for p in 0..rule.panels {
                let mid = a + (p as f64 + 0.5) * width;
                let mut acc = 0.0;
                for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
                    acc += w * eval(mid + half * x)?;
                }
                total += half * acc;
            }
        }
        QuadKind::Simpson => {
            let h = width / 2.0;
            for p in 0..rule.panels {
                let left = a + p as f64 * width;
                let acc = eval(left)? + 4.0 * eval(left + h)? + eval(left + width)?;
                total += h / 3.0 * acc;
            }
        }
    }
    Ok(total)
}

/// Value at the configured panel count together with the absolute change
/// when the panel count is doubled; the change is a practical error estimate.
pub fn convergence_check(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rule: &QuadratureRule,
) -> Result<(f64, f64)> {
    let coarse = integrate(&f, a, b, rule)?;
    let fine = integrate(&f, a, b, &rule.with_panels(rule.panels * 2))?;
    Ok((coarse, (coarse - fine).abs()))
}

/// Integrate uniformly sampled values with spacing `step`: composite Simpson,
/// with a 3/8 block on the last three intervals when the interval count is
/// odd, and a single trapezoid for two points.
pub fn integrate_samples(values: &[f64], step: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::validation("samples", "need at least 2 samples to integrate"));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::validation("step", format!("must be positive (got {step})")));
    }
    let n = values.len();
    let intervals = n - 1;
    if n == 2 {
        return Ok(step / 2.0 * (values[0] + values[1]));
    }
    let (simpson_intervals, tail) =
        if intervals.is_multiple_of(2) { (intervals, 0) } else { (intervals - 3, 3) };
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 <= simpson_intervals {
        total += step / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
        i += 2;
    }
    if tail == 3 {
        let j = n - 4;
        total += 3.0 * step / 8.0
            * (values[j] + 3.0 * values[j + 1] + 3.0 * values[j + 2] + values[j + 3]);
    }
    Ok(total)
}

/// Sum with pairwise reduction; deterministic and more accurate than a naive
/// left-to-right loop for large inputs.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

// ---------------------------------------------------------------------------
// root finding
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct RootConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: u32,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig { abs_tol: 1e-12, rel_tol: 1e-12, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RootResult {
    pub root: f64,
    pub residual: f64,
    pub iterations: u32,
}

/// Find a root of `g` on `[lo, hi]`, which must bracket a sign change.
///
/// Secant steps are taken where they fall strictly inside the current
/// bracket and bisection is used otherwise. Converged when the bracket
/// width drops below `abs_tol + rel_tol * |root|` or `g` hits exactly zero.
pub fn find_root(
    mut g: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    cfg: &RootConfig,
) -> Result<RootResult> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::validation(
            "bracket",
            format!("root finding needs finite lo < hi (got [{lo}, {hi}])"),
        ));
    }
    let mut a = lo;
    let mut b = hi;
    let mut fa = g(a)?;
    if fa == 0.0 {
        return Ok(RootResult { root: a, residual: 0.0, iterations: 0 });
    }
    let fb = g(b)?;
    if fb == 0.0 {
        return Ok(RootResult { root: b, residual: 0.0, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo, hi, g_lo: fa, g_hi: fb });
    }

    // previous iterate for the secant step; start from the endpoints
    let (mut x_prev, mut f_prev) = (a, fa);
    let (mut x_curr, mut f_curr) = (b, fb);

    for iteration in 1..=cfg.max_iter {
        let secant = {
            let denom = f_curr - f_prev;
            if denom == 0.0 {
                f64::NAN
            } else {
                x_curr - f_curr * (x_curr - x_prev) / denom
            }
        };
        // Bisection step unless the secant proposal is usable.
        let x =
            if secant.is_finite() && secant > a && secant < b { secant } else { a + (b - a) / 2.0 };
        let fx = g(x)?;
        (x_prev, f_prev) = (x_curr, f_curr);
        (x_curr, f_curr) = (x, fx);
        if fx == 0.0 {
            return Ok(RootResult { root: x, residual: 0.0, iterations: iteration });
        }
        if fx.signum() == fa.signum() {
            (a, fa) = (x, fx);
        } else {
            b = x;
        }
        if b - a <= cfg.abs_tol + cfg.rel_tol * x.abs() {
            return Ok(RootResult { root: x, residual: fx, iterations: iteration });
        }
    }
    Err(Error::MaxIterExceeded { max_iter: cfg.max_iter, width: b - a })
}

/// Number of sign changes over consecutive nonzero samples of `g` at
/// `n_intervals + 1` equally spaced points.
pub fn count_sign_changes(
    mut g: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    n_intervals: usize,
) -> Result<usize> {
    let mut crossings = 0usize;
    let mut last_sign = 0.0;
    for i in 0..=n_intervals {
        let t = lo + (hi - lo) * i as f64 / n_intervals as f64;
        let sign = g(t)?.signum();
        if sign != 0.0 {
            if last_sign != 0.0 && sign != last_sign {
                crossings += 1;
            }
            last_sign = sign;
        }
    }
    Ok(crossings)
}
