//! The follower's optimum under herding pressure.
//!
//! Given the multiplier `eta` (the marginal-utility scale of terminal
//! wealth), the follower's investment is a pointwise blend of its own
//! baseline and the leader's,
//!
//! ```text
//! I*(t) = (eta a2 s^2 E(t) + theta) / (eta a1 s^2 E(t) + theta) * I2(t),
//! E(t) = e^{(2-rho) r (T-t)},
//! ```
//!
//! and consumption is linear in time with the same slope as the baseline.
//! `eta` itself solves a scalar fixed-point equation whose right-hand side
//! integrates the investment path, so the solver works in `u = ln eta`
//! space: the residual `u - rhs(u)` tends to -inf/+inf at the ends, a
//! bracket around the herd-free closed form always exists, and the root is
//! polished with the safeguarded secant method.

use crate::baseline;
use crate::crowding;
use crate::error::{Error, Result};
use crate::model::{ControlPath, HerdingScenario, TimeGrid};
use crate::numerics::{self, QuadratureRule, RootConfig};

/// Blend factor between the leader's baseline investment (ratio 1, reached
/// as `theta -> inf`) and the follower's own baseline (ratio `a2/a1`,
/// reached at `theta = 0` or `eta -> inf`).
pub fn herding_ratio(s: &HerdingScenario, eta: f64, t: f64) -> f64 {
    let theta = s.herd_strength;
    let a1 = s.follower.risk_aversion;
    let a2 = s.leader.risk_aversion;
    if theta == 0.0 {
        return a2 / a1;
    }
    let m = &s.market;
    let e = ((2.0 - m.discount_scale) * m.rate * (m.horizon - t)).exp();
    let s2 = m.volatility * m.volatility;
    // Scale numerator and denominator so neither overflows: by 1/theta for
    // small eta, by 1/eta for large eta.
    if eta <= 1.0 {
        let x = eta * s2 * e / theta;
        (x * a2 + 1.0) / (x * a1 + 1.0)
    } else {
        let y = theta / eta;
        (a2 * s2 * e + y) / (a1 * s2 * e + y)
    }
}

/// `I*(t)` given the multiplier.
pub fn optimal_investment(s: &HerdingScenario, eta: f64, t: f64) -> f64 {
    herding_ratio(s, eta, t) * baseline::investment(&s.market, &s.leader, t)
}

/// `I*(t)` minus the follower's baseline investment, in a cancellation-free
/// form carrying an explicit `theta` factor: exactly zero at `theta = 0`
/// and exactly zero when the households share one risk aversion.
pub fn investment_deviation(s: &HerdingScenario, eta: f64, t: f64) -> f64 {
    let theta = s.herd_strength;
    if theta == 0.0 {
        return 0.0;
    }
    let a1 = s.follower.risk_aversion;
    let a2 = s.leader.risk_aversion;
    let m = &s.market;
    let e = ((2.0 - m.discount_scale) * m.rate * (m.horizon - t)).exp();
    let s2 = m.volatility * m.volatility;
    theta * (a1 - a2) / (a1 * (eta * a1 * s2 * e + theta))
        * baseline::investment(&s.market, &s.leader, t)
}

/// Residual of the fixed-point equation for `u = ln eta`.
///
/// The right-hand side folds the pointwise consumption condition back into
/// the definition of the multiplier; its two path integrals (`A I*` and
/// `A^2 I*^2` with `A(t) = e^{r(T-t)}`) are evaluated with the supplied
/// quadrature rule at the rule's own abscissae.
pub fn eta_residual(s: &HerdingScenario, u: f64, rule: &QuadratureRule) -> Result<f64> {
    let m = &s.market;
    let f = &s.follower;
    let alpha = f.risk_aversion;
    let beta = f.consumption_curvature;
    let growth = m.compounding();
    let rt = m.rate * m.horizon;
    let q = m.annuity();
    let scale = 1.0 + alpha / beta * q;
    // integral of t e^{r(T-t)} over the horizon
    let t_weighted = (growth - 1.0 - rt) / (m.rate * m.rate);
    let fixed = -alpha * f.initial_fund * growth
        + alpha / beta
            * ((1.0 - m.discount_scale) * m.rate * t_weighted
                + (f.consumption_weight.ln() - rt) * q);
    let eta = u.exp();
    let weighted_investment = numerics::integrate(
        |t| (m.rate * (m.horizon - t)).exp() * optimal_investment(s, eta, t),
        0.0,
        m.horizon,
        rule,
    )?;
    let weighted_square = numerics::integrate(
        |t| {
            let i = optimal_investment(s, eta, t);
            (2.0 * m.rate * (m.horizon - t)).exp() * i * i
        },
        0.0,
        m.horizon,
        rule,
    )?;
    let rhs = (fixed - alpha * m.excess_return * weighted_investment
        + alpha * alpha * m.volatility * m.volatility / 2.0 * weighted_square)
        / scale;
    Ok(u - rhs)
}

#[derive(Debug, Clone, Copy)]
pub struct EtaRoot {
    pub log_eta: f64,
    pub eta: f64,
    pub iterations: u32,
    pub residual: f64,
}

/// Herd-free closed form for `ln eta`; the exact root at `theta = 0` and
/// the bracket center otherwise.
pub fn log_eta_seed(s: &HerdingScenario) -> f64 {
    let f = &s.follower;
    f.consumption_weight.ln()
        - s.market.rate * s.market.horizon
        - f.consumption_curvature * baseline::intercept(&s.market, &s.follower)
}

const MAX_DOUBLINGS: u32 = 60;
const SCAN_INTERVALS: usize = 16;

/// Solve the multiplier equation in log space.
///
/// A bracket `seed +/- w` is expanded geometrically until the residual
/// changes sign; the located bracket is then scanned and rejected with a
/// diagnostic if it contains more than one crossing.
pub fn solve_eta(s: &HerdingScenario, rule: &QuadratureRule, cfg: &RootConfig) -> Result<EtaRoot> {
    let seed = log_eta_seed(s);
    let mut width = 1.0;
    let mut lo = seed - width;
    let mut hi = seed + width;
    let mut g_lo = eta_residual(s, lo, rule)?;
    let mut g_hi = eta_residual(s, hi, rule)?;
    let mut attempts = 0;
    while g_lo.signum() == g_hi.signum() && g_lo != 0.0 && g_hi != 0.0 {
        attempts += 1;
        if attempts > MAX_DOUBLINGS {
            return Err(Error::BracketExpansion { center: seed, attempts: MAX_DOUBLINGS });
        }
        width *= 2.0;
        lo = seed - width;
        hi = seed + width;
        g_lo = eta_residual(s, lo, rule)?;
        g_hi = eta_residual(s, hi, rule)?;
    }
    let crossings =
        numerics::count_sign_changes(|u| eta_residual(s, u, rule), lo, hi, SCAN_INTERVALS)?;
    if crossings > 1 {
        return Err(Error::MultipleCrossings { lo, hi, count: crossings });
    }
    let root = numerics::find_root(|u| eta_residual(s, u, rule), lo, hi, cfg)?;
    Ok(EtaRoot {
        log_eta: root.root,
        eta: root.root.exp(),
        iterations: root.iterations,
        residual: root.residual,
    })
}

#[derive(Debug, Clone)]
pub struct SolverDiagnostics {
    pub iterations: u32,
    pub final_residual: f64,
    /// Change in the crowding measure when the quadrature panel count is
    /// doubled; a practical error estimate.
    pub quadrature_est_error: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FollowerSolution {
    pub eta: f64,
    pub log_eta: f64,
    /// Consumption intercept, computed from the baseline intercept minus the
    /// crowding measure. `eta = gamma1 e^{-rT - beta1 k1}` must hold at the
    /// solved multiplier; `cli check` verifies it.
    pub k1_star: f64,
    pub path: ControlPath,
    pub crowding: f64,
    pub diagnostics: SolverDiagnostics,
}

/// Full follower solve: multiplier, consumption intercept, sampled optimal
/// path, and the crowding measure with diagnostics.
pub fn solve(
    s: &HerdingScenario,
    grid: &TimeGrid,
    rule: &QuadratureRule,
    cfg: &RootConfig,
) -> Result<FollowerSolution> {
    s.validate()?;
    let root = solve_eta(s, rule, cfg)?;
    let crowding = crowding::crowding_out(s, root.eta, rule)?;
    let crowding_fine = crowding::crowding_out(s, root.eta, &rule.with_panels(rule.panels * 2))?;
    let k1_star = baseline::intercept(&s.market, &s.follower) - crowding;
    let slope = baseline::consumption_slope(&s.market, &s.follower);
    let path =
        ControlPath::sample(grid, |t| optimal_investment(s, root.eta, t), |t| slope * t + k1_star);
    let mut warnings = Vec::new();
    let min_c = path.min_consumption();
    if min_c <= 0.0 {
        warnings
            .push(format!("optimal consumption is not strictly positive (min sample {min_c:.6e})"));
    }
    Ok(FollowerSolution {
        eta: root.eta,
        log_eta: root.log_eta,
        k1_star,
        path,
        crowding,
        diagnostics: SolverDiagnostics {
            iterations: root.iterations,
            final_residual: root.residual,
            quadrature_est_error: (crowding - crowding_fine).abs(),
            warnings,
        },
    })
}
