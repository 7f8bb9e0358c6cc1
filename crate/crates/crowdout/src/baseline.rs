//! Closed-form optimal policy of a single household that ignores the other
//! one (herding strength zero). Investment decays exponentially toward the
//! myopic level `v/(alpha sigma^2)` at the horizon; consumption is linear in
//! time with slope `(1-rho) r / beta`.
//!
//! These formulas also anchor the herding solver: the follower's optimum is
//! a time-dependent interpolation between its own baseline investment and
//! the leader's, and the crowding-out measure is the drop of the follower's
//! consumption intercept below its baseline value.

use crate::model::{ControlPath, HouseholdParams, MarketParams, TimeGrid};

/// `v/(alpha sigma^2) e^{r(t-T)}`.
pub fn investment(m: &MarketParams, h: &HouseholdParams, t: f64) -> f64 {
    let myopic = m.excess_return / (h.risk_aversion * m.volatility * m.volatility);
    myopic * (m.rate * (t - m.horizon)).exp()
}

/// Time-constant part of baseline consumption.
///
/// The `-rT/alpha` term keeps the intercept consistent with the pointwise
/// first-order conditions of the objective functional; see
/// `tests::intercept_is_the_argmax` and the objective-module gap tests.
pub fn intercept(m: &MarketParams, h: &HouseholdParams) -> f64 {
    let growth = m.compounding();
    let rt = m.rate * m.horizon;
    let alpha = h.risk_aversion;
    let beta = h.consumption_curvature;
    let bracket = -rt / alpha
        + h.initial_fund * growth
        + h.consumption_weight.ln() / alpha
        + m.excess_return * m.excess_return * m.horizon
            / (2.0 * alpha * m.volatility * m.volatility)
        + (m.discount_scale - 1.0) * (growth - 1.0 - rt) / (beta * m.rate);
    bracket / (beta / alpha + m.annuity())
}

/// Slope of baseline consumption in time.
pub fn consumption_slope(m: &MarketParams, h: &HouseholdParams) -> f64 {
    (1.0 - m.discount_scale) * m.rate / h.consumption_curvature
}

pub fn consumption(m: &MarketParams, h: &HouseholdParams, t: f64) -> f64 {
    consumption_slope(m, h) * t + intercept(m, h)
}

/// Baseline policy with the intercept computed once and cached.
#[derive(Debug, Clone, Copy)]
pub struct BaselinePolicy {
    market: MarketParams,
    household: HouseholdParams,
    intercept: f64,
}

impl BaselinePolicy {
    pub fn new(market: MarketParams, household: HouseholdParams) -> Self {
        let intercept = intercept(&market, &household);
        BaselinePolicy { market, household, intercept }
    }

    pub fn investment(&self, t: f64) -> f64 {
        investment(&self.market, &self.household, t)
    }

    pub fn consumption(&self, t: f64) -> f64 {
        consumption_slope(&self.market, &self.household) * t + self.intercept
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn sample(&self, grid: &TimeGrid) -> ControlPath {
        ControlPath::sample(grid, |t| self.investment(t), |t| self.consumption(t))
    }
}
