//! Scenario types shared across the crate: the market environment, the two
//! households (a leader whose decisions are observed and a follower who pays
//! a penalty for deviating from them), time grids, and sampled control paths.
//!
//! Scenario files are JSON objects with keys
//! `r, v, sigma, T, rho, theta, follower.{alpha,beta,gamma,x0},
//! leader.{alpha,beta,gamma,x0}`. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market environment over the horizon `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Risk-free rate `r`.
    pub rate: f64,
    /// Expected excess return `v` of the risky asset.
    pub excess_return: f64,
    /// Volatility `sigma` of the risky asset.
    pub volatility: f64,
    /// Terminal time `T`.
    pub horizon: f64,
    /// Discount adjustment `rho`; consumption utility is discounted at
    /// `e^{-rho r t}` and deviation is weighted by `e^{rho r (T-t)}`.
    pub discount_scale: f64,
}

impl MarketParams {
    /// `e^{rT}`: growth factor of one unit of the fund over the horizon.
    pub fn compounding(&self) -> f64 {
        (self.rate * self.horizon).exp()
    }

    /// `(e^{rT} - 1)/r`, the integral of `e^{r(T-t)}` over the horizon.
    pub fn annuity(&self) -> f64 {
        (self.compounding() - 1.0) / self.rate
    }
}

/// Preferences and endowment of one household.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HouseholdParams {
    /// Absolute risk aversion `alpha` of terminal-fund utility.
    pub risk_aversion: f64,
    /// Curvature `beta` of consumption utility.
    pub consumption_curvature: f64,
    /// Weight `gamma` on consumption utility in the objective.
    pub consumption_weight: f64,
    /// Initial fund level `x0`.
    pub initial_fund: f64,
}

/// Full problem instance: market, leader, follower, and the herding
/// strength `theta` that penalises investment deviation from the leader.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HerdingScenario {
    pub market: MarketParams,
    pub follower: HouseholdParams,
    pub leader: HouseholdParams,
    pub herd_strength: f64,
}

// ---------------------------------------------------------------------------
// wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HouseholdFile {
    alpha: f64,
    beta: f64,
    gamma: f64,
    x0: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    r: f64,
    v: f64,
    sigma: f64,
    #[serde(rename = "T")]
    horizon: f64,
    rho: f64,
    theta: f64,
    follower: HouseholdFile,
    leader: HouseholdFile,
}

impl From<&HerdingScenario> for ScenarioFile {
    fn from(s: &HerdingScenario) -> Self {
        let hh = |h: &HouseholdParams| HouseholdFile {
            alpha: h.risk_aversion,
            beta: h.consumption_curvature,
            gamma: h.consumption_weight,
            x0: h.initial_fund,
        };
        ScenarioFile {
            r: s.market.rate,
            v: s.market.excess_return,
            sigma: s.market.volatility,
            horizon: s.market.horizon,
            rho: s.market.discount_scale,
            theta: s.herd_strength,
            follower: hh(&s.follower),
            leader: hh(&s.leader),
        }
    }
}

impl From<ScenarioFile> for HerdingScenario {
    fn from(f: ScenarioFile) -> Self {
        let hh = |h: &HouseholdFile| HouseholdParams {
            risk_aversion: h.alpha,
            consumption_curvature: h.beta,
            consumption_weight: h.gamma,
            initial_fund: h.x0,
        };
        HerdingScenario {
            market: MarketParams {
                rate: f.r,
                excess_return: f.v,
                volatility: f.sigma,
                horizon: f.horizon,
                discount_scale: f.rho,
            },
            follower: hh(&f.follower),
            leader: hh(&f.leader),
            herd_strength: f.theta,
        }
    }
}

impl HerdingScenario {
    /// Standard worked example used throughout the docs and tests:
    /// `r = 0.01, v = 0.1, sigma = 0.1, T = 10, rho = 1, theta = 0.01`,
    /// follower `(0.2, 0.2, 1, 1)`, leader `(0.4, 0.4, 1, 1)`.
    pub fn example() -> Self {
        HerdingScenario {
            market: MarketParams {
                rate: 0.01,
                excess_return: 0.1,
                volatility: 0.1,
                horizon: 10.0,
                discount_scale: 1.0,
            },
            follower: HouseholdParams {
                risk_aversion: 0.2,
                consumption_curvature: 0.2,
                consumption_weight: 1.0,
                initial_fund: 1.0,
            },
            leader: HouseholdParams {
                risk_aversion: 0.4,
                consumption_curvature: 0.4,
                consumption_weight: 1.0,
                initial_fund: 1.0,
            },
            herd_strength: 0.01,
        }
    }

    /// Parse and validate a scenario from JSON text.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        let scenario = HerdingScenario::from(file);
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json_string(&self) -> String {
        // ScenarioFile serialization cannot fail: plain numeric fields.
        serde_json::to_string_pretty(&ScenarioFile::from(self)).expect("serialize scenario")
    }

    /// Reject scenarios the closed forms are not defined for. Error messages
    /// name the offending scenario-file key and the violated constraint.
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, value: f64| -> Result<()> {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::validation(
                    field,
                    format!("must be finite and strictly positive (got {value})"),
                ));
            }
            Ok(())
        };
        let finite = |field: &str, value: f64| -> Result<()> {
            if !value.is_finite() {
                return Err(Error::validation(field, format!("must be finite (got {value})")));
            }
            Ok(())
        };

        positive("r", self.market.rate)?;
        finite("v", self.market.excess_return)?;
        positive("sigma", self.market.volatility)?;
        positive("T", self.market.horizon)?;
        positive("rho", self.market.discount_scale)?;
        if !self.herd_strength.is_finite() || self.herd_strength < 0.0 {
            return Err(Error::validation(
                "theta",
                format!("must be finite and nonnegative (got {})", self.herd_strength),
            ));
        }
        for (prefix, h) in [("follower", &self.follower), ("leader", &self.leader)] {
            positive(&format!("{prefix}.alpha"), h.risk_aversion)?;
            positive(&format!("{prefix}.beta"), h.consumption_curvature)?;
            positive(&format!("{prefix}.gamma"), h.consumption_weight)?;
            finite(&format!("{prefix}.x0"), h.initial_fund)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// grids and paths
// ---------------------------------------------------------------------------

/// Uniform time grid on `[0, horizon]`. The first node is exactly 0 and the
/// last exactly `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    step: f64,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, n_points: usize) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::validation("horizon", format!("must be positive (got {horizon})")));
        }
        if n_points < 2 {
            return Err(Error::validation(
                "n_points",
                format!("grid needs at least 2 points (got {n_points})"),
            ));
        }
        let step = horizon / (n_points - 1) as f64;
        let mut times: Vec<f64> = (0..n_points).map(|i| i as f64 * step).collect();
        times[n_points - 1] = horizon;
        Ok(TimeGrid { times, step })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_points(&self) -> usize {
        self.times.len()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }
}

/// Investment and consumption sampled on a shared grid.
///
/// Consumption samples may be nonpositive; downstream code reports that as a
/// warning diagnostic rather than clamping, since the closed forms stay
/// defined either way.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    pub grid: TimeGrid,
    pub investment: Vec<f64>,
    pub consumption: Vec<f64>,
}

impl ControlPath {
    pub fn new(grid: TimeGrid, investment: Vec<f64>, consumption: Vec<f64>) -> Result<Self> {
        if investment.len() != grid.n_points() || consumption.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "path samples ({} investment, {} consumption) do not match grid ({} points)",
                investment.len(),
                consumption.len(),
                grid.n_points()
            )));
        }
        Ok(ControlPath { grid, investment, consumption })
    }

    pub fn sample(
        grid: &TimeGrid,
        investment: impl Fn(f64) -> f64,
        consumption: impl Fn(f64) -> f64,
    ) -> Self {
        let inv = grid.times().iter().map(|&t| investment(t)).collect();
        let con = grid.times().iter().map(|&t| consumption(t)).collect();
        ControlPath { grid: grid.clone(), investment: inv, consumption: con }
    }

    pub fn min_consumption(&self) -> f64 {
        self.consumption.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_scenario_is_valid() {
        HerdingScenario::example().validate().unwrap();
    }

    #[test]
    fn validation_names_offending_field() {
        let mut s = HerdingScenario::example();
        s.market.volatility = 0.0;
        let err = s.validate().unwrap_err();
        assert!(matches!(&err, Error::Validation { field, .. } if field == "sigma"), "{err}");

        let mut s = HerdingScenario::example();
        s.herd_strength = -1.0;
        let err = s.validate().unwrap_err();
        assert!(matches!(&err, Error::Validation { field, .. } if field == "theta"), "{err}");

        let mut s = HerdingScenario::example();
        s.leader.consumption_weight = f64::NAN;
        let err = s.validate().unwrap_err();
        assert!(
            matches!(&err, Error::Validation { field, .. } if field == "leader.gamma"),
            "{err}"
        );
    }

    #[test]
    fn zero_theta_is_valid() {
        let mut s = HerdingScenario::example();
        s.herd_strength = 0.0;
        s.validate().unwrap();
    }

    #[test]
    fn json_round_trip_preserves_values() {
        let s = HerdingScenario::example();
        let parsed = HerdingScenario::from_json_str(&s.to_json_string()).unwrap();
        assert_eq!(s, parsed);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = HerdingScenario::example().to_json_string();
        text = text.replacen("\"r\":", "\"bogus\": 1,\n  \"r\":", 1);
        let err = HerdingScenario::from_json_str(&text).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = TimeGrid::uniform(10.0, 1025).unwrap();
        assert_eq!(g.times()[0], 0.0);
        assert_eq!(g.horizon(), 10.0);
        assert_eq!(g.n_points(), 1025);
        // strictly increasing
        for w in g.times().windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        assert!(TimeGrid::uniform(10.0, 1).is_err());
        assert!(TimeGrid::uniform(0.0, 8).is_err());
        assert!(TimeGrid::uniform(f64::NAN, 8).is_err());
    }

    #[test]
    fn path_length_mismatch_is_rejected() {
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        assert!(ControlPath::new(g, vec![0.0; 7], vec![0.0; 8]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_household() -> impl Strategy<Value = HouseholdParams> {
            (0.05f64..2.0, 0.05f64..2.0, 0.1f64..5.0, -2.0f64..5.0).prop_map(|(a, b, g, x)| {
                HouseholdParams {
                    risk_aversion: a,
                    consumption_curvature: b,
                    consumption_weight: g,
                    initial_fund: x,
                }
            })
        }

        pub(crate) fn arb_scenario() -> impl Strategy<Value = HerdingScenario> {
            (
                0.002f64..0.08,
                -0.2f64..0.4,
                0.02f64..0.6,
                0.5f64..12.0,
                0.3f64..2.5,
                0.0f64..5.0,
                arb_household(),
                arb_household(),
            )
                .prop_map(|(r, v, sigma, horizon, rho, theta, follower, leader)| {
                    HerdingScenario {
                        market: MarketParams {
                            rate: r,
                            excess_return: v,
                            volatility: sigma,
                            horizon,
                            discount_scale: rho,
                        },
                        follower,
                        leader,
                        herd_strength: theta,
                    }
                })
        }

        proptest! {
            #[test]
            fn random_scenarios_round_trip(s in arb_scenario()) {
                prop_assert!(s.validate().is_ok());
                let parsed = HerdingScenario::from_json_str(&s.to_json_string()).unwrap();
                prop_assert_eq!(s, parsed);
            }
        }
    }
}
