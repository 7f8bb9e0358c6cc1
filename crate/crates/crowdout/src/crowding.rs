//! The crowding-out measure: how much herding depresses consumption.
//!
//! The follower's optimal consumption path sits below its herd-free
//! baseline by the constant
//!
//! ```text
//! C = (a1 s^2 / 2) (b1/a1 + Q)^{-1} * integral e^{2r(T-t)} [I*(t) - I1(t)]^2 dt,
//! ```
//!
//! where `Q = (e^{rT}-1)/r`. This module evaluates that measure at a solved
//! multiplier, its closed-form limit for overwhelming herd strength, central
//! finite-difference sensitivities in the market parameters, and
//! one-parameter sweeps with per-point multiplier re-solves.

use std::fmt;
use std::io;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::follower;
use crate::model::HerdingScenario;
use crate::numerics::{self, QuadratureRule, RootConfig};

/// `integral e^{2r(T-t)} [I*(t) - I1(t)]^2 dt` — the squared investment
/// distortion accumulated at the compounding weight.
pub fn deviation_energy(s: &HerdingScenario, eta: f64, rule: &QuadratureRule) -> Result<f64> {
    let m = &s.market;
    numerics::integrate(
        |t| {
            let d = follower::investment_deviation(s, eta, t);
            let a = (m.rate * (m.horizon - t)).exp();
            a * a * d * d
        },
        0.0,
        m.horizon,
        rule,
    )
}

/// Consumption reduction caused by herding, at the solved multiplier.
/// Exactly zero when the herd strength is zero or the households share one
/// risk aversion; strictly positive otherwise.
pub fn crowding_out(s: &HerdingScenario, eta: f64, rule: &QuadratureRule) -> Result<f64> {
    let f = &s.follower;
    let factor = f.risk_aversion * s.market.volatility * s.market.volatility
        / 2.0
        / (f.consumption_curvature / f.risk_aversion + s.market.annuity());
    Ok(factor * deviation_energy(s, eta, rule)?)
}

/// Closed-form limit of the measure as the herd strength grows without
/// bound (the follower copies the leader exactly). The scenario's own herd
/// strength is ignored.
pub fn crowding_out_limit(s: &HerdingScenario) -> f64 {
    let f = &s.follower;
    let m = &s.market;
    let mismatch = f.risk_aversion / s.leader.risk_aversion - 1.0;
    mismatch * mismatch / (f.consumption_curvature / f.risk_aversion + m.annuity())
        * m.excess_return
        * m.excess_return
        * m.horizon
        / (2.0 * f.risk_aversion * m.volatility * m.volatility)
}

/// Market parameter varied by sweeps and sensitivities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Rate,
    ExcessReturn,
    Volatility,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Rate => "r",
            SweepParam::ExcessReturn => "v",
            SweepParam::Volatility => "sigma",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r" => Ok(SweepParam::Rate),
            "v" => Ok(SweepParam::ExcessReturn),
            "sigma" => Ok(SweepParam::Volatility),
            other => Err(Error::validation(
                "param",
                format!("unknown sweep parameter {other:?} (expected r, v, or sigma)"),
            )),
        }
    }
}

/// Copy of `s` with one market parameter replaced.
pub fn with_param(s: &HerdingScenario, parameter: SweepParam, value: f64) -> HerdingScenario {
    let mut out = *s;
    match parameter {
        SweepParam::Rate => out.market.rate = value,
        SweepParam::ExcessReturn => out.market.excess_return = value,
        SweepParam::Volatility => out.market.volatility = value,
    }
    out
}

pub const DEFAULT_SENSITIVITY_STEP: f64 = 1e-4;

/// Central finite-difference derivative of the crowding measure in one
/// market parameter, with relative step `rel_step`. With `use_limit` the
/// derivative is taken on the closed-form limit; otherwise the multiplier
/// is re-solved at both perturbed scenarios.
pub fn sensitivity(
    s: &HerdingScenario,
    parameter: SweepParam,
    use_limit: bool,
    rel_step: f64,
    rule: &QuadratureRule,
    cfg: &RootConfig,
) -> Result<f64> {
    if !(rel_step.is_finite() && rel_step > 0.0) {
        return Err(Error::validation(
            "step",
            format!("relative step must be positive (got {rel_step})"),
        ));
    }
    let base = match parameter {
        SweepParam::Rate => s.market.rate,
        SweepParam::ExcessReturn => s.market.excess_return,
        SweepParam::Volatility => s.market.volatility,
    };
    let h = rel_step * base.abs();
    if h == 0.0 {
        return Err(Error::validation(
            "step",
            "cannot take a relative step from a zero-valued parameter",
        ));
    }
    let evaluate = |value: f64| -> Result<f64> {
        let shifted = with_param(s, parameter, value);
        shifted.validate().map_err(|e| {
            Error::validation("step", format!("central difference leaves the valid region: {e}"))
        })?;
        if use_limit {
            Ok(crowding_out_limit(&shifted))
        } else {
            let root = follower::solve_eta(&shifted, rule, cfg)?;
            crowding_out(&shifted, root.eta, rule)
        }
    };
    Ok((evaluate(base + h)? - evaluate(base - h)?) / (2.0 * h))
}

/// One-parameter sweep request: evaluate the measure at `n_points` equally
/// spaced values of `parameter` in `[lo, hi]`, starting from `base`.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
    pub base: HerdingScenario,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::validation(
                "range",
                format!("sweep needs finite lo < hi (got [{}, {}])", self.lo, self.hi),
            ));
        }
        if self.n_points < 2 {
            return Err(Error::validation(
                "n",
                format!("sweep needs at least 2 points (got {})", self.n_points),
            ));
        }
        for endpoint in [self.lo, self.hi] {
            with_param(&self.base, self.parameter, endpoint).validate().map_err(|e| {
                Error::validation("range", format!("sweep range leaves the valid region: {e}"))
            })?;
        }
        Ok(())
    }
}

/// One evaluated sweep point. A failed multiplier solve leaves NaN values
/// and records the failure in `note`; the sweep continues past it.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub crowding: f64,
    pub eta: f64,
    pub iterations: u32,
    pub residual: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub parameter: SweepParam,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn crowding_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.crowding).collect()
    }

    /// CSV with 15-significant-digit scientific notation, one row per point.
    pub fn write_csv(&self, out: &mut impl io::Write) -> io::Result<()> {
        writeln!(out, "param,value,crowding,eta,iterations,residual")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{:.14e},{:.14e},{:.14e},{},{:.14e}",
                self.parameter, p.value, p.crowding, p.eta, p.iterations, p.residual
            )?;
        }
        Ok(())
    }
}

/// Evaluate the sweep with a fresh multiplier solve at every point.
pub fn sweep(spec: &SweepSpec, rule: &QuadratureRule, cfg: &RootConfig) -> Result<SweepResult> {
    spec.validate()?;
    let step = (spec.hi - spec.lo) / (spec.n_points - 1) as f64;
    let mut points = Vec::with_capacity(spec.n_points);
    for i in 0..spec.n_points {
        let value = if i + 1 == spec.n_points { spec.hi } else { spec.lo + i as f64 * step };
        let scenario = with_param(&spec.base, spec.parameter, value);
        let point = match follower::solve_eta(&scenario, rule, cfg)
            .and_then(|root| Ok((root, crowding_out(&scenario, root.eta, rule)?)))
        {
            Ok((root, crowding)) => SweepPoint {
                value,
                crowding,
                eta: root.eta,
                iterations: root.iterations,
                residual: root.residual,
                note: None,
            },
            Err(e) => SweepPoint {
                value,
                crowding: f64::NAN,
                eta: f64::NAN,
                iterations: 0,
                residual: f64::NAN,
                note: Some(e.to_string()),
            },
        };
        points.push(point);
    }
    Ok(SweepResult { parameter: spec.parameter, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example() -> HerdingScenario {
        HerdingScenario::example()
    }

    fn solved_eta(s: &HerdingScenario) -> f64 {
        follower::solve_eta(s, &QuadratureRule::default(), &RootConfig::default()).unwrap().eta
    }

    #[test]
    fn limit_matches_frozen_value() {
        // 0.25 * (1 + 10.517091807564762)^{-1} * 25
        assert_relative_eq!(
            crowding_out_limit(&example()),
            0.5426717182105657,
            max_relative = 1e-12
        );
    }

    #[test]
    fn limit_vanishes_without_mismatch_or_excess_return() {
        let mut s = example();
        s.leader.risk_aversion = s.follower.risk_aversion;
        assert_eq!(crowding_out_limit(&s), 0.0);

        let mut s = example();
        s.market.excess_return = 0.0;
        assert_eq!(crowding_out_limit(&s), 0.0);
    }

    #[test]
    fn limit_is_invariant_under_joint_return_volatility_scaling() {
        let s = example();
        let mut scaled = s;
        scaled.market.excess_return *= 3.0;
        scaled.market.volatility *= 3.0;
        assert_relative_eq!(
            crowding_out_limit(&scaled),
            crowding_out_limit(&s),
            max_relative = 1e-12
        );
    }

    #[test]
    fn measure_is_exactly_zero_without_herding() {
        let mut s = example();
        s.herd_strength = 0.0;
        let c = crowding_out(&s, solved_eta(&s), &QuadratureRule::default()).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn measure_is_exactly_zero_with_equal_risk_aversion() {
        for theta in [0.01, 1.0, 100.0] {
            let mut s = example();
            s.leader.risk_aversion = s.follower.risk_aversion;
            s.leader.consumption_curvature = s.follower.consumption_curvature;
            s.herd_strength = theta;
            let c = crowding_out(&s, solved_eta(&s), &QuadratureRule::default()).unwrap();
            assert_eq!(c, 0.0);
        }
    }

    #[test]
    fn example_measure_matches_frozen_value() {
        let s = example();
        let c = crowding_out(&s, solved_eta(&s), &QuadratureRule::default()).unwrap();
        assert_relative_eq!(c, 0.42292475663742685, max_relative = 1e-9);
    }

    #[test]
    fn overwhelming_herd_strength_approaches_the_limit() {
        let mut s = example();
        s.herd_strength =
            1e6 * s.follower.risk_aversion * s.market.volatility * s.market.volatility;
        let c = crowding_out(&s, solved_eta(&s), &QuadratureRule::default()).unwrap();
        let limit = crowding_out_limit(&s);
        assert!((c - limit).abs() / limit < 1e-3, "relative gap {}", (c - limit).abs() / limit);
    }

    #[test]
    fn limit_sensitivities_have_the_expected_signs() {
        let s = example();
        let rule = QuadratureRule::default();
        let cfg = RootConfig::default();
        let d_r = sensitivity(&s, SweepParam::Rate, true, 1e-4, &rule, &cfg).unwrap();
        let d_v = sensitivity(&s, SweepParam::ExcessReturn, true, 1e-4, &rule, &cfg).unwrap();
        let d_sigma = sensitivity(&s, SweepParam::Volatility, true, 1e-4, &rule, &cfg).unwrap();
        assert!(d_r < 0.0, "d/dr = {d_r}");
        assert!(d_v > 0.0, "d/dv = {d_v}");
        assert!(d_sigma < 0.0, "d/dsigma = {d_sigma}");
        // the limit scales as 1/sigma^2, so its sigma-derivative is known exactly
        let analytic = -2.0 * crowding_out_limit(&s) / s.market.volatility;
        assert_relative_eq!(d_sigma, analytic, max_relative = 1e-6);
    }

    #[test]
    fn solved_sensitivities_share_the_limit_signs() {
        let s = example();
        let rule = QuadratureRule::default();
        let cfg = RootConfig::default();
        for (param, positive) in [
            (SweepParam::Rate, false),
            (SweepParam::ExcessReturn, true),
            (SweepParam::Volatility, false),
        ] {
            let d = sensitivity(&s, param, false, 1e-4, &rule, &cfg).unwrap();
            assert_eq!(d > 0.0, positive, "d/d{param} = {d}");
        }
    }

    #[test]
    fn oversized_step_is_rejected() {
        let s = example();
        let err = sensitivity(
            &s,
            SweepParam::Rate,
            true,
            1.5,
            &QuadratureRule::default(),
            &RootConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(&err, Error::Validation { field, .. } if field == "step"), "{err}");
    }

    #[test]
    fn rate_sweep_is_strictly_decreasing() {
        let spec = SweepSpec {
            parameter: SweepParam::Rate,
            lo: 0.005,
            hi: 0.025,
            n_points: 5,
            base: example(),
        };
        let result = sweep(&spec, &QuadratureRule::default(), &RootConfig::default()).unwrap();
        let values = result.crowding_values();
        assert_eq!(values.len(), 5);
        for w in values.windows(2) {
            assert!(w[1] < w[0], "{values:?}");
        }
        assert!(result.points.iter().all(|p| p.note.is_none()));
        assert_eq!(result.points[0].value, 0.005);
        assert_eq!(result.points[4].value, 0.025);
    }

    #[test]
    fn sweep_rejects_bad_ranges() {
        let mut spec = SweepSpec {
            parameter: SweepParam::Volatility,
            lo: 0.05,
            hi: 0.25,
            n_points: 1,
            base: example(),
        };
        assert!(matches!(spec.validate(), Err(Error::Validation { .. })));
        spec.n_points = 3;
        spec.lo = -0.1; // volatility must stay positive
        let err = spec.validate().unwrap_err();
        assert!(matches!(&err, Error::Validation { field, .. } if field == "range"), "{err}");
    }

    #[test]
    fn csv_layout_is_stable() {
        let result = SweepResult {
            parameter: SweepParam::Volatility,
            points: vec![
                SweepPoint {
                    value: 0.05,
                    crowding: 0.5,
                    eta: 0.625,
                    iterations: 7,
                    residual: -1.25e-13,
                    note: None,
                },
                SweepPoint {
                    value: 0.06,
                    crowding: f64::NAN,
                    eta: f64::NAN,
                    iterations: 0,
                    residual: f64::NAN,
                    note: Some("solver failed".into()),
                },
            ],
        };
        let mut buf = Vec::new();
        result.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "param,value,crowding,eta,iterations,residual");
        assert_eq!(
            lines[1],
            "sigma,5.00000000000000e-2,5.00000000000000e-1,6.25000000000000e-1,7,-1.25000000000000e-13"
        );
        assert!(lines[2].contains("NaN"));
    }

    #[test]
    fn parameter_names_round_trip() {
        for p in [SweepParam::Rate, SweepParam::ExcessReturn, SweepParam::Volatility] {
            assert_eq!(p.to_string().parse::<SweepParam>().unwrap(), p);
        }
        assert!("volatility".parse::<SweepParam>().is_err());
    }

    #[test]
    fn with_param_replaces_only_the_target_field() {
        let s = example();
        let t = with_param(&s, SweepParam::ExcessReturn, 0.2);
        assert_eq!(t.market.excess_return, 0.2);
        assert_eq!(t.market.rate, s.market.rate);
        assert_eq!(t.market.volatility, s.market.volatility);
        assert_eq!(t.herd_strength, s.herd_strength);
    }

    mod properties {
        use super::*;
        use crate::model::{HouseholdParams, MarketParams};
        use proptest::prelude::*;

        // Tighter than the full scenario space: keeps the multiplier solve
        // well inside its bracket-expansion budget.
        fn arb_moderate_scenario() -> impl Strategy<Value = HerdingScenario> {
            (
                0.005f64..0.03,
                0.02f64..0.2,
                0.05f64..0.3,
                1.0f64..10.0,
                0.5f64..1.5,
                0.0f64..0.5,
                (0.1f64..0.6, 0.1f64..0.6, 0.5f64..2.0, -1.0f64..2.0),
                (0.1f64..0.6, 0.1f64..0.6, 0.5f64..2.0, -1.0f64..2.0),
            )
                .prop_map(|(r, v, sigma, horizon, rho, theta, f, l)| HerdingScenario {
                    market: MarketParams {
                        rate: r,
                        excess_return: v,
                        volatility: sigma,
                        horizon,
                        discount_scale: rho,
                    },
                    follower: HouseholdParams {
                        risk_aversion: f.0,
                        consumption_curvature: f.1,
                        consumption_weight: f.2,
                        initial_fund: f.3,
                    },
                    leader: HouseholdParams {
                        risk_aversion: l.0,
                        consumption_curvature: l.1,
                        consumption_weight: l.2,
                        initial_fund: l.3,
                    },
                    herd_strength: theta,
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn measure_is_nonnegative_and_below_its_limit_scale(s in arb_moderate_scenario()) {
                let rule = QuadratureRule::default();
                let root = follower::solve_eta(&s, &rule, &RootConfig::default()).unwrap();
                let c = crowding_out(&s, root.eta, &rule).unwrap();
                prop_assert!(c >= 0.0, "c = {c}");
            }

            #[test]
            fn limit_is_nonnegative(s in arb_moderate_scenario()) {
                prop_assert!(crowding_out_limit(&s) >= 0.0);
            }
        }
    }
}
