//! The follower's objective on sampled control paths, and variational
//! probes of optimality.
//!
//! For deterministic controls the expectation over the fund's noise has a
//! closed form, so the objective splits into three exact pieces: a fund
//! utility term `-(1/a) e^F` with
//!
//! ```text
//! F = -a x e^{rT} - a int e^{r(T-t)} [vI - C] dt + (a^2 s^2 / 2) int e^{2r(T-t)} I^2 dt,
//! ```
//!
//! a consumption utility term `-(g/b) int e^{-rho r t - b C} dt`, and the
//! herding penalty `theta * D` where `D` is half the discounted squared
//! distance between the follower's and the leader's investments. All path
//! integrals are Simpson sums on the shared sample grid, so the same
//! sampled path always produces bit-identical values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::model::{ControlPath, HerdingScenario, MarketParams, TimeGrid};
use crate::numerics;

/// Half the discounted squared investment distance between two paths on a
/// shared grid. Consumption samples play no role.
pub fn average_deviation(p1: &ControlPath, p2: &ControlPath, m: &MarketParams) -> Result<f64> {
    require_same_grid(p1, p2)?;
    let samples: Vec<f64> = p1
        .grid
        .times()
        .iter()
        .zip(p1.investment.iter().zip(p2.investment.iter()))
        .map(|(&t, (&i1, &i2))| {
            let weight = (m.discount_scale * m.rate * (m.horizon - t)).exp();
            weight * (i1 - i2) * (i1 - i2)
        })
        .collect();
    Ok(0.5 * numerics::integrate_samples(&samples, p1.grid.step())?)
}

/// Exact objective value of a deterministic control path, split into its
/// three pieces. `total` is `fund + consumption - penalty` by construction.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveBreakdown {
    pub fund_utility_term: f64,
    /// Exponent `F` with `fund_utility_term = -(1/a) e^F`; kept so callers
    /// can reason about magnitudes that would overflow the exponential.
    pub fund_exponent: f64,
    pub consumption_utility_term: f64,
    pub deviation_penalty: f64,
    pub total: f64,
}

/// Evaluate the follower's objective for the given control path, with the
/// herding penalty taken against `leader_path`.
pub fn evaluate_objective(
    s: &HerdingScenario,
    path: &ControlPath,
    leader_path: &ControlPath,
) -> Result<ObjectiveBreakdown> {
    require_same_grid(path, leader_path)?;
    let m = &s.market;
    if (path.grid.horizon() - m.horizon).abs() > 1e-12 * m.horizon {
        return Err(Error::GridMismatch(format!(
            "path grid ends at {} but the scenario horizon is {}",
            path.grid.horizon(),
            m.horizon
        )));
    }
    for (label, samples) in [("investment", &path.investment), ("consumption", &path.consumption)] {
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("path", format!("{label} samples must be finite")));
        }
    }
    let f = &s.follower;
    let alpha = f.risk_aversion;
    let step = path.grid.step();
    let times = path.grid.times();

    let drift: Vec<f64> = times
        .iter()
        .zip(path.investment.iter().zip(path.consumption.iter()))
        .map(|(&t, (&i, &c))| (m.rate * (m.horizon - t)).exp() * (m.excess_return * i - c))
        .collect();
    let diffusion: Vec<f64> = times
        .iter()
        .zip(path.investment.iter())
        .map(|(&t, &i)| {
            let a = (m.rate * (m.horizon - t)).exp();
            a * a * i * i
        })
        .collect();
    let fund_exponent = -alpha * f.initial_fund * m.compounding()
        - alpha * numerics::integrate_samples(&drift, step)?
        + alpha * alpha * m.volatility * m.volatility / 2.0
            * numerics::integrate_samples(&diffusion, step)?;
    let fund_utility_term = -fund_exponent.exp() / alpha;
    if !fund_utility_term.is_finite() {
        return Err(Error::NonFiniteResult {
            what: format!("fund utility (exponent {fund_exponent:.3e})"),
        });
    }

    let felicity: Vec<f64> = times
        .iter()
        .zip(path.consumption.iter())
        .map(|(&t, &c)| (-m.discount_scale * m.rate * t - f.consumption_curvature * c).exp())
        .collect();
    let consumption_utility_term = -f.consumption_weight / f.consumption_curvature
        * numerics::integrate_samples(&felicity, step)?;
    if !consumption_utility_term.is_finite() {
        return Err(Error::NonFiniteResult { what: "consumption utility".into() });
    }

    let deviation_penalty = s.herd_strength * average_deviation(path, leader_path, m)?;
    Ok(ObjectiveBreakdown {
        fund_utility_term,
        fund_exponent,
        consumption_utility_term,
        deviation_penalty,
        total: fund_utility_term + consumption_utility_term - deviation_penalty,
    })
}

/// Objective drop `J(base) - J(base + eps * direction)` for each requested
/// `eps`. Around an optimum every entry is nonnegative up to rounding, and
/// the drop shrinks quadratically in `eps`.
pub fn variational_gap(
    s: &HerdingScenario,
    base: &ControlPath,
    leader_path: &ControlPath,
    direction: &ControlPath,
    epsilons: &[f64],
) -> Result<Vec<(f64, f64)>> {
    require_same_grid(base, direction)?;
    let reference = evaluate_objective(s, base, leader_path)?.total;
    let mut gaps = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let perturbed = ControlPath {
            grid: base.grid.clone(),
            investment: base
                .investment
                .iter()
                .zip(direction.investment.iter())
                .map(|(&b, &d)| b + eps * d)
                .collect(),
            consumption: base
                .consumption
                .iter()
                .zip(direction.consumption.iter())
                .map(|(&b, &d)| b + eps * d)
                .collect(),
        };
        let value = evaluate_objective(s, &perturbed, leader_path)?.total;
        gaps.push((eps, reference - value));
    }
    Ok(gaps)
}

/// Smooth perturbation direction: truncated sine series on the grid's span
/// with coefficients drawn from the stream `(seed, index)`, normalized to
/// unit sup norm over both components. Both components vanish at the ends
/// of the horizon.
pub fn fourier_direction(grid: &TimeGrid, n_modes: usize, seed: u64, index: u64) -> ControlPath {
    assert!(n_modes >= 1, "need at least one mode");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let coefficients = |rng: &mut ChaCha12Rng| -> Vec<f64> {
        (0..n_modes).map(|_| rng.random_range(-1.0..1.0)).collect()
    };
    let inv_coefficients = coefficients(&mut rng);
    let con_coefficients = coefficients(&mut rng);
    let horizon = grid.horizon();
    let series = |coefficients: &[f64], t: f64| -> f64 {
        coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * t / horizon).sin())
            .sum()
    };
    let investment: Vec<f64> = grid.times().iter().map(|&t| series(&inv_coefficients, t)).collect();
    let consumption: Vec<f64> =
        grid.times().iter().map(|&t| series(&con_coefficients, t)).collect();
    let sup = investment.iter().chain(consumption.iter()).fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let scale = if sup > 0.0 { 1.0 / sup } else { 1.0 };
    ControlPath {
        grid: grid.clone(),
        investment: investment.into_iter().map(|x| x * scale).collect(),
        consumption: consumption.into_iter().map(|x| x * scale).collect(),
    }
}

fn require_same_grid(p1: &ControlPath, p2: &ControlPath) -> Result<()> {
    if p1.grid != p2.grid {
        return Err(Error::GridMismatch(format!(
            "paths sampled on different grids ({} vs {} points)",
            p1.grid.n_points(),
            p2.grid.n_points()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::BaselinePolicy;
    use crate::follower;
    use crate::numerics::{QuadratureRule, RootConfig};
    use approx::assert_relative_eq;

    fn example() -> HerdingScenario {
        HerdingScenario::example()
    }

    fn grid() -> TimeGrid {
        TimeGrid::uniform(10.0, 1025).unwrap()
    }

    fn flat_path(grid: &TimeGrid, i: f64, c: f64) -> ControlPath {
        ControlPath::sample(grid, |_| i, |_| c)
    }

    #[test]
    fn deviation_is_zero_for_matching_investments() {
        let g = grid();
        let p1 = ControlPath::sample(&g, |t| t.sin(), |_| 1.0);
        let p2 = ControlPath::sample(&g, |t| t.sin(), |_| -5.0);
        let d = average_deviation(&p1, &p2, &example().market).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn unit_offset_deviation_matches_closed_form() {
        // distance 1 everywhere: D = (1/2) * 100 (e^{0.1} - 1)
        let g = grid();
        let d = average_deviation(
            &flat_path(&g, 1.0, 0.0),
            &flat_path(&g, 0.0, 0.0),
            &example().market,
        )
        .unwrap();
        assert_relative_eq!(d, 5.258545903782381, max_relative = 1e-10);
    }

    #[test]
    fn doubling_the_offset_quadruples_the_deviation() {
        let g = grid();
        let base = flat_path(&g, 0.0, 0.0);
        let d1 = average_deviation(&flat_path(&g, 1.5, 0.0), &base, &example().market).unwrap();
        let d2 = average_deviation(&flat_path(&g, 3.0, 0.0), &base, &example().market).unwrap();
        assert_relative_eq!(d2, 4.0 * d1, max_relative = 1e-14);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let p1 = flat_path(&grid(), 1.0, 1.0);
        let p2 = flat_path(&TimeGrid::uniform(10.0, 65).unwrap(), 1.0, 1.0);
        let err = average_deviation(&p1, &p2, &example().market).unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)), "{err}");
        let err = evaluate_objective(&example(), &p1, &p2).unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)), "{err}");
    }

    #[test]
    fn idle_policy_objective_matches_closed_forms() {
        let mut s = example();
        s.herd_strength = 0.0;
        let g = grid();
        let idle = flat_path(&g, 0.0, 0.0);
        let leader = BaselinePolicy::new(s.market, s.leader).sample(&g);
        let b = evaluate_objective(&s, &idle, &leader).unwrap();
        // -(1/a) e^{-a x e^{rT}} and -(g/b)(1 - e^{-rho r T})/(rho r)
        assert_relative_eq!(b.fund_utility_term, -4.008446375920794, max_relative = 1e-9);
        assert_relative_eq!(b.consumption_utility_term, -47.58129098202021, max_relative = 1e-9);
        assert_eq!(b.deviation_penalty, 0.0);
        assert_relative_eq!(b.total, -51.58973735794101, max_relative = 1e-9);
    }

    #[test]
    fn breakdown_fields_are_consistent() {
        let s = example();
        let g = grid();
        let path = flat_path(&g, 2.0, 0.5);
        let leader = BaselinePolicy::new(s.market, s.leader).sample(&g);
        let b = evaluate_objective(&s, &path, &leader).unwrap();
        assert!(b.fund_utility_term < 0.0);
        assert!(b.consumption_utility_term < 0.0);
        assert!(b.deviation_penalty >= 0.0);
        assert_relative_eq!(
            b.total,
            b.fund_utility_term + b.consumption_utility_term - b.deviation_penalty,
            max_relative = 1e-12
        );
        let d = average_deviation(&path, &leader, &s.market).unwrap();
        assert_relative_eq!(b.deviation_penalty, s.herd_strength * d, max_relative = 1e-12);
        assert_relative_eq!(
            b.fund_utility_term,
            -(b.fund_exponent.exp()) / 0.2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn runaway_consumption_overflows_into_an_error() {
        let s = example();
        let g = grid();
        let path = flat_path(&g, 0.0, -1.0e5);
        let leader = BaselinePolicy::new(s.market, s.leader).sample(&g);
        let err = evaluate_objective(&s, &path, &leader).unwrap_err();
        assert!(matches!(err, Error::NonFiniteResult { .. }), "{err}");
    }

    #[test]
    fn herd_free_baseline_beats_nearby_policies() {
        let mut s = example();
        s.herd_strength = 0.0;
        let g = grid();
        let leader = BaselinePolicy::new(s.market, s.leader).sample(&g);
        let own = BaselinePolicy::new(s.market, s.follower);
        let best = evaluate_objective(&s, &own.sample(&g), &leader).unwrap().total;
        for (di, dc) in [(0.5, 0.0), (-0.5, 0.0), (0.0, 0.05), (0.0, -0.05), (0.3, 0.03)] {
            let contender =
                ControlPath::sample(&g, |t| own.investment(t) + di, |t| own.consumption(t) + dc);
            let value = evaluate_objective(&s, &contender, &leader).unwrap().total;
            assert!(value < best, "({di}, {dc}) scored {value} vs {best}");
        }
    }

    #[test]
    fn gap_is_zero_at_zero_epsilon_and_nonnegative_nearby() {
        let s = example();
        let g = grid();
        let sol =
            follower::solve(&s, &g, &QuadratureRule::default(), &RootConfig::default()).unwrap();
        let leader = BaselinePolicy::new(s.market, s.leader).sample(&g);
        for index in 0..5 {
            let direction = fourier_direction(&g, 6, 7, index);
            let gaps =
                variational_gap(&s, &sol.path, &leader, &direction, &[0.0, 1e-1, 1e-2, 1e-3])
                    .unwrap();
            assert_eq!(gaps[0].1, 0.0);
            for &(eps, gap) in &gaps[1..] {
                assert!(gap >= -1e-12, "direction {index}, eps {eps}: gap {gap:e}");
            }
        }
    }

    #[test]
    fn gap_shrinks_quadratically_on_the_solved_path() {
        let s = example();
        let g = grid();
        let sol =
            follower::solve(&s, &g, &QuadratureRule::default(), &RootConfig::default()).unwrap();
        let leader = BaselinePolicy::new(s.market, s.leader).sample(&g);
        let direction = fourier_direction(&g, 6, 11, 3);
        let gaps =
            variational_gap(&s, &sol.path, &leader, &direction, &[1e-1, 1e-2, 1e-3]).unwrap();
        let slope = ((gaps[0].1).ln() - (gaps[2].1).ln()) / ((gaps[0].0).ln() - (gaps[2].0).ln());
        assert!((1.9..=2.1).contains(&slope), "slope {slope}");
    }

    #[test]
    fn directions_are_reproducible_and_normalized() {
        let g = TimeGrid::uniform(10.0, 257).unwrap();
        let d1 = fourier_direction(&g, 8, 42, 5);
        let d2 = fourier_direction(&g, 8, 42, 5);
        assert_eq!(d1, d2);
        let d3 = fourier_direction(&g, 8, 42, 6);
        assert_ne!(d1, d3);
        let sup = d1
            .investment
            .iter()
            .chain(d1.consumption.iter())
            .fold(0.0f64, |acc, &x| acc.max(x.abs()));
        assert_relative_eq!(sup, 1.0, max_relative = 1e-12);
        assert!(d1.investment[0].abs() < 1e-12 && d1.consumption[0].abs() < 1e-12);
        let last = d1.investment.last().unwrap().abs();
        assert!(last < 1e-12, "terminal value {last:e}");
    }
}
