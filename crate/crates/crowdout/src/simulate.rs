//! Euler-Maruyama simulation of the fund under deterministic controls.
//!
//! For deterministic investment and consumption the terminal fund is
//! Gaussian with closed-form mean and variance, so the simulator is a
//! validation device, not a numerical necessity: the exact law is the
//! oracle the sample moments are held against.
//!
//! Reproducibility contract: path `i` draws its noise from the counter
//! stream `(seed, i)`, so results do not depend on scheduling or on how
//! the paths are batched, and re-simulating any single path in isolation
//! reproduces it bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ControlPath, HouseholdParams, MarketParams};
use crate::numerics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { n_paths: 100_000, n_steps: 1_000, seed: 42 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::validation("paths", "need at least one path"));
        }
        if self.n_steps == 0 {
            return Err(Error::validation("steps", "need at least one step"));
        }
        Ok(())
    }
}

/// Sample statistics of the simulated terminal fund next to their exact
/// counterparts. Standard errors are estimated from the same sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimResult {
    pub mc_mean_utility: f64,
    pub mc_std_error: f64,
    pub analytic_utility: f64,
    pub terminal_fund_mean_mc: f64,
    pub terminal_fund_var_mc: f64,
    pub terminal_fund_mean_se: f64,
    pub terminal_fund_var_se: f64,
    pub analytic_mean: f64,
    pub analytic_var: f64,
}

/// Exact Gaussian moments of the terminal fund:
/// `mean = x e^{rT} + int e^{r(T-t)} [vI - C] dt`,
/// `var = s^2 int e^{2r(T-t)} I^2 dt`,
/// both as Simpson sums over the sampled path.
pub fn analytic_terminal_moments(
    h: &HouseholdParams,
    m: &MarketParams,
    path: &ControlPath,
) -> Result<(f64, f64)> {
    require_horizon(m, path)?;
    let step = path.grid.step();
    let drift: Vec<f64> = path
        .grid
        .times()
        .iter()
        .zip(path.investment.iter().zip(path.consumption.iter()))
        .map(|(&t, (&i, &c))| (m.rate * (m.horizon - t)).exp() * (m.excess_return * i - c))
        .collect();
    let diffusion: Vec<f64> = path
        .grid
        .times()
        .iter()
        .zip(path.investment.iter())
        .map(|(&t, &i)| {
            let a = (m.rate * (m.horizon - t)).exp();
            a * a * i * i
        })
        .collect();
    let mean = h.initial_fund * m.compounding() + numerics::integrate_samples(&drift, step)?;
    let var = m.volatility * m.volatility * numerics::integrate_samples(&diffusion, step)?;
    Ok((mean, var))
}

/// Simulate the fund to the horizon and compare sample statistics with the
/// exact Gaussian law. The expected exponential utility of the terminal
/// fund is also reported both ways (sample average versus the Gaussian
/// moment-generating function).
pub fn simulate_fund(
    h: &HouseholdParams,
    m: &MarketParams,
    path: &ControlPath,
    cfg: &SimConfig,
) -> Result<SimResult> {
    cfg.validate()?;
    require_horizon(m, path)?;
    let (analytic_mean, analytic_var) = analytic_terminal_moments(h, m, path)?;
    let alpha = h.risk_aversion;
    let analytic_utility =
        -(-alpha * analytic_mean + alpha * alpha * analytic_var / 2.0).exp() / alpha;
    if !analytic_utility.is_finite() {
        return Err(Error::NonFiniteResult { what: "analytic expected utility".into() });
    }

    let steps = StepControls::tabulate(m, path, cfg.n_steps);
    let mut terminals = Vec::with_capacity(cfg.n_paths);
    for i in 0..cfg.n_paths {
        terminals.push(steps.run_path(h, m, stream_rng(cfg.seed, i), None));
    }
    let utilities: Vec<f64> = terminals.iter().map(|&x| -(-alpha * x).exp() / alpha).collect();
    if utilities.iter().any(|u| !u.is_finite()) {
        return Err(Error::NonFiniteResult { what: "sampled utility".into() });
    }

    let n = cfg.n_paths as f64;
    let mean = numerics::pairwise_sum(&terminals) / n;
    let mean_utility = numerics::pairwise_sum(&utilities) / n;
    let (var, mean_se, var_se, utility_se) = if cfg.n_paths > 1 {
        let centered: Vec<f64> = terminals.iter().map(|&x| (x - mean) * (x - mean)).collect();
        let var = numerics::pairwise_sum(&centered) / (n - 1.0);
        let centered_u: Vec<f64> =
            utilities.iter().map(|&u| (u - mean_utility) * (u - mean_utility)).collect();
        let var_u = numerics::pairwise_sum(&centered_u) / (n - 1.0);
        // sampling error of the variance itself, under the Gaussian law
        let var_se = var * (2.0 / (n - 1.0)).sqrt();
        (var, (var / n).sqrt(), var_se, (var_u / n).sqrt())
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };

    Ok(SimResult {
        mc_mean_utility: mean_utility,
        mc_std_error: utility_se,
        analytic_utility,
        terminal_fund_mean_mc: mean,
        terminal_fund_var_mc: var,
        terminal_fund_mean_se: mean_se,
        terminal_fund_var_se: var_se,
        analytic_mean,
        analytic_var,
    })
}

/// Re-simulate the first `keep` paths, recording every state. Thanks to the
/// per-path noise streams each trajectory's terminal value matches the
/// corresponding path of `simulate_fund` exactly.
pub fn sample_trajectories(
    h: &HouseholdParams,
    m: &MarketParams,
    path: &ControlPath,
    cfg: &SimConfig,
    keep: usize,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    require_horizon(m, path)?;
    let steps = StepControls::tabulate(m, path, cfg.n_steps);
    let mut out = Vec::with_capacity(keep.min(cfg.n_paths));
    for i in 0..keep.min(cfg.n_paths) {
        let mut states = Vec::with_capacity(cfg.n_steps + 1);
        steps.run_path(h, m, stream_rng(cfg.seed, i), Some(&mut states));
        out.push(states);
    }
    Ok(out)
}

fn stream_rng(seed: u64, path_index: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path_index as u64);
    rng
}

/// Controls held piecewise constant (left value) over each Euler step.
struct StepControls {
    dt: f64,
    sqrt_dt: f64,
    drift: Vec<f64>,     // vI - C at the step's left endpoint
    diffusion: Vec<f64>, // sigma I at the step's left endpoint
}

impl StepControls {
    fn tabulate(m: &MarketParams, path: &ControlPath, n_steps: usize) -> Self {
        let dt = m.horizon / n_steps as f64;
        let grid_step = path.grid.step();
        let last = path.grid.n_points() - 1;
        let mut drift = Vec::with_capacity(n_steps);
        let mut diffusion = Vec::with_capacity(n_steps);
        for j in 0..n_steps {
            let t = j as f64 * dt;
            // nudge before flooring so exact grid hits resolve to their own index
            let idx = ((t / grid_step + 1e-9).floor() as usize).min(last);
            drift.push(m.excess_return * path.investment[idx] - path.consumption[idx]);
            diffusion.push(m.volatility * path.investment[idx]);
        }
        StepControls { dt, sqrt_dt: dt.sqrt(), drift, diffusion }
    }

    fn run_path(
        &self,
        h: &HouseholdParams,
        m: &MarketParams,
        mut rng: ChaCha12Rng,
        mut record: Option<&mut Vec<f64>>,
    ) -> f64 {
        let mut x = h.initial_fund;
        if let Some(states) = record.as_deref_mut() {
            states.push(x);
        }
        for j in 0..self.drift.len() {
            let z: f64 = rng.sample(StandardNormal);
            x += (m.rate * x + self.drift[j]) * self.dt + self.diffusion[j] * self.sqrt_dt * z;
            if let Some(states) = record.as_deref_mut() {
                states.push(x);
            }
        }
        x
    }
}

fn require_horizon(m: &MarketParams, path: &ControlPath) -> Result<()> {
    if (path.grid.horizon() - m.horizon).abs() > 1e-12 * m.horizon.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "control path ends at {} but the simulation horizon is {}",
            path.grid.horizon(),
            m.horizon
        )));
    }
    Ok(())
}
