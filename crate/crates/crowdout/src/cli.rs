//! Command-line driver: solve, sweep, simulate, check, and regress.
//!
//! Every subcommand writes its outputs under `--out-dir` together with a
//! `manifest.json` recording the resolved parameters. All numeric output
//! files are deterministic for a fixed invocation (seeded noise streams,
//! fixed-format floats); only the manifest timestamp varies between runs.
//!
//! Exit codes: 0 success, 2 usage, 3 validation/data problems, 4 solver or
//! consistency failures, 5 I/O and parse failures.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::baseline::BaselinePolicy;
use crate::crowding::{self, SweepParam, SweepSpec};
use crate::econometrics::{self, DataTable};
use crate::error::{Error, Result};
use crate::follower;
use crate::model::{HerdingScenario, TimeGrid};
use crate::numerics::{QuadratureRule, RootConfig};
use crate::objective;
use crate::simulate::{self, SimConfig};
use crate::svg;

#[derive(Debug, Parser)]
#[command(
    name = "crowdout",
    version,
    about = "Optimal investment and consumption for a household that pays to deviate from a leader",
    long_about = "Solves a two-household continuous-time investment/consumption problem in \
which a follower is penalised for deviating from a leader's investment path, and \
quantifies how much that herding pressure crowds out the follower's consumption."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for output files (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Points in sampled control paths.
    #[arg(long, global = true, default_value_t = 1025, value_parser = clap::value_parser!(u64).range(2..))]
    grid: u64,

    /// Quadrature panels per integral.
    #[arg(long, global = true, default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    panels: u64,

    /// Root-finder tolerance (absolute and relative).
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Debug, Args)]
struct ScenarioArg {
    /// Scenario JSON file; a built-in example scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the follower's optimum; write sampled paths and scalar results.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArg,
    },
    /// Evaluate the crowding measure across one market parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Parameter to vary: r, v, or sigma.
        #[arg(long)]
        param: String,
        /// Lower end of the parameter range.
        #[arg(long)]
        lo: f64,
        /// Upper end of the parameter range.
        #[arg(long)]
        hi: f64,
        /// Number of sweep points.
        #[arg(long, default_value_t = 21, value_parser = clap::value_parser!(u64).range(2..))]
        n: u64,
        /// Also write an SVG line chart.
        #[arg(long)]
        svg: bool,
    },
    /// Monte Carlo the fund under the solved optimal controls.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Number of simulated paths.
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        paths: u64,
        /// Euler steps per path.
        #[arg(long, default_value_t = 1_000, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        /// Additionally dump the first N trajectories to CSV.
        #[arg(long, default_value_t = 0)]
        dump_paths: u64,
    },
    /// Run the internal consistency battery and report each check.
    Check {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, hide = true)]
        corrupt_eta: bool,
    },
    /// Fit a linear regression on CSV data, with optional transforms.
    Regress {
        /// Input CSV with a header row of column names.
        #[arg(long)]
        data: PathBuf,
        /// Response column.
        #[arg(long)]
        response: String,
        /// Regressor columns (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        regressors: Vec<String>,
        /// Columns to replace by growth rates first (drops one leading row everywhere).
        #[arg(long, value_delimiter = ',')]
        growth: Vec<String>,
        /// Columns to min-max normalize onto [0, 1].
        #[arg(long, value_delimiter = ',')]
        normalize: Vec<String>,
        /// Fit without an intercept term.
        #[arg(long)]
        no_intercept: bool,
    },
}

/// Parse arguments, run, and exit with the mapped code on failure.
pub fn run() {
    let cli = Cli::parse();
    if let Err(e) = cli.execute() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

impl Cli {
    fn execute(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::validation(
                "tol",
                format!("must be finite and positive (got {})", self.tol),
            ));
        }
        fs::create_dir_all(&self.out_dir)?;
        match &self.command {
            Command::Solve { scenario } => self.cmd_solve(scenario),
            Command::Sweep { scenario, param, lo, hi, n, svg } => {
                self.cmd_sweep(scenario, param, *lo, *hi, *n as usize, *svg)
            }
            Command::Simulate { scenario, paths, steps, dump_paths } => {
                self.cmd_simulate(scenario, *paths as usize, *steps as usize, *dump_paths as usize)
            }
            Command::Check { scenario, corrupt_eta } => self.cmd_check(scenario, *corrupt_eta),
            Command::Regress { data, response, regressors, growth, normalize, no_intercept } => {
                self.cmd_regress(data, response, regressors, growth, normalize, !*no_intercept)
            }
        }
    }

    fn numeric(&self) -> (QuadratureRule, RootConfig) {
        (
            QuadratureRule::gauss(self.panels as usize),
            RootConfig { abs_tol: self.tol, rel_tol: self.tol, max_iter: 200 },
        )
    }

    fn load_scenario(&self, arg: &ScenarioArg) -> Result<(HerdingScenario, String)> {
        match &arg.scenario {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                Ok((HerdingScenario::from_json_str(&text)?, path.display().to_string()))
            }
            None => Ok((HerdingScenario::example(), "<built-in example>".into())),
        }
    }

    fn path_grid(&self, s: &HerdingScenario) -> Result<TimeGrid> {
        TimeGrid::uniform(s.market.horizon, self.grid as usize)
    }

    fn write_manifest(
        &self,
        subcommand: &str,
        inputs: serde_json::Value,
        outputs: &[&str],
    ) -> Result<()> {
        let manifest = json!({
            "subcommand": subcommand,
            "version": env!("CARGO_PKG_VERSION"),
            "timestamp": chrono::Utc::now().to_rfc3339(),
            "parameters": {
                "seed": self.seed,
                "grid": self.grid,
                "panels": self.panels,
                "tol": self.tol,
            },
            "inputs": inputs,
            "out_dir": self.out_dir.display().to_string(),
            "outputs": outputs,
        });
        write_text(&self.out_dir.join("manifest.json"), &format!("{manifest:#}\n"))
    }

    fn cmd_solve(&self, arg: &ScenarioArg) -> Result<()> {
        let (s, source) = self.load_scenario(arg)?;
        let grid = self.path_grid(&s)?;
        let (rule, cfg) = self.numeric();
        let sol = follower::solve(&s, &grid, &rule, &cfg)?;
        let own = BaselinePolicy::new(s.market, s.follower);
        let leader = BaselinePolicy::new(s.market, s.leader);

        let mut csv = String::from("t,I1_star,C1_star,I1_bar,C1_bar,I2_bar,C2_bar\n");
        for (i, &t) in grid.times().iter().enumerate() {
            csv.push_str(&format!(
                "{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e}\n",
                t,
                sol.path.investment[i],
                sol.path.consumption[i],
                own.investment(t),
                own.consumption(t),
                leader.investment(t),
                leader.consumption(t),
            ));
        }
        write_text(&self.out_dir.join("paths.csv"), &csv)?;

        let scalars = json!({
            "eta": sol.eta,
            "log_eta": sol.log_eta,
            "k1_star": sol.k1_star,
            "k1_bar": own.intercept(),
            "k2_bar": leader.intercept(),
            "crowding": sol.crowding,
            "crowding_limit": crowding::crowding_out_limit(&s),
            "iterations": sol.diagnostics.iterations,
            "final_residual": sol.diagnostics.final_residual,
            "quadrature_est_error": sol.diagnostics.quadrature_est_error,
            "warnings": sol.diagnostics.warnings,
        });
        write_text(&self.out_dir.join("scalars.json"), &format!("{scalars:#}\n"))?;
        self.write_manifest(
            "solve",
            json!({ "scenario": source }),
            &["paths.csv", "scalars.json"],
        )?;

        println!("eta      = {:.12e}", sol.eta);
        println!("k1_star  = {:.12e}", sol.k1_star);
        println!("crowding = {:.12e}", sol.crowding);
        for w in &sol.diagnostics.warnings {
            println!("warning: {w}");
        }
        Ok(())
    }

    fn cmd_sweep(
        &self,
        arg: &ScenarioArg,
        param: &str,
        lo: f64,
        hi: f64,
        n: usize,
        with_svg: bool,
    ) -> Result<()> {
        let (s, source) = self.load_scenario(arg)?;
        let parameter: SweepParam = param.parse()?;
        let spec = SweepSpec { parameter, lo, hi, n_points: n, base: s };
        let (rule, cfg) = self.numeric();
        let result = crowding::sweep(&spec, &rule, &cfg)?;

        let mut buf = Vec::new();
        result.write_csv(&mut buf)?;
        fs::write(self.out_dir.join("sweep.csv"), &buf)?;
        let mut outputs = vec!["sweep.csv"];

        if with_svg {
            let points: Vec<(f64, f64)> =
                result.points.iter().map(|p| (p.value, p.crowding)).collect();
            let chart = svg::line_chart(
                &format!("crowding-out consumption vs {parameter}"),
                &parameter.to_string(),
                "crowding-out consumption",
                &points,
            );
            write_text(&self.out_dir.join("sweep.svg"), &chart)?;
            outputs.push("sweep.svg");
        }
        self.write_manifest(
            "sweep",
            json!({ "scenario": source, "param": param, "lo": lo, "hi": hi, "n": n }),
            &outputs,
        )?;

        let evaluated = result.points.iter().filter(|p| p.note.is_none()).count();
        println!("evaluated {evaluated}/{} points for {parameter}", result.points.len());
        for p in result.points.iter().filter(|p| p.note.is_some()) {
            println!("warning: {parameter} = {}: {}", p.value, p.note.as_deref().unwrap_or(""));
        }
        Ok(())
    }

    fn cmd_simulate(
        &self,
        arg: &ScenarioArg,
        paths: usize,
        steps: usize,
        dump_paths: usize,
    ) -> Result<()> {
        let (s, source) = self.load_scenario(arg)?;
        let grid = self.path_grid(&s)?;
        let (rule, cfg) = self.numeric();
        let sol = follower::solve(&s, &grid, &rule, &cfg)?;
        let sim_cfg = SimConfig { n_paths: paths, n_steps: steps, seed: self.seed };
        let result = simulate::simulate_fund(&s.follower, &s.market, &sol.path, &sim_cfg)?;

        let record = json!({ "config": sim_cfg, "eta": sol.eta, "result": result });
        write_text(&self.out_dir.join("simulation.json"), &format!("{record:#}\n"))?;
        let mut outputs = vec!["simulation.json"];

        if dump_paths > 0 {
            let trajectories = simulate::sample_trajectories(
                &s.follower,
                &s.market,
                &sol.path,
                &sim_cfg,
                dump_paths,
            )?;
            let dt = s.market.horizon / steps as f64;
            let mut csv = String::from("path_id,t,X\n");
            for (id, states) in trajectories.iter().enumerate() {
                for (j, &x) in states.iter().enumerate() {
                    csv.push_str(&format!("{id},{:.14e},{x:.14e}\n", j as f64 * dt));
                }
            }
            write_text(&self.out_dir.join("paths_dump.csv"), &csv)?;
            outputs.push("paths_dump.csv");
        }
        self.write_manifest(
            "simulate",
            json!({ "scenario": source, "paths": paths, "steps": steps, "dump_paths": dump_paths }),
            &outputs,
        )?;

        println!(
            "terminal fund: mc mean {:.8e} (se {:.2e}) vs analytic {:.8e}",
            result.terminal_fund_mean_mc, result.terminal_fund_mean_se, result.analytic_mean
        );
        println!(
            "terminal fund: mc var  {:.8e} (se {:.2e}) vs analytic {:.8e}",
            result.terminal_fund_var_mc, result.terminal_fund_var_se, result.analytic_var
        );
        println!(
            "expected utility: mc {:.8e} (se {:.2e}) vs analytic {:.8e}",
            result.mc_mean_utility, result.mc_std_error, result.analytic_utility
        );
        Ok(())
    }

    fn cmd_check(&self, arg: &ScenarioArg, corrupt_eta: bool) -> Result<()> {
        let (s, source) = self.load_scenario(arg)?;
        let grid = self.path_grid(&s)?;
        let (rule, cfg) = self.numeric();
        let sol = follower::solve(&s, &grid, &rule, &cfg)?;
        // hidden negative control: report a perturbed multiplier so the
        // consistency check below must trip
        let reported_eta = if corrupt_eta { sol.eta * 1.001 } else { sol.eta };
        let mut checks: Vec<(&str, bool, String)> = Vec::new();

        {
            let mut free = s;
            free.herd_strength = 0.0;
            let free_sol = follower::solve(&free, &grid, &rule, &cfg)?;
            let own = BaselinePolicy::new(free.market, free.follower);
            let max_gap = grid
                .times()
                .iter()
                .zip(&free_sol.path.investment)
                .map(|(&t, &i)| {
                    let b = own.investment(t);
                    (i - b).abs() / b.abs().max(1e-15)
                })
                .fold(0.0, f64::max);
            let k_gap =
                (free_sol.k1_star - own.intercept()).abs() / own.intercept().abs().max(1e-15);
            checks.push((
                "zero herd strength reduces to the baseline",
                max_gap < 1e-9 && k_gap < 1e-9 && free_sol.crowding <= 1e-12,
                format!(
                    "max investment gap {max_gap:.2e}, intercept gap {k_gap:.2e}, crowding {:.2e}",
                    free_sol.crowding
                ),
            ));
        }

        {
            let mut eq = s;
            eq.leader.risk_aversion = eq.follower.risk_aversion;
            let eq_sol = follower::solve(&eq, &grid, &rule, &cfg)?;
            checks.push((
                "equal risk aversion yields zero crowding",
                eq_sol.crowding <= 1e-12,
                format!("crowding {:.2e}", eq_sol.crowding),
            ));
        }

        {
            let f = &s.follower;
            let implied = f.consumption_weight
                * (-s.market.rate * s.market.horizon - f.consumption_curvature * sol.k1_star).exp();
            let rel = (reported_eta - implied).abs() / implied.abs().max(1e-300);
            checks.push((
                "multiplier matches the consumption intercept",
                rel < 1e-9,
                format!("relative gap {rel:.2e}"),
            ));
        }

        {
            let fine = follower::solve_eta(&s, &rule.with_panels(rule.panels * 2), &cfg)?;
            let rel = (fine.eta - sol.eta).abs() / sol.eta;
            checks.push((
                "multiplier is stable under panel doubling",
                rel < 1e-8,
                format!("relative move {rel:.2e}"),
            ));
        }

        {
            let leader_path = BaselinePolicy::new(s.market, s.leader).sample(&grid);
            let mut min_gap = f64::INFINITY;
            for index in 0..20 {
                let direction = objective::fourier_direction(&grid, 8, self.seed, index);
                for (_, gap) in objective::variational_gap(
                    &s,
                    &sol.path,
                    &leader_path,
                    &direction,
                    &[1e-2, 1e-3],
                )? {
                    min_gap = min_gap.min(gap);
                }
            }
            checks.push((
                "no tested perturbation improves the objective",
                min_gap >= -1e-12,
                format!("minimum gap {min_gap:.2e}"),
            ));
        }

        {
            let sim_cfg = SimConfig { n_paths: 20_000, n_steps: 400, seed: self.seed };
            let r = simulate::simulate_fund(&s.follower, &s.market, &sol.path, &sim_cfg)?;
            let mean_ok =
                (r.terminal_fund_mean_mc - r.analytic_mean).abs() < 4.0 * r.terminal_fund_mean_se;
            let var_ok =
                (r.terminal_fund_var_mc - r.analytic_var).abs() < 4.0 * r.terminal_fund_var_se;
            let util_ok = (r.mc_mean_utility - r.analytic_utility).abs() < 3.0 * r.mc_std_error;
            let leader_path = BaselinePolicy::new(s.market, s.leader).sample(&grid);
            let fund_term =
                objective::evaluate_objective(&s, &sol.path, &leader_path)?.fund_utility_term;
            let fund_rel = (r.analytic_utility - fund_term).abs() / fund_term.abs();
            checks.push((
                "simulation agrees with the exact law",
                mean_ok && var_ok && util_ok && fund_rel < 1e-10,
                format!(
                    "mean {mean_ok}, variance {var_ok}, utility {util_ok}, fund-term gap {fund_rel:.2e}"
                ),
            ));
        }

        let total = checks.len();
        let failed = checks.iter().filter(|(_, ok, _)| !ok).count();
        for (name, ok, detail) in &checks {
            println!("[{}] {name} — {detail}", if *ok { " ok " } else { "FAIL" });
        }
        println!("{}/{} checks passed", total - failed, total);
        self.write_manifest(
            "check",
            json!({ "scenario": source, "corrupt_eta": corrupt_eta }),
            &[],
        )?;
        if failed > 0 {
            return Err(Error::CheckFailed { failed, total });
        }
        Ok(())
    }

    fn cmd_regress(
        &self,
        data: &Path,
        response: &str,
        regressors: &[String],
        growth: &[String],
        normalize: &[String],
        intercept: bool,
    ) -> Result<()> {
        let text = fs::read_to_string(data)?;
        let mut table = DataTable::from_csv_str(&text)?;
        if !growth.is_empty() {
            table = table.with_growth(growth)?;
        }
        if !normalize.is_empty() {
            table = table.with_normalized(normalize)?;
        }
        let report = econometrics::ols_fit(&table, response, regressors, intercept)?;
        let mut rendered = econometrics::render_report(&report);
        if table.dropped_rows() > 0 {
            rendered.push_str(&format!(
                "\nRows dropped during ingestion (incomplete): {}\n",
                table.dropped_rows()
            ));
        }
        print!("{rendered}");
        write_text(&self.out_dir.join("regression.txt"), &rendered)?;
        let machine = serde_json::to_string_pretty(&report).expect("serialize report");
        write_text(&self.out_dir.join("regression.json"), &format!("{machine}\n"))?;
        self.write_manifest(
            "regress",
            json!({
                "data": data.display().to_string(),
                "response": response,
                "regressors": regressors,
                "growth": growth,
                "normalize": normalize,
                "intercept": intercept,
            }),
            &["regression.txt", "regression.json"],
        )
    }
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content)?;
    Ok(())
}
