use std::fs::File;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use shard_evo_core::agents::{compare_to_ode, safe_imitation_scale, simulate_agents, AgentSimSpec};
use shard_evo_core::dynamics::{fmt_f64, integrate, payoff_trace, IntegrationMethod, Trajectory};
use shard_evo_core::ecosystem::{EcosystemConfig, StateVector};
use shard_evo_core::elastico::{
    epoch_cost, epoch_reward, epoch_time, expected_puzzles_per_processor, ConsensusTime, ElasticoParams,
    PuzzleCountMethod,
};
use shard_evo_core::equilibrium::write_candidates_csv;
use shard_evo_core::stability::{kappa_sweep, stable_equilibria, write_verdicts_csv};

use crate::config::{GameBlock, RunConfig};
use crate::error::CliError;
use crate::output::OutDir;
use crate::svg::{line_chart, Series};
use crate::{Common, StartState};

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn start_state(start: &StartState, m: usize) -> Result<StateVector, CliError> {
    let Some(v) = &start.x0 else {
        return Ok(StateVector::barycenter(m)?);
    };
    if v.len() != m {
        return Err(CliError::validation(format!("x0 has {} components, the game has {m} chains", v.len())));
    }
    let mut v = v.clone();
    if start.normalize_x0 {
        let s: f64 = v.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(CliError::validation("x0 cannot be normalised"));
        }
        v.iter_mut().for_each(|c| *c /= s);
    }
    Ok(StateVector::new(v)?)
}

fn chain_series(times: &[f64], rows: &[&[f64]], prefix: &str) -> Vec<Series> {
    let m = rows.first().map_or(0, |r| r.len());
    (0..m)
        .map(|i| Series {
            label: format!("{prefix}{}", i + 1),
            points: times.iter().zip(rows).map(|(t, r)| (*t, r[i])).collect(),
        })
        .collect()
}

pub fn simulate(common: &Common, start: &StartState, t_end: Option<f64>, step: Option<f64>) -> Result<(), CliError> {
    let run = RunConfig::load(&common.config)?;
    let cfg = run.ecosystem()?;
    let mut spec = run.integrator()?;
    if let Some(t) = t_end {
        spec.t_end = t;
    }
    if let Some(h) = step {
        spec.method = IntegrationMethod::Rk4 { step: h };
    }
    let x0 = start_state(start, cfg.chains())?;
    let traj = integrate(&cfg, &x0, &spec)?;

    let mut out = OutDir::new(&common.out)?;
    out.stage("trajectory.csv", |w| Ok(traj.write_csv(w)?))?;
    if common.svg {
        let rows: Vec<&[f64]> = traj.states.iter().map(|s| s.as_slice()).collect();
        let chart = line_chart("Population shares", "t", "x_i", &chain_series(&traj.times, &rows, "x"));
        out.stage_text("trajectory.svg", &chart)?;
    }
    let last = traj.last().as_slice().iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>();
    println!("final state at t = {}: [{}]", traj.times.last().unwrap(), last.join(", "));
    if let Some(t) = traj.settled_at {
        println!("settled at t = {t}");
    }
    report(&out.commit()?);
    Ok(())
}

pub fn payoffs(common: &Common, trajectory: &Path) -> Result<(), CliError> {
    let run = RunConfig::load(&common.config)?;
    let cfg = run.ecosystem()?;
    let file = File::open(trajectory)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", trajectory.display())))?;
    let traj = Trajectory::read_csv(file)?;
    if traj.x0.dim() != cfg.chains() {
        return Err(CliError::validation(format!(
            "trajectory has {} chains, the game has {}",
            traj.x0.dim(),
            cfg.chains()
        )));
    }
    let trace = payoff_trace(&cfg, &traj)?;

    let mut out = OutDir::new(&common.out)?;
    out.stage("payoffs.csv", |w| Ok(trace.write_csv(w)?))?;
    if common.svg {
        let rows: Vec<&[f64]> = trace.payoffs.iter().map(Vec::as_slice).collect();
        let chart = line_chart("Payoffs", "t", "u_i", &chain_series(&trace.times, &rows, "u"));
        out.stage_text("payoffs.svg", &chart)?;
    }
    println!("terminal payoff spread over live chains: {:e}", trace.terminal_spread(traj.last()));
    report(&out.commit()?);
    Ok(())
}

pub fn equilibria(common: &Common) -> Result<(), CliError> {
    let run = RunConfig::load(&common.config)?;
    let cfg = run.ecosystem()?;
    let rep = stable_equilibria(&cfg)?;
    let m = cfg.chains();

    let mut out = OutDir::new(&common.out)?;
    let cands: Vec<_> = rep.entries.iter().map(|(c, _)| c.clone()).collect();
    out.stage("candidates.csv", |w| Ok(write_candidates_csv(&cands, m, w)?))?;
    out.stage("verdicts.csv", |w| Ok(write_verdicts_csv(&rep.entries, m, w)?))?;

    for (c, v) in &rep.entries {
        let x = c.state.as_slice().iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>();
        println!("{:<12} {:<22} b = {:<10.5} x = [{}]", c.working_set.to_string(), v.classification.to_string(), c.common_payoff, x.join(", "));
    }
    println!("w* = {}", rep.w_star);
    match rep.stable_entry() {
        Some((c, _)) => println!("stable equilibrium: {}", c.working_set),
        None => println!("stable equilibrium: none"),
    }
    report(&out.commit()?);
    Ok(())
}

pub fn sweep(common: &Common, parameter: Option<String>, grid: Option<Vec<f64>>) -> Result<(), CliError> {
    let run = RunConfig::load(&common.config)?;
    let cfg = run.ecosystem()?;
    let parameter = parameter
        .or_else(|| run.sweep.as_ref().map(|s| s.parameter.clone()))
        .unwrap_or_else(|| "kappa".into());
    if parameter != "kappa" {
        return Err(CliError::validation(format!("unsupported sweep parameter `{parameter}`")));
    }
    let grid = grid
        .or_else(|| run.sweep.as_ref().map(|s| s.grid.clone()))
        .unwrap_or_else(|| (5..=15).map(|k| k as f64 / 10.0).collect());
    let points = kappa_sweep(&cfg, &grid)?;
    let m = cfg.chains();

    let mut out = OutDir::new(&common.out)?;
    out.stage("sweep.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["kappa".to_string(), "w_star".into(), "stable".into(), "working_set".into()];
        header.extend((1..=m).map(|i| format!("x{i}")));
        csv.write_record(&header)?;
        for p in &points {
            let mut row = vec![fmt_f64(p.kappa), p.w_star.to_string()];
            match &p.stable {
                Some(c) => {
                    row.push("true".into());
                    row.push(c.working_set.to_string());
                    row.extend(c.state.as_slice().iter().map(|v| fmt_f64(*v)));
                }
                None => {
                    row.push("false".into());
                    row.push(String::new());
                    row.extend(std::iter::repeat_n(String::new(), m));
                }
            }
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    })?;
    if common.svg {
        let series: Vec<Series> = (0..m)
            .map(|i| Series {
                label: format!("x{}*", i + 1),
                points: points
                    .iter()
                    .filter_map(|p| p.stable.as_ref().map(|c| (p.kappa, c.state[i])))
                    .collect(),
            })
            .collect();
        out.stage_text("sweep.svg", &line_chart("Stable equilibrium", "kappa", "x_i*", &series))?;
    }
    let missing = points.iter().filter(|p| p.stable.is_none()).count();
    println!("{} grid points, {missing} without a stable equilibrium", points.len());
    report(&out.commit()?);
    Ok(())
}

#[derive(Args)]
pub struct AgentFlags {
    /// Number of agents.
    #[arg(long)]
    pub population: Option<u64>,
    /// Revisions per agent per unit time.
    #[arg(long)]
    pub revision_rate: Option<f64>,
    /// Payoff gap giving switch probability one (default: largest possible gap).
    #[arg(long)]
    pub imitation_scale: Option<f64>,
    /// Horizon in replicator time.
    #[arg(long)]
    pub ode_horizon: Option<f64>,
    /// Recorded samples per run.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Number of runs; run k uses seed + k.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Base seed (default: drawn from entropy and echoed).
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn agents(common: &Common, start: &StartState, flags: &AgentFlags) -> Result<(), CliError> {
    let mut run = RunConfig::load(&common.config)?;
    let cfg = run.ecosystem()?;
    let block = run.agents.take().unwrap_or_default();
    let x0 = start_state(start, cfg.chains())?;

    let population = flags.population.or(block.population).unwrap_or(10_000);
    let revision_rate = flags.revision_rate.or(block.revision_rate).unwrap_or(1.0);
    let imitation_scale = flags.imitation_scale.or(block.imitation_scale).unwrap_or_else(|| safe_imitation_scale(&cfg));
    let ode_horizon = flags.ode_horizon.or(block.ode_horizon).unwrap_or(5.0);
    let samples = flags.samples.or(block.samples).unwrap_or(200);
    let seeds = flags.seeds.or(block.seeds).unwrap_or(1);
    let seed = flags.seed.or(block.seed).unwrap_or_else(rand::random);
    if seeds == 0 || samples == 0 {
        return Err(CliError::validation("seeds and samples must be at least 1"));
    }
    if !(ode_horizon.is_finite() && ode_horizon > 0.0) {
        return Err(CliError::validation(format!("ode_horizon must be positive, got {ode_horizon}")));
    }
    println!("seed = {seed}");

    let base = AgentSimSpec {
        population,
        revision_rate,
        horizon: 1.0,
        seed,
        sample_every: 1.0,
        imitation_scale,
    };
    let scale = base.time_scale();
    let horizon = ode_horizon / scale;
    let base = AgentSimSpec { horizon, sample_every: horizon / samples as f64, ..base };
    base.validate()?;

    let mut ode_spec = run.integrator()?;
    ode_spec.t_end = ode_horizon;
    if let IntegrationMethod::Rk4 { step } = ode_spec.method {
        ode_spec.method = IntegrationMethod::Rk4 { step: step.min(ode_horizon / samples as f64) };
    }
    ode_spec.stop_when_settled = false;
    let ode = integrate(&cfg, &x0, &ode_spec)?;

    let runs = (0..seeds)
        .into_par_iter()
        .map(|k| {
            let spec = AgentSimSpec { seed: seed.wrapping_add(k), ..base.clone() };
            let emp = simulate_agents(&cfg, &x0, &spec)?;
            let dev = compare_to_ode(&emp, &ode, scale)?;
            Ok((emp, dev))
        })
        .collect::<Result<Vec<_>, shard_evo_core::Error>>()?;

    let mut out = OutDir::new(&common.out)?;
    out.stage("ode.csv", |w| Ok(ode.write_csv(w)?))?;
    for (emp, _) in &runs {
        out.stage(&format!("agents_seed{}.csv", emp.seed), |w| Ok(emp.write_csv(w)?))?;
    }
    out.stage("deviation.csv", |w| {
        writeln!(w, "# time_scale={}", fmt_f64(scale))?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["seed", "sup_norm"])?;
        for (emp, dev) in &runs {
            csv.write_record([emp.seed.to_string(), fmt_f64(dev.sup_norm)])?;
        }
        csv.flush()?;
        Ok(())
    })?;
    if common.svg {
        let (emp, _) = &runs[0];
        let ode_rows: Vec<&[f64]> = ode.states.iter().map(|s| s.as_slice()).collect();
        let mut series = chain_series(&ode.times, &ode_rows, "ode x");
        let scaled: Vec<f64> = emp.times.iter().map(|t| t * scale).collect();
        let emp_rows: Vec<&[f64]> = emp.states.iter().map(Vec::as_slice).collect();
        series.extend(chain_series(&scaled, &emp_rows, "agents x"));
        out.stage_text("agents.svg", &line_chart("Agents vs replicator", "replicator time", "x_i", &series))?;
    }

    let mut sups: Vec<f64> = runs.iter().map(|(_, d)| d.sup_norm).collect();
    sups.sort_by(f64::total_cmp);
    let n = sups.len();
    let median = if n % 2 == 1 { sups[n / 2] } else { 0.5 * (sups[n / 2 - 1] + sups[n / 2]) };
    println!("time scale = {scale:e}; median sup-norm deviation over {n} runs = {median:.5} (max {:.5})", sups[n - 1]);
    report(&out.commit()?);
    Ok(())
}

#[derive(Args)]
pub struct EpochFlags {
    /// Config with an `elastico` block; replaces the per-chain flags.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    /// Also write the derived game as a `game` config block (needs --config).
    #[arg(long)]
    pub derive_game: bool,
    #[arg(long)]
    pub processors: Option<u64>,
    #[arg(long)]
    pub committee_size: Option<u64>,
    #[arg(long)]
    pub committee_exponent: Option<u32>,
    /// Seconds per PoW solution.
    #[arg(long)]
    pub puzzle_time: Option<f64>,
    /// Cost per PoW solution.
    #[arg(long)]
    pub puzzle_cost: Option<f64>,
    /// Transactions per second.
    #[arg(long)]
    pub tx_rate: Option<f64>,
    /// Price per transaction.
    #[arg(long)]
    pub tx_price: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub operator_share: f64,
    /// Constant consensus time (default: quadratic model, 103 s at 100 members).
    #[arg(long)]
    pub consensus_seconds: Option<f64>,
    /// Monte Carlo trials for f (default: asymptotic formula).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Monte Carlo seed (default: drawn from entropy and echoed).
    #[arg(long)]
    pub seed: Option<u64>,
}

fn chain_from_flags(f: &EpochFlags) -> Result<ElasticoParams, CliError> {
    fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T, CliError> {
        v.ok_or_else(|| CliError::validation(format!("--{name} is required without --config")))
    }
    let puzzle_count = match f.trials {
        Some(trials) => {
            let seed = f.seed.unwrap_or_else(rand::random);
            println!("seed = {seed}");
            PuzzleCountMethod::MonteCarlo { trials, seed }
        }
        None => PuzzleCountMethod::Asymptotic,
    };
    Ok(ElasticoParams {
        processors: need(f.processors, "processors")?,
        committee_size: need(f.committee_size, "committee-size")?,
        committee_exponent: need(f.committee_exponent, "committee-exponent")?,
        puzzle_time: need(f.puzzle_time, "puzzle-time")?,
        puzzle_cost: need(f.puzzle_cost, "puzzle-cost")?,
        tx_rate: need(f.tx_rate, "tx-rate")?,
        tx_price: need(f.tx_price, "tx-price")?,
        operator_share: f.operator_share,
        consensus: f.consensus_seconds.map_or_else(ConsensusTime::default, |seconds| ConsensusTime::Constant { seconds }),
        puzzle_count,
    })
}

#[derive(Serialize)]
struct GameDocument {
    game: GameBlock,
}

pub fn epoch_model(flags: &EpochFlags) -> Result<(), CliError> {
    let run = flags.config.as_deref().map(RunConfig::load).transpose()?;
    let chains = match &run {
        Some(r) => match &r.elastico {
            Some(e) => e.chains.clone(),
            None => return Err(CliError::validation("epoch-model needs an `elastico` config block")),
        },
        None => vec![chain_from_flags(flags)?],
    };
    if flags.derive_game && run.is_none() {
        return Err(CliError::validation("--derive-game needs --config with an `elastico` block"));
    }
    for (k, p) in chains.iter().enumerate() {
        if let PuzzleCountMethod::MonteCarlo { seed, .. } = p.puzzle_count {
            if run.is_some() {
                println!("chain {}: seed = {seed}", k + 1);
            }
        }
    }

    let rows = chains
        .iter()
        .map(|p| {
            p.validate(false)?;
            let f = expected_puzzles_per_processor(p.committees(), p.committee_size, p.processors as f64, p.puzzle_count)?;
            Ok((p, f, epoch_time(p)?, epoch_reward(p)?, epoch_cost(p)?))
        })
        .collect::<Result<Vec<_>, shard_evo_core::Error>>()?;

    let mut out = OutDir::new(&flags.out)?;
    out.stage("epoch.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record([
            "chain",
            "processors",
            "committees",
            "committee_size",
            "f",
            "f_std_error",
            "epoch_time",
            "reward",
            "cost",
        ])?;
        for (k, (p, f, t, r, c)) in rows.iter().enumerate() {
            csv.write_record([
                (k + 1).to_string(),
                p.processors.to_string(),
                p.committees().to_string(),
                p.committee_size.to_string(),
                fmt_f64(f.per_processor),
                f.std_error.map(fmt_f64).unwrap_or_default(),
                fmt_f64(*t),
                fmt_f64(*r),
                fmt_f64(*c),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })?;
    for (k, (_, f, t, r, c)) in rows.iter().enumerate() {
        println!(
            "chain {}: f = {:.6}, epoch time = {t:.4} s, reward = {r:.6}, cost = {c:.6}",
            k + 1,
            f.per_processor
        );
    }
    if flags.derive_game {
        let cfg: EcosystemConfig = run.as_ref().expect("checked above").ecosystem()?;
        let doc = GameDocument { game: GameBlock::from_config(&cfg) };
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::parse(e.to_string()))?;
        out.stage_text("game.json", &(text + "\n"))?;
        let alpha: Vec<String> = cfg.alpha().iter().map(|a| format!("{a:.6e}")).collect();
        println!("derived game: alpha = [{}], tau = {:.6e}", alpha.join(", "), cfg.tau());
    }
    report(&out.commit()?);
    Ok(())
}
