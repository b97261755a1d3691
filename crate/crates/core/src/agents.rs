//! Finite-population simulation of processors switching chains by imitation.
//!
//! Each of `N` agents revises at rate `revision_rate`; the superposition of
//! these clocks is a single Poisson stream of rate `N·revision_rate`. At a
//! revision the reviser, sitting on chain `i`, samples another agent on chain
//! `j` and moves there with probability `max(0, u_j − u_i)/imitation_scale`.
//! The mean field of this protocol is the replicator equation run at speed
//! `revision_rate/imitation_scale`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::dynamics::{fmt_f64, Trajectory};
use crate::ecosystem::{EcosystemConfig, StateVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSimSpec {
    pub population: u64,
    /// Expected revisions per agent per unit time.
    pub revision_rate: f64,
    pub horizon: f64,
    pub seed: u64,
    pub sample_every: f64,
    /// Divides payoff gaps into switch probabilities.
    pub imitation_scale: f64,
}

impl AgentSimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidConfig(format!("population must be at least 2, got {}", self.population)));
        }
        for (name, v) in [
            ("revision_rate", self.revision_rate),
            ("horizon", self.horizon),
            ("sample_every", self.sample_every),
            ("imitation_scale", self.imitation_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Factor mapping agent time to replicator time.
    pub fn time_scale(&self) -> f64 {
        self.revision_rate / self.imitation_scale
    }
}

/// An imitation scale no payoff gap on the simplex can exceed:
/// `max_i α_i/τ − min_i (α_i/(1+τ) − h(1))`.
pub fn safe_imitation_scale(cfg: &EcosystemConfig) -> f64 {
    let top = cfg.alpha().iter().map(|a| a / cfg.tau()).fold(f64::NEG_INFINITY, f64::max);
    let bottom = cfg.alpha().iter().map(|&a| cfg.payoff_curve(a, 1.0)).fold(f64::INFINITY, f64::min);
    top - bottom
}

/// Integer counts summing to `n` closest to `n·x` (largest-remainder method,
/// ties to the lower index).
pub fn largest_remainder(x: &StateVector, n: u64) -> Vec<u64> {
    let scaled: Vec<f64> = x.as_slice().iter().map(|v| v.max(0.0) * n as f64).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|v| v.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (scaled[a] - scaled[a].floor(), scaled[b] - scaled[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    if assigned <= n {
        for &i in order.iter().take((n - assigned) as usize) {
            counts[i] += 1;
        }
    } else {
        // only reachable through rounding noise in x summing slightly above one
        let mut excess = assigned - n;
        for &i in order.iter().rev() {
            if excess == 0 {
                break;
            }
            let take = excess.min(counts[i]);
            counts[i] -= take;
            excess -= take;
        }
    }
    counts
}

/// How a reviser on chain `i` reacts to a sampled peer on chain `j`.
pub trait RevisionProtocol: Sync {
    /// Probability of switching given the two payoffs.
    fn switch_probability(&self, u_own: f64, u_peer: f64) -> Result<f64>;
}

/// Switch with probability proportional to the positive payoff gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseImitation {
    pub scale: f64,
}

impl RevisionProtocol for PairwiseImitation {
    fn switch_probability(&self, u_own: f64, u_peer: f64) -> Result<f64> {
        let gap = u_peer - u_own;
        if gap <= 0.0 {
            return Ok(0.0);
        }
        if gap > self.scale {
            return Err(Error::InvalidConfig(format!(
                "imitation_scale {} below observed payoff difference {gap}",
                self.scale
            )));
        }
        Ok(gap / self.scale)
    }
}

/// Event-by-event state of the agent population.
pub struct AgentSim<'a, P: RevisionProtocol> {
    cfg: &'a EcosystemConfig,
    protocol: P,
    counts: Vec<u64>,
    payoffs: Vec<f64>,
    n: u64,
    rng: ChaCha8Rng,
}

impl<'a, P: RevisionProtocol> AgentSim<'a, P> {
    pub fn new(cfg: &'a EcosystemConfig, counts: Vec<u64>, protocol: P, seed: u64) -> Result<Self> {
        if counts.len() != cfg.chains() {
            return Err(Error::InvalidState(format!(
                "{} counts for {} chains",
                counts.len(),
                cfg.chains()
            )));
        }
        let n: u64 = counts.iter().sum();
        if n < 2 {
            return Err(Error::InvalidState(format!("population must be at least 2, got {n}")));
        }
        let payoffs = (0..counts.len()).map(|i| cfg.payoff_at(i, counts[i] as f64 / n as f64)).collect();
        Ok(Self { cfg, protocol, counts, payoffs, n, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }

    fn chain_of(&self, mut agent: u64) -> usize {
        for (i, &c) in self.counts.iter().enumerate() {
            if agent < c {
                return i;
            }
            agent -= c;
        }
        unreachable!("agent index below population size")
    }

    /// One revision. Returns `Some((from, to))` when the reviser switched.
    pub fn revise(&mut self) -> Result<Option<(usize, usize)>> {
        let agent = self.rng.random_range(0..self.n);
        let mut peer = self.rng.random_range(0..self.n - 1);
        if peer >= agent {
            peer += 1;
        }
        let (i, j) = (self.chain_of(agent), self.chain_of(peer));
        if i == j {
            return Ok(None);
        }
        let p = self.protocol.switch_probability(self.payoffs[i], self.payoffs[j])?;
        if p > 0.0 && self.rng.random::<f64>() < p {
            self.counts[i] -= 1;
            self.counts[j] += 1;
            let n = self.n as f64;
            self.payoffs[i] = self.cfg.payoff_at(i, self.counts[i] as f64 / n);
            self.payoffs[j] = self.cfg.payoff_at(j, self.counts[j] as f64 / n);
            return Ok(Some((i, j)));
        }
        Ok(None)
    }
}

/// Sampled finite-population path.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
    pub seed: u64,
}

impl EmpiricalTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `# seed=<seed>` line, then `t,x1..xM,n1..nM`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# seed={}", self.seed)?;
        let m = self.counts.first().map_or(0, Vec::len);
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=m).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("n{i}")));
        out.write_record(&header)?;
        for k in 0..self.times.len() {
            let mut row = vec![fmt_f64(self.times[k])];
            row.extend(self.states[k].iter().map(|v| fmt_f64(*v)));
            row.extend(self.counts[k].iter().map(u64::to_string));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs pairwise imitation from the rounded counts of `x0` up to `spec.horizon`.
pub fn simulate_agents(cfg: &EcosystemConfig, x0: &StateVector, spec: &AgentSimSpec) -> Result<EmpiricalTrajectory> {
    simulate_with(cfg, x0, spec, PairwiseImitation { scale: spec.imitation_scale })
}

/// Same as [`simulate_agents`] with an arbitrary revision protocol.
pub fn simulate_with<P: RevisionProtocol>(
    cfg: &EcosystemConfig,
    x0: &StateVector,
    spec: &AgentSimSpec,
    protocol: P,
) -> Result<EmpiricalTrajectory> {
    spec.validate()?;
    if x0.dim() != cfg.chains() {
        return Err(Error::InvalidState("initial state dimension differs from configuration".into()));
    }
    let counts = largest_remainder(x0, spec.population);
    let mut sim = AgentSim::new(cfg, counts, protocol, spec.seed)?;
    let clock = Exp::new(spec.population as f64 * spec.revision_rate)
        .map_err(|e| Error::InvalidConfig(format!("event rate: {e}")))?;

    let mut sample_times: Vec<f64> = (0..)
        .map(|k| k as f64 * spec.sample_every)
        .take_while(|&t| t < spec.horizon)
        .collect();
    sample_times.push(spec.horizon);

    let mut traj = EmpiricalTrajectory {
        times: Vec::with_capacity(sample_times.len()),
        states: Vec::with_capacity(sample_times.len()),
        counts: Vec::with_capacity(sample_times.len()),
        seed: spec.seed,
    };
    let mut t = 0.0;
    for &ts in &sample_times {
        loop {
            let dt: f64 = clock.sample(&mut sim.rng);
            if t + dt > ts {
                // memorylessness lets us resample the remainder after the sample
                t = ts;
                break;
            }
            t += dt;
            sim.revise()?;
        }
        traj.times.push(ts);
        traj.states.push(sim.fractions());
        traj.counts.push(sim.counts().to_vec());
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub sup_norm: f64,
    /// `(agent time, ‖x_emp − x_ode‖∞)` at every empirical sample.
    pub per_time: Vec<(f64, f64)>,
}

/// Compares `emp` with `ode` evaluated at `t·time_scale` by linear interpolation.
pub fn compare_to_ode(emp: &EmpiricalTrajectory, ode: &Trajectory, time_scale: f64) -> Result<DeviationReport> {
    if !(time_scale.is_finite() && time_scale > 0.0) {
        return Err(Error::InvalidConfig(format!("time_scale must be positive, got {time_scale}")));
    }
    let end = ode.times.last().copied().unwrap_or(0.0);
    let mut per_time = Vec::with_capacity(emp.len());
    let mut sup = 0.0f64;
    for (t, x) in emp.times.iter().zip(&emp.states) {
        let s = t * time_scale;
        // tolerate round-off in the rescaled horizon
        let s = if s > end && s - end <= 1e-9 * end.max(1.0) { end } else { s };
        let y = ode.interpolate(s).ok_or_else(|| {
            Error::InvalidState(format!("ODE trajectory ends at {end}, empirical sample needs {s}"))
        })?;
        if y.len() != x.len() {
            return Err(Error::InvalidState("trajectories differ in dimension".into()));
        }
        let d = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        sup = sup.max(d);
        per_time.push((*t, d));
    }
    Ok(DeviationReport { sup_norm: sup, per_time })
}

/// Expected change of the fractions caused by one revision event at `counts`,
/// summed exactly over reviser and peer choices.
pub fn expected_event_displacement<P: RevisionProtocol>(
    cfg: &EcosystemConfig,
    counts: &[u64],
    protocol: &P,
) -> Result<Vec<f64>> {
    let n: u64 = counts.iter().sum();
    if counts.len() != cfg.chains() || n < 2 {
        return Err(Error::InvalidState("counts must match the chains and total at least 2".into()));
    }
    let nf = n as f64;
    let u: Vec<f64> = (0..counts.len()).map(|i| cfg.payoff_at(i, counts[i] as f64 / nf)).collect();
    let mut drift = vec![0.0; counts.len()];
    for i in 0..counts.len() {
        for j in 0..counts.len() {
            if i == j || counts[i] == 0 || counts[j] == 0 {
                continue;
            }
            let pick = (counts[i] as f64 / nf) * (counts[j] as f64 / (nf - 1.0));
            let flow = pick * protocol.switch_probability(u[i], u[j])? / nf;
            drift[i] -= flow;
            drift[j] += flow;
        }
    }
    Ok(drift)
}
