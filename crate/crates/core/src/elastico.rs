//! Epoch timing, reward and cost of a sharded chain.
//!
//! Committee formation is modelled as an extended coupon collector: `m = 2^s`
//! committees each need `c` members, every PoW solution lands in a uniformly
//! random committee, and solutions landing in a full committee are wasted.
//! `f(n)` is the expected number of solutions per processor.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecosystem::{CostCurve, EcosystemConfig, TabulatedCurve};
use crate::{Error, Result};

/// Number of samples of the derived cost curve over `[0, 1]`.
pub const DERIVED_GRID: usize = 257;

/// Largest bin count accepted by the estimators.
pub const MAX_BINS: u64 = 1 << 32;

const MC_BLOCK: u64 = 1024;

/// How `f(n)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum PuzzleCountMethod {
    /// Sample mean over `trials` simulated fills. Identical seeds give
    /// identical estimates regardless of thread count.
    MonteCarlo { trials: u64, seed: u64 },
    /// `m·H_m` for `c = 1`, `m(ln m + (c−1) ln ln m)` otherwise, floored at
    /// the trivial lower bound `m·c`.
    Asymptotic,
}

impl Default for PuzzleCountMethod {
    fn default() -> Self {
        PuzzleCountMethod::Asymptotic
    }
}

/// Consensus time `g(c)` as a function of committee size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ConsensusTime {
    Constant { seconds: f64 },
    /// `base + per_member_sq · c²`.
    Quadratic { base: f64, per_member_sq: f64 },
}

impl Default for ConsensusTime {
    /// Quadratic model giving 103 s at `c = 100`.
    fn default() -> Self {
        ConsensusTime::Quadratic { base: 93.0, per_member_sq: 1e-3 }
    }
}

impl ConsensusTime {
    pub fn seconds(&self, committee_size: u64) -> f64 {
        match *self {
            ConsensusTime::Constant { seconds } => seconds,
            ConsensusTime::Quadratic { base, per_member_sq } => {
                let c = committee_size as f64;
                base + per_member_sq * c * c
            }
        }
    }
}

/// Protocol-level parameters of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticoParams {
    /// Total processors `n`.
    pub processors: u64,
    /// Processors per committee `c`.
    pub committee_size: u64,
    /// There are `2^s` committees.
    pub committee_exponent: u32,
    /// Seconds per PoW solution `T`.
    pub puzzle_time: f64,
    /// Cost per PoW solution `ς`.
    pub puzzle_cost: f64,
    /// Transactions per second `μ`.
    pub tx_rate: f64,
    /// Price per transaction `r`.
    pub tx_price: f64,
    /// Operator share `τ̃`, in effective processors.
    pub operator_share: f64,
    #[serde(default)]
    pub consensus: ConsensusTime,
    #[serde(default)]
    pub puzzle_count: PuzzleCountMethod,
}

impl ElasticoParams {
    pub fn committees(&self) -> u64 {
        1u64 << self.committee_exponent
    }

    /// Checks positivity of all quantities. In strict mode also requires a
    /// full partition `n = 2^s · c`.
    pub fn validate(&self, strict: bool) -> Result<()> {
        if self.processors == 0 || self.committee_size == 0 {
            return Err(Error::InvalidConfig(
                "processor count and committee size must be at least 1".into(),
            ));
        }
        if self.committee_exponent >= 32 {
            return Err(Error::InvalidConfig(format!(
                "committee exponent {} too large",
                self.committee_exponent
            )));
        }
        for (name, v) in [
            ("puzzle_time", self.puzzle_time),
            ("puzzle_cost", self.puzzle_cost),
            ("tx_rate", self.tx_rate),
            ("tx_price", self.tx_price),
            ("operator_share", self.operator_share),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be non-negative, got {v}")));
            }
        }
        let g = self.consensus.seconds(self.committee_size);
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::InvalidConfig(format!("consensus time must be non-negative, got {g}")));
        }
        if let PuzzleCountMethod::MonteCarlo { trials: 0, .. } = self.puzzle_count {
            return Err(Error::InvalidConfig("Monte Carlo needs at least one trial".into()));
        }
        if strict && self.committees().checked_mul(self.committee_size) != Some(self.processors) {
            return Err(Error::InvalidConfig(format!(
                "n = {} is not 2^{} * {}",
                self.processors, self.committee_exponent, self.committee_size
            )));
        }
        Ok(())
    }
}

/// `f(n)` together with the Monte Carlo standard error, when sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuzzleEstimate {
    pub per_processor: f64,
    pub std_error: Option<f64>,
}

/// `m·H_m`, or the Newman–Shepp leading terms for `c ≥ 2`.
fn asymptotic_total(bins: u64, fills: u64) -> f64 {
    let m = bins as f64;
    if fills == 1 {
        return m * (1..=bins).map(|k| 1.0 / k as f64).sum::<f64>();
    }
    let c = fills as f64;
    let lead = m * (m.ln() + (c - 1.0) * m.ln().ln());
    // ln ln m is negative or undefined for m < e
    if lead.is_finite() {
        lead.max(m * c)
    } else {
        m * c
    }
}

/// Draws until every one of `bins` bins holds `fills` balls; returns the draw count.
fn fill_once<R: Rng>(rng: &mut R, counts: &mut [u64], fills: u64) -> u64 {
    counts.iter_mut().for_each(|c| *c = 0);
    let bins = counts.len() as u64;
    let mut complete = 0u64;
    let mut draws = 0u64;
    while complete < bins {
        let b = rng.random_range(0..bins) as usize;
        draws += 1;
        counts[b] += 1;
        if counts[b] == fills {
            complete += 1;
        }
    }
    draws
}

/// Mean and standard error of the total draw count over `trials` fills.
///
/// Trials are grouped in blocks of 1024; block `k` draws from stream `k` of
/// a ChaCha8 generator seeded with `seed`.
fn monte_carlo_total(bins: u64, fills: u64, trials: u64, seed: u64) -> (f64, f64) {
    let blocks = trials.div_ceil(MC_BLOCK);
    let partial: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block);
            let mut counts = vec![0u64; bins as usize];
            let n = MC_BLOCK.min(trials - block * MC_BLOCK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let d = fill_once(&mut rng, &mut counts, fills) as f64;
                s += d;
                s2 += d * d;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let n = trials as f64;
    let mean = s / n;
    let var = if trials > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

fn check_counts(bins: u64, fills: u64, processors: f64) -> Result<()> {
    if bins == 0 || fills == 0 {
        return Err(Error::InvalidConfig("bin count and fill count must be at least 1".into()));
    }
    if bins > MAX_BINS || bins.checked_mul(fills).is_none() {
        return Err(Error::InvalidConfig(format!(
            "bin count {bins} with {fills} fills overflows the estimator"
        )));
    }
    if !(processors.is_finite() && processors > 0.0) {
        return Err(Error::InvalidConfig(format!("processor count must be positive, got {processors}")));
    }
    Ok(())
}

/// Expected PoW solutions per processor when `processors` processors fill
/// `bins` committees of `fills` members each.
pub fn expected_puzzles_per_processor(
    bins: u64,
    fills: u64,
    processors: f64,
    method: PuzzleCountMethod,
) -> Result<PuzzleEstimate> {
    check_counts(bins, fills, processors)?;
    match method {
        PuzzleCountMethod::Asymptotic => Ok(PuzzleEstimate {
            per_processor: asymptotic_total(bins, fills) / processors,
            std_error: None,
        }),
        PuzzleCountMethod::MonteCarlo { trials: 0, .. } => {
            Err(Error::InvalidConfig("Monte Carlo needs at least one trial".into()))
        }
        PuzzleCountMethod::MonteCarlo { trials, seed } => {
            if bins > u32::MAX as u64 {
                return Err(Error::InvalidConfig(format!("{bins} bins is too many to simulate")));
            }
            let (mean, se) = monte_carlo_total(bins, fills, trials, seed);
            Ok(PuzzleEstimate {
                per_processor: mean / processors,
                std_error: Some(se / processors),
            })
        }
    }
}

fn puzzles(p: &ElasticoParams) -> Result<PuzzleEstimate> {
    expected_puzzles_per_processor(p.committees(), p.committee_size, p.processors as f64, p.puzzle_count)
}

/// `T·f(n) + g(c)` in seconds.
pub fn epoch_time(p: &ElasticoParams) -> Result<f64> {
    p.validate(false)?;
    let f = puzzles(p)?.per_processor;
    Ok(p.puzzle_time * f + p.consensus.seconds(p.committee_size))
}

/// Average reward of one processor per epoch, `μ·r·epoch_time / n`.
pub fn epoch_reward(p: &ElasticoParams) -> Result<f64> {
    Ok(p.tx_rate * p.tx_price * epoch_time(p)? / p.processors as f64)
}

/// Average mining cost of one processor per epoch, `ς·f(n)`.
pub fn epoch_cost(p: &ElasticoParams) -> Result<f64> {
    p.validate(false)?;
    Ok(p.puzzle_cost * puzzles(p)?.per_processor)
}

/// `f` as a continuous function of the processor count.
///
/// Anchored at full partitions `n = m·c` for integer `m ≥ 1`, with `f(0) = 0`,
/// and linearly interpolated in between. Anchor values are cached.
#[derive(Debug)]
pub struct PuzzleCurve {
    fills: u64,
    method: PuzzleCountMethod,
    anchors: BTreeMap<u64, f64>,
}

impl PuzzleCurve {
    pub fn new(fills: u64, method: PuzzleCountMethod) -> Self {
        Self { fills, method, anchors: BTreeMap::new() }
    }

    fn anchor(&mut self, bins: u64) -> Result<f64> {
        if bins == 0 {
            return Ok(0.0);
        }
        if let Some(&v) = self.anchors.get(&bins) {
            return Ok(v);
        }
        let n = (bins * self.fills) as f64;
        let v = expected_puzzles_per_processor(bins, self.fills, n, self.method)?.per_processor;
        self.anchors.insert(bins, v);
        Ok(v)
    }

    pub fn value(&mut self, processors: f64) -> Result<f64> {
        if !(processors.is_finite() && processors >= 0.0) {
            return Err(Error::InvalidConfig(format!("processor count must be >= 0, got {processors}")));
        }
        let m = processors / self.fills as f64;
        let lo = m.floor();
        let hi = m.ceil();
        let f_lo = self.anchor(lo as u64)?;
        if hi == lo {
            return Ok(f_lo);
        }
        let f_hi = self.anchor(hi as u64)?;
        Ok(f_lo + (f_hi - f_lo) * (m - lo))
    }
}

/// Game coefficients derived from protocol parameters.
#[derive(Debug, Clone)]
pub struct DerivedGame {
    pub config: EcosystemConfig,
    /// `permutation[k]` is the input position of the chain placed at index `k`.
    pub permutation: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Builds the game for `population` processors spread over `chains`.
///
/// `α_i = μ_i r_i / N`, `τ = τ̃ / N` and `h(x) = ς f(Nx) / (T f(Nx) + g(c))`
/// sampled on [`DERIVED_GRID`] points. The shared parameters (`T`, `c`, `ς`,
/// `τ̃`, `g`, `f` method) are taken from the first chain; in strict mode any
/// disagreement is an error, otherwise a warning.
pub fn derive_game_inputs(
    chains: &[ElasticoParams],
    population: f64,
    strict: bool,
) -> Result<DerivedGame> {
    let first = chains
        .first()
        .ok_or_else(|| Error::InvalidConfig("at least one chain is required".into()))?;
    if !(population.is_finite() && population > 0.0) {
        return Err(Error::InvalidConfig(format!("population must be positive, got {population}")));
    }
    let mut warnings = Vec::new();
    for (k, p) in chains.iter().enumerate() {
        p.validate(strict)?;
        let same = p.puzzle_time == first.puzzle_time
            && p.committee_size == first.committee_size
            && p.puzzle_cost == first.puzzle_cost
            && p.operator_share == first.operator_share
            && p.consensus == first.consensus
            && p.puzzle_count == first.puzzle_count;
        if !same {
            let msg = format!("chain {} differs from chain 1 in a shared parameter", k + 1);
            if strict {
                return Err(Error::InvalidConfig(msg));
            }
            warnings.push(format!("{msg}; using chain 1's values"));
        }
        if p.tx_rate * p.tx_price <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "chain {} has zero transaction revenue",
                k + 1
            )));
        }
    }

    let mut order: Vec<usize> = (0..chains.len()).collect();
    let revenue = |k: usize| chains[k].tx_rate * chains[k].tx_price;
    order.sort_by(|&a, &b| revenue(b).total_cmp(&revenue(a)));
    let alpha: Vec<f64> = order.iter().map(|&k| revenue(k) / population).collect();
    let tau = first.operator_share / population;
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig("operator share must be positive".into()));
    }

    let g = first.consensus.seconds(first.committee_size);
    let mut curve = PuzzleCurve::new(first.committee_size, first.puzzle_count);
    let mut points = Vec::with_capacity(DERIVED_GRID);
    let mut off_partition = 0usize;
    for k in 0..DERIVED_GRID {
        let x = k as f64 / (DERIVED_GRID - 1) as f64;
        let n = population * x;
        let m = n / first.committee_size as f64;
        if k > 0 && !(m.fract() == 0.0 && (m as u64).is_power_of_two()) {
            off_partition += 1;
        }
        let h = if k == 0 || first.puzzle_cost == 0.0 {
            0.0
        } else {
            let f = curve.value(n)?;
            let denom = first.puzzle_time * f + g;
            if !(denom > 0.0) {
                return Err(Error::InvalidConfig(
                    "puzzle time and consensus time cannot both vanish".into(),
                ));
            }
            first.puzzle_cost * f / denom
        };
        points.push((x, h));
    }
    if off_partition > 0 {
        warnings.push(format!(
            "{off_partition} of {} cost-curve samples fall between full 2^s*c partitions; f interpolated",
            DERIVED_GRID - 1
        ));
    }

    let cost = CostCurve::ElasticoDerived {
        source: Box::new(first.clone()),
        population,
        table: TabulatedCurve::new(points)?,
    };
    let config = EcosystemConfig::new(alpha, tau, cost)?;
    Ok(DerivedGame { config, permutation: order, warnings })
}
