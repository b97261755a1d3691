//! Game instance and payoff evaluation.
//!
//! A processor on chain `i` earns `u_i(x) = α_i / (x_i + τ) − h(x_i)` per unit
//! time, where `x` is the population split over the chains, `α_i` the
//! normalised transaction revenue of the chain, `τ` the operator share and `h`
//! the normalised mining cost curve.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::elastico::ElasticoParams;
use crate::{Error, Result};

/// Tolerance on `Σ x_i = 1` for a state to count as a simplex point.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Default threshold below which a component is considered extinct.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;

/// Default number of samples used to check that a cost curve is monotone.
pub const DEFAULT_MONOTONE_GRID: usize = 1024;

/// Piecewise-linear curve through sorted `(x, h(x))` samples.
///
/// The samples must start at `x = 0` with `h = 0` and reach `x = 1`. Outside
/// `[0, 1]` the end segments are extrapolated linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct TabulatedCurve {
    points: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
struct RawTable {
    points: Vec<(f64, f64)>,
}

impl TryFrom<RawTable> for TabulatedCurve {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        Self::new(raw.points)
    }
}

impl TabulatedCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidConfig(
                "tabulated cost curve needs at least two samples".into(),
            ));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidConfig(
                "tabulated cost curve has non-finite samples".into(),
            ));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidConfig(
                "tabulated cost curve abscissae must be strictly increasing".into(),
            ));
        }
        let (x0, y0) = points[0];
        if x0 != 0.0 || y0 != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tabulated cost curve must start at (0, 0), got ({x0}, {y0})"
            )));
        }
        let x_last = points[points.len() - 1].0;
        if x_last < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "tabulated cost curve must cover [0, 1], last abscissa is {x_last}"
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Index of the segment `[p_k, p_{k+1}]` used for `x`, right-continuous at knots.
    fn segment(&self, x: f64) -> usize {
        let n = self.points.len();
        let k = self.points.partition_point(|p| p.0 <= x);
        k.saturating_sub(1).min(n - 2)
    }

    pub fn value(&self, x: f64) -> f64 {
        let k = self.segment(x);
        let (x0, y0) = self.points[k];
        let (x1, y1) = self.points[k + 1];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Slope at `x` and whether `x` sits exactly on an interior knot, in which
    /// case the right-hand slope is returned.
    pub fn slope(&self, x: f64) -> (f64, bool) {
        let k = self.segment(x);
        let (x0, y0) = self.points[k];
        let (x1, y1) = self.points[k + 1];
        let on_knot = k > 0 && x == x0;
        ((y1 - y0) / (x1 - x0), on_knot)
    }
}

/// The normalised cost curve `h` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostCurve {
    /// `h(x) = ln(1 + x)`.
    Log1p,
    Tabulated(TabulatedCurve),
    /// A tabulated curve sampled from protocol parameters, together with the
    /// parameters and population it came from.
    ElasticoDerived {
        source: Box<ElasticoParams>,
        population: f64,
        table: TabulatedCurve,
    },
}

impl CostCurve {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            CostCurve::Log1p => x.ln_1p(),
            CostCurve::Tabulated(t) | CostCurve::ElasticoDerived { table: t, .. } => t.value(x),
        }
    }

    /// Derivative of `h`. The flag is set when the curve has a kink at `x`
    /// and the returned slope is one-sided.
    pub fn slope(&self, x: f64) -> (f64, bool) {
        match self {
            CostCurve::Log1p => (1.0 / (1.0 + x), false),
            CostCurve::Tabulated(t) | CostCurve::ElasticoDerived { table: t, .. } => t.slope(x),
        }
    }

    /// Checks `h(0) = 0` and that `h` is non-decreasing on a uniform grid of
    /// `grid` points over `[0, 1]`.
    pub fn validate(&self, grid: usize) -> Result<()> {
        if self.value(0.0) != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "cost curve must vanish at 0, h(0) = {}",
                self.value(0.0)
            )));
        }
        let grid = grid.max(2);
        let mut prev = 0.0;
        for k in 1..grid {
            let x = k as f64 / (grid - 1) as f64;
            let y = self.value(x);
            if !y.is_finite() {
                return Err(Error::InvalidConfig(format!("cost curve not finite at x = {x}")));
            }
            if y < prev {
                return Err(Error::InvalidConfig(format!(
                    "cost curve decreases near x = {x}: {prev} -> {y}"
                )));
            }
            prev = y;
        }
        Ok(())
    }
}

/// One game instance: `M` chains with payoff coefficients sorted in
/// non-increasing order, the operator share and the cost curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EcosystemConfig {
    alpha: Vec<f64>,
    tau: f64,
    cost: CostCurve,
}

impl EcosystemConfig {
    pub fn new(alpha: Vec<f64>, tau: f64, cost: CostCurve) -> Result<Self> {
        Self::with_monotone_grid(alpha, tau, cost, DEFAULT_MONOTONE_GRID)
    }

    pub fn with_monotone_grid(
        alpha: Vec<f64>,
        tau: f64,
        cost: CostCurve,
        grid: usize,
    ) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidConfig("at least one chain is required".into()));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "payoff coefficients must be positive and finite, got {a}"
            )));
        }
        if let Some(k) = alpha.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidConfig(format!(
                "payoff coefficients must be sorted non-increasing; alpha[{}] = {} < alpha[{}] = {}",
                k + 1,
                alpha[k],
                k + 2,
                alpha[k + 1]
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")));
        }
        cost.validate(grid)?;
        Ok(Self { alpha, tau, cost })
    }

    /// Four chains with `α = (0.7, 0.5, 0.3, 0.1)`, `τ = 0.01` and
    /// `h(x) = ln(1 + x)`.
    pub fn four_chain_reference() -> Self {
        Self::new(vec![0.7, 0.5, 0.3, 0.1], 0.01, CostCurve::Log1p)
            .expect("reference instance is valid")
    }

    pub fn chains(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn cost(&self) -> &CostCurve {
        &self.cost
    }

    /// Same instance with every `α_i` multiplied by `kappa`.
    pub fn scaled(&self, kappa: f64) -> Result<Self> {
        let alpha = self.alpha.iter().map(|a| a * kappa).collect();
        Self::new(alpha, self.tau, self.cost.clone())
    }

    /// `α / (x + τ) − h(x)` for an arbitrary coefficient. No validation.
    #[inline]
    pub fn payoff_curve(&self, a: f64, x: f64) -> f64 {
        a / (x + self.tau) - self.cost.value(x)
    }

    /// Payoff of chain `i` at population share `xi`. No validation.
    #[inline]
    pub fn payoff_at(&self, i: usize, xi: f64) -> f64 {
        self.payoff_curve(self.alpha[i], xi)
    }

    /// Payoff of every chain at `x`, without checking that `x` lies on the simplex.
    pub fn payoff_vector(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, &xi)| self.payoff_at(i, xi)).collect()
    }

    fn check_dim(&self, x: &StateVector) -> Result<()> {
        if x.dim() != self.chains() {
            return Err(Error::InvalidState(format!(
                "state has {} components, configuration has {} chains",
                x.dim(),
                self.chains()
            )));
        }
        Ok(())
    }
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidState("empty state vector".into()));
        }
        if let Some((i, v)) = x
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0 && **v <= 1.0 + SIMPLEX_TOL))
        {
            return Err(Error::InvalidState(format!("component x{} = {v} outside [0, 1]", i + 1)));
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidState(format!("components sum to {sum}, not 1")));
        }
        Ok(Self(x))
    }

    /// The `i`-th vertex of the `m`-chain simplex.
    pub fn vertex(m: usize, i: usize) -> Result<Self> {
        if i >= m {
            return Err(Error::IndexOutOfRange { index: i, chains: m });
        }
        let mut x = vec![0.0; m];
        x[i] = 1.0;
        Ok(Self(x))
    }

    /// Uniform point `(1/m, …, 1/m)`.
    pub fn barycenter(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidState("empty state vector".into()));
        }
        Ok(Self(vec![1.0 / m as f64; m]))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Max-norm distance to another state of the same dimension.
    pub fn distance_inf(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Set of chains with a positive population share, stored as sorted
/// zero-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WorkingSet(Vec<usize>);

impl WorkingSet {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidState("working set must be non-empty".into()));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidState("working set has duplicate indices".into()));
        }
        Ok(Self(indices))
    }

    /// `{0, …, w−1}`.
    pub fn prefix(w: usize) -> Result<Self> {
        Self::new((0..w).collect())
    }

    /// Decodes a non-zero bitmask, bit `i` selecting chain `i`.
    pub fn from_mask(mask: u32) -> Result<Self> {
        Self::new((0..32).filter(|i| mask >> i & 1 == 1).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Whether the set is `{0, …, len−1}`.
    pub fn is_prefix(&self) -> bool {
        self.0.iter().enumerate().all(|(k, &i)| k == i)
    }

    /// Last (smallest-coefficient) member.
    pub fn last(&self) -> usize {
        self.0[self.0.len() - 1]
    }

    pub fn first(&self) -> usize {
        self.0[0]
    }

    pub(crate) fn check_within(&self, chains: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= chains) {
            Some(&i) => Err(Error::IndexOutOfRange { index: i, chains }),
            None => Ok(()),
        }
    }

    /// Parses the `Display` form, e.g. `1;2;4`.
    pub fn parse_one_based(s: &str) -> Result<Self> {
        let indices = s
            .split(';')
            .map(|t| match t.trim().parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(Error::InvalidState(format!("bad working set entry {t:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(indices)
    }
}

impl fmt::Display for WorkingSet {
    /// One-based indices joined by `;`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(";")?;
            }
            write!(f, "{}", i + 1)?;
        }
        Ok(())
    }
}

/// Per-unit-time payoff of chain `i` at state `x`.
pub fn payoff(cfg: &EcosystemConfig, x: &StateVector, i: usize) -> Result<f64> {
    cfg.check_dim(x)?;
    if i >= cfg.chains() {
        return Err(Error::IndexOutOfRange { index: i, chains: cfg.chains() });
    }
    Ok(cfg.payoff_at(i, x[i]))
}

/// Population-average payoff `Σ_i x_i u_i(x)`.
pub fn mean_payoff(cfg: &EcosystemConfig, x: &StateVector) -> Result<f64> {
    cfg.check_dim(x)?;
    Ok(mean_payoff_raw(cfg, x.as_slice()))
}

pub(crate) fn mean_payoff_raw(cfg: &EcosystemConfig, x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(i, &xi)| xi * cfg.payoff_at(i, xi)).sum()
}

/// Chains whose share exceeds `zero_tol`.
pub fn working_set_of(x: &StateVector, zero_tol: f64) -> Result<WorkingSet> {
    if !(zero_tol >= 0.0) {
        return Err(Error::InvalidState(format!("zero tolerance must be >= 0, got {zero_tol}")));
    }
    let indices: Vec<usize> = (0..x.dim()).filter(|&i| x[i] > zero_tol).collect();
    if indices.is_empty() {
        return Err(Error::InvalidState(format!(
            "every component is at or below {zero_tol}"
        )));
    }
    WorkingSet::new(indices)
}
