//! Equilibria of the replicator dynamics.
//!
//! At an equilibrium with working set `W` all working chains earn the same
//! payoff `b̄`. For a coefficient `a` and payoff level `b`, `K(a, b)` is the
//! unique share `x ∈ [0, 1]` with `a/(x+τ) − h(x) = b`; the equilibrium of
//! `W` is then `x_i = K(α_i, b̄)` where `b̄` solves `Σ_{i∈W} K(α_i, b) = 1`.
//! Both equations are monotone and solved by bisection.

use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::dynamics::{fmt_f64, replicator_field_into};
use crate::ecosystem::{EcosystemConfig, StateVector, WorkingSet};
use crate::{Error, Result};

/// Default width tolerance of the `K` bisection.
pub const K_TOL: f64 = 1e-12;

/// Default tolerance on `|S(b) − 1|` for the outer bisection.
pub const SOLVE_TOL: f64 = 1e-12;

/// Relative margin applied to the strict inequalities of the existence test.
pub const STRICT_MARGIN: f64 = 1e-14;

/// Largest number of chains for exhaustive working-set enumeration.
pub const ENUMERATION_CAP: usize = 16;

/// Solved components below this are set to exactly zero.
pub const SNAP_TOL: f64 = 1e-12;

const MAX_OUTER_ITERATIONS: usize = 2000;

/// Lower edge of the `K` domain for coefficient `a`: `a/(1+τ) − h(1)`.
pub fn k_lower(cfg: &EcosystemConfig, a: f64) -> f64 {
    cfg.payoff_curve(a, 1.0)
}

/// Upper edge of the `K` domain for coefficient `a`: `a/τ`.
pub fn k_upper(cfg: &EcosystemConfig, a: f64) -> f64 {
    a / cfg.tau()
}

/// A validated point of the `K` domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KDomainPoint {
    a: f64,
    b: f64,
}

impl KDomainPoint {
    /// Accepts `a > 0` and `a/(1+τ) − h(1) ≤ b ≤ a/τ`. Non-positive `b` is
    /// allowed: the lower edge itself can be negative.
    pub fn new(cfg: &EcosystemConfig, a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::KDomain { a, b, boundary: "a must be positive" });
        }
        if !b.is_finite() {
            return Err(Error::KDomain { a, b, boundary: "b must be finite" });
        }
        if b > k_upper(cfg, a) {
            return Err(Error::KDomain { a, b, boundary: "b above a/tau" });
        }
        if b < k_lower(cfg, a) {
            return Err(Error::KDomain { a, b, boundary: "b below a/(1+tau) - h(1)" });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

/// Bisection for `a/(x+τ) − h(x) = b` on `[lo, hi] ⊂ [0, 1]`, stopping when
/// the bracket is narrower than `tol` or cannot be split further. Values of
/// `b` beyond the domain edges clamp to 0 or 1.
fn k_bisect(cfg: &EcosystemConfig, a: f64, b: f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    if b >= k_upper(cfg, a) {
        return 0.0;
    }
    if b <= k_lower(cfg, a) {
        return 1.0;
    }
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cfg.payoff_curve(a, mid) > b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `K(a, b)`: the share at which a chain with coefficient `a` earns `b`.
pub fn k_function(cfg: &EcosystemConfig, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("K tolerance must be positive, got {tol}")));
    }
    let p = KDomainPoint::new(cfg, a, b)?;
    Ok(k_bisect(cfg, p.a, p.b, 0.0, 1.0, tol))
}

/// Full-precision `K`, clamped outside the domain.
fn k_exact(cfg: &EcosystemConfig, a: f64, b: f64) -> f64 {
    k_bisect(cfg, a, b, 0.0, 1.0, 0.0)
}

/// Why a working set has no equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub enum NoEquilibriumReason {
    /// `α_first/(1+τ) − h(1) ≥ α_last/τ`: the payoff bracket is empty.
    EmptyBracket { lower: f64, upper: f64 },
    /// `Σ_{j<last} K(α_j, α_last/τ) ≥ 1`.
    SumTooLarge { sum: f64 },
    /// One of the strict inequalities holds only within the numerical margin.
    Boundary { condition: &'static str, gap: f64 },
}

impl fmt::Display for NoEquilibriumReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyBracket { lower, upper } => {
                write!(f, "empty payoff bracket ({lower} >= {upper})")
            }
            Self::SumTooLarge { sum } => write!(f, "K sum {sum} >= 1"),
            Self::Boundary { condition, gap } => {
                write!(f, "{condition} holds only within margin (gap {gap:e})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Existence {
    Exists,
    NoEquilibrium(NoEquilibriumReason),
}

impl Existence {
    pub fn exists(&self) -> bool {
        matches!(self, Existence::Exists)
    }
}

/// Payoff bracket `(α_first/(1+τ) − h(1), α_last/τ)` of a working set.
pub fn payoff_bracket(cfg: &EcosystemConfig, w: &WorkingSet) -> (f64, f64) {
    (k_lower(cfg, cfg.alpha()[w.first()]), k_upper(cfg, cfg.alpha()[w.last()]))
}

/// Decides whether `w` admits an equilibrium.
pub fn existence_check(cfg: &EcosystemConfig, w: &WorkingSet) -> Result<Existence> {
    w.check_within(cfg.chains())?;
    let (lower, upper) = payoff_bracket(cfg, w);
    let gap = upper - lower;
    if gap <= 0.0 {
        return Ok(Existence::NoEquilibrium(NoEquilibriumReason::EmptyBracket { lower, upper }));
    }
    if gap <= STRICT_MARGIN * upper.abs().max(1.0) {
        return Ok(Existence::NoEquilibrium(NoEquilibriumReason::Boundary {
            condition: "payoff bracket",
            gap,
        }));
    }
    let idx = w.indices();
    let sum: f64 = idx[..idx.len() - 1]
        .iter()
        .map(|&i| k_exact(cfg, cfg.alpha()[i], upper))
        .sum();
    if sum >= 1.0 {
        return Ok(Existence::NoEquilibrium(NoEquilibriumReason::SumTooLarge { sum }));
    }
    if 1.0 - sum <= STRICT_MARGIN {
        return Ok(Existence::NoEquilibrium(NoEquilibriumReason::Boundary {
            condition: "K sum",
            gap: 1.0 - sum,
        }));
    }
    Ok(Existence::Exists)
}

/// An equilibrium of one working set.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumCandidate {
    pub working_set: WorkingSet,
    pub state: StateVector,
    /// Common payoff `b̄` of the working chains.
    pub common_payoff: f64,
    /// Largest payoff gap between working chains.
    pub residual: f64,
}

impl EquilibriumCandidate {
    /// `‖φ(x)‖∞` at the candidate state.
    pub fn field_residual(&self, cfg: &EcosystemConfig) -> f64 {
        let mut phi = vec![0.0; self.state.dim()];
        replicator_field_into(cfg, self.state.as_slice(), &mut phi);
        phi.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn payoff_spread(cfg: &EcosystemConfig, w: &WorkingSet, x: &[f64]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in w.indices() {
        let u = cfg.payoff_at(i, x[i]);
        lo = lo.min(u);
        hi = hi.max(u);
    }
    hi - lo
}

fn no_equilibrium(w: &WorkingSet, reason: impl fmt::Display) -> Error {
    Error::NoEquilibrium { working_set: w.to_string(), reason: reason.to_string() }
}

/// Solves the equilibrium of `w`. Fails with [`Error::NoEquilibrium`] when
/// [`existence_check`] rules it out.
pub fn solve_equilibrium(cfg: &EcosystemConfig, w: &WorkingSet, tol: f64) -> Result<EquilibriumCandidate> {
    if let Existence::NoEquilibrium(reason) = existence_check(cfg, w)? {
        return Err(no_equilibrium(w, reason));
    }
    let (lower, upper) = payoff_bracket(cfg, w);
    if w.len() == 1 {
        // S(b) = K(α_i, b) reaches 1 exactly at the lower edge
        let state = StateVector::vertex(cfg.chains(), w.first())?;
        return Ok(EquilibriumCandidate {
            working_set: w.clone(),
            state,
            common_payoff: lower,
            residual: 0.0,
        });
    }
    solve_in_bracket(cfg, w, tol, lower, upper)
}

/// Outer bisection on `b` restricted to `[b_lo, b_hi]`, which must satisfy
/// `S(b_lo) > 1 > S(b_hi)` for `S(b) = Σ_{i∈W} K(α_i, b)`.
pub fn solve_in_bracket(
    cfg: &EcosystemConfig,
    w: &WorkingSet,
    tol: f64,
    mut b_lo: f64,
    mut b_hi: f64,
) -> Result<EquilibriumCandidate> {
    w.check_within(cfg.chains())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("solver tolerance must be positive, got {tol}")));
    }
    let alpha: Vec<f64> = w.indices().iter().map(|&i| cfg.alpha()[i]).collect();
    let sum_at = |b: f64| alpha.iter().map(|&a| k_exact(cfg, a, b)).sum::<f64>();
    if !(b_lo < b_hi) || sum_at(b_lo) <= 1.0 || sum_at(b_hi) >= 1.0 {
        return Err(no_equilibrium(w, format!("S(b) = 1 is not bracketed by [{b_lo}, {b_hi}]")));
    }

    // K is decreasing in b, so each share stays inside [K(b_hi), K(b_lo)].
    let n = alpha.len();
    let mut x_lo = vec![0.0; n];
    let mut x_hi = vec![1.0; n];
    let mut xs = vec![0.0; n];
    let mut sum = f64::NAN;
    for _ in 0..MAX_OUTER_ITERATIONS {
        let mid = 0.5 * (b_lo + b_hi);
        if mid <= b_lo || mid >= b_hi {
            break;
        }
        for j in 0..n {
            xs[j] = k_bisect(cfg, alpha[j], mid, x_lo[j], x_hi[j], 0.0);
        }
        sum = xs.iter().sum();
        if (sum - 1.0).abs() < tol {
            break;
        }
        if sum > 1.0 {
            b_lo = mid;
            x_hi.copy_from_slice(&xs);
        } else {
            b_hi = mid;
            x_lo.copy_from_slice(&xs);
        }
    }
    if !sum.is_finite() {
        return Err(Error::Numerical(format!("equilibrium bisection for {w} made no progress")));
    }

    // Spread the leftover 1 − S in proportion to each chain's share
    // sensitivity dK/db = −1/s_j, which moves every working payoff equally.
    let tau = cfg.tau();
    let inv_slope: Vec<f64> = xs
        .iter()
        .zip(&alpha)
        .map(|(&x, &a)| 1.0 / (a / ((x + tau) * (x + tau)) + cfg.cost().slope(x).0))
        .collect();
    let total: f64 = inv_slope.iter().sum();
    let deficit = 1.0 - sum;
    for j in 0..n {
        xs[j] = (xs[j] + deficit * inv_slope[j] / total).max(0.0);
    }

    let mut x = vec![0.0; cfg.chains()];
    for (j, &i) in w.indices().iter().enumerate() {
        x[i] = if xs[j] < SNAP_TOL { 0.0 } else { xs[j] };
    }
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= s);
    let residual = payoff_spread(cfg, w, &x);
    let common_payoff = w.indices().iter().map(|&i| x[i] * cfg.payoff_at(i, x[i])).sum::<f64>();
    Ok(EquilibriumCandidate {
        working_set: w.clone(),
        state: StateVector::new(x)?,
        common_payoff,
        residual,
    })
}

/// Every working set's equilibrium, sorted by working set.
pub fn enumerate_equilibria(cfg: &EcosystemConfig) -> Result<Vec<EquilibriumCandidate>> {
    enumerate_equilibria_with_cap(cfg, ENUMERATION_CAP)
}

pub fn enumerate_equilibria_with_cap(cfg: &EcosystemConfig, cap: usize) -> Result<Vec<EquilibriumCandidate>> {
    let m = cfg.chains();
    if m > cap || m > 31 {
        return Err(Error::EnumerationCap { chains: m, cap });
    }
    let results: Vec<Option<Result<EquilibriumCandidate>>> = (1u32..(1u32 << m))
        .into_par_iter()
        .map(|mask| {
            let w = WorkingSet::from_mask(mask).expect("non-zero mask");
            match existence_check(cfg, &w) {
                Ok(Existence::Exists) => Some(solve_equilibrium(cfg, &w, SOLVE_TOL)),
                Ok(Existence::NoEquilibrium(_)) => None,
                Err(e) => Some(Err(e)),
            }
        })
        .collect();
    let mut out = results.into_iter().flatten().collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.working_set.cmp(&b.working_set));
    Ok(out)
}

/// Largest `w` for which the prefix `{1, …, w}` admits an equilibrium.
pub fn w_star(cfg: &EcosystemConfig) -> Result<usize> {
    for w in (1..=cfg.chains()).rev() {
        if existence_check(cfg, &WorkingSet::prefix(w)?)?.exists() {
            return Ok(w);
        }
    }
    Err(Error::Consistency("no prefix working set admits an equilibrium".into()))
}

/// CSV `working_set,b_bar,x1..xM,residual`.
pub fn write_candidates_csv<W: Write>(cands: &[EquilibriumCandidate], chains: usize, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["working_set".to_string(), "b_bar".to_string()];
    header.extend((1..=chains).map(|i| format!("x{i}")));
    header.push("residual".into());
    out.write_record(&header)?;
    for c in cands {
        let mut row = vec![c.working_set.to_string(), fmt_f64(c.common_payoff)];
        row.extend(c.state.as_slice().iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(c.residual));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_candidates_csv<R: Read>(r: R) -> Result<Vec<EquilibriumCandidate>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let width = rdr.headers()?.len();
    if width < 4 {
        return Err(Error::InvalidState("candidate CSV needs working_set,b_bar,x1..xM,residual".into()));
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::InvalidState(format!("bad number {s:?}: {e}")))
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let working_set = WorkingSet::parse_one_based(&rec[0])?;
        let common_payoff = parse(&rec[1])?;
        let x = (2..width - 1).map(|k| parse(&rec[k])).collect::<Result<Vec<_>>>()?;
        let residual = parse(&rec[width - 1])?;
        out.push(EquilibriumCandidate { working_set, state: StateVector::new(x)?, common_payoff, residual });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecosystem::CostCurve;
    use approx::assert_abs_diff_eq;

    fn reference() -> EcosystemConfig {
        EcosystemConfig::four_chain_reference()
    }

    fn ws(v: &[usize]) -> WorkingSet {
        WorkingSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn k_edges() {
        let cfg = reference();
        for a in [0.05, 0.3, 0.7, 1.0] {
            assert_eq!(k_function(&cfg, a, a / 0.01, K_TOL).unwrap(), 0.0);
            assert_eq!(k_function(&cfg, a, a / 1.01 - 2f64.ln(), K_TOL).unwrap(), 1.0);
        }
    }

    #[test]
    fn k_interior_value() {
        let cfg = reference();
        let x = k_function(&cfg, 0.7, 10.0, K_TOL).unwrap();
        assert_abs_diff_eq!(x, 0.0596, epsilon = 1e-3);
        assert_abs_diff_eq!(0.7 / (x + 0.01) - x.ln_1p(), 10.0, epsilon = 1e-8);
    }

    #[test]
    fn k_domain_errors() {
        let cfg = reference();
        let err = k_function(&cfg, 0.7, 71.0, K_TOL).unwrap_err();
        assert!(err.to_string().contains("above a/tau"), "{err}");
        let err = k_function(&cfg, 0.7, -1.0, K_TOL).unwrap_err();
        assert!(err.to_string().contains("below"), "{err}");
        assert!(k_function(&cfg, -0.7, 1.0, K_TOL).is_err());
        assert!(k_function(&cfg, 0.7, 1.0, 0.0).is_err());
        // the lower edge is negative here and still inside the domain
        assert!(k_function(&cfg, 0.7, 0.7 / 1.01 - 2f64.ln(), K_TOL).is_ok());
    }

    #[test]
    fn existence_examples() {
        let cfg = reference();
        for i in 0..4 {
            assert_eq!(existence_check(&cfg, &ws(&[i])).unwrap(), Existence::Exists);
        }
        assert_eq!(existence_check(&cfg, &ws(&[0, 1, 2, 3])).unwrap(), Existence::Exists);
        assert!(existence_check(&cfg, &ws(&[0, 4])).is_err());
    }

    #[test]
    fn existence_fails_on_sum_for_intermediate_tau() {
        let alpha = vec![0.7, 0.5, 0.3, 0.1];
        let full = ws(&[0, 1, 2, 3]);
        let cfg_at = |tau: f64| EcosystemConfig::new(alpha.clone(), tau, CostCurve::Log1p).unwrap();
        // S(τ) = Σ_{j<4} K(α_j, α_4/τ) − 1 via the public K, bisected over τ
        let excess = |tau: f64| {
            let cfg = cfg_at(tau);
            alpha[..3].iter().map(|&a| k_function(&cfg, a, 0.1 / tau, 1e-14).unwrap()).sum::<f64>() - 1.0
        };
        let (mut lo, mut hi) = (0.01, 0.3);
        assert!(excess(lo) < 0.0 && excess(hi) > 0.0);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!(lo > 0.1 && lo < 0.16, "boundary at {lo}");
        assert!(existence_check(&cfg_at(lo - 1e-6), &full).unwrap().exists());
        let past = existence_check(&cfg_at(hi + 1e-6), &full).unwrap();
        assert!(
            matches!(past, Existence::NoEquilibrium(NoEquilibriumReason::SumTooLarge { .. })),
            "{past:?}"
        );
        assert_eq!(w_star(&cfg_at(0.3)).unwrap(), 3);
    }

    #[test]
    fn existence_fails_on_empty_bracket() {
        let cfg = EcosystemConfig::new(vec![1.0, 0.02], 0.1, CostCurve::Log1p).unwrap();
        let e = existence_check(&cfg, &ws(&[0, 1])).unwrap();
        assert!(matches!(e, Existence::NoEquilibrium(NoEquilibriumReason::EmptyBracket { .. })), "{e:?}");
        assert_eq!(enumerate_equilibria(&cfg).unwrap().len(), 2);
        assert_eq!(w_star(&cfg).unwrap(), 1);
    }

    #[test]
    fn solve_reference_equilibria() {
        let cfg = reference();
        let e1 = solve_equilibrium(&cfg, &ws(&[0, 1, 2, 3]), SOLVE_TOL).unwrap();
        for (x, want) in e1.state.as_slice().iter().zip([0.4225, 0.3148, 0.1975, 0.0652]) {
            assert_abs_diff_eq!(*x, want, epsilon = 1e-3);
        }
        assert_abs_diff_eq!(e1.common_payoff, 1.266, epsilon = 1e-3);
        let e2 = solve_equilibrium(&cfg, &ws(&[0, 1, 2]), SOLVE_TOL).unwrap();
        for (x, want) in e2.state.as_slice().iter().zip([0.4499, 0.3369, 0.2132, 0.0]) {
            assert_abs_diff_eq!(*x, want, epsilon = 1e-3);
        }
        assert_eq!(e2.state[3], 0.0);
        assert_abs_diff_eq!(e2.common_payoff, 1.151, epsilon = 1e-3);
        for c in [&e1, &e2] {
            assert!(c.residual < 1e-11, "{}", c.residual);
            assert!(c.field_residual(&cfg) < 1e-11);
        }
    }

    #[test]
    fn singleton_is_vertex() {
        let cfg = reference();
        let c = solve_equilibrium(&cfg, &ws(&[2]), SOLVE_TOL).unwrap();
        assert_eq!(c.state.as_slice(), &[0.0, 0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(c.common_payoff, 0.3 / 1.01 - 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn solve_refuses_missing_equilibrium() {
        let cfg = EcosystemConfig::new(vec![1.0, 0.02], 0.1, CostCurve::Log1p).unwrap();
        let err = solve_equilibrium(&cfg, &ws(&[0, 1]), SOLVE_TOL).unwrap_err();
        assert!(matches!(err, Error::NoEquilibrium { .. }), "{err}");
    }

    #[test]
    fn bad_bracket_rejected() {
        let cfg = reference();
        let w = ws(&[0, 1]);
        assert!(solve_in_bracket(&cfg, &w, SOLVE_TOL, 5.0, 6.0).is_err());
    }

    #[test]
    fn enumerate_reference() {
        let cfg = reference();
        let all = enumerate_equilibria(&cfg).unwrap();
        let find = |v: &[usize]| all.iter().find(|c| c.working_set.indices() == v);
        assert!(find(&[0, 1, 2, 3]).is_some());
        assert!(find(&[0, 1, 2]).is_some());
        for r in 1..=4 {
            assert!(find(&(0..r).collect::<Vec<_>>()).is_some(), "prefix {r}");
        }
        for i in 0..4 {
            assert!(find(&[i]).is_some(), "singleton {i}");
        }
        let sorted = all.windows(2).all(|p| p[0].working_set < p[1].working_set);
        assert!(sorted);
    }

    #[test]
    fn enumerate_single_chain_and_cap() {
        let cfg = EcosystemConfig::new(vec![0.4], 0.02, CostCurve::Log1p).unwrap();
        let all = enumerate_equilibria(&cfg).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].state.as_slice(), &[1.0]);
        let big = EcosystemConfig::new(vec![0.5; 17], 0.02, CostCurve::Log1p).unwrap();
        assert!(matches!(enumerate_equilibria(&big), Err(Error::EnumerationCap { chains: 17, .. })));
    }

    #[test]
    fn w_star_reference() {
        assert_eq!(w_star(&reference()).unwrap(), 4);
        let single = EcosystemConfig::new(vec![0.4], 0.02, CostCurve::Log1p).unwrap();
        assert_eq!(w_star(&single).unwrap(), 1);
    }

    #[test]
    fn prefix_common_payoffs_increase() {
        let cfg = reference();
        let b: Vec<f64> = (1..=4)
            .map(|r| solve_equilibrium(&cfg, &WorkingSet::prefix(r).unwrap(), SOLVE_TOL).unwrap().common_payoff)
            .collect();
        assert!(b.windows(2).all(|p| p[0] < p[1]), "{b:?}");
    }

    #[test]
    fn candidate_csv_roundtrip() {
        let cfg = reference();
        let all = enumerate_equilibria(&cfg).unwrap();
        let mut buf = Vec::new();
        write_candidates_csv(&all, 4, &mut buf).unwrap();
        assert!(buf.starts_with(b"working_set,b_bar,x1,x2,x3,x4,residual\n"));
        assert_eq!(read_candidates_csv(buf.as_slice()).unwrap(), all);
    }
}
