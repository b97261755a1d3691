//! Linear stability of equilibria.
//!
//! An equilibrium is asymptotically stable when every eigenvalue of the
//! Jacobian has negative real part and unstable when one has positive real
//! part. For a chain `k` outside the working set, row `k` of the Jacobian is
//! zero apart from its diagonal, so `λ_k = α_k/τ − b̄` is always an
//! eigenvalue; a non-negative `λ_k` rules stability out without eigensolving.

use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{fmt_f64, jacobian};
use crate::ecosystem::{EcosystemConfig, WorkingSet};
use crate::equilibrium::{enumerate_equilibria, w_star, EquilibriumCandidate};
use crate::linalg::eigenvalues as eigs;
use crate::{Error, Result};

pub use crate::linalg::{eigenvalues, Matrix};

/// Dead band around zero for the real parts.
pub const EPS_STAB: f64 = 1e-9;

/// Largest payoff spread accepted from a candidate before classifying it.
pub const MAX_CANDIDATE_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    AsymptoticallyStable,
    Unstable,
    Inconclusive,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::AsymptoticallyStable => "asymptotically_stable",
            Classification::Unstable => "unstable",
            Classification::Inconclusive => "inconclusive",
        })
    }
}

impl Classification {
    fn from_margin(margin: f64) -> Self {
        if margin < -EPS_STAB {
            Classification::AsymptoticallyStable
        } else if margin > EPS_STAB {
            Classification::Unstable
        } else {
            Classification::Inconclusive
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub classification: Classification,
    /// Full Jacobian spectrum; empty when the resting-chain shortcut decided.
    pub eigenvalues: Vec<Complex64>,
    /// `(k, λ_k)` for every chain `k` outside the working set.
    pub analytic_resting_eigenvalues: Vec<(usize, f64)>,
    /// Largest real part that decided the verdict.
    pub margin: f64,
}

impl StabilityVerdict {
    pub fn is_stable(&self) -> bool {
        self.classification == Classification::AsymptoticallyStable
    }
}

/// `λ_k = α_k/τ − (α_last/(x_last+τ) − h(x_last))` for a chain `k` outside
/// the working set, `last` being the working chain with the smallest coefficient.
pub fn resting_eigenvalue(cfg: &EcosystemConfig, cand: &EquilibriumCandidate, k: usize) -> Result<f64> {
    if k >= cfg.chains() {
        return Err(Error::IndexOutOfRange { index: k, chains: cfg.chains() });
    }
    if cand.working_set.contains(k) {
        return Err(Error::InvalidState(format!(
            "chain {} belongs to the working set {}",
            k + 1,
            cand.working_set
        )));
    }
    let last = cand.working_set.last();
    let b = cfg.payoff_at(last, cand.state[last]);
    Ok(cfg.alpha()[k] / cfg.tau() - b)
}

fn resting(cfg: &EcosystemConfig, cand: &EquilibriumCandidate) -> Result<Vec<(usize, f64)>> {
    (0..cfg.chains())
        .filter(|k| !cand.working_set.contains(*k))
        .map(|k| resting_eigenvalue(cfg, cand, k).map(|l| (k, l)))
        .collect()
}

fn check_candidate(cfg: &EcosystemConfig, cand: &EquilibriumCandidate) -> Result<()> {
    if cand.state.dim() != cfg.chains() {
        return Err(Error::InvalidState("candidate dimension differs from configuration".into()));
    }
    if !(cand.residual <= MAX_CANDIDATE_RESIDUAL) {
        return Err(Error::InvalidState(format!(
            "candidate {} has residual {:e}, above {MAX_CANDIDATE_RESIDUAL:e}",
            cand.working_set, cand.residual
        )));
    }
    Ok(())
}

/// Full Jacobian spectrum at the candidate state.
pub fn spectrum(cfg: &EcosystemConfig, cand: &EquilibriumCandidate) -> Result<Vec<Complex64>> {
    let jac = jacobian(cfg, &cand.state)?;
    eigs(&jac.matrix)
}

/// Spectrum via the block structure: the analytic `λ_k` of the resting
/// chains together with the eigenvalues of the working-set principal block.
pub fn split_spectrum(cfg: &EcosystemConfig, cand: &EquilibriumCandidate) -> Result<Vec<Complex64>> {
    let jac = jacobian(cfg, &cand.state)?;
    let block = jac.matrix.principal(cand.working_set.indices());
    let mut ev = eigs(&block)?;
    ev.extend(resting(cfg, cand)?.into_iter().map(|(_, l)| Complex64::new(l, 0.0)));
    ev.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(ev)
}

/// Classifies `cand`, returning early when some resting `λ_k > ε`.
pub fn classify(cfg: &EcosystemConfig, cand: &EquilibriumCandidate) -> Result<StabilityVerdict> {
    classify_with(cfg, cand, true)
}

/// Classifies `cand` from the full spectrum, optionally short-circuiting on
/// a positive resting eigenvalue.
pub fn classify_with(cfg: &EcosystemConfig, cand: &EquilibriumCandidate, fast_path: bool) -> Result<StabilityVerdict> {
    check_candidate(cfg, cand)?;
    let analytic = resting(cfg, cand)?;
    let max_resting = analytic.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if fast_path && max_resting > EPS_STAB {
        return Ok(StabilityVerdict {
            classification: Classification::Unstable,
            eigenvalues: Vec::new(),
            analytic_resting_eigenvalues: analytic,
            margin: max_resting,
        });
    }
    let ev = spectrum(cfg, cand)?;
    let margin = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityVerdict {
        classification: Classification::from_margin(margin),
        eigenvalues: ev,
        analytic_resting_eigenvalues: analytic,
        margin,
    })
}

/// Every equilibrium with its verdict.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub entries: Vec<(EquilibriumCandidate, StabilityVerdict)>,
    pub w_star: usize,
    /// Position in `entries` of the asymptotically stable equilibrium, if any.
    pub stable: Option<usize>,
}

impl StabilityReport {
    pub fn stable_entry(&self) -> Option<&(EquilibriumCandidate, StabilityVerdict)> {
        self.stable.map(|k| &self.entries[k])
    }
}

/// Enumerates and classifies all equilibria (full spectra) and checks that
/// only the prefix `{1, …, w*}` can come out stable.
pub fn stable_equilibria(cfg: &EcosystemConfig) -> Result<StabilityReport> {
    let cands = enumerate_equilibria(cfg)?;
    let w_star = w_star(cfg)?;
    let prefix = WorkingSet::prefix(w_star)?;
    let verdicts = cands
        .par_iter()
        .map(|c| classify_with(cfg, c, false))
        .collect::<Result<Vec<_>>>()?;
    let mut stable = None;
    for (k, (c, v)) in cands.iter().zip(&verdicts).enumerate() {
        if !v.is_stable() {
            continue;
        }
        if c.working_set != prefix {
            return Err(Error::Consistency(format!(
                "equilibrium of {} classified stable but w* = {w_star}",
                c.working_set
            )));
        }
        stable = Some(k);
    }
    Ok(StabilityReport { entries: cands.into_iter().zip(verdicts).collect(), w_star, stable })
}

/// Stable equilibrium after scaling every coefficient by `kappa`.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub kappa: f64,
    pub w_star: usize,
    pub stable: Option<EquilibriumCandidate>,
}

/// Re-solves the game for each `kappa` in an increasing, non-empty grid.
pub fn kappa_sweep(cfg: &EcosystemConfig, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    if grid.iter().any(|k| !(k.is_finite() && *k > 0.0)) || grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidConfig("sweep grid must be positive and strictly increasing".into()));
    }
    grid.par_iter()
        .map(|&kappa| {
            let scaled = cfg.scaled(kappa)?;
            let report = stable_equilibria(&scaled)?;
            let stable = report.stable_entry().map(|(c, _)| c.clone());
            Ok(SweepPoint { kappa, w_star: report.w_star, stable })
        })
        .collect()
}

/// CSV `working_set,classification,max_real_part,re1,im1,...,reM,imM`.
pub fn write_verdicts_csv<W: Write>(
    entries: &[(EquilibriumCandidate, StabilityVerdict)],
    chains: usize,
    w: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["working_set".to_string(), "classification".into(), "max_real_part".into()];
    for i in 1..=chains {
        header.push(format!("re{i}"));
        header.push(format!("im{i}"));
    }
    out.write_record(&header)?;
    for (c, v) in entries {
        let mut row = vec![c.working_set.to_string(), v.classification.to_string(), fmt_f64(v.margin)];
        for k in 0..chains {
            match v.eigenvalues.get(k) {
                Some(z) => {
                    row.push(fmt_f64(z.re));
                    row.push(fmt_f64(z.im));
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
