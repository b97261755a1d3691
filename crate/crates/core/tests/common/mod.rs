//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use shard_evo_core::dynamics::replicator_field_into;
use shard_evo_core::ecosystem::{CostCurve, EcosystemConfig, StateVector};
use shard_evo_core::linalg::Matrix;

/// Initial state of the published trajectory, rescaled onto the simplex
/// (the printed components sum to 1.0009).
pub fn published_x0() -> StateVector {
    let raw = [0.4498, 0.3369, 0.2132, 0.001];
    let s: f64 = raw.iter().sum();
    StateVector::new(raw.iter().map(|v| v / s).collect()).unwrap()
}

/// Uniform point on the simplex (normalised exponentials).
pub fn random_simplex<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Random instance with `M ∈ [2, 8]`, strictly descending `α ∈ (0, 1]`,
/// log-uniform `τ ∈ [1e-3, 0.1]` and `h = ln(1 + x)`.
pub fn random_instance<R: Rng>(rng: &mut R) -> EcosystemConfig {
    let m = rng.random_range(2..=8);
    loop {
        let mut alpha: Vec<f64> = (0..m).map(|_| 1.0 - rng.random::<f64>()).collect();
        alpha.sort_by(|a, b| b.total_cmp(a));
        if alpha.windows(2).any(|p| p[0] - p[1] < 1e-9) {
            continue;
        }
        let tau = 10f64.powf(rng.random_range(-3.0..=-1.0));
        return EcosystemConfig::new(alpha, tau, CostCurve::Log1p).unwrap();
    }
}

/// Central-difference Jacobian of the replicator field in ambient coordinates.
pub fn fd_jacobian(cfg: &EcosystemConfig, x: &[f64]) -> Vec<Vec<f64>> {
    let m = x.len();
    let mut jac = vec![vec![0.0; m]; m];
    let (mut fp, mut fm) = (vec![0.0; m], vec![0.0; m]);
    for j in 0..m {
        let h = 1e-6 * x[j].abs().max(1e-3);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        replicator_field_into(cfg, &xp, &mut fp);
        replicator_field_into(cfg, &xm, &mut fm);
        for i in 0..m {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// `det(λI − A)` by complex LU with partial pivoting.
pub fn char_poly_at(a: &Matrix, lambda: Complex64) -> Complex64 {
    let n = a.dim();
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
                    d - a[(i, j)]
                })
                .collect()
        })
        .collect();
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let p = (k..n).max_by(|&r, &s| m[r][k].norm().total_cmp(&m[s][k].norm())).unwrap();
        if m[p][k].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != k {
            m.swap(p, k);
            det = -det;
        }
        det *= m[k][k];
        for r in k + 1..n {
            let f = m[r][k] / m[k][k];
            for c in k..n {
                let v = m[k][c];
                m[r][c] -= f * v;
            }
        }
    }
    det
}

/// Expected draws until each of `m` bins holds `c` draws, from the
/// Poissonised integral `m ∫₀^∞ 1 − (1 − e^{−t} Σ_{k<c} t^k/k!)^m dt`
/// evaluated by composite Simpson on `[0, 200]`.
pub fn coupon_expectation(m: u32, c: u32) -> f64 {
    let tail = |t: f64| {
        let mut term = 1.0;
        let mut s = 0.0;
        for k in 0..c {
            if k > 0 {
                term *= t / k as f64;
            }
            s += term;
        }
        1.0 - (1.0 - (-t).exp() * s).powi(m as i32)
    };
    let (a, b, n) = (0.0, 200.0, 200_000);
    let h = (b - a) / n as f64;
    let mut acc = tail(a) + tail(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * tail(a + i as f64 * h);
    }
    m as f64 * acc * h / 3.0
}

pub fn harmonic(m: u32) -> f64 {
    (1..=m).map(|k| 1.0 / k as f64).sum()
}
