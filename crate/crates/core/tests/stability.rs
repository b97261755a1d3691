mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shard_evo_core::dynamics::{integrate, jacobian, IntegrationMethod, IntegratorSpec};
use shard_evo_core::ecosystem::{EcosystemConfig, StateVector};
use shard_evo_core::equilibrium::{enumerate_equilibria, EquilibriumCandidate};
use shard_evo_core::linalg::{eigenvalues, Matrix};
use shard_evo_core::stability::{classify, classify_with, Classification, EPS_STAB};

fn instances(n: u64, seed: u64) -> Vec<EcosystemConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| common::random_instance(&mut rng)).collect()
}

#[test]
fn fast_path_never_contradicts_full_spectrum() {
    for cfg in instances(150, 11) {
        for c in enumerate_equilibria(&cfg).unwrap() {
            let fast = classify(&cfg, &c).unwrap();
            let full = classify_with(&cfg, &c, false).unwrap();
            if fast.eigenvalues.is_empty() {
                assert_eq!(fast.classification, Classification::Unstable);
                assert!(full.margin > EPS_STAB, "{}: fast path unstable, full margin {}", c.working_set, full.margin);
            }
            assert_eq!(fast.classification, full.classification);
        }
    }
}

#[test]
fn spectrum_sums_to_trace() {
    for cfg in instances(100, 12) {
        for c in enumerate_equilibria(&cfg).unwrap() {
            let jac = jacobian(&cfg, &c.state).unwrap().matrix;
            let ev = eigenvalues(&jac).unwrap();
            let sum: f64 = ev.iter().map(|z| z.re).sum();
            let im: f64 = ev.iter().map(|z| z.im).sum();
            let tol = 1e-8 * jac.frobenius_norm();
            assert!((sum - jac.trace()).abs() <= tol, "{}: {sum} vs {}", c.working_set, jac.trace());
            assert!(im.abs() <= tol);
        }
    }
}

#[test]
fn six_by_six_characteristic_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let a = Matrix::from_rows(&rows).unwrap();
        let bound = 1e-8 * a.frobenius_norm().powi(6);
        let ev = eigenvalues(&a).unwrap();
        assert_eq!(ev.len(), 6);
        for z in ev {
            assert!(common::char_poly_at(&a, z).norm() < bound);
        }
    }
}

fn perturb(rng: &mut ChaCha8Rng, c: &EquilibriumCandidate) -> StateVector {
    let m = c.state.dim();
    let mut d: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = d.iter().sum::<f64>() / m as f64;
    d.iter_mut().for_each(|v| *v -= mean);
    let norm = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut x: Vec<f64> = c.state.as_slice().iter().zip(&d).map(|(x, v)| (x + 1e-4 * v / norm).max(0.0)).collect();
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= s);
    StateVector::new(x).unwrap()
}

#[test]
fn stable_verdicts_attract_nearby_trajectories() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut cfgs = vec![EcosystemConfig::four_chain_reference()];
    cfgs.extend(instances(40, 15));
    let mut checked = 0;
    for cfg in cfgs {
        for c in enumerate_equilibria(&cfg).unwrap() {
            let v = classify_with(&cfg, &c, false).unwrap();
            // the slowest mode must decay within the horizon
            if v.classification != Classification::AsymptoticallyStable || v.margin > -1e-2 {
                continue;
            }
            let x0 = perturb(&mut rng, &c);
            let spec = IntegratorSpec {
                method: IntegrationMethod::Rk45 { rel_tol: 1e-12, abs_tol: 1e-14, max_step: 1.0 },
                t_end: 25.0 / -v.margin,
                ..IntegratorSpec::default()
            };
            let tr = integrate(&cfg, &x0, &spec).unwrap();
            let d = tr.last().distance_inf(&c.state);
            assert!(d < 1e-6, "{} ({:?}, τ={}): distance {d:e}", c.working_set, cfg.alpha(), cfg.tau());
            checked += 1;
        }
    }
    assert!(checked >= 20, "only {checked} stable equilibria exercised");
}

#[test]
fn positive_resting_eigenvalue_pulls_mass_in() {
    let mut cfgs = vec![EcosystemConfig::four_chain_reference()];
    cfgs.extend(instances(30, 16));
    let mut checked = 0;
    for cfg in cfgs {
        for c in enumerate_equilibria(&cfg).unwrap() {
            let v = classify(&cfg, &c).unwrap();
            let Some(&(k, lam)) = v.analytic_resting_eigenvalues.iter().find(|(_, l)| *l > 1e-3) else {
                continue;
            };
            let mut x: Vec<f64> = c.state.as_slice().iter().map(|v| v * (1.0 - 1e-4)).collect();
            x[k] += 1e-4;
            let tr = integrate(&cfg, &StateVector::new(x).unwrap(), &IntegratorSpec::rk4(1e-4 / lam.max(1.0), 0.1 / lam))
                .unwrap();
            assert!(tr.last()[k] > 1e-4, "{}: chain {} fell to {}", c.working_set, k + 1, tr.last()[k]);
            checked += 1;
        }
    }
    assert!(checked > 50);
}
