//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use shard_evo_core::agents::{compare_to_ode, safe_imitation_scale, simulate_agents, AgentSimSpec};
use shard_evo_core::dynamics::{integrate, jacobian, payoff_trace, IntegratorSpec};
use shard_evo_core::ecosystem::{EcosystemConfig, StateVector, WorkingSet};
use shard_evo_core::elastico::{expected_puzzles_per_processor, PuzzleCountMethod};
use shard_evo_core::equilibrium::{
    existence_check, k_function, k_lower, k_upper, payoff_bracket, solve_equilibrium, w_star, Existence,
    SOLVE_TOL,
};
use shard_evo_core::linalg::{eigenvalues, Matrix};
use shard_evo_core::stability::{classify, classify_with, kappa_sweep, Classification};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ws(v: &[usize]) -> WorkingSet {
    WorkingSet::new(v.to_vec()).unwrap()
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

const X_E1: [f64; 4] = [0.4225, 0.3148, 0.1975, 0.0652];
const X_E2: [f64; 4] = [0.4499, 0.3369, 0.2132, 0.0];

fn equilibrium_reproduction() -> Check {
    let cfg = EcosystemConfig::four_chain_reference();
    let e1 = solve_equilibrium(&cfg, &ws(&[0, 1, 2, 3]), SOLVE_TOL).map_err(|e| e.to_string())?;
    let e2 = solve_equilibrium(&cfg, &ws(&[0, 1, 2]), SOLVE_TOL).map_err(|e| e.to_string())?;
    let (d1, d2) = (max_dev(e1.state.as_slice(), &X_E1), max_dev(e2.state.as_slice(), &X_E2));
    ensure(d1 <= 1e-3 && d2 <= 1e-3, || format!("deviations {d1:.2e}, {d2:.2e}"))?;
    Ok(format!("max deviation x_e1 {d1:.1e}, x_e2 {d2:.1e}"))
}

fn stability_reproduction() -> Check {
    let cfg = EcosystemConfig::four_chain_reference();
    let e1 = solve_equilibrium(&cfg, &ws(&[0, 1, 2, 3]), SOLVE_TOL).map_err(|e| e.to_string())?;
    let e2 = solve_equilibrium(&cfg, &ws(&[0, 1, 2]), SOLVE_TOL).map_err(|e| e.to_string())?;
    let v1 = classify(&cfg, &e1).map_err(|e| e.to_string())?;
    let v2 = classify(&cfg, &e2).map_err(|e| e.to_string())?;
    ensure(v1.classification == Classification::AsymptoticallyStable, || {
        format!("x_e1 classified {}", v1.classification)
    })?;
    ensure(v2.classification == Classification::Unstable, || format!("x_e2 classified {}", v2.classification))?;
    let b_bar = 0.3 / (e2.state[2] + 0.01) - e2.state[2].ln_1p();
    let lambda4 = 0.1 / 0.01 - b_bar;
    ensure((lambda4 - 8.85).abs() <= 0.02, || format!("λ4 = {lambda4}"))?;
    let (k, reported) = v2.analytic_resting_eigenvalues[0];
    ensure(k == 3 && (reported - lambda4).abs() < 1e-12, || format!("reported λ = {reported}"))?;
    let full = classify_with(&cfg, &e2, false).map_err(|e| e.to_string())?;
    let gap = full.eigenvalues.iter().map(|z| (z - Complex64::new(lambda4, 0.0)).norm()).fold(f64::INFINITY, f64::min);
    ensure(gap < 1e-8, || format!("λ4 is {gap:.2e} from the spectrum"))?;
    Ok(format!("λ4 = {lambda4:.5}, spectrum distance {gap:.1e}"))
}

fn reference_trajectory() -> Result<(EcosystemConfig, shard_evo_core::dynamics::Trajectory), String> {
    let cfg = EcosystemConfig::four_chain_reference();
    let tr = integrate(&cfg, &common::published_x0(), &IntegratorSpec::default()).map_err(|e| e.to_string())?;
    Ok((cfg, tr))
}

fn trajectory_reproduction() -> Check {
    let (_, tr) = reference_trajectory()?;
    let last = tr.last().as_slice();
    let d_end = max_dev(last, &X_E1);
    ensure(d_end <= 1e-3, || format!("final state {d_end:.2e} from x_e1"))?;
    let mut left = false;
    let mut closest_after = f64::INFINITY;
    for x in &tr.states {
        let d = max_dev(x.as_slice(), &X_E2);
        if left {
            closest_after = closest_after.min(d);
        } else if d > 1e-3 {
            left = true;
        }
    }
    ensure(left, || "trajectory never left the x_e2 neighbourhood".into())?;
    ensure(closest_after > 1e-4, || format!("returned to {closest_after:.2e} of x_e2"))?;
    Ok(format!("final distance to x_e1 {d_end:.1e}, closest return to x_e2 {closest_after:.1e}"))
}

fn payoff_equalization() -> Check {
    let (cfg, tr) = reference_trajectory()?;
    let p = payoff_trace(&cfg, &tr).map_err(|e| e.to_string())?;
    let u4 = p.payoffs[0][3];
    ensure((u4 - 9.09).abs() < 5e-3, || format!("initial u4 = {u4}"))?;
    let end = p.payoffs.last().unwrap();
    let worst = end.iter().map(|u| (u - 1.266).abs()).fold(0.0, f64::max);
    ensure(worst <= 1e-3, || format!("terminal payoffs {end:?}"))?;
    Ok(format!("u4(0) = {u4:.4}, terminal payoffs within {worst:.1e} of 1.266"))
}

fn kappa_trend() -> Check {
    let cfg = EcosystemConfig::four_chain_reference();
    let grid: Vec<f64> = (5..=15).map(|k| k as f64 / 10.0).collect();
    let pts = kappa_sweep(&cfg, &grid).map_err(|e| e.to_string())?;
    let mut xs = Vec::new();
    for p in &pts {
        let c = p.stable.as_ref().ok_or_else(|| format!("no stable equilibrium at κ = {}", p.kappa))?;
        xs.push((c.state[0], c.state[3]));
    }
    for w in xs.windows(2) {
        ensure(w[1].0 >= w[0].0, || format!("x1 decreased: {xs:?}"))?;
        ensure(w[1].1 <= w[0].1, || format!("x4 increased: {xs:?}"))?;
    }
    let anchor = &pts[5].stable.as_ref().unwrap().state;
    ensure(max_dev(anchor.as_slice(), &X_E1) <= 1e-3, || "κ = 1 differs from x_e1".into())?;
    Ok(format!(
        "x1 {:.4} → {:.4}, x4 {:.4} → {:.4}",
        xs[0].0,
        xs[xs.len() - 1].0,
        xs[0].1,
        xs[xs.len() - 1].1
    ))
}

struct InstanceStats {
    sets: usize,
    solved: usize,
    prefix_stable: bool,
}

fn check_instance(cfg: &EcosystemConfig) -> Result<InstanceStats, String> {
    let m = cfg.chains();
    let wstar = w_star(cfg).map_err(|e| e.to_string())?;
    let prefix = WorkingSet::prefix(wstar).unwrap();
    let mut solved = 0;
    let mut stable = Vec::new();
    for mask in 1u32..(1 << m) {
        let w = WorkingSet::from_mask(mask).unwrap();
        match existence_check(cfg, &w).map_err(|e| e.to_string())? {
            Existence::Exists => {
                let c = solve_equilibrium(cfg, &w, SOLVE_TOL).map_err(|e| format!("{w}: {e}"))?;
                ensure(c.residual < 1e-9, || format!("{w}: residual {:e}", c.residual))?;
                let v = classify_with(cfg, &c, false).map_err(|e| format!("{w}: {e}"))?;
                for (k, lam) in &v.analytic_resting_eigenvalues {
                    let gap = v
                        .eigenvalues
                        .iter()
                        .map(|z| (z - Complex64::new(*lam, 0.0)).norm())
                        .fold(f64::INFINITY, f64::min);
                    ensure(gap < 1e-8, || format!("{w}: λ_{} off by {gap:e}", k + 1))?;
                }
                if v.classification == Classification::AsymptoticallyStable {
                    stable.push(w.clone());
                }
                solved += 1;
            }
            Existence::NoEquilibrium(_) => {
                // S(b) = Σ K(α_i, b) must stay on one side of 1 across the bracket
                let (lo, hi) = payoff_bracket(cfg, &w);
                if lo < hi {
                    let s = |b: f64| -> f64 {
                        w.indices()
                            .iter()
                            .map(|&i| {
                                let a = cfg.alpha()[i];
                                let b = b.clamp(k_lower(cfg, a), k_upper(cfg, a));
                                k_function(cfg, a, b, 1e-14).unwrap()
                            })
                            .sum()
                    };
                    for j in 0..=64 {
                        let b = lo + (hi - lo) * j as f64 / 64.0;
                        let v = s(b);
                        ensure(v >= 1.0 - 1e-9, || format!("{w}: S({b}) = {v} < 1 though no equilibrium was declared"))?;
                    }
                }
            }
        }
    }
    ensure(stable.len() <= 1, || format!("{} stable candidates", stable.len()))?;
    if let Some(s) = stable.first() {
        ensure(*s == prefix, || format!("stable set {s} but w* = {wstar}"))?;
    }
    Ok(InstanceStats { sets: (1 << m) - 1, solved, prefix_stable: stable.first() == Some(&prefix) })
}

fn theorem_suite() -> Check {
    const INSTANCES: u64 = 1000;
    let results: Vec<Result<InstanceStats, String>> = (0..INSTANCES)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + k);
            let cfg = common::random_instance(&mut rng);
            check_instance(&cfg).map_err(|e| format!("instance {k} ({:?}, τ={}): {e}", cfg.alpha(), cfg.tau()))
        })
        .collect();
    let mut violations = Vec::new();
    let (mut sets, mut solved, mut prefix_stable) = (0, 0, 0);
    for r in results {
        match r {
            Ok(s) => {
                sets += s.sets;
                solved += s.solved;
                prefix_stable += s.prefix_stable as usize;
            }
            Err(e) => violations.push(e),
        }
    }
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok(format!(
        "{INSTANCES} instances, {sets} working sets, {solved} solved; prefix equilibrium stable in {prefix_stable}/{INSTANCES}"
    ))
}

fn kernel_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // Jacobian against central differences
    let mut worst_jac = 0.0f64;
    for _ in 0..100 {
        let cfg = common::random_instance(&mut rng);
        let x = StateVector::new(common::random_simplex(&mut rng, cfg.chains())).unwrap();
        let jac = jacobian(&cfg, &x).map_err(|e| e.to_string())?.matrix;
        let fd = common::fd_jacobian(&cfg, x.as_slice());
        let scale = (0..cfg.chains())
            .flat_map(|i| (0..cfg.chains()).map(move |j| (i, j)))
            .map(|(i, j)| jac[(i, j)].abs())
            .fold(0.0, f64::max);
        for (i, row) in fd.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                worst_jac = worst_jac.max((jac[(i, j)] - v).abs() / scale);
            }
        }
    }
    ensure(worst_jac <= 1e-5, || format!("Jacobian relative error {worst_jac:e}"))?;

    // characteristic polynomial residual
    let mut worst_poly = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=8);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let a = Matrix::from_rows(&rows).unwrap();
        let bound = 1e-8 * a.frobenius_norm().powi(n as i32);
        for z in eigenvalues(&a).map_err(|e| e.to_string())? {
            let r = common::char_poly_at(&a, z).norm();
            ensure(r < bound, || format!("{n}×{n}: |det(λI − A)| = {r:e} at λ = {z}"))?;
            worst_poly = worst_poly.max(r / bound);
        }
    }

    // K monotone in a and b
    for _ in 0..1000 {
        let cfg = common::random_instance(&mut rng);
        let a = 1.0 - rng.random::<f64>();
        let (lo, hi) = (k_lower(&cfg, a), k_upper(&cfg, a));
        let b = rng.random_range(lo..hi);
        let db = (hi - lo) * 1e-3;
        let da = a * 1e-3;
        let k0 = k_function(&cfg, a, b, 1e-14).map_err(|e| e.to_string())?;
        let kb = k_function(&cfg, a, (b + db).min(hi), 1e-14).map_err(|e| e.to_string())?;
        ensure(kb < k0, || format!("K not decreasing in b at a={a}, b={b}"))?;
        let b_up = b.clamp(k_lower(&cfg, a + da), k_upper(&cfg, a + da));
        if b_up == b {
            let ka = k_function(&cfg, a + da, b, 1e-14).map_err(|e| e.to_string())?;
            ensure(ka > k0, || format!("K not increasing in a at a={a}, b={b}"))?;
        }
    }
    Ok(format!("Jacobian rel. error {worst_jac:.1e}; char-poly residual ≤ {worst_poly:.1e} of bound; K monotone on 1000 samples"))
}

fn simplex_conservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut runs = 0;
    for k in 0..60 {
        let cfg = common::random_instance(&mut rng);
        let m = cfg.chains();
        let mut x = common::random_simplex(&mut rng, m);
        // zero a random proper subset to exercise faces
        let zeroed: Vec<usize> = (0..m).filter(|_| rng.random_bool(0.3)).collect();
        if zeroed.len() < m {
            for &i in &zeroed {
                x[i] = 0.0;
            }
            let s: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= s);
        }
        let x0 = StateVector::new(x).unwrap();
        let mut spec = IntegratorSpec::rk4(1e-3, 5.0);
        spec.renormalize = k % 2 == 0;
        let tr = integrate(&cfg, &x0, &spec).map_err(|e| e.to_string())?;
        runs += 1;
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let sum: f64 = s.as_slice().iter().sum();
            worst = worst.max((sum - 1.0).abs());
            ensure((sum - 1.0).abs() <= 1e-9, || format!("sum {sum} at t={t}"))?;
            ensure(s.as_slice().iter().all(|v| *v >= 0.0), || format!("negative component at t={t}"))?;
            for (i, v) in x0.as_slice().iter().enumerate() {
                ensure(*v != 0.0 || s[i] == 0.0, || format!("face left: x{} = {} at t={t}", i + 1, s[i]))?;
            }
        }
    }
    Ok(format!("{runs} trajectories, worst |Σx − 1| = {worst:.1e}"))
}

fn mean_field_validation() -> Check {
    const SEEDS: u64 = 20;
    const ODE_HORIZON: f64 = 5.0;
    let cfg = EcosystemConfig::four_chain_reference();
    let x0 = common::published_x0();
    let scale = safe_imitation_scale(&cfg);
    let base = AgentSimSpec {
        population: 10_000,
        revision_rate: 1.0,
        horizon: ODE_HORIZON * scale,
        seed: 0,
        sample_every: ODE_HORIZON * scale / 200.0,
        imitation_scale: scale,
    };
    let ode = integrate(&cfg, &x0, &IntegratorSpec::rk4(1e-3, ODE_HORIZON)).map_err(|e| e.to_string())?;
    let mut sups: Vec<f64> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let spec = AgentSimSpec { seed, ..base.clone() };
            let emp = simulate_agents(&cfg, &x0, &spec).map_err(|e| e.to_string())?;
            compare_to_ode(&emp, &ode, spec.time_scale()).map(|r| r.sup_norm).map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    sups.sort_by(f64::total_cmp);
    let median = 0.5 * (sups[9] + sups[10]);
    ensure(median < 0.05, || format!("median sup-norm {median}"))?;
    Ok(format!("median sup-norm {median:.4} (max {:.4}) over {SEEDS} seeds", sups[19]))
}

fn coupon_oracle() -> Check {
    let est = expected_puzzles_per_processor(4, 1, 4.0, PuzzleCountMethod::MonteCarlo { trials: 100_000, seed: 2024 })
        .map_err(|e| e.to_string())?;
    let se = est.std_error.unwrap();
    let exact = 4.0 * common::harmonic(4) / 4.0;
    ensure((exact - 25.0 / 12.0).abs() < 1e-15, || "harmonic oracle mismatch".into())?;
    let z = (est.per_processor - exact).abs() / se;
    ensure(z <= 3.0, || format!("f = {} ± {se}, {z:.2} SE from 25/12", est.per_processor))?;
    for c in 1..=3u64 {
        let mut prev = 0.0;
        for m in [1u64, 2, 4, 8, 16, 32] {
            let f = expected_puzzles_per_processor(m, c, (m * c) as f64, PuzzleCountMethod::MonteCarlo { trials: 20_000, seed: 9 })
                .map_err(|e| e.to_string())?
                .per_processor;
            ensure(f > prev, || format!("f not increasing at c={c}, m={m}: {f} ≤ {prev}"))?;
            prev = f;
        }
    }
    Ok(format!("f = {:.5} ± {se:.5} ({z:.2} SE from 25/12); increasing on m ∈ {{1..32}}, c ∈ {{1,2,3}}", est.per_processor))
}

fn main() {
    let criteria: [(&str, Option<u64>, fn() -> Check); 10] = [
        ("equilibrium reproduction", Some(1), equilibrium_reproduction),
        ("stability reproduction", Some(1), stability_reproduction),
        ("trajectory reproduction", Some(10), trajectory_reproduction),
        ("payoff equalization", None, payoff_equalization),
        ("kappa sweep trend", None, kappa_trend),
        ("theorem property suite", Some(60), theorem_suite),
        ("numerical kernel oracles", None, kernel_oracles),
        ("simplex conservation", None, simplex_conservation),
        ("mean-field validation", Some(60), mean_field_validation),
        ("coupon-collector oracle", None, coupon_oracle),
    ];
    let mut failed = 0;
    for (k, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut result = check();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(b)) = (&result, budget) {
            if elapsed > Duration::from_secs(*b) {
                result = Err(format!("took {:.2} s, budget {b} s", elapsed.as_secs_f64()));
            }
        }
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d.clone()),
            Err(e) => {
                failed += 1;
                ("FAIL", e.clone())
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail} [{:.2} s]", k + 1, elapsed.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
