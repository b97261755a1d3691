//! Replicator dynamics `ẋ_i = x_i (u_i(x) − ū(x))`.

use std::io::{Read, Write};

use crate::ecosystem::{mean_payoff_raw, EcosystemConfig, StateVector};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Negative components at or above this value are clipped to zero after a step.
pub const CLIP_TOL: f64 = -1e-12;

/// `‖φ‖∞` below which a step counts towards settling.
pub const SETTLE_FIELD_TOL: f64 = 1e-10;

/// Consecutive quiet steps needed to declare the trajectory settled.
pub const SETTLE_STEPS: usize = 100;

/// Cap on integration steps per run.
pub const MAX_STEPS: usize = 100_000_000;

/// Writes `φ(x)` into `out` for an arbitrary vector `x`, on or off the simplex.
pub fn replicator_field_into(cfg: &EcosystemConfig, x: &[f64], out: &mut [f64]) {
    let mut mean = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let u = cfg.payoff_at(i, xi);
        out[i] = u;
        mean += xi * u;
    }
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = xi * (*o - mean);
    }
}

fn check_state(cfg: &EcosystemConfig, x: &StateVector) -> Result<()> {
    if x.dim() != cfg.chains() {
        return Err(Error::InvalidState(format!(
            "state has {} components, configuration has {} chains",
            x.dim(),
            cfg.chains()
        )));
    }
    Ok(())
}

/// The replicator vector field at `x`. Its components sum to zero.
pub fn replicator_field(cfg: &EcosystemConfig, x: &StateVector) -> Result<Vec<f64>> {
    check_state(cfg, x)?;
    let mut out = vec![0.0; x.dim()];
    replicator_field_into(cfg, x.as_slice(), &mut out);
    Ok(out)
}

/// Jacobian of the replicator field.
#[derive(Debug, Clone)]
pub struct Jacobian {
    pub matrix: Matrix,
    /// Chains whose share sits on a kink of the cost curve; their column uses
    /// the right-hand slope.
    pub one_sided: Vec<usize>,
}

/// Jacobian of `φ` at `x`, taken in the ambient space `R^M`.
///
/// With `s_j = α_j/(x_j+τ)² + h'(x_j)`:
///
/// - `∂φ_i/∂x_i = (1−2x_i)u_i − (x_i−x_i²)s_i − Σ_{j≠i} x_j u_j`
/// - `∂φ_i/∂x_j = −x_i u_j + x_i x_j s_j`
///
/// On the simplex `1ᵀJ = −ū·1ᵀ`, so `−ū` is always an eigenvalue, belonging
/// to the direction that leaves the simplex.
pub fn jacobian(cfg: &EcosystemConfig, x: &StateVector) -> Result<Jacobian> {
    check_state(cfg, x)?;
    Ok(jacobian_raw(cfg, x.as_slice()))
}

pub(crate) fn jacobian_raw(cfg: &EcosystemConfig, x: &[f64]) -> Jacobian {
    let m = x.len();
    let tau = cfg.tau();
    let mut u = vec![0.0; m];
    let mut s = vec![0.0; m];
    let mut one_sided = Vec::new();
    for i in 0..m {
        let a = cfg.alpha()[i];
        let (dh, kink) = cfg.cost().slope(x[i]);
        if kink {
            one_sided.push(i);
        }
        u[i] = cfg.payoff_at(i, x[i]);
        s[i] = a / ((x[i] + tau) * (x[i] + tau)) + dh;
    }
    let total: f64 = x.iter().zip(&u).map(|(xi, ui)| xi * ui).sum();
    let mut j = Matrix::zeros(m);
    for i in 0..m {
        for k in 0..m {
            j[(i, k)] = if i == k {
                (1.0 - 2.0 * x[i]) * u[i] - (x[i] - x[i] * x[i]) * s[i] - (total - x[i] * u[i])
            } else {
                -x[i] * u[k] + x[i] * x[k] * s[k]
            };
        }
    }
    Jacobian { matrix: j, one_sided }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegrationMethod {
    /// Classical fourth-order Runge–Kutta with a fixed step.
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4) with error control.
    Rk45 { rel_tol: f64, abs_tol: f64, max_step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSpec {
    pub method: IntegrationMethod,
    pub t_end: f64,
    /// Divide by the component sum after each step.
    pub renormalize: bool,
    /// Record every k-th accepted step. The final state is always recorded.
    pub record_every: usize,
    /// Multiplier on the vector field (time-scale conversion).
    pub rate: f64,
    /// Stop as soon as the trajectory has settled.
    pub stop_when_settled: bool,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            method: IntegrationMethod::Rk4 { step: 0.01 },
            t_end: 1000.0,
            renormalize: true,
            record_every: 1,
            rate: 1.0,
            stop_when_settled: false,
        }
    }
}

impl IntegratorSpec {
    pub fn rk4(step: f64, t_end: f64) -> Self {
        Self { method: IntegrationMethod::Rk4 { step }, t_end, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = match self.method {
            IntegrationMethod::Rk4 { step } => positive(step),
            IntegrationMethod::Rk45 { rel_tol, abs_tol, max_step } => {
                positive(rel_tol) && positive(abs_tol) && positive(max_step)
            }
        };
        if !ok {
            return Err(Error::InvalidConfig("integrator step and tolerances must be positive".into()));
        }
        if !positive(self.t_end) {
            return Err(Error::InvalidConfig(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !positive(self.rate) {
            return Err(Error::InvalidConfig(format!("rate must be positive, got {}", self.rate)));
        }
        if let IntegrationMethod::Rk4 { step } = self.method {
            if self.t_end / step > MAX_STEPS as f64 {
                return Err(Error::InvalidConfig(format!(
                    "t_end / step exceeds {MAX_STEPS} steps; use a larger step"
                )));
            }
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// A sampled solution `t ↦ ξ(t, x0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub x0: StateVector,
    /// Time at which the field had stayed below [`SETTLE_FIELD_TOL`] for
    /// [`SETTLE_STEPS`] consecutive steps.
    pub settled_at: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &StateVector {
        self.states.last().expect("trajectory holds at least x0")
    }

    /// Constant single-point trajectory at `x`.
    pub fn constant(x: StateVector) -> Self {
        Self { times: vec![0.0], states: vec![x.clone()], x0: x, settled_at: None }
    }

    /// State at time `t` by linear interpolation between samples.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        let (t0, t1) = (self.times[0], *self.times.last()?);
        if t < t0 || t > t1 {
            return None;
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k >= self.times.len() {
            return Some(self.last().as_slice().to_vec());
        }
        let (ta, tb) = (self.times[k - 1], self.times[k]);
        let w = if tb > ta { (t - ta) / (tb - ta) } else { 0.0 };
        let (a, b) = (self.states[k - 1].as_slice(), self.states[k].as_slice());
        Some(a.iter().zip(b).map(|(p, q)| p + w * (q - p)).collect())
    }

    /// CSV with header `t,x1,...,xM` and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let m = self.x0.dim();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=m).map(|i| format!("x{i}")));
        out.write_record(&header)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut row = vec![fmt_f64(*t)];
            row.extend(x.as_slice().iter().map(|v| fmt_f64(*v)));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let header = rdr.headers()?.clone();
        let m = header.len().saturating_sub(1);
        if m == 0 || &header[0] != "t" || (1..=m).any(|i| header[i] != format!("x{i}")) {
            return Err(Error::InvalidState(format!(
                "trajectory header must be t,x1,...,xM; got {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidState(format!("bad number in trajectory: {e}")))?;
            if vals.len() != m + 1 {
                return Err(Error::InvalidState("ragged trajectory row".into()));
            }
            times.push(vals[0]);
            states.push(StateVector::new(vals[1..].to_vec())?);
        }
        let x0 = states
            .first()
            .cloned()
            .ok_or_else(|| Error::InvalidState("trajectory has no rows".into()))?;
        Ok(Self { times, states, x0, settled_at: None })
    }
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Stepper<'a> {
    cfg: &'a EcosystemConfig,
    rate: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(cfg: &'a EcosystemConfig, rate: f64) -> Self {
        let m = cfg.chains();
        Self { cfg, rate, k: std::array::from_fn(|_| vec![0.0; m]), tmp: vec![0.0; m] }
    }

    fn eval(&mut self, stage: usize, y: &[f64]) {
        replicator_field_into(self.cfg, y, &mut self.k[stage]);
        let rate = self.rate;
        self.k[stage].iter_mut().for_each(|v| *v *= rate);
    }

    fn combine(&mut self, y: &[f64], h: f64, coeffs: &[(usize, f64)]) {
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * coeffs.iter().map(|&(s, c)| c * self.k[s][i]).sum::<f64>();
        }
    }

    fn rk4(&mut self, y: &mut [f64], h: f64) {
        self.eval(0, y);
        self.combine(y, h, &[(0, 0.5)]);
        let t = self.tmp.clone();
        self.eval(1, &t);
        self.combine(y, h, &[(1, 0.5)]);
        let t = self.tmp.clone();
        self.eval(2, &t);
        self.combine(y, h, &[(2, 1.0)]);
        let t = self.tmp.clone();
        self.eval(3, &t);
        for i in 0..y.len() {
            y[i] += h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
    }

    /// One Dormand–Prince trial step. Returns the fifth-order solution and
    /// the embedded error estimate.
    fn dopri(&mut self, y: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
        const A: [&[(usize, f64)]; 6] = [
            &[(0, 1.0 / 5.0)],
            &[(0, 3.0 / 40.0), (1, 9.0 / 40.0)],
            &[(0, 44.0 / 45.0), (1, -56.0 / 15.0), (2, 32.0 / 9.0)],
            &[(0, 19372.0 / 6561.0), (1, -25360.0 / 2187.0), (2, 64448.0 / 6561.0), (3, -212.0 / 729.0)],
            &[
                (0, 9017.0 / 3168.0),
                (1, -355.0 / 33.0),
                (2, 46732.0 / 5247.0),
                (3, 49.0 / 176.0),
                (4, -5103.0 / 18656.0),
            ],
            &[
                (0, 35.0 / 384.0),
                (2, 500.0 / 1113.0),
                (3, 125.0 / 192.0),
                (4, -2187.0 / 6784.0),
                (5, 11.0 / 84.0),
            ],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        self.eval(0, y);
        for (stage, coeffs) in A.iter().enumerate() {
            self.combine(y, h, coeffs);
            let t = self.tmp.clone();
            self.eval(stage + 1, &t);
        }
        // the last stage was evaluated at the fifth-order solution (FSAL)
        let y5 = {
            self.combine(y, h, A[5]);
            self.tmp.clone()
        };
        let err = (0..y.len())
            .map(|i| h * (0..7).map(|s| E[s] * self.k[s][i]).sum::<f64>())
            .collect();
        (y5, err)
    }
}

/// Clips tiny negatives and optionally renormalises. Fails if the state left
/// the simplex by more than rounding.
fn project(y: &mut [f64], renormalize: bool, t: f64) -> Result<()> {
    for (i, v) in y.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite component x{} at t = {t}", i + 1)));
        }
        if *v < 0.0 {
            if *v >= CLIP_TOL {
                *v = 0.0;
            } else {
                return Err(Error::Numerical(format!(
                    "component x{} = {v} went negative at t = {t}; reduce the step",
                    i + 1
                )));
            }
        }
    }
    if renormalize {
        let s: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v /= s);
    }
    Ok(())
}

fn field_inf_norm(cfg: &EcosystemConfig, y: &[f64], buf: &mut [f64]) -> f64 {
    replicator_field_into(cfg, y, buf);
    buf.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Integrates the replicator ODE forward from `x0` to `spec.t_end`.
pub fn integrate(cfg: &EcosystemConfig, x0: &StateVector, spec: &IntegratorSpec) -> Result<Trajectory> {
    check_state(cfg, x0)?;
    spec.validate()?;
    let m = x0.dim();
    let mut stepper = Stepper::new(cfg, spec.rate);
    let mut y = x0.as_slice().to_vec();
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    let mut quiet = 0usize;
    let mut settled_at = None;
    let mut buf = vec![0.0; m];
    let mut accepted = 0usize;

    let mut h = match spec.method {
        IntegrationMethod::Rk4 { step } => step,
        IntegrationMethod::Rk45 { max_step, .. } => max_step.min(spec.t_end) * 0.01,
    };
    let eps_t = 1e-12 * spec.t_end;
    while t < spec.t_end - eps_t {
        let h_try = h.min(spec.t_end - t);
        match spec.method {
            IntegrationMethod::Rk4 { step } => {
                stepper.rk4(&mut y, h_try);
                accepted += 1;
                // fixed grid avoids accumulating round-off in t
                t = if spec.t_end - t <= step + eps_t { spec.t_end } else { accepted as f64 * step };
            }
            IntegrationMethod::Rk45 { rel_tol, abs_tol, max_step } => {
                let (y5, err) = stepper.dopri(&y, h_try);
                let norm = y
                    .iter()
                    .zip(&y5)
                    .zip(&err)
                    .map(|((a, b), e)| e.abs() / (abs_tol + rel_tol * a.abs().max(b.abs())))
                    .fold(0.0, f64::max);
                if !norm.is_finite() {
                    return Err(Error::Numerical(format!("non-finite error estimate at t = {t}")));
                }
                let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                if norm > 1.0 {
                    h = h_try * factor;
                    if h < 1e-14 * t.abs().max(1.0) {
                        return Err(Error::Numerical(format!("step size underflow at t = {t}")));
                    }
                    continue;
                }
                if accepted >= MAX_STEPS {
                    return Err(Error::Numerical(format!("adaptive integration exceeded {MAX_STEPS} steps at t = {t}")));
                }
                y = y5;
                t += h_try;
                if spec.t_end - t <= eps_t {
                    t = spec.t_end;
                }
                accepted += 1;
                h = (h_try * factor).min(max_step);
            }
        }
        project(&mut y, spec.renormalize, t)?;

        if field_inf_norm(cfg, &y, &mut buf) * spec.rate < SETTLE_FIELD_TOL {
            quiet += 1;
            if quiet == SETTLE_STEPS && settled_at.is_none() {
                settled_at = Some(t);
            }
        } else {
            quiet = 0;
        }

        let done = t >= spec.t_end || (spec.stop_when_settled && settled_at.is_some());
        if accepted % spec.record_every == 0 || done {
            let state = StateVector::new(y.clone()).map_err(|e| {
                Error::Numerical(format!("trajectory left the simplex at t = {t}: {e}"))
            })?;
            times.push(t);
            states.push(state);
        }
        if done {
            break;
        }
    }
    Ok(Trajectory { times, states, x0: x0.clone(), settled_at })
}

/// Per-chain payoffs along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTrace {
    pub times: Vec<f64>,
    /// One row per recorded time, one column per chain.
    pub payoffs: Vec<Vec<f64>>,
}

impl PayoffTrace {
    /// CSV with header `t,u1,...,uM`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let m = self.payoffs.first().map_or(0, Vec::len);
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=m).map(|i| format!("u{i}")));
        out.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.payoffs) {
            let mut rec = vec![fmt_f64(*t)];
            rec.extend(row.iter().map(|v| fmt_f64(*v)));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Largest payoff gap among chains with positive share in the last state.
    pub fn terminal_spread(&self, last_state: &StateVector) -> f64 {
        let Some(row) = self.payoffs.last() else { return 0.0 };
        let working: Vec<f64> = row
            .iter()
            .zip(last_state.as_slice())
            .filter(|(_, x)| **x > crate::ecosystem::DEFAULT_ZERO_TOL)
            .map(|(u, _)| *u)
            .collect();
        let max = working.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = working.iter().cloned().fold(f64::INFINITY, f64::min);
        if working.is_empty() { 0.0 } else { max - min }
    }
}

pub fn payoff_trace(cfg: &EcosystemConfig, traj: &Trajectory) -> Result<PayoffTrace> {
    check_state(cfg, &traj.x0)?;
    if traj.times.len() != traj.states.len() {
        return Err(Error::InvalidState("trajectory times and states differ in length".into()));
    }
    let payoffs = traj.states.iter().map(|x| cfg.payoff_vector(x.as_slice())).collect();
    Ok(PayoffTrace { times: traj.times.clone(), payoffs })
}

/// `ū(x)` along a trajectory, handy for plotting.
pub fn mean_payoff_trace(cfg: &EcosystemConfig, traj: &Trajectory) -> Vec<f64> {
    traj.states.iter().map(|x| mean_payoff_raw(cfg, x.as_slice())).collect()
}
