//! JSON run configuration.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use shard_evo_core::dynamics::{IntegrationMethod, IntegratorSpec};
use shard_evo_core::ecosystem::{CostCurve, EcosystemConfig};
use shard_evo_core::elastico::{derive_game_inputs, ElasticoParams};

use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub game: Option<GameBlock>,
    pub elastico: Option<ElasticoBlock>,
    pub integrator: Option<IntegratorBlock>,
    pub agents: Option<AgentsBlock>,
    pub sweep: Option<SweepBlock>,
}

/// Game coefficients given directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameBlock {
    pub alpha: Vec<f64>,
    pub tau: f64,
    #[serde(default = "default_cost")]
    pub cost: CostCurve,
}

fn default_cost() -> CostCurve {
    CostCurve::Log1p
}

/// Protocol parameters from which the game is derived.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticoBlock {
    pub population: f64,
    pub chains: Vec<ElasticoParams>,
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorBlock {
    /// `rk4` (default) or `rk45`.
    pub method: Option<String>,
    pub step: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_step: Option<f64>,
    pub t_end: Option<f64>,
    pub renormalize: Option<bool>,
    pub record_every: Option<usize>,
    pub stop_when_settled: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsBlock {
    pub population: Option<u64>,
    pub revision_rate: Option<f64>,
    pub imitation_scale: Option<f64>,
    pub ode_horizon: Option<f64>,
    pub samples: Option<usize>,
    pub seeds: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    #[serde(default = "default_parameter")]
    pub parameter: String,
    pub grid: Vec<f64>,
}

fn default_parameter() -> String {
    "kappa".into()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
        match (&cfg.game, &cfg.elastico) {
            (Some(_), Some(_)) => Err(CliError::validation("config has both `game` and `elastico` blocks")),
            (None, None) => Err(CliError::validation("config needs a `game` or an `elastico` block")),
            _ => Ok(cfg),
        }
    }

    /// The game instance, deriving it from protocol parameters if needed.
    /// Derivation warnings are printed to stderr.
    pub fn ecosystem(&self) -> Result<EcosystemConfig, CliError> {
        if let Some(g) = &self.game {
            return Ok(EcosystemConfig::new(g.alpha.clone(), g.tau, g.cost.clone())?);
        }
        let e = self.elastico.as_ref().expect("checked on load");
        let derived = derive_game_inputs(&e.chains, e.population, e.strict)?;
        for w in &derived.warnings {
            eprintln!("warning: {w}");
        }
        if derived.permutation.windows(2).any(|p| p[1] < p[0]) {
            let order: Vec<String> = derived.permutation.iter().map(|k| (k + 1).to_string()).collect();
            eprintln!("note: chains reordered by revenue; column k is input chain {}", order.join(","));
        }
        Ok(derived.config)
    }

    pub fn integrator(&self) -> Result<IntegratorSpec, CliError> {
        let block = self.integrator.as_ref();
        let get = |f: fn(&IntegratorBlock) -> Option<f64>| block.and_then(f);
        let mut spec = IntegratorSpec::default();
        let method = block.and_then(|b| b.method.as_deref()).unwrap_or("rk4");
        spec.method = match method {
            "rk4" => IntegrationMethod::Rk4 { step: get(|b| b.step).unwrap_or(0.01) },
            "rk45" => IntegrationMethod::Rk45 {
                rel_tol: get(|b| b.rel_tol).unwrap_or(1e-9),
                abs_tol: get(|b| b.abs_tol).unwrap_or(1e-12),
                max_step: get(|b| b.max_step).unwrap_or(1.0),
            },
            other => return Err(CliError::validation(format!("unknown integrator method `{other}`"))),
        };
        if let Some(b) = block {
            spec.t_end = b.t_end.unwrap_or(spec.t_end);
            spec.renormalize = b.renormalize.unwrap_or(spec.renormalize);
            spec.record_every = b.record_every.unwrap_or(spec.record_every);
            spec.stop_when_settled = b.stop_when_settled.unwrap_or(spec.stop_when_settled);
        }
        Ok(spec)
    }
}

impl GameBlock {
    pub fn from_config(cfg: &EcosystemConfig) -> Self {
        Self { alpha: cfg.alpha().to_vec(), tau: cfg.tau(), cost: cfg.cost().clone() }
    }
}
