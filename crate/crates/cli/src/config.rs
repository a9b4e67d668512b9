//! Experiment configuration files.

use std::path::Path;

use psapprox::experiment::{BoundParams, Experiment, GridParams};
use psapprox::exterior::{BoundaryFlux, FluxProfile};
use psapprox::geometry::BoundaryCurve;
use psapprox::matching::{InteriorBump, MatchingProblem};
use psapprox::pointsource::{GaussianMixture, TimeSignal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSettings {
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_eps")]
    pub epsilon_grid: Vec<f64>,
}

fn default_p() -> f64 {
    BoundParams::default().p
}

fn default_eps() -> Vec<f64> {
    BoundParams::default().epsilon_grid
}

impl Default for BoundSettings {
    fn default() -> Self {
        Self {
            p: default_p(),
            epsilon_grid: default_eps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingSettings {
    pub phibar_knots: usize,
    #[serde(default)]
    pub v0: Vec<InteriorBump>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "yes")]
    pub nonneg_phibar: bool,
    #[serde(default = "default_gamma_nodes")]
    pub gamma_nodes: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn yes() -> bool {
    true
}

fn default_gamma_nodes() -> usize {
    64
}

fn default_budget() -> usize {
    400
}

/// Pass/fail thresholds; every key can be replaced with `--tol-override KEY=VAL`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Error-estimate margins must stay below `1 + slack`.
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Optional ceiling on the energy-identity residual ratio.
    #[serde(default)]
    pub energy_ratio: Option<f64>,
}

fn default_slack() -> f64 {
    BoundParams::default().slack
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            slack: default_slack(),
            energy_ratio: None,
        }
    }
}

impl Tolerances {
    pub const KEYS: [&'static str; 2] = ["slack", "energy_ratio"];

    pub fn set(&mut self, key: &str, value: f64) -> Result<(), CliError> {
        match key {
            "slack" => self.slack = value,
            "energy_ratio" => self.energy_ratio = Some(value),
            _ => {
                return Err(CliError::Config(format!(
                    "--tol-override: unknown key `{key}` (expected one of {})",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }
}

/// One experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub curve: BoundaryCurve,
    pub d: f64,
    pub horizon: f64,
    pub grid: GridParams,
    #[serde(default)]
    pub u0: GaussianMixture,
    pub flux: BoundaryFlux,
    #[serde(default = "TimeSignal::zero")]
    pub phibar: TimeSignal,
    #[serde(default)]
    pub bounds: BoundSettings,
    #[serde(default)]
    pub matching: Option<MatchingSettings>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

/// Inputs that determine the full-model trajectory.
#[derive(Serialize)]
struct TrajectoryKey<'a> {
    curve: &'a BoundaryCurve,
    d: f64,
    horizon: f64,
    grid: &'a GridParams,
    u0: &'a GaussianMixture,
    flux: &'a BoundaryFlux,
}

fn sha256_json<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

impl ExperimentConfig {
    /// The reference circle experiment with the reference matching problem.
    pub fn reference() -> Self {
        let e = Experiment::reference();
        let m = MatchingProblem::reference();
        Self {
            curve: e.curve,
            d: e.d,
            horizon: e.horizon,
            grid: e.grid,
            u0: e.u0,
            flux: e.flux,
            phibar: e.phibar,
            bounds: BoundSettings::default(),
            matching: Some(MatchingSettings {
                phibar_knots: m.phibar_knots,
                v0: m.v0,
                lambda: m.lambda,
                nonneg_phibar: m.nonneg_phibar,
                gamma_nodes: m.gamma_nodes,
                budget: default_budget(),
            }),
            tolerances: Tolerances::default(),
            seed: 2024,
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut bad = match self.experiment().validate() {
            Ok(()) => Vec::new(),
            Err(psapprox::Error::Constraint(v)) => v,
            Err(e) => vec![e.to_string()],
        };
        if let FluxProfile::Nodal(v) = &self.flux.profile {
            if v.len() != self.grid.n_theta {
                bad.push(format!(
                    "flux.profile: {} nodal values but grid.n_theta = {}",
                    v.len(),
                    self.grid.n_theta
                ));
            }
        }
        if let Some(e) = self.tolerances.energy_ratio {
            if !(e > 0.0) {
                bad.push(format!("tolerances.energy_ratio: must be positive, got {e}"));
            }
        }
        if let Some(m) = &self.matching {
            if m.budget == 0 {
                bad.push("matching.budget: must be positive".into());
            }
            if let Some(p) = self.matching_problem().filter(|_| bad.is_empty()) {
                match p.validate() {
                    Ok(()) => {}
                    Err(psapprox::Error::Constraint(v)) => bad.extend(v.into_iter().map(|s| format!("matching: {s}"))),
                    Err(e) => bad.push(format!("matching: {e}")),
                }
            }
            if let FluxProfile::Nodal(v) = &self.flux.profile {
                if v.len() != m.gamma_nodes {
                    bad.push(format!(
                        "matching.gamma_nodes: {} does not match the {} nodal flux values",
                        m.gamma_nodes,
                        v.len()
                    ));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(bad.join("\n")))
        }
    }

    pub fn experiment(&self) -> Experiment {
        Experiment {
            curve: self.curve.clone(),
            d: self.d,
            horizon: self.horizon,
            grid: self.grid.clone(),
            u0: self.u0.clone(),
            flux: self.flux.clone(),
            phibar: self.phibar.clone(),
            bounds: BoundParams {
                p: self.bounds.p,
                epsilon_grid: self.bounds.epsilon_grid.clone(),
                slack: self.tolerances.slack,
            },
        }
    }

    pub fn matching_problem(&self) -> Option<MatchingProblem> {
        let m = self.matching.as_ref()?;
        Some(MatchingProblem {
            curve: self.curve.clone(),
            d: self.d,
            flux: self.flux.clone(),
            horizon: self.horizon,
            phibar_knots: m.phibar_knots,
            v0: m.v0.clone(),
            lambda: m.lambda,
            nonneg_phibar: m.nonneg_phibar,
            fixed_u0: self.u0.clone(),
            gamma_nodes: m.gamma_nodes,
        })
    }

    /// SHA-256 of the canonical JSON rendering.
    pub fn hash(&self) -> String {
        sha256_json(self)
    }

    /// Hash of the inputs of the full-model solve only.
    pub fn trajectory_hash(&self) -> String {
        sha256_json(&TrajectoryKey {
            curve: &self.curve,
            d: self.d,
            horizon: self.horizon,
            grid: &self.grid,
            u0: &self.u0,
            flux: &self.flux,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
d = 1.0
horizon = 4.0
[curve]
kind = "circle"
radius = 1.0
[grid]
n_r = 41
n_theta = 16
n_steps = 80
stamp_every = 8
[flux]
profile = 0.15915494309189535
signal = { knots = [0.0], values = [1.0] }
"#;

    #[test]
    fn minimal_file_parses_with_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.bounds, BoundSettings::default());
        assert!(c.u0.is_empty() && c.matching.is_none());
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn unknown_key_is_rejected_with_its_name() {
        let err = ExperimentConfig::parse(&format!("{MINIMAL}\n[tolerances]\nslak = 0.1\n")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("slak"), "{msg}");
    }

    #[test]
    fn epsilon_outside_range_is_rejected() {
        let text = MINIMAL.replace("horizon = 4.0", "horizon = 4.0\n[bounds]\nepsilon_grid = [2.5]");
        let msg = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(msg.contains("bounds.epsilon_grid"), "{msg}");
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let b = ExperimentConfig::parse(&MINIMAL.replace("d = 1.0", "d    =   1.0  # comment")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.tolerances.slack = 0.1;
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.trajectory_hash(), c.trajectory_hash());
    }

    #[test]
    fn reference_round_trips_through_toml() {
        let r = ExperimentConfig::reference();
        let text = toml::to_string(&r).unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), r);
    }

    #[test]
    fn shipped_configs_parse() {
        let r = ExperimentConfig::parse(include_str!("../../../configs/reference.toml")).unwrap();
        assert_eq!(r, ExperimentConfig::reference());
        let e = ExperimentConfig::parse(include_str!("../../../configs/ellipse.toml")).unwrap();
        assert_eq!(e.u0.len(), 1);
    }

    #[test]
    fn tolerance_override_keys() {
        let mut t = Tolerances::default();
        t.set("energy_ratio", 0.01).unwrap();
        assert_eq!(t.energy_ratio, Some(0.01));
        assert!(t.set("bogus", 1.0).is_err());
    }
}
