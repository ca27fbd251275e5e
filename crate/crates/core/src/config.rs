//! The single JSON configuration document shared by the CLI subcommands.

use crate::connectivity::{ConnSpace, ConnectivityError, GibbsModel, PotentialSpec};
use crate::dynamics::{DynamicsError, FhnParams, HebbParams, ScalarFn};
use crate::solver::SolveParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid dynamics: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("invalid connectivity: {0}")]
    Connectivity(#[from] ConnectivityError),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("could not parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorusSection {
    pub d: usize,
    /// Torus radii to sweep; the first entry is the default size.
    pub n_sweep: Vec<i64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DynamicsSection {
    pub a: f64,
    pub c: f64,
    pub j_corr: f64,
    pub j_dec: f64,
    pub j_bar: f64,
    pub g_ini: f64,
    pub f: ScalarFn,
    pub v_act: ScalarFn,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConnectivitySection {
    pub upsilon: f64,
    pub gamma: f64,
    pub m0: i64,
    pub p_near: f64,
    #[serde(default)]
    pub potentials: Vec<PotentialSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegrationSection {
    pub dt: f64,
    pub t_end: f64,
}

/// A named threshold event on the run observable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EventSpec {
    pub name: String,
    /// ">=" or "<=".
    pub op: String,
    pub threshold: f64,
}

impl EventSpec {
    pub fn holds(&self, value: f64) -> bool {
        match self.op.as_str() {
            ">=" => value >= self.threshold,
            "<=" => value <= self.threshold,
            other => panic!("unknown event op {other:?}"),
        }
    }
}

/// Bounded window functionals available as the `H_n` observable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableSpec {
    /// tanh of the time average of the centre-site path. Bounded by 1.
    #[default]
    TanhMean,
    /// tanh of the sup norm of the centre-site path. Bounded by 1.
    TanhSup,
    /// Final value of the centre-site path (diagnostic, unbounded).
    CenterFinal,
}

impl ObservableSpec {
    /// Evaluate on a V_0 window (the centre path alone).
    pub fn eval(&self, center: &[f64]) -> f64 {
        match self {
            ObservableSpec::TanhMean => {
                (center.iter().sum::<f64>() / center.len() as f64).tanh()
            }
            ObservableSpec::TanhSup => center
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .tanh(),
            ObservableSpec::CenterFinal => *center.last().unwrap(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub replicas: u64,
    pub seed: u64,
    #[serde(default)]
    pub observable: ObservableSpec,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    /// Range of truncation radii for the A_c report.
    pub ac_m_max: i64,
    /// ρ > 1 entering the A_c thresholds and the weight sequences.
    pub rho: f64,
    /// Admissibility level for A_c membership reports.
    pub ac_c: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AppConfig {
    pub torus: TorusSection,
    pub dynamics: DynamicsSection,
    pub connectivity: ConnectivitySection,
    pub integration: IntegrationSection,
    pub experiment: ExperimentSection,
}

impl AppConfig {
    /// A small network of tanh-coupled FitzHugh-Nagumo neurons with dense
    /// near-range random connectivity; every knob overridable from JSON.
    pub fn example() -> Self {
        AppConfig {
            torus: TorusSection {
                d: 1,
                n_sweep: vec![2],
            },
            dynamics: DynamicsSection {
                a: 0.7,
                c: 0.8,
                j_corr: 1.0,
                j_dec: 0.5,
                j_bar: 1.0,
                g_ini: 0.5,
                f: ScalarFn::Tanh,
                v_act: ScalarFn::Logistic,
            },
            connectivity: ConnectivitySection {
                upsilon: 1.0,
                gamma: 1.5,
                m0: 2,
                p_near: 0.5,
                potentials: Vec::new(),
            },
            integration: IntegrationSection {
                dt: 1e-3,
                t_end: 1.0,
            },
            experiment: ExperimentSection {
                replicas: 20,
                seed: 1,
                observable: ObservableSpec::TanhMean,
                events: vec![EventSpec {
                    name: "elevated".into(),
                    op: ">=".into(),
                    threshold: 0.1,
                }],
                ac_m_max: 2,
                rho: 2.0,
                ac_c: 10.0,
            },
        }
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: AppConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.fhn_params().validate()?;
        self.hebb_params().validate()?;
        self.gibbs_model().validate()?;
        if self.torus.n_sweep.is_empty() {
            return Err(ConfigError::Invalid("torus.n_sweep must be non-empty".into()));
        }
        if self.torus.d == 0 || self.torus.d > 3 {
            return Err(ConfigError::Invalid(
                "torus.d must be 1, 2 or 3 for the neuron model".into(),
            ));
        }
        if self.experiment.replicas == 0 {
            return Err(ConfigError::Invalid("experiment.replicas must be >= 1".into()));
        }
        if self.experiment.rho <= 1.0 {
            return Err(ConfigError::Invalid("experiment.rho must exceed 1".into()));
        }
        if self.integration.dt <= 0.0 || self.integration.t_end <= 0.0 {
            return Err(ConfigError::Invalid("integration grid must be positive".into()));
        }
        let steps = self.integration.t_end / self.integration.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(ConfigError::Invalid(format!(
                "dt = {} does not divide t_end = {}",
                self.integration.dt, self.integration.t_end
            )));
        }
        for e in &self.experiment.events {
            if e.op != ">=" && e.op != "<=" {
                return Err(ConfigError::Invalid(format!("event {} has op {:?}", e.name, e.op)));
            }
        }
        Ok(())
    }

    pub fn fhn_params(&self) -> FhnParams {
        FhnParams {
            a: self.dynamics.a,
            c: self.dynamics.c,
            f: self.dynamics.f,
            v_act: self.dynamics.v_act,
        }
    }

    pub fn hebb_params(&self) -> HebbParams {
        HebbParams {
            j_corr: self.dynamics.j_corr,
            j_dec: self.dynamics.j_dec,
            j_bar: self.dynamics.j_bar,
            g_ini: self.dynamics.g_ini,
        }
    }

    pub fn solve_params(&self) -> SolveParams {
        SolveParams {
            fhn: self.fhn_params(),
            hebb: self.hebb_params(),
        }
    }

    /// The connection model: binary space bounded by `j_bar`, plus any
    /// configured potentials.
    pub fn gibbs_model(&self) -> GibbsModel {
        GibbsModel {
            space: ConnSpace::binary(self.dynamics.j_bar),
            potentials: self.connectivity.potentials.clone(),
            upsilon: self.connectivity.upsilon,
            gamma: self.connectivity.gamma,
            m0: self.connectivity.m0,
            p_near: self.connectivity.p_near,
        }
    }

    /// SHA-256 of the canonical JSON serialisation; embedded in every
    /// manifest so outputs are traceable to their exact configuration.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialises");
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_config_is_valid_and_round_trips() {
        let cfg = AppConfig::example();
        cfg.validate().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: AppConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = AppConfig::example();
        let mut b = AppConfig::example();
        b.integration.t_end = 2.0;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn validation_rejects_bad_grids_and_gains() {
        let mut cfg = AppConfig::example();
        cfg.integration.dt = 0.3;
        assert!(cfg.validate().is_err());
        let mut cfg = AppConfig::example();
        cfg.dynamics.f = ScalarFn::Constant(2.0);
        assert!(cfg.validate().is_err());
        let mut cfg = AppConfig::example();
        cfg.experiment.rho = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = AppConfig::example();
        cfg.torus.d = 4;
        assert!(cfg.validate().is_err());
    }
}
