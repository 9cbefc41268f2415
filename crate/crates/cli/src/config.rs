//! Scenario configuration: one JSON document shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use nosig_core::bohm::{EdgeRule, SignConvention};
use nosig_core::epr::EavesdropPolicy;
use nosig_core::hamiltonian::{Boundary, Hermitization, PhysicalConstants};
use nosig_core::state::PointerGrid;
use nosig_core::tensor::Subsystem;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub scenario: Scenario,
    pub hamiltonian: Option<HamiltonianSpec>,
    pub state: Option<StateSpec>,
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Subcommand the document was written for; checked when present.
    pub name: Option<String>,
    pub angles: Option<Vec<f64>>,
    pub sweep_points: Option<usize>,
    pub eavesdropper: Option<EavesdropPolicy>,
    pub key_settings: Option<[f64; 2]>,
    pub alarm_threshold: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_prime: Option<f64>,
    pub beta: Option<f64>,
    pub observable: Option<OperatorSpec>,
    pub time: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub remote: Option<String>,
    pub partition: Option<Partition>,
    pub sign: Option<SignConvention>,
    pub edge: Option<EdgeRule>,
    pub constants: Option<PhysicalConstants>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    pub a: Vec<String>,
    pub b: Vec<String>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Line(PointerGrid),
    Plane([PointerGrid; 2]),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_n() -> usize {
    10_000
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            n: default_n(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub factorization: f64,
    pub audit: f64,
    pub correlation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            factorization: 1e-9,
            audit: nosig_core::audit::DEFAULT_TOLERANCE,
            correlation: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub format: Option<Format>,
    pub path: Option<PathBuf>,
}

/// Where an operator acts: a qubit label or an explicit signature.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Support {
    Qubit(String),
    Subsystems(Vec<Subsystem>),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliName {
    I,
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub seed: u64,
}

/// Exactly one of `pauli`, `spin`, `matrix`, `random_hermitian`, plus `on`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub pauli: Option<PauliName>,
    pub spin: Option<f64>,
    pub matrix: Option<MatrixSpec>,
    pub random_hermitian: Option<RandomSpec>,
    pub on: Support,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    LocalSum {
        h_a: OperatorSpec,
        /// One remote Hamiltonian per setting.
        h_db: Vec<OperatorSpec>,
    },
    VonNeumann {
        observable: OperatorSpec,
        lambda: f64,
        #[serde(default)]
        hermitization: Hermitization,
        #[serde(default)]
        boundary: Boundary,
    },
    Symmetrized {
        o_a: OperatorSpec,
        o_b: OperatorSpec,
        lambda: f64,
        #[serde(default)]
        hermitization: Hermitization,
        #[serde(default)]
        boundary: Boundary,
    },
    #[serde(rename = "bohm_1d")]
    Bohm1d {
        #[serde(default)]
        potential: Option<Vec<f64>>,
        #[serde(default)]
        harmonic_omega: Option<f64>,
        #[serde(default = "hard_wall")]
        boundary: Boundary,
    },
}

fn hard_wall() -> Boundary {
    Boundary::HardWall
}

impl HamiltonianSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            HamiltonianSpec::LocalSum { .. } => "local_sum",
            HamiltonianSpec::VonNeumann { .. } => "von_neumann",
            HamiltonianSpec::Symmetrized { .. } => "symmetrized",
            HamiltonianSpec::Bohm1d { .. } => "bohm_1d",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Schmidt {
        coefficients: Vec<f64>,
        b_prime: Vec<Subsystem>,
        a: Vec<Subsystem>,
    },
    Random {
        seed: u64,
    },
    SingletApparatus {
        alpha: f64,
        beta: f64,
    },
    AuditProbe {
        chi: f64,
    },
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default)]
        momentum: f64,
    },
    PlaneWave {
        k: f64,
    },
    BoxMode {
        #[serde(default = "first_mode")]
        mode: usize,
    },
    GroundState,
    GaussianPair {
        offset: f64,
        sigma: f64,
    },
}

fn first_mode() -> usize {
    1
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            match path.as_str() {
                "." => CliError::Config(format!("{origin}: {inner}")),
                _ => CliError::Config(format!("{origin}: `{path}`: {inner}")),
            }
        })?;
        de.end()
            .map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Reject a document written for a different subcommand.
    pub fn expect_scenario(&self, name: &str) -> Result<(), CliError> {
        match &self.scenario.name {
            Some(n) if n != name => Err(CliError::Config(format!(
                "config is for scenario `{n}`, not `{name}`"
            ))),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_uses_defaults() {
        let c = Config::parse("{}", "inline").unwrap();
        assert_eq!(c.sampling.n, 10_000);
        assert!(c.hamiltonian.is_none());
        assert_eq!(c.tolerances.factorization, 1e-9);
    }

    #[test]
    fn string_lambda_reports_position() {
        let text = "{\n  \"hamiltonian\": {\"type\": \"von_neumann\", \"lambda\": \"1\",\n  \"observable\": {\"pauli\": \"z\", \"on\": \"B\"}}\n}";
        let err = Config::parse(text, "inline").unwrap_err().to_string();
        assert!(
            err.contains("`hamiltonian`") && err.contains("line "),
            "{err}"
        );
        let err = Config::parse("{\n\"sampling\": {\"n\": \"5\"}}", "inline")
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("`sampling.n`") && err.contains("line 2"),
            "{err}"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"bogus": 1}"#,
            r#"{"sampling": {"n": 5, "sed": 1}}"#,
            r#"{"hamiltonian": {"type": "local_sum", "h_a": {"pauli": "x", "on": "A"}, "h_db": [], "extra": 0}}"#,
            r#"{"state": {"kind": "warp"}}"#,
        ] {
            assert!(Config::parse(text, "inline").is_err(), "{text}");
        }
    }

    #[test]
    fn grids_and_operators_parse() {
        let c = Config::parse(
            r#"{"grid": [{"points": 8, "spacing": 0.5}, {"points": 6, "spacing": 0.2}],
                "scenario": {"observable": {"matrix": {"re": [[1, 0], [0, -1]]}, "on": [{"label": "A", "dim": 2}]},
                             "eavesdropper": {"intercept_resend": "uniform_random"}}}"#,
            "inline",
        )
        .unwrap();
        assert!(matches!(c.grid, Some(GridSpec::Plane(_))));
        assert!(c.scenario.observable.is_some());
    }

    #[test]
    fn scenario_name_mismatch() {
        let c = Config::parse(r#"{"scenario": {"name": "chsh"}}"#, "inline").unwrap();
        assert!(c.expect_scenario("chsh").is_ok());
        assert!(c.expect_scenario("qkd").is_err());
    }
}
