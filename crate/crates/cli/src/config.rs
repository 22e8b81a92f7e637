use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use superamp::{Dim, OperatorExpr, Primitive};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    #[default]
    Superlinear,
    #[value(name = "standard_aa")]
    StandardAa,
    Grover,
    Verify,
    Expand,
    Ode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Engine-resolvable base operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    /// Inversion about average.
    D,
    /// `W I0 W`, equal to `-D`.
    #[serde(rename = "w_i0_w")]
    #[value(name = "w_i0_w")]
    WI0W,
    /// Walsh-Hadamard alone.
    W,
}

impl Base {
    pub fn expr(self) -> OperatorExpr {
        match self {
            Base::D => OperatorExpr::gate(Primitive::D),
            Base::WI0W => OperatorExpr::w_i0_w(),
            Base::W => OperatorExpr::gate(Primitive::W),
        }
    }
}

/// Everything one experiment needs. Every field is optional in a config file;
/// flags given on the command line replace file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algo: Algo,
    pub n_qubits: Option<u32>,
    pub n: Option<usize>,
    pub source: Option<usize>,
    pub target: Option<usize>,
    pub depth: Option<u32>,
    pub p: Option<u32>,
    pub iterations: Option<u64>,
    pub base: Option<Base>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub stride: u64,
    pub max_qubits: u32,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub sizes: Option<Vec<usize>>,
    pub n_list: Option<Vec<usize>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algo: Algo::default(),
            n_qubits: None,
            n: None,
            source: None,
            target: None,
            depth: None,
            p: None,
            iterations: None,
            base: None,
            seed: 2024,
            out: None,
            format: Format::default(),
            stride: 1,
            max_qubits: superamp::state::DEFAULT_MAX_QUBITS,
            dt: None,
            t_max: None,
            sizes: None,
            n_list: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Resolves `N` from either `n_qubits` or `n`, checking the qubit cap.
    pub fn dim(&self) -> Result<Dim, CliError> {
        let dim = match (self.n_qubits, self.n) {
            (Some(q), None) => Dim::from_qubits_capped(q, self.max_qubits)?,
            (None, Some(n)) => Dim::new_capped(n, self.max_qubits)?,
            (Some(q), Some(n)) => {
                let d = Dim::new_capped(n, self.max_qubits)?;
                if d.n_qubits() != q {
                    return Err(CliError::Config(format!(
                        "n = {n} disagrees with n_qubits = {q}"
                    )));
                }
                d
            }
            (None, None) => return Err(CliError::Config("set --n-qubits or --n".into())),
        };
        Ok(dim)
    }

    /// `(s, t)` with the defaults `s = 0`, `t = N - 1`.
    pub fn pair(&self, dim: Dim) -> Result<(usize, usize), CliError> {
        let s = self.source.unwrap_or(0);
        let t = self.target.unwrap_or(dim.size() - 1);
        if s == t {
            return Err(CliError::Config(format!("source and target must differ (both {s})")));
        }
        dim.check_index(s)?;
        dim.check_index(t)?;
        Ok((s, t))
    }

    pub fn base_or(&self, default: Base) -> Base {
        self.base.unwrap_or(default)
    }
}
