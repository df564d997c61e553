//! Experiment configuration and its resolved provenance copy.

use std::path::{Path, PathBuf};

use hypolab::classify::ClassifyOptions;
use hypolab::grid::GridSpec;
use hypolab::levi::DecayConfig;
use hypolab::mizohata::{OperatorDescription, VariableOperator};
use hypolab::spectral::MomentOptions;
use hypolab::symbol::{parse_with, ParseContext};
use hypolab::{MultiIndex, SymbolPoly, VariableSplit};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Classify,
    Levi,
    Spectral,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Classify => "classify",
            CommandKind::Levi => "levi",
            CommandKind::Spectral => "spectral",
        }
    }
}

/// An operator file path, or the description itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSource {
    Path(PathBuf),
    Inline(OperatorDescription),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: Vec<usize>,
    pub half_width: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub classify: ClassifyOptions,
    pub levi: DecayConfig,
    pub moments: MomentOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSettings {
    /// Moment multi-indices; `[0, …, 0]` when empty.
    pub alphas: Vec<MultiIndex>,
    /// Spectral parameters (below the spectrum) for Green values.
    pub green_lambdas: Vec<f64>,
    /// Order `r` of the a priori bound.
    pub iteration_order: u32,
    /// Monte-Carlo cross-check sample count; 0 disables it.
    pub mc_samples: usize,
    /// Frequency half-width of the Monte-Carlo box.
    pub mc_half_width: f64,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        SpectralSettings {
            alphas: Vec::new(),
            green_lambdas: Vec::new(),
            iteration_order: 1,
            mc_samples: 0,
            mc_half_width: 8.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<VariableSplit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub spectral: SpectralSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dump_kernels: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        // operator paths are relative to the config file
        if let Some(OperatorSource::Path(p)) = &mut cfg.operator {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Parses the symbol under the declared split, if any.
    pub fn parsed_symbol(&self) -> Result<SymbolPoly, CliError> {
        let text = self
            .symbol
            .as_deref()
            .ok_or_else(|| CliError::Usage("no symbol given".into()))?;
        let ctx = match self.split {
            Some(s) => ParseContext::with_split(s),
            None => ParseContext::default(),
        };
        Ok(parse_with(text, ctx)?)
    }

    pub fn description(&self) -> Result<Option<OperatorDescription>, CliError> {
        match &self.operator {
            None => Ok(None),
            Some(OperatorSource::Inline(d)) => Ok(Some(d.clone())),
            Some(OperatorSource::Path(p)) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map(Some)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn grid_spec(&self, split: VariableSplit) -> Result<GridSpec, CliError> {
        let g = self
            .grid
            .as_ref()
            .ok_or_else(|| CliError::Usage("no grid given".into()))?;
        Ok(GridSpec::new(split, g.points.clone(), g.half_width.clone())?)
    }

    /// Checks the fields `command` needs and fills every default, so the
    /// result re-runs without consulting anything else.
    pub fn resolve(mut self, command: CommandKind) -> Result<Self, CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::Usage(format!(
                    "config is for `{}`, not `{}`",
                    c.name(),
                    command.name()
                )));
            }
        }
        self.command = Some(command);
        self.tool_version = Some(env!("CARGO_PKG_VERSION").to_string());
        if let Some(d) = self.description()? {
            self.operator = Some(OperatorSource::Inline(d));
        }
        if self.lambdas.iter().any(|l| !l.is_finite()) {
            return Err(CliError::Usage("λ values must be finite".into()));
        }
        match command {
            CommandKind::Classify => {
                self.parsed_symbol()?;
            }
            CommandKind::Levi => {
                if self.lambdas.is_empty() {
                    return Err(CliError::Usage("empty λ list".into()));
                }
                let op = self.variable_operator()?.ok_or_else(|| CliError::Usage("levi needs an operator".into()))?;
                self.grid_spec(op.split)?;
                self.materialize_point(op.split.dimension())?;
            }
            CommandKind::Spectral => {
                if self.lambdas.is_empty() {
                    return Err(CliError::Usage("empty λ list".into()));
                }
                let dim = match (self.symbol.is_some(), self.operator.is_some()) {
                    (true, false) => self.parsed_symbol()?.dimension(),
                    (false, true) => {
                        let op = self.variable_operator()?.expect("operator present");
                        self.grid_spec(op.split)?;
                        self.materialize_point(op.split.dimension())?;
                        op.split.good
                    }
                    _ => return Err(CliError::Usage("spectral needs exactly one of symbol and operator".into())),
                };
                if self.spectral.alphas.is_empty() {
                    self.spectral.alphas = vec![MultiIndex::zeros(dim)];
                }
                if self.spectral.alphas.iter().any(|a| a.entries().len() != dim) {
                    return Err(CliError::Usage(format!("moment indices must have {dim} entries")));
                }
            }
        }
        Ok(self)
    }

    fn materialize_point(&mut self, dim: usize) -> Result<(), CliError> {
        let p = self.point.get_or_insert_with(|| vec![0.0; dim]);
        if p.len() != dim {
            return Err(CliError::Usage(format!("point has {} coordinates, operator has {dim}", p.len())));
        }
        Ok(())
    }

    pub fn variable_operator(&self) -> Result<Option<VariableOperator>, CliError> {
        match self.description()? {
            None => Ok(None),
            Some(d) => Ok(Some(VariableOperator::from_description(&d)?)),
        }
    }

    /// The copy written next to the outputs: everything but the output location.
    pub fn provenance(&self) -> Self {
        ExperimentConfig {
            out: None,
            ..self.clone()
        }
    }
}
