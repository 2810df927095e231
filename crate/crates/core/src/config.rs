//! Declarative scenario description and its TOML file format.
//!
//! Every field is explicit; unknown keys are rejected. The only optional
//! keys are `grid.path_cap` (default 2^24 path-nodes),
//! `coefficients.mpr_override` (absent means `r = μ^c / σ^c`) and
//! `run.modes` (default both modes).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, TimeGrid, MAX_DIMENSION};
use crate::market::{CoefficientSpec, Dividend, IncomeSpec, Payoff, RegimeChain};
use crate::pricing::SolutionMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Number of periods `N`.
    pub steps: usize,
    /// Period length `h`.
    pub step_length: f64,
    /// Walk dimension `d`.
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_cap: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialLevels {
    pub c: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialRegime {
    State(String),
    Distribution(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub states: Vec<String>,
    pub gamma: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub initial: InitialRegime,
}

impl ChainConfig {
    pub fn single(label: &str, gamma: f64) -> Self {
        Self {
            states: vec![label.to_string()],
            gamma: vec![gamma],
            transition: vec![vec![1.0]],
            initial: InitialRegime::State(label.to_string()),
        }
    }
}

fn default_modes() -> Vec<SolutionMode> {
    vec![SolutionMode::Consistent, SolutionMode::Inconsistent]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_modes")]
    pub modes: Vec<SolutionMode>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            modes: default_modes(),
        }
    }
}

/// Complete market description for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub grid: GridConfig,
    pub initial: InitialLevels,
    pub coefficients: CoefficientSpec,
    pub chain: ChainConfig,
    pub income: IncomeSpec,
    #[serde(default)]
    pub dividend: Dividend,
    pub payoff: Payoff,
    #[serde(default)]
    pub run: RunConfig,
}

impl ScenarioConfig {
    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.steps, self.grid.step_length)
    }

    pub fn path_cap(&self) -> u128 {
        self.grid
            .path_cap
            .map(u128::from)
            .unwrap_or(Lattice::DEFAULT_PATH_CAP)
    }

    pub fn regime_chain(&self) -> Result<RegimeChain> {
        let c = &self.chain;
        let initial = match &c.initial {
            InitialRegime::State(label) => {
                let idx = c.states.iter().position(|s| s == label).ok_or_else(|| {
                    Error::Config(format!("initial regime `{label}` is not a declared state"))
                })?;
                let mut v = vec![0.0; c.states.len()];
                v[idx] = 1.0;
                v
            }
            InitialRegime::Distribution(v) => v.clone(),
        };
        RegimeChain::new(c.states.clone(), c.transition.clone(), initial, c.gamma.clone())
    }

    /// Static checks that do not need the lattice.
    pub fn validate(&self) -> Result<()> {
        self.time_grid()?;
        let d = self.grid.dimension;
        if !(2..=MAX_DIMENSION).contains(&d) {
            return Err(Error::Config(format!(
                "grid.dimension must be in 2..={MAX_DIMENSION} (C and S need two factors), got {d}"
            )));
        }
        if !(self.initial.c > 0.0 && self.initial.c.is_finite()) {
            return Err(Error::Config(format!("initial C must be positive, got {}", self.initial.c)));
        }
        if !(self.initial.s > 0.0 && self.initial.s.is_finite()) {
            return Err(Error::Config(format!("initial S must be positive, got {}", self.initial.s)));
        }
        let chain = self.regime_chain()?;
        self.coefficients.validate(chain.len())?;
        self.income.validate(self.grid.steps, d, &chain)?;
        self.payoff.validate()?;
        if self.run.modes.is_empty() {
            return Err(Error::Config("run.modes must name at least one mode".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|span| line_column(text, span.start))
                .unwrap_or((0, 0));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (line, column)
}

/// Reads, parses and statically validates a scenario file.
pub fn load(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg = ScenarioConfig::from_toml(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"

[grid]
steps = 1
step_length = 0.25
dimension = 2

[initial]
c = 10.0
s = 10.0

[coefficients]
rho = 0.0
mu_c = { kind = "constant", value = 0.1 }
sigma_c = { kind = "constant", value = 0.2 }
mu_s = { kind = "constant", value = 0.0 }
sigma_s = { kind = "constant", value = 0.1 }

[chain]
states = ["calm"]
gamma = [1.0]
transition = [[1.0]]
initial = { state = "calm" }

[income]
terms = []

[dividend]
kind = "zero"

[payoff]
kind = "digital"
amount = 1.0
"#;

    #[test]
    fn minimal_file_parses() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.run.modes.len(), 2);
        assert_eq!(cfg.path_cap(), 1 << 24);
    }

    #[test]
    fn unknown_key_reports_position() {
        let text = MINIMAL.replace("dimension = 2", "dimension = 2\nbogus = 1");
        match ScenarioConfig::from_toml(&text).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 8);
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unit_correlation_is_rejected() {
        let text = MINIMAL.replace("rho = 0.0", "rho = 1.0");
        let cfg = ScenarioConfig::from_toml(&text).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("|rho| < 1"), "{err}");
    }

    #[test]
    fn non_stochastic_row_is_rejected() {
        let text = MINIMAL.replace("transition = [[1.0]]", "transition = [[0.9]]");
        let err = ScenarioConfig::from_toml(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("not stochastic"));
    }

    #[test]
    fn missing_section_is_an_error() {
        let text = MINIMAL.replace("[payoff]\nkind = \"digital\"\namount = 1.0\n", "");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn dividend_defaults_to_zero() {
        let text = MINIMAL.replace("[dividend]\nkind = \"zero\"\n", "");
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap().dividend, Dividend::Zero);
    }

    #[test]
    fn line_column_counts_from_one() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }
}
