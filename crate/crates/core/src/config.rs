//! Settings shared by every pipeline stage, echoed into each output file.

use serde::{Deserialize, Serialize};

use crate::assess::EditCostConfig;
use crate::error::{Error, Result};
use crate::model::{Disjunction, DEFAULT_CAP};
use crate::program::Horizon;
use crate::runtime::{CompileOptions, MockProvider, SensorSemantics};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub seed: u64,
    pub dim: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            seed: 0,
            dim: MockProvider::DEFAULT_DIM,
        }
    }
}

impl ProviderConfig {
    pub fn build(&self) -> MockProvider {
        match self.kind {
            ProviderKind::Mock => MockProvider::new(self.seed, self.dim),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: Horizon,
    pub provider: ProviderConfig,
    pub sensor_semantics: SensorSemantics,
    pub disjunction: Disjunction,
    pub costs: EditCostConfig,
    pub cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            horizon: Horizon::DEFAULT,
            provider: ProviderConfig::default(),
            sensor_semantics: SensorSemantics::default(),
            disjunction: Disjunction::default(),
            costs: EditCostConfig::default(),
            cap: DEFAULT_CAP,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<()> {
        if self.horizon.get() == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if self.provider.dim == 0 {
            return Err(Error::Config("provider dim must be positive".into()));
        }
        if self.cap == 0 {
            return Err(Error::Config("cap must be positive".into()));
        }
        self.costs.check()
    }

    pub fn compile_options(&self) -> CompileOptions {
        CompileOptions {
            semantics: self.sensor_semantics,
            disjunction: self.disjunction,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
        assert_eq!(RunConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn partial_and_invalid() {
        let c = RunConfig::from_json(r#"{"disjunction":"product","provider":{"dim":8},"costs":{"w_side":9}}"#).unwrap();
        assert_eq!(c.disjunction, Disjunction::Product);
        assert_eq!(c.provider.dim, 8);
        assert_eq!(c.costs.w_side, 9.0);
        assert_eq!(c.costs.w_joint, 2.0);
        assert!(matches!(
            RunConfig::from_json(r#"{"horizon":0}"#),
            Err(Error::Config(_))
        ));
        assert!(matches!(RunConfig::from_json(r#"{"cap":0}"#), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_json(r#"{"bogus":1}"#), Err(Error::Format(_))));
        assert!(matches!(
            RunConfig::from_json(r#"{"costs":{"w_axis":3}}"#),
            Err(Error::Config(_))
        ));
    }
}
