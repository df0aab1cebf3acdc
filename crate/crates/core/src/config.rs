//! Service and CLI defaults, loaded from a JSON file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::NormalizationMode;
use crate::layout::LayoutConfig;
use crate::matcher::MatcherConfig;

/// Same-writer cutoff used when no calibrated value is configured.
///
/// Calibrated in raw mode on the synthetic corpus described by `config/acceptance.json`.
pub const DEFAULT_THRESHOLD: f64 = 2.04;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub matcher: MatcherConfig,
    pub layout: LayoutConfig,
    pub mode: NormalizationMode,
    pub threshold: f64,
    /// Wall-clock budget for one search request.
    pub search_budget_ms: u64,
    pub cors_origin: Option<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            matcher: MatcherConfig::default(),
            layout: LayoutConfig::default(),
            mode: NormalizationMode::Raw,
            threshold: DEFAULT_THRESHOLD,
            search_budget_ms: 30_000,
            cors_origin: None,
        }
    }
}

impl Settings {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.matcher.validate()?;
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return Err(Error::Validation(format!(
                "threshold must be a positive number, got {}",
                self.threshold
            )));
        }
        if self.layout.min_line_height == 0 {
            return Err(Error::Validation("min_line_height must be >= 1".into()));
        }
        Ok(())
    }
}
