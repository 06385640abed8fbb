//! TOML run configuration. Every field is optional; command-line flags take
//! precedence over the file, and the file over built-in defaults.
//!
//! ```toml
//! seed = 7
//!
//! [index]
//! g = 10
//! m = 10
//! variant = "ssid_name"
//!
//! [decode]
//! beam = 10
//! max_ssids = 16
//!
//! [knn]
//! k = 10
//! threshold = 0.6
//!
//! [augment]
//! threshold = 0.5
//!
//! [eval]
//! ks = [1, 5, 10]
//! levels = ["passage", "passage+claim"]
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub index: IndexSection,
    #[serde(default)]
    pub decode: DecodeSection,
    #[serde(default)]
    pub knn: KnnSection,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSection {
    pub g: Option<usize>,
    pub m: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub variant: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeSection {
    pub beam: Option<usize>,
    pub max_ssids: Option<usize>,
    pub max_tokens: Option<usize>,
    pub length_normalize: Option<bool>,
    pub eos_bias: Option<f64>,
    pub scorer: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnSection {
    pub k: Option<usize>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSection {
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub ks: Option<Vec<usize>>,
    pub levels: Option<Vec<String>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Flag value, else config value, else [`DEFAULT_SEED`].
    pub fn resolve_seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(DEFAULT_SEED)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let c = RunConfig::parse("seed = 7\n[index]\ng = 4\n[eval]\nks = [1, 3]\n").unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.index.g, Some(4));
        assert_eq!(c.index.m, None);
        assert_eq!(c.eval.ks, Some(vec![1, 3]));
        assert_eq!(c.resolve_seed(None), 7);
        assert_eq!(c.resolve_seed(Some(1)), 1);
        assert_eq!(RunConfig::default().resolve_seed(None), DEFAULT_SEED);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(matches!(
            RunConfig::parse("[index]\nbranching = 3\n"),
            Err(Error::Config(_))
        ));
    }
}
