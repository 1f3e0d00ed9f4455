//! Optional TOML settings file. Every key is optional; a flag given on the
//! command line wins over the file, and the file wins over built-in defaults.
//!
//! ```toml
//! kernel = "matern32"
//! alpha1 = 0.5
//! alpha2 = 0.95
//! n_shrink = 5
//! n_maxiter = 10
//! restarts = 3
//! seed = 0
//! threshold = 2.0
//! replicates = 50
//! workers = 1
//! skewed_bias = 1.0
//! ```

use std::path::Path;

use robustgp::KernelSpec;
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub kernel: Option<KernelSpec>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub n_shrink: Option<usize>,
    pub n_maxiter: Option<usize>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub replicates: Option<usize>,
    pub workers: Option<usize>,
    pub skewed_bias: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}
