use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::AlphabetError;
use crate::ancestor::{AncestorError, SHIPPED_EXON_LEN};
use crate::genome::AsmError;
use crate::isa::IsaError;
use crate::mutation::MutationConfig;
use crate::vm::{VmConfig, DEFAULT_HEAP_LIMIT, DEFAULT_MAX_STACK};

/// Problems with user-supplied configuration or input files.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("alphabet: {0}")]
    Alphabet(#[from] AlphabetError),
    #[error("assembler: {0}")]
    Asm(#[from] AsmError),
    #[error("ancestor: {0}")]
    Ancestor(#[from] AncestorError),
    #[error("instruction set: {0}")]
    Isa(#[from] IsaError),
}

pub fn read_file(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// World parameters. Every key is optional in the TOML file.
///
/// ```toml
/// capacity = 64            # maximum living organisms
/// slice_steps = 1000       # instructions per organism per tick
/// lifetime_budget = 100000 # instructions allowed without a spawn attempt
/// duplicate_cap = 0        # identical genomes allowed (0 = unlimited)
/// unmutated_kill_prob = 0.0
/// seed = 1
/// alphabet = "my.alpha"    # default: the shipped optimized alphabet
/// ancestor = "anc.asm"     # default: the generated ancestor below
/// ancestor_exon = 512
/// ancestor_intron = 0
/// founders = 1
/// max_stack = 256
/// heap_limit = 1048576
/// sample_every = 50        # ticks between distance samples
/// track_api_calls = false
///
/// [mutation]
/// bitflip_rate = "1/9001"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub capacity: usize,
    pub slice_steps: u64,
    pub lifetime_budget: u64,
    pub duplicate_cap: usize,
    pub unmutated_kill_prob: f64,
    pub seed: u64,
    pub alphabet: Option<PathBuf>,
    pub ancestor: Option<PathBuf>,
    pub ancestor_exon: usize,
    pub ancestor_intron: usize,
    pub founders: usize,
    pub max_stack: usize,
    pub heap_limit: u32,
    pub sample_every: u64,
    pub track_api_calls: bool,
    pub mutation: MutationConfig,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            capacity: 64,
            slice_steps: 1000,
            lifetime_budget: 100_000,
            duplicate_cap: 0,
            unmutated_kill_prob: 0.0,
            seed: 1,
            alphabet: None,
            ancestor: None,
            ancestor_exon: SHIPPED_EXON_LEN,
            ancestor_intron: 0,
            founders: 1,
            max_stack: DEFAULT_MAX_STACK,
            heap_limit: DEFAULT_HEAP_LIMIT,
            sample_every: 50,
            track_api_calls: false,
            mutation: MutationConfig::default(),
        }
    }
}

impl WorldConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: WorldConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative `alphabet`/`ancestor` paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::from_toml(&read_file(path)?)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.alphabet, &mut cfg.ancestor].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.capacity == 0 {
            return bad("capacity must be at least 1");
        }
        if self.slice_steps == 0 {
            return bad("slice_steps must be at least 1");
        }
        if self.founders == 0 {
            return bad("founders must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.unmutated_kill_prob) {
            return bad("unmutated_kill_prob must be in [0, 1]");
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1");
        }
        if self.max_stack < 7 {
            return bad("max_stack must be at least 7");
        }
        Ok(())
    }

    pub fn vm(&self) -> VmConfig {
        VmConfig {
            max_stack: self.max_stack,
            heap_limit: self.heap_limit,
        }
    }
}
