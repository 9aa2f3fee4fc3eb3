//! Experiment harness: replicate worlds over parameter grids, reduced to CSV
//! tables and optional SVG charts.
//!
//! Every experiment takes an [`ExperimentSpec`] (a TOML file plus command
//! line overrides) and returns a typed result that renders to named output
//! files. Replicate `r` always uses world seed `derive_seed(spec.seed, r)`,
//! so outputs are reproducible from the experiment file and seed alone.
//!
//! CSV schemas (version 1):
//!
//! | file | columns |
//! |------|---------|
//! | `run.csv`, `sweep_r{i}_rep{j}.csv` | `tick,population,births,deaths_fault,deaths_exit,deaths_loop,deaths_dup,deaths_unmut,mean_gen,max_gen,mean_hamming` |
//! | `sweep_summary.csv` | `rate,replicates,extinctions,extinction_fraction,mean_extinction_tick,analytic_p_hit,genome_length` |
//! | `sweep_reference.csv` | `rate,analytic_p_hit,genome_length` |
//! | `hamming_rep{j}.csv` | `tick,population,min,mean,max,stddev` |
//! | `hamming_summary.csv` | `replicate,slope` |
//! | `drift_pairs.csv` | `replicate,intron_slope,exon_slope,intron_faster` |
//! | `density.csv` | `set,instruction,count,frequency` |
//! | `density_summary.csv` | `set,code_len,danger_density` |
//! | `duel_rep{j}.csv` | `tick,a,b,total` |
//! | `duel_summary.csv` | `replicate,winner,final_a,final_b` |
//! | `intron_rep{j}.csv` | `tick,population,converters,longest_converted` |
//! | `intron_summary.csv` | `replicate,conversions,inherited,longest_converted_exon,api_calls_in_converted,final_population` |
//! | `apihash.csv` | `names,occupied_hashes,trials,hits,probability` |
//! | `optimize_rep{j}.csv` | `iteration,energy` |
//! | `optimize_summary.csv` | `replicate,initial_energy,final_energy` |

mod experiments;
pub mod parallel;
pub mod plot;

pub use experiments::*;
pub use parallel::{map_indexed, Parallelism};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ecology::{read_file, ConfigError, SnapshotError, WorldConfig};
use crate::genome::GenomeError;
use crate::mutation::Rate;

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Failures while running an experiment or CLI command.
#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("genome: {0}")]
    Genome(#[from] GenomeError),
    #[error("snapshot: {0}")]
    Snapshot(#[from] SnapshotError),
    #[error("plot: {0}")]
    Plot(#[from] plot::PlotError),
}

impl LabError {
    /// Process exit code: 1 for bad configuration or input, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 1,
            _ => 2,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One rendered output file, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

impl OutputFile {
    pub fn new(name: impl Into<String>, contents: String) -> Self {
        OutputFile {
            name: name.into(),
            contents,
        }
    }
}

/// Writes files into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> Result<(), LabError> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.contents).map_err(|e| LabError::io(&path, e))?;
    }
    Ok(())
}

/// Experiment parameters. All keys are optional in the TOML file; the world
/// itself is configured in a `[world]` table with the keys of
/// [`WorldConfig`].
///
/// ```toml
/// replicates = 5
/// ticks = 5000
/// seed = 1
/// rates = ["1/1000", "1/100", "1/10"]
/// alphabets = ["a.alpha", "b.alpha"]
/// isets = ["no_addsaved.iset"]
/// genome_length = 5120
/// intron_fraction = 0.9
/// export_names = [1, 64, 1000]
/// trials = 100000
/// iterations = 300000
///
/// [world]
/// capacity = 64
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub replicates: usize,
    pub ticks: u64,
    pub seed: u64,
    /// Bitflip rates; the sweep grid, or the single rate of other
    /// experiments (first entry). Empty means the experiment default.
    pub rates: Vec<Rate>,
    pub alphabets: Vec<PathBuf>,
    pub isets: Vec<PathBuf>,
    /// Total ancestor length for intron experiments.
    pub genome_length: usize,
    pub intron_fraction: f64,
    pub export_names: Vec<usize>,
    pub trials: u64,
    pub iterations: u64,
    pub world: WorldConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            replicates: 5,
            ticks: 5000,
            seed: 1,
            rates: Vec::new(),
            alphabets: Vec::new(),
            isets: Vec::new(),
            genome_length: 5120,
            intron_fraction: 0.9,
            export_names: vec![1, 64, 1000],
            trials: 100_000,
            iterations: 300_000,
            world: WorldConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Loads a spec file; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut spec = Self::from_toml(&read_file(path)?)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        spec.alphabets.iter_mut().for_each(fix);
        spec.isets.iter_mut().for_each(fix);
        spec.world.alphabet.iter_mut().for_each(fix);
        spec.world.ancestor.iter_mut().for_each(fix);
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replicates == 0 {
            return Err(ConfigError::Invalid("replicates must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.intron_fraction) {
            return Err(ConfigError::Invalid(
                "intron_fraction must be in [0, 1)".into(),
            ));
        }
        if self.export_names.is_empty() {
            return Err(ConfigError::Invalid(
                "export_names must not be empty".into(),
            ));
        }
        self.world.validate()
    }

    /// The experiment's single bitflip rate: the first grid entry, or the
    /// world's configured rate.
    pub fn rate(&self) -> Rate {
        self.rates
            .first()
            .copied()
            .unwrap_or(self.world.mutation.bitflip_rate)
    }

    /// World config of replicate `r` with the given bitflip rate.
    pub fn replicate_world(&self, r: usize, rate: Rate) -> WorldConfig {
        let mut w = self.world.clone();
        w.seed = crate::rng::derive_seed(self.seed, r as u64);
        w.mutation.bitflip_rate = rate;
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trip() {
        let mut s = ExperimentSpec {
            rates: vec![Rate::one_in(100), Rate::one_in(10)],
            ..Default::default()
        };
        s.world.capacity = 32;
        assert_eq!(ExperimentSpec::from_toml(&s.to_toml()).unwrap(), s);
        let t =
            ExperimentSpec::from_toml("rates = [\"1/50\", 0.5]\n[world]\ncapacity = 8\n").unwrap();
        assert_eq!(t.rates, vec![Rate::one_in(50), Rate::new(0.5).unwrap()]);
        assert_eq!(t.world.capacity, 8);
        assert!(ExperimentSpec::from_toml("replicates = 0").is_err());
        assert!(ExperimentSpec::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            LabError::Config(ConfigError::Invalid("x".into())).exit_code(),
            1
        );
        assert_eq!(
            LabError::Snapshot(SnapshotError::CorruptSnapshot("x".into())).exit_code(),
            2
        );
    }
}
