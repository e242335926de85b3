use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lwgcn::graph::{gen_powerlaw, BundlePaths, GraphBundle, PowerLawParams};
use lwgcn::schedule::ArchConfig;
use serde::Deserialize;

/// Contents of a `--config` TOML file. Command-line flags win over it.
///
/// ```toml
/// seed = 7
/// jobs = 4
///
/// [arch]
/// pes = 32
/// replicas = 4
///
/// [graph]
/// nodes = 4096
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub arch: ArchConfig,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    /// Generator settings used when no `--graph` is given.
    pub graph: PowerLawParams,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }
}

/// Architecture flags given on the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArchOverrides {
    pub pes: Option<usize>,
    pub replicas: Option<usize>,
    pub tile_width: Option<usize>,
    pub lanes: Option<usize>,
    pub value_bits: Option<u32>,
    pub load_bw: Option<usize>,
    pub move_bw: Option<usize>,
}

impl ArchOverrides {
    pub fn apply(&self, base: ArchConfig) -> Result<ArchConfig> {
        let cfg = ArchConfig {
            pes: self.pes.unwrap_or(base.pes),
            replicas: self.replicas.unwrap_or(base.replicas),
            tile_width: self.tile_width.unwrap_or(base.tile_width),
            lanes: self.lanes.unwrap_or(base.lanes),
            value_bits: self.value_bits.unwrap_or(base.value_bits),
            load_bw: self.load_bw.unwrap_or(base.load_bw),
            move_bw: self.move_bw.unwrap_or(base.move_bw),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Where a command's graph comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// A directory laid out like the output of `gen`.
    Directory(PathBuf),
    Synthetic(PowerLawParams),
}

impl DatasetSource {
    pub fn load(&self) -> Result<GraphBundle> {
        match self {
            DatasetSource::Directory(dir) => {
                let paths = discover(dir)?;
                paths.ingest().with_context(|| format!("loading graph from {}", dir.display()))
            }
            DatasetSource::Synthetic(params) => Ok(gen_powerlaw(params)?),
        }
    }
}

/// Finds `edges.txt`, `features.txt`, `layer<i>.lwfp` and an optional
/// `labels.txt` in `dir`.
pub fn discover(dir: &Path) -> Result<BundlePaths> {
    let layers = (1..).take_while(|i| dir.join(format!("layer{i}.lwfp")).is_file()).count();
    let paths = BundlePaths::in_dir(dir, layers, dir.join("labels.txt").is_file());
    Ok(paths)
}
