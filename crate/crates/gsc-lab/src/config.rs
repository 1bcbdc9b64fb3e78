//! Experiment configuration: a TOML file with one block per
//! subcommand. Unknown keys are rejected, numeric parameters are
//! range-checked up front.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use gsc_core::BoundaryRule;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// pattern file path, resolved relative to the config file
    pub pattern: PathBuf,
    pub deterministic: bool,
    /// empty = caching disabled (unless GSC_CACHE or --cache is set)
    pub cache_dir: PathBuf,
    /// 0 = all available cores
    pub threads: usize,
    pub node_cap: u64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub resist: ResistParams,
    pub trace: TraceParams,
    pub decay: DecayParams,
    pub extend: ExtendParams,
    pub exit: ExitParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pattern: PathBuf::from("pattern.cfg"),
            deterministic: true,
            cache_dir: PathBuf::new(),
            threads: 0,
            node_cap: 0, // 0 = library default cap
            seed: 42,
            out_dir: PathBuf::from("out"),
            resist: ResistParams::default(),
            trace: TraceParams::default(),
            decay: DecayParams::default(),
            extend: ExtendParams::default(),
            exit: ExitParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResistParams {
    pub nmax: u32,
    pub extra: u32,
    pub tol: f64,
    pub half_factor: bool,
    /// "faces" or "cells"
    pub boundary: Boundary,
}

impl Default for ResistParams {
    fn default() -> Self {
        ResistParams {
            nmax: 3,
            extra: 2,
            tol: 1e-10,
            half_factor: false,
            boundary: Boundary::Faces,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// half-spacing contacts to the face potentials
    Faces,
    /// boundary cell values pinned directly
    Cells,
}

impl From<Boundary> for BoundaryRule {
    fn from(b: Boundary) -> BoundaryRule {
        match b {
            Boundary::Faces => BoundaryRule::FaceContact,
            Boundary::Cells => BoundaryRule::CellCenters,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceParams {
    pub m: u32,
    pub mprime: u32,
    pub nmax: u32,
    /// 0 = use the estimate from the resist stage (pipeline) and
    /// require --rho on the command line otherwise
    pub rho: f64,
    pub tol: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams { m: 3, mprime: 5, nmax: 3, rho: 0.0, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayParams {
    /// `level:c1,c2,...` address of the cell
    pub cell: String,
    pub depth: u32,
    pub m: u32,
    pub mprime: u32,
    pub rho: f64,
    pub tol: f64,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams { cell: "1:0,0".into(), depth: 4, m: 5, mprime: 5, rho: 0.0, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtendParams {
    pub n: u32,
    pub m: u32,
    pub mprime: u32,
    /// targets file; empty = seeded random targets
    pub targets: PathBuf,
    pub tol: f64,
}

impl Default for ExtendParams {
    fn default() -> Self {
        ExtendParams { n: 1, m: 1, mprime: 3, targets: PathBuf::new(), tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExitParams {
    pub nmax: u32,
    pub extra: u32,
    pub rho: f64,
    pub tol: f64,
}

impl Default for ExitParams {
    fn default() -> Self {
        ExitParams { nmax: 4, extra: 2, rho: 0.0, tol: 1e-10 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // resolve the pattern path against the config location
        if config.pattern.is_relative() {
            if let Some(dir) = path.parent() {
                config.pattern = dir.join(&config.pattern);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("resist.nmax", self.resist.nmax as f64, 2.0, 12.0)?;
        check_range("resist.extra", self.resist.extra as f64, 0.0, 8.0)?;
        check_tol("resist.tol", self.resist.tol)?;
        check_range("trace.nmax", self.trace.nmax as f64, 1.0, 10.0)?;
        check_range("trace.m", self.trace.m as f64, 1.0, 10.0)?;
        if self.trace.mprime < self.trace.m {
            bail!("trace.mprime must be at least trace.m");
        }
        check_tol("trace.tol", self.trace.tol)?;
        check_range("decay.depth", self.decay.depth as f64, 1.0, 10.0)?;
        if self.decay.mprime < self.decay.m {
            bail!("decay.mprime must be at least decay.m");
        }
        check_tol("decay.tol", self.decay.tol)?;
        check_range("extend.n", self.extend.n as f64, 0.0, 8.0)?;
        check_range("extend.m", self.extend.m as f64, 0.0, 8.0)?;
        if self.extend.n + self.extend.m == 0 {
            bail!("extend needs n + m >= 1");
        }
        if self.extend.mprime < self.extend.n + self.extend.m {
            bail!("extend.mprime must resolve level n + m");
        }
        check_tol("extend.tol", self.extend.tol)?;
        check_range("exit.nmax", self.exit.nmax as f64, 1.0, 12.0)?;
        check_range("exit.extra", self.exit.extra as f64, 0.0, 8.0)?;
        check_tol("exit.tol", self.exit.tol)?;
        Ok(())
    }

    /// Cache directory after applying the override chain: flag beats
    /// the GSC_CACHE variable beats the config value.
    pub fn effective_cache(&self, flag: Option<&Path>) -> Option<PathBuf> {
        if let Some(dir) = flag {
            return Some(dir.to_path_buf());
        }
        if let Ok(env) = std::env::var("GSC_CACHE") {
            if !env.is_empty() {
                return Some(PathBuf::from(env));
            }
        }
        if self.cache_dir.as_os_str().is_empty() {
            None
        } else {
            Some(self.cache_dir.clone())
        }
    }
}

fn check_range(name: &str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value < lo || value > hi {
        bail!("{name} = {value} outside the supported range [{lo}, {hi}]");
    }
    Ok(())
}

fn check_tol(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value <= 1e-2) {
        bail!("{name} = {value} must be a positive tolerance at most 1e-2");
    }
    Ok(())
}

/// Parse a `level:c1,c2,...` cell address.
pub fn parse_cell(addr: &str) -> Result<gsc_core::CellIndex> {
    let (level, coords) = addr
        .split_once(':')
        .with_context(|| format!("cell {addr:?} must look like LEVEL:C1,C2,..."))?;
    let level: u32 = level.parse().context("bad cell level")?;
    let coords: Result<Vec<u32>, _> = coords.split(',').map(|c| c.trim().parse()).collect();
    Ok(gsc_core::CellIndex::new(level, coords.context("bad cell coordinates")?))
}
