//! Command-line surface. Flags override the config file; the config
//! file fills whatever the flags leave out.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use crate::config::{Boundary, ExperimentConfig};
use crate::runner::{self, RunContext};

#[derive(Parser, Debug)]
#[command(name = "gsc", version, about = "carpet lattice laboratory")]
pub struct Cli {
    /// experiment config (TOML); flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// replayable outputs: pinned seconds column, cache eligibility
    #[arg(long, global = true)]
    pub deterministic: Option<bool>,
    /// cache directory (overrides GSC_CACHE and the config)
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// worker threads; 0 = all cores
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct PatternArg {
    /// pattern file
    #[arg(long)]
    pub pattern: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// check the generator axioms, one verdict per axiom
    Validate {
        #[command(flatten)]
        pattern: PatternArg,
    },
    /// fractal and interface dimensions, optionally with the derived
    /// exponents for a given scaling estimate
    Dims {
        #[command(flatten)]
        pattern: PatternArg,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// list the prescription faces and their canonical indices
    Faces {
        #[command(flatten)]
        pattern: PatternArg,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: u32,
        /// print the list (the only mode)
        #[arg(long, default_value_t = true)]
        list: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// the resistance series and scaling estimates
    Resist {
        #[command(flatten)]
        pattern: PatternArg,
        #[arg(long)]
        nmax: Option<u32>,
        #[arg(long)]
        extra: Option<u32>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        half_factor: Option<bool>,
        #[arg(long, value_enum)]
        boundary: Option<Boundary>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// boundary energies and the trace comparison
    Trace {
        #[command(flatten)]
        pattern: PatternArg,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        mprime: Option<u32>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        nmax: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// shell-energy decay inside one cell
    Decay {
        #[command(flatten)]
        pattern: PatternArg,
        /// cell address LEVEL:C1,C2,...
        #[arg(long)]
        cell: Option<String>,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        mprime: Option<u32>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// realize prescribed face averages on the lattice
    Extend {
        #[command(flatten)]
        pattern: PatternArg,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        mprime: Option<u32>,
        /// targets file (face_id,value); omitted = seeded random
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// mean exit times of the origin cell
    Exit {
        #[command(flatten)]
        pattern: PatternArg,
        #[arg(long)]
        nmax: Option<u32>,
        #[arg(long)]
        extra: Option<u32>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// export the lattice graph as node and edge tables
    Graph {
        #[command(flatten)]
        pattern: PatternArg,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        mprime: u32,
        #[arg(long)]
        nodes_out: PathBuf,
        #[arg(long)]
        edges_out: PathBuf,
    },
    /// the full study: validate, dims, resist, trace, decay, extend,
    /// exit, with the scaling estimate threaded forward
    Pipeline {
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<i32> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(det) = cli.deterministic {
        config.deterministic = det;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    if config.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global()
            .ok();
    }

    let pattern_path = |arg: &PatternArg| -> Result<PathBuf> {
        arg.pattern
            .clone()
            .or_else(|| {
                if config.pattern.as_os_str().is_empty() {
                    None
                } else {
                    Some(config.pattern.clone())
                }
            })
            .context("no pattern file: pass --pattern or set it in the config")
    };
    let make_ctx = |path: &PathBuf| {
        RunContext::load(
            path,
            config.deterministic,
            config.seed,
            config.node_cap,
            config.effective_cache(cli.cache.as_deref()),
        )
    };
    let single_manifest = |ctx: &RunContext,
                           record: crate::manifest::StageRecord,
                           out: &std::path::Path|
     -> Result<()> {
        let mut manifest = crate::manifest::Manifest::new(
            &ctx.pattern_path,
            ctx.pattern_hash.clone(),
            ctx.deterministic,
            ctx.seed,
        );
        manifest.stages.push(record);
        manifest.complete = true;
        let path = out.with_extension("manifest.json");
        manifest.write(&path)?;
        Ok(())
    };
    let out_or = |out: &Option<PathBuf>, name: &str| -> PathBuf {
        out.clone().unwrap_or_else(|| PathBuf::from(name))
    };

    match cli.command {
        Command::Validate { pattern } => {
            let path = pattern_path(&pattern)?;
            let ctx = make_ctx(&path)?;
            let (report, ok) = runner::run_validate(&ctx);
            print!("{report}");
            if ok {
                println!("pattern is a valid generator");
                Ok(0)
            } else {
                let axiom = ctx.pattern.validate().first_failure().unwrap_or("unknown");
                eprintln!("pattern failed validation: {axiom}");
                Ok(1)
            }
        }
        Command::Dims { pattern, rho, out } => {
            let path = pattern_path(&pattern)?;
            let ctx = make_ctx(&path)?;
            let out = out_or(&out, "dims.csv");
            let record = runner::run_dims(&ctx, rho, &out)?;
            print!("{}", std::fs::read_to_string(&out)?);
            single_manifest(&ctx, record, &out)?;
            Ok(0)
        }
        Command::Faces { pattern, n, m, list, out } => {
            if !list {
                bail!("faces currently only supports --list");
            }
            let path = pattern_path(&pattern)?;
            let ctx = make_ctx(&path)?;
            let out = out_or(&out, "faces.csv");
            let record = runner::run_faces(&ctx, n, m, &out)?;
            print!("{}", std::fs::read_to_string(&out)?);
            single_manifest(&ctx, record, &out)?;
            Ok(0)
        }
        Command::Resist { pattern, nmax, extra, tol, half_factor, boundary, out } => {
            let path = pattern_path(&pattern)?;
            let ctx = make_ctx(&path)?;
            let mut params = config.resist;
            if let Some(v) = nmax {
                params.nmax = v;
            }
            if let Some(v) = extra {
                params.extra = v;
            }
            if let Some(v) = tol {
                params.tol = v;
            }
            if let Some(v) = half_factor {
                params.half_factor = v;
            }
            if let Some(v) = boundary {
                params.boundary = v;
            }
            let out = out_or(&out, "resist.csv");
            let outcome = runner::run_resist(&ctx, &params, &out)?;
            if let Some(series) = &outcome.series {
                println!(
                    "rho_hat = {}  rhobar_hat = {}  dw_hat = {}  ds_hat = {}",
                    series.rho_hat, series.rhobar_hat, series.walk_dim_hat, series.spectral_dim_hat
                );
            } else {
                println!("cache hit; replayed {}", out.display());
            }
            single_manifest(&ctx, outcome.record, &out)?;
            Ok(0)
        }
        Command::Trace { pattern, m, mprime, rho, nmax, out } => {
            let path = pattern_path(&pattern)?;
            let ctx = make_ctx(&path)?;
            let mut params = config.trace;
            if let Some(v) = m {
                params.m = v;
            }
            if let Some(v) = mprime {
                params.mprime = v;
            }
            if let Some(v) = rho {
                params.rho = v;
            }
            if let Some(v) = nmax {
                params.nmax = v;
            }
            let out = out_or(&out, "trace.csv");
            let record = runner::run_trace(&ctx, &params, &out)?;
            single_manifest(&ctx, record, &out)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Decay { pattern, cell, depth, m, mprime, rho, out } => {
            let path = pattern_path(&pattern)?;
            let ctx = make_ctx(&path)?;
            let mut params = config.decay.clone();
            if let Some(v) = cell {
                params.cell = v;
            }
            if let Some(v) = depth {
                params.depth = v;
            }
            if let Some(v) = m {
                params.m = v;
            }
            if let Some(v) = mprime {
                params.mprime = v;
            }
            if let Some(v) = rho {
                params.rho = v;
            }
            let out = out_or(&out, "decay.csv");
            let record = runner::run_decay(&ctx, &params, &out)?;
            single_manifest(&ctx, record, &out)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Extend { pattern, n, m, mprime, targets, out } => {
            let path = pattern_path(&pattern)?;
            let ctx = make_ctx(&path)?;
            let mut params = config.extend.clone();
            if let Some(v) = n {
                params.n = v;
            }
            if let Some(v) = m {
                params.m = v;
            }
            if let Some(v) = mprime {
                params.mprime = v;
            }
            if let Some(v) = targets {
                params.targets = v;
            }
            let out = out_or(&out, "extend.csv");
            let record = runner::run_extend(&ctx, &params, &out)?;
            single_manifest(&ctx, record, &out)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Exit { pattern, nmax, extra, rho, out } => {
            let path = pattern_path(&pattern)?;
            let ctx = make_ctx(&path)?;
            let mut params = config.exit;
            if let Some(v) = nmax {
                params.nmax = v;
            }
            if let Some(v) = extra {
                params.extra = v;
            }
            if let Some(v) = rho {
                params.rho = v;
            }
            let out = out_or(&out, "exit.csv");
            let outcome = runner::run_exit(&ctx, &params, &out)?;
            if let Some(c0) = outcome.c0_hat {
                println!("c0_hat = {c0}");
            }
            single_manifest(&ctx, outcome.record, &out)?;
            Ok(0)
        }
        Command::Graph { pattern, m, mprime, nodes_out, edges_out } => {
            let path = pattern_path(&pattern)?;
            let ctx = make_ctx(&path)?;
            runner::run_graph(&ctx, m, mprime, &nodes_out, &edges_out)?;
            println!("wrote {} and {}", nodes_out.display(), edges_out.display());
            Ok(0)
        }
        Command::Pipeline { out_dir } => {
            let out_dir = out_dir.unwrap_or_else(|| config.out_dir.clone());
            let manifest = runner::run_pipeline(&config, cli.cache.as_deref(), &out_dir)?;
            println!(
                "pipeline complete: {} stages, manifest at {}",
                manifest.stages.len(),
                out_dir.join("manifest.json").display()
            );
            if let Some(rho) = manifest.rho_hat() {
                println!("rho_hat = {rho}");
            }
            Ok(0)
        }
    }
}
