//! Subcommand implementations. The CLI parses flags, merges them over
//! the config, and calls into here; tests call these functions
//! directly so both paths stay identical.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gsc_core::boundary::{
    besov_profile, decay_experiment, pinned_minimizer, resolution_limit, shell_energy_profile,
    trace_ratio,
};
use gsc_core::exit_time::exit_series;
use gsc_core::extension::{prescribe_averages, prescription_faces};
use gsc_core::graph::SolveOptions;
use gsc_core::pattern::GscPattern;
use gsc_core::resistance::{
    raw_resistance, ResistanceSeries, StageMeasurement,
};
use gsc_core::LatticeDomain;

use crate::cache::{params_map, ResultCache};
use crate::config::{parse_cell, DecayParams, ExitParams, ExtendParams, ResistParams, TraceParams};
use crate::manifest::{Estimates, Manifest, OutputRef, StageRecord};
use crate::pattern_file::{load_pattern, pattern_hash, sha256_file};
use crate::report::{fmt_f64, fmt_seconds, CsvTable};
use crate::rng;

/// Everything a runner needs besides its own parameters.
pub struct RunContext {
    pub pattern_path: PathBuf,
    pub pattern: GscPattern,
    pub pattern_hash: String,
    pub deterministic: bool,
    pub seed: u64,
    pub node_cap: u64,
    pub cache: Option<ResultCache>,
}

impl RunContext {
    pub fn load(
        pattern_path: &Path,
        deterministic: bool,
        seed: u64,
        node_cap: u64,
        cache_dir: Option<PathBuf>,
    ) -> Result<Self> {
        let pattern = load_pattern(pattern_path)?;
        let hash = pattern_hash(&pattern);
        Ok(RunContext {
            pattern_path: pattern_path.to_path_buf(),
            pattern,
            pattern_hash: hash,
            deterministic,
            seed,
            node_cap,
            cache: cache_dir.map(ResultCache::new),
        })
    }

    fn stage(
        &self,
        subcommand: &str,
        params: BTreeMap<String, String>,
        out: &Path,
        estimates: Estimates,
        cache_hit: bool,
        wall_seconds: f64,
    ) -> Result<StageRecord> {
        Ok(StageRecord {
            subcommand: subcommand.into(),
            params,
            outputs: vec![OutputRef {
                path: out.display().to_string(),
                sha256: sha256_file(out)?,
            }],
            estimates,
            cache_hit,
            wall_seconds,
        })
    }

    /// Replay a cached table if the run is deterministic and the cache
    /// holds the key; estimates come back from the stored metadata.
    fn try_replay(
        &self,
        subcommand: &str,
        params: &BTreeMap<String, String>,
        out: &Path,
    ) -> Option<(String, Estimates)> {
        if !self.deterministic {
            return None;
        }
        let cache = self.cache.as_ref()?;
        let key = ResultCache::key(&self.pattern_hash, subcommand, params);
        let csv = cache.lookup(&key)?;
        let meta_path = cache.entry_dir(&key).join("meta.json");
        let estimates = std::fs::read_to_string(meta_path)
            .ok()
            .and_then(|text| serde_json::from_str::<serde_json::Value>(&text).ok())
            .and_then(|v| serde_json::from_value(v.get("estimates")?.clone()).ok())
            .unwrap_or_default();
        if write_text(out, &csv).is_err() {
            return None;
        }
        Some((csv, estimates))
    }

    fn store(
        &self,
        subcommand: &str,
        params: &BTreeMap<String, String>,
        csv: &str,
        estimates: &Estimates,
    ) {
        if !self.deterministic {
            return;
        }
        if let Some(cache) = &self.cache {
            let key = ResultCache::key(&self.pattern_hash, subcommand, params);
            let meta = serde_json::json!({
                "version": crate::VERSION,
                "subcommand": subcommand,
                "params": params,
                "estimates": estimates,
            });
            let _ = cache.store(&key, csv, &meta);
        }
    }
}

/// Face complexes are enumerated before any node cap can intervene;
/// keep the combined level at desk scale.
fn check_face_levels(n: u32, m: u32) -> Result<()> {
    if n + m > 10 {
        bail!("face complex at level n + m = {} is beyond desk scale (max 10)", n + m);
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn solve_opts(tol: f64) -> SolveOptions {
    SolveOptions { tol, max_iter: 0 }
}

/// Per-axiom report; returns true when the pattern is a valid
/// generator.
pub fn run_validate(ctx: &RunContext) -> (String, bool) {
    let report = ctx.pattern.validate();
    let mut lines = String::new();
    for (name, check) in [
        ("Symmetry", &report.symmetry),
        ("Connectedness", &report.connectedness),
        ("Non-diagonality", &report.non_diagonality),
        ("Borders included", &report.borders),
    ] {
        if check.pass {
            lines.push_str(&format!("{name}: PASS\n"));
        } else {
            lines.push_str(&format!("{name}: FAIL ({})\n", check.witness));
        }
    }
    if !report.proper_subset {
        lines.push_str("note: keep-all mask; the carpet is the solid cube\n");
    }
    (lines, report.all_pass())
}

pub fn run_dims(ctx: &RunContext, rho: Option<f64>, out: &Path) -> Result<StageRecord> {
    let start = Instant::now();
    let mut dims = ctx.pattern.dims()?;
    if let Some(rho) = rho {
        dims = dims.with_rho(ctx.pattern.len_factor(), rho);
    }
    let mut table = CsvTable::new(&[
        "m_F", "d_f", "m_I", "d_I", "rho_hat", "rhobar_hat", "dw_hat", "ds_hat",
    ]);
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    table.row(&[
        dims.kept_cells.to_string(),
        fmt_f64(dims.fractal_dim),
        dims.interface_cells.to_string(),
        fmt_f64(dims.interface_dim),
        opt(dims.rho_hat),
        opt(dims.rhobar_hat),
        opt(dims.walk_dim_hat),
        opt(dims.spectral_dim_hat),
    ]);
    table.write_to(out)?;
    let params = params_map(&[("rho", rho.map(fmt_f64).unwrap_or_default())]);
    let estimates = Estimates {
        rho_hat: dims.rho_hat,
        rhobar_hat: dims.rhobar_hat,
        dw_hat: dims.walk_dim_hat,
        ds_hat: dims.spectral_dim_hat,
        ..Default::default()
    };
    ctx.stage("dims", params, out, estimates, false, start.elapsed().as_secs_f64())
}

/// List the prescription faces with their canonical indices.
pub fn run_faces(ctx: &RunContext, n: u32, m: u32, out: &Path) -> Result<StageRecord> {
    let start = Instant::now();
    check_face_levels(n, m)?;
    let faces = prescription_faces(&ctx.pattern, n, m);
    let mut table = CsvTable::new(&["face_id", "axis", "plane", "transverse"]);
    for (id, face) in faces.iter().enumerate() {
        table.row(&[
            id.to_string(),
            face.axis.to_string(),
            face.plane.to_string(),
            join_coords(&face.transverse),
        ]);
    }
    table.write_to(out)?;
    let params = params_map(&[("n", n.to_string()), ("m", m.to_string())]);
    ctx.stage("faces", params, out, Estimates::default(), false, start.elapsed().as_secs_f64())
}

fn join_coords(coords: &[u32]) -> String {
    coords.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(":")
}

pub struct ResistOutcome {
    pub record: StageRecord,
    pub series: Option<ResistanceSeries>,
}

pub fn run_resist(ctx: &RunContext, params: &ResistParams, out: &Path) -> Result<ResistOutcome> {
    let start = Instant::now();
    let pmap = params_map(&[
        ("nmax", params.nmax.to_string()),
        ("extra", params.extra.to_string()),
        ("tol", fmt_f64(params.tol)),
        ("half_factor", params.half_factor.to_string()),
        ("boundary", format!("{:?}", params.boundary).to_lowercase()),
        ("node_cap", ctx.node_cap.to_string()),
    ]);
    if let Some((_, estimates)) = ctx.try_replay("resist", &pmap, out) {
        let record =
            ctx.stage("resist", pmap, out, estimates, true, start.elapsed().as_secs_f64())?;
        return Ok(ResistOutcome { record, series: None });
    }

    let rule = params.boundary.into();
    let opts = solve_opts(params.tol);
    let d0 = raw_resistance(&ctx.pattern, 0, params.extra.max(1), rule, ctx.node_cap, opts)?;

    // independent stages run in parallel; collection order is by stage
    use rayon::prelude::*;
    let stages: Vec<u32> = (1..=params.nmax).collect();
    let solved: Vec<Result<(StageMeasurement, f64)>> = stages
        .par_iter()
        .map(|&n| {
            let t = Instant::now();
            let sol = raw_resistance(&ctx.pattern, n, n + params.extra, rule, ctx.node_cap, opts)?;
            Ok((
                StageMeasurement {
                    n,
                    m_prime: n + params.extra,
                    d_value: sol.energy,
                    residual: sol.residual,
                    iterations: sol.iterations,
                },
                t.elapsed().as_secs_f64(),
            ))
        })
        .collect();
    let mut measurements = Vec::new();
    let mut seconds = Vec::new();
    for item in solved {
        let (m, s) = item?;
        measurements.push(m);
        seconds.push(s);
    }
    let series = ResistanceSeries::from_measurements(
        &ctx.pattern,
        d0.energy,
        &measurements,
        params.half_factor,
    )?;

    let mut table = CsvTable::new(&[
        "n", "m_prime", "D_n", "ratio", "rho_hat", "rhobar_hat", "dw_hat", "ds_hat", "R_hat_n",
        "residual", "iters", "seconds",
    ]);
    for (entry, &secs) in series.entries.iter().zip(seconds.iter()) {
        table.row(&[
            entry.n.to_string(),
            entry.m_prime.to_string(),
            fmt_f64(entry.d_value),
            fmt_f64(entry.ratio),
            fmt_f64(series.rho_hat),
            fmt_f64(series.rhobar_hat),
            fmt_f64(series.walk_dim_hat),
            fmt_f64(series.spectral_dim_hat),
            fmt_f64(entry.r_hat),
            fmt_f64(entry.residual),
            entry.iterations.to_string(),
            fmt_seconds(secs, ctx.deterministic),
        ]);
    }
    let csv = table.into_string();
    write_text(out, &csv)?;
    let estimates = Estimates {
        rho_hat: Some(series.rho_hat),
        rho_hat_regression: series.rho_hat_regression,
        rhobar_hat: Some(series.rhobar_hat),
        dw_hat: Some(series.walk_dim_hat),
        ds_hat: Some(series.spectral_dim_hat),
        ..Default::default()
    };
    ctx.store("resist", &pmap, &csv, &estimates);
    let record = ctx.stage("resist", pmap, out, estimates, false, start.elapsed().as_secs_f64())?;
    Ok(ResistOutcome { record, series: Some(series) })
}

pub fn run_trace(ctx: &RunContext, params: &TraceParams, out: &Path) -> Result<StageRecord> {
    let start = Instant::now();
    if !(params.rho > 0.0) {
        bail!("trace needs a resistance scaling estimate; pass --rho or run the pipeline");
    }
    let pmap = params_map(&[
        ("m", params.m.to_string()),
        ("mprime", params.mprime.to_string()),
        ("nmax", params.nmax.to_string()),
        ("rho_used", fmt_f64(params.rho)),
        ("tol", fmt_f64(params.tol)),
        ("node_cap", ctx.node_cap.to_string()),
    ]);
    if let Some((_, estimates)) = ctx.try_replay("trace", &pmap, out) {
        return ctx.stage("trace", pmap, out, estimates, true, start.elapsed().as_secs_f64());
    }

    let domain = LatticeDomain::build(&ctx.pattern, params.m, params.mprime, ctx.node_cap)?;
    let opts = solve_opts(params.tol);
    let solution = pinned_minimizer(&domain, opts)?;
    let limit = resolution_limit(&domain);
    let profile = besov_profile(&domain, &solution.values, params.rho, limit)?;
    let shells = shell_energy_profile(&domain, &solution, params.nmax.saturating_sub(1));
    let norm =
        gsc_core::boundary::energy_normalization(&ctx.pattern, params.m, params.rho);

    let mut table = CsvTable::new(&[
        "n", "I_n", "phi_n", "term_n", "lambda_n", "tail_term", "shell_prev", "trace_ratio",
        "truncated",
    ]);
    let rows = params.nmax.min(profile.k_max);
    for n in 1..=rows {
        let entry = profile.entries[n as usize - 1];
        let tr = trace_ratio(&domain, &solution, params.rho, n)?;
        let shell_prev = norm * shells.entries[n as usize - 1].cumulative;
        table.row(&[
            n.to_string(),
            fmt_f64(entry.i_k),
            fmt_f64(entry.phi_k),
            fmt_f64(entry.term),
            fmt_f64(profile.lambda(n)),
            fmt_f64(profile.tail_term()),
            fmt_f64(shell_prev),
            fmt_f64(tr.ratio),
            (profile.truncated || rows < params.nmax).to_string(),
        ]);
    }
    let csv = table.into_string();
    write_text(out, &csv)?;
    let estimates = Estimates::default();
    ctx.store("trace", &pmap, &csv, &estimates);
    ctx.stage("trace", pmap, out, estimates, false, start.elapsed().as_secs_f64())
}

pub fn run_decay(ctx: &RunContext, params: &DecayParams, out: &Path) -> Result<StageRecord> {
    let start = Instant::now();
    // the decay profile is scale-free (shell energies are normalized
    // within one solve); a scaling estimate is recorded when the
    // pipeline threads one through, but none is required
    let mut pairs = vec![
        ("cell", params.cell.clone()),
        ("depth", params.depth.to_string()),
        ("m", params.m.to_string()),
        ("mprime", params.mprime.to_string()),
        ("tol", fmt_f64(params.tol)),
        ("seed", ctx.seed.to_string()),
        ("node_cap", ctx.node_cap.to_string()),
    ];
    if params.rho > 0.0 {
        pairs.push(("rho_used", fmt_f64(params.rho)));
    }
    let pmap = params_map(&pairs);
    if let Some((_, estimates)) = ctx.try_replay("decay", &pmap, out) {
        return ctx.stage("decay", pmap, out, estimates, true, start.elapsed().as_secs_f64());
    }

    let cell = parse_cell(&params.cell)?;
    let domain = LatticeDomain::build(&ctx.pattern, params.m, params.mprime, ctx.node_cap)?;
    let d = ctx.pattern.dim() as usize;
    // generic smooth boundary data from the seeded stream: a quadratic
    // profile with per-axis coefficients
    let coeffs = rng::uniform_values(ctx.seed, "decay-data", 2 * d + 1, -1.0, 1.0);
    let data = move |x: &[f64]| -> f64 {
        let mut acc = coeffs[2 * d];
        for (i, &xi) in x.iter().enumerate() {
            acc += coeffs[2 * i] * xi + coeffs[2 * i + 1] * xi * xi;
        }
        acc
    };
    let profile = decay_experiment(&domain, &cell, params.depth, data, solve_opts(params.tol))?;

    let mut table = CsvTable::new(&[
        "shell", "annulus", "cumulative", "c_hat", "prefactor", "degenerate", "truncated",
    ]);
    let (c_hat, prefactor) = match profile.fit {
        Some(fit) => (fmt_f64(fit.rate), fmt_f64(fit.prefactor)),
        None => (String::new(), String::new()),
    };
    for entry in &profile.entries {
        table.row(&[
            entry.level.to_string(),
            fmt_f64(entry.annulus),
            fmt_f64(entry.cumulative),
            c_hat.clone(),
            prefactor.clone(),
            profile.degenerate.to_string(),
            profile.truncated.to_string(),
        ]);
    }
    let csv = table.into_string();
    write_text(out, &csv)?;
    let estimates =
        Estimates { decay_rate: profile.fit.map(|f| f.rate), ..Default::default() };
    ctx.store("decay", &pmap, &csv, &estimates);
    ctx.stage("decay", pmap, out, estimates, false, start.elapsed().as_secs_f64())
}

pub fn run_extend(ctx: &RunContext, params: &ExtendParams, out: &Path) -> Result<StageRecord> {
    let start = Instant::now();
    let targets_name = if params.targets.as_os_str().is_empty() {
        String::from("<seeded>")
    } else {
        params.targets.display().to_string()
    };
    let pmap = params_map(&[
        ("n", params.n.to_string()),
        ("m", params.m.to_string()),
        ("mprime", params.mprime.to_string()),
        ("targets", targets_name),
        ("tol", fmt_f64(params.tol)),
        ("seed", ctx.seed.to_string()),
        ("node_cap", ctx.node_cap.to_string()),
    ]);
    if let Some((_, estimates)) = ctx.try_replay("extend", &pmap, out) {
        return ctx.stage("extend", pmap, out, estimates, true, start.elapsed().as_secs_f64());
    }

    check_face_levels(params.n, params.m)?;
    let faces = prescription_faces(&ctx.pattern, params.n, params.m);
    let targets: Vec<f64> = if params.targets.as_os_str().is_empty() {
        rng::uniform_values(ctx.seed, "extend-targets", faces.len(), 0.0, 1.0)
    } else {
        read_targets(&params.targets, faces.len())?
    };
    let domain = LatticeDomain::build(
        &ctx.pattern,
        params.n + params.m,
        params.mprime,
        ctx.node_cap,
    )?;
    let outcome =
        prescribe_averages(&domain, params.n, params.m, &faces, &targets, solve_opts(params.tol))?;

    let mut table = CsvTable::new(&[
        "face_id", "axis", "plane", "transverse", "target", "achieved", "abs_error",
    ]);
    for (id, face) in faces.iter().enumerate() {
        table.row(&[
            id.to_string(),
            face.axis.to_string(),
            face.plane.to_string(),
            join_coords(&face.transverse),
            fmt_f64(targets[id]),
            fmt_f64(outcome.achieved[id]),
            fmt_f64((outcome.achieved[id] - targets[id]).abs()),
        ]);
    }
    let csv = table.into_string();
    write_text(out, &csv)?;
    let estimates =
        Estimates { quadrature_error: Some(outcome.max_error), ..Default::default() };
    ctx.store("extend", &pmap, &csv, &estimates);
    ctx.stage("extend", pmap, out, estimates, false, start.elapsed().as_secs_f64())
}

/// Targets file: CSV with `face_id,value` rows (comments allowed).
fn read_targets(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading targets {}", path.display()))?;
    let mut values = vec![None; expected];
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with("face_id") {
            continue;
        }
        let (id, value) = line
            .split_once(',')
            .with_context(|| format!("bad targets row {raw:?}"))?;
        let id: usize = id.trim().parse().context("bad face id")?;
        if id >= expected {
            bail!("face id {id} out of range 0..{expected}");
        }
        values[id] = Some(value.trim().parse::<f64>().context("bad target value")?);
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| anyhow!("missing target for face {i}")))
        .collect()
}

pub struct ExitOutcome {
    pub record: StageRecord,
    pub c0_hat: Option<f64>,
}

pub fn run_exit(ctx: &RunContext, params: &ExitParams, out: &Path) -> Result<ExitOutcome> {
    let start = Instant::now();
    if !(params.rho > 0.0) {
        bail!("exit needs a resistance scaling estimate; pass --rho or run the pipeline");
    }
    let pmap = params_map(&[
        ("nmax", params.nmax.to_string()),
        ("extra", params.extra.to_string()),
        ("rho_used", fmt_f64(params.rho)),
        ("tol", fmt_f64(params.tol)),
        ("node_cap", ctx.node_cap.to_string()),
    ]);
    if let Some((_, estimates)) = ctx.try_replay("exit", &pmap, out) {
        let c0 = estimates.c0_hat;
        let record =
            ctx.stage("exit", pmap, out, estimates, true, start.elapsed().as_secs_f64())?;
        return Ok(ExitOutcome { record, c0_hat: c0 });
    }

    let series = exit_series(
        &ctx.pattern,
        params.nmax,
        params.extra,
        params.rho,
        ctx.node_cap,
        solve_opts(params.tol),
    )?;
    let mut table =
        CsvTable::new(&["n", "m_prime", "steps", "t_n", "a_n", "alpha_n", "rel_change"]);
    for e in &series.entries {
        table.row(&[
            e.n.to_string(),
            e.m_prime.to_string(),
            fmt_f64(e.steps),
            fmt_f64(e.t_value),
            fmt_f64(e.a_value),
            fmt_f64(e.alpha),
            e.rel_change.map(fmt_f64).unwrap_or_default(),
        ]);
    }
    let csv = table.into_string();
    write_text(out, &csv)?;
    let estimates = Estimates { c0_hat: Some(series.c0_hat), ..Default::default() };
    ctx.store("exit", &pmap, &csv, &estimates);
    let record = ctx.stage("exit", pmap, out, estimates, false, start.elapsed().as_secs_f64())?;
    Ok(ExitOutcome { record, c0_hat: Some(series.c0_hat) })
}

/// Export the lattice graph: node and edge tables.
pub fn run_graph(
    ctx: &RunContext,
    m: u32,
    mprime: u32,
    nodes_out: &Path,
    edges_out: &Path,
) -> Result<Vec<OutputRef>> {
    let domain = LatticeDomain::build(&ctx.pattern, m, mprime, ctx.node_cap)?;
    let d = ctx.pattern.dim() as usize;
    let mut columns = vec!["id".to_string()];
    for i in 0..d {
        columns.push(format!("x{i}"));
    }
    columns.push("tags".into());
    let column_refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut nodes = CsvTable::new(&column_refs);
    for v in 0..domain.node_count() as u32 {
        let mut row = vec![v.to_string()];
        for c in domain.node_coords(v) {
            row.push(c.to_string());
        }
        row.push(tag_string(&domain, v));
        nodes.row(&row);
    }
    nodes.write_to(nodes_out)?;

    let mut edges = CsvTable::new(&["u", "v", "conductance"]);
    let c = domain.conductance();
    domain.graph().for_each_edge(|u, v, _| {
        edges.row(&[u.to_string(), v.to_string(), fmt_f64(c)]);
    });
    edges.write_to(edges_out)?;
    Ok(vec![
        OutputRef { path: nodes_out.display().to_string(), sha256: sha256_file(nodes_out)? },
        OutputRef { path: edges_out.display().to_string(), sha256: sha256_file(edges_out)? },
    ])
}

fn tag_string(domain: &LatticeDomain, v: u32) -> String {
    let d = domain.pattern().dim();
    let mut parts = Vec::new();
    for axis in 0..d {
        if domain.touches(v, axis, 0) {
            parts.push(format!("{axis}-"));
        }
        if domain.touches(v, axis, 1) {
            parts.push(format!("{axis}+"));
        }
    }
    parts.join("|")
}

/// The full study: validate, dims, resist, trace, decay, extend, exit,
/// threading the resistance estimate forward and linking everything in
/// one manifest.
pub fn run_pipeline(
    config: &crate::config::ExperimentConfig,
    cache_flag: Option<&Path>,
    out_dir: &Path,
) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir)?;
    let ctx = RunContext::load(
        &config.pattern,
        config.deterministic,
        config.seed,
        config.node_cap,
        config.effective_cache(cache_flag),
    )?;
    let mut manifest =
        Manifest::new(&ctx.pattern_path, ctx.pattern_hash.clone(), ctx.deterministic, ctx.seed);
    let manifest_path = out_dir.join("manifest.json");

    let (report, ok) = run_validate(&ctx);
    if !ok {
        let axiom = ctx.pattern.validate().first_failure().unwrap_or("unknown");
        manifest.error = Some(format!("pattern failed validation: {axiom}"));
        manifest.write(&manifest_path)?;
        bail!("pattern failed validation: {axiom}\n{report}");
    }

    let result = (|| -> Result<()> {
        manifest.stages.push(run_dims(&ctx, None, &out_dir.join("dims.csv"))?);

        let resist = run_resist(&ctx, &config.resist, &out_dir.join("resist.csv"))?;
        let rho_from_resist = resist
            .record
            .estimates
            .rho_hat
            .ok_or_else(|| anyhow!("resist stage produced no scaling estimate"))?;
        manifest.stages.push(resist.record);

        let inject = |configured: f64| if configured > 0.0 { configured } else { rho_from_resist };

        let mut trace = config.trace;
        trace.rho = inject(trace.rho);
        manifest.stages.push(run_trace(&ctx, &trace, &out_dir.join("trace.csv"))?);

        let mut decay = config.decay.clone();
        decay.rho = inject(decay.rho);
        manifest.stages.push(run_decay(&ctx, &decay, &out_dir.join("decay.csv"))?);

        manifest.stages.push(run_extend(&ctx, &config.extend, &out_dir.join("extend.csv"))?);

        let mut exit = config.exit;
        exit.rho = inject(exit.rho);
        manifest.stages.push(run_exit(&ctx, &exit, &out_dir.join("exit.csv"))?.record);
        Ok(())
    })();

    match result {
        Ok(()) => {
            manifest.complete = true;
            manifest.write(&manifest_path)?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.error = Some(format!("{e:#}"));
            manifest.write(&manifest_path)?;
            Err(e.context("pipeline halted; partial manifest written"))
        }
    }
}
