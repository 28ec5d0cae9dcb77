//! Command-line front end: JSON lines on stdout, diagnostics on stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::{json, Value};

use crate::cruise::{
    self, adaptive_study, brake_study, families_for_with, family_dirs, online_slice, read_family, slice_indices,
    write_family, CruiseController, CruiseError, CruiseParams, SliceFamily, StudyConfig, StudyRun,
};
use crate::mpc::{check_switch, MpcError, SwitchDecision, SwitchRequest};
use crate::polytope::Polytope;
use crate::sets::{FixedPointOptions, SetsError};
use crate::tol::Tolerances;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_REFUSED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "msh", version, about = "Robust M-step hold MPC: invariant slices, simulation and hold switching")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Study configuration (JSON). Built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "msh-out")]
    pub out: PathBuf,
    /// Overrides `scenario.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overwrite existing archives and CSVs.
    #[arg(long, global = true)]
    pub force: bool,
    /// Set-equality tolerance for fixed points and membership checks.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Study {
    Brake,
    Adaptive,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the slice families for every configured hold length.
    Sets,
    /// Run the brake and/or adaptive studies and write trace CSVs.
    Simulate {
        #[arg(long, value_enum, default_value_t = Study::All)]
        study: Study,
        /// Read slice families from a `sets` output instead of computing them.
        #[arg(long)]
        archives: Option<PathBuf>,
    },
    /// Decide whether a state may switch from one hold length to another.
    CheckSwitch {
        /// State as `d,v1,v0`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        state: Vec<f64>,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
        #[arg(long)]
        archives: Option<PathBuf>,
    },
    /// Export slice vertex loops and downsampled traces as CSV.
    PlotData {
        #[arg(long)]
        archives: Option<PathBuf>,
        /// Front velocities at which to cut the slices.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "25")]
        v0: Vec<f64>,
        /// Hold lengths; defaults to the configured `M`.
        #[arg(long, value_delimiter = ',')]
        holds: Vec<usize>,
        /// Trace CSVs to downsample.
        #[arg(long)]
        trace: Vec<PathBuf>,
        /// Keep every n-th trace row.
        #[arg(long, default_value_t = 10)]
        every: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("refusing to overwrite {0} (use --force)")]
    Refused(String),
    #[error("{0}")]
    Domain(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Refused(_) => EXIT_REFUSED,
            CliError::Domain(_) | CliError::Io(_) => EXIT_DOMAIN,
        }
    }
}

impl From<CruiseError> for CliError {
    fn from(e: CruiseError) -> Self {
        match e {
            CruiseError::InvalidParams(m) => CliError::Usage(m),
            CruiseError::Io(m) => CliError::Io(m),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<MpcError> for CliError {
    fn from(e: MpcError) -> Self {
        CliError::from(CruiseError::from(e))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. JSON lines go to `out`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.common.verbose { "debug" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("msh: {e}");
            let _ = emit(out, json!({ "event": "error", "code": e.code(), "message": e.to_string() }));
            e.code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run_with(args, &mut lock)
}

fn emit(out: &mut dyn Write, v: Value) -> Result<()> {
    writeln!(out, "{v}")?;
    Ok(())
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let cfg = load_config(&cli.common)?;
    match &cli.command {
        Command::Sets => cmd_sets(&cli.common, &cfg, out),
        Command::Simulate { study, archives } => cmd_simulate(&cli.common, &cfg, *study, archives.as_deref(), out),
        Command::CheckSwitch { state, from, to, archives } => {
            cmd_check_switch(&cli.common, &cfg, state, *from, *to, archives.as_deref(), out)
        }
        Command::PlotData { archives, v0, holds, trace, every } => {
            cmd_plot_data(&cli.common, &cfg, archives.as_deref(), v0, holds, trace, *every, out)
        }
    }
}

pub fn load_config(common: &Common) -> Result<StudyConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            StudyConfig::from_json(&text)?
        }
        None => StudyConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(t) = common.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Usage(format!("--tol: must be positive, got {t}")));
        }
    }
    Ok(cfg)
}

fn fixed_point_options(common: &Common) -> FixedPointOptions {
    let mut opts = FixedPointOptions::default();
    if let Some(t) = common.tol {
        opts.tol = Tolerances { set: t, ..Tolerances::DEFAULT };
    }
    opts
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn cmd_sets(common: &Common, cfg: &StudyConfig, out: &mut dyn Write) -> Result<i32> {
    let p = &cfg.params;
    let holds = all_holds(cfg);
    if !common.force {
        for &m in &holds {
            let (lo, hi) = family_dirs(&common.out, m);
            for d in [lo, hi] {
                if d.join("manifest").exists() {
                    return Err(CliError::Refused(d.display().to_string()));
                }
            }
        }
    }
    let opts = fixed_point_options(common);
    let start = Instant::now();
    let fams = match families_for_with(p, &holds, &opts) {
        Ok(f) => f,
        Err(CruiseError::Sets(SetsError::NoConvergence { iters, last })) => {
            emit(
                out,
                json!({ "event": "no_convergence", "iterations": iters, "last_iterate": last.to_hpoly() }),
            )?;
            return Err(CliError::Domain(format!("fixed point not reached after {iters} iterations")));
        }
        Err(e) => return Err(e.into()),
    };
    let wall = start.elapsed().as_secs_f64();
    create_out(&common.out)?;
    for fam in fams.values() {
        write_family(&common.out, p, fam, common.force)?;
        emit(
            out,
            json!({
                "event": "family",
                "M": fam.hold,
                "lower_slices": fam.lower.len(),
                "upper_slices": fam.upper.len(),
                "lower_iterations": fam.lower_iterations,
                "upper_iterations": fam.upper_iterations,
                "dir": common.out.join(format!("M{}", fam.hold)).display().to_string(),
            }),
        )?;
    }
    emit(out, json!({ "event": "sets_done", "families": fams.len(), "wall_s": wall }))?;
    Ok(EXIT_OK)
}

fn all_holds(cfg: &StudyConfig) -> Vec<usize> {
    let mut h = cfg.params.holds.clone();
    h.extend(&cfg.supervisor.ladder);
    h.sort_unstable();
    h.dedup();
    h
}

/// Families for `holds`, from `archives` when given.
fn load_families(
    common: &Common,
    p: &CruiseParams,
    holds: &[usize],
    archives: Option<&Path>,
) -> Result<BTreeMap<usize, Arc<SliceFamily>>> {
    match archives {
        Some(dir) => {
            let mut map = BTreeMap::new();
            for &m in holds {
                map.insert(m, Arc::new(read_family(dir, p, m)?));
            }
            Ok(map)
        }
        None => Ok(families_for_with(p, holds, &fixed_point_options(common))?),
    }
}

fn cmd_simulate(
    common: &Common,
    cfg: &StudyConfig,
    study: Study,
    archives: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    let p = &cfg.params;
    let mut names: Vec<String> = Vec::new();
    if study != Study::Adaptive {
        names.extend(p.holds.iter().map(|m| format!("brake_M{m}")));
    }
    if study != Study::Brake {
        names.push("adaptive".into());
    }
    if !common.force {
        for n in &names {
            let path = common.out.join(format!("{n}.csv"));
            if path.exists() {
                return Err(CliError::Refused(path.display().to_string()));
            }
        }
    }
    let mut holds = Vec::new();
    if study != Study::Adaptive {
        holds.extend(&p.holds);
    }
    if study != Study::Brake {
        holds.extend(&cfg.supervisor.ladder);
    }
    holds.sort_unstable();
    holds.dedup();
    let fams = load_families(common, p, &holds, archives)?;
    let steps = p.steps_per(cfg.scenario.duration_s);
    let mut runs: Vec<StudyRun> = Vec::new();
    let mut switches = Vec::new();
    if study != Study::Adaptive {
        runs.extend(brake_study(p, &fams, &p.holds, &cfg.scenario)?);
    }
    if study != Study::Brake {
        let (run, sup) = adaptive_study(p, &fams, &cfg.supervisor, cfg.scenario.duration_s)?;
        runs.push(run);
        switches = sup.events;
    }
    create_out(&common.out)?;
    let mut failed = false;
    for run in &runs {
        let path = common.out.join(format!("{}.csv", run.name));
        run.trace.write_csv(&path)?;
        let tr = &run.trace;
        let ok = run.ok();
        failed |= !ok;
        emit(
            out,
            json!({
                "event": "run",
                "name": run.name,
                "steps": tr.steps(),
                "requested_steps": steps,
                "min_distance": run.min_distance(),
                "final_ego_velocity": run.final_ego_velocity(),
                "violations": tr.violations(),
                "halted": tr.halted.as_ref().map(|e| e.to_string()),
                "ok": ok,
                "csv": path.display().to_string(),
            }),
        )?;
    }
    for e in &switches {
        emit(
            out,
            json!({ "event": "switch", "t": e.t, "from": e.from, "to": e.to, "accepted": e.accepted, "reason": e.reason }),
        )?;
    }
    if failed {
        return Err(CliError::Domain("a run halted or violated a constraint".into()));
    }
    Ok(EXIT_OK)
}

fn cmd_check_switch(
    common: &Common,
    cfg: &StudyConfig,
    state: &[f64],
    from: usize,
    to: usize,
    archives: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    let p = &cfg.params;
    if state.len() != 3 || state.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage(format!("--state: expected three finite numbers d,v1,v0, got {state:?}")));
    }
    for (flag, m) in [("--from", from), ("--to", to)] {
        if m == 0 || !p.horizon.is_multiple_of(m) {
            return Err(CliError::Usage(format!("{flag}: hold length {m} does not divide N = {}", p.horizon)));
        }
    }
    let fams = load_families(common, p, &[from, to], archives)?;
    let x = DVector::from_column_slice(state);
    let tol = common.tol.unwrap_or(Tolerances::DEFAULT.set);
    let current = CruiseController::new(p, fams[&from].clone())?;
    let cur_target = current.target(&x)?;
    let in_current = current.problem.feasible_region(&cur_target)?.contains_point(x.as_slice(), tol);
    let cand = CruiseController::new(p, fams[&to].clone())?;
    let req = SwitchRequest { hold: to, target: cand.target(&x)? };
    let decision = check_switch(&x, &req, &cand.problem)?;
    let (safe, cert) = match &decision {
        SwitchDecision::Safe => (true, Value::Null),
        SwitchDecision::Unsafe { excess, .. } if *excess <= tol => (true, Value::Null),
        SwitchDecision::Unsafe { row, normal, rhs, excess } => {
            (false, json!({ "row": row, "normal": normal, "rhs": rhs, "excess": excess }))
        }
    };
    emit(
        out,
        json!({
            "event": "check_switch",
            "state": state,
            "from": from,
            "to": to,
            "in_current_region": in_current,
            "safe": safe,
            "violated": cert,
        }),
    )?;
    Ok(if safe { EXIT_OK } else { EXIT_DOMAIN })
}

/// Vertex loop of a `(d, v1)` section, closed by repeating the first vertex.
pub fn vertex_loop(section: &Polytope) -> Result<Vec<[f64; 2]>> {
    let plane = section.project(&[cruise::D, cruise::V1]).map_err(CruiseError::from)?;
    let verts = plane.vertices().map_err(CruiseError::from)?;
    if verts.is_empty() {
        return Ok(Vec::new());
    }
    let n = verts.len() as f64;
    let cx = verts.iter().map(|v| v[0]).sum::<f64>() / n;
    let cy = verts.iter().map(|v| v[1]).sum::<f64>() / n;
    let mut pts: Vec<[f64; 2]> = verts.iter().map(|v| [v[0], v[1]]).collect();
    pts.sort_by(|a, b| {
        let ta = (a[1] - cy).atan2(a[0] - cx);
        let tb = (b[1] - cy).atan2(b[0] - cx);
        ta.total_cmp(&tb)
    });
    pts.push(pts[0]);
    Ok(pts)
}

/// Keeps the header, every `every`-th data row and the last row.
pub fn downsample_csv(text: &str, every: usize) -> String {
    let mut lines = text.lines();
    let mut out = String::new();
    let Some(header) = lines.next() else { return out };
    out.push_str(header);
    out.push('\n');
    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    let every = every.max(1);
    for (i, r) in rows.iter().enumerate() {
        if i % every == 0 || i + 1 == rows.len() {
            out.push_str(r);
            out.push('\n');
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_plot_data(
    common: &Common,
    cfg: &StudyConfig,
    archives: Option<&Path>,
    v0s: &[f64],
    holds: &[usize],
    traces: &[PathBuf],
    every: usize,
    out: &mut dyn Write,
) -> Result<i32> {
    let p = &cfg.params;
    let holds = if holds.is_empty() { p.holds.clone() } else { holds.to_vec() };
    for &m in &holds {
        if m == 0 {
            return Err(CliError::Usage("--holds: hold lengths must be positive".into()));
        }
    }
    if v0s.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage("--v0: values must be finite".into()));
    }
    let slices_path = common.out.join("slices.csv");
    let mut targets: Vec<(PathBuf, String)> = Vec::new();
    for t in traces {
        let stem = t.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_else(|| "trace".into());
        targets.push((common.out.join(format!("{stem}_plot.csv")), std::fs::read_to_string(t)?));
    }
    if !common.force {
        let mut paths = vec![slices_path.clone()];
        paths.extend(targets.iter().map(|(p, _)| p.clone()));
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(CliError::Refused(p.display().to_string()));
        }
    }
    create_out(&common.out)?;
    if !v0s.is_empty() && !holds.is_empty() {
        let fams = load_families(common, p, &holds, archives)?;
        let mut csv = String::from("v0,M,vx,vy,warning\n");
        for &v0 in v0s {
            for &m in &holds {
                let fam = &fams[&m];
                let warning = slice_warning(fam, v0, p);
                let section = online_slice(fam, v0.clamp(p.v_min, p.v_max), p)?;
                let pts = vertex_loop(&section)?;
                for pt in &pts {
                    csv.push_str(&format!("{v0},{m},{},{},{warning}\n", pt[0], pt[1]));
                }
                emit(out, json!({ "event": "slice", "v0": v0, "M": m, "vertices": pts.len().saturating_sub(1), "warning": warning }))?;
            }
        }
        std::fs::write(&slices_path, csv)?;
        emit(out, json!({ "event": "written", "path": slices_path.display().to_string() }))?;
    }
    for (path, text) in &targets {
        let ds = downsample_csv(text, every);
        let rows = ds.lines().count().saturating_sub(1);
        std::fs::write(path, ds)?;
        emit(out, json!({ "event": "written", "path": path.display().to_string(), "rows": rows }))?;
    }
    Ok(EXIT_OK)
}

/// Empty inside the modelled velocity range; otherwise names the clamped
/// velocity whose slices were used instead.
fn slice_warning(fam: &SliceFamily, v0: f64, p: &CruiseParams) -> String {
    if v0 >= p.v_min && v0 <= p.v_max {
        return String::new();
    }
    let near = v0.clamp(p.v_min, p.v_max);
    let (l, h) = slice_indices(fam, near, p);
    format!("v0 outside [{}; {}]: nearest slices at v0={near} (lower {l} upper {h})", p.v_min, p.v_max)
}
