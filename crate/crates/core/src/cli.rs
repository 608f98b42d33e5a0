//! Command-line driver. Exit codes: 0 everything passed, 1 a check or
//! computation failed, 2 usage or configuration error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{BoxOverride, OutputFormat, RunConfig, SystemKind, SystemSpec};
use crate::error::{Error, Result};
use crate::hamiltonian::bracket_constancy;
use crate::mechsys::{LagrangianSystem, PhasePoint, TodaBoundary};
use crate::multitime::{
    commutativity_defect, integrate_path, loop_closedness_defect, parse_axis, LoopSpec, MultiTimePath, Trajectory,
};
use crate::verify::{run_checks, Check};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Default acceptance bound on `|defect − c·area|` for loops.
pub const LOOP_TOL: f64 = 1e-6;
/// Admissible range of successive defect ratios under step halving for a fourth-order method.
pub const RATIO_BOUNDS: (f64, f64) = (12.0, 20.0);

#[derive(Debug, Parser)]
#[command(
    name = "pluriform",
    version,
    about = "Checks variational symmetries and multi-time flows numerically"
)]
pub struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List built-in systems and their symmetry counts.
    Systems {
        #[arg(long)]
        json: bool,
    },
    /// Run verification checks and print a JSON report.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated checks, or `all`.
        #[arg(long, default_value = "all")]
        checks: String,
    },
    /// Integrate along a staircase path such as "t:1.0,t1:0.5,t2:-0.25".
    Integrate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, allow_hyphen_values = true)]
        path: String,
        #[command(flatten)]
        start: StartArgs,
    },
    /// Action around a rectangular loop compared with `c_kl · area`.
    Loop {
        #[command(flatten)]
        common: CommonArgs,
        /// Two time axes, e.g. "t1,t2".
        #[arg(long, default_value = "t1,t2")]
        plane: String,
        #[arg(long, default_value = "0.2,0.2", allow_hyphen_values = true)]
        sides: String,
        #[arg(long, default_value_t = LOOP_TOL)]
        tol: f64,
        #[command(flatten)]
        start: StartArgs,
    },
    /// Flow commutativity defect and its convergence under step halving.
    Commute {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "t1")]
        k: String,
        #[arg(long, default_value = "t2")]
        l: String,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long = "h-list", default_value = "2e-3,1e-3,5e-4")]
        h_list: String,
        #[command(flatten)]
        start: StartArgs,
    },
}

/// Options shared by every computing subcommand; each overrides the config file.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// kepler, kepler-rl, toda or harmonic.
    pub system: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// periodic or open-end.
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Sampling seed; defaults to $PLURIFORM_SEED, then a built-in value.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long = "identity-tol")]
    pub identity_tol: Option<f64>,
    #[arg(long = "newton-tol")]
    pub newton_tol: Option<f64>,
    #[arg(long = "bracket-tol")]
    pub bracket_tol: Option<f64>,
    /// Uniform position box "lo,hi".
    #[arg(long = "box-x", allow_hyphen_values = true)]
    pub box_x: Option<String>,
    #[arg(long = "box-xdot", allow_hyphen_values = true)]
    pub box_xdot: Option<String>,
    #[arg(long = "box-xddot", allow_hyphen_values = true)]
    pub box_xddot: Option<String>,
    #[arg(long = "min-radius")]
    pub min_radius: Option<f64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
}

/// Initial phase point; omitted parts use the system's default start.
#[derive(Debug, Args, Default)]
pub struct StartArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub p0: Option<String>,
}

fn parse_list(what: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Usage(format!("{what}: {p:?} is not a finite number")))
        })
        .collect()
}

fn parse_pair(what: &str, s: &str) -> Result<[f64; 2]> {
    match parse_list(what, s)?.as_slice() {
        &[a, b] => Ok([a, b]),
        _ => Err(Error::Usage(format!(
            "{what} needs exactly two comma-separated values, got {s:?}"
        ))),
    }
}

fn parse_boundary(s: &str) -> Result<TodaBoundary> {
    match s {
        "periodic" => Ok(TodaBoundary::Periodic),
        "open-end" | "open" => Ok(TodaBoundary::OpenEnd),
        _ => Err(Error::Usage(format!(
            "unknown boundary {s:?}; expected periodic or open-end"
        ))),
    }
}

fn parse_format(s: &str) -> Result<OutputFormat> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        _ => Err(Error::Usage(format!("unknown format {s:?}; expected csv or json"))),
    }
}

/// Loads the config file, if any, and applies command-line overrides.
pub fn resolve_config(path: Option<&Path>, a: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = &a.system {
        cfg.system.name = SystemKind::parse(s)?;
    }
    if let Some(v) = a.alpha {
        cfg.system.alpha = v;
    }
    if let Some(v) = a.n {
        cfg.system.n = v;
    }
    if let Some(v) = &a.boundary {
        cfg.system.boundary = parse_boundary(v)?;
    }
    if let Some(v) = a.omega {
        cfg.system.omega = v;
    }
    if let Some(v) = a.count {
        cfg.sampling.count = v;
    }
    if let Some(v) = a.seed {
        cfg.sampling.seed = Some(v);
    }
    if let Some(v) = a.step {
        cfg.integrator.step = v;
    }
    if let Some(v) = a.identity_tol {
        cfg.tolerances.identity = Some(v);
    }
    if let Some(v) = a.newton_tol {
        cfg.tolerances.newton = v;
    }
    if let Some(v) = a.bracket_tol {
        cfg.tolerances.bracket = v;
    }
    let b: &mut BoxOverride = &mut cfg.sampling.box_override;
    if let Some(v) = &a.box_x {
        b.x = Some(parse_pair("--box-x", v)?);
    }
    if let Some(v) = &a.box_xdot {
        b.xdot = Some(parse_pair("--box-xdot", v)?);
    }
    if let Some(v) = &a.box_xddot {
        b.xddot = Some(parse_pair("--box-xddot", v)?);
    }
    if let Some(v) = a.min_radius {
        b.min_radius = Some(v);
    }
    if let Some(v) = &a.output {
        cfg.output.path = Some(v.clone());
    }
    if let Some(v) = &a.format {
        cfg.output.format = Some(parse_format(v)?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn start_point(spec: &SystemSpec, sys: &LagrangianSystem, s: &StartArgs) -> Result<PhasePoint> {
    let d = spec.default_phase();
    let x =
        s.x0.as_deref()
            .map(|v| parse_list("--x0", v))
            .transpose()?
            .unwrap_or(d.x);
    let p =
        s.p0.as_deref()
            .map(|v| parse_list("--p0", v))
            .transpose()?
            .unwrap_or(d.p);
    let phase = PhasePoint::new(x, p);
    sys.check_phase(&phase).map_err(|e| Error::Usage(e.to_string()))?;
    Ok(phase)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemEntry {
    pub name: String,
    pub dimension: usize,
    pub symmetries: usize,
    pub labels: Vec<String>,
}

pub fn system_entries() -> Vec<SystemEntry> {
    SystemKind::ALL
        .into_iter()
        .map(|kind| {
            let sys = SystemSpec {
                name: kind,
                ..SystemSpec::default()
            }
            .build()
            .expect("default parameters are valid");
            SystemEntry {
                name: kind.name().to_string(),
                dimension: sys.dim(),
                symmetries: sys.symmetry_count(),
                labels: sys.symmetries().iter().map(|s| s.label.clone()).collect(),
            }
        })
        .collect()
}

/// Result of integrating around a rectangular loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopReport {
    pub system: String,
    pub plane: (usize, usize),
    pub sides: (f64, f64),
    pub step: f64,
    pub base: PhasePoint,
    pub defect: f64,
    pub c_kl: f64,
    pub area: f64,
    pub predicted: f64,
    pub deviation: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Loop defect with `c_kl` measured from the bracket over seeded phase points.
pub fn loop_report(sys: &LagrangianSystem, spec: &LoopSpec, seed: u64, samples: usize, tol: f64) -> Result<LoopReport> {
    let (k, l) = spec.plane;
    let c = bracket_constancy(sys, k, l, samples.max(2), seed)?.mean_value;
    let defect = loop_closedness_defect(sys, spec)?;
    let area = spec.area();
    let deviation = (defect - c * area).abs();
    Ok(LoopReport {
        system: sys.name().to_string(),
        plane: spec.plane,
        sides: spec.sides,
        step: spec.step,
        base: spec.base.clone(),
        defect,
        c_kl: c,
        area,
        predicted: c * area,
        deviation,
        threshold: tol,
        pass: deviation < tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommuteRow {
    pub h: f64,
    pub defect: f64,
    /// Previous row's defect divided by this one.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommuteReport {
    pub system: String,
    pub pair: (usize, usize),
    pub delta: f64,
    pub base: PhasePoint,
    pub rows: Vec<CommuteRow>,
    pub ratio_bounds: (f64, f64),
    pub pass: bool,
}

pub fn commute_report(
    sys: &LagrangianSystem,
    k: usize,
    l: usize,
    base: &PhasePoint,
    delta: f64,
    hs: &[f64],
) -> Result<CommuteReport> {
    if hs.is_empty() {
        return Err(Error::Usage("step list is empty".into()));
    }
    let mut rows: Vec<CommuteRow> = Vec::with_capacity(hs.len());
    for &h in hs {
        let defect = commutativity_defect(sys, k, l, base, delta, h)?;
        let ratio = rows.last().map(|r| r.defect / defect);
        rows.push(CommuteRow { h, defect, ratio });
    }
    let pass = rows
        .iter()
        .filter_map(|r| r.ratio)
        .all(|q| q >= RATIO_BOUNDS.0 && q <= RATIO_BOUNDS.1);
    Ok(CommuteReport {
        system: sys.name().to_string(),
        pair: (k, l),
        delta,
        base: base.clone(),
        rows,
        ratio_bounds: RATIO_BOUNDS,
        pass,
    })
}

impl CommuteReport {
    pub fn table(&self) -> String {
        let mut s = String::from("h           defect                  ratio\n");
        for r in &self.rows {
            let ratio = r.ratio.map_or_else(|| "-".to_string(), |q| format!("{q:.3}"));
            let _ = writeln!(s, "{:<11e} {:<23.16e} {}", r.h, r.defect, ratio);
        }
        s
    }
}

/// CSV with header `step,t0..tm,x_1..x_N,p_1..p_N,H,H_1..H_m` at full precision.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let first = &traj.nodes[0];
    let (axes, n) = (first.times.len(), first.phase.x.len());
    let mut head = vec!["step".to_string()];
    head.extend((0..axes).map(|a| format!("t{a}")));
    head.extend((1..=n).map(|i| format!("x_{i}")));
    head.extend((1..=n).map(|i| format!("p_{i}")));
    head.push("H".into());
    head.extend((1..axes).map(|k| format!("H_{k}")));
    let mut out = head.join(",");
    out.push('\n');
    for (i, node) in traj.nodes.iter().enumerate() {
        let _ = write!(out, "{i}");
        for v in node
            .times
            .iter()
            .chain(&node.phase.x)
            .chain(&node.phase.p)
            .chain(&node.hamiltonians)
        {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Writes to the configured path, or to `out` when none is set.
fn emit(cfg: &RunConfig, text: &str, out: &mut dyn Write) -> Result<()> {
    match &cfg.output.path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("cannot write {}: {e}", p.display()))),
        None => match out.write_all(text.as_bytes()) {
            // A closed reader (e.g. `| head`) is not an error.
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(Error::from),
        },
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Degeneracy(_) | Error::Inversion(_) => EXIT_FAIL,
        Error::Parameter(_) | Error::Dimension(_) | Error::Index(_) | Error::Usage(_) | Error::Io(_) => EXIT_USAGE,
    }
}

fn axis_for(sys: &LagrangianSystem, name: &str) -> Result<usize> {
    let a = parse_axis(name)?;
    if a > sys.symmetry_count() {
        return Err(Error::Usage(format!("{} has no time axis {name}", sys.name())));
    }
    Ok(a)
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Systems { json } => {
            let entries = system_entries();
            if json {
                out.write_all(to_json(&entries)?.as_bytes())?;
            } else {
                for e in entries {
                    writeln!(out, "{} (m={})", e.name, e.symmetries)?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Verify { common, checks } => {
            let cfg = resolve_config(cfg_path, &common)?;
            let checks = Check::parse_list(&checks)?;
            let report = run_checks(&cfg, &checks)?;
            emit(&cfg, &to_json(&report)?, out)?;
            Ok(if report.all_pass { EXIT_OK } else { EXIT_FAIL })
        }
        Command::Integrate { common, path, start } => {
            let cfg = resolve_config(cfg_path, &common)?;
            let sys = cfg.build_system()?;
            let path: MultiTimePath = path.parse()?;
            if let Some(a) = path.max_axis() {
                if a > sys.symmetry_count() {
                    return Err(Error::Usage(format!("{} has no time axis t{a}", sys.name())));
                }
            }
            let phase = start_point(&cfg.system, &sys, &start)?;
            let traj = integrate_path(&sys, &path, &phase, cfg.integrator.step)?;
            let text = match cfg.output.format.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Csv => trajectory_csv(&traj),
                OutputFormat::Json => to_json(&traj)?,
            };
            emit(&cfg, &text, out)?;
            Ok(EXIT_OK)
        }
        Command::Loop {
            common,
            plane,
            sides,
            tol,
            start,
        } => {
            let cfg = resolve_config(cfg_path, &common)?;
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::Usage(format!("--tol must be positive, got {tol}")));
            }
            let sys = cfg.build_system()?;
            let axes: Vec<&str> = plane.split(',').map(str::trim).collect();
            let [ka, la] = axes.as_slice() else {
                return Err(Error::Usage(format!("--plane needs two axes, got {plane:?}")));
            };
            let (k, l) = (axis_for(&sys, ka)?, axis_for(&sys, la)?);
            if k == l {
                return Err(Error::Usage("--plane needs two distinct axes".into()));
            }
            let [a, b] = parse_pair("--sides", &sides)?;
            let spec = LoopSpec {
                plane: (k, l),
                sides: (a, b),
                base: start_point(&cfg.system, &sys, &start)?,
                step: cfg.integrator.step,
            };
            let report = loop_report(&sys, &spec, cfg.resolved_seed()?, cfg.sampling.count, tol)?;
            emit(&cfg, &to_json(&report)?, out)?;
            Ok(if report.pass { EXIT_OK } else { EXIT_FAIL })
        }
        Command::Commute {
            common,
            k,
            l,
            delta,
            h_list,
            start,
        } => {
            let cfg = resolve_config(cfg_path, &common)?;
            let sys = cfg.build_system()?;
            let (k, l) = (axis_for(&sys, &k)?, axis_for(&sys, &l)?);
            if !delta.is_finite() {
                return Err(Error::Usage(format!("--delta must be finite, got {delta}")));
            }
            let hs = parse_list("--h-list", &h_list)?;
            if hs.iter().any(|h| *h <= 0.0) {
                return Err(Error::Usage("--h-list entries must be positive".into()));
            }
            let base = start_point(&cfg.system, &sys, &start)?;
            let report = commute_report(&sys, k, l, &base, delta, &hs)?;
            err.write_all(report.table().as_bytes())?;
            emit(&cfg, &to_json(&report)?, out)?;
            Ok(if report.pass { EXIT_OK } else { EXIT_FAIL })
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
