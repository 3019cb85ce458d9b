//! The `cspi` command-line driver.
//!
//! `cspi <computation> --config <file> [--out <dir>] [--seed <u64>] [--quiet]`
//! reads a TOML [`config::ExperimentConfig`], runs one computation and
//! writes `result.json` (plus CSV tables for some computations) into the
//! output directory: `--out`, else `$CSPI_OUT_DIR`, else `./cspi-out`.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::constraints::{equivalence_report, DiracOptions, EquivalenceOptions, ReducedSystem};
use crate::error::Error;
use crate::grid::Axis;
use crate::lattice::{convergence_study, propagator, LatticeConfig, SymbolRoute};
use crate::oracle::{fock_propagator, FockTruncation};
use crate::states::{overlap, Label, ModeSpace, PhasePoint};
use crate::symbols::{lower_symbol, parse_term, symbol_gap, upper_from_lower, upper_symbol_fn, PolynomialOperator};
use crate::wiener::{bridge_csv, regularized_propagator_mc, sample_pinned_bridge, MetricSpec, WienerConfig};
use config::ExperimentConfig;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CSPI_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "cspi", version, about = "Coherent-state path integrals with constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub computation: Computation,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Computation {
    /// Overlap of the two endpoint labels.
    Overlap(RunArgs),
    /// Upper and lower symbols of the operator and their gap.
    Symbols(RunArgs),
    /// Time-sliced propagator against the Fock oracle.
    Lattice(RunArgs),
    /// Wiener-regularized Monte Carlo propagator over a ladder of ν.
    Wiener(RunArgs),
    /// Compare the constrained routes with the reduced propagator.
    ConstraintEquivalence(RunArgs),
    /// Lattice error against the oracle over a list of slice counts.
    Convergence(RunArgs),
}

impl Computation {
    pub fn name(&self) -> &'static str {
        match self {
            Computation::Overlap(_) => "overlap",
            Computation::Symbols(_) => "symbols",
            Computation::Lattice(_) => "lattice",
            Computation::Wiener(_) => "wiener",
            Computation::ConstraintEquivalence(_) => "constraint-equivalence",
            Computation::Convergence(_) => "convergence",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Computation::Overlap(a)
            | Computation::Symbols(a)
            | Computation::Lattice(a)
            | Computation::Wiener(a)
            | Computation::ConstraintEquivalence(a)
            | Computation::Convergence(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `wiener.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quiet: bool,
}

/// Why a run failed; each kind has its own exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Io { message: String },
    Parse { message: String, line: Option<usize>, column: Option<usize> },
    Precondition { message: String, parameter: Option<String> },
    Refusal { message: String },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io { .. } => 1,
            Failure::Parse { .. } => 2,
            Failure::Precondition { .. } => 3,
            Failure::Refusal { .. } => 4,
        }
    }

    /// Machine-readable error document.
    pub fn document(&self) -> Value {
        let (kind, message, extra) = match self {
            Failure::Io { message } => ("io", message, json!({})),
            Failure::Parse { message, line, column } => ("parse", message, json!({"line": line, "column": column})),
            Failure::Precondition { message, parameter } => ("precondition", message, json!({"parameter": parameter})),
            Failure::Refusal { message } => ("refusal", message, json!({})),
        };
        let mut err = json!({"kind": kind, "message": message});
        if let (Value::Object(e), Value::Object(x)) = (&mut err, extra) {
            e.extend(x);
        }
        json!({"error": err, "exit_code": self.exit_code()})
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Parameter { name, .. } => Failure::Precondition {
                message,
                parameter: Some(name.to_string()),
            },
            Error::Dimension { .. } | Error::NonFinite(_) | Error::Constraint(_) => Failure::Precondition {
                message,
                parameter: None,
            },
            Error::Budget(_) | Error::Truncation(_) | Error::Unsupported(_) | Error::Divergent { .. } => {
                Failure::Refusal { message }
            }
        }
    }
}

fn precondition(parameter: &str, message: impl Into<String>) -> Failure {
    Failure::Precondition {
        message: message.into(),
        parameter: Some(parameter.to_string()),
    }
}

/// 1-based line and column of byte offset `at` in `src`.
fn line_col(src: &str, at: usize) -> (usize, usize) {
    let before = &src[..at.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Parses a config file's text.
pub fn parse_config(src: &str) -> Result<ExperimentConfig, Failure> {
    toml::from_str(src).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => {
                let (l, c) = line_col(src, span.start);
                (Some(l), Some(c))
            }
            None => (None, None),
        };
        Failure::Parse {
            message: e.message().to_string(),
            line,
            column,
        }
    })
}

/// Everything a computation needs, validated.
pub struct System {
    pub space: ModeSpace,
    pub op: PolynomialOperator,
    /// Reduced Hamiltonian on the reduced space.
    pub reduced: PolynomialOperator,
    pub final_label: Label,
    pub initial_label: Label,
}

fn parse_terms(space: &ModeSpace, src: &str, terms: &[String]) -> Result<Vec<PolynomialOperator>, Failure> {
    terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            parse_term(space, t, i).map_err(|e| {
                // locate the quoted term in the file for the report
                let (line, column) = match src.find(&format!("\"{t}\"")) {
                    Some(at) => {
                        let (l, c) = line_col(src, at + 1);
                        (Some(l), Some(c + e.column - 1))
                    }
                    None => (None, None),
                };
                Failure::Parse {
                    message: format!("operator term {}: {}", i + 1, e.message),
                    line,
                    column,
                }
            })
        })
        .collect()
}

fn label_from(space: &ModeSpace, pts: &Option<Vec<[f64; 2]>>, which: &str) -> Result<Label, Failure> {
    let Some(pts) = pts else {
        return Ok(Label::origin(space));
    };
    if pts.len() != space.modes() {
        return Err(precondition(
            which,
            format!("{which} label has {} modes, system has {}", pts.len(), space.modes()),
        ));
    }
    let points = pts.iter().map(|&[p, q]| PhasePoint::new(p, q)).collect();
    let l = Label::from_points(space.n_constrained(), points)?;
    l.check(space)?;
    Ok(l)
}

/// Builds the mode space, operators and labels of `cfg`.
pub fn build_system(cfg: &ExperimentConfig, src: &str) -> Result<System, Failure> {
    let sys = &cfg.system;
    let mut space = ModeSpace::new(sys.constrained, sys.reduced, sys.hbar)?;
    if let Some(w) = &sys.widths {
        space = space.with_widths(w.clone())?;
    }
    let terms = parse_terms(&space, src, &sys.operator)?;
    let op = terms.iter().fold(PolynomialOperator::zero(&space), |acc, t| &acc + t);
    let constrained: Vec<usize> = space.constrained_modes().collect();
    let reduced_modes: Vec<usize> = space.reduced_modes().collect();
    let touches_constraint = |t: &PolynomialOperator| t.support().iter().any(|k| constrained.contains(k));
    let reduced_terms = match &sys.reduced_operator {
        Some(list) => {
            let parsed = parse_terms(&space, src, list)?;
            if let Some(i) = parsed.iter().position(touches_constraint) {
                return Err(precondition(
                    "reduced_operator",
                    format!("reduced operator term {} acts on a constrained mode", i + 1),
                ));
            }
            parsed
        }
        None => terms.into_iter().filter(|t| !touches_constraint(t)).collect(),
    };
    let reduced_full = reduced_terms.iter().fold(PolynomialOperator::zero(&space), |acc, t| &acc + t);
    let reduced = reduced_full.restrict(&reduced_modes, &space.reduced_space())?;
    let final_label = label_from(&space, &cfg.endpoints.final_label, "final")?;
    let initial_label = label_from(&space, &cfg.endpoints.initial, "initial")?;
    Ok(System {
        space,
        op,
        reduced,
        final_label,
        initial_label,
    })
}

/// Resolved output of one run.
pub struct Outcome {
    pub document: Value,
    /// `(file name, contents)` of CSV tables.
    pub tables: Vec<(String, String)>,
    pub summary: String,
}

fn cjson(z: Complex64) -> Value {
    json!({"re": z.re, "im": z.im})
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Comma-separated table with a header row and LF line endings.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Left-aligned text table.
fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect(), &mut out);
    for r in rows {
        line(r.iter().map(|s| s.as_str()).collect(), &mut out);
    }
    out
}

fn trunc(cfg: &ExperimentConfig) -> Result<FockTruncation, Failure> {
    Ok(FockTruncation::new(cfg.oracle.n_trunc)?)
}

fn oracle_value(sys: &System, cfg: &ExperimentConfig, t: f64) -> Result<Result<Complex64, String>, Failure> {
    let tr = trunc(cfg)?;
    Ok(fock_propagator(&sys.op, &sys.final_label, &sys.initial_label, t, tr)
        .map(|o| o.amplitude)
        .map_err(|e| e.to_string()))
}

fn run_overlap(sys: &System) -> Result<Outcome, Failure> {
    let z = overlap(&sys.space, &sys.final_label, &sys.initial_label)?;
    Ok(Outcome {
        document: json!({"amplitude_re": z.re, "amplitude_im": z.im, "magnitude": z.norm()}),
        tables: vec![],
        summary: text_table(&["quantity", "value"], &[
            vec!["overlap re".into(), num(z.re)],
            vec!["overlap im".into(), num(z.im)],
            vec!["|overlap|".into(), num(z.norm())],
        ]),
    })
}

fn run_symbols(sys: &System, cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let upper = upper_symbol_fn(&sys.op);
    let lower = lower_symbol(&sys.op);
    let gap = symbol_gap(&sys.op);
    let labels = [("final", &sys.final_label), ("initial", &sys.initial_label)];
    let step = cfg.symbols.step;
    if !(step.is_finite() && step > 0.0) {
        return Err(precondition("symbols.step", "must be positive"));
    }
    let mut points = serde_json::Map::new();
    let mut rows = Vec::new();
    for (name, l) in labels {
        let extent = match cfg.symbols.extent {
            Some(e) => e,
            None => {
                let reach = l.points().iter().fold(0.0_f64, |m, pt| m.max(pt.p.abs()).max(pt.q.abs()));
                let spread = (0..sys.space.modes())
                    .map(|k| sys.space.width(k).max(1.0 / sys.space.width(k)))
                    .fold(1.0_f64, f64::max);
                reach + 10.0 * sys.space.hbar().sqrt() * spread
            }
        };
        let smoothed = upper_from_lower(&lower, &sys.space, l, Axis::symmetric(extent, step)?)?;
        let (u, lo, g) = (upper.eval(l), lower.eval(l), gap.eval(l));
        points.insert(
            name.to_string(),
            json!({
                "upper": cjson(u),
                "lower": cjson(lo),
                "gap": cjson(g),
                "smoothed_lower": cjson(smoothed.value),
                "smoothing_residual": (smoothed.value - u).norm(),
                "smoothing_boundary": smoothed.boundary,
                "boundary_warning": smoothed.boundary_warning,
            }),
        );
        rows.push(vec![
            name.to_string(),
            num(u.re),
            num(lo.re),
            num(g.re),
            num((smoothed.value - u).norm()),
        ]);
    }
    Ok(Outcome {
        document: json!({
            "upper": upper.to_string(),
            "lower": lower.to_string(),
            "gap": gap.to_string(),
            "points": points,
        }),
        tables: vec![],
        summary: text_table(&["label", "upper", "lower", "gap", "smoothing residual"], &rows),
    })
}

fn lattice_cfg(cfg: &ExperimentConfig) -> Result<LatticeConfig, Failure> {
    let l = &cfg.lattice;
    Ok(LatticeConfig::new(l.slices, l.total_time, l.route)?)
}

fn run_lattice(sys: &System, cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let lc = lattice_cfg(cfg)?;
    let oracle = oracle_value(sys, cfg, lc.total_time)?;
    let r = propagator(&sys.op, &sys.final_label, &sys.initial_label, &lc)?;
    let (oracle_json, deviation) = match &oracle {
        Ok(o) => (cjson(*o), Some((r.amplitude - o).norm())),
        Err(e) => (json!({"error": e}), None),
    };
    let mut rows = vec![
        vec!["amplitude re".into(), num(r.amplitude.re)],
        vec!["amplitude im".into(), num(r.amplitude.im)],
        vec!["epsilon".into(), num(lc.epsilon())],
    ];
    if let Some(d) = deviation {
        rows.push(vec!["|lattice - oracle|".into(), num(d)]);
    }
    Ok(Outcome {
        document: json!({
            "amplitude_re": r.amplitude.re,
            "amplitude_im": r.amplitude.im,
            "method": r.method,
            "error_estimate": r.error_estimate,
            "epsilon": lc.epsilon(),
            "oracle": oracle_json,
            "deviation": deviation,
        }),
        tables: vec![],
        summary: text_table(&["quantity", "value"], &rows),
    })
}

fn run_convergence(sys: &System, cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let lc = lattice_cfg(cfg)?;
    let list = &cfg.convergence.slices;
    if list.is_empty() || list.contains(&0) {
        return Err(precondition("convergence.slices", "need a non-empty list of positive slice counts"));
    }
    let study = convergence_study(
        &sys.op,
        &sys.final_label,
        &sys.initial_label,
        lc.total_time,
        list,
        lc.route,
        trunc(cfg)?,
    )?;
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| vec![r.slices.to_string(), num(r.epsilon), num(r.amplitude.re), num(r.amplitude.im), num(r.error)])
        .collect();
    let header = ["slices", "epsilon", "amplitude_re", "amplitude_im", "error"];
    let mut summary = text_table(&header, &rows);
    let _ = writeln!(summary, "slope: {}", study.slope.map(num).unwrap_or_else(|| "n/a".into()));
    Ok(Outcome {
        document: json!({
            "route": study.route,
            "oracle": cjson(study.oracle),
            "rows": study.rows.iter().map(|r| json!({
                "slices": r.slices,
                "epsilon": r.epsilon,
                "amplitude_re": r.amplitude.re,
                "amplitude_im": r.amplitude.im,
                "error": r.error,
            })).collect::<Vec<_>>(),
            "slope": study.slope,
            "extrapolated": study.extrapolated.map(cjson),
            "extrapolated_error": study.extrapolated.map(|x| (x - study.oracle).norm()),
        }),
        tables: vec![("convergence.csv".into(), csv_table(&header, &rows))],
        summary,
    })
}

fn wiener_configs(sys: &System, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<WienerConfig>, Failure> {
    let w = &cfg.wiener;
    if w.nu.is_empty() {
        return Err(precondition("wiener.nu", "at least one diffusion constant is required"));
    }
    let metric = match &w.metric {
        Some(m) => MetricSpec::flat(m.clone())?,
        None => MetricSpec::unit_phase_space(&sys.space),
    };
    let lattice = LatticeConfig::new(w.slices, cfg.lattice.total_time, SymbolRoute::Lower)?;
    w.nu.iter()
        .map(|&nu| {
            let c = WienerConfig {
                nu,
                lattice,
                metric: metric.clone(),
                seed,
                n_samples: w.samples,
            };
            c.validate()?;
            Ok(c)
        })
        .collect()
}

fn label_coords(l: &Label) -> Vec<f64> {
    l.points().iter().flat_map(|pt| [pt.p, pt.q]).collect()
}

fn run_wiener(sys: &System, cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, Failure> {
    let configs = wiener_configs(sys, cfg, seed)?;
    let oracle = oracle_value(sys, cfg, cfg.lattice.total_time)?;
    let h = lower_symbol(&sys.op);
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut deviations = Vec::new();
    for c in &configs {
        let est = regularized_propagator_mc(&sys.space, &h, &sys.final_label, &sys.initial_label, c)?;
        let a = est.result.amplitude;
        let dev = oracle.as_ref().ok().map(|o| (a - o).norm());
        deviations.push((dev, est.result.error_estimate));
        rows.push(vec![
            num(c.nu),
            num(a.re),
            num(a.im),
            num(est.result.error_estimate),
            num(est.average_sign),
            opt_num(dev),
        ]);
        entries.push(json!({
            "nu": c.nu,
            "amplitude_re": a.re,
            "amplitude_im": a.im,
            "stderr": est.result.error_estimate,
            "average_sign": est.average_sign,
            "deviation": dev,
        }));
    }
    let trend = deviations
        .windows(2)
        .map(|w| Some(w[1].0? <= w[0].0? + 3.0 * w[1].1))
        .collect::<Option<Vec<bool>>>()
        .map(|v| v.into_iter().all(|x| x));
    let header = ["nu", "amplitude_re", "amplitude_im", "stderr", "average_sign", "deviation"];
    let mut tables = vec![("wiener.csv".to_string(), csv_table(&header, &rows))];
    if cfg.wiener.dump_paths > 0 {
        let top = configs.last().expect("non-empty ladder");
        let (start, end) = (label_coords(&sys.initial_label), label_coords(&sys.final_label));
        let paths = (0..cfg.wiener.dump_paths as u64)
            .map(|i| Ok((i, sample_pinned_bridge(&start, &end, top, i)?)))
            .collect::<Result<Vec<_>, Error>>()?;
        tables.push(("bridges.csv".into(), bridge_csv(&paths)));
    }
    Ok(Outcome {
        document: json!({
            "oracle": match &oracle { Ok(o) => cjson(*o), Err(e) => json!({"error": e}) },
            "ladder": entries,
            "trend_monotone": trend,
        }),
        tables,
        summary: text_table(&header, &rows),
    })
}

fn run_equivalence(sys: &System, cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let e = &cfg.equivalence;
    if e.slices == 0 {
        return Err(precondition("equivalence.slices", "must be positive"));
    }
    if e.nu_ladder.iter().any(|nu| !(nu.is_finite() && *nu > 0.0)) {
        return Err(precondition("equivalence.nu_ladder", "every ν must be positive"));
    }
    if !(e.box_length.is_finite() && e.box_length > 0.0) {
        return Err(precondition("equivalence.box_length", "must be positive"));
    }
    let t = cfg.lattice.total_time;
    if !t.is_finite() {
        return Err(precondition("lattice.total_time", "must be finite"));
    }
    let tr = trunc(cfg)?;
    let opts = EquivalenceOptions {
        slices: e.slices,
        route: e.route,
        nu_ladder: e.nu_ladder.clone(),
        lambda_common: e.lambda_common,
        dirac: DiracOptions {
            box_length: e.box_length,
            box_modes: e.box_modes,
            trunc: tr,
        },
        trunc: tr,
    };
    let reduced = ReducedSystem::new(sys.reduced.clone())?;
    let report = equivalence_report(&sys.op, &reduced, &sys.final_label, &sys.initial_label, t, &opts)?;
    let rows: Vec<Vec<String>> = report
        .routes
        .iter()
        .map(|(name, r)| {
            vec![
                name.clone(),
                opt_num(r.amplitude_re),
                opt_num(r.amplitude_im),
                opt_num(r.error_estimate),
                r.error.clone().unwrap_or_else(|| "ok".into()),
            ]
        })
        .collect();
    let mut summary = text_table(&["route", "amplitude_re", "amplitude_im", "error_estimate", "status"], &rows);
    let dev_rows: Vec<Vec<String>> = report.deviations.iter().map(|(k, v)| vec![k.clone(), num(*v)]).collect();
    summary.push('\n');
    summary.push_str(&text_table(&["pair", "deviation"], &dev_rows));
    let _ = writeln!(summary, "\ngauge breaking: {}", report.gauge_breaking);
    let ladder_header = ["nu", "amplitude_re", "amplitude_im", "error_estimate", "deviation"];
    let ladder_rows: Vec<Vec<String>> = report
        .ladder
        .iter()
        .map(|r| {
            vec![
                num(r.nu),
                opt_num(r.outcome.amplitude_re),
                opt_num(r.outcome.amplitude_im),
                opt_num(r.outcome.error_estimate),
                opt_num(r.deviation),
            ]
        })
        .collect();
    Ok(Outcome {
        document: serde_json::to_value(&report).map_err(|e| Failure::Io { message: e.to_string() })?,
        tables: vec![("equivalence_ladder.csv".into(), csv_table(&ladder_header, &ladder_rows))],
        summary,
    })
}

/// Runs `computation` on an already parsed config. `src` is the config text,
/// used to locate operator parse errors.
pub fn execute(computation: &Computation, cfg: &ExperimentConfig, src: &str) -> Result<Outcome, Failure> {
    let seed = computation.args().seed.unwrap_or(cfg.wiener.seed);
    let sys = build_system(cfg, src)?;
    let mut out = match computation {
        Computation::Overlap(_) => run_overlap(&sys)?,
        Computation::Symbols(_) => run_symbols(&sys, cfg)?,
        Computation::Lattice(_) => run_lattice(&sys, cfg)?,
        Computation::Convergence(_) => run_convergence(&sys, cfg)?,
        Computation::Wiener(_) => run_wiener(&sys, cfg, seed)?,
        Computation::ConstraintEquivalence(_) => run_equivalence(&sys, cfg)?,
    };
    let mut resolved = cfg.clone();
    resolved.wiener.seed = seed;
    resolved.system.widths = Some((0..sys.space.modes()).map(|k| sys.space.width(k)).collect());
    let pairs = |l: &Label| Some(l.points().iter().map(|pt| [pt.p, pt.q]).collect::<Vec<_>>());
    resolved.endpoints.final_label = pairs(&sys.final_label);
    resolved.endpoints.initial = pairs(&sys.initial_label);
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    out.document = json!({
        "computation": computation.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": resolved,
        "result": out.document,
        "timestamp": timestamp,
    });
    Ok(out)
}

fn out_dir(args: &RunArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("cspi-out"))
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io {
        message: format!("{}: {e}", path.display()),
    }
}

/// Reads the config, runs, and writes the artifacts. Returns the directory
/// written to.
pub fn run(computation: &Computation) -> Result<(PathBuf, Outcome), Failure> {
    let args = computation.args();
    let src = std::fs::read_to_string(&args.config).map_err(|e| io_failure(&args.config, e))?;
    let cfg = parse_config(&src)?;
    let outcome = execute(computation, &cfg, &src)?;
    let dir = out_dir(args);
    std::fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    let mut doc = serde_json::to_string_pretty(&outcome.document).map_err(|e| Failure::Io { message: e.to_string() })?;
    doc.push('\n');
    let path = dir.join("result.json");
    std::fs::write(&path, doc).map_err(|e| io_failure(&path, e))?;
    for (name, body) in &outcome.tables {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io_failure(&path, e))?;
    }
    Ok((dir, outcome))
}

/// Entry point: parses `argv`, runs, prints, and returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.computation) {
        Ok((dir, outcome)) => {
            if !cli.computation.args().quiet {
                print!("{}", outcome.summary);
                println!("wrote {}", dir.join("result.json").display());
            }
            0
        }
        Err(f) => {
            eprintln!("{}", f.document());
            f.exit_code()
        }
    }
}
