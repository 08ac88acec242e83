use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, ValueEnum};
use rabi_stark::analytic;
use rabi_stark::eigensolve::{ground_solve, mean_boson_number, SolveOptions};
use rabi_stark::fock::{Parity, Truncation};
use rabi_stark::observables::{analyze, DEGENERACY_TOL};
use rabi_stark::sweep::{
    build_collapse, detect_boundaries, run_scan, run_sweep, AxisSpec, BoundaryOptions, CollapseLaw,
    GridSpec, ReducedParams,
};
use rabi_stark::table::{self, format_float, Table, Value};
use rabi_stark::wavefunction::{
    count_nodes, momentum_representation, position_representation, Component, SpatialGrid,
};
use rabi_stark::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Analyze,
    Spectrum,
    Sweep,
    Boundaries,
    Collapse,
    JcExact,
    Variational,
    Quadruple,
    Wavefunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Ground states, phase diagrams and scaling datasets of the anisotropic
/// quantum Rabi model with nonlinear Stark coupling.
///
/// Frequencies are in units of Ω and couplings in units of g_s = √(ωΩ)/2.
#[derive(Debug, Clone, Parser)]
#[command(name = "rabi-stark", version, allow_negative_numbers = true)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Boson frequency ω/Ω.
    #[arg(long)]
    omega: Option<f64>,
    /// Coupling g/g_s.
    #[arg(long)]
    g: Option<f64>,
    /// Counter-rotating to rotating ratio.
    #[arg(long)]
    lambda: Option<f64>,
    /// Stark ratio.
    #[arg(long)]
    chi: Option<f64>,
    /// Swept axis as param:min:max:steps; twice for a plane.
    #[arg(long)]
    grid: Vec<AxisSpec>,
    /// Truncation convergence tolerance in units of Ω.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Scaling law for `collapse`.
    #[arg(long)]
    law: Option<CollapseLaw>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for sweeps.
    #[arg(long, env = "RABI_STARK_THREADS")]
    threads: Option<usize>,
    /// key=value file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Omit the timestamp metadata line.
    #[arg(long)]
    no_timestamp: bool,
    /// Curves for `collapse` as lambda:chi,lambda:chi,...
    #[arg(long)]
    sets: Option<String>,
    /// Abscissa range for `collapse` as min:max.
    #[arg(long, default_value = "1.05:2")]
    grange: String,
    /// Samples per collapse curve.
    #[arg(long, default_value_t = 40)]
    points: usize,
    /// Number of levels for `spectrum`.
    #[arg(long, default_value_t = 6)]
    states: usize,
    /// Write the momentum-space wavefunction.
    #[arg(long)]
    momentum: bool,
    /// Onset threshold on ⟨x²⟩/x_s² for `boundaries`.
    #[arg(long, default_value_t = 0.1)]
    onset_threshold: f64,
}

const CONFIG_KEYS: [&str; 17] = [
    "omega",
    "g",
    "lambda",
    "chi",
    "grid",
    "tol",
    "law",
    "out",
    "format",
    "threads",
    "no-timestamp",
    "sets",
    "grange",
    "points",
    "states",
    "momentum",
    "onset-threshold",
];

const SWITCHES: [&str; 2] = ["no-timestamp", "momentum"];

enum Failure {
    Usage(String),
    Io(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::TruncationCeiling { .. }
            | Error::ConvergenceFailure { .. }
            | Error::CommutatorViolation { .. }
            | Error::ImpureParity(_)
            | Error::GridTooSmall { .. }
            | Error::DegeneratePeak
            | Error::ReconstructionMismatch { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

/// Inserts `--key value` pairs from the config file for every key the
/// command line does not already set.
fn merge_config(args: Vec<String>) -> Outcome<Vec<String>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let path = PathBuf::from(path);
    let text = std::fs::read_to_string(&path).map_err(|e| io_failure(&path, e))?;
    let given = |key: &str| {
        let flag = format!("--{key}");
        args.iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
    };
    let mut merged = args.clone();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Failure::Usage(format!("{}:{}: expected key=value", path.display(), n + 1))
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Failure::Usage(format!(
                "{}:{}: unknown key '{key}'",
                path.display(),
                n + 1
            )));
        }
        if given(&key) {
            continue;
        }
        if SWITCHES.contains(&key.as_str()) {
            match value {
                "true" => merged.push(format!("--{key}")),
                "false" => {}
                _ => {
                    return Err(Failure::Usage(format!(
                        "{key} takes true or false, got '{value}'"
                    )))
                }
            }
        } else {
            merged.push(format!("--{key}={value}"));
        }
    }
    Ok(merged)
}

fn require(v: Option<f64>, name: &str) -> Outcome<f64> {
    v.ok_or_else(|| Failure::Usage(format!("missing --{name}")))
}

fn point(cli: &Cli) -> Outcome<ReducedParams> {
    Ok(ReducedParams {
        omega: require(cli.omega, "omega")?,
        g: require(cli.g, "g")?,
        lambda: require(cli.lambda, "lambda")?,
        chi: require(cli.chi, "chi")?,
    })
}

/// Fixed parameters of a sweep; swept ones default to zero.
fn fixed_point(cli: &Cli) -> Outcome<ReducedParams> {
    let swept = |name: &str| cli.grid.iter().any(|a| a.param.name() == name);
    let get = |v: Option<f64>, name: &str| {
        if swept(name) {
            Ok(v.unwrap_or(0.0))
        } else {
            require(v, name)
        }
    };
    Ok(ReducedParams {
        omega: get(cli.omega, "omega")?,
        g: get(cli.g, "g")?,
        lambda: get(cli.lambda, "lambda")?,
        chi: get(cli.chi, "chi")?,
    })
}

/// The single point, or the points of the one optional axis.
fn scan_points(cli: &Cli) -> Outcome<Vec<ReducedParams>> {
    match cli.grid.as_slice() {
        [] => Ok(vec![point(cli)?]),
        [axis] => {
            let fixed = fixed_point(cli)?;
            if axis.steps < 1 {
                return Err(Failure::Usage("axis needs at least one step".into()));
            }
            Ok((0..axis.steps)
                .map(|i| {
                    let mut p = fixed;
                    p.set(axis.param, axis.value(i));
                    p
                })
                .collect())
        }
        _ => Err(Failure::Usage(
            "this command takes at most one --grid".into(),
        )),
    }
}

fn threads(cli: &Cli) -> usize {
    cli.threads
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn echo(t: &mut Table, cli: &Cli) {
    t.set_meta(
        "command",
        cli.command.to_possible_value().unwrap().get_name(),
    );
    t.set_meta("version", table::VERSION);
    t.set_meta("tol", format_float(cli.tol));
    for (name, v) in [
        ("omega", cli.omega),
        ("g", cli.g),
        ("lambda", cli.lambda),
        ("chi", cli.chi),
    ] {
        if let Some(v) = v {
            t.set_meta(name, format_float(v));
        }
    }
    for (i, a) in cli.grid.iter().enumerate() {
        t.set_meta(
            &format!("grid{}", i + 1),
            format!(
                "{}:{}:{}:{}",
                a.param,
                format_float(a.min),
                format_float(a.max),
                a.steps
            ),
        );
    }
    t.set_meta("units", "omega in Omega, g in g_s");
    if !cli.no_timestamp {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        t.set_meta("timestamp", secs);
    }
}

fn analyze_cmd(cli: &Cli) -> Outcome<Table> {
    let p = point(cli)?;
    let a = analyze(&p.to_params()?, cli.tol)?;
    let mut t = table::analysis_table(&a);
    t.set_meta("truncation", a.n_max_used);
    Ok(t)
}

fn spectrum_cmd(cli: &Cli) -> Outcome<Table> {
    let p = point(cli)?.to_params()?;
    let opts = SolveOptions::default()
        .with_tol(cli.tol)
        .with_states(cli.states.max(1));
    let r = ground_solve(&p, &opts)?;
    let parities: Vec<i32> = r
        .parities
        .as_ref()
        .map(|ps| ps.iter().map(|p| p.value()).collect())
        .unwrap_or_default();
    let mut t = table::spectrum_table(&r.energies, &parities);
    t.set_meta("truncation", r.n_max_used);
    Ok(t)
}

fn max_truncation<'a>(cells: impl Iterator<Item = &'a rabi_stark::sweep::Cell>) -> usize {
    cells
        .filter_map(|c| c.analysis.as_ref().map(|a| a.n_max_used))
        .max()
        .unwrap_or(0)
}

fn grid_spec(cli: &Cli) -> Outcome<GridSpec> {
    let [x, y] = cli.grid.as_slice() else {
        return Err(Failure::Usage(
            "a plane needs exactly two --grid axes".into(),
        ));
    };
    let spec = GridSpec {
        x_axis: *x,
        y_axis: *y,
        fixed: fixed_point(cli)?,
        tol: cli.tol,
    };
    spec.validate()?;
    Ok(spec)
}

fn sweep_cmd(cli: &Cli) -> Outcome<Table> {
    let mut t = match cli.grid.as_slice() {
        [axis] => {
            let fixed = fixed_point(cli)?;
            let cells = run_scan(axis, fixed, cli.tol, threads(cli))?;
            let points: Vec<ReducedParams> = cells
                .iter()
                .map(|c| {
                    let mut p = fixed;
                    p.set(axis.param, axis.value(c.ix));
                    p
                })
                .collect();
            let mut t = table::sweep_table(points.into_iter().zip(&cells));
            t.set_meta("truncation_max", max_truncation(cells.iter()));
            t
        }
        [_, _] => {
            let spec = grid_spec(cli)?;
            let d = run_sweep(&spec, threads(cli))?;
            let mut t = table::sweep_table(d.cells.iter().map(|c| (spec.point(c.ix, c.iy), c)));
            t.set_meta("truncation_max", max_truncation(d.cells.iter()));
            t
        }
        _ => return Err(Failure::Usage("sweep takes one or two --grid axes".into())),
    };
    t.set_meta(
        "failed_cells",
        t.rows
            .iter()
            .filter(|r| r.last() != Some(&Value::Missing))
            .count(),
    );
    Ok(t)
}

fn boundaries_cmd(cli: &Cli) -> Outcome<(Table, Table)> {
    let spec = grid_spec(cli)?;
    let opts = BoundaryOptions {
        onset_threshold: cli.onset_threshold,
        parallelism: threads(cli),
        ..Default::default()
    };
    let d = detect_boundaries(run_sweep(&spec, threads(cli))?, &opts)?;
    let mut cells = table::sweep_table(d.cells.iter().map(|c| (spec.point(c.ix, c.iy), c)));
    cells.set_meta("truncation_max", max_truncation(d.cells.iter()));
    cells.set_meta("failed_cells", d.failed_cells());
    cells.set_meta("onset_threshold", format_float(opts.onset_threshold));
    cells.set_meta("gap_ceiling", format_float(opts.gap_ceiling));
    cells.set_meta("bisection_steps", opts.bisection_steps);
    let lines = table::boundary_table(
        &d.boundaries,
        &d.junctions,
        spec.x_axis.param.name(),
        spec.y_axis.param.name(),
    );
    Ok((cells, lines))
}

fn parse_pair(s: &str, what: &str) -> Outcome<(f64, f64)> {
    let bad = || Failure::Usage(format!("{what} '{s}' is not of the form a:b"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn collapse_cmd(cli: &Cli) -> Outcome<Table> {
    let law = cli
        .law
        .ok_or_else(|| Failure::Usage("missing --law".into()))?;
    let omega = require(cli.omega, "omega")?;
    let sets_arg = cli
        .sets
        .as_deref()
        .ok_or_else(|| Failure::Usage("missing --sets".into()))?;
    let sets = sets_arg
        .split(',')
        .map(|s| parse_pair(s, "set"))
        .collect::<Outcome<Vec<_>>>()?;
    let range = parse_pair(&cli.grange, "range")?;
    let d = build_collapse(law, &sets, range, cli.points, omega, cli.tol, threads(cli))?;
    let mut t = table::collapse_table(&d);
    t.set_meta("sets", sets_arg);
    t.set_meta("grange", &cli.grange);
    t.set_meta("points", cli.points);
    Ok(t)
}

fn jc_cmd(cli: &Cli) -> Outcome<Table> {
    if cli.lambda.is_some_and(|l| l != 0.0) {
        return Err(Failure::Usage(
            "jc-exact is the lambda = 0 solution; drop --lambda".into(),
        ));
    }
    let mut at_zero = cli.clone();
    at_zero.lambda = Some(0.0);
    let mut t = Table::new(["omega", "g", "chi", "E0", "n_star", "n_min", "n_min_low"]);
    for p in scan_points(&at_zero)? {
        if p.lambda != 0.0 {
            return Err(Failure::Usage("jc-exact cannot sweep lambda".into()));
        }
        let params = p.to_params()?;
        let ground = analytic::jc_ground_energy(&params, None);
        let opt = analytic::n_optimal(&params).ok();
        t.push(vec![
            p.omega.into(),
            p.g.into(),
            p.chi.into(),
            ground.energy.into(),
            ground.n_star.into(),
            opt.map(|o| o.n_min).into(),
            opt.map(|o| o.n_min_low).into(),
        ])?;
    }
    Ok(t)
}

fn variational_cmd(cli: &Cli) -> Outcome<Table> {
    let mut t = Table::new([
        "omega", "g", "lambda", "chi", "x_b", "e_b", "x_a", "e_a", "g_c", "g_zeta1", "g_zeta2",
        "g_sx", "g_jc", "g_t1", "g_t1e",
    ]);
    for p in scan_points(cli)? {
        let params = p.to_params()?;
        let m = analytic::variational_minima(&params);
        let b = analytic::boundaries(&params);
        t.push(vec![
            p.omega.into(),
            p.g.into(),
            p.lambda.into(),
            p.chi.into(),
            m.x_b.into(),
            m.e_b.into(),
            m.x_a.into(),
            m.e_a.into(),
            b.g_c.into(),
            b.g_zeta1.into(),
            b.g_zeta2.into(),
            b.g_sx.into(),
            b.g_jc.into(),
            b.g_t1.into(),
            b.g_t1e.into(),
        ])?;
    }
    Ok(t)
}

fn quadruple_cmd(cli: &Cli) -> Outcome<Table> {
    let q = match (cli.chi, cli.lambda) {
        (Some(chi), None) => analytic::quadruple_point_fixed_chi(chi)?,
        (None, Some(lambda)) => analytic::quadruple_point_fixed_lambda(lambda)?,
        _ => {
            return Err(Failure::Usage(
                "quadruple takes exactly one of --chi and --lambda".into(),
            ))
        }
    };
    let mut t = Table::new(["g", "lambda", "chi"]);
    t.push(vec![q.g.into(), q.lambda.into(), q.chi.into()])?;
    Ok(t)
}

fn wavefunction_cmd(cli: &Cli) -> Outcome<Table> {
    let params = point(cli)?.to_params()?;
    let r = ground_solve(&params, &SolveOptions::default().with_tol(cli.tol))?;
    let mut k = 0;
    if let Some(ps) = &r.parities {
        if r.energies[1] - r.energies[0] < DEGENERACY_TOL * params.splitting
            && ps[1] == Parity::Even
        {
            k = 1;
        }
    }
    let trunc = Truncation::new(r.n_max_used)?;
    let state = &r.states[k];
    let grid = SpatialGrid::for_state(&params, mean_boson_number(trunc, state));
    let wf = if cli.momentum {
        momentum_representation(state, trunc, grid)?
    } else {
        position_representation(state, trunc, grid)?
    };
    let mut t = table::wavefunction_table(&wf);
    t.set_meta("E0", format_float(r.energies[k]));
    if let Some(ps) = &r.parities {
        t.set_meta("parity", ps[k].value());
    }
    t.set_meta("n_Z", count_nodes(&wf, Component::Plus).n_z);
    t.set_meta("truncation", r.n_max_used);
    Ok(t)
}

fn write_table(t: &Table, format: Format, out: &mut dyn Write) -> io::Result<()> {
    match format {
        Format::Csv => t.write_csv(out),
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &t.to_json())?;
            writeln!(out)
        }
    }
}

fn open(path: &Path) -> Outcome<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_failure(path, e))
}

fn emit(cli: &Cli, mut main: Table, boundaries: Option<Table>) -> Outcome<()> {
    echo(&mut main, cli);
    let target = cli.out.clone();
    let path = target.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let fail = |e: io::Error| io_failure(&path, e);
    let mut sink: Box<dyn Write> = match &target {
        Some(p) => Box::new(open(p)?),
        None => Box::new(io::stdout().lock()),
    };
    match (boundaries, cli.format) {
        (None, f) => write_table(&main, f, &mut sink).map_err(fail)?,
        (Some(lines), Format::Json) => {
            let mut j = main.to_json();
            let b = lines.to_json();
            j["boundaries"] = serde_json::json!({ "columns": b["columns"], "rows": b["rows"] });
            serde_json::to_writer_pretty(&mut sink, &j).map_err(|e| fail(e.into()))?;
            writeln!(sink).map_err(fail)?;
        }
        (Some(mut lines), Format::Csv) => {
            lines.meta = main.meta.clone();
            write_table(&main, Format::Csv, &mut sink).map_err(fail)?;
            match &target {
                Some(p) => {
                    let mut name = p.as_os_str().to_owned();
                    name.push(".boundaries.csv");
                    let side = PathBuf::from(name);
                    let mut f = open(&side)?;
                    lines
                        .write_csv(&mut f)
                        .and_then(|_| f.flush())
                        .map_err(|e| io_failure(&side, e))?;
                }
                None => {
                    writeln!(sink)
                        .and_then(|_| lines.write_csv(&mut sink))
                        .map_err(fail)?;
                }
            }
        }
    }
    sink.flush().map_err(fail)
}

fn run(cli: &Cli) -> Outcome<()> {
    if !(cli.tol > 0.0) {
        return Err(Failure::Usage(format!(
            "--tol must be positive, got {}",
            cli.tol
        )));
    }
    if let Some(dir) = cli
        .out
        .as_ref()
        .and_then(|p| p.parent())
        .filter(|d| !d.as_os_str().is_empty())
    {
        if !dir.is_dir() {
            return Err(Failure::Io(format!(
                "output directory {} does not exist",
                dir.display()
            )));
        }
    }
    match cli.command {
        Command::Analyze => emit(cli, analyze_cmd(cli)?, None),
        Command::Spectrum => emit(cli, spectrum_cmd(cli)?, None),
        Command::Sweep => emit(cli, sweep_cmd(cli)?, None),
        Command::Boundaries => {
            let (cells, lines) = boundaries_cmd(cli)?;
            emit(cli, cells, Some(lines))
        }
        Command::Collapse => emit(cli, collapse_cmd(cli)?, None),
        Command::JcExact => emit(cli, jc_cmd(cli)?, None),
        Command::Variational => emit(cli, variational_cmd(cli)?, None),
        Command::Quadruple => emit(cli, quadruple_cmd(cli)?, None),
        Command::Wavefunction => emit(cli, wavefunction_cmd(cli)?, None),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(f) => return report(f),
    };
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    match f {
        Failure::Usage(msg) => Cli::command().error(ErrorKind::ValueValidation, msg).exit(),
        Failure::Io(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Failure::Numerical(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
    }
}
