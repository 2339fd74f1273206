//! `qmcircuit`: solves, resistance matrices, metric checks, limit sweeps and
//! balanced flows on directed monomial circuits.
//!
//! Exit status: 0 success, 1 a check failed, 2 bad input, 3 a solve did not
//! converge.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qmcircuit::ext::{format_sig, parse_sentinel};
use qmcircuit::resistance::{
    monotonicity_check, resistance_and_solution, triangle_check, ultrametric_check,
};
use qmcircuit::{
    balanced_flow, generate, series_parallel_reduce, sweep, Boundary, Circuit, CutRatio, Error,
    ExtResistance, Family, GenSpec, LimitMode, NodeId, ResistanceMatrix, SolveConfig, Solver,
};

/// Significant digits in machine-readable output.
const MACHINE_DIGITS: usize = 12;
/// Significant digits in tables meant for people.
const HUMAN_DIGITS: usize = 6;

#[derive(Parser)]
#[command(
    name = "qmcircuit",
    version,
    about = "Directed monomial resistor networks"
)]
struct Cli {
    /// Worker threads for `matrix`, `metric-check` and `limit-sweep` (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SolveOpts {
    /// Interior flux tolerance (default scales with the strongest edge).
    #[arg(long)]
    flux_tol: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    max_sweeps: usize,
}

impl SolveOpts {
    fn config(&self) -> SolveConfig {
        SolveConfig {
            flux_tol: self.flux_tol,
            max_sweeps: self.max_sweeps,
            ..SolveConfig::default()
        }
    }
}

#[derive(clap::Args)]
struct Pair {
    #[arg(long)]
    circuit: PathBuf,
    /// Source node label (or index).
    #[arg(long)]
    source: String,
    /// Sink node label (or index).
    #[arg(long)]
    sink: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Msa,
    Energy,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Msa => Solver::Msa,
            SolverArg::Energy => Solver::Energy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Triangle,
    FiveNode,
    Random,
    Symmetric,
    SeriesParallel,
    InducedPath,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a two-pole circuit and print potentials, fluxes and the pole current.
    Solve {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 1.0)]
        xa: f64,
        #[arg(long, default_value_t = 0.0)]
        xb: f64,
        #[arg(long, value_enum, default_value = "msa")]
        solver: SolverArg,
        /// Print the full solution as JSON.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Effective resistance from source to sink (`inf` when unreachable).
    Resistance {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, value_enum, default_value = "msa")]
        solver: SolverArg,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Resistance between every ordered pair of nodes.
    Matrix {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: MatrixFormat,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Check the triangle inequality on every triple and classify equality
    /// against the cut-vertex condition.
    MetricCheck {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// List every triple, not only failures.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Check the ultrametric inequality on a resistance matrix (CSV or JSON).
    UltraCheck {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
    /// Resistance along a limit curve, as CSV, against the classical oracle.
    ///
    /// Shortest-path and bottleneck modes clamp every resistance into
    /// [1/4, 4] first so that mu^t stays representable up to t = 64.
    LimitSweep {
        #[command(flatten)]
        pair: Pair,
        /// ohm, shortest, bottleneck or maxflow.
        #[arg(long)]
        mode: LimitMode,
        /// Comma-separated ascending parameter values (default depends on the mode).
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Lexicographically balanced flow for a multi-pole boundary.
    BalancedFlow {
        #[arg(long)]
        circuit: PathBuf,
        /// JSON object mapping node labels to boundary fluxes (missing labels are 0).
        #[arg(long)]
        boundary: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Change one edge resistance and check that the effective resistance
    /// moves the same way.
    MonotoneCheck {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        edge: usize,
        /// New resistance; `inf` deletes the edge.
        #[arg(long)]
        mu_new: String,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Exact resistance by series-parallel reduction.
    SpReduce {
        #[command(flatten)]
        pair: Pair,
    },
    /// Write a generated circuit file.
    Generate {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Node count for random and symmetric families.
        #[arg(long, default_value_t = 6)]
        n: usize,
        /// Edge probability for random and symmetric families.
        #[arg(long, default_value_t = 0.4)]
        p: f64,
        /// Nesting depth for series-parallel circuits.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Interior nodes of the induced path.
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 0.5)]
        mu_min: f64,
        #[arg(long, default_value_t = 2.0)]
        mu_max: f64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Input(String),
    NotConverged(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Input(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::NotConverged(m) | Failure::Check(m) => m,
        }
    }
}

fn not_converged(e: &Error) -> bool {
    match e {
        Error::NotConverged { .. } => true,
        Error::Pair { source, .. } => not_converged(source),
        Error::PairFailures(list) => list.iter().any(not_converged),
        _ => false,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if not_converged(&e) {
            return Failure::NotConverged(e.to_string());
        }
        match e {
            Error::InvalidCircuit(_)
            | Error::UnknownNode(_)
            | Error::NodeOutOfRange(_)
            | Error::EdgeOutOfRange(_)
            | Error::DimensionMismatch { .. }
            | Error::ForbiddenEndpoint
            | Error::SamePoles
            | Error::InvalidConfig(_)
            | Error::UnbalancedBoundary(_)
            | Error::NodeBudget { .. }
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Io(_) => Failure::Input(e.to_string()),
            other => Failure::Check(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Prefixes an error with the file it came from.
fn in_file<T>(path: &Path, r: qmcircuit::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_circuit(path: &Path) -> std::result::Result<Circuit, Failure> {
    let text = read(path)?;
    in_file(path, Circuit::from_json(&text))
}

fn resolve(c: &Circuit, name: &str, flag: &str) -> std::result::Result<NodeId, Failure> {
    if let Ok(v) = c.node(name) {
        return Ok(v);
    }
    match name.parse::<usize>() {
        Ok(i) if i < c.node_count() => Ok(NodeId(i)),
        _ => Err(Failure::Input(format!("--{flag}: unknown node `{name}`"))),
    }
}

fn load_pair(pair: &Pair) -> std::result::Result<(Circuit, NodeId, NodeId), Failure> {
    let c = load_circuit(&pair.circuit)?;
    let a = resolve(&c, &pair.source, "source")?;
    let b = resolve(&c, &pair.sink, "sink")?;
    Ok((c, a, b))
}

fn machine(v: f64) -> String {
    format_sig(v, MACHINE_DIGITS)
}

fn human(v: f64) -> String {
    format_sig(v, HUMAN_DIGITS)
}

fn ext_machine(v: ExtResistance) -> String {
    format!("{v:.MACHINE_DIGITS$}")
}

fn ext_human(v: ExtResistance) -> String {
    format!("{v:.HUMAN_DIGITS$}")
}

fn solve(
    pair: &Pair,
    xa: f64,
    xb: f64,
    solver: SolverArg,
    json: bool,
    opts: &SolveOpts,
    out: &mut impl Write,
) -> Outcome {
    let (c, a, b) = load_pair(pair)?;
    let sol = Solver::from(solver).solve(&c, a, b, xa, xb, &opts.config());
    let sol = match sol {
        Err(Error::NotConverged {
            sweeps,
            residual,
            best,
        }) => {
            return Err(Failure::NotConverged(format!(
                "not converged after {sweeps} iterations: residual {residual:e} (tolerance {:e})",
                best.flux_tol
            )))
        }
        other => other?,
    };
    if json {
        serde_json::to_writer_pretty(&mut *out, &sol).map_err(|e| Failure::Check(e.to_string()))?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(out, "source        {}", c.label(a))?;
    writeln!(out, "sink          {}", c.label(b))?;
    writeln!(out, "pole current  {}", human(sol.pole_current))?;
    writeln!(
        out,
        "residual      {:.3e} (tolerance {:.3e})",
        sol.residual, sol.flux_tol
    )?;
    writeln!(out, "sweeps        {}", sol.sweeps_used)?;
    writeln!(out)?;
    writeln!(out, "{:<12} {:>14} {:>14}", "node", "potential", "flux")?;
    for v in c.nodes() {
        writeln!(
            out,
            "{:<12} {:>14} {:>14}",
            c.label(v),
            human(sol.x[v.0]),
            human(sol.x_star[v.0])
        )?;
    }
    Ok(())
}

fn generate_cmd(
    family: FamilyArg,
    seed: u64,
    (n, p, depth, k): (usize, f64, usize, usize),
    (r, s, mu_min, mu_max): (f64, f64, f64, f64),
    path: Option<&Path>,
    out: &mut impl Write,
) -> Outcome {
    let family = match family {
        FamilyArg::Triangle => Family::Triangle,
        FamilyArg::FiveNode => Family::FiveNode,
        FamilyArg::Random => Family::RandomDigraph { n, p },
        FamilyArg::Symmetric => Family::Symmetric { n, p },
        FamilyArg::SeriesParallel => Family::SeriesParallel { depth },
        FamilyArg::InducedPath => Family::InducedPath { k },
    };
    let spec = GenSpec::new(family, seed)
        .mu_range(mu_min, mu_max)
        .exponents(r, s);
    let text = generate(&spec)?.to_json()?;
    match path {
        Some(p) => fs::write(p, text + "\n")
            .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => writeln!(out, "{text}")?,
    }
    Ok(())
}

fn load_matrix(path: &Path) -> std::result::Result<ResistanceMatrix, Failure> {
    let text = read(path)?;
    let parsed = if text.trim_start().starts_with('{') {
        ResistanceMatrix::from_json(&text)
    } else {
        ResistanceMatrix::read_csv(text.as_bytes())
    };
    in_file(path, parsed)
}

fn run(cli: Cli, out: &mut impl Write) -> Outcome {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Input("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Input(e.to_string()))?;
    }
    match cli.command {
        Command::Solve {
            pair,
            xa,
            xb,
            solver,
            json,
            opts,
        } => solve(&pair, xa, xb, solver, json, &opts, out),

        Command::Resistance { pair, solver, opts } => {
            let (c, a, b) = load_pair(&pair)?;
            let (mu, _) = resistance_and_solution(&c, a, b, &opts.config(), solver.into())?;
            writeln!(out, "{}", ext_machine(mu))?;
            Ok(())
        }

        Command::Matrix {
            circuit,
            format,
            opts,
        } => {
            let c = load_circuit(&circuit)?;
            let m = qmcircuit::resistance_matrix(&c, &opts.config())?;
            match format {
                MatrixFormat::Json => writeln!(out, "{}", m.to_json()?)?,
                MatrixFormat::Csv => m.write_csv(&mut *out)?,
            }
            Ok(())
        }

        Command::MetricCheck {
            circuit,
            tol,
            all,
            opts,
        } => {
            let c = load_circuit(&circuit)?;
            let m = qmcircuit::resistance_matrix(&c, &opts.config())?;
            let reports = triangle_check(&m, &c, tol);
            writeln!(
                out,
                "{:<8} {:<8} {:<8} {:>14} {:>14} {:>14} {:>6} {:>6}  status",
                "a", "b", "c", "lhs", "rhs", "slack", "cut", "equal"
            )?;
            let mut failed = 0;
            for t in &reports {
                if !t.passed() {
                    failed += 1;
                }
                if all || !t.passed() {
                    let status = if t.violated {
                        "VIOLATED"
                    } else if t.misclassified {
                        "MISCLASSIFIED"
                    } else {
                        "ok"
                    };
                    let slack = t
                        .slack
                        .finite()
                        .map_or_else(|| format!("{}", t.slack), human);
                    writeln!(
                        out,
                        "{:<8} {:<8} {:<8} {:>14} {:>14} {:>14} {:>6} {:>6}  {status}",
                        c.label(NodeId(t.a)),
                        c.label(NodeId(t.b)),
                        c.label(NodeId(t.c)),
                        ext_human(t.lhs),
                        ext_human(t.rhs),
                        slack,
                        t.cut_vertex,
                        t.equality,
                    )?;
                }
            }
            let equal = reports.iter().filter(|t| t.equality).count();
            writeln!(
                out,
                "{} triples, {equal} equalities, {failed} failed",
                reports.len()
            )?;
            if failed > 0 {
                return Err(Failure::Check(format!(
                    "{failed} triples failed the triangle check"
                )));
            }
            Ok(())
        }

        Command::UltraCheck { matrix, tol } => {
            let m = load_matrix(&matrix)?;
            let rep = ultrametric_check(&m, tol);
            writeln!(
                out,
                "{} triples, {} equalities, {} violations",
                rep.triples,
                rep.equalities,
                rep.violations.len()
            )?;
            for v in &rep.violations {
                writeln!(
                    out,
                    "violated: {} {} {}  mu_ab {} > max {}",
                    m.nodes[v.a],
                    m.nodes[v.b],
                    m.nodes[v.c],
                    ext_human(v.lhs),
                    ext_human(v.max)
                )?;
            }
            if !rep.holds() {
                return Err(Failure::Check(format!(
                    "{} ultrametric violations",
                    rep.violations.len()
                )));
            }
            Ok(())
        }

        Command::LimitSweep {
            pair,
            mode,
            t,
            opts,
        } => {
            let (c, a, b) = load_pair(&pair)?;
            let t = if t.is_empty() {
                mode.default_t().to_vec()
            } else {
                t
            };
            let rep = sweep(&c, a, b, mode, &t, &opts.config())?;
            rep.write_csv(&mut *out)?;
            for p in rep.points.iter().filter(|p| p.error.is_some()) {
                eprintln!("t = {}: {}", p.t, p.error.as_deref().unwrap_or_default());
            }
            if rep.points.iter().any(|p| p.mu.is_none()) {
                return Err(Failure::NotConverged(
                    "some sweep points did not converge".into(),
                ));
            }
            Ok(())
        }

        Command::BalancedFlow {
            circuit,
            boundary,
            json,
        } => {
            let c = load_circuit(&circuit)?;
            let text = read(&boundary)?;
            let bnd = in_file(&boundary, Boundary::from_json(&c, &text))?;
            let flow = balanced_flow(&c, &bnd)?;
            if json {
                serde_json::to_writer_pretty(&mut *out, &flow)
                    .map_err(|e| Failure::Check(e.to_string()))?;
                writeln!(out)?;
                return Ok(());
            }
            writeln!(out, "stage  ratio           source side")?;
            for (i, st) in flow.stages.iter().enumerate() {
                let left: Vec<&str> = st.cut.left.iter().map(|&v| c.label(v)).collect();
                writeln!(
                    out,
                    "{:<6} {:<15} {{{}}}",
                    i + 1,
                    machine(st.ratio),
                    left.join(", ")
                )?;
            }
            writeln!(out)?;
            writeln!(out, "edge  from -> to          flow")?;
            for (e, ed) in c.edges().iter().enumerate() {
                writeln!(
                    out,
                    "{e:<5} {} -> {:<10} {}",
                    c.label(ed.tail),
                    c.label(ed.head),
                    machine(flow.flow[e])
                )?;
            }
            if let Some(st) = flow.stages.first() {
                if let CutRatio::Finite(r) = st.cut.ratio {
                    writeln!(out, "critical ratio {}", machine(r))?;
                }
            }
            Ok(())
        }

        Command::MonotoneCheck {
            pair,
            edge,
            mu_new,
            opts,
        } => {
            let (c, a, b) = load_pair(&pair)?;
            let mu = parse_sentinel(&mu_new)
                .filter(|m| *m != ExtResistance::Zero)
                .ok_or_else(|| {
                    Failure::Input(format!(
                        "--mu-new: expected a positive number or `inf`, got `{mu_new}`"
                    ))
                })?;
            let rep = monotonicity_check(&c, edge, mu, a, b, &opts.config())?;
            writeln!(out, "before {}", ext_machine(rep.before))?;
            writeln!(out, "after  {}", ext_machine(rep.after))?;
            writeln!(
                out,
                "{}",
                if rep.holds {
                    "monotone"
                } else {
                    "NOT MONOTONE"
                }
            )?;
            if !rep.holds {
                return Err(Failure::Check(
                    "resistance moved against the edge change".into(),
                ));
            }
            Ok(())
        }

        Command::SpReduce { pair } => {
            let (c, a, b) = load_pair(&pair)?;
            let mu = series_parallel_reduce(&c, a, b)?;
            writeln!(out, "{}", ext_machine(mu))?;
            Ok(())
        }

        Command::Generate {
            family,
            seed,
            n,
            p,
            depth,
            k,
            r,
            s,
            mu_min,
            mu_max,
            out: path,
        } => generate_cmd(
            family,
            seed,
            (n, p, depth, k),
            (r, s, mu_min, mu_max),
            path.as_deref(),
            out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let result = run(cli, &mut out);
    let flushed = out.flush();
    match (result, flushed) {
        (Ok(()), Ok(())) => ExitCode::SUCCESS,
        (Err(f), _) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
        (Ok(()), Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
