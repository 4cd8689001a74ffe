//! `gasket-vp`: build gaskets, check hypotheses, find critical points and run
//! parametric sweeps from a JSON configuration.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gasket_core::assumptions::{check_assumptions, SamplingGrid, Status};
use gasket_core::geometry::PrefractalGraph;
use gasket_core::harness::{run_convergence_experiment, ScheduleKind, SolverKind};
use gasket_core::io::{self, RunConfig, SolutionFile, SolutionMeta};
use gasket_core::solvers::{
    brute_force_critical_points, default_radius, double_critical_points, geometry_probe,
    initial_guess_in_ball, minimize, minimize_in_ball, mountain_pass, CriticalPointResult,
};
use gasket_core::{Error, ProblemInstance, Result};

#[derive(Parser)]
#[command(
    name = "gasket-vp",
    version,
    about = "Variational problems on Sierpinski gasket prefractals"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory for outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the level-m prefractal graph and write its description.
    Gasket {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        level: u32,
        /// Write the stiffness matrix as (row, col, value) triplets to this path.
        #[arg(long, value_name = "PATH")]
        dump_stiffness: Option<PathBuf>,
    },
    /// Sample the structural hypotheses on the configured problem.
    CheckAssumptions {
        /// Points per sampled interval.
        #[arg(long, default_value_t = 201)]
        grid: usize,
        /// Half-width of the interval sampled for the growth condition.
        #[arg(long, default_value_t = 10.0)]
        v_max: f64,
    },
    /// Find a critical point.
    Solve(SolveArgs),
    /// Brute-force critical points on a box (a few unknowns only).
    Oracle {
        #[arg(long = "box", num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
        bounds: Option<Vec<f64>>,
        /// Grid points per axis.
        #[arg(long)]
        res: Option<usize>,
    },
    /// Parametric convergence sweep over a problem sequence.
    Sweep {
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        delta: Option<f64>,
        #[arg(long)]
        nmax: Option<usize>,
        #[arg(long)]
        solver: Option<String>,
        /// Also write `n, distance, value_gap` for plotting.
        #[arg(long)]
        plot_data: bool,
    },
    /// Collate the tables of a sweep directory into one CSV.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(value_enum)]
    method: Method,
    /// Ball radius; `M1 / (2N + 3)` by default.
    #[arg(long)]
    r: Option<f64>,
    /// Far endpoint for the mountain pass: a solution file or `auto`.
    #[arg(long, default_value = "auto")]
    xstar: String,
    /// Starting field for `min` (a solution file).
    #[arg(long)]
    start: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Min,
    Ball,
    Mpa,
    Double,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotConverged(_)
            | Error::Unbounded { .. }
            | Error::PathCollapse { .. }
            | Error::Numerical(_) => 2,
            _ => 1,
        };
        let message = match &e {
            Error::Validation(v) => format!("invalid configuration:\n  {}", v.join("\n  ")),
            other => other.to_string(),
        };
        Failure { code, message }
    }
}

type Outcome = std::result::Result<u8, Failure>;

struct Run {
    dir: PathBuf,
    verbose: bool,
    command: String,
    hash: String,
    seed: u64,
    clock: Instant,
}

impl Run {
    fn new(dir: PathBuf, verbose: bool, command: &str, config: Option<&RunConfig>) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        let (hash, seed) = match config {
            Some(c) => {
                std::fs::write(dir.join("config.json"), c.to_json()?)?;
                (c.hash()?, c.seed)
            }
            None => (String::new(), 0),
        };
        Ok(Self {
            dir,
            verbose,
            command: command.into(),
            hash,
            seed,
            clock: Instant::now(),
        })
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!(
                "[{:8.3}s] {}",
                self.clock.elapsed().as_secs_f64(),
                msg.as_ref()
            );
        }
    }

    fn write(&self, name: &str, text: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text)?;
        self.log(format!("wrote {}", path.display()));
        Ok(())
    }

    fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.write(name, serde_json::to_string_pretty(value)?)
    }

    fn meta(&self, producer: &str) -> SolutionMeta {
        SolutionMeta::new(self.hash.clone(), self.seed, producer)
    }

    fn save_result(
        &self,
        problem: &ProblemInstance,
        name: &str,
        res: &CriticalPointResult,
    ) -> Result<()> {
        let sol = SolutionFile::from_result(problem, res, self.meta(name))?;
        io::persist_result(&sol, &self.dir, name)?;
        self.write(&format!("{name}_trace.csv"), res.trace_csv())
    }

    /// Wall-clock data lives here only, so every other file is reproducible.
    fn finish(&self, exit_code: u8) -> Result<()> {
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64() - self.clock.elapsed().as_secs_f64())
            .unwrap_or(0.0);
        self.write_json(
            "run.json",
            &json!({
                "format_version": 1,
                "command": self.command,
                "config_hash": self.hash,
                "seed": self.seed,
                "crate_version": env!("CARGO_PKG_VERSION"),
                "started_unix_seconds": started,
                "elapsed_seconds": self.clock.elapsed().as_secs_f64(),
                "exit_code": exit_code,
            }),
        )
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("this command needs --config <file>".into()))?;
    let config = io::parse_config_file(path)?;
    Ok(match cli.seed {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn out_dir(cli: &Cli, config: Option<&RunConfig>, command: &str) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.and_then(|c| c.output.as_ref().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("runs").join(command))
}

fn status_code(res: &CriticalPointResult) -> u8 {
    if res.converged() {
        0
    } else {
        2
    }
}

fn summarize(label: &str, res: &CriticalPointResult) {
    println!(
        "{label}: J = {:.12e}, |J'| = {:.3e}, iterations = {}, status = {:?}, classification = {:?}",
        res.value, res.dual_grad_norm, res.iterations, res.status, res.classification
    );
}

fn cmd_gasket(cli: &Cli, n: usize, level: u32, dump_stiffness: Option<&Path>) -> Outcome {
    let graph = PrefractalGraph::build(n, level)?;
    let summary = graph.summary();
    println!(
        "N = {n}, level = {level}: {} vertices, {} edges, {} cells, {} interior",
        summary.vertices, summary.edges, summary.cells, summary.interior
    );
    if let Some(dir) = cli.out.clone() {
        let run = Run::new(dir, cli.verbose, "gasket", None)?;
        run.write_json("graph_summary.json", &summary)?;
        run.write_json("graph.json", &graph.export())?;
        run.finish(0)?;
    }
    if let Some(path) = dump_stiffness {
        let form = gasket_core::DiscreteForm::new(std::sync::Arc::new(graph))?;
        let mut buf = Vec::new();
        form.stiffness()
            .write_triplets(&mut buf)
            .map_err(Error::from)?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(Error::from)?;
        }
        std::fs::write(path, buf).map_err(Error::from)?;
    }
    Ok(0)
}

fn prepare(cli: &Cli, command: &str) -> Result<(RunConfig, ProblemInstance, Run)> {
    let config = load_config(cli)?;
    let problem = config.build_problem()?;
    let run = Run::new(
        out_dir(cli, Some(&config), command),
        cli.verbose,
        command,
        Some(&config),
    )?;
    run.write_json("graph_summary.json", &problem.graph().summary())?;
    run.log(format!(
        "problem with {} unknowns, config hash {}",
        problem.dofs(),
        run.hash
    ));
    Ok((config, problem, run))
}

fn cmd_check(cli: &Cli, grid: usize, v_max: f64) -> Outcome {
    let (_, problem, run) = prepare(cli, "check-assumptions")?;
    let report = check_assumptions(
        &problem,
        SamplingGrid {
            points: grid,
            v_max,
        },
    );
    run.write_json("assumptions.json", &report)?;
    let mut code = 0;
    for e in &report.entries {
        println!(
            "{:4} {:?}: {} ({} violations)",
            e.name, e.status, e.checked, e.violations
        );
        if e.status == Status::Fail {
            code = 1;
        }
    }
    run.finish(code)?;
    Ok(code)
}

fn cmd_solve(cli: &Cli, args: &SolveArgs) -> Outcome {
    let (config, problem, run) = prepare(cli, "solve")?;
    let opts = &config.solver;
    let r = args
        .r
        .or(config.r)
        .unwrap_or_else(|| default_radius(&problem));
    let code = match args.method {
        Method::Min => {
            let start = match &args.start {
                Some(path) => io::load_field(path, problem.graph())?,
                None => initial_guess_in_ball(&problem, r, 64, opts.seed)?,
            };
            let res = minimize(&problem, opts, &start)?;
            summarize("minimizer", &res);
            run.save_result(&problem, "solution", &res)?;
            status_code(&res)
        }
        Method::Ball => {
            let res = minimize_in_ball(&problem, r, opts)?;
            summarize("ball minimizer", &res);
            run.save_result(&problem, "solution", &res)?;
            status_code(&res)
        }
        Method::Mpa => {
            let x_star = if args.xstar == "auto" {
                let geo = geometry_probe(&problem, r, &config.probe)?;
                run.write_json("geometry.json", &geo)?;
                geo.x_star.ok_or_else(|| {
                    Error::Precondition("geometry probe found no x_star with J(x_star) < 0".into())
                })?
            } else {
                io::load_field(Path::new(&args.xstar), problem.graph())?
            };
            let res = mountain_pass(&problem, &x_star, opts)?;
            summarize("mountain pass", &res);
            run.save_result(&problem, "solution", &res)?;
            status_code(&res)
        }
        Method::Double => {
            let x_star = if args.xstar == "auto" {
                None
            } else {
                Some(io::load_field(Path::new(&args.xstar), problem.graph())?)
            };
            let dc = double_critical_points(&problem, r, x_star.as_ref(), &config.probe, opts)?;
            summarize("minimizer", &dc.minimizer);
            summarize("saddle", &dc.saddle);
            println!(
                "distance = {:.6e}, distinct = {}, nontrivial = {}",
                dc.distance, dc.distinct, dc.nontrivial
            );
            run.save_result(&problem, "minimizer", &dc.minimizer)?;
            run.save_result(&problem, "saddle", &dc.saddle)?;
            run.write_json("geometry.json", &dc.geometry)?;
            run.write_json(
                "double.json",
                &json!({
                    "distance": dc.distance,
                    "distinct": dc.distinct,
                    "nontrivial": dc.nontrivial,
                }),
            )?;
            status_code(&dc.minimizer).max(status_code(&dc.saddle))
        }
    };
    run.finish(code)?;
    Ok(code)
}

fn cmd_oracle(cli: &Cli, bounds: Option<&[f64]>, res: Option<usize>) -> Outcome {
    let (config, problem, run) = prepare(cli, "oracle")?;
    let mut opts = config.oracle.clone();
    if let Some(b) = bounds {
        opts.lo = b[0];
        opts.hi = b[1];
    }
    if let Some(k) = res {
        opts.resolution = k;
    }
    let points = brute_force_critical_points(&problem, &opts)?;
    for (k, p) in points.iter().enumerate() {
        summarize(&format!("critical point {k}"), p);
    }
    run.write_json("oracle_options.json", &opts)?;
    run.write_json("oracle.json", &points)?;
    run.finish(0)?;
    Ok(0)
}

fn cmd_sweep(
    cli: &Cli,
    schedule: Option<&str>,
    delta: Option<f64>,
    nmax: Option<usize>,
    solver: Option<&str>,
    plot_data: bool,
) -> Outcome {
    let mut config = load_config(cli)?;
    if let Some(s) = schedule {
        config.harness.schedule = ScheduleKind::parse(s)?;
    }
    if let Some(d) = delta {
        config.harness.delta = d;
    }
    if let Some(n) = nmax {
        config.harness.n_max = n;
    }
    if let Some(s) = solver {
        config.harness.solver = s.parse::<SolverKind>()?;
    }
    let seq = config.build_sequence()?;
    let run = Run::new(
        out_dir(cli, Some(&config), "sweep"),
        cli.verbose,
        "sweep",
        Some(&config),
    )?;
    run.write_json("graph_summary.json", &seq.base().graph().summary())?;
    run.log(format!(
        "sweep {:?} with delta {} over n = 1..{} using {}",
        config.harness.schedule, config.harness.delta, config.harness.n_max, config.harness.solver
    ));
    let mut opts = config.experiment_options();
    opts.r = config.r;
    let table = run_convergence_experiment(&seq, config.harness.solver, &opts)?;
    run.write(io::TABLE_FILE, table.to_csv()?)?;
    run.write_json("table.json", &table)?;
    if plot_data {
        run.write("plot_data.csv", table.plot_data_csv()?)?;
    }
    for row in &table.rows {
        println!(
            "n = {:3}  distance = {:.6e}  value_gap = {:.6e}  status = {}",
            row.n, row.distance, row.value_gap, row.status
        );
    }
    println!(
        "final distance {:.6e} (tolerance {:.1e}): {}",
        table.final_distance,
        table.tolerance,
        if table.final_within_tolerance {
            "within"
        } else {
            "outside"
        }
    );
    let code = if table.rows.iter().all(|r| r.status == "converged") {
        0
    } else {
        2
    };
    run.finish(code)?;
    Ok(code)
}

fn cmd_report(cli: &Cli, dir: &Path) -> Outcome {
    let csv = io::collate_sweep(dir)?;
    match &cli.out {
        Some(out) => {
            std::fs::create_dir_all(out).map_err(Error::from)?;
            std::fs::write(out.join("report.csv"), csv).map_err(Error::from)?;
        }
        None => print!("{csv}"),
    }
    Ok(0)
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Gasket {
            n,
            level,
            dump_stiffness,
        } => cmd_gasket(cli, *n, *level, dump_stiffness.as_deref()),
        Command::CheckAssumptions { grid, v_max } => cmd_check(cli, *grid, *v_max),
        Command::Solve(args) => cmd_solve(cli, args),
        Command::Oracle { bounds, res } => cmd_oracle(cli, bounds.as_deref(), *res),
        Command::Sweep {
            schedule,
            delta,
            nmax,
            solver,
            plot_data,
        } => cmd_sweep(
            cli,
            schedule.as_deref(),
            *delta,
            *nmax,
            solver.as_deref(),
            *plot_data,
        ),
        Command::Report { dir } => cmd_report(cli, dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
