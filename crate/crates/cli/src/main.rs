//! `rko-route`: instance tooling, solvers, QUBO utilities and benchmarks.
//!
//! Exit status is 0 on success, 1 when the input or configuration is invalid
//! and 2 when a run fails after validation.

mod artifacts;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rko_route::bench::{self, SolverSpec, SweepInstance};
use rko_route::brkga::{self, BrkgaParams};
use rko_route::danneal::{self, DaParams};
use rko_route::greedy::{self, GreedyParams};
use rko_route::instance::{generate_synthetic, DimSizes, GeneratorParams};
use rko_route::qubo::{self, QuboDecode, QuboSaParams};
use rko_route::rko::{self, encode_tour, fitness, load_pool, save_pool, CostMode};
use rko_route::{Chromosome, Instance};

use artifacts::{read_endpoint, read_params, write_json, TourFile};

const WORKERS_ENV: &str = "RKO_ROUTE_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "rko-route", version, about = "Random-key optimization for robot trajectory sequencing")]
struct Cli {
    /// Overrides the seed of every solver and generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the number of worker threads (overridden by RKO_ROUTE_WORKERS).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic instance.
    Gen(GenArgs),
    /// Keep a random subset of seams.
    Downsample(DownsampleArgs),
    /// Solve an instance and write tour.json and trace.csv.
    Solve(SolveArgs),
    /// Scan the segment between two solutions.
    Relink(RelinkArgs),
    /// QUBO tooling.
    #[command(subcommand)]
    Qubo(QuboCommand),
    /// Time-to-target runs.
    Ttt(TttArgs),
    /// Run every solver on every instance for every seed.
    Sweep(SweepArgs),
    /// Build a comparison table from sweep.csv.
    Table(TableArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 10)]
    seams: usize,
    /// Feature cardinalities as directions,tools,configs,positions.
    #[arg(long, default_value = "2,2,2,2", value_parser = parse_dims)]
    dims: DimSizes,
    #[arg(long, default_value_t = 0.8)]
    rate: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the planted feasible tour.
    #[arg(long)]
    witness: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DownsampleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    keep: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SolverKind {
    Greedy,
    Brkga,
    Da,
    QuboSa,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, value_enum)]
    solver: SolverKind,
    #[arg(long)]
    instance: PathBuf,
    /// Flat TOML file with solver hyperparameters.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Greedy shot count, overriding the parameter file.
    #[arg(long)]
    shots: Option<usize>,
    /// Warm-start pool (JSON array of chromosomes).
    #[arg(long)]
    warmstart: Option<PathBuf>,
    /// Greedy only: write the best shots as a warm-start pool.
    #[arg(long)]
    pool_out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pool_size: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RelinkArgs {
    #[arg(long)]
    instance: PathBuf,
    /// First endpoint: tour.json or chromosome JSON.
    #[arg(long)]
    a: PathBuf,
    /// Second endpoint: tour.json or chromosome JSON.
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 11)]
    grid: usize,
    /// Directory for tour.json and chromosome.json of the best point.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum QuboCommand {
    /// Print the qubit count 2 n^2 t c p.
    Estimate(EstimateArgs),
    /// Write the sparse QUBO file of an instance.
    Build(BuildArgs),
    /// Anneal a QUBO and decode the result.
    SolveSa(QuboSolveArgs),
    /// Exhaustively minimize a small QUBO.
    Brute(QuboSolveArgs),
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    seams: u64,
    #[arg(long, default_value_t = 1)]
    tools: u64,
    #[arg(long, default_value_t = 1)]
    config: u64,
    #[arg(long, default_value_t = 1)]
    position: u64,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Penalty weight; defaults to 2 n_seams max_cost.
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long, default_value_t = qubo::DEFAULT_VAR_CAP)]
    cap: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct QuboSolveArgs {
    /// Instance used to build the QUBO and decode the result.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Prebuilt QUBO file; decoding still needs --instance.
    #[arg(long)]
    qubo: Option<PathBuf>,
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long, default_value_t = qubo::DEFAULT_VAR_CAP)]
    cap: usize,
    /// Annealer parameters (TOML); ignored by brute.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    sweeps: Option<usize>,
    /// Directory for tour.json when the result is feasible.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TttArgs {
    #[arg(long, value_enum)]
    solver: SolverKind,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    params: Option<PathBuf>,
    /// Comma-separated target costs.
    #[arg(long, value_delimiter = ',', required = true)]
    targets: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    shots: usize,
    #[arg(long, default_value = "ttt.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Instance files; each file stem becomes a label.
    #[arg(long, num_args = 1..)]
    instances: Vec<PathBuf>,
    /// Base instance to downsample into a family instead.
    #[arg(long, conflicts_with = "instances")]
    family: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "10,20,30")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "greedy,brkga,da")]
    solvers: Vec<SolverKind>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long)]
    greedy_params: Option<PathBuf>,
    #[arg(long)]
    brkga_params: Option<PathBuf>,
    #[arg(long)]
    da_params: Option<PathBuf>,
    #[arg(long)]
    qubo_sa_params: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[arg(long)]
    sweep: PathBuf,
    #[arg(long, default_value = "table.md")]
    out: PathBuf,
}

fn parse_dims(s: &str) -> Result<DimSizes, String> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let arr: [u32; 4] = parts.try_into().map_err(|_| "expected four comma-separated values".to_string())?;
    if arr.contains(&0) {
        return Err("cardinalities must be >= 1".into());
    }
    Ok(DimSizes::from_array(arr))
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 2, error }
    }
}

impl From<rko_route::Error> for Failure {
    fn from(error: rko_route::Error) -> Self {
        Failure { code: 2, error: error.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(error: std::io::Error) -> Self {
        Failure { code: 2, error: error.into() }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Marks an error as caused by invalid input.
trait Invalid<T> {
    fn invalid(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Invalid<T> for Result<T, E> {
    fn invalid(self) -> CliResult<T> {
        self.map_err(|e| Failure { code: 1, error: e.into() })
    }
}

fn invalid(msg: impl std::fmt::Display) -> Failure {
    Failure { code: 1, error: anyhow!("{msg}") }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let workers = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|e| invalid(format!("{WORKERS_ENV}={v:?}: {e}")))?),
        Err(_) => cli.workers,
    };
    if let Some(n) = workers {
        if n == 0 {
            return Err(invalid("worker count must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring workers")?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Gen(a) => cmd_gen(a, seed),
        Command::Downsample(a) => cmd_downsample(a, seed),
        Command::Solve(a) => cmd_solve(a, seed),
        Command::Relink(a) => cmd_relink(a),
        Command::Qubo(q) => match q {
            QuboCommand::Estimate(a) => cmd_estimate(a),
            QuboCommand::Build(a) => cmd_qubo_build(a),
            QuboCommand::SolveSa(a) => cmd_qubo_solve(a, seed, false),
            QuboCommand::Brute(a) => cmd_qubo_solve(a, seed, true),
        },
        Command::Ttt(a) => cmd_ttt(a, seed),
        Command::Sweep(a) => cmd_sweep(a, seed),
        Command::Table(a) => cmd_table(a),
    }
}

fn load_instance(path: &Path) -> CliResult<Instance> {
    Instance::load(path).with_context(|| format!("loading instance {}", path.display())).invalid()
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn cmd_gen(a: GenArgs, seed: Option<u64>) -> CliResult {
    let params = GeneratorParams {
        n_seams: a.seams,
        dims: a.dims,
        feasibility_rate: a.rate,
        cost_scale: a.scale,
        seed: seed.unwrap_or(0),
    };
    let synth = generate_synthetic(&params).invalid()?;
    synth.instance.save(&a.out)?;
    if let Some(path) = a.witness {
        let tour = rko::Tour::from_nodes(synth.witness, &synth.instance, CostMode::HomeAnchored);
        write_json(&path, &TourFile::from_tour(&tour, &synth.instance))?;
    }
    println!("wrote {} ({} seams, {} edges)", a.out.display(), synth.instance.n_seams(), synth.instance.num_edges());
    Ok(())
}

fn cmd_downsample(a: DownsampleArgs, seed: Option<u64>) -> CliResult {
    let inst = load_instance(&a.instance)?;
    let small = inst.downsample(a.keep, seed.unwrap_or(0)).invalid()?;
    small.save(&a.out)?;
    println!("wrote {} ({} seams)", a.out.display(), small.n_seams());
    Ok(())
}

fn solver_spec(kind: SolverKind, params: Option<&Path>, seed: Option<u64>) -> CliResult<SolverSpec> {
    let spec = match kind {
        SolverKind::Greedy => {
            let p: GreedyParams = read_params(params).invalid()?;
            p.validate().invalid()?;
            SolverSpec::Greedy(p)
        }
        SolverKind::Brkga => {
            let p: BrkgaParams = read_params(params).invalid()?;
            p.validate().invalid()?;
            SolverSpec::Brkga(p)
        }
        SolverKind::Da => {
            let p: DaParams = read_params(params).invalid()?;
            p.validate().invalid()?;
            SolverSpec::Da(p)
        }
        SolverKind::QuboSa => SolverSpec::QuboSa(read_params(params).invalid()?),
    };
    Ok(match seed {
        Some(s) => spec.with_seed(s),
        None => spec,
    })
}

fn cmd_solve(a: SolveArgs, seed: Option<u64>) -> CliResult {
    let inst = load_instance(&a.instance)?;
    let mut spec = solver_spec(a.solver, a.params.as_deref(), seed)?;
    if let (Some(shots), SolverSpec::Greedy(p)) = (a.shots, &mut spec) {
        if shots == 0 {
            return Err(invalid("--shots must be >= 1"));
        }
        p.shots = shots;
    }
    let pool = match &a.warmstart {
        Some(path) => {
            let pool = load_pool(path).with_context(|| format!("loading pool {}", path.display())).invalid()?;
            if let Some(bad) = pool.iter().find(|c| c.len() != rko::KEY_BLOCKS * inst.n_seams()) {
                return Err(invalid(format!("pool chromosome has {} keys, instance needs {}", bad.len(), rko::KEY_BLOCKS * inst.n_seams())));
            }
            pool
        }
        None => Vec::new(),
    };
    if a.pool_out.is_some() && a.solver != SolverKind::Greedy {
        return Err(invalid("--pool-out is only supported with --solver greedy"));
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let trace_path = a.out.join("trace.csv");

    let (tour, chromosome) = match &spec {
        SolverSpec::Greedy(p) => {
            let out = greedy::multi_shot_greedy(&inst, p)?;
            out.write_histogram(create(&trace_path)?)?;
            write_json(&a.out.join("summary.json"), &out.summary())?;
            if let Some(path) = &a.pool_out {
                let mut order: Vec<usize> = (0..out.costs.len()).collect();
                order.sort_by(|&x, &y| out.costs[x].total_cmp(&out.costs[y]).then(x.cmp(&y)));
                let pool: Vec<Chromosome> = order
                    .into_iter()
                    .take(a.pool_size)
                    .map(|shot| encode_tour(&greedy::shot_tour(&inst, p.seed, shot).nodes, &inst, None))
                    .collect::<Result<_, _>>()?;
                save_pool(path, &pool)?;
            }
            let chrom = encode_tour(&out.best.nodes, &inst, None)?;
            (out.best, chrom)
        }
        SolverSpec::Brkga(p) => {
            let out = brkga::run(&inst, p, &pool)?;
            let mut w = create(&trace_path)?;
            writeln!(w, "generation,best_cost,wall_seconds")?;
            writeln!(w, "0,{},0", out.initial_best)?;
            for h in &out.history {
                writeln!(w, "{},{},{}", h.generation, h.best_cost, h.wall_seconds)?;
            }
            w.flush()?;
            (out.best.tour, out.best.chromosome)
        }
        SolverSpec::Da(p) => {
            let warm = pool.iter().min_by(|x, y| fitness(x, &inst).total_cmp(&fitness(y, &inst)));
            let out = danneal::run(&inst, p, warm)?;
            let mut w = create(&trace_path)?;
            writeln!(w, "iteration,temperature,current_cost,incumbent_cost")?;
            for r in &out.trace {
                writeln!(w, "{},{},{},{}", r.iteration, r.temperature, r.current_cost, r.incumbent_cost)?;
            }
            w.flush()?;
            (out.best.tour, out.best.chromosome)
        }
        SolverSpec::QuboSa(p) => {
            let problem = qubo::build_qubo(&inst, qubo::default_penalty(&inst), qubo::DEFAULT_VAR_CAP).invalid()?;
            let (x, energy) = qubo::solve_sa(&problem.qubo, p)?;
            let mut w = create(&trace_path)?;
            writeln!(w, "sweeps,energy\n{},{}", p.sweeps, energy)?;
            w.flush()?;
            match qubo::decode_qubo_solution(&x, &problem, &inst)? {
                QuboDecode::Tour(t) => {
                    let tour = rko::Tour::from_nodes(t.nodes, &inst, CostMode::HomeAnchored);
                    let chrom = encode_tour(&tour.nodes, &inst, None)?;
                    (tour, chrom)
                }
                QuboDecode::Infeasible(r) => return Err(anyhow!("annealed assignment is infeasible: {r}").into()),
            }
        }
    };
    write_json(&a.out.join("tour.json"), &TourFile::from_tour(&tour, &inst))?;
    write_json(&a.out.join("chromosome.json"), &chromosome)?;
    println!("solver={} cost={} feasible={}", spec.id(), tour.total_cost, tour.feasible);
    Ok(())
}

fn cmd_relink(a: RelinkArgs) -> CliResult {
    let inst = load_instance(&a.instance)?;
    let x1 = read_endpoint(&a.a, &inst).invalid()?;
    let x2 = read_endpoint(&a.b, &inst).invalid()?;
    let grid = rko::uniform_grid(a.grid).invalid()?;
    let res = rko::path_relink(&x1, &x2, &grid, &inst)?;
    for (alpha, cost) in &res.scan {
        println!("alpha={alpha} cost={cost}");
    }
    println!("best alpha={} cost={}", res.alpha, res.cost);
    if let Some(dir) = a.out {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join("tour.json"), &TourFile::from_tour(&res.tour, &inst))?;
        write_json(&dir.join("chromosome.json"), &res.chromosome)?;
    }
    Ok(())
}

fn cmd_estimate(a: EstimateArgs) -> CliResult {
    let n = qubo::qubit_count_estimate(a.seams, a.tools, a.config, a.position).invalid()?;
    println!("{n}");
    Ok(())
}

fn cmd_qubo_build(a: BuildArgs) -> CliResult {
    let inst = load_instance(&a.instance)?;
    let penalty = a.penalty.unwrap_or_else(|| qubo::default_penalty(&inst));
    let problem = qubo::build_qubo(&inst, penalty, a.cap).invalid()?;
    problem.qubo.save(&a.out)?;
    println!("wrote {} ({} variables, penalty {penalty})", a.out.display(), problem.n_vars());
    Ok(())
}

fn cmd_qubo_solve(a: QuboSolveArgs, seed: Option<u64>, brute: bool) -> CliResult {
    let inst = a.instance.as_deref().map(load_instance).transpose()?;
    let problem = match &inst {
        Some(inst) => {
            let penalty = a.penalty.unwrap_or_else(|| qubo::default_penalty(inst));
            Some(qubo::build_qubo(inst, penalty, a.cap).invalid()?)
        }
        None => None,
    };
    let matrix = match (&a.qubo, &problem) {
        (Some(path), _) => {
            let q = qubo::Qubo::load(path).with_context(|| format!("loading {}", path.display())).invalid()?;
            if let Some(p) = &problem {
                if p.n_vars() != q.n_vars() {
                    return Err(invalid(format!("QUBO has {} variables, instance needs {}", q.n_vars(), p.n_vars())));
                }
            }
            q
        }
        (None, Some(p)) => p.qubo.clone(),
        (None, None) => return Err(invalid("either --instance or --qubo is required")),
    };
    let (x, energy) = if brute {
        qubo::brute_force(&matrix).invalid()?
    } else {
        let mut params: QuboSaParams = read_params(a.params.as_deref()).invalid()?;
        if let Some(s) = seed {
            params.seed = s;
        }
        if let Some(s) = a.sweeps {
            params.sweeps = s;
        }
        qubo::solve_sa(&matrix, &params)?
    };
    println!("energy={energy}");
    let bits: String = x.iter().map(|&b| if b { '1' } else { '0' }).collect();
    println!("assignment={bits}");
    let (Some(inst), Some(problem)) = (&inst, &problem) else { return Ok(()) };
    match qubo::decode_qubo_solution(&x, problem, inst)? {
        QuboDecode::Tour(t) => {
            println!("feasible cyclic_cost={}", t.total_cost);
            if let Some(dir) = a.out {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                write_json(&dir.join("tour.json"), &TourFile::from_tour(&t, inst))?;
            }
        }
        QuboDecode::Infeasible(r) => println!("infeasible: {r}"),
    }
    Ok(())
}

fn cmd_ttt(a: TttArgs, seed: Option<u64>) -> CliResult {
    let inst = load_instance(&a.instance)?;
    let spec = solver_spec(a.solver, a.params.as_deref(), None)?;
    if !spec.has_trace() {
        return Err(invalid(format!("solver {} does not record an improvement trace", spec.id())));
    }
    if a.shots == 0 {
        return Err(invalid("--shots must be >= 1"));
    }
    let res = bench::run_ttt(&spec, &inst, &a.targets, a.shots, seed.unwrap_or(0))?;
    bench::write_ttt_csv(&res.cdf, create(&a.out)?)?;
    for &t in &a.targets {
        let hits = res.records.iter().filter(|r| r.target == t && r.hit).count();
        println!("target={t} hits={hits}/{}", a.shots);
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, seed: Option<u64>) -> CliResult {
    let instances = match &a.family {
        Some(base) => {
            let base = load_instance(base)?;
            bench::downsample_family(&base, &a.sizes, a.samples, seed.unwrap_or(0)).invalid()?
        }
        None => {
            if a.instances.is_empty() {
                return Err(invalid("either --instances or --family is required"));
            }
            a.instances
                .iter()
                .map(|p| {
                    let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    Ok(SweepInstance { label, instance: load_instance(p)? })
                })
                .collect::<CliResult<Vec<_>>>()?
        }
    };
    let mut solvers = Vec::new();
    for kind in &a.solvers {
        let params = match kind {
            SolverKind::Greedy => a.greedy_params.as_deref(),
            SolverKind::Brkga => a.brkga_params.as_deref(),
            SolverKind::Da => a.da_params.as_deref(),
            SolverKind::QuboSa => a.qubo_sa_params.as_deref(),
        };
        solvers.push(solver_spec(*kind, params, None)?);
    }
    let rows = bench::run_sweep(&instances, &solvers, &a.seeds);
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    bench::write_sweep_csv(&rows, create(&a.out.join("sweep.csv"))?)?;
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("cell {} {} seed {} failed: {}", r.instance, r.solver, r.seed, r.error.as_deref().unwrap_or(""));
    }
    if let Ok(table) = bench::compare_table(&rows) {
        std::fs::write(a.out.join("table.md"), table.to_markdown())?;
    }
    println!("{} cells, {} failed", rows.len(), rows.iter().filter(|r| r.error.is_some()).count());
    Ok(())
}

fn cmd_table(a: TableArgs) -> CliResult {
    let file = File::open(&a.sweep).with_context(|| format!("opening {}", a.sweep.display())).invalid()?;
    let rows = bench::read_sweep_csv(file).invalid()?;
    let table = bench::compare_table(&rows).invalid()?;
    let md = table.to_markdown();
    std::fs::write(&a.out, &md).with_context(|| format!("writing {}", a.out.display()))?;
    print!("{md}");
    Ok(())
}
