use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qlsp_core::ansatz::{AnsatzCircuit, AnsatzFamily, DEFAULT_INIT_SIGMA};
use qlsp_core::cost::CostTermTable;
use qlsp_core::problems::{self, LinearProblem, Stencil};
use qlsp_core::shadow::{default_batches, shadow_size, BinnedShadow, PauliEstimator};
use qlsp_core::solver::{self, EpsSchedule, EvalMode, Optimizer, SolveResult, SolverConfig, Terminator};
use qlsp_core::vqls::{circuits_per_step_preprocessed, circuits_per_step_sqls, circuits_per_step_vqls, CountMode};
use qlsp_core::{ComplexMatrix, Error, PauliString, StateVector};

#[derive(Parser, Debug)]
#[command(name = "qlsp", version, about = "Shadow-based variational linear-system solver")]
struct Cli {
    /// Base seed; repetition r uses seed + r.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Use the literal unmerged term tables.
    #[arg(long, global = true)]
    no_preprocess: bool,
    /// Exact expectation values instead of shadows.
    #[arg(long, global = true)]
    exact: bool,
    /// Schedule imaginary-part Hadamard tests even when they cannot contribute.
    #[arg(long, global = true)]
    paranoid: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run seeded solves of a benchmark system.
    Solve(SolveArgs),
    /// Circuit-count curves for the Hadamard-test and shadow estimators.
    Resources(ResourceArgs),
    /// Empirical shadow error against the sample-size formula.
    ShadowBench(BenchArgs),
    /// Four-unitary split and Pauli decomposition of a dense matrix.
    Decompose(DecomposeArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// iqlsp, rqlsp1, rqlsp2, pgls, laplace4, laplace16, identity, ising, random.
    #[arg(long, default_value = "iqlsp", conflicts_with = "problem_dir")]
    problem: String,
    /// Directory holding A.pauli, U.pauli and meta.json.
    #[arg(long)]
    problem_dir: Option<PathBuf>,
    #[arg(long, default_value = "banded")]
    stencil: String,
    /// hwe or real; defaults per problem.
    #[arg(long)]
    ansatz: Option<String>,
    #[arg(long, default_value_t = 4)]
    layers: usize,
    /// adam or powell; defaults per problem.
    #[arg(long)]
    optimizer: Option<String>,
    /// Trace-distance threshold (or the eps of the gamma terminator).
    #[arg(long)]
    eps: Option<f64>,
    /// Shadow precision, either `0.01` or `ITER:EPS,...`.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long, value_enum, default_value_t = TermKind::TraceDistance)]
    terminator: TermKind,
    /// Gradient source when shadows drive the cost.
    #[arg(long, value_enum)]
    gradient: Option<Mode>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,
    #[arg(long)]
    max_evaluations: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0.001)]
    lr_floor: f64,
    #[arg(long, default_value_t = 1.0)]
    shadow_constant: f64,
    #[arg(long, default_value_t = DEFAULT_INIT_SIGMA)]
    init_sigma: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TermKind {
    TraceDistance,
    Gamma,
    Plateau,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Shadow,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Sweep {
    /// Dense L grid at fixed width.
    Scaling,
    /// Random k-local systems with pre-processed tables.
    Random,
    /// One row for the given L.
    Point,
}

#[derive(Args, Debug)]
struct ResourceArgs {
    #[arg(long, value_enum, default_value_t = Sweep::Scaling)]
    sweep: Sweep,
    /// Register width; 50 for `scaling`/`point`, 10 for `random`.
    #[arg(long, short = 'n')]
    qubits: Option<u64>,
    /// Number of terms for `point`.
    #[arg(long, short = 'l', default_value_t = 4)]
    terms: u64,
    /// Comma-separated term counts for `scaling` and `random`.
    #[arg(long)]
    l_list: Option<String>,
    #[arg(long, short = 'k', default_value_t = 2)]
    locality: u32,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    shots: u64,
    /// Systems per L in the `random` sweep.
    #[arg(long, default_value_t = 30)]
    systems: usize,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, short = 'n', default_value_t = 4)]
    qubits: usize,
    #[arg(long, short = 'k', default_value_t = 2)]
    locality: usize,
    /// Observables per trial.
    #[arg(long, short = 'm', default_value_t = 50)]
    observables: usize,
    #[arg(long, default_value = "0.2,0.1,0.05")]
    eps_list: String,
    #[arg(long, default_value_t = 20)]
    states: usize,
    #[arg(long, default_value_t = 1.0)]
    constant: f64,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    /// Dense matrix file: `dim`, then row-major `re im` pairs.
    #[arg(long, required_unless_present = "grid")]
    input: Option<PathBuf>,
    /// Use the scaled Laplace stencil on a SIDE×SIDE grid instead of a file.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value = "banded")]
    stencil: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match &cli.command {
        Command::Solve(a) => cmd_solve(&cli, a),
        Command::Resources(a) => cmd_resources(&cli, a),
        Command::ShadowBench(a) => cmd_shadow_bench(&cli, a),
        Command::Decompose(a) => cmd_decompose(&cli, a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn write(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}

struct Defaults {
    family: AnsatzFamily,
    optimizer: Optimizer,
    eps: f64,
    schedule: &'static str,
}

fn defaults(name: &str) -> Defaults {
    let (family, optimizer, eps, schedule) = match name {
        "iqlsp" => (AnsatzFamily::RealAmplitude, Optimizer::Powell, 0.01, "0.01"),
        "rqlsp1" => (AnsatzFamily::HardwareEfficient, Optimizer::Adam, 0.1, "0.01"),
        "rqlsp2" => (AnsatzFamily::HardwareEfficient, Optimizer::Adam, 0.05, "0.01"),
        // fidelity 0.98
        "laplace16" => (AnsatzFamily::RealAmplitude, Optimizer::Adam, 0.02f64.sqrt(), "0:0.1,250:0.01"),
        _ => (AnsatzFamily::RealAmplitude, Optimizer::Adam, 0.01, "0.01"),
    };
    Defaults {
        family,
        optimizer,
        eps,
        schedule,
    }
}

fn cmd_solve(cli: &Cli, a: &SolveArgs) -> CliResult {
    if a.reps == 0 {
        return Err("--reps must be at least 1".into());
    }
    let stencil: Stencil = a.stencil.parse()?;
    let problem = match &a.problem_dir {
        Some(dir) => LinearProblem::read_dir(dir)?,
        None => problems::by_name(&a.problem, stencil, cli.seed)?,
    };
    for v in problem.invariant_violations() {
        eprintln!("warning: {}: {v}", problem.label());
    }
    let d = defaults(if a.problem_dir.is_some() { "" } else { &a.problem });
    let family = match &a.ansatz {
        Some(s) => s.parse()?,
        None => d.family,
    };
    let optimizer = match &a.optimizer {
        Some(s) => s.parse()?,
        None => d.optimizer,
    };
    let eps = a.eps.unwrap_or(d.eps);
    let schedule: EpsSchedule = a.schedule.as_deref().unwrap_or(d.schedule).parse()?;
    let cost_mode = if cli.exact { EvalMode::Exact } else { EvalMode::Shadow };
    let gradient_mode = match a.gradient {
        Some(Mode::Exact) => EvalMode::Exact,
        Some(Mode::Shadow) => EvalMode::Shadow,
        None => cost_mode,
    };
    let termination = match a.terminator {
        TermKind::TraceDistance => Terminator::TraceDistance { eps },
        TermKind::Gamma => Terminator::Gamma {
            eps,
            kappa: problem.kappa(),
        },
        TermKind::Plateau => Terminator::CostPlateau { window: 100, rel: 1e-3 },
    };
    let base = SolverConfig {
        optimizer,
        schedule,
        shadow_constant: a.shadow_constant,
        learning_rate: a.lr,
        lr_floor: a.lr_floor,
        max_iterations: a.max_iterations,
        max_evaluations: a.max_evaluations,
        termination,
        cost_mode,
        gradient_mode,
        preprocess: !cli.no_preprocess,
        init_sigma: a.init_sigma,
        seed: cli.seed,
        ..SolverConfig::default()
    };
    base.validate()?;
    let circuit = AnsatzCircuit::new(family, problem.num_qubits(), a.layers)?;
    let table = solver::cost_table(&problem, base.preprocess)?;
    let obs = table.observables();

    let root = cli.out.join(problem.label());
    fs::create_dir_all(&root)?;
    problem.write_dir(&root.join("problem"))?;
    write(&root.join("config.json"), &serde_json::to_string_pretty(&base)?)?;

    let results: Vec<(usize, Result<SolveResult, Error>)> = (0..a.reps)
        .into_par_iter()
        .map(|r| {
            let cfg = SolverConfig {
                seed: cli.seed.wrapping_add(r as u64),
                ..base.clone()
            };
            (r, solver::solve_with(&problem, &circuit, &cfg, &obs))
        })
        .collect();

    let mut summary = csv::Writer::from_path(root.join("summary.csv"))?;
    summary.write_record(["run", "evaluations", "converged", "final_td", "final_fid"])?;
    let mut converged = 0;
    for (r, res) in results {
        let res = res?;
        let dir = root.join(format!("run_{r}"));
        fs::create_dir_all(&dir)?;
        write(&dir.join("trace.csv"), &res.trace_csv())?;
        write(&dir.join("solution.csv"), &res.state.to_csv())?;
        let mut json = res.summary_json();
        json["seed"] = serde_json::json!(cli.seed.wrapping_add(r as u64));
        write(&dir.join("result.json"), &serde_json::to_string_pretty(&json)?)?;
        summary.write_record([
            r.to_string(),
            res.evaluations.to_string(),
            res.converged.to_string(),
            format!("{:?}", res.trace_distance_final),
            format!("{:?}", res.fidelity_final),
        ])?;
        converged += usize::from(res.converged);
        println!(
            "run {r}: converged={} evaluations={} td={:.5} fidelity={:.5}{}",
            res.converged,
            res.evaluations,
            res.trace_distance_final,
            res.fidelity_final,
            res.failure.map(|f| format!(" ({f})")).unwrap_or_default()
        );
    }
    summary.flush()?;
    println!("{converged}/{} runs converged; results in {}", a.reps, root.display());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("bad list entry {p:?}: {e}")))
        .collect()
}

fn cmd_resources(cli: &Cli, a: &ResourceArgs) -> CliResult {
    fs::create_dir_all(&cli.out)?;
    let path = cli.out.join("resources.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["L", "k", "vqls", "sqls", "vqls_pp", "sqls_pp"])?;
    let k = a.locality;
    let ls: Vec<u64> = match (a.sweep, &a.l_list) {
        (Sweep::Point, _) => vec![a.terms],
        (_, Some(list)) => parse_list(list)?,
        (Sweep::Scaling, None) => vec![4, 10, 25, 50, 100, 250, 500, 1000, 2500],
        (Sweep::Random, None) => vec![4, 10, 20, 40, 60, 80, 100],
    };
    let qubits = a.qubits.unwrap_or(if a.sweep == Sweep::Random { 10 } else { 50 });
    match a.sweep {
        Sweep::Scaling | Sweep::Point => {
            for &l in &ls {
                w.write_record([
                    l.to_string(),
                    k.to_string(),
                    circuits_per_step_vqls(l, qubits, a.shots).to_string(),
                    circuits_per_step_sqls(l, qubits, k, a.eps)?.to_string(),
                    String::new(),
                    String::new(),
                ])?;
            }
        }
        Sweep::Random => {
            let n = qubits as usize;
            let u = problems::hadamard_layer(n, &(0..n).collect::<Vec<_>>())?;
            let rows: Vec<Result<[String; 6], Error>> = ls
                .iter()
                .flat_map(|&l| (0..a.systems).map(move |s| (l, s)))
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|(l, s)| {
                    let mut rng = solver::stream_rng(cli.seed, l * 1_000_003 + s as u64);
                    let sys = problems::random_pauli_sum(n, l as usize, k as usize, &mut rng)?;
                    let table = if cli.no_preprocess {
                        CostTermTable::build(&sys, &u)?
                    } else {
                        CostTermTable::build_preprocessed(&sys, &u, qlsp_core::cost::PREPROCESS_TOL)?
                    };
                    let n_pp = table.n_pp() as u64;
                    Ok([
                        l.to_string(),
                        k.to_string(),
                        circuits_per_step_vqls(l, qubits, a.shots).to_string(),
                        circuits_per_step_sqls(l, qubits, k, a.eps)?.to_string(),
                        circuits_per_step_preprocessed(n_pp, CountMode::Hadamard { shots: a.shots })?.to_string(),
                        circuits_per_step_preprocessed(n_pp, CountMode::Shadow { k, eps: a.eps })?.to_string(),
                    ])
                })
                .collect();
            for row in rows {
                w.write_record(row?)?;
            }
        }
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_shadow_bench(cli: &Cli, a: &BenchArgs) -> CliResult {
    let eps_list: Vec<f64> = parse_list(&a.eps_list)?;
    if a.states == 0 || a.observables == 0 {
        return Err("--states and --observables must be positive".into());
    }
    fs::create_dir_all(&cli.out)?;
    let path = cli.out.join("shadow_bench.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["M", "k", "eps", "budget", "empirical_err"])?;
    let identity = PauliString::identity(a.qubits);
    for (i, &eps) in eps_list.iter().enumerate() {
        let m = a.observables.max(2);
        let budget = shadow_size(m, a.locality, eps, a.constant)?;
        let batches = default_batches(m);
        // median over states of the worst error across the M observables
        let mut errs: Vec<f64> = (0..a.states)
            .into_par_iter()
            .map(|s| -> Result<f64, Error> {
                let mut rng = solver::stream_rng(cli.seed, (i * a.states + s) as u64);
                let state = StateVector::random(a.qubits, &mut rng)?;
                let strings = problems::random_pauli_sum(a.qubits, a.observables, a.locality, &mut rng)?;
                let shadow = BinnedShadow::sample(&state, budget, batches, &mut rng)?;
                let mut worst: f64 = 0.0;
                for (_, p) in strings.terms() {
                    worst = worst.max((shadow.estimate(p)? - state.expectation(p)?).abs());
                }
                Ok(worst)
            })
            .collect::<Result<_, _>>()?;
        errs.sort_by(f64::total_cmp);
        let median = errs[errs.len() / 2];
        if i == 0 {
            let state = StateVector::random(a.qubits, &mut ChaCha8Rng::seed_from_u64(cli.seed))?;
            let shadow = BinnedShadow::sample(&state, budget, batches, &mut ChaCha8Rng::seed_from_u64(cli.seed))?;
            let err = (shadow.estimate(&identity)? - 1.0).abs();
            w.write_record(["1".into(), "0".into(), format!("{eps}"), budget.to_string(), format!("{err:?}")])?;
        }
        w.write_record([
            a.observables.to_string(),
            a.locality.to_string(),
            format!("{eps}"),
            budget.to_string(),
            format!("{median:?}"),
        ])?;
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_decompose(cli: &Cli, a: &DecomposeArgs) -> CliResult {
    let m = match (&a.input, a.grid) {
        (_, Some(side)) => {
            let stencil: Stencil = a.stencil.parse()?;
            problems::stencil_matrix(side, stencil).scale(problems::grid_scale(side).into())
        }
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ComplexMatrix::parse_text(&text)?
        }
        (None, None) => return Err("either --input or --grid is required".into()),
    };
    let split = problems::unitary_split(&m)?;
    let pauli = problems::decompose_via_split(&m)?;
    fs::create_dir_all(&cli.out)?;
    for (name, f) in ["U_B", "V_B", "U_C", "V_C"].iter().zip(split.factors()) {
        write(&cli.out.join(format!("{name}.pauli")), &qlsp_core::decompose_dense(f)?.to_text())?;
    }
    write(&cli.out.join("A.pauli"), &pauli.to_text())?;

    let split_residual = split.reconstruct().max_abs_diff(&m);
    let pauli_residual = pauli.to_dense()?.max_abs_diff(&m);
    let unitarity = split
        .factors()
        .iter()
        .map(|f| f.unitarity_error())
        .fold(0.0, f64::max);
    let report = format!(
        "dim {}\nterms {}\nsplit_residual {split_residual:e}\npauli_residual {pauli_residual:e}\nmax_unitarity_error {unitarity:e}\n",
        m.dim(),
        pauli.len()
    );
    write(&cli.out.join("residual.txt"), &report)?;
    print!("{report}");
    Ok(())
}
