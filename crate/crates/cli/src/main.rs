use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nepv::dense::{extract_with, Diagnose, ExtractOptions};
use nepv::invit::{hybrid_solve, hybrid_solve_with, ii_solve, ii_solve_with, resolve_path, HybridConfig, IiConfig, IiPath};
use nepv::opdet::{build_deltas_with_cap, DeltaSystem, DEFAULT_MEMORY_CAP};
use nepv::problems::{gen_pde, gen_random, random_start, PdeSpec};
use nepv::resinv::{ri_solve, ris_solve, RiConfig};
use nepv::{build_mep, count_solutions, random_g, Classification, MepProblem, NepvError, C64};
use nepv_cli::io::{self, FileError, ProblemFile};
use nepv_cli::report::{history_csv, RunReport, Timings};
use serde_json::json;

/// g seed used when neither the file nor `--g-seed` supplies g.
const DEFAULT_G_SEED: u64 = 1;

#[derive(Parser)]
#[command(name = "nepv", version, about = "Solve eigenvector-nonlinear eigenvalue problems (A + λB + Σ fᵢ(x)Cᵢ)x = 0")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated problem file
    #[command(subcommand)]
    Gen(GenKind),
    /// Enumerate all solutions through the dense operator-determinant path
    SolveAll(SolveAllArgs),
    /// Run one iterative solver from a shift and a starting vector
    Iterate(IterateArgs),
    /// Print the generic number of solutions for (n, m)
    Count {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// Real standard-normal data
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout if absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference boundary value problem on [-1, 1]
    Pde {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 10.0)]
        gamma: f64,
        /// Seed of the stored g vector
        #[arg(long, default_value_t = DEFAULT_G_SEED)]
        g_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveAllArgs {
    problem: PathBuf,
    /// Draw g from this seed instead of the file
    #[arg(long)]
    g_seed: Option<u64>,
    /// Residual below which a symmetric eigenpair is accepted
    #[arg(long, default_value_t = nepv::problem::tol::ACCEPT)]
    tol: f64,
    /// Report path; stdout if absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ri,
    Ris,
    Ii,
    Hybrid,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Auto,
    Dense,
    Sylvester,
}

#[derive(Args)]
struct IterateArgs {
    problem: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Shift as `re,im` or `re`
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    sigma: C64,
    /// μ shifts for ri/ris, one `re,im` per term; defaults to fᵢ(x0)
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    tau: Vec<C64>,
    /// `random:SEED` or a JSON file holding a vector
    #[arg(long, default_value = "random:0")]
    x0: String,
    #[arg(long, default_value_t = 5)]
    k_switch: usize,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Inverse-iteration path
    #[arg(long, value_enum, default_value_t = PathArg::Auto)]
    ii_path: PathArg,
    #[arg(long)]
    g_seed: Option<u64>,
    /// CSV convergence history
    #[arg(long)]
    history: Option<PathBuf>,
    /// Report path; stdout if absent
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_complex(s: &str) -> Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
    let z = match parts.as_slice() {
        [re] => C64::new(num(re)?, 0.0),
        [re, im] => C64::new(num(re)?, num(im)?),
        _ => return Err(format!("expected `re,im`, got `{s}`")),
    };
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err("shift must be finite".into())
    }
}

enum Failure {
    Usage(String),
    File(FileError),
    Memory(NepvError),
    Solver(NepvError),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::File(_) => 3,
            Failure::Memory(_) => 4,
            Failure::Solver(_) => 5,
        }
    }
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        Failure::File(e)
    }
}

impl From<NepvError> for Failure {
    fn from(e: NepvError) -> Self {
        match e {
            NepvError::MemoryBudgetExceeded { .. } => Failure::Memory(e),
            e => Failure::Solver(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(kind) => cmd_gen(kind),
        Command::SolveAll(args) => cmd_solve_all(&args),
        Command::Iterate(args) => cmd_iterate(&args),
        Command::Count { n, m } => cmd_count(n, m),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::File(e) => eprintln!("error: {e}"),
                Failure::Memory(e) => eprintln!(
                    "error: {e}\nhint: the dense path stores n^(m+1) x n^(m+1) matrices; \
                     use `nepv iterate` (ris, or ii/hybrid with m = 1) or raise NEPV_MEMORY_CAP"
                ),
                Failure::Solver(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn emit(out: Option<&Path>, text: &str, summary: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            io::write_text(path, text)?;
            println!("{summary}");
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_count(n: usize, m: usize) -> Result<(), Failure> {
    if n == 0 || m == 0 {
        return Err(Failure::Usage("--n and --m must be positive".into()));
    }
    println!("{}", count_solutions(n, m)?);
    Ok(())
}

fn cmd_gen(kind: GenKind) -> Result<(), Failure> {
    let (pf, out) = match kind {
        GenKind::Random { n, m, seed, out } => {
            if n == 0 || m == 0 {
                return Err(Failure::Usage("--n and --m must be positive".into()));
            }
            let (problem, g) = gen_random(n, m, seed)?;
            (ProblemFile { problem, g: Some(g) }, out)
        }
        GenKind::Pde { n, gamma, g_seed, out } => {
            if n < 3 || !(gamma.is_finite() && gamma > 0.0) {
                return Err(Failure::Usage("pde needs --n ≥ 3 and a positive --gamma".into()));
            }
            let problem = gen_pde(&PdeSpec { gamma, ..PdeSpec::with_n(n) })?;
            let g = random_g(n, 1, g_seed);
            (ProblemFile { problem, g: Some(g) }, out)
        }
    };
    let count = count_solutions(pf.problem.n(), pf.problem.m())
        .map(|k| k.to_string())
        .unwrap_or_else(|_| "overflow".into());
    let text = io::render_problem(&pf);
    match out {
        Some(path) => {
            io::write_text(&path, &text)?;
            println!("N_s = {count}");
        }
        None => {
            print!("{text}");
            eprintln!("N_s = {count}");
        }
    }
    Ok(())
}

/// Builds the MEP, taking g from `--g-seed`, then the file, then the default seed.
fn linearize(pf: &ProblemFile, g_seed: Option<u64>) -> Result<(MepProblem, serde_json::Value), Failure> {
    let (n, m) = (pf.problem.n(), pf.problem.m());
    let (g, source) = match (g_seed, &pf.g) {
        (Some(seed), _) => (random_g(n, m, seed), json!({ "seed": seed })),
        (None, Some(g)) => (g.clone(), json!("file")),
        (None, None) => (random_g(n, m, DEFAULT_G_SEED), json!({ "seed": DEFAULT_G_SEED })),
    };
    let mep = build_mep(&pf.problem, &g).map_err(|e| match e {
        NepvError::InvalidG(_) => Failure::File(FileError::Field {
            field: "g".into(),
            message: e.to_string(),
        }),
        e => e.into(),
    })?;
    Ok((mep, source))
}

fn memory_cap() -> Result<u128, Failure> {
    match std::env::var("NEPV_MEMORY_CAP") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("NEPV_MEMORY_CAP must be an integer, got `{v}`"))),
        Err(_) => Ok(DEFAULT_MEMORY_CAP),
    }
}

fn deltas(mep: &MepProblem, timings: &mut Timings) -> Result<DeltaSystem, Failure> {
    let cap = memory_cap()?;
    Ok(timings.time("deltas", || build_deltas_with_cap(mep, cap))?)
}

fn cmd_solve_all(args: &SolveAllArgs) -> Result<(), Failure> {
    if !(args.tol > 0.0) {
        return Err(Failure::Usage("--tol must be positive".into()));
    }
    let mut timings = Timings::default();
    let pf = timings.time("read", || io::load_problem(&args.problem))?;
    let (mep, g_source) = linearize(&pf, args.g_seed)?;
    let ds = deltas(&mep, &mut timings)?;
    let opts = ExtractOptions {
        accept: args.tol,
        diagnose: Diagnose::Auto,
    };
    let sol = timings.time("solve", || extract_with(&pf.problem, &mep, &ds, &opts))?;
    let tally = |c: Classification| sol.records.iter().filter(|r| r.classification == c).count();
    let (t, sp, ns) = (
        tally(Classification::True),
        tally(Classification::Spurious),
        tally(Classification::NonSymmetric),
    );
    let (n, m) = (pf.problem.n(), pf.problem.m());
    let result = json!({
        "n": n,
        "m": m,
        "n_s": count_solutions(n, m).ok(),
        "gep_eigenvalues": sol.eigenpairs.len(),
        "delta0_condition": ds.cond(),
        "counts": { "true": t, "spurious": sp, "non_symmetric": ns },
        "records": sol.records,
    });
    let config = json!({ "problem": args.problem, "g": g_source, "tol": args.tol });
    let report = RunReport::new("solve-all", config, timings, result);
    let summary = format!(
        "{} eigenpairs: {t} true, {sp} spurious, {ns} non-symmetric",
        sol.eigenpairs.len()
    );
    emit(args.out.as_deref(), &report.to_json(), &summary)
}

fn start_vector(spec: &str, n: usize) -> Result<Vec<C64>, Failure> {
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed = seed
            .parse()
            .map_err(|_| Failure::Usage(format!("--x0 random:SEED needs an integer seed, got `{seed}`")))?;
        return Ok(random_start(n, seed));
    }
    let text = io::read_text(Path::new(spec))?;
    let x = io::parse_vector(&text, n)?;
    if x.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Err(Failure::File(FileError::Field {
            field: "(vector)".into(),
            message: "starting vector is zero".into(),
        }));
    }
    Ok(x)
}

fn cmd_iterate(args: &IterateArgs) -> Result<(), Failure> {
    if !(args.tol > 0.0) || args.max_iter == 0 {
        return Err(Failure::Usage("--tol and --max-iter must be positive".into()));
    }
    let mut timings = Timings::default();
    let pf = timings.time("read", || io::load_problem(&args.problem))?;
    let (n, m) = (pf.problem.n(), pf.problem.m());
    if !args.tau.is_empty() && args.tau.len() != m {
        return Err(Failure::Usage(format!("--tau needs {m} values, got {}", args.tau.len())));
    }
    let x0 = start_vector(&args.x0, n)?;
    let (mep, g_source) = linearize(&pf, args.g_seed)?;

    let path = match args.ii_path {
        PathArg::Auto => IiPath::Auto,
        PathArg::Dense => IiPath::Dense,
        PathArg::Sylvester => IiPath::Sylvester,
    };
    let mut ii = IiConfig::new(args.sigma, x0.clone());
    ii.max_iter = args.max_iter;
    ii.tol = args.tol;
    ii.path = path;
    let dense_ii = matches!(args.method, Method::Ii | Method::Hybrid) && resolve_path(&mep, path) == IiPath::Dense;
    let ds = if dense_ii { Some(deltas(&mep, &mut timings)?) } else { None };

    let ri_cfg = || {
        let mut cfg = RiConfig::new(args.sigma, x0.clone());
        cfg.tau = (!args.tau.is_empty()).then(|| args.tau.clone());
        cfg.max_iter = args.max_iter;
        cfg.tol = args.tol;
        cfg
    };
    let result = timings.time("solve", || match args.method {
        Method::Ri => ri_solve(&mep, &ri_cfg()),
        Method::Ris => ris_solve(&mep, &ri_cfg()),
        Method::Ii => match &ds {
            Some(ds) => ii_solve_with(&mep, ds, &ii),
            None => ii_solve(&mep, &ii),
        },
        Method::Hybrid => {
            let cfg = HybridConfig {
                ii: ii.clone(),
                k_switch: args.k_switch,
                ris_max_iter: args.max_iter,
                ris_tol: args.tol,
            };
            match &ds {
                Some(ds) => hybrid_solve_with(&mep, ds, &cfg),
                None => hybrid_solve(&mep, &cfg),
            }
        }
    })?;

    if let Some(path) = &args.history {
        let csv = history_csv(&result.history, m).map_err(|e| Failure::Usage(e.to_string()))?;
        io::write_text(path, &csv)?;
    }
    let method = match args.method {
        Method::Ri => "ri",
        Method::Ris => "ris",
        Method::Ii => "ii",
        Method::Hybrid => "hybrid",
    };
    let config = json!({
        "problem": args.problem,
        "method": method,
        "sigma": args.sigma,
        "tau": args.tau,
        "x0": args.x0,
        "g": g_source,
        "k_switch": matches!(args.method, Method::Hybrid).then_some(args.k_switch),
        "ii_path": matches!(args.method, Method::Ii | Method::Hybrid).then(|| format!("{:?}", resolve_path(&mep, path))),
        "max_iter": args.max_iter,
        "tol": args.tol,
    });
    let summary = format!(
        "converged={} lambda={} residual={:e} iterations={}",
        result.converged, result.lambda, result.residual, result.iterations
    );
    let report = RunReport::new(&format!("iterate-{method}"), config, timings, result);
    emit(args.out.as_deref(), &report.to_json(), &summary)
}
