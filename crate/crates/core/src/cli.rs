//! Command-line front end. Results go to stdout or `--out`, diagnostics to
//! stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::certify::{Certifier, SUITE_NAMES};
use crate::config::SolverConfig;
use crate::error::Error;
use crate::io::{heat_default_nodes, heat_demo, heat_shift_for_abscissa, load_problem, write_problem, Mode, ProblemFile};
use crate::lyapunov::LyapunovMethod;
use crate::pipeline::{solve_problem, stability_check};
use crate::riccati::{IterationTrace, Mutation};

pub const EXIT_OK: u8 = 0;
pub const EXIT_SOLVER: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_CERTIFY: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "kleinman", version, about = "Newton-Kleinman Riccati solver with self-certification")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Relative residual tolerance.
    #[arg(long = "tol", global = true, default_value_t = 1e-10)]
    pub tol: f64,
    /// Relative step tolerance.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub step_tol: f64,
    /// Monotonicity slack relative to 1 + |P_1|_2.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub mon_tol: f64,
    #[arg(long, global = true, default_value_t = 60)]
    pub max_iter: usize,
    /// Lyapunov solver.
    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Schur)]
    pub method: MethodArg,
    /// Compare every iterate with the Hamiltonian oracle.
    #[arg(long, global = true)]
    pub oracle: bool,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the result JSON here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write the iteration trace as CSV.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    #[arg(long, global = true, hide = true, value_enum, default_value_t = MutationArg::None)]
    pub mutate: MutationArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Schur,
    Kron,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MutationArg {
    None,
    FlipQuadraticSign,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the problem file in its declared mode (Riccati by default).
    Solve { file: PathBuf },
    /// Solve a lyapunov-mode problem file.
    Lyapunov { file: PathBuf },
    /// Solve a sqrt-mode problem file.
    Sqrt { file: PathBuf },
    /// Spectral abscissa, Datko integrals and the Wonham equivalence for `A`.
    StabilityCheck { file: PathBuf },
    /// Generate and solve a bundled demo.
    Demo {
        #[command(subcommand)]
        demo: Demo,
    },
    /// Run the self-certification suites.
    Certify {
        /// `all` or a comma-separated list of suite numbers 1-11.
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Run the bundled problem corpus and compare exit codes.
    Bench {
        /// Corpus directory holding `corpus.json`.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum Demo {
    /// Destabilized heat equation with one actuator and one sensor.
    Heat {
        #[arg(long, default_value_t = 32)]
        n: usize,
        /// Reaction coefficient; defaults to the value giving open-loop abscissa +5.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        /// Also write the generated problem file.
        #[arg(long)]
        problem_out: Option<PathBuf>,
    },
}

impl GlobalOpts {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            rel_tol: self.tol,
            step_tol: self.step_tol,
            mon_tol: self.mon_tol,
            max_iter: self.max_iter,
            method: match self.method {
                MethodArg::Schur => LyapunovMethod::Schur,
                MethodArg::Kron => LyapunovMethod::Kron,
            },
            oracle: self.oracle,
            seed: self.seed,
        }
    }

    fn mutation(&self) -> Mutation {
        match self.mutate {
            MutationArg::None => Mutation::None,
            MutationArg::FlipQuadraticSign => Mutation::FlipQuadraticSign,
        }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_input_error() { EXIT_INPUT } else { EXIT_SOLVER };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| input(format!("io error: {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(file: &Path, expected: Option<Mode>) -> Result<ProblemFile, Failure> {
    let problem = load_problem(file).map_err(|e| input(format!("{}: {e}", file.display())))?;
    if let Some(mode) = expected {
        if problem.mode != mode {
            return Err(input(format!(
                "{}: file declares mode \"{}\", expected \"{}\"",
                file.display(),
                problem.mode.as_str(),
                mode.as_str()
            )));
        }
    }
    Ok(problem)
}

fn solve_and_emit(problem: &ProblemFile, opts: &GlobalOpts) -> Result<(), Failure> {
    let cfg = opts.config();
    let result = solve_problem(problem, &cfg)?;
    if let Some(path) = &opts.trace {
        let trace = IterationTrace {
            rows: result.trace.clone(),
            iterates: Vec::new(),
        };
        std::fs::write(path, trace.to_csv()).map_err(|e| input(format!("io error: {}: {e}", path.display())))?;
    }
    eprintln!(
        "{}: residual {:.3e} (relative {:.3e}), {} iterations, closed-loop abscissa {:.6}",
        problem.name.as_deref().unwrap_or(problem.mode.as_str()),
        result.residual,
        result.relative_residual,
        result.iterations,
        result.closed_loop_abscissa
    );
    emit(&result.to_json(), opts.out.as_deref())
}

fn parse_suites(spec: &str) -> Result<Vec<usize>, Failure> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok((1..=SUITE_NAMES.len()).collect());
    }
    spec.split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(id) if (1..=SUITE_NAMES.len()).contains(&id) => Ok(id),
            _ => Err(input(format!("unknown suite \"{}\" (expected all or 1-11)", s.trim()))),
        })
        .collect()
}

fn certify(suite: &str, opts: &GlobalOpts) -> Result<u8, Failure> {
    let ids = parse_suites(suite)?;
    let certifier = Certifier::with_mutation(opts.seed, opts.mutation());
    let mut report = String::new();
    let mut failed = 0;
    for id in ids.iter().copied() {
        let r = certifier.run(id)?;
        eprint!("{r}");
        if !r.passed() {
            failed += 1;
        }
        report.push_str(&format!(
            "{:>2}  {:<26} {}\n",
            r.id,
            r.name,
            if r.passed() { "PASS" } else { "FAIL" }
        ));
    }
    report.push_str(&format!("{} of {} suites passed\n", ids.len() - failed, ids.len()));
    emit(&report, opts.out.as_deref())?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_CERTIFY })
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct CorpusEntry {
    file: String,
    expected_exit: u8,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Corpus {
    problems: Vec<CorpusEntry>,
}

/// Exit code the `solve` command would give for a problem file.
fn run_file(path: &Path, cfg: &SolverConfig) -> (u8, String) {
    let problem = match load_problem(path) {
        Ok(p) => p,
        Err(e) => return (EXIT_INPUT, e.to_string()),
    };
    match solve_problem(&problem, cfg) {
        Ok(r) => (
            EXIT_OK,
            format!(
                "{:<9} residual {:.2e}  relative {:.2e}  iterations {:>2}  abscissa {:.4}",
                problem.mode.as_str(),
                r.residual,
                r.relative_residual,
                r.iterations,
                r.closed_loop_abscissa
            ),
        ),
        Err(e) => (Failure::from(e.clone()).code, e.to_string()),
    }
}

pub fn default_corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("problems")
}

fn bench(dir: Option<&Path>, opts: &GlobalOpts) -> Result<u8, Failure> {
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(default_corpus_dir);
    let manifest = dir.join("corpus.json");
    let text = std::fs::read_to_string(&manifest).map_err(|e| input(format!("io error: {}: {e}", manifest.display())))?;
    let corpus: Corpus =
        serde_json::from_str(&text).map_err(|e| input(format!("ParseError: {}: {e}", manifest.display())))?;
    let cfg = opts.config();
    cfg.validate()?;
    let mut table = String::new();
    let mut mismatches = 0;
    for entry in &corpus.problems {
        let start = std::time::Instant::now();
        let (code, detail) = run_file(&dir.join(&entry.file), &cfg);
        let ok = code == entry.expected_exit;
        if !ok {
            mismatches += 1;
        }
        table.push_str(&format!(
            "{:<28} exit {} (expected {}) {:>4}  {:>8.3} s  {detail}\n",
            entry.file,
            code,
            entry.expected_exit,
            if ok { "ok" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        ));
    }
    table.push_str(&format!(
        "{} of {} problems ended with their documented exit code\n",
        corpus.problems.len() - mismatches,
        corpus.problems.len()
    ));
    emit(&table, opts.out.as_deref())?;
    Ok(if mismatches == 0 { EXIT_OK } else { EXIT_CERTIFY })
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    let opts = &cli.global;
    opts.config().validate().map_err(|e| input(e.to_string()))?;
    match &cli.command {
        Command::Solve { file } => solve_and_emit(&load(file, None)?, opts)?,
        Command::Lyapunov { file } => solve_and_emit(&load(file, Some(Mode::Lyapunov))?, opts)?,
        Command::Sqrt { file } => solve_and_emit(&load(file, Some(Mode::Sqrt))?, opts)?,
        Command::StabilityCheck { file } => {
            let report = stability_check(&load(file, None)?)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            emit(&text, opts.out.as_deref())?;
        }
        Command::Demo {
            demo: Demo::Heat { n, c, nu, problem_out },
        } => {
            let c = c.unwrap_or_else(|| heat_shift_for_abscissa(*n, *nu, 5.0));
            let (act, sen) = heat_default_nodes(*n);
            let sys = heat_demo(*n, c, *nu, &act, &sen).map_err(|e| input(e.to_string()))?;
            let problem = ProblemFile::riccati(Some(format!("heat-n{n}")), &sys);
            if let Some(path) = problem_out {
                write_problem(path, &problem)?;
            }
            solve_and_emit(&problem, opts)?;
        }
        Command::Certify { suite } => return certify(suite, opts),
        Command::Bench { dir } => return bench(dir.as_deref(), opts),
    }
    Ok(EXIT_OK)
}

/// Parses the arguments, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK });
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
