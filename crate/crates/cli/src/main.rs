mod args;
mod bench;
mod record;

use std::fs;
use std::io::{self, Write};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use hallar::Status;

use args::{BenchArgs, Cli, Command, GenerateArgs, SolveArgs, SolverArgs};

/// Failures that map to distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    NoInput(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::NoInput(_) => 66,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 74,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::NoInput(m) | CliError::Numerical(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<hallar::Error> for CliError {
    fn from(e: hallar::Error) -> Self {
        match e {
            hallar::Error::Io(_) => CliError::NoInput(e.to_string()),
            hallar::Error::NonFinite(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Optimal => 0,
        Status::IterationLimit | Status::TimeLimit => 2,
        Status::NumericalFailure => 3,
    }
}

fn write_out(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn setup_threads(s: &SolverArgs) -> Result<(), CliError> {
    if let Some(t) = s.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure threads: {e}")))?;
    }
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Result<i32, CliError> {
    setup_threads(&a.solver)?;
    let spec = a.problem.instance_spec()?;
    let cfg = a.solver.config(spec.seed().unwrap_or(a.problem.seed));
    cfg.validate()?;
    let built = spec.build()?;
    log::info!("{} {}: n = {}, m = {}", spec.family(), spec.dims(), built.instance.n(), built.instance.m());
    let (rec, _) = record::run(&spec, &built, &cfg)?;
    let r = &rec.report;
    eprintln!(
        "{}: pval {:.8} dval {:.8} pfeas {:.2e} gap {:.2e} dfeas {:.2e} rank {} in {:.3} s",
        r.status.as_str(),
        r.pval,
        r.dval,
        r.rel_pfeas,
        r.rel_gap,
        r.rel_dfeas,
        r.rank,
        r.wall_seconds
    );
    let json = serde_json::to_string_pretty(&rec).expect("record serializes");
    match &a.json_out {
        Some(p) => write_out(p, &json)?,
        None => println!("{json}"),
    }
    Ok(exit_code(r.status))
}

fn cmd_generate(a: GenerateArgs) -> Result<i32, CliError> {
    let spec = a.problem.instance_spec()?;
    let built = spec.build()?;
    let inst = &built.instance;
    let mut text = spec.to_config();
    text += &format!("# n = {}\n# m = {}\n# b_sha256 = {}\n", inst.n(), inst.m(), record::b_hash(inst));
    if let hallar::instances::Hidden::Theta(g) = &built.hidden {
        text += &format!("# vertices = {}\n# edges = {}\n", g.n(), g.num_edges());
    }
    write_out(&a.out, &text)?;
    let mut line = format!("{} {}: n = {}, m = {}", spec.family(), spec.dims(), inst.n(), inst.m());
    if let hallar::instances::Hidden::Theta(g) = &built.hidden {
        line += &format!(", vertices = {}, edges = {}", g.n(), g.num_edges());
    }
    println!("{line}");
    Ok(0)
}

fn cmd_bench(a: BenchArgs) -> Result<i32, CliError> {
    setup_threads(&a.solver)?;
    let text = fs::read_to_string(&a.sweep)
        .map_err(|e| CliError::NoInput(format!("cannot read {}: {e}", a.sweep.display())))?;
    let rows = bench::parse_sweep(&text)?;
    if rows.is_empty() {
        return Err(CliError::Usage(format!("{} lists no instances", a.sweep.display())));
    }
    let base = a.solver.config(0);
    base.validate()?;
    let clock = Instant::now();
    let outcomes = bench::run_rows(rows, &base, a.parallel_rows);
    let total = clock.elapsed().as_secs_f64();
    let io_err = |e: io::Error| CliError::Io(e.to_string());
    match &a.csv {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?;
            bench::write_csv(f, &outcomes).map_err(|e| CliError::Io(e.to_string()))?;
            bench::write_table(io::stdout().lock(), &outcomes, total).map_err(io_err)?;
        }
        None => {
            bench::write_csv(io::stdout().lock(), &outcomes).map_err(|e| CliError::Io(e.to_string()))?;
            bench::write_table(io::stderr().lock(), &outcomes, total).map_err(io_err)?;
        }
    }
    if let Some(p) = &a.json_out {
        let records: Vec<_> = outcomes.iter().filter_map(|o| o.result.as_ref().ok()).collect();
        write_out(p, &serde_json::to_string_pretty(&records).expect("records serialize"))?;
    }
    Ok(outcomes.iter().map(bench::Outcome::code).max().unwrap_or(0))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    let code = match result {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            if e.code() == 64 {
                eprintln!("run `hallar --help` for usage");
            }
            e.code()
        }
    };
    let _ = io::stdout().flush();
    ExitCode::from(code as u8)
}
