//! `turn`: compile, run, check, resume and disassemble Turn programs.

mod driver;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use turn_core::actors::{RunOutcome, RunReport, Runtime, RuntimeConfig};
use turn_core::compiler::{compile_source, disassemble, CompileError, Program};
use turn_core::durable::{resume_with_result, DurableError, FileStore};
use turn_core::experiments;
use turn_core::host::Host;
use turn_core::schema::FileFetcher;
use turn_core::vm::Value;

const EXIT_FAULT: u8 = 1;
const EXIT_COMPILE: u8 = 2;

#[derive(Parser)]
#[command(name = "turn", version, about = "The Turn language toolchain")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Inference driver: `mock`, `mock:SEED`, `reference`, or a JSON file
    /// (a list is a mock script, an object a driver config).
    #[arg(long, global = true, env = "TURN_DRIVER")]
    driver: Option<String>,

    /// Snapshot directory (default `.turn_store`).
    #[arg(long, global = true, env = "TURN_STORE_DIR")]
    store_dir: Option<PathBuf>,

    /// Scheduler threads; 1 is deterministic.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,

    /// Print the disassembly to stderr before running.
    #[arg(long, global = true)]
    emit_bytecode: bool,

    /// Allow `use schema` to fetch http(s) URLs at compile time.
    #[arg(long, global = true)]
    allow_net: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Compile and run a program.
    Run { path: PathBuf },
    /// Compile without running.
    Check { path: PathBuf },
    /// Continue a suspended program.
    Resume { id: String },
    /// Run the E1-E5 experiment suites.
    Experiments,
    /// Print the bytecode of a program.
    Disasm { path: PathBuf },
}

/// A failure that ends the command with an exit code.
struct Exit(u8);

fn fail(code: u8, msg: impl std::fmt::Display) -> Exit {
    eprintln!("{msg}");
    Exit(code)
}

impl Cli {
    fn store(&self) -> FileStore {
        match &self.store_dir {
            Some(dir) => FileStore::new(dir),
            None => FileStore::from_env(),
        }
    }

    fn compile(&self, path: &Path) -> Result<Program, Exit> {
        let source =
            std::fs::read_to_string(path).map_err(|e| fail(EXIT_FAULT, format!("error: {}: {e}", path.display())))?;
        let fetcher = FileFetcher {
            base_dir: path.parent().map(Path::to_path_buf),
            allow_net: self.allow_net,
        };
        compile_source(&source, "main", &fetcher).map_err(|e| compile_error(path, &e))
    }

    fn runtime(&self, program: Program, source_path: &Path) -> Result<Runtime, Exit> {
        let host = Arc::new(Host::from_process_env());
        let provider = driver::resolve(self.driver.as_deref(), Arc::clone(&host))
            .map_err(|e| fail(EXIT_FAULT, format!("error: {e}")))?;
        let config = RuntimeConfig {
            workers: self.workers as usize,
            stream_echo: true,
            store: Some(self.store()),
            source_path: Some(
                std::fs::canonicalize(source_path)
                    .unwrap_or_else(|_| source_path.to_path_buf())
                    .display()
                    .to_string(),
            ),
            ..RuntimeConfig::default()
        };
        Ok(Runtime::new(Arc::new(program), host, provider, config))
    }

    fn execute(&self) -> Result<(), Exit> {
        match &self.command {
            Command::Run { path } => {
                let program = self.compile(path)?;
                if self.emit_bytecode {
                    eprint!("{}", disassemble(&program));
                }
                let rt = self.runtime(program, path)?;
                finish(rt.run())
            }
            Command::Check { path } => {
                let program = self.compile(path)?;
                println!(
                    "ok: {} ({} chunks, {} structs)",
                    path.display(),
                    program.chunks.len(),
                    program.structs.len()
                );
                Ok(())
            }
            Command::Disasm { path } => {
                print!("{}", disassemble(&self.compile(path)?));
                Ok(())
            }
            Command::Resume { id } => {
                let snapshot = self.store().load(id).map_err(|e| durable_error(&e))?;
                let Some(source) = snapshot.source_path.clone() else {
                    return Err(fail(EXIT_FAULT, "StoreIoError: snapshot does not name its source file"));
                };
                let path = PathBuf::from(source);
                let rt = self.runtime(self.compile(&path)?, &path)?;
                let state = resume_with_result(&snapshot, Value::Null, rt.registry(), &rt.chunk_hash())
                    .map_err(|e| durable_error(&e))?;
                finish(rt.run_process(state))
            }
            Command::Experiments => {
                let report = experiments::run_all();
                print!("{report}");
                if report.all_passed() {
                    Ok(())
                } else {
                    Err(Exit(EXIT_FAULT))
                }
            }
        }
    }
}

fn compile_error(path: &Path, e: &CompileError) -> Exit {
    match e.line() {
        Some(line) => fail(EXIT_COMPILE, format!("{}:{line}: error: {e}", path.display())),
        None => fail(EXIT_COMPILE, format!("{}: error: {e}", path.display())),
    }
}

fn durable_error(e: &DurableError) -> Exit {
    let kind = match e {
        DurableError::ChunkMismatch { .. } => "ChunkMismatchError",
        _ => "StoreIoError",
    };
    fail(EXIT_FAULT, format!("{kind}: {e}"))
}

fn finish(report: RunReport) -> Result<(), Exit> {
    match report.outcome {
        RunOutcome::Completed(_) => Ok(()),
        RunOutcome::Suspended { id: Some(id), .. } => {
            println!("suspended {id}");
            Ok(())
        }
        RunOutcome::Suspended { id: None, .. } => Err(fail(EXIT_FAULT, "StoreIoError: no snapshot store")),
        RunOutcome::Faulted { message, line, .. } => Err(fail(EXIT_FAULT, format!("fault at line {line}: {message}"))),
        RunOutcome::Deadlocked { blocked } => {
            let who: Vec<String> = blocked.iter().map(|(pid, r)| format!("{pid} {}", r.name())).collect();
            Err(fail(
                EXIT_FAULT,
                format!("DeadlockFault: every process is blocked ({})", who.join(", ")),
            ))
        }
        RunOutcome::StoreFailed(e) => Err(fail(EXIT_FAULT, format!("StoreIoError: {e}"))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code)) => ExitCode::from(code),
    }
}
