use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use batchdb_bench::compare::compare_files;
use batchdb_bench::datagen::{generate, write_dir, Scale, BOOKSTORE_DDL};
use batchdb_bench::driver::{load_database, write_sweep};
use batchdb_bench::scenario::{check_users, run_users};
use batchdb_bench::{run, sweep, verify, ExecutorKind, VerifyOptions, WorkloadConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bench", about = "Load driver and oracle check for batchdb")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Offer the configured load and write metrics.csv and summary.toml.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        /// Overrides the executor named in the config.
        #[arg(long)]
        executor: Option<ExecutorKind>,
    },
    /// Check the shared engine against the query-at-a-time oracle.
    Verify {
        #[arg(long, required_unless_present = "scenario")]
        config: Option<PathBuf>,
        /// Disable the join's query-set intersection; verification must fail.
        #[arg(long)]
        inject_fault: bool,
        /// Run a scripted scenario instead (`users`).
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Compare two metrics CSVs, or two sweep CSVs.
    Compare { a: PathBuf, b: PathBuf },
    /// Time batches of k instances of one statement on one executor.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        statement: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64,128,256,512")]
        k: Vec<u64>,
        #[arg(long)]
        executor: Option<ExecutorKind>,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Generate the bookstore tables as CSV plus catalog.sql.
    Gen {
        #[arg(long, default_value_t = 1000)]
        scale: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { config, out, executor } => {
            let mut cfg = WorkloadConfig::load(&config)?;
            if let Some(e) = executor {
                cfg.executor = e;
            }
            let report = run(&cfg)?;
            report.write_dir(&out)?;
            for s in &report.statements {
                println!(
                    "{:<20} issued {:>7} ok-in-limit {:>7} {:>10.1} ops/s p50 {:>8.2} ms p99 {:>8.2} ms",
                    s.statement, s.issued, s.within_limit, s.throughput, s.p50_ms, s.p99_ms
                );
            }
            println!(
                "{}: {} cycles, mean cycle {:.2} ms; wrote {}",
                report.executor,
                report.cycles,
                report.mean_cycle_ms,
                out.display()
            );
            Ok(true)
        }
        Command::Verify {
            config,
            inject_fault,
            scenario,
        } => {
            if let Some(name) = scenario {
                anyhow::ensure!(name == "users", "unknown scenario {name}");
                let o = run_users()?;
                return Ok(match check_users(&o) {
                    Ok(()) => {
                        println!("users scenario: pass (membership {:?})", o.membership);
                        true
                    }
                    Err(e) => {
                        println!("users scenario: FAIL: {e}");
                        false
                    }
                });
            }
            let cfg = WorkloadConfig::load(&config.expect("required by clap"))?;
            let mut opts = VerifyOptions::from_config(&cfg);
            opts.fault = inject_fault;
            let report = verify(&cfg, &opts)?;
            match &report.repro {
                None => {
                    println!(
                        "pass: {} operations in {} cycles over {} seeds agree with the oracle",
                        report.checked, report.cycles, report.seeds
                    );
                    Ok(true)
                }
                Some(r) => {
                    print!("{r}");
                    Ok(false)
                }
            }
        }
        Command::Compare { a, b } => {
            print!("{}", compare_files(&a, &b)?);
            Ok(true)
        }
        Command::Sweep {
            config,
            statement,
            k,
            executor,
            out,
        } => {
            let cfg = WorkloadConfig::load(&config)?;
            let kind = executor.unwrap_or(cfg.executor);
            let points = sweep(&cfg, kind, &statement, &k, load_database(&cfg)?)?;
            for p in &points {
                println!("{:<16} k {:>5} {:>10.4} s work {}", p.executor, p.k, p.seconds, p.work);
            }
            write_sweep(&points, &out)?;
            Ok(true)
        }
        Command::Gen { scale, seed, out } => {
            let db = generate(Scale::users(scale), seed);
            write_dir(&db, BOOKSTORE_DDL, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} tables to {}", db.tables().len(), out.display());
            Ok(true)
        }
    }
}
