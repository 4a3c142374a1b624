use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use posrec::harness::{bench, run_plan, verify, BenchConfig, Database, FaultInjection, Query, RunOptions};
use posrec::storage::{load_csv, read_schema_file};
use posrec::{parse_plan, PosrecError, Result};
use posrec_core::datagen::GenConfig;
use posrec_core::plan::{Engine, Experiment, SeedPredicate};
use posrec_core::ColumnSource;

#[derive(Parser)]
#[command(name = "posrec", version, about = "Recursive queries over a position-enabled column store")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Balanced,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Trec,
    Prec,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Trec => Engine::Trec,
            EngineArg::Prec => Engine::Prec,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SeedArg {
    Id,
    From,
}

impl From<SeedArg> for SeedPredicate {
    fn from(s: SeedArg) -> Self {
        match s {
            SeedArg::Id => SeedPredicate::Id,
            SeedArg::From => SeedPredicate::From,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate edges.csv and schema.json.
    Gen {
        #[arg(long, default_value_t = 10)]
        fanout: u32,
        #[arg(long, default_value_t = 5)]
        height: u32,
        #[arg(long, default_value_t = 0)]
        payload: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "balanced")]
        mode: Mode,
        /// Node count for random trees.
        #[arg(long, default_value_t = 1000)]
        nodes: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a CSV file into column files.
    Load {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute a plan document and print the result rows as CSV.
    Run {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write run metrics as JSON here.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        cold: bool,
    },
    /// Compare an experiment query with the oracle.
    Verify {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        experiment: u8,
        #[arg(long, value_enum)]
        engine: EngineArg,
        #[arg(long)]
        depth: u32,
        #[arg(long, default_value_t = 0)]
        payload: usize,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "from")]
        seed_predicate: SeedArg,
        #[arg(long, default_value_t = posrec_core::DEFAULT_BLOCK_CAPACITY)]
        block_capacity: usize,
        /// Drop this many engine rows before comparing (checks the checker).
        #[arg(long, default_value_t = 0, hide = true)]
        inject_drop_rows: usize,
    },
    /// Time experiment sweeps and write a CSV report.
    Bench {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        experiment: u8,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "trec,prec")]
        engines: Vec<EngineArg>,
        /// Inclusive range `a..b` or a single depth.
        #[arg(long)]
        depths: String,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        payloads: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "from")]
        seed_predicate: SeedArg,
        #[arg(long)]
        cold: bool,
    },
}

fn parse_depths(s: &str) -> Result<Vec<u32>> {
    let bad = || PosrecError::Usage(format!("bad depth range `{s}`; expected `a..b` or `d`"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
    }
}

fn experiment(n: u8) -> Experiment {
    Experiment::from_number(n).expect("range checked by clap")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { fanout, height, payload, seed, mode, nodes, out } => {
            let cfg = match mode {
                Mode::Balanced => GenConfig::balanced(fanout, height, payload, seed),
                Mode::Random => GenConfig::random(nodes, payload, seed),
            };
            let summary = posrec::dataset::write_dataset(&cfg, &out)?;
            println!("{}", serde_json::to_string(&summary).expect("plain struct"));
        }
        Command::Load { csv, schema, out } => {
            let schema_value = read_schema_file(&schema)?;
            let table = load_csv(&csv, &schema_value, &out)?;
            println!("loaded {} rows into {}", table.row_count(), out.display());
        }
        Command::Run { plan, data, metrics, cold } => {
            let text = fs::read_to_string(&plan).map_err(|e| PosrecError::io(&plan, e))?;
            let spec = parse_plan(&text)?;
            let mut db = Database::open(&data)?;
            let out = run_plan(&spec, &mut db, RunOptions { cold, level_trace: false })?;
            println!("{}", out.columns.join(","));
            for row in out.rows() {
                let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
                println!("{}", cells.join(","));
            }
            if let Some(path) = metrics {
                let json = serde_json::to_string_pretty(&out.metrics).expect("plain struct");
                fs::write(&path, json + "\n").map_err(|e| PosrecError::io(&path, e))?;
            }
        }
        Command::Verify {
            experiment: e,
            engine,
            depth,
            payload,
            data,
            seed_predicate,
            block_capacity,
            inject_drop_rows,
        } => {
            let mut db = Database::open(&data)?;
            let query = Query {
                seed: seed_predicate.into(),
                block_capacity,
                ..Query::new(experiment(e), engine.into(), depth, payload)
            };
            let report = verify(&mut db, &query, FaultInjection { drop_rows: inject_drop_rows })?;
            print!("{report}");
            if !report.pass {
                return Err(PosrecError::Usage("verification failed".into()));
            }
        }
        Command::Bench { experiment: e, engines, depths, payloads, repeats, data, out, seed_predicate, cold } => {
            let cfg = BenchConfig {
                experiments: vec![experiment(e)],
                engines: engines.into_iter().map(Engine::from).collect(),
                depths: parse_depths(&depths)?,
                payloads,
                repeats,
                seed: seed_predicate.into(),
                cold,
            };
            let mut db = Database::open(&data)?;
            let report = bench(&mut db, &cfg)?;
            let json = report.write(&out)?;
            print!("{}", report.to_csv());
            eprintln!("wrote {} and {}", out.display(), json.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(diags) = e.diagnostics() {
                for d in diags {
                    eprintln!("  {d}");
                }
            }
            ExitCode::FAILURE
        }
    }
}
