use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kzstream::experiments::{run_named, EXPERIMENTS};
use kzstream::manifest::RunManifest;
use kzstream::runner::{run, RunConfig, RunMode};
use kzstream::{init_threads, CliError, CliResult};
use serde_json::json;

#[derive(Parser)]
#[command(name = "kzstream", version, about = "Streaming coresets for (k,z)-clustering")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a coreset (or cost estimate) from a stream file.
    Run {
        #[arg(long, value_parser = ["insert-only", "dynamic-2pass", "cost-only"])]
        mode: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        z: Option<u32>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named experiment and write its CSV.
    Experiment {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Smaller sizes for a fast smoke run.
        #[arg(long)]
        quick: bool,
    },
}

fn execute(cmd: Cmd) -> CliResult<()> {
    match cmd {
        Cmd::Run { mode, input, k, z, eps, delta, seed, out } => {
            let mode = RunMode::parse(&mode).ok_or_else(|| CliError::Usage(format!("unknown mode {mode}")))?;
            let cfg = RunConfig { k, z, eps, delta, ..RunConfig::new(mode, seed) };
            let outcome = run(&input, &cfg, &out)?;
            let r = &outcome.report;
            println!("mode={} records={} coreset_len={} peak_words={}", r.mode, r.records, r.coreset_len, r.peak_words);
            Ok(())
        }
        Cmd::Experiment { name, out, seed, quick } => {
            if !EXPERIMENTS.contains(&name.as_str()) {
                return Err(CliError::Usage(format!("unknown experiment {name}; expected one of {}", EXPERIMENTS.join(", "))));
            }
            fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
            let res = run_named(&name, seed, quick)?;
            let csv = res.csv;
            let file = format!("{name}.csv");
            let path = out.join(&file);
            fs::write(&path, &csv).map_err(|e| CliError::io(&path, e))?;
            let mut m = RunManifest::new("experiment", json!({ "name": name, "quick": quick }));
            m.seeds.insert("master".into(), seed);
            m.record_output(&file, csv.as_bytes());
            m.summary = res.summary;
            let mpath = out.join("manifest.json");
            fs::write(&mpath, m.to_json()).map_err(|e| CliError::io(&mpath, e))?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_threads();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kzstream: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
