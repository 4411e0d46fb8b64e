use clap::{Parser, Subcommand};
use hypbbm::config::parse_spec;
use hypbbm::experiment::{execute, write_artifacts};
use hypbbm::verify::all_criteria;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hypbbm", version, about = "Branching Brownian motion on the hyperbolic plane")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec and write its artifacts
    Run {
        /// Path to a key = value spec file
        spec: PathBuf,
        /// Output directory; falls back to the spec's `out` key, then ./out
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the spec's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on the count
        #[arg(long)]
        workers: Option<usize>,
        /// Also write every particle of every snapshot as JSON lines
        #[arg(long)]
        dump_particles: bool,
    },
    /// Run the acceptance checklist; exits nonzero if any gating criterion fails
    Verify,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { spec, out, seed, workers, dump_particles } => {
            run_command(&spec, out, seed, workers, dump_particles)
        }
        Command::Verify => verify_command(),
    }
}

fn run_command(
    spec_path: &PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
    dump_particles: bool,
) -> ExitCode {
    let text = match fs::read_to_string(spec_path) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("{}: {e}", spec_path.display());
            return ExitCode::from(2);
        }
    };
    let mut spec = match parse_spec(&text) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("{}: {e}", spec_path.display());
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(workers) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            eprintln!("worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let out_dir = out
        .or_else(|| spec.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let record = match execute(&spec, dump_particles) {
        Ok(record) => record,
        Err(e) => {
            eprintln!("run failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let names = match write_artifacts(&record, &out_dir) {
        Ok(names) => names,
        Err(e) => {
            eprintln!("writing artifacts: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("{} replicas={} seed={} hash={}", spec.kind, spec.replicas, spec.seed, record.spec_hash);
    for report in &record.reports {
        println!(
            "  {} {} (statistic {:.4}, threshold {:.4}, n={})",
            if report.pass { "PASS" } else { "FAIL" },
            report.description,
            report.statistic,
            report.threshold,
            report.sample_size
        );
    }
    for name in names {
        println!("wrote {}", out_dir.join(name).display());
    }
    ExitCode::SUCCESS
}

fn verify_command() -> ExitCode {
    let reports = all_criteria();
    for report in &reports {
        println!("{}", report.line());
    }
    let gating = reports.iter().filter(|r| !r.exploratory).count();
    let passed = reports.iter().filter(|r| !r.exploratory && r.pass).count();
    println!("{passed} of {gating} gating criteria pass");
    if passed == gating {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
