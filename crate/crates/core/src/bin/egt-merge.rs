use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use egt_merge::io::{format_report, format_summary, fmt_num, runs_csv_string, write_trace_csv};
use egt_merge::metrics::{run_batch_outcomes, run_one, BatchSummary};
use egt_merge::runner::Policy;
use egt_merge::scenario::{initial_context, load_scenario};
use egt_merge::testbench::{run_estimation, BenchConfig};

#[derive(Parser)]
#[command(name = "egt-merge", version, about = "On-ramp merging simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its metrics (and optionally the trace).
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "egt")]
        policy: Policy,
        #[arg(long)]
        out: PathBuf,
        /// Also write trace.csv.
        #[arg(long)]
        trace: bool,
    },
    /// Run seeds base-seed..base-seed+runs and write an aggregate summary.
    Batch {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long, default_value = "egt")]
        policy: Policy,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a synthetic driver's style weight against the scenario's
    /// first gamed vehicle.
    Estimate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        true_omega: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn make_dir(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run {
            scenario,
            seed,
            policy,
            out,
            trace,
        } => {
            let cfg = load_scenario(&scenario)
                .map_err(|e| Failure::Config(e.to_string()))?
                .with_seed(seed)
                .with_policy(policy);
            let (tr, report) = run_one(&cfg).map_err(Failure::Runtime)?;
            make_dir(&out)?;
            let slot = |id: Option<egt_merge::traffic::VehicleId>| id.map(|i| i.to_string()).unwrap_or_else(|| "none".into());
            let mut text = format!("seed={seed}\npolicy={policy}\n");
            text += &format_report(&report);
            text += &format!(
                "final_front={}\nfinal_rear={}\nlane_changed={}\n",
                slot(tr.final_slot.front),
                slot(tr.final_slot.rear),
                tr.final_slot.lane_changed
            );
            write(&out.join("metrics.txt"), &text)?;
            if trace {
                let path = out.join("trace.csv");
                let f = fs::File::create(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
                write_trace_csv(&tr, std::io::BufWriter::new(f))
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            }
            print!("{text}");
        }
        Cmd::Batch {
            scenario,
            runs,
            base_seed,
            policy,
            out,
        } => {
            if runs == 0 {
                return Err(Failure::Config("--runs must be at least 1".into()));
            }
            let cfg = load_scenario(&scenario).map_err(|e| Failure::Config(e.to_string()))?;
            let outcomes = run_batch_outcomes(&cfg, runs, base_seed, policy);
            let summary = BatchSummary::from_outcomes(policy, base_seed, &outcomes);
            make_dir(&out)?;
            let text = format_summary(&summary);
            write(&out.join("summary.txt"), &text)?;
            write(&out.join("runs.csv"), &runs_csv_string(&outcomes))?;
            print!("{text}");
            if summary.n_runs == 0 {
                return Err(Failure::Runtime("every run failed".into()));
            }
        }
        Cmd::Estimate {
            scenario,
            true_omega,
            seed,
        } => {
            if !(true_omega > 0.0 && true_omega < 1.0) {
                return Err(Failure::Config(format!("--true-omega must lie in (0, 1), got {true_omega}")));
            }
            let cfg = load_scenario(&scenario).map_err(|e| Failure::Config(e.to_string()))?;
            let base = initial_context(&cfg).map_err(|e| Failure::Config(e.to_string()))?;
            let r = run_estimation(&base, true_omega, seed, &BenchConfig { reading: cfg.reading, ..Default::default() });
            println!("true_omega={}", fmt_num(true_omega));
            println!("omega_hat={}", fmt_num(r.belief.omega_hat));
            println!("k_l={}", fmt_num(r.belief.k_l));
            println!("k_u={}", fmt_num(r.belief.k_u));
            println!("interactions={}", r.interactions.len());
            println!("updates={}", r.n_updates());
            match r.updates_to_tol {
                Some(n) => println!("updates_to_tol={n}"),
                None => println!("updates_to_tol=none"),
            }
            println!("contained={}", r.contained);
            println!("inconsistent={}", r.belief.inconsistent);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(2)
        }
    }
}
