// Batch the same scenario under the evolutionary policy and the two
// one-shot baselines.
//
// `cargo run --release --example compare_policies -- 100`

use egt_merge::metrics::run_batch;
use egt_merge::runner::{Policy, SimConfig, TableScenario};

pub fn run_with(runs: usize) -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig::table(TableScenario::I);
    println!("{:<12} {:>9} {:>9} {:>8} {:>8} {:>10}", "policy", "jerk", "max jerk", "MV5 v", "TTC", "collisions");
    for policy in [Policy::Egt, Policy::Nash, Policy::Stackelberg] {
        let s = run_batch(&cfg, runs, 0, policy);
        println!(
            "{:<12} {:>9.3} {:>9.3} {:>8.2} {:>8.2} {:>9.1}%",
            policy.to_string(),
            s.mean_jerk.mean,
            s.max_jerk.mean,
            s.terminal_speed_mv5.mean,
            s.mean_ttc.mean,
            s.collision_rate
        );
    }
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    run_with(20)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    match std::env::args().nth(1) {
        Some(n) => run_with(n.parse()?),
        None => run_example(),
    }
}
