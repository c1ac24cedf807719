// One closed-loop run: the AV's decisions period by period, where it ends up
// and the comfort and safety numbers.
//
// `cargo run --example merge_run -- scenarios/scenario_2.toml 4`

use egt_merge::metrics::run_one;
use egt_merge::runner::{SimConfig, TableScenario};
use egt_merge::scenario::load_scenario;

pub fn run_cfg(cfg: &SimConfig) -> Result<(), Box<dyn std::error::Error>> {
    let (trace, m) = run_one(cfg)?;

    let mut hw: Vec<String> = trace.headways.iter().map(|(id, t)| format!("{id}={t:.2}")).collect();
    hw.sort();
    println!("seed {}  headways {}", cfg.seed, hw.join(" "));
    for d in &trace.decisions {
        let belief = d
            .belief
            .map(|b| format!("[{:.3}, {:.3}]", b.k_l, b.k_u))
            .unwrap_or_default();
        println!(
            "t={:>4.1}  vs {:<4} ESS {:<10} {:<22} ξ={} {}{}",
            d.t,
            d.opponent.map(|o| o.to_string()).unwrap_or_default(),
            d.ess.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
            d.maneuver.kind.to_string(),
            d.av_priority,
            belief,
            if d.maneuver.committed { " committed" } else { "" }
        );
    }
    let slot = trace.final_slot;
    let name = |id: Option<egt_merge::traffic::VehicleId>| id.map(|i| i.to_string()).unwrap_or_else(|| "-".into());
    println!(
        "slot: behind {} ahead of {}  (lane change {})",
        name(slot.front),
        name(slot.rear),
        trace.lane_change_time.map(|t| format!("at t={t:.1}")).unwrap_or_else(|| "after the horizon".into())
    );
    println!(
        "jerk mean {:.3} max {:.3}  MV5 {:.2} m/s  TTC {:.2} s  collided {}",
        m.mean_jerk, m.max_jerk, m.terminal_speed_mv5, m.mean_ttc, m.collided
    );
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    run_cfg(&SimConfig::table(TableScenario::I).with_seed(1))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let Some(path) = args.next() else {
        return run_example();
    };
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    run_cfg(&load_scenario(path)?.with_seed(seed))
}
