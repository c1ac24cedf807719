// Recover a hidden driving style with probe games against a truthful
// synthetic driver.
//
// `cargo run --example style_estimation -- 0.35`

use egt_merge::runner::{SimConfig, TableScenario};
use egt_merge::scenario::initial_context;
use egt_merge::testbench::{run_estimation, BenchConfig};

pub fn run_with(true_omega: f64) -> Result<(), Box<dyn std::error::Error>> {
    let base = initial_context(&SimConfig::table(TableScenario::I))?;
    let run = run_estimation(&base, true_omega, 0, &BenchConfig::default());

    println!("true ω = {true_omega}");
    for (i, it) in run.interactions.iter().enumerate() {
        let b = it.belief;
        println!(
            "#{i:<2} AV at d={:>6.1} v={:>4.1}  ESS {}  MV {}  -> [{:.4}, {:.4}]{}",
            it.probe.ctx.av.dist_to_merge,
            it.probe.ctx.av.speed,
            it.probe.ess,
            if it.reaction.accelerated { "accelerates" } else { "holds      " },
            b.k_l,
            b.k_u,
            if it.updated { "" } else { "  (confirmed)" }
        );
    }
    println!(
        "estimate {:.4} after {} updates, truth always inside: {}",
        run.belief.omega_hat,
        run.n_updates(),
        run.contained
    );
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    run_with(0.35)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    match std::env::args().nth(1) {
        Some(w) => run_with(w.parse()?),
        None => run_example(),
    }
}
