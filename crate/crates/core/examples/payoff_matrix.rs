// Build the game for one AV/MV pair and watch the equilibrium move as the
// main-road driver gets more aggressive.

use egt_merge::egt::solve_ess;
use egt_merge::payoff::{build_matrix, cell_costs, AgentView, DrivingStyle, GameContext, StrategyPair};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ctx = GameContext::new(
        AgentView::new(80.0, 10.0)?,
        AgentView::new(100.0, 10.0)?,
        DrivingStyle::new(0.5, 2.0)?,
        DrivingStyle::new(0.5, 2.0)?,
        2.0,
    )?;

    println!("{:<22} {:>7} {:>7} {:>6} {:>6}", "cell", "J_av", "J_mv", "t_av", "t_mv");
    for pair in StrategyPair::all() {
        let c = cell_costs(&ctx, pair);
        println!(
            "{:<22} {:>7.3} {:>7.3} {:>6.2} {:>6.2}",
            pair.to_string(),
            c.j_av,
            c.j_mv,
            c.t_av,
            c.t_mv
        );
    }

    println!();
    for i in 1..10 {
        let w = i as f64 / 10.0;
        let r = solve_ess(&build_matrix(&ctx.with_mv_omega(w)));
        let ess = r.selected().map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        let stable: Vec<String> = r.stable_points().map(|s| s.to_string()).collect();
        println!("ω_mv = {w:.1}  ESS {ess:<10} stable {}", stable.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
