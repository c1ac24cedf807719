// Classify the rest points of a 2×2 merging game and follow the replicator
// flow from a mixed start.

use egt_merge::egt::{integrate_replicator, solve_ess, Ess, PayoffMatrix, StrategyState};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // fitness = negated cost; rows AV (yield, merge), columns MV (yield, accelerate)
    let m = PayoffMatrix::new(
        [[-6.710, -6.154], [-4.000, -6.222]],
        [[-5.556, -5.469], [-5.000, -7.691]],
    )?;
    let report = solve_ess(&m);
    for fp in &report.pure_points {
        println!(
            "{:<10} λ = ({:>7.3}, {:>7.3}) {}",
            fp.point.to_string(),
            fp.eigenvalues.0,
            fp.eigenvalues.1,
            if fp.stable { "stable" } else { "" }
        );
    }
    match &report.ess {
        Ess::Unique(s) => println!("ESS {s}"),
        Ess::Multiple { points, selected } => {
            let pick = selected.map(|s| s.to_string()).unwrap_or_else(|| "tied".into());
            println!("{} stable points, risk-dominant {pick}", points.len())
        }
        Ess::NoPure => println!("no pure ESS"),
    }
    if let Some(i) = report.interior {
        println!("interior rest point ({:.3}, {:.3}), never stable", i.p, i.q);
    }

    let traj = integrate_replicator(&m, StrategyState::new(0.4, 0.6)?, 0.01, 2000)?;
    for (k, s) in traj.iter().enumerate().step_by(250) {
        println!("t={:>5.2}  p={:.4}  q={:.4}", k as f64 * 0.01, s.p, s.q);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
