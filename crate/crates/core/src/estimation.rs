//! Online bisection estimate of a main-road driver's hidden style weight.
//!
//! The AV predicts the MV's reaction from the ESS of the game built with the
//! current estimate, then compares it with the observed speed change. A wrong
//! prediction means the true weight lies outside the ω-interval on which the
//! predicted ESS holds, so one bound jumps to that interval's far endpoint.

use crate::egt::{solve_ess, StrategyState};
use crate::payoff::{build_matrix, GameContext};

/// Default ω scan resolution.
pub const DEFAULT_GRID_STEP: f64 = 1.0 / 1024.0;
/// Boundary refinement tolerance.
pub const BOUNDARY_TOL: f64 = 1e-4;
/// Speed deadband for deciding that an MV accelerated, m/s.
pub const SPEED_DEADBAND: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StyleBelief {
    pub k_l: f64,
    pub k_u: f64,
    pub omega_hat: f64,
    /// Set when an update would have crossed the bounds.
    pub inconsistent: bool,
}

impl Default for StyleBelief {
    fn default() -> Self {
        StyleBelief::new(0.0, 1.0)
    }
}

impl StyleBelief {
    pub fn new(k_l: f64, k_u: f64) -> Self {
        StyleBelief {
            k_l,
            k_u,
            omega_hat: 0.5 * (k_l + k_u),
            inconsistent: false,
        }
    }

    pub fn width(&self) -> f64 {
        self.k_u - self.k_l
    }

    pub fn contains(&self, omega: f64) -> bool {
        self.k_l <= omega && omega <= self.k_u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reaction {
    pub accelerated: bool,
}

pub fn observed_reaction(v_now: f64, v_prev: f64) -> Reaction {
    Reaction {
        accelerated: v_now > v_prev + SPEED_DEADBAND,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityInterval {
    pub lo: f64,
    pub hi: f64,
    /// The ESS did not hold at the context's own weight.
    pub stale: bool,
}

fn ess_holds(ctx: &GameContext, ess: StrategyState, omega: f64) -> bool {
    solve_ess(&build_matrix(&ctx.with_mv_omega(omega))).selected() == Some(ess)
}

/// Bisect between a weight where the ESS holds and one where it does not,
/// returning the holding side once they are within `BOUNDARY_TOL`.
fn refine(ctx: &GameContext, ess: StrategyState, mut ok: f64, mut bad: f64) -> f64 {
    while (bad - ok).abs() > BOUNDARY_TOL {
        let mid = 0.5 * (ok + bad);
        if ess_holds(ctx, ess, mid) {
            ok = mid;
        } else {
            bad = mid;
        }
    }
    ok
}

/// Maximal ω-interval around the context's MV weight on which `ess` stays the
/// selected ESS. Endpoints are inner approximations: the ESS holds at both.
pub fn ess_stability_interval(
    ctx: &GameContext,
    ess: StrategyState,
    grid_step: f64,
) -> StabilityInterval {
    let w0 = ctx.mv_style.omega;
    if !ess_holds(ctx, ess, w0) {
        return StabilityInterval {
            lo: w0,
            hi: w0,
            stale: true,
        };
    }
    let step = if grid_step > 0.0 { grid_step } else { DEFAULT_GRID_STEP };
    let n = (1.0 / step).ceil() as i64;
    let grid = |i: i64| (i as f64 * step).clamp(0.0, 1.0);
    let base = (w0 / step).floor() as i64;

    let mut hi = 1.0;
    let mut last = w0;
    for i in (base + 1)..=n {
        let g = grid(i);
        if g <= last {
            continue;
        }
        if ess_holds(ctx, ess, g) {
            last = g;
        } else {
            hi = refine(ctx, ess, last, g);
            break;
        }
    }

    let mut lo = 0.0;
    let mut last = w0;
    for i in (0..=base).rev() {
        let g = grid(i);
        if g >= last {
            continue;
        }
        if ess_holds(ctx, ess, g) {
            last = g;
        } else {
            lo = refine(ctx, ess, last, g);
            break;
        }
    }
    StabilityInterval {
        lo,
        hi,
        stale: false,
    }
}

/// Which bound moves on a mispredicted reaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchReading {
    /// Predicted accelerate but held back: `k_u ← lo`.
    /// Predicted yield but accelerated: `k_l ← hi`.
    #[default]
    Pseudocode,
    /// Mirror image of the above, kept for comparison runs.
    Prose,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefUpdate {
    pub belief: StyleBelief,
    /// A bound moved.
    pub updated: bool,
    pub interval: Option<StabilityInterval>,
}

/// Bound update given the predicted MV action and a precomputed interval.
/// Crossing bounds collapse to their midpoint, held inside the old bounds.
pub fn apply_reaction(
    b: StyleBelief,
    predicted_yield: bool,
    r: Reaction,
    interval: StabilityInterval,
    reading: BranchReading,
) -> BeliefUpdate {
    let unchanged = BeliefUpdate {
        belief: b,
        updated: false,
        interval: Some(interval),
    };
    if b.inconsistent || interval.stale {
        return unchanged;
    }
    enum Move {
        Upper(f64),
        Lower(f64),
    }
    let mv = match (predicted_yield, r.accelerated, reading) {
        (false, false, BranchReading::Pseudocode) => Move::Upper(interval.lo),
        (true, true, BranchReading::Pseudocode) => Move::Lower(interval.hi),
        (false, false, BranchReading::Prose) => Move::Lower(interval.hi),
        (true, true, BranchReading::Prose) => Move::Upper(interval.lo),
        _ => return unchanged,
    };
    let (mut k_l, mut k_u) = (b.k_l, b.k_u);
    match mv {
        Move::Upper(x) => k_u = k_u.min(x),
        Move::Lower(x) => k_l = k_l.max(x),
    }
    if k_l >= k_u {
        let mid = (0.5 * (k_l + k_u)).clamp(b.k_l, b.k_u);
        return BeliefUpdate {
            belief: StyleBelief {
                k_l: mid,
                k_u: mid,
                omega_hat: mid,
                inconsistent: true,
            },
            updated: true,
            interval: Some(interval),
        };
    }
    let belief = StyleBelief::new(k_l, k_u);
    BeliefUpdate {
        updated: belief != b,
        belief,
        interval: Some(interval),
    }
}

/// One estimation step. `ctx` must carry `b.omega_hat` as the MV weight and
/// `ess` must be the ESS of that context.
pub fn update_belief(
    b: StyleBelief,
    ess: StrategyState,
    r: Reaction,
    ctx: &GameContext,
) -> BeliefUpdate {
    update_belief_with(b, ess, r, ctx, DEFAULT_GRID_STEP, BranchReading::Pseudocode)
}

pub fn update_belief_with(
    b: StyleBelief,
    ess: StrategyState,
    r: Reaction,
    ctx: &GameContext,
    grid_step: f64,
    reading: BranchReading,
) -> BeliefUpdate {
    let predicted_yield = ess.q == 1.0;
    // Confirmations never need the interval.
    let mismatch = predicted_yield == r.accelerated;
    if !mismatch {
        return BeliefUpdate {
            belief: b,
            updated: false,
            interval: None,
        };
    }
    let ctx = ctx.with_mv_omega(b.omega_hat);
    let interval = ess_stability_interval(&ctx, ess, grid_step);
    apply_reaction(b, predicted_yield, r, interval, reading)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::{AgentView, DrivingStyle};

    fn worked() -> GameContext {
        GameContext::new(
            AgentView::new(80.0, 10.0).unwrap(),
            AgentView::new(100.0, 10.0).unwrap(),
            DrivingStyle::new(0.5, 2.0).unwrap(),
            DrivingStyle::new(0.5, 2.0).unwrap(),
            2.0,
        )
        .unwrap()
    }

    fn interval(lo: f64, hi: f64) -> StabilityInterval {
        StabilityInterval { lo, hi, stale: false }
    }

    #[test]
    fn reaction_deadband() {
        assert!(!observed_reaction(10.0, 10.0).accelerated);
        assert!(observed_reaction(10.5, 10.0).accelerated);
        assert!(!observed_reaction(10.0005, 10.0).accelerated);
    }

    #[test]
    fn lower_bound_jumps_on_unexpected_acceleration() {
        let u = apply_reaction(
            StyleBelief::default(),
            true,
            Reaction { accelerated: true },
            interval(0.38, 0.71),
            BranchReading::Pseudocode,
        );
        assert!(u.updated);
        assert_eq!((u.belief.k_l, u.belief.k_u), (0.71, 1.0));
        assert!((u.belief.omega_hat - 0.855).abs() < 1e-12);
    }

    #[test]
    fn upper_bound_drops_on_unexpected_hold() {
        let u = apply_reaction(
            StyleBelief::default(),
            false,
            Reaction { accelerated: false },
            interval(0.38, 0.71),
            BranchReading::Pseudocode,
        );
        assert_eq!((u.belief.k_l, u.belief.k_u), (0.0, 0.38));
        assert!((u.belief.omega_hat - 0.19).abs() < 1e-12);
    }

    #[test]
    fn confirmed_prediction_is_idle() {
        let b = StyleBelief::default();
        for (pred_yield, acc) in [(true, false), (false, true)] {
            let u = apply_reaction(b, pred_yield, Reaction { accelerated: acc }, interval(0.38, 0.71), BranchReading::Pseudocode);
            assert!(!u.updated);
            assert_eq!(u.belief, b);
        }
    }

    #[test]
    fn prose_reading_mirrors_the_branches() {
        let u = apply_reaction(
            StyleBelief::default(),
            true,
            Reaction { accelerated: true },
            interval(0.38, 0.71),
            BranchReading::Prose,
        );
        assert_eq!((u.belief.k_l, u.belief.k_u), (0.0, 0.38));
    }

    #[test]
    fn crossing_bounds_collapse_and_flag() {
        let b = StyleBelief::new(0.6, 0.9);
        let u = apply_reaction(b, false, Reaction { accelerated: false }, interval(0.4, 0.8), BranchReading::Pseudocode);
        assert!(u.belief.inconsistent);
        assert_eq!(u.belief.k_l, u.belief.k_u);
        // the midpoint 0.5 would fall below the old lower bound
        assert_eq!(u.belief.omega_hat, 0.6);
        // frozen afterwards
        let again = apply_reaction(u.belief, true, Reaction { accelerated: true }, interval(0.1, 0.7), BranchReading::Pseudocode);
        assert!(!again.updated);
    }

    #[test]
    fn stale_interval_for_wrong_ess() {
        let ctx = worked();
        let wrong = StrategyState::pure(true, true);
        let iv = ess_stability_interval(&ctx, wrong, DEFAULT_GRID_STEP);
        assert!(iv.stale);
        assert_eq!((iv.lo, iv.hi), (0.5, 0.5));
        let u = apply_reaction(StyleBelief::default(), true, Reaction { accelerated: true }, iv, BranchReading::Pseudocode);
        assert!(!u.updated);
    }

    #[test]
    fn far_mv_keeps_its_ess_almost_everywhere() {
        // The MV is far from the merge point; yielding dominates at every weight.
        let ctx = GameContext::new(
            AgentView::new(40.0, 10.0).unwrap(),
            AgentView::new(121.6, 10.0).unwrap(),
            DrivingStyle::new(0.5, 2.0).unwrap(),
            DrivingStyle::new(0.5, 2.0).unwrap(),
            2.0,
        )
        .unwrap();
        let ess = StrategyState::pure(false, true);
        for w in [0.001, 0.5, 0.999] {
            assert!(ess_holds(&ctx, ess, w), "w={w}");
        }
        let iv = ess_stability_interval(&ctx, ess, DEFAULT_GRID_STEP);
        assert!(!iv.stale);
        assert_eq!(iv.lo, 0.0);
        // at ω = 1 only arrival time counts and accelerating wins
        assert!(!ess_holds(&ctx, ess, 1.0));
        assert!(iv.hi > 0.999 && ess_holds(&ctx, ess, iv.hi), "{iv:?}");
    }
}
