//! Pure Nash and AV-leader Stackelberg policies on the same game matrix.

use crate::egt::{PayoffMatrix, StrategyState};
use crate::payoff::{AvMove, MvMove, StrategyPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    NashPure,
    StackelbergAvLeader,
}

pub fn to_state(pair: StrategyPair) -> StrategyState {
    StrategyState::pure(pair.av == AvMove::Yield, pair.mv == MvMove::Yield)
}

fn u(m: &PayoffMatrix, pair: StrategyPair) -> f64 {
    m.u[pair.av.index()][pair.mv.index()]
}

fn v(m: &PayoffMatrix, pair: StrategyPair) -> f64 {
    m.v[pair.av.index()][pair.mv.index()]
}

fn other_av(a: AvMove) -> AvMove {
    match a {
        AvMove::Yield => AvMove::Merge,
        AvMove::Merge => AvMove::Yield,
    }
}

fn other_mv(a: MvMove) -> MvMove {
    match a {
        MvMove::Yield => MvMove::Accelerate,
        MvMove::Accelerate => MvMove::Yield,
    }
}

/// Neither player strictly gains by a unilateral switch.
pub fn is_pure_nash(m: &PayoffMatrix, pair: StrategyPair) -> bool {
    let av_dev = StrategyPair::new(other_av(pair.av), pair.mv);
    let mv_dev = StrategyPair::new(pair.av, other_mv(pair.mv));
    u(m, av_dev) <= u(m, pair) && v(m, mv_dev) <= v(m, pair)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashOutcome {
    /// All pure equilibria in lexicographic (AV move, MV move) order.
    pub equilibria: Vec<StrategyState>,
    pub selected: Option<StrategyState>,
}

pub fn nash_pure(m: &PayoffMatrix) -> NashOutcome {
    let eq: Vec<StrategyPair> = StrategyPair::all().filter(|&p| is_pure_nash(m, p)).collect();

    let dominates = |a: StrategyPair, b: StrategyPair| {
        u(m, a) >= u(m, b) && v(m, a) >= v(m, b) && (u(m, a) > u(m, b) || v(m, a) > v(m, b))
    };
    let pareto = eq
        .iter()
        .copied()
        .find(|&a| eq.iter().all(|&b| a == b || dominates(a, b)));

    let selected = pareto.or_else(|| {
        let welfare = |p: StrategyPair| u(m, p) + v(m, p);
        let best = eq.iter().map(|&p| welfare(p)).fold(f64::NEG_INFINITY, f64::max);
        // first in lexicographic order among the welfare maximisers
        eq.iter().copied().find(|&p| welfare(p) == best)
    });

    NashOutcome {
        equilibria: eq.into_iter().map(to_state).collect(),
        selected: selected.map(to_state),
    }
}

/// MV best reply to a fixed AV move; ties go to Yield.
pub fn follower_reply(m: &PayoffMatrix, av: AvMove) -> MvMove {
    let y = v(m, StrategyPair::new(av, MvMove::Yield));
    let a = v(m, StrategyPair::new(av, MvMove::Accelerate));
    if a > y {
        MvMove::Accelerate
    } else {
        MvMove::Yield
    }
}

/// AV commits first, anticipating the MV's best reply. AV ties go to Yield.
pub fn stackelberg(m: &PayoffMatrix) -> StrategyState {
    let plan = |av: AvMove| StrategyPair::new(av, follower_reply(m, av));
    let yield_plan = plan(AvMove::Yield);
    let merge_plan = plan(AvMove::Merge);
    let pick = if u(m, merge_plan) > u(m, yield_plan) {
        merge_plan
    } else {
        yield_plan
    };
    to_state(pick)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominance_gives_merge_yield() {
        // AV: Merge row beats Yield row; MV: Yield column beats Accelerate.
        let m = PayoffMatrix::new([[0.0, 1.0], [2.0, 3.0]], [[5.0, 1.0], [4.0, 0.0]]).unwrap();
        let out = nash_pure(&m);
        assert_eq!(out.equilibria, vec![StrategyState::pure(false, true)]);
        assert_eq!(out.selected, Some(StrategyState::pure(false, true)));
    }

    #[test]
    fn zero_matrix_everything_is_nash() {
        let out = nash_pure(&PayoffMatrix::ZERO);
        assert_eq!(out.equilibria.len(), 4);
        assert_eq!(out.selected, Some(StrategyState::pure(true, true)));
        assert_eq!(stackelberg(&PayoffMatrix::ZERO), StrategyState::pure(true, true));
    }

    #[test]
    fn no_pure_nash() {
        let m = PayoffMatrix::new([[1.0, -1.0], [-1.0, 1.0]], [[-1.0, 1.0], [1.0, -1.0]]).unwrap();
        let out = nash_pure(&m);
        assert!(out.equilibria.is_empty());
        assert_eq!(out.selected, None);
    }

    #[test]
    fn pareto_dominant_wins() {
        // Both (Y,Y) and (M,A) are equilibria; (M,A) is better for both.
        let m = PayoffMatrix::new([[1.0, 0.0], [0.0, 2.0]], [[1.0, 0.0], [0.0, 2.0]]).unwrap();
        let out = nash_pure(&m);
        assert_eq!(out.equilibria.len(), 2);
        assert_eq!(out.selected, Some(StrategyState::pure(false, false)));
    }

    #[test]
    fn stackelberg_with_yielding_follower() {
        // MV yields whatever the AV does: AV compares column-1 entries.
        let m = PayoffMatrix::new([[3.0, 9.0], [5.0, 9.0]], [[1.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_eq!(stackelberg(&m), StrategyState::pure(false, true));
    }
}
