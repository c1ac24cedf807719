//! Offline style-estimation testbench.
//!
//! A synthetic main-road driver with a hidden weight `ω*` always plays its
//! best reply to the AV's equilibrium move. Each interaction the bench picks
//! an AV state whose predicted equilibrium flips just beside the current
//! estimate, so a mispredicted reaction moves one bound to roughly the
//! midpoint.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::follower_reply;
use crate::egt::{solve_ess, StrategyState};
use crate::estimation::{
    ess_stability_interval, update_belief_with, BranchReading, Reaction, StabilityInterval,
    StyleBelief, DEFAULT_GRID_STEP,
};
use crate::payoff::{build_matrix, AgentView, AvMove, GameContext, MvMove};

const D_RANGE: (f64, f64) = (5.0, 300.0);
const D_STEP: f64 = 2.0;
const SPEEDS: [f64; 14] = [
    10.0, 8.0, 12.0, 6.0, 14.0, 16.0, 4.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0, 30.0,
];
const EDGE_MAX: f64 = 1e-3;

/// Best reply of a truthful driver with weight `omega` to the AV move implied
/// by `ess`.
pub fn truthful_reaction(ctx: &GameContext, ess: StrategyState, omega: f64) -> Reaction {
    let av = if ess.p == 1.0 { AvMove::Yield } else { AvMove::Merge };
    let m = build_matrix(&ctx.with_mv_omega(omega));
    Reaction {
        accelerated: follower_reply(&m, av) == MvMove::Accelerate,
    }
}

fn selected(ctx: &GameContext, omega: f64) -> Option<StrategyState> {
    solve_ess(&build_matrix(&ctx.with_mv_omega(omega))).selected()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    /// Context carrying the current estimate as the MV weight.
    pub ctx: GameContext,
    pub ess: StrategyState,
    pub interval: StabilityInterval,
}

/// Find an AV state in the probe family whose ESS at `b.omega_hat` predicts
/// a yield (`want_yield`) or an acceleration, with the interval edge on the
/// informative side within `edge` of the estimate.
pub fn design_probe(base: &GameContext, b: &StyleBelief, want_yield: bool, edge: f64) -> Option<Probe> {
    let w0 = b.omega_hat;
    let side = if want_yield { 1.0 } else { -1.0 };
    let w_half = w0 + side * 0.5 * edge;
    let is_target = |e: Option<StrategyState>| match e {
        Some(s) if want_yield => s.p == 0.0 && s.q == 1.0,
        Some(s) => s.q == 0.0,
        None => false,
    };
    let at = |d: f64, v: f64| {
        let mut c = base.with_mv_omega(w0);
        c.av = AgentView {
            dist_to_merge: d,
            speed: v,
        };
        c
    };
    // 2 = ESS holds past the half edge, 1 = flips inside the edge, 0 = other
    let class = |c: &GameContext| {
        let e = selected(c, w0);
        if !is_target(e) {
            return 0;
        }
        if selected(c, w_half) == e {
            2
        } else {
            1
        }
    };

    for &v in &SPEEDS {
        let n = ((D_RANGE.1 - D_RANGE.0) / D_STEP).round() as usize;
        let mut prev: Option<(f64, u8)> = None;
        for i in 0..=n {
            let d = D_RANGE.0 + i as f64 * D_STEP;
            let k = class(&at(d, v));
            let cand = match (prev, k) {
                (_, 1) => Some(d),
                (Some((dp, kp)), k) if (kp == 2) != (k == 2) => {
                    let (mut deep, mut other) = if kp == 2 { (dp, d) } else { (d, dp) };
                    let mut found = None;
                    for _ in 0..60 {
                        let mid = 0.5 * (deep + other);
                        match class(&at(mid, v)) {
                            2 => deep = mid,
                            1 => {
                                found = Some(mid);
                                break;
                            }
                            _ => other = mid,
                        }
                    }
                    found
                }
                _ => None,
            };
            prev = Some((d, k));
            if let Some(d) = cand {
                if let Some(p) = accept(&at(d, v), w0, want_yield, edge) {
                    return Some(p);
                }
            }
        }
    }
    None
}

fn accept(ctx: &GameContext, w0: f64, want_yield: bool, edge: f64) -> Option<Probe> {
    let ess = selected(ctx, w0)?;
    let interval = ess_stability_interval(ctx, ess, DEFAULT_GRID_STEP);
    if interval.stale {
        return None;
    }
    // the flip at the edge must be the driver's own best reply changing
    let (end, beyond) = if want_yield {
        (interval.hi, interval.hi + 2.0 * edge)
    } else {
        (interval.lo, interval.lo - 2.0 * edge)
    };
    if (end - w0).abs() > edge || !(0.0..=1.0).contains(&beyond) {
        return None;
    }
    let here = truthful_reaction(ctx, ess, w0).accelerated;
    let there = truthful_reaction(ctx, ess, beyond).accelerated;
    if here == want_yield || there != want_yield {
        return None;
    }
    Some(Probe { ctx: *ctx, ess, interval })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub probe: Probe,
    pub reaction: Reaction,
    pub belief: StyleBelief,
    pub updated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRun {
    pub true_omega: f64,
    pub interactions: Vec<Interaction>,
    pub belief: StyleBelief,
    /// Bound-updating interactions needed to get within `tol`, if reached.
    pub updates_to_tol: Option<usize>,
    /// The true weight stayed inside the bounds after every interaction.
    pub contained: bool,
}

impl EstimationRun {
    pub fn n_updates(&self) -> usize {
        self.interactions.iter().filter(|i| i.updated).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub max_interactions: usize,
    pub tol: f64,
    pub reading: BranchReading,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            max_interactions: 40,
            tol: 0.05,
            reading: BranchReading::Pseudocode,
        }
    }
}

/// Estimate `true_omega` starting from `[0, 1]`. The seed only picks which
/// side is probed first.
pub fn run_estimation(base: &GameContext, true_omega: f64, seed: u64, cfg: &BenchConfig) -> EstimationRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut want_yield: bool = rng.gen();
    let mut b = StyleBelief::default();
    let mut out = Vec::new();
    let mut updates = 0;
    let mut updates_to_tol = None;
    let mut contained = true;
    let mut misses = 0;
    let mut idle = 0;

    for _ in 0..cfg.max_interactions {
        if b.inconsistent {
            break;
        }
        let edge = EDGE_MAX.min(0.25 * b.width());
        let Some(probe) = design_probe(base, &b, want_yield, edge) else {
            // this side is exhausted here; try the other once
            misses += 1;
            if misses > 1 {
                break;
            }
            want_yield = !want_yield;
            continue;
        };
        misses = 0;
        let reaction = truthful_reaction(&probe.ctx, probe.ess, true_omega);
        let upd = update_belief_with(b, probe.ess, reaction, &probe.ctx, DEFAULT_GRID_STEP, cfg.reading);
        b = upd.belief;
        if upd.updated {
            updates += 1;
            idle = 0;
        } else {
            idle += 1;
        }
        contained &= b.contains(true_omega);
        if updates_to_tol.is_none() && (b.omega_hat - true_omega).abs() <= cfg.tol {
            updates_to_tol = Some(updates);
        }
        out.push(Interaction {
            probe,
            reaction,
            belief: b,
            updated: upd.updated,
        });
        want_yield = !want_yield;
        // both sides confirmed: the true weight sits within the edge
        if b.width() <= 2.0 * EDGE_MAX || idle >= 2 {
            break;
        }
    }
    EstimationRun {
        true_omega,
        interactions: out,
        belief: b,
        updates_to_tol,
        contained,
    }
}
