use egt_merge::baselines::{follower_reply, is_pure_nash, nash_pure, stackelberg};
use egt_merge::egt::{eigenvalues_at, replicator_rhs, solve_ess, PayoffMatrix, PURE_POINTS};
use egt_merge::estimation::{apply_reaction, update_belief, Reaction, StabilityInterval, StyleBelief};
use egt_merge::metrics::{BatchSummary, MetricsReport, RunOutcome};
use egt_merge::payoff::{
    build_matrix, cell_costs, target_arrival_time, AgentView, AvMove, DrivingStyle, GameContext, MvMove, Role,
    StrategyPair,
};
use egt_merge::runner::Policy;
use egt_merge::testbench::truthful_reaction;
use egt_merge::traffic::{idm_accel, merging_list, IdmParams, Lane, VehicleId, VehicleState};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = PayoffMatrix> {
    prop::array::uniform8(-10.0f64..10.0).prop_map(|e| {
        PayoffMatrix::new([[e[0], e[1]], [e[2], e[3]]], [[e[4], e[5]], [e[6], e[7]]]).unwrap()
    })
}

fn context() -> impl Strategy<Value = GameContext> {
    (
        5.0f64..200.0,
        2.0f64..20.0,
        5.0f64..200.0,
        2.0f64..20.0,
        0.05f64..0.95,
        0.05f64..0.95,
        0.5f64..3.0,
    )
        .prop_map(|(da, va, dm, vm, wa, wm, t)| {
            GameContext::new(
                AgentView::new(da, va).unwrap(),
                AgentView::new(dm, vm).unwrap(),
                DrivingStyle::new(wa, 1.5).unwrap(),
                DrivingStyle::new(wm, 1.5).unwrap(),
                t,
            )
            .unwrap()
        })
}

proptest! {
    #[test]
    fn pure_points_are_rest_points(m in matrix()) {
        for pt in PURE_POINTS {
            prop_assert_eq!(replicator_rhs(&m, pt), (0.0, 0.0));
        }
    }

    #[test]
    fn shifting_one_player_keeps_eigenvalues(m in matrix(), c in -50.0f64..50.0) {
        let mut su = m;
        let mut sv = m;
        for i in 0..2 {
            for j in 0..2 {
                su.u[i][j] += c;
                sv.v[i][j] += c;
            }
        }
        for pt in PURE_POINTS {
            let e = eigenvalues_at(&m, pt).unwrap();
            for shifted in [su, sv] {
                let s = eigenvalues_at(&shifted, pt).unwrap();
                prop_assert!((e.0 - s.0).abs() < 1e-9 && (e.1 - s.1).abs() < 1e-9);
            }
        }
        let base: Vec<_> = solve_ess(&m).stable_points().collect();
        prop_assert_eq!(&base, &solve_ess(&su).stable_points().collect::<Vec<_>>());
        prop_assert_eq!(&base, &solve_ess(&sv).stable_points().collect::<Vec<_>>());
    }

    #[test]
    fn positive_scaling_scales_eigenvalues(m in matrix(), alpha in 0.01f64..100.0) {
        let scaled = m.map(|x| alpha * x);
        for pt in PURE_POINTS {
            let e = eigenvalues_at(&m, pt).unwrap();
            let s = eigenvalues_at(&scaled, pt).unwrap();
            prop_assert!((alpha * e.0 - s.0).abs() <= 1e-9 * (1.0 + s.0.abs()));
            prop_assert!((alpha * e.1 - s.1).abs() <= 1e-9 * (1.0 + s.1.abs()));
        }
        let stable = |m: &PayoffMatrix| solve_ess(m).pure_points.map(|fp| {
            fp.eigenvalues.0 < 0.0 && fp.eigenvalues.1 < 0.0
        });
        prop_assert_eq!(stable(&m), stable(&scaled));
    }

    #[test]
    fn interior_point_is_never_selected(m in matrix()) {
        let r = solve_ess(&m);
        if let Some(s) = r.selected() {
            prop_assert!(s.is_pure());
        }
        if let Some(i) = r.interior {
            prop_assert!(!r.stable_points().any(|s| s == i));
            let (dp, dq) = replicator_rhs(&m, i);
            prop_assert!(dp.abs() < 1e-9 && dq.abs() < 1e-9);
        }
    }

    #[test]
    fn nash_profiles_pass_the_deviation_test(m in matrix()) {
        let n = nash_pure(&m);
        for s in &n.equilibria {
            let pair = StrategyPair::new(
                if s.p == 1.0 { AvMove::Yield } else { AvMove::Merge },
                if s.q == 1.0 { MvMove::Yield } else { MvMove::Accelerate },
            );
            prop_assert!(is_pure_nash(&m, pair));
        }
        if let Some(sel) = n.selected {
            prop_assert!(n.equilibria.contains(&sel));
        }
    }

    #[test]
    fn stackelberg_follower_best_replies(m in matrix()) {
        let s = stackelberg(&m);
        let av = if s.p == 1.0 { AvMove::Yield } else { AvMove::Merge };
        let mv = if s.q == 1.0 { MvMove::Yield } else { MvMove::Accelerate };
        prop_assert_eq!(follower_reply(&m, av), mv);
    }

    #[test]
    fn matrix_is_negated_costs(ctx in context()) {
        let m = build_matrix(&ctx);
        for pair in StrategyPair::all() {
            let c = cell_costs(&ctx, pair);
            prop_assert_eq!(m.u[pair.av.index()][pair.mv.index()], -c.j_av);
            prop_assert_eq!(m.v[pair.av.index()][pair.mv.index()], -c.j_mv);
        }
    }

    #[test]
    fn yield_arrives_two_headways_later(ctx in context()) {
        for role in [Role::Av, Role::Mv] {
            let go = target_arrival_time(&ctx, role, false);
            let wait = target_arrival_time(&ctx, role, true);
            if !go.clamped {
                prop_assert!((wait.seconds - go.seconds - 2.0 * ctx.headway_t).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn conflict_term_is_shared(ctx in context()) {
        for pair in StrategyPair::all() {
            let c = cell_costs(&ctx, pair);
            let own_av = ctx.av_style.omega * c.t_av + (1.0 - ctx.av_style.omega) * c.accel_av.powi(2);
            let own_mv = ctx.mv_style.omega * c.t_mv + (1.0 - ctx.mv_style.omega) * c.accel_mv.powi(2);
            prop_assert!((c.j_av - own_av - c.safety).abs() < 1e-9);
            prop_assert!((c.j_mv - own_mv - c.safety).abs() < 1e-9);
        }
    }

    #[test]
    fn style_shifts_weight_toward_time(ctx in context(), dw in 0.01f64..0.3) {
        let hi = ctx.with_mv_omega((ctx.mv_style.omega + dw).min(0.99));
        for pair in StrategyPair::all() {
            let a = cell_costs(&ctx, pair);
            let b = cell_costs(&hi, pair);
            if a.t_mv > 0.0 && a.accel_mv != 0.0 {
                prop_assert!(hi.mv_style.omega * b.t_mv > ctx.mv_style.omega * a.t_mv);
                prop_assert!((1.0 - hi.mv_style.omega) * b.accel_mv.powi(2)
                    < (1.0 - ctx.mv_style.omega) * a.accel_mv.powi(2));
            }
        }
    }

    #[test]
    fn idm_never_brakes_harder_with_more_room(
        v in 0.0f64..20.0, dv in -5.0f64..5.0, gap in 0.5f64..150.0, extra in 0.0f64..50.0, t in 0.5f64..3.5
    ) {
        let p = IdmParams::default().with_headway(t);
        let near = idm_accel(&p, v, gap, dv).unwrap();
        let far = idm_accel(&p, v, gap + extra, dv).unwrap();
        prop_assert!(far >= near);
    }

    #[test]
    fn idm_equilibrium_residual(v in 0.1f64..14.5, t in 0.5f64..3.5) {
        let p = IdmParams::default().with_headway(t);
        let gap = p.desired_gap(v, 0.0) / (1.0 - (v / p.v0).powf(p.delta)).sqrt();
        prop_assert!(idm_accel(&p, v, gap, 0.0).unwrap().abs() < 1e-6);
    }

    #[test]
    fn merging_list_is_a_stable_permutation(
        raw in prop::collection::vec((0.0f64..250.0, 0.0f64..20.0, any::<bool>()), 1..8),
        rot in 0usize..8,
    ) {
        let states: Vec<_> = raw
            .iter()
            .enumerate()
            .map(|(i, &(s, v, ramp))| {
                let lane = if ramp { Lane::Ramp } else { Lane::Main };
                VehicleState::new(VehicleId(i as u32), lane, s, v)
            })
            .collect();
        let q = merging_list(&states);
        let mut ids = q.order.clone();
        ids.sort();
        prop_assert_eq!(ids, states.iter().map(|s| s.id).collect::<Vec<_>>());
        prop_assert_eq!(&q, &merging_list(&states));
        let mut shuffled = states.clone();
        shuffled.rotate_left(rot % states.len());
        prop_assert_eq!(q, merging_list(&shuffled));
    }

    #[test]
    fn belief_width_never_grows(
        steps in prop::collection::vec((any::<bool>(), any::<bool>(), 0.0f64..1.0, 0.0f64..1.0), 1..20)
    ) {
        let mut b = StyleBelief::default();
        for (pred_yield, acc, x, y) in steps {
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            let upd = apply_reaction(
                b,
                pred_yield,
                Reaction { accelerated: acc },
                StabilityInterval { lo, hi, stale: false },
                Default::default(),
            );
            prop_assert!(upd.belief.width() <= b.width() + 1e-15);
            prop_assert!(upd.belief.k_l >= b.k_l && upd.belief.k_u <= b.k_u);
            if pred_yield != acc {
                prop_assert_eq!(upd.belief, b);
            }
            b = upd.belief;
        }
    }

    #[test]
    fn truthful_reactions_never_expel_the_truth(ctx in context(), w_true in 0.02f64..0.98, rounds in 1usize..6) {
        let mut b = StyleBelief::default();
        for _ in 0..rounds {
            let c = ctx.with_mv_omega(b.omega_hat);
            let Some(ess) = solve_ess(&build_matrix(&c)).selected() else { break };
            let r = truthful_reaction(&c, ess, w_true);
            let upd = update_belief(b, ess, r, &c);
            b = upd.belief;
            // the interval is an inner approximation, so allow its bisection tolerance
            prop_assert!(b.k_l <= w_true + 1e-3 && w_true <= b.k_u + 1e-3, "{b:?} vs {w_true}");
        }
    }

    #[test]
    fn summary_means_are_arithmetic_means(
        rows in prop::collection::vec((0.0f64..1.0, 0.0f64..3.0, 0.0f64..20.0, any::<bool>(), 0.1f64..10.0), 1..30)
    ) {
        let runs: Vec<RunOutcome> = rows
            .iter()
            .enumerate()
            .map(|(i, &(mj, xj, v5, col, ttc))| RunOutcome {
                seed: i as u64,
                result: Ok(MetricsReport {
                    mean_jerk: mj,
                    max_jerk: mj + xj,
                    terminal_speed_mv5: v5,
                    collided: col,
                    mean_ttc: ttc,
                    ttc_samples: 1,
                    ttc_undefined: false,
                }),
            })
            .collect();
        let s = BatchSummary::from_outcomes(Policy::Egt, 0, &runs);
        let n = rows.len() as f64;
        let mean = |f: fn(&(f64, f64, f64, bool, f64)) -> f64| rows.iter().map(f).sum::<f64>() / n;
        prop_assert_eq!(s.n_runs, rows.len());
        prop_assert!((s.mean_jerk.mean - mean(|r| r.0)).abs() < 1e-12);
        prop_assert!((s.max_jerk.mean - mean(|r| r.0 + r.1)).abs() < 1e-12);
        prop_assert!((s.terminal_speed_mv5.mean - mean(|r| r.2)).abs() < 1e-12);
        prop_assert!((s.mean_ttc.mean - mean(|r| r.4)).abs() < 1e-12);
        prop_assert!((s.collision_rate - 100.0 * mean(|r| r.3 as u8 as f64)).abs() < 1e-9);
        prop_assert!((0.0..=100.0).contains(&s.collision_rate));
    }
}
