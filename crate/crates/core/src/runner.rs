//! Closed-loop merging simulation.
//!
//! Every decision period the AV plays the 2×2 game against the main-road
//! vehicle directly behind its target gap, using that vehicle's current style
//! estimate. Main-road vehicles follow IDM; the MV being played treats the AV
//! as a virtual leader while the AV is still on the ramp.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{nash_pure, stackelberg};
use crate::egt::{solve_ess, StrategyState};
use crate::estimation::{
    observed_reaction, update_belief_with, BranchReading, StyleBelief, DEFAULT_GRID_STEP,
};
use crate::payoff::{build_matrix, AgentView, DrivingStyle, GameContext, T_MIN};
use crate::traffic::{
    check_collision, idm_accel, merging_list, omega_from_headway, step_kinematics, HeadwaySpec,
    IdmParams, Lane, PriorityQueue, VehicleId, VehicleState, B_EMERGENCY, CONVERGENCE_END,
    FREE_ROAD_GAP, S_MERGE,
};

/// AV longitudinal command limits, m/s².
pub const AV_ACCEL_MIN: f64 = -8.0;
pub const AV_ACCEL_MAX: f64 = 3.0;
/// Speed floor used when a stopped vehicle enters a game context, m/s.
const SPEED_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Policy {
    #[default]
    Egt,
    Nash,
    Stackelberg,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Egt => "egt",
            Policy::Nash => "nash",
            Policy::Stackelberg => "stackelberg",
        })
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "egt" => Ok(Policy::Egt),
            "nash" => Ok(Policy::Nash),
            "stackelberg" => Ok(Policy::Stackelberg),
            other => Err(format!("unknown policy '{other}' (egt|nash|stackelberg)")),
        }
    }
}

impl From<crate::baselines::BaselineKind> for Policy {
    fn from(k: crate::baselines::BaselineKind) -> Self {
        match k {
            crate::baselines::BaselineKind::NashPure => Policy::Nash,
            crate::baselines::BaselineKind::StackelbergAvLeader => Policy::Stackelberg,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvConfig {
    /// Distance to the merge point, m.
    pub d: f64,
    pub v: f64,
    /// The AV's own style weight.
    pub omega: f64,
    /// IDM headway used after the lane change, s.
    pub headway: f64,
}

impl Default for AvConfig {
    fn default() -> Self {
        AvConfig {
            d: 100.0,
            v: 10.0,
            omega: 0.5,
            headway: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvConfig {
    pub id: VehicleId,
    pub d: f64,
    pub v: f64,
    pub headway: HeadwaySpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Run length, s.
    pub duration: f64,
    pub dt: f64,
    pub decision_period: f64,
    /// Planning horizon in decision periods.
    pub horizon: usize,
    pub seed: u64,
    /// Right-of-way margin `T` used in the game, s.
    pub game_headway: f64,
    /// First-order response lag of main-road drivers, s.
    pub response_time: f64,
    pub idm: IdmParams,
    pub av: AvConfig,
    pub vehicles: Vec<MvConfig>,
    pub policy: Policy,
    pub reading: BranchReading,
}

/// The three reference headway settings, all on the same initial layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableScenario {
    I,
    II,
    III,
}

impl TableScenario {
    pub const ALL: [TableScenario; 3] = [TableScenario::I, TableScenario::II, TableScenario::III];
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::table(TableScenario::I)
    }
}

impl SimConfig {
    pub fn table(which: TableScenario) -> Self {
        const D: [f64; 5] = [173.2, 147.4, 121.6, 85.5, 70.0];
        let aggressive = HeadwaySpec::Normal { mean: 1.0, sigma: 0.5 };
        let conservative = HeadwaySpec::Normal { mean: 2.0, sigma: 0.5 };
        let fixed = HeadwaySpec::Fixed;
        let headways = match which {
            TableScenario::I => [fixed(2.0), fixed(2.0), aggressive, fixed(1.0), fixed(2.0)],
            TableScenario::II => [fixed(2.0), fixed(2.0), conservative, fixed(1.0), fixed(2.0)],
            TableScenario::III => [aggressive; 5],
        };
        SimConfig {
            duration: 10.0,
            dt: 0.1,
            decision_period: 1.0,
            horizon: 5,
            seed: 0,
            game_headway: 2.0,
            response_time: 1.5,
            idm: IdmParams::default(),
            av: AvConfig::default(),
            vehicles: D
                .iter()
                .zip(headways)
                .enumerate()
                .map(|(i, (&d, headway))| MvConfig {
                    id: VehicleId(i as u32 + 1),
                    d,
                    v: 10.0,
                    headway,
                })
                .collect(),
            policy: Policy::Egt,
            reading: BranchReading::Pseudocode,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn steps_per_decision(&self) -> usize {
        (self.decision_period / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > 0.0) || !(self.duration > 0.0) || !(self.decision_period > 0.0) {
            return Err("duration, dt and decision_period must be positive".into());
        }
        let k = self.decision_period / self.dt;
        if (k - k.round()).abs() > 1e-9 || k.round() < 1.0 {
            return Err(format!(
                "dt ({}) must divide decision_period ({})",
                self.dt, self.decision_period
            ));
        }
        if self.horizon == 0 || self.decision_period * self.horizon as f64 > self.duration + 1e-9 {
            return Err("decision_period * horizon must be positive and not exceed duration".into());
        }
        if !(self.game_headway > 0.0) || !(self.response_time >= 0.0) {
            return Err("game_headway must be positive and response_time non-negative".into());
        }
        self.idm.validate().map_err(|e| e.to_string())?;
        DrivingStyle::new(self.av.omega, self.av.headway).map_err(|e| format!("av: {e}"))?;
        if !(self.av.v >= 0.0) || !self.av.d.is_finite() {
            return Err("av: speed must be non-negative and distance finite".into());
        }
        if self.vehicles.is_empty() {
            return Err("at least one main-road vehicle is required".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for mv in &self.vehicles {
            if mv.id.is_av() || !seen.insert(mv.id) {
                return Err(format!("duplicate or reserved vehicle id {}", mv.id));
            }
            if !(mv.v >= 0.0) || !mv.d.is_finite() {
                return Err(format!("{}: speed must be non-negative and distance finite", mv.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManeuverKind {
    MergeAhead(VehicleId),
    YieldAndShift(VehicleId),
    /// No vehicle left behind the AV: join behind the platoon.
    MergeRear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Maneuver {
    pub kind: ManeuverKind,
    /// The gap is locked: the opponent confirmed its yield or the lane
    /// change has started. No further games are played.
    pub committed: bool,
}

impl Maneuver {
    pub fn new(kind: ManeuverKind) -> Self {
        Maneuver {
            kind,
            committed: false,
        }
    }
}

impl fmt::Display for ManeuverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManeuverKind::MergeAhead(id) => write!(f, "merge_ahead:{id}"),
            ManeuverKind::YieldAndShift(id) => write!(f, "yield_and_shift:{id}"),
            ManeuverKind::MergeRear => write!(f, "merge_rear"),
        }
    }
}

/// Map an equilibrium profile to a maneuver: merge only on (Merge, Yield).
pub fn decide_profile(profile: Option<StrategyState>, opponent: VehicleId) -> Maneuver {
    match profile {
        Some(s) if s.p == 0.0 && s.q == 1.0 => Maneuver::new(ManeuverKind::MergeAhead(opponent)),
        _ => Maneuver::new(ManeuverKind::YieldAndShift(opponent)),
    }
}

pub fn decide(report: &crate::egt::EquilibriumReport, opponent: VehicleId) -> Maneuver {
    decide_profile(report.selected(), opponent)
}

/// Longitudinal AV command: reach the merge point `T` ahead of (merge) or
/// behind (yield) the opponent with constant acceleration.
pub fn merge_control(ctx: &GameContext, kind: ManeuverKind) -> f64 {
    let base = ctx.mv.dist_to_merge / ctx.mv.speed;
    let t = match kind {
        ManeuverKind::MergeAhead(_) => (base - ctx.headway_t).max(T_MIN),
        ManeuverKind::YieldAndShift(_) | ManeuverKind::MergeRear => base + ctx.headway_t,
    };
    let u = 2.0 * (ctx.av.dist_to_merge - ctx.av.speed * t) / (t * t);
    u.clamp(AV_ACCEL_MIN, AV_ACCEL_MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneChangeRejection {
    NotInConvergenceArea,
    FrontGap,
    RearGap,
}

/// Move the AV onto the main lane if both bumper gaps are at least `s0`.
pub fn execute_lane_change(
    av: &VehicleState,
    front: Option<&VehicleState>,
    rear: Option<&VehicleState>,
    s0: f64,
) -> Result<VehicleState, LaneChangeRejection> {
    if av.s < S_MERGE || av.s > CONVERGENCE_END {
        return Err(LaneChangeRejection::NotInConvergenceArea);
    }
    if let Some(f) = front {
        if av.gap_to(f) < s0 {
            return Err(LaneChangeRejection::FrontGap);
        }
    }
    if let Some(r) = rear {
        if r.gap_to(av) < s0 {
            return Err(LaneChangeRejection::RearGap);
        }
    }
    Ok(VehicleState {
        lane: Lane::Main,
        ..*av
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub id: VehicleId,
    pub lane: Lane,
    pub s: f64,
    pub v: f64,
    pub a: f64,
    /// Vehicle this one was following at `t`, the AV included when it acted
    /// as a virtual leader.
    pub leader: Option<VehicleId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub t: f64,
    pub step: usize,
    pub period: usize,
    pub opponent: Option<VehicleId>,
    /// Selected ESS of the game, if any.
    pub ess: Option<StrategyState>,
    pub ess_multiple: bool,
    /// Profile the active policy acted on.
    pub profile: Option<StrategyState>,
    pub maneuver: Maneuver,
    /// Opponent's belief after this period's update.
    pub belief: Option<StyleBelief>,
    /// Period whose prediction fed this period's belief update.
    pub belief_source_period: Option<usize>,
    pub belief_updated: bool,
    pub true_omega: Option<f64>,
    /// 1-based AV priority after the decision.
    pub av_priority: usize,
    pub queue: Vec<VehicleId>,
    /// AV states over the planning horizon at decision-period spacing.
    pub plan: Vec<VehicleState>,
}

/// The gap the AV ends up in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeSlot {
    pub front: Option<VehicleId>,
    pub rear: Option<VehicleId>,
    /// The lane change completed inside the run.
    pub lane_changed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    pub policy: Policy,
    /// Vehicle order of every step row block.
    pub vehicle_ids: Vec<VehicleId>,
    /// `steps[k][i]` is vehicle `vehicle_ids[i]` at `t = k·dt`.
    pub steps: Vec<Vec<StepRecord>>,
    pub decisions: Vec<DecisionRecord>,
    pub headways: BTreeMap<VehicleId, f64>,
    pub collisions: Vec<(f64, VehicleId, VehicleId)>,
    pub lane_change_time: Option<f64>,
    pub final_slot: MergeSlot,
    pub final_queue: Vec<VehicleId>,
}

impl SimTrace {
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn column(&self, id: VehicleId) -> Option<Vec<StepRecord>> {
        let i = self.vehicle_ids.iter().position(|&x| x == id)?;
        Some(self.steps.iter().map(|row| row[i]).collect())
    }

    pub fn decision_at_step(&self, step: usize) -> Option<&DecisionRecord> {
        self.decisions.iter().find(|d| d.step == step)
    }
}

struct Pending {
    period: usize,
    opponent: VehicleId,
    ctx: GameContext,
    ess: StrategyState,
    v_prev: f64,
    /// The opponent was following the AV when the prediction was made.
    attributable: bool,
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    states: Vec<VehicleState>,
    idm: BTreeMap<VehicleId, IdmParams>,
    mv_order: Vec<VehicleId>,
    beliefs: BTreeMap<VehicleId, StyleBelief>,
    headways: BTreeMap<VehicleId, f64>,
    /// Vehicle directly behind the AV's target gap.
    rear: Option<VehicleId>,
    maneuver: Maneuver,
    lane_changed: bool,
    pending: Option<Pending>,
}

fn view(st: &VehicleState, reference: f64) -> AgentView {
    AgentView {
        dist_to_merge: (reference - st.s).max(0.0),
        speed: st.v.max(SPEED_FLOOR),
    }
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a SimConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut states = vec![VehicleState::new(
            VehicleId::AV,
            Lane::Ramp,
            S_MERGE - cfg.av.d,
            cfg.av.v,
        )];
        let mut idm = BTreeMap::new();
        let mut headways = BTreeMap::new();
        idm.insert(VehicleId::AV, cfg.idm.with_headway(cfg.av.headway));
        for mv in &cfg.vehicles {
            let t = mv.headway.sample(&mut rng);
            headways.insert(mv.id, t);
            idm.insert(mv.id, cfg.idm.with_headway(t));
            states.push(VehicleState::new(mv.id, Lane::Main, S_MERGE - mv.d, mv.v));
        }

        let mv_states: Vec<_> = states[1..].to_vec();
        let mv_order = merging_list(&mv_states).order;
        let queue = merging_list(&states);
        let xi0 = queue.av_priority().expect("AV in queue");
        let rear = queue.at(xi0 + 1);
        let maneuver = Maneuver::new(match rear {
            Some(id) => ManeuverKind::MergeAhead(id),
            None => ManeuverKind::MergeRear,
        });

        let mut sim = Sim {
            cfg,
            states,
            idm,
            mv_order,
            beliefs: BTreeMap::new(),
            headways,
            rear,
            maneuver,
            lane_changed: false,
            pending: None,
        };
        // drivers start already settled on their t=0 command
        let cmds = sim.mv_commands();
        for (st, (a, _)) in sim.states.iter_mut().skip(1).zip(cmds) {
            st.a = a;
        }
        sim
    }

    fn av(&self) -> &VehicleState {
        &self.states[0]
    }

    fn state(&self, id: VehicleId) -> &VehicleState {
        self.states.iter().find(|s| s.id == id).expect("known id")
    }

    /// Vehicle directly ahead of the target gap in MV priority order.
    fn front(&self) -> Option<VehicleId> {
        match self.rear {
            Some(r) => {
                let i = self.mv_order.iter().position(|&x| x == r)?;
                i.checked_sub(1).map(|j| self.mv_order[j])
            }
            None => self.mv_order.last().copied(),
        }
    }

    fn next_behind(&self, id: VehicleId) -> Option<VehicleId> {
        let i = self.mv_order.iter().position(|&x| x == id)?;
        self.mv_order.get(i + 1).copied()
    }

    fn queue(&self) -> PriorityQueue {
        let mut order: Vec<VehicleId> = self.mv_order.clone();
        match self.rear.and_then(|r| order.iter().position(|&x| x == r)) {
            Some(i) => order.insert(i, VehicleId::AV),
            None => order.push(VehicleId::AV),
        }
        PriorityQueue { order }
    }

    fn in_merging_phase(&self) -> bool {
        !self.lane_changed && self.av().s < S_MERGE
    }

    fn context(&self, opponent: VehicleId, omega: f64) -> GameContext {
        let av = self.av();
        let mv = self.state(opponent);
        let reference = if av.s < S_MERGE { S_MERGE } else { CONVERGENCE_END };
        GameContext {
            av: view(av, reference),
            mv: view(mv, reference),
            av_style: DrivingStyle {
                omega: self.cfg.av.omega,
                headway: self.cfg.av.headway,
            },
            mv_style: DrivingStyle {
                omega,
                headway: self.headways[&opponent],
            },
            headway_t: self.cfg.game_headway,
        }
    }

    fn decide_period(&mut self, k: usize, period: usize) -> Option<DecisionRecord> {
        if !self.in_merging_phase() {
            return None;
        }
        let t = k as f64 * self.cfg.dt;

        // Belief update from last period's prediction, only while that game is still on.
        let mut belief_updated = false;
        let mut belief_source_period = None;
        if let Some(p) = self.pending.take() {
            if self.rear == Some(p.opponent) && p.attributable {
                let r = observed_reaction(self.state(p.opponent).v, p.v_prev);
                let b = self.beliefs.entry(p.opponent).or_default();
                let upd = update_belief_with(*b, p.ess, r, &p.ctx, DEFAULT_GRID_STEP, self.cfg.reading);
                *b = upd.belief;
                belief_updated = upd.updated;
                belief_source_period = Some(p.period);
                // a confirmed yield locks the gap
                if self.maneuver.kind == ManeuverKind::MergeAhead(p.opponent)
                    && p.ess.q == 1.0
                    && !r.accelerated
                {
                    self.maneuver.committed = true;
                }
            }
        }

        if self.maneuver.committed {
            let queue = self.queue();
            return Some(DecisionRecord {
                t,
                step: k,
                period,
                opponent: self.rear,
                ess: None,
                ess_multiple: false,
                profile: None,
                maneuver: self.maneuver,
                belief: self.rear.map(|r| self.beliefs[&r]),
                belief_source_period,
                belief_updated,
                true_omega: self.rear.map(|r| omega_from_headway(self.headways[&r])),
                av_priority: queue.av_priority().unwrap_or(queue.len()),
                queue: queue.order,
                plan: self.plan(),
            });
        }

        let Some(opponent) = self.rear else {
            self.maneuver = Maneuver::new(ManeuverKind::MergeRear);
            let queue = self.queue();
            return Some(DecisionRecord {
                t,
                step: k,
                period,
                opponent: None,
                ess: None,
                ess_multiple: false,
                profile: None,
                maneuver: self.maneuver,
                belief: None,
                belief_source_period,
                belief_updated,
                true_omega: None,
                av_priority: queue.av_priority().unwrap_or(queue.len()),
                queue: queue.order,
                plan: self.plan(),
            });
        };

        let belief = *self.beliefs.entry(opponent).or_default();
        let ctx = self.context(opponent, belief.omega_hat);
        let m = build_matrix(&ctx);
        let report = solve_ess(&m);
        let ess = report.selected();
        let profile = match self.cfg.policy {
            Policy::Egt => ess,
            Policy::Nash => nash_pure(&m).selected,
            Policy::Stackelberg => Some(stackelberg(&m)),
        };
        let maneuver = decide_profile(profile, opponent);
        self.maneuver = maneuver;

        if let Some(e) = ess {
            let i = self.states.iter().position(|s| s.id == opponent).unwrap();
            let attributable = self
                .leader_of(i, true)
                .is_some_and(|(j, _)| self.states[j].id.is_av());
            self.pending = Some(Pending {
                period,
                opponent,
                ctx,
                ess: e,
                v_prev: self.state(opponent).v,
                attributable,
            });
        }
        if let ManeuverKind::YieldAndShift(_) = maneuver.kind {
            self.rear = self.next_behind(opponent);
        }

        let queue = self.queue();
        Some(DecisionRecord {
            t,
            step: k,
            period,
            opponent: Some(opponent),
            ess,
            ess_multiple: report.is_multiple(),
            profile,
            maneuver,
            belief: Some(belief),
            belief_source_period,
            belief_updated,
            true_omega: Some(omega_from_headway(self.headways[&opponent])),
            av_priority: queue.av_priority().unwrap_or(queue.len()),
            queue: queue.order,
            plan: self.plan(),
        })
    }

    /// Hold the current AV command over the horizon.
    fn plan(&self) -> Vec<VehicleState> {
        let u = self.av_command();
        let per = self.cfg.steps_per_decision();
        let mut st = *self.av();
        let mut out = Vec::with_capacity(self.cfg.horizon);
        for _ in 0..self.cfg.horizon {
            for _ in 0..per {
                st = step_kinematics(&st, u, self.cfg.dt);
            }
            out.push(st);
        }
        out
    }

    fn av_command(&self) -> f64 {
        let av = self.av();
        if self.lane_changed {
            let leader = self.leader_of(0, false);
            return self.idm_or_brake(VehicleId::AV, leader);
        }
        let ctx_for = |id: VehicleId| self.context(id, 0.5);
        let mut u = match self.maneuver.kind {
            ManeuverKind::MergeAhead(opp) => {
                let mut u = merge_control(&ctx_for(opp), self.maneuver.kind);
                if let Some(f) = self.front() {
                    u = u.min(merge_control(&ctx_for(f), ManeuverKind::YieldAndShift(f)));
                }
                u
            }
            ManeuverKind::YieldAndShift(opp) => merge_control(&ctx_for(opp), self.maneuver.kind),
            ManeuverKind::MergeRear => match self.front() {
                Some(f) => merge_control(&ctx_for(f), ManeuverKind::MergeRear),
                None => {
                    let p = &self.idm[&VehicleId::AV];
                    idm_accel(p, av.v, FREE_ROAD_GAP, 0.0).unwrap_or(0.0)
                }
            },
        };
        // stop before the end of the ramp
        let p = &self.idm[&VehicleId::AV];
        let ramp_gap = CONVERGENCE_END - av.s - 0.5 * av.length;
        let stop = if ramp_gap > 0.0 {
            idm_accel(p, av.v, ramp_gap, av.v).unwrap_or(AV_ACCEL_MIN)
        } else {
            AV_ACCEL_MIN
        };
        u = u.min(stop);
        u.clamp(AV_ACCEL_MIN, AV_ACCEL_MAX)
    }

    /// Nearest vehicle ahead of `states[i]` it must follow. The AV counts for
    /// the MV behind its target gap while it is still on the ramp.
    fn leader_of(&self, i: usize, virtual_av: bool) -> Option<(usize, f64)> {
        let me = &self.states[i];
        let mut best: Option<(usize, f64)> = None;
        for (j, other) in self.states.iter().enumerate() {
            if j == i || other.s < me.s || (other.s == me.s && other.id > me.id) {
                continue;
            }
            let same_lane = other.lane == me.lane;
            let is_virtual = virtual_av && other.id.is_av() && other.lane == Lane::Ramp;
            if !(same_lane || is_virtual) {
                continue;
            }
            let gap = me.gap_to(other);
            if is_virtual && gap <= 0.0 {
                continue;
            }
            if best.is_none_or(|(_, g)| gap < g) {
                best = Some((j, gap));
            }
        }
        best
    }

    fn idm_or_brake(&self, id: VehicleId, leader: Option<(usize, f64)>) -> f64 {
        let i = self.states.iter().position(|s| s.id == id).unwrap();
        let me = &self.states[i];
        let p = &self.idm[&id];
        let (gap, dv) = match leader {
            Some((j, gap)) => (gap, me.v - self.states[j].v),
            None => (FREE_ROAD_GAP, 0.0),
        };
        idm_accel(p, me.v, gap, dv).unwrap_or(-B_EMERGENCY)
    }

    fn mv_commands(&self) -> Vec<(f64, Option<VehicleId>)> {
        let target = if self.lane_changed { None } else { self.rear };
        (1..self.states.len())
            .map(|i| {
                let id = self.states[i].id;
                let leader = self.leader_of(i, target == Some(id));
                (self.idm_or_brake(id, leader), leader.map(|(j, _)| self.states[j].id))
            })
            .collect()
    }

    fn try_lane_change(&mut self) {
        let av = *self.av();
        if self.lane_changed || av.s < S_MERGE {
            return;
        }
        if let ManeuverKind::YieldAndShift(_) = self.maneuver.kind {
            return;
        }
        // actual main-lane neighbours must match the target gap
        let main: Vec<&VehicleState> = self.states[1..].iter().filter(|s| s.lane == Lane::Main).collect();
        let front = main
            .iter()
            .filter(|s| s.s > av.s)
            .min_by(|a, b| a.s.total_cmp(&b.s))
            .copied();
        let rear = main
            .iter()
            .filter(|s| s.s <= av.s)
            .max_by(|a, b| a.s.total_cmp(&b.s))
            .copied();
        let matches = rear.map(|r| r.id) == self.rear && front.map(|f| f.id) == self.front();
        let result = if matches {
            execute_lane_change(&av, front, rear, self.cfg.idm.s0)
        } else {
            Err(LaneChangeRejection::RearGap)
        };
        match result {
            Ok(st) => {
                self.states[0] = st;
                self.lane_changed = true;
                self.maneuver.committed = true;
            }
            Err(_) => {
                // out of ramp: give up this gap
                let near_end = av.s >= CONVERGENCE_END - 2.0 * av.length;
                if near_end && rear.map(|r| r.id) == self.rear {
                    if let Some(r) = self.rear {
                        self.maneuver = Maneuver::new(ManeuverKind::YieldAndShift(r));
                        self.rear = self.next_behind(r);
                    }
                }
            }
        }
    }

    fn final_slot(&self) -> MergeSlot {
        if self.lane_changed {
            let mut main: Vec<&VehicleState> =
                self.states.iter().filter(|s| s.lane == Lane::Main).collect();
            main.sort_by(|a, b| b.s.total_cmp(&a.s).then(a.id.cmp(&b.id)));
            let i = main.iter().position(|s| s.id.is_av()).unwrap();
            MergeSlot {
                front: i.checked_sub(1).map(|j| main[j].id),
                rear: main.get(i + 1).map(|s| s.id),
                lane_changed: true,
            }
        } else {
            MergeSlot {
                front: self.front(),
                rear: self.rear,
                lane_changed: false,
            }
        }
    }
}

/// Run one closed-loop scenario. Deterministic in `(cfg, cfg.seed)`.
pub fn run_scenario(cfg: &SimConfig) -> Result<SimTrace, String> {
    cfg.validate()?;
    let mut sim = Sim::new(cfg);
    let n = cfg.n_steps();
    let per = cfg.steps_per_decision();
    let lag = if cfg.response_time > 0.0 {
        (cfg.dt / cfg.response_time).min(1.0)
    } else {
        1.0
    };

    let vehicle_ids: Vec<VehicleId> = sim.states.iter().map(|s| s.id).collect();
    let mut steps = Vec::with_capacity(n + 1);
    let mut decisions = Vec::new();
    let mut collisions = Vec::new();
    let mut lane_change_time = None;

    // the last row records the state at t = duration and does not advance
    for k in 0..=n {
        let t = k as f64 * cfg.dt;
        let last = k == n;
        if k % per == 0 && !last {
            if let Some(rec) = sim.decide_period(k, k / per) {
                decisions.push(rec);
            }
        }
        let was_changed = sim.lane_changed;
        if !last {
            sim.try_lane_change();
        }
        if !was_changed && sim.lane_changed {
            lane_change_time = Some(t);
        }

        let u_av = sim.av_command();
        let av_leader = if sim.lane_changed {
            sim.leader_of(0, false).map(|(j, _)| sim.states[j].id)
        } else {
            None
        };
        let cmds = sim.mv_commands();
        let mut controls = Vec::with_capacity(sim.states.len());
        let mut leaders = Vec::with_capacity(sim.states.len());
        controls.push(u_av);
        leaders.push(av_leader);
        for (st, (cmd, leader)) in sim.states[1..].iter().zip(cmds) {
            controls.push(st.a + (cmd - st.a) * lag);
            leaders.push(leader);
        }

        for (a, b) in check_collision(&sim.states) {
            collisions.push((t, a, b));
        }
        steps.push(
            sim.states
                .iter()
                .zip(controls.iter().zip(&leaders))
                .map(|(st, (&a, &leader))| StepRecord {
                    t,
                    id: st.id,
                    lane: st.lane,
                    s: st.s,
                    v: st.v,
                    a,
                    leader,
                })
                .collect(),
        );
        if last {
            break;
        }
        for (st, &u) in sim.states.iter_mut().zip(&controls) {
            *st = step_kinematics(st, u, cfg.dt);
        }
    }

    let final_slot = sim.final_slot();
    let final_queue = sim.queue().order;
    Ok(SimTrace {
        dt: cfg.dt,
        duration: cfg.duration,
        seed: cfg.seed,
        policy: cfg.policy,
        vehicle_ids,
        steps,
        decisions,
        headways: sim.headways,
        collisions,
        lane_change_time,
        final_slot,
        final_queue,
    })
}
