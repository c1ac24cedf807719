//! Multi-objective cell costs and the game matrix built from them.
//!
//! Each player's cost is `ω·t + (1-ω)·ā²` over arrival time and average
//! acceleration, plus a shared conflict term `ω_s·|ā_av + ā_mv|` that is only
//! switched on for conflicting strategy pairs. The matrix stores fitness as
//! negated cost so that replicator dynamics favour cheaper actions.

use std::fmt;

use crate::egt::PayoffMatrix;
use crate::error::ModelError;

/// Lower clamp on the go-branch arrival time, seconds.
pub const T_MIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AvMove {
    Yield,
    Merge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MvMove {
    Yield,
    Accelerate,
}

impl AvMove {
    pub const ALL: [AvMove; 2] = [AvMove::Yield, AvMove::Merge];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl MvMove {
    pub const ALL: [MvMove; 2] = [MvMove::Yield, MvMove::Accelerate];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StrategyPair {
    pub av: AvMove,
    pub mv: MvMove,
}

impl StrategyPair {
    pub const fn new(av: AvMove, mv: MvMove) -> Self {
        StrategyPair { av, mv }
    }

    pub fn all() -> impl Iterator<Item = StrategyPair> {
        AvMove::ALL
            .into_iter()
            .flat_map(|av| MvMove::ALL.into_iter().map(move |mv| StrategyPair { av, mv }))
    }
}

impl fmt::Display for StrategyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?})", self.av, self.mv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Av,
    Mv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivingStyle {
    /// Efficiency weight in (0, 1); larger is more aggressive.
    pub omega: f64,
    /// Time headway, seconds.
    pub headway: f64,
}

impl DrivingStyle {
    pub fn new(omega: f64, headway: f64) -> Result<Self, ModelError> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(ModelError::StyleWeight(omega));
        }
        if !(headway > 0.0) {
            return Err(ModelError::Headway(headway));
        }
        Ok(DrivingStyle { omega, headway })
    }
}

/// One player's kinematic view of the merge point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentView {
    pub dist_to_merge: f64,
    pub speed: f64,
}

impl AgentView {
    pub fn new(dist_to_merge: f64, speed: f64) -> Result<Self, ModelError> {
        if !(dist_to_merge >= 0.0) {
            return Err(ModelError::Distance(dist_to_merge));
        }
        if !(speed > 0.0) {
            return Err(ModelError::Speed(speed));
        }
        Ok(AgentView {
            dist_to_merge,
            speed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameContext {
    pub av: AgentView,
    pub mv: AgentView,
    pub av_style: DrivingStyle,
    pub mv_style: DrivingStyle,
    /// Right-of-way margin used for target arrival times, seconds.
    pub headway_t: f64,
}

impl GameContext {
    pub fn new(
        av: AgentView,
        mv: AgentView,
        av_style: DrivingStyle,
        mv_style: DrivingStyle,
        headway_t: f64,
    ) -> Result<Self, ModelError> {
        let ctx = GameContext {
            av,
            mv,
            av_style,
            mv_style,
            headway_t,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        AgentView::new(self.av.dist_to_merge, self.av.speed)?;
        AgentView::new(self.mv.dist_to_merge, self.mv.speed)?;
        DrivingStyle::new(self.av_style.omega, self.av_style.headway)?;
        DrivingStyle::new(self.mv_style.omega, self.mv_style.headway)?;
        if !(self.headway_t > 0.0) {
            return Err(ModelError::Headway(self.headway_t));
        }
        Ok(())
    }

    /// Same context with a different MV style weight. The weight is not
    /// range-checked so that scans may touch the closed interval.
    pub fn with_mv_omega(&self, omega: f64) -> Self {
        let mut ctx = *self;
        ctx.mv_style.omega = omega;
        ctx
    }

    fn own(&self, role: Role) -> (&AgentView, &DrivingStyle) {
        match role {
            Role::Av => (&self.av, &self.av_style),
            Role::Mv => (&self.mv, &self.mv_style),
        }
    }

    fn opponent(&self, role: Role) -> &AgentView {
        match role {
            Role::Av => &self.mv,
            Role::Mv => &self.av,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalTime {
    pub seconds: f64,
    /// The go branch fell below `T_MIN` and was clamped.
    pub clamped: bool,
}

/// Target arrival time at the merge point: the opponent's projected arrival
/// plus `T` when yielding, minus `T` when going first.
pub fn target_arrival_time(ctx: &GameContext, role: Role, yields: bool) -> ArrivalTime {
    let opp = ctx.opponent(role);
    let base = opp.dist_to_merge / opp.speed;
    if yields {
        ArrivalTime {
            seconds: base + ctx.headway_t,
            clamped: false,
        }
    } else {
        let t = base - ctx.headway_t;
        if t <= T_MIN {
            ArrivalTime {
                seconds: T_MIN,
                clamped: true,
            }
        } else {
            ArrivalTime {
                seconds: t,
                clamped: false,
            }
        }
    }
}

/// Constant acceleration that covers `d` in time `t` starting at speed `v`.
pub fn required_avg_accel(d: f64, v: f64, t: f64) -> Result<f64, ModelError> {
    if !(t > 0.0) {
        return Err(ModelError::ArrivalTime(t));
    }
    Ok(2.0 * (d - v * t) / (t * t))
}

/// 1 for the conflicting pairs (both go, or both hold back), else 0.
pub fn conflict_weight(pair: StrategyPair) -> f64 {
    match (pair.av, pair.mv) {
        (AvMove::Merge, MvMove::Accelerate) | (AvMove::Yield, MvMove::Yield) => 1.0,
        (AvMove::Merge, MvMove::Yield) | (AvMove::Yield, MvMove::Accelerate) => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellCosts {
    pub j_av: f64,
    pub j_mv: f64,
    pub t_av: f64,
    pub t_mv: f64,
    pub accel_av: f64,
    pub accel_mv: f64,
    /// Shared conflict term added to both costs.
    pub safety: f64,
    /// At least one go-branch arrival time had to be clamped.
    pub infeasible_aggressive: bool,
}

pub fn cell_costs(ctx: &GameContext, pair: StrategyPair) -> CellCosts {
    let arr_av = target_arrival_time(ctx, Role::Av, pair.av == AvMove::Yield);
    let arr_mv = target_arrival_time(ctx, Role::Mv, pair.mv == MvMove::Yield);

    let accel = |role: Role, t: f64| {
        let (view, _) = ctx.own(role);
        // t >= T_MIN > 0 by construction
        2.0 * (view.dist_to_merge - view.speed * t) / (t * t)
    };
    let accel_av = accel(Role::Av, arr_av.seconds);
    let accel_mv = accel(Role::Mv, arr_mv.seconds);
    let safety = conflict_weight(pair) * (accel_av + accel_mv).abs();

    let cost = |role: Role, t: f64, a: f64| {
        let w = ctx.own(role).1.omega;
        w * t + (1.0 - w) * a * a + safety
    };
    CellCosts {
        j_av: cost(Role::Av, arr_av.seconds, accel_av),
        j_mv: cost(Role::Mv, arr_mv.seconds, accel_mv),
        t_av: arr_av.seconds,
        t_mv: arr_mv.seconds,
        accel_av,
        accel_mv,
        safety,
        infeasible_aggressive: arr_av.clamped || arr_mv.clamped,
    }
}

pub fn build_matrix(ctx: &GameContext) -> PayoffMatrix {
    let mut m = PayoffMatrix::ZERO;
    for pair in StrategyPair::all() {
        let c = cell_costs(ctx, pair);
        m.u[pair.av.index()][pair.mv.index()] = -c.j_av;
        m.v[pair.av.index()][pair.mv.index()] = -c.j_mv;
    }
    m
}
