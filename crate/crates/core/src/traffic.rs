//! Longitudinal vehicle states, IDM car following, merge priority, and
//! collision checks on a shared arc-length coordinate.
//!
//! The ramp runs parallel to the main lane and shares `s`; the centerlines
//! meet at [`S_MERGE`].

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::TrafficError;

pub const S_MERGE: f64 = 200.0;
pub const MERGING_AREA_START: f64 = 120.0;
pub const CONVERGENCE_END: f64 = 260.0;
pub const DEFAULT_LENGTH: f64 = 5.0;
/// Emergency braking floor for IDM output, m/s².
pub const B_EMERGENCY: f64 = 8.0;
/// Leader gap used when nothing is ahead, m.
pub const FREE_ROAD_GAP: f64 = 1e6;

/// Vehicle identifier; 0 is the AV, `n > 0` is main-road vehicle MV`n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VehicleId(pub u32);

impl VehicleId {
    pub const AV: VehicleId = VehicleId(0);

    pub fn is_av(self) -> bool {
        self == Self::AV
    }

    pub fn parse(label: &str) -> Option<VehicleId> {
        if label.eq_ignore_ascii_case("av") {
            return Some(Self::AV);
        }
        let digits = label.strip_prefix("MV").or_else(|| label.strip_prefix("mv"))?;
        match digits.parse::<u32>() {
            Ok(0) | Err(_) => None,
            Ok(n) => Some(VehicleId(n)),
        }
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_av() {
            write!(f, "AV")
        } else {
            write!(f, "MV{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lane {
    Main,
    Ramp,
}

impl fmt::Display for Lane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lane::Main => "main",
            Lane::Ramp => "ramp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub id: VehicleId,
    pub lane: Lane,
    /// Arc-length position, m.
    pub s: f64,
    pub v: f64,
    pub a: f64,
    pub length: f64,
}

impl VehicleState {
    pub fn new(id: VehicleId, lane: Lane, s: f64, v: f64) -> Self {
        VehicleState {
            id,
            lane,
            s,
            v,
            a: 0.0,
            length: DEFAULT_LENGTH,
        }
    }

    pub fn dist_to_merge(&self) -> f64 {
        S_MERGE - self.s
    }

    /// Bumper-to-bumper gap from `self` to a vehicle ahead of it.
    pub fn gap_to(&self, leader: &VehicleState) -> f64 {
        leader.s - self.s - 0.5 * (leader.length + self.length)
    }
}

/// Discrete double integrator with a no-reversing clamp.
pub fn step_kinematics(state: &VehicleState, u: f64, ts: f64) -> VehicleState {
    VehicleState {
        s: state.s + ts * state.v,
        v: (state.v + ts * u).max(0.0),
        a: u,
        ..*state
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmParams {
    pub v0: f64,
    pub t_headway: f64,
    pub a_max: f64,
    pub b: f64,
    pub s0: f64,
    pub delta: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            v0: 15.0,
            t_headway: 1.5,
            a_max: 1.5,
            b: 2.0,
            s0: 2.0,
            delta: 4.0,
        }
    }
}

impl IdmParams {
    pub fn with_headway(self, t_headway: f64) -> Self {
        IdmParams { t_headway, ..self }
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        let positive = [
            (self.v0, "v0"),
            (self.t_headway, "T"),
            (self.a_max, "a_max"),
            (self.b, "b"),
            (self.s0, "s0"),
        ];
        for (x, name) in positive {
            if !(x > 0.0) {
                return Err(TrafficError::IdmParams(name));
            }
        }
        if !(self.delta >= 1.0) {
            return Err(TrafficError::IdmParams("delta"));
        }
        Ok(())
    }

    /// Desired dynamic gap `s*`.
    pub fn desired_gap(&self, v: f64, dv: f64) -> f64 {
        self.s0 + v * self.t_headway + v * dv / (2.0 * (self.a_max * self.b).sqrt())
    }
}

/// IDM acceleration; `dv` is own speed minus leader speed. Output clamped to
/// `[-B_EMERGENCY, a_max]`.
pub fn idm_accel(p: &IdmParams, v: f64, gap: f64, dv: f64) -> Result<f64, TrafficError> {
    if !(gap > 0.0) {
        return Err(TrafficError::Collided {
            follower: String::new(),
            gap,
        });
    }
    let s_star = p.desired_gap(v, dv);
    let a = p.a_max * (1.0 - (v / p.v0).powf(p.delta) - (s_star / gap).powi(2));
    Ok(a.clamp(-B_EMERGENCY, p.a_max))
}

/// Vehicle ids in merge priority order (index 0 = highest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityQueue {
    pub order: Vec<VehicleId>,
}

impl PriorityQueue {
    /// 1-based priority of `id`.
    pub fn priority(&self, id: VehicleId) -> Option<usize> {
        self.order.iter().position(|&x| x == id).map(|i| i + 1)
    }

    pub fn av_priority(&self) -> Option<usize> {
        self.priority(VehicleId::AV)
    }

    /// Vehicle at 1-based priority `xi`.
    pub fn at(&self, xi: usize) -> Option<VehicleId> {
        xi.checked_sub(1).and_then(|i| self.order.get(i)).copied()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

fn arrival_time(st: &VehicleState) -> f64 {
    let d = st.dist_to_merge();
    if st.v > 0.0 {
        d / st.v
    } else if d <= 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    }
}

/// Order by projected merge-point arrival `d/v`, main lane first on ties,
/// then by id.
pub fn merging_list(states: &[VehicleState]) -> PriorityQueue {
    let mut keyed: Vec<_> = states.iter().map(|st| (arrival_time(st), st)).collect();
    keyed.sort_by(|(ta, a), (tb, b)| {
        ta.partial_cmp(tb)
            .unwrap_or(Ordering::Equal)
            .then_with(|| (a.lane != Lane::Main).cmp(&(b.lane != Lane::Main)))
            .then_with(|| a.id.cmp(&b.id))
    });
    PriorityQueue {
        order: keyed.into_iter().map(|(_, st)| st.id).collect(),
    }
}

/// Pairs of same-lane vehicles whose bodies overlap.
pub fn check_collision(states: &[VehicleState]) -> Vec<(VehicleId, VehicleId)> {
    let mut hits = Vec::new();
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            if a.lane == b.lane && (a.s - b.s).abs() < 0.5 * (a.length + b.length) {
                hits.push((a.id.min(b.id), a.id.max(b.id)));
            }
        }
    }
    hits
}

/// Ground-truth style weight implied by an IDM time headway.
pub fn omega_from_headway(t_headway: f64) -> f64 {
    ((2.5 - t_headway) / 2.0).clamp(0.05, 0.95)
}

pub const HEADWAY_MIN: f64 = 0.5;
pub const HEADWAY_MAX: f64 = 3.5;

/// Time headway specification for one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadwaySpec {
    Fixed(f64),
    /// Normal distribution truncated to `[HEADWAY_MIN, HEADWAY_MAX]`.
    Normal { mean: f64, sigma: f64 },
}

impl HeadwaySpec {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            HeadwaySpec::Fixed(t) => t,
            HeadwaySpec::Normal { mean, sigma } => {
                if sigma <= 0.0 {
                    return mean.clamp(HEADWAY_MIN, HEADWAY_MAX);
                }
                let normal = Normal::new(mean, sigma).expect("finite sigma");
                for _ in 0..10_000 {
                    let t = normal.sample(rng);
                    if (HEADWAY_MIN..=HEADWAY_MAX).contains(&t) {
                        return t;
                    }
                }
                mean.clamp(HEADWAY_MIN, HEADWAY_MAX)
            }
        }
    }
}

impl fmt::Display for HeadwaySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadwaySpec::Fixed(t) => write!(f, "fixed:{t}"),
            HeadwaySpec::Normal { mean, sigma } => write!(f, "normal:{mean},{sigma}"),
        }
    }
}

impl std::str::FromStr for HeadwaySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number '{x}' in headway '{s}'"))
        };
        if let Some(rest) = s.strip_prefix("fixed:") {
            let t = num(rest)?;
            if !(t > 0.0) {
                return Err(format!("headway must be positive: '{s}'"));
            }
            Ok(HeadwaySpec::Fixed(t))
        } else if let Some(rest) = s.strip_prefix("normal:") {
            let (m, sd) = rest
                .split_once(',')
                .ok_or_else(|| format!("expected normal:<mean>,<sigma>, got '{s}'"))?;
            let (mean, sigma) = (num(m)?, num(sd)?);
            if !(sigma >= 0.0) {
                return Err(format!("sigma must be non-negative: '{s}'"));
            }
            Ok(HeadwaySpec::Normal { mean, sigma })
        } else {
            Err(format!("headway must be fixed:<x> or normal:<mean>,<sigma>, got '{s}'"))
        }
    }
}
