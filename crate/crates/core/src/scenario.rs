//! Scenario files.
//!
//! TOML with a `[sim]` table, an optional `[idm]` table, an `[av]` table and
//! one `[[vehicle]]` entry per main-road vehicle. Unknown keys are rejected.
//! The grammar is written out in `docs/scenario-format.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::estimation::BranchReading;
use crate::payoff::{AgentView, DrivingStyle, GameContext};
use crate::runner::{AvConfig, MvConfig, SimConfig};
use crate::traffic::{merging_list, HeadwaySpec, IdmParams, Lane, VehicleId, VehicleState, S_MERGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    #[serde(default)]
    sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    idm: Option<IdmSection>,
    av: AvSection,
    #[serde(rename = "vehicle")]
    vehicles: Vec<VehicleSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SimSection {
    duration: f64,
    dt: f64,
    decision_period: f64,
    horizon: usize,
    seed: u64,
    game_headway: f64,
    response_time: f64,
    reading: String,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        SimSection {
            duration: d.duration,
            dt: d.dt,
            decision_period: d.decision_period,
            horizon: d.horizon,
            seed: d.seed,
            game_headway: d.game_headway,
            response_time: d.response_time,
            reading: "pseudocode".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct IdmSection {
    v0: f64,
    a_max: f64,
    b: f64,
    s0: f64,
    delta: f64,
}

impl Default for IdmSection {
    fn default() -> Self {
        let p = IdmParams::default();
        IdmSection {
            v0: p.v0,
            a_max: p.a_max,
            b: p.b,
            s0: p.s0,
            delta: p.delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AvSection {
    d: f64,
    v: f64,
    #[serde(default = "half")]
    omega: f64,
    #[serde(default = "av_headway")]
    headway: f64,
}

fn half() -> f64 {
    0.5
}

fn av_headway() -> f64 {
    AvConfig::default().headway
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleSection {
    id: String,
    #[serde(default = "main_lane")]
    lane: String,
    d: f64,
    v: f64,
    headway: String,
}

fn main_lane() -> String {
    "main".into()
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn reading_from(s: &str) -> Result<BranchReading, ConfigError> {
    match s {
        "pseudocode" => Ok(BranchReading::Pseudocode),
        "prose" => Ok(BranchReading::Prose),
        other => Err(invalid(format!("sim.reading: unknown value '{other}' (pseudocode|prose)"))),
    }
}

pub fn parse_scenario(text: &str) -> Result<SimConfig, ConfigError> {
    let f: File = toml::from_str(text)?;
    let reading = reading_from(&f.sim.reading)?;
    let idm_s = f.idm.unwrap_or_default();
    let idm = IdmParams {
        v0: idm_s.v0,
        a_max: idm_s.a_max,
        b: idm_s.b,
        s0: idm_s.s0,
        delta: idm_s.delta,
        ..IdmParams::default()
    };
    let mut vehicles = Vec::with_capacity(f.vehicles.len());
    for v in &f.vehicles {
        let id = VehicleId::parse(&v.id)
            .filter(|id| !id.is_av())
            .ok_or_else(|| invalid(format!("vehicle.id: expected MV<n>, got '{}'", v.id)))?;
        if v.lane != "main" {
            return Err(invalid(format!("{id}: lane must be \"main\" (got \"{}\")", v.lane)));
        }
        let headway: HeadwaySpec = v
            .headway
            .parse()
            .map_err(|e: String| invalid(format!("{id}: headway: {e}")))?;
        vehicles.push(MvConfig {
            id,
            d: v.d,
            v: v.v,
            headway,
        });
    }
    let cfg = SimConfig {
        duration: f.sim.duration,
        dt: f.sim.dt,
        decision_period: f.sim.decision_period,
        horizon: f.sim.horizon,
        seed: f.sim.seed,
        game_headway: f.sim.game_headway,
        response_time: f.sim.response_time,
        idm,
        av: AvConfig {
            d: f.av.d,
            v: f.av.v,
            omega: f.av.omega,
            headway: f.av.headway,
        },
        vehicles,
        policy: Default::default(),
        reading,
    };
    cfg.validate().map_err(ConfigError::Invalid)?;
    Ok(cfg)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<SimConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// Serialize a config back to the file format. Policy is not part of it.
pub fn to_toml(cfg: &SimConfig) -> String {
    let f = File {
        sim: SimSection {
            duration: cfg.duration,
            dt: cfg.dt,
            decision_period: cfg.decision_period,
            horizon: cfg.horizon,
            seed: cfg.seed,
            game_headway: cfg.game_headway,
            response_time: cfg.response_time,
            reading: match cfg.reading {
                BranchReading::Pseudocode => "pseudocode".into(),
                BranchReading::Prose => "prose".into(),
            },
        },
        idm: Some(IdmSection {
            v0: cfg.idm.v0,
            a_max: cfg.idm.a_max,
            b: cfg.idm.b,
            s0: cfg.idm.s0,
            delta: cfg.idm.delta,
        }),
        av: AvSection {
            d: cfg.av.d,
            v: cfg.av.v,
            omega: cfg.av.omega,
            headway: cfg.av.headway,
        },
        vehicles: cfg
            .vehicles
            .iter()
            .map(|v| VehicleSection {
                id: v.id.to_string(),
                lane: Lane::Main.to_string(),
                d: v.d,
                v: v.v,
                headway: v.headway.to_string(),
            })
            .collect(),
    };
    toml::to_string(&f).expect("plain tables serialize")
}

/// Game context between the AV and the first vehicle queued behind it, at
/// the initial states. Used by the estimation testbench.
pub fn initial_context(cfg: &SimConfig) -> Result<GameContext, ConfigError> {
    let mut states = vec![VehicleState::new(VehicleId::AV, Lane::Ramp, S_MERGE - cfg.av.d, cfg.av.v)];
    states.extend(
        cfg.vehicles
            .iter()
            .map(|m| VehicleState::new(m.id, Lane::Main, S_MERGE - m.d, m.v)),
    );
    let q = merging_list(&states);
    let xi = q.av_priority().expect("AV is queued");
    let rear = q
        .at(xi + 1)
        .ok_or_else(|| invalid("no main-road vehicle is queued behind the AV"))?;
    let mv = cfg.vehicles.iter().find(|m| m.id == rear).expect("queued id");
    let err = |e: crate::error::ModelError| invalid(e.to_string());
    GameContext::new(
        AgentView::new(cfg.av.d, cfg.av.v).map_err(err)?,
        AgentView::new(mv.d, mv.v).map_err(err)?,
        DrivingStyle::new(cfg.av.omega, cfg.av.headway).map_err(err)?,
        DrivingStyle::new(0.5, 1.0).map_err(err)?,
        cfg.game_headway,
    )
    .map_err(err)
}
