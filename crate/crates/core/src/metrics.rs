//! Per-run comfort and safety metrics and their batch aggregation.

use rayon::prelude::*;

use crate::error::MetricsError;
use crate::runner::{run_scenario, Policy, SimConfig, SimTrace, StepRecord};
use crate::traffic::VehicleId;

/// Upper clamp on TTC samples, seconds.
pub const TTC_CAP: f64 = 10.0;

/// Vehicle whose final speed is reported.
pub const TERMINAL_VEHICLE: VehicleId = VehicleId(5);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// Mean |Δa/Δt| over every MV and step pair, m/s³.
    pub mean_jerk: f64,
    pub max_jerk: f64,
    pub terminal_speed_mv5: f64,
    pub collided: bool,
    /// Mean of capped TTC samples, or the cap when there are none.
    pub mean_ttc: f64,
    pub ttc_samples: usize,
    /// No closing pair was ever seen, so `mean_ttc` is just the cap.
    pub ttc_undefined: bool,
}

/// First differences of `a` divided by `dt`, as magnitudes.
pub fn jerk_series(a: &[f64], dt: f64) -> Vec<f64> {
    a.windows(2).map(|w| ((w[1] - w[0]) / dt).abs()).collect()
}

/// Gap over closing speed, capped. `None` unless the follower is closing.
pub fn ttc(gap: f64, closing_speed: f64) -> Option<f64> {
    ttc_with_cap(gap, closing_speed, TTC_CAP)
}

fn ttc_with_cap(gap: f64, closing_speed: f64, cap: f64) -> Option<f64> {
    if closing_speed > 0.0 {
        Some((gap.max(0.0) / closing_speed).min(cap))
    } else {
        None
    }
}

fn ttc_samples(trace: &SimTrace, cap: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for row in &trace.steps {
        let Some(av) = row.iter().find(|r| r.id.is_av()) else {
            continue;
        };
        let find = |id: VehicleId| row.iter().find(|r| r.id == id);
        for r in row.iter().filter(|r| !r.id.is_av() && r.s < av.s) {
            let Some(lead) = r.leader.and_then(find) else {
                continue;
            };
            if let Some(x) = ttc_with_cap(bumper_gap(r, lead), r.v - lead.v, cap) {
                out.push(x);
            }
        }
    }
    out
}

fn bumper_gap(follower: &StepRecord, leader: &StepRecord) -> f64 {
    // all vehicles share the default length in recorded traces
    leader.s - follower.s - crate::traffic::DEFAULT_LENGTH
}

pub fn compute_metrics(trace: &SimTrace) -> Result<MetricsReport, MetricsError> {
    compute_metrics_with_cap(trace, TTC_CAP)
}

/// As [`compute_metrics`] with a different TTC cap; `f64::INFINITY` turns
/// the cap off.
pub fn compute_metrics_with_cap(trace: &SimTrace, ttc_cap: f64) -> Result<MetricsReport, MetricsError> {
    let n = trace.n_steps();
    if n < 2 {
        return Err(MetricsError::TooShort(n));
    }
    let mut jerks = Vec::new();
    for &id in trace.vehicle_ids.iter().filter(|id| !id.is_av()) {
        let col = trace.column(id).unwrap_or_default();
        let a: Vec<f64> = col.iter().map(|r| r.a).collect();
        jerks.extend(jerk_series(&a, trace.dt));
    }
    let mean_jerk = if jerks.is_empty() {
        0.0
    } else {
        jerks.iter().sum::<f64>() / jerks.len() as f64
    };
    let max_jerk = jerks.iter().copied().fold(0.0, f64::max);

    let terminal = trace
        .steps
        .last()
        .and_then(|row| row.iter().find(|r| r.id == TERMINAL_VEHICLE))
        .ok_or_else(|| MetricsError::MissingVehicle(TERMINAL_VEHICLE.to_string()))?;

    let samples = ttc_samples(trace, ttc_cap);
    let (mean_ttc, undefined) = if samples.is_empty() {
        (ttc_cap, true)
    } else {
        (samples.iter().sum::<f64>() / samples.len() as f64, false)
    };

    Ok(MetricsReport {
        mean_jerk,
        max_jerk,
        terminal_speed_mv5: terminal.v,
        collided: !trace.collisions.is_empty(),
        mean_ttc,
        ttc_samples: samples.len(),
        ttc_undefined: undefined,
    })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        if xs.is_empty() {
            return Stat::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Stat {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub seed: u64,
    pub result: Result<MetricsReport, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub policy: Policy,
    pub base_seed: u64,
    /// Successful runs that were aggregated.
    pub n_runs: usize,
    pub failures: Vec<(u64, String)>,
    pub mean_jerk: Stat,
    pub max_jerk: Stat,
    pub terminal_speed_mv5: Stat,
    pub mean_ttc: Stat,
    /// Percent of aggregated runs with a collision.
    pub collision_rate: f64,
    pub ttc_undefined_runs: usize,
}

impl BatchSummary {
    pub fn from_outcomes(policy: Policy, base_seed: u64, runs: &[RunOutcome]) -> BatchSummary {
        let ok: Vec<&MetricsReport> = runs.iter().filter_map(|r| r.result.as_ref().ok()).collect();
        let failures = runs
            .iter()
            .filter_map(|r| r.result.as_ref().err().map(|e| (r.seed, e.clone())))
            .collect();
        let col = |f: fn(&MetricsReport) -> f64| Stat::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        let collided = ok.iter().filter(|r| r.collided).count();
        BatchSummary {
            policy,
            base_seed,
            n_runs: ok.len(),
            failures,
            mean_jerk: col(|r| r.mean_jerk),
            max_jerk: col(|r| r.max_jerk),
            terminal_speed_mv5: col(|r| r.terminal_speed_mv5),
            mean_ttc: col(|r| r.mean_ttc),
            collision_rate: if ok.is_empty() {
                0.0
            } else {
                100.0 * collided as f64 / ok.len() as f64
            },
            ttc_undefined_runs: ok.iter().filter(|r| r.ttc_undefined).count(),
        }
    }
}

pub fn run_one(cfg: &SimConfig) -> Result<(SimTrace, MetricsReport), String> {
    let trace = run_scenario(cfg)?;
    let report = compute_metrics(&trace).map_err(|e| e.to_string())?;
    Ok((trace, report))
}

/// Seeds `base_seed..base_seed + n`, run in parallel, reported in seed order.
pub fn run_batch_outcomes(cfg: &SimConfig, n: usize, base_seed: u64, policy: Policy) -> Vec<RunOutcome> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed + i;
            let c = cfg.clone().with_seed(seed).with_policy(policy);
            RunOutcome {
                seed,
                result: run_one(&c).map(|(_, r)| r),
            }
        })
        .collect()
}

pub fn run_batch(cfg: &SimConfig, n: usize, base_seed: u64, policy: Policy) -> BatchSummary {
    let runs = run_batch_outcomes(cfg, n, base_seed, policy);
    BatchSummary::from_outcomes(policy, base_seed, &runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jerk_arithmetic() {
        let j = jerk_series(&[0.0, 0.1, 0.3], 0.1);
        assert!((j[0] - 1.0).abs() < 1e-12 && (j[1] - 2.0).abs() < 1e-12);
        assert!(jerk_series(&[0.7; 10], 0.1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn ttc_definition() {
        assert_eq!(ttc(50.0, 10.0), Some(5.0));
        assert_eq!(ttc(50.0, 0.0), None);
        assert_eq!(ttc(50.0, -1.0), None);
        assert_eq!(ttc(500.0, 1.0), Some(TTC_CAP));
    }

    #[test]
    fn stat_of_singleton_and_pair() {
        assert_eq!(Stat::of(&[3.0]), Stat { mean: 3.0, std: 0.0 });
        assert_eq!(Stat::of(&[1.0, 3.0]), Stat { mean: 2.0, std: 1.0 });
        assert_eq!(Stat::of(&[]), Stat::default());
    }

    #[test]
    fn failures_are_not_aggregated() {
        let ok = MetricsReport {
            mean_jerk: 0.2,
            max_jerk: 0.4,
            terminal_speed_mv5: 10.0,
            collided: true,
            mean_ttc: 5.0,
            ttc_samples: 3,
            ttc_undefined: false,
        };
        let runs = vec![
            RunOutcome { seed: 0, result: Ok(ok) },
            RunOutcome { seed: 1, result: Err("bad".into()) },
        ];
        let s = BatchSummary::from_outcomes(Policy::Egt, 0, &runs);
        assert_eq!(s.n_runs, 1);
        assert_eq!(s.failures, vec![(1, "bad".to_string())]);
        assert_eq!(s.collision_rate, 100.0);
        assert_eq!(s.max_jerk.mean, 0.4);
    }
}
