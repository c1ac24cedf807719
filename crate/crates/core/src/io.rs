//! Trace CSV and key=value summaries.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::metrics::{BatchSummary, MetricsReport, RunOutcome, Stat};
use crate::runner::SimTrace;

pub const TRACE_HEADER: &str = "t,id,lane,s,v,a,decision,p_star,q_star,k_l,k_u,omega_hat";

/// Nine significant digits in the style of C's `%.9g`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.8e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_trace_csv<W: Write>(trace: &SimTrace, mut w: W) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for (k, row) in trace.steps.iter().enumerate() {
        let dec = trace.decision_at_step(k);
        for r in row {
            write!(
                w,
                "{},{},{},{},{},{}",
                fmt_num(r.t),
                r.id,
                r.lane,
                fmt_num(r.s),
                fmt_num(r.v),
                fmt_num(r.a)
            )?;
            match dec.filter(|_| r.id.is_av()) {
                Some(d) => {
                    let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
                    writeln!(
                        w,
                        ",{},{},{},{},{},{}",
                        d.maneuver.kind,
                        opt(d.profile.map(|s| s.p)),
                        opt(d.profile.map(|s| s.q)),
                        opt(d.belief.map(|b| b.k_l)),
                        opt(d.belief.map(|b| b.k_u)),
                        opt(d.belief.map(|b| b.omega_hat)),
                    )?;
                }
                None => writeln!(w, ",,,,,,")?,
            }
        }
    }
    Ok(())
}

pub fn trace_csv_string(trace: &SimTrace) -> String {
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn format_report(r: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mean_jerk={}", fmt_num(r.mean_jerk));
    let _ = writeln!(s, "max_jerk={}", fmt_num(r.max_jerk));
    let _ = writeln!(s, "terminal_speed_mv5={}", fmt_num(r.terminal_speed_mv5));
    let _ = writeln!(s, "collided={}", r.collided);
    let _ = writeln!(s, "mean_ttc={}", fmt_num(r.mean_ttc));
    let _ = writeln!(s, "ttc_samples={}", r.ttc_samples);
    let _ = writeln!(s, "ttc_undefined={}", r.ttc_undefined);
    s
}

pub fn format_summary(b: &BatchSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "policy={}", b.policy);
    let _ = writeln!(s, "base_seed={}", b.base_seed);
    let _ = writeln!(s, "n_runs={}", b.n_runs);
    let _ = writeln!(s, "failures={}", b.failures.len());
    let mut stat = |name: &str, st: &Stat| {
        let _ = writeln!(s, "{name}.mean={}", fmt_num(st.mean));
        let _ = writeln!(s, "{name}.std={}", fmt_num(st.std));
    };
    stat("mean_jerk", &b.mean_jerk);
    stat("max_jerk", &b.max_jerk);
    stat("terminal_speed_mv5", &b.terminal_speed_mv5);
    stat("mean_ttc", &b.mean_ttc);
    let _ = writeln!(s, "collision_rate={}", fmt_num(b.collision_rate));
    let _ = writeln!(s, "ttc_undefined_runs={}", b.ttc_undefined_runs);
    for (seed, msg) in &b.failures {
        let _ = writeln!(s, "failure.{seed}={}", msg.replace('\n', " "));
    }
    s
}

pub const RUNS_HEADER: &str = "seed,ok,mean_jerk,max_jerk,terminal_speed_mv5,collided,mean_ttc,ttc_undefined";

pub fn runs_csv_string(runs: &[RunOutcome]) -> String {
    let mut s = String::from(RUNS_HEADER);
    s.push('\n');
    for r in runs {
        match &r.result {
            Ok(m) => {
                let _ = writeln!(
                    s,
                    "{},true,{},{},{},{},{},{}",
                    r.seed,
                    fmt_num(m.mean_jerk),
                    fmt_num(m.max_jerk),
                    fmt_num(m.terminal_speed_mv5),
                    m.collided,
                    fmt_num(m.mean_ttc),
                    m.ttc_undefined
                );
            }
            Err(_) => {
                let _ = writeln!(s, "{},false,,,,,,", r.seed);
            }
        }
    }
    s
}
