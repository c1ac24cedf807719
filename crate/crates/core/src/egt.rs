//! Two-population replicator dynamics for the 2×2 merging game.
//!
//! Strategy index 0 is Yield for both players; index 1 is Merge for the AV
//! and Accelerate for the MV. `p` is the probability that the AV yields and
//! `q` the probability that the MV yields.

use std::fmt;

use crate::error::EgtError;

/// Eigenvalues smaller than this in magnitude are treated as zero.
pub const EIGEN_ZERO_TOL: f64 = 1e-9;

/// Bimatrix of fitness values, indexed `[av_move][mv_move]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffMatrix {
    /// AV fitness.
    pub u: [[f64; 2]; 2],
    /// MV fitness.
    pub v: [[f64; 2]; 2],
}

impl PayoffMatrix {
    pub const ZERO: PayoffMatrix = PayoffMatrix {
        u: [[0.0; 2]; 2],
        v: [[0.0; 2]; 2],
    };

    pub fn new(u: [[f64; 2]; 2], v: [[f64; 2]; 2]) -> Result<Self, EgtError> {
        let m = PayoffMatrix { u, v };
        if m.entries().iter().all(|x| x.is_finite()) {
            Ok(m)
        } else {
            Err(EgtError::NonFinitePayoff)
        }
    }

    /// Entries in the order u11, u12, u21, u22, v11, v12, v21, v22.
    pub fn entries(&self) -> [f64; 8] {
        [
            self.u[0][0],
            self.u[0][1],
            self.u[1][0],
            self.u[1][1],
            self.v[0][0],
            self.v[0][1],
            self.v[1][0],
            self.v[1][1],
        ]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PayoffMatrix {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.u[i][j] = f(self.u[i][j]);
                out.v[i][j] = f(self.v[i][j]);
            }
        }
        out
    }
}

/// Mixed strategy state `(p, q)` on the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyState {
    pub p: f64,
    pub q: f64,
}

impl StrategyState {
    pub fn new(p: f64, q: f64) -> Result<Self, EgtError> {
        let ok = |x: f64| (0.0..=1.0).contains(&x);
        if ok(p) && ok(q) {
            Ok(StrategyState { p, q })
        } else {
            Err(EgtError::OutOfSimplex { p, q })
        }
    }

    pub const fn pure(p_yield: bool, q_yield: bool) -> Self {
        StrategyState {
            p: if p_yield { 1.0 } else { 0.0 },
            q: if q_yield { 1.0 } else { 0.0 },
        }
    }

    pub fn is_pure(&self) -> bool {
        (self.p == 0.0 || self.p == 1.0) && (self.q == 0.0 || self.q == 1.0)
    }

    fn clamped(p: f64, q: f64) -> Self {
        StrategyState {
            p: p.clamp(0.0, 1.0),
            q: q.clamp(0.0, 1.0),
        }
    }
}

impl fmt::Display for StrategyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.p, self.q)
    }
}

/// The four pure rest points E1..E4.
pub const PURE_POINTS: [StrategyState; 4] = [
    StrategyState::pure(false, false),
    StrategyState::pure(false, true),
    StrategyState::pure(true, false),
    StrategyState::pure(true, true),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedPayoffs {
    /// AV payoff when yielding.
    pub av_yield: f64,
    /// AV payoff when merging.
    pub av_merge: f64,
    /// MV payoff when yielding.
    pub mv_yield: f64,
    /// MV payoff when accelerating.
    pub mv_accel: f64,
    /// AV population mean.
    pub av_mean: f64,
    /// MV population mean.
    pub mv_mean: f64,
}

pub fn expected_payoffs(m: &PayoffMatrix, s: StrategyState) -> ExpectedPayoffs {
    let (p, q) = (s.p, s.q);
    // written as a + t(b - a) so that equal entries come back exactly
    let mix = |t: f64, b: f64, a: f64| a + t * (b - a);
    let av_yield = mix(q, m.u[0][0], m.u[0][1]);
    let av_merge = mix(q, m.u[1][0], m.u[1][1]);
    let mv_yield = mix(p, m.v[0][0], m.v[1][0]);
    let mv_accel = mix(p, m.v[0][1], m.v[1][1]);
    ExpectedPayoffs {
        av_yield,
        av_merge,
        mv_yield,
        mv_accel,
        av_mean: p * av_yield + (1.0 - p) * av_merge,
        mv_mean: q * mv_yield + (1.0 - q) * mv_accel,
    }
}

/// Replicator vector field `(dp/dt, dq/dt)`.
pub fn replicator_rhs(m: &PayoffMatrix, s: StrategyState) -> (f64, f64) {
    let e = expected_payoffs(m, s);
    (
        s.p * (1.0 - s.p) * (e.av_yield - e.av_merge),
        s.q * (1.0 - s.q) * (e.mv_yield - e.mv_accel),
    )
}

/// Jacobian diagonal at a pure rest point, where the off-diagonal terms vanish.
pub fn eigenvalues_at(m: &PayoffMatrix, point: StrategyState) -> Result<(f64, f64), EgtError> {
    if !point.is_pure() {
        return Err(EgtError::NotPurePoint {
            p: point.p,
            q: point.q,
        });
    }
    let e = expected_payoffs(m, point);
    Ok((
        (1.0 - 2.0 * point.p) * (e.av_yield - e.av_merge),
        (1.0 - 2.0 * point.q) * (e.mv_yield - e.mv_accel),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureFixedPoint {
    pub point: StrategyState,
    pub eigenvalues: (f64, f64),
    /// Both eigenvalues strictly below `-EIGEN_ZERO_TOL`.
    pub stable: bool,
}

/// Outcome of the ESS search.
#[derive(Debug, Clone, PartialEq)]
pub enum Ess {
    Unique(StrategyState),
    /// Several stable pure points. `selected` is the risk-dominant one
    /// (largest `λ1·λ2`), absent on an exact tie.
    Multiple {
        points: Vec<StrategyState>,
        selected: Option<StrategyState>,
    },
    NoPure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    /// E1(0,0), E2(0,1), E3(1,0), E4(1,1) in that order.
    pub pure_points: [PureFixedPoint; 4],
    /// Interior rest point; never stable.
    pub interior: Option<StrategyState>,
    pub ess: Ess,
}

impl EquilibriumReport {
    /// The ESS used for decisions, if any.
    pub fn selected(&self) -> Option<StrategyState> {
        match &self.ess {
            Ess::Unique(s) => Some(*s),
            Ess::Multiple { selected, .. } => *selected,
            Ess::NoPure => None,
        }
    }

    pub fn is_multiple(&self) -> bool {
        matches!(self.ess, Ess::Multiple { .. })
    }

    pub fn stable_points(&self) -> impl Iterator<Item = StrategyState> + '_ {
        self.pure_points
            .iter()
            .filter(|fp| fp.stable)
            .map(|fp| fp.point)
    }

    /// Sorted fixed point list: the four pure points plus the interior one.
    pub fn fixed_points(&self) -> Vec<StrategyState> {
        let mut out: Vec<_> = self.pure_points.iter().map(|fp| fp.point).collect();
        out.extend(self.interior);
        out
    }
}

fn interior_point(m: &PayoffMatrix) -> Option<StrategyState> {
    // AV indifference fixes q, MV indifference fixes p.
    let a_yy = m.u[0][0] - m.u[1][0];
    let a_ya = m.u[0][1] - m.u[1][1];
    let b_yy = m.v[0][0] - m.v[0][1];
    let b_ma = m.v[1][0] - m.v[1][1];
    let dq = a_yy - a_ya;
    let dp = b_yy - b_ma;
    if dq == 0.0 || dp == 0.0 {
        return None;
    }
    let q = -a_ya / dq;
    let p = -b_ma / dp;
    let open = |x: f64| x > 0.0 && x < 1.0;
    (open(p) && open(q)).then_some(StrategyState { p, q })
}

pub fn solve_ess(m: &PayoffMatrix) -> EquilibriumReport {
    let pure_points = PURE_POINTS.map(|point| {
        let eigenvalues = eigenvalues_at(m, point).expect("pure point");
        let stable = eigenvalues.0 < -EIGEN_ZERO_TOL && eigenvalues.1 < -EIGEN_ZERO_TOL;
        PureFixedPoint {
            point,
            eigenvalues,
            stable,
        }
    });

    let stable: Vec<&PureFixedPoint> = pure_points.iter().filter(|fp| fp.stable).collect();
    let ess = match stable.as_slice() {
        [] => Ess::NoPure,
        [only] => Ess::Unique(only.point),
        many => {
            let det = |fp: &PureFixedPoint| fp.eigenvalues.0 * fp.eigenvalues.1;
            let best = many.iter().map(|fp| det(fp)).fold(f64::NEG_INFINITY, f64::max);
            let winners: Vec<_> = many.iter().filter(|fp| det(fp) == best).collect();
            Ess::Multiple {
                points: many.iter().map(|fp| fp.point).collect(),
                selected: (winners.len() == 1).then(|| winners[0].point),
            }
        }
    };

    EquilibriumReport {
        pure_points,
        interior: interior_point(m),
        ess,
    }
}

/// Fixed-step RK4 integration of the replicator field, clamped to the unit
/// square after every step. Returns `steps + 1` states including `s0`.
pub fn integrate_replicator(
    m: &PayoffMatrix,
    s0: StrategyState,
    dt: f64,
    steps: usize,
) -> Result<Vec<StrategyState>, EgtError> {
    if !(dt > 0.0) || steps == 0 {
        return Err(EgtError::BadIntegration { dt, steps });
    }
    let f = |s: StrategyState| replicator_rhs(m, s);
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = s0;
    out.push(s);
    for _ in 0..steps {
        let k1 = f(s);
        let k2 = f(StrategyState::clamped(s.p + 0.5 * dt * k1.0, s.q + 0.5 * dt * k1.1));
        let k3 = f(StrategyState::clamped(s.p + 0.5 * dt * k2.0, s.q + 0.5 * dt * k2.1));
        let k4 = f(StrategyState::clamped(s.p + dt * k3.0, s.q + dt * k3.1));
        s = StrategyState::clamped(
            s.p + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            s.q + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        );
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(u: [[f64; 2]; 2], v: [[f64; 2]; 2]) -> PayoffMatrix {
        PayoffMatrix::new(u, v).unwrap()
    }

    #[test]
    fn zero_matrix_payoffs_vanish() {
        let e = expected_payoffs(&PayoffMatrix::ZERO, StrategyState::new(0.5, 0.5).unwrap());
        for x in [e.av_yield, e.av_merge, e.mv_yield, e.mv_accel, e.av_mean, e.mv_mean] {
            assert_eq!(x, 0.0);
        }
    }

    #[test]
    fn column_constant_rows() {
        let mat = m([[3.0, 3.0], [-1.5, -1.5]], [[0.0; 2]; 2]);
        for q in [0.0, 0.3, 1.0] {
            let e = expected_payoffs(&mat, StrategyState::new(0.2, q).unwrap());
            assert_eq!(e.av_yield, 3.0);
            assert_eq!(e.av_merge, -1.5);
        }
    }

    #[test]
    fn rhs_direct_substitution() {
        let mat = m([[2.0, 0.0], [0.0, 0.0]], [[0.0; 2]; 2]);
        let (dp, _) = replicator_rhs(&mat, StrategyState::new(0.5, 1.0).unwrap());
        assert_abs_diff_eq!(dp, 0.5, epsilon = 1e-15);
        let any = m([[1.0, -2.0], [3.0, 4.0]], [[5.0, 6.0], [-7.0, 8.0]]);
        assert_eq!(replicator_rhs(&any, StrategyState::pure(true, false)), (0.0, 0.0));
    }

    #[test]
    fn eigenvalue_single_term() {
        let c = 1.75;
        let mat = m([[-c, 0.0], [0.0, 0.0]], [[0.0; 2]; 2]);
        let (l1, _) = eigenvalues_at(&mat, StrategyState::pure(false, true)).unwrap();
        assert_abs_diff_eq!(l1, -c, epsilon = 1e-15);
    }

    #[test]
    fn eigenvalues_reject_interior() {
        let err = eigenvalues_at(&PayoffMatrix::ZERO, StrategyState::new(0.5, 1.0).unwrap());
        assert!(matches!(err, Err(EgtError::NotPurePoint { .. })));
    }

    #[test]
    fn zero_matrix_has_no_ess() {
        let r = solve_ess(&PayoffMatrix::ZERO);
        assert_eq!(r.ess, Ess::NoPure);
        assert!(r.pure_points.iter().all(|fp| fp.eigenvalues == (0.0, 0.0)));
        assert_eq!(r.selected(), None);
    }

    #[test]
    fn marginal_eigenvalue_is_not_ess() {
        // λ2 at (0,1) is -1e-12, below the zero tolerance.
        let mat = m([[-1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1e-12, 0.0]]);
        let r = solve_ess(&mat);
        assert!(!r.pure_points[1].stable);
    }

    #[test]
    fn interior_point_of_matching_pennies_like_game() {
        // AV prefers to match, MV prefers to mismatch: interior centre, no ESS.
        let mat = m([[1.0, -1.0], [-1.0, 1.0]], [[-1.0, 1.0], [1.0, -1.0]]);
        let r = solve_ess(&mat);
        let c = r.interior.expect("interior rest point");
        assert_abs_diff_eq!(c.p, 0.5);
        assert_abs_diff_eq!(c.q, 0.5);
        assert_eq!(r.ess, Ess::NoPure);
        let (dp, dq) = replicator_rhs(&mat, c);
        assert_abs_diff_eq!(dp, 0.0);
        assert_abs_diff_eq!(dq, 0.0);
    }

    #[test]
    fn risk_dominant_selection_and_tie() {
        // Coordination game: (Merge,Yield) and (Yield,Accelerate) both strict.
        let mat = m([[0.0, 1.0], [4.0, 0.0]], [[0.0, 1.0], [4.0, 0.0]]);
        let r = solve_ess(&mat);
        assert!(r.is_multiple());
        assert_eq!(r.selected(), Some(StrategyState::pure(false, true)));

        let sym = m([[0.0, 1.0], [1.0, 0.0]], [[0.0, 1.0], [1.0, 0.0]]);
        let r = solve_ess(&sym);
        assert!(r.is_multiple());
        assert_eq!(r.selected(), None);
    }

    #[test]
    fn integrator_contract() {
        let mat = m([[1.0, -2.0], [3.0, 4.0]], [[5.0, 6.0], [-7.0, 8.0]]);
        for p in PURE_POINTS {
            let tr = integrate_replicator(&mat, p, 0.01, 100).unwrap();
            assert_eq!(tr.len(), 101);
            assert!(tr.iter().all(|s| *s == p));
        }
        let tr = integrate_replicator(&PayoffMatrix::ZERO, StrategyState::new(0.3, 0.8).unwrap(), 0.1, 10)
            .unwrap();
        assert!(tr.iter().all(|s| s.p == 0.3 && s.q == 0.8));
        assert!(integrate_replicator(&mat, PURE_POINTS[0], 0.0, 10).is_err());
        assert!(integrate_replicator(&mat, PURE_POINTS[0], 0.1, 0).is_err());
    }

    #[test]
    fn strategy_state_validation() {
        assert!(StrategyState::new(-0.1, 0.5).is_err());
        assert!(StrategyState::new(0.5, 1.1).is_err());
        assert!(PayoffMatrix::new([[f64::NAN, 0.0], [0.0, 0.0]], [[0.0; 2]; 2]).is_err());
    }
}
