//! Per-constraint propagation math shared by both engines.

use crate::model::{ActivityRecord, EngineConfig};
use crate::scalar::Scalar;

/// Bounds implied for one variable by one constraint. Infinite values mean
/// "no tightening from this side".
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCandidate<T = f64> {
    pub var: usize,
    pub new_lower: T,
    pub new_upper: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintClass {
    Redundant,
    Infeasible,
    Propagatable,
}

/// Result of applying a candidate to a variable's current bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tightening<T = f64> {
    NoChange,
    NewLower(T),
    NewUpper(T),
    Both(T, T),
    EmptyDomain,
}

impl<T: Copy> Tightening<T> {
    /// Number of bound sides that moved.
    pub fn changes(&self) -> usize {
        match self {
            Tightening::NoChange | Tightening::EmptyDomain => 0,
            Tightening::NewLower(_) | Tightening::NewUpper(_) => 1,
            Tightening::Both(..) => 2,
        }
    }

    /// Write the accepted values into `lower` / `upper`.
    pub fn apply(&self, lower: &mut T, upper: &mut T) {
        match *self {
            Tightening::NewLower(l) => *lower = l,
            Tightening::NewUpper(u) => *upper = u,
            Tightening::Both(l, u) => {
                *lower = l;
                *upper = u;
            }
            Tightening::NoChange | Tightening::EmptyDomain => {}
        }
    }
}

/// Minimum and maximum activity of one row under the given bounds.
///
/// Infinite terms are counted, never summed. Coefficients must be non-zero.
pub fn compute_row_activities<T: Scalar>(
    cols: &[usize],
    coefs: &[T],
    lower: &[T],
    upper: &[T],
) -> ActivityRecord<T> {
    let mut act = ActivityRecord::zero();
    for (&j, &a) in cols.iter().zip(coefs) {
        let (b_min, b_max) = if a > T::zero() {
            (lower[j], upper[j])
        } else {
            (upper[j], lower[j])
        };
        if b_min.is_infinite() {
            act.min_inf_count += 1;
        } else {
            act.min_finite = act.min_finite + a * b_min;
        }
        if b_max.is_infinite() {
            act.max_inf_count += 1;
        } else {
            act.max_finite = act.max_finite + a * b_max;
        }
    }
    act
}

/// Activities of the row with variable `j`'s own term removed.
///
/// When the only infinite contribution comes from `j` itself, the finite part
/// of the sum is exactly the residual.
#[inline]
pub fn residual_activities<T: Scalar>(
    act: &ActivityRecord<T>,
    a_j: T,
    lower_j: T,
    upper_j: T,
) -> (T, T) {
    let (b_min, b_max) = if a_j > T::zero() {
        (lower_j, upper_j)
    } else {
        (upper_j, lower_j)
    };
    let min_res = match act.min_inf_count {
        0 => act.min_finite - a_j * b_min,
        1 if b_min.is_infinite() => act.min_finite,
        _ => T::neg_infinity(),
    };
    let max_res = match act.max_inf_count {
        0 => act.max_finite - a_j * b_max,
        1 if b_max.is_infinite() => act.max_finite,
        _ => T::infinity(),
    };
    (min_res, max_res)
}

const ROUNDING_ULPS: f64 = 4.0;

/// `integrality_eps`, widened to a few ulps of `v` when the scalar
/// type is too coarse to resolve it.
#[inline]
fn integrality_slack<T: Scalar>(v: T, cfg: &EngineConfig) -> T {
    let ulps = T::epsilon() * T::from_f64(ROUNDING_ULPS) * v.abs().max(T::one());
    T::from_f64(cfg.integrality_eps).max(ulps)
}

/// New bounds for variable `var` implied by `lhs <= a_j x_j + residual <= rhs`.
#[allow(clippy::too_many_arguments)]
pub fn compute_bound_candidates<T: Scalar>(
    var: usize,
    a_j: T,
    lhs: T,
    rhs: T,
    min_res: T,
    max_res: T,
    var_integral: bool,
    cfg: &EngineConfig,
) -> BoundCandidate<T> {
    let threshold = T::from_f64(cfg.infinity_threshold);
    let binding = |side: T, res: T| -> Option<T> {
        if side.is_infinite() || res.is_infinite() {
            return None;
        }
        let v = (side - res) / a_j;
        (v.is_finite() && v.abs() < threshold).then_some(v)
    };
    let from_rhs = binding(rhs, min_res);
    let from_lhs = binding(lhs, max_res);
    let (lo, up) = if a_j > T::zero() {
        (from_lhs, from_rhs)
    } else {
        (from_rhs, from_lhs)
    };
    let mut new_lower = lo.unwrap_or(T::neg_infinity());
    let mut new_upper = up.unwrap_or(T::infinity());
    if var_integral {
        if new_lower.is_finite() {
            new_lower = (new_lower - integrality_slack(new_lower, cfg)).ceil();
        }
        if new_upper.is_finite() {
            new_upper = (new_upper + integrality_slack(new_upper, cfg)).floor();
        }
    }
    BoundCandidate { var, new_lower, new_upper }
}

/// Feasibility slack used for the infeasibility test around a side value.
#[inline]
fn slack<T: Scalar>(side: T, cfg: &EngineConfig) -> T {
    T::from_f64(cfg.improvement_abs) + T::from_f64(cfg.improvement_rel) * side.abs().max(T::one())
}

pub fn classify_constraint<T: Scalar>(
    act: &ActivityRecord<T>,
    lhs: T,
    rhs: T,
    cfg: &EngineConfig,
) -> ConstraintClass {
    let min_act = act.min_activity();
    let max_act = act.max_activity();
    // Infinite sides never witness infeasibility.
    let over = rhs.is_finite() && min_act > rhs + slack(rhs, cfg);
    let under = lhs.is_finite() && lhs > max_act + slack(lhs, cfg);
    if over || under {
        ConstraintClass::Infeasible
    } else if lhs <= min_act && max_act <= rhs {
        ConstraintClass::Redundant
    } else {
        ConstraintClass::Propagatable
    }
}

/// Minimum improvement over `old` for a new bound to be accepted.
#[inline]
fn step<T: Scalar>(old: T, cfg: &EngineConfig) -> T {
    T::from_f64(cfg.improvement_abs) + T::from_f64(cfg.improvement_rel) * old.abs().max(T::one())
}

/// `Some(candidate)` if it raises `old` by more than the improvement step.
#[inline]
pub fn accept_lower<T: Scalar>(old: T, candidate: T, cfg: &EngineConfig) -> Option<T> {
    if !candidate.is_finite() {
        return None;
    }
    if old.is_infinite() || candidate > old + step(old, cfg) {
        Some(candidate)
    } else {
        None
    }
}

#[inline]
pub fn accept_upper<T: Scalar>(old: T, candidate: T, cfg: &EngineConfig) -> Option<T> {
    if !candidate.is_finite() {
        return None;
    }
    if old.is_infinite() || candidate < old - step(old, cfg) {
        Some(candidate)
    } else {
        None
    }
}

/// Combine already-accepted new bounds with the old ones.
///
/// Crossings larger than `improvement_abs` are an empty domain. Smaller
/// crossings are closed by pulling the moved side back onto the other one,
/// which never loosens either bound relative to `old_lower` / `old_upper`.
pub fn settle<T: Scalar>(
    old_lower: T,
    old_upper: T,
    new_lower: Option<T>,
    new_upper: Option<T>,
    cfg: &EngineConfig,
) -> Tightening<T> {
    let mut l = new_lower.unwrap_or(old_lower);
    let mut u = new_upper.unwrap_or(old_upper);
    if l > u + T::from_f64(cfg.improvement_abs) {
        return Tightening::EmptyDomain;
    }
    if l > u {
        match (new_lower.is_some(), new_upper.is_some()) {
            (true, false) => l = u,
            (false, true) => u = l,
            (true, true) => {
                let v = u.max(old_lower);
                l = v;
                u = v;
            }
            (false, false) => return Tightening::NoChange,
        }
    }
    match (l != old_lower, u != old_upper) {
        (false, false) => Tightening::NoChange,
        (true, false) => Tightening::NewLower(l),
        (false, true) => Tightening::NewUpper(u),
        (true, true) => Tightening::Both(l, u),
    }
}

/// Apply a candidate to `[old_lower, old_upper]` under the improvement threshold.
pub fn tighten<T: Scalar>(
    old_lower: T,
    old_upper: T,
    cand: &BoundCandidate<T>,
    cfg: &EngineConfig,
) -> Tightening<T> {
    let new_lower = accept_lower(old_lower, cand.new_lower, cfg);
    let new_upper = accept_upper(old_upper, cand.new_upper, cfg);
    if new_lower.is_none() && new_upper.is_none() {
        return Tightening::NoChange;
    }
    settle(old_lower, old_upper, new_lower, new_upper, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    fn cfg() -> EngineConfig {
        EngineConfig::default()
    }

    #[test]
    fn activities_by_hand() {
        // x - 2y with x in [0, 2], y in [1, 3]
        let act = compute_row_activities(&[0, 1], &[1.0, -2.0], &[0.0, 1.0], &[2.0, 3.0]);
        assert_eq!(act.min_finite, -6.0);
        assert_eq!(act.max_finite, 0.0);
        assert_eq!((act.min_inf_count, act.max_inf_count), (0, 0));
    }

    #[test]
    fn activities_single_infinite_term() {
        let act = compute_row_activities(&[0], &[1.0], &[-INF], &[5.0]);
        assert_eq!(act, ActivityRecord { min_finite: 0.0, max_finite: 5.0, min_inf_count: 1, max_inf_count: 0 });
    }

    #[test]
    fn activities_empty_row() {
        let act = compute_row_activities::<f64>(&[], &[], &[], &[]);
        assert_eq!(act, ActivityRecord::zero());
    }

    #[test]
    fn residuals_by_hand() {
        let act = ActivityRecord { min_finite: -6.0, max_finite: 0.0, min_inf_count: 0, max_inf_count: 0 };
        assert_eq!(residual_activities(&act, 1.0, 0.0, 2.0), (-6.0, -2.0));

        let act = ActivityRecord { min_finite: 0.0, max_finite: 5.0, min_inf_count: 1, max_inf_count: 0 };
        assert_eq!(residual_activities(&act, 1.0, -INF, 5.0), (0.0, 0.0));

        let act = ActivityRecord { min_finite: 3.0, max_finite: 5.0, min_inf_count: 2, max_inf_count: 0 };
        assert_eq!(residual_activities(&act, 1.0, -INF, 5.0).0, -INF);
        assert_eq!(residual_activities(&act, -1.0, 0.0, 1.0).0, -INF);
    }

    #[test]
    fn residual_infinite_elsewhere() {
        // One infinite term that is not j's own: residual stays infinite.
        let act = ActivityRecord { min_finite: 3.0, max_finite: 5.0, min_inf_count: 1, max_inf_count: 0 };
        assert_eq!(residual_activities(&act, 1.0, 0.0, 1.0).0, -INF);
    }

    #[test]
    fn candidates_by_hand() {
        // 2x + 3y <= 10, x, y in [0, 10]
        let c = compute_bound_candidates(0, 2.0, -INF, 10.0, 0.0, 30.0, false, &cfg());
        assert_eq!(c.new_upper, 5.0);
        assert_eq!(c.new_lower, -INF);

        let c = compute_bound_candidates(1, 3.0, -INF, 10.0, 0.0, 20.0, true, &cfg());
        assert_eq!(c.new_upper, 3.0);

        let c = compute_bound_candidates(1, 3.0, -INF, INF, 0.0, 20.0, false, &cfg());
        assert_eq!(c.new_upper, INF);
    }

    #[test]
    fn candidates_negative_coefficient() {
        // -x + y <= 0 with y in [0, 4]: x >= y >= 0 for the lower side.
        // For x: a = -1, min_res over y = 0, max_res = 4.
        let c = compute_bound_candidates(0, -1.0, -INF, 0.0, 0.0, 4.0, false, &cfg());
        assert_eq!(c.new_lower, 0.0);
        assert_eq!(c.new_upper, INF);
    }

    #[test]
    fn integral_rounding_guards_roundoff() {
        let c = compute_bound_candidates(0, 1.0, 3.0 - 1e-12, INF, 0.0, 0.0, true, &cfg());
        assert_eq!(c.new_lower, 3.0);
        let c = compute_bound_candidates(0, 1.0, -INF, 3.0 - 1e-12, 0.0, 0.0, true, &cfg());
        assert_eq!(c.new_upper, 3.0);
    }

    #[test]
    fn huge_candidates_are_not_binding() {
        let c = compute_bound_candidates(0, 1e-30, -INF, 1.0, 0.0, 0.0, false, &cfg());
        assert_eq!(c.new_upper, INF);
    }

    #[test]
    fn classification_by_hand() {
        let act = ActivityRecord { min_finite: -6.0, max_finite: 0.0, min_inf_count: 0, max_inf_count: 0 };
        assert_eq!(classify_constraint(&act, -10.0, 10.0, &cfg()), ConstraintClass::Redundant);
        assert_eq!(classify_constraint(&act, -INF, -2.0, &cfg()), ConstraintClass::Propagatable);
        let act = ActivityRecord { min_finite: 11.0, max_finite: 20.0, min_inf_count: 0, max_inf_count: 0 };
        assert_eq!(classify_constraint(&act, -INF, 10.0, &cfg()), ConstraintClass::Infeasible);
    }

    #[test]
    fn tighten_examples() {
        let cand = |l, u| BoundCandidate { var: 0, new_lower: l, new_upper: u };
        assert_eq!(tighten(0.0, 10.0, &cand(-INF, 5.0), &cfg()), Tightening::NewUpper(5.0));
        assert_eq!(tighten(0.0, 10.0, &cand(-INF, 10.0 - 1e-12), &cfg()), Tightening::NoChange);
        assert_eq!(tighten(0.0, 10.0, &cand(7.0, 3.0), &cfg()), Tightening::EmptyDomain);
        assert_eq!(tighten(-INF, INF, &cand(1.0, 2.0), &cfg()), Tightening::Both(1.0, 2.0));
    }

    #[test]
    fn tiny_crossing_is_closed_monotonically() {
        let cfg = cfg();
        // New lower overshoots the old upper by less than improvement_abs.
        assert_eq!(settle(0.0, 10.0, Some(10.0 + 5e-8), None, &cfg), Tightening::NewLower(10.0));
        assert_eq!(settle(0.0, 10.0, None, Some(-5e-8), &cfg), Tightening::NewUpper(0.0));
        assert_eq!(settle(0.0, 10.0, Some(4.0 + 5e-8), Some(4.0), &cfg), Tightening::Both(4.0, 4.0));
    }

    #[test]
    fn tighten_is_idempotent() {
        let c = BoundCandidate { var: 0, new_lower: 2.5, new_upper: 7.0 };
        let (mut l, mut u) = (0.0, 10.0);
        let t = tighten(l, u, &c, &cfg());
        assert_eq!(t.changes(), 2);
        t.apply(&mut l, &mut u);
        assert_eq!(tighten(l, u, &c, &cfg()), Tightening::NoChange);
    }

    #[test]
    fn narrow_scalar_mode() {
        let act = compute_row_activities::<f32>(&[0, 1], &[2.0, 3.0], &[0.0, 0.0], &[10.0, 10.0]);
        let (min_res, max_res) = residual_activities(&act, 2.0f32, 0.0, 10.0);
        let c = compute_bound_candidates(0, 2.0f32, f32::NEG_INFINITY, 10.0, min_res, max_res, false, &cfg());
        assert_eq!(c.new_upper, 5.0f32);
    }
}
