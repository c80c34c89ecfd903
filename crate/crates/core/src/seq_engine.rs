//! Sequential domain propagation with constraint marking.
//!
//! Constraints are scanned in index order each round. Accepted bound changes
//! are visible immediately to every later constraint, and every constraint
//! containing a changed variable is marked for reprocessing.

use std::time::Instant;

use crate::error::Result;
use crate::model::{ColumnMajorMatrix, EngineConfig, ProblemInstance, PropagationResult, ScalarMode, Status};
use crate::propcore::{
    classify_constraint, compute_bound_candidates, compute_row_activities, residual_activities, tighten,
    ConstraintClass, Tightening,
};
use crate::scalar::Scalar;
use crate::working::{to_bounds, WorkingProblem};

/// Per-constraint mark flags, scanned in ascending index order.
#[derive(Clone, Debug)]
pub struct MarkSet {
    marked: Vec<bool>,
}

impl MarkSet {
    pub fn all(num_rows: usize) -> Self {
        Self { marked: vec![true; num_rows] }
    }

    #[inline]
    pub fn is_marked(&self, row: usize) -> bool {
        self.marked[row]
    }

    #[inline]
    pub fn unmark(&mut self, row: usize) {
        self.marked[row] = false;
    }

    /// Mark every constraint with a non-zero in `col`.
    #[inline]
    pub fn mark_column(&mut self, csc: &ColumnMajorMatrix, col: usize) {
        for &row in csc.col(col).0 {
            self.marked[row] = true;
        }
    }

    pub fn count(&self) -> usize {
        self.marked.iter().filter(|&&m| m).count()
    }
}

/// Work counters of a sequential run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SeqStats {
    /// Constraints taken off the mark set and processed, summed over rounds.
    pub constraints_processed: usize,
}

pub fn propagate_sequential(instance: &ProblemInstance, cfg: &EngineConfig) -> Result<PropagationResult> {
    propagate_sequential_with_stats(instance, cfg).map(|(r, _)| r)
}

pub fn propagate_sequential_with_stats(
    instance: &ProblemInstance,
    cfg: &EngineConfig,
) -> Result<(PropagationResult, SeqStats)> {
    cfg.validate()?;
    instance.validate()?;
    let csc = instance.matrix.to_csc();
    Ok(match cfg.scalar_mode {
        ScalarMode::Wide64 => run::<f64>(instance, &csc, cfg),
        ScalarMode::Narrow32 => run::<f32>(instance, &csc, cfg),
    })
}

fn run<T: Scalar>(
    instance: &ProblemInstance,
    csc: &ColumnMajorMatrix,
    cfg: &EngineConfig,
) -> (PropagationResult, SeqStats) {
    let matrix = &instance.matrix;
    let WorkingProblem { coefs, lhs, rhs, mut lower, mut upper } = WorkingProblem::<T>::new(instance, cfg.infinity_threshold);
    let mut marks = MarkSet::all(matrix.num_rows);
    let mut stats = SeqStats::default();
    let mut per_round_changes = Vec::new();
    let mut status = Status::RoundLimit;

    let start = Instant::now();
    'rounds: while per_round_changes.len() < cfg.round_limit {
        let mut round_changes = 0;
        for i in 0..matrix.num_rows {
            if !marks.is_marked(i) {
                continue;
            }
            marks.unmark(i);
            stats.constraints_processed += 1;

            let range = matrix.row_ptr[i]..matrix.row_ptr[i + 1];
            let cols = &matrix.col_idx[range.clone()];
            let row_coefs = &coefs[range];
            let act = compute_row_activities(cols, row_coefs, &lower, &upper);
            match classify_constraint(&act, lhs[i], rhs[i], cfg) {
                ConstraintClass::Redundant => continue,
                ConstraintClass::Infeasible => {
                    per_round_changes.push(round_changes);
                    status = Status::Infeasible;
                    break 'rounds;
                }
                ConstraintClass::Propagatable => {}
            }

            for (&j, &a) in cols.iter().zip(row_coefs) {
                let (min_res, max_res) = residual_activities(&act, a, lower[j], upper[j]);
                let cand = compute_bound_candidates(
                    j,
                    a,
                    lhs[i],
                    rhs[i],
                    min_res,
                    max_res,
                    instance.integral[j],
                    cfg,
                );
                match tighten(lower[j], upper[j], &cand, cfg) {
                    Tightening::NoChange => {}
                    Tightening::EmptyDomain => {
                        per_round_changes.push(round_changes);
                        status = Status::Infeasible;
                        break 'rounds;
                    }
                    t => {
                        t.apply(&mut lower[j], &mut upper[j]);
                        round_changes += t.changes();
                        marks.mark_column(csc, j);
                    }
                }
            }
        }
        per_round_changes.push(round_changes);
        if round_changes == 0 {
            status = Status::Converged;
            break;
        }
    }
    let elapsed = start.elapsed();

    let result = PropagationResult {
        bounds: to_bounds(&lower, &upper),
        status,
        rounds_executed: per_round_changes.len(),
        total_bound_changes: per_round_changes.iter().sum(),
        per_round_changes,
        elapsed,
    };
    (result, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::gen_cascade;
    use crate::model::{SparseMatrix, VariableBounds};

    const INF: f64 = f64::INFINITY;

    #[test]
    fn cascade_three_resolves_in_one_sweep() {
        let inst = gen_cascade(3).unwrap();
        let r = propagate_sequential(&inst, &EngineConfig::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.rounds_executed, 2);
        assert_eq!(r.per_round_changes, vec![3, 0]);
        assert_eq!(&r.bounds.upper[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn integral_toy_instance() {
        // x + y <= 1 and x >= 1, x, y in [0, 1] integral.
        let matrix = SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)], 2, 2).unwrap();
        let inst = ProblemInstance::new(
            "toy",
            matrix,
            vec![-INF, 1.0],
            vec![1.0, INF],
            VariableBounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            vec![true, true],
        )
        .unwrap();
        let r = propagate_sequential(&inst, &EngineConfig::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.bounds.lower, vec![1.0, 0.0]);
        assert_eq!(r.bounds.upper, vec![1.0, 0.0]);
    }

    #[test]
    fn empty_domain_is_infeasible() {
        let matrix = SparseMatrix::from_triplets(&[(0, 0, 1.0)], 1, 1).unwrap();
        let inst = ProblemInstance::new(
            "infeasible",
            matrix,
            vec![5.0],
            vec![INF],
            VariableBounds::new(vec![0.0], vec![1.0]).unwrap(),
            vec![false],
        )
        .unwrap();
        let r = propagate_sequential(&inst, &EngineConfig::default()).unwrap();
        assert_eq!(r.status, Status::Infeasible);
    }

    #[test]
    fn round_limit_stops_reverse_cascade() {
        // Reverse-ordered chain needs one round per link.
        let m = 6;
        let mut t = Vec::new();
        for k in 1..=m {
            let row = m - k;
            t.push((row, k, 1.0));
            t.push((row, k - 1, -1.0));
        }
        let matrix = SparseMatrix::from_triplets(&t, m, m + 1).unwrap();
        let mut upper = vec![1e6; m + 1];
        upper[0] = 0.0;
        let inst = ProblemInstance::new(
            "reverse",
            matrix,
            vec![-INF; m],
            vec![0.0; m],
            VariableBounds::new(vec![0.0; m + 1], upper).unwrap(),
            vec![false; m + 1],
        )
        .unwrap();
        let cfg = EngineConfig { round_limit: 3, ..Default::default() };
        let r = propagate_sequential(&inst, &cfg).unwrap();
        assert_eq!(r.status, Status::RoundLimit);
        assert_eq!(r.rounds_executed, 3);
        let r = propagate_sequential(&inst, &EngineConfig::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.rounds_executed, m + 1);
    }
}
