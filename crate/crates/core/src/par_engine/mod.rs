//! Round-synchronous parallel domain propagation.
//!
//! Every round reads a frozen copy of the bounds (`bounds_in`), computes the
//! activities of all rows block by block, maps every non-zero to a bound
//! candidate and folds the useful candidates into `bounds_out` with atomic
//! max/min updates. The fold is commutative, so the result of a round does
//! not depend on how blocks were scheduled across workers.

mod exec;
mod partition;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::Instant;

pub use partition::partition_row_blocks;

use crate::error::Result;
use crate::model::{
    ActivityRecord, BlockKind, EngineConfig, ProblemInstance, PropagationResult, RowBlockPartition, ScalarMode,
    Status, VariableBounds,
};
use crate::propcore::{
    accept_lower, accept_upper, classify_constraint, compute_bound_candidates, compute_row_activities,
    residual_activities, settle, ConstraintClass, Tightening,
};
use crate::scalar::{AtomicScalar, Scalar};
use crate::working::{to_bounds, WorkingProblem};
use exec::Executor;

/// Bounds state of one round: a frozen input copy and concurrently updated outputs.
pub struct RoundSnapshot<T: Scalar> {
    pub lower_in: Vec<T>,
    pub upper_in: Vec<T>,
    lower_out: Vec<T::Atomic>,
    upper_out: Vec<T::Atomic>,
    pub change_flag: AtomicBool,
    pub change_count: AtomicUsize,
    infeasible: AtomicBool,
}

impl<T: Scalar> RoundSnapshot<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Self {
        let lower_out = lower.iter().map(|&v| T::Atomic::new(v)).collect();
        let upper_out = upper.iter().map(|&v| T::Atomic::new(v)).collect();
        Self {
            lower_in: lower,
            upper_in: upper,
            lower_out,
            upper_out,
            change_flag: AtomicBool::new(false),
            change_count: AtomicUsize::new(0),
            infeasible: AtomicBool::new(false),
        }
    }

    pub fn from_bounds(bounds: &VariableBounds) -> Self {
        Self::new(
            bounds.lower.iter().map(|&v| T::from_f64(v)).collect(),
            bounds.upper.iter().map(|&v| T::from_f64(v)).collect(),
        )
    }

    pub fn bounds_in(&self) -> VariableBounds {
        to_bounds(&self.lower_in, &self.upper_in)
    }

    pub fn bounds_out(&self) -> VariableBounds {
        let lower: Vec<T> = self.lower_out.iter().map(|c| c.load()).collect();
        let upper: Vec<T> = self.upper_out.iter().map(|c| c.load()).collect();
        to_bounds(&lower, &upper)
    }

    /// Reset the outputs and flags to the current inputs.
    fn begin(&self) {
        for (cell, &v) in self.lower_out.iter().zip(&self.lower_in) {
            cell.store(v);
        }
        for (cell, &v) in self.upper_out.iter().zip(&self.upper_in) {
            cell.store(v);
        }
        self.change_flag.store(false, Ordering::Relaxed);
        self.change_count.store(0, Ordering::Relaxed);
        self.infeasible.store(false, Ordering::Relaxed);
    }

    /// Make this round's outputs the next round's inputs.
    pub fn commit(&mut self) {
        for (dst, cell) in self.lower_in.iter_mut().zip(&self.lower_out) {
            *dst = cell.load();
        }
        for (dst, cell) in self.upper_in.iter_mut().zip(&self.upper_out) {
            *dst = cell.load();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundReport {
    pub changed: bool,
    pub infeasible: bool,
    /// Accepted bound-side updates this round.
    pub changes: usize,
}

/// Everything a round needs that does not change between rounds.
pub struct ParallelPropagator<'a, T: Scalar> {
    instance: &'a ProblemInstance,
    cfg: &'a EngineConfig,
    partition: RowBlockPartition,
    coefs: Vec<T>,
    lhs: Vec<T>,
    rhs: Vec<T>,
    exec: Executor,
}

impl<'a, T: Scalar> ParallelPropagator<'a, T> {
    /// Partition the matrix, convert the data and start the worker pool.
    pub fn new(instance: &'a ProblemInstance, cfg: &'a EngineConfig) -> Result<(Self, RoundSnapshot<T>)> {
        let partition = partition_row_blocks(&instance.matrix, cfg);
        Self::with_partition(instance, cfg, partition)
    }

    pub fn with_partition(
        instance: &'a ProblemInstance,
        cfg: &'a EngineConfig,
        partition: RowBlockPartition,
    ) -> Result<(Self, RoundSnapshot<T>)> {
        cfg.validate()?;
        instance.validate()?;
        partition.validate(&instance.matrix, cfg.nnz_budget, cfg.vector_threshold)?;
        let work = WorkingProblem::<T>::new(instance, cfg.infinity_threshold);
        let snap = RoundSnapshot::new(work.lower, work.upper);
        let prop = Self {
            instance,
            cfg,
            partition,
            coefs: work.coefs,
            lhs: work.lhs,
            rhs: work.rhs,
            exec: Executor::new(cfg.worker_count),
        };
        Ok((prop, snap))
    }

    pub fn partition(&self) -> &RowBlockPartition {
        &self.partition
    }

    pub fn is_parallel(&self) -> bool {
        self.exec.is_parallel()
    }

    /// One propagation round. Reads only `snap.lower_in` / `snap.upper_in`;
    /// the settled result is left in the snapshot's outputs.
    pub fn round(&self, snap: &RoundSnapshot<T>) -> RoundReport {
        snap.begin();
        self.exec.for_each(self.partition.num_blocks(), |b| self.process_block(b, snap));

        let n = self.instance.num_cols();
        let changes = self.exec.sum(n, |j| self.settle_variable(j, snap));
        let infeasible = snap.infeasible.load(Ordering::Acquire);
        snap.change_count.store(changes, Ordering::Release);
        snap.change_flag.store(changes > 0, Ordering::Release);
        RoundReport { changed: changes > 0, infeasible, changes }
    }

    fn row_activity(&self, row: usize, snap: &RoundSnapshot<T>) -> ActivityRecord<T> {
        let m = &self.instance.matrix;
        let range = m.row_ptr[row]..m.row_ptr[row + 1];
        compute_row_activities(&m.col_idx[range.clone()], &self.coefs[range], &snap.lower_in, &snap.upper_in)
    }

    /// Activity of a long row from partial sums over `nnz_budget`-sized
    /// chunks, combined pairwise in index order.
    fn wide_row_activity(&self, row: usize, snap: &RoundSnapshot<T>) -> ActivityRecord<T> {
        let m = &self.instance.matrix;
        let start = m.row_ptr[row];
        let end = m.row_ptr[row + 1];
        let chunk = self.cfg.nnz_budget;
        let num_chunks = (end - start).div_ceil(chunk);
        let mut parts = self.exec.map_collect(num_chunks, |c| {
            let lo = start + c * chunk;
            let hi = (lo + chunk).min(end);
            compute_row_activities(&m.col_idx[lo..hi], &self.coefs[lo..hi], &snap.lower_in, &snap.upper_in)
        });
        while parts.len() > 1 {
            parts = parts
                .chunks(2)
                .map(|p| if p.len() == 2 { p[0].combine(p[1]) } else { p[0] })
                .collect();
        }
        parts.pop().unwrap_or_else(ActivityRecord::zero)
    }

    fn process_block(&self, block: usize, snap: &RoundSnapshot<T>) {
        let rows = self.partition.block_rows(block);
        match self.partition.kinds[block] {
            BlockKind::Stream | BlockKind::VectorNarrow => {
                let acts: Vec<_> = rows.clone().map(|i| self.row_activity(i, snap)).collect();
                for (i, act) in rows.zip(acts) {
                    self.propagate_row(i, &act, snap, 0..1, 1);
                }
            }
            BlockKind::VectorWide => {
                let row = rows.start;
                let act = self.wide_row_activity(row, snap);
                let m = &self.instance.matrix;
                let num_chunks = m.row_nnz(row).div_ceil(self.cfg.nnz_budget).max(1);
                self.exec.for_each(num_chunks, |c| self.propagate_row(row, &act, snap, c..c + 1, num_chunks));
            }
        }
    }

    /// Candidates for the non-zeros of `row` in the given chunk range, folded
    /// into the snapshot outputs.
    fn propagate_row(
        &self,
        row: usize,
        act: &ActivityRecord<T>,
        snap: &RoundSnapshot<T>,
        chunks: std::ops::Range<usize>,
        num_chunks: usize,
    ) {
        let (lhs, rhs) = (self.lhs[row], self.rhs[row]);
        if chunks.start == 0 && classify_constraint(act, lhs, rhs, self.cfg) == ConstraintClass::Infeasible {
            snap.infeasible.store(true, Ordering::Release);
        }
        let m = &self.instance.matrix;
        let start = m.row_ptr[row];
        let end = m.row_ptr[row + 1];
        let (lo, hi) = if num_chunks == 1 {
            (start, end)
        } else {
            let chunk = self.cfg.nnz_budget;
            (start + chunks.start * chunk, (start + chunks.end * chunk).min(end))
        };
        for k in lo..hi {
            let j = m.col_idx[k];
            let a = self.coefs[k];
            let (lower_j, upper_j) = (snap.lower_in[j], snap.upper_in[j]);
            let (min_res, max_res) = residual_activities(act, a, lower_j, upper_j);
            let cand =
                compute_bound_candidates(j, a, lhs, rhs, min_res, max_res, self.instance.integral[j], self.cfg);
            // Candidates that do not beat the previous round's bound are discarded
            // before touching shared state.
            if let Some(l) = accept_lower(lower_j, cand.new_lower, self.cfg) {
                snap.lower_out[j].fetch_max(l);
            }
            if let Some(u) = accept_upper(upper_j, cand.new_upper, self.cfg) {
                snap.upper_out[j].fetch_min(u);
            }
        }
    }

    /// Resolve crossings for variable `j` and count its moved sides.
    fn settle_variable(&self, j: usize, snap: &RoundSnapshot<T>) -> usize {
        let (old_l, old_u) = (snap.lower_in[j], snap.upper_in[j]);
        let l = snap.lower_out[j].load();
        let u = snap.upper_out[j].load();
        let new_l = (l != old_l).then_some(l);
        let new_u = (u != old_u).then_some(u);
        if new_l.is_none() && new_u.is_none() {
            return 0;
        }
        let t = settle(old_l, old_u, new_l, new_u, self.cfg);
        match t {
            Tightening::EmptyDomain => {
                snap.infeasible.store(true, Ordering::Release);
                // Keep the crossing visible in the outputs.
                t.changes()
            }
            _ => {
                let (mut lo, mut up) = (old_l, old_u);
                t.apply(&mut lo, &mut up);
                snap.lower_out[j].store(lo);
                snap.upper_out[j].store(up);
                t.changes()
            }
        }
    }
}

/// Iterates propagation rounds until a stopping condition holds.
pub trait RoundDriver {
    fn drive(&self, round_limit: usize, round: &mut dyn FnMut() -> RoundReport) -> DriveOutcome;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DriveOutcome {
    pub status: Status,
    pub per_round_changes: Vec<usize>,
}

/// The round loop runs on the host thread and checks one change flag per round.
#[derive(Clone, Copy, Debug, Default)]
pub struct HostLoop;

impl RoundDriver for HostLoop {
    fn drive(&self, round_limit: usize, round: &mut dyn FnMut() -> RoundReport) -> DriveOutcome {
        let mut per_round_changes = Vec::new();
        let mut status = Status::RoundLimit;
        while per_round_changes.len() < round_limit {
            let report = round();
            per_round_changes.push(report.changes);
            if report.infeasible {
                status = Status::Infeasible;
                break;
            }
            if !report.changed {
                status = Status::Converged;
                break;
            }
        }
        DriveOutcome { status, per_round_changes }
    }
}

/// Run a single round from the given bounds with a fresh propagator.
///
/// Returns the report and the bounds after the round.
pub fn propagate_round_parallel(
    instance: &ProblemInstance,
    bounds_in: &VariableBounds,
    partition: &RowBlockPartition,
    cfg: &EngineConfig,
) -> Result<(RoundReport, VariableBounds)> {
    let (prop, _) = ParallelPropagator::<f64>::with_partition(instance, cfg, partition.clone())?;
    let snap = RoundSnapshot::<f64>::from_bounds(bounds_in);
    let report = prop.round(&snap);
    Ok((report, snap.bounds_out()))
}

pub fn propagate_parallel(instance: &ProblemInstance, cfg: &EngineConfig) -> Result<PropagationResult> {
    propagate_parallel_with(instance, cfg, &HostLoop)
}

pub fn propagate_parallel_with(
    instance: &ProblemInstance,
    cfg: &EngineConfig,
    driver: &dyn RoundDriver,
) -> Result<PropagationResult> {
    match cfg.scalar_mode {
        ScalarMode::Wide64 => run::<f64>(instance, cfg, driver),
        ScalarMode::Narrow32 => run::<f32>(instance, cfg, driver),
    }
}

fn run<T: Scalar>(instance: &ProblemInstance, cfg: &EngineConfig, driver: &dyn RoundDriver) -> Result<PropagationResult> {
    let (prop, mut snap) = ParallelPropagator::<T>::new(instance, cfg)?;

    let start = Instant::now();
    let outcome = driver.drive(cfg.round_limit, &mut || {
        let report = prop.round(&snap);
        snap.commit();
        report
    });
    let elapsed = start.elapsed();

    Ok(PropagationResult {
        bounds: snap.bounds_in(),
        status: outcome.status,
        rounds_executed: outcome.per_round_changes.len(),
        total_bound_changes: outcome.per_round_changes.iter().sum(),
        per_round_changes: outcome.per_round_changes,
        elapsed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::gen_cascade;
    use crate::model::SparseMatrix;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn cascade_first_round_changes_one_bound() {
        let inst = gen_cascade(3).unwrap();
        let cfg = EngineConfig::default();
        let part = partition_row_blocks(&inst.matrix, &cfg);
        let (report, out) = propagate_round_parallel(&inst, &inst.bounds, &part, &cfg).unwrap();
        assert!(report.changed);
        assert_eq!(report.changes, 1);
        assert_eq!(out.upper, vec![0.0, 0.0, 1e6, 1e6]);
    }

    #[test]
    fn cascade_needs_one_round_per_link() {
        for m in [2, 3, 7] {
            let r = propagate_parallel(&gen_cascade(m).unwrap(), &EngineConfig::default()).unwrap();
            assert_eq!(r.status, Status::Converged);
            assert_eq!(r.rounds_executed, m + 1);
            assert_eq!(r.per_round_changes, [vec![1; m], vec![0]].concat());
        }
    }

    #[test]
    fn fixed_point_converges_in_one_round() {
        let inst = gen_cascade(4).unwrap();
        let cfg = EngineConfig::default();
        let first = propagate_parallel(&inst, &cfg).unwrap();
        let mut again = inst.clone();
        again.bounds = first.bounds.clone();
        let r = propagate_parallel(&again, &cfg).unwrap();
        assert_eq!(r.rounds_executed, 1);
        assert_eq!(r.total_bound_changes, 0);
        assert_eq!(r.bounds, first.bounds);
    }

    #[test]
    fn round_limit_enforced() {
        let cfg = EngineConfig { round_limit: 5, ..Default::default() };
        let r = propagate_parallel(&gen_cascade(50).unwrap(), &cfg).unwrap();
        assert_eq!(r.status, Status::RoundLimit);
        assert_eq!(r.rounds_executed, 5);
    }

    #[test]
    fn two_constraints_min_merge() {
        // x + y <= 5 and x <= 3 with x, y in [0, 10]: both tighten x's upper bound.
        let matrix = SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)], 2, 2).unwrap();
        let inst = ProblemInstance::new(
            "merge",
            matrix,
            vec![-INF, -INF],
            vec![5.0, 3.0],
            VariableBounds::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap(),
            vec![false, false],
        )
        .unwrap();
        let cfg = EngineConfig::default();
        let part = partition_row_blocks(&inst.matrix, &cfg);
        let (report, out) = propagate_round_parallel(&inst, &inst.bounds, &part, &cfg).unwrap();
        assert_eq!(out.upper, vec![3.0, 5.0]);
        // x's upper counted once, y's upper once.
        assert_eq!(report.changes, 2);
    }

    #[test]
    fn infeasible_detected() {
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
        let r = propagate_parallel(&inst, &EngineConfig::default()).unwrap();
        assert_eq!(r.status, Status::Infeasible);
    }

    #[test]
    fn wide_rows_match_narrow_processing() {
        // One dense row longer than the budget, evaluated in chunks.
        let n = 300;
        let mut t: Vec<_> = (0..n).map(|j| (0, j, 1.0 + (j % 7) as f64)).collect();
        t.push((1, 0, 1.0));
        let matrix = SparseMatrix::from_triplets(&t, 2, n).unwrap();
        let inst = ProblemInstance::new(
            "wide",
            matrix,
            vec![-INF, 1.0],
            vec![500.0, INF],
            VariableBounds::new(vec![0.0; n], vec![10.0; n]).unwrap(),
            vec![false; n],
        )
        .unwrap();
        let wide = EngineConfig { nnz_budget: 64, vector_threshold: 16, ..Default::default() };
        let part = partition_row_blocks(&inst.matrix, &wide);
        assert_eq!(part.kinds[0], BlockKind::VectorWide);
        let a = propagate_parallel(&inst, &wide).unwrap();
        let b = propagate_parallel(&inst, &EngineConfig::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.per_round_changes, b.per_round_changes);
        for (x, y) in a.bounds.upper.iter().zip(&b.bounds.upper) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}
